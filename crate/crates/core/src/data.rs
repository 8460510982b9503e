//! Boundary and initial data: the lateral payoffs `f̄`, `ḡ` on the exterior of
//! Ω, the initial payoff `u0`, and the terminal payoff rule of the game.
//!
//! Analytic descriptors are evaluated directly everywhere (so they are their
//! own Lipschitz extension). Tabulated data goes through a McShane extension.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, DomainSpec, PointClass, SpaceTimeGrid};

/// Which board the token is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Board {
    /// Tug-of-war board; time drops by ε² per play.
    One,
    /// Random-walk board at frozen time.
    Two,
}

impl Board {
    pub fn index(self) -> u8 {
        match self {
            Board::One => 1,
            Board::Two => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Board> {
        match i {
            1 => Some(Board::One),
            2 => Some(Board::Two),
            _ => None,
        }
    }

    pub fn other(self) -> Board {
        match self {
            Board::One => Board::Two,
            Board::Two => Board::One,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionKind {
    /// `F(x) = min_s (value_s + L |x - x_s|)`.
    #[default]
    McShane,
    /// McShane clamped to the sample range, which keeps the sup norm.
    McShaneClamped,
}

/// Lipschitz extension of scattered samples in space-time. Sample positions
/// are `(x_1, …, x_N, t)`; distance is Euclidean in `N + 1` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzExtension {
    width: usize,
    positions: Vec<f64>,
    values: Vec<f64>,
    lipschitz: f64,
    kind: ExtensionKind,
    lo: f64,
    hi: f64,
}

impl LipschitzExtension {
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let w = self.width;
        let mut best = f64::INFINITY;
        for (s, value) in self.values.iter().enumerate() {
            let p = &self.positions[s * w..(s + 1) * w];
            let mut d2 = 0.0;
            for (a, b) in x.iter().chain(std::iter::once(&t)).zip(p) {
                d2 += (a - b) * (a - b);
            }
            best = best.min(value + self.lipschitz * d2.sqrt());
        }
        match self.kind {
            ExtensionKind::McShane => best,
            ExtensionKind::McShaneClamped => best.clamp(self.lo, self.hi),
        }
    }

    /// Largest `|F|` over all of space-time, when finite.
    pub fn sup_bound(&self) -> Option<f64> {
        match self.kind {
            ExtensionKind::McShane => None,
            ExtensionKind::McShaneClamped => Some(self.lo.abs().max(self.hi.abs())),
        }
    }
}

/// McShane-type extension of `rows = [x_1, …, x_N, t, value]`. When
/// `lipschitz` is `None` the sampled Lipschitz constant of the rows is used.
pub fn lipschitz_extend(
    rows: &[Vec<f64>],
    lipschitz: Option<f64>,
    kind: ExtensionKind,
) -> Result<LipschitzExtension> {
    let Some(first) = rows.first() else {
        return Err(Error::config("data.rows", "cannot extend an empty sample set"));
    };
    if first.len() < 2 {
        return Err(Error::config("data.rows", "rows need at least (t, value)"));
    }
    let width = first.len() - 1;
    let mut positions = Vec::with_capacity(rows.len() * width);
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width + 1 || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(
                format!("data.rows[{i}]"),
                format!("expected {} finite numbers", width + 1),
            ));
        }
        positions.extend_from_slice(&row[..width]);
        values.push(row[width]);
    }
    let sampled = {
        let mut l: f64 = 0.0;
        for a in 0..values.len() {
            for b in a + 1..values.len() {
                let d = dist(&positions[a * width..(a + 1) * width], &positions[b * width..(b + 1) * width]);
                if d > 0.0 {
                    l = l.max((values[a] - values[b]).abs() / d);
                } else if values[a] != values[b] {
                    return Err(Error::config("data.rows", format!("rows {a} and {b} share a position")));
                }
            }
        }
        l
    };
    let lipschitz = match lipschitz {
        Some(l) if l.is_finite() && l >= 0.0 => l,
        Some(_) => return Err(Error::config("data.lipschitz", "must be finite and non-negative")),
        None => sampled,
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LipschitzExtension {
        width,
        positions,
        values,
        lipschitz,
        kind,
        lo,
        hi,
    })
}

/// A data function of `(x, t)`. Functions of space only ignore `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataFn {
    Constant {
        value: f64,
    },
    /// `offset + coeffs·x + time·t`
    Affine {
        #[serde(default)]
        offset: f64,
        coeffs: Vec<f64>,
        #[serde(default)]
        time: f64,
    },
    /// `offset + linear·x + xᵀ matrix x + time·t`
    Quadratic {
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        linear: Vec<f64>,
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        time: f64,
    },
    /// `Σ_k coeffs[k] · |x - center|^k`
    Radial { center: Vec<f64>, coeffs: Vec<f64> },
    /// `height · max(0, 1 - |x - center| / radius)`
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
    },
    /// Tabulated samples `[x…, t, value]`, inline (`rows`) or from a CSV
    /// file (`path`), extended by McShane.
    Table {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        rows: Vec<Vec<f64>>,
        #[serde(default)]
        lipschitz: Option<f64>,
        #[serde(default)]
        extension: ExtensionKind,
        #[serde(skip)]
        resolved: Option<Arc<LipschitzExtension>>,
    },
    Sum {
        terms: Vec<DataFn>,
    },
    Scaled {
        factor: f64,
        inner: Box<DataFn>,
    },
}

impl DataFn {
    pub fn constant(value: f64) -> Self {
        DataFn::Constant { value }
    }

    pub fn affine(offset: f64, coeffs: &[f64]) -> Self {
        DataFn::Affine {
            offset,
            coeffs: coeffs.to_vec(),
            time: 0.0,
        }
    }

    pub fn quadratic(offset: f64, linear: &[f64], matrix: Vec<Vec<f64>>) -> Self {
        DataFn::Quadratic {
            offset,
            linear: linear.to_vec(),
            matrix,
            time: 0.0,
        }
    }

    pub fn bump(center: &[f64], radius: f64, height: f64) -> Self {
        DataFn::Bump {
            center: center.to_vec(),
            radius,
            height,
        }
    }

    /// Resolved table data from in-memory rows.
    pub fn table(rows: Vec<Vec<f64>>, lipschitz: Option<f64>, extension: ExtensionKind) -> Result<Self> {
        let ext = lipschitz_extend(&rows, lipschitz, extension)?;
        Ok(DataFn::Table {
            path: None,
            rows,
            lipschitz,
            extension,
            resolved: Some(Arc::new(ext)),
        })
    }

    pub fn plus(self, other: DataFn) -> Self {
        DataFn::Sum {
            terms: vec![self, other],
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        DataFn::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    /// Loads table files (relative to `base`) and builds their extensions.
    pub fn resolve(&self, base: &Path, field: &str) -> Result<DataFn> {
        Ok(match self {
            DataFn::Table {
                path,
                rows,
                lipschitz,
                extension,
                ..
            } => {
                let mut all = rows.clone();
                if let Some(p) = path {
                    let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                    all.extend(read_table_csv(&full, field)?);
                }
                let ext = lipschitz_extend(&all, *lipschitz, *extension)
                    .map_err(|e| Error::config(field, e.to_string()))?;
                DataFn::Table {
                    path: path.clone(),
                    rows: rows.clone(),
                    lipschitz: *lipschitz,
                    extension: *extension,
                    resolved: Some(Arc::new(ext)),
                }
            }
            DataFn::Sum { terms } => DataFn::Sum {
                terms: terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| t.resolve(base, &format!("{field}.terms[{i}]")))
                    .collect::<Result<_>>()?,
            },
            DataFn::Scaled { factor, inner } => DataFn::Scaled {
                factor: *factor,
                inner: Box::new(inner.resolve(base, &format!("{field}.inner"))?),
            },
            other => other.clone(),
        })
    }

    /// Checks descriptor shapes against the spatial dimension.
    pub fn validate(&self, dim: usize, field: &str) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self {
            DataFn::Constant { value } if !value.is_finite() => {
                Err(Error::config(field, "constant must be finite"))
            }
            DataFn::Affine {
                offset,
                coeffs,
                time,
            } => {
                if coeffs.len() != dim || !finite(coeffs) || !offset.is_finite() || !time.is_finite() {
                    Err(Error::config(field, format!("affine needs {dim} finite coeffs")))
                } else {
                    Ok(())
                }
            }
            DataFn::Quadratic {
                linear, matrix, ..
            } => {
                if !(linear.is_empty() || linear.len() == dim)
                    || matrix.len() != dim
                    || matrix.iter().any(|r| r.len() != dim || !finite(r))
                {
                    Err(Error::config(field, format!("quadratic needs a {dim}x{dim} matrix")))
                } else {
                    Ok(())
                }
            }
            DataFn::Radial { center, coeffs } => {
                if center.len() != dim || coeffs.is_empty() {
                    Err(Error::config(field, format!("radial needs a {dim}-d center and coeffs")))
                } else {
                    Ok(())
                }
            }
            DataFn::Bump { center, radius, .. } => {
                if center.len() != dim || !(*radius > 0.0) {
                    Err(Error::config(field, "bump needs a matching center and positive radius"))
                } else {
                    Ok(())
                }
            }
            DataFn::Table { resolved, .. } => match resolved {
                None => Err(Error::config(field, "table data was not resolved")),
                Some(ext) if ext.width != dim + 1 => Err(Error::config(
                    field,
                    format!("table rows need {} position columns", dim + 1),
                )),
                Some(_) => Ok(()),
            },
            DataFn::Sum { terms } => terms
                .iter()
                .enumerate()
                .try_for_each(|(i, t)| t.validate(dim, &format!("{field}.terms[{i}]"))),
            DataFn::Scaled { inner, factor } => {
                if !factor.is_finite() {
                    return Err(Error::config(field, "factor must be finite"));
                }
                inner.validate(dim, &format!("{field}.inner"))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            DataFn::Constant { value } => *value,
            DataFn::Affine {
                offset,
                coeffs,
                time,
            } => offset + coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + time * t,
            DataFn::Quadratic {
                offset,
                linear,
                matrix,
                time,
            } => {
                let mut v = offset + time * t;
                v += linear.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                for (i, row) in matrix.iter().enumerate() {
                    for (j, m) in row.iter().enumerate() {
                        v += x[i] * m * x[j];
                    }
                }
                v
            }
            DataFn::Radial { center, coeffs } => {
                let r = dist(x, center);
                coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
            }
            DataFn::Bump {
                center,
                radius,
                height,
            } => height * (1.0 - dist(x, center) / radius).max(0.0),
            DataFn::Table { resolved, .. } => resolved
                .as_ref()
                .expect("table data must be resolved before evaluation")
                .eval(x, t),
            DataFn::Sum { terms } => terms.iter().map(|d| d.eval(x, t)).sum(),
            DataFn::Scaled { factor, inner } => factor * inner.eval(x, t),
        }
    }

    /// A global bound on `|F|` when one is known in closed form.
    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            DataFn::Constant { value } => Some(value.abs()),
            DataFn::Bump { height, .. } => Some(height.abs()),
            DataFn::Table { resolved, .. } => resolved.as_ref().and_then(|e| e.sup_bound()),
            DataFn::Scaled { factor, inner } => inner.sup_bound().map(|b| b * factor.abs()),
            _ => None,
        }
    }
}

fn read_table_csv(path: &Path, field: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::config(field, format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::config(field, format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config(field, format!("{} row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Everything the game and the DPP need besides the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub domain: DomainSpec,
    /// Lateral payoff on board 1 (and at `t <= 0` outside Ω).
    pub f: DataFn,
    /// Lateral payoff on board 2.
    pub g: DataFn,
    /// Initial payoff inside Ω.
    pub u0: DataFn,
    pub eps: f64,
    pub horizon: f64,
    /// Board-2 switching scale: the token leaves board 2 with probability `K ε²`.
    pub k: f64,
}

impl ProblemData {
    pub fn new(domain: DomainSpec, f: DataFn, g: DataFn, u0: DataFn, eps: f64, horizon: f64) -> Self {
        ProblemData {
            domain,
            f,
            g,
            u0,
            eps,
            horizon,
            k: 1.0,
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    /// Same data on every function.
    pub fn uniform(domain: DomainSpec, data: DataFn, eps: f64, horizon: f64) -> Self {
        Self::new(domain, data.clone(), data.clone(), data, eps, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let dim = self.domain.dim();
        self.f.validate(dim, "data.f")?;
        self.g.validate(dim, "data.g")?;
        self.u0.validate(dim, "data.u0")?;
        if !(self.eps.is_finite() && self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::config("eps", "need 0 < eps < 1"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("horizon", "must be positive"));
        }
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::config("k", "coupling scale must be positive"));
        }
        if self.k * self.eps * self.eps >= 1.0 {
            return Err(Error::config("k", "K eps^2 must be below 1 (it is a switching probability)"));
        }
        Ok(())
    }

    /// Payoff collected when the game stops at `(x, t)` on `board`.
    pub fn terminal_payoff(&self, x: &[f64], t: f64, board: Board) -> Result<f64> {
        match self.domain.classify(x, t) {
            PointClass::Interior => Err(Error::Contract(format!(
                "terminal payoff requested at interior state x = {x:?}, t = {t}"
            ))),
            PointClass::LateralExit => Ok(match board {
                Board::One => self.f.eval(x, t),
                Board::Two => self.g.eval(x, t),
            }),
            PointClass::TimeExit => Ok(if self.domain.contains(x) {
                self.u0.eval(x, 0.0)
            } else {
                self.f.eval(x, 0.0)
            }),
        }
    }

    /// The bound constant `C = max(|f̄|, |ḡ|, |u0|)`. Closed-form bounds are
    /// used when known. Otherwise the function is sampled where the lattice
    /// DPP reads it and the maximum is widened by `L (h √N + ε²)`, so that `C`
    /// also bounds the continuum points the game can stop at.
    pub fn bound_constant(&self, grid: &SpaceTimeGrid) -> f64 {
        let collar = grid.interior_count()..grid.node_count();
        let times = grid.times();
        let slack = grid.h() * (grid.dim() as f64).sqrt() + grid.eps() * grid.eps();
        let f_sup = self.f.sup_bound().unwrap_or_else(|| {
            sampled_sup(collar.clone(), times, |n, t| self.f.eval(grid.coord(n), t))
                + slack * sampled_lipschitz(&self.f, grid, true)
        });
        let g_sup = self.g.sup_bound().unwrap_or_else(|| {
            sampled_sup(collar.clone(), &times[1..], |n, t| self.g.eval(grid.coord(n), t))
                + slack * sampled_lipschitz(&self.g, grid, true)
        });
        let u0_sup = self.u0.sup_bound().unwrap_or_else(|| {
            sampled_sup(0..grid.interior_count(), &[0.0], |n, _| self.u0.eval(grid.coord(n), 0.0))
                + slack * sampled_lipschitz(&self.u0, grid, false)
        });
        f_sup.max(g_sup).max(u0_sup)
    }

    /// Sampled Lipschitz constants and the `u0 = f(·, 0)` seam check.
    pub fn report(&self, grid: &SpaceTimeGrid) -> DataReport {
        let lf = sampled_lipschitz(&self.f, grid, true);
        let lg = sampled_lipschitz(&self.g, grid, true);
        let lu = sampled_lipschitz(&self.u0, grid, false);
        let h = grid.h();
        let mut gap: f64 = 0.0;
        for n in grid.interior_count()..grid.node_count() {
            let x = grid.coord(n);
            if self.domain.dist_to_domain(x) <= h * (1.0 + 1e-9) {
                gap = gap.max((self.u0.eval(x, 0.0) - self.f.eval(x, 0.0)).abs());
            }
        }
        let tolerance = 2.0 * lf.max(lu) * h + 1e-12;
        DataReport {
            lipschitz_f: lf,
            lipschitz_g: lg,
            lipschitz_u0: lu,
            bound: self.bound_constant(grid),
            compatibility_gap: gap,
            compatibility_tolerance: tolerance,
        }
    }

    pub fn max_lipschitz(&self, grid: &SpaceTimeGrid) -> f64 {
        let r = self.report(grid);
        r.lipschitz_f.max(r.lipschitz_g).max(r.lipschitz_u0)
    }
}

fn sampled_sup(nodes: std::ops::Range<usize>, times: &[f64], eval: impl Fn(usize, f64) -> f64) -> f64 {
    let mut s: f64 = 0.0;
    for &t in times {
        for n in nodes.clone() {
            s = s.max(eval(n, t).abs());
        }
    }
    s
}

/// Largest forward-difference gradient norm over the grid nodes, plus the
/// time derivative for space-time data.
fn sampled_lipschitz(data: &DataFn, grid: &SpaceTimeGrid, with_time: bool) -> f64 {
    let dim = grid.dim();
    let h = grid.h();
    let times = grid.times();
    let sample_times: &[f64] = if with_time { times } else { &times[..1] };
    let mut l: f64 = 0.0;
    let mut y = vec![0.0; dim];
    for n in 0..grid.node_count() {
        let x = grid.coord(n);
        for (ti, &t) in sample_times.iter().enumerate() {
            let v = data.eval(x, t);
            let mut g2 = 0.0;
            for axis in 0..dim {
                y.copy_from_slice(x);
                y[axis] += h;
                let d = (data.eval(&y, t) - v) / h;
                g2 += d * d;
            }
            if with_time && ti + 1 < sample_times.len() {
                let dt = sample_times[ti + 1] - t;
                if dt > 0.0 {
                    let d = (data.eval(x, sample_times[ti + 1]) - v) / dt;
                    g2 += d * d;
                }
            }
            l = l.max(g2.sqrt());
        }
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataReport {
    pub lipschitz_f: f64,
    pub lipschitz_g: f64,
    pub lipschitz_u0: f64,
    /// `C = max(‖f̄‖∞, ‖ḡ‖∞, ‖u0‖∞)`.
    pub bound: f64,
    pub compatibility_gap: f64,
    pub compatibility_tolerance: f64,
}

impl DataReport {
    pub fn compatible(&self) -> bool {
        self.compatibility_gap <= self.compatibility_tolerance
    }
}
