//! Time-marching solver for the coupled dynamic programming principle
//!
//! ```text
//! u(x,t) = ε² v(x,t) + (1-ε²) [½ sup_{B_ε(x)} u(·,t-ε²) + ½ inf_{B_ε(x)} u(·,t-ε²)]
//! v(x,t) = K ε² u(x,t) + (1-Kε²) ⨍_{B_ε(x)} v(·,t)
//! ```
//!
//! with `u = f̄`, `v = ḡ` outside Ω and `u = u0` at `t <= 0`.
//!
//! The first equation only looks one level back, so on each slice the
//! sup/inf term `S` is frozen and substituting `u` into the second equation
//! leaves the linear fixed point
//!
//! ```text
//! v = [K ε² (1-ε²) S + (1-Kε²) A v] / (1 - K ε⁴)
//! ```
//!
//! whose sup-norm contraction factor is `(1-Kε²)/(1-Kε⁴)` (`1/(1+ε²)` for
//! `K = 1`). After it converges `u = ε² v + (1-ε²) S`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::geometry::SpaceTimeGrid;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateScheme {
    /// Simultaneous update from the previous iterate.
    #[default]
    Jacobi,
    /// In-place sweep in node order.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Sup-norm bound on the last v-iterate increment.
    pub tol: f64,
    /// Iteration cap per slice; default `10 ⌈|ln tol| / ε²⌉`.
    pub max_iter: Option<usize>,
    pub scheme: UpdateScheme,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: None,
            scheme: UpdateScheme::Jacobi,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn iteration_cap(&self, eps: f64) -> usize {
        self.max_iter
            .unwrap_or_else(|| 10 * (self.tol.ln().abs() / (eps * eps)).ceil() as usize)
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceDiagnostics {
    pub level: usize,
    pub time: f64,
    /// The level's time was clamped to the horizon.
    pub clamped: bool,
    pub iterations: usize,
    /// Sup norm of the first increment `‖v¹ - v⁰‖`.
    pub initial_increment: f64,
    pub final_increment: f64,
    /// Largest ratio of successive increment norms, over increments above
    /// the rounding floor. `None` when fewer than two such increments.
    pub max_ratio: Option<f64>,
}

/// The value fields `u`, `v` indexed `[level][node]` over the grid's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePair {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub eps: f64,
    pub h: f64,
    pub k: f64,
    pub times: Vec<f64>,
    /// `C` used for the uniform bound.
    pub bound: f64,
    pub slices: Vec<SliceDiagnostics>,
}

impl ValuePair {
    pub fn levels(&self) -> usize {
        self.u.len() - 1
    }

    pub fn sup_norms(&self) -> (f64, f64) {
        let sup = |f: &Vec<Vec<f64>>| f.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        (sup(&self.u), sup(&self.v))
    }
}

/// `½ max + ½ min` of `slice` over the stencil of `node`.
pub fn half_sup_inf(grid: &SpaceTimeGrid, slice: &[f64], node: usize) -> f64 {
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for y in grid.stencil(node) {
        hi = hi.max(slice[y]);
        lo = lo.min(slice[y]);
    }
    0.5 * hi + 0.5 * lo
}

/// Equal-weight mean of `slice` over the stencil of `node`.
pub fn ball_average(grid: &SpaceTimeGrid, slice: &[f64], node: usize) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for y in grid.stencil(node) {
        s += slice[y];
        n += 1;
    }
    s / n as f64
}

/// Dense-lattice kernels for the interior nodes. Every interior node has the
/// full stencil, read as contiguous runs along the last axis.
struct Kernels<'a> {
    grid: &'a SpaceTimeGrid,
    cells: Vec<usize>,
}

impl<'a> Kernels<'a> {
    fn new(grid: &'a SpaceTimeGrid) -> Self {
        let cells = (0..grid.interior_count()).map(|n| grid.cell_of(n)).collect();
        Kernels { grid, cells }
    }

    fn scatter(&self, values: &[f64], dense: &mut [f64]) {
        for node in 0..self.grid.node_count() {
            dense[self.grid.cell_of(node)] = values[node];
        }
    }

    #[inline]
    fn sup_inf(&self, dense: &[f64], cell: usize) -> f64 {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for run in self.grid.stencil_runs() {
            let c = (cell as isize + run.base) as usize;
            for &x in &dense[c - run.half..=c + run.half] {
                hi = hi.max(x);
                lo = lo.min(x);
            }
        }
        0.5 * hi + 0.5 * lo
    }

    #[inline]
    fn average(&self, dense: &[f64], cell: usize) -> f64 {
        let mut s = 0.0;
        for run in self.grid.stencil_runs() {
            let c = (cell as isize + run.base) as usize;
            s += dense[c - run.half..=c + run.half].iter().sum::<f64>();
        }
        s / self.grid.stencil_size() as f64
    }

    fn sup_inf_all(&self, dense: &[f64]) -> Vec<f64> {
        self.cells
            .par_iter()
            .with_min_len(256)
            .map(|&c| self.sup_inf(dense, c))
            .collect()
    }
}

/// Result of one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub diagnostics: SliceDiagnostics,
}

/// Solves level `level` given the complete `u` slice of level `level - 1`
/// and an initial guess `v_init` (interior entries are used).
pub fn solve_slice(
    grid: &SpaceTimeGrid,
    data: &ProblemData,
    level: usize,
    u_prev: &[f64],
    v_init: &[f64],
    opts: &SolverOptions,
) -> Result<SliceSolution> {
    let kernels = Kernels::new(grid);
    let mut scratch = vec![0.0; grid.cell_count()];
    solve_slice_with(&kernels, &mut scratch, data, level, u_prev, v_init, opts)
}

fn solve_slice_with(
    kernels: &Kernels<'_>,
    scratch: &mut [f64],
    data: &ProblemData,
    level: usize,
    u_prev: &[f64],
    v_init: &[f64],
    opts: &SolverOptions,
) -> Result<SliceSolution> {
    let grid = kernels.grid;
    if level == 0 || level > grid.levels() {
        return Err(Error::Contract(format!("slice level {level} out of range")));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::config("solver.tol", "must be positive"));
    }
    let n_int = grid.interior_count();
    let n = grid.node_count();
    let t = grid.times()[level];
    let eps2 = data.eps * data.eps;
    let k = data.k;

    kernels.scatter(u_prev, scratch);
    let s = kernels.sup_inf_all(scratch);
    if let Some(i) = s.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite sup/inf at node {i}, level {level}: check the data"
        )));
    }

    let mut v = vec![0.0; n];
    v[..n_int].copy_from_slice(&v_init[..n_int]);
    for node in n_int..n {
        v[node] = data.g.eval(grid.coord(node), t);
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("non-finite v value at node {i}, level {level}")));
    }

    // v_new = A v + coupling (S - A v), with coupling = Kε²(1-ε²)/(1-Kε⁴);
    // the form is exact on constants.
    let coupling = k * eps2 * (1.0 - eps2) / (1.0 - k * eps2 * eps2);
    let cap = opts.iteration_cap(data.eps);
    let mut dense = vec![0.0; grid.cell_count()];
    kernels.scatter(&v, &mut dense);

    let mut iterations = 0;
    let mut initial_increment = 0.0;
    let mut previous: Option<f64> = None;
    let mut max_ratio: Option<f64> = None;
    let mut next = vec![0.0; n_int];
    let increment = loop {
        iterations += 1;
        let inc = match opts.scheme {
            UpdateScheme::Jacobi => {
                kernels
                    .cells
                    .par_iter()
                    .with_min_len(256)
                    .zip(s.par_iter())
                    .map(|(&c, &si)| {
                        let a = kernels.average(&dense, c);
                        a + coupling * (si - a)
                    })
                    .collect_into_vec(&mut next);
                let inc = next
                    .par_iter()
                    .zip(&v[..n_int])
                    .map(|(a, b)| (a - b).abs())
                    .reduce(|| 0.0, f64::max);
                v[..n_int].copy_from_slice(&next);
                for (node, &c) in kernels.cells.iter().enumerate() {
                    dense[c] = v[node];
                }
                inc
            }
            UpdateScheme::GaussSeidel => {
                let mut inc: f64 = 0.0;
                for (node, &c) in kernels.cells.iter().enumerate() {
                    let a = kernels.average(&dense, c);
                    let new = a + coupling * (s[node] - a);
                    inc = inc.max((new - v[node]).abs());
                    v[node] = new;
                    dense[c] = new;
                }
                inc
            }
        };
        if !inc.is_finite() {
            return Err(Error::Numeric(format!("non-finite iterate at level {level}")));
        }
        if iterations == 1 {
            initial_increment = inc;
        }
        if let Some(p) = previous {
            let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            if p > 1e3 * f64::EPSILON * scale {
                let r = inc / p;
                max_ratio = Some(max_ratio.map_or(r, |m: f64| m.max(r)));
            }
        }
        previous = Some(inc);
        if inc <= opts.tol {
            break inc;
        }
        if iterations >= cap {
            return Err(Error::Convergence {
                slice: level,
                iterations,
                increment: inc,
            });
        }
    };

    let mut u = vec![0.0; n];
    for node in 0..n_int {
        u[node] = s[node] + eps2 * (v[node] - s[node]);
    }
    for node in n_int..n {
        u[node] = data.f.eval(grid.coord(node), t);
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("non-finite u value at level {level}")));
    }

    Ok(SliceSolution {
        u,
        v,
        diagnostics: SliceDiagnostics {
            level,
            time: t,
            clamped: grid.is_clamped() && level == grid.levels(),
            iterations,
            initial_increment,
            final_increment: increment,
            max_ratio,
        },
    })
}

/// `u` at level 0: `u0` inside Ω and `f̄(·, 0)` on the collar.
pub fn initial_slice(grid: &SpaceTimeGrid, data: &ProblemData) -> Vec<f64> {
    (0..grid.node_count())
        .map(|n| {
            let x = grid.coord(n);
            if n < grid.interior_count() {
                data.u0.eval(x, 0.0)
            } else {
                data.f.eval(x, 0.0)
            }
        })
        .collect()
}

/// Marches the DPP over all time levels of `grid`.
///
/// Level 0 holds `u0` (and `f̄(·,0)` on the collar) in both `u` and `v`;
/// `v` has no meaning at `t <= 0` and the copy only keeps the layout uniform.
/// The first slice starts its iteration from `ḡ` clamped to `[-C, C]`, later
/// slices from the previous level.
pub fn solve_dpp(data: &ProblemData, grid: &SpaceTimeGrid, opts: &SolverOptions) -> Result<ValuePair> {
    data.validate()?;
    if data.domain != *grid.spec() || data.eps != grid.eps() {
        return Err(Error::config("grid", "grid was built for a different domain or eps"));
    }
    let bound = data.bound_constant(grid);
    let kernels = Kernels::new(grid);
    let mut scratch = vec![0.0; grid.cell_count()];

    let u0 = initial_slice(grid, data);
    let mut u = vec![u0.clone()];
    let mut v = vec![u0];
    let mut slices = Vec::with_capacity(grid.levels());
    let t1 = grid.times()[1.min(grid.levels())];
    let mut guess: Vec<f64> = (0..grid.interior_count())
        .map(|n| data.g.eval(grid.coord(n), t1).clamp(-bound, bound))
        .collect();

    for level in 1..=grid.levels() {
        let sol = solve_slice_with(&kernels, &mut scratch, data, level, &u[level - 1], &guess, opts)?;
        guess.copy_from_slice(&sol.v[..grid.interior_count()]);
        u.push(sol.u);
        v.push(sol.v);
        slices.push(sol.diagnostics);
    }

    Ok(ValuePair {
        u,
        v,
        eps: data.eps,
        h: grid.h(),
        k: data.k,
        times: grid.times().to_vec(),
        bound,
        slices,
    })
}

/// Per-node DPP residuals of a pair, levels `1..=M` over interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DppResidual {
    /// `|u - ε² v - (1-ε²) S|`, indexed `[level - 1][interior node]`.
    pub u: Vec<Vec<f64>>,
    /// `|v - Kε² u - (1-Kε²) A v|`.
    pub v: Vec<Vec<f64>>,
    pub max_u: f64,
    pub max_v: f64,
    /// `(level, node)` of the largest residual of either kind.
    pub worst: (usize, usize),
}

/// Evaluates both DPP equations on a solved (or manufactured) pair. Uses
/// the node-list stencil, independent of the solver's dense kernels.
pub fn dpp_residual(pair: &ValuePair, data: &ProblemData, grid: &SpaceTimeGrid) -> DppResidual {
    let eps2 = data.eps * data.eps;
    let k = data.k;
    let n_int = grid.interior_count();
    let mut out = DppResidual {
        u: Vec::new(),
        v: Vec::new(),
        max_u: 0.0,
        max_v: 0.0,
        worst: (0, 0),
    };
    let mut worst = -1.0;
    for level in 1..=pair.levels() {
        let (ru, rv): (Vec<f64>, Vec<f64>) = (0..n_int)
            .into_par_iter()
            .with_min_len(256)
            .map(|node| {
                let s = half_sup_inf(grid, &pair.u[level - 1], node);
                let a = ball_average(grid, &pair.v[level], node);
                let u = pair.u[level][node];
                let v = pair.v[level][node];
                (
                    (u - eps2 * v - (1.0 - eps2) * s).abs(),
                    (v - k * eps2 * u - (1.0 - k * eps2) * a).abs(),
                )
            })
            .unzip();
        for node in 0..n_int {
            let r = ru[node].max(rv[node]);
            if r > worst {
                worst = r;
                out.worst = (level, node);
            }
            out.max_u = out.max_u.max(ru[node]);
            out.max_v = out.max_v.max(rv[node]);
        }
        out.u.push(ru);
        out.v.push(rv);
    }
    out
}

/// `⌈ln(tol / gap) / ln(ρ)⌉` for the contraction factor `ρ = 1/(1+ε²)`.
pub fn predicted_iterations(tol: f64, initial_gap: f64, eps: f64) -> usize {
    if initial_gap <= tol {
        return 1;
    }
    let rho = 1.0 / (1.0 + eps * eps);
    ((tol / initial_gap).ln() / rho.ln()).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataFn;
    use crate::geometry::DomainSpec;

    fn line_grid() -> SpaceTimeGrid {
        SpaceTimeGrid::build(DomainSpec::ball(&[0.0], 1.0), 0.1, 0.4, 0.32).unwrap()
    }

    #[test]
    fn half_sup_inf_on_three_point_stencil() {
        // h = eps/4 would give 9 points; use h = eps so the stencil is {-eps, 0, eps}
        // by calling the operator on a hand-built slice over the 1d lattice.
        let grid = SpaceTimeGrid::build(DomainSpec::ball(&[0.0], 1.0), 0.1, 0.4, 0.32).unwrap();
        let eps = 0.4;
        let center = grid.node_at(&[0.0]).unwrap();
        // Field equal to x² on the three points {-eps, 0, eps} and 0 elsewhere
        // in the stencil (so max/min come from those points only).
        let mut slice = vec![0.0; grid.node_count()];
        for x in [-eps, 0.0, eps] {
            slice[grid.node_at(&[x]).unwrap()] = x * x;
        }
        let s = half_sup_inf(&grid, &slice, center);
        assert!((s - eps * eps / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ball_average_of_constant_and_affine() {
        let grid = line_grid();
        let c = vec![1.25; grid.node_count()];
        let x: Vec<f64> = (0..grid.node_count()).map(|n| grid.coord(n)[0]).collect();
        for node in 0..grid.interior_count() {
            assert!((ball_average(&grid, &c, node) - 1.25).abs() < 1e-15);
            assert!((ball_average(&grid, &x, node) - x[node]).abs() < 1e-14);
            assert!((half_sup_inf(&grid, &x, node) - x[node]).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_data_is_a_one_iteration_fixed_point() {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0);
        let grid = SpaceTimeGrid::build(spec.clone(), 0.05, 0.2, 0.2).unwrap();
        let data = ProblemData::uniform(spec, DataFn::constant(0.7), 0.2, 0.2);
        let pair = solve_dpp(&data, &grid, &SolverOptions::default()).unwrap();
        for level in 0..=grid.levels() {
            assert!(pair.u[level].iter().all(|x| (x - 0.7).abs() < 1e-15));
            assert!(pair.v[level].iter().all(|x| (x - 0.7).abs() < 1e-15));
        }
        assert!(pair.slices.iter().all(|s| s.iterations == 1));
    }

    #[test]
    fn affine_data_is_stationary() {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0);
        let grid = SpaceTimeGrid::build(spec.clone(), 0.05, 0.2, 0.12).unwrap();
        let data = ProblemData::uniform(spec, DataFn::affine(0.0, &[1.0, 0.0]), 0.2, 0.12);
        let pair = solve_dpp(&data, &grid, &SolverOptions::default()).unwrap();
        for level in 1..=grid.levels() {
            for node in 0..grid.node_count() {
                let x1 = grid.coord(node)[0];
                assert!((pair.u[level][node] - x1).abs() < 1e-12);
                assert!((pair.v[level][node] - x1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gauss_seidel_agrees_with_jacobi() {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0);
        let grid = SpaceTimeGrid::build(spec.clone(), 0.05, 0.2, 0.08).unwrap();
        let data = ProblemData::new(
            spec,
            DataFn::quadratic(0.0, &[], vec![vec![1.0, 0.0], vec![0.0, -1.0]]),
            DataFn::constant(0.5),
            DataFn::quadratic(0.0, &[], vec![vec![1.0, 0.0], vec![0.0, -1.0]]),
            0.2,
            0.08,
        );
        let tol = 1e-10;
        let j = solve_dpp(&data, &grid, &SolverOptions::with_tol(tol)).unwrap();
        let gs = solve_dpp(
            &data,
            &grid,
            &SolverOptions {
                scheme: UpdateScheme::GaussSeidel,
                ..SolverOptions::with_tol(tol)
            },
        )
        .unwrap();
        let err = j.v.iter().flatten().zip(gs.v.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-7, "jacobi vs gauss-seidel: {err}");
        let iters = |p: &ValuePair| p.slices.iter().map(|s| s.iterations).sum::<usize>();
        assert!(iters(&gs) < iters(&j));
    }

    #[test]
    fn residual_of_solution_is_small_and_detects_perturbations() {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0);
        let grid = SpaceTimeGrid::build(spec.clone(), 0.05, 0.2, 0.08).unwrap();
        let data = ProblemData::new(
            spec,
            DataFn::affine(0.1, &[0.5, -0.25]),
            DataFn::bump(&[1.0, 0.0], 0.5, 1.0),
            DataFn::affine(0.1, &[0.5, -0.25]),
            0.2,
            0.08,
        );
        let mut pair = solve_dpp(&data, &grid, &SolverOptions::with_tol(1e-10)).unwrap();
        let r = dpp_residual(&pair, &data, &grid);
        assert!(r.max_u <= 1e-9 && r.max_v <= 1e-9, "{} {}", r.max_u, r.max_v);

        let node = grid.node_at(&[0.1, 0.1]).unwrap();
        let delta = 1e-3;
        pair.u[1][node] += delta;
        let r = dpp_residual(&pair, &data, &grid);
        assert!(r.u[0][node] >= delta * (1.0 - 0.04) - 1e-9);
        assert_eq!(r.worst.0, 1);
    }

    #[test]
    fn non_convergence_is_reported() {
        let spec = DomainSpec::ball(&[0.0, 0.0], 1.0);
        let grid = SpaceTimeGrid::build(spec.clone(), 0.05, 0.2, 0.04).unwrap();
        let data = ProblemData::new(
            spec,
            DataFn::constant(0.0),
            DataFn::constant(1.0),
            DataFn::constant(0.0),
            0.2,
            0.04,
        );
        let opts = SolverOptions {
            max_iter: Some(3),
            ..SolverOptions::with_tol(1e-12)
        };
        let err = solve_dpp(&data, &grid, &opts).unwrap_err();
        assert!(matches!(err, Error::Convergence { slice: 1, iterations: 3, .. }));
    }

    #[test]
    fn default_iteration_cap() {
        let o = SolverOptions::with_tol(1e-8);
        assert_eq!(o.iteration_cap(0.1), 10 * (1e-8f64.ln().abs() / 0.01).ceil() as usize);
        assert_eq!(predicted_iterations(1e-8, 1e-9, 0.1), 1);
    }
}
