//! Residuals of the limit PDE system, self-convergence studies in ε, exit
//! statistics of the game, and the discrete comparison principle.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Board, DataFn, ProblemData};
use crate::dpp::{solve_dpp, SolverOptions, ValuePair};
use crate::error::{Error, Result};
use crate::field::FieldView;
use crate::game::{outcome_mean, GameRules, GameState, Simulation, Strategy, TrajectoryOutcome};
use crate::geometry::{dist, DomainSpec, SpaceTimeGrid};
use crate::rng::{stream, uniform_in_ball, Purpose};
use crate::stats::{pairwise_sum, MeanEstimate};
use crate::strategies::{PullToward, RandomMove};

/// `κ = (1/|B₁|) ∫_{B₁} z_j² dz = 1/(N+2)`.
pub fn kappa(dim: usize) -> f64 {
    1.0 / (dim as f64 + 2.0)
}

/// Monte Carlo mean of `z₁²` for `z` uniform in the unit ball of ℝ^dim.
pub fn kappa_monte_carlo(dim: usize, samples: usize, seed: u64) -> MeanEstimate {
    const CHUNK: usize = 10_000;
    let center = vec![0.0; dim];
    let chunks = samples.div_ceil(CHUNK);
    let xs: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream(seed, c as u64, Purpose::Auxiliary);
            let len = CHUNK.min(samples - c * CHUNK);
            let center = &center;
            (0..len)
                .map(move |_| {
                    let z = uniform_in_ball(&mut rng, center, 1.0);
                    z[0] * z[0]
                })
                .collect::<Vec<_>>()
        })
        .collect();
    MeanEstimate::of(&xs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualOptions {
    /// Below this `|∇u|` the ∞-Laplacian is undefined and the node is
    /// masked out of the parabolic residual. Default `10 h L`.
    pub grad_floor: Option<f64>,
    /// Only nodes at least this far from ∂Ω are evaluated.
    pub margin: f64,
    /// Only levels with `t >= t_min` (and `m >= 1`) are evaluated.
    pub t_min: f64,
    /// Difference spacing in lattice steps. Default `round(ε/h)`: the
    /// lattice solution carries roughness below the ε scale, which spacing-h
    /// differences amplify.
    pub stride: Option<usize>,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions {
            grad_floor: None,
            margin: 0.0,
            t_min: 0.0,
            stride: None,
        }
    }
}

/// One evaluated `(level, node)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub level: usize,
    pub node: usize,
    /// `None` when the gradient is below the floor.
    pub parabolic: Option<f64>,
    pub elliptic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub sup: f64,
    pub mean: f64,
    pub count: usize,
}

impl Norms {
    fn of(xs: &[f64]) -> Self {
        Norms {
            sup: xs.iter().fold(0.0f64, |m, x| m.max(*x)),
            mean: if xs.is_empty() { 0.0 } else { pairwise_sum(xs) / xs.len() as f64 },
            count: xs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub points: Vec<ResidualPoint>,
    pub parabolic: Norms,
    pub elliptic: Norms,
    pub masked_fraction: f64,
    pub grad_floor: f64,
    pub margin: f64,
    /// Difference spacing actually used.
    pub spacing: f64,
    pub kappa: f64,
}

/// Residuals of
/// `u_t − ½Δ∞u + u − v` and `−(κ/2K)Δv + v − u` at interior nodes, with
/// central differences of spacing `stride·h` in space and the backward difference
/// `(u(t) − u(t − ε²))/ε²` in time.
pub fn pde_residuals(
    pair: &ValuePair,
    grid: &SpaceTimeGrid,
    data: &ProblemData,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    let dim = grid.dim();
    let stride = match opts.stride {
        Some(0) => return Err(Error::config("residuals.stride", "must be at least 1")),
        Some(s) => s,
        None => ((grid.eps() / grid.h()).round() as usize).max(1),
    };
    let h = grid.h() * stride as f64;
    let eps2 = grid.eps() * grid.eps();
    let floor = match opts.grad_floor {
        Some(f) if f > 0.0 => f,
        Some(_) => return Err(Error::config("residuals.grad_floor", "must be positive")),
        None => 10.0 * grid.h() * data.max_lipschitz(grid).max(f64::MIN_POSITIVE),
    };
    let kap = kappa(dim);
    let coef = kap / (2.0 * data.k);

    // Neighbour table: for each selected node, the node at x + a h e_i + b h e_j.
    let selected: Vec<usize> = (0..grid.interior_count())
        .filter(|&n| grid.spec().dist_to_boundary(grid.coord(n)) >= opts.margin)
        .collect();
    let levels: Vec<usize> = (1..=grid.levels()).filter(|&m| grid.times()[m] >= opts.t_min).collect();
    if selected.is_empty() || levels.is_empty() {
        return Err(Error::config(
            "residuals.margin",
            "no interior node or level is left for the difference stencils",
        ));
    }
    let shifted = |n: usize, moves: &[(usize, f64)]| -> Option<usize> {
        let mut y = grid.coord(n).to_vec();
        for &(axis, s) in moves {
            y[axis] += s * h;
        }
        grid.node_at(&y)
    };
    struct Nbr {
        plus: Vec<usize>,
        minus: Vec<usize>,
        // (i, j, ++, +-, -+, --) for i < j
        mixed: Vec<(usize, usize, [usize; 4])>,
    }
    // Nodes whose difference stencil leaves the grid are dropped.
    let (selected, nbrs): (Vec<usize>, Vec<Nbr>) = selected
        .iter()
        .filter_map(|&n| {
            let mut plus = Vec::with_capacity(dim);
            let mut minus = Vec::with_capacity(dim);
            let mut mixed = Vec::new();
            for i in 0..dim {
                plus.push(shifted(n, &[(i, 1.0)])?);
                minus.push(shifted(n, &[(i, -1.0)])?);
                for j in i + 1..dim {
                    mixed.push((
                        i,
                        j,
                        [
                            shifted(n, &[(i, 1.0), (j, 1.0)])?,
                            shifted(n, &[(i, 1.0), (j, -1.0)])?,
                            shifted(n, &[(i, -1.0), (j, 1.0)])?,
                            shifted(n, &[(i, -1.0), (j, -1.0)])?,
                        ],
                    ));
                }
            }
            Some((n, Nbr { plus, minus, mixed }))
        })
        .unzip();
    if selected.is_empty() {
        return Err(Error::config(
            "residuals.margin",
            "no interior node keeps its difference stencil on the grid",
        ));
    }

    let points: Vec<ResidualPoint> = levels
        .par_iter()
        .flat_map_iter(|&m| {
            let u = &pair.u[m];
            let v = &pair.v[m];
            let u_prev = &pair.u[m - 1];
            let nbrs = &nbrs;
            selected.iter().zip(nbrs.iter()).map(move |(&n, nb)| {
                let mut grad = [0.0f64; 8];
                let mut hess = [[0.0f64; 8]; 8];
                let mut lap_v = 0.0;
                for i in 0..dim {
                    grad[i] = (u[nb.plus[i]] - u[nb.minus[i]]) / (2.0 * h);
                    hess[i][i] = (u[nb.plus[i]] - 2.0 * u[n] + u[nb.minus[i]]) / (h * h);
                    lap_v += (v[nb.plus[i]] - 2.0 * v[n] + v[nb.minus[i]]) / (h * h);
                }
                for &(i, j, c) in &nb.mixed {
                    let d = (u[c[0]] - u[c[1]] - u[c[2]] + u[c[3]]) / (4.0 * h * h);
                    hess[i][j] = d;
                    hess[j][i] = d;
                }
                let g2: f64 = grad[..dim].iter().map(|g| g * g).sum();
                let parabolic = if g2.sqrt() >= floor {
                    let mut q = 0.0;
                    for i in 0..dim {
                        for j in 0..dim {
                            q += grad[i] * hess[i][j] * grad[j];
                        }
                    }
                    let inf_lap = q / g2;
                    let ut = (u[n] - u_prev[n]) / eps2;
                    Some((ut - 0.5 * inf_lap + u[n] - v[n]).abs())
                } else {
                    None
                };
                let elliptic = (-coef * lap_v + v[n] - u[n]).abs();
                ResidualPoint {
                    level: m,
                    node: n,
                    parabolic,
                    elliptic,
                }
            })
        })
        .collect();

    let par: Vec<f64> = points.iter().filter_map(|p| p.parabolic).collect();
    let ell: Vec<f64> = points.iter().map(|p| p.elliptic).collect();
    for x in par.iter().chain(&ell) {
        if !x.is_finite() {
            return Err(Error::Numeric("non-finite PDE residual".into()));
        }
    }
    let masked_fraction = 1.0 - par.len() as f64 / points.len() as f64;
    Ok(ResidualReport {
        parabolic: Norms::of(&par),
        elliptic: Norms::of(&ell),
        points,
        masked_fraction,
        grad_floor: floor,
        margin: opts.margin,
        spacing: h,
        kappa: kap,
    })
}

/// Problem description without ε, for studies over several ε.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub domain: DomainSpec,
    pub f: DataFn,
    pub g: DataFn,
    pub u0: DataFn,
    pub horizon: f64,
    pub k: f64,
    /// `h = eps / h_ratio`.
    pub h_ratio: f64,
}

impl StudySpec {
    pub fn problem(&self, eps: f64) -> ProblemData {
        ProblemData::new(
            self.domain.clone(),
            self.f.clone(),
            self.g.clone(),
            self.u0.clone(),
            eps,
            self.horizon,
        )
        .with_k(self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub h: f64,
    pub levels: usize,
    pub interior_nodes: usize,
    pub iterations: usize,
    /// Sup distance of `(u, v)` to the finest run.
    pub dist_to_reference: f64,
    /// Sup distance to the next finer run; `None` for the finest.
    pub dist_to_next: Option<f64>,
    pub parabolic: Norms,
    pub elliptic: Norms,
    pub masked_fraction: f64,
    pub runtime_secs: f64,
}

/// Rows sorted by ε descending. The reference is the finest run
/// (self-convergence); no exact solution is involved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Times at which the distances were taken.
    pub compare_times: Vec<f64>,
}

/// Sup over the nodes of `grid` at `times` (and `d(x, ∂Ω) >= margin`) of
/// `|a − b|` for both fields.
pub fn field_distance(a: &FieldView, b: &FieldView, grid: &SpaceTimeGrid, times: &[f64], margin: f64) -> Result<f64> {
    let nodes: Vec<usize> = (0..grid.interior_count())
        .filter(|&n| grid.spec().dist_to_boundary(grid.coord(n)) >= margin)
        .collect();
    let per_time: Vec<f64> = times
        .iter()
        .map(|&t| {
            let d: Vec<f64> = nodes
                .par_iter()
                .map(|&n| {
                    let x = grid.coord(n);
                    let du = (a.eval_u(x, t)? - b.eval_u(x, t)?).abs();
                    let dv = (a.eval_v(x, t)? - b.eval_v(x, t)?).abs();
                    Ok(du.max(dv))
                })
                .collect::<Result<_>>()?;
            Ok(d.into_iter().fold(0.0f64, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(per_time.into_iter().fold(0.0f64, f64::max))
}

/// Times in `(0, T]` that are levels of every run: multiples of the
/// largest ε² that are (within rounding) multiples of all the others.
fn common_times(eps_list: &[f64], horizon: f64) -> Vec<f64> {
    let coarse = eps_list.iter().copied().fold(0.0f64, f64::max);
    let step = coarse * coarse;
    let mut out = Vec::new();
    let mut m = 1usize;
    while m as f64 * step <= horizon * (1.0 + 1e-12) {
        let t = m as f64 * step;
        let aligned = eps_list.iter().all(|e| {
            let r = t / (e * e);
            (r - r.round()).abs() < 1e-6
        });
        if aligned {
            out.push(t);
        }
        m += 1;
    }
    out
}

pub fn convergence_study(
    spec: &StudySpec,
    eps_list: &[f64],
    solver: &SolverOptions,
    residual: &ResidualOptions,
) -> Result<ConvergenceTable> {
    if eps_list.len() < 2 {
        return Err(Error::config("converge.eps_list", "need at least two values of eps"));
    }
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eps_sorted.dedup();
    let times = common_times(&eps_sorted, spec.horizon);
    if times.is_empty() {
        return Err(Error::config(
            "converge.eps_list",
            "no time in (0, T] is a level of every run; pick T as a multiple of every eps^2",
        ));
    }
    struct Run {
        view: FieldView,
        row: ConvergenceRow,
    }
    let mut runs = Vec::new();
    for &eps in &eps_sorted {
        let data = spec.problem(eps);
        let grid = SpaceTimeGrid::build(spec.domain.clone(), eps / spec.h_ratio, eps, spec.horizon)?;
        let start = Instant::now();
        let pair = solve_dpp(&data, &grid, solver)?;
        let runtime_secs = start.elapsed().as_secs_f64();
        let res = pde_residuals(&pair, &grid, &data, residual)?;
        let row = ConvergenceRow {
            eps,
            h: grid.h(),
            levels: grid.levels(),
            interior_nodes: grid.interior_count(),
            iterations: pair.slices.iter().map(|s| s.iterations).sum(),
            dist_to_reference: 0.0,
            dist_to_next: None,
            parabolic: res.parabolic,
            elliptic: res.elliptic,
            masked_fraction: res.masked_fraction,
            runtime_secs,
        };
        runs.push(Run {
            view: FieldView::new(grid, data, pair)?,
            row,
        });
    }
    let finest = &runs.last().unwrap().view;
    let mut dists = Vec::with_capacity(runs.len());
    for i in 0..runs.len() {
        let to_ref = field_distance(&runs[i].view, finest, &finest.grid, &times, residual.margin)?;
        let to_next = match runs.get(i + 1) {
            Some(next) => Some(field_distance(&runs[i].view, &next.view, &finest.grid, &times, residual.margin)?),
            None => None,
        };
        dists.push((to_ref, to_next));
    }
    let rows = runs
        .into_iter()
        .zip(dists)
        .map(|(mut r, (a, b))| {
            r.row.dist_to_reference = a;
            r.row.dist_to_next = b;
            r.row
        })
        .collect();
    Ok(ConvergenceTable {
        rows,
        compare_times: times,
    })
}

/// `μ(x) = θ^{2−N} − |x − c|^{2−N}` for `N >= 3`, `ln(|x − c|/θ)` for
/// `N = 2`, `|x − c| − θ` for `N = 1`: radial, increasing, harmonic away
/// from `c`, zero on the sphere of radius θ.
pub fn mu(x: &[f64], center: &[f64], theta: f64) -> f64 {
    let r = dist(x, center);
    match x.len() {
        1 => r - theta,
        2 => (r / theta).ln(),
        n => {
            let p = (n - 2) as i32;
            1.0 / theta.powi(p) - 1.0 / r.powi(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullStats {
    pub eps: f64,
    pub r0: f64,
    pub n: usize,
    /// Opponent of the pulling player: `"pull"` (both pull) or `"random"`.
    pub opponent: String,
    pub mean_tau: MeanEstimate,
    pub tau_bound: f64,
    pub mean_sq_exit: MeanEstimate,
    pub sq_exit_bound: f64,
    /// `P(|x_τ − y| < a)`.
    pub p_near: f64,
    /// `P(τ >= a/(2ε²))`.
    pub p_long: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleStats {
    pub eps: f64,
    pub n: usize,
    pub start: Vec<f64>,
    pub mu_start: f64,
    pub mean_mu_exit: MeanEstimate,
    pub mean_tau: MeanEstimate,
}

/// Opponent used against the pulling player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Opponent {
    Pull,
    Random,
}

/// Board-1 Tug-of-War (switching off, time never binding) from a point at
/// distance `r0` inside Ω from the boundary point `target`, with player I
/// pulling toward `target`.
#[allow(clippy::too_many_arguments)]
pub fn pull_exit_stats(
    domain: &DomainSpec,
    target: &[f64],
    r0: f64,
    eps: f64,
    a: f64,
    opponent: Opponent,
    n: usize,
    seed: u64,
) -> Result<PullStats> {
    let normal = domain.inward_normal(target);
    let x0: Vec<f64> = target.iter().zip(&normal).map(|(y, e)| y + r0 * e).collect();
    if !domain.contains(&x0) {
        return Err(Error::config("estimates.r0", "start point is not interior"));
    }
    // No time exits: give every trajectory more time than its step cap needs.
    let data = ProblemData::uniform(domain.clone(), DataFn::constant(0.0), eps, 1.0);
    let mut rules = GameRules::new(eps, 1.0);
    rules.switch_one = 0.0;
    rules.history_window = Some(0);
    let t0 = 1e6;
    let pull = PullToward::new(target);
    let random = RandomMove;
    let two: &dyn Strategy = match opponent {
        Opponent::Pull => &pull,
        Opponent::Random => &random,
    };
    let sim = Simulation {
        data: &data,
        rules,
        one: &pull,
        two,
        seed,
    };
    let outs = sim.run(&GameState::new(&x0, t0, Board::One), n)?;
    let near = outs.iter().filter(|o| dist(&o.x, target) < a).count();
    let long = outs.iter().filter(|o| o.steps as f64 >= a / (2.0 * eps * eps)).count();
    Ok(PullStats {
        eps,
        r0,
        n,
        opponent: format!("{opponent:?}").to_lowercase(),
        mean_tau: outcome_mean(&outs, |o| o.steps as f64),
        tau_bound: 4.0 * r0 * r0 / (eps * eps),
        mean_sq_exit: outcome_mean(&outs, |o| {
            let d = dist(&o.x, target);
            d * d
        }),
        sq_exit_bound: 2.0 * r0 * r0,
        p_near: near as f64 / n as f64,
        p_long: long as f64 / n as f64,
    })
}

/// Pure board-2 random walk (no switching) from `start`; returns the exit
/// positions' `μ` statistics.
pub fn random_walk_martingale(
    domain: &DomainSpec,
    center: &[f64],
    theta: f64,
    start: &[f64],
    eps: f64,
    n: usize,
    seed: u64,
) -> Result<MartingaleStats> {
    if !domain.contains(start) {
        return Err(Error::config("estimates.start", "start point is not interior"));
    }
    let data = ProblemData::uniform(domain.clone(), DataFn::constant(0.0), eps, 1.0);
    let mut rules = GameRules::new(eps, 0.0);
    rules.switch_two = 0.0;
    rules.history_window = Some(0);
    let random = RandomMove;
    let sim = Simulation {
        data: &data,
        rules,
        one: &random,
        two: &random,
        seed,
    };
    let outs: Vec<TrajectoryOutcome> = sim.run(&GameState::new(start, 1.0, Board::Two), n)?;
    Ok(MartingaleStats {
        eps,
        n,
        start: start.to_vec(),
        mu_start: mu(start, center, theta),
        mean_mu_exit: outcome_mean(&outs, |o| mu(&o.x, center, theta)),
        mean_tau: outcome_mean(&outs, |o| o.steps as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySuite {
    pub pull: Vec<PullStats>,
    pub martingale: Option<MartingaleStats>,
}

/// Settings of [`boundary_estimate_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SuiteSettings {
    pub target: Vec<f64>,
    pub r0_list: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub a: f64,
    pub opponent: Opponent,
    pub n: usize,
    /// Start of the board-2 walk; only run for annulus domains.
    pub walk_start: Option<Vec<f64>>,
}

pub fn boundary_estimate_suite(domain: &DomainSpec, s: &SuiteSettings, seed: u64) -> Result<BoundarySuite> {
    if s.n == 0 {
        return Err(Error::config("estimates.n", "need at least one trajectory"));
    }
    if domain.contains(&s.target) || domain.dist_to_boundary(&s.target) > 1e-9 {
        return Err(Error::config("estimates.target", "target must be a boundary point"));
    }
    let mut pull = Vec::new();
    for (i, &eps) in s.eps_list.iter().enumerate() {
        for (j, &r0) in s.r0_list.iter().enumerate() {
            let sub_seed = seed ^ ((i as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            pull.push(pull_exit_stats(domain, &s.target, r0, eps, s.a, s.opponent, s.n, sub_seed)?);
        }
    }
    let martingale = match (domain, &s.walk_start) {
        (DomainSpec::Annulus { center, r_in, .. }, Some(start)) => {
            let eps = s.eps_list.iter().copied().fold(f64::INFINITY, f64::min);
            Some(random_walk_martingale(domain, center, *r_in, start, eps, s.n, seed.wrapping_add(1))?)
        }
        _ => None,
    };
    Ok(BoundarySuite { pull, martingale })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub ordered: bool,
    /// Largest `u_low − u_high` and `v_low − v_high` over all nodes and levels.
    pub max_excess_u: f64,
    pub max_excess_v: f64,
    /// `(level, node)` of the larger excess.
    pub worst: (usize, usize),
}

fn check_data_order(low: &ProblemData, high: &ProblemData, grid: &SpaceTimeGrid) -> Result<()> {
    let times = grid.times();
    let violation = |field: &str, n: usize, t: f64, a: f64, b: f64| {
        Error::config(
            format!("data_low.{field}"),
            format!(
                "not below data_high.{field} at node {n} (x = {:?}, t = {t}): {a} > {b}",
                grid.coord(n)
            ),
        )
    };
    for n in grid.interior_count()..grid.node_count() {
        let x = grid.coord(n);
        for (m, &t) in times.iter().enumerate() {
            let (a, b) = (low.f.eval(x, t), high.f.eval(x, t));
            if a > b {
                return Err(violation("f", n, t, a, b));
            }
            if m > 0 {
                let (a, b) = (low.g.eval(x, t), high.g.eval(x, t));
                if a > b {
                    return Err(violation("g", n, t, a, b));
                }
            }
        }
    }
    for n in 0..grid.interior_count() {
        let (a, b) = (low.u0.eval(grid.coord(n), 0.0), high.u0.eval(grid.coord(n), 0.0));
        if a > b {
            return Err(violation("u0", n, 0.0, a, b));
        }
    }
    Ok(())
}

/// Solves both problems and checks `u_low <= u_high + tol`, `v_low <= v_high + tol`.
pub fn comparison_check(
    low: &ProblemData,
    high: &ProblemData,
    grid: &SpaceTimeGrid,
    tol: f64,
    solver: &SolverOptions,
) -> Result<ComparisonReport> {
    check_data_order(low, high, grid)?;
    let a = solve_dpp(low, grid, solver)?;
    let b = solve_dpp(high, grid, solver)?;
    Ok(compare_pairs(&a, &b, tol))
}

pub fn compare_pairs(low: &ValuePair, high: &ValuePair, tol: f64) -> ComparisonReport {
    let (mut eu, mut ev, mut worst, mut top) = (f64::NEG_INFINITY, f64::NEG_INFINITY, (0, 0), f64::NEG_INFINITY);
    for m in 0..low.u.len() {
        for n in 0..low.u[m].len() {
            let du = low.u[m][n] - high.u[m][n];
            let dv = low.v[m][n] - high.v[m][n];
            eu = eu.max(du);
            ev = ev.max(dv);
            if du.max(dv) > top {
                top = du.max(dv);
                worst = (m, n);
            }
        }
    }
    ComparisonReport {
        ordered: eu <= tol && ev <= tol,
        max_excess_u: eu,
        max_excess_v: ev,
        worst,
    }
}

/// Empirical second moment of each coordinate of a uniform ε-ball step,
/// `ε²/(N+2)` in the limit.
pub fn ball_step_moments(dim: usize, eps: f64, samples: usize, seed: u64) -> Vec<MeanEstimate> {
    let mut rng = stream(seed, 0, Purpose::Auxiliary);
    let center = vec![0.0; dim];
    let mut cols = vec![Vec::with_capacity(samples); dim];
    for _ in 0..samples {
        let y = uniform_in_ball(&mut rng, &center, eps);
        for (c, v) in cols.iter_mut().zip(&y) {
            c.push(v * v);
        }
    }
    cols.iter().map(|c| MeanEstimate::of(c)).collect()
}

/// Five-point Laplacian at `x`.
#[cfg(test)]
fn discrete_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let mut p = x.to_vec();
        let mut q = x.to_vec();
        p[i] += h;
        q[i] -= h;
        s += (f(&p) - 2.0 * f(x) + f(&q)) / (h * h);
    }
    s
}
