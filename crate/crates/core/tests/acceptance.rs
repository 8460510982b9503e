//! Acceptance suite: one PASS/FAIL line per criterion. Set
//! `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

mod common;

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::direct_slice;
use towpde::analysis::{
    comparison_check, compare_pairs, convergence_study, kappa, kappa_monte_carlo, pull_exit_stats,
    random_walk_martingale, Opponent, ResidualOptions, StudySpec,
};
use towpde::dpp::{predicted_iterations, UpdateScheme};
use towpde::field::FieldView;
use towpde::game::{GameRules, GameState, Simulation};
use towpde::strategies::{DppGreedy, PullToward, RandomMove, Role};
use towpde::{solve_dpp, Board, DataFn, DomainSpec, ProblemData, SolverOptions, SpaceTimeGrid};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

/// Random Lipschitz data on the plane: offset + affine + two bumps.
fn random_data(rng: &mut ChaCha8Rng) -> DataFn {
    let mut f = DataFn::affine(rng.random_range(-1.0..1.0), &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
    for _ in 0..2 {
        let c = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
        f = f.plus(DataFn::bump(&c, rng.random_range(0.2..0.8), rng.random_range(-1.5..1.5)));
    }
    f
}

fn random_problem(rng: &mut ChaCha8Rng, domain: &DomainSpec, eps: f64, horizon: f64) -> ProblemData {
    let f = random_data(rng);
    let g = random_data(rng);
    ProblemData::new(domain.clone(), f.clone(), g, f, eps, horizon)
}

// 1. Constant data.
fn constant_exactness() -> Check {
    let c = 0.7318;
    let domain = DomainSpec::ball(&[0.0, 0.0], 0.8);
    let (eps, h, horizon) = (0.2, 0.05, 0.2);
    let data = ProblemData::uniform(domain.clone(), DataFn::constant(c), eps, horizon);
    let grid = SpaceTimeGrid::build(domain, h, eps, horizon).map_err(err)?;
    let start = Instant::now();
    let pair = solve_dpp(&data, &grid, &SolverOptions::default()).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let dev = pair
        .u
        .iter()
        .chain(&pair.v)
        .flatten()
        .map(|x| (x - c).abs())
        .fold(0.0, f64::max);
    let sim = Simulation {
        data: &data,
        rules: GameRules::for_problem(&data),
        one: &RandomMove,
        two: &RandomMove,
        seed: 11,
    };
    let mut sim_ok = true;
    for (x, b) in [([0.0, 0.0], Board::One), ([0.3, -0.2], Board::Two)] {
        let e = sim.estimate(&GameState::new(&x, horizon, b), 2000).map_err(err)?;
        sim_ok &= e.mean == c && e.stderr == 0.0;
    }
    ensure(
        dev <= 4.0 * f64::EPSILON * c && sim_ok && secs < 1.0,
        format!(
            "{} nodes, max |u-c|,|v-c| = {dev:.1e}, simulator exact = {sim_ok}, solve {secs:.3}s",
            grid.node_count()
        ),
    )
}

// 2. Affine data.
fn affine_stationarity() -> Check {
    let coeffs = [0.6f64, -0.35];
    let lip = (coeffs[0] * coeffs[0] + coeffs[1] * coeffs[1]).sqrt();
    let a = DataFn::affine(0.25, &coeffs);
    let domain = DomainSpec::ball(&[0.0, 0.0], 1.0);
    let (eps, h, horizon) = (0.2, 0.05, 0.2);
    let data = ProblemData::uniform(domain.clone(), a.clone(), eps, horizon);
    let grid = SpaceTimeGrid::build(domain.clone(), h, eps, horizon).map_err(err)?;
    let pair = solve_dpp(&data, &grid, &SolverOptions::with_tol(1e-13)).map_err(err)?;
    let (mut sym, mut all) = (0.0f64, 0.0f64);
    for m in 0..=grid.levels() {
        for n in 0..grid.interior_count() {
            let x = grid.coord(n);
            let exact = a.eval(x, 0.0);
            let d = (pair.u[m][n] - exact).abs().max((pair.v[m][n] - exact).abs());
            all = all.max(d);
            if domain.dist_to_boundary(x) > eps {
                sym = sym.max(d);
            }
        }
    }
    ensure(
        sym <= 1e-10 && all <= 10.0 * h * lip,
        format!("symmetric nodes {sym:.1e} (<= 1e-10), all nodes {all:.1e} (<= {:.1e})", 10.0 * h * lip),
    )
}

// 3. Uniform bound.
fn uniform_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let domain = DomainSpec::ball(&[0.0, 0.0], 0.6);
    let (eps, h, horizon) = (0.2, 0.05, 0.16);
    let grid = SpaceTimeGrid::build(domain.clone(), h, eps, horizon).map_err(err)?;
    let mut worst = f64::NEG_INFINITY;
    let mut sim_worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let data = random_problem(&mut rng, &domain, eps, horizon);
        let pair = solve_dpp(&data, &grid, &SolverOptions::default()).map_err(err)?;
        let (su, sv) = pair.sup_norms();
        worst = worst.max(su.max(sv) / pair.bound);
        let pull = PullToward::new(&[0.6, 0.0]);
        let sim = Simulation {
            data: &data,
            rules: GameRules::for_problem(&data),
            one: &pull,
            two: &RandomMove,
            seed: i,
        };
        for b in [Board::One, Board::Two] {
            let e = sim.estimate(&GameState::new(&[0.1, -0.1], horizon, b), 500).map_err(err)?;
            sim_worst = sim_worst.max(e.max_payoff.abs().max(e.min_payoff.abs()) / pair.bound);
        }
    }
    ensure(
        worst <= 1.0 && sim_worst <= 1.0,
        format!("max sup/C over 20 data sets: solver {worst:.3}, simulated payoffs {sim_worst:.3}"),
    )
}

// 4. Contraction of the v-iteration for K = 1. The Dirichlet collar speeds
// the iteration up on small domains, so the disk is wide compared with the
// diffusion length.
fn contraction() -> Check {
    let domain = DomainSpec::ball(&[0.0, 0.0], 1.5);
    let mut lines = Vec::new();
    let mut ok = true;
    for eps in [0.2, 0.1, 0.05] {
        let horizon = 2.0 * eps * eps;
        let f = DataFn::bump(&[0.1, 0.2], 0.5, 1.0);
        let data = ProblemData::new(domain.clone(), f.clone(), DataFn::affine(0.0, &[0.5, -0.5]), f, eps, horizon);
        let grid = SpaceTimeGrid::build(domain.clone(), eps / 4.0, eps, horizon).map_err(err)?;
        let opts = SolverOptions {
            tol: 1e-10,
            max_iter: None,
            scheme: UpdateScheme::Jacobi,
        };
        let pair = solve_dpp(&data, &grid, &opts).map_err(err)?;
        let bound = 1.0 / (1.0 + eps * eps) + 1e-6;
        let mut ratio = 0.0f64;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for s in &pair.slices {
            if let Some(r) = s.max_ratio {
                ratio = ratio.max(r);
            }
            let predicted = predicted_iterations(opts.tol, s.initial_increment, eps) as f64;
            lo = lo.min(s.iterations as f64 / predicted);
            hi = hi.max(s.iterations as f64 / predicted);
        }
        ok &= ratio <= bound && lo >= 0.5 && hi <= 2.0;
        lines.push(format!("eps {eps}: ratio {ratio:.6} (<= {bound:.6}), iterations/predicted in [{lo:.2}, {hi:.2}]"));
    }
    ensure(ok, lines.join("; "))
}

// 5. Direct linear solve of each slice.
fn linear_oracle() -> Check {
    let tol = 1e-10;
    let mut worst = 0.0f64;
    for (data, grid) in common::toy_problems() {
        for scheme in [UpdateScheme::Jacobi, UpdateScheme::GaussSeidel] {
            let opts = SolverOptions {
                tol,
                max_iter: None,
                scheme,
            };
            let pair = solve_dpp(&data, &grid, &opts).map_err(err)?;
            for m in 1..=grid.levels() {
                let (u, v) = direct_slice(&grid, &data, m, &pair.u[m - 1]);
                for i in 0..grid.interior_count() {
                    worst = worst.max((u[i] - pair.u[m][i]).abs()).max((v[i] - pair.v[m][i]).abs());
                }
            }
        }
    }
    ensure(worst <= 10.0 * tol, format!("max deviation from LU solution {worst:.1e} (<= {:.0e})", 10.0 * tol))
}

// 6. Greedy play against the lattice value.
fn greedy_vs_dpp() -> Check {
    let (eps, horizon) = (0.1, 0.2);
    let domain = DomainSpec::ball(&[0.0, 0.0], 1.0);
    let q = DataFn::quadratic(0.0, &[0.5, 0.0], vec![vec![0.3, 0.0], vec![0.0, -0.2]]);
    let data = ProblemData::new(domain.clone(), q.clone(), DataFn::affine(0.2, &[-0.3, 0.6]), q, eps, horizon);
    let grid = SpaceTimeGrid::build(domain, eps / 4.0, eps, horizon).map_err(err)?;
    let pair = solve_dpp(&data, &grid, &SolverOptions::default()).map_err(err)?;
    let view = Arc::new(FieldView::new(grid, data.clone(), pair).map_err(err)?);
    let one = DppGreedy::new(view.clone(), Role::Max, 0);
    let two = DppGreedy::new(view.clone(), Role::Min, 0);
    let sim = Simulation {
        data: &data,
        rules: GameRules::for_problem(&data).with_history_window(Some(0)),
        one: &one,
        two: &two,
        seed: 7,
    };
    let mut ok = true;
    let mut zs = Vec::new();
    for (x, b) in [
        ([0.0, 0.0], Board::One),
        ([0.3, 0.2], Board::One),
        ([-0.5, 0.25], Board::One),
        ([0.0, 0.0], Board::Two),
        ([0.25, -0.5], Board::Two),
    ] {
        let e = sim.estimate(&GameState::new(&x, horizon, b), 100_000).map_err(err)?;
        let target = match b {
            Board::One => view.eval_u(&x, horizon),
            Board::Two => view.eval_v(&x, horizon),
        }
        .map_err(err)?;
        let z = (e.mean - target) / e.stderr;
        ok &= z.abs() <= 3.0;
        zs.push(format!("{z:+.2}"));
    }
    ensure(ok, format!("z-scores of 5 starts: {} (|z| <= 3)", zs.join(" ")))
}

// 7. Exit time and exit position of the pulling player.
fn pull_exit() -> Check {
    let domain = DomainSpec::ball(&[0.0, 0.0], 1.0);
    let target = [1.0, 0.0];
    let eps = 0.01;
    let mut ok = true;
    let mut lines = Vec::new();
    for opponent in [Opponent::Random, Opponent::Pull] {
        for r0 in [0.02, 0.05] {
            let s = pull_exit_stats(&domain, &target, r0, eps, 0.1, opponent, 20_000, 17).map_err(err)?;
            let tau_ok = s.mean_tau.mean - 4.0 * s.mean_tau.stderr <= s.tau_bound;
            let sq_ok = s.mean_sq_exit.mean - 4.0 * s.mean_sq_exit.stderr <= s.sq_exit_bound;
            ok &= tau_ok && sq_ok;
            lines.push(format!(
                "{opponent:?} r0 {r0}: E[tau] {:.2} (<= {:.0}), E|x-y|^2 {:.2e} (<= {:.1e})",
                s.mean_tau.mean, s.tau_bound, s.mean_sq_exit.mean, s.sq_exit_bound
            ));
        }
    }
    ensure(ok, lines.join("; "))
}

// 8. Radial harmonic function along the board-2 walk in an annulus.
fn annulus_martingale() -> Check {
    let center = [0.0, 0.0, 0.0];
    let (r_in, r_out) = (0.3, 1.0);
    let domain = DomainSpec::annulus(&center, r_in, r_out);
    let s = random_walk_martingale(&domain, &center, r_in, &[0.5, 0.0, 0.0], 0.1, 100_000, 23).map_err(err)?;
    let z = s.mean_mu_exit.z_score(s.mu_start);
    ensure(
        z.abs() <= 4.0,
        format!(
            "E[mu(exit)] {:.5} vs mu(start) {:.5}, |z| {z:.2} (<= 4), mean steps {:.1}",
            s.mean_mu_exit.mean, s.mu_start, s.mean_tau.mean
        ),
    )
}

// 9. Second moment of a uniform ball coordinate.
fn kappa_check() -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    for dim in 1..=3 {
        let est = kappa_monte_carlo(dim, 1_000_000, 29 + dim as u64);
        let z = est.z_score(kappa(dim));
        let identity = (kappa(dim) * (dim as f64 + 2.0) - 1.0).abs();
        ok &= z.abs() <= 5.0 && identity <= 1e-15;
        lines.push(format!("N={dim}: {:.5} vs {:.5} |z| {z:.2}", est.mean, kappa(dim)));
    }
    ensure(ok, lines.join("; "))
}

// 10. Comparison principle.
fn comparison() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let domain = DomainSpec::ball(&[0.0, 0.0], 0.6);
    let (eps, h, horizon) = (0.2, 0.05, 0.16);
    let grid = SpaceTimeGrid::build(domain.clone(), h, eps, horizon).map_err(err)?;
    let opts = SolverOptions::with_tol(1e-12);
    let tol = 1e-10;
    let mut worst = f64::NEG_INFINITY;
    let mut ordered = true;
    for _ in 0..10 {
        let low = random_problem(&mut rng, &domain, eps, horizon);
        let mut lift = || {
            let c = [rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)];
            DataFn::constant(rng.random_range(0.0..0.2)).plus(DataFn::bump(&c, 0.4, rng.random_range(0.0..1.0)))
        };
        let (df, dg) = (lift(), lift());
        let high = ProblemData::new(
            domain.clone(),
            low.f.clone().plus(df.clone()),
            low.g.clone().plus(dg),
            low.u0.clone().plus(df),
            eps,
            horizon,
        );
        let r = comparison_check(&low, &high, &grid, tol, &opts).map_err(err)?;
        ordered &= r.ordered;
        worst = worst.max(r.max_excess_u).max(r.max_excess_v);
    }
    let shift = 0.375;
    let base = random_problem(&mut rng, &domain, eps, horizon);
    let up = ProblemData::new(
        domain.clone(),
        base.f.clone().plus(DataFn::constant(shift)),
        base.g.clone().plus(DataFn::constant(shift)),
        base.u0.clone().plus(DataFn::constant(shift)),
        eps,
        horizon,
    );
    let a = solve_dpp(&base, &grid, &opts).map_err(err)?;
    let b = solve_dpp(&up, &grid, &opts).map_err(err)?;
    let mut shift_err = 0.0f64;
    for m in 0..a.u.len() {
        for n in 0..a.u[m].len() {
            shift_err = shift_err
                .max((b.u[m][n] - a.u[m][n] - shift).abs())
                .max((b.v[m][n] - a.v[m][n] - shift).abs());
        }
    }
    let swapped = compare_pairs(&b, &a, tol);
    ensure(
        ordered && shift_err <= tol && !swapped.ordered,
        format!("10 pairs ordered = {ordered} (max excess {worst:.1e}), constant shift error {shift_err:.1e}"),
    )
}

// 11. Self-convergence and residuals as eps decreases.
fn self_convergence() -> Check {
    let q = DataFn::quadratic(0.0, &[0.5, 0.0], vec![vec![0.3, 0.0], vec![0.0, -0.2]]);
    let spec = StudySpec {
        domain: DomainSpec::ball(&[0.0, 0.0], 0.5),
        f: q.clone(),
        g: DataFn::affine(0.2, &[-0.3, 0.6]),
        u0: q,
        horizon: 0.16,
        k: 1.0,
        h_ratio: 4.0,
    };
    let residual = ResidualOptions {
        grad_floor: Some(0.2),
        margin: 0.2,
        t_min: 0.04,
        stride: None,
    };
    let table = convergence_study(&spec, &[0.2, 0.1, 0.05], &SolverOptions::default(), &residual).map_err(err)?;
    let r = &table.rows;
    let d: Vec<f64> = r.iter().filter_map(|row| row.dist_to_next).collect();
    let decreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] < w[0]);
    let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ");
    let norms = [
        ("parabolic sup", r.iter().map(|row| row.parabolic.sup).collect::<Vec<_>>()),
        ("parabolic mean", r.iter().map(|row| row.parabolic.mean).collect()),
        ("elliptic sup", r.iter().map(|row| row.elliptic.sup).collect()),
        ("elliptic mean", r.iter().map(|row| row.elliptic.mean).collect()),
    ];
    let mut ok = decreasing(&d);
    let mut parts = vec![format!("distances {}{}", fmt(&d), if decreasing(&d) { "" } else { " (not decreasing)" })];
    for (name, xs) in &norms {
        ok &= decreasing(xs);
        parts.push(format!("{name} {}{}", fmt(xs), if decreasing(xs) { "" } else { " (not decreasing)" }));
    }
    ensure(ok, parts.join("; "))
}

// 12. Bitwise identical outputs across thread counts.
const DETERMINISM_CONFIG: &str = r#"
seed = 12

[domain]
kind = "ball"
center = [0.0, 0.0]
radius = 0.5

[data]
f = { type = "bump", center = [0.2, 0.1], radius = 0.5, height = 1.0 }
g = { type = "affine", coeffs = [0.3, -0.2] }

[params]
eps = 0.2
horizon = 0.16

[simulate]
n = 2000
player_one = "greedy role=max samples=8"
player_two = "greedy role=min samples=8"
starts = [{ x = [0.1, 0.0] }, { x = [-0.2, 0.1], board = 2 }]
traces = 3

[converge]
eps_list = [0.4, 0.2]

[residuals]
margin = 0.1

[estimates]
target = [0.5, 0.0]
r0_list = [0.05]
eps_list = [0.02]
a = 0.1
opponent = "random"
n = 2000
walk_start = [0.2, 0.0]
"#;

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, DETERMINISM_CONFIG).map_err(err)?;
    let files = [
        ("solve", "field.pack"),
        ("simulate", "estimates.csv"),
        ("simulate", "traces.jsonl"),
        ("residuals", "residuals.csv"),
        ("converge", "convergence.csv"),
        ("estimates", "estimates.json"),
    ];
    let run = |sub: &str, threads: &str, out: &Path| -> Result<(), String> {
        let o = Command::new(env!("CARGO_BIN_EXE_towpde"))
            .args([sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
            .output()
            .map_err(err)?;
        if o.status.success() {
            Ok(())
        } else {
            Err(format!("{sub} failed: {}", String::from_utf8_lossy(&o.stderr)))
        }
    };
    let mut differing = Vec::new();
    for (sub, file) in files {
        let mut bytes = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("{sub}-{threads}"));
            if !out.join(file).exists() {
                run(sub, threads, &out)?;
            }
            bytes.push(std::fs::read(out.join(file)).map_err(err)?);
        }
        if bytes[0] != bytes[1] {
            differing.push(format!("{sub}/{file}"));
        }
    }
    ensure(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} outputs identical with 1 and 4 threads", files.len())
        } else {
            format!("differ: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("constant data are reproduced exactly", constant_exactness),
        ("affine data are stationary", affine_stationarity),
        ("uniform bound", uniform_bound),
        ("v-iteration contraction", contraction),
        ("direct linear solve", linear_oracle),
        ("greedy play matches the lattice value", greedy_vs_dpp),
        ("pulling player's exit bounds", pull_exit),
        ("annulus martingale", annulus_martingale),
        ("kappa", kappa_check),
        ("comparison and constant shift", comparison),
        ("self-convergence", self_convergence),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    // Failures are reported, not fatal, unless ACCEPTANCE_STRICT is set.
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
