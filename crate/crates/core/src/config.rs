//! Declarative run configuration (TOML) and the subcommands built on it.
//!
//! ```toml
//! [domain]
//! kind = "ball"
//! center = [0.0, 0.0]
//! radius = 1.0
//!
//! [data]
//! f = { type = "affine", coeffs = [1.0, 0.0] }
//! g = { type = "constant", value = 0.0 }
//! u0 = { type = "affine", coeffs = [1.0, 0.0] }
//!
//! [params]
//! eps = 0.1
//! horizon = 0.16
//!
//! [simulate]
//! n = 10000
//! player_one = "greedy role=max samples=64"
//! player_two = "greedy role=min samples=64"
//! starts = [{ x = [0.2, 0.1] }]
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    boundary_estimate_suite, convergence_study, pde_residuals, ResidualOptions, StudySpec, SuiteSettings,
};
use crate::data::{Board, DataFn, ProblemData};
use crate::dpp::{dpp_residual, solve_dpp, SolverOptions, UpdateScheme, ValuePair};
use crate::error::{Error, Result};
use crate::field::FieldView;
use crate::game::{GameRules, GameState, Simulation, Strategy};
use crate::geometry::{DomainSpec, SpaceTimeGrid};
use crate::io;
use crate::strategies::{DppGreedy, PullToward, RandomMove, Role};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub f: DataFn,
    /// Defaults to `f`.
    #[serde(default)]
    pub g: Option<DataFn>,
    /// Defaults to `f`.
    #[serde(default)]
    pub u0: Option<DataFn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub eps: f64,
    /// Lattice spacing; defaults to `eps / 4`.
    #[serde(default)]
    pub h: Option<f64>,
    pub horizon: f64,
    #[serde(default = "one")]
    pub k: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub scheme: UpdateScheme,
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            max_iter: None,
            scheme: UpdateScheme::Jacobi,
        }
    }
}

impl SolverSection {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            scheme: self.scheme,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPoint {
    pub x: Vec<f64>,
    /// Defaults to the horizon.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "board_one")]
    pub board: u8,
}

fn board_one() -> u8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_strategy_one")]
    pub player_one: String,
    #[serde(default = "default_strategy_two")]
    pub player_two: String,
    #[serde(default)]
    pub starts: Vec<StartPoint>,
    /// States kept in the history handed to strategies; unset keeps all.
    #[serde(default)]
    pub history_window: Option<usize>,
    /// Number of trajectories written to `traces.jsonl`.
    #[serde(default)]
    pub traces: usize,
}

fn default_n() -> usize {
    10_000
}
fn default_strategy_one() -> String {
    "greedy role=max samples=64".into()
}
fn default_strategy_two() -> String {
    "greedy role=min samples=64".into()
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            n: default_n(),
            player_one: default_strategy_one(),
            player_two: default_strategy_two(),
            starts: Vec::new(),
            history_window: None,
            traces: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualSection {
    #[serde(default)]
    pub grad_floor: Option<f64>,
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub t_min: f64,
    #[serde(default)]
    pub stride: Option<usize>,
}

impl Default for ResidualSection {
    fn default() -> Self {
        ResidualSection {
            grad_floor: None,
            margin: None,
            t_min: 0.0,
            stride: None,
        }
    }
}

impl ResidualSection {
    /// The margin defaults to `eps` so every evaluated node has a full ball.
    pub fn options(&self, eps: f64) -> ResidualOptions {
        ResidualOptions {
            grad_floor: self.grad_floor,
            margin: self.margin.unwrap_or(eps),
            t_min: self.t_min,
            stride: self.stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_h_ratio")]
    pub h_ratio: f64,
}

fn default_eps_list() -> Vec<f64> {
    vec![0.2, 0.1, 0.05]
}
fn default_h_ratio() -> f64 {
    4.0
}

impl Default for ConvergeSection {
    fn default() -> Self {
        ConvergeSection {
            eps_list: default_eps_list(),
            h_ratio: default_h_ratio(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub data: DataSection,
    pub params: Params,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub residuals: ResidualSection,
    #[serde(default)]
    pub converge: ConvergeSection,
    #[serde(default)]
    pub estimates: Option<SuiteSettings>,
    #[serde(default)]
    pub seed: u64,
    /// Relative to the config file; the `--out` flag takes precedence.
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A named strategy with parameters, e.g. `pull target=[1,0]`,
/// `greedy role=max samples=64`, `random`.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    Pull { target: Vec<f64> },
    Greedy { role: Role, samples: usize },
    Random,
}

impl std::str::FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut words = s.split_whitespace();
        let name = words.next().ok_or("empty strategy")?;
        let mut params = std::collections::BTreeMap::new();
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| format!("expected key=value, got `{w}`"))?;
            params.insert(k, v);
        }
        let spec = match name {
            "pull" => {
                let raw = params.remove("target").ok_or("pull needs target=[...]")?;
                let target: Vec<f64> = serde_json::from_str(raw).map_err(|e| format!("bad target `{raw}`: {e}"))?;
                StrategySpec::Pull { target }
            }
            "greedy" => {
                let role = match params.remove("role") {
                    Some("max") => Role::Max,
                    Some("min") => Role::Min,
                    other => return Err(format!("greedy needs role=max|min, got {other:?}")),
                };
                let samples = match params.remove("samples") {
                    Some(v) => v.parse().map_err(|_| format!("bad samples `{v}`"))?,
                    None => 64,
                };
                StrategySpec::Greedy { role, samples }
            }
            "random" => StrategySpec::Random,
            other => return Err(format!("unknown strategy `{other}`")),
        };
        if let Some(k) = params.keys().next() {
            return Err(format!("unknown parameter `{k}` for {name}"));
        }
        Ok(spec)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(origin, e.to_string().trim_end()))
    }

    /// Reads, resolves table data relative to the file, and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let mut cfg = Self::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_tables(base)?;
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_tables(&mut self, base: &Path) -> Result<()> {
        self.data.f = self.data.f.resolve(base, "data.f")?;
        if let Some(g) = &self.data.g {
            self.data.g = Some(g.resolve(base, "data.g")?);
        }
        if let Some(u0) = &self.data.u0 {
            self.data.u0 = Some(u0.resolve(base, "data.u0")?);
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.params.h.unwrap_or(self.params.eps / 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate().map_err(|e| match e {
            Error::Config { path, message } => Error::config(format!("domain.{path}"), message),
            e => e,
        })?;
        let p = &self.params;
        let positive = |v: f64, path: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(path, format!("must be positive, got {v}")))
            }
        };
        positive(p.eps, "params.eps")?;
        if p.eps >= 1.0 {
            return Err(Error::config("params.eps", "need eps < 1"));
        }
        positive(self.h(), "params.h")?;
        if self.h() > p.eps / 4.0 * (1.0 + 1e-12) {
            return Err(Error::config("params.h", format!("need h <= eps/4, got h/eps = {}", self.h() / p.eps)));
        }
        positive(p.horizon, "params.horizon")?;
        positive(p.k, "params.k")?;
        if p.k * p.eps * p.eps >= 1.0 {
            return Err(Error::config("params.k", "K eps^2 must be below 1"));
        }
        positive(self.solver.tol, "solver.tol")?;
        if self.simulate.n == 0 {
            return Err(Error::config("simulate.n", "need at least one trajectory"));
        }
        for (i, s) in self.simulate.starts.iter().enumerate() {
            if s.x.len() != self.domain.dim() {
                return Err(Error::config(format!("simulate.starts[{i}].x"), "wrong dimension"));
            }
            if Board::from_index(s.board).is_none() {
                return Err(Error::config(format!("simulate.starts[{i}].board"), "board must be 1 or 2"));
            }
        }
        for (path, s) in [
            ("simulate.player_one", &self.simulate.player_one),
            ("simulate.player_two", &self.simulate.player_two),
        ] {
            s.parse::<StrategySpec>().map_err(|m| Error::config(path, m))?;
        }
        if self.converge.eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0 && *e < 1.0)) {
            return Err(Error::config("converge.eps_list", "every eps must lie in (0, 1)"));
        }
        positive(self.converge.h_ratio, "converge.h_ratio")?;
        if self.converge.h_ratio < 4.0 {
            return Err(Error::config("converge.h_ratio", "need eps/h >= 4"));
        }
        self.problem().validate()
    }

    pub fn problem(&self) -> ProblemData {
        let f = self.data.f.clone();
        let g = self.data.g.clone().unwrap_or_else(|| f.clone());
        let u0 = self.data.u0.clone().unwrap_or_else(|| f.clone());
        ProblemData::new(self.domain.clone(), f, g, u0, self.params.eps, self.params.horizon).with_k(self.params.k)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::build(self.domain.clone(), self.h(), self.params.eps, self.params.horizon)
    }

    fn study(&self) -> StudySpec {
        let p = self.problem();
        StudySpec {
            domain: p.domain,
            f: p.f,
            g: p.g,
            u0: p.u0,
            horizon: p.horizon,
            k: p.k,
            h_ratio: self.converge.h_ratio,
        }
    }

    /// The configuration with every default written out.
    pub fn effective_toml(&self) -> String {
        let mut c = self.clone();
        c.params.h = Some(self.h());
        c.solver.max_iter = Some(self.solver.options().iteration_cap(self.params.eps));
        c.residuals.margin = Some(self.residuals.margin.unwrap_or(self.params.eps));
        c.residuals.stride = Some(self.residuals.stride.unwrap_or(((self.params.eps / self.h()).round() as usize).max(1)));
        toml::to_string(&c).unwrap_or_else(|e| format!("# could not render config: {e}\n"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Simulate,
    Residuals,
    Converge,
    Estimates,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Simulate => "simulate",
            Subcommand::Residuals => "residuals",
            Subcommand::Converge => "converge",
            Subcommand::Estimates => "estimates",
        }
    }
}

/// Command line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub eps_list: Option<Vec<f64>>,
}

/// Runs a subcommand and returns the output directory.
pub fn run(mut cfg: RunConfig, cmd: Subcommand, over: &Overrides) -> Result<PathBuf> {
    if let Some(s) = over.seed {
        cfg.seed = s;
    }
    if let Some(list) = &over.eps_list {
        cfg.converge.eps_list = list.clone();
    }
    if let Some(out) = &over.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    let threads = over.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("--threads", e.to_string()))?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    pool.install(|| dispatch(&cfg, cmd))?;
    Ok(cfg.output)
}

struct Report {
    text: String,
    start: Instant,
}

impl Report {
    fn new(cfg: &RunConfig, cmd: Subcommand) -> Self {
        let mut text = format!("towpde {} {}\n\n[config]\n", cmd.name(), env!("CARGO_PKG_VERSION"));
        text.push_str(&cfg.effective_toml());
        text.push('\n');
        Report {
            text,
            start: Instant::now(),
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn finish(mut self, dir: &Path) -> Result<()> {
        let secs = self.start.elapsed().as_secs_f64();
        self.line(format!("\nwall time: {secs:.3} s"));
        let path = dir.join("report.txt");
        std::fs::write(&path, self.text).map_err(|e| Error::io(path, e))
    }
}

fn solve_into(cfg: &RunConfig, report: &mut Report) -> Result<(ProblemData, SpaceTimeGrid, ValuePair)> {
    let data = cfg.problem();
    let grid = cfg.grid()?;
    report.line("[grid]");
    report.line(grid.summary().to_text());
    let dr = data.report(&grid);
    report.line(format!(
        "data: L_f = {:.6e}, L_g = {:.6e}, L_u0 = {:.6e}, C = {:.6e}, seam gap = {:.3e} (tolerance {:.3e}){}",
        dr.lipschitz_f,
        dr.lipschitz_g,
        dr.lipschitz_u0,
        dr.bound,
        dr.compatibility_gap,
        dr.compatibility_tolerance,
        if dr.compatible() { "" } else { "  WARNING: u0 and f(.,0) disagree on the boundary" }
    ));
    let t = Instant::now();
    let pair = solve_dpp(&data, &grid, &cfg.solver.options())?;
    let solve_secs = t.elapsed().as_secs_f64();
    let res = dpp_residual(&pair, &data, &grid);
    report.line("\n[solve]");
    report.line(format!("solve time: {solve_secs:.3} s"));
    report.line(format!(
        "dpp residual: max_u = {:.3e}, max_v = {:.3e} at level {} node {}",
        res.max_u, res.max_v, res.worst.0, res.worst.1
    ));
    let (su, sv) = pair.sup_norms();
    report.line(format!("sup |u| = {su:.6e}, sup |v| = {sv:.6e}, C = {:.6e}", pair.bound));
    report.line("level  t  iterations  initial_increment  final_increment  max_ratio");
    for s in &pair.slices {
        report.line(format!(
            "{}  {}{}  {}  {:.3e}  {:.3e}  {}",
            s.level,
            s.time,
            if s.clamped { " (clamped)" } else { "" },
            s.iterations,
            s.initial_increment,
            s.final_increment,
            s.max_ratio.map_or("-".into(), |r| format!("{r:.9}"))
        ));
    }
    if pair.u.iter().chain(&pair.v).flatten().any(|x| x.abs() > pair.bound + 1e-12) {
        return Err(Error::Numeric("solution exceeds the uniform bound C".into()));
    }
    Ok((data, grid, pair))
}

fn build_strategy(spec: &StrategySpec, view: Option<&Arc<FieldView>>) -> Box<dyn Strategy> {
    match spec {
        StrategySpec::Pull { target } => Box::new(PullToward::new(target)),
        StrategySpec::Random => Box::new(RandomMove),
        StrategySpec::Greedy { role, samples } => {
            Box::new(DppGreedy::new(view.expect("field solved for greedy").clone(), *role, *samples))
        }
    }
}

fn dispatch(cfg: &RunConfig, cmd: Subcommand) -> Result<()> {
    let out = &cfg.output;
    let mut report = Report::new(cfg, cmd);
    match cmd {
        Subcommand::Solve => {
            let (_, grid, pair) = solve_into(cfg, &mut report)?;
            io::write_field_pack(&pair, &grid, &out.join("field.pack"))?;
            let levels = out.join("levels");
            std::fs::create_dir_all(&levels).map_err(|e| Error::io(&levels, e))?;
            io::write_level_csvs(&pair, &grid, &levels)?;
        }
        Subcommand::Residuals => {
            let (data, grid, pair) = solve_into(cfg, &mut report)?;
            let r = pde_residuals(&pair, &grid, &data, &cfg.residuals.options(cfg.params.eps))?;
            report.line("\n[residuals]");
            report.line(format!(
                "gradient floor {:.3e}, margin {}, spacing {}, kappa {}\nparabolic: sup {:.6e} mean {:.6e} over {} nodes\nelliptic: sup {:.6e} mean {:.6e} over {} nodes\nmasked fraction {:.4}",
                r.grad_floor,
                r.margin,
                r.spacing,
                r.kappa,
                r.parabolic.sup,
                r.parabolic.mean,
                r.parabolic.count,
                r.elliptic.sup,
                r.elliptic.mean,
                r.elliptic.count,
                r.masked_fraction
            ));
            io::write_residuals_csv(&r, &grid, &out.join("residuals.csv"))?;
        }
        Subcommand::Simulate => {
            let s1: StrategySpec = cfg.simulate.player_one.parse().map_err(|m| Error::config("simulate.player_one", m))?;
            let s2: StrategySpec = cfg.simulate.player_two.parse().map_err(|m| Error::config("simulate.player_two", m))?;
            let data = cfg.problem();
            let needs_field = matches!(s1, StrategySpec::Greedy { .. }) || matches!(s2, StrategySpec::Greedy { .. });
            let view = if needs_field {
                let (data, grid, pair) = solve_into(cfg, &mut report)?;
                Some(Arc::new(FieldView::new(grid, data, pair)?))
            } else {
                None
            };
            let one = build_strategy(&s1, view.as_ref());
            let two = build_strategy(&s2, view.as_ref());
            let sim = Simulation {
                data: &data,
                rules: GameRules::for_problem(&data).with_history_window(cfg.simulate.history_window),
                one: one.as_ref(),
                two: two.as_ref(),
                seed: cfg.seed,
            };
            if cfg.simulate.starts.is_empty() {
                return Err(Error::config("simulate.starts", "no start points given"));
            }
            report.line("\n[simulate]");
            report.line(format!("player one: {}\nplayer two: {}", one.describe(), two.describe()));
            let mut rows = Vec::new();
            let mut traces = Vec::new();
            for (i, sp) in cfg.simulate.starts.iter().enumerate() {
                let start = GameState::new(&sp.x, sp.t.unwrap_or(cfg.params.horizon), Board::from_index(sp.board).unwrap());
                // Each start gets its own seed so starts do not share streams.
                let sim_i = Simulation {
                    seed: cfg.seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                    ..sim.clone()
                };
                let est = sim_i.estimate(&start, cfg.simulate.n)?;
                report.line(format!(
                    "start {:?} t = {} board {}: mean {:.6e} stderr {:.3e} (n = {}, E[tau] = {:.2})",
                    sp.x, start.t, sp.board, est.mean, est.stderr, est.n, est.mean_steps
                ));
                if let Some(view) = &view {
                    let node_val = match start.board {
                        Board::One => view.eval_u(&start.x, start.t)?,
                        Board::Two => view.eval_v(&start.x, start.t)?,
                    };
                    report.line(format!(
                        "  dpp value {:.6e}, difference {:.2} stderr",
                        node_val,
                        (est.mean - node_val).abs() / est.stderr.max(f64::MIN_POSITIVE)
                    ));
                }
                if cfg.simulate.traces > 0 {
                    traces.extend(sim_i.traces(&start, cfg.simulate.traces)?);
                }
                rows.push((start, est));
            }
            io::write_estimates_csv(&rows, &out.join("estimates.csv"))?;
            if cfg.simulate.traces > 0 {
                io::write_traces_jsonl(&traces, &out.join("traces.jsonl"))?;
            }
        }
        Subcommand::Converge => {
            let table = convergence_study(
                &cfg.study(),
                &cfg.converge.eps_list,
                &cfg.solver.options(),
                &cfg.residuals.options(cfg.params.eps),
            )?;
            report.line("[converge]");
            report.line(format!("compared at t = {:?}", table.compare_times));
            report.line("eps  h  dist_to_next  dist_to_reference  parabolic_sup  parabolic_mean  elliptic_sup  elliptic_mean  runtime_s");
            for r in &table.rows {
                report.line(format!(
                    "{}  {}  {}  {:.4e}  {:.4e}  {:.4e}  {:.4e}  {:.4e}  {:.2}",
                    r.eps,
                    r.h,
                    r.dist_to_next.map_or("-".into(), |d| format!("{d:.4e}")),
                    r.dist_to_reference,
                    r.parabolic.sup,
                    r.parabolic.mean,
                    r.elliptic.sup,
                    r.elliptic.mean,
                    r.runtime_secs
                ));
            }
            io::write_convergence_csv(&table, &out.join("convergence.csv"))?;
        }
        Subcommand::Estimates => {
            let settings = cfg
                .estimates
                .clone()
                .ok_or_else(|| Error::config("estimates", "missing [estimates] section"))?;
            let suite = boundary_estimate_suite(&cfg.domain, &settings, cfg.seed)?;
            report.line("[estimates]");
            let mut text = String::new();
            for p in &suite.pull {
                let _ = writeln!(
                    text,
                    "eps {} r0 {} ({} opponent): E[tau] = {:.3} +- {:.3} (bound {:.3}); E[|x_tau - y|^2] = {:.4e} +- {:.2e} (bound {:.4e}); P(near) = {:.4}; P(long) = {:.4}",
                    p.eps,
                    p.r0,
                    p.opponent,
                    p.mean_tau.mean,
                    p.mean_tau.stderr,
                    p.tau_bound,
                    p.mean_sq_exit.mean,
                    p.mean_sq_exit.stderr,
                    p.sq_exit_bound,
                    p.p_near,
                    p.p_long
                );
            }
            if let Some(m) = &suite.martingale {
                let _ = writeln!(
                    text,
                    "martingale: mu(x0) = {:.6e}, E[mu(x_tau)] = {:.6e} +- {:.2e}, E[tau] = {:.2}",
                    m.mu_start, m.mean_mu_exit.mean, m.mean_mu_exit.stderr, m.mean_tau.mean
                );
            }
            report.line(text);
            let path = out.join("estimates.json");
            let json = serde_json::to_string_pretty(&suite).map_err(|e| Error::io(&path, e.into()))?;
            std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        }
    }
    report.finish(out)
}
