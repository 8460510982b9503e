//! The two-board game on the continuum.
//!
//! Board 1 plays Tug-of-War and each play lowers the time by ε². Board 2
//! moves the token uniformly in the ε-ball at frozen time. The token jumps
//! to the other board with probability ε² from board 1 and `K ε²` from
//! board 2, keeping `(x, t)`. The game stops once the token leaves Ω or the
//! time drops to 0.

use std::collections::VecDeque;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Board, ProblemData};
use crate::error::{Error, Result};
use crate::geometry::{dist, PointClass};
use crate::rng::{stream, uniform_in_ball, Purpose};
use crate::stats::{pairwise_sum, MeanEstimate};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub x: Point,
    pub t: f64,
    pub board: Board,
    /// Earlier states, oldest first, capped by the rules' history window.
    pub history: VecDeque<(Point, f64, Board)>,
    /// Coin wins per player on board 1.
    pub wins: [u64; 2],
    pub steps: u64,
    pub board_one_plays: u64,
    pub switches: u64,
}

impl GameState {
    pub fn new(x: &[f64], t: f64, board: Board) -> Self {
        GameState {
            x: x.iter().copied().collect(),
            t,
            board,
            history: VecDeque::new(),
            wins: [0, 0],
            steps: 0,
            board_one_plays: 0,
            switches: 0,
        }
    }
}

/// What a strategy sees when asked for a move.
pub struct MoveContext<'a> {
    pub state: &'a GameState,
    pub player: Player,
    pub eps: f64,
    /// Coin wins of `player` before this move.
    pub wins: u64,
}

pub trait Strategy: Send + Sync {
    /// A point of the closed ball `B_ε(state.x)`. Randomized strategies
    /// draw only from `rng`, which is the player's own stream.
    fn propose(&self, ctx: &MoveContext<'_>, rng: &mut dyn RngCore) -> Result<Point>;

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameRules {
    pub eps: f64,
    /// Probability of leaving board 1 per step (ε² in the game).
    pub switch_one: f64,
    /// Probability of leaving board 2 per step (`K ε²`).
    pub switch_two: f64,
    /// `None` keeps the full history.
    pub history_window: Option<usize>,
    pub step_cap: u64,
}

impl GameRules {
    pub fn new(eps: f64, k: f64) -> Self {
        GameRules {
            eps,
            switch_one: eps * eps,
            switch_two: k * eps * eps,
            history_window: None,
            step_cap: 1_000_000_000,
        }
    }

    pub fn for_problem(data: &ProblemData) -> Self {
        Self::new(data.eps, data.k)
    }

    pub fn with_history_window(mut self, window: Option<usize>) -> Self {
        self.history_window = window;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    Switch,
    Play(Player),
    Walk,
}

/// The per-trajectory random streams: the game's own draws plus one per
/// player.
pub struct Streams<'a> {
    pub game: &'a mut dyn RngCore,
    pub one: &'a mut dyn RngCore,
    pub two: &'a mut dyn RngCore,
}

/// Lowers `t` by ε², snapping to 0 when the result is within rounding.
pub fn decrement_time(t: f64, eps: f64) -> f64 {
    let eps2 = eps * eps;
    let next = t - eps2;
    if next.abs() <= crate::field::TIME_SNAP * eps2 {
        0.0
    } else {
        next
    }
}

/// One transition of the game from an interior state.
pub fn step(
    state: &mut GameState,
    rules: &GameRules,
    one: &dyn Strategy,
    two: &dyn Strategy,
    streams: &mut Streams<'_>,
    trajectory: usize,
) -> Result<StepEvent> {
    let p_switch = match state.board {
        Board::One => rules.switch_one,
        Board::Two => rules.switch_two,
    };
    let before = (state.x.clone(), state.t, state.board);
    let event = if streams.game.random::<f64>() < p_switch {
        state.board = state.board.other();
        state.switches += 1;
        StepEvent::Switch
    } else if state.board == Board::One {
        let player = if streams.game.random::<f64>() < 0.5 {
            Player::One
        } else {
            Player::Two
        };
        let ctx = MoveContext {
            state,
            player,
            eps: rules.eps,
            wins: state.wins[player.index()],
        };
        let y = match player {
            Player::One => one.propose(&ctx, &mut *streams.one)?,
            Player::Two => two.propose(&ctx, &mut *streams.two)?,
        };
        let d = dist(&y, &state.x);
        if !(d <= rules.eps * (1.0 + 1e-12)) {
            return Err(Error::StrategyContract {
                trajectory,
                distance: d,
                eps: rules.eps,
            });
        }
        state.wins[player.index()] += 1;
        state.board_one_plays += 1;
        state.x = y;
        state.t = decrement_time(state.t, rules.eps);
        StepEvent::Play(player)
    } else {
        state.x = uniform_in_ball(&mut *streams.game, &state.x, rules.eps);
        StepEvent::Walk
    };
    if rules.history_window != Some(0) {
        state.history.push_back(before);
        if let Some(w) = rules.history_window {
            while state.history.len() > w {
                state.history.pop_front();
            }
        }
    }
    state.steps += 1;
    Ok(event)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Lateral,
    Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub x: Point,
    pub t: f64,
    pub board: Board,
    pub steps: u64,
    pub payoff: f64,
    pub exit: ExitKind,
    pub board_one_plays: u64,
    pub switches: u64,
}

/// One record of a debugging trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub trajectory: usize,
    pub step: u64,
    pub x: Vec<f64>,
    pub t: f64,
    pub board: u8,
    /// Event that led to this state; `None` for the start.
    pub event: Option<StepEvent>,
}

fn record(trajectory: usize, state: &GameState, event: Option<StepEvent>) -> TraceRecord {
    TraceRecord {
        trajectory,
        step: state.steps,
        x: state.x.to_vec(),
        t: state.t,
        board: state.board.index(),
        event,
    }
}

/// Plays one game to the end. With `trace` set, every visited state is
/// appended to it.
#[allow(clippy::too_many_arguments)]
pub fn play(
    start: GameState,
    rules: &GameRules,
    data: &ProblemData,
    one: &dyn Strategy,
    two: &dyn Strategy,
    streams: &mut Streams<'_>,
    trajectory: usize,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<TrajectoryOutcome> {
    if data.domain.classify(&start.x, start.t) != PointClass::Interior {
        return Err(Error::config(
            "start",
            format!("start state x = {:?}, t = {} is not interior", start.x.as_slice(), start.t),
        ));
    }
    let mut state = start;
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(record(trajectory, &state, None));
    }
    let exit = loop {
        match data.domain.classify(&state.x, state.t) {
            PointClass::Interior => {}
            PointClass::LateralExit => break ExitKind::Lateral,
            PointClass::TimeExit => break ExitKind::Time,
        }
        if state.steps >= rules.step_cap {
            return Err(Error::Runaway {
                trajectory,
                cap: rules.step_cap,
            });
        }
        let event = step(&mut state, rules, one, two, streams, trajectory)?;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(record(trajectory, &state, Some(event)));
        }
    };
    let payoff = data.terminal_payoff(&state.x, state.t, state.board)?;
    Ok(TrajectoryOutcome {
        x: state.x,
        t: state.t,
        board: state.board,
        steps: state.steps,
        payoff,
        exit,
        board_one_plays: state.board_one_plays,
        switches: state.switches,
    })
}

/// A batch of independent games from one start.
#[derive(Clone)]
pub struct Simulation<'a> {
    pub data: &'a ProblemData,
    pub rules: GameRules,
    pub one: &'a dyn Strategy,
    pub two: &'a dyn Strategy,
    pub seed: u64,
}

impl Simulation<'_> {
    /// Plays trajectory `index` with its own streams.
    pub fn trajectory(
        &self,
        start: &GameState,
        index: usize,
        trace: Option<&mut Vec<TraceRecord>>,
    ) -> Result<TrajectoryOutcome> {
        let mut game = stream(self.seed, index as u64, Purpose::Game);
        let mut r1 = stream(self.seed, index as u64, Purpose::PlayerOne);
        let mut r2 = stream(self.seed, index as u64, Purpose::PlayerTwo);
        let mut streams = Streams {
            game: &mut game,
            one: &mut r1,
            two: &mut r2,
        };
        play(start.clone(), &self.rules, self.data, self.one, self.two, &mut streams, index, trace)
    }

    /// Trajectories `0..n` in parallel, returned in index order. The
    /// reported error, if any, is the one of the lowest failing index.
    pub fn run(&self, start: &GameState, n: usize) -> Result<Vec<TrajectoryOutcome>> {
        let results: Vec<Result<TrajectoryOutcome>> = (0..n)
            .into_par_iter()
            .map(|i| self.trajectory(start, i, None))
            .collect();
        results.into_iter().collect()
    }

    pub fn estimate(&self, start: &GameState, n: usize) -> Result<Estimate> {
        if n == 0 {
            return Err(Error::config("simulate.n", "need at least one trajectory"));
        }
        Ok(Estimate::from_outcomes(&self.run(start, n)?))
    }

    /// The first `count` trajectories with full traces.
    pub fn traces(&self, start: &GameState, count: usize) -> Result<Vec<TraceRecord>> {
        let mut out = Vec::new();
        for i in 0..count {
            self.trajectory(start, i, Some(&mut out))?;
        }
        Ok(out)
    }
}

/// Sample statistics of a batch of games.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub mean_steps: f64,
    pub stderr_steps: f64,
    /// `tau_histogram[b]` counts games with `2^b <= τ < 2^(b+1)`; bucket 0
    /// also holds `τ = 0`.
    pub tau_histogram: Vec<u64>,
    pub lateral_exits: usize,
    pub time_exits: usize,
    pub exits_on_board_two: usize,
    pub min_payoff: f64,
    pub max_payoff: f64,
}

impl Estimate {
    pub fn from_outcomes(outcomes: &[TrajectoryOutcome]) -> Self {
        let payoffs: Vec<f64> = outcomes.iter().map(|o| o.payoff).collect();
        let steps: Vec<f64> = outcomes.iter().map(|o| o.steps as f64).collect();
        let p = MeanEstimate::of(&payoffs);
        let s = MeanEstimate::of(&steps);
        let mut tau_histogram = Vec::new();
        for o in outcomes {
            let b = (64 - o.steps.max(1).leading_zeros() - 1) as usize;
            if tau_histogram.len() <= b {
                tau_histogram.resize(b + 1, 0);
            }
            tau_histogram[b] += 1;
        }
        Estimate {
            mean: p.mean,
            stderr: p.stderr,
            n: outcomes.len(),
            mean_steps: s.mean,
            stderr_steps: s.stderr,
            tau_histogram,
            lateral_exits: outcomes.iter().filter(|o| o.exit == ExitKind::Lateral).count(),
            time_exits: outcomes.iter().filter(|o| o.exit == ExitKind::Time).count(),
            exits_on_board_two: outcomes.iter().filter(|o| o.board == Board::Two).count(),
            min_payoff: payoffs.iter().copied().fold(f64::INFINITY, f64::min),
            max_payoff: payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Mean of `g(outcome)` over a batch, with its standard error.
pub fn outcome_mean(outcomes: &[TrajectoryOutcome], g: impl Fn(&TrajectoryOutcome) -> f64) -> MeanEstimate {
    let xs: Vec<f64> = outcomes.iter().map(g).collect();
    MeanEstimate::of(&xs)
}

/// Sum of payoffs with the fixed pairwise scheme (used in determinism tests).
pub fn payoff_sum(outcomes: &[TrajectoryOutcome]) -> f64 {
    let xs: Vec<f64> = outcomes.iter().map(|o| o.payoff).collect();
    pairwise_sum(&xs)
}
