//! C interface to `towpde`.
//!
//! Handles are opaque pointers created by `tow_*_new`/`tow_solve` and
//! released with the matching `*_free`. Every fallible call returns a
//! [`TowStatus`]; on failure `tow_last_error` describes what went wrong on
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use towpde::config::RunConfig;
use towpde::data::Board;
use towpde::field::FieldView;
use towpde::game::{GameRules, GameState, Simulation};
use towpde::strategies::{DppGreedy, Role};
use towpde::{io, solve_dpp, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TowStatus {
    Ok = 0,
    NullArgument = 1,
    Config = 2,
    Numeric = 3,
    Convergence = 4,
    Io = 5,
    Contract = 6,
    Panic = 7,
}

/// A parsed and validated run configuration.
pub struct TowProblem {
    config: RunConfig,
}

/// A solved value pair together with its grid and data.
pub struct TowSolution {
    view: Arc<FieldView>,
}

/// Result of a Monte Carlo value estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TowEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub mean_steps: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TowStatus {
    match e.exit_code() {
        2 => TowStatus::Config,
        3 => TowStatus::Numeric,
        4 => TowStatus::Convergence,
        5 => TowStatus::Io,
        _ => TowStatus::Contract,
    }
}

fn guard(f: impl FnOnce() -> Result<(), TowStatus>) -> TowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TowStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            TowStatus::Panic
        }
    }
}

fn fail(e: Error) -> TowStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> TowStatus {
    set_error(&format!("null argument: {what}"));
    TowStatus::NullArgument
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, TowStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        TowStatus::Config
    })
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `κ = 1/(N+2)`.
#[no_mangle]
pub extern "C" fn tow_kappa(dim: u32) -> f64 {
    towpde::analysis::kappa(dim as usize)
}

/// Parses a TOML configuration. Relative table paths resolve against the
/// current directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tow_problem_from_toml(toml: *const c_char, out: *mut *mut TowProblem) -> TowStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut config = RunConfig::from_toml(text, "<string>").map_err(fail)?;
        config.resolve_tables(Path::new(".")).map_err(fail)?;
        config.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(TowProblem { config }));
        Ok(())
    })
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tow_problem_from_file(path: *const c_char, out: *mut *mut TowProblem) -> TowStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = RunConfig::load(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(TowProblem { config }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from `tow_problem_from_*` (or be null).
#[no_mangle]
pub unsafe extern "C" fn tow_problem_free(problem: *mut TowProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves the DPP of `problem`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tow_solve(problem: *const TowProblem, out: *mut *mut TowSolution) -> TowStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = &problem.config;
        let data = cfg.problem();
        let grid = cfg.grid().map_err(fail)?;
        let pair = solve_dpp(&data, &grid, &cfg.solver.options()).map_err(fail)?;
        let view = FieldView::new(grid, data, pair).map_err(fail)?;
        *out = Box::into_raw(Box::new(TowSolution { view: Arc::new(view) }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from `tow_solve` (or be null).
#[no_mangle]
pub unsafe extern "C" fn tow_solution_free(solution: *mut TowSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Spatial dimension, or 0 for a null handle.
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_dim(solution: *const TowSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.view.grid.dim())
}

/// Number of time levels `M + 1`, or 0 for a null handle.
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_level_count(solution: *const TowSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.view.pair.u.len())
}

/// Number of grid nodes (interior first, then collar), or 0 for null.
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_node_count(solution: *const TowSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.view.grid.node_count())
}

/// Number of interior nodes, or 0 for null.
///
/// # Safety
/// `solution` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_interior_count(solution: *const TowSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.view.grid.interior_count())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), TowStatus> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        set_error(&format!("buffer holds {len} values, need {}", src.len()));
        return Err(TowStatus::Contract);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies the node coordinates (`node_count * dim` values, node-major).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_coords(solution: *const TowSolution, buf: *mut f64, len: usize) -> TowStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(s.view.grid.coords(), buf, len)
    })
}

/// Copies the level times.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_times(solution: *const TowSolution, buf: *mut f64, len: usize) -> TowStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(s.view.grid.times(), buf, len)
    })
}

/// Copies `u` (board 1) or `v` (board 2) at `level` into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_field(
    solution: *const TowSolution,
    board: u8,
    level: usize,
    buf: *mut f64,
    len: usize,
) -> TowStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let field = match Board::from_index(board) {
            Some(Board::One) => &s.view.pair.u,
            Some(Board::Two) => &s.view.pair.v,
            None => {
                set_error("board must be 1 or 2");
                return Err(TowStatus::Contract);
            }
        };
        let slice = field.get(level).ok_or_else(|| {
            set_error(&format!("level {level} out of range"));
            TowStatus::Contract
        })?;
        copy_out(slice, buf, len)
    })
}

/// Value of `u` (board 1) or `v` (board 2) at an arbitrary `(x, t)`.
///
/// # Safety
/// `x` must hold `dim` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_eval(
    solution: *const TowSolution,
    board: u8,
    x: *const f64,
    dim: usize,
    t: f64,
    out: *mut f64,
) -> TowStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if x.is_null() || out.is_null() {
            return Err(null("x/out"));
        }
        if dim != s.view.grid.dim() {
            set_error("dimension mismatch");
            return Err(TowStatus::Contract);
        }
        let x = std::slice::from_raw_parts(x, dim);
        let v = match Board::from_index(board) {
            Some(Board::One) => s.view.eval_u(x, t),
            Some(Board::Two) => s.view.eval_v(x, t),
            None => {
                set_error("board must be 1 or 2");
                return Err(TowStatus::Contract);
            }
        }
        .map_err(fail)?;
        *out = v;
        Ok(())
    })
}

/// Writes the binary field pack.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tow_solution_write_pack(solution: *const TowSolution, path: *const c_char) -> TowStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let path = str_arg(path, "path")?;
        io::write_field_pack(&s.view.pair, &s.view.grid, Path::new(path)).map_err(fail)
    })
}

/// Monte Carlo value of the game from `(x, t, board)` when both players
/// play greedily on the solved field (`samples` extra ball points each).
///
/// # Safety
/// `x` must hold `dim` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tow_estimate_greedy(
    solution: *const TowSolution,
    x: *const f64,
    dim: usize,
    t: f64,
    board: u8,
    n: u64,
    samples: u32,
    seed: u64,
    out: *mut TowEstimate,
) -> TowStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if x.is_null() || out.is_null() {
            return Err(null("x/out"));
        }
        if dim != s.view.grid.dim() {
            set_error("dimension mismatch");
            return Err(TowStatus::Contract);
        }
        let board = Board::from_index(board).ok_or_else(|| {
            set_error("board must be 1 or 2");
            TowStatus::Contract
        })?;
        let x = std::slice::from_raw_parts(x, dim);
        let one = DppGreedy::new(s.view.clone(), Role::Max, samples as usize);
        let two = DppGreedy::new(s.view.clone(), Role::Min, samples as usize);
        let sim = Simulation {
            data: &s.view.data,
            rules: GameRules::for_problem(&s.view.data).with_history_window(Some(0)),
            one: &one,
            two: &two,
            seed,
        };
        let est = sim.estimate(&GameState::new(x, t, board), n as usize).map_err(fail)?;
        *out = TowEstimate {
            mean: est.mean,
            stderr: est.stderr,
            n: est.n as u64,
            mean_steps: est.mean_steps,
        };
        Ok(())
    })
}
