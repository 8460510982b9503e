//! Numerical toolkit for a two-board stochastic game and the coupled
//! parabolic/elliptic system its values approximate:
//!
//! ```text
//! u_t - ½ Δ∞u + u - v = 0,    -(κ/2K) Δv + v - u = 0    in Ω × (0, T]
//! u = f, v = g on ∂Ω × (0, T],  u(·, 0) = u0 in Ω
//! ```
//!
//! The crate solves the game's dynamic programming principle on a lattice
//! ([`dpp`]), simulates the game itself on the continuum ([`game`],
//! [`strategies`]), and cross-checks the two together with PDE residuals,
//! convergence studies and exit-time statistics ([`analysis`]).

pub mod analysis;
pub mod config;
pub mod data;
pub mod dpp;
pub mod error;
pub mod field;
pub mod game;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod stats;
pub mod strategies;

/// A point of ℝ^N; stays inline for `N <= 4`.
pub type Point = smallvec::SmallVec<[f64; 4]>;

pub use data::{Board, DataFn, ProblemData};
pub use dpp::{solve_dpp, SolverOptions, ValuePair};
pub use error::{Error, Result};
pub use geometry::{DomainSpec, SpaceTimeGrid};
