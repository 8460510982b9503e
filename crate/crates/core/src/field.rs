//! Off-lattice evaluation of a solved [`ValuePair`].
//!
//! Inside Ω the view interpolates multilinearly in space (and linearly in
//! time between levels). Outside Ω and at `t <= 0` it returns the exact
//! payoff data, the same values the DPP itself sees there.

use crate::data::ProblemData;
use crate::dpp::ValuePair;
use crate::error::{Error, Result};
use crate::geometry::SpaceTimeGrid;

/// Relative slack (in units of ε²) under which a time is treated as a level.
pub const TIME_SNAP: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FieldView {
    pub grid: SpaceTimeGrid,
    pub data: ProblemData,
    pub pair: ValuePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Which {
    U,
    V,
}

impl FieldView {
    pub fn new(grid: SpaceTimeGrid, data: ProblemData, pair: ValuePair) -> Result<Self> {
        if pair.u.len() != grid.times().len() || pair.u.iter().any(|s| s.len() != grid.node_count()) {
            return Err(Error::config("field", "value pair does not match the grid"));
        }
        Ok(FieldView { grid, data, pair })
    }

    /// `(lower level, weight of the upper level)` bracketing `t`, or `None`
    /// for `t` beyond the horizon.
    pub fn level_for_time(&self, t: f64) -> Option<(usize, f64)> {
        let times = self.grid.times();
        let slack = TIME_SNAP * self.grid.eps() * self.grid.eps();
        let top = *times.last().unwrap();
        if t > top + slack {
            return None;
        }
        if t >= top - slack {
            return Some((times.len() - 1, 0.0));
        }
        let m = times.partition_point(|&s| s <= t + slack).max(1) - 1;
        if (t - times[m]).abs() <= slack {
            return Some((m, 0.0));
        }
        Some((m, (t - times[m]) / (times[m + 1] - times[m])))
    }

    pub fn eval_u(&self, x: &[f64], t: f64) -> Result<f64> {
        self.eval(x, t, Which::U)
    }

    pub fn eval_v(&self, x: &[f64], t: f64) -> Result<f64> {
        self.eval(x, t, Which::V)
    }

    fn eval(&self, x: &[f64], t: f64, which: Which) -> Result<f64> {
        let eps2 = self.grid.eps() * self.grid.eps();
        let inside = self.data.domain.contains(x);
        if t <= TIME_SNAP * eps2 {
            return Ok(if inside {
                self.data.u0.eval(x, 0.0)
            } else {
                self.data.f.eval(x, 0.0)
            });
        }
        if !inside {
            return Ok(match which {
                Which::U => self.data.f.eval(x, t),
                Which::V => self.data.g.eval(x, t),
            });
        }
        let coverage = || Error::Coverage {
            point: x.to_vec(),
            time: t,
        };
        let (m, w) = self.level_for_time(t).ok_or_else(coverage)?;
        let weights = self.grid.interpolation_stencil(x).ok_or_else(coverage)?;
        let field = match which {
            Which::U => &self.pair.u,
            Which::V => &self.pair.v,
        };
        let at = |level: usize| weights.iter().map(|&(n, c)| c * field[level][n]).sum::<f64>();
        if w == 0.0 {
            Ok(at(m))
        } else {
            Ok((1.0 - w) * at(m) + w * at(m + 1))
        }
    }
}
