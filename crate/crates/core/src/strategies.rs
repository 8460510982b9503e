//! Named strategies: pulling toward a point, uniform random moves, and the
//! greedy strategies read off a solved DPP field.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::field::FieldView;
use crate::game::{decrement_time, MoveContext, Strategy};
use crate::geometry::{dist, sub};
use crate::rng::uniform_in_ball;
use crate::Point;

/// `x + (ε³/2^k − ε)(x − y)/|x − y|`, or `y` itself once `|x − y| < ε`.
pub fn pull_move(x: &[f64], target: &[f64], k: u64, eps: f64) -> Point {
    let d = dist(x, target);
    if d < eps {
        return target.iter().copied().collect();
    }
    let step = eps.powi(3) / 2f64.powi(k.min(1074) as i32) - eps;
    x.iter().zip(target).map(|(a, b)| a + step * (a - b) / d).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullToward {
    pub target: Point,
}

impl PullToward {
    pub fn new(target: &[f64]) -> Self {
        PullToward {
            target: target.iter().copied().collect(),
        }
    }
}

impl Strategy for PullToward {
    fn propose(&self, ctx: &MoveContext<'_>, _rng: &mut dyn RngCore) -> Result<Point> {
        Ok(pull_move(&ctx.state.x, &self.target, ctx.wins, ctx.eps))
    }

    fn describe(&self) -> String {
        format!("pull target={:?}", self.target.as_slice())
    }
}

/// Moves to a uniform point of the ε-ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomMove;

impl Strategy for RandomMove {
    fn propose(&self, ctx: &MoveContext<'_>, rng: &mut dyn RngCore) -> Result<Point> {
        Ok(uniform_in_ball(rng, &ctx.state.x, ctx.eps))
    }

    fn describe(&self) -> String {
        "random".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Max,
    Min,
}

const TIE_TOL: f64 = 1e-13;

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let (mut inv, mut r) = (1.0 / b, 0.0);
    while i > 0 {
        r += (i % base as u64) as f64 * inv;
        i /= base as u64;
        inv /= b;
    }
    r
}

/// The first `count` points of the Halton sequence (skipping index 0)
/// that fall in the closed unit ball, mapped from `[-1, 1]^dim`.
pub fn halton_ball(dim: usize, count: usize) -> Vec<Point> {
    assert!(dim <= PRIMES.len(), "dimension too large for the Halton table");
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let z: Point = (0..dim).map(|a| 2.0 * radical_inverse(i, PRIMES[a]) - 1.0).collect();
        if z.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            out.push(z);
        }
        i += 1;
    }
    out
}

/// Candidate offsets (in units of ε) the greedy strategy examines: the
/// center, the lattice stencil scaled by `h/ε`, then `samples` Halton
/// points in antithetic pairs.
pub fn greedy_candidates(view: &FieldView, samples: usize) -> Vec<Point> {
    let grid = &view.grid;
    let scale = grid.h() / grid.eps();
    let mut out: Vec<Point> = vec![std::iter::repeat(0.0).take(grid.dim()).collect()];
    for o in grid.stencil_offsets() {
        if o.iter().all(|&c| c == 0) {
            continue;
        }
        out.push(o.iter().map(|&c| c as f64 * scale).collect());
    }
    for z in halton_ball(grid.dim(), samples.div_ceil(2)) {
        let minus: Point = z.iter().map(|c| -c).collect();
        out.push(z);
        out.push(minus);
    }
    out
}

/// Best point of `x + ε·candidates` for `role` on `u(·, t − ε²)`. A later
/// candidate only wins by more than interpolation rounding, so ties keep the
/// earliest one and the center wins on flat fields.
pub fn greedy_move(view: &FieldView, x: &[f64], t: f64, role: Role, candidates: &[Point]) -> Result<(Point, f64)> {
    let eps = view.grid.eps();
    let t_next = decrement_time(t, eps);
    let mut best: Option<(Point, f64)> = None;
    for c in candidates {
        let y: Point = x.iter().zip(c).map(|(a, b)| a + eps * b).collect();
        let value = view.eval_u(&y, t_next)?;
        let better = match &best {
            None => true,
            Some((_, b)) => match role {
                Role::Max => value > *b + TIE_TOL * b.abs().max(1.0),
                Role::Min => value < *b - TIE_TOL * b.abs().max(1.0),
            },
        };
        if better {
            best = Some((y, value));
        }
    }
    best.ok_or_else(|| Error::Coverage {
        point: x.to_vec(),
        time: t,
    })
}

/// Plays the extremal point of the solved `u` at the next time level.
#[derive(Debug, Clone)]
pub struct DppGreedy {
    pub role: Role,
    pub view: Arc<FieldView>,
    pub samples: usize,
    candidates: Vec<Point>,
}

impl DppGreedy {
    pub fn new(view: Arc<FieldView>, role: Role, samples: usize) -> Self {
        let candidates = greedy_candidates(&view, samples);
        DppGreedy {
            role,
            view,
            samples,
            candidates,
        }
    }
}

impl Strategy for DppGreedy {
    fn propose(&self, ctx: &MoveContext<'_>, _rng: &mut dyn RngCore) -> Result<Point> {
        let (y, _) = greedy_move(&self.view, &ctx.state.x, ctx.state.t, self.role, &self.candidates)?;
        // Rounding in x + ε c can leave |y - x| a hair above ε.
        let d = dist(&y, &ctx.state.x);
        if d > ctx.eps {
            let dir = sub(&y, &ctx.state.x);
            return Ok(ctx.state.x.iter().zip(&dir).map(|(a, b)| a + b * (ctx.eps / d)).collect());
        }
        Ok(y)
    }

    fn describe(&self) -> String {
        let role = match self.role {
            Role::Max => "max",
            Role::Min => "min",
        };
        format!("greedy role={role} samples={}", self.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataFn, ProblemData};
    use crate::dpp::{solve_dpp, SolverOptions};
    use crate::geometry::{DomainSpec, SpaceTimeGrid};

    #[test]
    fn pull_examples() {
        let y = pull_move(&[0.5, 0.0], &[0.0, 0.0], 0, 0.1);
        assert!((y[0] - 0.401).abs() < 1e-15);
        assert_eq!(y[1], 0.0);
        assert_eq!(pull_move(&[0.05, 0.02], &[0.0, 0.0], 3, 0.1).as_slice(), &[0.0, 0.0]);
        let far = pull_move(&[0.5, 0.0], &[0.0, 0.0], 60, 0.1);
        assert!((0.5 - far[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn pull_step_length() {
        let x = [0.3, -0.4, 0.2];
        let target = [1.0, 0.5, -0.5];
        for k in 0..8 {
            let y = pull_move(&x, &target, k, 0.05);
            let expect = 0.05 - 0.05f64.powi(3) / 2f64.powi(k as i32);
            assert!((dist(&x, &y) - expect).abs() < 1e-14);
            assert!(dist(&y, &target) < dist(&x, &target));
        }
    }

    #[test]
    fn halton_points_are_in_ball_and_distinct() {
        let pts = halton_ball(2, 50);
        assert_eq!(pts.len(), 50);
        for p in &pts {
            assert!(p.iter().map(|c| c * c).sum::<f64>() <= 1.0);
        }
        assert_ne!(pts[0], pts[1]);
    }

    fn view_for(data: DataFn) -> Arc<FieldView> {
        let domain = DomainSpec::ball(&[0.0, 0.0], 1.0);
        let pd = ProblemData::uniform(domain.clone(), data, 0.2, 0.2);
        let grid = SpaceTimeGrid::build(domain, 0.05, 0.2, 0.2).unwrap();
        let pair = solve_dpp(&pd, &grid, &SolverOptions::default()).unwrap();
        Arc::new(FieldView::new(grid, pd, pair).unwrap())
    }

    #[test]
    fn greedy_on_affine_field_hits_the_ball_edge() {
        let view = view_for(DataFn::affine(0.0, &[1.0, 0.0]));
        let c = greedy_candidates(&view, 64);
        let x = [0.1, 0.05];
        let (up, _) = greedy_move(&view, &x, 0.2, Role::Max, &c).unwrap();
        let (down, _) = greedy_move(&view, &x, 0.2, Role::Min, &c).unwrap();
        assert!((up[0] - (x[0] + 0.2)).abs() < 1e-12);
        assert!((down[0] - (x[0] - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn greedy_on_constant_field_stays_put() {
        let view = view_for(DataFn::constant(0.3));
        let c = greedy_candidates(&view, 16);
        let (y, v) = greedy_move(&view, &[0.2, -0.1], 0.2, Role::Max, &c).unwrap();
        assert_eq!(y.as_slice(), &[0.2, -0.1]);
        assert_eq!(v, 0.3);
    }

    #[test]
    fn more_samples_never_lower_the_maximum() {
        let view = view_for(DataFn::bump(&[0.3, 0.2], 0.6, 1.0));
        let x = [0.1, 0.0];
        let mut last = f64::NEG_INFINITY;
        for s in [0, 8, 32, 128] {
            let (_, v) = greedy_move(&view, &x, 0.2, Role::Max, &greedy_candidates(&view, s)).unwrap();
            assert!(v >= last);
            last = v;
        }
    }
}
