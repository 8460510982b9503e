//! Reproducible random streams. Every trajectory draws from its own ChaCha
//! stream keyed by `(master seed, trajectory index, purpose)`, so results do
//! not depend on how trajectories are scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Point;

/// What a stream is used for; separates the game's own coin flips from
/// randomized strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Game = 0,
    PlayerOne = 1,
    PlayerTwo = 2,
    Auxiliary = 3,
}

pub fn stream(seed: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(4).wrapping_add(purpose as u64));
    rng
}

/// Uniform point of the closed ball `B_radius(center)` by rejection from the
/// enclosing cube.
pub fn uniform_in_ball<R: RngCore + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Point {
    let dim = center.len();
    let mut z: Point = std::iter::repeat(0.0).take(dim).collect();
    loop {
        let mut r2 = 0.0;
        for c in z.iter_mut() {
            *c = 2.0 * rng.random::<f64>() - 1.0;
            r2 += *c * *c;
        }
        if r2 <= 1.0 {
            break;
        }
    }
    for (c, x) in z.iter_mut().zip(center) {
        *c = x + radius * *c;
    }
    z
}
