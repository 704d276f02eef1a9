//! Sign helpers shared by the game, the predictor and the baselines.
//!
//! Every place that needs `sgn(x)` for a decision resolves `sgn(0)` the same
//! way: a fair coin drawn from the caller's rng.

use rand::Rng;

/// `sgn(x)` as -1, 0 or +1. NaN maps to 0.
pub fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn sgn_int(x: i64) -> i8 {
    x.signum() as i8
}

/// Uniform draw from {-1, +1}.
pub fn coin<R: Rng + ?Sized>(rng: &mut R) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// `sgn(x)` with a zero resolved by [`coin`]. The rng is only touched on a tie.
pub fn decide<R: Rng + ?Sized>(x: f64, rng: &mut R) -> i8 {
    match sgn(x) {
        0 => coin(rng),
        s => s,
    }
}
