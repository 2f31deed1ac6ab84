//! Frequency and timing perturbation of an annotated log.

mod sampling;
mod timing;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use sampling::{apply_oversampling, apply_sampling, Draft, DraftCase, SampleStats, MAX_SAMPLING_ITERATIONS};
pub use timing::{compress_timestamps, compression_factor, finalize, inject_time_noise, Released};

/// Named random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    TransitionDraws = 1,
    CasePicks = 2,
    TimeNoise = 3,
    CaseIds = 4,
    Shuffle = 5,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Laplace draw from a uniform `u` in `(-0.5, 0.5)`.
pub fn laplace_from_uniform(scale: f64, u: f64) -> f64 {
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Inverse-CDF draw from `Lap(0, scale)`.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::domain(format!("laplace scale must be positive and finite, got {scale}")));
    }
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        // gen() is in [0, 1); u = -0.5 would give ln(0)
        if u > -0.5 {
            return Ok(laplace_from_uniform(scale, u));
        }
    }
}

/// Signed whole-case moves per transition, `round(Lap(1/ε_d))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseDraws {
    pub moves: Vec<i64>,
}

impl NoiseDraws {
    pub fn draw<R: Rng + ?Sized>(transitions: usize, epsilon_d: f64, rng: &mut R) -> Result<NoiseDraws> {
        if !(epsilon_d > 0.0) {
            return Err(Error::domain(format!("epsilon_d must be positive, got {epsilon_d}")));
        }
        if epsilon_d.is_infinite() {
            return Ok(NoiseDraws::zero(transitions));
        }
        let moves = (0..transitions)
            .map(|_| laplace_sample(1.0 / epsilon_d, rng).map(|x| x.round() as i64))
            .collect::<Result<_>>()?;
        Ok(NoiseDraws { moves })
    }

    pub fn zero(transitions: usize) -> NoiseDraws {
        NoiseDraws {
            moves: vec![0; transitions],
        }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}
