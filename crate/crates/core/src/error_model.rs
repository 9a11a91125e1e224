//! Sensor error model for emulating a DVL unit under test.
//!
//! A measurement is `T·(v ⊙ (1 + s)) + b + n`: the scale factor `s` acts on
//! the DVL-frame velocity before projection, the bias `b` and white noise `n`
//! are added per beam.
//!
//! Noise is drawn from ChaCha8 (`rand_chacha`, seeded with
//! `seed_from_u64`) through the ziggurat standard-normal sampler of
//! `rand_distr`. Both algorithms are fixed and platform independent, so a
//! `(seed, series)` pair always yields the same bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{project_to_beams, BeamGeometry, BeamVelocities, DvlVelocity, BEAM_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErrorModelError {
    #[error("cannot corrupt an empty velocity series")]
    EmptySeries,
    #[error("invalid error parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorParams {
    /// Per-beam bias, m/s.
    pub bias: [f64; BEAM_COUNT],
    /// Per-axis scale factor applied to the DVL-frame velocity.
    pub scale: [f64; 3],
    /// Standard deviation of the white measurement noise, m/s.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for ErrorParams {
    /// The unit under test used throughout the experiments: no scale
    /// factor, 1 mm/s bias on every beam, 1 mm/s noise.
    fn default() -> Self {
        Self {
            bias: [0.001; BEAM_COUNT],
            scale: [0.0; 3],
            noise_std: 0.001,
            seed: 0,
        }
    }
}

impl ErrorParams {
    /// Error-free parameters: the corrupted beams equal the ideal projection.
    pub fn ideal() -> Self {
        Self {
            bias: [0.0; BEAM_COUNT],
            scale: [0.0; 3],
            noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ErrorModelError> {
        if self.bias.iter().any(|b| !b.is_finite()) {
            return Err(invalid("bias", "must be finite"));
        }
        if self.scale.iter().any(|s| !s.is_finite() || *s <= -1.0) {
            return Err(invalid("scale", "components must be finite and greater than -1"));
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return Err(invalid("noise_std", "must be finite and non-negative"));
        }
        Ok(())
    }
}

fn invalid(field: &'static str, reason: &str) -> ErrorModelError {
    ErrorModelError::InvalidParams {
        field,
        reason: reason.to_string(),
    }
}

/// One corrupted measurement given an explicit noise draw (already scaled to m/s).
pub fn corrupt_measurement(
    geom: &BeamGeometry,
    v: &DvlVelocity,
    params: &ErrorParams,
    noise_draw: &[f64; BEAM_COUNT],
) -> BeamVelocities {
    let scaled = DvlVelocity(std::array::from_fn(|k| v.0[k] * (1.0 + params.scale[k])));
    let mut beams = project_to_beams(geom, &scaled);
    for (i, b) in beams.0.iter_mut().enumerate() {
        *b += params.bias[i] + noise_draw[i];
    }
    beams
}

/// Corrupts every sample of `velocities` with a noise stream seeded by `params.seed`.
pub fn corrupt_series(
    geom: &BeamGeometry,
    velocities: &[DvlVelocity],
    params: &ErrorParams,
) -> Result<Vec<BeamVelocities>, ErrorModelError> {
    if velocities.is_empty() {
        return Err(ErrorModelError::EmptySeries);
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok(velocities
        .iter()
        .map(|v| {
            let noise: [f64; BEAM_COUNT] = std::array::from_fn(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                params.noise_std * z
            });
            corrupt_measurement(geom, v, params, &noise)
        })
        .collect())
}
