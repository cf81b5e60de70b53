//! Rayleigh channel draws.
//!
//! Every realization owns a ChaCha20 key derived from the master seed; user
//! `i` reads stream `i` of that key. A user's channels therefore do not depend
//! on how many users the instance has, on the other users' distances, or on
//! the order in which worker threads pick realizations.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use wpmec_core::model::ChannelSet;
use wpmec_core::numerics::{Complex64, ComplexVector};

use crate::error::{HarnessError, Result};

/// Power gain at the 1 m reference distance.
pub const REFERENCE_GAIN: f64 = 6.25e-4;
pub const PATH_LOSS_EXPONENT: f64 = 3.0;

/// SplitMix64 finalizer; a bijection on `u64` with full avalanche.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `r` under `master`.
///
/// The sweep index is deliberately not mixed in: every sweep value sees the
/// same channels, so differences between sweep points are not masked by
/// fading noise.
pub fn realization_seed(master: u64, realization: u64) -> u64 {
    mix(master ^ mix(realization))
}

/// Mean power gain `θ₀·d^(−a)` at distance `d`.
pub fn path_gain(distance: f64, reference_gain: f64, exponent: f64) -> f64 {
    reference_gain * distance.powf(-exponent)
}

/// `h_i = √(θ₀d_i^(−a))·h̄_i` and `g_i = √(θ₀d_i^(−a))·ḡ_i` with `h̄_i, ḡ_i`
/// i.i.d. `CN(0, I)`.
pub fn gen_channels(seed: u64, antennas: usize, distances: &[f64], reference_gain: f64, exponent: f64) -> Result<ChannelSet> {
    if let Some(d) = distances.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(HarnessError::Invalid(format!("distance must be positive, got {d}")));
    }
    if !(reference_gain > 0.0 && exponent.is_finite()) {
        return Err(HarnessError::Invalid("path-loss model must have positive gain".into()));
    }
    let mut downlink = Vec::with_capacity(distances.len());
    let mut uplink = Vec::with_capacity(distances.len());
    for (i, &d) in distances.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let amplitude = path_gain(d, reference_gain, exponent).sqrt();
        downlink.push(cscg(&mut rng, antennas, amplitude)?);
        uplink.push(cscg(&mut rng, antennas, amplitude)?);
    }
    Ok(ChannelSet::new(downlink, uplink)?)
}

/// `amplitude·x` with `x ~ CN(0, I)`: real and imaginary parts each carry
/// variance 1/2.
fn cscg(rng: &mut ChaCha20Rng, dim: usize, amplitude: f64) -> Result<ComplexVector> {
    let s = amplitude * std::f64::consts::FRAC_1_SQRT_2;
    let entries = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(s * re, s * im)
        })
        .collect();
    Ok(ComplexVector::new(entries)?)
}
