#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use wpmec_core::model::{ChannelSet, SystemParams, UserParams};
use wpmec_core::numerics::{Complex64, ComplexVector};

/// Mean power gain at 5 m: 6.25e-4 · 5⁻³.
pub const GAIN_5M: f64 = 5e-6;

fn rayleigh(rng: &mut ChaCha20Rng, n: usize, power: f64) -> ComplexVector {
    let s = (0.5 * power).sqrt();
    ComplexVector::new(
        (0..n)
            .map(|_| {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                Complex64::new(s * a, s * b)
            })
            .collect(),
    )
    .unwrap()
}

pub fn channels(seed: u64, k: usize, n: usize) -> ChannelSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let h = (0..k).map(|_| rayleigh(&mut rng, n, GAIN_5M)).collect();
    let g = (0..k).map(|_| rayleigh(&mut rng, n, GAIN_5M)).collect();
    ChannelSet::new(h, g).unwrap()
}

/// Homogeneous users with `R` bits and block `T`, `n` antennas.
pub fn instance(seed: u64, k: usize, n: usize, block: f64, bits: f64) -> (SystemParams, ChannelSet) {
    let mut p = SystemParams::homogeneous(k, block, UserParams::with_task(bits));
    p.antennas = n;
    (p, channels(seed, k, n))
}

/// Minimizer of a unimodal function on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
