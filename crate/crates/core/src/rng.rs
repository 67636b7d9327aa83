//! Counter-based splittable random number generation.
//!
//! Every random draw is a pure function of `(seed, stream, counter)`, so grid
//! scans and multi-seed batches parallelize with bit-stable results: worker
//! count and scheduling order never change the numbers.

use std::f64::consts::PI;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const STREAM_MUL: u64 = 0xd129_0d3d_a2ae_2a95;
const CTR_MUL: u64 = 0xaef1_7502_108e_f2d9;

/// SplitMix64 finalizer: a bijective 64-bit mixer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Well-known stream identifiers used by the integrator and detector.
pub mod streams {
    pub const THERMAL_X: u64 = 0;
    pub const THERMAL_Y: u64 = 1;
    pub const THERMAL_Z: u64 = 2;
    pub const RECOIL_X: u64 = 3;
    pub const RECOIL_Y: u64 = 4;
    pub const RECOIL_Z: u64 = 5;
    pub const SHOT_NOISE: u64 = 6;
}

/// One independent noise stream keyed by `(seed, stream)`.
///
/// Draws are addressed by counter, not produced sequentially, so the same
/// `(seed, stream, step)` triple always yields the same variate regardless of
/// evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    key: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix(mix(seed ^ GOLDEN) ^ stream.wrapping_mul(STREAM_MUL));
        NoiseStream { key }
    }

    #[inline]
    pub fn next_u64(&self, counter: u64) -> u64 {
        mix(self.key ^ counter.wrapping_mul(CTR_MUL).wrapping_add(GOLDEN))
    }

    /// Uniform variate in (0, 1].
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        (((self.next_u64(counter) >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal variate for a given step index (Box-Muller).
    #[inline]
    pub fn normal(&self, step: u64) -> f64 {
        let u1 = self.uniform(2 * step);
        let u2 = self.uniform(2 * step + 1);
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}
