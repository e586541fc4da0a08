//! Counter-based random streams.
//!
//! Every stream is keyed by the master seed plus a short path of integers
//! (arm, realization, purpose, ...), so the numbers a realization sees do not
//! depend on which worker runs it or on what else runs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Stream purposes within one realization.
pub mod purpose {
    pub const CHANNEL: u64 = 1;
    pub const PATTERNS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const BITS: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit mix of a seed and a key path.
pub fn mix_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn derive_rng(master: u64, keys: &[u64]) -> SimRng {
    SimRng::seed_from_u64(mix_seed(master, keys))
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}
