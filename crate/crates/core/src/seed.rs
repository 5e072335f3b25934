//! Deterministic seed derivation and shared sampling helpers.
//!
//! Every random choice in the system flows from one 64-bit master seed. Sub
//! computations get their own stream via [`derive_seed`] (splitmix64 over
//! master and tag), so any piece of a run replays in isolation and the
//! whole system is bit-reproducible across platforms.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::scalar::Scalar;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for the sub-stream identified by `tag`.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag.wrapping_mul(GAMMA) ^ 0x5851_f42d_4c95_7f2d))
}

/// Two-level derivation for (group, index) style tags.
pub fn derive_seed2(master: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(master, a), b)
}

/// Deterministic stream for a derived seed.
pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform draw on (-1, 1).
pub fn uniform_pm1<T: Scalar, R: Rng>(rng: &mut R) -> T {
    T::from_double(2.0 * rng.gen::<f64>() - 1.0)
}

/// Standard normal draw, widened from f64 sampling.
pub fn standard_normal<T: Scalar, R: Rng>(rng: &mut R) -> T {
    T::from_double(rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Uniform point in the closed ball of the given radius.
pub fn ball_point<T: Scalar, R: Rng>(rng: &mut R, dim: usize, radius: f64) -> DVector<T> {
    let mut v = DVector::<f64>::from_fn(dim, |_, _| rng.sample(rand_distr::StandardNormal));
    let norm = v.norm();
    if norm > 0.0 {
        let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
        v *= r / norm;
    }
    v.map(T::from_double)
}
