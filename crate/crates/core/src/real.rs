//! Scalar abstraction for the numerical engines.
//!
//! All state containers and solvers are generic over [`Real`], which bundles
//! the field operations (via `nalgebra::RealField`), conversions, and random
//! sampling the engines need. `f32` and `f64` implement it; the crate-root
//! aliases fix `f64` as the default vocabulary.
//!
//! Gaussian sampling is exposed as a trait method rather than a
//! `Distribution` bound so that generic call sites need no `where` clauses
//! of their own.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Scalar type usable by every engine in this crate.
pub trait Real:
    RealField
    + Copy
    + Default
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal; panics only for non-finite inputs, so it is
    /// safe for compile-time constants.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal must convert")
    }

    /// Machine epsilon of the concrete type.
    fn eps() -> Self;

    /// Lossy view as `f64` (for diagnostics and serialization).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// One draw from the standard normal distribution N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion_roundtrips() {
        assert_eq!(f64::lit(0.5), 0.5);
        assert_eq!(f32::lit(0.5), 0.5_f32);
        assert_eq!(f64::lit(-3.25).as_f64(), -3.25);
    }

    #[test]
    fn epsilon_matches_type() {
        assert_eq!(<f64 as Real>::eps(), f64::EPSILON);
        assert_eq!(<f32 as Real>::eps(), f32::EPSILON);
    }

    #[test]
    fn standard_normal_draws_have_sane_moments() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let n = 20_000;
        let mut sum = 0.0_f64;
        let mut sq = 0.0_f64;
        for _ in 0..n {
            let x = f64::standard_normal(&mut rng);
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }
}
