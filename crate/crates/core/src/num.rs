//! Scalar abstraction. Everything numeric in this crate is generic over
//! [`Real`], instantiated as `f64` in practice (see the aliases at the crate
//! root) with `f32` available for memory-constrained experiments.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, RngExt};
use rand_distr::Distribution;
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar usable for probabilities, counts and chart values.
///
/// Beyond the arithmetic supplied by [`Float`], a `Real` carries the
/// per-precision tolerances used by charts and containment, and knows how to
/// draw the two random variates the samplers need. Keeping the draws on the
/// trait avoids threading `rand_distr` bounds through every generic signature.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Sum<Self>
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Inside-chart cells whose largest entry drops below this are rescaled.
    const RESCALE_THRESHOLD: Self;
    /// Containment values below this mark a category/position pair unusable.
    const CONTAINMENT_EPS: Self;
    /// Tolerance for validating that a probability row sums to one.
    const ROW_SUM_TOL: Self;

    /// Draw from Gamma(shape, scale = 1).
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;

    /// Draw uniformly from the half-open unit interval.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl Real for f64 {
    const RESCALE_THRESHOLD: f64 = 1e-200;
    const CONTAINMENT_EPS: f64 = 1e-12;
    const ROW_SUM_TOL: f64 = 1e-9;

    fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
        rand_distr::Gamma::new(shape, 1.0)
            .expect("gamma shape must be positive and finite")
            .sample(rng)
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        rng.random::<f64>()
    }
}

impl Real for f32 {
    const RESCALE_THRESHOLD: f32 = 1e-20;
    const CONTAINMENT_EPS: f32 = 1e-6;
    // f32 row sums over tens of thousands of outcomes accumulate real
    // rounding error, so the tolerance is far looser than for f64.
    const ROW_SUM_TOL: f32 = 1e-3;

    fn sample_gamma<R: Rng + ?Sized>(shape: f32, rng: &mut R) -> f32 {
        rand_distr::Gamma::new(shape, 1.0f32)
            .expect("gamma shape must be positive and finite")
            .sample(rng)
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> f32 {
        rng.random::<f32>()
    }
}
