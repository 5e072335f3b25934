//! Scalar abstraction for the numeric core.
//!
//! The loss, sketching, and optimizer code is generic over [`Scalar`] so the
//! same routines run in f32 or f64. The crate root exports f64 aliases; the
//! chain and network layers use f64 exclusively because the canonical block
//! encoding fixes IEEE-754 doubles on the wire.

use num_traits::{FromPrimitive, ToPrimitive};

pub trait Scalar: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default {
    /// Nearest representable value to `v`. Exact for f64, rounded for f32.
    fn from_double(v: f64) -> Self {
        Self::from_f64(v).expect("every finite f64 maps into a Scalar type")
    }

    fn to_double(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }

    fn finite(self) -> bool {
        self.to_double().is_finite()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
