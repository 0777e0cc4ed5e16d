//! Floating point abstraction shared by the analytic models.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Real number type the energy, queueing and schedule models are written against.
///
/// Implemented for `f32` and `f64`. The crate root exposes `f64` aliases for every
/// generic model type, which is what the config loader, simulator and CLI use.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    /// Converts an integer count (devices, bytes, apartments) into this scalar type.
    fn count(value: u32) -> Self {
        Self::from_u32(value).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `100 × part / whole`; the percent helpers used across the models.
pub(crate) fn percent<S: Scalar>(fraction: S) -> S {
    fraction * S::lit(100.0)
}

pub(crate) fn fraction<S: Scalar>(percent: S) -> S {
    percent / S::lit(100.0)
}
