//! Scalar abstraction: the numeric core is generic over the real field.

use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar for all covariance/readout math (`f32` or `f64` in practice).
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::fmt::LowerExp
{
}

impl<T> Real for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::fmt::LowerExp
{
}

/// Convert an `f64` literal into the working scalar type.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal not representable in scalar type")
}

/// Lossy conversion back to `f64`, for diagnostics and serialization.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
