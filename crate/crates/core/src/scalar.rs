use std::fmt::LowerExp;

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerics are written against (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + LowerExp {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + LowerExp {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("index representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Modulus of a complex number without requiring `num_traits::Float`.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// Relative tolerance floor for the scalar type: `floor` for `f64`, widened for
/// lower precision types.
#[inline]
pub fn tol_floor<T: Real>(floor: f64) -> T {
    let widened = T::default_epsilon() * lit(1e3);
    let floor = lit(floor);
    if widened > floor {
        widened
    } else {
        floor
    }
}
