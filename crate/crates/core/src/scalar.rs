//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;

/// Real scalar usable throughout the controller: `f32`, `f64`, or any
/// `Copy` type implementing nalgebra's [`RealField`].
pub trait Real: RealField + Copy + num_traits::FromPrimitive {}

impl<T> Real for T where T: RealField + Copy + num_traits::FromPrimitive {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Lossy conversion back to `f64`, for diagnostics and logging.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_subset().unwrap_or(f64::NAN)
}

/// `true` when every entry of the matrix is finite.
pub fn all_finite<T: Real, R: nalgebra::Dim, C: nalgebra::Dim, S>(m: &nalgebra::Matrix<T, R, C, S>) -> bool
where
    S: nalgebra::RawStorage<T, R, C>,
{
    m.iter().all(|x| x.is_finite())
}
