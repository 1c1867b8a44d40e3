//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point type the solver is generic over (`f32` or `f64`).
///
/// Small dense kernels (tridiagonal eigenproblems inside Lanczos, the dense
/// reference oracle) are evaluated in `f64` regardless of `T`.
pub trait Real:
    Float + FloatConst + FftNum + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Default
{
    /// Converts an `f64` literal. Panics only for non-representable values,
    /// which never happens for the constants used here.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FftNum + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Default
{
}

/// Complex number over the crate scalar.
pub type Cplx<T> = num_complex::Complex<T>;
