//! Scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::distr::uniform::SampleUniform;

/// Real floating point scalar: `f32` or `f64`.
///
/// Everything physics-facing is generic over this trait. Tolerances that are
/// quoted in absolute terms (1e-12 Hermiticity, 1e-9 norm drift) only make
/// sense for `f64`; `f32` instantiations are usable for quick sweeps.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + SampleUniform
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the value is not representable,
    /// which cannot happen for the finite constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `-i·z`.
#[inline]
pub fn mul_neg_i<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(z.im, -z.re)
}

/// `i·z`.
#[inline]
pub fn mul_i<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(-z.im, z.re)
}

/// Angular frequency in rad/ns from a linear frequency in GHz.
#[inline]
pub fn ghz_to_rad_per_ns<T: Real>(f_ghz: T) -> T {
    T::TAU() * f_ghz
}

/// Angular frequency in rad/ns from a linear frequency in MHz.
#[inline]
pub fn mhz_to_rad_per_ns<T: Real>(f_mhz: T) -> T {
    T::TAU() * f_mhz * T::lit(1e-3)
}

/// Inverse of [`ghz_to_rad_per_ns`].
#[inline]
pub fn rad_per_ns_to_ghz<T: Real>(w: T) -> T {
    w / T::TAU()
}

/// Inverse of [`mhz_to_rad_per_ns`].
#[inline]
pub fn rad_per_ns_to_mhz<T: Real>(w: T) -> T {
    w / T::TAU() * T::lit(1e3)
}

/// Population mean and (population) standard deviation.
pub fn mean_std<T: Real>(xs: &[T]) -> (T, T) {
    if xs.is_empty() {
        return (T::nan(), T::nan());
    }
    let n = T::from_usize_lossy(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Unbiased sample variance (n - 1 in the denominator); zero for fewer than
/// two samples.
pub fn sample_variance<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let n = T::from_usize_lossy(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
}
