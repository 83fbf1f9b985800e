//! Scalar and field-value abstractions.
//!
//! All numerics in the crate are written against [`Scalar`] (f32 or f64).
//! Field samples are either plain scalars or [`Complex`] values; both
//! implement [`FieldValue`] so the stencils and integrators have a single
//! generic implementation with a genuinely real fast path.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{Float, FloatConst, NumAssign};

/// Floating point type the simulation runs in.
pub trait Scalar:
    Float + FloatConst + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Lossy for `f32`.
    fn lit(v: f64) -> Self;

    fn as_f64(self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// A single field sample: real `T` or `Complex<T>`.
pub trait FieldValue<T: Scalar>:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<T, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign<T>
{
    const IS_COMPLEX: bool;

    fn zero() -> Self;
    fn from_re(x: T) -> Self;
    fn norm_sqr(self) -> T;
    fn re(self) -> T;
    fn im(self) -> T;
    /// `Re(conj(self) * other)`
    fn dot_re(self, other: Self) -> T;
    /// `Im(conj(self) * other)`
    fn dot_im(self, other: Self) -> T;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex<T>;
}

impl<T: Scalar> FieldValue<T> for T {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn zero() -> Self {
        T::zero()
    }
    #[inline]
    fn from_re(x: T) -> Self {
        x
    }
    #[inline]
    fn norm_sqr(self) -> T {
        self * self
    }
    #[inline]
    fn re(self) -> T {
        self
    }
    #[inline]
    fn im(self) -> T {
        T::zero()
    }
    #[inline]
    fn dot_re(self, other: Self) -> T {
        self * other
    }
    #[inline]
    fn dot_im(self, _other: Self) -> T {
        T::zero()
    }
    #[inline]
    fn is_finite(self) -> bool {
        Float::is_finite(self)
    }
    #[inline]
    fn to_complex(self) -> Complex<T> {
        Complex::new(self, T::zero())
    }
}

impl<T: Scalar> FieldValue<T> for Complex<T> {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    #[inline]
    fn from_re(x: T) -> Self {
        Complex::new(x, T::zero())
    }
    #[inline]
    fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }
    #[inline]
    fn re(self) -> T {
        self.re
    }
    #[inline]
    fn im(self) -> T {
        self.im
    }
    #[inline]
    fn dot_re(self, other: Self) -> T {
        self.re * other.re + self.im * other.im
    }
    #[inline]
    fn dot_im(self, other: Self) -> T {
        self.re * other.im - self.im * other.re
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn to_complex(self) -> Complex<T> {
        self
    }
}
