//! Numeric scalar abstraction shared by plain floats, complex numbers and jets.
//!
//! Every evaluator in the crate is generic over [`Scalar`], which lets the same
//! code run in plain `f64` arithmetic, in complex arithmetic, or lifted to
//! truncated Taylor jets (possibly nested) to obtain exact derivatives.

use core::fmt::Debug;
use core::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::Float;

/// Field-like numeric type with the elementary functions used by the metric DSL.
///
/// Elementary functions assume their argument lies in the function's domain;
/// callers that need an explicit error check the base value first (see
/// [`crate::jets::elementary`] and [`crate::expr::Expr::eval`]).
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
{
    fn from_f64(v: f64) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// Value at the expansion point (degree-0 coefficient, recursively).
    fn base(&self) -> Complex64;

    fn scale(&self, f: f64) -> Self;

    /// Complex conjugation of every coefficient; identity for real types.
    fn conj(&self) -> Self;

    /// `*self += a * b`
    fn mul_acc(&mut self, a: &Self, b: &Self);

    fn is_finite(&self) -> bool;

    fn recip(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn atan(&self) -> Self;
    fn powf(&self, p: f64) -> Self;

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * &base;
            }
        }
        acc
    }

    fn square(&self) -> Self {
        self.clone() * self
    }
}

/// Scalars whose coefficients are all real. Geometry (metric, geodesic flow)
/// runs over these; fiber-valued quantities use the complexified type.
pub trait Real: Scalar {
    type Complex: Scalar;

    fn to_complex(&self) -> Self::Complex;
    fn complex(re: &Self, im: &Self) -> Self::Complex;
    fn re_part(z: &Self::Complex) -> Self;
    fn im_part(z: &Self::Complex) -> Self;

    fn base_re(&self) -> f64 {
        self.base().re
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn base(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
    #[inline]
    fn scale(&self, f: f64) -> Self {
        self * f
    }
    #[inline]
    fn conj(&self) -> Self {
        *self
    }
    #[inline]
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn is_finite(&self) -> bool {
        Float::is_finite(*self)
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn sqrt(&self) -> Self {
        Float::sqrt(*self)
    }
    fn exp(&self) -> Self {
        Float::exp(*self)
    }
    fn ln(&self) -> Self {
        Float::ln(*self)
    }
    fn sin(&self) -> Self {
        Float::sin(*self)
    }
    fn cos(&self) -> Self {
        Float::cos(*self)
    }
    fn tan(&self) -> Self {
        Float::tan(*self)
    }
    fn sinh(&self) -> Self {
        Float::sinh(*self)
    }
    fn cosh(&self) -> Self {
        Float::cosh(*self)
    }
    fn atan(&self) -> Self {
        Float::atan(*self)
    }
    fn powf(&self, p: f64) -> Self {
        Float::powf(*self, p)
    }
}

impl Real for f64 {
    type Complex = Complex64;

    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
    fn complex(re: &f64, im: &f64) -> Complex64 {
        Complex64::new(*re, *im)
    }
    fn re_part(z: &Complex64) -> f64 {
        z.re
    }
    fn im_part(z: &Complex64) -> f64 {
        z.im
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    #[inline]
    fn base(&self) -> Complex64 {
        *self
    }
    #[inline]
    fn scale(&self, f: f64) -> Self {
        self * f
    }
    #[inline]
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    #[inline]
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn is_finite(&self) -> bool {
        Complex64::is_finite(*self)
    }
    fn recip(&self) -> Self {
        Complex64::new(1.0, 0.0) / self
    }
    fn sqrt(&self) -> Self {
        Complex64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
    fn sin(&self) -> Self {
        Complex64::sin(*self)
    }
    fn cos(&self) -> Self {
        Complex64::cos(*self)
    }
    fn tan(&self) -> Self {
        Complex64::tan(*self)
    }
    fn sinh(&self) -> Self {
        Complex64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        Complex64::cosh(*self)
    }
    fn atan(&self) -> Self {
        Complex64::atan(*self)
    }
    fn powf(&self, p: f64) -> Self {
        Complex64::powf(*self, p)
    }
}

/// Real-valued `f64` helpers that work without `std`.
pub(crate) mod fm {
    use num_traits::Float;

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        Float::sqrt(x)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        Float::abs(x)
    }
    #[inline]
    pub fn powi(x: f64, n: i32) -> f64 {
        Float::powi(x, n)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        Float::cos(x)
    }
    #[inline]
    pub fn fract(x: f64) -> f64 {
        Float::fract(x)
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        Float::ceil(x)
    }
}
