//! Real scalar trait and the scaled complex number used inside series.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Floating point types the series layer works over.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + fmt::Debug + fmt::Display + fmt::LowerExp + Send + Sync + 'static
{
    /// Decimal digits worth keeping when aligning scaled values.
    const DIGITS: i32;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }
}

impl Real for f32 {
    const DIGITS: i32 = 9;
}

impl Real for f64 {
    const DIGITS: i32 = 18;
}

fn pow10<T: Real>(k: i32) -> T {
    T::lit(10.0).powi(k)
}

fn pow10_frac<T: Real>(x: T) -> T {
    T::lit(10.0).powf(x)
}

/// Complex value stored as `m * 10^e` with `1 <= |m| < 10`.
///
/// Coefficients of divergent series grow like n!, which overflows a double
/// long before the truncation orders used here.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled<T> {
    m: Complex<T>,
    e: i32,
}

impl<T: Real> Default for Scaled<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> Scaled<T> {
    pub fn zero() -> Self {
        Scaled { m: Complex::new(T::zero(), T::zero()), e: 0 }
    }

    pub fn one() -> Self {
        Self::from_complex(Complex::new(T::one(), T::zero()))
    }

    pub fn new(m: Complex<T>, e: i32) -> Self {
        Scaled { m, e }.normalized()
    }

    pub fn from_complex(c: Complex<T>) -> Self {
        Scaled { m: c, e: 0 }.normalized()
    }

    pub fn from_real(x: T) -> Self {
        Self::from_complex(Complex::new(x, T::zero()))
    }

    /// Value with modulus `10^log10_mod` and argument `arg`.
    pub fn from_polar_log10(log10_mod: T, arg: T) -> Self {
        if log10_mod == T::neg_infinity() {
            return Self::zero();
        }
        let e = log10_mod.floor();
        let m = pow10_frac(log10_mod - e);
        Scaled { m: Complex::from_polar(m, arg), e: e.to_i32().unwrap_or(0) }.normalized()
    }

    fn normalized(self) -> Self {
        let a = self.m.norm();
        if a == T::zero() || !a.is_finite() {
            return Scaled { m: self.m, e: if a == T::zero() { 0 } else { self.e } };
        }
        let k = a.log10().floor().to_i32().unwrap_or(0);
        if k == 0 {
            return self;
        }
        Scaled { m: self.m * pow10::<T>(-k), e: self.e + k }
    }

    pub fn mantissa(&self) -> Complex<T> {
        self.m
    }

    pub fn exponent(&self) -> i32 {
        self.e
    }

    pub fn is_zero(&self) -> bool {
        self.m.re == T::zero() && self.m.im == T::zero()
    }

    /// Plain complex value; overflows to infinity outside the float range.
    pub fn to_complex(&self) -> Complex<T> {
        if self.is_zero() {
            return self.m;
        }
        if self.e.abs() > 300 {
            // split to avoid an infinite intermediate power when the result is finite
            let h = self.e / 2;
            return self.m * pow10::<T>(h) * pow10::<T>(self.e - h);
        }
        self.m * pow10::<T>(self.e)
    }

    /// log10 of the modulus, `-inf` for zero.
    pub fn log10_abs(&self) -> T {
        if self.is_zero() {
            return T::neg_infinity();
        }
        self.m.norm().log10() + T::from_i32(self.e).unwrap()
    }

    /// Natural log of the modulus, `-inf` for zero.
    pub fn ln_abs(&self) -> T {
        self.log10_abs() * T::LN_10()
    }

    pub fn conj(&self) -> Self {
        Scaled { m: self.m.conj(), e: self.e }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Scaled { m: self.m * c, e: self.e }.normalized()
    }

    pub fn scale_real(&self, x: T) -> Self {
        Scaled { m: self.m * x, e: self.e }.normalized()
    }

    pub fn recip(&self) -> Self {
        Scaled { m: self.m.inv(), e: -self.e }.normalized()
    }
}

impl<T: Real> Add for Scaled<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        if o.is_zero() {
            return self;
        }
        if self.is_zero() {
            return o;
        }
        let (big, small) = if self.e >= o.e { (self, o) } else { (o, self) };
        let d = big.e - small.e;
        if d > T::DIGITS + 2 {
            return big;
        }
        Scaled { m: big.m + small.m * pow10::<T>(-d), e: big.e }.normalized()
    }
}

impl<T: Real> Neg for Scaled<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Scaled { m: -self.m, e: self.e }
    }
}

impl<T: Real> Sub for Scaled<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<T: Real> Mul for Scaled<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Scaled { m: self.m * o.m, e: self.e + o.e }.normalized()
    }
}

impl<T: Real> Div for Scaled<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        Scaled { m: self.m / o.m, e: self.e - o.e }.normalized()
    }
}

impl<T: Real> Mul<Complex<T>> for Scaled<T> {
    type Output = Self;
    fn mul(self, c: Complex<T>) -> Self {
        self.scale(c)
    }
}

impl<T: Real> fmt::Display for Scaled<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{:+}i)e{}", self.m.re, self.m.im, self.e)
    }
}

impl<T: Real> std::iter::Sum for Scaled<T> {
    fn sum<I: Iterator<Item = Self>>(it: I) -> Self {
        it.fold(Self::zero(), |a, b| a + b)
    }
}
