//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`
//! with `|lo| ≤ ulp(hi)/2`, giving about 106 bits of significand.
//!
//! Arithmetic, `sqrt`, `exp`, `exp_m1`, `ln` and `tanh` are accurate to
//! roughly 1e-30 relative. Everything else in the [`Float`] surface falls
//! back to `f64` on the high word; those methods exist to satisfy the trait
//! and are not on any hot numeric path.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, Signed, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN_2: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::LN_2, 2.3190468138462996e-17);
const LN_10: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::LN_10, -2.1707562233822494e-16);
const PI: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::PI, 1.2246467991473532e-16);
const E: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::E, 1.4456468917292502e-16);
const SQRT_2: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::SQRT_2, -9.667293313452913e-17);

impl DoubleDouble {
    /// `hi + lo`; the caller guarantees the pair is normalized.
    pub const fn from_parts(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    fn normalized(hi: f64, lo: f64) -> Self {
        let (h, l) = quick_two_sum(hi, lo);
        if h.is_finite() {
            Self { hi: h, lo: l }
        } else {
            Self { hi: h, lo: 0.0 }
        }
    }

    /// Multiplies by `2^k` exactly (barring overflow/underflow).
    fn ldexp(self, k: i32) -> Self {
        let mut out = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let f = 2f64.powi(step);
            out = Self {
                hi: out.hi * f,
                lo: out.lo * f,
            };
            k -= step;
        }
        out
    }

    /// `exp(r) - 1` for `|r| ≤ ln(2)/2`.
    fn expm1_reduced(r: Self) -> Self {
        const HALVINGS: i32 = 10;
        let r = r.ldexp(-HALVINGS);
        // |r| < 3.4e-4 here; 12 Taylor terms reach well below 1e-33.
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / Self::from_f64(n as f64);
            sum += term;
        }
        // expm1(2y) = expm1(y) · (expm1(y) + 2)
        for _ in 0..HALVINGS {
            sum = sum * (sum + Self::from_f64(2.0));
        }
        sum
    }

    fn exp_dd(self) -> Self {
        if self.hi.is_nan() {
            return self;
        }
        if self.hi > 709.78 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return Self::zero();
        }
        let k = (self.hi / LN_2.hi).round();
        let r = self - LN_2 * Self::from_f64(k);
        (Self::expm1_reduced(r) + Self::one()).ldexp(k as i32)
    }

    fn expm1_dd(self) -> Self {
        if self.hi.abs() <= 0.5 * LN_2.hi {
            Self::expm1_reduced(self)
        } else {
            self.exp_dd() - Self::one()
        }
    }

    fn ln_dd(self) -> Self {
        if self.hi.is_nan() || self.hi < 0.0 {
            return Self::from_f64(f64::NAN);
        }
        if self.hi == 0.0 {
            return Self::from_f64(f64::NEG_INFINITY);
        }
        if self.hi.is_infinite() {
            return self;
        }
        // One Newton step on exp(y) = x doubles the f64 guess's accuracy.
        let y = Self::from_f64(self.hi.ln());
        y + self * (-y).exp_dd() - Self::one()
    }

    fn sqrt_dd(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 {
                Self::zero()
            } else {
                Self::from_f64(f64::NAN)
            };
        }
        if self.hi.is_infinite() {
            return self;
        }
        let y = self.hi.sqrt();
        let yd = Self::from_f64(y);
        let r = self - yd * yd;
        yd + Self::from_f64(r.hi / (2.0 * y))
    }

    fn tanh_dd(self) -> Self {
        if self.hi.is_nan() {
            return self;
        }
        let a = self.abs();
        let t = if a.hi > 40.0 {
            Self::one()
        } else {
            let u = (a + a).expm1_dd();
            u / (u + Self::from_f64(2.0))
        };
        if self.hi < 0.0 {
            -t
        } else {
            t
        }
    }

    fn via_f64(self, f: impl FnOnce(f64) -> f64) -> Self {
        Self::from_f64(f(self.hi + self.lo))
    }
}

impl Add for DoubleDouble {
    type Output = Self;

    #[inline]
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        if !s.is_finite() {
            return Self::from_f64(s);
        }
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::normalized(s, e + f)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;

    #[inline]
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;

    #[inline]
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        if !p.is_finite() || p == 0.0 {
            return Self::from_f64(p);
        }
        Self::normalized(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;

    #[inline]
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        if !q1.is_finite() || !o.hi.is_finite() || q1 == 0.0 {
            return Self::from_f64(q1);
        }
        let r = self - o * Self::from_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Self::from_f64(q2);
        let q3 = r.hi / o.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + Self::from_f64(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;

    fn rem(self, o: Self) -> Self {
        self - (self / o).trunc() * o
    }
}

impl Neg for DoubleDouble {
    type Output = Self;

    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

macro_rules! assign_ops {
    ($($trait:ident $method:ident $op:tt),*) => {$(
        impl $trait for DoubleDouble {
            #[inline]
            fn $method(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    )*};
}

assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

impl PartialEq for DoubleDouble {
    fn eq(&self, o: &Self) -> bool {
        self.hi == o.hi && self.lo == o.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&o.lo),
            ord => Some(ord),
        }
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == 0.0 {
            write!(f, "{}", self.hi)
        } else {
            write!(f, "{}{:+e}", self.hi, self.lo)
        }
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = num_traits::ParseFloatError;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::from_f64)
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        self.trunc_f64().to_i64()
    }

    fn to_u64(&self) -> Option<u64> {
        self.trunc_f64().to_u64()
    }

    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
}

impl DoubleDouble {
    fn trunc_f64(self) -> f64 {
        let t = self.trunc();
        t.hi + t.lo
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::normalized(hi, lo))
    }

    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::normalized(hi, lo))
    }

    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::from_f64(n))
    }
}

impl NumCast for DoubleDouble {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        n.to_f64().map(Self::from_f64)
    }
}

impl Signed for DoubleDouble {
    fn abs(&self) -> Self {
        if self.hi < 0.0 {
            -*self
        } else {
            *self
        }
    }

    fn abs_sub(&self, o: &Self) -> Self {
        if *self > *o {
            *self - *o
        } else {
            Self::zero()
        }
    }

    fn signum(&self) -> Self {
        Self::from_f64(self.hi.signum())
    }

    fn is_positive(&self) -> bool {
        self.hi > 0.0
    }

    fn is_negative(&self) -> bool {
        self.hi < 0.0
    }
}

impl FloatConst for DoubleDouble {
    fn E() -> Self {
        E
    }
    fn FRAC_1_PI() -> Self {
        Self::one() / PI
    }
    fn FRAC_1_SQRT_2() -> Self {
        SQRT_2.ldexp(-1)
    }
    fn FRAC_2_PI() -> Self {
        Self::from_f64(2.0) / PI
    }
    fn FRAC_2_SQRT_PI() -> Self {
        Self::from_f64(2.0) / PI.sqrt_dd()
    }
    fn FRAC_PI_2() -> Self {
        PI.ldexp(-1)
    }
    fn FRAC_PI_3() -> Self {
        PI / Self::from_f64(3.0)
    }
    fn FRAC_PI_4() -> Self {
        PI.ldexp(-2)
    }
    fn FRAC_PI_6() -> Self {
        PI / Self::from_f64(6.0)
    }
    fn FRAC_PI_8() -> Self {
        PI.ldexp(-3)
    }
    fn LN_10() -> Self {
        LN_10
    }
    fn LN_2() -> Self {
        LN_2
    }
    fn LOG10_E() -> Self {
        Self::one() / LN_10
    }
    fn LOG2_E() -> Self {
        Self::one() / LN_2
    }
    fn PI() -> Self {
        PI
    }
    fn SQRT_2() -> Self {
        SQRT_2
    }
}

impl Float for DoubleDouble {
    fn nan() -> Self {
        Self::from_f64(f64::NAN)
    }
    fn infinity() -> Self {
        Self::from_f64(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self::from_f64(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::from_f64(-0.0)
    }
    fn min_value() -> Self {
        Self::from_f64(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Self::from_f64(f64::MIN_POSITIVE)
    }
    fn epsilon() -> Self {
        Self::from_f64(f64::EPSILON * f64::EPSILON)
    }
    fn max_value() -> Self {
        Self::from_f64(f64::MAX)
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            Self::normalized(hi, self.lo.floor())
        } else {
            Self::from_f64(hi)
        }
    }
    fn ceil(self) -> Self {
        -(-self).floor()
    }
    fn round(self) -> Self {
        (self + Self::from_f64(0.5)).floor()
    }
    fn trunc(self) -> Self {
        if self.hi >= 0.0 {
            self.floor()
        } else {
            self.ceil()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        Signed::abs(&self)
    }
    fn signum(self) -> Self {
        Signed::signum(&self)
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }
    fn powf(self, n: Self) -> Self {
        (n * self.ln_dd()).exp_dd()
    }
    fn sqrt(self) -> Self {
        self.sqrt_dd()
    }
    fn exp(self) -> Self {
        self.exp_dd()
    }
    fn exp2(self) -> Self {
        (self * LN_2).exp_dd()
    }
    fn ln(self) -> Self {
        self.ln_dd()
    }
    fn log(self, base: Self) -> Self {
        self.ln_dd() / base.ln_dd()
    }
    fn log2(self) -> Self {
        self.ln_dd() / LN_2
    }
    fn log10(self) -> Self {
        self.ln_dd() / LN_10
    }
    fn max(self, o: Self) -> Self {
        if self.is_nan() || o > self {
            o
        } else {
            self
        }
    }
    fn min(self, o: Self) -> Self {
        if self.is_nan() || o < self {
            o
        } else {
            self
        }
    }
    fn abs_sub(self, o: Self) -> Self {
        Signed::abs_sub(&self, &o)
    }
    fn cbrt(self) -> Self {
        self.via_f64(f64::cbrt)
    }
    fn hypot(self, o: Self) -> Self {
        (self * self + o * o).sqrt_dd()
    }
    fn sin(self) -> Self {
        self.via_f64(f64::sin)
    }
    fn cos(self) -> Self {
        self.via_f64(f64::cos)
    }
    fn tan(self) -> Self {
        self.via_f64(f64::tan)
    }
    fn asin(self) -> Self {
        self.via_f64(f64::asin)
    }
    fn acos(self) -> Self {
        self.via_f64(f64::acos)
    }
    fn atan(self) -> Self {
        self.via_f64(f64::atan)
    }
    fn atan2(self, o: Self) -> Self {
        Self::from_f64(self.hi.atan2(o.hi))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        self.expm1_dd()
    }
    fn ln_1p(self) -> Self {
        (Self::one() + self).ln_dd()
    }
    fn sinh(self) -> Self {
        let e = self.exp_dd();
        (e - e.recip()).ldexp(-1)
    }
    fn cosh(self) -> Self {
        let e = self.exp_dd();
        (e + e.recip()).ldexp(-1)
    }
    fn tanh(self) -> Self {
        self.tanh_dd()
    }
    fn asinh(self) -> Self {
        self.via_f64(f64::asinh)
    }
    fn acosh(self) -> Self {
        self.via_f64(f64::acosh)
    }
    fn atanh(self) -> Self {
        self.via_f64(f64::atanh)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type Dd = DoubleDouble;

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        let d = (a - b).abs();
        d.hi <= tol * b.abs().hi.max(1e-300)
    }

    #[test]
    fn arithmetic_keeps_the_low_word() {
        let one = Dd::one();
        let tiny = Dd::from_f64(1e-20);
        let sum = one + tiny;
        assert_eq!(sum.hi(), 1.0);
        assert_eq!((sum - one).hi(), 1e-20);
        let third = one / Dd::from_f64(3.0);
        assert!(close(third * Dd::from_f64(3.0), one, 1e-31));
    }

    #[test]
    fn transcendental_functions_hit_reference_constants() {
        assert!(close(Dd::one().exp(), E, 1e-30));
        assert!(close(Dd::from_f64(2.0).ln(), LN_2, 1e-30));
        assert!(close(Dd::from_f64(10.0).ln(), LN_10, 1e-30));
        assert!(close(Dd::from_f64(2.0).sqrt(), SQRT_2, 1e-31));
        for x in [-30.0, -2.7, -0.3, 1e-9, 0.2, 5.5, 80.0] {
            let x = Dd::from_f64(x) / Dd::from_f64(3.0);
            let diff = (x.exp().ln() - x).abs().hi();
            assert!(diff <= 1e-29 * x.abs().hi().max(1.0), "{x}");
            // Adding one rounds at the scale of 1, so compare absolutely there.
            let diff = (x.exp_m1() + Dd::one() - x.exp()).abs().hi();
            assert!(diff <= 1e-30 * x.exp().hi().max(1.0), "{x}");
        }
    }

    #[test]
    fn tanh_matches_exponential_identity() {
        for x in [-12.5, -1.0, -1e-6, 0.0, 3e-4, 0.75, 4.0] {
            let x = Dd::from_f64(x);
            let e = (x + x).exp();
            let reference = (e - Dd::one()) / (e + Dd::one());
            let got = x.tanh();
            // The reference cancels in e - 1, so it is only absolutely accurate.
            assert!((got - reference).abs().hi() <= 1e-30, "{x}");
        }
        assert_eq!(Dd::from_f64(100.0).tanh(), Dd::one());
        assert_eq!(Dd::from_f64(-100.0).tanh(), -Dd::one());
    }

    #[test]
    fn saturation_matches_f64_semantics() {
        assert_eq!(Dd::from_f64(800.0).exp().hi(), f64::INFINITY);
        assert_eq!(Dd::from_f64(-800.0).exp(), Dd::zero());
        let s = Dd::one() / (Dd::one() + Dd::from_f64(800.0).exp());
        assert_eq!(s, Dd::zero());
        assert!(Dd::zero().ln().hi().is_infinite());
    }

    #[test]
    fn ordering_and_conversions() {
        let a = Dd::from_f64(1.0);
        let b = a + Dd::from_f64(1e-25);
        assert!(b > a);
        assert_eq!(<Dd as FromPrimitive>::from_u64(u64::MAX).unwrap().to_f64(), Some(u64::MAX as f64));
        assert_eq!(Dd::from_f64(7.9).floor().to_i64(), Some(7));
        assert_eq!(Dd::from_f64(-7.9).trunc().to_f64(), Some(-7.0));
    }
}
