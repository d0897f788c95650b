//! Dyadic interval arithmetic with outward rounding.
//!
//! A [`Dyadic`] is `mantissa * 2^exponent` with an arbitrary-size mantissa.
//! [`Interval`] keeps a closed enclosure `[lo, hi]` whose endpoints are
//! rounded away from the enclosed value after every operation, so the true
//! result of any chain of operations stays inside the final interval.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

/// Exact binary floating value `mantissa * 2^exponent`.
#[derive(Debug, Clone)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

fn pow2(bits: u64) -> BigInt {
    BigInt::one() << bits
}

/// Shift right by `bits`, rounding in the requested direction.
fn shr_round(m: &BigInt, bits: u64, dir: Round) -> BigInt {
    if bits == 0 {
        return m.clone();
    }
    let d = pow2(bits);
    match dir {
        Round::Down => m.div_floor(&d),
        Round::Up => -((-m).div_floor(&d)),
    }
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        Dyadic { mantissa, exponent }
    }

    pub fn zero() -> Self {
        Dyadic::new(BigInt::zero(), 0)
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        Dyadic::new(v.into(), 0)
    }

    /// Exact conversion of a finite `f64`.
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        if v == 0.0 {
            return Some(Dyadic::zero());
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        Some(Dyadic::new(BigInt::from(mant) * sign, exp))
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn signum(&self) -> i32 {
        match self.mantissa.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    /// Round to at most `prec` significant bits.
    pub fn round(&self, prec: u32, dir: Round) -> Dyadic {
        let bits = self.mantissa.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let shift = bits - prec as u64;
        Dyadic::new(shr_round(&self.mantissa, shift, dir), self.exponent + shift as i64)
    }

    fn aligned(a: &Dyadic, b: &Dyadic) -> (BigInt, BigInt, i64) {
        let e = a.exponent.min(b.exponent);
        let ma = &a.mantissa << (a.exponent - e) as u64;
        let mb = &b.mantissa << (b.exponent - e) as u64;
        (ma, mb, e)
    }

    pub fn add_exact(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let (a, b, e) = Dyadic::aligned(self, other);
        Dyadic::new(a + b, e)
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic::new(-&self.mantissa, self.exponent)
    }

    pub fn mul_exact(&self, other: &Dyadic) -> Dyadic {
        Dyadic::new(&self.mantissa * &other.mantissa, self.exponent + other.exponent)
    }

    /// Quotient rounded to `prec` bits in direction `dir`. `other` must be nonzero.
    pub fn div(&self, other: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        assert!(!other.is_zero(), "division by zero dyadic");
        if self.is_zero() {
            return Dyadic::zero();
        }
        let (mut num, mut den) = (self.mantissa.clone(), other.mantissa.clone());
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        let shift = (prec as i64 + den.bits() as i64 - num.bits() as i64 + 2).max(0) as u64;
        let scaled = num << shift;
        let q = match dir {
            Round::Down => scaled.div_floor(&den),
            Round::Up => -((-scaled).div_floor(&den)),
        };
        Dyadic::new(q, self.exponent - other.exponent - shift as i64).round(prec, dir)
    }

    /// Largest integer not exceeding the value.
    pub fn floor(&self) -> BigInt {
        if self.exponent >= 0 {
            &self.mantissa << self.exponent as u64
        } else {
            self.mantissa.div_floor(&pow2((-self.exponent) as u64))
        }
    }

    /// Nearest `f64` (truncating extra mantissa bits).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits();
        let (m, e) = if bits > 60 {
            let s = bits - 60;
            (&self.mantissa >> s, self.exponent + s as i64)
        } else {
            (self.mantissa.clone(), self.exponent)
        };
        let mf = m.to_f64().unwrap_or(f64::NAN);
        let e = e.clamp(-2200, 2200) as i32;
        // split the scaling to avoid intermediate overflow/underflow
        mf * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }

    /// Decimal string with `digits` digits after the point (truncated toward -inf).
    pub fn to_decimal(&self, digits: usize) -> String {
        let scale = BigInt::from(10u32).pow(digits as u32);
        let scaled = if self.exponent >= 0 {
            (&self.mantissa << self.exponent as u64) * &scale
        } else {
            (&self.mantissa * &scale).div_floor(&pow2((-self.exponent) as u64))
        };
        let neg = scaled.is_negative();
        let s = scaled.abs().to_string();
        let s = if s.len() <= digits {
            format!("{}{}", "0".repeat(digits + 1 - s.len()), s)
        } else {
            s
        };
        let (int, frac) = s.split_at(s.len() - digits);
        let sign = if neg { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Dyadic {}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = Dyadic::aligned(self, other);
        a.cmp(&b)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// Closed interval `[lo, hi]` with dyadic endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    lo: Dyadic,
    hi: Dyadic,
}

impl Interval {
    pub fn new(lo: Dyadic, hi: Dyadic) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(v: Dyadic) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        Interval::point(Dyadic::from_int(v))
    }

    pub fn lo(&self) -> &Dyadic {
        &self.lo
    }

    pub fn hi(&self) -> &Dyadic {
        &self.hi
    }

    pub fn width(&self) -> Dyadic {
        self.hi.add_exact(&self.lo.neg())
    }

    pub fn width_f64(&self) -> f64 {
        self.width().to_f64()
    }

    pub fn mid_f64(&self) -> f64 {
        let (a, b) = (self.lo.to_f64(), self.hi.to_f64());
        a + (b - a) / 2.0
    }

    pub fn contains(&self, v: &Dyadic) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.signum() <= 0 && self.hi.signum() >= 0
    }

    /// Common floor of every point in the interval, if there is one.
    pub fn certified_floor(&self) -> Option<BigInt> {
        let a = self.lo.floor();
        let b = self.hi.floor();
        (a == b).then_some(a)
    }

    fn rounded(lo: Dyadic, hi: Dyadic, prec: u32) -> Interval {
        Interval::new(lo.round(prec, Round::Down), hi.round(prec, Round::Up))
    }

    pub fn add(&self, other: &Interval, prec: u32) -> Interval {
        Interval::rounded(self.lo.add_exact(&other.lo), self.hi.add_exact(&other.hi), prec)
    }

    pub fn neg(&self) -> Interval {
        Interval::new(self.hi.neg(), self.lo.neg())
    }

    pub fn sub(&self, other: &Interval, prec: u32) -> Interval {
        self.add(&other.neg(), prec)
    }

    pub fn add_int(&self, k: &BigInt, prec: u32) -> Interval {
        self.add(&Interval::from_int(k.clone()), prec)
    }

    pub fn mul(&self, other: &Interval, prec: u32) -> Interval {
        let products = [
            self.lo.mul_exact(&other.lo),
            self.lo.mul_exact(&other.hi),
            self.hi.mul_exact(&other.lo),
            self.hi.mul_exact(&other.hi),
        ];
        let lo = products.iter().min().cloned().expect("four products");
        let hi = products.iter().max().cloned().expect("four products");
        Interval::rounded(lo, hi, prec)
    }

    /// `1 / self`; `None` when the interval contains zero.
    pub fn recip(&self, prec: u32) -> Option<Interval> {
        if self.contains_zero() {
            return None;
        }
        let one = Dyadic::from_int(1);
        Some(Interval::new(
            one.div(&self.hi, prec, Round::Down),
            one.div(&self.lo, prec, Round::Up),
        ))
    }

    pub fn div(&self, other: &Interval, prec: u32) -> Option<Interval> {
        Some(self.mul(&other.recip(prec + 8)?, prec))
    }

    pub fn powi(&self, n: u32, prec: u32) -> Interval {
        if n == 0 {
            return Interval::from_int(1);
        }
        if self.lo.signum() >= 0 {
            // monotone on the nonnegative half-line: exact power then round
            let mut lo = self.lo.clone();
            let mut hi = self.hi.clone();
            for _ in 1..n {
                lo = lo.mul_exact(&self.lo).round(prec + 16, Round::Down);
                hi = hi.mul_exact(&self.hi).round(prec + 16, Round::Up);
            }
            return Interval::rounded(lo, hi, prec);
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.mul(self, prec + 16);
        }
        Interval::rounded(acc.lo, acc.hi, prec)
    }

    /// Enclosure of `sqrt(n)` for a nonnegative integer `n`.
    pub fn sqrt_int(n: &BigInt, prec: u32) -> Interval {
        assert!(!n.is_negative(), "sqrt of negative integer");
        let shift = 2 * (prec as u64 + 2);
        let scaled: BigInt = n << shift;
        let root = scaled.sqrt();
        let exact = &root * &root == scaled;
        let e = -((prec as i64) + 2);
        let lo = Dyadic::new(root.clone(), e);
        let hi = if exact { lo.clone() } else { Dyadic::new(root + 1, e) };
        Interval::new(lo, hi)
    }

    /// Enclosure of `p / q` for integers, `q != 0`.
    pub fn from_ratio(p: &BigInt, q: &BigInt, prec: u32) -> Interval {
        let (a, b) = (Dyadic::from_int(p.clone()), Dyadic::from_int(q.clone()));
        let lo = a.div(&b, prec, Round::Down);
        let hi = a.div(&b, prec, Round::Up);
        if lo <= hi {
            Interval::new(lo, hi)
        } else {
            Interval::new(hi, lo)
        }
    }

    /// Smallest interval with `f64` endpoints containing `self`.
    pub fn to_f64_bounds(&self) -> (f64, f64) {
        let lo = self.lo.to_f64();
        let hi = self.hi.to_f64();
        (next_down(lo), next_up(hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let b = x.to_bits();
    f64::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}
