//! Exact real numbers of the form `(a + b·√d) / c`.
//!
//! Rationals are the case `b = 0`. Quadratic irrationals share one field
//! `Q(√d)` with squarefree-free `d` only required to be a non-square. Binary
//! operations between two irrational values from different fields are not
//! representable and return `None`, which callers treat as "fall back to
//! interval arithmetic".

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::interval::{Dyadic, Interval};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactReal {
    a: BigInt,
    b: BigInt,
    d: u64,
    c: BigInt,
}

fn is_square(d: u64) -> bool {
    let r = d.sqrt();
    r * r == d
}

impl ExactReal {
    /// `(a + b√d) / c`; a perfect-square `d` is folded into the rational part.
    pub fn quadratic(a: BigInt, b: BigInt, d: u64, c: BigInt) -> Result<Self, Error> {
        if c.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        let (a, b, d) = if b.is_zero() || d == 0 {
            (a, BigInt::zero(), 0)
        } else if is_square(d) {
            (a + b * BigInt::from(d.sqrt()), BigInt::zero(), 0)
        } else {
            (a, b, d)
        };
        let mut x = ExactReal { a, b, d, c };
        x.normalize_full();
        Ok(x)
    }

    pub fn rational(p: BigInt, q: BigInt) -> Result<Self, Error> {
        ExactReal::quadratic(p, BigInt::zero(), 0, q)
    }

    pub fn int(v: i64) -> Self {
        ExactReal {
            a: BigInt::from(v),
            b: BigInt::zero(),
            d: 0,
            c: BigInt::one(),
        }
    }

    /// Exact value of a finite `f64`.
    pub fn from_f64(v: f64) -> Result<Self, Error> {
        let dy = Dyadic::from_f64(v).ok_or_else(|| Error::InvalidInput(format!("non-finite value {v}")))?;
        let e = dy.exponent();
        if e >= 0 {
            ExactReal::rational(dy.mantissa() << e as u64, BigInt::one())
        } else {
            ExactReal::rational(dy.mantissa().clone(), BigInt::one() << (-e) as u64)
        }
    }

    /// The golden ratio `(1 + √5) / 2`.
    pub fn golden() -> Self {
        ExactReal::quadratic(1.into(), 1.into(), 5, 2.into()).expect("valid constant")
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn radicand(&self) -> Option<u64> {
        (!self.b.is_zero()).then_some(self.d)
    }

    pub fn parts(&self) -> (&BigInt, &BigInt, u64, &BigInt) {
        (&self.a, &self.b, self.d, &self.c)
    }

    /// Bit size of the representation, used to decide when exact arithmetic
    /// has become too expensive.
    pub fn size_bits(&self) -> u64 {
        self.a.bits().max(self.b.bits()).max(self.c.bits())
    }

    fn normalize_sign(&mut self) {
        if self.c.is_negative() {
            self.a = -&self.a;
            self.b = -&self.b;
            self.c = -&self.c;
        }
    }

    /// Remove common powers of two only; cheap enough for every step.
    fn normalize_twos(&mut self) {
        self.normalize_sign();
        let tz = |v: &BigInt| v.trailing_zeros().unwrap_or(u64::MAX);
        let k = tz(&self.a).min(tz(&self.b)).min(tz(&self.c));
        if k > 0 && k != u64::MAX {
            self.a >>= k;
            self.b >>= k;
            self.c >>= k;
        }
    }

    fn normalize_full(&mut self) {
        self.normalize_sign();
        let g = self.a.gcd(&self.b).gcd(&self.c);
        if !g.is_one() && !g.is_zero() {
            self.a /= &g;
            self.b /= &g;
            self.c /= &g;
        }
    }

    fn common_field(&self, other: &ExactReal) -> Option<u64> {
        match (self.radicand(), other.radicand()) {
            (None, None) => Some(0),
            (Some(d), None) | (None, Some(d)) => Some(d),
            (Some(d1), Some(d2)) if d1 == d2 => Some(d1),
            _ => None,
        }
    }

    pub fn add(&self, other: &ExactReal) -> Option<ExactReal> {
        let d = self.common_field(other)?;
        let mut r = ExactReal {
            a: &self.a * &other.c + &other.a * &self.c,
            b: &self.b * &other.c + &other.b * &self.c,
            d,
            c: &self.c * &other.c,
        };
        if r.b.is_zero() {
            r.d = 0;
        }
        r.normalize_twos();
        Some(r)
    }

    pub fn sub_int(&self, k: &BigInt) -> ExactReal {
        ExactReal {
            a: &self.a - k * &self.c,
            b: self.b.clone(),
            d: self.d,
            c: self.c.clone(),
        }
    }

    pub fn add_int(&self, k: &BigInt) -> ExactReal {
        self.sub_int(&-k)
    }

    pub fn mul_int(&self, k: &BigInt) -> ExactReal {
        let mut r = ExactReal {
            a: &self.a * k,
            b: &self.b * k,
            d: self.d,
            c: self.c.clone(),
        };
        if r.b.is_zero() {
            r.d = 0;
        }
        r.normalize_twos();
        r
    }

    pub fn mul(&self, other: &ExactReal) -> Option<ExactReal> {
        let d = self.common_field(other)?;
        let dd = BigInt::from(d);
        let mut r = ExactReal {
            a: &self.a * &other.a + &self.b * &other.b * &dd,
            b: &self.a * &other.b + &self.b * &other.a,
            d,
            c: &self.c * &other.c,
        };
        if r.b.is_zero() {
            r.d = 0;
        }
        r.normalize_twos();
        Some(r)
    }

    /// `1 / self`, or `None` for zero.
    pub fn recip(&self) -> Option<ExactReal> {
        if self.is_zero() {
            return None;
        }
        if self.b.is_zero() {
            let mut r = ExactReal {
                a: self.c.clone(),
                b: BigInt::zero(),
                d: 0,
                c: self.a.clone(),
            };
            r.normalize_sign();
            return Some(r);
        }
        // c / (a + b√d) = c (a − b√d) / (a² − b² d)
        let dd = BigInt::from(self.d);
        let den = &self.a * &self.a - &self.b * &self.b * &dd;
        let mut r = ExactReal {
            a: &self.c * &self.a,
            b: -(&self.c * &self.b),
            d: self.d,
            c: den,
        };
        r.normalize_full();
        Some(r)
    }

    pub fn div(&self, other: &ExactReal) -> Option<ExactReal> {
        self.mul(&other.recip()?)
    }

    pub fn powi(&self, n: u32) -> ExactReal {
        let mut acc = ExactReal::int(1);
        for _ in 0..n {
            acc = acc.mul(self).expect("same field");
        }
        acc
    }

    /// Exact floor.
    pub fn floor(&self) -> BigInt {
        if self.b.is_zero() {
            return self.a.div_floor(&self.c);
        }
        // floor(b√d) from an integer square root; √d is irrational so the
        // fractional part is strictly inside (0, 1) and cannot move the
        // final floor across an integer boundary.
        let b2d = &self.b * &self.b * BigInt::from(self.d);
        let root = b2d.sqrt();
        let fl = if self.b.is_positive() { root } else { -root - 1 };
        (&self.a + fl).div_floor(&self.c)
    }

    pub fn fract(&self) -> ExactReal {
        self.sub_int(&self.floor())
    }

    pub fn cmp_int(&self, k: i64) -> std::cmp::Ordering {
        let f = self.floor();
        let k = BigInt::from(k);
        if f < k {
            std::cmp::Ordering::Less
        } else if f > k {
            std::cmp::Ordering::Greater
        } else if self.sub_int(&k).is_zero() {
            std::cmp::Ordering::Equal
        } else {
            std::cmp::Ordering::Greater
        }
    }

    /// Interval enclosure with endpoints rounded to `prec` bits.
    pub fn enclose(&self, prec: u32) -> Interval {
        let work = prec + 16;
        if self.b.is_zero() {
            return Interval::from_ratio(&self.a, &self.c, prec);
        }
        let extra = self.b.bits() as u32 + 4;
        let root = Interval::sqrt_int(&BigInt::from(self.d), work + extra);
        let num = root
            .mul(&Interval::from_int(self.b.clone()), work + extra)
            .add_int(&self.a, work + extra);
        num.div(&Interval::from_int(self.c.clone()), prec)
            .expect("nonzero denominator")
    }

    pub fn to_f64(&self) -> f64 {
        if self.b.is_zero() {
            let (a, c) = (&self.a, &self.c);
            if let (Some(x), Some(y)) = (a.to_f64(), c.to_f64()) {
                if a.bits() < 53 && c.bits() < 53 {
                    return x / y;
                }
            }
        }
        self.enclose(80).mid_f64()
    }
}

impl fmt::Display for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            if self.c.is_one() {
                write!(f, "{}", self.a)
            } else {
                write!(f, "{}/{}", self.a, self.c)
            }
        } else {
            write!(f, "({}+{}*sqrt({}))/{}", self.a, self.b, self.d, self.c)
        }
    }
}

fn parse_decimal(s: &str) -> Option<ExactReal> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = match mant.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mant, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}0").parse::<BigInt>().ok()? / 10;
    let digits = if neg { -digits } else { digits };
    let e10 = exp - frac.len() as i64;
    let ten = BigInt::from(10);
    if e10 >= 0 {
        ExactReal::rational(digits * ten.pow(e10 as u32), BigInt::one()).ok()
    } else {
        ExactReal::rational(digits, ten.pow((-e10) as u32)).ok()
    }
}

impl FromStr for ExactReal {
    type Err = Error;

    /// Accepts named constants (`golden`, `golden-conj`, `sqrt2-1`,
    /// `sqrtN`), fractions `p/q`, decimals with optional exponent, and the
    /// explicit form `quad:a,b,d,c` for `(a + b√d)/c`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("cannot parse real number '{s}'"));
        let q = |a: i64, b: i64, d: u64, c: i64| ExactReal::quadratic(a.into(), b.into(), d, c.into());
        match s {
            "golden" | "phi" => return q(1, 1, 5, 2),
            "golden-conj" | "inv-golden" => return q(-1, 1, 5, 2),
            "sqrt2-1" => return q(-1, 1, 2, 1),
            _ => {}
        }
        if let Some(n) = s.strip_prefix("sqrt") {
            let d: u64 = n.parse().map_err(|_| bad())?;
            return q(0, 1, d, 1);
        }
        if let Some(rest) = s.strip_prefix("quad:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(bad());
            }
            let a: BigInt = parts[0].parse().map_err(|_| bad())?;
            let b: BigInt = parts[1].parse().map_err(|_| bad())?;
            let d: u64 = parts[2].parse().map_err(|_| bad())?;
            let c: BigInt = parts[3].parse().map_err(|_| bad())?;
            return ExactReal::quadratic(a, b, d, c);
        }
        if let Some((p, qs)) = s.split_once('/') {
            let p = parse_decimal(p.trim()).ok_or_else(bad)?;
            let qv = parse_decimal(qs.trim()).ok_or_else(bad)?;
            return p.div(&qv).ok_or_else(bad);
        }
        parse_decimal(s).ok_or_else(bad)
    }
}
