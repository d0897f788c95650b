//! Digit extraction for f-expansions.
//!
//! Every scheme is an f-expansion `x = f(d₁ + f(d₂ + …))` driven by the
//! recursion `d_{k+1} = ⌊f⁻¹(r_k)⌋`, `r_{k+1} = {f⁻¹(r_k)}`. Rational and
//! quadratic-irrational inputs run on exact arithmetic while the
//! representation stays small; everything else (and anything that grows too
//! large) runs on outward-rounded intervals whose precision is doubled until
//! each floor is certified.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::FrequencyVector;
use crate::numeric::{ExactReal, Interval};

/// Upper limit for precision doubling during digit extraction.
pub const MAX_PRECISION_BITS: u32 = 65536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// A generating function `f` of an f-expansion, described through its
/// inverse and branch structure.
///
/// Branch `k` is the set of `x ∈ [0,1)` with `⌊f⁻¹(x)⌋ = k`; on it the
/// map `T(x) = f⁻¹(x) − k` has inverse `y ↦ f(k + y)`.
pub trait FMap: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn monotonicity(&self) -> Monotonicity;
    /// Smallest digit.
    fn first_digit(&self) -> u64;
    /// Largest digit, `None` for countably many.
    fn last_digit(&self) -> Option<u64>;
    /// Supremum of `f⁻¹` on `[0,1)` (`+∞` for countable alphabets).
    fn domain_end(&self) -> f64;
    fn forward(&self, u: f64) -> f64;
    fn inverse(&self, x: f64) -> f64;
    /// `|(f⁻¹)′(x)|`, the expansion rate of `T` at `x`.
    fn inverse_derivative(&self, x: f64) -> f64;

    /// Enclosure of `f⁻¹` over `x`. The default widens an `f64` evaluation
    /// and is only meaningful up to [`FMap::max_precision`].
    fn inverse_enclosure(&self, x: &Interval, prec: u32) -> Option<Interval> {
        let _ = prec;
        let (lo, hi) = x.to_f64_bounds();
        let (a, b) = (self.inverse(lo), self.inverse(hi));
        if !a.is_finite() || !b.is_finite() {
            return None;
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let pad = 1e-13 * a.abs().max(b.abs()).max(1.0);
        Some(Interval::new(
            crate::numeric::Dyadic::from_f64(a - pad)?,
            crate::numeric::Dyadic::from_f64(b + pad)?,
        ))
    }

    /// Largest working precision the enclosure supports.
    fn max_precision(&self) -> u32 {
        53
    }

    /// Branch `k` as an `x`-interval `(lo, hi)` within `[0,1]`.
    fn branch_interval(&self, k: u64) -> (f64, f64) {
        let a = self.forward(k as f64);
        let b = if (k + 1) as f64 >= self.domain_end() {
            self.forward(self.domain_end())
        } else {
            self.forward((k + 1) as f64)
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
    }

    /// Right end of `T(branch k)`: 1 for full branches.
    fn branch_image_end(&self, k: u64) -> f64 {
        ((k + 1) as f64).min(self.domain_end()) - k as f64
    }

    /// `T_k⁻¹(y) = f(k + y)`.
    fn branch_inverse(&self, k: u64, y: f64) -> f64 {
        self.forward(k as f64 + y)
    }
}

#[derive(Debug, Clone)]
struct MAryMap {
    m: u64,
}

impl FMap for MAryMap {
    fn name(&self) -> String {
        format!("{}-ary", self.m)
    }
    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::Increasing
    }
    fn first_digit(&self) -> u64 {
        0
    }
    fn last_digit(&self) -> Option<u64> {
        Some(self.m - 1)
    }
    fn domain_end(&self) -> f64 {
        self.m as f64
    }
    fn forward(&self, u: f64) -> f64 {
        u / self.m as f64
    }
    fn inverse(&self, x: f64) -> f64 {
        x * self.m as f64
    }
    fn inverse_derivative(&self, _x: f64) -> f64 {
        self.m as f64
    }
    fn inverse_enclosure(&self, x: &Interval, prec: u32) -> Option<Interval> {
        Some(x.mul(&Interval::from_int(self.m), prec))
    }
    fn max_precision(&self) -> u32 {
        MAX_PRECISION_BITS
    }
}

#[derive(Debug)]
struct BetaMap {
    beta: ExactReal,
    beta_f64: f64,
    cache: Mutex<Option<(u32, Interval)>>,
}

impl BetaMap {
    fn new(beta: ExactReal) -> Self {
        let beta_f64 = beta.to_f64();
        BetaMap {
            beta,
            beta_f64,
            cache: Mutex::new(None),
        }
    }

    fn beta_enclosure(&self, prec: u32) -> Interval {
        let mut guard = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((p, iv)) = guard.as_ref() {
            if *p >= prec {
                return iv.clone();
            }
        }
        let iv = self.beta.enclose(prec);
        *guard = Some((prec, iv.clone()));
        iv
    }
}

impl FMap for BetaMap {
    fn name(&self) -> String {
        format!("beta({})", self.beta)
    }
    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::Increasing
    }
    fn first_digit(&self) -> u64 {
        0
    }
    fn last_digit(&self) -> Option<u64> {
        self.beta.floor().to_u64()
    }
    fn domain_end(&self) -> f64 {
        self.beta_f64
    }
    fn forward(&self, u: f64) -> f64 {
        u / self.beta_f64
    }
    fn inverse(&self, x: f64) -> f64 {
        x * self.beta_f64
    }
    fn inverse_derivative(&self, _x: f64) -> f64 {
        self.beta_f64
    }
    fn inverse_enclosure(&self, x: &Interval, prec: u32) -> Option<Interval> {
        Some(x.mul(&self.beta_enclosure(prec + 32), prec))
    }
    fn max_precision(&self) -> u32 {
        MAX_PRECISION_BITS
    }
}

#[derive(Debug, Clone)]
struct GaussMap;

impl FMap for GaussMap {
    fn name(&self) -> String {
        "continued-fraction".into()
    }
    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::Decreasing
    }
    fn first_digit(&self) -> u64 {
        1
    }
    fn last_digit(&self) -> Option<u64> {
        None
    }
    fn domain_end(&self) -> f64 {
        f64::INFINITY
    }
    fn forward(&self, u: f64) -> f64 {
        1.0 / u
    }
    fn inverse(&self, x: f64) -> f64 {
        1.0 / x
    }
    fn inverse_derivative(&self, x: f64) -> f64 {
        1.0 / (x * x)
    }
    fn inverse_enclosure(&self, x: &Interval, prec: u32) -> Option<Interval> {
        x.recip(prec)
    }
    fn max_precision(&self) -> u32 {
        MAX_PRECISION_BITS
    }
}

#[derive(Debug, Clone)]
struct BolyaiRenyiMap {
    m: u32,
}

impl FMap for BolyaiRenyiMap {
    fn name(&self) -> String {
        format!("bolyai-renyi({})", self.m)
    }
    fn monotonicity(&self) -> Monotonicity {
        Monotonicity::Increasing
    }
    fn first_digit(&self) -> u64 {
        0
    }
    fn last_digit(&self) -> Option<u64> {
        Some((1u64 << self.m) - 2)
    }
    fn domain_end(&self) -> f64 {
        (1u64 << self.m) as f64 - 1.0
    }
    fn forward(&self, u: f64) -> f64 {
        (u + 1.0).powf(1.0 / self.m as f64) - 1.0
    }
    fn inverse(&self, x: f64) -> f64 {
        (x + 1.0).powi(self.m as i32) - 1.0
    }
    fn inverse_derivative(&self, x: f64) -> f64 {
        self.m as f64 * (x + 1.0).powi(self.m as i32 - 1)
    }
    fn inverse_enclosure(&self, x: &Interval, prec: u32) -> Option<Interval> {
        let one = BigInt::one();
        let y = x.add_int(&one, prec + 16).powi(self.m, prec + 16);
        Some(y.add_int(&-one, prec))
    }
    fn max_precision(&self) -> u32 {
        MAX_PRECISION_BITS
    }
}

/// The five expansion schemes.
#[derive(Debug, Clone)]
pub enum ExpansionKind {
    MAry { m: u64 },
    Beta { beta: ExactReal },
    ContinuedFraction,
    BolyaiRenyi { m: u32 },
    GenericF(Arc<dyn FMap>),
}

impl PartialEq for ExpansionKind {
    fn eq(&self, other: &Self) -> bool {
        use ExpansionKind::*;
        match (self, other) {
            (MAry { m: a }, MAry { m: b }) => a == b,
            (Beta { beta: a }, Beta { beta: b }) => a == b,
            (ContinuedFraction, ContinuedFraction) => true,
            (BolyaiRenyi { m: a }, BolyaiRenyi { m: b }) => a == b,
            (GenericF(a), GenericF(b)) => Arc::ptr_eq(a, b) || a.name() == b.name(),
            _ => false,
        }
    }
}

impl ExpansionKind {
    pub fn mary(m: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput(format!("m-ary base {m} < 2")));
        }
        Ok(ExpansionKind::MAry { m })
    }

    pub fn beta(beta: ExactReal) -> Result<Self> {
        if beta.cmp_int(1) != std::cmp::Ordering::Greater {
            return Err(Error::InvalidInput(format!("beta {beta} must exceed 1")));
        }
        if beta.fract().is_zero() {
            return Err(Error::InvalidInput(format!("beta {beta} must not be an integer")));
        }
        Ok(ExpansionKind::Beta { beta })
    }

    pub fn golden_beta() -> Self {
        ExpansionKind::Beta {
            beta: ExactReal::golden(),
        }
    }

    pub fn bolyai_renyi(m: u32) -> Result<Self> {
        if !(2..=32).contains(&m) {
            return Err(Error::InvalidInput(format!("Bolyai-Renyi exponent {m} not in 2..=32")));
        }
        Ok(ExpansionKind::BolyaiRenyi { m })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExpansionKind::MAry { m } => ExpansionKind::mary(*m).map(|_| ()),
            ExpansionKind::Beta { beta } => ExpansionKind::beta(beta.clone()).map(|_| ()),
            ExpansionKind::BolyaiRenyi { m } => ExpansionKind::bolyai_renyi(*m).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn fmap(&self) -> Arc<dyn FMap> {
        match self {
            ExpansionKind::MAry { m } => Arc::new(MAryMap { m: *m }),
            ExpansionKind::Beta { beta } => Arc::new(BetaMap::new(beta.clone())),
            ExpansionKind::ContinuedFraction => Arc::new(GaussMap),
            ExpansionKind::BolyaiRenyi { m } => Arc::new(BolyaiRenyiMap { m: *m }),
            ExpansionKind::GenericF(f) => f.clone(),
        }
    }

    pub fn first_digit(&self) -> u64 {
        match self {
            ExpansionKind::ContinuedFraction => 1,
            ExpansionKind::GenericF(f) => f.first_digit(),
            _ => 0,
        }
    }

    pub fn last_digit(&self) -> Option<u64> {
        match self {
            ExpansionKind::MAry { m } => Some(m - 1),
            ExpansionKind::Beta { beta } => beta.floor().to_u64(),
            ExpansionKind::ContinuedFraction => None,
            ExpansionKind::BolyaiRenyi { m } => Some((1u64 << m) - 2),
            ExpansionKind::GenericF(f) => f.last_digit(),
        }
    }

    /// One exact step of `f⁻¹`, `None` when the value leaves the exact
    /// domain (different quadratic fields, generic maps, division by zero).
    fn exact_inverse(&self, r: &ExactReal) -> Option<ExactReal> {
        match self {
            ExpansionKind::MAry { m } => Some(r.mul_int(&BigInt::from(*m))),
            ExpansionKind::Beta { beta } => r.mul(beta),
            ExpansionKind::ContinuedFraction => r.recip(),
            ExpansionKind::BolyaiRenyi { m } => {
                let one = BigInt::one();
                Some(r.add_int(&one).powi(*m).sub_int(&one))
            }
            ExpansionKind::GenericF(_) => None,
        }
    }
}

impl fmt::Display for ExpansionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionKind::MAry { m } => write!(f, "mary({m})"),
            ExpansionKind::Beta { beta } => write!(f, "beta({beta})"),
            ExpansionKind::ContinuedFraction => write!(f, "cf"),
            ExpansionKind::BolyaiRenyi { m } => write!(f, "bolyai-renyi({m})"),
            ExpansionKind::GenericF(g) => write!(f, "generic({})", g.name()),
        }
    }
}

/// Serialized form of [`ExpansionKind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KindRecord {
    MAry { m: u64 },
    Beta { beta: String },
    ContinuedFraction,
    BolyaiRenyi { m: u32 },
    Generic { name: String },
}

impl From<&ExpansionKind> for KindRecord {
    fn from(k: &ExpansionKind) -> Self {
        match k {
            ExpansionKind::MAry { m } => KindRecord::MAry { m: *m },
            ExpansionKind::Beta { beta } => KindRecord::Beta { beta: beta.to_string() },
            ExpansionKind::ContinuedFraction => KindRecord::ContinuedFraction,
            ExpansionKind::BolyaiRenyi { m } => KindRecord::BolyaiRenyi { m: *m },
            ExpansionKind::GenericF(f) => KindRecord::Generic { name: f.name() },
        }
    }
}

impl TryFrom<&KindRecord> for ExpansionKind {
    type Error = Error;
    fn try_from(r: &KindRecord) -> Result<Self> {
        match r {
            KindRecord::MAry { m } => ExpansionKind::mary(*m),
            KindRecord::Beta { beta } => ExpansionKind::beta(parse_real(beta)?),
            KindRecord::ContinuedFraction => Ok(ExpansionKind::ContinuedFraction),
            KindRecord::BolyaiRenyi { m } => ExpansionKind::bolyai_renyi(*m),
            KindRecord::Generic { name } => Err(Error::InvalidInput(format!(
                "generic map '{name}' cannot be reconstructed from its record"
            ))),
        }
    }
}

/// Parses a real number, also accepting the `(a+b*sqrt(d))/c` form produced
/// by `Display`.
pub fn parse_real(s: &str) -> Result<ExactReal> {
    let t = s.trim();
    if let Some(rest) = t.strip_prefix('(') {
        let parsed = (|| {
            let (num, den) = rest.split_once(")/")?;
            let (a, tail) = num.split_once('+')?;
            let (b, d) = tail.split_once("*sqrt(")?;
            let d = d.strip_suffix(')')?;
            Some((a.parse().ok()?, b.parse().ok()?, d.parse().ok()?, den.parse().ok()?))
        })();
        if let Some((a, b, d, c)) = parsed {
            return ExactReal::quadratic(a, b, d, c);
        }
    }
    t.parse()
}

/// Finite prefix of the expansion of `x`.
#[derive(Debug, Clone)]
pub struct DigitSequence {
    kind: ExpansionKind,
    x: ExactReal,
    digits: Vec<u64>,
    remainders: Vec<Interval>,
    terminated: bool,
    precision_bits: u32,
}

impl PartialEq for DigitSequence {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.x == other.x
            && self.digits == other.digits
            && self.terminated == other.terminated
    }
}

impl DigitSequence {
    /// Wraps digits produced elsewhere (synthesized streams, files).
    pub fn from_digits(kind: ExpansionKind, x: ExactReal, digits: Vec<u64>, terminated: bool) -> Self {
        DigitSequence {
            kind,
            x,
            digits,
            remainders: Vec::new(),
            terminated,
            precision_bits: 0,
        }
    }

    pub fn kind(&self) -> &ExpansionKind {
        &self.kind
    }
    pub fn x(&self) -> &ExactReal {
        &self.x
    }
    pub fn digits(&self) -> &[u64] {
        &self.digits
    }
    pub fn len(&self) -> usize {
        self.digits.len()
    }
    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
    /// Enclosures of `r_0..r_n`; empty when not retained.
    pub fn remainders(&self) -> &[Interval] {
        &self.remainders
    }
    pub fn terminated(&self) -> bool {
        self.terminated
    }
    /// Largest working precision used.
    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn to_record(&self) -> DigitSequenceRecord {
        let dec_digits = ((self.precision_bits.max(64) as f64) * std::f64::consts::LOG10_2).ceil() as usize;
        DigitSequenceRecord {
            kind: KindRecord::from(&self.kind),
            x: self
                .x
                .enclose(self.precision_bits.max(64) + 8)
                .lo()
                .to_decimal(dec_digits),
            x_exact: Some(self.x.to_string()),
            digits: self.digits.clone(),
            terminated: self.terminated,
            precision_bits: self.precision_bits,
        }
    }

    pub fn from_record(rec: &DigitSequenceRecord) -> Result<Self> {
        let kind = ExpansionKind::try_from(&rec.kind)?;
        let x = match &rec.x_exact {
            Some(s) => parse_real(s)?,
            None => parse_real(&rec.x)?,
        };
        let mut seq = DigitSequence::from_digits(kind, x, rec.digits.clone(), rec.terminated);
        seq.precision_bits = rec.precision_bits;
        Ok(seq)
    }

    /// Enclosure of `f(d₁ + f(d₂ + … f(d_n + r_n)))` for m-ary, β and
    /// continued-fraction sequences with retained remainders.
    pub fn reconstruct(&self, prec: u32) -> Option<Interval> {
        let mut v = self.remainders.last()?.clone();
        let beta = match &self.kind {
            ExpansionKind::Beta { beta } => Some(beta.enclose(prec + 32)),
            _ => None,
        };
        for &d in self.digits.iter().rev() {
            let u = v.add_int(&BigInt::from(d), prec + 16);
            v = match &self.kind {
                ExpansionKind::MAry { m } => u.div(&Interval::from_int(*m), prec + 16)?,
                ExpansionKind::Beta { .. } => u.div(beta.as_ref()?, prec + 16)?,
                ExpansionKind::ContinuedFraction => u.recip(prec + 16)?,
                _ => return None,
            };
        }
        Some(v)
    }
}

/// JSON form of a [`DigitSequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitSequenceRecord {
    pub kind: KindRecord,
    pub x: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_exact: Option<String>,
    pub digits: Vec<u64>,
    pub terminated: bool,
    pub precision_bits: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct ExpandOptions {
    pub precision_bits: u32,
    pub keep_remainders: bool,
    /// Disable the exact fast path (testing the interval path).
    pub force_interval: bool,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            precision_bits: 128,
            keep_remainders: true,
            force_interval: false,
        }
    }
}

/// Expands `x ∈ [0,1)` to `n` digits with the default options at the
/// given precision.
pub fn expand(kind: &ExpansionKind, x: &ExactReal, n: usize, precision_bits: u32) -> Result<DigitSequence> {
    expand_with(
        kind,
        x,
        n,
        ExpandOptions {
            precision_bits,
            ..ExpandOptions::default()
        },
    )
}

pub fn expand_with(kind: &ExpansionKind, x: &ExactReal, n: usize, opts: ExpandOptions) -> Result<DigitSequence> {
    kind.validate()?;
    if x.cmp_int(0) == std::cmp::Ordering::Less || x.cmp_int(1) != std::cmp::Ordering::Less {
        return Err(Error::InvalidInput(format!("x = {x} is not in [0,1)")));
    }
    if opts.precision_bits < 8 {
        return Err(Error::InvalidInput("precision_bits must be at least 8".into()));
    }
    let prec0 = opts.precision_bits.min(MAX_PRECISION_BITS);
    let size_limit = (8 * prec0 as u64).max(8192);
    let mut digits = Vec::with_capacity(n);
    let mut remainders = Vec::new();
    let mut used_prec = prec0;

    // exact phase
    let mut current = x.clone();
    let exact_ok = !opts.force_interval && !matches!(kind, ExpansionKind::GenericF(_));
    if opts.keep_remainders {
        remainders.push(current.enclose(prec0));
    }
    while exact_ok && digits.len() < n {
        if current.is_zero() && matches!(kind, ExpansionKind::ContinuedFraction) {
            return Ok(finish(kind, x, digits, remainders, true, used_prec));
        }
        let next = match kind.exact_inverse(&current) {
            Some(v) if v.size_bits() <= size_limit => v,
            _ => break,
        };
        let d = next.floor();
        current = next.sub_int(&d);
        digits.push(
            d.to_u64()
                .ok_or_else(|| Error::InvalidInput(format!("digit {d} out of range")))?,
        );
        if opts.keep_remainders {
            remainders.push(current.enclose(prec0));
        }
    }
    if digits.len() == n {
        return Ok(finish(kind, x, digits, remainders, false, used_prec));
    }

    // interval phase, restarted from the last exact remainder
    let fmap = kind.fmap();
    let cap = fmap.max_precision().min(MAX_PRECISION_BITS);
    let start_step = digits.len();
    let mut prec = prec0.min(cap);
    loop {
        let mut r = current.enclose(prec);
        let mut local_digits = Vec::new();
        let mut local_rem = Vec::new();
        let mut failed_at = None;
        let mut terminated = false;
        while start_step + local_digits.len() < n {
            let step = start_step + local_digits.len() + 1;
            if r.lo().is_zero() && r.hi().is_zero() && fmap.monotonicity() == Monotonicity::Decreasing {
                terminated = true;
                break;
            }
            let y = match fmap.inverse_enclosure(&r, prec) {
                Some(y) => y,
                None => {
                    failed_at = Some(step);
                    break;
                }
            };
            let d = match y.certified_floor() {
                Some(d) => d,
                None => {
                    failed_at = Some(step);
                    break;
                }
            };
            r = y.add_int(&-d.clone(), prec);
            let digit = d
                .to_u64()
                .ok_or_else(|| Error::InvalidInput(format!("digit {d} out of range")))?;
            if digit < fmap.first_digit() || fmap.last_digit().is_some_and(|l| digit > l) {
                failed_at = Some(step);
                break;
            }
            local_digits.push(digit);
            if opts.keep_remainders {
                local_rem.push(r.clone());
            }
        }
        match failed_at {
            None => {
                used_prec = used_prec.max(prec);
                digits.extend(local_digits);
                remainders.extend(local_rem);
                return Ok(finish(kind, x, digits, remainders, terminated, used_prec));
            }
            Some(step) => {
                if prec >= cap {
                    return Err(Error::PrecisionExhausted { step, bits: prec });
                }
                prec = prec.saturating_mul(2).min(cap);
            }
        }
    }
}

fn finish(
    kind: &ExpansionKind,
    x: &ExactReal,
    digits: Vec<u64>,
    remainders: Vec<Interval>,
    terminated: bool,
    prec: u32,
) -> DigitSequence {
    DigitSequence {
        kind: kind.clone(),
        x: x.clone(),
        digits,
        remainders,
        terminated,
        precision_bits: prec,
    }
}

/// Occurrence statistics `R_i(j)` of a digit prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitStats {
    depth: usize,
    /// 1-based positions of each digit value.
    positions: BTreeMap<u64, Vec<u64>>,
    target: Option<FrequencyVector>,
    stabilization: BTreeMap<u64, u64>,
}

pub fn digit_stats(seq: &DigitSequence, target_eta: Option<&FrequencyVector>) -> DigitStats {
    DigitStats::from_digits(seq.digits(), target_eta)
}

impl DigitStats {
    pub fn from_digits(digits: &[u64], target_eta: Option<&FrequencyVector>) -> DigitStats {
        let mut positions: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for (k, &d) in digits.iter().enumerate() {
            positions.entry(d).or_default().push(k as u64 + 1);
        }
        let mut stats = DigitStats {
            depth: digits.len(),
            positions,
            target: target_eta.cloned(),
            stabilization: BTreeMap::new(),
        };
        if let Some(eta) = target_eta {
            let mut candidates: Vec<u64> = stats.positions.keys().copied().collect();
            if let Some(last) = eta.last_listed_digit() {
                candidates.extend(eta.first_digit()..=last);
            }
            candidates.sort_unstable();
            candidates.dedup();
            for i in candidates {
                let w = eta.weight(i);
                if w > 0.0 {
                    if let Some(n_i) = stats.stabilization_for(i, w) {
                        stats.stabilization.insert(i, n_i);
                    }
                }
            }
        }
        stats
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn target(&self) -> Option<&FrequencyVector> {
        self.target.as_ref()
    }

    /// Digit values that occur, in increasing order.
    pub fn digits_seen(&self) -> impl Iterator<Item = u64> + '_ {
        self.positions.keys().copied()
    }

    pub fn positions(&self, i: u64) -> &[u64] {
        self.positions.get(&i).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `R_i(j)`, with `j` clamped to the recorded depth.
    pub fn count(&self, i: u64, j: usize) -> u64 {
        let j = j.min(self.depth) as u64;
        self.positions(i).partition_point(|&p| p <= j) as u64
    }

    /// `R_i(1), …, R_i(n)`.
    pub fn count_sequence(&self, i: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.depth);
        let pos = self.positions(i);
        let mut c = 0usize;
        for j in 1..=self.depth as u64 {
            while c < pos.len() && pos[c] <= j {
                c += 1;
            }
            out.push(c as u64);
        }
        out
    }

    /// `R_i(j)/j`.
    pub fn frequency_at(&self, i: u64, j: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        self.count(i, j) as f64 / j.min(self.depth) as f64
    }

    pub fn frequency(&self, i: u64) -> f64 {
        self.frequency_at(i, self.depth)
    }

    pub fn frequencies(&self) -> BTreeMap<u64, f64> {
        self.positions
            .iter()
            .map(|(&i, p)| (i, p.len() as f64 / self.depth as f64))
            .collect()
    }

    /// Runs of `j ↦ R_i(j)` over `1..=upto`: `(value, multiplicity)` pairs
    /// in increasing value order, zero multiplicities omitted.
    pub fn count_runs(&self, i: u64, upto: usize) -> Vec<(u64, u64)> {
        let upto = upto.min(self.depth) as u64;
        let pos = self.positions(i);
        let mut runs = Vec::new();
        let mut start = 1u64;
        for (r, &p) in pos.iter().enumerate() {
            if p > upto {
                break;
            }
            if p > start {
                runs.push((r as u64, p - start));
            }
            start = p;
        }
        let r = pos.partition_point(|&p| p <= upto) as u64;
        if upto + 1 > start {
            runs.push((r, upto + 1 - start));
        }
        runs
    }

    /// Minimal `N ≥ 2` with `R_i(j) > j·η_i/2` for all recorded `j > N`,
    /// or `None` when the inequality fails at the last recorded index.
    pub fn stabilization_for(&self, i: u64, eta_i: f64) -> Option<u64> {
        let n = self.depth as u64;
        if n == 0 {
            return None;
        }
        let half = eta_i / 2.0;
        let pos = self.positions(i);
        // R_i is constant (= r) on [p_r, p_{r+1} − 1], p_0 = 1; the largest
        // failing j lies at the end of the last run containing a failure
        let mut last_fail = 0u64;
        for r in (0..=pos.len()).rev() {
            let start = if r == 0 { 1 } else { pos[r - 1] };
            let end = if r == pos.len() { n } else { pos[r] - 1 };
            if end < start {
                continue;
            }
            if (r as f64) <= end as f64 * half {
                last_fail = end;
                break;
            }
        }
        if last_fail >= n {
            return None;
        }
        Some(last_fail.max(2))
    }

    /// Stabilization index against the stored target.
    pub fn stabilization_index(&self, i: u64) -> Option<u64> {
        self.stabilization.get(&i).copied()
    }

    pub fn stabilization_indices(&self) -> &BTreeMap<u64, u64> {
        &self.stabilization
    }
}

/// Deterministic digit stream with frequencies converging to `eta` at rate
/// `O(1/n)`: each step emits the digit with the largest deficit
/// `k·η_i − R_i(k−1)`, lowest digit on ties. A nonzero `seed` starts the
/// window at a pseudo-random offset into the same stream, so different seeds
/// give distinct members of the same frequency class.
pub fn synthesize_quasinormal(alphabet: &[u64], eta: &FrequencyVector, n: usize, seed: u64) -> Result<Vec<u64>> {
    if alphabet.is_empty() {
        return Err(Error::InvalidInput("empty alphabet".into()));
    }
    let mut alpha = alphabet.to_vec();
    alpha.sort_unstable();
    alpha.dedup();
    let weights: Vec<f64> = alpha.iter().map(|&i| eta.weight(i)).collect();
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 * alpha.len() as f64 {
        return Err(Error::InvalidInput(format!(
            "frequency vector sums to {total} over the alphabet"
        )));
    }
    let offset = if seed == 0 {
        0
    } else {
        ChaCha8Rng::seed_from_u64(seed).gen_range(1..=1u64 << 16)
    };
    let mut counts = vec![0u64; alpha.len()];
    let mut out = Vec::with_capacity(n);
    for k in 1..=(offset + n as u64) {
        let kf = k as f64;
        let mut best = 0usize;
        let mut best_def = f64::NEG_INFINITY;
        for (idx, (&w, &c)) in weights.iter().zip(&counts).enumerate() {
            if w <= 0.0 {
                continue;
            }
            let def = kf * w - c as f64;
            if def > best_def + 1e-12 {
                best_def = def;
                best = idx;
            }
        }
        counts[best] += 1;
        if k > offset {
            out.push(alpha[best]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(s: &str) -> ExactReal {
        parse_real(s).unwrap()
    }

    #[test]
    fn binary_one_third() {
        let s = expand(&ExpansionKind::mary(2).unwrap(), &r("1/3"), 6, 64).unwrap();
        assert_eq!(s.digits(), &[0, 1, 0, 1, 0, 1]);
        assert!(!s.terminated());
    }

    #[test]
    fn cf_sqrt2() {
        let s = expand(&ExpansionKind::ContinuedFraction, &r("sqrt2-1"), 5, 64).unwrap();
        assert_eq!(s.digits(), &[2, 2, 2, 2, 2]);
    }

    #[test]
    fn golden_beta_half() {
        let s = expand(&ExpansionKind::golden_beta(), &r("1/2"), 6, 64).unwrap();
        assert_eq!(s.digits(), &[0, 1, 0, 0, 1, 0]);
        let rem: Vec<f64> = s.remainders().iter().map(|i| i.mid_f64()).collect();
        assert!((rem[1] - 0.809017).abs() < 1e-6);
        assert!((rem[2] - 0.309017).abs() < 1e-6);
        assert!((rem[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bolyai_renyi_sqrt2() {
        let s = expand(&ExpansionKind::bolyai_renyi(2).unwrap(), &r("sqrt2-1"), 4, 64).unwrap();
        assert_eq!(s.digits(), &[1, 0, 0, 0]);
    }

    #[test]
    fn cf_rational_terminates() {
        let s = expand(&ExpansionKind::ContinuedFraction, &r("3/7"), 10, 64).unwrap();
        assert_eq!(s.digits(), &[2, 3]);
        assert!(s.terminated());
        let z = expand(&ExpansionKind::ContinuedFraction, &r("0"), 5, 64).unwrap();
        assert!(z.digits().is_empty() && z.terminated());
    }

    #[test]
    fn rejects_out_of_range() {
        let k = ExpansionKind::mary(2).unwrap();
        assert!(matches!(expand(&k, &r("1"), 3, 64), Err(Error::InvalidInput(_))));
        assert!(matches!(expand(&k, &r("-1/2"), 3, 64), Err(Error::InvalidInput(_))));
        assert!(ExpansionKind::beta(r("2")).is_err());
        assert!(ExpansionKind::mary(1).is_err());
    }

    #[test]
    fn interval_path_matches_exact() {
        for (kind, x) in [
            (ExpansionKind::ContinuedFraction, "sqrt7"),
            (ExpansionKind::golden_beta(), "3/11"),
            (ExpansionKind::mary(3).unwrap(), "5/13"),
            (ExpansionKind::bolyai_renyi(3).unwrap(), "2/9"),
        ] {
            let x = if x == "sqrt7" { r("quad:-2,1,7,1") } else { r(x) };
            let a = expand(&kind, &x, 80, 64).unwrap();
            let b = expand_with(
                &kind,
                &x,
                80,
                ExpandOptions {
                    precision_bits: 32,
                    keep_remainders: true,
                    force_interval: true,
                },
            )
            .unwrap();
            assert_eq!(a.digits(), b.digits(), "{kind}");
            assert!(
                b.precision_bits() > 32,
                "precision should have doubled for {kind}: {}",
                b.precision_bits()
            );
        }
    }

    #[test]
    fn precision_exhaustion_reported() {
        let f = Arc::new(GenericLinear { m: 3.0 });
        let kind = ExpansionKind::GenericF(f);
        let err = expand(&kind, &r("1/7"), 200, 32).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted { .. }));
        let ok = expand(&kind, &r("1/7"), 10, 32).unwrap();
        assert_eq!(
            ok.digits(),
            expand(&ExpansionKind::mary(3).unwrap(), &r("1/7"), 10, 64)
                .unwrap()
                .digits()
        );
    }

    #[derive(Debug)]
    struct GenericLinear {
        m: f64,
    }

    impl FMap for GenericLinear {
        fn name(&self) -> String {
            "linear".into()
        }
        fn monotonicity(&self) -> Monotonicity {
            Monotonicity::Increasing
        }
        fn first_digit(&self) -> u64 {
            0
        }
        fn last_digit(&self) -> Option<u64> {
            Some(self.m as u64 - 1)
        }
        fn domain_end(&self) -> f64 {
            self.m
        }
        fn forward(&self, u: f64) -> f64 {
            u / self.m
        }
        fn inverse(&self, x: f64) -> f64 {
            x * self.m
        }
        fn inverse_derivative(&self, _x: f64) -> f64 {
            self.m
        }
    }

    #[test]
    fn reconstruction_encloses_x() {
        for (kind, x) in [
            (ExpansionKind::mary(2).unwrap(), r("1/3")),
            (ExpansionKind::golden_beta(), r("2/7")),
            (ExpansionKind::ContinuedFraction, r("sqrt2-1")),
        ] {
            let s = expand(&kind, &x, 30, 128).unwrap();
            let rec = s.reconstruct(160).unwrap();
            let xe = x.enclose(160);
            assert!(rec.lo() <= xe.hi() && xe.lo() <= rec.hi());
            assert!(rec.width_f64() < 1e-30);
        }
    }

    #[test]
    fn record_round_trip() {
        let s = expand(&ExpansionKind::golden_beta(), &r("1/2"), 6, 64).unwrap();
        let json = serde_json::to_string(&s.to_record()).unwrap();
        let back: DigitSequenceRecord = serde_json::from_str(&json).unwrap();
        let seq = DigitSequence::from_record(&back).unwrap();
        assert_eq!(seq.digits(), s.digits());
        assert_eq!(seq.kind(), s.kind());
        assert!(json.contains("\"type\":\"beta\""));
        assert!(back.x.starts_with("0.5"));
    }

    #[test]
    fn stats_examples() {
        let st = DigitStats::from_digits(&[0, 1, 0, 1], None);
        assert_eq!(st.count_sequence(0), vec![1, 1, 2, 2]);
        assert_eq!(st.frequency(0), 0.5);
        assert_eq!(st.frequency(1), 0.5);
        let st = DigitStats::from_digits(&[0, 1, 0, 0, 1, 0], None);
        assert!((st.frequency(0) - 2.0 / 3.0).abs() < 1e-15);
        let eta = FrequencyVector::gauss();
        let st = DigitStats::from_digits(&[1; 50], Some(&eta));
        assert_eq!(st.stabilization_index(1), Some(2));
    }

    #[test]
    fn count_runs_cover_prefix() {
        let st = DigitStats::from_digits(&[1, 0, 0, 1, 1, 0, 2], None);
        for i in 0..3 {
            let runs = st.count_runs(i, 7);
            let seq = st.count_sequence(i);
            let mut expanded = Vec::new();
            for (v, m) in runs {
                expanded.extend(std::iter::repeat(v).take(m as usize));
            }
            assert_eq!(expanded, seq);
        }
        assert_eq!(st.count_runs(0, 3), vec![(0, 1), (1, 1), (2, 1)]);
    }

    #[test]
    fn quasinormal_examples() {
        let half = FrequencyVector::finite(0, vec![0.5, 0.5]).unwrap();
        assert_eq!(synthesize_quasinormal(&[0, 1], &half, 4, 0).unwrap(), vec![0, 1, 0, 1]);
        let point = FrequencyVector::finite(0, vec![1.0, 0.0]).unwrap();
        assert_eq!(synthesize_quasinormal(&[0, 1], &point, 3, 5).unwrap(), vec![0, 0, 0]);
        let eta = FrequencyVector::finite(1, vec![0.5, 0.3, 0.2]).unwrap();
        let s = synthesize_quasinormal(&[1, 2, 3], &eta, 10, 0).unwrap();
        let c: Vec<usize> = (1..=3).map(|i| s.iter().filter(|&&d| d == i).count()).collect();
        assert_eq!(c, vec![5, 3, 2]);
        assert!(synthesize_quasinormal(&[0, 1], &FrequencyVector::uniform(0, 3), 4, 0).is_err());
    }

    fn stochastic() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, 2..6).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn quasinormal_error_bound(w in stochastic(), n in 1usize..2000, seed in 0u64..50) {
            let eta = FrequencyVector::finite_normalized(0, w.clone()).unwrap();
            let alpha: Vec<u64> = (0..w.len() as u64).collect();
            let s = synthesize_quasinormal(&alpha, &eta, n, seed).unwrap();
            let st = DigitStats::from_digits(&s, None);
            for (i, wi) in w.iter().enumerate() {
                let err = (st.frequency(i as u64) - wi).abs();
                prop_assert!(err <= w.len() as f64 / n as f64 + 1e-12);
            }
        }

        #[test]
        fn counts_sum_to_depth(d in prop::collection::vec(0u64..5, 1..200)) {
            let st = DigitStats::from_digits(&d, None);
            for j in 1..=d.len() {
                let total: u64 = (0..5).map(|i| st.count(i, j)).sum();
                prop_assert_eq!(total, j as u64);
            }
        }

        #[test]
        fn stabilization_matches_definition(d in prop::collection::vec(0u64..3, 3..120), e in 0.05f64..0.9) {
            let st = DigitStats::from_digits(&d, None);
            let seq = st.count_sequence(0);
            let n = d.len() as u64;
            let brute = (2..=n).find(|&nn| (nn + 1..=n).all(|j| seq[j as usize - 1] as f64 > j as f64 * e / 2.0));
            let brute = brute.filter(|&nn| nn < n || (seq[n as usize - 1] as f64) > n as f64 * e / 2.0);
            prop_assert_eq!(st.stabilization_for(0, e), brute);
        }

        #[test]
        fn mary_partial_sums(p in 0u64..1_000_000, q in 1_000_001u64..2_000_000, m in 2u64..7) {
            let x = ExactReal::rational(p.into(), q.into()).unwrap();
            let s = expand(&ExpansionKind::mary(m).unwrap(), &x, 12, 64).unwrap();
            let mut acc = 0f64;
            for (k, &d) in s.digits().iter().enumerate() {
                prop_assert!(d < m);
                acc += d as f64 * (m as f64).powi(-(k as i32 + 1));
            }
            let gap = p as f64 / q as f64 - acc;
            prop_assert!(gap >= -1e-12 && gap < (m as f64).powi(-12) + 1e-12);
        }

        #[test]
        fn expansion_deterministic(p in 1u64..1_000_000) {
            let x = ExactReal::rational(p.into(), 1_000_003u64.into()).unwrap();
            let a = expand(&ExpansionKind::golden_beta(), &x, 50, 64).unwrap();
            let b = expand(&ExpansionKind::golden_beta(), &x, 50, 64).unwrap();
            prop_assert_eq!(a.digits(), b.digits());
        }
    }
}
