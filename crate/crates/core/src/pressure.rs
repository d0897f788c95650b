//! The pressure function `P(t) = Σ_i η_i log Σ_j γ_ij^t`, its zero, and
//! the finite approximations built from it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::DigitStats;
use crate::family::{build_tilde_family, ContractionFamily, TildeScheme};
use crate::frequency::FrequencyVector;

/// Offset of the lower bracket end above the abscissa.
pub const BRACKET_EPS: f64 = 1e-6;
/// Bisection stops at this bracket width.
pub const BISECTION_WIDTH: f64 = 1e-12;
/// Upper bracket end is searched up to `2^MAX_DOUBLINGS`.
pub const MAX_DOUBLINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureValue {
    pub t: f64,
    pub value: f64,
    pub error_bound: f64,
}

/// Families for digits without an individual entry (countable mode).
#[derive(Debug, Clone, PartialEq)]
pub enum RestFamily {
    /// Every unlisted digit uses this family.
    Exact(ContractionFamily),
    /// Unlisted digits use unknown families with
    /// `S_lower(t) ≤ S_i(t) ≤ S_upper(t)`.
    Envelope {
        lower: ContractionFamily,
        upper: ContractionFamily,
    },
}

impl RestFamily {
    fn map(&self, f: impl Fn(&ContractionFamily) -> Result<ContractionFamily>) -> Result<RestFamily> {
        Ok(match self {
            RestFamily::Exact(g) => RestFamily::Exact(f(g)?),
            RestFamily::Envelope { lower, upper } => RestFamily::Envelope {
                lower: f(lower)?,
                upper: f(upper)?,
            },
        })
    }

    fn families(&self) -> Vec<&ContractionFamily> {
        match self {
            RestFamily::Exact(g) => vec![g],
            RestFamily::Envelope { lower, upper } => vec![lower, upper],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureProblem {
    families: BTreeMap<u64, ContractionFamily>,
    rest: Option<RestFamily>,
    eta: FrequencyVector,
    omega: Option<DigitStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub h: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Every family has a single term, so `h = 0` is forced.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderEntry {
    pub m: usize,
    pub h: f64,
    pub degenerate: bool,
}

/// Enclosure of a zero computed from lower and upper pressure bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ZeroBounds {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

struct Eval {
    value: f64,
    error: f64,
    derivative: f64,
}

impl PressureProblem {
    /// Families must cover every digit of positive frequency; zero-frequency
    /// digits are ignored.
    pub fn new(families: BTreeMap<u64, ContractionFamily>, eta: FrequencyVector) -> Result<Self> {
        eta.validate()?;
        let p = PressureProblem {
            families,
            rest: None,
            eta,
            omega: None,
        };
        if let Some(support) = p.eta.finite_support() {
            for (i, _) in support {
                if !p.families.contains_key(&i) {
                    return Err(Error::InvalidInput(format!("no contraction family for digit {i}")));
                }
            }
        }
        Ok(p)
    }

    /// Same family for every digit.
    pub fn uniform(family: ContractionFamily, eta: FrequencyVector) -> Result<Self> {
        eta.validate()?;
        Ok(PressureProblem {
            families: BTreeMap::new(),
            rest: Some(RestFamily::Exact(family)),
            eta,
            omega: None,
        })
    }

    pub fn with_rest(mut self, rest: RestFamily) -> Self {
        self.rest = Some(rest);
        self
    }

    /// Attaches a driving sequence `ω`.
    pub fn with_omega(mut self, digits: &[u64]) -> Self {
        self.omega = Some(DigitStats::from_digits(digits, None));
        self
    }

    pub fn eta(&self) -> &FrequencyVector {
        &self.eta
    }

    pub fn families(&self) -> &BTreeMap<u64, ContractionFamily> {
        &self.families
    }

    pub fn rest(&self) -> Option<&RestFamily> {
        self.rest.as_ref()
    }

    pub fn omega(&self) -> Option<&DigitStats> {
        self.omega.as_ref()
    }

    fn family_for(&self, i: u64) -> Result<&ContractionFamily> {
        if let Some(f) = self.families.get(&i) {
            return Ok(f);
        }
        match &self.rest {
            Some(RestFamily::Exact(f)) => Ok(f),
            Some(RestFamily::Envelope { .. }) => Err(Error::InvalidInput(format!(
                "digit {i} has only envelope bounds; exact family needed"
            ))),
            None => Err(Error::InvalidInput(format!("no contraction family for digit {i}"))),
        }
    }

    fn all_families(&self) -> impl Iterator<Item = &ContractionFamily> {
        self.families
            .values()
            .chain(self.rest.iter().flat_map(|r| r.families()))
    }

    /// `θ = max_i θ_i`.
    pub fn abscissa(&self) -> f64 {
        self.all_families().map(|f| f.abscissa().theta).fold(0.0, f64::max)
    }

    /// `sup_{i,j} γ_ij`.
    pub fn sup_gamma(&self) -> f64 {
        self.all_families().map(|f| f.sup_gamma()).fold(0.0, f64::max)
    }

    fn is_degenerate(&self) -> bool {
        self.all_families().all(|f| f.is_single_term())
    }

    /// Applies `f` to every family.
    pub fn map_families(&self, f: impl Fn(&ContractionFamily) -> Result<ContractionFamily>) -> Result<Self> {
        let families = self
            .families
            .iter()
            .map(|(k, g)| Ok((*k, f(g)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let rest = self.rest.as_ref().map(|r| r.map(&f)).transpose()?;
        Ok(PressureProblem {
            families,
            rest,
            eta: self.eta.clone(),
            omega: self.omega.clone(),
        })
    }

    /// Families truncated to their first `m` ratios.
    pub fn truncate(&self, m: usize) -> Result<Self> {
        self.map_families(|f| f.truncate(m))
    }

    /// Weighted log-series sum over a list of `(digit, weight)` pairs plus
    /// the unlisted mass `rest_mass`.
    fn weighted(&self, t: f64, weights: &[(u64, f64)], rest_mass: f64) -> Result<Eval> {
        let mut value = 0.0;
        let mut error = 0.0;
        let mut deriv = 0.0;
        let mut magnitude = 0.0;
        for &(i, w) in weights {
            if w <= 0.0 {
                continue;
            }
            let ls = self.family_for(i)?.log_series(t)?;
            let term = w * ls.log_value;
            value += term;
            magnitude += term.abs();
            error += w * ls.relative_tail().ln_1p();
            deriv += w * ls.dlog;
        }
        if rest_mass > 0.0 {
            match &self.rest {
                None => {
                    let last = self.families.keys().next_back().copied().unwrap_or(0);
                    return Err(Error::UnboundedLogBound(last));
                }
                Some(RestFamily::Exact(f)) => {
                    let ls = f.log_series(t)?;
                    value += rest_mass * ls.log_value;
                    magnitude += (rest_mass * ls.log_value).abs();
                    error += rest_mass * ls.relative_tail().ln_1p();
                    deriv += rest_mass * ls.dlog;
                }
                Some(RestFamily::Envelope { lower, upper }) => {
                    let lo = lower.log_series(t)?;
                    let hi = upper.log_series(t)?;
                    let (a, b) = (lo.log_value, hi.log_value + hi.relative_tail().ln_1p());
                    let mid = 0.5 * (a + b);
                    value += rest_mass * mid;
                    magnitude += (rest_mass * mid).abs();
                    error += rest_mass * 0.5 * (b - a).abs();
                    deriv += rest_mass * 0.5 * (lo.dlog + hi.dlog);
                }
            }
        }
        error += 8.0 * f64::EPSILON * (magnitude + 1.0) * (weights.len() as f64 + 1.0).sqrt();
        Ok(Eval {
            value,
            error,
            derivative: deriv,
        })
    }

    fn eta_weights(&self) -> (Vec<(u64, f64)>, f64) {
        match self.eta.finite_support() {
            Some(s) => (s, 0.0),
            None => {
                let listed: Vec<(u64, f64)> = self
                    .families
                    .keys()
                    .map(|&i| (i, self.eta.weight(i)))
                    .filter(|(_, w)| *w > 0.0)
                    .collect();
                let mass: f64 = listed.iter().map(|(_, w)| w).sum();
                (listed, (1.0 - mass).max(0.0))
            }
        }
    }

    fn eval(&self, t: f64) -> Result<Eval> {
        let theta = self.abscissa();
        if !(t > theta) {
            return Err(Error::Divergent { t, theta });
        }
        let (weights, rest) = self.eta_weights();
        self.weighted(t, &weights, rest)
    }

    /// `P(t)` with an error bound, failing when the bound exceeds `tol`.
    pub fn pressure(&self, t: f64, tol: f64) -> Result<PressureValue> {
        let e = self.eval(t)?;
        if e.error > tol {
            return Err(self.tail_error(t, e.error, tol));
        }
        Ok(PressureValue {
            t,
            value: e.value,
            error_bound: e.error,
        })
    }

    /// `P′(t)` of the summed parts.
    pub fn pressure_derivative(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.derivative)
    }

    /// Pressure over a grid of `t` values, in parallel.
    pub fn pressure_grid(&self, ts: &[f64], tol: f64) -> Result<Vec<PressureValue>> {
        ts.par_iter().map(|&t| self.pressure(t, tol)).collect()
    }

    fn tail_error(&self, t: f64, bound: f64, tol: f64) -> Error {
        let digit = self
            .families
            .iter()
            .filter_map(|(i, f)| match f {
                ContractionFamily::DigitDriven(_) => f.log_series(t).ok().map(|ls| (*i, ls.relative_tail())),
                _ => None,
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |(i, _)| i);
        Error::TailNotCertifiable { digit, t, bound, tol }
    }

    /// Lower and upper bracket ends `t_low < h < t_high`, or the degenerate
    /// marker `None` when `P(t_low) ≤ 0` for single-term families.
    fn bracket(&self, tol: f64) -> Result<Option<(f64, f64, usize)>> {
        let theta = self.abscissa();
        let mut evals = 0usize;
        let mut t_low = theta + BRACKET_EPS;
        // a short digit-driven prefix may not certify its tail near θ
        let p_low = loop {
            evals += 1;
            match self.pressure(t_low, tol) {
                Ok(p) => break p,
                Err(Error::TailNotCertifiable { .. }) if t_low < 1.0 => t_low *= 2.0,
                Err(e) => return Err(e),
            }
        };
        if p_low.value <= 0.0 {
            if self.is_degenerate() {
                return Ok(None);
            }
            return Err(Error::NoZero(format!(
                "P({t_low}) = {} ≤ 0 at the lower bracket end",
                p_low.value
            )));
        }
        let mut t_high = (2.0 * t_low).max(1.0);
        for _ in 0..=MAX_DOUBLINGS {
            evals += 1;
            if self.pressure(t_high, tol)?.value < 0.0 {
                return Ok(Some((t_low, t_high, evals)));
            }
            t_high *= 2.0;
        }
        Err(Error::NoZero(format!("P(t) ≥ 0 up to t = {}", t_high / 2.0)))
    }

    /// Unique zero of `P`.
    pub fn solve_h(&self, tol: f64) -> Result<Solution> {
        let Some((lo, hi, evals)) = self.bracket(tol)? else {
            return Ok(Solution {
                h: 0.0,
                iterations: 0,
                residual: 0.0,
                degenerate: true,
            });
        };
        let (mut lo, mut hi) = (lo, hi);
        let mut iterations = evals;
        while hi - lo > BISECTION_WIDTH {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            iterations += 1;
            if self.pressure(mid, tol)?.value > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut h = lo + 0.5 * (hi - lo);
        let e = self.eval(h)?;
        let mut residual = e.value.abs();
        if e.derivative < 0.0 {
            let cand = h - e.value / e.derivative;
            if cand > lo && cand < hi {
                iterations += 1;
                let r = self.eval(cand)?.value.abs();
                if r < residual {
                    h = cand;
                    residual = r;
                }
            }
        }
        Ok(Solution {
            h,
            iterations,
            residual,
            degenerate: false,
        })
    }

    /// Zero of the truncation `P_M`.
    pub fn solve_h_m(&self, m: usize, tol: f64) -> Result<Solution> {
        self.truncate(m)?.solve_h(tol)
    }

    /// `h_M` for each `M`, bisected inside the bracket of the full problem
    /// so that the sequence is non-decreasing exactly.
    pub fn ladder(&self, ms: &[usize], tol: f64) -> Result<Vec<LadderEntry>> {
        let bracket = self.bracket(tol)?;
        ms.par_iter()
            .map(|&m| {
                let pm = self.truncate(m)?;
                if pm.is_degenerate() {
                    return Ok(LadderEntry {
                        m,
                        h: 0.0,
                        degenerate: true,
                    });
                }
                let Some((lo0, hi0, _)) = bracket else {
                    return Ok(LadderEntry {
                        m,
                        h: 0.0,
                        degenerate: true,
                    });
                };
                let (mut lo, mut hi) = (lo0, hi0);
                if pm.pressure(lo, tol)?.value <= 0.0 {
                    return Err(Error::NoZero(format!("P_{m} ≤ 0 at t = {lo}")));
                }
                while hi - lo > BISECTION_WIDTH {
                    let mid = lo + 0.5 * (hi - lo);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if pm.pressure(mid, tol)?.value > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(LadderEntry {
                    m,
                    h: lo + 0.5 * (hi - lo),
                    degenerate: false,
                })
            })
            .collect()
    }

    /// Zero enclosure from the pressure bounds `value ± error`.
    pub fn solve_h_bounds(&self, tol: f64) -> Result<ZeroBounds> {
        let Some((lo0, hi0, _)) = self.bracket(tol)? else {
            return Ok(ZeroBounds { lower: 0.0, upper: 0.0 });
        };
        let zero_of = |sign: f64| -> Result<f64> {
            let (mut lo, mut hi) = (lo0, hi0);
            while hi - lo > BISECTION_WIDTH {
                let mid = lo + 0.5 * (hi - lo);
                if mid <= lo || mid >= hi {
                    break;
                }
                let p = self.pressure(mid, tol)?;
                if p.value + sign * p.error_bound > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(if sign < 0.0 { lo } else { hi })
        };
        Ok(ZeroBounds {
            lower: zero_of(-1.0)?,
            upper: zero_of(1.0)?,
        })
    }

    fn omega_weights(&self, k: usize) -> Result<Vec<(u64, f64)>> {
        let omega = self
            .omega
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("problem has no driving sequence".into()))?;
        if k == 0 || k > omega.depth() {
            return Err(Error::InsufficientDepth(format!(
                "driving sequence has {} digits, need {k}",
                omega.depth()
            )));
        }
        Ok(omega
            .digits_seen()
            .map(|i| (i, omega.count(i, k) as f64))
            .filter(|(_, c)| *c > 0.0)
            .collect())
    }

    /// `c_k(t) = Σ_i (‖ω|_k‖_i / k) log S_i(t)`.
    pub fn truncated_c_k(&self, t: f64, k: usize) -> Result<PressureValue> {
        let theta = self.abscissa();
        if !(t > theta) {
            return Err(Error::Divergent { t, theta });
        }
        let w: Vec<(u64, f64)> = self
            .omega_weights(k)?
            .into_iter()
            .map(|(i, c)| (i, c / k as f64))
            .collect();
        let e = self.weighted(t, &w, 0.0)?;
        Ok(PressureValue {
            t,
            value: e.value,
            error_bound: e.error,
        })
    }

    /// `log Σ_{σ∈D_n} c_σ^t = Σ_i ‖ω|_n‖_i log S_i(t)`.
    pub fn log_covering_sum(&self, t: f64, n: usize) -> Result<PressureValue> {
        let theta = self.abscissa();
        if !(t > theta) {
            return Err(Error::Divergent { t, theta });
        }
        let w = self.omega_weights(n)?;
        let e = self.weighted(t, &w, 0.0)?;
        Ok(PressureValue {
            t,
            value: e.value,
            error_bound: e.error,
        })
    }

    /// `Σ_{σ∈D_n} c_σ^t`, evaluated as a product over digit counts.
    pub fn covering_sum(&self, t: f64, n: usize) -> Result<f64> {
        Ok(self.log_covering_sum(t, n)?.value.exp())
    }
}

fn delta_problem(stats: &DigitStats, eta_phi: &FrequencyVector, k: usize, n: Option<usize>) -> Result<PressureProblem> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if let Some(n) = n {
        if n == 0 || n > stats.depth() {
            return Err(Error::InsufficientDepth(format!(
                "need {n} digits, stats cover {}",
                stats.depth()
            )));
        }
    }
    let first = eta_phi.first_digit();
    let digits: Vec<u64> = (first..first + k as u64).collect();
    let weights: Vec<f64> = digits.iter().map(|&i| eta_phi.weight(i)).collect();
    let mut families = BTreeMap::new();
    for (&i, &w) in digits.iter().zip(&weights) {
        if w <= 0.0 {
            continue;
        }
        let fam = build_tilde_family(stats, i, TildeScheme::PhiScaled { eta_i: w })?;
        let fam = match n {
            Some(n) => fam.truncate(n)?,
            None => fam,
        };
        families.insert(i, fam);
    }
    // the zero is unchanged by rescaling η over i ≤ k
    let eta = FrequencyVector::finite_normalized(first, weights)?;
    PressureProblem::new(families, eta)
}

/// `δ(x; k, n)`: zero of `Σ_{i≤k} η_i log Σ_{j≤n} (η_i/N_i · 2^{−R_i(j)})^t`,
/// where `i ≤ k` ranges over the first `k` digits of `eta_phi` and `N_i`
/// comes from the whole recorded prefix.
pub fn solve_delta_kn(stats: &DigitStats, eta_phi: &FrequencyVector, k: usize, n: usize, tol: f64) -> Result<Solution> {
    delta_problem(stats, eta_phi, k, Some(n))?.solve_h(tol)
}

/// Enclosure of `δ(x; k, ∞)` using the certified tails of the full
/// digit-driven series.
pub fn solve_delta_k(stats: &DigitStats, eta_phi: &FrequencyVector, k: usize, tol: f64) -> Result<ZeroBounds> {
    delta_problem(stats, eta_phi, k, None)?.solve_h_bounds(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::CountableLaw;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geo(r: f64) -> ContractionFamily {
        ContractionFamily::geometric(1.0, r).unwrap()
    }

    fn two(f0: ContractionFamily, f1: ContractionFamily, eta: Vec<f64>) -> PressureProblem {
        PressureProblem::new(
            BTreeMap::from([(0, f0), (1, f1)]),
            FrequencyVector::finite(0, eta).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn pressure_examples() {
        let p = two(geo(1.0 / 3.0), geo(1.0 / 3.0), vec![0.5, 0.5]);
        let h = 2f64.ln() / 3f64.ln();
        assert!(p.pressure(h, 1e-12).unwrap().value.abs() < 1e-14);
        let p = two(geo(0.25), geo(1.0 / 9.0), vec![0.5, 0.5]);
        let v = p.pressure(1.0, 1e-12).unwrap().value;
        assert_relative_eq!(
            v,
            0.5 * (1.0f64 / 3.0).ln() + 0.5 * (0.125f64).ln(),
            max_relative = 1e-14
        );
        assert!((v + 1.589).abs() < 1e-3);
        let single = PressureProblem::new(
            BTreeMap::from([(0, ContractionFamily::explicit(vec![0.25, 0.25]).unwrap())]),
            FrequencyVector::finite(0, vec![1.0]).unwrap(),
        )
        .unwrap();
        assert!(single.pressure(0.5, 1e-12).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn solve_examples() {
        let p = two(geo(1.0 / 3.0), geo(1.0 / 3.0), vec![0.3, 0.7]);
        assert!((p.solve_h(1e-12).unwrap().h - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        let p = two(geo(0.25), geo(1.0 / 9.0), vec![0.5, 0.5]);
        let h = p.solve_h(1e-12).unwrap().h;
        // S_1 S_2 = 1 ⇔ 4^{−h} + 9^{−h} = 1 after simplification
        assert!((4f64.powf(-h) + 9f64.powf(-h) - 1.0).abs() < 1e-10);
        assert!((h - 0.394).abs() < 1e-3);
        let single = PressureProblem::new(
            BTreeMap::from([(0, ContractionFamily::explicit(vec![0.25, 0.25]).unwrap())]),
            FrequencyVector::finite(0, vec![1.0]).unwrap(),
        )
        .unwrap();
        assert!((single.solve_h(1e-12).unwrap().h - 0.5).abs() < 1e-12);
    }

    #[test]
    fn divergent_and_no_zero() {
        let p = two(geo(0.5), geo(0.5), vec![0.5, 0.5]);
        assert!(matches!(p.pressure(0.0, 1e-9), Err(Error::Divergent { .. })));
        let tiny = PressureProblem::new(
            BTreeMap::from([(0, ContractionFamily::explicit(vec![0.1, 0.1]).unwrap())]),
            FrequencyVector::finite(0, vec![1.0]).unwrap(),
        )
        .unwrap();
        // Σ = 2·0.1^t > 0 near 0, zero at log 2 / log 10
        assert!((tiny.solve_h(1e-12).unwrap().h - 2f64.ln() / 10f64.ln()).abs() < 1e-12);
        // single symbol with one ratio: degenerate
        let deg = PressureProblem::new(
            BTreeMap::from([(0, ContractionFamily::explicit(vec![0.5]).unwrap())]),
            FrequencyVector::finite(0, vec![1.0]).unwrap(),
        )
        .unwrap();
        let s = deg.solve_h(1e-12).unwrap();
        assert!(s.degenerate && s.h == 0.0);
    }

    #[test]
    fn missing_family_rejected() {
        let r = PressureProblem::new(
            BTreeMap::from([(0, geo(0.5))]),
            FrequencyVector::finite(0, vec![0.5, 0.5]).unwrap(),
        );
        assert!(r.is_err());
        // zero-frequency padding needs no family
        let r = PressureProblem::new(
            BTreeMap::from([(0, geo(0.5))]),
            FrequencyVector::finite(0, vec![1.0, 0.0]).unwrap(),
        );
        assert!(r.is_ok());
    }

    #[test]
    fn ladder_examples() {
        let p = two(geo(1.0 / 3.0), geo(1.0 / 3.0), vec![0.5, 0.5]);
        let l = p.ladder(&[1, 2, 4, 8, 16, 64], 1e-12).unwrap();
        assert!(l[0].degenerate && l[0].h == 0.0);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((l[1].h - golden.ln() / 3f64.ln()).abs() < 1e-11);
        for w in l.windows(2) {
            assert!(w[0].h <= w[1].h);
        }
        let h = p.solve_h(1e-12).unwrap().h;
        assert!(h - l[5].h < 1e-6);
        let direct = p.solve_h_m(2, 1e-12).unwrap().h;
        assert!((direct - l[1].h).abs() < 1e-11);
    }

    #[test]
    fn c_k_and_covering() {
        let fa = geo(0.25);
        let fb = geo(1.0 / 9.0);
        let p = two(fa.clone(), fb.clone(), vec![0.5, 0.5]).with_omega(&[0, 0, 1]);
        let t = 0.7;
        let la = fa.log_series(t).unwrap().log_value;
        let lb = fb.log_series(t).unwrap().log_value;
        let c3 = p.truncated_c_k(t, 3).unwrap().value;
        assert_relative_eq!(c3, 2.0 / 3.0 * la + 1.0 / 3.0 * lb, max_relative = 1e-14);
        let cs = p.covering_sum(t, 2).unwrap();
        assert_relative_eq!(cs, (2.0 * la).exp(), max_relative = 1e-13);
        let alt: Vec<u64> = (0..100).map(|k| k % 2).collect();
        let p = two(fa, fb, vec![0.5, 0.5]).with_omega(&alt);
        let h = p.solve_h(1e-12).unwrap().h;
        for n in [2, 10, 100] {
            assert!((p.covering_sum(h, n).unwrap() - 1.0).abs() < 1e-8);
        }
        assert!(p.covering_sum(h, 101).is_err());
    }

    #[test]
    fn countable_mode() {
        let eta = FrequencyVector::gauss();
        let same = PressureProblem::uniform(geo(1.0 / 3.0), eta.clone()).unwrap();
        assert!((same.solve_h(1e-12).unwrap().h - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        let listed = PressureProblem::new(BTreeMap::from([(1, geo(0.25)), (2, geo(0.2))]), eta.clone()).unwrap();
        assert!(matches!(listed.pressure(1.0, 1e-9), Err(Error::UnboundedLogBound(_))));
        let env = listed.clone().with_rest(RestFamily::Envelope {
            lower: geo(0.1),
            upper: geo(0.3),
        });
        let pv = env.pressure(1.0, 1.0).unwrap();
        assert!(pv.error_bound > 0.0);
        assert!(matches!(env.pressure(1.0, 1e-6), Err(Error::TailNotCertifiable { .. })));
        let geo_eta = FrequencyVector::countable(CountableLaw::Geometric {
            first_digit: 1,
            ratio: 0.5,
        })
        .unwrap();
        let mut fams = BTreeMap::new();
        for i in 1..=60 {
            fams.insert(i, geo(1.0 / (i as f64 + 2.0)));
        }
        let p = PressureProblem::new(fams, geo_eta)
            .unwrap()
            .with_rest(RestFamily::Envelope {
                lower: geo(1e-3),
                upper: geo(1.0 / 62.0),
            });
        let s = p.solve_h(1e-9).unwrap();
        let b = p.solve_h_bounds(1e-9).unwrap();
        assert!(b.lower <= s.h && s.h <= b.upper && b.upper - b.lower < 1e-9);
    }

    #[test]
    fn delta_examples() {
        let eta = FrequencyVector::gauss();
        let ones = vec![1u64; 500];
        let st = DigitStats::from_digits(&ones, Some(&eta));
        let e1 = crate::frequency::gauss_weight(1);
        let d = solve_delta_kn(&st, &eta, 1, 3, 1e-12).unwrap().h;
        let c = e1 / 2.0;
        let f = |t: f64| c.powf(t) * (2f64.powf(-t) + 4f64.powf(-t) + 8f64.powf(-t)) - 1.0;
        assert!(f(d).abs() < 1e-10);
        let single = solve_delta_kn(&st, &eta, 1, 1, 1e-12).unwrap();
        assert!(single.degenerate && single.h == 0.0);
        let mut prev = 0.0;
        for n in [2, 4, 8, 16, 32] {
            let d = solve_delta_kn(&st, &eta, 1, n, 1e-12).unwrap().h;
            assert!(d >= prev);
            prev = d;
        }
    }

    fn config() -> impl Strategy<Value = PressureProblem> {
        (prop::collection::vec((0.2f64..1.5, 0.05f64..0.6, 0.05f64..1.0), 1..5)).prop_map(|v| {
            let total: f64 = v.iter().map(|x| x.2).sum();
            let mut fams = BTreeMap::new();
            let mut w = Vec::new();
            for (i, (a, r, e)) in v.iter().enumerate() {
                let a = a.min(0.95 / r);
                fams.insert(i as u64, ContractionFamily::geometric(a, *r).unwrap());
                w.push(e / total);
            }
            PressureProblem::new(fams, FrequencyVector::finite_normalized(0, w).unwrap()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pressure_shape(p in config(), t in 0.05f64..4.0, dt in 0.01f64..1.0) {
            let a = p.pressure(t, 1e-9).unwrap();
            let b = p.pressure(t + dt, 1e-9).unwrap();
            let c = p.pressure(t + 2.0 * dt, 1e-9).unwrap();
            prop_assert!(b.value < a.value);
            prop_assert!(b.value <= 0.5 * (a.value + c.value) + a.error_bound + b.error_bound + c.error_bound);
            // P(t+δ) ≤ P(t) + δ log sup γ
            prop_assert!(b.value <= a.value + dt * p.sup_gamma().ln() + 1e-12);
        }

        #[test]
        fn zero_and_ladder(p in config()) {
            let s = p.solve_h(1e-12).unwrap();
            prop_assert!(s.residual <= 1e-10);
            let l = p.ladder(&[2, 4, 8, 16, 32, 64], 1e-12).unwrap();
            for w in l.windows(2) {
                prop_assert!(w[0].h <= w[1].h);
            }
            prop_assert!(l.last().unwrap().h <= s.h + 1e-12);
        }

        #[test]
        fn padding_and_permutation_invariance(p in config()) {
            let h = p.solve_h(1e-12).unwrap().h;
            let fams = p.families().clone();
            let n = fams.len() as u64;
            let w: Vec<f64> = (0..n).map(|i| p.eta().weight(i)).collect();
            // reverse digit labels
            let rev: BTreeMap<u64, ContractionFamily> = fams.iter().map(|(i, f)| (n - 1 - i, f.clone())).collect();
            let rw: Vec<f64> = w.iter().rev().copied().collect();
            let q = PressureProblem::new(rev, FrequencyVector::finite(0, rw).unwrap()).unwrap();
            prop_assert!((q.solve_h(1e-12).unwrap().h - h).abs() < 1e-11);
            // pad with a zero-frequency symbol
            let mut pw = w.clone();
            pw.push(0.0);
            let q = PressureProblem::new(fams, FrequencyVector::finite(0, pw).unwrap()).unwrap();
            prop_assert!((q.solve_h(1e-12).unwrap().h - h).abs() < 1e-11);
        }
    }
}
