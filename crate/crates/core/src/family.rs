//! Infinite contraction vectors `Ψ_i = (γ_i1, γ_i2, …)` and their series
//! `S_i(t) = Σ_j γ_ij^t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::DigitStats;

/// Value of `S(t)` with a certified bound on the omitted tail: the true sum
/// lies in `[value, value + tail_bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: u64,
}

/// Log-domain evaluation used by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSeries {
    /// `log` of the summed part.
    pub log_value: f64,
    /// `log` of the tail bound, `-∞` when the sum is exact.
    pub log_tail: f64,
    /// `d/dt log S(t)` of the summed part.
    pub dlog: f64,
    pub terms_used: u64,
}

impl LogSeries {
    /// Tail bound relative to the summed part.
    pub fn relative_tail(&self) -> f64 {
        (self.log_tail - self.log_value).exp()
    }
}

/// Behaviour of `Σ_j γ_ij^θ` at the abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbscissaCase {
    /// The series diverges at `θ`.
    C1,
    /// The series converges at `θ`.
    C2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Abscissa {
    pub theta: f64,
    pub case: Option<AbscissaCase>,
}

/// Formula for the digit-driven vectors built from `R_i(x, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum TildeScheme {
    /// `γ_ij = 2^{−1−R_i(j)}`.
    Simple,
    /// `γ_ij = η_i/N_i · 2^{−R_i(j)}`.
    PhiScaled { eta_i: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitDrivenFamily {
    digit: u64,
    scheme: TildeScheme,
    prefactor: f64,
    /// `(R value, multiplicity)` runs of `j ↦ R_i(j)` for `j ≤ depth`.
    runs: Vec<(u64, u64)>,
    depth: u64,
    last_count: u64,
    /// `R_i(j) > α·j` beyond the stabilization index.
    tail_rate: f64,
    stabilization: u64,
    /// The family is exactly its first `depth` terms (a truncation).
    finite: bool,
}

impl DigitDrivenFamily {
    pub fn digit(&self) -> u64 {
        self.digit
    }
    pub fn scheme(&self) -> TildeScheme {
        self.scheme
    }
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }
    pub fn depth(&self) -> u64 {
        self.depth
    }
    pub fn stabilization(&self) -> u64 {
        self.stabilization
    }
    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }
    pub fn runs(&self) -> &[(u64, u64)] {
        &self.runs
    }
    pub fn is_finite(&self) -> bool {
        self.finite
    }

    fn truncated(&self, m: u64) -> DigitDrivenFamily {
        let mut runs = Vec::new();
        let mut left = m;
        for &(v, mult) in &self.runs {
            if left == 0 {
                break;
            }
            let take = mult.min(left);
            runs.push((v, take));
            left -= take;
        }
        DigitDrivenFamily {
            runs,
            depth: m,
            last_count: 0,
            finite: true,
            ..self.clone()
        }
    }

    /// Log of the tail majorant `Σ_{j>n} (c·2^{−max(R_i(n), αj)})^t`.
    fn log_tail(&self, t: f64) -> f64 {
        if self.finite {
            return f64::NEG_INFINITY;
        }
        let ln2 = std::f64::consts::LN_2;
        let n = self.depth as f64;
        let alpha = self.tail_rate;
        let lp = t * self.prefactor.ln();
        // j in (n, J]: R_i(j) ≥ R_i(n) dominates
        let j_star = (self.last_count as f64 / alpha).floor().max(n);
        let flat = j_star - n;
        let mut parts = Vec::with_capacity(2);
        if flat > 0.0 {
            parts.push(lp + flat.ln() - t * ln2 * self.last_count as f64);
        }
        // j > J: geometric in q = 2^{−αt}
        let lq = -alpha * t * ln2;
        parts.push(lp + (j_star + 1.0) * lq - (-lq.exp_m1()).ln());
        log_sum_exp(&parts)
    }
}

/// Infinite positive contraction vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ContractionFamily {
    /// Finitely many ratios (all remaining ones are absent).
    Explicit(Vec<f64>),
    /// `γ_j = a·r^j`, `j ≥ 1`.
    Geometric {
        a: f64,
        r: f64,
    },
    DigitDriven(DigitDrivenFamily),
}

/// Config form of the closed-form families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FamilySpec {
    Explicit { gammas: Vec<f64> },
    Geometric { a: f64, r: f64 },
}

impl TryFrom<&FamilySpec> for ContractionFamily {
    type Error = Error;
    fn try_from(s: &FamilySpec) -> Result<Self> {
        match s {
            FamilySpec::Explicit { gammas } => ContractionFamily::explicit(gammas.clone()),
            FamilySpec::Geometric { a, r } => ContractionFamily::geometric(*a, *r),
        }
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Upper bound on `Σ_j γ_ij` for the `η/N`-scaled vectors:
/// `η + 2η/(1 − 2^{−η/2})`.
pub fn phi_scaled_sum_bound(eta_i: f64) -> f64 {
    eta_i + 2.0 * eta_i / (1.0 - (-eta_i / 2.0).exp2())
}

impl ContractionFamily {
    pub fn explicit(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::InvalidInput("explicit family needs at least one ratio".into()));
        }
        if gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return Err(Error::InvalidInput("explicit ratios must lie in (0,1)".into()));
        }
        Ok(ContractionFamily::Explicit(gammas))
    }

    pub fn geometric(a: f64, r: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidInput(format!(
                "geometric family needs a > 0, r in (0,1); got a={a}, r={r}"
            )));
        }
        if a * r >= 1.0 {
            return Err(Error::InvalidInput(format!("sup ratio a·r = {} is not below 1", a * r)));
        }
        Ok(ContractionFamily::Geometric { a, r })
    }

    /// `γ_j` (1-based), `None` past the represented range.
    pub fn gamma(&self, j: u64) -> Option<f64> {
        if j == 0 {
            return None;
        }
        match self {
            ContractionFamily::Explicit(g) => g.get(j as usize - 1).copied(),
            ContractionFamily::Geometric { a, r } => Some(a * r.powf(j as f64)),
            ContractionFamily::DigitDriven(f) => {
                let mut acc = 0u64;
                for &(v, m) in &f.runs {
                    acc += m;
                    if j <= acc {
                        return Some(f.prefactor * (-(v as f64)).exp2());
                    }
                }
                None
            }
        }
    }

    /// First `m` ratios (fewer for short explicit lists).
    pub fn gammas(&self, m: usize) -> Vec<f64> {
        match self {
            ContractionFamily::Explicit(g) => g.iter().take(m).copied().collect(),
            ContractionFamily::Geometric { a, r } => {
                let mut out = Vec::with_capacity(m);
                let mut v = a * r;
                for _ in 0..m {
                    out.push(v);
                    v *= r;
                }
                out
            }
            ContractionFamily::DigitDriven(f) => {
                let mut out = Vec::with_capacity(m);
                'outer: for &(v, mult) in &f.runs {
                    let g = f.prefactor * (-(v as f64)).exp2();
                    for _ in 0..mult {
                        if out.len() == m {
                            break 'outer;
                        }
                        out.push(g);
                    }
                }
                out
            }
        }
    }

    /// Number of represented terms, `None` for infinite families.
    pub fn len(&self) -> Option<usize> {
        match self {
            ContractionFamily::Explicit(g) => Some(g.len()),
            ContractionFamily::DigitDriven(f) if f.finite => Some(f.depth as usize),
            _ => None,
        }
    }

    pub fn is_single_term(&self) -> bool {
        self.len() == Some(1)
    }

    pub fn sup_gamma(&self) -> f64 {
        match self {
            ContractionFamily::Explicit(g) => g.iter().copied().fold(0.0, f64::max),
            ContractionFamily::Geometric { a, r } => a * r,
            ContractionFamily::DigitDriven(f) => f.prefactor * (-(f.runs.first().map_or(0, |r| r.0) as f64)).exp2(),
        }
    }

    pub fn abscissa(&self) -> Abscissa {
        let case = match self {
            ContractionFamily::Explicit(_) => AbscissaCase::C2,
            ContractionFamily::DigitDriven(f) if f.finite => AbscissaCase::C2,
            _ => AbscissaCase::C1,
        };
        Abscissa {
            theta: 0.0,
            case: Some(case),
        }
    }

    /// Family of the first `m` ratios (digit-driven families keep their
    /// run-length form).
    pub fn truncate(&self, m: usize) -> Result<ContractionFamily> {
        if m == 0 {
            return Err(Error::InvalidInput("truncation length must be positive".into()));
        }
        if let ContractionFamily::DigitDriven(f) = self {
            if m as u64 > f.depth {
                return Err(Error::InsufficientDepth(format!(
                    "truncation at {m} exceeds recorded depth {}",
                    f.depth
                )));
            }
            return Ok(ContractionFamily::DigitDriven(f.truncated(m as u64)));
        }
        Ok(ContractionFamily::Explicit(self.gammas(m)))
    }

    /// `log S(t)` with its tail and derivative.
    pub fn log_series(&self, t: f64) -> Result<LogSeries> {
        let theta = self.abscissa().theta;
        if !(t > theta) || !t.is_finite() {
            return Err(Error::Divergent { t, theta });
        }
        match self {
            ContractionFamily::Explicit(g) => {
                let logs: Vec<f64> = g.iter().map(|x| t * x.ln()).collect();
                let lv = log_sum_exp(&logs);
                let dlog = g.iter().zip(&logs).map(|(x, l)| (l - lv).exp() * x.ln()).sum();
                Ok(LogSeries {
                    log_value: lv,
                    log_tail: f64::NEG_INFINITY,
                    dlog,
                    terms_used: g.len() as u64,
                })
            }
            ContractionFamily::Geometric { a, r } => {
                // S = (ar)^t / (1 − r^t)
                let lr = r.ln();
                let rt = (t * lr).exp();
                let lv = t * (a * r).ln() - (-(t * lr).exp_m1()).ln();
                Ok(LogSeries {
                    log_value: lv,
                    log_tail: f64::NEG_INFINITY,
                    dlog: a.ln() + lr + rt * lr / (1.0 - rt),
                    terms_used: 0,
                })
            }
            ContractionFamily::DigitDriven(f) => {
                let ln2 = std::f64::consts::LN_2;
                let lp = f.prefactor.ln();
                let logs: Vec<f64> = f
                    .runs
                    .iter()
                    .map(|&(v, m)| (m as f64).ln() + t * (lp - v as f64 * ln2))
                    .collect();
                let lv = log_sum_exp(&logs);
                let dlog = f
                    .runs
                    .iter()
                    .zip(&logs)
                    .map(|(&(v, _), l)| (l - lv).exp() * (lp - v as f64 * ln2))
                    .sum();
                Ok(LogSeries {
                    log_value: lv,
                    log_tail: f.log_tail(t),
                    dlog,
                    terms_used: f.depth,
                })
            }
        }
    }

    /// `S(t) = Σ_j γ_j^t` with a tail bound at most `tol`.
    pub fn series_s(&self, t: f64, tol: f64) -> Result<SeriesValue> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        let ls = self.log_series(t)?;
        let tail = ls.log_tail.exp();
        if tail > tol {
            let digit = match self {
                ContractionFamily::DigitDriven(f) => f.digit,
                _ => 0,
            };
            return Err(Error::TailNotCertifiable {
                digit,
                t,
                bound: tail,
                tol,
            });
        }
        Ok(SeriesValue {
            value: ls.log_value.exp(),
            tail_bound: tail,
            terms_used: ls.terms_used,
        })
    }
}

/// Builds the digit-driven vector of digit `i` from occurrence counts.
///
/// The tail beyond the recorded depth is majorized through the stabilization
/// guarantee `R_i(j) > j·η_i/2`; `η_i` is the scheme's value for
/// [`TildeScheme::PhiScaled`] and otherwise the stats target (or the
/// empirical frequency when no target is attached).
pub fn build_tilde_family(stats: &DigitStats, digit: u64, scheme: TildeScheme) -> Result<ContractionFamily> {
    let n = stats.depth() as u64;
    if n == 0 {
        return Err(Error::InsufficientDepth("empty digit prefix".into()));
    }
    let eta_i = match scheme {
        TildeScheme::PhiScaled { eta_i } => eta_i,
        TildeScheme::Simple => match stats.target() {
            Some(t) => t.weight(digit),
            None => stats.frequency(digit),
        },
    };
    if !(eta_i > 0.0 && eta_i <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "frequency of digit {digit} must lie in (0,1], got {eta_i}"
        )));
    }
    let n_i = stats.stabilization_for(digit, eta_i).ok_or_else(|| {
        Error::InsufficientDepth(format!(
            "frequency of digit {digit} has not stabilized within {n} digits"
        ))
    })?;
    let prefactor = match scheme {
        TildeScheme::Simple => 0.5,
        TildeScheme::PhiScaled { eta_i } => eta_i / n_i as f64,
    };
    let fam = DigitDrivenFamily {
        digit,
        scheme,
        prefactor,
        runs: stats.count_runs(digit, n as usize),
        depth: n,
        last_count: stats.count(digit, n as usize),
        tail_rate: eta_i / 2.0,
        stabilization: n_i,
        finite: false,
    };
    if let TildeScheme::PhiScaled { .. } = scheme {
        let ls = ContractionFamily::DigitDriven(fam.clone()).log_series(1.0)?;
        let total = ls.log_value.exp() + ls.log_tail.exp();
        let bound = phi_scaled_sum_bound(eta_i);
        if total > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "digit {digit}: Σ γ = {total} exceeds the bound {bound}"
            )));
        }
    }
    Ok(ContractionFamily::DigitDriven(fam))
}
