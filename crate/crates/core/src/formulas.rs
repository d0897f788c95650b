//! Closed-form dimension formulas and the dimension map `Δ(η)`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{CountableLaw, FrequencyVector};
use crate::numeric::ExactReal;
use crate::pressure::PressureProblem;

/// Continued-fraction depth of the Monte Carlo samples.
pub const KP_DEPTH: usize = 40;
/// Independent RNG streams of the Monte Carlo estimator.
pub const KP_SHARDS: u64 = 64;

fn entropy_finite(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// `−Σ p_j log p_j / log m` for digit frequencies over `{0, …, m−1}`.
pub fn dim_f_mary(m: u64, p: &FrequencyVector) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidInput(format!("base {m} < 2")));
    }
    let w = finite_over(p, m - 1)?;
    Ok(entropy_finite(&w) / (m as f64).ln())
}

/// `−Σ p_i log p_i / (log β − p_{⌊β⌋} log{β})` for `p` over `{0, …, ⌊β⌋}`.
pub fn dim_f_beta(beta: &ExactReal, p: &FrequencyVector) -> Result<f64> {
    crate::expansion::ExpansionKind::beta(beta.clone())?;
    let top = beta
        .floor()
        .to_u64()
        .ok_or_else(|| Error::InvalidInput("beta too large".into()))?;
    let w = finite_over(p, top)?;
    let b = beta.to_f64();
    let frac = beta.fract().to_f64();
    let den = b.ln() - w[top as usize] * frac.ln();
    Ok(entropy_finite(&w) / den)
}

/// Weights of a finite vector on `{0, …, last}`.
fn finite_over(p: &FrequencyVector, last: u64) -> Result<Vec<f64>> {
    p.validate()?;
    let Some(listed) = p.last_listed_digit().filter(|_| p.is_finite()) else {
        return Err(Error::InvalidInput("finite frequency vector required".into()));
    };
    if listed > last && (last + 1..=listed).any(|i| p.weight(i) > 0.0) {
        return Err(Error::InvalidInput(format!(
            "frequency vector has mass beyond digit {last}"
        )));
    }
    Ok((0..=last).map(|i| p.weight(i)).collect())
}

/// Monte Carlo estimate with a `±3σ` interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub numerator: f64,
    /// Estimate of `E|log X|`.
    pub mean_abs_log: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Inverse-CDF digit sampler: the least `k` with `P(D > k) ≤ v`.
fn sample_digit(eta: &FrequencyVector, v: f64) -> u64 {
    let first = eta.first_digit();
    match eta {
        FrequencyVector::Countable {
            law: CountableLaw::Geometric { ratio, .. },
        } => {
            // P(D > k) = q^{k − first + 1}
            let j = (v.ln() / ratio.ln()).ceil().max(1.0);
            first + j as u64 - 1
        }
        FrequencyVector::Countable {
            law: CountableLaw::Truncated { weights, .. },
        } => {
            // unlisted mass is assigned to the first unlisted digit
            let k = (first..first + weights.len() as u64).find(|&k| eta.tail_beyond(k) <= v);
            k.unwrap_or(first + weights.len() as u64)
        }
        _ => {
            let mut k = first;
            let mut step = 1u64;
            while eta.tail_beyond(k) > v {
                k += step;
                step = step.saturating_mul(2);
                if k > 1 << 60 {
                    return k;
                }
            }
            let mut lo = k.saturating_sub(step / 2).max(first);
            let mut hi = k;
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if eta.tail_beyond(mid) > v {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    }
}

fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `|log X|` for `X = [d₁, …, d_n]` via exact convergents.
fn abs_log_cf(digits: &[u64]) -> f64 {
    // p_n/q_n with p_{-1}=1, q_{-1}=0, p_0=0, q_0=1
    let (mut p0, mut q0) = (BigUint::one(), BigUint::zero());
    let (mut p1, mut q1) = (BigUint::zero(), BigUint::one());
    for &d in digits {
        let p2 = &p1 * d + &p0;
        let q2 = &q1 * d + &q0;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
    }
    ln_big(&q1) - ln_big(&p1)
}

/// Kinney–Pitcher dimension `−Σ η_i log η_i / (2 E|log X|)` of the measure
/// making continued-fraction digits i.i.d. with law `eta`.
pub fn dim_nu_eta_cf(eta: &FrequencyVector, samples: usize, seed: u64) -> Result<McEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidInput("at least 1000 samples required".into()));
    }
    eta.validate()?;
    if eta.first_digit() == 0 {
        return Err(Error::InvalidInput("continued-fraction digits start at 1".into()));
    }
    let (numerator, tail) = eta.entropy()?;
    if !numerator.is_finite() || tail > 1e-3 * numerator.max(1e-300) && tail > 1e-9 {
        return Err(Error::EntropyDiverges(format!("entropy tail bound {tail:e} not small")));
    }
    if numerator == 0.0 {
        return Ok(McEstimate {
            value: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            numerator,
            mean_abs_log: f64::NAN,
            std_error: 0.0,
            samples,
        });
    }
    let shards: Vec<(f64, f64)> = (0..KP_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = samples / KP_SHARDS as usize + usize::from((shard as usize) < samples % KP_SHARDS as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let mut digits = [0u64; KP_DEPTH];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for d in digits.iter_mut() {
                    let v: f64 = 1.0 - rng.gen::<f64>();
                    *d = sample_digit(eta, v);
                }
                let l = abs_log_cf(&digits);
                s += l;
                s2 += l * l;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = shards.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    let value = numerator / (2.0 * mean);
    let lo_mean = mean + 3.0 * se;
    let hi_mean = (mean - 3.0 * se).max(f64::MIN_POSITIVE);
    Ok(McEstimate {
        value,
        ci_low: numerator / (2.0 * lo_mean),
        ci_high: numerator / (2.0 * hi_mean),
        numerator,
        mean_abs_log: mean,
        std_error: se,
        samples,
    })
}

/// `Δ(η)`: the zero of `Σ_i η_i log S_i(t)`.
pub fn delta_eta(problem: &PressureProblem, tol: f64) -> Result<f64> {
    Ok(problem.solve_h(tol)?.h)
}

/// Gradient of `Δ` by implicit differentiation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaGradient {
    pub h: f64,
    pub digits: Vec<u64>,
    /// `∂Δ/∂η_i = −log S_i(h) / Σ_k η_k S_k′(h)/S_k(h)`.
    pub ambient: Vec<f64>,
    /// Projection onto `{v : Σ v_i = 0}`.
    pub tangent: Vec<f64>,
}

impl DeltaGradient {
    /// Derivative along `v` (with `Σ v_i = 0` for simplex directions).
    pub fn directional(&self, v: &[f64]) -> f64 {
        self.ambient.iter().zip(v).map(|(g, x)| g * x).sum()
    }
}

pub fn grad_delta(problem: &PressureProblem, tol: f64) -> Result<DeltaGradient> {
    let support = problem
        .eta()
        .finite_support()
        .ok_or_else(|| Error::InvalidInput("gradient needs a finite frequency vector".into()))?;
    let digits: Vec<u64> = (problem.eta().first_digit()..=problem.eta().last_listed_digit().unwrap_or(0))
        .filter(|i| problem.families().contains_key(i) || support.iter().any(|(j, _)| j == i))
        .collect();
    let h = problem.solve_h(tol)?.h;
    let dp = problem.pressure_derivative(h)?;
    if !(dp < 0.0) {
        return Err(Error::NoZero("pressure derivative is not negative at the zero".into()));
    }
    let mut ambient = Vec::with_capacity(digits.len());
    for &i in &digits {
        let f = problem
            .families()
            .get(&i)
            .ok_or_else(|| Error::InvalidInput(format!("no family for digit {i}")))?;
        ambient.push(-f.log_series(h)?.log_value / dp);
    }
    let mean = ambient.iter().sum::<f64>() / ambient.len() as f64;
    let tangent = ambient.iter().map(|g| g - mean).collect();
    Ok(DeltaGradient {
        h,
        digits,
        ambient,
        tangent,
    })
}
