//! Finite and countable stochastic vectors indexed by digit values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of `Σ η_i` from one.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Countable stochastic vectors with a closed-form tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CountableLaw {
    /// `η_k = (1 − q) q^{k − first_digit}` for `k ≥ first_digit`.
    Geometric { first_digit: u64, ratio: f64 },
    /// Gauss–Kuzmin digit frequencies of the continued-fraction map.
    Gauss,
    /// Listed weights followed by unlisted digits carrying `tail_mass`.
    Truncated {
        first_digit: u64,
        weights: Vec<f64>,
        tail_mass: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FrequencyVector {
    Finite { first_digit: u64, weights: Vec<f64> },
    Countable { law: CountableLaw },
}

/// `p_{G,k} = log2((k+1)² / (k(k+2)))`.
pub fn gauss_weight(k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    // ln(1 + 1/(k(k+2))) keeps precision for large k
    (1.0 / (k * (k + 2.0))).ln_1p() / std::f64::consts::LN_2
}

/// Gauss mass of the digits `> k`: `log2(1 + 1/(k+1))`.
pub fn gauss_tail(k: u64) -> f64 {
    (1.0 / (k as f64 + 1.0)).ln_1p() / std::f64::consts::LN_2
}

impl FrequencyVector {
    pub fn finite(first_digit: u64, weights: Vec<f64>) -> Result<Self> {
        let v = FrequencyVector::Finite { first_digit, weights };
        v.validate()?;
        Ok(v)
    }

    /// Rescale nonnegative weights to sum to one.
    pub fn finite_normalized(first_digit: u64, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidInput(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        FrequencyVector::finite(first_digit, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(first_digit: u64, m: usize) -> Self {
        FrequencyVector::Finite {
            first_digit,
            weights: vec![1.0 / m as f64; m],
        }
    }

    pub fn countable(law: CountableLaw) -> Result<Self> {
        let v = FrequencyVector::Countable { law };
        v.validate()?;
        Ok(v)
    }

    pub fn gauss() -> Self {
        FrequencyVector::Countable {
            law: CountableLaw::Gauss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        match self {
            FrequencyVector::Finite { weights, .. } => {
                if weights.is_empty() {
                    return bad("empty frequency vector".into());
                }
                check_weights(weights)?;
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > STOCHASTIC_TOL * weights.len().max(1) as f64 {
                    return bad(format!("weights sum to {s}, not 1"));
                }
            }
            FrequencyVector::Countable { law } => match law {
                CountableLaw::Geometric { ratio, .. } => {
                    if !(*ratio > 0.0 && *ratio < 1.0) {
                        return bad(format!("geometric ratio {ratio} not in (0,1)"));
                    }
                }
                CountableLaw::Gauss => {}
                CountableLaw::Truncated { weights, tail_mass, .. } => {
                    check_weights(weights)?;
                    if !(*tail_mass >= 0.0) {
                        return bad("negative tail mass".into());
                    }
                    let s: f64 = weights.iter().sum::<f64>() + tail_mass;
                    if (s - 1.0).abs() > STOCHASTIC_TOL * (weights.len() + 1) as f64 {
                        return bad(format!("weights plus tail sum to {s}, not 1"));
                    }
                }
            },
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, FrequencyVector::Finite { .. })
    }

    pub fn first_digit(&self) -> u64 {
        match self {
            FrequencyVector::Finite { first_digit, .. } => *first_digit,
            FrequencyVector::Countable { law } => match law {
                CountableLaw::Geometric { first_digit, .. } => *first_digit,
                CountableLaw::Gauss => 1,
                CountableLaw::Truncated { first_digit, .. } => *first_digit,
            },
        }
    }

    /// Largest digit with an explicitly known weight, `None` when weights are
    /// given in closed form for every digit.
    pub fn last_listed_digit(&self) -> Option<u64> {
        match self {
            FrequencyVector::Finite { first_digit, weights } => Some(first_digit + weights.len() as u64 - 1),
            FrequencyVector::Countable { law } => match law {
                CountableLaw::Truncated {
                    first_digit, weights, ..
                } => Some(first_digit + weights.len().max(1) as u64 - 1),
                _ => None,
            },
        }
    }

    /// Weight of digit `i` (zero outside the support or for unlisted digits
    /// of a truncated law).
    pub fn weight(&self, i: u64) -> f64 {
        let first = self.first_digit();
        if i < first {
            return 0.0;
        }
        let idx = (i - first) as usize;
        match self {
            FrequencyVector::Finite { weights, .. } => weights.get(idx).copied().unwrap_or(0.0),
            FrequencyVector::Countable { law } => match law {
                CountableLaw::Geometric { ratio, .. } => (1.0 - ratio) * ratio.powi(idx as i32),
                CountableLaw::Gauss => gauss_weight(i),
                CountableLaw::Truncated { weights, .. } => weights.get(idx).copied().unwrap_or(0.0),
            },
        }
    }

    /// Mass carried by digits strictly greater than `k`.
    pub fn tail_beyond(&self, k: u64) -> f64 {
        let first = self.first_digit();
        match self {
            FrequencyVector::Finite { weights, .. } => {
                let start = if k + 1 < first { 0 } else { (k + 1 - first) as usize };
                weights.iter().skip(start).sum()
            }
            FrequencyVector::Countable { law } => match law {
                CountableLaw::Geometric { ratio, .. } => {
                    if k < first {
                        1.0
                    } else {
                        ratio.powf((k - first + 1) as f64)
                    }
                }
                CountableLaw::Gauss => gauss_tail(k),
                CountableLaw::Truncated { weights, tail_mass, .. } => {
                    let start = if k + 1 < first { 0 } else { (k + 1 - first) as usize };
                    weights.iter().skip(start).sum::<f64>() + tail_mass
                }
            },
        }
    }

    /// Digits `first..=last` with their weights, skipping zero weights.
    pub fn support_up_to(&self, last: u64) -> Vec<(u64, f64)> {
        (self.first_digit()..=last)
            .map(|i| (i, self.weight(i)))
            .filter(|(_, w)| *w > 0.0)
            .collect()
    }

    /// The whole support for finite vectors.
    pub fn finite_support(&self) -> Option<Vec<(u64, f64)>> {
        self.is_finite()
            .then(|| self.support_up_to(self.last_listed_digit().expect("finite")))
    }

    /// Smallest `K ≥ first_digit` with `tail_beyond(K) ≤ mass`.
    pub fn truncation_index(&self, mass: f64) -> u64 {
        if let Some(last) = self.last_listed_digit() {
            if self.is_finite() {
                return last;
            }
        }
        let mut k = self.first_digit();
        let mut step = 1u64;
        // gallop then bisect; tail_beyond is nonincreasing
        while self.tail_beyond(k) > mass {
            k += step;
            step *= 2;
            if k > 1 << 52 {
                return k;
            }
        }
        let (mut lo, mut hi) = (k.saturating_sub(step / 2).max(self.first_digit()), k);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.tail_beyond(mid) > mass {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// `−Σ η_i log η_i` in nats with an upper bound on the omitted tail, or
    /// `EntropyDiverges` when no bound is available.
    pub fn entropy(&self) -> Result<(f64, f64)> {
        let h = |w: f64| if w > 0.0 { -w * w.ln() } else { 0.0 };
        match self {
            FrequencyVector::Finite { weights, .. } => Ok((weights.iter().map(|w| h(*w)).sum(), 0.0)),
            FrequencyVector::Countable { law } => match law {
                CountableLaw::Geometric { ratio, .. } => {
                    let q = *ratio;
                    Ok((-(1.0 - q).ln() - q / (1.0 - q) * q.ln(), 0.0))
                }
                CountableLaw::Gauss => {
                    // −p log p ≤ (2 ln k + ln ln 2 …)/k² for large k; bound the tail by
                    // Σ_{k>K} 3 ln k / k² ≤ 3 (ln K + 1) / K
                    let kmax = 1_000_000u64;
                    let s: f64 = (1..=kmax).map(|k| h(gauss_weight(k))).sum();
                    let k = kmax as f64;
                    Ok((s, 3.0 * (k.ln() + 1.0) / k))
                }
                CountableLaw::Truncated { weights, tail_mass, .. } => {
                    if *tail_mass > 0.0 {
                        return Err(Error::EntropyDiverges(
                            "entropy of an unspecified tail is not bounded".into(),
                        ));
                    }
                    Ok((weights.iter().map(|w| h(*w)).sum(), 0.0))
                }
            },
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_validation() {
        assert!(FrequencyVector::finite(0, vec![0.5, 0.5]).is_ok());
        assert!(FrequencyVector::finite(0, vec![0.5, 0.4]).is_err());
        assert!(FrequencyVector::finite(0, vec![1.5, -0.5]).is_err());
        assert!(FrequencyVector::finite(0, vec![]).is_err());
    }

    #[test]
    fn gauss_weights_and_tail() {
        assert!((gauss_weight(1) - 0.415037).abs() < 1e-6);
        assert!((gauss_weight(2) - 0.169925).abs() < 1e-6);
        let g = FrequencyVector::gauss();
        let k = 500;
        let s: f64 = (1..=k).map(|i| g.weight(i)).sum();
        assert!((s + g.tail_beyond(k) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_law() {
        let g = FrequencyVector::countable(CountableLaw::Geometric {
            first_digit: 1,
            ratio: 0.5,
        })
        .unwrap();
        assert_eq!(g.weight(1), 0.5);
        assert_eq!(g.weight(3), 0.125);
        assert!((g.tail_beyond(3) - 0.125).abs() < 1e-15);
        let (h, tail) = g.entropy().unwrap();
        assert!((h - 2.0 * std::f64::consts::LN_2).abs() < 1e-14);
        assert_eq!(tail, 0.0);
    }

    #[test]
    fn truncation_index_meets_mass() {
        let g = FrequencyVector::gauss();
        let k = g.truncation_index(1e-3);
        assert!(g.tail_beyond(k) <= 1e-3);
        assert!(g.tail_beyond(k - 1) > 1e-3);
    }

    #[test]
    fn truncated_tail_bookkeeping() {
        let v = FrequencyVector::countable(CountableLaw::Truncated {
            first_digit: 1,
            weights: vec![0.5, 0.25],
            tail_mass: 0.25,
        })
        .unwrap();
        assert_eq!(v.tail_beyond(1), 0.5);
        assert_eq!(v.tail_beyond(2), 0.25);
        assert_eq!(v.weight(3), 0.0);
        assert!(v.entropy().is_err());
    }
}
