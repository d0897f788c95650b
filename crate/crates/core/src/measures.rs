//! Invariant measures of expansion maps: the Gauss measure, Parry's
//! β-density, and Ulam discretizations of transfer operators.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{expand_with, ExpandOptions, ExpansionKind, FMap};
use crate::frequency::{gauss_weight, CountableLaw, FrequencyVector};
use crate::numeric::ExactReal;

/// Branch cap for maps with countably many branches.
pub const MAX_ULAM_BRANCHES: u64 = 200;
/// Power iteration stops when successive iterates differ by this in `L¹`.
pub const ULAM_RESIDUAL: f64 = 1e-10;

/// `μ_G([a,b)) = log((1+b)/(1+a)) / log 2`.
pub fn gauss_measure(a: f64, b: f64) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::InvalidInput(format!("[{a}, {b}) is not a subinterval of [0,1]")));
    }
    Ok(((1.0 + b) / (1.0 + a)).ln() / std::f64::consts::LN_2)
}

/// `p_{G,k} = μ_G(d₁ = k)`.
pub fn gauss_digit_freq(k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("continued-fraction digits start at 1".into()));
    }
    Ok(gauss_weight(k))
}

pub fn gauss_density(x: f64) -> f64 {
    1.0 / ((1.0 + x) * std::f64::consts::LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    ClosedForm,
    Ulam,
}

/// Step density on the uniform grid `[i/n, (i+1)/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityApprox {
    pub n: usize,
    pub values: Vec<f64>,
    pub kind: DensityKind,
    /// `log λ` of the leading eigenvalue for weighted discretizations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_lambda: Option<f64>,
}

impl DensityApprox {
    /// Cell averages of a density with known antiderivative `cdf`.
    pub fn from_cdf(n: usize, cdf: impl Fn(f64) -> f64) -> Self {
        let values = (0..n)
            .map(|i| (cdf((i + 1) as f64 / n as f64) - cdf(i as f64 / n as f64)) * n as f64)
            .collect();
        DensityApprox {
            n,
            values,
            kind: DensityKind::ClosedForm,
            log_lambda: None,
        }
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (i as f64 / self.n as f64, (i + 1) as f64 / self.n as f64)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let i = ((x * self.n as f64) as usize).min(self.n - 1);
        self.values[i]
    }

    /// `∫_a^b` of the step density.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return 0.0;
        }
        let n = self.n as f64;
        let i0 = ((a * n) as usize).min(self.n - 1);
        let i1 = ((b * n).ceil() as usize).min(self.n);
        (i0..i1)
            .map(|i| {
                let (l, r) = self.cell(i);
                (r.min(b) - l.max(a)).max(0.0) * self.values[i]
            })
            .sum()
    }

    /// `∫ |ρ − f|` by `sub` midpoints per cell.
    pub fn l1_distance(&self, f: impl Fn(f64) -> f64 + Sync, sub: usize) -> f64 {
        let h = 1.0 / (self.n * sub) as f64;
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                (0..sub)
                    .map(|k| {
                        let x = (i * sub + k) as f64 * h + 0.5 * h;
                        (self.values[i] - f(x)).abs() * h
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Orbit of 1 under `T_β` and the induced Parry density.
#[derive(Debug, Clone, PartialEq)]
pub struct ParryDensity {
    beta: f64,
    /// `T_β^n(1)`, `n = 0, 1, …` (first entry 1).
    orbit: Vec<f64>,
    normalizer: f64,
}

impl ParryDensity {
    pub fn new(beta: &ExactReal) -> Result<Self> {
        let kind = ExpansionKind::beta(beta.clone())?;
        let b = beta.to_f64();
        // T(1) = {β}; further points from the expansion of {β}
        let n_max = (15.0 * std::f64::consts::LN_10 / b.ln()).ceil() as usize + 1;
        let start = beta.fract();
        let mut orbit = vec![1.0];
        let seq = expand_with(
            &kind,
            &start,
            n_max,
            ExpandOptions {
                precision_bits: 256,
                keep_remainders: true,
                force_interval: false,
            },
        )?;
        for r in seq.remainders() {
            let v = r.mid_f64();
            if orbit.len() > n_max || b.powi(-(orbit.len() as i32)) < 1e-15 {
                break;
            }
            if r.hi().is_zero() {
                break;
            }
            orbit.push(v);
        }
        let normalizer = orbit.iter().enumerate().map(|(n, t)| b.powi(-(n as i32)) * t).sum();
        Ok(ParryDensity {
            beta: b,
            orbit,
            normalizer,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn orbit(&self) -> &[f64] {
        &self.orbit
    }

    /// `I(β) = Σ_n β^{−n} T^n(1)`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `h_β(x) = (1/I) Σ_{n : x < T^n 1} β^{−n}`.
    pub fn density(&self, x: f64) -> f64 {
        self.orbit
            .iter()
            .enumerate()
            .filter(|(_, &t)| x < t)
            .map(|(n, _)| self.beta.powi(-(n as i32)))
            .sum::<f64>()
            / self.normalizer
    }

    /// `∫_0^x h_β`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        self.orbit
            .iter()
            .enumerate()
            .map(|(n, &t)| self.beta.powi(-(n as i32)) * x.min(t))
            .sum::<f64>()
            / self.normalizer
    }

    /// `η_j = ν_β([j/β, (j+1)/β) ∩ [0,1))`.
    pub fn digit_frequencies(&self) -> Result<FrequencyVector> {
        let top = self.beta.floor() as u64;
        let w: Vec<f64> = (0..=top)
            .map(|j| {
                let a = j as f64 / self.beta;
                let b = ((j + 1) as f64 / self.beta).min(1.0);
                self.cdf(b) - self.cdf(a)
            })
            .collect();
        FrequencyVector::finite_normalized(0, w)
    }

    pub fn grid(&self, n: usize) -> DensityApprox {
        DensityApprox::from_cdf(n, |x| self.cdf(x))
    }
}

pub fn parry_density(beta: &ExactReal, x: f64) -> Result<f64> {
    Ok(ParryDensity::new(beta)?.density(x))
}

pub fn parry_normalizer(beta: &ExactReal) -> Result<f64> {
    Ok(ParryDensity::new(beta)?.normalizer())
}

pub fn beta_digit_frequencies(beta: &ExactReal) -> Result<FrequencyVector> {
    ParryDensity::new(beta)?.digit_frequencies()
}

/// Closed-form Gauss density on a grid.
pub fn gauss_grid(n: usize) -> DensityApprox {
    DensityApprox::from_cdf(n, |x| (1.0 + x).ln() / std::f64::consts::LN_2)
}

/// Potential `φ` of a weighted transfer operator `L_φ g(y) = Σ_{Tx=y} e^{φ(x)} g(x)`.
#[derive(Clone)]
pub enum Potential {
    /// `φ = −log|T′|`: the absolutely continuous invariant measure.
    Acim,
    /// `φ = −s·log|T′|`.
    Scaled(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Acim => write!(f, "Acim"),
            Potential::Scaled(s) => write!(f, "Scaled({s})"),
            Potential::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Potential {
    /// Factor `e^{φ(x)}·|T′(x)|` multiplying the Lebesgue transition weight.
    fn weight(&self, fmap: &dyn FMap, x: f64) -> f64 {
        match self {
            Potential::Acim => 1.0,
            Potential::Scaled(s) => fmap.inverse_derivative(x).powf(1.0 - s),
            Potential::Custom(phi) => phi(x).exp() * fmap.inverse_derivative(x),
        }
    }
}

/// Sparse matrix with rows `a` holding `(b, weight)`.
type SparseRows = Vec<Vec<(usize, f64)>>;

/// Ulam matrix `P_ab = m(cell_a ∩ T⁻¹ cell_b) / m(cell_a)`, reweighted by
/// the potential at the overlap midpoints. Row mass lost to omitted
/// branches is spread uniformly over all cells.
fn ulam_matrix(fmap: &dyn FMap, n: usize, potential: &Potential) -> SparseRows {
    let nf = n as f64;
    let last = fmap.last_digit().unwrap_or(fmap.first_digit() + MAX_ULAM_BRANCHES - 1);
    let branches: Vec<u64> = (fmap.first_digit()..=last).collect();
    let per_target: Vec<Vec<(usize, usize, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|b| {
            let mut out = Vec::new();
            let (y0, y1) = (b as f64 / nf, (b + 1) as f64 / nf);
            for &k in &branches {
                let end = fmap.branch_image_end(k);
                if y0 >= end {
                    continue;
                }
                let y1 = y1.min(end);
                let (u, v) = (fmap.branch_inverse(k, y0), fmap.branch_inverse(k, y1));
                let (x0, x1) = if u <= v { (u, v) } else { (v, u) };
                let (x0, x1) = (x0.clamp(0.0, 1.0), x1.clamp(0.0, 1.0));
                if x1 <= x0 {
                    continue;
                }
                let a0 = ((x0 * nf) as usize).min(n - 1);
                let a1 = ((x1 * nf).ceil() as usize).min(n);
                for a in a0..a1 {
                    let (l, r) = (a as f64 / nf, (a + 1) as f64 / nf);
                    let (ol, or) = (l.max(x0), r.min(x1));
                    if or > ol {
                        let m = (or - ol) * nf;
                        out.push((a, b, m, m * potential.weight(fmap, 0.5 * (ol + or))));
                    }
                }
            }
            out
        })
        .collect();
    let mut rows: SparseRows = vec![Vec::new(); n];
    let mut mass = vec![0.0; n];
    for entries in per_target {
        for (a, b, m, w) in entries {
            rows[a].push((b, w));
            mass[a] += m;
        }
    }
    if fmap.last_digit().is_none() {
        for (a, row) in rows.iter_mut().enumerate() {
            let deficit = 1.0 - mass[a];
            if deficit > 1e-15 {
                // omitted branches sit at the left end of the cell
                let x = (a as f64 / nf).max(fmap.branch_interval(last).0 * 0.5);
                let share = deficit / nf * potential.weight(fmap, x);
                row.extend((0..n).map(|b| (b, share)));
            }
        }
    }
    rows
}

/// Invariant density of `T` by Ulam's method.
///
/// Branches beyond [`MAX_ULAM_BRANCHES`] are omitted for countable maps and
/// the row mass they would carry is spread uniformly over all cells.
/// With a potential other than [`Potential::Acim`] the result is the
/// equilibrium state `u·v` of the weighted operator, normalized, and
/// `log_lambda` holds the log of its leading eigenvalue.
pub fn ulam_invariant_density(
    fmap: &dyn FMap,
    n: usize,
    max_iterations: usize,
    potential: Option<&Potential>,
) -> Result<DensityApprox> {
    if n < 64 {
        return Err(Error::InvalidInput("Ulam grid needs at least 64 cells".into()));
    }
    let potential = potential.cloned().unwrap_or(Potential::Acim);
    let rows = ulam_matrix(fmap, n, &potential);
    let acim = matches!(potential, Potential::Acim);
    // left eigenvector: u ← u P
    let left = power_iterate(&rows, n, max_iterations, true)?;
    let (u, lambda) = left;
    let values = if acim {
        u.iter().map(|m| m * n as f64).collect::<Vec<_>>()
    } else {
        let (v, _) = power_iterate(&rows, n, max_iterations, false)?;
        let prod: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
        let total: f64 = prod.iter().sum();
        prod.iter().map(|p| p / total * n as f64).collect()
    };
    Ok(DensityApprox {
        n,
        values,
        kind: DensityKind::Ulam,
        log_lambda: (!acim).then(|| lambda.ln()),
    })
}

/// Power iteration for the leading left (`u Q`) or right (`Q v`) vector,
/// normalized to unit `L¹` norm.
fn power_iterate(rows: &SparseRows, n: usize, max_iterations: usize, left: bool) -> Result<(Vec<f64>, f64)> {
    let mut x = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let mut y = vec![0.0; n];
        if left {
            for (a, row) in rows.iter().enumerate() {
                let xa = x[a];
                if xa == 0.0 {
                    continue;
                }
                for &(b, w) in row {
                    y[b] += xa * w;
                }
            }
        } else {
            for (a, row) in rows.iter().enumerate() {
                y[a] = row.iter().map(|&(b, w)| w * x[b]).sum();
            }
        }
        let norm: f64 = y.iter().sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonConvergent {
                iterations: 0,
                residual: f64::NAN,
            });
        }
        for v in y.iter_mut() {
            *v /= norm;
        }
        residual = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        x = y;
        if residual <= ULAM_RESIDUAL {
            return Ok((x, norm));
        }
    }
    Err(Error::NonConvergent {
        iterations: max_iterations,
        residual,
    })
}

/// `‖ρ L − ρ‖₁` for the unweighted Ulam operator, as masses.
pub fn ulam_fixed_point_residual(fmap: &dyn FMap, density: &DensityApprox) -> f64 {
    let n = density.n;
    let rows = ulam_matrix(fmap, n, &Potential::Acim);
    let x: Vec<f64> = density.values.iter().map(|v| v / n as f64).collect();
    let mut y = vec![0.0; n];
    for (a, row) in rows.iter().enumerate() {
        for &(b, w) in row {
            y[b] += x[a] * w;
        }
    }
    x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum()
}

/// `η_k = ∫_{branch k} ρ`. Countable maps list `max_branches` digits and
/// record the rest as tail mass.
pub fn eta_phi(density: &DensityApprox, fmap: &dyn FMap, max_branches: u64) -> Result<FrequencyVector> {
    let first = fmap.first_digit();
    let last = match fmap.last_digit() {
        Some(l) => l,
        None => first + max_branches.max(1) - 1,
    };
    let total = density.integral();
    let w: Vec<f64> = (first..=last)
        .map(|k| {
            let (a, b) = fmap.branch_interval(k);
            density.integrate(a, b) / total
        })
        .collect();
    if fmap.last_digit().is_some() {
        return FrequencyVector::finite_normalized(first, w);
    }
    let listed: f64 = w.iter().sum();
    FrequencyVector::countable(CountableLaw::Truncated {
        first_digit: first,
        weights: w,
        tail_mass: (1.0 - listed).max(0.0),
    })
    .or_else(|_| {
        // rounding can push the listed mass a hair above one
        let s = listed.max(1.0);
        let w: Vec<f64> = (first..=last)
            .map(|k| {
                let (a, b) = fmap.branch_interval(k);
                density.integrate(a, b) / total / s
            })
            .collect();
        let tail = (1.0 - w.iter().sum::<f64>()).max(0.0);
        FrequencyVector::countable(CountableLaw::Truncated {
            first_digit: first,
            weights: w,
            tail_mass: tail,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::ExpansionKind;

    #[test]
    fn gauss_values() {
        assert!((gauss_measure(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((gauss_digit_freq(1).unwrap() - 0.415037).abs() < 1e-6);
        assert!((gauss_digit_freq(2).unwrap() - 0.169925).abs() < 1e-6);
        assert!((gauss_measure(0.5, 1.0).unwrap() - gauss_digit_freq(1).unwrap()).abs() < 1e-15);
        assert!(gauss_measure(0.5, 0.2).is_err());
        assert!((gauss_grid(128).integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parry_golden() {
        let p = ParryDensity::new(&ExactReal::golden()).unwrap();
        assert_eq!(p.orbit().len(), 2);
        assert!((p.normalizer() - 1.381966).abs() < 1e-6);
        assert!((p.density(0.3) - 1.170820).abs() < 1e-6);
        assert!((p.density(0.7) - 0.723607).abs() < 1e-6);
        assert!((p.cdf(1.0) - 1.0).abs() < 1e-14);
        let eta = p.digit_frequencies().unwrap();
        assert!((eta.weight(0) - 0.723607).abs() < 1e-6);
        assert!((eta.weight(1) - 0.276393).abs() < 1e-6);
    }

    #[test]
    fn parry_two_and_a_half() {
        let beta = ExactReal::rational(5.into(), 2.into()).unwrap();
        let p = ParryDensity::new(&beta).unwrap();
        assert!(p.orbit().len() > 30);
        assert!((p.cdf(1.0) - 1.0).abs() < 1e-12);
        let eta = beta_digit_frequencies(&beta).unwrap();
        let s: f64 = (0..=2).map(|j| eta.weight(j)).sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ulam_doubling_is_lebesgue() {
        let f = ExpansionKind::mary(2).unwrap().fmap();
        let d = ulam_invariant_density(f.as_ref(), 256, 1000, None).unwrap();
        assert!(d.l1_distance(|_| 1.0, 4) < 1e-6);
        let eta = eta_phi(&d, f.as_ref(), 0).unwrap();
        assert!((eta.weight(0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ulam_gauss_close_to_closed_form() {
        let f = ExpansionKind::ContinuedFraction.fmap();
        let d = ulam_invariant_density(f.as_ref(), 256, 5000, None).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-6);
        assert!(d.l1_distance(gauss_density, 8) < 0.02);
        assert!(ulam_fixed_point_residual(f.as_ref(), &d) < 1e-8);
        // s = 1 weighting reproduces the acim
        let w = ulam_invariant_density(f.as_ref(), 256, 5000, Some(&Potential::Scaled(1.0))).unwrap();
        assert!(w.l1_distance(|x| d.value_at(x), 2) < 1e-6);
        assert!(w.log_lambda.unwrap().abs() < 1e-2);
    }

    #[test]
    fn weighted_golden_pressure() {
        // φ = −s log β: L_φ has eigenvalue β^{1−s}·(spectral radius of the golden shift) → pressure log(β)(1−s)
        let f = ExpansionKind::golden_beta().fmap();
        let s = 0.5;
        let d = ulam_invariant_density(f.as_ref(), 256, 5000, Some(&Potential::Scaled(s))).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((d.log_lambda.unwrap() - (1.0 - s) * golden.ln()).abs() < 1e-6);
        assert!((d.integral() - 1.0).abs() < 1e-9);
    }
}
