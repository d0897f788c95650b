//! One-dimensional realization of a non-stationary Moran construction.
//!
//! Level `k` of the tree splits every interval `J_σ` into children
//! `J_{σ*j}` of length `|J_σ|·c_{ω_k j}`, packed left to right with equal gaps.
//! The tree gives an independent geometric check on the pressure zero via
//! covering sums and box counting.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{log_sum_exp, ContractionFamily};

/// Hard cap on the total number of realized nodes.
pub const NODE_CAP: u128 = 10_000_000;
/// Widest allowed truncation once the depth exceeds [`BREADTH_DEPTH`].
pub const MAX_DEEP_BREADTH: usize = 16;
pub const BREADTH_DEPTH: usize = 6;

const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    /// Children packed from the left, slack split evenly between neighbours.
    #[default]
    EqualGaps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoranSpec {
    /// Truncated ratio lists `(c_{i1}, …, c_{iM})` per symbol.
    pub families: BTreeMap<u64, Vec<f64>>,
    /// `ω_1 … ω_n`; level `k` uses the family of `ω_k`.
    pub omega: Vec<u64>,
    pub depth: usize,
    #[serde(default)]
    pub gap: GapPolicy,
    /// Shrink every level uniformly when some ratio sum exceeds 1.
    #[serde(default = "default_rescale")]
    pub rescale: bool,
}

fn default_rescale() -> bool {
    true
}

impl MoranSpec {
    pub fn new(families: BTreeMap<u64, Vec<f64>>, omega: Vec<u64>, depth: usize) -> Result<Self> {
        let spec = MoranSpec {
            families,
            omega,
            depth,
            gap: GapPolicy::EqualGaps,
            rescale: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Truncates each family to its first `m` ratios.
    pub fn from_families(
        families: &BTreeMap<u64, ContractionFamily>,
        m: usize,
        omega: Vec<u64>,
        depth: usize,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("truncation length must be positive".into()));
        }
        let lists = families.iter().map(|(&i, f)| (i, f.gammas(m))).collect();
        Self::new(lists, omega, depth)
    }

    /// Single family used at every level.
    pub fn stationary(ratios: Vec<f64>, depth: usize) -> Result<Self> {
        Self::new(BTreeMap::from([(0, ratios)]), vec![0; depth], depth)
    }

    pub fn with_rescale(mut self, rescale: bool) -> Self {
        self.rescale = rescale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() < self.depth {
            return Err(Error::InvalidInput(format!(
                "driving prefix has {} symbols, depth {} requested",
                self.omega.len(),
                self.depth
            )));
        }
        for (i, list) in &self.families {
            if list.is_empty() {
                return Err(Error::InvalidInput(format!("family for symbol {i} is empty")));
            }
            if list.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
                return Err(Error::InvalidInput(format!("ratios for symbol {i} must lie in (0,1)")));
            }
            if self.depth > BREADTH_DEPTH && list.len() > MAX_DEEP_BREADTH {
                return Err(Error::InvalidInput(format!(
                    "symbol {i} keeps {} ratios; at most {MAX_DEEP_BREADTH} allowed beyond depth {BREADTH_DEPTH}",
                    list.len()
                )));
            }
        }
        for (k, s) in self.omega[..self.depth].iter().enumerate() {
            if !self.families.contains_key(s) {
                return Err(Error::InvalidInput(format!(
                    "no family for symbol {s} at level {}",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    fn level_ratios(&self, k: usize) -> &[f64] {
        &self.families[&self.omega[k - 1]]
    }

    /// Total node count including the root.
    pub fn node_count(&self) -> u128 {
        let mut total: u128 = 1;
        let mut width: u128 = 1;
        for k in 1..=self.depth {
            width = width.saturating_mul(self.level_ratios(k).len() as u128);
            total = total.saturating_add(width);
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalNode {
    /// Index of the parent in the previous level (`u32::MAX` for the root).
    pub parent: u32,
    /// 1-based position among the parent's children.
    pub child: u32,
    pub left: f64,
    pub right: f64,
    /// `log c_σ` before any rescaling.
    pub log_c: f64,
}

impl IntervalNode {
    pub fn length(&self) -> f64 {
        self.right - self.left
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoranTree {
    spec: MoranSpec,
    /// `levels[k]` holds `D_k` in left-to-right order.
    levels: Vec<Vec<IntervalNode>>,
    scale: f64,
}

pub fn realize(spec: &MoranSpec) -> Result<MoranTree> {
    spec.validate()?;
    let nodes = spec.node_count();
    if nodes > NODE_CAP {
        return Err(Error::Overflow { nodes, cap: NODE_CAP });
    }
    let max_sum = (1..=spec.depth)
        .map(|k| spec.level_ratios(k).iter().sum::<f64>())
        .fold(0.0, f64::max);
    let scale = if max_sum > 1.0 {
        if !spec.rescale {
            return Err(Error::Infeasible { sum: max_sum });
        }
        1.0 / max_sum
    } else {
        1.0
    };

    let root = IntervalNode {
        parent: u32::MAX,
        child: 0,
        left: 0.0,
        right: 1.0,
        log_c: 0.0,
    };
    let mut levels = vec![vec![root]];
    for k in 1..=spec.depth {
        let ratios = spec.level_ratios(k);
        let log_ratios: Vec<f64> = ratios.iter().map(|c| c.ln()).collect();
        let fill: f64 = ratios.iter().sum::<f64>() * scale;
        let gaps = ratios.len().saturating_sub(1).max(1) as f64;
        let prev = &levels[k - 1];
        let mut next = Vec::with_capacity(prev.len() * ratios.len());
        for (p, node) in prev.iter().enumerate() {
            let len = node.length();
            let gap = len * (1.0 - fill) / gaps;
            let mut x = node.left;
            for (j, (&c, &lc)) in ratios.iter().zip(&log_ratios).enumerate() {
                let r = x + len * c * scale;
                next.push(IntervalNode {
                    parent: p as u32,
                    child: j as u32 + 1,
                    left: x,
                    right: r,
                    log_c: node.log_c + lc,
                });
                x = r + gap;
            }
        }
        levels.push(next);
    }
    Ok(MoranTree {
        spec: spec.clone(),
        levels,
        scale,
    })
}

impl MoranTree {
    pub fn spec(&self) -> &MoranSpec {
        &self.spec
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Uniform per-level length factor (1 unless ratio sums exceeded 1).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_rescaled(&self) -> bool {
        self.scale != 1.0
    }

    pub fn level(&self, k: usize) -> &[IntervalNode] {
        &self.levels[k]
    }

    pub fn leaves(&self) -> &[IntervalNode] {
        &self.levels[self.depth()]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Digit string `σ` of node `idx` at level `k`.
    pub fn code(&self, k: usize, idx: usize) -> Vec<u64> {
        let mut out = vec![0; k];
        let mut i = idx;
        for lvl in (1..=k).rev() {
            let node = &self.levels[lvl][i];
            out[lvl - 1] = node.child as u64;
            i = node.parent as usize;
        }
        out
    }

    /// Checks nesting, disjoint interiors and exact length ratios for every
    /// node.
    pub fn check(&self) -> Result<()> {
        for k in 1..=self.depth() {
            let ratios = self.spec.level_ratios(k);
            let level = &self.levels[k];
            for (idx, node) in level.iter().enumerate() {
                let parent = &self.levels[k - 1][node.parent as usize];
                let plen = parent.length();
                // positions carry absolute rounding of a few ulps of 1
                let tol = GEOM_TOL * plen + 8.0 * f64::EPSILON;
                if node.left < parent.left - tol || node.right > parent.right + tol {
                    return Err(Error::InvalidInput(format!(
                        "node {:?} escapes its parent",
                        self.code(k, idx)
                    )));
                }
                let want = ratios[node.child as usize - 1] * self.scale;
                if (node.length() - want * plen).abs() > 1e-9 * want * plen + 2.0 * tol {
                    return Err(Error::InvalidInput(format!(
                        "node {:?} has ratio {} instead of {want}",
                        self.code(k, idx),
                        node.length() / plen
                    )));
                }
                if idx > 0 && level[idx - 1].parent == node.parent && level[idx - 1].right > node.left + tol {
                    return Err(Error::InvalidInput(format!(
                        "siblings overlap at {:?}",
                        self.code(k, idx)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_record(&self) -> TreeRecord {
        let mut nodes = Vec::with_capacity(self.node_count());
        for k in 0..=self.depth() {
            for (idx, n) in self.levels[k].iter().enumerate() {
                nodes.push(NodeRecord {
                    sigma: self.code(k, idx),
                    left: n.left,
                    right: n.right,
                });
            }
        }
        TreeRecord {
            depth: self.depth(),
            scale: self.scale,
            rescaled: self.is_rescaled(),
            nodes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub sigma: Vec<u64>,
    pub left: f64,
    pub right: f64,
}

/// Serialized tree: every node as `(σ, left, right)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub depth: usize,
    pub scale: f64,
    pub rescaled: bool,
    pub nodes: Vec<NodeRecord>,
}

impl TreeRecord {
    /// Intervals with the longest codes.
    pub fn leaves(&self) -> Vec<(f64, f64)> {
        let deepest = self.nodes.iter().map(|n| n.sigma.len()).max().unwrap_or(0);
        self.nodes
            .iter()
            .filter(|n| n.sigma.len() == deepest)
            .map(|n| (n.left, n.right))
            .collect()
    }
}

/// `μ_h(J_σ) = c_σ^h / Σ_{D_k} c_τ^h`, aligned with the tree levels.
pub fn mu_h_weights(tree: &MoranTree, h: f64) -> Vec<Vec<f64>> {
    tree.levels
        .iter()
        .map(|level| {
            let logs: Vec<f64> = level.iter().map(|n| h * n.log_c).collect();
            let z = log_sum_exp(&logs);
            logs.iter().map(|l| (l - z).exp()).collect()
        })
        .collect()
}

/// The same weights keyed by code.
pub fn mu_h_by_code(tree: &MoranTree, h: f64) -> BTreeMap<Vec<u64>, f64> {
    let w = mu_h_weights(tree, h);
    let mut out = BTreeMap::new();
    for (k, level) in w.iter().enumerate() {
        for (idx, &v) in level.iter().enumerate() {
            out.insert(tree.code(k, idx), v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    /// `s_k` solving `Σ_{D_k} c_σ^s = 1`, for `k = 1..=depth`.
    pub levels: Vec<f64>,
    /// Value at the deepest level.
    pub s_fit: f64,
    /// Intercept of a least-squares fit `s_k ≈ a + b/k` over the deeper half.
    pub extrapolated: f64,
}

/// Zero of `s ↦ log Σ exp(s·ℓ_σ)` for `ℓ_σ < 0`, by Newton from `s = 0`.
///
/// The function is convex and decreasing, so iterates from the left rise
/// monotonically to the root.
fn covering_zero(logs: &[f64]) -> f64 {
    let eval = |s: f64| -> (f64, f64) {
        let xs: Vec<f64> = logs.par_iter().map(|l| s * l).collect();
        let z = log_sum_exp(&xs);
        let d: f64 = logs.par_iter().zip(&xs).map(|(l, x)| l * (x - z).exp()).sum();
        (z, d)
    };
    let mut s = 0.0;
    for _ in 0..200 {
        let (f, d) = eval(s);
        if f <= 0.0 || d >= 0.0 {
            break;
        }
        let step = -f / d;
        s += step;
        if step <= 1e-16 * s.abs().max(1.0) {
            break;
        }
    }
    s
}

pub fn fit_dimension(tree: &MoranTree) -> Result<DimensionFit> {
    if tree.depth() < 3 {
        return Err(Error::InsufficientDepth(format!(
            "dimension fit needs depth at least 3, tree has {}",
            tree.depth()
        )));
    }
    let levels: Vec<f64> = (1..=tree.depth())
        .map(|k| {
            let logs: Vec<f64> = tree.levels[k].iter().map(|n| n.log_c).collect();
            covering_zero(&logs)
        })
        .collect();
    let s_fit = *levels.last().expect("depth >= 3");
    let from = levels.len() / 2;
    let pts: Vec<(f64, f64)> = levels[from..]
        .iter()
        .enumerate()
        .map(|(i, &s)| (1.0 / (from + i + 1) as f64, s))
        .collect();
    let extrapolated = least_squares(&pts).map_or(s_fit, |(a, _)| a);
    Ok(DimensionFit {
        levels,
        s_fit,
        extrapolated,
    })
}

/// `(intercept, slope)` of the least-squares line through `pts`.
fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub eps: Vec<f64>,
    pub counts: Vec<u64>,
    /// Slope of `log N(ε)` against `log(1/ε)`; `None` with fewer than two
    /// usable scales.
    pub slope: Option<f64>,
}

/// Number of cells `[kε, (k+1)ε)` meeting the interior of some interval.
fn count_cells(sorted: &[(f64, f64)], eps: f64) -> u64 {
    let mut total = 0u64;
    let mut covered_to: i64 = i64::MIN;
    for &(l, r) in sorted {
        if r <= l {
            continue;
        }
        let a = l / eps;
        let b = r / eps;
        let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
        let first = (a + tol).floor() as i64;
        let last = ((b - tol).ceil() as i64 - 1).max(first);
        let start = first.max(covered_to + 1);
        if last >= start {
            total += (last - start + 1) as u64;
        }
        covered_to = covered_to.max(last);
    }
    total
}

/// Box counts of the leaf intervals at each scale.
pub fn box_count_intervals(leaves: &[(f64, f64)], eps: &[f64]) -> Result<BoxCount> {
    if leaves.is_empty() {
        return Err(Error::EmptyTree);
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidInput("box sizes must be positive".into()));
    }
    let mut sorted = leaves.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let counts: Vec<u64> = eps.par_iter().map(|&e| count_cells(&sorted, e)).collect();
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(e, &n)| (-e.ln(), (n as f64).ln()))
        .collect();
    Ok(BoxCount {
        eps: eps.to_vec(),
        counts,
        slope: least_squares(&pts).map(|(_, b)| b),
    })
}

pub fn box_count(tree: &MoranTree, eps: &[f64]) -> Result<BoxCount> {
    let leaves: Vec<(f64, f64)> = tree.leaves().iter().map(|n| (n.left, n.right)).collect();
    box_count_intervals(&leaves, eps)
}
