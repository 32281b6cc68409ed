//! Variance-based global sensitivity: Sobol indices, effective dimensions
//! and a screening summary.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::coalition::{coalitions_of_size, Coalition};
use crate::distribution::BaselineDistribution;
use crate::error::{Error, Result};
use crate::fanova::AnovaDecomposition;
use crate::model::ModelFunction;
use crate::rng::{STREAM_FREEZE, STREAM_PICK};

/// First-order and total Sobol indices with standard errors.
///
/// `interaction[i]` estimates `S_Ti - S_i` directly, from the squared mixed
/// difference of `f` across feature `i` and the remaining features. It is
/// zero whenever `i` enters `f` additively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndices {
    pub first_order: Vec<f64>,
    pub first_order_se: Vec<f64>,
    pub total: Vec<f64>,
    pub total_se: Vec<f64>,
    pub interaction: Vec<f64>,
    pub interaction_se: Vec<f64>,
    pub variance: f64,
    pub n: usize,
    pub seed: u64,
}

fn mean_se(values: &Array1<f64>) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.sum() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pick-freeze estimates from two independent `n x p` samples `A`, `B`.
///
/// First order: `mean((f(B) - f0) (f(A_B^i) - f(A))) / V` where `A_B^i` is
/// `A` with column `i` from `B`. Total: `mean((f(A) - f(A_B^i))^2) / (2V)`.
pub fn sobol_indices(
    model: &ModelFunction,
    distribution: &BaselineDistribution,
    n: usize,
    seed: u64,
) -> Result<SobolIndices> {
    distribution.require_independent_columns("Sobol indices")?;
    let p = model.dim();
    if distribution.dim() != p {
        return Err(Error::input(format!("distribution has {} features, model has {p}", distribution.dim())));
    }
    if n < 2 {
        return Err(Error::input(format!("Sobol indices need n >= 2, got {n}")));
    }
    let a = distribution.sample_stream(n, seed, STREAM_PICK)?;
    let b = distribution.sample_stream(n, seed, STREAM_FREEZE)?;

    // one stacked batch: A, B, then A_B^i and B_A^i for every i
    let mut stacked = Array2::zeros(((2 + 2 * p) * n, p));
    stacked.slice_mut(s![..n, ..]).assign(&a);
    stacked.slice_mut(s![n..2 * n, ..]).assign(&b);
    for i in 0..p {
        let mut ab = stacked.slice_mut(s![(2 + 2 * i) * n..(3 + 2 * i) * n, ..]);
        ab.assign(&a);
        ab.column_mut(i).assign(&b.column(i));
        let mut ba = stacked.slice_mut(s![(3 + 2 * i) * n..(4 + 2 * i) * n, ..]);
        ba.assign(&b);
        ba.column_mut(i).assign(&a.column(i));
    }
    let f = model.evaluate_batch(stacked.view())?;
    let fa = f.slice(s![..n]).to_owned();
    let fb = f.slice(s![n..2 * n]).to_owned();
    let both = f.slice(s![..2 * n]);
    let f0 = both.sum() / (2 * n) as f64;
    let variance = both.iter().map(|v| (v - f0).powi(2)).sum::<f64>() / (2 * n) as f64;
    if variance <= 1e-24 * f0.abs().max(1.0).powi(2) {
        return Err(Error::Degenerate(format!("output variance {variance:.3e} is zero")));
    }

    let mut out = SobolIndices {
        first_order: Vec::with_capacity(p),
        first_order_se: Vec::with_capacity(p),
        total: Vec::with_capacity(p),
        total_se: Vec::with_capacity(p),
        interaction: Vec::with_capacity(p),
        interaction_se: Vec::with_capacity(p),
        variance,
        n,
        seed,
    };
    for i in 0..p {
        let fab = f.slice(s![(2 + 2 * i) * n..(3 + 2 * i) * n]).to_owned();
        let fba = f.slice(s![(3 + 2 * i) * n..(4 + 2 * i) * n]).to_owned();
        let (v1, se1) = mean_se(&((&fb - f0) * (&fab - &fa)));
        let (vt, set) = mean_se(&((&fa - &fab).mapv(|d| d * d) * 0.5));
        // f(A) - f(A_B^i) - f(B_A^i) + f(B) isolates terms mixing i with the rest
        let (vi, sei) = mean_se(&(&fa - &fab - &fba + &fb).mapv(|d| d * d / 4.0));
        out.first_order.push(v1 / variance);
        out.first_order_se.push(se1 / variance);
        out.total.push(vt / variance);
        out.total_se.push(set / variance);
        out.interaction.push(vi / variance);
        out.interaction_se.push(sei / variance);
    }
    Ok(out)
}

impl SobolIndices {
    pub fn dim(&self) -> usize {
        self.first_order.len()
    }

    /// First-order indices with negative estimates clamped to zero.
    pub fn first_order_clamped(&self) -> Vec<f64> {
        self.first_order.iter().map(|v| v.max(0.0)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("indices serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,first_order,first_order_se,total,total_se,interaction,interaction_se\n");
        for i in 0..self.dim() {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                i + 1,
                self.first_order[i],
                self.first_order_se[i],
                self.total[i],
                self.total_se[i],
                self.interaction[i],
                self.interaction_se[i]
            ));
        }
        out
    }
}

/// Truncation and superposition dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDimension {
    /// Smallest `d` such that the terms inside features `1..=d` carry
    /// `(1 - epsilon)` of the variance, in the given feature order.
    pub d_t: usize,
    /// Smallest order `d` such that terms of order at most `d` carry
    /// `(1 - epsilon)` of the variance.
    pub d_s: usize,
    pub epsilon: f64,
    /// True when `d_t` and `d_s` are upper bounds derived from Sobol indices
    /// rather than values computed from variance components.
    pub bounded: bool,
    /// Features by descending total index.
    pub greedy_order: Vec<usize>,
    /// `d_t` with features taken in `greedy_order`.
    pub d_t_greedy: usize,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::input(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    Ok(())
}

fn greedy_order(totals: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));
    order
}

/// Effective dimensions from the variance components of every nonempty
/// subset (`components[k] = (u, sigma2_u)`).
pub fn effective_dimensions(p: usize, components: &[(Coalition, f64)], epsilon: f64) -> Result<EffectiveDimension> {
    check_epsilon(epsilon)?;
    let mut sigma = std::collections::HashMap::new();
    for (u, v) in components {
        if u.dim() != p {
            return Err(Error::input(format!("component {u} is over {} features, expected {p}", u.dim())));
        }
        sigma.insert(*u, v.max(0.0));
    }
    let expected = (1..=p).map(|s| coalitions_of_size(p, s).len()).sum::<usize>();
    let all: Vec<Coalition> = (1..=p).flat_map(|s| coalitions_of_size(p, s)).collect();
    if all.iter().any(|u| !sigma.contains_key(u)) {
        return Err(Error::input(format!(
            "effective dimensions need all {expected} nonempty variance components, got {}",
            sigma.len()
        )));
    }
    let total: f64 = all.iter().map(|u| sigma[u]).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all variance components are zero".into()));
    }
    let need = (1.0 - epsilon) * total;
    let tol = 1e-12 * total;

    let prefix_dim = |order: &[usize]| {
        (1..=p)
            .find(|&d| {
                let mut mask = 0u64;
                for &i in &order[..d] {
                    mask |= 1 << i;
                }
                let inside: f64 = all.iter().filter(|u| u.mask() & !mask == 0).map(|u| sigma[u]).sum();
                inside >= need - tol
            })
            .unwrap_or(p)
    };
    let natural: Vec<usize> = (0..p).collect();
    let d_t = prefix_dim(&natural);
    let d_s = (1..=p)
        .find(|&d| all.iter().filter(|u| u.size() <= d).map(|u| sigma[u]).sum::<f64>() >= need - tol)
        .unwrap_or(p);
    let totals: Vec<f64> = (0..p).map(|i| all.iter().filter(|u| u.contains(i)).map(|u| sigma[u]).sum()).collect();
    let order = greedy_order(&totals);
    let d_t_greedy = prefix_dim(&order);
    Ok(EffectiveDimension { d_t, d_s, epsilon, bounded: false, greedy_order: order, d_t_greedy })
}

/// Effective dimensions from a full ANOVA decomposition with variances.
pub fn effective_dimensions_from_anova(decomposition: &AnovaDecomposition, epsilon: f64) -> Result<EffectiveDimension> {
    let mut components = Vec::new();
    for t in decomposition.terms.values().filter(|t| !t.subset.is_empty()) {
        let s2 = t.sigma2.ok_or_else(|| Error::input("decomposition carries no variance estimates"))?;
        components.push((t.subset, s2));
    }
    effective_dimensions(decomposition.dim, &components, epsilon)
}

/// Upper bounds on the effective dimensions from Sobol indices alone.
///
/// Terms outside features `1..=d` carry at most `sum_{i>d} S_Ti` of the
/// variance, and terms of order above `d` at most `(sum_i S_Ti - 1) / d`.
pub fn effective_dimensions_from_indices(indices: &SobolIndices, epsilon: f64) -> Result<EffectiveDimension> {
    check_epsilon(epsilon)?;
    let p = indices.dim();
    let totals: Vec<f64> = indices.total.iter().map(|v| v.max(0.0)).collect();
    let prefix_bound =
        |order: &[usize]| (1..=p).find(|&d| order[d..].iter().map(|&i| totals[i]).sum::<f64>() <= epsilon).unwrap_or(p);
    let natural: Vec<usize> = (0..p).collect();
    let d_t = prefix_bound(&natural);
    let first: f64 = indices.first_order_clamped().iter().sum();
    let excess = (totals.iter().sum::<f64>() - 1.0).max(0.0);
    let d_s = if first >= 1.0 - epsilon { 1 } else { (1..=p).find(|&d| excess / d as f64 <= epsilon).unwrap_or(p) };
    let order = greedy_order(&totals);
    let d_t_greedy = prefix_bound(&order);
    Ok(EffectiveDimension { d_t, d_s, epsilon, bounded: true, greedy_order: order, d_t_greedy })
}

/// Summary of what a set of Sobol indices implies for attribution cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub epsilon: f64,
    /// Smallest feature set whose first-order indices sum to at least
    /// `1 - epsilon`, if any.
    pub selected: Option<Coalition>,
    /// `2^k - 1` conditional expectations for the `k` selected features.
    pub expectations: Option<usize>,
    /// Expectations including the shared null term.
    pub expectation_budget: Option<usize>,
    /// `S_i / S_Ti` per feature; absent when `S_Ti` is not positive.
    pub ratios: Vec<Option<f64>>,
    /// Features whose interaction share exceeds three standard errors (and
    /// rounding level).
    pub interacting: Vec<usize>,
}

pub fn screening_report(indices: &SobolIndices, epsilon: f64) -> ScreeningReport {
    let p = indices.dim();
    let first = indices.first_order_clamped();
    let order = greedy_order(&first);
    let mut selected = None;
    let mut acc = 0.0;
    for k in 1..=p {
        acc += first[order[k - 1]];
        if acc >= 1.0 - epsilon - 1e-12 {
            selected = Some(Coalition::from_indices(p, &order[..k]).expect("indices in range"));
            break;
        }
    }
    let expectations = selected.map(|s| (1usize << s.size()) - 1);
    let ratios = (0..p).map(|i| (indices.total[i] > 0.0).then(|| indices.first_order[i] / indices.total[i])).collect();
    let interacting = (0..p)
        .filter(|&i| {
            // rounding alone leaves shares far below 1e-9
            indices.interaction[i] > (3.0 * indices.interaction_se[i]).max(1e-9)
        })
        .collect();
    ScreeningReport {
        epsilon,
        selected,
        expectations,
        expectation_budget: expectations.map(|e| e + 1),
        ratios,
        interacting,
    }
}

impl ScreeningReport {
    pub fn interactions_detected(&self) -> bool {
        !self.interacting.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.selected {
            Some(s) => out.push_str(&format!(
                "features {s} carry first-order share >= {:.4}; {} conditional expectations plus the null term ({} total)\n",
                1.0 - self.epsilon,
                self.expectations.unwrap_or(0),
                self.expectation_budget.unwrap_or(0)
            )),
            None => out.push_str(&format!(
                "no feature set reaches first-order share {:.4}\n",
                1.0 - self.epsilon
            )),
        }
        out.push_str("feature  S_i/S_Ti\n");
        for (i, r) in self.ratios.iter().enumerate() {
            match r {
                Some(r) => out.push_str(&format!("{:>7}  {r:.4}\n", i + 1)),
                None => out.push_str(&format!("{:>7}  -\n", i + 1)),
            }
        }
        if self.interactions_detected() {
            let list: Vec<String> = self.interacting.iter().map(|i| (i + 1).to_string()).collect();
            out.push_str(&format!("interactions detected for features {}\n", list.join(", ")));
        } else {
            out.push_str("no interactions detected\n");
        }
        out
    }
}
