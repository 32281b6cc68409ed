//! Breadth-first search for the low-order ANOVA terms that carry most of the
//! output variance, scored by a pluggable subset importance (by default the
//! L2 cost of exclusion estimated by pick-freeze).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::coalition::{coalitions_of_size, Coalition};
use crate::distribution::BaselineDistribution;
use crate::error::{Error, Result};
use crate::fanova::{shapley_from_anova, AnovaConfig, AnovaDecomposition, Estimator};
use crate::model::ModelFunction;
use crate::rng::{derive_seed, STREAM_FREEZE, STREAM_PICK, STREAM_VARIANCE};

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Importance score `psi(S)` of a feature subset.
pub trait SubsetScore {
    fn score(&mut self, subset: Coalition) -> Result<f64>;
}

impl<F: FnMut(Coalition) -> Result<f64>> SubsetScore for F {
    fn score(&mut self, subset: Coalition) -> Result<f64> {
        self(subset)
    }
}

/// Pick-freeze estimator of the L2 cost of exclusion
/// `(1 / (n 2^|s|)) sum_i (sum_{r ⊆ s} (-1)^{|s|-|r|} f(x_i^r, z_i^{-r}))^2`,
/// with one pair of sample matrices shared by every subset it scores.
pub struct L2coe<'a> {
    model: &'a ModelFunction,
    z: Array2<f64>,
    x: Array2<f64>,
}

impl<'a> L2coe<'a> {
    pub fn new(model: &'a ModelFunction, distribution: &BaselineDistribution, n: usize, seed: u64) -> Result<Self> {
        distribution.require_independent_columns("pick-freeze scoring")?;
        if distribution.dim() != model.dim() {
            return Err(Error::input(format!(
                "distribution has {} features, model has {}",
                distribution.dim(),
                model.dim()
            )));
        }
        let z = distribution.sample_stream(n, seed, STREAM_FREEZE)?;
        let x = distribution.sample_stream(n, seed, STREAM_PICK)?;
        Ok(L2coe { model, z, x })
    }

    pub fn estimate(&self, s: Coalition) -> Result<Estimate> {
        if s.is_empty() {
            return Err(Error::input("L2COE needs a nonempty subset"));
        }
        if s.dim() != self.model.dim() {
            return Err(Error::Dimension { expected: self.model.dim(), got: s.dim() });
        }
        let n = self.z.nrows();
        let subs = s.subsets();
        let mut stacked = Array2::zeros((subs.len() * n, self.z.ncols()));
        for (k, r) in subs.iter().enumerate() {
            let mut block = stacked.slice_mut(ndarray::s![k * n..(k + 1) * n, ..]);
            block.assign(&self.z);
            for j in r.indices() {
                block.column_mut(j).assign(&self.x.column(j));
            }
        }
        let values = self.model.evaluate_batch(stacked.view())?;
        let size = s.size();
        let scale = (1u64 << size) as f64;
        let squares: Vec<f64> =
            (0..n)
                .map(|i| {
                    let d: f64 =
                        subs.iter()
                            .enumerate()
                            .map(|(k, r)| {
                                if (size - r.size()).is_multiple_of(2) {
                                    values[k * n + i]
                                } else {
                                    -values[k * n + i]
                                }
                            })
                            .sum();
                    d * d / scale
                })
                .collect();
        let nf = n as f64;
        let value = squares.iter().sum::<f64>() / nf;
        let std_error = if n > 1 {
            (squares.iter().map(|q| (q - value).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt()
        } else {
            0.0
        };
        Ok(Estimate { value, std_error })
    }
}

impl SubsetScore for L2coe<'_> {
    fn score(&mut self, subset: Coalition) -> Result<f64> {
        Ok(self.estimate(subset)?.value)
    }
}

/// L2 cost of exclusion of `s` from `n` pick-freeze pairs.
pub fn l2coe(
    model: &ModelFunction,
    distribution: &BaselineDistribution,
    s: Coalition,
    n: usize,
    seed: u64,
) -> Result<Estimate> {
    L2coe::new(model, distribution, n, seed)?.estimate(s)
}

/// How the total variance `V_t` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceTotal {
    /// Sum of the variance estimates of all nonempty terms, so that `V_s`
    /// and `V_t` are built from the same estimator.
    ComponentSum,
    /// Sample variance of `f(X)`.
    SampleVariance,
    /// `ComponentSum` up to [`COMPONENT_SUM_MAX_P`] features, otherwise
    /// `SampleVariance`.
    #[default]
    Auto,
}

pub const COMPONENT_SUM_MAX_P: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub epsilon: f64,
    pub max_order: usize,
    /// Pick-freeze pairs behind each score.
    pub n_score: usize,
    /// Background size for the variance estimates.
    pub n_variance: usize,
    pub seed: u64,
    #[serde(default)]
    pub variance_total: VarianceTotal,
}

impl SearchConfig {
    pub fn new(p: usize, epsilon: f64, n: usize, seed: u64) -> Self {
        SearchConfig { epsilon, max_order: p, n_score: n, n_variance: n, seed, variance_total: VarianceTotal::Auto }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::input(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if self.max_order == 0 || self.max_order > p {
            return Err(Error::input(format!("max_order must lie in [1, {p}], got {}", self.max_order)));
        }
        if self.n_score == 0 || self.n_variance == 0 {
            return Err(Error::input("sample sizes must be at least 1"));
        }
        Ok(())
    }
}

/// A term accepted by the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedTerm {
    pub subset: Coalition,
    pub score: f64,
    pub sigma2: f64,
    /// `V_s` after adding this term.
    pub cumulative: f64,
}

/// Scores of one order, in ranked order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTrace {
    pub order: usize,
    pub ranked: Vec<(Coalition, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub selected: Vec<SelectedTerm>,
    pub v_total: f64,
    pub v_selected: f64,
    pub explained_fraction: f64,
    pub stopped_at_order: usize,
    pub converged: bool,
    pub config: SearchConfig,
    pub trace: Vec<OrderTrace>,
}

impl SearchResult {
    pub fn subsets(&self) -> Vec<Coalition> {
        self.selected.iter().map(|t| t.subset).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("search result serializes")
    }

    /// Per-order score tables: `order,rank,subset,score`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("order,rank,subset,score\n");
        for t in &self.trace {
            for (rank, (s, score)) in t.ranked.iter().enumerate() {
                let labels: Vec<String> = s.labels().iter().map(|l| l.to_string()).collect();
                out.push_str(&format!("{},{},{},{score:.16e}\n", t.order, rank + 1, labels.join(" ")));
            }
        }
        out
    }
}

/// Breadth-first search with L2COE scores.
pub fn breadth_first_search(
    model: &ModelFunction,
    distribution: &BaselineDistribution,
    config: &SearchConfig,
) -> Result<SearchResult> {
    let mut scorer = L2coe::new(model, distribution, config.n_score, config.seed)?;
    breadth_first_search_with(model, distribution, config, &mut scorer)
}

/// Breadth-first search with a caller-supplied score.
///
/// Order by order, every subset of that size is scored and the subsets are
/// visited by descending score (ties in lexicographic order). Each visited
/// subset's variance estimate is added to `V_s`, and the search stops as
/// soon as `V_s > (1 - epsilon) V_t`.
pub fn breadth_first_search_with(
    model: &ModelFunction,
    distribution: &BaselineDistribution,
    config: &SearchConfig,
    scorer: &mut dyn SubsetScore,
) -> Result<SearchResult> {
    let p = model.dim();
    config.validate(p)?;
    let anova = AnovaConfig {
        n: config.n_variance,
        seed: derive_seed(config.seed, STREAM_VARIANCE),
        variance_points: config.n_variance,
    };
    let mut est = Estimator::new(model, distribution, &vec![0.0; p], &anova)?;

    let component_sum = match config.variance_total {
        VarianceTotal::ComponentSum => true,
        VarianceTotal::SampleVariance => false,
        VarianceTotal::Auto => p <= COMPONENT_SUM_MAX_P,
    };
    let v_total = if component_sum {
        let mut total = 0.0;
        for size in 1..=p {
            for u in coalitions_of_size(p, size) {
                total += est.term_sigma2(u)?.unwrap_or(0.0);
            }
        }
        total
    } else {
        let values = model.evaluate_batch(est.background().rows())?;
        let mean = values.mean().unwrap_or(0.0);
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64
    };

    let mut result = SearchResult {
        selected: Vec::new(),
        v_total,
        v_selected: 0.0,
        explained_fraction: 1.0,
        stopped_at_order: 0,
        converged: false,
        config: *config,
        trace: Vec::new(),
    };
    if v_total <= f64::EPSILON * f64::EPSILON {
        result.converged = true;
        return Ok(result);
    }
    let threshold = v_total * (1.0 - config.epsilon);

    'orders: for order in 1..=config.max_order {
        result.stopped_at_order = order;
        let mut ranked = Vec::new();
        for s in coalitions_of_size(p, order) {
            ranked.push((s, scorer.score(s)?));
        }
        // stable sort keeps lexicographic order among equal scores
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        result.trace.push(OrderTrace { order, ranked: ranked.clone() });
        for (s, score) in ranked {
            let sigma2 = est.term_sigma2(s)?.unwrap_or(0.0);
            result.v_selected += sigma2;
            result.selected.push(SelectedTerm { subset: s, score, sigma2, cumulative: result.v_selected });
            if result.v_selected > threshold {
                result.converged = true;
                break 'orders;
            }
        }
    }
    result.explained_fraction = result.v_selected / v_total;
    Ok(result)
}

/// Shapley values from the terms a search selected, plus the constant term.
/// The attribution's coverage is the search's explained fraction.
pub fn prune_and_attribute(
    model: &ModelFunction,
    distribution: &BaselineDistribution,
    x: &[f64],
    result: &SearchResult,
    config: &AnovaConfig,
) -> Result<Attribution> {
    if result.selected.is_empty() {
        return Err(Error::input("search selected no terms"));
    }
    let config = AnovaConfig { variance_points: 0, ..*config };
    let dec = AnovaDecomposition::for_subsets(model, distribution, x, &result.subsets(), &config)?;
    let mut out = shapley_from_anova(&dec);
    out.warnings.clear();
    if !dec.is_complete() {
        out.warnings.push(format!("pruned to {} of 2^{} ANOVA terms", dec.terms.len(), dec.dim));
    }
    out.coverage = Some(result.explained_fraction);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_shapley_background;
    use crate::model::BuiltinFunction;

    fn set(p: usize, idx: &[usize]) -> Coalition {
        Coalition::from_indices(p, idx).unwrap()
    }

    #[test]
    fn constant_model_scores_zero() {
        let m = ModelFunction::from_fn(3, "c", |_| 2.5);
        let d = BaselineDistribution::uniform01(3).unwrap();
        let e = l2coe(&m, &d, set(3, &[0, 2]), 200, 1).unwrap();
        assert!(e.value.abs() < 1e-28);
    }

    #[test]
    fn inert_coordinate_scores_zero() {
        let m = ModelFunction::from_fn(3, "x1", |x| x[0]);
        let d = BaselineDistribution::standard_normal(3).unwrap();
        let e = l2coe(&m, &d, set(3, &[1]), 500, 1).unwrap();
        assert!(e.value.abs() <= 3.0 * e.std_error + 1e-300);
    }

    #[test]
    fn empty_subset_rejected() {
        let m = ModelFunction::builtin(BuiltinFunction::AdditivePair4);
        let d = BaselineDistribution::uniform01(3).unwrap();
        assert!(matches!(l2coe(&m, &d, Coalition::empty(3), 10, 0), Err(Error::Input(_))));
    }

    #[test]
    fn correlated_unsupported() {
        let m = ModelFunction::builtin(BuiltinFunction::AdditivePair4);
        let cov = nalgebra::DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let d = BaselineDistribution::gaussian_correlated(vec![0.0; 3], cov).unwrap();
        assert!(matches!(l2coe(&m, &d, set(3, &[0]), 10, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn scaling_scales_scores() {
        let m = ModelFunction::builtin(BuiltinFunction::AdditivePair4);
        let m3 = ModelFunction::from_fn(3, "3f", |x| 3.0 * BuiltinFunction::AdditivePair4.eval(x));
        let d = BaselineDistribution::uniform01(3).unwrap();
        for s in [set(3, &[0]), set(3, &[1, 2])] {
            let a = l2coe(&m, &d, s, 300, 8).unwrap().value;
            let b = l2coe(&m3, &d, s, 300, 8).unwrap().value;
            assert!((b - 9.0 * a).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn interaction_ranking() {
        let m = ModelFunction::builtin(BuiltinFunction::AdditivePair4);
        let d = BaselineDistribution::uniform01(3).unwrap();
        let r = breadth_first_search(&m, &d, &SearchConfig::new(3, 0.01, 500, 3)).unwrap();
        let got: Vec<Vec<usize>> = r.subsets().iter().map(Coalition::labels).collect();
        assert!(
            got == vec![vec![2], vec![3], vec![1], vec![2, 3]] || got == vec![vec![3], vec![2], vec![1], vec![2, 3]],
            "{got:?}"
        );
        assert!(r.converged);
        assert!(r.selected.windows(2).all(|w| w[1].cumulative >= w[0].cumulative));
    }

    #[test]
    fn additive_model_stops_at_first_order() {
        let m = ModelFunction::from_fn(3, "add", |x| x[0] + 2.0 * x[1] - x[2]);
        let d = BaselineDistribution::uniform01(3).unwrap();
        let r = breadth_first_search(&m, &d, &SearchConfig::new(3, 0.01, 300, 1)).unwrap();
        assert!(r.converged);
        assert_eq!(r.stopped_at_order, 1);
        assert_eq!(r.selected.len(), 3);
    }

    #[test]
    fn constant_model_converges_immediately() {
        let m = ModelFunction::from_fn(3, "c", |_| 1.0);
        let d = BaselineDistribution::uniform01(3).unwrap();
        let r = breadth_first_search(&m, &d, &SearchConfig::new(3, 0.01, 100, 1)).unwrap();
        assert!(r.converged && r.selected.is_empty());
    }

    #[test]
    fn pruned_attribution_matches_exact_on_shared_sample() {
        let m = ModelFunction::builtin(BuiltinFunction::AdditivePair4);
        let d = BaselineDistribution::uniform01(3).unwrap();
        let r = breadth_first_search(&m, &d, &SearchConfig::new(3, 0.01, 400, 5)).unwrap();
        let x = [0.9, 0.2, 0.7];
        let config = AnovaConfig { n: 4000, seed: 6, variance_points: 0 };
        let a = prune_and_attribute(&m, &d, &x, &r, &config).unwrap();
        assert_eq!(a.coverage, Some(r.explained_fraction));
        let exact = exact_shapley_background(&m, &d.background(4000, 6).unwrap(), &x).unwrap();
        for (v, w) in a.phi.iter().zip(&exact.phi) {
            assert!((v - w).abs() < 1e-9, "{:?} vs {:?}", a.phi, exact.phi);
        }
    }
}
