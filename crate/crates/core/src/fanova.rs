//! Monte Carlo functional ANOVA.
//!
//! The term for a subset `u` is
//! `f_u(x) = sum_{v ⊆ u} (-1)^{|u|-|v|} E[f(X) | X_v = x_v]`,
//! with every conditional expectation taken over one shared background
//! sample, so the terms of a full decomposition add up to `f(x)` exactly.
//! Variance components `sigma2_u` are plug-in estimates: the same
//! inclusion-exclusion evaluated at the background points themselves,
//! squared and averaged.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::attribution::{Attribution, Method};
use crate::coalition::{all_coalitions, Coalition};
use crate::distribution::{Background, BaselineDistribution, Expectation};
use crate::error::{Error, Result};
use crate::model::ModelFunction;

/// Sample sizes for an ANOVA estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaConfig {
    /// Background draws behind each conditional expectation.
    pub n: usize,
    pub seed: u64,
    /// Background points at which terms are evaluated to estimate their
    /// variance. Costs `variance_points * n` model calls per subset; zero
    /// skips variance estimation.
    pub variance_points: usize,
}

impl Default for AnovaConfig {
    fn default() -> Self {
        AnovaConfig { n: 10_000, seed: 0, variance_points: 2_000 }
    }
}

impl AnovaConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        AnovaConfig { n, seed, ..Default::default() }
    }
}

/// One estimated ANOVA component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTerm {
    pub subset: Coalition,
    /// `f_u(x)` at the explained point.
    pub value: f64,
    /// Estimated variance of `f_u(X)`; zero for the constant term and absent
    /// when variance estimation was skipped.
    pub sigma2: Option<f64>,
}

/// Shared state for estimating many terms against one background.
pub(crate) struct Estimator<'a> {
    model: &'a ModelFunction,
    background: Background,
    x: Vec<f64>,
    outer: Array2<f64>,
    at_x: HashMap<Coalition, Expectation>,
    at_outer: HashMap<Coalition, Vec<f64>>,
}

impl<'a> Estimator<'a> {
    pub(crate) fn new(
        model: &'a ModelFunction,
        distribution: &BaselineDistribution,
        x: &[f64],
        config: &AnovaConfig,
    ) -> Result<Self> {
        let p = model.dim();
        if x.len() != p {
            return Err(Error::Dimension { expected: p, got: x.len() });
        }
        if distribution.dim() != p {
            return Err(Error::input(format!("distribution has {} features, model has {p}", distribution.dim())));
        }
        if config.n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        let background = distribution.background(config.n, config.seed)?;
        let k = config.variance_points.min(background.len());
        let outer = background.rows().slice(ndarray::s![..k, ..]).to_owned();
        Ok(Estimator { model, background, x: x.to_vec(), outer, at_x: HashMap::new(), at_outer: HashMap::new() })
    }

    pub(crate) fn dim(&self) -> usize {
        self.x.len()
    }

    pub(crate) fn background(&self) -> &Background {
        &self.background
    }

    pub(crate) fn has_variance(&self) -> bool {
        self.outer.nrows() > 0
    }

    /// Distinct conditional expectations computed at the explained point.
    pub(crate) fn expectations_used(&self) -> usize {
        self.at_x.len()
    }

    pub(crate) fn expectation(&mut self, v: Coalition) -> Result<Expectation> {
        self.ensure_at_x(&[v])?;
        Ok(self.at_x[&v])
    }

    fn ensure_at_x(&mut self, subsets: &[Coalition]) -> Result<()> {
        let mut missing: Vec<Coalition> = subsets.iter().filter(|v| !self.at_x.contains_key(v)).copied().collect();
        missing.sort();
        missing.dedup();
        if missing.is_empty() {
            return Ok(());
        }
        let values = self.background.expectations(self.model, &self.x, &missing)?;
        self.at_x.extend(missing.into_iter().zip(values));
        Ok(())
    }

    fn ensure_at_outer(&mut self, subsets: &[Coalition]) -> Result<()> {
        let mut missing: Vec<Coalition> = subsets.iter().filter(|v| !self.at_outer.contains_key(v)).copied().collect();
        missing.sort();
        missing.dedup();
        if missing.is_empty() || self.outer.nrows() == 0 {
            return Ok(());
        }
        let k = self.outer.nrows();
        let mut general = Vec::new();
        for v in missing {
            if v.is_empty() {
                let mean = self.background.expectations(self.model, &self.x, &[v])?[0].mean;
                self.at_outer.insert(v, vec![mean; k]);
            } else if v.is_full() {
                self.at_outer.insert(v, self.model.evaluate_batch(self.outer.view())?.to_vec());
            } else {
                general.push(v);
            }
        }
        if general.is_empty() {
            return Ok(());
        }
        let mut columns = vec![Vec::with_capacity(k); general.len()];
        for point in self.outer.rows() {
            let point = point.to_vec();
            let values = self.background.expectations(self.model, &point, &general)?;
            for (col, e) in columns.iter_mut().zip(values) {
                col.push(e.mean);
            }
        }
        self.at_outer.extend(general.into_iter().zip(columns));
        Ok(())
    }

    /// `f_u(x)`.
    pub(crate) fn term_value(&mut self, u: Coalition) -> Result<f64> {
        let subs = u.subsets();
        self.ensure_at_x(&subs)?;
        let size = u.size();
        Ok(subs.iter().map(|v| sign(size, v.size()) * self.at_x[v].mean).sum())
    }

    /// Plug-in estimate of `Var f_u(X)`, or `None` without variance points.
    pub(crate) fn term_sigma2(&mut self, u: Coalition) -> Result<Option<f64>> {
        if u.is_empty() {
            return Ok(Some(0.0));
        }
        if !self.has_variance() {
            return Ok(None);
        }
        let subs = u.subsets();
        self.ensure_at_outer(&subs)?;
        let k = self.outer.nrows();
        let size = u.size();
        let mut total = 0.0;
        for i in 0..k {
            let f: f64 = subs.iter().map(|v| sign(size, v.size()) * self.at_outer[v][i]).sum();
            total += f * f;
        }
        Ok(Some(total / k as f64))
    }

    pub(crate) fn term(&mut self, u: Coalition) -> Result<AnovaTerm> {
        Ok(AnovaTerm { subset: u, value: self.term_value(u)?, sigma2: self.term_sigma2(u)? })
    }
}

fn sign(outer: usize, inner: usize) -> f64 {
    if (outer - inner).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `E[f(X) | X_u = x_u]` over `n` draws of the distribution.
pub fn conditional_expectation(
    model: &ModelFunction,
    distribution: &BaselineDistribution,
    x: &[f64],
    u: Coalition,
    n: usize,
    seed: u64,
) -> Result<Expectation> {
    let config = AnovaConfig { n, seed, variance_points: 0 };
    Estimator::new(model, distribution, x, &config)?.expectation(u)
}

/// A single ANOVA term with its variance estimate.
pub fn anova_term(
    model: &ModelFunction,
    distribution: &BaselineDistribution,
    x: &[f64],
    u: Coalition,
    config: &AnovaConfig,
) -> Result<AnovaTerm> {
    Estimator::new(model, distribution, x, config)?.term(u)
}

/// A set of ANOVA terms at one explained point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaDecomposition {
    pub dim: usize,
    pub target: Vec<f64>,
    #[serde(with = "terms_as_list")]
    pub terms: BTreeMap<Coalition, AnovaTerm>,
    pub f_target: f64,
    pub n: usize,
    pub seed: u64,
    pub distribution: String,
    /// Distinct conditional expectations the terms required.
    pub expectations_used: usize,
}

impl AnovaDecomposition {
    /// All `2^p` terms.
    pub fn full(
        model: &ModelFunction,
        distribution: &BaselineDistribution,
        x: &[f64],
        config: &AnovaConfig,
    ) -> Result<Self> {
        let subsets = all_coalitions(model.dim())?;
        Self::for_subsets(model, distribution, x, &subsets, config)
    }

    /// Terms for the given subsets only. Their lower sets are needed as
    /// conditional expectations but are not added as terms. The constant
    /// term is always included.
    pub fn for_subsets(
        model: &ModelFunction,
        distribution: &BaselineDistribution,
        x: &[f64],
        subsets: &[Coalition],
        config: &AnovaConfig,
    ) -> Result<Self> {
        let mut est = Estimator::new(model, distribution, x, config)?;
        Self::from_estimator(&mut est, subsets, config, distribution.kind().name())
    }

    pub(crate) fn from_estimator(
        est: &mut Estimator<'_>,
        subsets: &[Coalition],
        config: &AnovaConfig,
        distribution: &str,
    ) -> Result<Self> {
        let p = est.dim();
        if let Some(bad) = subsets.iter().find(|u| u.dim() != p) {
            return Err(Error::input(format!("subset {bad} is over {} features, model has {p}", bad.dim())));
        }
        let mut terms = BTreeMap::new();
        let empty = Coalition::empty(p);
        for &u in std::iter::once(&empty).chain(subsets) {
            if let std::collections::btree_map::Entry::Vacant(slot) = terms.entry(u) {
                slot.insert(est.term(u)?);
            }
        }
        let f_target = est.model.evaluate(&est.x)?;
        Ok(AnovaDecomposition {
            dim: p,
            target: est.x.clone(),
            terms,
            f_target,
            n: est.background.len(),
            seed: config.seed,
            distribution: distribution.to_string(),
            expectations_used: est.expectations_used(),
        })
    }

    /// `f_∅`, the mean prediction.
    pub fn f_null(&self) -> f64 {
        self.terms.get(&Coalition::empty(self.dim)).map_or(0.0, |t| t.value)
    }

    pub fn is_complete(&self) -> bool {
        self.dim < 63 && self.terms.len() as u64 == 1u64 << self.dim
    }

    /// Sum of the included terms at the explained point.
    pub fn reconstruction(&self) -> f64 {
        self.terms.values().map(|t| t.value).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("decomposition serializes")
    }

    /// `subset,value,sigma2` CSV with 1-based feature lists separated by
    /// spaces.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subset,value,sigma2\n");
        for t in self.terms.values() {
            let labels: Vec<String> = t.subset.labels().iter().map(|l| l.to_string()).collect();
            let sigma2 = t.sigma2.map_or(String::new(), |s| format!("{s:.16e}"));
            out.push_str(&format!("{},{:.16e},{sigma2}\n", labels.join(" "), t.value));
        }
        out
    }
}

mod terms_as_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::AnovaTerm;
    use crate::coalition::Coalition;

    pub fn serialize<S: Serializer>(terms: &BTreeMap<Coalition, AnovaTerm>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(terms.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Coalition, AnovaTerm>, D::Error> {
        let list = Vec::<AnovaTerm>::deserialize(d)?;
        Ok(list.into_iter().map(|t| (t.subset, t)).collect())
    }
}

/// Shapley values as the equal split of each ANOVA term among its members:
/// `phi_i = sum_{S ∋ i} f_S / |S|` over the terms present.
pub fn shapley_from_anova(decomposition: &AnovaDecomposition) -> Attribution {
    let p = decomposition.dim;
    let mut phi = vec![0.0; p];
    for t in decomposition.terms.values() {
        let size = t.subset.size();
        for i in t.subset.indices() {
            phi[i] += t.value / size as f64;
        }
    }
    let mut out = Attribution::new(
        phi,
        decomposition.f_target,
        decomposition.f_null(),
        Method::AnovaPartition,
        decomposition.expectations_used,
    );
    out.seed = Some(decomposition.seed);
    if !decomposition.is_complete() {
        out.warnings.push(format!(
            "{} of 2^{p} ANOVA terms available; missing terms contribute zero",
            decomposition.terms.len()
        ));
    }
    out
}
