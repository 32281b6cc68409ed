use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a set of Shapley values was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactFormula,
    RegressionClosedForm,
    RegressionSampled,
    AnovaPartition,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ExactFormula => "exact-formula",
            Method::RegressionClosedForm => "regression-closed-form",
            Method::RegressionSampled => "regression-sampled",
            Method::AnovaPartition => "anova-partition",
        }
    }
}

/// Per-feature Shapley values together with how they were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// Prediction at the explained point.
    pub f_target: f64,
    /// Null prediction: the model at the baseline, or its mean over baselines.
    pub f_null: f64,
    pub method: Method,
    /// Model evaluations or design rows spent.
    pub budget: usize,
    pub seed: Option<u64>,
    /// Monte Carlo standard error per feature when the baseline was sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    /// Fraction of the output variance carried by the terms used, when the
    /// attribution was built from a pruned set of ANOVA terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Attribution {
    pub fn new(phi: Vec<f64>, f_target: f64, f_null: f64, method: Method, budget: usize) -> Self {
        Attribution {
            phi,
            f_target,
            f_null,
            method,
            budget,
            seed: None,
            std_errors: None,
            coverage: None,
            warnings: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    /// `sum(phi) - (f_target - f_null)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.phi.iter().sum::<f64>() - (self.f_target - self.f_null)
    }

    /// Fails with a numerical error when the values do not add up to the
    /// explained difference within `tol` (scaled by the size of that
    /// difference when it exceeds one).
    pub fn validate_efficiency(&self, tol: f64) -> Result<()> {
        let scale = (self.f_target - self.f_null).abs().max(1.0);
        let gap = self.efficiency_gap();
        if gap.abs() > tol * scale {
            return Err(Error::Numerical {
                message: format!("attributions miss the explained difference by {gap:.3e}"),
                condition: f64::NAN,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("attribution serializes")
    }

    /// Two-column `feature,phi` CSV (with `std_error` when available).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.std_errors {
            Some(se) => {
                out.push_str("feature,phi,std_error\n");
                for (i, (v, e)) in self.phi.iter().zip(se).enumerate() {
                    out.push_str(&format!("{},{v:.16e},{e:.16e}\n", i + 1));
                }
            }
            None => {
                out.push_str("feature,phi\n");
                for (i, v) in self.phi.iter().enumerate() {
                    out.push_str(&format!("{},{v:.16e}\n", i + 1));
                }
            }
        }
        out
    }
}
