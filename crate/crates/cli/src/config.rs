//! Run configuration: a JSON file merged with command-line flags.

use std::path::{Path, PathBuf};

use fanova_shap::distribution::{BaselineDistribution, Covariance, DistributionSpec};
use fanova_shap::model::load_external_model;
use fanova_shap::table3::correlated_covariance;
use fanova_shap::{BuiltinFunction, Error, ModelFunction, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Exact,
    Regression,
    RegressionSampled,
    AnovaPartition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DesignArg {
    Paired,
    Full,
}

/// A distribution as written in a config file: a short form string or a
/// full tagged object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistArg {
    Short(String),
    Spec(DistributionSpec),
}

/// Every setting a subcommand may read. Absent fields fall back to
/// per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub external: Option<String>,
    pub p: Option<usize>,
    pub dist: Option<DistArg>,
    pub target: Option<Vec<f64>>,
    pub method: Option<MethodArg>,
    pub budget: Option<usize>,
    pub n: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub trace: Option<PathBuf>,
    pub lead: Option<usize>,
    pub max_order: Option<usize>,
    pub variance_points: Option<usize>,
    pub design: Option<DesignArg>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )+
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn merged(mut self, flags: RunConfig) -> Self {
        overlay!(
            self,
            flags,
            model,
            external,
            p,
            dist,
            target,
            method,
            budget,
            n,
            epsilon,
            seed,
            output,
            format,
            trace,
            lead,
            max_order,
            variance_points,
            design
        );
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn model(&self) -> Result<ModelFunction> {
        match (&self.model, &self.external) {
            (Some(_), Some(_)) => Err(Error::Input("give either --model or --external, not both".into())),
            (Some(name), None) => {
                if self.p.is_some_and(|p| p != 3) {
                    return Err(Error::Input(format!("builtin model {name} has 3 features")));
                }
                Ok(ModelFunction::builtin(name.parse::<BuiltinFunction>()?))
            }
            (None, Some(cmd)) => {
                let p = self.p.ok_or_else(|| Error::Input("--external needs --p".into()))?;
                load_external_model(cmd, p)
            }
            (None, None) => Err(Error::Input("a model is required (--model NAME or --external CMD --p P)".into())),
        }
    }

    pub fn target(&self, p: usize) -> Result<Vec<f64>> {
        let t = self.target.clone().ok_or_else(|| Error::Input("--target is required".into()))?;
        if t.len() != p {
            return Err(Error::Dimension { expected: p, got: t.len() });
        }
        Ok(t)
    }

    pub fn distribution_spec(&self) -> Result<DistributionSpec> {
        match &self.dist {
            None => Err(Error::Input("--dist is required".into())),
            Some(DistArg::Spec(spec)) => Ok(spec.clone()),
            Some(DistArg::Short(s)) => parse_distribution(s),
        }
    }

    pub fn distribution(&self, p: usize, target: Option<&[f64]>) -> Result<BaselineDistribution> {
        self.distribution_spec()?.build(p, target)
    }
}

pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", v.trim()))).collect()
}

/// Short forms: `uniform01`, `normal`, `single:0,0,0`, `local:SD`,
/// `empirical:PATH`, `table3:A`..`table3:D`, an inline JSON object, or
/// `@file.json`.
pub fn parse_distribution(s: &str) -> Result<DistributionSpec> {
    let s = s.trim();
    let json = |text: &str, origin: &str| {
        serde_json::from_str::<DistributionSpec>(text).map_err(|e| Error::Input(format!("distribution {origin}: {e}")))
    };
    if s.starts_with('{') {
        return json(s, "JSON");
    }
    if let Some(path) = s.strip_prefix('@') {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {path}: {e}")))?;
        return json(&text, path);
    }
    let (kind, arg) = s.split_once(':').map_or((s, None), |(k, a)| (k, Some(a)));
    let need = |what: &str| arg.ok_or_else(|| Error::Input(format!("`{kind}` needs `{kind}:{what}`")));
    match kind {
        "uniform01" => Ok(DistributionSpec::Uniform01),
        "normal" | "standard-normal" => Ok(DistributionSpec::GaussianIndependent { mean: None, sd: None }),
        "single" => Ok(DistributionSpec::Single { point: parse_list(need("x1,x2,...")?).map_err(Error::Input)? }),
        "local" => {
            let sd = need("SD")?.parse::<f64>().map_err(|_| Error::Input(format!("bad sd in `{s}`")))?;
            Ok(DistributionSpec::GaussianLocal { center: None, sd })
        }
        "empirical" => Ok(DistributionSpec::Empirical { path: Some(need("PATH")?.to_string()), rows: None }),
        "table3" => match need("A|B|C|D")? {
            "A" => Ok(DistributionSpec::GaussianIndependent { mean: None, sd: None }),
            "B" => Ok(DistributionSpec::GaussianCorrelated {
                mean: None,
                covariance: Covariance::Flat(correlated_covariance().transpose().as_slice().to_vec()),
            }),
            "C" => Ok(DistributionSpec::GaussianLocal { center: None, sd: 0.25 }),
            "D" => Ok(DistributionSpec::Single { point: vec![0.0; 3] }),
            other => Err(Error::Input(format!("unknown baseline `{other}`; expected A, B, C or D"))),
        },
        _ => Err(Error::Input(format!(
            "unknown distribution `{s}`; expected uniform01, normal, single:..., local:SD, empirical:PATH, table3:X, JSON or @file"
        ))),
    }
}
