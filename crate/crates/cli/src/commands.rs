//! One function per subcommand. Each returns an [`Artifact`] holding every
//! rendering the command supports.

use fanova_shap::attribution::Attribution;
use fanova_shap::design::{alias_matrix, full_powerset_design, interaction_columns, paired_block_sample};
use fanova_shap::exact::exact_shapley_background;
use fanova_shap::fanova::{shapley_from_anova, AnovaConfig, AnovaDecomposition};
use fanova_shap::regression::{solve_closed_form, solve_constrained, RegressionProblem};
use fanova_shap::search::{breadth_first_search, prune_and_attribute, SearchConfig};
use fanova_shap::sensitivity::{effective_dimensions_from_indices, screening_report, sobol_indices};
use fanova_shap::table3::table3_experiment;
use fanova_shap::{Error, Result};
use serde_json::{json, Value};

use crate::config::{DesignArg, Format, MethodArg, RunConfig};
use crate::render;

pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Sampled-regression budget when `--budget` is absent, capped by `2^p - 2`.
pub const DEFAULT_BUDGET: usize = 2048;

pub struct Artifact {
    pub json: Value,
    pub csv: Option<String>,
    pub text: String,
    pub default_format: Format,
    /// Per-order score table written to `--trace`, when the command has one.
    pub trace: Option<String>,
}

impl Artifact {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json).expect("json value") + "\n"),
            Format::Text => Ok(self.text.clone()),
            Format::Csv => self.csv.clone().ok_or_else(|| Error::Input("this command has no CSV output".into())),
        }
    }
}

fn positive(value: Option<usize>, default: usize, name: &str) -> Result<usize> {
    match value.unwrap_or(default) {
        0 => Err(Error::Input(format!("--{name} must be at least 1"))),
        v => Ok(v),
    }
}

pub fn explain(cfg: &RunConfig) -> Result<Artifact> {
    let model = cfg.model()?;
    let p = model.dim();
    let target = cfg.target(p)?;
    let dist = cfg.distribution(p, Some(&target))?;
    let seed = cfg.seed();
    let n = positive(cfg.n, DEFAULT_N, "n")?;
    let method = cfg.method.unwrap_or(MethodArg::Exact);
    let attribution = match method {
        MethodArg::Exact => exact_shapley_background(&model, &dist.background(n, seed)?, &target)?,
        MethodArg::Regression => {
            let problem =
                RegressionProblem::from_model(&model, full_powerset_design(p)?, &dist.background(n, seed)?, &target)?;
            solve_closed_form(&problem)?
        }
        MethodArg::RegressionSampled => {
            let max = if p >= 63 { usize::MAX } else { (1usize << p) - 2 };
            let budget = cfg.budget.unwrap_or(DEFAULT_BUDGET.min(max));
            let design = paired_block_sample(p, budget, seed)?;
            let problem = RegressionProblem::from_model(&model, design, &dist.background(n, seed)?, &target)?;
            solve_constrained(&problem)?
        }
        MethodArg::AnovaPartition => {
            let config = AnovaConfig { n, seed, variance_points: 0 };
            shapley_from_anova(&AnovaDecomposition::full(&model, &dist, &target, &config)?)
        }
    };
    let provenance = json!({
        "model": model.label(),
        "distribution": cfg.distribution_spec()?,
        "target": target,
        "n": n,
        "seed": seed,
    });
    let mut value = attribution.to_json();
    value["provenance"] = provenance;
    Ok(Artifact {
        json: value,
        csv: Some(attribution.to_csv()),
        text: render::attribution_text(&attribution, model.label()),
        default_format: Format::Json,
        trace: None,
    })
}

pub fn anova(cfg: &RunConfig) -> Result<Artifact> {
    let model = cfg.model()?;
    let p = model.dim();
    let target = cfg.target(p)?;
    let dist = cfg.distribution(p, Some(&target))?;
    let config = AnovaConfig {
        n: positive(cfg.n, DEFAULT_N, "n")?,
        seed: cfg.seed(),
        variance_points: cfg.variance_points.unwrap_or(200),
    };
    let dec = AnovaDecomposition::full(&model, &dist, &target, &config)?;
    let shapley = shapley_from_anova(&dec);
    let mut value = dec.to_json();
    value["shapley"] = json!(shapley.phi);
    value["reconstruction"] = json!(dec.reconstruction());
    Ok(Artifact {
        csv: Some(dec.to_csv()),
        text: render::anova_text(&dec, &shapley),
        json: value,
        default_format: Format::Json,
        trace: None,
    })
}

pub fn search(cfg: &RunConfig) -> Result<Artifact> {
    let model = cfg.model()?;
    let p = model.dim();
    let dist = cfg.distribution(p, cfg.target.as_deref())?;
    let n = positive(cfg.n, 500, "n")?;
    let mut config = SearchConfig::new(p, cfg.epsilon.unwrap_or(DEFAULT_EPSILON), n, cfg.seed());
    if let Some(k) = cfg.max_order {
        config.max_order = k;
    }
    let result = breadth_first_search(&model, &dist, &config)?;
    let mut value = result.to_json();
    let mut attribution: Option<Attribution> = None;
    if cfg.target.is_some() {
        let target = cfg.target(p)?;
        if !result.selected.is_empty() {
            let a = prune_and_attribute(&model, &dist, &target, &result, &AnovaConfig::new(DEFAULT_N, cfg.seed()))?;
            value["attribution"] = a.to_json();
            attribution = Some(a);
        }
    }
    Ok(Artifact {
        csv: Some(render::search_csv(&result)),
        text: render::search_text(&result, attribution.as_ref()),
        json: value,
        default_format: Format::Json,
        trace: Some(result.trace_csv()),
    })
}

pub fn sensitivity(cfg: &RunConfig) -> Result<Artifact> {
    let model = cfg.model()?;
    let p = model.dim();
    let dist = cfg.distribution(p, cfg.target.as_deref())?;
    let n = positive(cfg.n, DEFAULT_N, "n")?;
    let epsilon = cfg.epsilon.unwrap_or(0.05);
    let indices = sobol_indices(&model, &dist, n, cfg.seed())?;
    let dims = effective_dimensions_from_indices(&indices, epsilon)?;
    let screening = screening_report(&indices, epsilon);
    let value = json!({
        "indices": indices.to_json(),
        "effective_dimension": dims,
        "screening": screening.to_json(),
    });
    Ok(Artifact {
        csv: Some(indices.to_csv()),
        text: render::sensitivity_text(&indices, &dims, &screening),
        json: value,
        default_format: Format::Json,
        trace: None,
    })
}

pub fn table3(cfg: &RunConfig) -> Result<Artifact> {
    let n = positive(cfg.n, 100_000, "n")?;
    let report = table3_experiment(n, cfg.seed())?;
    Ok(Artifact {
        json: report.to_json(),
        csv: Some(report.to_csv()),
        text: report.to_text(),
        default_format: Format::Text,
        trace: None,
    })
}

pub fn alias(cfg: &RunConfig) -> Result<Artifact> {
    let p = cfg.p.ok_or_else(|| Error::Input("alias needs --p".into()))?;
    let lead = cfg.lead.unwrap_or(1);
    if lead == 0 {
        return Err(Error::Input("--lead is 1-based".into()));
    }
    let design = match cfg.design.unwrap_or(DesignArg::Paired) {
        DesignArg::Paired => paired_block_sample(p, cfg.budget.unwrap_or(2 * p), cfg.seed())?,
        DesignArg::Full => full_powerset_design(p)?,
    };
    let inter = interaction_columns(&design, 2, lead - 1)?;
    let a = alias_matrix(&design, &inter)?;
    let rows: Vec<Vec<u8>> = design.rows().iter().map(|z| z.to_bits()).collect();
    let value = json!({
        "p": p,
        "lead": lead,
        "budget": design.budget(),
        "design_rows": rows,
        "weights": design.weights(),
        "interactions": ((lead + 1)..=p).map(|j| [lead, j]).collect::<Vec<_>>(),
        "normal": render::matrix_rows(&a.normal),
        "normal_inverse": render::matrix_rows(&a.normal_inverse),
        "cross": render::matrix_rows(&a.cross),
        "alias": render::matrix_rows(&a.alias),
        "condition": a.condition,
    });
    Ok(Artifact {
        csv: Some(render::matrix_csv(&a.alias)),
        text: render::alias_text(p, lead, &design, &a),
        json: value,
        default_format: Format::Text,
        trace: None,
    })
}
