//! WebAssembly bindings for the static page in `www/`. Every export takes
//! plain strings and numbers and returns a JSON string; failures come back
//! as `{"error": "..."}`.

use fanova_shap::design::{alias_matrix, full_powerset_design, interaction_columns, paired_block_sample};
use fanova_shap::distribution::BaselineDistribution;
use fanova_shap::exact::{exact_shapley_background, exact_shapley_single};
use fanova_shap::sensitivity::{effective_dimensions_from_indices, sobol_indices};
use fanova_shap::table3::baseline_distribution;
use fanova_shap::{BuiltinFunction, Error, ModelFunction, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(result: Result<Value>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn parse_point(text: &str, p: usize) -> Result<Vec<f64>> {
    let x = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Input(format!("`{}` is not a number", v.trim()))))
        .collect::<Result<Vec<f64>>>()?;
    if x.len() != p {
        return Err(Error::Dimension { expected: p, got: x.len() });
    }
    Ok(x)
}

fn model(name: &str) -> Result<ModelFunction> {
    Ok(ModelFunction::builtin(name.parse::<BuiltinFunction>()?))
}

fn explain_all(name: &str, target: &str, n: usize, seed: u64) -> Result<Value> {
    let builtin = name.parse::<BuiltinFunction>()?;
    let model = ModelFunction::builtin(builtin);
    let x = parse_point(target, model.dim())?;
    let mut cells = Vec::new();
    for label in ['A', 'B', 'C', 'D'] {
        let a = match label {
            'C' => exact_shapley_background(
                &model,
                &BaselineDistribution::gaussian_local(x.clone(), 0.25)?.background(n, seed)?,
                &x,
            )?,
            'D' => exact_shapley_single(&model, &[0.0; 3], &x)?,
            _ => exact_shapley_background(&model, &baseline_distribution(label)?.background(n, seed)?, &x)?,
        };
        cells.push(json!({
            "baseline": label.to_string(),
            "phi": a.phi,
            "f_target": a.f_target,
            "f_null": a.f_null,
            "std_errors": a.std_errors,
        }));
    }
    Ok(json!({ "model": name, "formula": builtin.formula(), "target": x, "cells": cells }))
}

/// Shapley values of a builtin model at `target` (comma separated) under the
/// four reference baselines: standard normal, correlated normal, a local
/// normal around the target and the origin.
#[wasm_bindgen]
pub fn explain(model: &str, target: &str, n: u32, seed: u32) -> String {
    respond(explain_all(model, target, n.max(1) as usize, seed as u64))
}

fn alias_json(p: usize, budget: usize, lead: usize, full: bool, seed: u64) -> Result<Value> {
    if lead == 0 || lead >= p {
        return Err(Error::Input(format!("lead must lie in 1..{}", p - 1)));
    }
    let design = if full { full_powerset_design(p)? } else { paired_block_sample(p, budget, seed)? };
    let a = alias_matrix(&design, &interaction_columns(&design, 2, lead - 1)?)?;
    Ok(json!({
        "p": p,
        "lead": lead,
        "rows": design.len(),
        "interactions": ((lead + 1)..=p).map(|j| format!("x{lead}x{j}")).collect::<Vec<_>>(),
        "alias": (0..a.alias.nrows()).map(|i| a.alias.row(i).iter().copied().collect()).collect::<Vec<Vec<f64>>>(),
        "condition": a.condition,
    }))
}

/// Alias matrix of the interactions `x_lead x_j` against the main effects
/// for a paired design of `budget` rows, or the full design when `full`.
#[wasm_bindgen]
pub fn alias(p: u32, budget: u32, lead: u32, full: bool, seed: u32) -> String {
    respond(alias_json(p as usize, budget as usize, lead as usize, full, seed as u64))
}

fn sobol_json(name: &str, n: usize, seed: u64, epsilon: f64) -> Result<Value> {
    let model = model(name)?;
    let dist = BaselineDistribution::uniform01(model.dim())?;
    let s = sobol_indices(&model, &dist, n, seed)?;
    let d = effective_dimensions_from_indices(&s, epsilon)?;
    Ok(json!({ "indices": s.to_json(), "effective_dimension": d }))
}

/// First-order and total Sobol indices of a builtin model under U(0,1)^3.
#[wasm_bindgen]
pub fn sobol(model: &str, n: u32, seed: u32, epsilon: f64) -> String {
    respond(sobol_json(model, n.max(2) as usize, seed as u64, epsilon))
}
