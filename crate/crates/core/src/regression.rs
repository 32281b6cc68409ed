//! Shapley values as the solution of a weighted least-squares problem over a
//! coalition design, with the side condition `sum(beta) = y_t - y_b`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::attribution::{Attribution, Method};
use crate::coalition::{all_coalitions, check_enumerable, kernel_weight, shapley_weight, Coalition, ENUMERATION_CAP};
use crate::design::DesignMatrix;
use crate::distribution::Background;
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetric_condition, CONDITION_LIMIT};
use crate::model::ModelFunction;

/// Ridge added to `Z'WZ` when a design column is constant.
pub const RIDGE: f64 = 1e-8;

/// Design, weights and responses of one regression.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    pub design: DesignMatrix,
    /// Model output averaged over the background at each synthetic row.
    pub y: Vec<f64>,
    pub y_target: f64,
    pub y_null: f64,
}

impl RegressionProblem {
    pub fn new(design: DesignMatrix, y: Vec<f64>, y_target: f64, y_null: f64) -> Result<Self> {
        if y.len() != design.len() {
            return Err(Error::input(format!("{} responses for {} design rows", y.len(), design.len())));
        }
        if y.iter().chain([&y_target, &y_null]).any(|v| !v.is_finite()) {
            return Err(Error::input("responses must be finite"));
        }
        Ok(RegressionProblem { design, y, y_target, y_null })
    }

    /// Evaluates the model on the synthetic rows of `design`, averaging over
    /// the background (a single-row background is the single-baseline case).
    pub fn from_model(
        model: &ModelFunction,
        design: DesignMatrix,
        background: &Background,
        target: &[f64],
    ) -> Result<Self> {
        let p = model.dim();
        if target.len() != p {
            return Err(Error::Dimension { expected: p, got: target.len() });
        }
        if design.dim() != p {
            return Err(Error::input(format!("design has {} features, model has {p}", design.dim())));
        }
        let mut subsets: Vec<Coalition> = design.rows().to_vec();
        subsets.push(Coalition::empty(p));
        let values = background.expectations(model, target, &subsets)?;
        let y_null = values[values.len() - 1].mean;
        let y = values[..values.len() - 1].iter().map(|e| e.mean).collect();
        let y_target = model.evaluate(target)?;
        Self::new(design, y, y_target, y_null)
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    /// `Z'W v` for a response vector `v`.
    fn zw(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for ((z, w), y) in self.design.rows().iter().zip(self.design.weights()).zip(v) {
            for i in z.indices() {
                out[i] += w * y;
            }
        }
        out
    }

    /// JSON bundle of `Z`, `W`, `y`, `y_t`, `y_b` and a solution `beta`.
    pub fn dump_json(&self, beta: &[f64]) -> serde_json::Value {
        let z: Vec<Vec<u8>> = self.design.rows().iter().map(Coalition::to_bits).collect();
        json!({
            "Z": z,
            "W": self.design.weights(),
            "y": self.y,
            "y_t": self.y_target,
            "y_b": self.y_null,
            "beta": beta,
        })
    }
}

/// `Z'WZ` of a design.
pub fn normal_matrix(design: &DesignMatrix) -> DMatrix<f64> {
    let p = design.dim();
    let mut m = DMatrix::zeros(p, p);
    for (z, w) in design.rows().iter().zip(design.weights()) {
        let idx: Vec<usize> = z.indices().collect();
        for &a in &idx {
            for &b in &idx {
                m[(a, b)] += w;
            }
        }
    }
    m
}

/// `p/(p-1) I - 1/(p-1) J`, the projector applied to `Z'Wy` on the full
/// design.
pub fn closed_form_operator(p: usize) -> DMatrix<f64> {
    let q = (p - 1) as f64;
    DMatrix::from_fn(p, p, |a, b| if a == b { p as f64 / q - 1.0 / q } else { -1.0 / q })
}

fn has_kernel_weights(design: &DesignMatrix) -> bool {
    let p = design.dim();
    design
        .rows()
        .iter()
        .zip(design.weights())
        .all(|(z, w)| kernel_weight(p, z.size()).is_ok_and(|k| (w - k).abs() <= 1e-12 * k))
}

/// Closed-form solution on the full powerset design with kernel weights:
/// `beta = (p/(p-1) I - 1/(p-1) J) Z'Wy + j (y_t - y_b) / p`.
pub fn solve_closed_form(problem: &RegressionProblem) -> Result<Attribution> {
    let p = problem.dim();
    if !problem.design.is_full_powerset() || !has_kernel_weights(&problem.design) {
        return Err(Error::Contract(
            "the closed form needs the full kernel-weighted powerset design; use solve_constrained for sampled designs"
                .into(),
        ));
    }
    let zwy = problem.zw(&problem.y);
    let diff = problem.y_target - problem.y_null;
    let beta = closed_form_operator(p) * zwy;
    let phi = beta.iter().map(|b| b + diff / p as f64).collect();
    Ok(Attribution::new(phi, problem.y_target, problem.y_null, Method::RegressionClosedForm, problem.design.len()))
}

/// Lagrangian solution for an arbitrary design:
/// `beta = M^-1 (I - j A^-1 j' M^-1) Z'Wy + M^-1 j A^-1 (y_t - y_b)` with
/// `M = Z'WZ` and `A = j' M^-1 j`.
///
/// Responses are centered at `y_b` first, which leaves full and paired
/// designs unchanged and keeps sampled designs from leaking the intercept
/// into the coefficients. A constant design column or an ill-conditioned `M`
/// triggers a small ridge on `M` and a warning.
pub fn solve_constrained(problem: &RegressionProblem) -> Result<Attribution> {
    let p = problem.dim();
    let design = &problem.design;
    let mut warnings = Vec::new();
    let mut m = normal_matrix(design);

    let constant: Vec<usize> = (0..p)
        .filter(|&i| {
            let col = design.column(i);
            col.iter().all(|v| *v == col[0])
        })
        .collect();
    let reason = if !constant.is_empty() {
        let labels: Vec<String> = constant.iter().map(|i| (i + 1).to_string()).collect();
        Some(format!("design column(s) {} constant", labels.join(",")))
    } else {
        let condition = symmetric_condition(&m);
        (condition > CONDITION_LIMIT).then(|| format!("Z'WZ condition {condition:.3e} exceeds {CONDITION_LIMIT:e}"))
    };
    if let Some(reason) = reason {
        let msg = format!("{reason}; added ridge {RIDGE:e} to Z'WZ");
        warn!("{msg}");
        warnings.push(msg);
        for i in 0..p {
            m[(i, i)] += RIDGE;
        }
    }
    if design.budget() < 2 * p {
        let msg = format!("budget {} is below 2p = {}; coalition coverage is thin", design.budget(), 2 * p);
        warn!("{msg}");
        warnings.push(msg);
    }

    let (minv, condition) = spd_inverse(&m)?;
    debug_assert!(condition <= CONDITION_LIMIT);
    let centered: Vec<f64> = problem.y.iter().map(|v| v - problem.y_null).collect();
    let zwy = problem.zw(&centered);
    let j = DVector::from_element(p, 1.0);
    let minv_j = &minv * &j;
    let a = j.dot(&minv_j);
    let unconstrained = &minv * zwy;
    let diff = problem.y_target - problem.y_null;
    let lambda = (j.dot(&unconstrained) - diff) / a;
    let beta = unconstrained - minv_j * lambda;

    let mut out = Attribution::new(
        beta.iter().copied().collect(),
        problem.y_target,
        problem.y_null,
        Method::RegressionSampled,
        design.budget(),
    );
    out.seed = design.seed();
    out.warnings = warnings;
    Ok(out)
}

/// `B*`: row `i` holds the Shapley contrast coefficients of feature `i` over
/// all `2^p` corner predictions, ordered null corner, proper coalitions in
/// size-lexicographic order, full corner.
pub fn build_bstar(p: usize) -> Result<DMatrix<f64>> {
    if p < 2 {
        return Err(Error::input(format!("B* needs p >= 2, got {p}")));
    }
    check_enumerable(p, ENUMERATION_CAP)?;
    let corners = bstar_columns(p)?;
    Ok(DMatrix::from_fn(p, corners.len(), |i, c| {
        let z = corners[c];
        let s = z.size();
        if z.contains(i) {
            shapley_weight(p, s - 1)
        } else {
            -shapley_weight(p, s)
        }
    }))
}

/// Column order of [`build_bstar`].
pub fn bstar_columns(p: usize) -> Result<Vec<Coalition>> {
    all_coalitions(p)
}

/// Corner predictions `y*` in [`bstar_columns`] order.
pub fn corner_values(model: &ModelFunction, background: &Background, target: &[f64]) -> Result<Vec<f64>> {
    let p = model.dim();
    if target.len() != p {
        return Err(Error::Dimension { expected: p, got: target.len() });
    }
    let cols = bstar_columns(p)?;
    Ok(background.expectations(model, target, &cols)?.into_iter().map(|e| e.mean).collect())
}
