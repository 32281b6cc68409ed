//! Shapley values straight from the marginal-contribution formula over all
//! `2^p` coalitions.

use ndarray::{Array2, ArrayView2};

use crate::attribution::{Attribution, Method};
use crate::coalition::{check_enumerable, shapley_weight, Coalition, ENUMERATION_CAP};
use crate::distribution::Background;
use crate::error::{Error, Result};
use crate::model::ModelFunction;

/// Upper bound on rows per model call when stacking coalitions.
const ROWS_PER_BATCH: usize = 1 << 20;

/// Shapley values of the game whose characteristic function is `nu`,
/// indexed by coalition bit mask (`nu.len() == 2^p`).
pub fn shapley_from_table(p: usize, nu: &[f64]) -> Vec<f64> {
    debug_assert_eq!(nu.len(), 1 << p);
    let w: Vec<f64> = (0..p).map(|s| shapley_weight(p, s)).collect();
    let mut phi = vec![0.0; p];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..nu.len() {
            if mask & bit == 0 {
                *phi_i += w[mask.count_ones() as usize] * (nu[mask | bit] - nu[mask]);
            }
        }
    }
    phi
}

/// Exact Shapley values for one baseline point. Uses exactly `2^p` model
/// evaluations.
pub fn exact_shapley_single(model: &ModelFunction, baseline: &[f64], target: &[f64]) -> Result<Attribution> {
    let rows =
        Array2::from_shape_vec((1, baseline.len()), baseline.to_vec()).map_err(|e| Error::input(e.to_string()))?;
    exact_shapley_multi(model, rows.view(), target)
}

/// Mean of the single-baseline Shapley values over the rows of `baselines`,
/// with the standard error of that mean per feature.
pub fn exact_shapley_multi(
    model: &ModelFunction,
    baselines: ArrayView2<'_, f64>,
    target: &[f64],
) -> Result<Attribution> {
    if baselines.nrows() == 0 {
        return Err(Error::input("baseline set is empty"));
    }
    let background = Background::from_rows(baselines.to_owned())?;
    exact_shapley_background(model, &background, target)
}

/// Exact Shapley values of the game `nu(S) = E[f(X) | X_S = x_S]`, the
/// expectation taken over `background`.
///
/// Each background draw defines its own game; the result is the mean of the
/// per-draw Shapley values, which by linearity equals the Shapley value of
/// the averaged game.
pub fn exact_shapley_background(model: &ModelFunction, background: &Background, target: &[f64]) -> Result<Attribution> {
    let p = model.dim();
    if target.len() != p {
        return Err(Error::Dimension { expected: p, got: target.len() });
    }
    if background.dim() != p {
        return Err(Error::Dimension { expected: p, got: background.dim() });
    }
    check_enumerable(p, ENUMERATION_CAP)?;
    let n = background.len();
    let corners = 1usize << p;
    let f_target = model.evaluate(target)?;
    let chunk = (ROWS_PER_BATCH / corners).max(1);

    let mut sum = vec![0.0; p];
    let mut sum_sq = vec![0.0; p];
    let mut null_sum = 0.0;
    let mut evaluations = 1;
    let mut nu = vec![0.0; corners];
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let len = end - start;
        // stacked inputs: block `mask` holds rows start..end conditioned on `mask`
        let mut stacked = Array2::zeros(((corners - 1) * len, p));
        for mask in 0..corners - 1 {
            let u = Coalition::from_mask(p, mask as u64)?;
            let block = background.conditioned_range(target, u, start, end)?;
            stacked.slice_mut(ndarray::s![mask * len..(mask + 1) * len, ..]).assign(&block);
        }
        let values = model.evaluate_batch(stacked.view())?;
        evaluations += values.len();
        for k in 0..len {
            for (mask, v) in nu.iter_mut().enumerate().take(corners - 1) {
                *v = values[mask * len + k];
            }
            nu[corners - 1] = f_target;
            null_sum += nu[0];
            for (i, phi) in shapley_from_table(p, &nu).into_iter().enumerate() {
                sum[i] += phi;
                sum_sq[i] += phi * phi;
            }
        }
        start = end;
    }

    let nf = n as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let mut out = Attribution::new(phi.clone(), f_target, null_sum / nf, Method::ExactFormula, evaluations);
    if n > 1 {
        let se =
            sum_sq.iter().zip(&phi).map(|(sq, m)| ((sq / nf - m * m).max(0.0) * nf / (nf - 1.0) / nf).sqrt()).collect();
        out.std_errors = Some(se);
    }
    Ok(out)
}
