//! Invariants checked over generated inputs.

mod common;

use common::{max_abs_diff, random_point, Polynomial};
use fanova_shap::attribution::Attribution;
use fanova_shap::coalition::{all_coalitions, binomial, kernel_weight, synthesize, Coalition};
use fanova_shap::design::{full_powerset_design, paired_block_sample};
use fanova_shap::distribution::{Background, BaselineDistribution};
use fanova_shap::exact::{exact_shapley_background, exact_shapley_single};
use fanova_shap::regression::{build_bstar, solve_closed_form, solve_constrained, RegressionProblem};
use fanova_shap::search::l2coe;
use fanova_shap::ModelFunction;
use ndarray::{concatenate, Array2, Axis};
use proptest::prelude::*;

fn single_background(b: &[f64]) -> Background {
    Background::from_rows(Array2::from_shape_vec((1, b.len()), b.to_vec()).unwrap()).unwrap()
}

fn mask_and_dim() -> impl Strategy<Value = (usize, u64)> {
    (1usize..=64).prop_flat_map(|p| {
        let max = if p == 64 { u64::MAX } else { (1u64 << p) - 1 };
        (Just(p), 0..=max)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn coalition_bits_round_trip((p, mask) in mask_and_dim()) {
        let c = Coalition::from_mask(p, mask).unwrap();
        prop_assert_eq!(Coalition::from_bits(&c.to_bits()).unwrap(), c);
        prop_assert_eq!(c.complement().complement(), c);
        prop_assert_eq!(c.size() + c.complement().size(), p);
        let json = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(serde_json::from_str::<Coalition>(&json).unwrap(), c);
    }

    #[test]
    fn coalition_order_is_size_then_lex(p in 2usize..=8) {
        let all = all_coalitions(p).unwrap();
        prop_assert_eq!(all.len(), 1 << p);
        for w in all.windows(2) {
            prop_assert!(w[0] < w[1]);
            prop_assert!(w[0].size() <= w[1].size());
        }
    }

    #[test]
    fn synthetic_rows_take_target_or_baseline(p in 1usize..=8, mask in any::<u64>(), seed in any::<u64>()) {
        let c = Coalition::from_mask(p, mask & ((1u64 << p) - 1)).unwrap();
        let b = random_point(p, -5.0, 5.0, seed, 1);
        let t = random_point(p, -5.0, 5.0, seed, 2);
        let batch = synthesize(&[c], &b, &t).unwrap();
        for j in 0..p {
            let expected = if c.contains(j) { t[j] } else { b[j] };
            prop_assert_eq!(batch.matrix[[0, j]], expected);
        }
    }

    #[test]
    fn kernel_mass_per_size(p in 2usize..=30, s in 1usize..30) {
        prop_assume!(s < p);
        let mass = binomial(p, s) * kernel_weight(p, s).unwrap();
        let expected = (p - 1) as f64 / (s * (p - s)) as f64;
        prop_assert!((mass - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn paired_design_invariants(p in 2usize..=12, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let max = (1usize << p) - 2;
        let m = (2 + (frac * (max - 2) as f64) as usize).min(max);
        let d = paired_block_sample(p, m, seed).unwrap();
        prop_assert!(d.len() <= m);
        prop_assert_eq!(d.budget(), m);
        prop_assert!(d.weights().iter().all(|w| *w > 0.0 && w.is_finite()));
        prop_assert!(d.rows().iter().all(|z| !z.is_empty() && !z.is_full()));
        let mut sorted = d.rows().to_vec();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), d.len(), "rows are aggregated");
        let plan = d.block_plan();
        let covered: Vec<usize> = plan.enumerated_sizes.iter().chain(&plan.sampled_sizes).copied().collect();
        prop_assert!(plan.tail_draws == 0 || !plan.sampled_sizes.is_empty());
        // enumerated blocks keep their kernel mass and tail draws share the rest
        let total: f64 = d.weights().iter().sum();
        let expected: f64 = covered.iter().map(|&s| (p - 1) as f64 / (s * (p - s)) as f64).sum();
        prop_assert!((total - expected).abs() <= 1e-9 * expected, "{} vs {}", total, expected);
        let again = paired_block_sample(p, m, seed).unwrap();
        prop_assert_eq!(again.rows(), d.rows());
    }

    #[test]
    fn exact_route_is_efficient(p in 2usize..=7, seed in any::<u64>()) {
        let poly = Polynomial::random(p, 2 * p, 3, seed);
        let b = random_point(p, -2.0, 2.0, seed, 1);
        let t = random_point(p, -2.0, 2.0, seed, 2);
        let a = exact_shapley_single(&poly.model(), &b, &t).unwrap();
        let scale = 1.0 + poly.eval(&t).abs() + poly.eval(&b).abs();
        prop_assert!(a.efficiency_gap().abs() <= 1e-10 * scale);
        prop_assert!(a.validate_efficiency(1e-10 * scale).is_ok());
    }

    #[test]
    fn constrained_solve_satisfies_side_condition(p in 2usize..=9, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let max = (1usize << p) - 2;
        let m = (2 + (frac * (max - 2) as f64) as usize).min(max);
        let poly = Polynomial::random(p, 2 * p, 3, seed);
        let b = random_point(p, -1.0, 1.0, seed, 1);
        let t = random_point(p, -1.0, 1.0, seed, 2);
        let design = paired_block_sample(p, m, seed).unwrap();
        let problem = RegressionProblem::from_model(&poly.model(), design, &single_background(&b), &t).unwrap();
        let a = solve_constrained(&problem).unwrap();
        let target = problem.y_target - problem.y_null;
        prop_assert!((a.phi.iter().sum::<f64>() - target).abs() <= 1e-10 * (1.0 + target.abs()));
    }

    #[test]
    fn closed_form_equals_constrained_on_full_design(p in 2usize..=8, seed in any::<u64>()) {
        let poly = Polynomial::random(p, 2 * p, 3, seed);
        let b = random_point(p, -1.0, 1.0, seed, 1);
        let t = random_point(p, -1.0, 1.0, seed, 2);
        let problem = RegressionProblem::from_model(&poly.model(), full_powerset_design(p).unwrap(), &single_background(&b), &t)
            .unwrap();
        let closed = solve_closed_form(&problem).unwrap();
        let constrained = solve_constrained(&problem).unwrap();
        prop_assert!(max_abs_diff(&closed.phi, &constrained.phi) < 1e-10);
    }

    #[test]
    fn bstar_rows_sum_to_zero(p in 2usize..=10) {
        let b = build_bstar(p).unwrap();
        for i in 0..p {
            prop_assert!(b.row(i).sum().abs() < 1e-12);
            prop_assert!((b[(i, 0)] + 1.0 / p as f64).abs() < 1e-15);
            prop_assert!((b[(i, b.ncols() - 1)] - 1.0 / p as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_evaluation_commutes_with_concatenation(rows_a in 0usize..5000, rows_b in 0usize..200, seed in any::<u64>()) {
        let p = 3;
        let poly = Polynomial::random(p, 6, 3, seed);
        let model = poly.model();
        let dist = BaselineDistribution::standard_normal(p).unwrap();
        let a = dist.sample(rows_a, seed).unwrap();
        let b = dist.sample(rows_b, seed ^ 1).unwrap();
        let joint = model.evaluate_batch(concatenate![Axis(0), a, b].view()).unwrap();
        let parts = concatenate![Axis(0), model.evaluate_batch(a.view()).unwrap(), model.evaluate_batch(b.view()).unwrap()];
        prop_assert_eq!(joint, parts);
        for (r, row) in a.rows().into_iter().enumerate().take(20) {
            prop_assert_eq!(model.evaluate(row.as_slice().unwrap()).unwrap(), model.evaluate_batch(a.view()).unwrap()[r]);
        }
    }

    #[test]
    fn l2coe_scales_quadratically(c in -5.0f64..5.0, mask in 1u64..8, seed in 0u64..1000) {
        let base = |x: &[f64]| x[0] + x[1] + x[2] + x[1] * x[2];
        let m = ModelFunction::from_fn(3, "f", base);
        let scaled = ModelFunction::from_fn(3, "cf", move |x| c * base(x));
        let d = BaselineDistribution::uniform01(3).unwrap();
        let s = Coalition::from_mask(3, mask).unwrap();
        let a = l2coe(&m, &d, s, 200, seed).unwrap().value;
        let b = l2coe(&scaled, &d, s, 200, seed).unwrap().value;
        prop_assert!((b - c * c * a).abs() <= 1e-10 * (1.0 + b.abs()));
    }

    #[test]
    fn attribution_json_round_trip(p in 2usize..=6, seed in any::<u64>()) {
        let poly = Polynomial::random(p, p + 2, 2, seed);
        let bg = BaselineDistribution::uniform01(p).unwrap().background(16, seed).unwrap();
        let a = exact_shapley_background(&poly.model(), &bg, &random_point(p, 0.0, 1.0, seed, 3)).unwrap();
        let back: Attribution = serde_json::from_value(a.to_json()).unwrap();
        prop_assert_eq!(back, a);
    }
}
