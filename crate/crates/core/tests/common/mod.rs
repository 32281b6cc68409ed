//! Helpers shared by the integration tests: seeded random polynomials and a
//! permutation-average Shapley oracle that shares no code with the library.

#![allow(dead_code)]

use fanova_shap::rng::rng_for;
use fanova_shap::ModelFunction;
use rand::Rng;

/// Sum of monomials `c * prod x_i^k`.
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl Polynomial {
    /// `count` monomials of up to `max_vars` distinct features, exponents
    /// 1 or 2, coefficients uniform in `[-2, 2]`.
    pub fn random(dim: usize, count: usize, max_vars: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, 0x706f_6c79);
        let mut terms = Vec::with_capacity(count);
        for _ in 0..count {
            let k = rng.random_range(1..=max_vars.min(dim));
            let mut vars: Vec<usize> = (0..dim).collect();
            for a in 0..k {
                let b = rng.random_range(a..dim);
                vars.swap(a, b);
            }
            let factors = vars[..k].iter().map(|&v| (v, rng.random_range(1..=2))).collect();
            terms.push((rng.random_range(-2.0..2.0), factors));
        }
        Polynomial { dim, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.iter().map(|&(v, k)| x[v].powi(k)).product::<f64>()).sum()
    }

    pub fn model(&self) -> ModelFunction {
        let poly = self.clone();
        ModelFunction::from_fn(self.dim, "polynomial", move |x| poly.eval(x))
    }
}

/// Uniform vector in `[lo, hi)^p`.
pub fn random_point(p: usize, lo: f64, hi: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, stream);
    (0..p).map(|_| rng.random_range(lo..hi)).collect()
}

/// Shapley values of `f` for a single baseline, averaging marginal
/// contributions over all `p!` orderings.
pub fn permutation_shapley(f: &dyn Fn(&[f64]) -> f64, baseline: &[f64], target: &[f64]) -> Vec<f64> {
    let p = target.len();
    let mut phi = vec![0.0; p];
    let mut order: Vec<usize> = (0..p).collect();
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        let mut x = baseline.to_vec();
        let mut prev = f(&x);
        for &i in perm {
            x[i] = target[i];
            let next = f(&x);
            phi[i] += next - prev;
            prev = next;
        }
        count += 1;
    });
    phi.iter().map(|v| v / count as f64).collect()
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
