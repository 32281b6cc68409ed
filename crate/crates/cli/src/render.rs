//! Human-readable tables and small CSV helpers.

use std::fmt::Write as _;

use fanova_shap::attribution::Attribution;
use fanova_shap::design::{AliasAnalysis, DesignMatrix};
use fanova_shap::fanova::AnovaDecomposition;
use fanova_shap::search::SearchResult;
use fanova_shap::sensitivity::{EffectiveDimension, ScreeningReport, SobolIndices};
use fanova_shap::Coalition;
use nalgebra::DMatrix;

fn braces(c: &Coalition) -> String {
    let labels: Vec<String> = c.labels().iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", labels.join(","))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `v` as a small fraction when one matches to 1e-9, else four decimals.
pub fn fraction(v: f64) -> String {
    if v.abs() < 1e-12 {
        return "0".into();
    }
    for q in 1..=64i64 {
        let p = (v * q as f64).round();
        if (v - p / q as f64).abs() < 1e-9 {
            return if q == 1 { format!("{}", p as i64) } else { format!("{}/{q}", p as i64) };
        }
    }
    format!("{v:.4}")
}

fn matrix_text(out: &mut String, title: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{title}");
    let cells: Vec<Vec<String>> = (0..m.nrows()).map(|i| m.row(i).iter().map(|v| fraction(*v)).collect()).collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    for row in cells {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        let _ = writeln!(out, "  {}", line.join("  "));
    }
}

pub fn attribution_text(a: &Attribution, model: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {model}, method {}, budget {}", a.method.name(), a.budget);
    let _ = writeln!(out, "f(target) = {:.4}   f(null) = {:.4}", a.f_target, a.f_null);
    let _ = writeln!(out, "{:<8} {:>10} {:>10}", "feature", "phi", "se");
    for (i, v) in a.phi.iter().enumerate() {
        let se = a.std_errors.as_ref().map_or("-".to_string(), |s| format!("{:.4}", s[i]));
        let _ = writeln!(out, "{:<8} {v:>10.4} {se:>10}", format!("x{}", i + 1));
    }
    let _ = writeln!(out, "sum = {:.4}, efficiency gap {:.2e}", a.phi.iter().sum::<f64>(), a.efficiency_gap());
    if let Some(c) = a.coverage {
        let _ = writeln!(out, "variance coverage {c:.4}");
    }
    for w in &a.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn anova_text(dec: &AnovaDecomposition, shapley: &Attribution) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ANOVA terms at {:?}, n = {}, seed = {}", dec.target, dec.n, dec.seed);
    let _ = writeln!(out, "{:<16} {:>10} {:>10}", "subset", "f_u(x)", "sigma2");
    for t in dec.terms.values() {
        let s2 = t.sigma2.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "{:<16} {:>10.4} {s2:>10}", braces(&t.subset), t.value);
    }
    let _ = writeln!(out, "f(x) = {:.4}, sum of terms = {:.4}", dec.f_target, dec.reconstruction());
    let phi: Vec<String> = shapley.phi.iter().map(|v| format!("{v:.4}")).collect();
    let _ = writeln!(out, "Shapley values: {}", phi.join(", "));
    out
}

pub fn search_csv(r: &SearchResult) -> String {
    let mut out = String::from("rank,subset,score,sigma2,cumulative\n");
    for (k, t) in r.selected.iter().enumerate() {
        let labels: Vec<String> = t.subset.labels().iter().map(|l| l.to_string()).collect();
        let _ =
            writeln!(out, "{},{},{:.16e},{:.16e},{:.16e}", k + 1, labels.join(" "), t.score, t.sigma2, t.cumulative);
    }
    out
}

pub fn search_text(r: &SearchResult, attribution: Option<&Attribution>) -> String {
    let mut out = String::new();
    let ranking: Vec<String> = r.selected.iter().map(|t| braces(&t.subset)).collect();
    let _ = writeln!(out, "selected: {}", ranking.join(" "));
    let _ = writeln!(
        out,
        "V_s / V_t = {:.4} / {:.4} = {:.4}, {} at order {}",
        r.v_selected,
        r.v_total,
        r.explained_fraction,
        if r.converged { "converged" } else { "not converged" },
        r.stopped_at_order
    );
    let _ = writeln!(out, "{:<12} {:>12} {:>10} {:>10}", "subset", "score", "sigma2", "cumulative");
    for t in &r.selected {
        let _ = writeln!(out, "{:<12} {:>12.4e} {:>10.4} {:>10.4}", braces(&t.subset), t.score, t.sigma2, t.cumulative);
    }
    if let Some(a) = attribution {
        let phi: Vec<String> = a.phi.iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(out, "Shapley values from selected terms: {}", phi.join(", "));
    }
    out
}

pub fn sensitivity_text(s: &SobolIndices, d: &EffectiveDimension, screening: &ScreeningReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Var f(X) = {:.4}, n = {}, seed = {}", s.variance, s.n, s.seed);
    let _ = writeln!(
        out,
        "{:<8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8}",
        "feature", "S_i", "se", "S_Ti", "se", "S_Ti-S_i", "se"
    );
    for i in 0..s.first_order.len() {
        let _ = writeln!(
            out,
            "{:<8} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>10.4} {:>8.4}",
            format!("x{}", i + 1),
            s.first_order[i],
            s.first_order_se[i],
            s.total[i],
            s.total_se[i],
            s.interaction[i],
            s.interaction_se[i]
        );
    }
    let _ = writeln!(out, "d_T <= {}, d_S <= {} (epsilon {})", d.d_t, d.d_s, d.epsilon);
    out.push_str(&screening.to_text());
    out
}

pub fn alias_text(p: usize, lead: usize, design: &DesignMatrix, a: &AliasAnalysis) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p = {p}, {} design rows (budget {}), lead feature {lead}", design.len(), design.budget());
    let columns: Vec<String> = ((lead + 1)..=p).map(|j| format!("x{lead}x{j}")).collect();
    let _ = writeln!(out, "interaction columns: {}", columns.join(" "));
    matrix_text(&mut out, "X_r*'WX_r*", &a.normal);
    matrix_text(&mut out, "(X_r*'WX_r*)^-1", &a.normal_inverse);
    matrix_text(&mut out, &format!("X_r*'WX_{lead}i*"), &a.cross);
    matrix_text(&mut out, "alias matrix", &a.alias);
    out
}
