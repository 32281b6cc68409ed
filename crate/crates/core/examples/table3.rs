fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100_000);
    let report = fanova_shap::table3::table3_experiment(n, 1).unwrap();
    print!("{}", report.to_text());
}
