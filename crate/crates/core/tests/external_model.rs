//! The child-process model protocol, driven by small `sh`/`awk` scripts.

use fanova_shap::exact::exact_shapley_single;
use fanova_shap::model::{load_external_model, matrix_from_rows};
use fanova_shap::{BuiltinFunction, Error, ModelFunction};

fn rows(r: &[&[f64]]) -> ndarray::Array2<f64> {
    matrix_from_rows(&r.iter().map(|v| v.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn echoes_first_column() {
    let m = load_external_model("cut -d, -f1", 2).unwrap();
    let out = m.evaluate_batch(rows(&[&[3.0, 0.0], &[5.0, 0.0]]).view()).unwrap();
    assert_eq!(out.to_vec(), vec![3.0, 5.0]);
    assert!(m.is_external());
}

#[test]
fn full_precision_survives_the_pipe() {
    let m = load_external_model("cut -d, -f1", 1).unwrap();
    let v = [std::f64::consts::PI, 1.0 / 3.0, -2.5e-300, 1.0e300];
    let input = rows(&v.iter().map(std::slice::from_ref).collect::<Vec<_>>());
    assert_eq!(m.evaluate_batch(input.view()).unwrap().to_vec(), v.to_vec());
}

#[test]
fn external_linear3_reproduces_builtin_attribution() {
    let script = r#"awk -F, '{ printf "%.17g\n", -2*$1 + 1.5*$2 + 0.5*$3 }'"#;
    let m = load_external_model(script, 3).unwrap();
    let got = exact_shapley_single(&m, &[0.0; 3], &[1.0; 3]).unwrap();
    let want = exact_shapley_single(&ModelFunction::builtin(BuiltinFunction::Linear3), &[0.0; 3], &[1.0; 3]).unwrap();
    for (g, w) in got.phi.iter().zip(&want.phi) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn short_output_is_an_evaluation_error() {
    let m = load_external_model("head -n 1 | cut -d, -f1", 1).unwrap();
    let err = m.evaluate_batch(rows(&[&[1.0], &[2.0]]).view()).unwrap_err();
    assert!(matches!(err, Error::Evaluation(ref msg) if msg.contains("1 lines for 2")), "{err}");
}

#[test]
fn unparsable_line_is_reported_with_its_number() {
    let m = load_external_model(r#"awk 'NR == 2 { print "abc"; next } { print 1 }'"#, 1).unwrap();
    let err = m.evaluate_batch(rows(&[&[1.0], &[2.0], &[3.0]]).view()).unwrap_err();
    assert!(matches!(err, Error::Evaluation(ref msg) if msg.contains("line 2")), "{err}");
}

#[test]
fn failing_command_surfaces_stderr() {
    let m = load_external_model("cat > /dev/null; echo boom >&2; exit 3", 1).unwrap();
    let err = m.evaluate_batch(rows(&[&[1.0]]).view()).unwrap_err();
    assert!(matches!(err, Error::Evaluation(ref msg) if msg.contains("boom")), "{err}");
}

#[test]
fn empty_batch_skips_the_child() {
    let m = load_external_model("exit 1", 2).unwrap();
    let out = m.evaluate_batch(ndarray::Array2::zeros((0, 2)).view()).unwrap();
    assert!(out.is_empty());
}

#[test]
fn bad_arguments_rejected() {
    assert!(load_external_model("", 2).unwrap_err().is_input());
    assert!(load_external_model("cat", 0).unwrap_err().is_input());
    let m = load_external_model("cut -d, -f1", 2).unwrap();
    assert!(matches!(m.evaluate_batch(rows(&[&[1.0, 2.0, 3.0]]).view()), Err(Error::Dimension { .. })));
}
