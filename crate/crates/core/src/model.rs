//! Black-box prediction functions.
//!
//! A [`ModelFunction`] maps an `n x p` input matrix to `n` predictions. It
//! can wrap one of the analytic [`BuiltinFunction`]s, an arbitrary Rust
//! closure, or an external process speaking a CSV-over-stdio protocol.

use std::fmt;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Analytic test functions. All take three inputs; trigonometric terms use
/// radians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinFunction {
    /// `-2 x1 + 1.5 x2 + 0.5 x3`
    Linear3,
    /// `linear3 - 2 x2 x3`
    LinearInteraction3,
    /// `-2 sin(x1) + 1.5 |x2| + 0.125 x3^2`
    Nonlinear3,
    /// `nonlinear3 + cos(x2 x3)`
    NonlinearInteraction3,
    /// `x1 + x2 + x3 + x2 x3`
    AdditivePair4,
}

impl BuiltinFunction {
    pub const ALL: [BuiltinFunction; 5] = [
        BuiltinFunction::Linear3,
        BuiltinFunction::LinearInteraction3,
        BuiltinFunction::Nonlinear3,
        BuiltinFunction::NonlinearInteraction3,
        BuiltinFunction::AdditivePair4,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinFunction::Linear3 => "linear3",
            BuiltinFunction::LinearInteraction3 => "linear-interaction3",
            BuiltinFunction::Nonlinear3 => "nonlinear3",
            BuiltinFunction::NonlinearInteraction3 => "nonlinear-interaction3",
            BuiltinFunction::AdditivePair4 => "additive-pair4",
        }
    }

    pub fn formula(&self) -> &'static str {
        match self {
            BuiltinFunction::Linear3 => "-2 x1 + 1.5 x2 + 0.5 x3",
            BuiltinFunction::LinearInteraction3 => "-2 x1 + 1.5 x2 + 0.5 x3 - 2 x2 x3",
            BuiltinFunction::Nonlinear3 => "-2 sin(x1) + 1.5 |x2| + 0.125 x3^2",
            BuiltinFunction::NonlinearInteraction3 => "-2 sin(x1) + 1.5 |x2| + 0.125 x3^2 + cos(x2 x3)",
            BuiltinFunction::AdditivePair4 => "x1 + x2 + x3 + x2 x3",
        }
    }

    pub fn dim(&self) -> usize {
        3
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        match self {
            BuiltinFunction::Linear3 => -2.0 * x1 + 1.5 * x2 + 0.5 * x3,
            BuiltinFunction::LinearInteraction3 => -2.0 * x1 + 1.5 * x2 + 0.5 * x3 - 2.0 * x2 * x3,
            BuiltinFunction::Nonlinear3 => -2.0 * x1.sin() + 1.5 * x2.abs() + 0.125 * x3 * x3,
            BuiltinFunction::NonlinearInteraction3 => {
                -2.0 * x1.sin() + 1.5 * x2.abs() + 0.125 * x3 * x3 + (x2 * x3).cos()
            }
            BuiltinFunction::AdditivePair4 => x1 + x2 + x3 + x2 * x3,
        }
    }
}

impl fmt::Display for BuiltinFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinFunction::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| {
            let names: Vec<_> = BuiltinFunction::ALL.iter().map(|b| b.name()).collect();
            Error::input(format!("unknown builtin model `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

type RowFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Evaluator {
    Builtin(BuiltinFunction),
    Closure(Arc<RowFn>),
    External(Arc<ExternalProcess>),
}

/// A deterministic prediction function `R^p -> R` with batched evaluation.
#[derive(Clone)]
pub struct ModelFunction {
    dim: usize,
    label: String,
    evaluator: Evaluator,
}

impl fmt::Debug for ModelFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelFunction").field("dim", &self.dim).field("label", &self.label).finish()
    }
}

impl ModelFunction {
    pub fn builtin(kind: BuiltinFunction) -> Self {
        ModelFunction { dim: kind.dim(), label: kind.name().to_string(), evaluator: Evaluator::Builtin(kind) }
    }

    /// Wraps a row function. The closure must be pure.
    pub fn from_fn<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ModelFunction { dim, label: label.into(), evaluator: Evaluator::Closure(Arc::new(f)) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_external(&self) -> bool {
        matches!(self.evaluator, Evaluator::External(_))
    }

    /// Applies the model to every row of `inputs`.
    pub fn evaluate_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if inputs.ncols() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: inputs.ncols() });
        }
        if let Some(((r, c), v)) = inputs.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::input(format!("non-finite input {v} at row {}, column {}", r + 1, c + 1)));
        }
        match &self.evaluator {
            Evaluator::Builtin(b) => Ok(map_rows(inputs, |x| b.eval(x))),
            Evaluator::Closure(f) => Ok(map_rows(inputs, |x| f(x))),
            Evaluator::External(proc_) => proc_.evaluate(inputs),
        }
    }

    /// Convenience for a single input vector.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::input(e.to_string()))?;
        Ok(self.evaluate_batch(view)?[0])
    }
}

/// Batches at least this large are evaluated on the rayon pool.
#[cfg(feature = "parallel")]
const PARALLEL_ROWS: usize = 4096;

fn map_rows(inputs: ArrayView2<'_, f64>, f: impl Fn(&[f64]) -> f64 + Sync) -> Array1<f64> {
    #[cfg(feature = "parallel")]
    if inputs.nrows() >= PARALLEL_ROWS && inputs.ncols() > 0 {
        use rayon::prelude::*;
        let owned;
        let data = match inputs.as_slice() {
            Some(s) => s,
            None => {
                owned = inputs.as_standard_layout().into_owned();
                owned.as_slice().expect("standard layout")
            }
        };
        return data.par_chunks(inputs.ncols()).map(&f).collect::<Vec<_>>().into();
    }
    let mut buf = vec![0.0; inputs.ncols()];
    inputs
        .rows()
        .into_iter()
        .map(|row| match row.as_slice() {
            Some(s) => f(s),
            None => {
                for (b, v) in buf.iter_mut().zip(row.iter()) {
                    *b = *v;
                }
                f(&buf)
            }
        })
        .collect()
}

/// Model backed by a child process.
///
/// The input matrix is written to the child's stdin as headerless CSV with 17
/// significant digits; the child must print one prediction per line. Calls on
/// one instance are serialized.
struct ExternalProcess {
    command: String,
    lock: Mutex<()>,
}

/// Builds a model that shells out to `command` (run through `sh -c`) once per
/// batch.
pub fn load_external_model(command: &str, p: usize) -> Result<ModelFunction> {
    if p == 0 {
        return Err(Error::input("external model needs at least one feature"));
    }
    if command.trim().is_empty() {
        return Err(Error::input("external model command is empty"));
    }
    Ok(ModelFunction {
        dim: p,
        label: format!("external:{command}"),
        evaluator: Evaluator::External(Arc::new(ExternalProcess {
            command: command.to_string(),
            lock: Mutex::new(()),
        })),
    })
}

/// Formats a float with 17 significant digits.
pub fn format_full_precision(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_csv_rows(inputs: ArrayView2<'_, f64>) -> String {
    let mut out = String::with_capacity(inputs.len() * 24);
    for row in inputs.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_full_precision(*v));
        }
        out.push('\n');
    }
    out
}

pub(crate) fn parse_prediction_lines(stdout: &str, expected: usize) -> Result<Array1<f64>> {
    let body = stdout.strip_suffix('\n').unwrap_or(stdout);
    let lines: Vec<&str> = if body.is_empty() { Vec::new() } else { body.split('\n').collect() };
    if lines.len() != expected {
        return Err(Error::Evaluation(format!(
            "external model returned {} lines for {expected} input rows",
            lines.len()
        )));
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            line.trim()
                .parse::<f64>()
                .map_err(|_| Error::Evaluation(format!("cannot parse prediction on line {}: {:?}", i + 1, line.trim())))
        })
        .collect()
}

impl ExternalProcess {
    fn evaluate(&self, inputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if inputs.nrows() == 0 {
            return Ok(Array1::zeros(0));
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let payload = write_csv_rows(inputs);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Evaluation(format!("failed to spawn `{}`: {e}", self.command)))?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = std::thread::spawn(move || {
            // A child that exits early closes the pipe; that surfaces through
            // the line-count check instead.
            let _ = stdin.write_all(payload.as_bytes());
        });
        let mut stdout = String::new();
        let mut stderr = String::new();
        child
            .stdout
            .take()
            .expect("stdout is piped")
            .read_to_string(&mut stdout)
            .map_err(|e| Error::Evaluation(format!("reading model output: {e}")))?;
        child.stderr.take().expect("stderr is piped").read_to_string(&mut stderr).ok();
        let status = child.wait().map_err(|e| Error::Evaluation(e.to_string()))?;
        let _ = writer.join();

        if !status.success() {
            return Err(Error::Evaluation(format!(
                "`{}` exited with {status}; stderr: {}",
                self.command,
                stderr.trim()
            )));
        }
        parse_prediction_lines(&stdout, inputs.nrows())
    }
}

/// Stacks `rows` into a matrix; handy in tests and for small inputs.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::input("rows have unequal lengths"));
    }
    Array2::from_shape_vec((rows.len(), p), rows.concat()).map_err(|e| Error::input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn builtin_values() {
        let lin = ModelFunction::builtin(BuiltinFunction::Linear3);
        assert_eq!(lin.evaluate(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(lin.evaluate(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let inter = ModelFunction::builtin(BuiltinFunction::LinearInteraction3);
        assert_eq!(inter.evaluate(&[1.0, 1.0, 1.0]).unwrap(), -2.0);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let m = ModelFunction::builtin(BuiltinFunction::Linear3);
        assert!(matches!(m.evaluate_batch(array![[1.0, 2.0]].view()), Err(Error::Dimension { expected: 3, got: 2 })));
        assert!(matches!(m.evaluate_batch(array![[1.0, f64::NAN, 0.0]].view()), Err(Error::Input(_))));
    }

    #[test]
    fn parse_builtin_names() {
        for b in BuiltinFunction::ALL {
            assert_eq!(b.name().parse::<BuiltinFunction>().unwrap(), b);
        }
        assert!("cubic".parse::<BuiltinFunction>().is_err());
    }

    #[test]
    fn csv_payload_is_lossless() {
        let x = array![[0.1, -1.0 / 3.0], [1e-300, 12345.678]];
        let text = write_csv_rows(x.view());
        let back: Vec<f64> = text.lines().flat_map(|l| l.split(',')).map(|v| v.parse().unwrap()).collect();
        assert_eq!(back, x.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn prediction_parsing_errors() {
        assert_eq!(parse_prediction_lines("1\n2\n", 2).unwrap().to_vec(), vec![1.0, 2.0]);
        let short = parse_prediction_lines("1\n", 2).unwrap_err().to_string();
        assert!(short.contains("1 lines for 2"), "{short}");
        let bad = parse_prediction_lines("1\nabc\n3\n", 3).unwrap_err().to_string();
        assert!(bad.contains("line 2"), "{bad}");
    }
}
