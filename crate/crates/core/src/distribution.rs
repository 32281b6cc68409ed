//! Baseline distributions `p(X)` and the background samples drawn from them.
//!
//! A [`Background`] is a fixed set of draws used to estimate conditional
//! expectations `E[f(X) | X_u = x_u]`. Under product laws (and for explicit
//! baseline rows) conditioning is coordinate overwrite. Under a correlated
//! Gaussian the free coordinates are drawn from the exact conditional law,
//! driven by one shared matrix of standard normals so every subset sees the
//! same random numbers.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::{s, Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::model::ModelFunction;
use crate::rng::{rng_for, STREAM_BACKGROUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    Single,
    Empirical,
    GaussianIndependent,
    GaussianCorrelated,
    GaussianLocal,
    Uniform01,
}

impl DistributionKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistributionKind::Single => "single",
            DistributionKind::Empirical => "empirical",
            DistributionKind::GaussianIndependent => "gaussian-independent",
            DistributionKind::GaussianCorrelated => "gaussian-correlated",
            DistributionKind::GaussianLocal => "gaussian-local",
            DistributionKind::Uniform01 => "uniform01",
        }
    }
}

#[derive(Debug, Clone)]
enum Law {
    Point(Vec<f64>),
    Rows(Array2<f64>),
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64>, factor: DMatrix<f64> },
    Uniform01,
}

/// The reference law against which attributions are computed.
#[derive(Debug, Clone)]
pub struct BaselineDistribution {
    kind: DistributionKind,
    dim: usize,
    law: Law,
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Distribution(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl BaselineDistribution {
    /// Point mass at `b`.
    pub fn single(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::input("baseline point is empty"));
        }
        check_finite("baseline point", &b)?;
        Ok(BaselineDistribution { kind: DistributionKind::Single, dim: b.len(), law: Law::Point(b) })
    }

    /// Uniform law over the rows of `rows`.
    pub fn empirical(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::input("empirical baseline set is empty"));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Distribution("empirical baseline has non-finite entries".into()));
        }
        Ok(BaselineDistribution { kind: DistributionKind::Empirical, dim: rows.ncols(), law: Law::Rows(rows) })
    }

    /// Independent normals with the given means and standard deviations.
    pub fn gaussian_independent(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        Self::diagonal(DistributionKind::GaussianIndependent, mean, sd)
    }

    /// `N(0, I_p)`.
    pub fn standard_normal(p: usize) -> Result<Self> {
        Self::gaussian_independent(vec![0.0; p], vec![1.0; p])
    }

    /// `N(center, sd^2 I)`, a neighborhood of the explained point.
    pub fn gaussian_local(center: Vec<f64>, sd: f64) -> Result<Self> {
        let p = center.len();
        Self::diagonal(DistributionKind::GaussianLocal, center, vec![sd; p])
    }

    fn diagonal(kind: DistributionKind, mean: Vec<f64>, sd: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != sd.len() {
            return Err(Error::input(format!("mean has {} entries, sd has {}", mean.len(), sd.len())));
        }
        check_finite("mean", &mean)?;
        check_finite("sd", &sd)?;
        if let Some(v) = sd.iter().find(|v| **v < 0.0) {
            return Err(Error::Distribution(format!("negative standard deviation {v}")));
        }
        let p = mean.len();
        let factor = DMatrix::from_diagonal(&DVector::from_vec(sd.clone()));
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(p, sd.iter().map(|s| s * s)));
        Ok(BaselineDistribution { kind, dim: p, law: Law::Gaussian { mean: DVector::from_vec(mean), cov, factor } })
    }

    /// `N(mean, cov)` with an arbitrary positive semi-definite covariance.
    pub fn gaussian_correlated(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.is_empty() || cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::input(format!(
                "mean has {} entries but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_finite("mean", &mean)?;
        let factor = psd_factor(&cov)?;
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(BaselineDistribution {
            kind: DistributionKind::GaussianCorrelated,
            dim: mean.len(),
            law: Law::Gaussian { mean: DVector::from_vec(mean), cov, factor },
        })
    }

    /// Product of `U[0, 1]` marginals.
    pub fn uniform01(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::input("uniform01 needs p >= 1"));
        }
        Ok(BaselineDistribution { kind: DistributionKind::Uniform01, dim: p, law: Law::Uniform01 })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates are independent, so conditioning is coordinate overwrite
    /// and columns may be resampled one at a time.
    pub fn is_product(&self) -> bool {
        !matches!(self.kind, DistributionKind::GaussianCorrelated | DistributionKind::Empirical)
    }

    /// Pick-freeze estimators resample columns independently. That is the
    /// law itself for product kinds and the product of marginals for
    /// empirical rows; it is wrong for a correlated Gaussian.
    pub(crate) fn require_independent_columns(&self, what: &str) -> Result<()> {
        if self.kind == DistributionKind::GaussianCorrelated {
            return Err(Error::Unsupported(format!("{what} under a correlated distribution")));
        }
        Ok(())
    }

    /// Mean vector where it is known in closed form.
    pub fn mean(&self) -> Option<Vec<f64>> {
        match &self.law {
            Law::Point(b) => Some(b.clone()),
            Law::Gaussian { mean, .. } => Some(mean.iter().copied().collect()),
            Law::Uniform01 => Some(vec![0.5; self.dim]),
            Law::Rows(_) => None,
        }
    }

    /// `n` independent draws as an `n x p` matrix.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Array2<f64>> {
        self.sample_stream(n, seed, STREAM_BACKGROUND)
    }

    pub(crate) fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        let p = self.dim;
        let mut rng = rng_for(seed, stream);
        Ok(match &self.law {
            Law::Point(b) => Array2::from_shape_fn((n, p), |(_, j)| b[j]),
            Law::Rows(rows) => {
                let mut out = Array2::zeros((n, p));
                for mut row in out.rows_mut() {
                    let k = rng.random_range(0..rows.nrows());
                    row.assign(&rows.row(k));
                }
                out
            }
            Law::Gaussian { mean, factor, .. } => {
                let normals = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
                gaussian_rows(mean, factor, normals.view())
            }
            Law::Uniform01 => Array2::from_shape_simple_fn((n, p), || rng.random::<f64>()),
        })
    }

    /// Background for conditional expectations.
    ///
    /// A single baseline yields one row (conditioning is then exact) and an
    /// empirical law uses its rows as given; other kinds draw `n` samples.
    pub fn background(&self, n: usize, seed: u64) -> Result<Background> {
        if n == 0 {
            return Err(Error::input("background size must be at least 1"));
        }
        match &self.law {
            Law::Point(b) => Background::from_rows(Array2::from_shape_vec((1, self.dim), b.clone()).expect("shape")),
            Law::Rows(rows) => Background::from_rows(rows.clone()),
            Law::Gaussian { mean, cov, factor } if self.kind == DistributionKind::GaussianCorrelated => {
                let mut rng = rng_for(seed, STREAM_BACKGROUND);
                let normals = Array2::from_shape_simple_fn((n, self.dim), || rng.sample::<f64, _>(StandardNormal));
                let rows = gaussian_rows(mean, factor, normals.view());
                Ok(Background {
                    dim: self.dim,
                    rows,
                    conditional: Some(GaussianConditioner { mean: mean.clone(), cov: cov.clone(), normals }),
                })
            }
            _ => Background::from_rows(self.sample(n, seed)?),
        }
    }
}

fn gaussian_rows(mean: &DVector<f64>, factor: &DMatrix<f64>, normals: ArrayView2<'_, f64>) -> Array2<f64> {
    let p = mean.len();
    let mut out = Array2::zeros(normals.dim());
    for (z, mut row) in normals.rows().into_iter().zip(out.rows_mut()) {
        for i in 0..p {
            row[i] = mean[i] + (0..p).map(|j| factor[(i, j)] * z[j]).sum::<f64>();
        }
    }
    out
}

#[derive(Debug, Clone)]
struct GaussianConditioner {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    normals: Array2<f64>,
}

impl GaussianConditioner {
    /// Rows `[start, end)` drawn from `X | X_u = x_u`.
    fn conditioned(&self, x: &[f64], u: Coalition, start: usize, end: usize) -> Result<Array2<f64>> {
        let p = self.mean.len();
        let fixed: Vec<usize> = u.indices().collect();
        let free: Vec<usize> = u.complement().indices().collect();
        let mut out = Array2::zeros((end - start, p));
        for &j in &fixed {
            out.column_mut(j).fill(x[j]);
        }
        if free.is_empty() {
            return Ok(out);
        }
        let sub = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.cov[(rows[a], cols[b])])
        };
        let (cmean, cfactor) = if fixed.is_empty() {
            (self.mean.clone(), psd_factor(&self.cov)?)
        } else {
            let s_uu = sub(&fixed, &fixed);
            let s_ru = sub(&free, &fixed);
            let s_rr = sub(&free, &free);
            let pinv = s_uu
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::Distribution(format!("cannot invert conditioning block: {e}")))?;
            let gain = &s_ru * pinv;
            let shift = DVector::from_iterator(fixed.len(), fixed.iter().map(|&j| x[j] - self.mean[j]));
            let mu_r = DVector::from_iterator(free.len(), free.iter().map(|&j| self.mean[j]));
            let cmean_r = mu_r + &gain * shift;
            let ccov = &s_rr - &gain * s_ru.transpose();
            let ccov = (&ccov + ccov.transpose()) * 0.5;
            (cmean_r, psd_factor(&ccov)?)
        };
        let z = self.normals.slice(s![start..end, ..]);
        for (zi, mut row) in z.rows().into_iter().zip(out.rows_mut()) {
            for (a, &ja) in free.iter().enumerate() {
                let mut v = cmean[a];
                for (b, &jb) in free.iter().enumerate() {
                    v += cfactor[(a, b)] * zi[jb];
                }
                row[ja] = v;
            }
        }
        Ok(out)
    }
}

/// A fixed set of background draws.
#[derive(Debug, Clone)]
pub struct Background {
    dim: usize,
    rows: Array2<f64>,
    conditional: Option<GaussianConditioner>,
}

impl Background {
    /// Explicit baseline rows; conditioning overwrites coordinates.
    pub fn from_rows(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::input("baseline set is empty"));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("baseline rows contain non-finite values"));
        }
        Ok(Background { dim: rows.ncols(), rows, conditional: None })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unconditioned draws.
    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    /// Draws of `X | X_u = x_u`, one per background row.
    pub fn conditioned(&self, x: &[f64], u: Coalition) -> Result<Array2<f64>> {
        self.conditioned_range(x, u, 0, self.len())
    }

    /// Rows `[start, end)` of [`Background::conditioned`].
    pub fn conditioned_range(&self, x: &[f64], u: Coalition, start: usize, end: usize) -> Result<Array2<f64>> {
        if x.len() != self.dim || u.dim() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        if start > end || end > self.len() {
            return Err(Error::input(format!("row range {start}..{end} outside 0..{}", self.len())));
        }
        if let Some(cond) = &self.conditional {
            return cond.conditioned(x, u, start, end);
        }
        let mut out = self.rows.slice(s![start..end, ..]).to_owned();
        for j in u.indices() {
            out.column_mut(j).fill(x[j]);
        }
        Ok(out)
    }
}

/// Monte Carlo estimate of a conditional expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub mean: f64,
    /// Standard error of `mean`; zero for a one-row background.
    pub std_error: f64,
}

/// Rows per model call when stacking several conditioned blocks.
const ROWS_PER_BATCH: usize = 1 << 20;

impl Background {
    /// `E[f(X) | X_u = x_u]` for every `u` in `subsets`, all over the same
    /// background draws. Blocks are stacked into as few model calls as the
    /// batch limit allows.
    pub fn expectations(&self, model: &ModelFunction, x: &[f64], subsets: &[Coalition]) -> Result<Vec<Expectation>> {
        let n = self.len();
        let per_call = (ROWS_PER_BATCH / n).max(1);
        let mut out = Vec::with_capacity(subsets.len());
        for group in subsets.chunks(per_call) {
            let mut stacked = Array2::zeros((group.len() * n, self.dim));
            for (g, u) in group.iter().enumerate() {
                stacked.slice_mut(s![g * n..(g + 1) * n, ..]).assign(&self.conditioned(x, *u)?);
            }
            let values = model.evaluate_batch(stacked.view())?;
            for g in 0..group.len() {
                let block = values.slice(s![g * n..(g + 1) * n]);
                // shifted by the first value so a constant block averages exactly
                let first = block[0];
                let mean = first + block.iter().map(|v| v - first).sum::<f64>() / n as f64;
                let std_error = if n > 1 {
                    (block.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
                } else {
                    0.0
                };
                out.push(Expectation { mean, std_error });
            }
        }
        Ok(out)
    }
}

/// Serializable description of a distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    Single {
        point: Vec<f64>,
    },
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<Vec<Vec<f64>>>,
    },
    GaussianIndependent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sd: Option<Vec<f64>>,
    },
    GaussianCorrelated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        /// Row-major, either flat (`p*p` values) or nested.
        covariance: Covariance,
    },
    GaussianLocal {
        /// Defaults to the explained point.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        sd: f64,
    },
    Uniform01,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl Covariance {
    fn to_matrix(&self, p: usize) -> Result<DMatrix<f64>> {
        let flat: Vec<f64> = match self {
            Covariance::Flat(v) => v.clone(),
            Covariance::Nested(rows) => {
                if rows.iter().any(|r| r.len() != p) {
                    return Err(Error::input(format!("covariance rows must have {p} entries")));
                }
                rows.concat()
            }
        };
        if flat.len() != p * p {
            return Err(Error::input(format!("covariance needs {} entries, got {}", p * p, flat.len())));
        }
        Ok(DMatrix::from_row_slice(p, p, &flat))
    }
}

impl DistributionSpec {
    /// Builds the distribution for a `p`-feature model. `target` fills in a
    /// missing local-Gaussian center.
    pub fn build(&self, p: usize, target: Option<&[f64]>) -> Result<BaselineDistribution> {
        let check = |len: usize, what: &str| {
            if len == p {
                Ok(())
            } else {
                Err(Error::input(format!("{what} has {len} entries, model has {p} features")))
            }
        };
        match self {
            DistributionSpec::Single { point } => {
                check(point.len(), "baseline point")?;
                BaselineDistribution::single(point.clone())
            }
            DistributionSpec::Empirical { path, rows } => {
                let matrix = match (path, rows) {
                    (Some(path), None) => load_csv_matrix(Path::new(path))?,
                    (None, Some(rows)) => crate::model::matrix_from_rows(rows)?,
                    _ => return Err(Error::input("empirical distribution needs exactly one of `path` or `rows`")),
                };
                check(matrix.ncols(), "empirical baseline row")?;
                BaselineDistribution::empirical(matrix)
            }
            DistributionSpec::GaussianIndependent { mean, sd } => {
                let mean = mean.clone().unwrap_or_else(|| vec![0.0; p]);
                let sd = sd.clone().unwrap_or_else(|| vec![1.0; p]);
                check(mean.len(), "mean")?;
                check(sd.len(), "sd")?;
                BaselineDistribution::gaussian_independent(mean, sd)
            }
            DistributionSpec::GaussianCorrelated { mean, covariance } => {
                let mean = mean.clone().unwrap_or_else(|| vec![0.0; p]);
                check(mean.len(), "mean")?;
                BaselineDistribution::gaussian_correlated(mean, covariance.to_matrix(p)?)
            }
            DistributionSpec::GaussianLocal { center, sd } => {
                let center = match (center, target) {
                    (Some(c), _) => c.clone(),
                    (None, Some(t)) => t.to_vec(),
                    (None, None) => return Err(Error::input("gaussian-local needs a center or a target")),
                };
                check(center.len(), "center")?;
                BaselineDistribution::gaussian_local(center, *sd)
            }
            DistributionSpec::Uniform01 => BaselineDistribution::uniform01(p),
        }
    }
}

/// Reads a comma-separated numeric matrix. A first line that does not parse
/// as numbers is treated as a header.
pub fn load_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_csv_matrix(&text).map_err(|e| match e {
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_csv_matrix(text: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if rows.is_empty() && k == 0 => continue,
            Err(_) => return Err(Error::input(format!("cannot parse line {}", k + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::input("no numeric rows"));
    }
    crate::model::matrix_from_rows(&rows)
}
