//! Conditional-expectation estimators: pluggable learners for
//! `E[target | inputs]` used both by the attribution pipeline and for
//! fitting SCM mechanisms from data.
//!
//! Three families are provided: ridge-regularized linear least squares,
//! discrete conditional tables (group-by means over integer-valued
//! inputs), and a binned nonparametric estimator (equal-width grid of cell
//! means with a global-mean fallback for empty cells).

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{mean, Dataset};
use crate::error::{Error, Result};

/// Cells holding at least this many training rows count as high-density;
/// pointwise accuracy checks are restricted to them.
pub const HIGH_DENSITY_MIN_COUNT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    LinearLeastSquares,
    DiscreteCpt,
    BinnedNonparametric,
}

impl EstimatorKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(EstimatorKind::LinearLeastSquares),
            "cpt" | "discrete" => Ok(EstimatorKind::DiscreteCpt),
            "binned" | "nonparametric" => Ok(EstimatorKind::BinnedNonparametric),
            other => Err(Error::Parse(format!(
                "unknown estimator `{other}`; expected linear, cpt, or binned"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Ridge penalty for the linear estimator (not applied to the
    /// intercept). The small default keeps near-collinear fits solvable
    /// without noticeably biasing coefficients.
    pub ridge: f64,
    /// Bin count per axis for the binned estimator; `None` picks a default
    /// from the input dimension (32 for 1-2 inputs, 12 for 3, 6 above).
    pub bins: Option<usize>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorSpec {
            kind,
            ridge: 1e-8,
            bins: None,
        }
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = Some(bins);
        self
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    fn bins_for(&self, n_inputs: usize) -> usize {
        self.bins.unwrap_or(match n_inputs {
            0..=2 => 32,
            3 => 12,
            _ => 6,
        })
    }
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec::new(EstimatorKind::BinnedNonparametric)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    lo: f64,
    hi: f64,
    bins: usize,
}

impl Axis {
    fn bin(&self, v: f64) -> usize {
        if self.hi <= self.lo {
            return 0;
        }
        let t = (v - self.lo) / (self.hi - self.lo);
        ((t * self.bins as f64) as isize).clamp(0, self.bins as isize - 1) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    sum: f64,
    count: usize,
    /// Per-axis sums of the input values that landed in this cell, so the
    /// cell's empirical input centroid can be recovered.
    input_sums: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum ModelParams {
    /// No inputs: predicts the global target mean.
    Constant,
    Linear {
        intercept: f64,
        coefs: Vec<f64>,
    },
    Cpt {
        table: HashMap<Vec<i64>, (f64, usize)>,
    },
    Binned {
        axes: Vec<Axis>,
        cells: HashMap<Vec<usize>, Cell>,
    },
}

/// A fitted conditional-expectation model `x -> E[target | inputs = x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    inputs: Vec<String>,
    target: String,
    params: ModelParams,
    /// Global target mean; prediction for unseen configurations and cells.
    fallback: f64,
    training_rows: usize,
}

/// Fit `E[target | inputs]` on the given dataset columns.
pub fn fit(
    spec: &EstimatorSpec,
    d: &Dataset,
    inputs: &[&str],
    target: &str,
) -> Result<FittedModel> {
    let y = d.column(target)?;
    if y.is_empty() {
        return Err(Error::Fit("cannot fit on an empty dataset".into()));
    }
    let fallback = mean(y);
    let cols: Vec<&[f64]> = inputs.iter().map(|n| d.column(n)).collect::<Result<_>>()?;
    let params = if inputs.is_empty() {
        ModelParams::Constant
    } else {
        match spec.kind {
            EstimatorKind::LinearLeastSquares => fit_linear(&cols, y, spec.ridge)?,
            EstimatorKind::DiscreteCpt => fit_cpt(&cols, y)?,
            EstimatorKind::BinnedNonparametric => {
                fit_binned(&cols, y, spec.bins_for(inputs.len()))
            }
        }
    };
    Ok(FittedModel {
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        target: target.to_string(),
        params,
        fallback,
        training_rows: y.len(),
    })
}

fn fit_linear(cols: &[&[f64]], y: &[f64], ridge: f64) -> Result<ModelParams> {
    let (n, k) = (y.len(), cols.len());
    let mut x = DMatrix::<f64>::zeros(n, k + 1);
    for r in 0..n {
        x[(r, 0)] = 1.0;
        for c in 0..k {
            x[(r, c + 1)] = cols[c][r];
        }
    }
    let yv = DVector::from_column_slice(y);
    let mut xtx = x.transpose() * &x;
    for i in 1..=k {
        xtx[(i, i)] += ridge;
    }
    let xty = x.transpose() * yv;
    let beta = xtx.lu().solve(&xty).ok_or_else(|| {
        Error::Fit(
            "normal equations are singular; the inputs are collinear (a ridge > 0 would \
             regularize the fit)"
                .into(),
        )
    })?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Fit("linear fit produced non-finite coefficients".into()));
    }
    Ok(ModelParams::Linear {
        intercept: beta[0],
        coefs: beta.as_slice()[1..].to_vec(),
    })
}

fn fit_cpt(cols: &[&[f64]], y: &[f64]) -> Result<ModelParams> {
    let mut sums: HashMap<Vec<i64>, (f64, usize)> = HashMap::new();
    for r in 0..y.len() {
        let mut key = Vec::with_capacity(cols.len());
        for c in cols {
            let v = c[r];
            if (v - v.round()).abs() > 1e-9 {
                return Err(Error::Fit(format!(
                    "discrete estimator given non-integer input value {v}"
                )));
            }
            key.push(v.round() as i64);
        }
        let e = sums.entry(key).or_insert((0.0, 0));
        e.0 += y[r];
        e.1 += 1;
    }
    let table = sums
        .into_iter()
        .map(|(k, (s, n))| (k, (s / n as f64, n)))
        .collect();
    Ok(ModelParams::Cpt { table })
}

fn fit_binned(cols: &[&[f64]], y: &[f64], bins: usize) -> ModelParams {
    let axes: Vec<Axis> = cols
        .iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Axis { lo, hi, bins }
        })
        .collect();
    let mut cells: HashMap<Vec<usize>, Cell> = HashMap::new();
    for r in 0..y.len() {
        let key: Vec<usize> = axes
            .iter()
            .zip(cols)
            .map(|(a, c)| a.bin(c[r]))
            .collect();
        let cell = cells.entry(key).or_insert_with(|| Cell {
            sum: 0.0,
            count: 0,
            input_sums: vec![0.0; cols.len()],
        });
        cell.sum += y[r];
        cell.count += 1;
        for (s, c) in cell.input_sums.iter_mut().zip(cols) {
            *s += c[r];
        }
    }
    ModelParams::Binned { axes, cells }
}

impl FittedModel {
    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn training_rows(&self) -> usize {
        self.training_rows
    }

    /// Predict at one input point, in the order of [`inputs`](Self::inputs).
    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.inputs.len(), "input dimension mismatch");
        match &self.params {
            ModelParams::Constant => self.fallback,
            ModelParams::Linear { intercept, coefs } => {
                intercept + coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            }
            ModelParams::Cpt { table } => {
                let key: Vec<i64> = x.iter().map(|v| v.round() as i64).collect();
                table.get(&key).map_or(self.fallback, |(m, _)| *m)
            }
            ModelParams::Binned { axes, cells } => {
                let key: Vec<usize> = axes.iter().zip(x).map(|(a, v)| a.bin(*v)).collect();
                cells
                    .get(&key)
                    .map_or(self.fallback, |c| c.sum / c.count as f64)
            }
        }
    }

    /// Predict at the input values of one dataset row.
    pub fn predict_row(&self, d: &Dataset, row: usize) -> Result<f64> {
        Ok(self.predict(&d.values(row, &self.inputs)?))
    }

    /// Number of training rows backing the prediction at `x`: the matching
    /// cell or configuration count for local estimators, the full training
    /// size for global ones. `None` when `x` falls outside the support.
    pub fn support_count(&self, x: &[f64]) -> Option<usize> {
        match &self.params {
            ModelParams::Constant | ModelParams::Linear { .. } => Some(self.training_rows),
            ModelParams::Cpt { table } => {
                let key: Vec<i64> = x.iter().map(|v| v.round() as i64).collect();
                table.get(&key).map(|(_, n)| *n)
            }
            ModelParams::Binned { axes, cells } => {
                let key: Vec<usize> = axes.iter().zip(x).map(|(a, v)| a.bin(*v)).collect();
                cells.get(&key).map(|c| c.count)
            }
        }
    }

    /// Non-empty cells of a binned fit as `(input centroid, prediction,
    /// count)`. Empty for other estimator families.
    pub fn cells(&self) -> Vec<(Vec<f64>, f64, usize)> {
        match &self.params {
            ModelParams::Binned { cells, .. } => {
                let mut out: Vec<(Vec<f64>, f64, usize)> = cells
                    .values()
                    .map(|c| {
                        let centroid =
                            c.input_sums.iter().map(|s| s / c.count as f64).collect();
                        (centroid, c.sum / c.count as f64, c.count)
                    })
                    .collect();
                out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                out
            }
            ModelParams::Cpt { table } => {
                let mut out: Vec<(Vec<f64>, f64, usize)> = table
                    .iter()
                    .map(|(k, (m, n))| (k.iter().map(|v| *v as f64).collect(), *m, *n))
                    .collect();
                out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                out
            }
            _ => Vec::new(),
        }
    }

    /// Compact description, e.g. `linear(C, Y)` or `binned[32](G)`.
    pub fn summary_short(&self) -> String {
        let args = self.inputs.join(", ");
        match &self.params {
            ModelParams::Constant => format!("constant E[{}]", self.target),
            ModelParams::Linear { .. } => format!("linear({args})"),
            ModelParams::Cpt { .. } => format!("cpt({args})"),
            ModelParams::Binned { axes, .. } => {
                format!("binned[{}]({args})", axes.first().map_or(0, |a| a.bins))
            }
        }
    }

    /// Multi-line human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "E[{} | {}] fit on {} rows\n",
            self.target,
            if self.inputs.is_empty() {
                "(nothing)".to_string()
            } else {
                self.inputs.join(", ")
            },
            self.training_rows
        );
        match &self.params {
            ModelParams::Constant => {
                let _ = writeln!(s, "  constant prediction {}", self.fallback);
            }
            ModelParams::Linear { intercept, coefs } => {
                let _ = writeln!(s, "  intercept {intercept:.6}");
                for (name, c) in self.inputs.iter().zip(coefs) {
                    let _ = writeln!(s, "  coef[{name}] {c:.6}");
                }
            }
            ModelParams::Cpt { table } => {
                let _ = writeln!(
                    s,
                    "  {} configurations, fallback {:.6}",
                    table.len(),
                    self.fallback
                );
            }
            ModelParams::Binned { axes, cells } => {
                let _ = writeln!(
                    s,
                    "  {} bins per axis, {} non-empty cells, fallback {:.6}",
                    axes.first().map_or(0, |a| a.bins),
                    cells.len(),
                    self.fallback
                );
            }
        }
        s
    }

    /// Linear coefficient of one input, for coefficient-comparison studies.
    pub fn coefficient(&self, input: &str) -> Result<f64> {
        let i = self
            .inputs
            .iter()
            .position(|n| n == input)
            .ok_or_else(|| Error::UnknownNode(input.to_string()))?;
        match &self.params {
            ModelParams::Linear { coefs, .. } => Ok(coefs[i]),
            _ => Err(Error::InvalidArgument(
                "coefficients are only defined for linear fits".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;
    use rand::Rng;

    fn toy_linear_data(n: usize) -> Dataset {
        let mut rng = stream_rng(11, "estimator-test", 0);
        let mut d = Dataset::new(&["a", "b", "y"]).unwrap();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            d.push_row(&[a, b, 2.0 + 3.0 * a - 0.5 * b]).unwrap();
        }
        d
    }

    #[test]
    fn linear_recovers_exact_coefficients() {
        let d = toy_linear_data(500);
        let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares);
        let m = fit(&spec, &d, &["a", "b"], "y").unwrap();
        assert!((m.coefficient("a").unwrap() - 3.0).abs() < 1e-6);
        assert!((m.coefficient("b").unwrap() + 0.5).abs() < 1e-6);
        assert!((m.predict(&[0.25, -0.5]) - (2.0 + 0.75 + 0.25)).abs() < 1e-6);
    }

    #[test]
    fn linear_flags_collinearity_without_ridge() {
        let mut d = Dataset::new(&["a", "b", "y"]).unwrap();
        for i in 0..10 {
            let a = i as f64;
            d.push_row(&[a, 2.0 * a, a]).unwrap();
        }
        let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares).with_ridge(0.0);
        assert!(fit(&spec, &d, &["a", "b"], "y").is_err());
        let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares);
        fit(&spec, &d, &["a", "b"], "y").unwrap();
    }

    #[test]
    fn cpt_groups_by_configuration() {
        let mut d = Dataset::new(&["x", "y"]).unwrap();
        for (x, y) in [(0.0, 1.0), (0.0, 3.0), (1.0, 10.0)] {
            d.push_row(&[x, y]).unwrap();
        }
        let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
        let m = fit(&spec, &d, &["x"], "y").unwrap();
        assert_eq!(m.predict(&[0.0]), 2.0);
        assert_eq!(m.predict(&[1.0]), 10.0);
        // Unseen configuration falls back to the global mean.
        assert!((m.predict(&[2.0]) - 14.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.support_count(&[0.0]), Some(2));
        assert_eq!(m.support_count(&[5.0]), None);
        // Continuous inputs are rejected.
        let mut c = Dataset::new(&["x", "y"]).unwrap();
        c.push_row(&[0.5, 1.0]).unwrap();
        assert!(fit(&spec, &c, &["x"], "y").is_err());
    }

    #[test]
    fn binned_approximates_smooth_conditionals() {
        let mut rng = stream_rng(13, "estimator-test", 1);
        let mut d = Dataset::new(&["x", "y"]).unwrap();
        for _ in 0..50_000 {
            let x: f64 = rng.random_range(0.0..1.0);
            let noise: f64 = rng.random_range(-0.1..0.1);
            d.push_row(&[x, x * x + noise]).unwrap();
        }
        let spec = EstimatorSpec::default();
        let m = fit(&spec, &d, &["x"], "y").unwrap();
        for x in [0.1, 0.4, 0.7, 0.9] {
            assert!(
                (m.predict(&[x]) - x * x).abs() < 0.02,
                "prediction at {x} was {}",
                m.predict(&[x])
            );
        }
        // High-density check: every interior cell holds plenty of points.
        assert!(m.support_count(&[0.5]).unwrap() > HIGH_DENSITY_MIN_COUNT);
        // Cell centroids average the inputs that landed in the cell.
        let cells = m.cells();
        assert_eq!(cells.len(), 32);
        for (centroid, pred, count) in cells {
            assert!(count > 0);
            assert!((pred - centroid[0] * centroid[0]).abs() < 0.02);
        }
    }

    #[test]
    fn empty_inputs_give_the_marginal_mean() {
        let d = toy_linear_data(100);
        let m = fit(&EstimatorSpec::default(), &d, &[], "y").unwrap();
        let y = d.column("y").unwrap();
        assert!((m.predict(&[]) - mean(y)).abs() < 1e-12);
    }

    #[test]
    fn default_bin_counts_scale_down_with_dimension() {
        let spec = EstimatorSpec::default();
        assert_eq!(spec.bins_for(1), 32);
        assert_eq!(spec.bins_for(2), 32);
        assert_eq!(spec.bins_for(3), 12);
        assert_eq!(spec.bins_for(5), 6);
        assert_eq!(spec.with_bins(40).bins_for(3), 40);
    }
}
