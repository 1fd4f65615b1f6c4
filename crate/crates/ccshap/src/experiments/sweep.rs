//! Random linear-SCM sweep: across many generated models, compare the
//! partial regression coefficient of X1 on the target when X2 is observed
//! versus intervened on, against the context-free coefficient. Where X2 is
//! (almost) purely a collider between X1 and the target, the intervened
//! coefficient returns to the context-free one while the observed one is
//! biased away.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{EstimatorKind, EstimatorSpec};
use crate::experiments::{write_text, CheckLine};
use crate::scm::{random_linear_scm, NoiseSpec, Sampler};
use crate::seed::derive_seed;

/// Path-enumeration cap for the collider-impact computation; dense 9-node
/// graphs exceed the default query cap.
const IMPACT_PATH_CAP: usize = 200_000;

/// Fraction of total path weight through X2 that X2 carries as the only
/// collider; records above this threshold form the high-impact subgroup.
pub const HIGH_IMPACT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub seed_index: u64,
    /// Coefficient of X1 in E[Y | X1].
    pub b_x1: f64,
    /// Coefficient of X1 in E[Y | X1, X2].
    pub b_x1_given_x2: f64,
    /// Coefficient of X1 in E[Y | X1, do(X2)].
    pub b_x1_do_x2: f64,
    pub collider_impact: Option<f64>,
    pub skipped: Option<String>,
}

impl SweepRecord {
    /// Normalized deviation of the interventional coefficient.
    pub fn rel_do(&self) -> f64 {
        (self.b_x1_do_x2 - self.b_x1).abs() / (1.0 + self.b_x1.abs())
    }

    /// Normalized deviation of the observational coefficient.
    pub fn rel_obs(&self) -> f64 {
        (self.b_x1_given_x2 - self.b_x1).abs() / (1.0 + self.b_x1.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub high_impact_count: usize,
    /// Fraction of high-impact records with rel_do <= 0.05.
    pub high_impact_on_diagonal: f64,
    pub median_rel_do: f64,
    pub median_rel_obs: f64,
}

fn median(xs: &mut Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

impl SweepReport {
    pub fn checks(&self) -> Vec<CheckLine> {
        vec![
            CheckLine::new(
                "high-impact-diagonal",
                format!(
                    "{:.1}% of {} high-impact records have rel-do <= 0.05 (>= 90%)",
                    100.0 * self.high_impact_on_diagonal,
                    self.high_impact_count
                ),
                self.high_impact_on_diagonal >= 0.9 && self.high_impact_count > 0,
            ),
            CheckLine::new(
                "do-beats-observation",
                format!(
                    "high-impact medians: rel-do {:.4} < rel-obs {:.4}, rel-do <= 0.05",
                    self.median_rel_do, self.median_rel_obs
                ),
                self.median_rel_do < self.median_rel_obs && self.median_rel_do <= 0.05,
            ),
        ]
    }

    pub fn pass(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        let skipped = self.records.iter().filter(|r| r.skipped.is_some()).count();
        let mut s = format!(
            "linear sweep over {} models ({} skipped)\n",
            self.records.len(),
            skipped
        );
        for line in self.checks() {
            s.push_str(&line.render());
            s.push('\n');
        }
        s
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        {
            let mut wtr = csv::Writer::from_writer(&mut out);
            wtr.write_record([
                "seed_index",
                "b_x1",
                "b_x1_given_x2",
                "b_x1_do_x2",
                "collider_impact",
                "skipped",
            ])?;
            for r in &self.records {
                wtr.write_record([
                    r.seed_index.to_string(),
                    format!("{}", r.b_x1),
                    format!("{}", r.b_x1_given_x2),
                    format!("{}", r.b_x1_do_x2),
                    r.collider_impact.map_or(String::new(), |v| format!("{v}")),
                    r.skipped.clone().unwrap_or_default(),
                ])?;
            }
            wtr.flush()?;
        }
        std::fs::write(dir.join("sweep.csv"), out)?;
        write_text(&dir.join("summary.txt"), &self.summary())?;
        Ok(())
    }
}

fn run_one(
    k: u64,
    n_vars: usize,
    edge_prob: f64,
    n_rows: usize,
    seed: u64,
) -> Result<SweepRecord> {
    let noise = NoiseSpec::Laplace {
        location: 0.0,
        scale: 0.1,
    };
    let (m, wg) = random_linear_scm(n_vars, edge_prob, &noise, derive_seed(seed, "sweep-scm", k))?;
    let collider_impact = wg.collider_impact_capped("X1", "X2", "Y", IMPACT_PATH_CAP)?;
    let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares);

    let fit_coef = |d: &crate::dataset::Dataset, inputs: &[&str]| -> Result<f64> {
        crate::estimator::fit(&spec, d, inputs, "Y")?.coefficient("X1")
    };
    let record = (|| -> Result<(f64, f64, f64)> {
        let d = m.sample(n_rows, derive_seed(seed, "sweep-data", k))?;
        let b_x1 = fit_coef(&d, &["X1"])?;
        let b_given = fit_coef(&d, &["X1", "X2"])?;
        // Interventional coefficient: marginal draw of X2, graph surgery,
        // fresh sample, same bivariate fit.
        let q = Sampler::from_dataset(&d, &["X2"], false)?;
        let d_do = m
            .intervene_stochastic(&["X2"], q)?
            .sample(n_rows, derive_seed(seed, "sweep-do", k))?;
        let b_do = fit_coef(&d_do, &["X1", "X2"])?;
        Ok((b_x1, b_given, b_do))
    })();
    Ok(match record {
        Ok((b_x1, b_x1_given_x2, b_x1_do_x2)) => SweepRecord {
            seed_index: k,
            b_x1,
            b_x1_given_x2,
            b_x1_do_x2,
            collider_impact,
            skipped: None,
        },
        Err(e) => SweepRecord {
            seed_index: k,
            b_x1: 0.0,
            b_x1_given_x2: 0.0,
            b_x1_do_x2: 0.0,
            collider_impact,
            skipped: Some(e.to_string()),
        },
    })
}

/// Run the sweep: `n_scms` random linear models, three coefficients each,
/// with the ground-truth collider impact of X2 between X1 and the target.
pub fn run_linear_sweep(
    n_scms: usize,
    n_vars: usize,
    edge_prob: f64,
    n_rows: usize,
    seed: u64,
) -> Result<SweepReport> {
    if n_scms == 0 {
        return Err(Error::InvalidArgument("need at least one model".into()));
    }
    if n_vars < 3 {
        return Err(Error::InvalidArgument(
            "the sweep needs X1, X2, and the target".into(),
        ));
    }
    let records: Vec<SweepRecord> = (0..n_scms as u64)
        .into_par_iter()
        .map(|k| run_one(k, n_vars, edge_prob, n_rows, seed))
        .collect::<Result<_>>()?;

    let high: Vec<&SweepRecord> = records
        .iter()
        .filter(|r| {
            r.skipped.is_none()
                && r.collider_impact
                    .is_some_and(|ci| ci > HIGH_IMPACT_THRESHOLD)
        })
        .collect();
    let on_diag = high.iter().filter(|r| r.rel_do() <= 0.05).count();
    let mut rel_do: Vec<f64> = high.iter().map(|r| r.rel_do()).collect();
    let mut rel_obs: Vec<f64> = high.iter().map(|r| r.rel_obs()).collect();
    let report = SweepReport {
        high_impact_count: high.len(),
        high_impact_on_diagonal: if high.is_empty() {
            0.0
        } else {
            on_diag as f64 / high.len() as f64
        },
        median_rel_do: median(&mut rel_do),
        median_rel_obs: median(&mut rel_obs),
        records,
    };
    Ok(report)
}
