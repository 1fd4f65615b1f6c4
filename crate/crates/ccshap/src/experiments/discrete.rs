//! The discrete protein pipeline: ingest a categorical dataset (classes
//! 0..k, optional per-row intervention flag), fit conditional tables over
//! a known graph, and attribute. A synthetic generator over the same
//! topology stands in when no real dataset is supplied.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use crate::attribution::{
    cc_shapley_values, importance_obs, sap_check, shapley_values, AttributionResult, SapReport,
};
use crate::dataset::{pearson, Dataset};
use crate::error::Result;
use crate::estimator::{EstimatorKind, EstimatorSpec};
use crate::experiments::{write_results, write_text, CheckLine};
use crate::graph::CausalGraph;
use crate::scm::{CptMechanism, Mechanism, Scm};
use crate::seed::{derive_seed, stream_rng};

/// Default number of classes per protein.
pub const DEFAULT_CLASSES: usize = 3;

/// Univariate trends flatter than this are not sign-checked; their
/// direction is dominated by estimation noise.
const TREND_FLOOR: f64 = 0.02;

/// The eight-protein signalling graph used by the discrete pipeline, with
/// `PKA` as the prediction target.
pub fn fig_topology_graph() -> CausalGraph {
    let nodes = ["PKC", "PKA", "P38", "Jnk", "Raf", "Mek", "Erk", "Akt"];
    let edges = [
        ("PKC", "PKA"),
        ("PKC", "P38"),
        ("PKC", "Jnk"),
        ("PKC", "Raf"),
        ("PKC", "Mek"),
        ("PKA", "P38"),
        ("PKA", "Jnk"),
        ("PKA", "Raf"),
        ("PKA", "Mek"),
        ("PKA", "Erk"),
        ("PKA", "Akt"),
        ("Raf", "Mek"),
        ("Mek", "Erk"),
        ("Erk", "Akt"),
    ];
    CausalGraph::new(&nodes, &edges, "PKA").expect("fixed topology is a valid DAG")
}

/// Enumerate all parent configurations over `n_classes` classes.
fn parent_configs(n_parents: usize, n_classes: usize) -> Vec<Vec<i64>> {
    let mut configs = vec![Vec::new()];
    for _ in 0..n_parents {
        configs = configs
            .into_iter()
            .flat_map(|c| {
                (0..n_classes as i64).map(move |v| {
                    let mut c = c.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    configs
}

/// A random discrete model over `g`: every node gets a conditional table
/// whose class distribution is tilted upward as its parents' classes rise,
/// so edges carry a monotone association while the tables stay random.
pub fn synthetic_discrete_scm(g: &CausalGraph, n_classes: usize, seed: u64) -> Result<Scm> {
    let classes: Vec<f64> = (0..n_classes).map(|k| k as f64).collect();
    let mut mechanisms = HashMap::new();
    for (i, name) in g.node_names().iter().enumerate() {
        let parents: Vec<String> = g.parents_of(name)?.iter().map(|s| s.to_string()).collect();
        let mut rng = stream_rng(seed, "discrete-cpt", i as u64);
        let mut draw = |tilt: f64| -> Vec<f64> {
            let mut probs: Vec<f64> = (0..n_classes)
                .map(|k| rng.random_range(0.2..1.0) * (tilt * k as f64).exp())
                .collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            probs
        };
        let fallback = draw(0.0);
        let mut table = HashMap::new();
        if !parents.is_empty() {
            let max_sum = (parents.len() * (n_classes - 1)) as f64;
            for key in parent_configs(parents.len(), n_classes) {
                let tilt = 2.0 * (key.iter().sum::<i64>() as f64 / max_sum - 0.5);
                table.insert(key, draw(tilt));
            }
        }
        mechanisms.insert(
            name.clone(),
            Mechanism::Cpt(CptMechanism::new(parents, classes.clone(), table, fallback)?),
        );
    }
    Scm::new(g.clone(), mechanisms)
}

/// One feature's univariate importance at each class value.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateCurve {
    pub feature: String,
    /// `I_∅(feature)` at class 0, 1, ... in order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DiscreteReport {
    pub shapley: AttributionResult,
    pub cc: AttributionResult,
    pub sap: SapReport,
    pub curves: Vec<UnivariateCurve>,
    /// For each feature whose every path to the target is collider-free:
    /// does the sign of its causal-context attribution trend match the
    /// sign of its univariate trend? `None` when the trend is too flat.
    pub trends: Vec<(String, Option<bool>)>,
    pub n_observational_rows: usize,
    pub n_intervened_rows: usize,
}

impl DiscreteReport {
    pub fn checks(&self) -> Vec<CheckLine> {
        let trend_ok = self
            .trends
            .iter()
            .all(|(_, agree)| agree.unwrap_or(true));
        let checked: Vec<&str> = self
            .trends
            .iter()
            .filter(|(_, a)| a.is_some())
            .map(|(f, _)| f.as_str())
            .collect();
        vec![
            CheckLine::new(
                "ingestion",
                format!(
                    "{} observational + {} intervened rows fitted into {} tables",
                    self.n_observational_rows,
                    self.n_intervened_rows,
                    self.curves.len() + 1
                ),
                self.n_observational_rows > 0,
            ),
            CheckLine::new(
                "association-property",
                format!("{}", self.sap).trim_end().replace('\n', "; "),
                self.sap.pass(),
            ),
            CheckLine::new(
                "trend-coherence",
                format!(
                    "collider-free features with matching attribution trend: {checked:?}"
                ),
                trend_ok,
            ),
        ]
    }

    pub fn pass(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> String {
        let mut s = String::from("discrete pipeline\n");
        for line in self.checks() {
            s.push_str(&line.render());
            s.push('\n');
        }
        s
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_results(dir, &[&self.shapley, &self.cc])?;
        write_text(&dir.join("summary.txt"), &self.summary())?;
        let grids = dir.join("grids");
        std::fs::create_dir_all(&grids)?;
        for c in &self.curves {
            let mut out = String::from("class,importance\n");
            for (k, v) in c.values.iter().enumerate() {
                out.push_str(&format!("{k},{v}\n"));
            }
            write_text(
                &grids.join(format!("i_empty_{}.csv", c.feature.to_lowercase())),
                &out,
            )?;
        }
        Ok(())
    }
}

/// Synthetic stand-in dataset: mostly observational rows from the random
/// model plus a small block of rows where each feature in turn was clamped
/// to class 1 (exercising the per-node exclusion on ingestion).
fn synthetic_dataset(g: &CausalGraph, n_fit: usize, seed: u64) -> Result<Dataset> {
    let truth = synthetic_discrete_scm(g, DEFAULT_CLASSES, derive_seed(seed, "discrete-truth", 0))?;
    let mut d = truth.sample(n_fit, derive_seed(seed, "discrete-obs", 0))?;
    let per_feature = (n_fit / 20).max(1);
    for (i, feature) in g.features().iter().enumerate() {
        let clamped = truth
            .intervene_atomic(&[(*feature, 1.0)])?
            .sample(per_feature, derive_seed(seed, "discrete-int", i as u64))?;
        for row in 0..clamped.n_rows() {
            d.push_row_intervened(&clamped.values(row, d.names())?, feature)?;
        }
    }
    Ok(d)
}

/// Run the discrete pipeline: ingest `data_path` (or generate a synthetic
/// stand-in), fit conditional tables over `graph` excluding per-node
/// intervened rows, attribute on `n_eval` model-sampled rows, and check
/// the association property at tolerance 0.03.
pub fn run_discrete_pipeline(
    data_path: Option<&Path>,
    graph: &CausalGraph,
    n_fit: usize,
    n_eval: usize,
    seed: u64,
) -> Result<DiscreteReport> {
    let data = match data_path {
        Some(p) => Dataset::load_csv(p)?,
        None => synthetic_dataset(graph, n_fit, seed)?,
    };
    let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
    let fitted = crate::scm::fit_scm_from_data(graph, &data, &spec)?;
    let target = graph.target();

    // Purely observational rows for the observational fits.
    let obs_rows: Vec<usize> = (0..data.n_rows())
        .filter(|&r| data.intervention(r).is_none())
        .collect();
    let n_intervened_rows = data.n_rows() - obs_rows.len();
    let obs = if n_intervened_rows == 0 {
        data.clone()
    } else {
        data.select_rows(&obs_rows)
    };

    let eval = if n_eval == 0 {
        Dataset::new(obs.names())?
    } else {
        fitted.sample(n_eval, derive_seed(seed, "discrete-eval", 0))?
    };
    let shapley = shapley_values(&obs, target, &eval, &spec)?;
    let cc = cc_shapley_values(&fitted, &eval, &spec, n_fit, derive_seed(seed, "discrete-cc", 0))?;
    let sap = sap_check(&cc, graph, 0.03)?;

    // Univariate importance of each feature at each class, plus the trend
    // comparison for features reaching the target only collider-free.
    let mut curves = Vec::new();
    let mut trends = Vec::new();
    for feature in &cc.features {
        let pair = importance_obs(&obs, target, feature, &[] as &[&str], &spec)?;
        let mut values = Vec::new();
        for k in 0..DEFAULT_CLASSES {
            let mut probe = Dataset::new(&[feature.as_str()])?;
            probe.push_row(&[k as f64])?;
            values.push(pair.evaluate(&probe, 0)?);
        }
        // Only connected, collider-free features carry a causal trend to
        // compare against; disconnected ones have nothing but noise.
        let paths = graph.enumerate_paths(feature, target)?;
        let collider_free =
            !paths.is_empty() && paths.iter().all(|p| p.colliders(graph).is_empty());
        if collider_free && n_eval > 0 {
            let slope = values[DEFAULT_CLASSES - 1] - values[0];
            let corr = pearson(eval.column(feature)?, cc.phi(feature)?);
            let agree = if slope.abs() < TREND_FLOOR || corr.abs() < 1e-3 {
                None
            } else {
                Some(slope.signum() == corr.signum())
            };
            trends.push((feature.clone(), agree));
        }
        curves.push(UnivariateCurve {
            feature: feature.clone(),
            values,
        });
    }

    Ok(DiscreteReport {
        shapley,
        cc,
        sap,
        curves,
        trends,
        n_observational_rows: obs_rows.len(),
        n_intervened_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_has_the_expected_shape() {
        let g = fig_topology_graph();
        assert_eq!(g.len(), 8);
        assert_eq!(g.edge_list().len(), 14);
        assert_eq!(g.target(), "PKA");
        assert_eq!(g.parents_of("PKA").unwrap(), vec!["PKC"]);
        assert_eq!(g.parents_of("Mek").unwrap(), vec!["PKA", "PKC", "Raf"]);
        assert!(g.parents_of("PKC").unwrap().is_empty());
    }

    #[test]
    fn synthetic_model_emits_the_declared_classes() {
        let g = fig_topology_graph();
        let m = synthetic_discrete_scm(&g, 3, 5).unwrap();
        let d = m.sample(2_000, 9).unwrap();
        for name in g.node_names() {
            for v in d.column(name).unwrap() {
                assert!([0.0, 1.0, 2.0].contains(v), "{name} produced {v}");
            }
        }
    }

    #[test]
    fn pipeline_round_trips_on_the_synthetic_standin() {
        let report = run_discrete_pipeline(None, &fig_topology_graph(), 20_000, 500, 13).unwrap();
        assert!(report.n_intervened_rows > 0);
        assert!(report.sap.pass());
        assert!(report.pass(), "{}", report.summary());
        assert_eq!(report.curves.len(), 7);
        assert_eq!(report.shapley.n_rows(), 500);
    }

    #[test]
    fn isolated_feature_gets_no_attribution() {
        // Augment the topology with a feature disconnected from everything:
        // the association property must hold for it non-vacuously.
        let g = fig_topology_graph();
        let mut nodes: Vec<String> = g.node_names().to_vec();
        nodes.push("Ctrl".to_string());
        let edges: Vec<(String, String)> = g
            .edge_list()
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let aug = CausalGraph::new(&nodes, &edges, "PKA").unwrap();
        let report = run_discrete_pipeline(None, &aug, 20_000, 500, 29).unwrap();
        assert_eq!(report.sap.entries.len(), 1);
        assert_eq!(report.sap.entries[0].feature, "Ctrl");
        assert!(report.sap.entries[0].structurally_zero);
        assert!(report.sap.pass(), "{}", report.sap);
    }

    #[test]
    fn loaded_csv_is_accepted() {
        let g = fig_topology_graph();
        let d = synthetic_dataset(&g, 5_000, 3).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("proteins.csv");
        d.save_csv(&path).unwrap();
        let report = run_discrete_pipeline(Some(&path), &g, 5_000, 200, 3).unwrap();
        assert!(report.n_intervened_rows > 0);
        assert_eq!(report.curves.len(), 7);
    }
}
