//! Fit a full SCM from data given its causal graph: one mechanism per node
//! learned from the rows where that node was not intervened on.

use std::collections::HashMap;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorKind, EstimatorSpec};
use crate::graph::CausalGraph;
use crate::scm::{CptMechanism, Mechanism, Scm};

/// Columns whose values are all integral with at most this many distinct
/// levels are treated as discrete.
const MAX_DISCRETE_LEVELS: usize = 10;

fn discrete_levels(col: &[f64]) -> Option<Vec<f64>> {
    let mut levels: Vec<i64> = Vec::new();
    for &v in col {
        if (v - v.round()).abs() > 1e-9 {
            return None;
        }
        let k = v.round() as i64;
        if !levels.contains(&k) {
            if levels.len() == MAX_DISCRETE_LEVELS {
                return None;
            }
            levels.push(k);
        }
    }
    levels.sort_unstable();
    Some(levels.into_iter().map(|k| k as f64).collect())
}

/// Learn one mechanism per node of `graph` from `data`.
///
/// Rows flagged as interventions on a node are excluded when fitting that
/// node's mechanism (the intervention overrode it), but still inform every
/// other node. Discrete nodes (integral values, few levels) get
/// conditional tables; continuous root nodes get empirical marginals;
/// continuous non-roots get the conditional-expectation learner from
/// `spec` plus residual noise. A discrete-table `spec` applied to a
/// continuous non-root falls back to the binned learner.
pub fn fit_scm_from_data(
    graph: &CausalGraph,
    data: &Dataset,
    spec: &EstimatorSpec,
) -> Result<Scm> {
    let missing: Vec<&String> = graph
        .node_names()
        .iter()
        .filter(|n| !data.has_column(n))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Precondition(format!(
            "dataset lacks columns for nodes {missing:?}"
        )));
    }

    let mut mechanisms = HashMap::new();
    for name in graph.node_names() {
        let rows = data.rows_not_intervened_on(name);
        if rows.is_empty() {
            return Err(Error::Precondition(format!(
                "every row intervenes on `{name}`; nothing left to fit its mechanism from"
            )));
        }
        let usable = if rows.len() == data.n_rows() {
            data.clone()
        } else {
            data.select_rows(&rows)
        };
        let parents = graph.parents_of(name)?;
        let col = usable.column(name)?;
        let m = match discrete_levels(col) {
            Some(classes) => fit_discrete(&usable, name, &parents, classes)?,
            None if parents.is_empty() => Mechanism::EmpiricalMarginal(col.to_vec()),
            None => {
                let kind = match spec.kind {
                    EstimatorKind::DiscreteCpt => EstimatorKind::BinnedNonparametric,
                    k => k,
                };
                let node_spec = EstimatorSpec { kind, ..*spec };
                let model = estimator::fit(&node_spec, &usable, &parents, name)?;
                let residuals = (0..usable.n_rows())
                    .map(|r| Ok(usable.value(r, name)? - model.predict_row(&usable, r)?))
                    .collect::<Result<Vec<f64>>>()?;
                Mechanism::FittedContinuous { model, residuals }
            }
        };
        mechanisms.insert(name.clone(), m);
    }
    Scm::new(graph.clone(), mechanisms)
}

fn fit_discrete(
    data: &Dataset,
    name: &str,
    parents: &[&str],
    classes: Vec<f64>,
) -> Result<Mechanism> {
    let col = data.column(name)?;
    let class_index = |v: f64| -> usize {
        classes
            .iter()
            .position(|c| (c - v.round()).abs() < 0.5)
            .expect("value is one of the detected levels")
    };
    let mut counts: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut marginal = vec![0usize; classes.len()];
    for r in 0..data.n_rows() {
        let key: Vec<i64> = parents
            .iter()
            .map(|p| Ok(data.value(r, p)?.round() as i64))
            .collect::<Result<_>>()?;
        counts.entry(key).or_insert_with(|| vec![0; classes.len()])[class_index(col[r])] += 1;
        marginal[class_index(col[r])] += 1;
    }
    let normalize = |counts: &[usize]| -> Vec<f64> {
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    let table = if parents.is_empty() {
        HashMap::new()
    } else {
        counts.iter().map(|(k, c)| (k.clone(), normalize(c))).collect()
    };
    let fallback = normalize(&marginal);
    Ok(Mechanism::Cpt(CptMechanism::new(
        parents.iter().map(|s| s.to_string()).collect(),
        classes,
        table,
        fallback,
    )?))
}
