//! Structural causal models: per-node mechanisms over a causal graph,
//! ancestral sampling, atomic and stochastic interventions, marginal
//! samplers, the random linear SCM generator, and fitting mechanisms from
//! data.
//!
//! Sampling is deterministic given a seed and independent of row
//! partitioning: each row draws from its own stream derived from
//! `(seed, "sample", row)`.

mod expr;
mod fit;
mod linear;
mod noise;
mod parse;

pub use expr::{sigmoid, BinOp, Expr, UnOp};
pub use fit::fit_scm_from_data;
pub use linear::random_linear_scm;
pub use noise::NoiseSpec;
pub use parse::parse_scm_toml;

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimator::FittedModel;
use crate::graph::CausalGraph;
use crate::seed::stream_rng;

/// Discrete conditional distribution over a node's categories given its
/// parent configuration, with an unconditional fallback for unseen
/// configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct CptMechanism {
    parents: Vec<String>,
    classes: Vec<f64>,
    table: HashMap<Vec<i64>, Vec<f64>>,
    fallback: Vec<f64>,
}

impl CptMechanism {
    pub fn new(
        parents: Vec<String>,
        classes: Vec<f64>,
        table: HashMap<Vec<i64>, Vec<f64>>,
        fallback: Vec<f64>,
    ) -> Result<Self> {
        if classes.is_empty() || fallback.len() != classes.len() {
            return Err(Error::InvalidArgument(
                "conditional table needs classes and a matching fallback".into(),
            ));
        }
        for probs in table.values().chain(std::iter::once(&fallback)) {
            if probs.len() != classes.len()
                || probs.iter().any(|p| !(0.0..=1.0).contains(p))
                || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(Error::InvalidArgument(
                    "conditional table rows must be distributions over the classes".into(),
                ));
            }
        }
        Ok(CptMechanism {
            parents,
            classes,
            table,
            fallback,
        })
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn classes(&self) -> &[f64] {
        &self.classes
    }

    pub fn n_configs(&self) -> usize {
        self.table.len()
    }

    fn key(parent_values: &[f64]) -> Vec<i64> {
        parent_values.iter().map(|v| v.round() as i64).collect()
    }

    pub fn class_probs(&self, parent_values: &[f64]) -> &[f64] {
        self.table
            .get(&Self::key(parent_values))
            .unwrap_or(&self.fallback)
    }

    fn sample<R: Rng>(&self, parent_values: &[f64], rng: &mut R) -> f64 {
        let probs = self.class_probs(parent_values);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return self.classes[i];
            }
        }
        *self.classes.last().unwrap()
    }
}

/// Assignment function of one node.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    /// Source node drawn directly from a noise distribution.
    Exogenous(NoiseSpec),
    /// Deterministic expression over parents; references its own noise draw
    /// via the `noise` keyword when a noise spec is declared.
    Assign {
        expr: Expr,
        noise: Option<NoiseSpec>,
    },
    /// Binary node: the expression gives P(X = 1) from the parents.
    Bernoulli { prob: Expr },
    /// Fitted discrete conditional distribution.
    Cpt(CptMechanism),
    /// Fitted continuous model plus additive noise resampled from the
    /// training residuals.
    FittedContinuous {
        model: FittedModel,
        residuals: Vec<f64>,
    },
    /// Source node resampled from an empirical pool of values.
    EmpiricalMarginal(Vec<f64>),
    /// Constant value (result of an atomic intervention).
    Constant(f64),
    /// Value supplied per row by a joint intervention sampler.
    External,
}

impl Mechanism {
    /// One-line description for reports.
    pub fn describe(&self) -> String {
        match self {
            Mechanism::Exogenous(n) => format!("exogenous {n}"),
            Mechanism::Assign { expr, noise: Some(n) } => format!("{expr} with noise {n}"),
            Mechanism::Assign { expr, noise: None } => format!("{expr}"),
            Mechanism::Bernoulli { prob } => format!("bernoulli({prob})"),
            Mechanism::Cpt(c) => format!(
                "conditional table over {} classes, {} configurations",
                c.classes.len(),
                c.table.len()
            ),
            Mechanism::FittedContinuous { model, residuals } => format!(
                "fitted {} + residual noise ({} residuals)",
                model.summary_short(),
                residuals.len()
            ),
            Mechanism::EmpiricalMarginal(pool) => {
                format!("empirical marginal ({} values)", pool.len())
            }
            Mechanism::Constant(v) => format!("constant {v}"),
            Mechanism::External => "externally supplied (stochastic intervention)".into(),
        }
    }
}

/// A generator of joint draws for a declared set of nodes, backed by an
/// empirical pool. `independent` resamples each column separately instead
/// of drawing whole rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampler {
    names: Vec<String>,
    pool: Vec<Vec<f64>>,
    independent: bool,
}

impl Sampler {
    /// Build from the given columns of a dataset. Names are stored sorted.
    pub fn from_dataset<S: AsRef<str>>(d: &Dataset, names: &[S], independent: bool) -> Result<Self> {
        let mut sorted: Vec<String> = names.iter().map(|n| n.as_ref().to_string()).collect();
        sorted.sort();
        sorted.dedup();
        if sorted.is_empty() || d.n_rows() == 0 {
            return Err(Error::InvalidArgument(
                "sampler needs at least one node and one pool row".into(),
            ));
        }
        let cols: Vec<&[f64]> = sorted
            .iter()
            .map(|n| d.column(n))
            .collect::<Result<_>>()?;
        let pool = (0..d.n_rows())
            .map(|r| cols.iter().map(|c| c[r]).collect())
            .collect();
        Ok(Sampler {
            names: sorted,
            pool,
            independent,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// One joint draw, in the order of [`names`](Self::names).
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        if self.independent {
            (0..self.names.len())
                .map(|c| self.pool[rng.random_range(0..self.pool.len())][c])
                .collect()
        } else {
            self.pool[rng.random_range(0..self.pool.len())].clone()
        }
    }
}

/// A structural causal model: a causal graph plus one mechanism per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    graph: CausalGraph,
    mechanisms: Vec<Mechanism>,
    joint: Vec<Sampler>,
    topo: Vec<usize>,
}

impl Scm {
    pub fn new(graph: CausalGraph, mechanisms: HashMap<String, Mechanism>) -> Result<Self> {
        let mut ordered = Vec::with_capacity(graph.len());
        for name in graph.node_names() {
            let m = mechanisms
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("no mechanism for node `{name}`")))?
                .clone();
            ordered.push(m);
        }
        if mechanisms.len() != graph.len() {
            let extra: Vec<&String> = mechanisms
                .keys()
                .filter(|k| !graph.contains(k))
                .collect();
            return Err(Error::InvalidArgument(format!(
                "mechanisms given for unknown nodes: {extra:?}"
            )));
        }
        let scm = Scm {
            topo: Vec::new(),
            mechanisms: ordered,
            joint: Vec::new(),
            graph,
        };
        scm.validated()
    }

    fn validated(mut self) -> Result<Self> {
        for (i, name) in self.graph.node_names().iter().enumerate() {
            let parents: BTreeSet<String> = self
                .graph
                .parents_of(name)?
                .into_iter()
                .map(String::from)
                .collect();
            let check_refs = |expr: &Expr| -> Result<()> {
                for v in expr.variables() {
                    if !parents.contains(&v) {
                        return Err(Error::InvalidArgument(format!(
                            "mechanism of `{name}` references `{v}` which is not a parent"
                        )));
                    }
                }
                Ok(())
            };
            match &self.mechanisms[i] {
                Mechanism::Exogenous(n) => {
                    n.validate()?;
                    if !parents.is_empty() {
                        return Err(Error::InvalidArgument(format!(
                            "exogenous node `{name}` must not have parents"
                        )));
                    }
                }
                Mechanism::Assign { expr, noise } => {
                    check_refs(expr)?;
                    match (noise, expr.references_noise()) {
                        (Some(n), true) => n.validate()?,
                        (Some(_), false) => {
                            return Err(Error::InvalidArgument(format!(
                                "mechanism of `{name}` declares noise but never references it"
                            )))
                        }
                        (None, true) => {
                            return Err(Error::InvalidArgument(format!(
                                "mechanism of `{name}` references noise but declares none"
                            )))
                        }
                        (None, false) => {}
                    }
                }
                Mechanism::Bernoulli { prob } => check_refs(prob)?,
                Mechanism::Cpt(c) => {
                    for p in &c.parents {
                        if !parents.contains(p) {
                            return Err(Error::InvalidArgument(format!(
                                "conditional table of `{name}` uses `{p}` which is not a parent"
                            )));
                        }
                    }
                }
                Mechanism::FittedContinuous { model, .. } => {
                    for p in model.inputs() {
                        if !parents.contains(p) {
                            return Err(Error::InvalidArgument(format!(
                                "fitted mechanism of `{name}` uses `{p}` which is not a parent"
                            )));
                        }
                    }
                }
                Mechanism::EmpiricalMarginal(pool) => {
                    if pool.is_empty() {
                        return Err(Error::InvalidArgument(format!(
                            "empirical marginal of `{name}` has an empty pool"
                        )));
                    }
                    if !parents.is_empty() {
                        return Err(Error::InvalidArgument(format!(
                            "empirical-marginal node `{name}` must not have parents"
                        )));
                    }
                }
                Mechanism::Constant(v) => {
                    if !v.is_finite() {
                        return Err(Error::InvalidArgument(format!(
                            "constant mechanism of `{name}` is not finite"
                        )));
                    }
                }
                Mechanism::External => {}
            }
        }
        let order = self.graph.topological_order();
        self.topo = order
            .iter()
            .map(|n| self.graph.idx(n).expect("topological order node exists"))
            .collect();
        Ok(self)
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn mechanism(&self, name: &str) -> Result<&Mechanism> {
        Ok(&self.mechanisms[self.graph.idx(name)?])
    }

    /// Topological order; parents precede children, ties broken by name.
    pub fn topological_order(&self) -> Vec<&str> {
        self.graph.topological_order()
    }

    /// Draw `n` i.i.d. joint rows by ancestral sampling. Deterministic given
    /// `seed`; row `r` uses the stream `(seed, "sample", r)`, so the result
    /// does not depend on how rows are partitioned across threads.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be >= 1".into()));
        }
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|row| self.sample_row(seed, row))
            .collect::<Result<_>>()?;
        let mut d = Dataset::new(self.graph.node_names())?;
        for row in rows {
            d.push_row(&row)?;
        }
        Ok(d)
    }

    fn sample_row(&self, seed: u64, row: usize) -> Result<Vec<f64>> {
        let mut rng = stream_rng(seed, "sample", row as u64);
        let n = self.graph.len();
        let mut values = vec![f64::NAN; n];
        let mut set = vec![false; n];
        // Joint intervention blocks draw first, in declaration order.
        for sampler in &self.joint {
            let draw = sampler.draw(&mut rng);
            for (name, v) in sampler.names.iter().zip(draw) {
                let i = self.graph.idx(name)?;
                values[i] = v;
                set[i] = true;
            }
        }
        for &i in &self.topo {
            if set[i] {
                continue;
            }
            let name = &self.graph.node_names()[i];
            let lookup = |p: &str| -> Option<f64> {
                let j = self.graph.idx(p).ok()?;
                if set[j] {
                    Some(values[j])
                } else {
                    None
                }
            };
            let v = match &self.mechanisms[i] {
                Mechanism::Exogenous(spec) => spec.sample(&mut rng),
                Mechanism::Assign { expr, noise } => {
                    let nv = noise.as_ref().map(|s| s.sample(&mut rng));
                    expr.eval(&lookup, nv).map_err(|e| Error::SampleDomain {
                        node: name.clone(),
                        row,
                        msg: e.to_string(),
                    })?
                }
                Mechanism::Bernoulli { prob } => {
                    let p = prob.eval(&lookup, None).map_err(|e| Error::SampleDomain {
                        node: name.clone(),
                        row,
                        msg: e.to_string(),
                    })?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::SampleDomain {
                            node: name.clone(),
                            row,
                            msg: format!("probability expression evaluated to {p}"),
                        });
                    }
                    if rng.random::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                }
                Mechanism::Cpt(c) => {
                    let pv: Vec<f64> = c
                        .parents
                        .iter()
                        .map(|p| lookup(p).expect("parents sampled before children"))
                        .collect();
                    c.sample(&pv, &mut rng)
                }
                Mechanism::FittedContinuous { model, residuals } => {
                    let pv: Vec<f64> = model
                        .inputs()
                        .iter()
                        .map(|p| lookup(p).expect("parents sampled before children"))
                        .collect();
                    let mut v = model.predict(&pv);
                    if !residuals.is_empty() {
                        v += residuals[rng.random_range(0..residuals.len())];
                    }
                    v
                }
                Mechanism::EmpiricalMarginal(pool) => pool[rng.random_range(0..pool.len())],
                Mechanism::Constant(v) => *v,
                Mechanism::External => unreachable!("external nodes are set by joint samplers"),
            };
            if !v.is_finite() {
                return Err(Error::SampleDomain {
                    node: name.clone(),
                    row,
                    msg: format!("mechanism produced non-finite value {v}"),
                });
            }
            values[i] = v;
            set[i] = true;
        }
        Ok(values)
    }

    /// Replace the mechanisms of the assigned nodes by constants and apply
    /// graph surgery. Assigning the target is an error.
    pub fn intervene_atomic<S: AsRef<str>>(&self, assignments: &[(S, f64)]) -> Result<Scm> {
        if assignments.is_empty() {
            return Ok(self.clone());
        }
        let names: Vec<&str> = assignments.iter().map(|(n, _)| n.as_ref()).collect();
        self.check_disjoint_from_joint(&names)?;
        let graph = self.graph.do_surgery(&names)?;
        let mut mechanisms = self.mechanisms.clone();
        for (n, v) in assignments {
            mechanisms[self.graph.idx(n.as_ref())?] = Mechanism::Constant(*v);
        }
        Scm {
            graph,
            mechanisms,
            joint: self.joint.clone(),
            topo: Vec::new(),
        }
        .validated()
    }

    /// Stochastic intervention: the nodes of `s` are drawn jointly from `q`
    /// each row, independent of their former parents.
    pub fn intervene_stochastic<S: AsRef<str>>(&self, s: &[S], q: Sampler) -> Result<Scm> {
        if s.is_empty() {
            return Ok(self.clone());
        }
        let mut sorted: Vec<&str> = s.iter().map(|n| n.as_ref()).collect();
        sorted.sort();
        sorted.dedup();
        if q.names() != sorted {
            return Err(Error::InvalidArgument(format!(
                "sampler covers {:?} but the intervention set is {:?}",
                q.names(),
                sorted
            )));
        }
        self.check_disjoint_from_joint(&sorted)?;
        let graph = self.graph.do_surgery(&sorted)?;
        let mut mechanisms = self.mechanisms.clone();
        for n in &sorted {
            mechanisms[self.graph.idx(n)?] = Mechanism::External;
        }
        let mut joint = self.joint.clone();
        joint.push(q);
        Scm {
            graph,
            mechanisms,
            joint,
            topo: Vec::new(),
        }
        .validated()
    }

    fn check_disjoint_from_joint(&self, names: &[&str]) -> Result<()> {
        for sampler in &self.joint {
            for n in names {
                if sampler.names.iter().any(|m| m == n) {
                    return Err(Error::InvalidArgument(format!(
                        "node `{n}` is already under a stochastic intervention"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Empirical joint marginal of `s`, backed by an `n_pool`-row ancestral
    /// sample of this model.
    pub fn marginal_sampler<S: AsRef<str>>(
        &self,
        s: &[S],
        n_pool: usize,
        seed: u64,
    ) -> Result<Sampler> {
        let pool = self.sample(n_pool, seed)?;
        Sampler::from_dataset(&pool, s, false)
    }

    /// Product-of-marginals variant: columns resampled independently.
    pub fn marginal_sampler_independent<S: AsRef<str>>(
        &self,
        s: &[S],
        n_pool: usize,
        seed: u64,
    ) -> Result<Sampler> {
        let pool = self.sample(n_pool, seed)?;
        Sampler::from_dataset(&pool, s, true)
    }
}
