//! Feature attribution: exact Shapley context weights, observational and
//! interventional importance measures, Shapley and causal-context Shapley
//! values, structural shortcuts, and the backdoor-adjusted estimator.
//!
//! The observational importance of a feature in a context is the change in
//! the predicted target expectation when the feature is added to the
//! observed context. The interventional variant sets the context by a
//! stochastic intervention on the model instead, which removes collider
//! bias from the attribution. Both are combined over all contexts with the
//! same exact rational weights.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::dataset::{mean, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorSpec, FittedModel};
use crate::graph::CausalGraph;
use crate::scm::{Sampler, Scm};
use crate::seed::derive_seed;

/// Hard cap on the feature count: each feature costs `2^(n-1)` model fits.
pub const MAX_FEATURES: usize = 12;

/// Row cap for the empirical adjustment-variable pools of the backdoor
/// estimator; larger datasets are strided down to this size.
const BACKDOOR_POOL_CAP: usize = 10_000;

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// The weight of one context in a Shapley sum: the probability that a
/// uniformly random feature ordering places exactly this context before
/// the feature under attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextWeight {
    pub subset_size: usize,
    pub n_features: usize,
    rational: Ratio<u128>,
}

impl ContextWeight {
    pub fn rational(&self) -> Ratio<u128> {
        self.rational
    }

    pub fn value(&self) -> f64 {
        *self.rational.numer() as f64 / *self.rational.denom() as f64
    }
}

/// `γ(S) = |S|! (|F| − |S| − 1)! / |F|!`, exactly.
pub fn shapley_weight(subset_size: usize, n_features: usize) -> Result<ContextWeight> {
    if n_features == 0 || n_features > MAX_FEATURES || subset_size >= n_features {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= subset size ({subset_size}) < feature count ({n_features}) <= {MAX_FEATURES}"
        )));
    }
    let num = factorial(subset_size) * factorial(n_features - subset_size - 1);
    Ok(ContextWeight {
        subset_size,
        n_features,
        rational: Ratio::new(num, factorial(n_features)),
    })
}

/// How an importance pair was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportanceMode {
    /// Conditioning on the observed context.
    Observational,
    /// Context set by a stochastic intervention on the model.
    Interventional,
    /// Structural shortcut: the context has no directed path into the
    /// target or the feature, so intervening on it changes nothing and the
    /// empty-context pair is reused.
    ShortcutLemma1,
    /// Structural shortcut: intervening equals observing for this context,
    /// so the observational pair is reused.
    ShortcutLemma2,
    /// Backdoor adjustment over a caller-supplied adjustment set.
    BackdoorAdjusted,
}

impl fmt::Display for ImportanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ImportanceMode::Observational => "observational",
            ImportanceMode::Interventional => "interventional",
            ImportanceMode::ShortcutLemma1 => "shortcut-irrelevant-context",
            ImportanceMode::ShortcutLemma2 => "shortcut-observation-equals-intervention",
            ImportanceMode::BackdoorAdjusted => "backdoor-adjusted",
        };
        f.write_str(s)
    }
}

/// Empirical pools for the backdoor outer expectations: adjustment-variable
/// rows grouped by equal-width bins of the feature under attribution.
#[derive(Debug, Clone, PartialEq)]
struct BackdoorPools {
    w_names: Vec<String>,
    lo: f64,
    hi: f64,
    bins: usize,
    /// Adjustment rows whose feature value fell into each bin.
    by_bin: Vec<Vec<Vec<f64>>>,
    /// Strided subsample of all adjustment rows (the unconditional pool).
    all: Vec<Vec<f64>>,
}

impl BackdoorPools {
    fn bin(&self, v: f64) -> usize {
        if self.hi <= self.lo {
            return 0;
        }
        let t = (v - self.lo) / (self.hi - self.lo);
        ((t * self.bins as f64) as isize).clamp(0, self.bins as isize - 1) as usize
    }
}

/// The two fitted models whose difference is the importance of `feature`
/// in `context`, plus how the pair was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportancePair {
    feature: String,
    context: BTreeSet<String>,
    mode: ImportanceMode,
    model_with: FittedModel,
    model_without: FittedModel,
    backdoor: Option<BackdoorPools>,
}

impl ImportancePair {
    fn new(
        feature: &str,
        context: BTreeSet<String>,
        mode: ImportanceMode,
        model_with: FittedModel,
        model_without: FittedModel,
        backdoor: Option<BackdoorPools>,
    ) -> Self {
        let mut expect: BTreeSet<&str> =
            model_without.inputs().iter().map(|s| s.as_str()).collect();
        expect.insert(feature);
        let with: BTreeSet<&str> = model_with.inputs().iter().map(|s| s.as_str()).collect();
        assert_eq!(
            with, expect,
            "with-model inputs must be the without-model inputs plus the feature"
        );
        ImportancePair {
            feature: feature.to_string(),
            context,
            mode,
            model_with,
            model_without,
            backdoor,
        }
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn context(&self) -> &BTreeSet<String> {
        &self.context
    }

    pub fn mode(&self) -> ImportanceMode {
        self.mode
    }

    pub fn model_with(&self) -> &FittedModel {
        &self.model_with
    }

    pub fn model_without(&self) -> &FittedModel {
        &self.model_without
    }

    /// The importance at one evaluation row: the change in predicted target
    /// expectation from adding the feature to the context.
    pub fn evaluate(&self, d: &Dataset, row: usize) -> Result<f64> {
        match &self.backdoor {
            Some(pools) if !pools.w_names.is_empty() => self.evaluate_backdoor(pools, d, row),
            _ => {
                let with = self.model_with.predict_row(d, row)?;
                let without = self.model_without.predict_row(d, row)?;
                Ok(with - without)
            }
        }
    }

    fn evaluate_backdoor(&self, pools: &BackdoorPools, d: &Dataset, row: usize) -> Result<f64> {
        let xj_val = d.value(row, &self.feature)?;
        let assemble = |model: &FittedModel, w_row: &[f64]| -> Result<f64> {
            let x: Vec<f64> = model
                .inputs()
                .iter()
                .map(|name| {
                    if *name == self.feature {
                        Ok(xj_val)
                    } else if let Some(i) = pools.w_names.iter().position(|w| w == name) {
                        Ok(w_row[i])
                    } else {
                        d.value(row, name)
                    }
                })
                .collect::<Result<_>>()?;
            Ok(model.predict(&x))
        };
        let bin_rows = &pools.by_bin[pools.bin(xj_val)];
        let conditional_pool: &[Vec<f64>] = if bin_rows.is_empty() {
            &pools.all
        } else {
            bin_rows
        };
        let mut with = 0.0;
        for w_row in conditional_pool {
            with += assemble(&self.model_with, w_row)?;
        }
        with /= conditional_pool.len() as f64;
        let mut without = 0.0;
        for w_row in &pools.all {
            without += assemble(&self.model_without, w_row)?;
        }
        without /= pools.all.len() as f64;
        Ok(with - without)
    }
}

fn sorted_inputs(context: &BTreeSet<String>, extra: &[&str]) -> Vec<String> {
    let mut v: BTreeSet<String> = context.clone();
    for e in extra {
        v.insert(e.to_string());
    }
    v.into_iter().collect()
}

fn fit_on(
    d: &Dataset,
    inputs: &[String],
    target: &str,
    spec: &EstimatorSpec,
) -> Result<FittedModel> {
    let refs: Vec<&str> = inputs.iter().map(|s| s.as_str()).collect();
    estimator::fit(spec, d, &refs, target)
}

fn context_set<S: AsRef<str>>(xj: &str, target: &str, s: &[S]) -> Result<BTreeSet<String>> {
    let set: BTreeSet<String> = s.iter().map(|n| n.as_ref().to_string()).collect();
    if set.contains(xj) || set.contains(target) {
        return Err(Error::InvalidArgument(
            "context set must exclude the feature and the target".into(),
        ));
    }
    if xj == target {
        return Err(Error::InvalidArgument(format!(
            "`{xj}` is the target, not a feature"
        )));
    }
    Ok(set)
}

/// Observational importance: fit `E[target | xj, s]` and `E[target | s]`
/// on `d`; the pair's evaluation is their difference.
pub fn importance_obs<S: AsRef<str>>(
    d: &Dataset,
    target: &str,
    xj: &str,
    s: &[S],
    spec: &EstimatorSpec,
) -> Result<ImportancePair> {
    let context = context_set(xj, target, s)?;
    let with_inputs = sorted_inputs(&context, &[xj]);
    let without_inputs = sorted_inputs(&context, &[]);
    let model_with = fit_on(d, &with_inputs, target, spec)?;
    let model_without = fit_on(d, &without_inputs, target, spec)?;
    Ok(ImportancePair::new(
        xj,
        context,
        ImportanceMode::Observational,
        model_with,
        model_without,
        None,
    ))
}

/// Interventional importance: draw the context from its joint marginal,
/// intervene the model with that draw, sample `n_fit` rows from the
/// intervened model, and fit both conditional expectations there.
pub fn importance_do<S: AsRef<str>>(
    m: &Scm,
    xj: &str,
    s: &[S],
    spec: &EstimatorSpec,
    n_fit: usize,
    seed: u64,
) -> Result<ImportancePair> {
    let target = m.graph().target().to_string();
    let context = context_set(xj, &target, s)?;
    let d = sample_under_context(m, &context, n_fit, seed)?;
    let model_with = fit_on(&d, &sorted_inputs(&context, &[xj]), &target, spec)?;
    let model_without = fit_on(&d, &sorted_inputs(&context, &[]), &target, spec)?;
    let mode = if context.is_empty() {
        ImportanceMode::Observational
    } else {
        ImportanceMode::Interventional
    };
    Ok(ImportancePair::new(
        xj,
        context,
        mode,
        model_with,
        model_without,
        None,
    ))
}

/// Sample `n_fit` rows from the model with `context` put under a
/// stochastic intervention drawing from its own joint marginal. An empty
/// context samples the unmodified model.
fn sample_under_context(
    m: &Scm,
    context: &BTreeSet<String>,
    n_fit: usize,
    seed: u64,
) -> Result<Dataset> {
    if context.is_empty() {
        return m.sample(n_fit, derive_seed(seed, "do-fit", 0));
    }
    let names: Vec<&String> = context.iter().collect();
    let q = m.marginal_sampler(&names, n_fit, derive_seed(seed, "do-pool", 0))?;
    m.intervene_stochastic(&names, q)?
        .sample(n_fit, derive_seed(seed, "do-fit", 0))
}

/// Interventional importance with structural shortcuts: if the context
/// cannot influence the target or the feature, the empty-context pair is
/// returned; if intervening provably equals observing, the observational
/// pair (fitted on `obs`) is returned; otherwise falls through to
/// [`importance_do`].
pub fn importance_do_with_shortcuts<S: AsRef<str>>(
    m: &Scm,
    obs: &Dataset,
    xj: &str,
    s: &[S],
    spec: &EstimatorSpec,
    n_fit: usize,
    seed: u64,
) -> Result<ImportancePair> {
    let g = m.graph();
    let target = g.target().to_string();
    let context = context_set(xj, &target, s)?;
    if context.is_empty() {
        return importance_obs(obs, &target, xj, s, spec);
    }
    if g.lemma1_applies(xj, s)? {
        let empty: [&str; 0] = [];
        let pair = importance_obs(obs, &target, xj, &empty, spec)?;
        return Ok(ImportancePair {
            context,
            mode: ImportanceMode::ShortcutLemma1,
            ..pair
        });
    }
    if g.lemma2_applies(xj, s)? {
        let pair = importance_obs(obs, &target, xj, s, spec)?;
        return Ok(ImportancePair {
            mode: ImportanceMode::ShortcutLemma2,
            ..pair
        });
    }
    importance_do(m, xj, s, spec, n_fit, seed)
}

/// Backdoor-adjusted interventional importance from observational data
/// alone: `E_{W|Xj}[E[Y|Xj,S,W]] − E_W[E[Y|S,W]]` over a caller-supplied
/// adjustment set `w`. The structural premises are validated against `g`
/// and the offending path is named on violation.
pub fn backdoor_importance<S: AsRef<str>>(
    d: &Dataset,
    g: &CausalGraph,
    xj: &str,
    s: &[S],
    w: &[S],
    spec: &EstimatorSpec,
) -> Result<ImportancePair> {
    let target = g.target().to_string();
    let context = context_set(xj, &target, s)?;
    let w_set: BTreeSet<String> = w.iter().map(|n| n.as_ref().to_string()).collect();
    if w_set.contains(xj) || context.iter().any(|c| w_set.contains(c)) || w_set.contains(&target)
    {
        return Err(Error::InvalidArgument(
            "adjustment set must be disjoint from the feature, context, and target".into(),
        ));
    }

    // Premise: the context has no directed path into the adjustment set,
    // nor into the feature when an adjustment set is present. (With an
    // empty adjustment set the outer expectation over it disappears and
    // the estimand reduces to the plain conditional difference, so the
    // feature clause is not needed.)
    let path_targets: Vec<&str> = if w_set.is_empty() {
        Vec::new()
    } else {
        w_set.iter().map(|s| s.as_str()).chain([xj]).collect()
    };
    for src in &context {
        for dst in path_targets.iter().copied() {
            if g.ancestors(&[dst])?.contains(src) {
                let witness = g
                    .enumerate_paths(src, dst)?
                    .into_iter()
                    .find(|p| p.directions().iter().all(|d| *d == crate::graph::Dir::Forward))
                    .map(|p| p.render(g))
                    .unwrap_or_else(|| format!("{src} ~> {dst}"));
                return Err(Error::Precondition(format!(
                    "context node `{src}` has a directed path into `{dst}`: {witness}"
                )));
            }
        }
    }
    // Premise: both w and w ∪ {xj} block every backdoor path from the
    // context to the target.
    let s_names: Vec<&String> = context.iter().collect();
    let w_names: Vec<&str> = w_set.iter().map(|s| s.as_str()).collect();
    let mut w_and_xj = w_names.clone();
    w_and_xj.push(xj);
    if !s_names.is_empty() {
        for z in [&w_names, &w_and_xj] {
            for p in g.backdoor_paths(&s_names, &[&target])? {
                if !g.is_blocked(&p, z)? {
                    return Err(Error::Precondition(format!(
                        "backdoor path left open given {{{}}}: {}",
                        z.join(", "),
                        p.render(g)
                    )));
                }
            }
        }
    }

    let w_vec: Vec<String> = w_set.iter().cloned().collect();
    let mut with_inputs = sorted_inputs(&context, &[xj]);
    let mut without_inputs = sorted_inputs(&context, &[]);
    for name in &w_vec {
        with_inputs.push(name.clone());
        without_inputs.push(name.clone());
    }
    with_inputs.sort();
    without_inputs.sort();
    let model_with = fit_on(d, &with_inputs, &target, spec)?;
    let model_without = fit_on(d, &without_inputs, &target, spec)?;

    let pools = build_backdoor_pools(d, xj, &w_vec, spec)?;
    Ok(ImportancePair::new(
        xj,
        context,
        ImportanceMode::BackdoorAdjusted,
        model_with,
        model_without,
        Some(pools),
    ))
}

fn build_backdoor_pools(
    d: &Dataset,
    xj: &str,
    w_names: &[String],
    spec: &EstimatorSpec,
) -> Result<BackdoorPools> {
    // Same axis resolution as the univariate estimator default.
    let bins = if w_names.is_empty() { 1 } else { spec.bins.unwrap_or(32) };
    let xj_col = d.column(xj)?;
    let lo = xj_col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xj_col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pools = BackdoorPools {
        w_names: w_names.to_vec(),
        lo,
        hi,
        bins,
        by_bin: vec![Vec::new(); bins],
        all: Vec::new(),
    };
    if w_names.is_empty() {
        return Ok(pools);
    }
    let stride = (d.n_rows() / BACKDOOR_POOL_CAP).max(1);
    for r in (0..d.n_rows()).step_by(stride) {
        let w_row = d.values(r, w_names)?;
        pools.all.push(w_row.clone());
        let b = pools.bin(xj_col[r]);
        pools.by_bin[b].push(w_row);
    }
    Ok(pools)
}

/// Which attribution a result holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributionMethod {
    Shapley,
    CcShapley,
}

impl fmt::Display for AttributionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributionMethod::Shapley => "shapley",
            AttributionMethod::CcShapley => "cc-shapley",
        })
    }
}

/// The per-row importance evaluations of one (feature, context) pair,
/// together with its weight and provenance mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextEval {
    pub feature: String,
    pub context: BTreeSet<String>,
    pub mode: ImportanceMode,
    pub weight: ContextWeight,
    /// One importance value per evaluation row.
    pub values: Vec<f64>,
}

/// Label for a context set: `∅` or `A+B`.
pub fn context_label(context: &BTreeSet<String>) -> String {
    if context.is_empty() {
        "∅".to_string()
    } else {
        context.iter().cloned().collect::<Vec<_>>().join("+")
    }
}

/// Per-row attributions for every feature, plus the per-context
/// evaluations they were composed from.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub method: AttributionMethod,
    pub target: String,
    pub features: Vec<String>,
    pub eval: Dataset,
    /// `phi[feature_index][row]`.
    pub phi: Vec<Vec<f64>>,
    pub contexts: Vec<ContextEval>,
}

impl AttributionResult {
    pub fn phi(&self, feature: &str) -> Result<&[f64]> {
        let i = self
            .features
            .iter()
            .position(|f| f == feature)
            .ok_or_else(|| Error::UnknownNode(feature.to_string()))?;
        Ok(&self.phi[i])
    }

    pub fn n_rows(&self) -> usize {
        self.eval.n_rows()
    }

    /// Mean absolute attribution of one feature over the evaluation rows.
    pub fn mean_abs_phi(&self, feature: &str) -> Result<f64> {
        let phi = self.phi(feature)?;
        Ok(mean(&phi.iter().map(|v| v.abs()).collect::<Vec<_>>()))
    }

    /// Verify that every φ equals the weighted sum of its stored context
    /// evaluations (pure bookkeeping; tolerance 1e-12).
    pub fn recomposition_check(&self) -> Result<()> {
        for (fi, feature) in self.features.iter().enumerate() {
            for row in 0..self.n_rows() {
                let sum: f64 = self
                    .contexts
                    .iter()
                    .filter(|c| c.feature == *feature)
                    .map(|c| c.weight.value() * c.values[row])
                    .sum();
                if (sum - self.phi[fi][row]).abs() > 1e-12 {
                    return Err(Error::Precondition(format!(
                        "attribution of `{feature}` at row {row} does not recompose: \
                         {} vs {sum}",
                        self.phi[fi][row]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Long-format CSV: `row_id,feature,mode,phi,feature_value`.
    pub fn write_attributions_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row_id", "feature", "mode", "phi", "feature_value"])?;
        for row in 0..self.n_rows() {
            for (fi, feature) in self.features.iter().enumerate() {
                wtr.write_record([
                    row.to_string(),
                    feature.clone(),
                    self.method.to_string(),
                    format!("{}", self.phi[fi][row]),
                    format!("{}", self.eval.value(row, feature)?),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Companion CSV of per-context importance evaluations and weights.
    pub fn write_contexts_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["feature", "context", "mode", "weight", "row_id", "importance"])?;
        for c in &self.contexts {
            for (row, v) in c.values.iter().enumerate() {
                wtr.write_record([
                    c.feature.clone(),
                    context_label(&c.context),
                    c.mode.to_string(),
                    format!("{}", c.weight.value()),
                    row.to_string(),
                    format!("{v}"),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// The computation plan: one line per (feature, context, mode).
    pub fn plan_text(&self) -> String {
        let mut lines = vec![format!("method: {}", self.method)];
        for c in &self.contexts {
            lines.push(format!(
                "{} | {} | weight {} | {}",
                c.feature,
                context_label(&c.context),
                c.weight.value(),
                c.mode
            ));
        }
        lines.join("\n") + "\n"
    }

    /// Mode recorded for one (feature, context) pair.
    pub fn mode_of(&self, feature: &str, context: &BTreeSet<String>) -> Option<ImportanceMode> {
        self.contexts
            .iter()
            .find(|c| c.feature == feature && c.context == *context)
            .map(|c| c.mode)
    }
}

/// All subsets of `features` minus `xj`, ordered by bitmask for
/// determinism.
fn contexts_for(features: &[String], xj: &str) -> Vec<BTreeSet<String>> {
    let others: Vec<&String> = features.iter().filter(|f| *f != xj).collect();
    (0..(1u32 << others.len()))
        .map(|mask| {
            others
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, f)| (*f).clone())
                .collect()
        })
        .collect()
}

fn check_feature_budget(features: &[String]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("no features to attribute".into()));
    }
    if features.len() > MAX_FEATURES {
        return Err(Error::Resource(format!(
            "{} features would need {} model fits per feature; the cap is {MAX_FEATURES} features",
            features.len(),
            1u64 << (features.len() - 1),
        )));
    }
    Ok(())
}

fn assemble_result(
    method: AttributionMethod,
    target: &str,
    features: Vec<String>,
    eval: Dataset,
    contexts: Vec<ContextEval>,
) -> AttributionResult {
    let phi = features
        .iter()
        .map(|f| {
            (0..eval.n_rows())
                .map(|row| {
                    contexts
                        .iter()
                        .filter(|c| c.feature == *f)
                        .map(|c| c.weight.value() * c.values[row])
                        .sum()
                })
                .collect()
        })
        .collect();
    AttributionResult {
        method,
        target: target.to_string(),
        features,
        eval,
        phi,
        contexts,
    }
}

/// Observational Shapley values of every non-target column of `d`,
/// evaluated at the rows of `eval`. Fits `E[target | S]` for every subset
/// `S` of the features (each fit shared across all pairs that need it).
pub fn shapley_values(
    d: &Dataset,
    target: &str,
    eval: &Dataset,
    spec: &EstimatorSpec,
) -> Result<AttributionResult> {
    if !d.has_column(target) {
        return Err(Error::UnknownNode(target.to_string()));
    }
    let features: Vec<String> = d
        .names()
        .iter()
        .filter(|n| *n != target)
        .cloned()
        .collect();
    check_feature_budget(&features)?;

    // Every subset of the features, as sorted input lists.
    let mut subsets: Vec<Vec<String>> = (0..(1u32 << features.len()))
        .map(|mask| {
            features
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, f)| f.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect();
    subsets.sort();
    subsets.dedup();
    let models: HashMap<Vec<String>, FittedModel> = subsets
        .par_iter()
        .map(|inputs| Ok((inputs.clone(), fit_on(d, inputs, target, spec)?)))
        .collect::<Result<_>>()?;

    let mut contexts = Vec::new();
    for xj in &features {
        for context in contexts_for(&features, xj) {
            let weight = shapley_weight(context.len(), features.len())?;
            let with = &models[&sorted_inputs(&context, &[xj])];
            let without = &models[&sorted_inputs(&context, &[])];
            let values = (0..eval.n_rows())
                .map(|row| Ok(with.predict_row(eval, row)? - without.predict_row(eval, row)?))
                .collect::<Result<Vec<f64>>>()?;
            contexts.push(ContextEval {
                feature: xj.clone(),
                context,
                mode: ImportanceMode::Observational,
                weight,
                values,
            });
        }
    }
    Ok(assemble_result(
        AttributionMethod::Shapley,
        target,
        features,
        eval.clone(),
        contexts,
    ))
}

/// Causal-context Shapley values: the same weighted sum, but every
/// non-empty context enters through a stochastic intervention on the model
/// (with the structural shortcuts applied first). Interventional sampling
/// and model fits are cached per context and shared across features.
pub fn cc_shapley_values(
    m: &Scm,
    eval: &Dataset,
    spec: &EstimatorSpec,
    n_fit: usize,
    seed: u64,
) -> Result<AttributionResult> {
    let g = m.graph();
    let target = g.target().to_string();
    let features: Vec<String> = g.features().iter().map(|s| s.to_string()).collect();
    check_feature_budget(&features)?;

    let obs = m.sample(n_fit, derive_seed(seed, "cc-obs", 0))?;

    // The structural plan: mode of every (feature, context) pair.
    let mut plan: Vec<(String, BTreeSet<String>, ImportanceMode)> = Vec::new();
    for xj in &features {
        for context in contexts_for(&features, xj) {
            let names: Vec<&String> = context.iter().collect();
            let mode = if context.is_empty() {
                ImportanceMode::Observational
            } else if g.lemma1_applies(xj, &names)? {
                ImportanceMode::ShortcutLemma1
            } else if g.lemma2_applies(xj, &names)? {
                ImportanceMode::ShortcutLemma2
            } else {
                ImportanceMode::Interventional
            };
            plan.push((xj.clone(), context, mode));
        }
    }

    // Sample one intervened dataset per context that genuinely needs the
    // interventional route; deterministic context order fixes the seeds.
    let mut do_contexts: Vec<BTreeSet<String>> = plan
        .iter()
        .filter(|(_, _, mode)| *mode == ImportanceMode::Interventional)
        .map(|(_, c, _)| c.clone())
        .collect();
    do_contexts.sort();
    do_contexts.dedup();
    let do_datasets: HashMap<BTreeSet<String>, Dataset> = do_contexts
        .par_iter()
        .enumerate()
        .map(|(k, context)| {
            let names: Vec<&String> = context.iter().collect();
            let q = Sampler::from_dataset(&obs, &names, false)?;
            let d = m
                .intervene_stochastic(&names, q)?
                .sample(n_fit, derive_seed(seed, "do-context", k as u64))?;
            Ok((context.clone(), d))
        })
        .collect::<Result<_>>()?;

    // Fit models, sharing identical fits: observational fits are keyed by
    // inputs, interventional fits by (context, inputs).
    let mut obs_inputs: Vec<Vec<String>> = Vec::new();
    let mut do_inputs: Vec<(BTreeSet<String>, Vec<String>)> = Vec::new();
    for (xj, context, mode) in &plan {
        match mode {
            ImportanceMode::Observational | ImportanceMode::ShortcutLemma1 => {
                obs_inputs.push(vec![xj.clone()]);
                obs_inputs.push(Vec::new());
            }
            ImportanceMode::ShortcutLemma2 => {
                obs_inputs.push(sorted_inputs(context, &[xj.as_str()]));
                obs_inputs.push(sorted_inputs(context, &[]));
            }
            ImportanceMode::Interventional => {
                do_inputs.push((context.clone(), sorted_inputs(context, &[xj.as_str()])));
                do_inputs.push((context.clone(), sorted_inputs(context, &[])));
            }
            ImportanceMode::BackdoorAdjusted => unreachable!("not produced by the plan"),
        }
    }
    obs_inputs.sort();
    obs_inputs.dedup();
    do_inputs.sort();
    do_inputs.dedup();
    let obs_models: HashMap<Vec<String>, FittedModel> = obs_inputs
        .par_iter()
        .map(|inputs| Ok((inputs.clone(), fit_on(&obs, inputs, &target, spec)?)))
        .collect::<Result<_>>()?;
    let do_models: HashMap<(BTreeSet<String>, Vec<String>), FittedModel> = do_inputs
        .par_iter()
        .map(|(context, inputs)| {
            let model = fit_on(&do_datasets[context], inputs, &target, spec)?;
            Ok(((context.clone(), inputs.clone()), model))
        })
        .collect::<Result<_>>()?;

    let mut contexts = Vec::new();
    for (xj, context, mode) in plan {
        let (with, without) = match mode {
            ImportanceMode::Observational | ImportanceMode::ShortcutLemma1 => {
                (&obs_models[&vec![xj.clone()]], &obs_models[&Vec::new()])
            }
            ImportanceMode::ShortcutLemma2 => (
                &obs_models[&sorted_inputs(&context, &[xj.as_str()])],
                &obs_models[&sorted_inputs(&context, &[])],
            ),
            ImportanceMode::Interventional => (
                &do_models[&(context.clone(), sorted_inputs(&context, &[xj.as_str()]))],
                &do_models[&(context.clone(), sorted_inputs(&context, &[]))],
            ),
            ImportanceMode::BackdoorAdjusted => unreachable!("not produced by the plan"),
        };
        let weight = shapley_weight(context.len(), features.len())?;
        let values = (0..eval.n_rows())
            .map(|row| Ok(with.predict_row(eval, row)? - without.predict_row(eval, row)?))
            .collect::<Result<Vec<f64>>>()?;
        contexts.push(ContextEval {
            feature: xj,
            context,
            mode,
            weight,
            values,
        });
    }
    Ok(assemble_result(
        AttributionMethod::CcShapley,
        &target,
        features,
        eval.clone(),
        contexts,
    ))
}

/// One feature's entry in a statistical-association-property report.
#[derive(Debug, Clone, PartialEq)]
pub struct SapEntry {
    pub feature: String,
    pub mean_abs_phi: f64,
    /// Whether the zero attribution is also structurally certain in every
    /// context of the result (separation survives every graph surgery).
    pub structurally_zero: bool,
    pub pass: bool,
}

/// Report of [`sap_check`]: features independent of the target must
/// receive (near-)zero attribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SapReport {
    pub tolerance: f64,
    pub entries: Vec<SapEntry>,
}

impl SapReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

impl fmt::Display for SapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return writeln!(f, "no feature is independent of the target; nothing to check");
        }
        for e in &self.entries {
            writeln!(
                f,
                "{}: mean |phi| = {:.6} (tolerance {}) {}{}",
                e.feature,
                e.mean_abs_phi,
                self.tolerance,
                if e.pass { "ok" } else { "VIOLATION" },
                if e.structurally_zero {
                    ""
                } else {
                    " [separation not structural in every context]"
                },
            )?;
        }
        Ok(())
    }
}

/// Check the statistical association property on a causal-context result:
/// every feature d-separated from the target given the empty set must have
/// mean `|φ|` within `tolerance`. Separation is additionally verified to
/// survive the graph surgery of every context the result used.
pub fn sap_check(
    result: &AttributionResult,
    g: &CausalGraph,
    tolerance: f64,
) -> Result<SapReport> {
    if result.method != AttributionMethod::CcShapley {
        return Err(Error::InvalidArgument(
            "the association property is asserted for causal-context results".into(),
        ));
    }
    let target = g.target();
    let mut entries = Vec::new();
    for feature in &result.features {
        if !g.d_separated(&[feature.as_str()], &[target], &[] as &[&str])? {
            continue;
        }
        let mut structural = true;
        for c in result.contexts.iter().filter(|c| c.feature == *feature) {
            if c.context.is_empty() {
                continue;
            }
            let names: Vec<&str> = c.context.iter().map(|s| s.as_str()).collect();
            let cut = g.do_surgery(&names)?;
            if !cut.d_separated(&[feature.as_str()], &[target], &names)? {
                structural = false;
            }
        }
        let mean_abs = result.mean_abs_phi(feature)?;
        entries.push(SapEntry {
            feature: feature.clone(),
            mean_abs_phi: mean_abs,
            structurally_zero: structural,
            pass: mean_abs <= tolerance,
        });
    }
    Ok(SapReport {
        tolerance,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimatorKind;
    use crate::scm::parse_scm_toml;

    #[test]
    fn weights_match_the_known_expansions() {
        assert_eq!(shapley_weight(0, 2).unwrap().rational(), Ratio::new(1, 2));
        assert_eq!(shapley_weight(0, 3).unwrap().rational(), Ratio::new(1, 3));
        assert_eq!(shapley_weight(1, 3).unwrap().rational(), Ratio::new(1, 6));
        assert_eq!(shapley_weight(2, 3).unwrap().rational(), Ratio::new(1, 3));
        assert_eq!(shapley_weight(0, 1).unwrap().rational(), Ratio::new(1, 1));
        assert!(shapley_weight(2, 2).is_err());
        assert!(shapley_weight(0, 13).is_err());
    }

    #[test]
    fn weights_sum_to_one_exactly() {
        fn binomial(n: usize, k: usize) -> u128 {
            factorial(n) / (factorial(k) * factorial(n - k))
        }
        for n in 1..=12 {
            let total: Ratio<u128> = (0..n)
                .map(|s| shapley_weight(s, n).unwrap().rational() * binomial(n - 1, s))
                .sum();
            assert_eq!(total, Ratio::new(1, 1), "normalization at {n} features");
        }
    }

    /// Exhaustive dataset over the four equiprobable outcomes of two
    /// independent fair binary inputs with Y = X1 * X2.
    fn binary_product_data() -> Dataset {
        let mut d = Dataset::new(&["X1", "X2", "Y"]).unwrap();
        for x1 in [0.0, 1.0] {
            for x2 in [0.0, 1.0] {
                d.push_row(&[x1, x2, x1 * x2]).unwrap();
            }
        }
        d
    }

    #[test]
    fn binary_product_importance_formulas() {
        let d = binary_product_data();
        let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
        // I_{X2}(X1) = X1*X2 - X2/2.
        let pair = importance_obs(&d, "Y", "X1", &["X2"], &spec).unwrap();
        for (row, (x1, x2)) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
            .iter()
            .enumerate()
        {
            let got = pair.evaluate(&d, row).unwrap();
            let want = x1 * x2 - x2 / 2.0;
            assert!((got - want).abs() < 1e-12, "({x1},{x2}): {got} vs {want}");
        }
        // I_∅(X1) = X1/2 - 1/4 under 0/1 coding.
        let pair = importance_obs(&d, "Y", "X1", &[] as &[&str], &spec).unwrap();
        assert!((pair.evaluate(&d, 3).unwrap() - 0.25).abs() < 1e-12);
        assert!((pair.evaluate(&d, 0).unwrap() + 0.25).abs() < 1e-12);
    }

    #[test]
    fn binary_product_shapley_pinned_value() {
        let d = binary_product_data();
        let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
        let result = shapley_values(&d, "Y", &d, &spec).unwrap();
        result.recomposition_check().unwrap();
        // At (X1=1, X2=1): 1/2 * 1/4 + 1/2 * 1/2 = 3/8.
        assert!((result.phi("X1").unwrap()[3] - 0.375).abs() < 1e-12);
        assert!((result.phi("X2").unwrap()[3] - 0.375).abs() < 1e-12);
    }

    #[test]
    fn single_feature_shapley_is_the_marginal_importance() {
        let mut d = Dataset::new(&["X", "Y"]).unwrap();
        for (x, y) in [(0.0, 0.0), (1.0, 2.0), (0.0, 0.0), (1.0, 2.0)] {
            d.push_row(&[x, y]).unwrap();
        }
        let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
        let result = shapley_values(&d, "Y", &d, &spec).unwrap();
        let pair = importance_obs(&d, "Y", "X", &[] as &[&str], &spec).unwrap();
        for row in 0..d.n_rows() {
            assert_eq!(
                result.phi("X").unwrap()[row],
                pair.evaluate(&d, row).unwrap()
            );
        }
    }

    #[test]
    fn feature_cap_is_enforced() {
        let names: Vec<String> = (0..14).map(|i| format!("F{i:02}")).collect();
        let mut cols = names.clone();
        cols.push("Y".into());
        let mut d = Dataset::new(&cols).unwrap();
        d.push_row(&vec![0.0; cols.len()]).unwrap();
        let err = shapley_values(&d, "Y", &d, &EstimatorSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Resource(_)), "{err}");
    }

    #[test]
    fn shortcut_selection_on_a_collider_triple() {
        // C -> G <- Y: intervening on G cannot reach C (irrelevant
        // context); the context {C} for G has no backdoor paths at all.
        let toml = r#"
target = "Y"

[[nodes]]
name = "C"
mechanism = "exogenous"
noise = "normal(0, 1)"

[[nodes]]
name = "Y"
mechanism = "bernoulli(0.5)"

[[nodes]]
name = "G"
parents = ["C", "Y"]
mechanism = "C + Y + noise"
noise = "normal(0, 1)"
"#;
        let m = parse_scm_toml(toml).unwrap();
        let obs = m.sample(2_000, 3).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares);
        let p = importance_do_with_shortcuts(&m, &obs, "C", &["G"], &spec, 2_000, 5).unwrap();
        assert_eq!(p.mode(), ImportanceMode::ShortcutLemma1);
        // The reused pair is the empty-context object.
        assert_eq!(p.model_with().inputs(), &["C".to_string()]);
        assert!(p.model_without().inputs().is_empty());
        let p = importance_do_with_shortcuts(&m, &obs, "G", &["C"], &spec, 2_000, 5).unwrap();
        assert_eq!(p.mode(), ImportanceMode::ShortcutLemma2);
    }

    #[test]
    fn confounded_triple_falls_through_to_intervention() {
        // H confounds X and Y; the context {X} for feature Z does not
        // qualify for either shortcut.
        let toml = r#"
target = "Y"

[[nodes]]
name = "H"
mechanism = "exogenous"
noise = "normal(0, 1)"

[[nodes]]
name = "X"
parents = ["H"]
mechanism = "H + noise"
noise = "normal(0, 1)"

[[nodes]]
name = "Z"
parents = ["X"]
mechanism = "X + noise"
noise = "normal(0, 1)"

[[nodes]]
name = "Y"
parents = ["H", "Z"]
mechanism = "H + Z + noise"
noise = "normal(0, 1)"
"#;
        let m = parse_scm_toml(toml).unwrap();
        assert!(!m.graph().lemma1_applies("Z", &["X"]).unwrap());
        assert!(!m.graph().lemma2_applies("Z", &["X"]).unwrap());
        let obs = m.sample(2_000, 3).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares);
        let p = importance_do_with_shortcuts(&m, &obs, "Z", &["X"], &spec, 2_000, 5).unwrap();
        assert_eq!(p.mode(), ImportanceMode::Interventional);
    }

    #[test]
    fn backdoor_premises_name_the_offending_path() {
        let toml = r#"
target = "Y"

[[nodes]]
name = "H"
mechanism = "exogenous"
noise = "normal(0, 1)"

[[nodes]]
name = "S"
parents = ["H"]
mechanism = "H + noise"
noise = "normal(0, 1)"

[[nodes]]
name = "X"
parents = ["S"]
mechanism = "S + noise"
noise = "normal(0, 1)"

[[nodes]]
name = "Y"
parents = ["H", "X"]
mechanism = "H + X + noise"
noise = "normal(0, 1)"
"#;
        let m = parse_scm_toml(toml).unwrap();
        let d = m.sample(5_000, 1).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares);
        // S -> X is a directed path from the context into the feature,
        // which the premises forbid.
        let err = backdoor_importance(&d, m.graph(), "X", &["S"], &["H"], &spec).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
        assert!(err.to_string().contains("S"), "{err}");
        // Unblocked backdoor path: empty adjustment set leaves S <- H -> Y open.
        let err =
            backdoor_importance(&d, m.graph(), "X", &["S"], &[] as &[&str], &spec).unwrap_err();
        assert!(err.to_string().contains("H"), "{err}");
    }

    #[test]
    fn backdoor_with_empty_adjustment_reduces_to_observation() {
        let toml = r#"
target = "Y"

[[nodes]]
name = "C"
mechanism = "exogenous"
noise = "normal(60, 25)"

[[nodes]]
name = "Y"
mechanism = "bernoulli(0.15)"

[[nodes]]
name = "G"
parents = ["C", "Y"]
mechanism = "85 + 0.4*C + 40*Y + noise"
noise = "normal(0, 100)"
"#;
        let m = parse_scm_toml(toml).unwrap();
        let d = m.sample(5_000, 1).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::LinearLeastSquares);
        let bd = backdoor_importance(&d, m.graph(), "G", &["C"], &[] as &[&str], &spec).unwrap();
        let obs = importance_obs(&d, "Y", "G", &["C"], &spec).unwrap();
        for row in 0..20 {
            assert_eq!(
                bd.evaluate(&d, row).unwrap(),
                obs.evaluate(&d, row).unwrap()
            );
        }
    }

    #[test]
    fn backdoor_matches_intervention_on_a_confounded_model() {
        // Small discrete SCM with a confounder: H confounds the context S
        // and the target; adjusting for {H} must reproduce the
        // interventional importance computed directly on the model.
        let toml = r#"
target = "Y"

[[nodes]]
name = "H"
mechanism = "exogenous"
noise = "bernoulli(0.5)"

[[nodes]]
name = "S"
parents = ["H"]
mechanism = "bernoulli(0.2 + 0.6*H)"

[[nodes]]
name = "X"
mechanism = "exogenous"
noise = "bernoulli(0.5)"

[[nodes]]
name = "Y"
parents = ["H", "S", "X"]
mechanism = "H + 2*S + 3*X + noise"
noise = "normal(0, 0.25)"
"#;
        let m = parse_scm_toml(toml).unwrap();
        let n = 200_000;
        let d = m.sample(n, 1).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
        let bd = backdoor_importance(&d, m.graph(), "X", &["S"], &["H"], &spec).unwrap();
        assert_eq!(bd.mode(), ImportanceMode::BackdoorAdjusted);
        let inter = importance_do(&m, "X", &["S"], &spec, n, 7).unwrap();
        let eval = m.sample(200, 99).unwrap();
        for row in 0..eval.n_rows() {
            let a = bd.evaluate(&eval, row).unwrap();
            let b = inter.evaluate(&eval, row).unwrap();
            assert!((a - b).abs() < 0.03, "row {row}: backdoor {a} vs do {b}");
        }
    }

    #[test]
    fn cc_shapley_on_the_collider_triple_uses_shortcuts_everywhere() {
        let toml = r#"
target = "Y"

[[nodes]]
name = "C"
mechanism = "exogenous"
noise = "normal(0, 1)"

[[nodes]]
name = "Y"
mechanism = "bernoulli(0.5)"

[[nodes]]
name = "G"
parents = ["C", "Y"]
mechanism = "C + Y + noise"
noise = "normal(0, 1)"
"#;
        let m = parse_scm_toml(toml).unwrap();
        let eval = m.sample(200, 5).unwrap();
        let spec = EstimatorSpec::default();
        let result = cc_shapley_values(&m, &eval, &spec, 20_000, 11).unwrap();
        result.recomposition_check().unwrap();
        let g_ctx: BTreeSet<String> = ["G".to_string()].into();
        let c_ctx: BTreeSet<String> = ["C".to_string()].into();
        assert_eq!(
            result.mode_of("C", &g_ctx),
            Some(ImportanceMode::ShortcutLemma1)
        );
        assert_eq!(
            result.mode_of("G", &c_ctx),
            Some(ImportanceMode::ShortcutLemma2)
        );
        let report = sap_check(&result, m.graph(), 0.05).unwrap();
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.entries[0].feature, "C");
        assert!(report.entries[0].structurally_zero);
        assert!(report.pass(), "{report}");
    }

    #[test]
    fn csv_exports_are_deterministic() {
        let d = binary_product_data();
        let spec = EstimatorSpec::new(EstimatorKind::DiscreteCpt);
        let result = shapley_values(&d, "Y", &d, &spec).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        result.write_attributions_csv(&mut a).unwrap();
        shapley_values(&d, "Y", &d, &spec)
            .unwrap()
            .write_attributions_csv(&mut b)
            .unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        result.write_contexts_csv(&mut c).unwrap();
        assert!(!c.is_empty());
        assert!(result.plan_text().contains("X1"));
    }
}
