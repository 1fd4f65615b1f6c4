//! Command-line front end: validate SCM files, sample data, run
//! attributions, and run the built-in studies.
//!
//! Every command is deterministic given `--seed` (default
//! [`DEFAULT_SEED`]). Exit codes: 0 success, 1 computation failure, 2
//! input/parse failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use ccshap::attribution::{cc_shapley_values, shapley_values, AttributionResult};
use ccshap::dataset::Dataset;
use ccshap::error::{Error, Result};
use ccshap::estimator::{EstimatorKind, EstimatorSpec};
use ccshap::experiments::{
    fig_topology_graph, run_breakfast, run_diabetes_risk, run_discrete_pipeline,
    run_linear_sweep, write_results, Builtin, CheckLine,
};
use ccshap::graph::SuppressorStatus;
use ccshap::render::write_beeswarm;
use ccshap::scm::parse_scm_toml;
use ccshap::seed::derive_seed;
use ccshap::{CausalGraph, Scm};

/// The fixed default seed; published so results are reproducible without
/// passing `--seed`.
pub const DEFAULT_SEED: u64 = 1729;

/// Validate structural causal models, sample data, and compute
/// observational and causal-context Shapley attributions.
///
/// Option precedence: command-line flags > `--config` file > built-in
/// defaults. The default output root comes from `--out`, then the
/// `CCSHAP_OUT` environment variable, then `./ccshap-out`.
#[derive(Parser)]
#[command(name = "ccshap", version, about)]
struct Cli {
    /// Optional TOML config file supplying defaults for seed, n-fit,
    /// n-eval, estimator, method, and out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model and report its causal structure: topological order,
    /// suppressor diagnosis, and shortcut applicability.
    GraphCheck(ModelArgs),
    /// Sample rows from a model and write them as CSV.
    Sample(SampleArgs),
    /// Compute Shapley and/or cc-Shapley attributions and write CSVs.
    Attribute(AttributeArgs),
    /// Run a built-in study and print its pass/fail check lines.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Path to an SCM declaration file (TOML).
    #[arg(long, conflicts_with = "builtin")]
    scm: Option<PathBuf>,
    /// Name of a built-in model: breakfast, diabetes-risk, binary-product.
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of rows to draw.
    #[arg(long, default_value_t = 1000)]
    n_fit: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "CCSHAP_OUT")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Method {
    Shapley,
    CcShapley,
    Both,
}

#[derive(Args)]
struct AttributeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Which attribution(s) to compute.
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rows sampled for model fitting.
    #[arg(long)]
    n_fit: Option<usize>,
    /// Rows sampled for evaluation (0 = headers-only outputs).
    #[arg(long)]
    n_eval: Option<usize>,
    /// Estimator: linear, cpt, or binned.
    #[arg(long)]
    estimator: Option<String>,
    /// Output directory.
    #[arg(long, env = "CCSHAP_OUT")]
    out: Option<PathBuf>,
    /// Also write a beeswarm SVG per result.
    #[arg(long)]
    render: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// breakfast, diabetes-risk, linear-sweep, or discrete.
    name: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_fit: Option<usize>,
    #[arg(long)]
    n_eval: Option<usize>,
    /// Number of models in the linear sweep.
    #[arg(long)]
    n_scms: Option<usize>,
    /// CSV dataset for the discrete pipeline (otherwise synthetic).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Graph for the discrete pipeline (only `fig4b` is built in).
    #[arg(long)]
    graph: Option<String>,
    /// Output directory.
    #[arg(long, env = "CCSHAP_OUT")]
    out: Option<PathBuf>,
    /// Also write beeswarm SVGs where the study produces attributions.
    #[arg(long)]
    render: bool,
}

/// Defaults loadable from a `--config` TOML file.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    n_fit: Option<usize>,
    n_eval: Option<usize>,
    estimator: Option<String>,
    method: Option<String>,
    out: Option<PathBuf>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<ConfigFile> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| Error::Parse(format!("config file: {e}")))
            }
        }
    }
}

fn load_model(args: &ModelArgs) -> Result<Scm> {
    match (&args.scm, &args.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            parse_scm_toml(&text)
        }
        (None, Some(name)) => Ok(Builtin::parse(name)?.scm()),
        _ => Err(Error::InvalidArgument(
            "pass exactly one of --scm <file> or --builtin <name>".into(),
        )),
    }
}

fn out_dir(flag: Option<PathBuf>, cfg: &ConfigFile) -> PathBuf {
    flag.or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("ccshap-out"))
}

/// All non-empty contexts for a feature, smallest first. Capped at
/// singleton contexts when the feature set is large.
fn contexts_to_report<'a>(features: &[&'a str], xj: &str) -> Vec<Vec<&'a str>> {
    let others: Vec<&str> = features.iter().copied().filter(|f| *f != xj).collect();
    if others.len() > 6 {
        return others.iter().map(|f| vec![*f]).collect();
    }
    let mut out: Vec<Vec<&str>> = Vec::new();
    for mask in 1u32..(1 << others.len()) {
        let mut ctx: Vec<&str> = (0..others.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| others[i])
            .collect();
        ctx.sort_unstable();
        out.push(ctx);
    }
    out.sort_by_key(|c| (c.len(), c.join(",")));
    out
}

fn cmd_graph_check(args: &ModelArgs) -> Result<()> {
    let m = load_model(args)?;
    let g = m.graph();
    println!("target: {}", g.target());
    println!("topological order: {}", g.topological_order().join(" -> "));
    println!();
    println!("suppressor diagnosis:");
    let features: Vec<&str> = g.features();
    for f in &features {
        let status = match g.suppressor_status(f)? {
            SuppressorStatus::Disconnected => "disconnected from the target".to_string(),
            SuppressorStatus::Suppressor => {
                "suppressor (all target paths pass a collider)".to_string()
            }
            SuppressorStatus::PartialSuppressor => {
                "partial suppressor (some target paths pass a collider)".to_string()
            }
            SuppressorStatus::NotSuppressor => "no collider on any target path".to_string(),
        };
        println!("  {f}: {status}");
    }
    println!();
    println!("shortcut applicability (feature; context):");
    for f in &features {
        for ctx in contexts_to_report(&features, f) {
            let l1 = g.lemma1_applies(f, &ctx)?;
            let l2 = g.lemma2_applies(f, &ctx)?;
            println!(
                "  ({f}; {{{}}}) irrelevant-context: {l1}  intervention-equals-observation: {l2}",
                ctx.join(",")
            );
        }
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs, cfg: &ConfigFile) -> Result<()> {
    let m = load_model(&args.model)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let d = m.sample(args.n_fit, derive_seed(seed, "cli-sample", 0))?;
    let dir = out_dir(args.out.clone(), cfg);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("sample.csv");
    d.save_csv(&path)?;
    println!("wrote {} rows to {}", d.n_rows(), path.display());
    Ok(())
}

fn cmd_attribute(args: &AttributeArgs, cfg: &ConfigFile) -> Result<()> {
    let m = load_model(&args.model)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let n_fit = args.n_fit.or(cfg.n_fit).unwrap_or(200_000);
    let n_eval = args.n_eval.or(cfg.n_eval).unwrap_or(10_000);
    let method = args.method.unwrap_or(match cfg.method.as_deref() {
        Some("shapley") => Method::Shapley,
        Some("cc-shapley") => Method::CcShapley,
        Some("both") | None => Method::Both,
        Some(other) => {
            return Err(Error::InvalidArgument(format!(
                "unknown method `{other}` in config; expected shapley, cc-shapley, or both"
            )))
        }
    });
    let estimator = args
        .estimator
        .as_deref()
        .or(cfg.estimator.as_deref())
        .map(EstimatorKind::parse)
        .transpose()?
        .unwrap_or(EstimatorKind::BinnedNonparametric);
    let spec = EstimatorSpec::new(estimator);

    let target = m.graph().target().to_string();
    let d_fit = m.sample(n_fit, derive_seed(seed, "cli-fit", 0))?;
    let eval = if n_eval == 0 {
        Dataset::new(d_fit.names())?
    } else {
        m.sample(n_eval, derive_seed(seed, "cli-eval", 0))?
    };

    let mut results: Vec<AttributionResult> = Vec::new();
    if method != Method::CcShapley {
        results.push(shapley_values(&d_fit, &target, &eval, &spec)?);
    }
    if method != Method::Shapley {
        results.push(cc_shapley_values(
            &m,
            &eval,
            &spec,
            n_fit,
            derive_seed(seed, "cli-cc", 0),
        )?);
    }

    let dir = out_dir(args.out.clone(), cfg);
    let refs: Vec<&AttributionResult> = results.iter().collect();
    write_results(&dir, &refs)?;
    println!("wrote attributions.csv, contexts.csv, plan.txt to {}", dir.display());
    if args.render {
        for r in &results {
            let name = format!("{}.svg", r.method.to_string().replace('-', "_"));
            let title = format!("{} attribution of {}", r.method, target);
            write_beeswarm(r, &title, &dir.join(&name))?;
            println!("wrote {name}");
        }
    }
    Ok(())
}

fn discrete_graph(name: Option<&str>) -> Result<CausalGraph> {
    match name.unwrap_or("fig4b") {
        "fig4b" => Ok(fig_topology_graph()),
        other => Err(Error::InvalidArgument(format!(
            "unknown graph `{other}`; only `fig4b` is built in"
        ))),
    }
}

fn cmd_experiment(args: &ExperimentArgs, cfg: &ConfigFile) -> Result<()> {
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let dir = out_dir(args.out.clone(), cfg);
    let checks: Vec<CheckLine>;
    let mut rendered: Vec<AttributionResult> = Vec::new();
    match args.name.as_str() {
        "breakfast" => {
            let n_fit = args.n_fit.or(cfg.n_fit).unwrap_or(200_000);
            let n_eval = args.n_eval.or(cfg.n_eval).unwrap_or(10_000);
            let report = run_breakfast(n_fit, n_eval, seed)?;
            report.write_to(&dir)?;
            checks = report.checks();
            print!("{}", report.sap);
            if args.render {
                rendered.push(report.shapley.clone());
                rendered.push(report.cc.clone());
            }
        }
        "diabetes-risk" | "diabetes" => {
            let n_fit = args.n_fit.or(cfg.n_fit).unwrap_or(200_000);
            let n_eval = args.n_eval.or(cfg.n_eval).unwrap_or(10_000);
            let report = run_diabetes_risk(n_fit, n_eval, seed)?;
            report.write_to(&dir)?;
            checks = report.checks();
            if args.render {
                rendered.push(report.shapley.clone());
                rendered.push(report.cc.clone());
            }
        }
        "linear-sweep" => {
            let n_scms = args.n_scms.unwrap_or(200);
            let n_rows = args.n_fit.or(cfg.n_fit).unwrap_or(30_000);
            let report = run_linear_sweep(n_scms, 9, 0.8, n_rows, seed)?;
            report.write_to(&dir)?;
            checks = report.checks();
        }
        "discrete" => {
            let n_fit = args.n_fit.or(cfg.n_fit).unwrap_or(200_000);
            let n_eval = args.n_eval.or(cfg.n_eval).unwrap_or(10_000);
            let g = discrete_graph(args.graph.as_deref())?;
            let report = run_discrete_pipeline(args.data.as_deref(), &g, n_fit, n_eval, seed)?;
            report.write_to(&dir)?;
            checks = report.checks();
            if args.render {
                rendered.push(report.shapley.clone());
                rendered.push(report.cc.clone());
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown experiment `{other}`; expected breakfast, diabetes-risk, \
                 linear-sweep, or discrete"
            )))
        }
    }
    for line in &checks {
        println!("{}", line.render());
    }
    for r in &rendered {
        let name = format!("{}.svg", r.method.to_string().replace('-', "_"));
        write_beeswarm(r, &format!("{} ({})", r.method, args.name), &dir.join(&name))?;
    }
    println!("outputs in {}", dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = ConfigFile::load(cli.config.as_deref())?;
    match &cli.command {
        Command::GraphCheck(a) => cmd_graph_check(a),
        Command::Sample(a) => cmd_sample(a, &cfg),
        Command::Attribute(a) => cmd_attribute(a, &cfg),
        Command::Experiment(a) => cmd_experiment(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
