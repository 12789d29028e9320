//! Command-line front end: run strategy evaluations from a config file,
//! compute propensity tables, and evaluate the closed-form bias/variance
//! expressions.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use interference_lab::analytic::{self, LinearBiasDesign, MomentSource};
use interference_lab::design::{
    greedy_partition, partition_from_text, Design, DEFAULT_SUPPORT_CAP,
};
use interference_lab::error::Error;
use interference_lab::estimator::Contrast;
use interference_lab::exposure::ExposureModel;
use interference_lab::graph::InterferenceGraph;
use interference_lab::harness::{self, EmitFormat, ExperimentConfig};
use interference_lab::outcomes::PotentialOutcomeTable;
use interference_lab::propensity::{
    analytic_propensity, enumerated_propensity, mc_propensity, PropensityTable,
};

#[derive(Parser)]
#[command(
    name = "interference-lab",
    about = "Evaluate randomized-experiment strategies under network interference",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the strategies in a config file (Monte Carlo or exact mode).
    Run(RunArgs),
    /// Run the config in exact-enumeration mode regardless of its `mode`.
    Exact(RunArgs),
    /// Compute a propensity table for a design on a graph.
    Propensity(PropensityArgs),
    /// Evaluate a closed-form bias or variance expression.
    Analytic(AnalyticArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct PropensityArgs {
    /// Interference graph in edge-list format (`n m` then `i j` lines).
    #[arg(long)]
    graph: PathBuf,
    /// Exposure model: binary | symmetric | general.
    #[arg(long)]
    model: String,
    /// Design: crd | bernoulli | restricted_bernoulli | cluster | independent_set.
    #[arg(long)]
    design: String,
    /// Treated count for crd / independent_set, treated clusters for cluster.
    #[arg(long)]
    n_t: Option<usize>,
    /// Coin probability for the Bernoulli designs.
    #[arg(long)]
    p: Option<f64>,
    /// Number of greedily grown clusters (cluster design).
    #[arg(long)]
    clusters: Option<usize>,
    /// Partition file of `unit cluster` lines, overriding --clusters.
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Uniform-pick probability for the independent-set design.
    #[arg(long, default_value_t = 1.0)]
    mix_p: f64,
    /// Computation: analytic | enumerate | mc.
    #[arg(long, default_value = "analytic")]
    method: String,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyticArgs {
    /// Formula: bias_naive_general | bias_linear | bias_binary |
    /// bias_cluster_linear | var_naive_linear_crd | var_ht | var_naive_binary.
    formula: String,
    /// Interference graph in edge-list format.
    #[arg(long)]
    graph: PathBuf,
    /// Formula parameters (TOML), see the config reference in the README.
    #[arg(long)]
    params: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parameter file shared by the `analytic` subcommands; each formula reads
/// the subset it needs.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalyticParams {
    design: Option<String>,
    n_t: Option<usize>,
    p: Option<f64>,
    k_t: Option<usize>,
    clusters: Option<usize>,
    partition: Option<String>,
    #[serde(default)]
    partition_seed: u64,
    gamma: Option<f64>,
    gammas: Option<Vec<f64>>,
    thetas: Option<Vec<f64>>,
    sigma2: Option<f64>,
    /// Potential-outcome table in the columnar replay format.
    table: Option<String>,
    /// Contrast for variance formulas: dte | tte.
    contrast: Option<String>,
    exposure: Option<String>,
    mc_samples: Option<u64>,
    #[serde(default)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> interference_lab::Result<()> {
    match cli.command {
        Command::Run(args) => run_cmd(args, false),
        Command::Exact(args) => run_cmd(args, true),
        Command::Propensity(args) => propensity_cmd(args),
        Command::Analytic(args) => analytic_cmd(args),
    }
}

fn run_cmd(args: RunArgs, force_exact: bool) -> interference_lab::Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if force_exact {
        cfg.experiment.mode = "exact_enumeration".into();
    }
    let out = harness::run(&cfg)?;
    for skip in &out.skipped {
        eprintln!("skipped {}: {}", skip.strategy, skip.reason);
    }
    let format = match args.format {
        OutputFormat::Csv => EmitFormat::Csv,
        OutputFormat::Json => EmitFormat::Json,
    };
    match args.output {
        Some(path) => harness::emit(&out.results, format, &path)?,
        None => {
            let body = match format {
                EmitFormat::Csv => harness::to_csv(&out.results),
                EmitFormat::Json => harness::to_json(&out.results),
            };
            print!("{body}");
        }
    }
    Ok(())
}

fn load_graph(path: &PathBuf) -> interference_lab::Result<InterferenceGraph> {
    InterferenceGraph::from_edge_list_text(&std::fs::read_to_string(path)?)
}

fn propensity_cmd(args: PropensityArgs) -> interference_lab::Result<()> {
    let g = Arc::new(load_graph(&args.graph)?);
    let model = ExposureModel::parse(&args.model)?;
    let design = build_design(
        &args.design,
        &g,
        args.n_t,
        args.p,
        args.clusters,
        args.partition.as_ref(),
        0,
        args.mix_p,
    )?;
    let table: PropensityTable = match args.method.as_str() {
        "analytic" => analytic_propensity(&design, &g, model)?,
        "enumerate" => enumerated_propensity(&design, &g, model, DEFAULT_SUPPORT_CAP)?.0,
        "mc" => mc_propensity(&design, &g, model, args.samples, args.seed)?,
        other => return Err(Error::Config(format!("unknown method `{other}`"))),
    };
    let csv = table.to_csv();
    match args.output {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_design(
    kind: &str,
    g: &Arc<InterferenceGraph>,
    n_t: Option<usize>,
    p: Option<f64>,
    clusters: Option<usize>,
    partition: Option<&PathBuf>,
    partition_seed: u64,
    mix_p: f64,
) -> interference_lab::Result<Design> {
    let need = |name: &str| Error::Config(format!("design `{kind}` needs --{name}"));
    match kind {
        "crd" => Design::crd(g.n(), n_t.ok_or_else(|| need("n-t"))?),
        "bernoulli" => Design::bernoulli(g.n(), p.ok_or_else(|| need("p"))?),
        "restricted_bernoulli" => Design::restricted_bernoulli(g.n(), p.ok_or_else(|| need("p"))?),
        "cluster" => {
            let part = match partition {
                Some(path) => partition_from_text(&std::fs::read_to_string(path)?, g.n())?,
                None => {
                    greedy_partition(g, clusters.ok_or_else(|| need("clusters"))?, partition_seed)?
                }
            };
            Design::cluster(part, n_t.ok_or_else(|| need("n-t"))?)
        }
        "independent_set" => {
            Design::independent_set(g.clone(), n_t.ok_or_else(|| need("n-t"))?, mix_p)
        }
        other => Err(Error::Config(format!("unknown design `{other}`"))),
    }
}

fn analytic_cmd(args: AnalyticArgs) -> interference_lab::Result<()> {
    let g = Arc::new(load_graph(&args.graph)?);
    let params: AnalyticParams = toml::from_str(&std::fs::read_to_string(&args.params)?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let load_table = |params: &AnalyticParams| -> interference_lab::Result<PotentialOutcomeTable> {
        let path = params
            .table
            .as_ref()
            .ok_or_else(|| Error::Config("this formula needs `table` in the params file".into()))?;
        PotentialOutcomeTable::from_columnar_text(&std::fs::read_to_string(path)?)
    };
    let build = |params: &AnalyticParams| -> interference_lab::Result<Design> {
        build_design(
            params
                .design
                .as_deref()
                .ok_or_else(|| Error::Config("this formula needs `design`".into()))?,
            &g,
            params.n_t.or(params.k_t),
            params.p,
            params.clusters,
            params.partition.as_ref().map(PathBuf::from).as_ref(),
            params.partition_seed,
            1.0,
        )
    };

    let value = match args.formula.as_str() {
        "bias_naive_general" => {
            let design = build(&params)?;
            let table = load_table(&params)?;
            let model = ExposureModel::parse(params.exposure.as_deref().unwrap_or("binary"))?;
            let target = match params.contrast.as_deref().unwrap_or("dte") {
                "dte" => interference_lab::outcomes::EstimandKind::Dte,
                "tte" => interference_lab::outcomes::EstimandKind::Tte,
                other => return Err(Error::Config(format!("unknown target `{other}`"))),
            };
            analytic::bias_naive_general(
                &table,
                &design,
                &g,
                model,
                target,
                false,
                DEFAULT_SUPPORT_CAP,
            )?
            .analytic_value
        }
        "bias_linear" => {
            let gamma = params
                .gamma
                .ok_or_else(|| Error::Config("bias_linear needs `gamma`".into()))?;
            let design = match params.design.as_deref() {
                Some("restricted_bernoulli") => LinearBiasDesign::RestrictedBernoulli,
                _ => LinearBiasDesign::Crd,
            };
            analytic::bias_linear(design, &g, gamma)
        }
        "bias_binary" => {
            let design = build(&params)?;
            let gammas = params
                .gammas
                .clone()
                .or_else(|| params.gamma.map(|v| vec![v; g.n()]))
                .ok_or_else(|| Error::Config("bias_binary needs `gamma` or `gammas`".into()))?;
            let thetas = params.thetas.clone().unwrap_or_else(|| vec![0.0; g.n()]);
            analytic::bias_binary(&design, &g, &gammas, &thetas)?
        }
        "bias_cluster_linear" => {
            let design = build(&params)?;
            let table = load_table(&params)?;
            let source = match params.mc_samples {
                Some(samples) => MomentSource::Mc {
                    samples,
                    seed: params.seed,
                },
                None => MomentSource::Enumerate {
                    support_cap: DEFAULT_SUPPORT_CAP,
                },
            };
            analytic::bias_cluster_linear(&design, &g, &table, source, false)?.analytic_value
        }
        "var_naive_linear_crd" => {
            let n_t = params
                .n_t
                .ok_or_else(|| Error::Config("var_naive_linear_crd needs `n_t`".into()))?;
            analytic::var_naive_linear_crd(
                &g,
                n_t,
                params.gamma.unwrap_or(0.0),
                params.sigma2.unwrap_or(0.0),
            )?
        }
        "var_ht" => {
            let design = build(&params)?;
            let table = load_table(&params)?;
            let model = ExposureModel::parse(params.exposure.as_deref().unwrap_or("binary"))?;
            let contrast = match params.contrast.as_deref().unwrap_or("dte") {
                "dte" => Contrast::dte(),
                "tte" => Contrast::tte(),
                other => return Err(Error::Config(format!("unknown contrast `{other}`"))),
            };
            let (pi, pij) = enumerated_propensity(&design, &g, model, DEFAULT_SUPPORT_CAP)?;
            let rc = contrast.resolve(&g, model);
            analytic::var_ht(&table, &rc, &pi, &pij)?
        }
        "var_naive_binary" => {
            let design = build(&params)?;
            let table = load_table(&params)?;
            let source = match params.mc_samples {
                Some(samples) => MomentSource::Mc {
                    samples,
                    seed: params.seed,
                },
                None => MomentSource::Enumerate {
                    support_cap: DEFAULT_SUPPORT_CAP,
                },
            };
            analytic::var_naive_binary(&g, &design, &table, source)?
        }
        other => return Err(Error::Config(format!("unknown formula `{other}`"))),
    };
    let csv = format!("formula,value\n{},{:.12e}\n", args.formula, value);
    match args.output {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
