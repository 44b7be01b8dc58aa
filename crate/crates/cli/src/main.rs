//! Command-line interface: pre-process datasets, compute sensitivities,
//! compose end-to-end budgets, run the propose-test-release pipeline, audit
//! pipelines against their bounds, and run the synthetic comparison.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use predp_core::accountant::{compose_optimized, table2_closed_form, ComposeConfig};
use predp_core::dataset::DatasetMatrix;
use predp_core::experiments::{
    emit_comparison_curves, run_comparison, CurveSweeps, ExperimentConfig,
};
use predp_core::mechanisms::{rdp_curve, srdp_curve, MechanismSpec};
use predp_core::oracle::brute_force_budget_audit;
use predp_core::preprocessing::{sensitivity, PreprocSpec};
use predp_core::profile::CollectionProfile;
use predp_core::ptr::{ptr_privacy_budget, run_ptr, PtrConfig, PtrOutcome};
use serde_json::json;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "predp",
    about = "Privacy accounting for DP pipelines with non-private data-dependent pre-processing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a pre-processing algorithm to a CSV dataset.
    Preprocess(PreprocessArgs),
    /// Compose a mechanism with a pre-processing into an end-to-end budget.
    Account(AccountArgs),
    /// Print the (delta2, delta_inf) sensitivity of a pre-processing.
    Sensitivity(SensitivityArgs),
    /// Run propose-test-release (rank reduction + noisy training) on a CSV.
    Ptr(PtrArgs),
    /// Brute-force audit of a scalar-mean pipeline against its bound.
    Audit(AuditArgs),
    /// Run the three-arm synthetic comparison and emit result files.
    RunPipeline(RunPipelineArgs),
}

/// Accepts either inline JSON or a path to a JSON file.
fn read_json<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).with_context(|| format!("reading {what} from {arg}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {what}"))
}

#[derive(Args)]
struct PreprocessArgs {
    /// Pre-processing kind: dedup | quantize | impute | pca-dim | pca-rank |
    /// standard-scale | min-max-scale.
    #[arg(long)]
    kind: String,
    /// Radius for dedup / quantize.
    #[arg(long)]
    eta: Option<f64>,
    /// Rank for the PCA kinds.
    #[arg(long)]
    k: Option<usize>,
    /// Imputation model: mean | median | trimmed_mean:<m> | linear_regression.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Rescale out-of-ball rows onto the unit sphere at ingest.
    #[arg(long)]
    normalize: bool,
}

fn parse_preproc(args: &PreprocessArgs) -> Result<PreprocSpec> {
    use predp_core::preprocessing::ImputeModel;
    let need = |v: Option<f64>, name: &str| v.with_context(|| format!("--{name} is required"));
    Ok(match args.kind.as_str() {
        "dedup" => PreprocSpec::Dedup {
            eta: need(args.eta, "eta")?,
        },
        "quantize" => PreprocSpec::Quantize {
            eta: need(args.eta, "eta")?,
        },
        "impute" => {
            let model = match args.model.as_deref() {
                Some("mean") => ImputeModel::Mean,
                Some("median") => ImputeModel::Median,
                Some("linear_regression") => ImputeModel::LinearRegression,
                Some(s) if s.starts_with("trimmed_mean:") => {
                    let m = s["trimmed_mean:".len()..]
                        .parse()
                        .context("parsing trimmed_mean:<m>")?;
                    ImputeModel::TrimmedMean(m)
                }
                other => bail!("unknown imputation model {other:?}"),
            };
            PreprocSpec::Impute { model }
        }
        "pca-dim" => PreprocSpec::PcaDim {
            k: args.k.context("--k is required")?,
        },
        "pca-rank" => PreprocSpec::PcaRank {
            k: args.k.context("--k is required")?,
        },
        "standard-scale" => PreprocSpec::StandardScale,
        "min-max-scale" => PreprocSpec::MinMaxScale,
        other => bail!("unknown pre-processing kind {other:?}"),
    })
}

#[derive(Args)]
struct AccountArgs {
    /// Mechanism spec: inline JSON or a path.
    #[arg(long)]
    mechanism: String,
    /// Pre-processing spec: inline JSON or a path.
    #[arg(long)]
    preproc: String,
    /// Collection profile: inline JSON or a path.
    #[arg(long)]
    profile: String,
    /// Conversion target delta.
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Use the closed-form table instead of the generic optimizer.
    #[arg(long, conflicts_with = "generic")]
    table2: bool,
    /// Use the generic grid-search optimizer (default).
    #[arg(long)]
    generic: bool,
    /// Order used by --table2.
    #[arg(long, default_value_t = 11.0)]
    alpha: f64,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    preproc: String,
    #[arg(long)]
    profile: String,
}

#[derive(Args)]
struct PtrArgs {
    /// Proposed eigen-gap lower bound.
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    /// Target rank.
    #[arg(long)]
    k: usize,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 100)]
    t: u64,
    #[arg(long, default_value_t = 0.3)]
    lr: f64,
    /// Optional norm-clipping threshold applied before the rank reduction.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct AuditArgs {
    /// Pipeline description {"mechanism": .., "preproc": .., "profile": ..,
    /// "d": ..}; inline JSON or a path.
    #[arg(long)]
    pipeline: String,
    #[arg(long)]
    alpha: f64,
    /// Number of random neighbor pairs.
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunPipelineArgs {
    /// Experiment config: inline JSON or a path.
    #[arg(long)]
    config: String,
    /// Output directory for results.csv, curves_*.csv and budget.json.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let spec = parse_preproc(&args)?;
    let data = DatasetMatrix::read_csv(&args.input, args.normalize)?;
    let out = spec.apply(&data)?;
    out.write_csv(&args.output)?;
    eprintln!(
        "{} -> {} rows x {} cols written to {}",
        spec.label(),
        out.n(),
        out.d(),
        args.output.display()
    );
    Ok(())
}

fn cmd_account(args: AccountArgs) -> Result<()> {
    let mechanism: MechanismSpec = read_json(&args.mechanism, "mechanism spec")?;
    let preproc: PreprocSpec = read_json(&args.preproc, "pre-processing spec")?;
    let profile: CollectionProfile = read_json(&args.profile, "collection profile")?;
    if args.table2 {
        let value = table2_closed_form(
            mechanism.kind,
            &preproc,
            &profile,
            mechanism.eps,
            args.alpha,
        )?;
        let (eps_dp, delta) = predp_core::accountant::rdp_to_dp(value, args.alpha, args.delta)?;
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "alpha": args.alpha,
                "eps_hat": value,
                "eps_dp": eps_dp,
                "delta_dp": delta,
                "provenance": {
                    "mechanism": mechanism.kind.as_str(),
                    "preproc": preproc.label(),
                    "route": "closed-form",
                },
            }))?
        );
        return Ok(());
    }
    // warn when the closed-form table has no guarantee for this combination
    if matches!(
        table2_closed_form(mechanism.kind, &preproc, &profile, mechanism.eps, 11.0),
        Err(predp_core::Error::Unsupported(_))
    ) {
        eprintln!(
            "warning: no closed-form guarantee is stated for {} with {}; composing generically",
            mechanism.kind.as_str(),
            preproc.label()
        );
    }
    let sens = sensitivity(&preproc, &profile)?;
    let rdp = rdp_curve(&mechanism)?;
    let srdp = srdp_curve(&mechanism, &profile)?;
    let mut budget = compose_optimized(&rdp, &srdp, &sens, &ComposeConfig::with_delta(args.delta))?;
    budget.provenance.preproc = preproc.label();
    println!("{}", serde_json::to_string_pretty(&budget)?);
    Ok(())
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<()> {
    let preproc: PreprocSpec = read_json(&args.preproc, "pre-processing spec")?;
    let profile: CollectionProfile = read_json(&args.profile, "collection profile")?;
    let s = sensitivity(&preproc, &profile)?;
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(())
}

fn cmd_ptr(args: PtrArgs) -> Result<()> {
    let data = DatasetMatrix::read_csv(&args.input, args.normalize)?;
    if data.labels().is_none() {
        bail!("ptr needs a labeled dataset (binary `label` column)");
    }
    let config = PtrConfig {
        beta: args.beta,
        eps: args.eps,
        delta: args.delta,
        k: args.k,
        l: args.l,
        mu: args.mu,
        t: args.t,
        lr: args.lr,
        clip: args.clip,
    };
    let grad = |w: &DVector<f64>, x: &DVector<f64>, y: Option<f64>| {
        let y = 2.0 * y.unwrap_or(0.0) - 1.0;
        let m = y * w.dot(x);
        let s = if m > 30.0 { 0.0 } else { 1.0 / (1.0 + m.exp()) };
        x * (-y * s)
    };
    let outcome = run_ptr(&data, &config, &grad, args.seed)?;
    let budget = match ptr_privacy_budget(&config, data.n()) {
        Ok(b) => json!(b),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let payload = match outcome {
        PtrOutcome::Abort => json!({ "outcome": "abort", "budget": budget }),
        PtrOutcome::Model { params, .. } => json!({
            "outcome": "release",
            "budget": budget,
            "model": params.iter().cloned().collect::<Vec<f64>>(),
        }),
    };
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

#[derive(serde::Deserialize)]
struct AuditPipeline {
    mechanism: MechanismSpec,
    preproc: PreprocSpec,
    profile: CollectionProfile,
    d: usize,
}

fn cmd_audit(args: AuditArgs) -> Result<()> {
    use rand::Rng;
    let pipeline: AuditPipeline = read_json(&args.pipeline, "pipeline")?;
    let n = pipeline.profile.n;
    let d = pipeline.d;
    let p = pipeline.profile.p.min(n);
    let mut mask = vec![vec![false; d]; n];
    for (i, row) in mask.iter_mut().enumerate().take(p) {
        row[i % d] = true;
    }
    let mut rng = predp_core::sampling::rng_from_seed(args.seed);
    let bound_coord = 1.0 / (d as f64).sqrt();
    let mut pairs = Vec::with_capacity(args.pairs);
    while pairs.len() < args.pairs {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| rng.gen_range(-bound_coord..bound_coord))
                    .collect()
            })
            .collect();
        let Ok(a) = DatasetMatrix::with_missing(rows, mask.clone(), None) else {
            continue;
        };
        let i = rng.gen_range(p..n);
        let Ok(b) = a.replace_row(
            i,
            (0..d)
                .map(|_| rng.gen_range(-bound_coord..bound_coord))
                .collect(),
        ) else {
            continue;
        };
        pairs.push((a, b));
    }
    let scalar = |ds: &DatasetMatrix| ds.rows().iter().map(|r| r[0]).sum::<f64>() / ds.n() as f64;
    let observed = brute_force_budget_audit(
        &pipeline.mechanism,
        &scalar,
        Some(&pipeline.preproc),
        &pairs,
        args.alpha,
    )?;
    let sens = sensitivity(&pipeline.preproc, &pipeline.profile)?;
    let rdp = rdp_curve(&pipeline.mechanism)?;
    let srdp = srdp_curve(&pipeline.mechanism, &pipeline.profile)?;
    let cfg = ComposeConfig::default();
    let (bound, _, _) =
        predp_core::accountant::compose_best_c(&rdp, &srdp, &sens, args.alpha, &cfg.c_grid)?;
    println!(
        "audit value {observed:.6} vs composed bound {bound:.6} at alpha {} over {} pairs: {}",
        args.alpha,
        pairs.len(),
        if observed <= bound {
            "WITHIN BOUND"
        } else {
            "EXCEEDS BOUND"
        }
    );
    Ok(())
}

fn cmd_run_pipeline(args: RunPipelineArgs) -> Result<()> {
    let config: ExperimentConfig = read_json(&args.config, "experiment config")?;
    std::fs::create_dir_all(&args.out)?;
    let table = run_comparison(&config)?;
    table.write_csv(&args.out.join("results.csv"))?;
    let curves = emit_comparison_curves(&CurveSweeps::default())?;
    curves.write_csvs(&args.out)?;
    let budgets: Vec<_> = table
        .entries
        .iter()
        .map(|e| {
            json!({
                "eps_target": e.eps_target,
                "arm": e.arm.as_str(),
                "mech_eps": e.mech_eps,
                "mean_excess_loss": e.mean_excess_loss,
                "std_error": e.std_error,
                "error": e.error,
            })
        })
        .collect();
    std::fs::write(
        args.out.join("budget.json"),
        serde_json::to_string_pretty(&json!({ "delta": config.delta, "entries": budgets }))?,
    )?;
    if table.any_infeasible() {
        eprintln!("accountant infeasibility in at least one arm; see budget.json");
        std::process::exit(2);
    }
    eprintln!("results written to {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Account(a) => cmd_account(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Ptr(a) => cmd_ptr(a),
        Command::Audit(a) => cmd_audit(a),
        Command::RunPipeline(a) => cmd_run_pipeline(a),
    }
}
