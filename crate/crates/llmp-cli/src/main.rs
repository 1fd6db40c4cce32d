//! `llmp` command line: regression/forecasting runs, the GP baseline,
//! Thompson-sampling optimization, synthetic dataset generation, report
//! re-evaluation and density grids.

mod backend_spec;
mod config;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use llmp::bbo::{self, BenchmarkFunction, OptConfig};
use llmp::density;
use llmp::harness::{
    self, generate_synthetic, GpRunConfig, RegressionConfig, RunReport, SyntheticFunction,
    SyntheticTask,
};
use llmp::prompting::{build_marginal_prompt, Affine, ObservationKey, Ordering, PairFormat, PromptConfig};
use llmp::JointMode;
use std::path::{Path, PathBuf};
use std::time::Instant;

use backend_spec::build_backend;
use config::FileConfig;

#[derive(Parser)]
#[command(name = "llmp", version, about = "Probabilistic regression and optimization via language-model posteriors")]
struct Cli {
    /// JSON file supplying defaults for flags left unset (flags win over the
    /// file, the file over environment variables, those over built-ins)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Name of the auth header sent to remote backends
    #[arg(long, global = true, default_value = "Authorization")]
    auth_header: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regression/forecasting run against a model backend
    Regress(RegressArgs),
    /// RBF Gaussian-process baseline on the same data files
    Gp(GpArgs),
    /// Thompson-sampling black-box maximization of a benchmark function
    Optimize(OptimizeArgs),
    /// Generate a synthetic function dataset (train + targets files)
    Synth(SynthArgs),
    /// Recompute and check the aggregates of a stored report
    Eval(EvalArgs),
    /// Log-density grid at one input, for heatmap columns
    Grid(GridArgs),
}

#[derive(clap::Args)]
struct RegressArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, value_parser = ["independent", "autoregressive"])]
    mode: Option<String>,
    #[arg(long, value_parser = ["comma", "comma-newline", "comma-space-newline", "paren", "labeled", "xy"])]
    format: Option<String>,
    #[arg(long, value_parser = ["sequential", "random", "distance"])]
    order: Option<String>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    /// Affine output transform "a,b" applied before prompting, corrected in
    /// the reported densities
    #[arg(long)]
    scale: Option<String>,
    /// Free-text prompt prefix; @path reads it from a file
    #[arg(long)]
    text: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Optional flat CSV projection of the report
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GpArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct OptimizeArgs {
    #[arg(long, value_parser = ["sinusoidal", "gramacy", "branin", "bohachevsky", "goldstein", "hartmann3"])]
    function: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 500)]
    candidates: usize,
    #[arg(long, default_value_t = 7)]
    cold_start: usize,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    function: String,
    #[arg(long)]
    size: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Training set path; targets go to the sibling `<out>.targets.jsonl`
    #[arg(long)]
    out: PathBuf,
    /// Training noise standard deviation
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    report: PathBuf,
}

#[derive(clap::Args)]
struct GridArgs {
    #[arg(long)]
    data: PathBuf,
    /// Input key: comma-separated numbers, or any other string as a text key
    #[arg(long)]
    x: String,
    #[arg(long)]
    ymin: f64,
    #[arg(long)]
    ymax: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file_config = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Regress(args) => regress(args, &file_config, &cli.auth_header),
        Command::Gp(args) => gp(args, &file_config),
        Command::Optimize(args) => optimize(args, &file_config, &cli.auth_header),
        Command::Synth(args) => synth(args, &file_config),
        Command::Eval(args) => eval_report(args),
        Command::Grid(args) => grid(args, &file_config, &cli.auth_header),
    }
}

fn parse_scale(text: &str) -> Result<Affine> {
    let (a, b) = text
        .split_once(',')
        .with_context(|| format!("--scale expects \"a,b\", got {:?}", text))?;
    let a: f64 = a.trim().parse().context("unparseable scale factor a")?;
    let b: f64 = b.trim().parse().context("unparseable scale offset b")?;
    Affine::new(a, b).map_err(|e| anyhow::anyhow!(e))
}

fn read_text_arg(text: &str) -> Result<String> {
    if let Some(path) = text.strip_prefix('@') {
        std::fs::read_to_string(path)
            .map(|s| s.trim_end_matches('\n').to_string())
            .with_context(|| format!("reading text prefix from {}", path))
    } else {
        Ok(text.to_string())
    }
}

fn parse_key(text: &str) -> ObservationKey {
    let dims: Result<Vec<f64>, _> = text.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match dims {
        Ok(d) if !d.is_empty() => ObservationKey::Numeric(d),
        _ => ObservationKey::Text(text.to_string()),
    }
}

fn regress(args: RegressArgs, file: &FileConfig, auth_header: &str) -> Result<()> {
    let started = Instant::now();
    let seed = file.resolve_seed(args.seed);
    let pair_format = file
        .resolve_format(args.format.as_deref())
        .map(|name| PairFormat::from_name(&name).expect("validated by clap"))
        .unwrap_or_default();
    let ordering = match file.resolve_order(args.order.as_deref()).as_deref() {
        Some("sequential") => Ordering::Sequential,
        Some("random") => Ordering::Random { seed },
        Some("distance") | None => Ordering::Distance,
        Some(other) => bail!("unknown ordering {:?}", other),
    };
    let scale = args.scale.as_deref().map(parse_scale).transpose()?;
    let mut prompt = PromptConfig {
        pair_format,
        ordering,
        format: llmp::NumericFormat::new(file.resolve_precision(args.precision)),
        scale,
        ..Default::default()
    };
    if let Some(text) = &args.text {
        prompt.text_prefix = Some(read_text_arg(text)?);
    }

    let cfg = RegressionConfig {
        mode: match file.resolve_mode(args.mode.as_deref()).as_deref() {
            Some("autoregressive") => JointMode::Autoregressive,
            _ => JointMode::Independent,
        },
        prompt,
        samples: file.resolve_samples(args.samples),
        seed,
    };

    let train = harness::load_dataset(&args.data)?.into_training_set()?;
    let targets = harness::load_dataset(&args.targets)?.into_target_set()?;
    let backend = build_backend(
        file.resolve_backend(args.backend.as_deref())?.as_str(),
        &cfg.prompt,
        auth_header,
    )?;

    let report = harness::run_regression(backend.as_ref(), &cfg, &train, &targets)?;
    report.write(&args.out)?;
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, report.to_flat_csv())
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    eprintln!(
        "regress: {} targets in {} ms -> {}",
        report.targets.len(),
        started.elapsed().as_millis(),
        args.out.display()
    );
    print_aggregates(&report);
    Ok(())
}

fn gp(args: GpArgs, file: &FileConfig) -> Result<()> {
    let started = Instant::now();
    let cfg = GpRunConfig {
        restarts: args.restarts.unwrap_or(8),
        seed: file.resolve_seed(args.seed),
    };
    let train = harness::load_dataset(&args.data)?.into_training_set()?;
    let targets = harness::load_dataset(&args.targets)?.into_target_set()?;
    let report = harness::run_gp(&cfg, &train, &targets)?;
    report.write(&args.out)?;
    eprintln!(
        "gp: {} targets in {} ms -> {}",
        report.targets.len(),
        started.elapsed().as_millis(),
        args.out.display()
    );
    print_aggregates(&report);
    Ok(())
}

fn optimize(args: OptimizeArgs, file: &FileConfig, auth_header: &str) -> Result<()> {
    let started = Instant::now();
    let function = BenchmarkFunction::from_name(&args.function)?;
    let mut cfg = OptConfig::new(function.bounds());
    cfg.trials = args.trials;
    cfg.candidates = args.candidates;
    cfg.cold_start = args.cold_start;
    cfg.seed = file.resolve_seed(args.seed);

    let backend = build_backend(
        file.resolve_backend(args.backend.as_deref())?.as_str(),
        &PromptConfig::default(),
        auth_header,
    )?;
    let trace = bbo::optimize(backend.as_ref(), |x| function.eval_unchecked(x), &cfg)?;
    std::fs::write(&args.out, trace.to_ldjson())
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "optimize: {} trials in {} ms -> {}",
        trace.trials.len(),
        started.elapsed().as_millis(),
        args.out.display()
    );
    println!(
        "{}",
        serde_json::json!({"function": function.name(), "max_y": trace.max_y, "max_x": trace.max_x})
    );
    Ok(())
}

fn targets_path_for(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => out.with_extension(format!("targets.{}", ext)),
        None => out.with_extension("targets"),
    }
}

fn synth(args: SynthArgs, file: &FileConfig) -> Result<()> {
    let function = SyntheticFunction::from_name(&args.function)?;
    let mut task = SyntheticTask::new(function, args.size, file.resolve_seed(args.seed));
    task.noise_sigma = args.noise;
    let (train, targets) = generate_synthetic(&task)?;

    let mut train_lines = String::new();
    for obs in &train.observations {
        let ObservationKey::Numeric(x) = &obs.key else {
            unreachable!("synthetic keys are numeric")
        };
        train_lines.push_str(
            &serde_json::json!({"x": x, "y": obs.values[0]}).to_string(),
        );
        train_lines.push('\n');
    }
    std::fs::write(&args.out, train_lines)
        .with_context(|| format!("writing {}", args.out.display()))?;

    let targets_path = targets_path_for(&args.out);
    let mut target_lines = String::new();
    let truths = targets.truths.as_ref().expect("synthetic targets carry truths");
    for (key, truth) in targets.keys.iter().zip(truths) {
        let ObservationKey::Numeric(x) = key else {
            unreachable!("synthetic keys are numeric")
        };
        target_lines.push_str(&serde_json::json!({"x": x, "y": truth[0]}).to_string());
        target_lines.push('\n');
    }
    std::fs::write(&targets_path, target_lines)
        .with_context(|| format!("writing {}", targets_path.display()))?;
    eprintln!(
        "synth: {} train points -> {}, {} targets -> {}",
        train.observations.len(),
        args.out.display(),
        targets.len(),
        targets_path.display()
    );
    Ok(())
}

fn eval_report(args: EvalArgs) -> Result<()> {
    let report = RunReport::read(&args.report)?;
    let recomputed = report.validate()?;
    println!(
        "{}",
        serde_json::json!({
            "report": args.report.display().to_string(),
            "kind": report.kind,
            "targets": report.targets.len(),
            "nll": recomputed.nll,
            "mae": recomputed.mae,
            "consistent": true,
        })
    );
    Ok(())
}

fn grid(args: GridArgs, file: &FileConfig, auth_header: &str) -> Result<()> {
    if args.steps < 1 {
        bail!("--steps must be at least 1");
    }
    let prompt_cfg = PromptConfig {
        format: llmp::NumericFormat::new(file.resolve_precision(args.precision)),
        ..Default::default()
    };
    let train = harness::load_dataset(&args.data)?.into_training_set()?;
    let backend = build_backend(
        file.resolve_backend(args.backend.as_deref())?.as_str(),
        &prompt_cfg,
        auth_header,
    )?;
    let key = parse_key(&args.x);
    let prompt = build_marginal_prompt(&prompt_cfg, &train, &key)?;

    let values: Vec<f64> = (0..args.steps)
        .map(|i| {
            if args.steps == 1 {
                args.ymin
            } else {
                args.ymin + (args.ymax - args.ymin) * i as f64 / (args.steps - 1) as f64
            }
        })
        .collect();
    let grid = density::density_grid(
        backend.as_ref(),
        &prompt,
        &values,
        &prompt_cfg.format,
        prompt_cfg.pair_format.terminal(),
    )?;
    let records: Vec<serde_json::Value> = grid
        .iter()
        .map(|d| {
            serde_json::json!({
                "y": d.values[0],
                "log_pdf": d.log_pdf,
                "bin_mass": d.bin_mass,
            })
        })
        .collect();
    let doc = serde_json::json!({"x": args.x, "grid": records});
    std::fs::write(&args.out, format!("{:#}\n", doc))
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("grid: {} bins -> {}", grid.len(), args.out.display());
    Ok(())
}

fn print_aggregates(report: &RunReport) {
    println!(
        "{}",
        serde_json::json!({
            "kind": report.kind,
            "backend": report.backend,
            "targets": report.targets.len(),
            "nll": report.aggregate.nll,
            "mae": report.aggregate.mae,
        })
    );
}
