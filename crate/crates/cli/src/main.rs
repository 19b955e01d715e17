//! `tucker`: command-line front end for adaptive st-HOSVD.
//!
//! Exit codes: 0 ok, 2 usage, 3 I/O, 4 numeric failure, 5 degenerate data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tucker_core::harness::{
    bench_compare, evaluate_model, generate_samples, read_samples_csv, split_samples,
    write_samples_csv, BenchConfig, BenchSpec, EvalReport, GenConfig,
};
use tucker_core::selector::{load_model, train, ClassWeight, DecisionTreeModel, TrainHyper};
use tucker_core::tensor::{format_dims, read_dten, write_dten};
use tucker_core::{
    load_tucker, reconstruct, relative_error, save_tucker, sthosvd, AlsOptions, Error, ModeReport,
    Strategy, TuckerMeta,
};

const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "tucker",
    version,
    about = "Tucker decomposition with per-mode solver selection"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a .dten tensor into a .tucker container.
    Decompose(DecomposeArgs),
    /// Rebuild the full tensor from a .tucker container.
    Reconstruct {
        #[arg(long)]
        decomposition: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the relative reconstruction error of a decomposition.
    Error {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        decomposition: PathBuf,
    },
    /// Benchmark both solvers per mode on random tensors and write samples.
    Gendata(GendataArgs),
    /// Train the solver selector on a samples CSV.
    Train(TrainArgs),
    /// Compare strategies on the cases of a JSON spec.
    Bench(BenchArgs),
    /// Print order, dims, byte size, and Frobenius norm of a .dten file.
    Info {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated truncation ranks, one per mode.
    #[arg(long)]
    ranks: String,
    /// adaptive, costmodel, eig, als, svd, or manual:e,a,...
    #[arg(long, default_value = "adaptive")]
    strategy: String,
    /// Decision-tree model for the adaptive strategy.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    als_iters: usize,
    #[arg(long, default_value_t = 0.0)]
    als_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Reconstruct and record the relative error in the report.
    #[arg(long)]
    with_error: bool,
}

#[derive(Args)]
struct GendataArgs {
    #[arg(long)]
    count: usize,
    /// Mode sizes as lo:hi.
    #[arg(long, default_value = "10:200")]
    dim_range: String,
    /// Tensor order, either n or lo:hi.
    #[arg(long, default_value = "3")]
    order: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1 << 30)]
    memory_cap: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    als_iters: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    /// Depths as lo:hi or a comma list.
    #[arg(long, default_value = "1:10")]
    max_depth_grid: String,
    #[arg(long, default_value_t = 5)]
    cv: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop rows whose solver times fall within the tie band.
    #[arg(long)]
    drop_ties: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    eval_report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    tensors: PathBuf,
    /// Comma-separated strategy names.
    #[arg(long, default_value = "eig,als,adaptive")]
    strategies: String,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 5)]
    als_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn degenerate(message: impl Into<String>) -> Self {
        Self {
            code: 5,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Io(_)
            | Error::Format(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::SchemaMismatch(_) => 3,
            Error::FeatureVersionMismatch { .. } => 3,
            Error::EmptyDataset => 5,
            e if e.is_numeric() => 4,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn with_path(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Failure::usage(format!("bad {what} entry {t:?} in {s:?}")))
        })
        .collect()
}

fn parse_range(s: &str, what: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::usage(format!("bad {what} {s:?}, expected lo:hi"));
    match s.split_once(':') {
        Some((lo, hi)) => Ok((
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
        )),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            Ok((v, v))
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::from(Error::from(e)))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| with_path(path)(Error::from(e)))
}

/// Formats a relative error: fixed with six digits after the leading one,
/// scientific below 1e-4.
fn format_error(v: f64) -> String {
    if v != 0.0 && v < 1e-4 {
        format!("{v:.6e}")
    } else if v == 0.0 {
        format!("{v:.6}")
    } else {
        let decimals = (6 - v.log10().floor() as i64).max(0) as usize;
        format!("{v:.decimals$}")
    }
}

/// Resolves a strategy name; adaptive without a model falls back to the cost model.
fn resolve_strategy(
    name: &str,
    model: Option<&DecisionTreeModel>,
) -> Result<(Strategy, Option<String>), Failure> {
    if name.trim().eq_ignore_ascii_case("adaptive") {
        return Ok(match model {
            Some(m) => (Strategy::Adaptive(m.clone()), None),
            None => {
                let note =
                    "adaptive requested without --model; falling back to costmodel".to_string();
                log::warn!("{note}");
                (Strategy::CostModel, Some(note))
            }
        });
    }
    Ok((Strategy::parse(name)?, None))
}

fn load_optional_model(path: Option<&PathBuf>) -> Result<Option<DecisionTreeModel>, Failure> {
    path.map(|p| load_model(p).map_err(with_path(p)))
        .transpose()
}

#[derive(Serialize)]
struct DecomposeReport {
    schema_version: u32,
    input: String,
    dims: Vec<usize>,
    ranks: Vec<usize>,
    strategy_requested: String,
    strategy: String,
    notes: Vec<String>,
    als_iters: usize,
    seed: u64,
    total_time_s: f64,
    selector_time_s: f64,
    compression_ratio: f64,
    relative_error: Option<f64>,
    modes: Vec<ModeReport>,
}

fn cmd_decompose(a: &DecomposeArgs) -> CmdResult {
    let ranks = parse_list(&a.ranks, "rank")?;
    let model = load_optional_model(a.model.as_ref())?;
    let (strategy, note) = resolve_strategy(&a.strategy, model.as_ref())?;
    let x = read_dten(&a.input).map_err(with_path(&a.input))?;
    let opts = AlsOptions {
        num_iters: a.als_iters,
        rel_tol: a.als_tol,
        seed: a.seed,
        track_objective: false,
    };
    let t0 = Instant::now();
    let (t, reports) = sthosvd(&x, &ranks, &strategy, &opts)?;
    let total_time_s = t0.elapsed().as_secs_f64();
    let relative_error = if a.with_error {
        Some(relative_error(&x, &t)?)
    } else {
        None
    };
    save_tucker(
        &a.output,
        &t,
        &TuckerMeta::new(&t, strategy.name(), reports.clone()),
    )
    .map_err(with_path(&a.output))?;
    for r in &reports {
        log::info!(
            "mode {}: {} {:?} -> {:?} in {:.3}s",
            r.mode,
            r.solver_used,
            r.dims_before,
            r.dims_after,
            r.solver_time
        );
    }
    if let Some(path) = &a.report {
        let report = DecomposeReport {
            schema_version: REPORT_SCHEMA_VERSION,
            input: a.input.display().to_string(),
            dims: x.dims().to_vec(),
            ranks,
            strategy_requested: a.strategy.clone(),
            strategy: strategy.name(),
            notes: note.into_iter().collect(),
            als_iters: a.als_iters,
            seed: a.seed,
            total_time_s,
            selector_time_s: reports.iter().map(|r| r.selector_decision_time).sum(),
            compression_ratio: x.len() as f64 / t.stored_len() as f64,
            relative_error,
            modes: reports,
        };
        write_json(path, &report)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_reconstruct(decomposition: &Path, output: &Path) -> CmdResult {
    let (t, _) = load_tucker(decomposition).map_err(with_path(decomposition))?;
    let x = reconstruct(&t)?;
    write_dten(output, &x).map_err(with_path(output))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_error(input: &Path, decomposition: &Path) -> CmdResult {
    let x = read_dten(input).map_err(with_path(input))?;
    let (t, _) = load_tucker(decomposition).map_err(with_path(decomposition))?;
    println!("{}", format_error(relative_error(&x, &t)?));
    Ok(ExitCode::SUCCESS)
}

fn cmd_gendata(a: &GendataArgs) -> CmdResult {
    let cfg = GenConfig {
        sample_count: a.count,
        dim_range: parse_range(&a.dim_range, "dim range")?,
        order_range: parse_range(&a.order, "order")?,
        seed: a.seed,
        memory_cap: a.memory_cap,
        repeats: a.repeats,
        als: AlsOptions {
            num_iters: a.als_iters,
            ..Default::default()
        },
        ..Default::default()
    };
    let out = generate_samples(&cfg)?;
    write_samples_csv(&a.out, &out.samples).map_err(with_path(&a.out))?;
    let ties = out.samples.iter().filter(|s| s.tie).count();
    eprintln!(
        "wrote {} samples ({ties} near ties) from {} tensors; skipped {}",
        out.samples.len(),
        out.tensors,
        out.skipped
    );
    if out.samples.is_empty() {
        return Err(Failure::degenerate(
            "no samples generated (memory cap too small?)",
        ));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TrainReport {
    schema_version: u32,
    n_train: usize,
    n_test: usize,
    max_depth: usize,
    class_weight: ClassWeight,
    cv_accuracy: Option<f64>,
    train_accuracy: Option<f64>,
    single_class: bool,
    accuracy: Option<f64>,
    mean_regret: Option<f64>,
    p90_regret: Option<f64>,
    eval: Option<EvalReport>,
}

fn parse_depths(s: &str) -> Result<Vec<usize>, Failure> {
    if s.contains(':') {
        let (lo, hi) = parse_range(s, "depth grid")?;
        if lo > hi {
            return Err(Failure::usage(format!("empty depth grid {s:?}")));
        }
        Ok((lo..=hi).collect())
    } else {
        parse_list(s, "depth")
    }
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let hyper = TrainHyper {
        max_depth_grid: parse_depths(&a.max_depth_grid)?,
        cv_folds: a.cv,
        seed: a.seed,
        ..Default::default()
    };
    let mut samples = read_samples_csv(&a.samples).map_err(with_path(&a.samples))?;
    if a.drop_ties {
        samples.retain(|s| !s.tie);
    }
    let (tr, te) = split_samples(&samples, a.split, a.seed)?;
    let model = train(&tr, &hyper)?;
    model.save(&a.out).map_err(with_path(&a.out))?;
    let eval = if te.is_empty() {
        None
    } else {
        Some(evaluate_model(&model, &te)?)
    };
    if let Some(e) = &eval {
        eprintln!(
            "depth {}: held-out accuracy {:.4}, mean regret {:.4} over {} samples",
            model.metadata.max_depth, e.accuracy, e.mean_regret, e.n
        );
    }
    if let Some(path) = &a.eval_report {
        let report = TrainReport {
            schema_version: REPORT_SCHEMA_VERSION,
            n_train: tr.len(),
            n_test: te.len(),
            max_depth: model.metadata.max_depth,
            class_weight: model.hyper.class_weight,
            cv_accuracy: model.metadata.cv_accuracy,
            train_accuracy: model.metadata.train_accuracy,
            single_class: model.metadata.single_class,
            accuracy: eval.as_ref().map(|e| e.accuracy),
            mean_regret: eval.as_ref().map(|e| e.mean_regret),
            p90_regret: eval.as_ref().map(|e| e.p90_regret),
            eval,
        };
        write_json(path, &report)?;
    }
    if model.metadata.single_class {
        return Err(Failure::degenerate(
            "training data holds a single class; wrote a constant model",
        ));
    }
    Ok(ExitCode::SUCCESS)
}

/// Splits a strategy list on commas, keeping `manual:e,a,...` choices together.
fn split_strategies(s: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut in_manual = false;
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let is_choice = matches!(tok, "e" | "a");
        if in_manual && is_choice {
            let last = out.last_mut().expect("manual entry open");
            last.push(',');
            last.push_str(tok);
            continue;
        }
        in_manual = tok.to_ascii_lowercase().starts_with("manual:");
        out.push(tok.to_string());
    }
    out
}

fn cmd_bench(a: &BenchArgs) -> CmdResult {
    let names = split_strategies(&a.strategies);
    if names.is_empty() {
        return Err(Failure::usage("empty strategy list"));
    }
    let model = load_optional_model(a.model.as_ref())?;
    let mut strategies = Vec::new();
    let mut notes = Vec::new();
    for n in &names {
        let (s, note) = resolve_strategy(n, model.as_ref())?;
        notes.extend(note);
        strategies.push(s);
    }
    let cases = BenchSpec::load(&a.tensors).map_err(with_path(&a.tensors))?;
    let cfg = BenchConfig {
        repeats: a.repeats,
        als: AlsOptions {
            num_iters: a.als_iters,
            seed: a.seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut report = bench_compare(&cases, &strategies, &cfg)?;
    report.notes.extend(notes);
    report.write_json(&a.out).map_err(with_path(&a.out))?;
    if let Some(csv) = &a.csv {
        report.write_csv(csv).map_err(with_path(csv))?;
    }
    for s in &report.summary {
        eprintln!(
            "{}: {} cases, mean {:.4}s, within 10% of best fixed {:.0}%",
            s.strategy,
            s.cases_ok,
            s.mean_time,
            100.0 * s.within_10pct_of_best_fixed
        );
    }
    if report.any_succeeded() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(Failure {
            code: 4,
            message: "every case failed".into(),
        })
    }
}

fn cmd_info(input: &Path) -> CmdResult {
    let x = read_dten(input).map_err(with_path(input))?;
    println!("order: {}", x.order());
    println!("dims: {}", format_dims(x.dims()));
    println!("bytes: {}", x.byte_size());
    println!("frobenius_norm: {:.6}", x.frobenius_norm());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let result = match &cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Reconstruct {
            decomposition,
            output,
        } => cmd_reconstruct(decomposition, output),
        Command::Error {
            input,
            decomposition,
        } => cmd_error(input, decomposition),
        Command::Gendata(a) => cmd_gendata(a),
        Command::Train(a) => cmd_train(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Info { input } => cmd_info(input),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
