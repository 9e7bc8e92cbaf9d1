//! Command-line interface: `train`, `sweep`, `gradcheck`, and `ca3-demo`.
//!
//! The binary is a thin wrapper over the library; every subcommand maps to
//! one harness entry point. Exit codes: 0 on success, 1 on runtime failure,
//! 2 on usage errors.
//!
//! Datasets are looked up under `--data-dir`, falling back to the
//! `CTXBIAS_DATA_DIR` environment variable and then `./data`. A plain
//! `key=value` file passed with `--config` supplies defaults for any flag
//! not given explicitly (keys are the long flag names).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::ca3;
use crate::data::{
    fashion_superclass_map, load_cifar100, load_features, load_idx, synthetic_cluster_context,
    CorruptionSpec, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::experiment::gradcheck::{run_gradcheck, GradCheckConfig};
use crate::experiment::report::{render_svg, write_csv};
use crate::experiment::{
    evaluate, run_sweep, train_model_with_state, CorruptPhase, OptimizerKind, SweepConfig,
    TrainConfig,
};
use crate::nn::save_checkpoint;
use crate::tensor::Rng;

#[derive(Parser, Debug)]
#[command(
    name = "ctxbias",
    version,
    about = "Context-conditioned bias layers: training, noise sweeps, gradient checks, and an attractor-network demo"
)]
struct Cli {
    /// Plain key=value file with defaults for any flag not given explicitly.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Dataset root (default: $CTXBIAS_DATA_DIR, then ./data).
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model and write a checkpoint.
    Train(TrainArgs),
    /// Run the context-noise sweep and write CSV/SVG reports.
    Sweep(SweepArgs),
    /// Verify backpropagation against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Attractor-network scenarios: capacity curve or ambiguous-cue gating.
    #[command(name = "ca3-demo")]
    Ca3Demo(Ca3Args),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset: fashion | cifar100 | ctxf:<dir> | synthetic.
    #[arg(long)]
    dataset: Option<String>,
    /// Feed each sample's superclass to the first dense layer: on | off.
    #[arg(long)]
    context: Option<String>,
    /// Context noise level in [0, 1].
    #[arg(long)]
    noise: Option<f64>,
    /// Which side sees corrupted contexts: train | test | both.
    #[arg(long)]
    corrupt_phase: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Hidden layer width.
    #[arg(long)]
    hidden: Option<usize>,
    /// Dropout rate in [0, 1).
    #[arg(long)]
    dropout: Option<f64>,
    /// Optimizer: adadelta | sgd:<lr>.
    #[arg(long)]
    optimizer: Option<String>,
    /// Use only the first N training samples.
    #[arg(long)]
    subset: Option<usize>,
    /// Checkpoint output path.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Dataset: fashion | cifar100 | ctxf:<dir> | synthetic.
    #[arg(long)]
    dataset: Option<String>,
    /// Comma-separated noise grid, e.g. 0,0.1,0.2.
    #[arg(long)]
    noise_grid: Option<String>,
    /// Trials per cell (at least 2).
    #[arg(long)]
    trials: Option<usize>,
    /// Which side sees corrupted contexts: train | test | both.
    #[arg(long)]
    corrupt_phase: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Use only the first N training samples.
    #[arg(long)]
    subset: Option<usize>,
    /// CSV output path.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// SVG plot output path.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Number of random models to check.
    #[arg(long)]
    models: Option<usize>,
    /// Maximum allowed relative error.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct Ca3Args {
    /// Scenario: capacity | gating.
    #[arg(long)]
    scenario: Option<String>,
    /// Network size.
    #[arg(long)]
    units: Option<usize>,
    /// Number of contexts.
    #[arg(long)]
    contexts: Option<usize>,
    /// Maximum patterns per context (the capacity curve sweeps 1..=load).
    #[arg(long)]
    load: Option<usize>,
    /// Fraction of cue bits flipped before recall.
    #[arg(long)]
    flips: Option<f64>,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Values from a `--config` file, consulted for flags not given explicitly.
struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<FileConfig> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(Error::Malformed {
                        path: path.to_path_buf(),
                        reason: format!("line {}: expected key=value, got {line:?}", lineno + 1),
                    });
                };
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(FileConfig { values })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::Parameter(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }
}

fn pick<T: std::str::FromStr>(flag: Option<T>, cfg: &FileConfig, key: &str, default: T) -> Result<T> {
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

fn pick_opt<T: std::str::FromStr>(flag: Option<T>, cfg: &FileConfig, key: &str) -> Result<Option<T>> {
    Ok(flag.or(cfg.get(key)?))
}

/// Runs the CLI on explicit arguments (the first one being the program
/// name) and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let data_dir = cli
        .data_dir
        .or_else(|| cfg.values.get("data-dir").map(PathBuf::from))
        .or_else(|| std::env::var_os("CTXBIAS_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    match cli.command {
        Command::Train(args) => cmd_train(args, &cfg, &data_dir),
        Command::Sweep(args) => cmd_sweep(args, &cfg, &data_dir),
        Command::Gradcheck(args) => cmd_gradcheck(args, &cfg),
        Command::Ca3Demo(args) => cmd_ca3(args, &cfg),
    }
}

fn parse_corrupt_phase(s: &str) -> Result<CorruptPhase> {
    match s {
        "train" => Ok(CorruptPhase::Train),
        "test" => Ok(CorruptPhase::Test),
        "both" => Ok(CorruptPhase::Both),
        other => Err(Error::Parameter(format!(
            "corrupt-phase must be train, test, or both; got {other:?}"
        ))),
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    if s == "adadelta" {
        return Ok(OptimizerKind::default());
    }
    if let Some(lr) = s.strip_prefix("sgd:") {
        let lr: f64 = lr
            .parse()
            .map_err(|_| Error::Parameter(format!("bad sgd learning rate {lr:?}")))?;
        return Ok(OptimizerKind::Sgd { lr });
    }
    Err(Error::Parameter(format!(
        "optimizer must be adadelta or sgd:<lr>; got {s:?}"
    )))
}

fn parse_noise_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("bad noise level {t:?} in grid")))
        })
        .collect()
}

/// Loads the train/test splits for a dataset selector.
pub fn load_dataset(selector: &str, data_dir: &Path, seed: u64) -> Result<(LabeledDataset, LabeledDataset, String)> {
    match selector {
        "fashion" => {
            let map = fashion_superclass_map();
            let train = load_idx(
                data_dir.join("train-images-idx3-ubyte"),
                data_dir.join("train-labels-idx1-ubyte"),
                &map,
            )?;
            let test = load_idx(
                data_dir.join("t10k-images-idx3-ubyte"),
                data_dir.join("t10k-labels-idx1-ubyte"),
                &map,
            )?;
            Ok((train, test, "fashion".to_string()))
        }
        "cifar100" => {
            let dir = data_dir.join("cifar-100-binary");
            let train = load_cifar100(dir.join("train.bin"))?;
            let test = load_cifar100(dir.join("test.bin"))?;
            // Raw 3072-pixel rows are projected to 512 features through a
            // fixed seeded map shared by both splits.
            let mut proj_rng = Rng::from_seed(seed).split("cifar-projection");
            let limit = (3.0 / train.dim() as f64).sqrt();
            let projection = proj_rng.uniform(train.dim(), 512, -limit, limit)?;
            let train = crate::data::project_features_with(&train, &projection)?;
            let test = crate::data::project_features_with(&test, &projection)?;
            Ok((train, test, "cifar100".to_string()))
        }
        "synthetic" => {
            let mut rng = Rng::from_seed(seed).split("synthetic-data");
            let all = synthetic_cluster_context(8000, 6, 3, 32, 0.3, &mut rng)?;
            let (train, test) = all.split_at(6000)?;
            Ok((train, test, "synthetic".to_string()))
        }
        other => {
            if let Some(dir) = other.strip_prefix("ctxf:") {
                let dir = Path::new(dir);
                let train = load_features(dir.join("train.ctxf"))?;
                let test = load_features(dir.join("test.ctxf"))?;
                return Ok((train, test, "ctxf".to_string()));
            }
            Err(Error::Parameter(format!(
                "dataset must be fashion, cifar100, ctxf:<dir>, or synthetic; got {other:?}"
            )))
        }
    }
}

fn cmd_train(args: TrainArgs, cfg: &FileConfig, data_dir: &Path) -> Result<()> {
    let seed = pick(args.seed, cfg, "seed", 0)?;
    let selector: String = pick(args.dataset, cfg, "dataset", "synthetic".to_string())?;
    let context = match pick(args.context, cfg, "context", "on".to_string())?.as_str() {
        "on" => true,
        "off" => false,
        other => {
            return Err(Error::Parameter(format!(
                "context must be on or off; got {other:?}"
            )));
        }
    };
    let noise = pick(args.noise, cfg, "noise", 0.0)?;
    let phase = parse_corrupt_phase(&pick(args.corrupt_phase, cfg, "corrupt-phase", "both".to_string())?)?;
    let optimizer = parse_optimizer(&pick(args.optimizer, cfg, "optimizer", "adadelta".to_string())?)?;

    let train_cfg = TrainConfig {
        hidden_width: pick(args.hidden, cfg, "hidden", 256)?,
        dropout_rate: pick(args.dropout, cfg, "dropout", 0.5)?,
        epochs: pick(args.epochs, cfg, "epochs", 20)?,
        batch_size: pick(args.batch, cfg, "batch", 64)?,
        master_seed: seed,
        context_enabled: context,
        optimizer,
    };

    let (mut train_set, test_set, name) = load_dataset(&selector, data_dir, seed)?;
    if let Some(subset) = pick_opt(args.subset, cfg, "subset")? {
        train_set = train_set.take(subset);
    }
    let spec = CorruptionSpec::new(noise)?;
    let train_spec = (context && matches!(phase, CorruptPhase::Train | CorruptPhase::Both))
        .then_some(&spec);
    let test_spec = (context && matches!(phase, CorruptPhase::Test | CorruptPhase::Both))
        .then_some(&spec);

    let started = std::time::Instant::now();
    let root = Rng::from_seed(seed);
    let (mut model, opt_state) =
        train_model_with_state(&train_set, &train_cfg, train_spec, &root.split("train"))?;
    let accuracy = evaluate(&mut model, &test_set, test_spec, &root.split("eval"))?;
    println!(
        "{name}: trained {} samples, context {} (noise {noise}), test accuracy {accuracy:.4} in {:.1}s",
        train_set.len(),
        if context { "on" } else { "off" },
        started.elapsed().as_secs_f64()
    );

    if let Some(out) = args.out.or_else(|| cfg.values.get("out").map(PathBuf::from)) {
        save_checkpoint(&out, &model, opt_state.as_ref())?;
        println!("checkpoint written to {}", out.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, cfg: &FileConfig, data_dir: &Path) -> Result<()> {
    let seed = pick(args.seed, cfg, "seed", 0)?;
    let selector: String = pick(args.dataset, cfg, "dataset", "synthetic".to_string())?;
    let grid = match pick_opt::<String>(args.noise_grid, cfg, "noise-grid")? {
        Some(s) => parse_noise_grid(&s)?,
        None => (0..=10).map(|i| i as f64 * 0.05).collect(),
    };
    let phase = parse_corrupt_phase(&pick(args.corrupt_phase, cfg, "corrupt-phase", "both".to_string())?)?;

    let sweep_cfg = SweepConfig {
        noise_grid: grid,
        trials: pick(args.trials, cfg, "trials", 10)?,
        train: TrainConfig {
            hidden_width: pick(args.hidden, cfg, "hidden", 256)?,
            dropout_rate: pick(args.dropout, cfg, "dropout", 0.5)?,
            epochs: pick(args.epochs, cfg, "epochs", 20)?,
            batch_size: pick(args.batch, cfg, "batch", 64)?,
            master_seed: seed,
            context_enabled: true,
            optimizer: OptimizerKind::default(),
        },
        corrupt_phase: phase,
        dataset_name: String::new(),
    };

    let (mut train_set, test_set, name) = load_dataset(&selector, data_dir, seed)?;
    if let Some(subset) = pick_opt(args.subset, cfg, "subset")? {
        train_set = train_set.take(subset);
    }
    let sweep_cfg = SweepConfig { dataset_name: name, ..sweep_cfg };

    let started = std::time::Instant::now();
    let result = run_sweep(&train_set, &test_set, &sweep_cfg)?;
    println!(
        "{}: {} noise levels x {} trials in {:.1}s",
        result.dataset,
        result.noise_grid.len(),
        result.trials(),
        started.elapsed().as_secs_f64()
    );
    println!(
        "baseline (no context): mean {:.4} +- {:.4}",
        result.baseline_mean(),
        result.baseline_ci()?
    );
    for (i, &noise) in result.noise_grid.iter().enumerate() {
        println!(
            "noise {noise:.2}: context mean {:.4} +- {:.4}",
            result.context_mean(i),
            result.context_ci(i)?
        );
    }

    if let Some(path) = args.csv.or_else(|| cfg.values.get("csv").map(PathBuf::from)) {
        write_csv(&result, &path)?;
        println!("csv written to {}", path.display());
    }
    if let Some(path) = args.svg.or_else(|| cfg.values.get("svg").map(PathBuf::from)) {
        render_svg(&result, &path)?;
        println!("svg written to {}", path.display());
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs, cfg: &FileConfig) -> Result<()> {
    let check_cfg = GradCheckConfig {
        models: pick(args.models, cfg, "models", 20)?,
        tolerance: pick(args.tolerance, cfg, "tolerance", 1e-4)?,
        seed: pick(args.seed, cfg, "seed", GradCheckConfig::default().seed)?,
        ..GradCheckConfig::default()
    };
    let report = run_gradcheck(&check_cfg)?;
    println!("{}", report.summary());
    if report.passed() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "gradient check failed: max relative error {:.3e} exceeds {:.0e}",
            report.max_rel_error, report.tolerance
        )))
    }
}

fn cmd_ca3(args: Ca3Args, cfg: &FileConfig) -> Result<()> {
    let scenario: String = pick(args.scenario, cfg, "scenario", "capacity".to_string())?;
    let units = pick(args.units, cfg, "units", 200)?;
    let contexts = pick(args.contexts, cfg, "contexts", 2)?;
    let trials = pick(args.trials, cfg, "trials", 50)?;
    let seed = pick(args.seed, cfg, "seed", 0xCA3)?;
    let csv = match scenario.as_str() {
        "capacity" => {
            let load = pick(args.load, cfg, "load", 8)?;
            let flips = pick(args.flips, cfg, "flips", 0.1)?;
            let mut rng = Rng::from_seed(seed);
            let rows = ca3::capacity_experiment(units, load, contexts, flips, trials, &mut rng)?;
            ca3::capacity_csv(&rows)
        }
        "gating" => {
            let gating_cfg = ca3::GatingConfig {
                units,
                contexts,
                patterns_per_context: pick(args.load, cfg, "load", 5)?,
                trials,
                seed,
                ..ca3::GatingConfig::default()
            };
            let result = ca3::gating_experiment(&gating_cfg)?;
            format!(
                "metric,value\nbiased_selection_rate,{}\nunbiased_selection_rate,{}\nstrict_biased_rate,{}\nstrict_unbiased_rate,{}\npaired_p_value,{:e}\n",
                result.biased_rate,
                result.unbiased_rate,
                result.strict_biased_rate,
                result.strict_unbiased_rate,
                result.p_value
            )
        }
        other => {
            return Err(Error::Parameter(format!(
                "scenario must be capacity or gating; got {other:?}"
            )));
        }
    };
    match args.out.or_else(|| cfg.values.get("out").map(PathBuf::from)) {
        Some(path) => {
            std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            println!("csv written to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
