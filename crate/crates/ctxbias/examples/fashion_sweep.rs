//! The Fashion-MNIST superclass experiment on real data.
//!
//! Needs the official IDX files under `$CTXBIAS_DATA_DIR` (default `data/`):
//! train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
//! t10k-labels-idx1-ubyte. Each image's superclass (Tops / Bottoms / Other)
//! is fed to the first dense layer as context; the sweep degrades that
//! context and tracks test accuracy against a context-free baseline.
//!
//! Run with: `cargo run --release --example fashion_sweep`
//! (about 15 minutes with the default 10k-sample subset; set
//! FASHION_SWEEP_FULL=1 for the full training split)

use std::path::PathBuf;

use ctxbias::data::{fashion_superclass_map, load_idx};
use ctxbias::experiment::report::{render_svg, write_csv};
use ctxbias::experiment::stats::paired_t_test_one_sided;
use ctxbias::experiment::{run_sweep, CorruptPhase, OptimizerKind, SweepConfig, TrainConfig};

fn main() {
    let dir = std::env::var_os("CTXBIAS_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"));
    let map = fashion_superclass_map();
    let train = match load_idx(
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
        &map,
    ) {
        Ok(ds) => ds,
        Err(e) => {
            eprintln!("Fashion-MNIST not available: {e}");
            eprintln!("place the official IDX files under {} or set CTXBIAS_DATA_DIR", dir.display());
            std::process::exit(1);
        }
    };
    let test = load_idx(
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
        &map,
    )
    .unwrap();

    let full = std::env::var_os("FASHION_SWEEP_FULL").is_some_and(|v| v == "1");
    let train = if full { train } else { train.take(10_000) };
    println!(
        "fashion: {} train / {} test, superclasses {:?}",
        train.len(),
        test.len(),
        (0..3).map(|c| map.coarse_name(c)).collect::<Vec<_>>()
    );

    let cfg = SweepConfig {
        noise_grid: (0..=10).map(|i| i as f64 * 0.05).collect(),
        trials: 10,
        train: TrainConfig {
            hidden_width: 256,
            dropout_rate: 0.5,
            epochs: 20,
            batch_size: 64,
            master_seed: 7,
            context_enabled: true,
            optimizer: OptimizerKind::default(),
        },
        corrupt_phase: CorruptPhase::Both,
        dataset_name: "fashion".to_string(),
    };
    let result = run_sweep(&train, &test, &cfg).unwrap();

    println!(
        "\nbaseline: {:.4} +- {:.4}",
        result.baseline_mean(),
        result.baseline_ci().unwrap()
    );
    for (i, &noise) in result.noise_grid.iter().enumerate() {
        println!(
            "noise {noise:.2}: context {:.4} +- {:.4}",
            result.context_mean(i),
            result.context_ci(i).unwrap()
        );
    }
    let p = paired_t_test_one_sided(&result.context_accuracy[0], &result.baseline_accuracy).unwrap();
    println!("\nzero-noise benefit: one-sided paired p = {p:.2e}");

    std::fs::create_dir_all("out").unwrap();
    write_csv(&result, "out/fashion_sweep.csv").unwrap();
    render_svg(&result, "out/fashion_sweep.svg").unwrap();
    println!("wrote out/fashion_sweep.csv and out/fashion_sweep.svg");
}
