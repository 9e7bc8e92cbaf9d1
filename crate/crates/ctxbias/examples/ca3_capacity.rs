//! Capacity curve of the attractor network, with and without the context
//! field.
//!
//! As the stored-pattern load grows, plain recall from a corrupted cue
//! degrades; the per-context field recovers some of it by narrowing the
//! search to one context's patterns. Emits the same CSV as
//! `ctxbias ca3-demo`.
//!
//! Run with: `cargo run --release --example ca3_capacity`

use ctxbias::ca3::{capacity_csv, capacity_experiment};
use ctxbias::tensor::Rng;

fn main() {
    let units = 200;
    let contexts = 2;
    let flip_fraction = 0.1;
    let trials = 50;

    let mut rng = Rng::from_seed(0xCA3);
    let rows = capacity_experiment(units, 24, contexts, flip_fraction, trials, &mut rng).unwrap();

    println!(
        "N = {units}, {contexts} contexts, {:.0}% cue corruption, {trials} trials per load\n",
        flip_fraction * 100.0
    );
    println!("{:>5} {:>10} {:>12}", "load", "with bias", "without bias");
    for row in &rows {
        println!(
            "{:>5} {:>10.2} {:>12.2}",
            row.load, row.with_bias_rate, row.without_bias_rate
        );
    }

    std::fs::create_dir_all("out").unwrap();
    std::fs::write("out/ca3_capacity.csv", capacity_csv(&rows)).unwrap();
    println!("\nwrote out/ca3_capacity.csv");
}
