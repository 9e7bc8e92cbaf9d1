//! Train the context model and its baseline on data where the context is
//! provably informative.
//!
//! The synthetic dataset assigns each sample a cluster (visible in the
//! features) and a context (invisible); the fine label is the pair. Without
//! the context the best any model can do is guess one fine label per
//! cluster, about 1/contexts. With it, the problem is fully determined.
//!
//! Run with: `cargo run --example train_synthetic`

use ctxbias::data::synthetic_cluster_context;
use ctxbias::experiment::{evaluate, train_model, OptimizerKind, TrainConfig};
use ctxbias::tensor::Rng;

fn main() {
    let mut data_rng = Rng::from_seed(11);
    let all = synthetic_cluster_context(3000, 4, 3, 16, 0.3, &mut data_rng).unwrap();
    let (train, test) = all.split_at(2400).unwrap();
    println!(
        "synthetic dataset: {} train / {} test, {} fine classes = {} clusters x {} contexts\n",
        train.len(),
        test.len(),
        train.num_fine,
        train.num_fine / train.num_coarse,
        train.num_coarse
    );

    let cfg = TrainConfig {
        hidden_width: 32,
        dropout_rate: 0.5,
        epochs: 10,
        batch_size: 32,
        master_seed: 3,
        context_enabled: true,
        optimizer: OptimizerKind::default(),
    };

    let mut context_model = train_model(&train, &cfg, None, &Rng::from_seed(3)).unwrap();
    let context_acc = evaluate(&mut context_model, &test, None, &Rng::from_seed(4)).unwrap();

    let baseline_cfg = TrainConfig { context_enabled: false, ..cfg };
    let mut baseline = train_model(&train, &baseline_cfg, None, &Rng::from_seed(3)).unwrap();
    let baseline_acc = evaluate(&mut baseline, &test, None, &Rng::from_seed(4)).unwrap();

    println!("context model accuracy:  {context_acc:.4}");
    println!("baseline accuracy:       {baseline_acc:.4}");
    println!("ceiling without context: {:.4}", 1.0 / train.num_coarse as f64);
    assert!(context_acc > baseline_acc);
}
