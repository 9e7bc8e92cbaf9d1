//! Checkpointing a model mid-training and resuming it exactly.
//!
//! The CTXM container stores every layer's weights as raw little-endian
//! f64, plus an optional Adadelta section, so a restored (model, optimizer)
//! pair continues on the identical trajectory.
//!
//! Run with: `cargo run --example checkpoint_roundtrip`

use ctxbias::nn::{
    load_checkpoint, save_checkpoint, Activation, ContextBiasDense, DenseLayer, Layer, Mode, Model,
};
use ctxbias::optim::Adadelta;
use ctxbias::tensor::{Matrix, Rng};

fn step(model: &mut Model, opt: &mut Adadelta, x: &Matrix, ctx: &[usize], labels: &[usize]) -> f64 {
    let probs = model
        .forward(x, Some(ctx), Mode::Train, &mut Rng::from_seed(0))
        .unwrap();
    let loss = ctxbias::nn::cross_entropy(&probs, labels).unwrap();
    let grads = model.backward(labels).unwrap();
    opt.step(&mut model.params_mut(), &grads.flat()).unwrap();
    loss
}

fn main() {
    let mut rng = Rng::from_seed(42);
    let mut model = Model::new(vec![
        Layer::ContextBias(ContextBiasDense::glorot(&mut rng, 8, 6, 3, Activation::Elu)),
        Layer::Dropout(0.0),
        Layer::Dense(DenseLayer::glorot(&mut rng, 6, 4, Activation::Softmax, true)),
    ])
    .unwrap();
    let mut opt = Adadelta::with_defaults();

    let x = rng.uniform(16, 8, -1.0, 1.0).unwrap();
    let ctx: Vec<usize> = (0..16).map(|i| i % 3).collect();
    let labels: Vec<usize> = (0..16).map(|i| (i * 5) % 4).collect();

    for i in 0..10 {
        let loss = step(&mut model, &mut opt, &x, &ctx, &labels);
        println!("step {i:2}: loss {loss:.6}");
    }

    let path = std::env::temp_dir().join(format!("ctxbias-{}.ctxm", std::process::id()));
    save_checkpoint(&path, &model, Some(&opt)).unwrap();
    println!(
        "\ncheckpoint: {} bytes at {}",
        std::fs::metadata(&path).unwrap().len(),
        path.display()
    );

    let restored = load_checkpoint(&path).unwrap();
    let mut model2 = restored.model;
    let mut opt2 = restored.optimizer.unwrap();

    println!("\nresuming original vs restored:");
    for i in 10..15 {
        let a = step(&mut model, &mut opt, &x, &ctx, &labels);
        let b = step(&mut model2, &mut opt2, &x, &ctx, &labels);
        assert_eq!(a.to_bits(), b.to_bits(), "trajectories diverged");
        println!("step {i:2}: loss {a:.6} == {b:.6}");
    }
    println!("\nrestored run is bit-identical to the original");

    std::fs::remove_file(&path).ok();
}
