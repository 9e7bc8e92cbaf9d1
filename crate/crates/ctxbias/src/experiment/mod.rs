//! Training harness and the context-noise sweep experiment.
//!
//! The experiment compares two heads on the same features:
//!
//! - context model: `input -> ContextBiasDense(hidden, elu, no plain bias)
//!   -> dropout -> Dense(softmax)`, fed each sample's superclass as context;
//! - baseline: the same stack with an ordinary bias instead of the context
//!   bias, never shown the superclass.
//!
//! A sweep trains the context model across a grid of context-noise levels
//! (each level corrupting both train-time and test-time contexts by default)
//! and one baseline per trial, then aggregates per-level means with 95%
//! Student-t confidence intervals.
//!
//! Everything is deterministic: a sweep's output is a pure function of the
//! dataset bytes, the configuration, and the master seed. Every sweep cell
//! derives a child seed from its own (role, trial) index and owns its model,
//! optimizer state, and RNG streams, so cells run concurrently across the
//! available cores without any effect on the result.

pub mod gradcheck;
pub mod report;
pub mod stats;

use crate::data::{corrupt_contexts, CorruptionSpec, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{Activation, ContextBiasDense, DenseLayer, Layer, Mode, Model};
use crate::optim::{sgd_step, Adadelta};
use crate::tensor::Rng;

/// Update rule used by [`train_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adadelta { rho: f64, eps: f64 },
    Sgd { lr: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adadelta {
            rho: crate::optim::ADADELTA_DEFAULT_RHO,
            eps: crate::optim::ADADELTA_DEFAULT_EPS,
        }
    }
}

/// Which side of the experiment gets corrupted contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorruptPhase {
    Train,
    Test,
    #[default]
    Both,
}

/// Training configuration. The defaults are the experiment's reference head:
/// 256 ELU units, dropout 0.5, Adadelta, 20 epochs at batch 64.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_width: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub master_seed: u64,
    pub context_enabled: bool,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_width: 256,
            dropout_rate: 0.5,
            epochs: 20,
            batch_size: 64,
            master_seed: 0,
            context_enabled: true,
            optimizer: OptimizerKind::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be at least 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if let OptimizerKind::Sgd { lr } = self.optimizer {
            if lr <= 0.0 {
                return Err(Error::Config(format!("sgd learning rate {lr} must be positive")));
            }
        }
        Ok(())
    }
}

/// Builds the (untrained) model for a dataset under this configuration.
pub fn build_model(cfg: &TrainConfig, input_dim: usize, num_fine: usize, num_coarse: usize, rng: &mut Rng) -> Result<Model> {
    cfg.validate()?;
    let hidden = cfg.hidden_width;
    let first: Layer = if cfg.context_enabled {
        Layer::ContextBias(ContextBiasDense::glorot(
            rng,
            input_dim,
            hidden,
            num_coarse,
            Activation::Elu,
        ))
    } else {
        Layer::Dense(DenseLayer::glorot(rng, input_dim, hidden, Activation::Elu, true))
    };
    let output = Layer::Dense(DenseLayer::glorot(rng, hidden, num_fine, Activation::Softmax, true));
    Model::new(vec![first, Layer::Dropout(cfg.dropout_rate), output])
}

/// Trains a model on a dataset.
///
/// When `corruption` is given and the model is context-fed, the train-time
/// contexts are corrupted once up front (fixed per sample for the whole run)
/// from the rng's `corrupt` stream. Initialization, shuffling, and dropout
/// draw from their own named streams, so the result is a deterministic
/// function of the dataset, the config, and the rng seed.
pub fn train_model(
    train: &LabeledDataset,
    cfg: &TrainConfig,
    corruption: Option<&CorruptionSpec>,
    rng: &Rng,
) -> Result<Model> {
    Ok(train_model_with_state(train, cfg, corruption, rng)?.0)
}

/// [`train_model`], also returning the final Adadelta state (for
/// checkpointing); `None` when training used SGD.
pub fn train_model_with_state(
    train: &LabeledDataset,
    cfg: &TrainConfig,
    corruption: Option<&CorruptionSpec>,
    rng: &Rng,
) -> Result<(Model, Option<Adadelta>)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training dataset is empty".to_string()));
    }
    if cfg.context_enabled && train.num_coarse == 0 {
        return Err(Error::Config("context model needs at least one superclass".to_string()));
    }

    let mut init_rng = rng.split("init");
    let mut model = build_model(cfg, train.dim(), train.num_fine, train.num_coarse, &mut init_rng)?;

    let contexts: Option<Vec<usize>> = if cfg.context_enabled {
        let mut corrupt_rng = rng.split("corrupt");
        Some(match corruption {
            Some(spec) => corrupt_contexts(&train.coarse_labels, train.num_coarse, spec, &mut corrupt_rng)?,
            None => train.coarse_labels.clone(),
        })
    } else {
        None
    };

    let mut shuffle_rng = rng.split("shuffle");
    let mut dropout_rng = rng.split("dropout");
    let mut adadelta = match cfg.optimizer {
        OptimizerKind::Adadelta { rho, eps } => Some(Adadelta::new(rho, eps)?),
        OptimizerKind::Sgd { .. } => None,
    };

    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let x = train.features.select_rows(chunk)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| train.fine_labels[i]).collect();
            let batch_ctx: Option<Vec<usize>> = contexts
                .as_ref()
                .map(|c| chunk.iter().map(|&i| c[i]).collect());

            model.forward(&x, batch_ctx.as_deref(), Mode::Train, &mut dropout_rng)?;
            let grads = model.backward(&labels)?;
            match (&mut adadelta, cfg.optimizer) {
                (Some(opt), _) => opt.step(&mut model.params_mut(), &grads.flat())?,
                (None, OptimizerKind::Sgd { lr }) => {
                    sgd_step(&mut model.params_mut(), &grads.flat(), lr)?
                }
                _ => unreachable!(),
            }
        }
    }
    Ok((model, adadelta))
}

/// Fraction of argmax-correct fine-label predictions on a test set.
///
/// Contexts are corrupted at the given noise before the forward pass; pass
/// `None` for clean contexts. The test set must be nonempty.
pub fn evaluate(
    model: &mut Model,
    test: &LabeledDataset,
    corruption: Option<&CorruptionSpec>,
    rng: &Rng,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Parameter(
            "accuracy is undefined on an empty test set".to_string(),
        ));
    }
    if test.dim() != model.input_width() {
        return Err(Error::Shape {
            op: "evaluate",
            lhs_rows: test.len(),
            lhs_cols: test.dim(),
            rhs_rows: model.input_width(),
            rhs_cols: model.output_width(),
        });
    }
    let contexts: Option<Vec<usize>> = if model.num_contexts().is_some() {
        let mut corrupt_rng = rng.split("corrupt");
        Some(match corruption {
            Some(spec) => corrupt_contexts(&test.coarse_labels, test.num_coarse, spec, &mut corrupt_rng)?,
            None => test.coarse_labels.clone(),
        })
    } else {
        None
    };

    let mut eval_rng = rng.split("eval");
    let mut correct = 0usize;
    let n = test.len();
    let chunk_size = 512;
    let mut start = 0;
    while start < n {
        let end = (start + chunk_size).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let x = test.features.select_rows(&idx)?;
        let ctx_slice: Option<Vec<usize>> = contexts.as_ref().map(|c| c[start..end].to_vec());
        let probs = model.forward(&x, ctx_slice.as_deref(), Mode::Eval, &mut eval_rng)?;
        for (r, &label) in test.fine_labels[start..end].iter().enumerate() {
            let row = probs.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            if best == label {
                correct += 1;
            }
        }
        start = end;
    }
    Ok(correct as f64 / n as f64)
}

/// Sweep configuration: the noise grid, trial count, and training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub noise_grid: Vec<f64>,
    pub trials: usize,
    pub train: TrainConfig,
    pub corrupt_phase: CorruptPhase,
    pub dataset_name: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            noise_grid: (0..=10).map(|i| i as f64 * 0.05).collect(),
            trials: 10,
            train: TrainConfig::default(),
            corrupt_phase: CorruptPhase::default(),
            dataset_name: "dataset".to_string(),
        }
    }
}

/// Per-cell accuracies and aggregates from one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub dataset: String,
    pub noise_grid: Vec<f64>,
    /// `context_accuracy[noise_index][trial]`
    pub context_accuracy: Vec<Vec<f64>>,
    /// `baseline_accuracy[trial]`: one context-free model per trial.
    pub baseline_accuracy: Vec<f64>,
}

impl SweepResult {
    pub fn trials(&self) -> usize {
        self.baseline_accuracy.len()
    }

    pub fn context_mean(&self, noise_index: usize) -> f64 {
        stats::mean(&self.context_accuracy[noise_index])
    }

    pub fn context_ci(&self, noise_index: usize) -> Result<f64> {
        stats::ci_halfwidth(&self.context_accuracy[noise_index])
    }

    pub fn baseline_mean(&self) -> f64 {
        stats::mean(&self.baseline_accuracy)
    }

    pub fn baseline_ci(&self) -> Result<f64> {
        stats::ci_halfwidth(&self.baseline_accuracy)
    }
}

/// Runs independent jobs on all available cores, returning results in job
/// order. Each job must be a pure function of its index, so the output is
/// identical to a sequential run regardless of scheduling.
fn par_map<T: Send>(jobs: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.max(1));
    if workers <= 1 {
        return (0..jobs).map(f).collect();
    }
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || -> Vec<(usize, Result<T>)> {
                    (w..jobs).step_by(workers).map(|j| (j, f(j))).collect()
                })
            })
            .collect();
        let mut slots: Vec<Option<T>> = (0..jobs).map(|_| None).collect();
        for handle in handles {
            for (j, result) in handle.join().expect("sweep worker panicked") {
                slots[j] = Some(result?);
            }
        }
        Ok(slots.into_iter().map(|s| s.expect("job completed")).collect())
    })
}

/// Runs the full noise sweep: per trial one baseline model, and per
/// (noise level, trial) one context model with corruption applied at the
/// configured phases. Returns every cell plus the ingredients for the
/// aggregate rows.
///
/// Cells are independent (each derives its own seed from its index) and run
/// concurrently when multiple cores are available; the result is the same
/// either way.
pub fn run_sweep(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if cfg.trials < 2 {
        return Err(Error::Parameter(format!(
            "sweep needs at least 2 trials for confidence intervals, got {}",
            cfg.trials
        )));
    }
    if let Some(&bad) = cfg.noise_grid.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Parameter(format!("noise level {bad} outside [0, 1]")));
    }

    let root = Rng::from_seed(cfg.train.master_seed);

    let baseline_accuracy = par_map(cfg.trials, |trial| {
        let mut train_cfg = cfg.train.clone();
        train_cfg.context_enabled = false;
        let trial_rng = root.split_indexed("baseline-trial", trial as u64);
        let mut model = train_model(train, &train_cfg, None, &trial_rng)?;
        let eval_rng = root.split_indexed("baseline-eval", trial as u64);
        evaluate(&mut model, test, None, &eval_rng)
    })?;

    let cells = par_map(cfg.noise_grid.len() * cfg.trials, |cell| {
        let noise = cfg.noise_grid[cell / cfg.trials];
        let trial = cell % cfg.trials;
        let spec = CorruptionSpec::new(noise)?;
        let train_spec = matches!(cfg.corrupt_phase, CorruptPhase::Train | CorruptPhase::Both)
            .then_some(&spec);
        let test_spec = matches!(cfg.corrupt_phase, CorruptPhase::Test | CorruptPhase::Both)
            .then_some(&spec);

        let mut train_cfg = cfg.train.clone();
        train_cfg.context_enabled = true;
        // The trial stream is shared across noise levels, so cells in the
        // same trial differ only in how hard their contexts are corrupted.
        let trial_rng = root.split_indexed("context-trial", trial as u64);
        let mut model = train_model(train, &train_cfg, train_spec, &trial_rng)?;
        let eval_rng = root.split_indexed("context-eval", trial as u64);
        evaluate(&mut model, test, test_spec, &eval_rng)
    })?;
    let context_accuracy: Vec<Vec<f64>> = cells
        .chunks(cfg.trials)
        .map(|chunk| chunk.to_vec())
        .collect();

    Ok(SweepResult {
        dataset: cfg.dataset_name.clone(),
        noise_grid: cfg.noise_grid.clone(),
        context_accuracy,
        baseline_accuracy,
    })
}
