//! Finite-difference verification of backpropagation.
//!
//! For a population of random small models (alternating plain-bias and
//! context-bias stacks), every parameter entry's analytic gradient is
//! compared against a central finite difference of the cross-entropy loss.
//! Dropout layers are present but run at rate 0 so the loss is a
//! deterministic function of the parameters.
//!
//! Relative error uses `|a - n| / max(|a|, |n|, 1e-6)`; the absolute floor
//! keeps finite-difference noise on near-zero gradients from registering as
//! huge relative errors.

use std::time::{Duration, Instant};

use crate::error::Result;
use crate::nn::{cross_entropy, Activation, ContextBiasDense, DenseLayer, Layer, Mode, Model};
use crate::tensor::{Matrix, Rng};

/// Settings for [`run_gradcheck`].
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Number of random models to test.
    pub models: usize,
    /// Central-difference step.
    pub step: f64,
    /// Maximum allowed relative error.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            models: 20,
            step: 1e-5,
            tolerance: 1e-4,
            seed: 0xC0FFEE,
        }
    }
}

/// Outcome of a gradient-check run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub models_checked: usize,
    pub entries_checked: usize,
    pub max_rel_error: f64,
    /// Index of the model holding the worst entry.
    pub worst_model: usize,
    pub tolerance: f64,
    pub elapsed: Duration,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn summary(&self) -> String {
        format!(
            "gradcheck: {} models, {} entries, max relative error {:.3e} (tolerance {:.0e}) in {:.2}s -> {}",
            self.models_checked,
            self.entries_checked,
            self.max_rel_error,
            self.tolerance,
            self.elapsed.as_secs_f64(),
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn loss_of(model: &mut Model, x: &Matrix, ctx: Option<&[usize]>, labels: &[usize]) -> f64 {
    // Dropout rate is 0 in every gradcheck model, so the rng is never drawn.
    let probs = model
        .forward(x, ctx, Mode::Train, &mut Rng::from_seed(0))
        .expect("gradcheck forward");
    cross_entropy(&probs, labels).expect("gradcheck loss")
}

/// Compares backprop against central finite differences on a population of
/// random small models. Checks every parameter entry of every model.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let start = Instant::now();
    let root = Rng::from_seed(cfg.seed);

    let mut entries = 0usize;
    let mut max_rel = 0.0f64;
    let mut worst_model = 0usize;

    for model_idx in 0..cfg.models {
        let mut rng = root.split_indexed("gradcheck-model", model_idx as u64);
        let input = 3 + rng.next_below(5); // 3..=7
        let hidden = 3 + rng.next_below(4); // 3..=6
        let classes = 2 + rng.next_below(4); // 2..=5
        let contexts = 2 + rng.next_below(3); // 2..=4
        let batch = 3 + rng.next_below(5); // 3..=7
        let with_context = model_idx % 2 == 0;

        let mut layers = Vec::new();
        if with_context {
            let mut layer = ContextBiasDense::glorot(&mut rng, input, hidden, contexts, Activation::Elu);
            // Random context biases: the zero init would hide bugs that only
            // show once B is away from the origin.
            layer.context_bias = rng.uniform(hidden, contexts, -0.5, 0.5)?;
            layers.push(Layer::ContextBias(layer));
        } else {
            layers.push(Layer::Dense(DenseLayer::glorot(
                &mut rng,
                input,
                hidden,
                Activation::Elu,
                true,
            )));
        }
        layers.push(Layer::Dropout(0.0));
        layers.push(Layer::Dense(DenseLayer::glorot(
            &mut rng,
            hidden,
            classes,
            Activation::Softmax,
            true,
        )));
        let mut model = Model::new(layers)?;

        let x = rng.uniform(batch, input, -1.5, 1.5)?;
        let labels: Vec<usize> = (0..batch).map(|_| rng.next_below(classes)).collect();
        let ctx_labels: Option<Vec<usize>> =
            with_context.then(|| (0..batch).map(|_| rng.next_below(contexts)).collect());
        let ctx = ctx_labels.as_deref();

        model.forward(&x, ctx, Mode::Train, &mut Rng::from_seed(0))?;
        let analytic = model.backward(&labels)?;
        let analytic: Vec<Matrix> = analytic.flat().into_iter().cloned().collect();

        for (p_idx, analytic_grad) in analytic.iter().enumerate() {
            let len = analytic_grad.data().len();
            for k in 0..len {
                let orig = model.params()[p_idx].data()[k];

                model.params_mut()[p_idx].data_mut()[k] = orig + cfg.step;
                let plus = loss_of(&mut model, &x, ctx, &labels);
                model.params_mut()[p_idx].data_mut()[k] = orig - cfg.step;
                let minus = loss_of(&mut model, &x, ctx, &labels);
                model.params_mut()[p_idx].data_mut()[k] = orig;

                let numeric = (plus - minus) / (2.0 * cfg.step);
                let analytic_v = analytic_grad.data()[k];
                let rel = (analytic_v - numeric).abs()
                    / analytic_v.abs().max(numeric.abs()).max(1e-6);
                entries += 1;
                if rel > max_rel {
                    max_rel = rel;
                    worst_model = model_idx;
                }
            }
        }
    }

    Ok(GradCheckReport {
        models_checked: cfg.models,
        entries_checked: entries,
        max_rel_error: max_rel,
        worst_model,
        tolerance: cfg.tolerance,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_population_passes() {
        let report = run_gradcheck(&GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{}", report.summary());
        assert!(report.entries_checked > 500, "{}", report.entries_checked);
    }

    #[test]
    fn detects_a_broken_gradient() {
        // Sanity check that the harness would actually notice a wrong
        // gradient: compare the analytic gradient against finite differences
        // computed with a deliberately huge step, which no longer agree.
        let cfg = GradCheckConfig {
            models: 2,
            step: 0.5,
            tolerance: 1e-4,
            ..GradCheckConfig::default()
        };
        let report = run_gradcheck(&cfg).unwrap();
        assert!(!report.passed(), "a half-unit FD step must not pass at 1e-4");
    }
}
