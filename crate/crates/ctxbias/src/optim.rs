//! Parameter update rules: Adadelta and plain SGD.
//!
//! Adadelta keeps two exponentially decayed accumulators per parameter,
//! squared gradients and squared updates, and needs no learning rate:
//!
//! ```text
//! Eg  <- rho * Eg  + (1 - rho) * g^2
//! dx  <- -sqrt(Edx + eps) / sqrt(Eg + eps) * g
//! Edx <- rho * Edx + (1 - rho) * dx^2
//! p   <- p + dx
//! ```
//!
//! The epsilon sits inside both square roots, which keeps the very first
//! step finite (`dx = -sqrt(eps) / sqrt((1-rho) g^2 + eps) * g`).

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const ADADELTA_DEFAULT_RHO: f64 = 0.95;
pub const ADADELTA_DEFAULT_EPS: f64 = 1e-6;

/// Per-parameter accumulators for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaSlot {
    pub grad_sq: Matrix,
    pub delta_sq: Matrix,
}

/// Adadelta optimizer state across a whole parameter set.
///
/// Slots are allocated on the first step and afterwards must keep matching
/// the parameter shapes exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Adadelta {
    pub rho: f64,
    pub eps: f64,
    pub slots: Vec<AdadeltaSlot>,
}

impl Adadelta {
    pub fn new(rho: f64, eps: f64) -> Result<Adadelta> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Parameter(format!("adadelta rho {rho} outside [0, 1)")));
        }
        if eps <= 0.0 {
            return Err(Error::Parameter(format!("adadelta eps {eps} must be positive")));
        }
        Ok(Adadelta { rho, eps, slots: Vec::new() })
    }

    pub fn with_defaults() -> Adadelta {
        Adadelta::new(ADADELTA_DEFAULT_RHO, ADADELTA_DEFAULT_EPS).expect("defaults valid")
    }

    /// Applies one Adadelta update to every parameter in place.
    ///
    /// `params` and `grads` must align pairwise in shape; the slot shapes are
    /// pinned on first use.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Parameter(format!(
                "adadelta_step: {} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| AdadeltaSlot {
                    grad_sq: Matrix::zeros(p.rows(), p.cols()),
                    delta_sq: Matrix::zeros(p.rows(), p.cols()),
                })
                .collect();
        }
        if self.slots.len() != params.len() {
            return Err(Error::Parameter(format!(
                "adadelta_step: state has {} slots for {} params",
                self.slots.len(),
                params.len()
            )));
        }
        for ((param, grad), slot) in params.iter_mut().zip(grads).zip(&mut self.slots) {
            if param.shape() != grad.shape() || param.shape() != slot.grad_sq.shape() {
                return Err(Error::Shape {
                    op: "adadelta_step",
                    lhs_rows: param.rows(),
                    lhs_cols: param.cols(),
                    rhs_rows: grad.rows(),
                    rhs_cols: grad.cols(),
                });
            }
            let rho = self.rho;
            let eps = self.eps;
            let p = param.data_mut();
            let g = grad.data();
            let eg = slot.grad_sq.data_mut();
            let ed = slot.delta_sq.data_mut();
            for k in 0..p.len() {
                eg[k] = rho * eg[k] + (1.0 - rho) * g[k] * g[k];
                let dx = -((ed[k] + eps).sqrt() / (eg[k] + eps).sqrt()) * g[k];
                ed[k] = rho * ed[k] + (1.0 - rho) * dx * dx;
                p[k] += dx;
            }
        }
        Ok(())
    }
}

/// Plain gradient descent: `p <- p - lr * g`.
pub fn sgd_step(params: &mut [&mut Matrix], grads: &[&Matrix], lr: f64) -> Result<()> {
    if lr <= 0.0 || !lr.is_finite() {
        return Err(Error::Parameter(format!("sgd_step: learning rate {lr} must be positive")));
    }
    if params.len() != grads.len() {
        return Err(Error::Parameter(format!(
            "sgd_step: {} params vs {} grads",
            params.len(),
            grads.len()
        )));
    }
    for (param, grad) in params.iter_mut().zip(grads) {
        if param.shape() != grad.shape() {
            return Err(Error::Shape {
                op: "sgd_step",
                lhs_rows: param.rows(),
                lhs_cols: param.cols(),
                rhs_rows: grad.rows(),
                rhs_cols: grad.cols(),
            });
        }
        for (p, &g) in param.data_mut().iter_mut().zip(grad.data()) {
            *p -= lr * g;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f64) -> Matrix {
        Matrix::from_rows(&[&[v]])
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_accumulators() {
        let mut opt = Adadelta::with_defaults();
        let mut p = single(1.0);
        let g1 = single(1.0);
        opt.step(&mut [&mut p], &[&g1]).unwrap();
        let eg_after_one = opt.slots[0].grad_sq.get(0, 0);
        let p_after_one = p.get(0, 0);

        let g0 = single(0.0);
        opt.step(&mut [&mut p], &[&g0]).unwrap();
        assert_eq!(p.get(0, 0), p_after_one, "zero grad must not move params");
        assert!(opt.slots[0].grad_sq.get(0, 0) < eg_after_one);
    }

    #[test]
    fn scalar_first_step_matches_hand_evaluation() {
        // rho = 0.95, eps = 1e-6, g = 1:
        // Eg = 0.05, dx = -sqrt(1e-6) / sqrt(0.05 + 1e-6) = -4.47209e-3.
        let mut opt = Adadelta::with_defaults();
        let mut p = single(0.0);
        let g = single(1.0);
        opt.step(&mut [&mut p], &[&g]).unwrap();
        let dx = p.get(0, 0);
        assert!(
            (dx - (-4.47209e-3)).abs() < 1e-8,
            "dx = {dx}, expected -4.47209e-3"
        );
    }

    #[test]
    fn quadratic_loss_decreases_over_100_steps() {
        // f(p) = p^2 / 2, grad = p.
        let mut opt = Adadelta::with_defaults();
        let mut p = single(1.0);
        let mut prev_loss = 0.5 * p.get(0, 0) * p.get(0, 0);
        for _ in 0..100 {
            let g = single(p.get(0, 0));
            opt.step(&mut [&mut p], &[&g]).unwrap();
            let loss = 0.5 * p.get(0, 0) * p.get(0, 0);
            assert!(loss < prev_loss, "loss must strictly decrease");
            prev_loss = loss;
        }
    }

    #[test]
    fn update_opposes_gradient_sign() {
        let mut opt = Adadelta::with_defaults();
        for &g0 in &[3.0, -0.25, 1e-4, -7.5] {
            let mut p = single(10.0);
            let g = single(g0);
            opt.slots.clear();
            opt.step(&mut [&mut p], &[&g]).unwrap();
            let moved = p.get(0, 0) - 10.0;
            assert!(moved * g0 < 0.0, "update {moved} must oppose gradient {g0}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut opt = Adadelta::with_defaults();
        let mut p = Matrix::zeros(2, 2);
        let g = Matrix::zeros(2, 3);
        assert!(matches!(
            opt.step(&mut [&mut p], &[&g]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn sgd_hand_cases() {
        let mut p = single(1.0);
        let g = single(1.0);
        sgd_step(&mut [&mut p], &[&g], 0.1).unwrap();
        assert!((p.get(0, 0) - 0.9).abs() < 1e-15);

        let g0 = single(0.0);
        sgd_step(&mut [&mut p], &[&g0], 0.1).unwrap();
        assert!((p.get(0, 0) - 0.9).abs() < 1e-15);

        assert!(sgd_step(&mut [&mut p], &[&g], 0.0).is_err());
        assert!(sgd_step(&mut [&mut p], &[&g], -1.0).is_err());
    }

    #[test]
    fn sgd_two_steps_equal_one_summed_step_for_constant_grad() {
        let mut a = single(5.0);
        let g = single(2.0);
        sgd_step(&mut [&mut a], &[&g], 0.1).unwrap();
        sgd_step(&mut [&mut a], &[&g], 0.1).unwrap();

        let mut b = single(5.0);
        sgd_step(&mut [&mut b], &[&g], 0.2).unwrap();
        assert!((a.get(0, 0) - b.get(0, 0)).abs() < 1e-12);
    }
}
