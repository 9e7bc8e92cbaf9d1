use super::*;
use crate::optim::Adadelta;

fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- elu

#[test]
fn elu_zero_and_positive_pass_through() {
    let m = Matrix::from_rows(&[&[0.0, 2.5]]);
    let out = elu(&m);
    assert_eq!(out.get(0, 0), 0.0);
    assert_eq!(out.get(0, 1), 2.5);
}

#[test]
fn elu_negative_closed_form() {
    let out = elu(&Matrix::from_rows(&[&[-1.0]]));
    // e^-1 - 1
    assert!(approx(out.get(0, 0), -0.6321206, 1e-7), "{}", out.get(0, 0));
}

// ---------------------------------------------------------------- softmax

#[test]
fn softmax_uniform_on_equal_inputs() {
    let out = softmax(&Matrix::from_rows(&[&[0.0, 0.0, 0.0]]));
    for j in 0..3 {
        assert!(approx(out.get(0, j), 1.0 / 3.0, 1e-15));
    }
}

#[test]
fn softmax_stable_under_large_inputs() {
    let out = softmax(&Matrix::from_rows(&[&[1000.0, 1000.0]]));
    assert!(out.is_finite());
    assert!(approx(out.get(0, 0), 0.5, 1e-15));
    assert!(approx(out.get(0, 1), 0.5, 1e-15));
}

#[test]
fn softmax_closed_form_1_2_3() {
    let out = softmax(&Matrix::from_rows(&[&[1.0, 2.0, 3.0]]));
    assert!(approx(out.get(0, 0), 0.09003, 1e-5));
    assert!(approx(out.get(0, 1), 0.24473, 1e-5));
    assert!(approx(out.get(0, 2), 0.66524, 1e-5));
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = Rng::from_seed(5);
    let m = rng.uniform(7, 9, -30.0, 30.0).unwrap();
    let out = softmax(&m);
    for r in 0..out.rows() {
        let sum: f64 = out.row(r).iter().sum();
        assert!(approx(sum, 1.0, 1e-9));
        assert!(out.row(r).iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

// ---------------------------------------------------------------- cross entropy

#[test]
fn cross_entropy_perfect_prediction_is_zero() {
    let probs = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
    let loss = cross_entropy(&probs, &[0, 1]).unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn cross_entropy_uniform_four_classes() {
    let probs = Matrix::from_rows(&[&[0.25, 0.25, 0.25, 0.25]]);
    let loss = cross_entropy(&probs, &[2]).unwrap();
    assert!(approx(loss, 4.0f64.ln(), 1e-12));
}

#[test]
fn cross_entropy_closed_form() {
    let probs = Matrix::from_rows(&[&[0.7, 0.3]]);
    let loss = cross_entropy(&probs, &[1]).unwrap();
    assert!(approx(loss, 1.20397, 1e-5));
}

#[test]
fn cross_entropy_label_out_of_range() {
    let probs = Matrix::from_rows(&[&[0.5, 0.5]]);
    assert!(matches!(
        cross_entropy(&probs, &[2]),
        Err(Error::Parameter(_))
    ));
}

// ---------------------------------------------------------------- dropout

#[test]
fn dropout_eval_mode_is_identity() {
    let x = Rng::from_seed(1).uniform(4, 6, -1.0, 1.0).unwrap();
    let spec = DropoutSpec { rate: 0.5, mode: Mode::Eval };
    let (out, mask) = apply_dropout(&x, &spec, &mut Rng::from_seed(2)).unwrap();
    assert_eq!(out, x);
    assert!(mask.data().iter().all(|&v| v == 1.0));
}

#[test]
fn dropout_rate_zero_is_identity() {
    let x = Rng::from_seed(1).uniform(4, 6, -1.0, 1.0).unwrap();
    let spec = DropoutSpec { rate: 0.0, mode: Mode::Train };
    let (out, mask) = apply_dropout(&x, &spec, &mut Rng::from_seed(2)).unwrap();
    assert_eq!(out, x);
    assert!(mask.data().iter().all(|&v| v == 1.0));
}

#[test]
fn dropout_rate_one_rejected() {
    let x = Matrix::zeros(1, 1);
    let spec = DropoutSpec { rate: 1.0, mode: Mode::Train };
    assert!(matches!(
        apply_dropout(&x, &spec, &mut Rng::from_seed(0)),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn dropout_is_unbiased_in_expectation() {
    // Inverted dropout at rate 0.5 on a large all-ones matrix: the mean of
    // the output should stay within 1% of the input mean.
    let x = Matrix::zeros(100, 200).map(|_| 1.0);
    let spec = DropoutSpec { rate: 0.5, mode: Mode::Train };
    let (out, _) = apply_dropout(&x, &spec, &mut Rng::from_seed(77)).unwrap();
    let mean = out.data().iter().sum::<f64>() / out.data().len() as f64;
    assert!(approx(mean, 1.0, 0.01), "mean {mean}");
}

// ---------------------------------------------------------------- model helpers

fn context_model(rng: &mut Rng, input: usize, hidden: usize, classes: usize, contexts: usize) -> Model {
    let l1 = ContextBiasDense::glorot(rng, input, hidden, contexts, Activation::Elu);
    let l2 = DenseLayer::glorot(rng, hidden, classes, Activation::Softmax, true);
    Model::new(vec![Layer::ContextBias(l1), Layer::Dense(l2)]).unwrap()
}

fn plain_model(rng: &mut Rng, input: usize, hidden: usize, classes: usize) -> Model {
    let l1 = DenseLayer::glorot(rng, input, hidden, Activation::Elu, true);
    let l2 = DenseLayer::glorot(rng, hidden, classes, Activation::Softmax, true);
    Model::new(vec![Layer::Dense(l1), Layer::Dense(l2)]).unwrap()
}

// ---------------------------------------------------------------- forward

#[test]
fn forward_zero_weights_isolates_context_column() {
    // With A = 0 and identity activation, the output row equals column i of B.
    let contexts = 4;
    let out_w = 3;
    let mut rng = Rng::from_seed(9);
    let b = rng.uniform(out_w, contexts, -2.0, 2.0).unwrap();
    let layer = ContextBiasDense::new(Matrix::zeros(5, out_w), b.clone(), Activation::Identity).unwrap();
    let mut model = Model::new(vec![Layer::ContextBias(layer)]).unwrap();

    for ctx in 0..contexts {
        let x = rng.uniform(1, 5, -1.0, 1.0).unwrap();
        let out = model
            .forward(&x, Some(&[ctx]), Mode::Eval, &mut Rng::from_seed(0))
            .unwrap();
        let expected = b.col_select(ctx).unwrap().transpose();
        assert_eq!(out, expected);
    }
}

#[test]
fn forward_single_context_degenerates_to_plain_bias() {
    let mut rng = Rng::from_seed(4);
    let w = rng.uniform(6, 4, -1.0, 1.0).unwrap();
    let b = rng.uniform(4, 1, -1.0, 1.0).unwrap();

    let ctx_layer = ContextBiasDense::new(w.clone(), b.clone(), Activation::Elu).unwrap();
    let dense = DenseLayer::new(w, Some(b.transpose()), Activation::Elu).unwrap();

    let mut m_ctx = Model::new(vec![Layer::ContextBias(ctx_layer)]).unwrap();
    let mut m_dense = Model::new(vec![Layer::Dense(dense)]).unwrap();

    for _ in 0..20 {
        let x = rng.uniform(3, 6, -2.0, 2.0).unwrap();
        let a = m_ctx
            .forward(&x, Some(&[0, 0, 0]), Mode::Eval, &mut Rng::from_seed(0))
            .unwrap();
        let b = m_dense
            .forward(&x, None, Mode::Eval, &mut Rng::from_seed(0))
            .unwrap();
        assert_eq!(a, b, "single-context model must equal the plain layer");
    }
}

#[test]
fn forward_context_equivalence_oracle() {
    // One-hot context vs the explicit per-context dense layer: bit identical.
    let mut rng = Rng::from_seed(21);
    for case in 0..50 {
        let mut seed_rng = Rng::from_seed(1000 + case);
        let contexts = 2 + (case as usize % 4);
        let layer = ContextBiasDense::glorot(&mut seed_rng, 5, 4, contexts, Activation::Elu);
        // Give B nonzero entries.
        let layer = ContextBiasDense::new(
            layer.weights,
            seed_rng.uniform(4, contexts, -1.5, 1.5).unwrap(),
            Activation::Elu,
        )
        .unwrap();
        let ctx = rng.next_below(contexts);
        let x = rng.uniform(3, 5, -2.0, 2.0).unwrap();

        let mut via_ctx = Model::new(vec![Layer::ContextBias(layer.clone())]).unwrap();
        let mut via_dense = Model::new(vec![Layer::Dense(layer.as_dense(ctx).unwrap())]).unwrap();

        let a = via_ctx
            .forward(&x, Some(&vec![ctx; 3]), Mode::Eval, &mut Rng::from_seed(0))
            .unwrap();
        let b = via_dense
            .forward(&x, None, Mode::Eval, &mut Rng::from_seed(0))
            .unwrap();
        assert_eq!(a, b);

        // And the one-hot product really is the selected column.
        let one_hot = ContextLabel::new(ctx, contexts).unwrap().one_hot();
        let product = layer.context_bias.matmul(&one_hot).unwrap();
        assert_eq!(product, layer.context_bias.col_select(ctx).unwrap());
    }
}

#[test]
fn forward_context_errors() {
    let mut rng = Rng::from_seed(2);
    let mut with_ctx = context_model(&mut rng, 4, 3, 2, 3);
    let mut without_ctx = plain_model(&mut rng, 4, 3, 2);
    let x = Matrix::zeros(2, 4);

    assert!(matches!(
        with_ctx.forward(&x, None, Mode::Eval, &mut Rng::from_seed(0)),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        without_ctx.forward(&x, Some(&[0, 1]), Mode::Eval, &mut Rng::from_seed(0)),
        Err(Error::Config(_))
    ));
    // Label beyond C.
    assert!(matches!(
        with_ctx.forward(&x, Some(&[0, 3]), Mode::Eval, &mut Rng::from_seed(0)),
        Err(Error::Index { .. })
    ));
    // Width mismatch.
    let bad = Matrix::zeros(2, 5);
    assert!(matches!(
        with_ctx.forward(&bad, Some(&[0, 1]), Mode::Eval, &mut Rng::from_seed(0)),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn model_rejects_two_context_layers_and_inner_softmax() {
    let mut rng = Rng::from_seed(3);
    let c1 = ContextBiasDense::glorot(&mut rng, 4, 4, 2, Activation::Elu);
    let c2 = ContextBiasDense::glorot(&mut rng, 4, 4, 2, Activation::Elu);
    let out = DenseLayer::glorot(&mut rng, 4, 2, Activation::Softmax, true);
    assert!(matches!(
        Model::new(vec![
            Layer::ContextBias(c1.clone()),
            Layer::ContextBias(c2),
            Layer::Dense(out.clone())
        ]),
        Err(Error::Config(_))
    ));

    let sm_inner = DenseLayer::glorot(&mut rng, 4, 4, Activation::Softmax, true);
    assert!(matches!(
        Model::new(vec![Layer::Dense(sm_inner), Layer::Dense(out)]),
        Err(Error::Config(_))
    ));
}

// ---------------------------------------------------------------- backward

#[test]
fn backward_before_forward_is_a_state_error() {
    let mut rng = Rng::from_seed(8);
    let mut model = plain_model(&mut rng, 4, 3, 2);
    assert!(matches!(model.backward(&[0]), Err(Error::State(_))));

    // An eval pass clears the cache.
    let x = Matrix::zeros(1, 4);
    model.forward(&x, None, Mode::Eval, &mut Rng::from_seed(0)).unwrap();
    assert!(matches!(model.backward(&[0]), Err(Error::State(_))));
}

#[test]
fn backward_context_grad_masks_unused_columns() {
    let mut rng = Rng::from_seed(12);
    let mut model = context_model(&mut rng, 6, 5, 4, 3);
    let x = rng.uniform(8, 6, -1.0, 1.0).unwrap();
    let labels: Vec<usize> = (0..8).map(|i| i % 4).collect();
    // Every sample uses context 0.
    model
        .forward(&x, Some(&vec![0; 8]), Mode::Train, &mut Rng::from_seed(0))
        .unwrap();
    let grads = model.backward(&labels).unwrap();
    let db = match &grads.layers[0] {
        LayerGrad::ContextBias { context_bias, .. } => context_bias,
        g => panic!("unexpected grad {g:?}"),
    };
    let mut col0_nonzero = false;
    for r in 0..db.rows() {
        if db.get(r, 0) != 0.0 {
            col0_nonzero = true;
        }
        assert_eq!(db.get(r, 1), 0.0);
        assert_eq!(db.get(r, 2), 0.0);
    }
    assert!(col0_nonzero, "used column should receive gradient");
}

#[test]
fn zero_loss_delta_is_zero() {
    let probs = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
    let delta = softmax_ce_delta(&probs, &[0, 1]);
    assert!(delta.data().iter().all(|&v| v == 0.0));
}

/// Central finite differences over every parameter entry, as an oracle for
/// backprop. Dropout is disabled so the loss is a deterministic function of
/// the parameters.
fn finite_difference_grads(
    model: &mut Model,
    x: &Matrix,
    ctx: Option<&[usize]>,
    labels: &[usize],
    h: f64,
) -> Vec<Matrix> {
    let n_params = model.params().len();
    let mut out = Vec::with_capacity(n_params);
    for p_idx in 0..n_params {
        let (rows, cols) = model.params()[p_idx].shape();
        let mut grad = Matrix::zeros(rows, cols);
        for k in 0..rows * cols {
            let orig = model.params()[p_idx].data()[k];

            model.params_mut()[p_idx].data_mut()[k] = orig + h;
            let probs = model.forward(x, ctx, Mode::Train, &mut Rng::from_seed(0)).unwrap();
            let loss_plus = cross_entropy(&probs, labels).unwrap();

            model.params_mut()[p_idx].data_mut()[k] = orig - h;
            let probs = model.forward(x, ctx, Mode::Train, &mut Rng::from_seed(0)).unwrap();
            let loss_minus = cross_entropy(&probs, labels).unwrap();

            model.params_mut()[p_idx].data_mut()[k] = orig;
            grad.data_mut()[k] = (loss_plus - loss_minus) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

#[test]
fn backward_matches_finite_differences() {
    // 6-input / 5-hidden / 4-class / 3-context model, every parameter entry.
    let mut rng = Rng::from_seed(31);
    let mut model = context_model(&mut rng, 6, 5, 4, 3);
    let x = rng.uniform(9, 6, -1.5, 1.5).unwrap();
    let ctx: Vec<usize> = (0..9).map(|i| i % 3).collect();
    let labels: Vec<usize> = (0..9).map(|i| (i * 7) % 4).collect();

    model.forward(&x, Some(&ctx), Mode::Train, &mut Rng::from_seed(0)).unwrap();
    let analytic = model.backward(&labels).unwrap();
    let numeric = finite_difference_grads(&mut model, &x, Some(&ctx), &labels, 1e-5);

    let mut max_rel = 0.0f64;
    for (a, n) in analytic.flat().iter().zip(&numeric) {
        for (&av, &nv) in a.data().iter().zip(n.data()) {
            let rel = (av - nv).abs() / av.abs().max(nv.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
    }
    assert!(max_rel < 1e-4, "max relative error {max_rel}");
}

#[test]
fn context_permutation_leaves_outputs_unchanged() {
    // Permuting context indices and B's columns together changes nothing.
    let mut rng = Rng::from_seed(40);
    let contexts = 4;
    let w = rng.uniform(5, 3, -1.0, 1.0).unwrap();
    let b = rng.uniform(3, contexts, -1.0, 1.0).unwrap();
    let perm = [2usize, 0, 3, 1];

    let mut b_perm = Matrix::zeros(3, contexts);
    for c in 0..contexts {
        for r in 0..3 {
            b_perm.set(r, perm[c], b.get(r, c));
        }
    }

    let layer = ContextBiasDense::new(w.clone(), b, Activation::Elu).unwrap();
    let layer_perm = ContextBiasDense::new(w, b_perm, Activation::Elu).unwrap();
    let mut m1 = Model::new(vec![Layer::ContextBias(layer)]).unwrap();
    let mut m2 = Model::new(vec![Layer::ContextBias(layer_perm)]).unwrap();

    for ctx in 0..contexts {
        let x = rng.uniform(2, 5, -1.0, 1.0).unwrap();
        let a = m1.forward(&x, Some(&[ctx, ctx]), Mode::Eval, &mut Rng::from_seed(0)).unwrap();
        let b = m2
            .forward(&x, Some(&[perm[ctx], perm[ctx]]), Mode::Eval, &mut Rng::from_seed(0))
            .unwrap();
        assert_eq!(a, b);
    }
}

// ---------------------------------------------------------------- checkpoint

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ctxm");

    let mut rng = Rng::from_seed(50);
    let l1 = ContextBiasDense::glorot(&mut rng, 7, 6, 3, Activation::Elu);
    let l1 = ContextBiasDense::new(l1.weights, rng.uniform(6, 3, -1.0, 1.0).unwrap(), Activation::Elu).unwrap();
    let l2 = DenseLayer::glorot(&mut rng, 6, 4, Activation::Softmax, true);
    let mut model = Model::new(vec![
        Layer::ContextBias(l1),
        Layer::Dropout(0.5),
        Layer::Dense(l2),
    ])
    .unwrap();

    // Give the optimizer some non-trivial state first.
    let x = rng.uniform(5, 7, -1.0, 1.0).unwrap();
    let ctx: Vec<usize> = (0..5).map(|i| i % 3).collect();
    let labels: Vec<usize> = (0..5).map(|i| i % 4).collect();
    let mut opt = Adadelta::with_defaults();
    let mut step_rng = Rng::from_seed(51);
    model.forward(&x, Some(&ctx), Mode::Train, &mut step_rng).unwrap();
    let grads = model.backward(&labels).unwrap();
    opt.step(&mut model.params_mut(), &grads.flat()).unwrap();

    save_checkpoint(&path, &model, Some(&opt)).unwrap();
    let loaded = load_checkpoint(&path).unwrap();

    let orig_params = model.params();
    let loaded_params = loaded.model.params();
    assert_eq!(orig_params.len(), loaded_params.len());
    for (a, b) in orig_params.iter().zip(&loaded_params) {
        assert_eq!(a.data(), b.data(), "parameters must round-trip bit-exactly");
    }
    let lopt = loaded.optimizer.unwrap();
    assert_eq!(lopt.rho, opt.rho);
    assert_eq!(lopt.eps, opt.eps);
    assert_eq!(lopt.slots, opt.slots);

    // Saving the loaded model again reproduces the file byte for byte.
    let path2 = dir.path().join("model2.ctxm");
    save_checkpoint(&path2, &loaded.model, Some(&lopt)).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn restored_optimizer_state_reproduces_the_remaining_trajectory() {
    // Serialize model + Adadelta state mid-run, restore, and continue: the
    // restored pair must track the original bit for bit.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ctxm");

    let mut rng = Rng::from_seed(60);
    let mut model = Model::new(vec![
        Layer::Dense(DenseLayer::glorot(&mut rng, 5, 4, Activation::Elu, true)),
        Layer::Dense(DenseLayer::glorot(&mut rng, 4, 3, Activation::Softmax, true)),
    ])
    .unwrap();
    let mut opt = Adadelta::with_defaults();
    let x = rng.uniform(6, 5, -1.0, 1.0).unwrap();
    let labels: Vec<usize> = (0..6).map(|i| i % 3).collect();

    let mut do_step = |model: &mut Model, opt: &mut Adadelta| {
        model.forward(&x, None, Mode::Train, &mut Rng::from_seed(0)).unwrap();
        let grads = model.backward(&labels).unwrap();
        opt.step(&mut model.params_mut(), &grads.flat()).unwrap();
    };

    for _ in 0..5 {
        do_step(&mut model, &mut opt);
    }
    save_checkpoint(&path, &model, Some(&opt)).unwrap();
    let restored = load_checkpoint(&path).unwrap();
    let mut model2 = restored.model;
    let mut opt2 = restored.optimizer.unwrap();

    for _ in 0..5 {
        do_step(&mut model, &mut opt);
        do_step(&mut model2, &mut opt2);
    }
    for (a, b) in model.params().iter().zip(model2.params().iter()) {
        assert_eq!(a.data(), b.data());
    }
}

#[test]
fn checkpoint_rejects_bad_magic_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ctxm");

    std::fs::write(&path, b"NOPE").unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::BadMagic { .. })));

    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"CTXM");
    bytes.extend_from_slice(&99u32.to_le_bytes());
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::BadVersion { .. })));

    std::fs::write(&path, b"CT").unwrap();
    assert!(matches!(load_checkpoint(&path), Err(Error::Truncated { .. })));
}
