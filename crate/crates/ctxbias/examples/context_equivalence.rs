//! The core identity behind the context-bias layer.
//!
//! A dense layer with per-context biases, `f(x W + B[:, ctx])`, is exactly an
//! ordinary dense layer whose bias happens to be column `ctx` of `B`. This
//! example builds both and shows the outputs and gradients agree to the bit,
//! for every context.
//!
//! Run with: `cargo run --example context_equivalence`

use ctxbias::nn::{Activation, ContextBiasDense, ContextLabel, DenseLayer, Layer, Mode, Model};
use ctxbias::tensor::Rng;

fn main() {
    let mut rng = Rng::from_seed(7);
    let (input, hidden, classes, contexts) = (6, 5, 4, 3);

    // A context-bias layer with non-trivial biases, plus a softmax head.
    let mut layer = ContextBiasDense::glorot(&mut rng, input, hidden, contexts, Activation::Elu);
    layer.context_bias = rng.uniform(hidden, contexts, -1.0, 1.0).unwrap();
    let head = DenseLayer::glorot(&mut rng, hidden, classes, Activation::Softmax, true);

    let x = rng.uniform(4, input, -2.0, 2.0).unwrap();
    let labels = vec![0, 1, 2, 3];

    println!("context-bias layer: {input} inputs, {hidden} units, {contexts} contexts\n");

    for ctx in 0..contexts {
        // The one-hot product B x_hat literally selects column ctx.
        let one_hot = ContextLabel::new(ctx, contexts).unwrap().one_hot();
        let product = layer.context_bias.matmul(&one_hot).unwrap();
        assert_eq!(product, layer.context_bias.col_select(ctx).unwrap());

        // Forward + backward through the context layer...
        let mut via_context = Model::new(vec![
            Layer::ContextBias(layer.clone()),
            Layer::Dense(head.clone()),
        ])
        .unwrap();
        let out_ctx = via_context
            .forward(&x, Some(&[ctx; 4]), Mode::Train, &mut Rng::from_seed(0))
            .unwrap();
        let grads_ctx = via_context.backward(&labels).unwrap();

        // ...and through the equivalent plain dense layer.
        let mut via_dense = Model::new(vec![
            Layer::Dense(layer.as_dense(ctx).unwrap()),
            Layer::Dense(head.clone()),
        ])
        .unwrap();
        let out_dense = via_dense
            .forward(&x, None, Mode::Train, &mut Rng::from_seed(0))
            .unwrap();
        let grads_dense = via_dense.backward(&labels).unwrap();

        assert_eq!(out_ctx, out_dense, "forward passes must be bit-identical");
        assert_eq!(grads_ctx.layers[1], grads_dense.layers[1]);
        println!(
            "context {ctx}: outputs bit-identical, first output row {:?}",
            &out_ctx.row(0)[..classes.min(3)]
        );
    }

    println!("\nall contexts verified: B x_hat is column selection, bit for bit");
}
