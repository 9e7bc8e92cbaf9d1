//! Context gating in the attractor network.
//!
//! A cue built exactly between one pattern from each context is genuinely
//! ambiguous: unbiased recall falls to either side like a coin flip. Adding
//! the weak per-context field (far too weak to drive the network by itself)
//! reliably tips recall into the biased context's pattern.
//!
//! Run with: `cargo run --example ca3_gating`

use ctxbias::ca3::{ambiguous_cue, gating_experiment, Ca3Network, GatingConfig};
use ctxbias::ca3::{context_pattern_family, random_pattern, StoredPattern};
use ctxbias::tensor::Rng;

fn main() {
    // One hand-run trial, spelled out.
    let mut rng = Rng::from_seed(5);
    let units = 200;
    let patterns = context_pattern_family(units, 5, 2, 0.4, &mut rng).unwrap();
    let net = Ca3Network::store_patterns(patterns, units, 0.3, 10.0).unwrap();

    let a = net.patterns()[0].values.clone(); // context 0
    let b = net.patterns()[5].values.clone(); // context 1
    let cue = ambiguous_cue(&a, &b, &mut rng).unwrap();
    println!(
        "cue overlaps: {:.3} with pattern A (context 0), {:.3} with pattern B (context 1)",
        net.overlap(&cue, 0).unwrap(),
        net.overlap(&cue, 5).unwrap()
    );

    let biased = net.recall(&cue, 0.0, Some(0), 400, &mut rng.clone()).unwrap();
    let unbiased = net.recall(&cue, 0.0, None, 400, &mut rng).unwrap();
    println!(
        "biased toward context 0: settles in {} steps, final overlaps A {:.3} / B {:.3}",
        biased.steps,
        net.overlap(&biased.final_state, 0).unwrap(),
        net.overlap(&biased.final_state, 5).unwrap()
    );
    println!(
        "unbiased:                settles in {} steps, final overlaps A {:.3} / B {:.3}",
        unbiased.steps,
        net.overlap(&unbiased.final_state, 0).unwrap(),
        net.overlap(&unbiased.final_state, 5).unwrap()
    );

    // The Monte Carlo over 100 fresh networks.
    println!("\nambiguous-cue Monte Carlo (100 trials, N = 200, 2 contexts x 5 patterns):");
    let result = gating_experiment(&GatingConfig::default()).unwrap();
    println!(
        "  biased selection rate:   {:.2}  (unbiased: {:.2})",
        result.biased_rate, result.unbiased_rate
    );
    println!(
        "  strict >0.9 recall:      {:.2}  (unbiased: {:.2})",
        result.strict_biased_rate, result.strict_unbiased_rate
    );
    println!("  paired one-sided p:      {:.2e}", result.p_value);

    // The field is too weak to matter on an unambiguous cue.
    let mut check_rng = Rng::from_seed(9);
    let lone = random_pattern(units, &mut check_rng);
    let lone_net = Ca3Network::with_defaults(
        vec![StoredPattern { values: lone.clone(), context: 0 }],
        units,
    )
    .unwrap();
    let clean = lone_net.recall(&lone, 0.1, Some(0), 100, &mut check_rng).unwrap();
    println!(
        "\nsanity: a 10%-corrupted unambiguous cue still recalls its pattern (outcome {:?})",
        clean.outcome
    );
}
