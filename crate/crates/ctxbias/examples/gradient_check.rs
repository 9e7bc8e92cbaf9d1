//! Verify backpropagation against central finite differences.
//!
//! Twenty random small models (half with a context-bias layer) are built and
//! every parameter entry's analytic gradient is compared to the numerical
//! one. Exits nonzero on failure, like the `ctxbias gradcheck` subcommand.
//!
//! Run with: `cargo run --example gradient_check`

use ctxbias::experiment::gradcheck::{run_gradcheck, GradCheckConfig};

fn main() {
    let report = run_gradcheck(&GradCheckConfig::default()).unwrap();
    println!("{}", report.summary());
    println!(
        "worst entry came from model {} of {}",
        report.worst_model, report.models_checked
    );
    if !report.passed() {
        std::process::exit(1);
    }
}
