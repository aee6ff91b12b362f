//! Coverage of the randomized interval across the whole penalty grid:
//! sweep 20 equally spaced lambda values on a few datasets and print
//! coverage and model size against the grid index.
//!
//! ```bash
//! cargo run --release --example lambda_sensitivity
//! ```

use postlasso::harness::config::ExperimentConfig;
use postlasso::harness::runner::run_experiment;

fn main() {
    let cfg = ExperimentConfig::from_toml(
        r#"
mode = "sensitivity"
design = "toeplitz"
n = 50
p = 100
a0_size = 5
replicates = 4
seed = 7
grid_count = 20
k_boundary = 10
n_keep = 250
burn_in = 500
verify_fraction = 0.002
"#,
    )
    .expect("config");
    let out = run_experiment(&cfg).expect("experiment");
    println!("index   mean |A|   coverage   pairs");
    for pt in &out.report.lambda_series {
        match pt.coverage {
            Some(c) => println!(
                "{:>5}   {:>8.1}   {:>8.3}   {:>5}",
                pt.lambda_index, pt.mean_active_size, c, pt.n_pairs
            ),
            None => println!(
                "{:>5}   {:>8.1}       (no selected variables)",
                pt.lambda_index, pt.mean_active_size
            ),
        }
    }
    println!("\n(lambda decreases with the index, so the active set grows to the right)");
}
