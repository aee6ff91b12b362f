//! A desk-scale coverage experiment comparing the four interval variants
//! across replicated datasets, the same protocol behind the `simulate`
//! subcommand. Writes nothing; prints the aggregated report.
//!
//! ```bash
//! cargo run --release --example coverage_experiment
//! ```

use postlasso::harness::config::ExperimentConfig;
use postlasso::harness::runner::run_experiment;

fn main() {
    let cfg = ExperimentConfig::from_toml(
        r#"
mode = "intervals"
design = "identity"
n = 50
p = 100
a0_size = 5
replicates = 8
seed = 1
lambda = "cv1se"
variants = ["oracle", "plugin", "randomized", "conservative"]
k_boundary = 20
n_keep = 250
burn_in = 500
"#,
    )
    .expect("config");
    let out = run_experiment(&cfg).expect("experiment");
    let report = &out.report;
    println!(
        "{} replicates completed ({} requested)\n",
        report.completed, report.replicates
    );
    println!("variant        cover(A)  cover(tp)  cover(fp)  power(tp)  mean length");
    for name in ["oracle", "plugin", "randomized", "conservative"] {
        if let Some(m) = report.variants.get(name) {
            println!(
                "{name:<13} {:>8.3}  {:>8.3}  {:>8.3}  {:>8.3}  {:>10.3}",
                m.coverage_a, m.coverage_tp, m.coverage_fp, m.power_tp, m.mean_length_pooled
            );
        }
    }
    println!("\nper-dataset coverage (randomized vs plugin):");
    for ds in &report.per_dataset {
        let r = ds.coverage.get("randomized").copied().unwrap_or(f64::NAN);
        let p = ds.coverage.get("plugin").copied().unwrap_or(f64::NAN);
        println!(
            "  dataset {:>2}: |A| = {:>2}, randomized {:.3}, plugin {:.3}",
            ds.dataset_id, ds.active_size, r, p
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
}
