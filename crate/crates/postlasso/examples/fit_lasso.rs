//! Fit the weighted lasso, inspect the exact subgradient, and tune the
//! penalty: a fixed value, the descending grid, and cross-validation with
//! the one-standard-error rule.
//!
//! ```bash
//! cargo run --release --example fit_lasso
//! ```

use postlasso::harness::{a0_contiguous, generate_dataset, DesignKind, DesignSpec};
use postlasso::{cv_lambda_1se, fit_lasso, lambda_grid, DesignContext};

fn main() {
    let spec = DesignSpec {
        kind: DesignKind::Toeplitz,
        n: 50,
        p: 100,
        a0: a0_contiguous(5),
        beta_range: (-1.0, 1.0),
        sigma2: 1.0,
        seed: 42,
    };
    let data = generate_dataset(&spec).expect("dataset");
    let ctx = DesignContext::new(data.x.clone()).expect("full-rank design");

    let grid = lambda_grid(&ctx, &data.y, 20).expect("grid");
    println!(
        "lambda grid: {:.4} down to {:.4} in {} steps",
        grid[0],
        grid[grid.len() - 1],
        grid.len()
    );

    let lambda = cv_lambda_1se(&ctx, &data.y, 10, &grid, 7).expect("cv");
    let index = grid.iter().position(|&l| l == lambda).unwrap();
    println!("cv 1-SE rule picked lambda = {lambda:.4} (grid index {index})");

    let sol = fit_lasso(&ctx, &data.y, lambda).expect("fit");
    println!(
        "active set ({} of {}): {:?}",
        sol.active.len(),
        ctx.p(),
        sol.active
    );
    println!("KKT residual: {:.3e}", sol.kkt_residual);
    for &j in &sol.active {
        let hit = if data.beta0[j] != 0.0 {
            "true signal"
        } else {
            "false positive"
        };
        println!(
            "  beta[{j:>3}] = {:+.4}  subgradient {:+.1}  ({hit})",
            sol.beta[j], sol.subgradient[j]
        );
    }
    let max_inactive = sol
        .subgradient
        .iter()
        .enumerate()
        .filter(|(j, _)| !sol.active.contains(j))
        .map(|(_, s)| s.abs())
        .fold(0.0f64, f64::max);
    println!("largest inactive |subgradient|: {max_inactive:.4} (must be <= 1)");
}
