//! Build all four post-selection confidence intervals on one dataset —
//! oracle (true mean, benchmark only), plug-in, randomized, and
//! conservative — and compare them against the true projected coefficients.
//!
//! ```bash
//! cargo run --release --example randomized_intervals
//! ```

use postlasso::harness::{a0_contiguous, generate_dataset, DesignKind, DesignSpec};
use postlasso::inference::conditional_draws_at;
use postlasso::{
    build_interval_conservative, build_interval_oracle, build_interval_plugin, cv_lambda_1se,
    lambda_grid, run_algorithm1, DesignContext, SamplingPlan,
};

fn main() {
    let spec = DesignSpec {
        kind: DesignKind::Identity,
        n: 50,
        p: 100,
        a0: a0_contiguous(5),
        beta_range: (-1.0, 1.0),
        sigma2: 1.0,
        seed: 2024,
    };
    let data = generate_dataset(&spec).expect("dataset");
    let ctx = DesignContext::new(data.x.clone()).expect("design");
    let grid = lambda_grid(&ctx, &data.y, 20).expect("grid");
    // Take the cross-validated penalty, capped so the demo keeps a handful
    // of coordinates on the table.
    let lambda = cv_lambda_1se(&ctx, &data.y, 10, &grid, 5).expect("cv").min(grid[12]);

    let alpha = 0.05;
    let plan = SamplingPlan {
        boundary_points: 20,
        draws_per_point: 500,
        seed: 99,
        ..SamplingPlan::default()
    };
    let out = run_algorithm1(&ctx, &data.y, lambda, spec.sigma2, alpha, &plan).expect("pipeline");
    let geom = &out.geometry;
    let nu_true = geom.project_onto_active(&data.mu0);
    println!(
        "lambda = {lambda:.4}; selected {:?}; pooled draws = {}",
        geom.active(),
        out.draws.len()
    );

    // Single-mean chains for the plug-in and oracle benchmarks.
    let total = plan.boundary_points * plan.draws_per_point;
    let (plugin_draws, _) = conditional_draws_at(
        &ctx,
        geom,
        &out.solution,
        out.ellipsoid.mu_hat(),
        spec.sigma2,
        lambda,
        total,
        &plan,
        0,
        7,
    )
    .expect("plug-in chain");
    let (oracle_draws, _) = conditional_draws_at(
        &ctx,
        geom,
        &out.solution,
        &data.mu0,
        spec.sigma2,
        lambda,
        total,
        &plan,
        0,
        8,
    )
    .expect("oracle chain");

    println!("\n  j   truth     oracle              plugin              randomized          conservative");
    for j in 0..geom.active_size() {
        let o = build_interval_oracle(&oracle_draws, &out.ellipsoid, &nu_true, j, alpha).unwrap();
        let p = build_interval_plugin(&plugin_draws, &out.ellipsoid, j, alpha).unwrap();
        let r = &out.intervals[j];
        let c = build_interval_conservative(&out.draws, &out.ellipsoid, j, alpha).unwrap();
        let mark = |covered: bool| if covered { ' ' } else { '!' };
        println!(
            "{:>3}  {:+.3}  [{:+.2},{:+.2}]{} [{:+.2},{:+.2}]{} [{:+.2},{:+.2}]{} [{:+.2},{:+.2}]{}",
            geom.active()[j],
            nu_true[j],
            o.lower, o.upper, mark(o.covers(nu_true[j])),
            p.lower, p.upper, mark(p.covers(nu_true[j])),
            r.lower, r.upper, mark(r.covers(nu_true[j])),
            c.lower, c.upper, mark(c.covers(nu_true[j])),
        );
        assert!(
            c.lower <= r.lower && r.upper <= c.upper,
            "conservative contains randomized"
        );
    }
    println!(
        "\n('!' marks an interval missing the truth; conservative always contains randomized)"
    );
}
