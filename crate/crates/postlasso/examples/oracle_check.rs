//! Validate the conditional sampler against naive rejection sampling on a
//! small problem: draw responses from the unconditioned Gaussian, keep those
//! whose lasso active set matches, and compare every marginal of
//! `(b_A, s_I)` between the two samplers.
//!
//! ```bash
//! cargo run --release --example oracle_check
//! ```

use postlasso::harness::{
    generate_dataset, oracle_mcmc_ks, rejection_oracle, DesignKind, DesignSpec,
};
use postlasso::{fit_lasso, lambda_max, ActiveSetGeometry, DesignContext};

fn main() {
    let spec = DesignSpec {
        kind: DesignKind::Identity,
        n: 5,
        p: 10,
        a0: vec![5, 8],
        beta_range: (-1.0, 1.0),
        sigma2: 1.0,
        seed: 17,
    };
    let data = generate_dataset(&spec).expect("dataset");
    let ctx = DesignContext::new(data.x.clone()).expect("design");
    let lambda = 0.45 * lambda_max(&ctx, &data.y).expect("lambda max");
    let sol = fit_lasso(&ctx, &data.y, lambda).expect("fit");
    assert!(!sol.active.is_empty());
    println!("active set: {:?} at lambda = {lambda:.4}", sol.active);
    let geom = ActiveSetGeometry::new(&ctx, &sol.active).expect("geometry");

    // Plug-in mean: the fitted lasso mean, as in the validation experiment.
    let mu_tilde = ctx.x() * &sol.beta;
    let oracle = rejection_oracle(
        &ctx,
        &mu_tilde,
        spec.sigma2,
        lambda,
        &sol.active,
        10_000,
        3_000_000,
        17,
    )
    .expect("rejection sampling within budget");
    println!(
        "rejection sampling: {} accepted of {} proposals (acceptance {:.2}%)",
        oracle.accepted,
        oracle.proposed,
        100.0 * oracle.acceptance_rate
    );

    let cmp = oracle_mcmc_ks(
        &ctx,
        &geom,
        &sol,
        &mu_tilde,
        spec.sigma2,
        lambda,
        &oracle,
        20_000,
        1000,
        1,
        2.0,
        23,
    )
    .expect("chain");
    println!("MH draws: {}", cmp.mcmc_draws);
    for (i, ks) in cmp.ks_beta.iter().enumerate() {
        println!("  KS  b[{}]  = {ks:.4}", geom.active()[i]);
    }
    for (pos, ks) in cmp.ks_subgradient.iter().enumerate() {
        println!("  KS  s[{}]  = {ks:.4}", geom.inactive()[pos]);
    }
    println!("max KS over all marginals: {:.4}", cmp.max_ks);
    assert!(cmp.max_ks < 0.03, "sampler and oracle should agree");
    println!("MH sampler agrees with the exact rejection draws");
}
