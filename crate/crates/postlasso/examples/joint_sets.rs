//! Joint confidence sets for projections of `nu`: pairwise sets for the
//! first few pairs and the full joint set with `H = I`, in both the
//! Euclidean and max norms.
//!
//! ```bash
//! cargo run --release --example joint_sets
//! ```

use nalgebra::{DMatrix, DVector};
use postlasso::harness::{a0_contiguous, generate_dataset, DesignKind, DesignSpec};
use postlasso::{
    build_set, cv_lambda_1se, lambda_grid, run_algorithm1, DesignContext, NormDelta, SamplingPlan,
};

fn main() {
    let spec = DesignSpec {
        kind: DesignKind::Toeplitz,
        n: 100,
        p: 200,
        a0: a0_contiguous(5),
        beta_range: (-1.0, 1.0),
        sigma2: 1.0,
        seed: 31,
    };
    let data = generate_dataset(&spec).expect("dataset");
    let ctx = DesignContext::new(data.x.clone()).expect("design");
    let grid = lambda_grid(&ctx, &data.y, 20).expect("grid");
    let lambda = cv_lambda_1se(&ctx, &data.y, 10, &grid, 3).expect("cv");

    let plan = SamplingPlan {
        seed: 1234,
        ..SamplingPlan::default()
    };
    let out = run_algorithm1(&ctx, &data.y, lambda, spec.sigma2, 0.05, &plan).expect("pipeline");
    let geom = &out.geometry;
    let q = geom.active_size();
    let nu_true = geom.project_onto_active(&data.mu0);
    println!("selected {:?} at lambda = {lambda:.4}", geom.active());

    println!("\npairwise sets (first three pairs):");
    let mut shown = 0;
    'outer: for i in 0..q {
        for j in (i + 1)..q {
            let mut h = DMatrix::zeros(2, q);
            h[(0, i)] = 1.0;
            h[(1, j)] = 1.0;
            let target = DVector::from_column_slice(&[nu_true[i], nu_true[j]]);
            for delta in [NormDelta::L2, NormDelta::LInf] {
                let set = build_set(&out.draws, &out.ellipsoid, &h, delta, 0.05).unwrap();
                println!(
                    "  (nu_{}, nu_{})  {:?}: radius {:.3}, diameter {:.3}, volume {:.3}, covers truth: {}",
                    geom.active()[i],
                    geom.active()[j],
                    delta,
                    set.radius,
                    set.diameter,
                    set.volume,
                    set.covers(&target)
                );
            }
            shown += 1;
            if shown >= 3 {
                break 'outer;
            }
        }
    }

    println!("\njoint set over all {q} selected coordinates:");
    let h = DMatrix::identity(q, q);
    for delta in [NormDelta::L2, NormDelta::LInf] {
        let set = build_set(&out.draws, &out.ellipsoid, &h, delta, 0.05).unwrap();
        let volume_star = (set.log_volume / q as f64).exp();
        println!(
            "  {:?}: radius {:.3}, diameter {:.3}, normalized volume {:.3}, covers truth: {}, excludes 0: {}",
            delta,
            set.radius,
            set.diameter,
            volume_star,
            set.covers(&nu_true),
            !set.covers(&DVector::zeros(q))
        );
    }
}
