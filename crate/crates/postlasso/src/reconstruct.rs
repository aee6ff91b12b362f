//! Mapping augmented states back to response space.
//!
//! For `p >= n` with full row rank, the KKT system is a bijection between
//! `y` and the augmented estimator, so every sampled state corresponds to
//! exactly one response `y* = X_A b_A + n lambda (X')^+ {W_A sign(b_A) +
//! W_I s_I}`. Its projection onto the selected columns has the closed form
//! `nu* = b_A + n lambda (X_A'X_A)^{-1} W_AA sign(b_A)`, which holds for
//! any `p` and is what interval and set construction consume.

use crate::density::AugmentedState;
use crate::design::DesignContext;
use crate::error::{Error, Result};
use crate::geometry::ActiveSetGeometry;
use crate::lasso::{fit_lasso_with, LassoOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// How thoroughly reconstructed draws are re-verified by refitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerifyMode {
    Off,
    /// Refit a random fraction of draws (default 0.01).
    Fraction(f64),
    /// Refit every draw.
    Full,
}

impl Default for VerifyMode {
    fn default() -> Self {
        VerifyMode::Fraction(0.01)
    }
}

/// Conditioned draws in coefficient space, tagged by the randomization index
/// `k` of the plug-in mean that generated them.
#[derive(Clone)]
pub struct ConditionedDraws {
    /// One row per draw: `nu* = X_A^+ y*`.
    nu_star: DMatrix<f64>,
    /// Reconstructed responses, stored only on request.
    y_star: Option<DMatrix<f64>>,
    k_index: Vec<usize>,
    /// Draws refitted during construction (verification bookkeeping).
    verified: usize,
}

impl std::fmt::Debug for ConditionedDraws {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConditionedDraws")
            .field("len", &self.len())
            .field("dim", &self.dim())
            .field("stores_y", &self.y_star.is_some())
            .field("verified", &self.verified)
            .finish()
    }
}

impl ConditionedDraws {
    pub(crate) fn from_raw(
        nu_star: DMatrix<f64>,
        y_star: Option<DMatrix<f64>>,
        k_index: Vec<usize>,
    ) -> Self {
        Self {
            nu_star,
            y_star,
            k_index,
            verified: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nu_star.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Active-set size `q`.
    pub fn dim(&self) -> usize {
        self.nu_star.ncols()
    }

    pub fn nu_star(&self) -> &DMatrix<f64> {
        &self.nu_star
    }

    pub fn y_star(&self) -> Option<&DMatrix<f64>> {
        self.y_star.as_ref()
    }

    pub fn k_index(&self) -> &[usize] {
        &self.k_index
    }

    pub fn verified(&self) -> usize {
        self.verified
    }

    /// Column `j` of `nu*` as a plain vector.
    pub fn nu_column(&self, j: usize) -> Vec<f64> {
        self.nu_star.column(j).iter().copied().collect()
    }

    /// Row indices belonging to randomization index `k`.
    pub fn rows_for_k(&self, k: usize) -> Vec<usize> {
        self.k_index
            .iter()
            .enumerate()
            .filter(|(_, &ki)| ki == k)
            .map(|(i, _)| i)
            .collect()
    }

    /// Distinct randomization indices, ascending.
    pub fn k_values(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.k_index.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// Reconstructs the response for a feasible state:
/// `y* = X_A b_A + n lambda (X')^+ (W_A sign(b_A) + W_I s_I)`.
///
/// Requires `p >= n` (the regime where the KKT map is a bijection).
pub fn reconstruct_y(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    state: &AugmentedState,
    lambda: f64,
) -> Result<DVector<f64>> {
    if ctx.p() < ctx.n() {
        return Err(Error::InvalidParameter {
            what: "response reconstruction requires p >= n".to_string(),
        });
    }
    let w = ctx.weights();
    let s_full = state.full_subgradient(geom);
    let ws = DVector::from_fn(ctx.p(), |j, _| w[j] * s_full[j]);
    let mut y = geom.xa() * state.b_active();
    y += ctx.xt_pinv() * ws * (ctx.n() as f64 * lambda);
    Ok(y)
}

/// Projects a state onto the selected coefficients without touching response
/// space: `nu* = b_A + n lambda (X_A'X_A)^{-1} W_AA sign(b_A)`.
pub fn project_nu(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    state: &AugmentedState,
    lambda: f64,
) -> DVector<f64> {
    let w = ctx.weights();
    let rhs = DVector::from_fn(geom.active_size(), |i, _| {
        w[geom.active()[i]] * state.b_active()[i].signum()
    });
    let correction = geom.xa_gram_solve(&rhs) * (ctx.n() as f64 * lambda);
    state.b_active() + correction
}

/// Builds [`ConditionedDraws`] from per-chain state slices.
///
/// `groups` pairs each randomization index `k` with the states its chain
/// emitted. With `verify` on, a seeded subset (or all) of the draws is
/// reconstructed, refitted at the same `lambda`, and required to reproduce
/// the active set and signs — the defining conditioning event.
pub fn draws_from_states(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    lambda: f64,
    groups: &[(usize, &[AugmentedState])],
    store_y: bool,
    verify: VerifyMode,
    verify_seed: u64,
) -> Result<ConditionedDraws> {
    let total: usize = groups.iter().map(|(_, s)| s.len()).sum();
    let q = geom.active_size();
    if (store_y || verify != VerifyMode::Off) && ctx.p() < ctx.n() {
        return Err(Error::InvalidParameter {
            what: "storing or verifying y* requires p >= n".to_string(),
        });
    }
    let mut nu_star = DMatrix::zeros(total, q);
    let mut y_star = if store_y {
        Some(DMatrix::zeros(total, ctx.n()))
    } else {
        None
    };
    let mut k_index = Vec::with_capacity(total);
    let mut rng = ChaCha12Rng::seed_from_u64(verify_seed);
    let mut verified = 0usize;
    let mut row = 0usize;
    for &(k, states) in groups {
        for state in states {
            let nu = project_nu(ctx, geom, state, lambda);
            nu_star.row_mut(row).copy_from(&nu.transpose());
            let need_y = store_y || verify != VerifyMode::Off;
            let y = if need_y {
                Some(reconstruct_y(ctx, geom, state, lambda)?)
            } else {
                None
            };
            if let (Some(buf), Some(y)) = (y_star.as_mut(), y.as_ref()) {
                buf.row_mut(row).copy_from(&y.transpose());
            }
            let check = match verify {
                VerifyMode::Off => false,
                VerifyMode::Full => true,
                VerifyMode::Fraction(f) => rng.random::<f64>() < f,
            };
            if check {
                verify_draw(ctx, geom, state, y.as_ref().expect("y computed"), lambda)?;
                verified += 1;
            }
            k_index.push(k);
            row += 1;
        }
    }
    Ok(ConditionedDraws {
        nu_star,
        y_star,
        k_index,
        verified,
    })
}

/// Refits the lasso on a reconstructed response and demands the same active
/// set and signs.
pub fn verify_draw(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    state: &AugmentedState,
    y_star: &DVector<f64>,
    lambda: f64,
) -> Result<()> {
    let warm = state.full_beta(geom);
    let refit = fit_lasso_with(ctx, y_star, lambda, LassoOptions::default(), Some(&warm))?;
    if refit.active != geom.active() {
        return Err(Error::Numerical {
            what: format!(
                "reconstructed draw refits to active set {:?}, expected {:?}",
                refit.active,
                geom.active()
            ),
        });
    }
    for (i, &j) in geom.active().iter().enumerate() {
        if refit.beta[j].signum() != state.b_active()[i].signum() {
            return Err(Error::Numerical {
                what: format!("reconstructed draw flips the sign of coefficient {j}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::{fit_lasso, lambda_max};
    use crate::sampler::{default_init, default_tau, run_chain, ChainConfig};
    use crate::testutil::{gaussian_matrix, gaussian_vector};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fitted(
        seed: u64,
    ) -> (
        DesignContext,
        DVector<f64>,
        ActiveSetGeometry,
        AugmentedState,
        f64,
    ) {
        let x = gaussian_matrix(5, 10, seed);
        let y = gaussian_vector(5, seed + 500);
        let ctx = DesignContext::new(x).unwrap();
        let lambda = 0.35 * lambda_max(&ctx, &y).unwrap();
        let sol = fit_lasso(&ctx, &y, lambda).unwrap();
        assert!(!sol.active.is_empty());
        let geom = ActiveSetGeometry::new(&ctx, &sol.active).unwrap();
        let init = default_init(&sol, &geom).unwrap();
        (ctx, y, geom, init, lambda)
    }

    #[test]
    fn observed_fit_reconstructs_the_original_response() {
        for seed in [1u64, 2, 3, 4] {
            let (ctx, y, geom, state, lambda) = fitted(seed);
            let y_star = reconstruct_y(&ctx, &geom, &state, lambda).unwrap();
            assert!(
                (y_star - &y).amax() <= 1e-8,
                "KKT inversion must round-trip the observed response"
            );
        }
    }

    #[test]
    fn projection_agrees_with_full_reconstruction() {
        let (ctx, y, geom, init, lambda) = fitted(5);
        let tau = default_tau(&geom, 1.0).unwrap();
        let cfg = ChainConfig {
            n_iter: 1100,
            burn_in: 100,
            thin: 1,
            tau,
            seed: 9,
        };
        let out = run_chain(&ctx, &geom, &y, 1.0, lambda, &init, &cfg).unwrap();
        assert_eq!(out.states.len(), 1000);
        for state in &out.states {
            let nu = project_nu(&ctx, &geom, state, lambda);
            let y_star = reconstruct_y(&ctx, &geom, state, lambda).unwrap();
            let via_y = geom.project_onto_active(&y_star);
            assert!((nu - via_y).amax() <= 1e-8);
        }
    }

    #[test]
    fn univariate_projection_is_the_debiased_soft_threshold() {
        // ||X_1||^2 = n: nu* = b + lambda sign(b).
        let n = 25;
        let x = nalgebra::DMatrix::from_element(n, 1, 1.0);
        let ctx = DesignContext::new(x).unwrap();
        let geom = ActiveSetGeometry::new(&ctx, &[0]).unwrap();
        let lambda = 0.3;
        let state =
            AugmentedState::new(&geom, DVector::from_element(1, 0.5), DVector::zeros(0)).unwrap();
        let nu = project_nu(&ctx, &geom, &state, lambda);
        assert_abs_diff_eq!(nu[0], 0.8, epsilon = 1e-12);

        let neg =
            AugmentedState::new(&geom, DVector::from_element(1, -0.2), DVector::zeros(0)).unwrap();
        let nu_neg = project_nu(&ctx, &geom, &neg, lambda);
        assert_abs_diff_eq!(nu_neg[0], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn projection_approaches_the_coefficients_as_lambda_vanishes() {
        let (ctx, _, geom, state, _) = fitted(6);
        let nu = project_nu(&ctx, &geom, &state, 1e-14);
        assert!((nu - state.b_active()).amax() < 1e-10);
    }

    #[test]
    fn chain_draws_refit_to_the_same_active_set_and_signs() {
        let (ctx, y, geom, init, lambda) = fitted(7);
        let tau = default_tau(&geom, 1.0).unwrap();
        let cfg = ChainConfig {
            n_iter: 700,
            burn_in: 200,
            thin: 1,
            tau,
            seed: 13,
        };
        let out = run_chain(&ctx, &geom, &y, 1.0, lambda, &init, &cfg).unwrap();
        let draws = draws_from_states(
            &ctx,
            &geom,
            lambda,
            &[(0, out.states.as_slice())],
            true,
            VerifyMode::Full,
            1,
        )
        .unwrap();
        assert_eq!(draws.len(), 500);
        assert_eq!(draws.verified(), 500);
        assert!(draws.y_star().is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bijection_round_trips_arbitrary_gaussian_responses(seed in 0u64..5000) {
            let x = gaussian_matrix(4, 9, seed.wrapping_mul(31).wrapping_add(7));
            let y = gaussian_vector(4, seed.wrapping_mul(17).wrapping_add(3)) * 2.0;
            let ctx = DesignContext::new(x).unwrap();
            let lmax = lambda_max(&ctx, &y).unwrap();
            let sol = fit_lasso(&ctx, &y, 0.4 * lmax).unwrap();
            prop_assume!(!sol.active.is_empty());
            let geom = ActiveSetGeometry::new(&ctx, &sol.active).unwrap();
            let state = default_init(&sol, &geom).unwrap();
            let y_star = reconstruct_y(&ctx, &geom, &state, 0.4 * lmax).unwrap();
            prop_assert!((y_star - &y).amax() <= 1e-8);
        }
    }
}
