//! Coordinate-wise Metropolis-Hastings over `(b_A, s_F)` targeting the
//! conditional augmented-estimator density for a fixed active set.
//!
//! One sweep updates each active coefficient in ascending index order with a
//! normal proposal, then each free subgradient coordinate with a uniform
//! proposal on its feasible range. A sign-changing coefficient proposal is
//! first checked against the dependent-block box; if it fails, the
//! coordinate is skipped (not counted as a rejection, reported separately).
//! Both proposals are symmetric — the feasible range of a free coordinate
//! does not depend on its current value — so the acceptance ratio is the
//! ratio of target densities.
//!
//! The spectral residual `r` and the dependent block `s_D` are maintained
//! incrementally (rank-one updates per coordinate) and refreshed from
//! scratch periodically to shed accumulated rounding error.

use crate::density::{
    bounds_from_sdep, h_map_with_offset, log_gaussian_factor, resolve_dependent, AugmentedState,
    CONSTRAINT_TOL,
};
use crate::design::DesignContext;
use crate::error::{Error, Result};
use crate::geometry::ActiveSetGeometry;
use crate::lasso::LassoSolution;
use crate::stats::autocorrelation;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Sweeps between full recomputations of the incremental caches.
const REFRESH_INTERVAL: usize = 256;

/// Maximum autocorrelation lag reported in the diagnostics.
const MAX_ACF_LAG: usize = 50;

/// Chain length, thinning, proposal scales, and the RNG seed.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// Total sweeps, including burn-in.
    pub n_iter: usize,
    /// Sweeps discarded before any state is stored.
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    /// Per-active-coordinate normal proposal standard deviations.
    pub tau: DVector<f64>,
    pub seed: u64,
}

impl ChainConfig {
    /// Burn-in 1000, thin 1, default proposal scales, seeded.
    pub fn new(n_keep: usize, tau: DVector<f64>, seed: u64) -> Self {
        Self {
            n_iter: 1000 + n_keep,
            burn_in: 1000,
            thin: 1,
            tau,
            seed,
        }
    }

    fn validate(&self, q: usize) -> Result<()> {
        if self.n_iter <= self.burn_in {
            return Err(Error::InvalidParameter {
                what: format!(
                    "n_iter ({}) must exceed burn_in ({})",
                    self.n_iter, self.burn_in
                ),
            });
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter {
                what: "thin must be at least 1".to_string(),
            });
        }
        if self.tau.len() != q {
            return Err(Error::InvalidParameter {
                what: format!("tau has length {}, expected {q}", self.tau.len()),
            });
        }
        if self.tau.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "all proposal scales must be positive".to_string(),
            });
        }
        Ok(())
    }
}

/// Proposal bookkeeping for one coordinate.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoordinateStats {
    pub proposed: u64,
    pub accepted: u64,
    pub rejected: u64,
    /// Sign-change proposals discarded for infeasibility before any
    /// accept/reject decision (active coefficients only).
    pub skipped: u64,
}

impl CoordinateStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Kept states plus acceptance and mixing diagnostics.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub states: Vec<AugmentedState>,
    pub b_stats: Vec<CoordinateStats>,
    pub s_free_stats: Vec<CoordinateStats>,
    /// Autocorrelation of each kept active-coefficient series, lags
    /// `1..=min(50, len-1)`.
    pub autocorr_b: Vec<Vec<f64>>,
}

impl ChainOutput {
    pub fn acceptance_b(&self) -> Vec<f64> {
        self.b_stats
            .iter()
            .map(CoordinateStats::acceptance_rate)
            .collect()
    }

    pub fn acceptance_s_free(&self) -> Vec<f64> {
        self.s_free_stats
            .iter()
            .map(CoordinateStats::acceptance_rate)
            .collect()
    }
}

/// Builds the chain start from an observed lasso fit: `b_A` and `s_F` are
/// read off the solution, `s_D` is re-derived from the constraint and
/// cross-checked against the observed dependent subgradients.
pub fn default_init(solution: &LassoSolution, geom: &ActiveSetGeometry) -> Result<AugmentedState> {
    if solution.active != geom.active() {
        return Err(Error::InvalidParameter {
            what: "solution active set does not match the geometry".to_string(),
        });
    }
    let s_free = DVector::from_iterator(
        geom.free_size(),
        geom.free_positions()
            .iter()
            .map(|&pos| solution.subgradient[geom.inactive()[pos]]),
    );
    let state = AugmentedState::new(geom, solution.active_beta(), s_free)?;
    let observed = DVector::from_iterator(
        geom.dependent_size(),
        geom.dependent_positions()
            .iter()
            .map(|&pos| solution.subgradient[geom.inactive()[pos]]),
    );
    let tol = 1e-6;
    let max_dev = if geom.dependent_size() > 0 {
        (state.s_dep() - observed).amax()
    } else {
        0.0
    };
    if max_dev > tol {
        return Err(Error::InconsistentSolution { max_dev, tol });
    }
    Ok(state)
}

/// Default proposal scales: twice the unconditional standard error of each
/// least-squares coefficient, `2 sigma sqrt([(X_A'X_A)^{-1}]_ii)`.
pub fn default_tau(geom: &ActiveSetGeometry, sigma2: f64) -> Result<DVector<f64>> {
    default_tau_scaled(geom, sigma2, 2.0)
}

/// Same with an explicit positive multiplier.
pub fn default_tau_scaled(
    geom: &ActiveSetGeometry,
    sigma2: f64,
    multiplier: f64,
) -> Result<DVector<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("sigma2 must be positive, got {sigma2}"),
        });
    }
    if !(multiplier > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("tau multiplier must be positive, got {multiplier}"),
        });
    }
    let diag = geom.xa_gram_inverse_diag();
    Ok(DVector::from_fn(geom.active_size(), |i, _| {
        multiplier * (sigma2 * diag[i]).sqrt()
    }))
}

/// Runs one chain of the sampler targeting
/// `pi(theta | A; mu_tilde, sigma2, lambda)`. Deterministic for a fixed
/// seed; states are recorded after burn-in, every `thin` sweeps.
pub fn run_chain(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    mu_tilde: &DVector<f64>,
    sigma2: f64,
    lambda: f64,
    init: &AugmentedState,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    let q = geom.active_size();
    let n_free = geom.free_size();
    cfg.validate(q)?;
    if !(sigma2 > 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidParameter {
            what: "sigma2 and lambda must be positive".to_string(),
        });
    }
    if mu_tilde.len() != ctx.n() {
        return Err(Error::InvalidParameter {
            what: format!("mu has length {}, expected {}", mu_tilde.len(), ctx.n()),
        });
    }
    if init.b_active().len() != q || init.s_free().len() != n_free {
        return Err(Error::InfeasibleInit {
            reason: "state dimensions do not match the geometry".to_string(),
        });
    }
    if !init.is_feasible() {
        return Err(Error::InfeasibleInit {
            reason: "box constraints violated".to_string(),
        });
    }
    let resid = init.constraint_residual(geom);
    if resid > CONSTRAINT_TOL {
        return Err(Error::InfeasibleInit {
            reason: format!("null-space constraint residual {resid:.3e}"),
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let rho_mu = ctx.v_range().tr_mul(&ctx.xty_over_n(mu_tilde));

    let mut b = init.b_active().clone();
    let mut s_free = init.s_free().clone();
    let mut signs = init.signs();
    let mut s_dep = init.s_dep().clone();
    let mut u = init.u().clone();
    let mut r = h_map_with_offset(
        geom,
        &AugmentedState::from_parts(b.clone(), s_free.clone(), s_dep.clone(), u.clone()),
        &rho_mu,
        lambda,
    );
    let mut log_f = log_gaussian_factor(ctx, &r, sigma2);

    let keep_capacity = (cfg.n_iter - cfg.burn_in).div_ceil(cfg.thin);
    let mut states: Vec<AugmentedState> = Vec::with_capacity(keep_capacity);
    let mut b_stats = vec![CoordinateStats::default(); q];
    let mut s_free_stats = vec![CoordinateStats::default(); n_free];
    let mut kept_b: Vec<Vec<f64>> = vec![Vec::with_capacity(keep_capacity); q];

    let mut r_prop = r.clone();
    let mut s_dep_prop = s_dep.clone();

    for sweep in 1..=cfg.n_iter {
        // Active coefficients.
        for i in 0..q {
            b_stats[i].proposed += 1;
            let step: f64 = rng.sample(StandardNormal);
            let prop = b[i] + cfg.tau[i] * step;
            if prop == 0.0 {
                b_stats[i].skipped += 1;
                continue;
            }
            let new_sign = prop.signum();
            if new_sign != signs[i] {
                let ds = new_sign - signs[i];
                s_dep_prop.copy_from(&s_dep);
                if geom.dependent_size() > 0 {
                    s_dep_prop.axpy(ds, &geom.gdinv_u_mat().column(i), 1.0);
                }
                if s_dep_prop.amax() > 1.0 {
                    b_stats[i].skipped += 1;
                    continue;
                }
                r_prop.copy_from(&r);
                r_prop.axpy(prop - b[i], &geom.p_act().column(i), 1.0);
                r_prop.axpy(lambda * ds, &geom.q_act().column(i), 1.0);
                r_prop.axpy(lambda * ds, &geom.e_act().column(i), 1.0);
                let log_f_prop = log_gaussian_factor(ctx, &r_prop, sigma2);
                if accept(&mut rng, log_f_prop - log_f) {
                    b[i] = prop;
                    signs[i] = new_sign;
                    std::mem::swap(&mut s_dep, &mut s_dep_prop);
                    if geom.dependent_size() > 0 {
                        u.axpy(ds, &geom.u_mat().column(i), 1.0);
                    }
                    std::mem::swap(&mut r, &mut r_prop);
                    log_f = log_f_prop;
                    b_stats[i].accepted += 1;
                } else {
                    b_stats[i].rejected += 1;
                }
            } else {
                r_prop.copy_from(&r);
                r_prop.axpy(prop - b[i], &geom.p_act().column(i), 1.0);
                let log_f_prop = log_gaussian_factor(ctx, &r_prop, sigma2);
                if accept(&mut rng, log_f_prop - log_f) {
                    b[i] = prop;
                    std::mem::swap(&mut r, &mut r_prop);
                    log_f = log_f_prop;
                    b_stats[i].accepted += 1;
                } else {
                    b_stats[i].rejected += 1;
                }
            }
        }

        // Free subgradient coordinates.
        for k in 0..n_free {
            s_free_stats[k].proposed += 1;
            let (lb, ub) = bounds_from_sdep(geom, &s_dep, s_free[k], k)?;
            let v = lb + (ub - lb) * rng.random::<f64>();
            let dv = v - s_free[k];
            r_prop.copy_from(&r);
            r_prop.axpy(lambda * dv, &geom.z_free().column(k), 1.0);
            let log_f_prop = log_gaussian_factor(ctx, &r_prop, sigma2);
            if accept(&mut rng, log_f_prop - log_f) {
                s_free[k] = v;
                if geom.dependent_size() > 0 {
                    s_dep.axpy(-dv, &geom.c_dep().column(k), 1.0);
                }
                std::mem::swap(&mut r, &mut r_prop);
                log_f = log_f_prop;
                s_free_stats[k].accepted += 1;
            } else {
                s_free_stats[k].rejected += 1;
            }
        }

        if sweep % REFRESH_INTERVAL == 0 {
            s_dep = resolve_dependent(geom, &signs, &s_free)?;
            u = geom.u_of_signs(&signs);
            r = h_map_with_offset(
                geom,
                &AugmentedState::from_parts(b.clone(), s_free.clone(), s_dep.clone(), u.clone()),
                &rho_mu,
                lambda,
            );
            log_f = log_gaussian_factor(ctx, &r, sigma2);
        }

        if sweep > cfg.burn_in && (sweep - cfg.burn_in - 1) % cfg.thin == 0 {
            let state =
                AugmentedState::from_parts(b.clone(), s_free.clone(), s_dep.clone(), u.clone());
            debug_assert!(state.is_feasible(), "emitted state must be feasible");
            debug_assert!(
                state.constraint_residual(geom) <= CONSTRAINT_TOL,
                "emitted state must satisfy the null-space constraint"
            );
            for i in 0..q {
                kept_b[i].push(b[i]);
            }
            states.push(state);
        }
    }

    let autocorr_b = kept_b
        .iter()
        .map(|series| {
            let max_lag = MAX_ACF_LAG.min(series.len().saturating_sub(1)).max(1);
            autocorrelation(series, max_lag)
        })
        .collect();

    Ok(ChainOutput {
        states,
        b_stats,
        s_free_stats,
        autocorr_b,
    })
}

fn accept<R: Rng>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < log_ratio
}
