//! The estimator-augmentation map `H`, the conditional target density on
//! `(b_A, s_F)` given the active set, feasibility checks, dependent
//! subgradient resolution, and per-coordinate proposal bounds.
//!
//! With the active set fixed, the KKT system inverts to
//! `U = Psi bhat + lambda W S - X'mu/n`, and in the spectral coordinates
//! `r = V_R' U` the density is Gaussian with diagonal covariance
//! `sigma^2 Lambda / n`. A state is feasible when the free and dependent
//! subgradient blocks both sit inside the unit box and the null-space
//! constraint ties `s_D` to `(sign(b_A), s_F)`.

use crate::design::DesignContext;
use crate::error::{Error, Result};
use crate::geometry::ActiveSetGeometry;
use nalgebra::DVector;

/// Box slack used by feasibility checks; substituting any value inside the
/// proposal bounds keeps `||s_D||_inf <= 1 + FEASIBILITY_TOL`.
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Tolerance on the null-space constraint residual `||G s_I - u||_inf`.
pub const CONSTRAINT_TOL: f64 = 1e-8;

/// A point `theta = (b_A, s_F)` together with the derived dependent block
/// and the cached constraint offset `u(s_A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    b_active: DVector<f64>,
    s_free: DVector<f64>,
    s_dep: DVector<f64>,
    u: DVector<f64>,
}

impl AugmentedState {
    /// Builds a state from the free coordinates, deriving `s_D` and `u`.
    /// Fails if any active coefficient is exactly zero or dimensions do not
    /// match the geometry. Feasibility of the boxes is not enforced here;
    /// use [`AugmentedState::is_feasible`].
    pub fn new(
        geom: &ActiveSetGeometry,
        b_active: DVector<f64>,
        s_free: DVector<f64>,
    ) -> Result<Self> {
        if b_active.len() != geom.active_size() {
            return Err(Error::InvalidParameter {
                what: format!(
                    "b_active has length {}, expected {}",
                    b_active.len(),
                    geom.active_size()
                ),
            });
        }
        if s_free.len() != geom.free_size() {
            return Err(Error::InvalidParameter {
                what: format!(
                    "s_free has length {}, expected {}",
                    s_free.len(),
                    geom.free_size()
                ),
            });
        }
        if b_active.iter().any(|&b| b == 0.0 || !b.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "active coefficients must be nonzero and finite".to_string(),
            });
        }
        let signs = DVector::from_fn(b_active.len(), |i, _| b_active[i].signum());
        let u = geom.u_of_signs(&signs);
        let s_dep = resolve_dependent(geom, &signs, &s_free)?;
        Ok(Self {
            b_active,
            s_free,
            s_dep,
            u,
        })
    }

    /// Assembles a state from already-resolved parts (used by the sampler,
    /// which maintains `s_D` and `u` incrementally).
    pub(crate) fn from_parts(
        b_active: DVector<f64>,
        s_free: DVector<f64>,
        s_dep: DVector<f64>,
        u: DVector<f64>,
    ) -> Self {
        Self {
            b_active,
            s_free,
            s_dep,
            u,
        }
    }

    pub fn b_active(&self) -> &DVector<f64> {
        &self.b_active
    }

    pub fn s_free(&self) -> &DVector<f64> {
        &self.s_free
    }

    pub fn s_dep(&self) -> &DVector<f64> {
        &self.s_dep
    }

    /// Cached `u(s_A) = -V_AN' W_AA sign(b_A)`.
    pub fn u(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn signs(&self) -> DVector<f64> {
        DVector::from_fn(self.b_active.len(), |i, _| self.b_active[i].signum())
    }

    /// The inactive subgradient `s_I` assembled in inactive order.
    pub fn s_inactive(&self, geom: &ActiveSetGeometry) -> DVector<f64> {
        let mut s = DVector::zeros(geom.inactive().len());
        for (k, &pos) in geom.free_positions().iter().enumerate() {
            s[pos] = self.s_free[k];
        }
        for (k, &pos) in geom.dependent_positions().iter().enumerate() {
            s[pos] = self.s_dep[k];
        }
        s
    }

    /// Full coefficient vector with `b_A` scattered onto the active set.
    pub fn full_beta(&self, geom: &ActiveSetGeometry) -> DVector<f64> {
        let mut beta = DVector::zeros(geom.p());
        for (k, &j) in geom.active().iter().enumerate() {
            beta[j] = self.b_active[k];
        }
        beta
    }

    /// Full subgradient vector `S` with signs on `A` and `s_I` elsewhere.
    pub fn full_subgradient(&self, geom: &ActiveSetGeometry) -> DVector<f64> {
        let mut s = DVector::zeros(geom.p());
        for (k, &j) in geom.active().iter().enumerate() {
            s[j] = self.b_active[k].signum();
        }
        let s_i = self.s_inactive(geom);
        for (k, &j) in geom.inactive().iter().enumerate() {
            s[j] = s_i[k];
        }
        s
    }

    /// Checks the box constraints `||s_F||_inf <= 1` and `||s_D||_inf <= 1`
    /// (to `FEASIBILITY_TOL`) and that no active coefficient is zero.
    pub fn is_feasible(&self) -> bool {
        let bound = 1.0 + FEASIBILITY_TOL;
        self.b_active.iter().all(|&b| b != 0.0 && b.is_finite())
            && self.s_free.iter().all(|&s| s.abs() <= bound)
            && self.s_dep.iter().all(|&s| s.abs() <= bound)
    }

    /// `||G s_I - u||_inf`, which vanishes for states built through
    /// [`resolve_dependent`].
    pub fn constraint_residual(&self, geom: &ActiveSetGeometry) -> f64 {
        if geom.dependent_size() == 0 {
            return 0.0;
        }
        let resid = geom.g() * self.s_inactive(geom) - &self.u;
        resid.amax()
    }
}

/// Solves the null-space constraint for the dependent block:
/// `s_D = G_D^{-1} (u(s_A) - G_F s_F)`.
///
/// Entries of `s_A` must be +-1. The unit-box constraint on the result is
/// deliberately not checked here; feasibility is the caller's concern.
pub fn resolve_dependent(
    geom: &ActiveSetGeometry,
    s_a: &DVector<f64>,
    s_free: &DVector<f64>,
) -> Result<DVector<f64>> {
    if s_a.len() != geom.active_size() {
        return Err(Error::InvalidParameter {
            what: format!(
                "s_A has length {}, expected {}",
                s_a.len(),
                geom.active_size()
            ),
        });
    }
    if s_free.len() != geom.free_size() {
        return Err(Error::InvalidParameter {
            what: format!(
                "s_F has length {}, expected {}",
                s_free.len(),
                geom.free_size()
            ),
        });
    }
    if s_a.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::InvalidParameter {
            what: "s_A entries must be +1 or -1".to_string(),
        });
    }
    if geom.dependent_size() == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut s_dep = geom.gdinv_u_mat() * s_a;
    if geom.free_size() > 0 {
        s_dep -= geom.c_dep() * s_free;
    }
    Ok(s_dep)
}

/// The augmentation map in spectral coordinates:
/// `r = V_R' (Psi bhat + lambda W S - X' mu / n)`, an `m`-vector.
pub fn h_map(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    state: &AugmentedState,
    mu: &DVector<f64>,
    lambda: f64,
) -> DVector<f64> {
    let rho_mu = ctx.v_range().tr_mul(&ctx.xty_over_n(mu));
    h_map_with_offset(geom, state, &rho_mu, lambda)
}

/// Same as [`h_map`] with `V_R' X' mu / n` precomputed (fixed per chain).
pub(crate) fn h_map_with_offset(
    geom: &ActiveSetGeometry,
    state: &AugmentedState,
    rho_mu: &DVector<f64>,
    lambda: f64,
) -> DVector<f64> {
    let signs = state.signs();
    let mut r = geom.p_act() * state.b_active();
    r += geom.q_act() * signs * lambda;
    if geom.free_size() > 0 {
        r += geom.q_free() * state.s_free() * lambda;
    }
    if geom.dependent_size() > 0 {
        r += geom.q_dep() * state.s_dep() * lambda;
    }
    r -= rho_mu;
    r
}

/// Log of the Gaussian factor in the `r` coordinates, up to a constant:
/// `-(n / 2 sigma^2) * sum_i r_i^2 / Lambda_i`.
pub(crate) fn log_gaussian_factor(ctx: &DesignContext, r: &DVector<f64>, sigma2: f64) -> f64 {
    let lam = ctx.lambda_spectrum();
    let mut sum = 0.0;
    for i in 0..r.len() {
        sum += r[i] * r[i] / lam[i];
    }
    -(ctx.n() as f64) / (2.0 * sigma2) * sum
}

/// Unnormalized log of the conditional target density
/// `pi(theta | A; mu, sigma^2, lambda)`; `-inf` for infeasible states.
pub fn log_density(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    state: &AugmentedState,
    mu: &DVector<f64>,
    sigma2: f64,
    lambda: f64,
) -> f64 {
    if !state.is_feasible() {
        return f64::NEG_INFINITY;
    }
    let r = h_map(ctx, geom, state, mu, lambda);
    log_gaussian_factor(ctx, &r, sigma2)
}

/// Feasible range `[LB_k, UB_k]` for free coordinate `k`, holding `s_A` and
/// the other free coordinates fixed.
///
/// Each dependent row `j` imposes `-1 <= w_j - M_jk v <= 1`, where
/// `M = G_D^{-1} G_F` and `w = G_D^{-1} u - M_{,-k} (s_F)_{-k}`. Rows with a
/// negative coefficient swap the roles of the +-1 bounds, and rows with a
/// zero coefficient impose nothing. The result is intersected with the unit
/// box.
pub fn proposal_bounds(
    geom: &ActiveSetGeometry,
    s_a: &DVector<f64>,
    s_free: &DVector<f64>,
    k: usize,
) -> Result<(f64, f64)> {
    if k >= geom.free_size() {
        return Err(Error::InvalidParameter {
            what: format!(
                "free coordinate {k} out of range (|F| = {})",
                geom.free_size()
            ),
        });
    }
    let s_dep = resolve_dependent(geom, s_a, s_free)?;
    bounds_from_sdep(geom, &s_dep, s_free[k], k)
}

/// Bounds computation shared with the sampler, reusing the current `s_D`:
/// `w_j = (s_D)_j + M_jk (s_F)_k`.
pub(crate) fn bounds_from_sdep(
    geom: &ActiveSetGeometry,
    s_dep: &DVector<f64>,
    v_current: f64,
    k: usize,
) -> Result<(f64, f64)> {
    let mut lb = -1.0f64;
    let mut ub = 1.0f64;
    let c = geom.c_dep();
    for j in 0..geom.dependent_size() {
        let m_jk = c[(j, k)];
        if m_jk == 0.0 {
            continue;
        }
        let w_j = s_dep[j] + m_jk * v_current;
        let (lo, hi) = if m_jk > 0.0 {
            ((w_j - 1.0) / m_jk, (w_j + 1.0) / m_jk)
        } else {
            ((w_j + 1.0) / m_jk, (w_j - 1.0) / m_jk)
        };
        lb = lb.max(lo);
        ub = ub.min(hi);
    }
    if !(lb < ub) {
        return Err(Error::EmptyRange { coord: k, lb, ub });
    }
    Ok((lb, ub))
}
