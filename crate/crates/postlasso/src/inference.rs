//! Confidence machinery: the unconditional ellipsoid for the mean, uniform
//! boundary sampling, the four interval variants (oracle, plug-in,
//! randomized, conservative), and joint `l_delta` confidence sets.
//!
//! The randomized interval pools conditioned draws across plug-in means
//! sampled from the ellipsoid boundary and takes `(alpha/4, 1-alpha/4)`
//! quantiles of `[X_A^+(y* - mu_hat)]_j` (the outer set already spends
//! `alpha/2`, hence the Bonferroni split). The conservative variant
//! extremizes the same per-chain quantiles over the plug-in means. All
//! intervals are finite: they are quantiles of finite Monte Carlo samples.

use crate::density::AugmentedState;
use crate::design::DesignContext;
use crate::error::{Error, Result};
use crate::geometry::ActiveSetGeometry;
use crate::lasso::{fit_lasso, LassoSolution};
use crate::reconstruct::{draws_from_states, ConditionedDraws, VerifyMode};
use crate::sampler::{default_init, default_tau_scaled, run_chain, ChainConfig, ChainOutput};
use crate::stats::{chi_square_quantile, log_ball_volume, log_cube_volume, quantile_sorted};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Minimum pooled draw count accepted by interval and set builders.
pub const MIN_DRAWS: usize = 100;

/// Which of the four interval constructions produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalVariant {
    Oracle,
    Plugin,
    Randomized,
    Conservative,
}

impl IntervalVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalVariant::Oracle => "oracle",
            IntervalVariant::Plugin => "plugin",
            IntervalVariant::Randomized => "randomized",
            IntervalVariant::Conservative => "conservative",
        }
    }
}

/// A finite confidence interval for one projected coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalResult {
    /// Position within the active set (0-based).
    pub j: usize,
    pub lower: f64,
    pub upper: f64,
    pub variant: IntervalVariant,
    pub alpha: f64,
}

impl IntervalResult {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Norm choice for joint confidence sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormDelta {
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "linf")]
    LInf,
}

impl NormDelta {
    fn norm(&self, v: &DVector<f64>) -> f64 {
        match self {
            NormDelta::L2 => v.norm(),
            NormDelta::LInf => v.amax(),
        }
    }
}

/// An `l_delta` ball confidence set for `H nu`.
#[derive(Debug, Clone)]
pub struct SetResult {
    pub h: DMatrix<f64>,
    pub center: DVector<f64>,
    pub radius: f64,
    pub norm_delta: NormDelta,
    /// Euclidean diameter: `2r` for the ball, `2r sqrt(m)` for the cube.
    pub diameter: f64,
    pub volume: f64,
    /// Log volume, exact even when `volume` overflows.
    pub log_volume: f64,
    pub alpha: f64,
}

impl SetResult {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn covers(&self, eta: &DVector<f64>) -> bool {
        self.norm_delta.norm(&(eta - &self.center)) <= self.radius
    }
}

/// The unconditional `1 - alpha/2` confidence set for the mean, built from
/// the Gaussian law of `X_A^+ y`: an ellipsoid in coefficient space mapped
/// through `X_A`.
#[derive(Debug, Clone)]
pub struct ConfidenceEllipsoid {
    active: Vec<usize>,
    nu_hat: DVector<f64>,
    shape: DMatrix<f64>,
    shape_chol_l: DMatrix<f64>,
    radius2: f64,
    alpha_outer: f64,
    mu_hat: DVector<f64>,
    sigma2: f64,
}

impl ConfidenceEllipsoid {
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Center in coefficient space, `X_A^+ y`.
    pub fn nu_hat(&self) -> &DVector<f64> {
        &self.nu_hat
    }

    /// `X_A' X_A`.
    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// `sigma^2` times the `1 - alpha/2` chi-squared quantile with `|A|`
    /// degrees of freedom.
    pub fn radius2(&self) -> f64 {
        self.radius2
    }

    /// The outer tail mass spent on the ellipsoid, `alpha/2`.
    pub fn alpha_outer(&self) -> f64 {
        self.alpha_outer
    }

    /// Center in response space, `X_A nu_hat`.
    pub fn mu_hat(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `(nu - nu_hat)' shape (nu - nu_hat)`.
    pub fn quad_form(&self, nu: &DVector<f64>) -> f64 {
        let d = nu - &self.nu_hat;
        d.dot(&(&self.shape * &d))
    }

    pub fn contains(&self, nu: &DVector<f64>) -> bool {
        self.quad_form(nu) <= self.radius2
    }
}

/// Builds the `1 - alpha/2` ellipsoid for the mean given the active set.
pub fn build_c_a(
    geom: &ActiveSetGeometry,
    y: &DVector<f64>,
    sigma2: f64,
    alpha: f64,
) -> Result<ConfidenceEllipsoid> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("sigma2 must be positive, got {sigma2}"),
        });
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            what: format!("alpha must be in (0, 1), got {alpha}"),
        });
    }
    let q = geom.active_size();
    let nu_hat = geom.project_onto_active(y);
    let radius2 = sigma2 * chi_square_quantile(q as f64, 1.0 - alpha / 2.0)?;
    let mu_hat = geom.xa() * &nu_hat;
    Ok(ConfidenceEllipsoid {
        active: geom.active().to_vec(),
        nu_hat,
        shape: geom.xa_gram().clone(),
        shape_chol_l: geom.xa_gram_chol_l(),
        radius2,
        alpha_outer: alpha / 2.0,
        mu_hat,
        sigma2,
    })
}

/// Draws `K` plug-in means uniformly from the ellipsoid boundary (uniform on
/// the unit sphere pushed through the ellipsoid parameterization):
/// `mu_k = X_A (nu_hat + sqrt(radius2) L^{-T} z_k)` with `L L' = X_A'X_A`.
pub fn sample_boundary(
    geom: &ActiveSetGeometry,
    ell: &ConfidenceEllipsoid,
    k_points: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    if k_points == 0 {
        return Err(Error::InvalidParameter {
            what: "need at least one boundary point".to_string(),
        });
    }
    let q = ell.nu_hat.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let lt = ell.shape_chol_l.transpose();
    let mut out = Vec::with_capacity(k_points);
    for _ in 0..k_points {
        let mut z = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut norm = z.norm();
        while norm == 0.0 {
            z = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
            norm = z.norm();
        }
        z /= norm;
        let dir = lt
            .clone()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical {
                what: "triangular solve failed in boundary sampling".to_string(),
            })?;
        let nu = &ell.nu_hat + dir * ell.radius2.sqrt();
        out.push(geom.xa() * nu);
    }
    Ok(out)
}

fn check_draw_count(draws: &ConditionedDraws) -> Result<()> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::InsufficientDraws {
            got: draws.len(),
            need: MIN_DRAWS,
        });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            what: format!("alpha must be in (0, 1), got {alpha}"),
        });
    }
    Ok(())
}

/// Centered differences `nu*_j - center_j`, sorted ascending.
fn sorted_diffs(draws: &ConditionedDraws, center_j: f64, j: usize) -> Vec<f64> {
    let mut d: Vec<f64> = draws
        .nu_star()
        .column(j)
        .iter()
        .map(|v| v - center_j)
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).expect("NaN draw"));
    d
}

fn interval_from_quantiles(
    j: usize,
    nu_hat_j: f64,
    q_lo: f64,
    q_hi: f64,
    variant: IntervalVariant,
    alpha: f64,
) -> IntervalResult {
    IntervalResult {
        j,
        lower: nu_hat_j - q_hi,
        upper: nu_hat_j - q_lo,
        variant,
        alpha,
    }
}

/// Randomized interval: `(alpha/4, 1-alpha/4)` quantiles of the draws
/// pooled over every plug-in mean, centered at `X_A^+ mu_hat = nu_hat`.
pub fn build_interval_randomized(
    draws: &ConditionedDraws,
    ell: &ConfidenceEllipsoid,
    j: usize,
    alpha: f64,
) -> Result<IntervalResult> {
    check_alpha(alpha)?;
    check_draw_count(draws)?;
    let center = ell.nu_hat[j];
    let d = sorted_diffs(draws, center, j);
    let q_lo = quantile_sorted(&d, alpha / 4.0);
    let q_hi = quantile_sorted(&d, 1.0 - alpha / 4.0);
    Ok(interval_from_quantiles(
        j,
        ell.nu_hat[j],
        q_lo,
        q_hi,
        IntervalVariant::Randomized,
        alpha,
    ))
}

/// Plug-in interval from draws conditioned at the single mean `mu_hat`:
/// `(alpha/2, 1-alpha/2)` quantiles.
pub fn build_interval_plugin(
    draws: &ConditionedDraws,
    ell: &ConfidenceEllipsoid,
    j: usize,
    alpha: f64,
) -> Result<IntervalResult> {
    check_alpha(alpha)?;
    check_draw_count(draws)?;
    let d = sorted_diffs(draws, ell.nu_hat[j], j);
    let q_lo = quantile_sorted(&d, alpha / 2.0);
    let q_hi = quantile_sorted(&d, 1.0 - alpha / 2.0);
    Ok(interval_from_quantiles(
        j,
        ell.nu_hat[j],
        q_lo,
        q_hi,
        IntervalVariant::Plugin,
        alpha,
    ))
}

/// Oracle interval (simulation benchmark): draws conditioned at the true
/// mean, centered at `nu = X_A^+ mu_0`.
pub fn build_interval_oracle(
    draws: &ConditionedDraws,
    ell: &ConfidenceEllipsoid,
    nu_true: &DVector<f64>,
    j: usize,
    alpha: f64,
) -> Result<IntervalResult> {
    check_alpha(alpha)?;
    check_draw_count(draws)?;
    let d = sorted_diffs(draws, nu_true[j], j);
    let q_lo = quantile_sorted(&d, alpha / 2.0);
    let q_hi = quantile_sorted(&d, 1.0 - alpha / 2.0);
    Ok(interval_from_quantiles(
        j,
        ell.nu_hat[j],
        q_lo,
        q_hi,
        IntervalVariant::Oracle,
        alpha,
    ))
}

/// Conservative interval: worst case of the per-plug-in quantiles — the
/// upper quantile is maximized and the lower minimized over the plug-in
/// means, at the same `(alpha/4, 1-alpha/4)` levels and with the same
/// centering as the randomized interval.
pub fn build_interval_conservative(
    draws: &ConditionedDraws,
    ell: &ConfidenceEllipsoid,
    j: usize,
    alpha: f64,
) -> Result<IntervalResult> {
    check_alpha(alpha)?;
    check_draw_count(draws)?;
    let center = ell.nu_hat[j];
    let mut q_lo = f64::INFINITY;
    let mut q_hi = f64::NEG_INFINITY;
    for k in draws.k_values() {
        let rows = draws.rows_for_k(k);
        if rows.is_empty() {
            continue;
        }
        let mut d: Vec<f64> = rows
            .iter()
            .map(|&i| draws.nu_star()[(i, j)] - center)
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).expect("NaN draw"));
        q_lo = q_lo.min(quantile_sorted(&d, alpha / 4.0));
        q_hi = q_hi.max(quantile_sorted(&d, 1.0 - alpha / 4.0));
    }
    Ok(interval_from_quantiles(
        j,
        ell.nu_hat[j],
        q_lo,
        q_hi,
        IntervalVariant::Conservative,
        alpha,
    ))
}

/// Joint confidence set for `H nu` as an `l_delta` ball: the radius is the
/// `1 - alpha/2` quantile of `||H X_A^+(y* - mu_hat)||_delta`.
pub fn build_set(
    draws: &ConditionedDraws,
    ell: &ConfidenceEllipsoid,
    h: &DMatrix<f64>,
    delta: NormDelta,
    alpha: f64,
) -> Result<SetResult> {
    check_alpha(alpha)?;
    check_draw_count(draws)?;
    let q = draws.dim();
    let m = h.nrows();
    if h.ncols() != q || m == 0 || m > q {
        return Err(Error::InvalidParameter {
            what: format!(
                "H must be m x q with 1 <= m <= {q}, got {}x{}",
                m,
                h.ncols()
            ),
        });
    }
    let mut norms: Vec<f64> = Vec::with_capacity(draws.len());
    for i in 0..draws.len() {
        let diff = DVector::from_fn(q, |c, _| draws.nu_star()[(i, c)] - ell.nu_hat[c]);
        norms.push(delta.norm(&(h * diff)));
    }
    norms.sort_by(|a, b| a.partial_cmp(b).expect("NaN norm"));
    let radius = quantile_sorted(&norms, 1.0 - alpha / 2.0);
    let (diameter, log_volume) = match delta {
        NormDelta::L2 => (2.0 * radius, log_ball_volume(m, radius)),
        NormDelta::LInf => (2.0 * radius * (m as f64).sqrt(), log_cube_volume(m, radius)),
    };
    Ok(SetResult {
        h: h.clone(),
        center: h * &ell.nu_hat,
        radius,
        norm_delta: delta,
        diameter,
        volume: log_volume.exp(),
        log_volume,
        alpha,
    })
}

/// Chain settings and sampling sizes for the randomized pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingPlan {
    /// Number of boundary plug-in means `K`.
    pub boundary_points: usize,
    /// Kept draws per plug-in mean `N`.
    pub draws_per_point: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Multiplier on the default proposal scales.
    pub tau_multiplier: f64,
    pub seed: u64,
    /// Keep reconstructed responses alongside the projections.
    pub store_y: bool,
    /// Fraction of draws re-verified by refitting (1% by default).
    pub verify_fraction: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            boundary_points: 20,
            draws_per_point: 500,
            burn_in: 1000,
            thin: 1,
            tau_multiplier: 2.0,
            seed: 0,
            store_y: false,
            verify_fraction: 0.01,
        }
    }
}

impl SamplingPlan {
    fn verify_mode(&self) -> VerifyMode {
        if self.verify_fraction <= 0.0 {
            VerifyMode::Off
        } else if self.verify_fraction >= 1.0 {
            VerifyMode::Full
        } else {
            VerifyMode::Fraction(self.verify_fraction)
        }
    }
}

/// Mixing and acceptance diagnostics for one chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSummary {
    pub k: usize,
    pub acceptance_b: Vec<f64>,
    pub acceptance_s_free: Vec<f64>,
    pub skipped_sign_flips: u64,
    /// Lag-1 autocorrelation of each active coefficient series.
    pub acf1_b: Vec<f64>,
}

fn summarize_chain(k: usize, out: &ChainOutput) -> ChainSummary {
    ChainSummary {
        k,
        acceptance_b: out.acceptance_b(),
        acceptance_s_free: out.acceptance_s_free(),
        skipped_sign_flips: out.b_stats.iter().map(|s| s.skipped).sum(),
        acf1_b: out
            .autocorr_b
            .iter()
            .map(|acf| acf.first().copied().unwrap_or(0.0))
            .collect(),
    }
}

/// Everything produced by one run of the randomized pipeline.
#[derive(Debug, Clone)]
pub struct Algorithm1Output {
    pub solution: LassoSolution,
    pub geometry: ActiveSetGeometry,
    pub ellipsoid: ConfidenceEllipsoid,
    /// The sampled boundary means, in index order.
    pub boundary: Vec<DVector<f64>>,
    pub draws: ConditionedDraws,
    /// Randomized intervals for every active coordinate.
    pub intervals: Vec<IntervalResult>,
    pub chains: Vec<ChainSummary>,
}

/// Fixed per-purpose seed derivation from the master seed (splitmix64 over
/// the tag sequence), so chains and replicates get independent streams
/// regardless of scheduling.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = master ^ 0x9E37_79B9_7F4A_7C15;
    for &t in tags {
        state = splitmix64(state.wrapping_add(t.wrapping_mul(0xBF58_476D_1CE4_E5B9)));
    }
    splitmix64(state)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one chain at a fixed plug-in mean and packages the kept states as
/// conditioned draws with randomization index `k_tag`.
pub fn conditional_draws_at(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    solution: &LassoSolution,
    mu_tilde: &DVector<f64>,
    sigma2: f64,
    lambda: f64,
    n_draws: usize,
    plan: &SamplingPlan,
    k_tag: usize,
    seed: u64,
) -> Result<(ConditionedDraws, ChainSummary)> {
    let init = default_init(solution, geom)?;
    let tau = default_tau_scaled(geom, sigma2, plan.tau_multiplier)?;
    let cfg = ChainConfig {
        n_iter: plan.burn_in + n_draws * plan.thin,
        burn_in: plan.burn_in,
        thin: plan.thin,
        tau,
        seed,
    };
    let out = run_chain(ctx, geom, mu_tilde, sigma2, lambda, &init, &cfg)?;
    let draws = draws_from_states(
        ctx,
        geom,
        lambda,
        &[(k_tag, out.states.as_slice())],
        plan.store_y,
        plan.verify_mode(),
        derive_seed(seed, &[4]),
    )?;
    Ok((draws, summarize_chain(k_tag, &out)))
}

/// The randomized pipeline: fit, build the ellipsoid, draw plug-in means
/// from its boundary, run one conditional chain per mean (in parallel),
/// map the states back to coefficient space, and build the randomized
/// interval for every active coordinate.
pub fn run_algorithm1(
    ctx: &DesignContext,
    y: &DVector<f64>,
    lambda: f64,
    sigma2: f64,
    alpha: f64,
    plan: &SamplingPlan,
) -> Result<Algorithm1Output> {
    let solution = fit_lasso(ctx, y, lambda)?;
    run_algorithm1_with_fit(ctx, y, solution, sigma2, alpha, plan)
}

/// Same as [`run_algorithm1`] but reusing an existing fit.
pub fn run_algorithm1_with_fit(
    ctx: &DesignContext,
    y: &DVector<f64>,
    solution: LassoSolution,
    sigma2: f64,
    alpha: f64,
    plan: &SamplingPlan,
) -> Result<Algorithm1Output> {
    if solution.active.is_empty() {
        return Err(Error::EmptyModel);
    }
    let lambda = solution.lambda;
    let geom = ActiveSetGeometry::new(ctx, &solution.active)?;
    let ell = build_c_a(&geom, y, sigma2, alpha)?;
    let boundary = sample_boundary(
        &geom,
        &ell,
        plan.boundary_points,
        derive_seed(plan.seed, &[1]),
    )?;

    let init = default_init(&solution, &geom)?;
    let tau = default_tau_scaled(&geom, sigma2, plan.tau_multiplier)?;
    let chain_results: Result<Vec<(usize, ChainOutput)>> = boundary
        .par_iter()
        .enumerate()
        .map(|(k, mu_k)| {
            let cfg = ChainConfig {
                n_iter: plan.burn_in + plan.draws_per_point * plan.thin,
                burn_in: plan.burn_in,
                thin: plan.thin,
                tau: tau.clone(),
                seed: derive_seed(plan.seed, &[2, k as u64]),
            };
            run_chain(ctx, &geom, mu_k, sigma2, lambda, &init, &cfg).map(|out| (k, out))
        })
        .collect();
    let chain_results = chain_results?;

    let groups: Vec<(usize, &[AugmentedState])> = chain_results
        .iter()
        .map(|(k, out)| (*k, out.states.as_slice()))
        .collect();
    let draws = draws_from_states(
        ctx,
        &geom,
        lambda,
        &groups,
        plan.store_y,
        plan.verify_mode(),
        derive_seed(plan.seed, &[3]),
    )?;
    let chains: Vec<ChainSummary> = chain_results
        .iter()
        .map(|(k, out)| summarize_chain(*k, out))
        .collect();

    let mut intervals = Vec::with_capacity(geom.active_size());
    for j in 0..geom.active_size() {
        intervals.push(build_interval_randomized(&draws, &ell, j, alpha)?);
    }
    Ok(Algorithm1Output {
        solution,
        geometry: geom,
        ellipsoid: ell,
        boundary,
        draws,
        intervals,
        chains,
    })
}
