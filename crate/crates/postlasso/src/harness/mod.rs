//! Simulation harness: synthetic designs, the rejection-sampling oracle,
//! coverage/power/length metrics, and the experiment runner.

pub mod config;
pub mod runner;

use crate::density::AugmentedState;
use crate::design::DesignContext;
use crate::error::{Error, Result};
use crate::geometry::ActiveSetGeometry;
use crate::inference::IntervalVariant;
use crate::lasso::fit_lasso;
use crate::reconstruct::{project_nu, ConditionedDraws};
use crate::sampler::default_init;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Row covariance family for the synthetic designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// `Sigma = I`.
    Identity,
    /// `Sigma_ij = 0.5^|i-j|`.
    Toeplitz,
    /// `Sigma^{-1}_ij = 0.4^|i-j|`.
    ExpDecay,
    /// `Sigma_ii = 1`, `Sigma_ij = 0.7` off the diagonal.
    Equicorrelation,
}

impl DesignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Identity => "identity",
            DesignKind::Toeplitz => "toeplitz",
            DesignKind::ExpDecay => "exp_decay",
            DesignKind::Equicorrelation => "equicorrelation",
        }
    }
}

/// Synthetic data generator settings.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n: usize,
    pub p: usize,
    /// True support (0-based).
    pub a0: Vec<usize>,
    /// Uniform law for the nonzero coefficients.
    pub beta_range: (f64, f64),
    pub sigma2: f64,
    pub seed: u64,
}

/// One simulated dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta0: DVector<f64>,
    pub mu0: DVector<f64>,
}

/// Contiguous support `{0, .., size-1}` (the paper's first placement).
pub fn a0_contiguous(size: usize) -> Vec<usize> {
    (0..size).collect()
}

/// Evenly spread support `{0, p/size, 2p/size, ...}` (the second placement).
pub fn a0_spread(p: usize, size: usize) -> Vec<usize> {
    (0..size).map(|i| i * p / size).collect()
}

/// The population covariance for a design kind.
pub fn covariance_matrix(kind: DesignKind, p: usize) -> DMatrix<f64> {
    match kind {
        DesignKind::Identity => DMatrix::identity(p, p),
        DesignKind::Toeplitz => {
            DMatrix::from_fn(p, p, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()))
        }
        DesignKind::ExpDecay => {
            let prec = DMatrix::from_fn(p, p, |i, j| 0.4f64.powi((i as i32 - j as i32).abs()));
            let chol = Cholesky::<f64, Dyn>::new(prec).expect("precision matrix is PD");
            chol.inverse()
        }
        DesignKind::Equicorrelation => {
            DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.7 })
        }
    }
}

enum RowSampler {
    Direct,
    CovChol(DMatrix<f64>),
    PrecChol(DMatrix<f64>),
}

impl RowSampler {
    fn new(kind: DesignKind, p: usize) -> Result<Self> {
        Ok(match kind {
            DesignKind::Identity => RowSampler::Direct,
            DesignKind::Toeplitz | DesignKind::Equicorrelation => {
                let sigma = covariance_matrix(kind, p);
                let chol = Cholesky::<f64, Dyn>::new(sigma).ok_or_else(|| Error::Numerical {
                    what: "design covariance is not positive definite".to_string(),
                })?;
                RowSampler::CovChol(chol.l())
            }
            DesignKind::ExpDecay => {
                // Sigma is defined through its inverse; factor the precision
                // and sample by solving, never forming Sigma at large p.
                let prec = DMatrix::from_fn(p, p, |i, j| 0.4f64.powi((i as i32 - j as i32).abs()));
                let chol = Cholesky::<f64, Dyn>::new(prec).ok_or_else(|| Error::Numerical {
                    what: "design precision is not positive definite".to_string(),
                })?;
                RowSampler::PrecChol(chol.l())
            }
        })
    }

    fn sample<R: Rng>(&self, p: usize, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        match self {
            RowSampler::Direct => z,
            RowSampler::CovChol(l) => l * z,
            // x with cov (L L')^{-1}: solve L' x = z.
            RowSampler::PrecChol(l) => l
                .transpose()
                .solve_upper_triangular(&z)
                .expect("triangular solve"),
        }
    }
}

/// Draws `X` with i.i.d. `N_p(0, Sigma)` rows, uniform coefficients on the
/// true support, `mu0 = X beta0`, and `y = mu0 + N(0, sigma^2 I)`.
/// Deterministic per seed.
pub fn generate_dataset(spec: &DesignSpec) -> Result<Dataset> {
    if spec.a0.iter().any(|&j| j >= spec.p) {
        return Err(Error::InvalidParameter {
            what: "true support index out of range".to_string(),
        });
    }
    if !(spec.sigma2 > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("sigma2 must be positive, got {}", spec.sigma2),
        });
    }
    let (lo, hi) = spec.beta_range;
    if !(lo < hi) {
        return Err(Error::InvalidParameter {
            what: format!("coefficient range [{lo}, {hi}] is empty"),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let sampler = RowSampler::new(spec.kind, spec.p)?;
    let mut x = DMatrix::zeros(spec.n, spec.p);
    for i in 0..spec.n {
        let row = sampler.sample(spec.p, &mut rng);
        x.row_mut(i).copy_from(&row.transpose());
    }
    let mut beta0 = DVector::zeros(spec.p);
    for &j in &spec.a0 {
        beta0[j] = lo + (hi - lo) * rng.random::<f64>();
    }
    let mu0 = &x * &beta0;
    let sigma = spec.sigma2.sqrt();
    let y = DVector::from_fn(spec.n, |i, _| {
        mu0[i] + sigma * rng.sample::<f64, _>(StandardNormal)
    });
    Ok(Dataset { x, y, beta0, mu0 })
}

/// Output of the naive rejection sampler: accepted augmented states plus
/// their coefficient-space projections and the realized acceptance rate.
pub struct RejectionDraws {
    pub draws: ConditionedDraws,
    pub states: Vec<AugmentedState>,
    pub accepted: usize,
    pub proposed: usize,
    pub acceptance_rate: f64,
}

impl std::fmt::Debug for RejectionDraws {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RejectionDraws")
            .field("accepted", &self.accepted)
            .field("proposed", &self.proposed)
            .field("acceptance_rate", &self.acceptance_rate)
            .finish()
    }
}

/// Draws `y* ~ N(mu_tilde, sigma^2 I)` repeatedly, keeps those whose lasso
/// active set equals `a_target`, and stops after `n_accept` acceptances or
/// `max_draws` proposals (whichever comes first; the latter is an error
/// carrying the partial results).
#[allow(clippy::too_many_arguments)]
pub fn rejection_oracle(
    ctx: &DesignContext,
    mu_tilde: &DVector<f64>,
    sigma2: f64,
    lambda: f64,
    a_target: &[usize],
    n_accept: usize,
    max_draws: usize,
    seed: u64,
) -> Result<RejectionDraws> {
    if n_accept == 0 {
        return Err(Error::InvalidParameter {
            what: "need at least one accepted draw".to_string(),
        });
    }
    let mut target = a_target.to_vec();
    target.sort_unstable();
    let geom = ActiveSetGeometry::new(ctx, &target)?;
    let sigma = sigma2.sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = ctx.n();
    let q = target.len();

    let mut states = Vec::with_capacity(n_accept);
    let mut nu_rows: Vec<DVector<f64>> = Vec::with_capacity(n_accept);
    let mut proposed = 0usize;
    while states.len() < n_accept && proposed < max_draws {
        proposed += 1;
        let y_star = DVector::from_fn(n, |i, _| {
            mu_tilde[i] + sigma * rng.sample::<f64, _>(StandardNormal)
        });
        let sol = fit_lasso(ctx, &y_star, lambda)?;
        if sol.active == target {
            let state = default_init(&sol, &geom)?;
            nu_rows.push(project_nu(ctx, &geom, &state, lambda));
            states.push(state);
        }
    }
    let accepted = states.len();
    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    let mut nu_star = DMatrix::zeros(accepted, q);
    for (i, nu) in nu_rows.iter().enumerate() {
        nu_star.row_mut(i).copy_from(&nu.transpose());
    }
    let draws = ConditionedDraws::from_raw(nu_star, None, vec![0; accepted]);
    let result = RejectionDraws {
        draws,
        states,
        accepted,
        proposed,
        acceptance_rate,
    };
    if accepted < n_accept {
        return Err(Error::BudgetExhausted {
            accepted,
            requested: n_accept,
            proposed,
            partial: Box::new(result),
        });
    }
    Ok(result)
}

/// Per-marginal two-sample KS distances between rejection-oracle draws and
/// an MH chain run at the same plug-in mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleMcmcComparison {
    /// One entry per active coordinate.
    pub ks_beta: Vec<f64>,
    /// One entry per inactive coordinate (inactive order).
    pub ks_subgradient: Vec<f64>,
    pub mcmc_draws: usize,
    pub max_ks: f64,
}

/// Runs the MH sampler at `mu_tilde` and compares every marginal of
/// `(b_A, s_I)` against the rejection-oracle draws.
#[allow(clippy::too_many_arguments)]
pub fn oracle_mcmc_ks(
    ctx: &DesignContext,
    geom: &ActiveSetGeometry,
    solution: &crate::lasso::LassoSolution,
    mu_tilde: &DVector<f64>,
    sigma2: f64,
    lambda: f64,
    oracle: &RejectionDraws,
    n_mcmc: usize,
    burn_in: usize,
    thin: usize,
    tau_multiplier: f64,
    seed: u64,
) -> Result<OracleMcmcComparison> {
    use crate::sampler::{default_tau_scaled, run_chain, ChainConfig};
    use crate::stats::ks_statistic;
    let init = default_init(solution, geom)?;
    let tau = default_tau_scaled(geom, sigma2, tau_multiplier)?;
    let cfg = ChainConfig {
        n_iter: burn_in + n_mcmc * thin,
        burn_in,
        thin,
        tau,
        seed,
    };
    let out = run_chain(ctx, geom, mu_tilde, sigma2, lambda, &init, &cfg)?;
    let q = geom.active_size();
    let n_inactive = geom.inactive().len();
    let mut ks_beta = Vec::with_capacity(q);
    for i in 0..q {
        let a: Vec<f64> = oracle.states.iter().map(|s| s.b_active()[i]).collect();
        let b: Vec<f64> = out.states.iter().map(|s| s.b_active()[i]).collect();
        ks_beta.push(ks_statistic(&a, &b));
    }
    let oracle_s: Vec<DVector<f64>> = oracle.states.iter().map(|s| s.s_inactive(geom)).collect();
    let chain_s: Vec<DVector<f64>> = out.states.iter().map(|s| s.s_inactive(geom)).collect();
    let mut ks_subgradient = Vec::with_capacity(n_inactive);
    for pos in 0..n_inactive {
        let a: Vec<f64> = oracle_s.iter().map(|s| s[pos]).collect();
        let b: Vec<f64> = chain_s.iter().map(|s| s[pos]).collect();
        ks_subgradient.push(ks_statistic(&a, &b));
    }
    let max_ks = ks_beta
        .iter()
        .chain(ks_subgradient.iter())
        .fold(0.0f64, |acc, &v| acc.max(v));
    Ok(OracleMcmcComparison {
        ks_beta,
        ks_subgradient,
        mcmc_draws: out.states.len(),
        max_ks,
    })
}

/// One interval record per (dataset, active coordinate, variant); the raw
/// rows behind the CSV output and the aggregated metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub dataset_id: usize,
    /// Global covariate index.
    pub j: usize,
    pub variant: IntervalVariant,
    pub lower: f64,
    pub upper: f64,
    /// True projected coefficient `nu_j = [X_A^+ mu0]_j`.
    pub truth: f64,
    pub covered: bool,
    pub length: f64,
    /// Whether the covariate belongs to the true support.
    pub in_a0: bool,
}

/// One confidence-set record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetRecord {
    pub dataset_id: usize,
    /// "pairwise" or "joint".
    pub family: String,
    /// Subset size `m`.
    pub m: usize,
    pub delta: crate::inference::NormDelta,
    pub radius: f64,
    pub diameter: f64,
    pub volume: f64,
    /// `Volume^(1/|A|)`, the size-normalized volume.
    pub volume_star: f64,
    pub covered: bool,
    pub excludes_zero: bool,
    /// Both members of a pairwise set in the true support (power filter).
    pub all_true_support: bool,
}

/// Aggregate interval metrics for one variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub variant: IntervalVariant,
    /// Coverage over all selected coordinates.
    pub coverage_a: f64,
    /// Coverage over true positives `A0 ∩ A`.
    pub coverage_tp: f64,
    /// Coverage over false positives `A0^c ∩ A`.
    pub coverage_fp: f64,
    /// Power over `A0 ∩ A` (interval excludes zero).
    pub power_tp: f64,
    /// Mean length pooled over (dataset, coordinate) pairs.
    pub mean_length_pooled: f64,
    /// Mean over datasets of the per-dataset mean length.
    pub mean_length_by_dataset: f64,
    pub n_pairs: usize,
    pub n_tp: usize,
    pub n_fp: usize,
}

/// Aggregate set metrics for one family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetMetrics {
    pub family: String,
    pub coverage: f64,
    /// Fraction excluding the origin, restricted to all-true-support sets.
    pub power: f64,
    pub mean_diameter: f64,
    pub mean_volume: f64,
    pub mean_volume_star: f64,
    pub count: usize,
}

/// Coverage/power/length summary over every replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub replicates: usize,
    pub completed: usize,
    pub variants: BTreeMap<String, VariantMetrics>,
    pub sets: BTreeMap<String, SetMetrics>,
    pub per_dataset: Vec<DatasetSummary>,
    /// Sensitivity mode: one aggregated point per lambda-grid index.
    #[serde(default)]
    pub lambda_series: Vec<LambdaSeriesPoint>,
    pub notes: Vec<String>,
    /// Echo of the resolved configuration.
    pub config: serde_json::Value,
}

/// Coverage and model size at one index of the per-dataset lambda grid,
/// averaged across replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaSeriesPoint {
    pub lambda_index: usize,
    pub n_datasets: usize,
    pub mean_active_size: f64,
    /// Randomized-interval coverage pooled over (dataset, coordinate)
    /// pairs; absent when no interval was produced at this index.
    pub coverage: Option<f64>,
    pub n_pairs: usize,
}

/// Per-dataset digest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset_id: usize,
    pub lambda: f64,
    pub active_size: usize,
    /// Per-variant coverage over the selected coordinates of this dataset.
    pub coverage: BTreeMap<String, f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Aggregates interval records into per-variant metrics; the index-set
/// averages follow the declared sets exactly (A, A0∩A, A0^c∩A).
pub fn compute_interval_metrics(records: &[IntervalRecord]) -> BTreeMap<String, VariantMetrics> {
    let mut by_variant: BTreeMap<&'static str, Vec<&IntervalRecord>> = BTreeMap::new();
    for r in records {
        by_variant.entry(r.variant.as_str()).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (name, rows) in by_variant {
        let tp: Vec<&&IntervalRecord> = rows.iter().filter(|r| r.in_a0).collect();
        let fp: Vec<&&IntervalRecord> = rows.iter().filter(|r| !r.in_a0).collect();
        let coverage_a = mean(rows.iter().map(|r| r.covered as u8 as f64));
        let coverage_tp = mean(tp.iter().map(|r| r.covered as u8 as f64));
        let coverage_fp = mean(fp.iter().map(|r| r.covered as u8 as f64));
        let power_tp = mean(
            tp.iter()
                .map(|r| ((r.lower > 0.0) || (r.upper < 0.0)) as u8 as f64),
        );
        let mean_length_pooled = mean(rows.iter().map(|r| r.length));
        let mut per_dataset: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            per_dataset.entry(r.dataset_id).or_default().push(r.length);
        }
        let mean_length_by_dataset = mean(
            per_dataset
                .values()
                .map(|ls| ls.iter().sum::<f64>() / ls.len() as f64),
        );
        let variant = rows[0].variant;
        out.insert(
            name.to_string(),
            VariantMetrics {
                variant,
                coverage_a,
                coverage_tp,
                coverage_fp,
                power_tp,
                mean_length_pooled,
                mean_length_by_dataset,
                n_pairs: rows.len(),
                n_tp: tp.len(),
                n_fp: fp.len(),
            },
        );
    }
    out
}

/// Aggregates set records by family.
pub fn compute_set_metrics(records: &[SetRecord]) -> BTreeMap<String, SetMetrics> {
    let mut by_family: BTreeMap<String, Vec<&SetRecord>> = BTreeMap::new();
    for r in records {
        by_family.entry(r.family.clone()).or_default().push(r);
    }
    let mut out = BTreeMap::new();
    for (family, rows) in by_family {
        let coverage = mean(rows.iter().map(|r| r.covered as u8 as f64));
        let power = mean(
            rows.iter()
                .filter(|r| r.all_true_support)
                .map(|r| r.excludes_zero as u8 as f64),
        );
        let mean_diameter = mean(rows.iter().map(|r| r.diameter));
        let mean_volume = mean(rows.iter().map(|r| r.volume));
        let mean_volume_star = mean(rows.iter().map(|r| r.volume_star));
        out.insert(
            family.clone(),
            SetMetrics {
                family,
                coverage,
                power,
                mean_diameter,
                mean_volume,
                mean_volume_star,
                count: rows.len(),
            },
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::{fit_lasso, lambda_max};

    #[test]
    fn covariance_entries_match_the_stated_families() {
        let t = covariance_matrix(DesignKind::Toeplitz, 4);
        assert!((t[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((t[(0, 2)] - 0.25).abs() < 1e-15);
        let ec = covariance_matrix(DesignKind::Equicorrelation, 4);
        assert!((ec[(0, 1)] - 0.7).abs() < 1e-15);
        assert!((ec[(0, 0)] - 1.0).abs() < 1e-15);
        // Exponential decay: Sigma^{-1}_01 = 0.4.
        let ed = covariance_matrix(DesignKind::ExpDecay, 4);
        let prec = ed.try_inverse().unwrap();
        assert!((prec[(0, 1)] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn a0_presets_match_the_stated_placements() {
        assert_eq!(a0_contiguous(5), vec![0, 1, 2, 3, 4]);
        // 1-based {1, p/5+1, 2p/5+1, ...} = 0-based {0, p/5, 2p/5, ...}.
        assert_eq!(a0_spread(100, 5), vec![0, 20, 40, 60, 80]);
    }

    #[test]
    fn identity_rows_have_near_identity_sample_covariance() {
        let spec = DesignSpec {
            kind: DesignKind::Identity,
            n: 5000,
            p: 5,
            a0: vec![0],
            beta_range: (-1.0, 1.0),
            sigma2: 1.0,
            seed: 9,
        };
        let data = generate_dataset(&spec).unwrap();
        let cov = data.x.tr_mul(&data.x) / 5000.0;
        let resid = cov - DMatrix::identity(5, 5);
        assert!(resid.norm() < 0.1, "Frobenius deviation {}", resid.norm());
    }

    #[test]
    fn toeplitz_rows_reproduce_the_population_covariance() {
        let spec = DesignSpec {
            kind: DesignKind::Toeplitz,
            n: 6000,
            p: 6,
            a0: vec![0, 1],
            beta_range: (-1.0, 1.0),
            sigma2: 1.0,
            seed: 10,
        };
        let data = generate_dataset(&spec).unwrap();
        let cov = data.x.tr_mul(&data.x) / 6000.0;
        assert!((cov[(0, 1)] - 0.5).abs() < 0.05);
        assert!((cov[(0, 2)] - 0.25).abs() < 0.05);
    }

    #[test]
    fn exp_decay_rows_match_the_inverse_defined_covariance() {
        let spec = DesignSpec {
            kind: DesignKind::ExpDecay,
            n: 8000,
            p: 5,
            a0: vec![0],
            beta_range: (-1.0, 1.0),
            sigma2: 1.0,
            seed: 11,
        };
        let data = generate_dataset(&spec).unwrap();
        let cov = data.x.tr_mul(&data.x) / 8000.0;
        let expected = covariance_matrix(DesignKind::ExpDecay, 5);
        assert!((cov - expected).amax() < 0.06);
    }

    #[test]
    fn dataset_generation_is_deterministic_and_mu0_consistent() {
        let spec = DesignSpec {
            kind: DesignKind::Toeplitz,
            n: 20,
            p: 30,
            a0: a0_contiguous(5),
            beta_range: (-1.0, 1.0),
            sigma2: 1.0,
            seed: 77,
        };
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let mu = &a.x * &a.beta0;
        assert!((mu - &a.mu0).amax() < 1e-12);
        for &j in &spec.a0 {
            assert!(a.beta0[j].abs() <= 1.0);
        }
        assert_eq!(a.beta0.iter().filter(|&&b| b != 0.0).count(), 5);
    }

    #[test]
    fn rejection_oracle_budget_path_returns_partial_results() {
        let spec = DesignSpec {
            kind: DesignKind::Identity,
            n: 5,
            p: 10,
            a0: vec![0, 1],
            beta_range: (-1.0, 1.0),
            sigma2: 1.0,
            seed: 5,
        };
        let data = generate_dataset(&spec).unwrap();
        let ctx = DesignContext::new(data.x.clone()).unwrap();
        let lambda = 0.3 * lambda_max(&ctx, &data.y).unwrap();
        let sol = fit_lasso(&ctx, &data.y, lambda).unwrap();
        if sol.active.is_empty() {
            return;
        }
        match rejection_oracle(&ctx, &data.mu0, 1.0, lambda, &sol.active, 10_000, 10, 3) {
            Err(Error::BudgetExhausted {
                accepted,
                requested,
                proposed,
                partial,
            }) => {
                assert_eq!(requested, 10_000);
                assert_eq!(proposed, 10);
                assert!(accepted <= 10);
                assert_eq!(partial.states.len(), accepted);
            }
            other => panic!(
                "expected BudgetExhausted, got {:?}",
                other.map(|r| r.accepted)
            ),
        }
    }

    #[test]
    fn interval_metrics_are_exact_on_a_hand_built_fixture() {
        let rec = |dataset_id, j, covered, in_a0, lower: f64, upper: f64| IntervalRecord {
            dataset_id,
            j,
            variant: IntervalVariant::Randomized,
            lower,
            upper,
            truth: 0.5,
            covered,
            length: upper - lower,
            in_a0,
        };
        // Dataset 0: tp covered, fp missed. Dataset 1: tp missed (excludes 0), fp covered.
        let records = vec![
            rec(0, 0, true, true, 0.1, 1.0),
            rec(0, 5, false, false, -0.4, 0.4),
            rec(1, 1, false, true, 0.2, 0.9),
            rec(1, 6, true, false, -0.3, 0.5),
        ];
        let metrics = compute_interval_metrics(&records);
        let m = &metrics["randomized"];
        assert_eq!(m.n_pairs, 4);
        assert!((m.coverage_a - 0.5).abs() < 1e-15);
        assert!((m.coverage_tp - 0.5).abs() < 1e-15);
        assert!((m.coverage_fp - 0.5).abs() < 1e-15);
        // Power: intervals [0.1,1.0] and [0.2,0.9] both exclude zero.
        assert!((m.power_tp - 1.0).abs() < 1e-15);
        // Pooled mean length vs mean of per-dataset means.
        let pooled = (0.9 + 0.8 + 0.7 + 0.8) / 4.0;
        assert!((m.mean_length_pooled - pooled).abs() < 1e-12);
        let by_ds = ((0.9 + 0.8) / 2.0 + (0.7 + 0.8) / 2.0) / 2.0;
        assert!((m.mean_length_by_dataset - by_ds).abs() < 1e-12);
    }

    #[test]
    fn coverage_over_a_is_the_weighted_mean_of_the_subsets() {
        // Index-set partition identity: |A| cov_A = |tp| cov_tp + |fp| cov_fp.
        let mut records = Vec::new();
        for i in 0..37 {
            records.push(IntervalRecord {
                dataset_id: i % 5,
                j: i,
                variant: IntervalVariant::Plugin,
                lower: 0.0,
                upper: 1.0,
                truth: 0.5,
                covered: i % 3 != 0,
                length: 1.0,
                in_a0: i % 4 == 0,
            });
        }
        let m = &compute_interval_metrics(&records)["plugin"];
        let lhs = m.coverage_a * m.n_pairs as f64;
        let rhs = m.coverage_tp * m.n_tp as f64 + m.coverage_fp * m.n_fp as f64;
        assert!((lhs - rhs).abs() < 1e-9);
    }
}
