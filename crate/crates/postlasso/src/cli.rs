//! Command-line front end: `fit`, `sample`, `infer`, `oracle`, `simulate`.
//!
//! CSV in, JSON out. Results go to stdout, logs to stderr, and every output
//! echoes its resolved configuration. Exit codes: 0 success, 2 parse error,
//! 3 solver failure, 4 empty model, 5 insufficient draws, 6 sampling budget
//! exhausted.

use crate::design::DesignContext;
use crate::error::{Error, Result};
use crate::geometry::ActiveSetGeometry;
use crate::harness::config::ExperimentConfig;
use crate::harness::runner::run_experiment_to_dir;
use crate::harness::{oracle_mcmc_ks, rejection_oracle, OracleMcmcComparison};
use crate::inference::{
    build_interval_conservative, build_interval_plugin, build_set, conditional_draws_at,
    derive_seed, run_algorithm1_with_fit, Algorithm1Output, ChainSummary, NormDelta, SamplingPlan,
};
use crate::lasso::{cv_lambda_1se, fit_lasso, lambda_grid, LassoSolution};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "postlasso",
    version,
    about = "Post-selection inference for the lasso: conditional sampling, randomized intervals, joint confidence sets"
)]
pub struct Cli {
    /// Worker threads (default: env POSTLASSO_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the weighted lasso and report the exact subgradient.
    Fit(FitArgs),
    /// Sample the response distribution conditioned on the active set.
    Sample(SampleArgs),
    /// Build randomized confidence intervals and joint confidence sets.
    Infer(InferArgs),
    /// Validate the sampler against naive rejection sampling.
    Oracle(OracleArgs),
    /// Run a coverage/power simulation experiment from a config file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Design matrix CSV (n rows, p columns).
    #[arg(long = "x")]
    pub x: PathBuf,
    /// Response CSV (n values).
    #[arg(long = "y")]
    pub y: PathBuf,
    /// Skip a header row in the input CSVs.
    #[arg(long)]
    pub header: bool,
    /// Optional penalty weights CSV (p positive values).
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    /// Fixed penalty level.
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Choose the penalty by cross-validation with the one-SE rule.
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 10)]
    pub cv_folds: usize,
    #[arg(long, default_value_t = 20)]
    pub grid_count: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    /// Known noise variance.
    #[arg(long)]
    pub sigma2: f64,
    /// Plug-in mean CSV (n values); defaults to the fitted mean X_A nu_hat.
    #[arg(long)]
    pub mu: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n_draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 2.0)]
    pub tau_multiplier: f64,
    #[arg(long, default_value_t = 0.01)]
    pub verify_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliVariant {
    Randomized,
    Plugin,
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliDelta {
    /// Euclidean ball.
    #[value(name = "2")]
    L2,
    /// Hypercube.
    #[value(name = "inf")]
    LInf,
}

impl From<CliDelta> for NormDelta {
    fn from(d: CliDelta) -> Self {
        match d {
            CliDelta::L2 => NormDelta::L2,
            CliDelta::LInf => NormDelta::LInf,
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub lambda: LambdaArgs,
    /// Known noise variance.
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Boundary plug-in means K.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Kept draws per plug-in mean N.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Interval variants to report (repeatable).
    #[arg(long = "variant", value_enum)]
    pub variants: Vec<CliVariant>,
    /// Build pairwise confidence sets for every active pair.
    #[arg(long)]
    pub pairs: bool,
    /// Build the joint confidence set with H = I.
    #[arg(long)]
    pub joint: bool,
    /// Custom H matrix CSV (m rows, |A| columns).
    #[arg(long = "h")]
    pub h_matrix: Option<PathBuf>,
    /// Norm for confidence sets.
    #[arg(long, value_enum, default_value = "inf")]
    pub delta: CliDelta,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 2.0)]
    pub tau_multiplier: f64,
    #[arg(long, default_value_t = 0.01)]
    pub verify_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Penalty level (the oracle refits at exactly this value).
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub sigma2: f64,
    /// Plug-in mean CSV; defaults to the fitted lasso mean X beta_hat.
    #[arg(long)]
    pub mu: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n_accept: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_draws: usize,
    /// Also run the MH sampler and report per-marginal KS distances.
    #[arg(long)]
    pub compare_mcmc: bool,
    /// MH draws used for the comparison.
    #[arg(long, default_value_t = 2000)]
    pub mcmc_draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 2.0)]
    pub tau_multiplier: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for report.json and the CSV records.
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse finished replicates found under out/partial.
    #[arg(long)]
    pub resume: bool,
}

/// Parses a numeric CSV into a dense matrix. Ragged rows are parse errors.
fn read_matrix(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|s| s.parse::<f64>()).collect();
        let row = row.map_err(|e| Error::InvalidConfig {
            message: format!("{}: non-numeric cell ({e})", path.display()),
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig {
            message: format!("{}: no data rows", path.display()),
        });
    }
    let ncols = rows[0].len();
    let nrows = rows.len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Parses a CSV holding a single column (or single row) of numbers.
fn read_vector(path: &Path, header: bool) -> Result<DVector<f64>> {
    let m = read_matrix(path, header)?;
    if m.ncols() == 1 {
        Ok(DVector::from_iterator(m.nrows(), m.iter().copied()))
    } else if m.nrows() == 1 {
        Ok(DVector::from_iterator(m.ncols(), m.row(0).iter().copied()))
    } else {
        Err(Error::InvalidConfig {
            message: format!("{}: expected a single column of values", path.display()),
        })
    }
}

fn load_design(data: &DataArgs) -> Result<(DesignContext, DVector<f64>)> {
    let x = read_matrix(&data.x, data.header)?;
    let y = read_vector(&data.y, data.header)?;
    if y.len() != x.nrows() {
        return Err(Error::InvalidConfig {
            message: format!(
                "response has {} values but the design has {} rows",
                y.len(),
                x.nrows()
            ),
        });
    }
    let ctx = match &data.weights {
        Some(path) => {
            let w = read_vector(path, data.header)?;
            DesignContext::with_weights(x, w)?
        }
        None => DesignContext::new(x)?,
    };
    Ok((ctx, y))
}

fn resolve_lambda(
    args: &LambdaArgs,
    ctx: &DesignContext,
    y: &DVector<f64>,
    seed: u64,
) -> Result<(f64, &'static str)> {
    match (args.lambda, args.cv) {
        (Some(v), _) => Ok((v, "fixed")),
        (None, true) => {
            let grid = lambda_grid(ctx, y, args.grid_count)?;
            let lam = cv_lambda_1se(ctx, y, args.cv_folds, &grid, derive_seed(seed, &[90]))?;
            Ok((lam, "cv1se"))
        }
        (None, false) => Err(Error::InvalidConfig {
            message: "choose a penalty: pass --lambda VALUE or --cv".to_string(),
        }),
    }
}

#[derive(Serialize)]
struct BetaEntry {
    index: usize,
    value: f64,
}

fn solution_json(sol: &LassoSolution) -> serde_json::Value {
    json!({
        "lambda": sol.lambda,
        "active_set": sol.active,
        "beta": sol
            .active
            .iter()
            .map(|&j| BetaEntry { index: j, value: sol.beta[j] })
            .collect::<Vec<_>>(),
        "subgradient": sol.subgradient.iter().copied().collect::<Vec<f64>>(),
        "kkt_residual": sol.kkt_residual,
        "sweeps": sol.sweeps,
    })
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn run_fit(args: &FitArgs) -> Result<()> {
    let (ctx, y) = load_design(&args.data)?;
    let (lambda, rule) = resolve_lambda(&args.lambda, &ctx, &y, args.seed)?;
    let sol = fit_lasso(&ctx, &y, lambda)?;
    let out = json!({
        "config": {
            "x": args.data.x.display().to_string(),
            "y": args.data.y.display().to_string(),
            "weights": args.data.weights.as_ref().map(|p| p.display().to_string()),
            "header": args.data.header,
            "lambda_rule": rule,
            "cv_folds": args.lambda.cv_folds,
            "grid_count": args.lambda.grid_count,
            "seed": args.seed,
        },
        "n": ctx.n(),
        "p": ctx.p(),
        "fit": solution_json(&sol),
    });
    print_json(&out)
}

fn chain_json(summary: &ChainSummary) -> serde_json::Value {
    serde_json::to_value(summary).unwrap_or(serde_json::Value::Null)
}

pub fn run_sample(args: &SampleArgs) -> Result<()> {
    let (ctx, y) = load_design(&args.data)?;
    let (lambda, rule) = resolve_lambda(&args.lambda, &ctx, &y, args.seed)?;
    let sol = fit_lasso(&ctx, &y, lambda)?;
    if sol.active.is_empty() {
        return Err(Error::EmptyModel);
    }
    let geom = ActiveSetGeometry::new(&ctx, &sol.active)?;
    let (mu, mu_source) = match &args.mu {
        Some(path) => (read_vector(path, args.data.header)?, "file"),
        None => {
            let nu_hat = geom.project_onto_active(&y);
            (geom.xa() * nu_hat, "fitted")
        }
    };
    let plan = SamplingPlan {
        boundary_points: 1,
        draws_per_point: args.n_draws,
        burn_in: args.burn_in,
        thin: args.thin,
        tau_multiplier: args.tau_multiplier,
        seed: args.seed,
        store_y: false,
        verify_fraction: args.verify_fraction,
    };
    let (draws, summary) = conditional_draws_at(
        &ctx,
        &geom,
        &sol,
        &mu,
        args.sigma2,
        lambda,
        args.n_draws,
        &plan,
        0,
        derive_seed(args.seed, &[2, 0]),
    )?;
    let nu_rows: Vec<Vec<f64>> = (0..draws.len())
        .map(|i| draws.nu_star().row(i).iter().copied().collect())
        .collect();
    let out = json!({
        "config": {
            "x": args.data.x.display().to_string(),
            "y": args.data.y.display().to_string(),
            "header": args.data.header,
            "lambda_rule": rule,
            "sigma2": args.sigma2,
            "mu_source": mu_source,
            "n_draws": args.n_draws,
            "burn_in": args.burn_in,
            "thin": args.thin,
            "tau_multiplier": args.tau_multiplier,
            "verify_fraction": args.verify_fraction,
            "seed": args.seed,
        },
        "lambda": lambda,
        "active_set": sol.active,
        "draws": { "nu_star": nu_rows },
        "verified_draws": draws.verified(),
        "chain": chain_json(&summary),
    });
    print_json(&out)
}

fn set_json(
    family: &str,
    indices: Option<Vec<usize>>,
    set: &crate::inference::SetResult,
) -> serde_json::Value {
    json!({
        "family": family,
        "indices": indices,
        "m": set.dim(),
        "delta": match set.norm_delta { NormDelta::L2 => "l2", NormDelta::LInf => "linf" },
        "center": set.center.iter().copied().collect::<Vec<f64>>(),
        "radius": set.radius,
        "diameter": set.diameter,
        "volume": set.volume,
        "log_volume": set.log_volume,
        "alpha": set.alpha,
    })
}

pub fn run_infer(args: &InferArgs) -> Result<()> {
    let (ctx, y) = load_design(&args.data)?;
    let (lambda, rule) = resolve_lambda(&args.lambda, &ctx, &y, args.seed)?;
    let sol = fit_lasso(&ctx, &y, lambda)?;
    let plan = SamplingPlan {
        boundary_points: args.k,
        draws_per_point: args.n,
        burn_in: args.burn_in,
        thin: args.thin,
        tau_multiplier: args.tau_multiplier,
        seed: args.seed,
        store_y: false,
        verify_fraction: args.verify_fraction,
    };
    let out: Algorithm1Output =
        run_algorithm1_with_fit(&ctx, &y, sol, args.sigma2, args.alpha, &plan)?;
    let geom = &out.geometry;
    let variants = if args.variants.is_empty() {
        vec![CliVariant::Randomized]
    } else {
        args.variants.clone()
    };

    let mut intervals = Vec::new();
    for variant in &variants {
        match variant {
            CliVariant::Randomized => {
                for iv in &out.intervals {
                    intervals.push(json!({
                        "index": geom.active()[iv.j],
                        "position": iv.j,
                        "variant": "randomized",
                        "lower": iv.lower,
                        "upper": iv.upper,
                        "alpha": iv.alpha,
                    }));
                }
            }
            CliVariant::Conservative => {
                for j in 0..geom.active_size() {
                    let iv =
                        build_interval_conservative(&out.draws, &out.ellipsoid, j, args.alpha)?;
                    intervals.push(json!({
                        "index": geom.active()[j],
                        "position": j,
                        "variant": "conservative",
                        "lower": iv.lower,
                        "upper": iv.upper,
                        "alpha": iv.alpha,
                    }));
                }
            }
            CliVariant::Plugin => {
                let (draws, _) = conditional_draws_at(
                    &ctx,
                    geom,
                    &out.solution,
                    out.ellipsoid.mu_hat(),
                    args.sigma2,
                    lambda,
                    args.k * args.n,
                    &plan,
                    0,
                    derive_seed(args.seed, &[13]),
                )?;
                for j in 0..geom.active_size() {
                    let iv = build_interval_plugin(&draws, &out.ellipsoid, j, args.alpha)?;
                    intervals.push(json!({
                        "index": geom.active()[j],
                        "position": j,
                        "variant": "plugin",
                        "lower": iv.lower,
                        "upper": iv.upper,
                        "alpha": iv.alpha,
                    }));
                }
            }
        }
    }

    let q = geom.active_size();
    let mut sets = Vec::new();
    if args.pairs && q >= 2 {
        for i in 0..q {
            for j in (i + 1)..q {
                let mut h = DMatrix::zeros(2, q);
                h[(0, i)] = 1.0;
                h[(1, j)] = 1.0;
                let set = build_set(
                    &out.draws,
                    &out.ellipsoid,
                    &h,
                    args.delta.into(),
                    args.alpha,
                )?;
                sets.push(set_json(
                    "pairwise",
                    Some(vec![geom.active()[i], geom.active()[j]]),
                    &set,
                ));
            }
        }
    }
    if args.joint {
        let h = DMatrix::identity(q, q);
        let set = build_set(
            &out.draws,
            &out.ellipsoid,
            &h,
            args.delta.into(),
            args.alpha,
        )?;
        sets.push(set_json("joint", Some(geom.active().to_vec()), &set));
    }
    if let Some(path) = &args.h_matrix {
        let h = read_matrix(path, args.data.header)?;
        if h.ncols() != q {
            return Err(Error::InvalidConfig {
                message: format!("H has {} columns but |A| = {q}", h.ncols()),
            });
        }
        let set = build_set(
            &out.draws,
            &out.ellipsoid,
            &h,
            args.delta.into(),
            args.alpha,
        )?;
        sets.push(set_json("custom", None, &set));
    }

    let result = json!({
        "config": {
            "x": args.data.x.display().to_string(),
            "y": args.data.y.display().to_string(),
            "header": args.data.header,
            "lambda_rule": rule,
            "sigma2": args.sigma2,
            "alpha": args.alpha,
            "k": args.k,
            "n": args.n,
            "variants": variants.iter().map(|v| format!("{v:?}").to_lowercase()).collect::<Vec<_>>(),
            "pairs": args.pairs,
            "joint": args.joint,
            "delta": match args.delta { CliDelta::L2 => "2", CliDelta::LInf => "inf" },
            "burn_in": args.burn_in,
            "thin": args.thin,
            "tau_multiplier": args.tau_multiplier,
            "verify_fraction": args.verify_fraction,
            "seed": args.seed,
        },
        "lambda": lambda,
        "active_set": geom.active(),
        "nu_hat": out.ellipsoid.nu_hat().iter().copied().collect::<Vec<f64>>(),
        "ellipsoid": {
            "radius2": out.ellipsoid.radius2(),
            "alpha_outer": out.ellipsoid.alpha_outer(),
        },
        "pooled_draws": out.draws.len(),
        "verified_draws": out.draws.verified(),
        "intervals": intervals,
        "sets": sets,
        "chains": out.chains.iter().map(chain_json).collect::<Vec<_>>(),
    });
    print_json(&result)
}

pub fn run_oracle(args: &OracleArgs) -> Result<()> {
    let (ctx, y) = load_design(&args.data)?;
    let sol = fit_lasso(&ctx, &y, args.lambda)?;
    if sol.active.is_empty() {
        return Err(Error::EmptyModel);
    }
    let geom = ActiveSetGeometry::new(&ctx, &sol.active)?;
    let (mu, mu_source) = match &args.mu {
        Some(path) => (read_vector(path, args.data.header)?, "file"),
        None => ((ctx.x() * &sol.beta), "fitted"),
    };
    let config = json!({
        "x": args.data.x.display().to_string(),
        "y": args.data.y.display().to_string(),
        "header": args.data.header,
        "lambda": args.lambda,
        "sigma2": args.sigma2,
        "mu_source": mu_source,
        "n_accept": args.n_accept,
        "max_draws": args.max_draws,
        "compare_mcmc": args.compare_mcmc,
        "mcmc_draws": args.mcmc_draws,
        "seed": args.seed,
    });
    let oracle = match rejection_oracle(
        &ctx,
        &mu,
        args.sigma2,
        args.lambda,
        &sol.active,
        args.n_accept,
        args.max_draws,
        derive_seed(args.seed, &[40]),
    ) {
        Ok(o) => o,
        Err(Error::BudgetExhausted {
            accepted,
            requested,
            proposed,
            partial,
        }) => {
            // Emit the partial report before signalling failure.
            let out = json!({
                "config": config,
                "active_set": sol.active,
                "accepted": accepted,
                "proposed": proposed,
                "acceptance_rate": partial.acceptance_rate,
                "partial": true,
                "comparison": serde_json::Value::Null,
            });
            print_json(&out)?;
            return Err(Error::BudgetExhausted {
                accepted,
                requested,
                proposed,
                partial,
            });
        }
        Err(e) => return Err(e),
    };
    if oracle.acceptance_rate < 1e-4 {
        eprintln!(
            "warning: acceptance rate {:.3e} is very low; rejection sampling is only practical for small problems",
            oracle.acceptance_rate
        );
    }
    let comparison: Option<OracleMcmcComparison> = if args.compare_mcmc {
        Some(oracle_mcmc_ks(
            &ctx,
            &geom,
            &sol,
            &mu,
            args.sigma2,
            args.lambda,
            &oracle,
            args.mcmc_draws,
            args.burn_in,
            args.thin,
            args.tau_multiplier,
            derive_seed(args.seed, &[41]),
        )?)
    } else {
        None
    };
    let out = json!({
        "config": config,
        "active_set": sol.active,
        "accepted": oracle.accepted,
        "proposed": oracle.proposed,
        "acceptance_rate": oracle.acceptance_rate,
        "partial": false,
        "comparison": comparison.map(|c| serde_json::to_value(&c).unwrap_or(serde_json::Value::Null)),
    });
    print_json(&out)
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let output = run_experiment_to_dir(&cfg, &args.out, args.resume)?;
    print_json(&serde_json::to_value(&output.report)?)
}

/// Parses argv, installs the thread pool, and dispatches. Returns the
/// process exit code.
pub fn main_impl() -> i32 {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("POSTLASSO_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(t) = threads {
        if t > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global();
        }
    }
    let result = match &cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Sample(args) => run_sample(args),
        Command::Infer(args) => run_infer(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Simulate(args) => run_simulate(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: code={} kind={} msg={e}", e.exit_code(), e.kind());
            e.exit_code()
        }
    }
}
