//! Experiment driver: replicate loop, per-variant interval and set
//! construction, aggregation, and deterministic file output. Replicates run
//! concurrently on independent seed streams and are reduced in index order,
//! so reports and CSVs are byte-identical for a fixed config and seed.

use crate::design::DesignContext;
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, ExperimentMode, LambdaRule};
use crate::harness::{
    compute_interval_metrics, compute_set_metrics, generate_dataset, Dataset, DatasetSummary,
    DesignSpec, IntervalRecord, LambdaSeriesPoint, SetRecord, SimulationReport,
};
use crate::inference::{
    build_interval_conservative, build_interval_oracle, build_interval_plugin, build_set,
    conditional_draws_at, derive_seed, run_algorithm1_with_fit, Algorithm1Output, IntervalResult,
    IntervalVariant, NormDelta, SamplingPlan,
};
use crate::lasso::{cv_lambda_1se, fit_lasso, fit_lasso_with, lambda_grid, LassoOptions};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Everything one replicate contributes to the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub dataset_id: usize,
    pub lambda: Option<f64>,
    pub active: Vec<usize>,
    pub interval_records: Vec<IntervalRecord>,
    pub set_records: Vec<SetRecord>,
    /// Sensitivity mode: per-lambda-index (active size, covered, pairs).
    pub sensitivity: Vec<SensitivityPoint>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub lambda_index: usize,
    pub lambda: f64,
    pub active_size: usize,
    pub covered: usize,
    pub pairs: usize,
}

/// In-memory result of a whole experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: SimulationReport,
    pub replicates: Vec<ReplicateResult>,
}

fn resolve_lambda(
    cfg: &ExperimentConfig,
    ctx: &DesignContext,
    y: &DVector<f64>,
    replicate: usize,
) -> Result<f64> {
    match &cfg.lambda {
        LambdaRule::Fixed(v) => Ok(*v),
        LambdaRule::GridIndex { grid_index } => {
            let grid = lambda_grid(ctx, y, cfg.grid_count)?;
            Ok(grid[*grid_index])
        }
        LambdaRule::Named(_) => {
            let grid = lambda_grid(ctx, y, cfg.grid_count)?;
            cv_lambda_1se(
                ctx,
                y,
                cfg.cv_folds,
                &grid,
                derive_seed(cfg.seed, &[11, replicate as u64]),
            )
        }
    }
}

fn sampling_plan(cfg: &ExperimentConfig, replicate: usize) -> SamplingPlan {
    SamplingPlan {
        boundary_points: cfg.k_boundary,
        draws_per_point: cfg.n_keep,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        tau_multiplier: cfg.tau_multiplier,
        seed: derive_seed(cfg.seed, &[12, replicate as u64]),
        store_y: false,
        verify_fraction: cfg.verify_fraction,
    }
}

fn interval_record(
    dataset_id: usize,
    global_j: usize,
    truth: f64,
    in_a0: bool,
    iv: &IntervalResult,
) -> IntervalRecord {
    IntervalRecord {
        dataset_id,
        j: global_j,
        variant: iv.variant,
        lower: iv.lower,
        upper: iv.upper,
        truth,
        covered: iv.covers(truth),
        length: iv.length(),
        in_a0,
    }
}

fn skipped(dataset_id: usize, lambda: f64, reason: String) -> ReplicateResult {
    ReplicateResult {
        dataset_id,
        lambda: Some(lambda),
        active: Vec::new(),
        interval_records: Vec::new(),
        set_records: Vec::new(),
        sensitivity: Vec::new(),
        note: Some(reason),
    }
}

fn run_interval_replicate(cfg: &ExperimentConfig, r: usize) -> Result<ReplicateResult> {
    let data = make_dataset(cfg, r)?;
    let ctx = DesignContext::new(data.x.clone())?;
    let lambda = resolve_lambda(cfg, &ctx, &data.y, r)?;
    let sol = fit_lasso(&ctx, &data.y, lambda)?;
    if sol.active.is_empty() {
        return Ok(skipped(r, lambda, "empty active set".to_string()));
    }
    let plan = sampling_plan(cfg, r);
    let out = run_algorithm1_with_fit(&ctx, &data.y, sol, cfg.sigma2, cfg.alpha, &plan)?;
    let geom = &out.geometry;
    let nu_true = geom.project_onto_active(&data.mu0);
    let a0 = cfg.a0_indices();
    let in_a0 = |j: usize| a0.binary_search(&j).is_ok();

    let total_draws = cfg.k_boundary * cfg.n_keep;
    let mut records = Vec::new();
    for variant in &cfg.variants {
        match variant {
            IntervalVariant::Randomized => {
                for iv in &out.intervals {
                    let gj = geom.active()[iv.j];
                    records.push(interval_record(r, gj, nu_true[iv.j], in_a0(gj), iv));
                }
            }
            IntervalVariant::Conservative => {
                for j in 0..geom.active_size() {
                    let iv = build_interval_conservative(&out.draws, &out.ellipsoid, j, cfg.alpha)?;
                    let gj = geom.active()[j];
                    records.push(interval_record(r, gj, nu_true[j], in_a0(gj), &iv));
                }
            }
            IntervalVariant::Plugin => {
                let (draws, _) = conditional_draws_at(
                    &ctx,
                    geom,
                    &out.solution,
                    out.ellipsoid.mu_hat(),
                    cfg.sigma2,
                    lambda,
                    total_draws,
                    &plan,
                    0,
                    derive_seed(cfg.seed, &[13, r as u64]),
                )?;
                for j in 0..geom.active_size() {
                    let iv = build_interval_plugin(&draws, &out.ellipsoid, j, cfg.alpha)?;
                    let gj = geom.active()[j];
                    records.push(interval_record(r, gj, nu_true[j], in_a0(gj), &iv));
                }
            }
            IntervalVariant::Oracle => {
                let (draws, _) = conditional_draws_at(
                    &ctx,
                    geom,
                    &out.solution,
                    &data.mu0,
                    cfg.sigma2,
                    lambda,
                    total_draws,
                    &plan,
                    0,
                    derive_seed(cfg.seed, &[14, r as u64]),
                )?;
                for j in 0..geom.active_size() {
                    let iv = build_interval_oracle(&draws, &out.ellipsoid, &nu_true, j, cfg.alpha)?;
                    let gj = geom.active()[j];
                    records.push(interval_record(r, gj, nu_true[j], in_a0(gj), &iv));
                }
            }
        }
    }

    let set_records = if cfg.mode == ExperimentMode::Sets {
        build_set_records(cfg, r, &out, &nu_true, &a0)?
    } else {
        Vec::new()
    };

    Ok(ReplicateResult {
        dataset_id: r,
        lambda: Some(lambda),
        active: geom.active().to_vec(),
        interval_records: records,
        set_records,
        sensitivity: Vec::new(),
        note: None,
    })
}

fn build_set_records(
    cfg: &ExperimentConfig,
    r: usize,
    out: &Algorithm1Output,
    nu_true: &DVector<f64>,
    a0: &[usize],
) -> Result<Vec<SetRecord>> {
    let geom = &out.geometry;
    let q = geom.active_size();
    let in_a0 = |j: usize| a0.binary_search(&j).is_ok();
    let mut records = Vec::new();
    let volume_star = |log_volume: f64| (log_volume / q as f64).exp();
    if cfg.pairwise && q >= 2 {
        for i in 0..q {
            for j in (i + 1)..q {
                let mut h = DMatrix::zeros(2, q);
                h[(0, i)] = 1.0;
                h[(1, j)] = 1.0;
                let set = build_set(&out.draws, &out.ellipsoid, &h, cfg.delta, cfg.alpha)?;
                let target = DVector::from_column_slice(&[nu_true[i], nu_true[j]]);
                records.push(SetRecord {
                    dataset_id: r,
                    family: "pairwise".to_string(),
                    m: 2,
                    delta: cfg.delta,
                    radius: set.radius,
                    diameter: set.diameter,
                    volume: set.volume,
                    volume_star: volume_star(set.log_volume),
                    covered: set.covers(&target),
                    excludes_zero: !set.covers(&DVector::zeros(2)),
                    all_true_support: in_a0(geom.active()[i]) && in_a0(geom.active()[j]),
                });
            }
        }
    }
    if cfg.joint {
        let h = DMatrix::identity(q, q);
        let set = build_set(&out.draws, &out.ellipsoid, &h, cfg.delta, cfg.alpha)?;
        records.push(SetRecord {
            dataset_id: r,
            family: "joint".to_string(),
            m: q,
            delta: cfg.delta,
            radius: set.radius,
            diameter: set.diameter,
            volume: set.volume,
            volume_star: volume_star(set.log_volume),
            covered: set.covers(nu_true),
            excludes_zero: !set.covers(&DVector::zeros(q)),
            all_true_support: geom.active().iter().all(|&j| in_a0(j)),
        });
    }
    Ok(records)
}

fn run_sensitivity_replicate(cfg: &ExperimentConfig, r: usize) -> Result<ReplicateResult> {
    let data = make_dataset(cfg, r)?;
    let ctx = DesignContext::new(data.x.clone())?;
    let grid = lambda_grid(&ctx, &data.y, cfg.grid_count)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut warm: Option<DVector<f64>> = None;
    for (i, &lam) in grid.iter().enumerate() {
        let sol = fit_lasso_with(&ctx, &data.y, lam, LassoOptions::default(), warm.as_ref())?;
        warm = Some(sol.beta.clone());
        let q = sol.active.len();
        if q == 0 || q > ctx.rank() {
            points.push(SensitivityPoint {
                lambda_index: i,
                lambda: lam,
                active_size: q,
                covered: 0,
                pairs: 0,
            });
            continue;
        }
        let mut plan = sampling_plan(cfg, r);
        plan.seed = derive_seed(cfg.seed, &[12, r as u64, i as u64]);
        let out = run_algorithm1_with_fit(&ctx, &data.y, sol, cfg.sigma2, cfg.alpha, &plan)?;
        let nu_true = out.geometry.project_onto_active(&data.mu0);
        let covered = out
            .intervals
            .iter()
            .filter(|iv| iv.covers(nu_true[iv.j]))
            .count();
        points.push(SensitivityPoint {
            lambda_index: i,
            lambda: lam,
            active_size: q,
            covered,
            pairs: out.intervals.len(),
        });
    }
    Ok(ReplicateResult {
        dataset_id: r,
        lambda: None,
        active: Vec::new(),
        interval_records: Vec::new(),
        set_records: Vec::new(),
        sensitivity: points,
        note: None,
    })
}

fn make_dataset(cfg: &ExperimentConfig, r: usize) -> Result<Dataset> {
    let spec = DesignSpec {
        kind: cfg.design,
        n: cfg.n,
        p: cfg.p,
        a0: cfg.a0_indices(),
        beta_range: (cfg.beta_low, cfg.beta_high),
        sigma2: cfg.sigma2,
        seed: derive_seed(cfg.seed, &[10, r as u64]),
    };
    generate_dataset(&spec)
}

fn run_replicate(cfg: &ExperimentConfig, r: usize) -> Result<ReplicateResult> {
    match cfg.mode {
        ExperimentMode::Intervals | ExperimentMode::Sets => run_interval_replicate(cfg, r),
        ExperimentMode::Sensitivity => run_sensitivity_replicate(cfg, r),
    }
}

/// Runs every replicate (possibly resuming from `partial/`), aggregates,
/// and assembles the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_impl(cfg, None, false)
}

/// Like [`run_experiment`], also writing `report.json`, `records.csv`, and
/// (per mode) `sets.csv` / `lambda_series.csv` into `out_dir`. With
/// `resume`, finished replicates found under `out_dir/partial/` are reused.
pub fn run_experiment_to_dir(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<ExperimentOutput> {
    run_experiment_impl(cfg, Some(out_dir), resume)
}

fn partial_path(out_dir: &Path, r: usize) -> std::path::PathBuf {
    out_dir
        .join("partial")
        .join(format!("replicate_{r:05}.json"))
}

fn run_experiment_impl(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    resume: bool,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("partial"))?;
    }

    let results: Result<Vec<ReplicateResult>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            if resume {
                if let Some(dir) = out_dir {
                    let path = partial_path(dir, r);
                    if path.exists() {
                        let text = fs::read_to_string(&path)?;
                        if let Ok(res) = serde_json::from_str::<ReplicateResult>(&text) {
                            return Ok(res);
                        }
                    }
                }
            }
            let res = run_replicate(cfg, r)?;
            if let Some(dir) = out_dir {
                let path = partial_path(dir, r);
                fs::write(&path, serde_json::to_string(&res)?)?;
            }
            Ok(res)
        })
        .collect();
    let replicates = results?;

    let report = assemble_report(cfg, &replicates)?;
    if let Some(dir) = out_dir {
        write_outputs(cfg, dir, &report, &replicates)?;
    }
    Ok(ExperimentOutput { report, replicates })
}

fn assemble_report(cfg: &ExperimentConfig, reps: &[ReplicateResult]) -> Result<SimulationReport> {
    let mut interval_records = Vec::new();
    let mut set_records = Vec::new();
    let mut notes = Vec::new();
    let mut per_dataset = Vec::new();
    let mut completed = 0usize;
    for rep in reps {
        if let Some(note) = &rep.note {
            notes.push(format!("dataset {}: {note}", rep.dataset_id));
        } else {
            completed += 1;
        }
        interval_records.extend(rep.interval_records.iter().cloned());
        set_records.extend(rep.set_records.iter().cloned());
        if !rep.interval_records.is_empty() {
            let mut coverage = BTreeMap::new();
            for variant in &cfg.variants {
                let rows: Vec<&IntervalRecord> = rep
                    .interval_records
                    .iter()
                    .filter(|rec| rec.variant == *variant)
                    .collect();
                if !rows.is_empty() {
                    let c =
                        rows.iter().filter(|rec| rec.covered).count() as f64 / rows.len() as f64;
                    coverage.insert(variant.as_str().to_string(), c);
                }
            }
            per_dataset.push(DatasetSummary {
                dataset_id: rep.dataset_id,
                lambda: rep.lambda.unwrap_or(f64::NAN),
                active_size: rep.active.len(),
                coverage,
            });
        }
    }

    let mut lambda_series = Vec::new();
    if cfg.mode == ExperimentMode::Sensitivity {
        for i in 0..cfg.grid_count {
            let pts: Vec<&SensitivityPoint> = reps
                .iter()
                .flat_map(|rep| rep.sensitivity.iter())
                .filter(|pt| pt.lambda_index == i)
                .collect();
            if pts.is_empty() {
                continue;
            }
            let covered: usize = pts.iter().map(|pt| pt.covered).sum();
            let pairs: usize = pts.iter().map(|pt| pt.pairs).sum();
            lambda_series.push(LambdaSeriesPoint {
                lambda_index: i,
                n_datasets: pts.len(),
                mean_active_size: pts.iter().map(|pt| pt.active_size as f64).sum::<f64>()
                    / pts.len() as f64,
                coverage: if pairs == 0 {
                    None
                } else {
                    Some(covered as f64 / pairs as f64)
                },
                n_pairs: pairs,
            });
        }
    }

    if cfg.replicates < 20 && cfg.mode != ExperimentMode::Sensitivity {
        notes.push(format!(
            "desk scale: {} replicates (paper used 20); comparison tolerances widened accordingly",
            cfg.replicates
        ));
    }

    Ok(SimulationReport {
        replicates: cfg.replicates,
        completed,
        variants: compute_interval_metrics(&interval_records),
        sets: compute_set_metrics(&set_records),
        per_dataset,
        lambda_series,
        notes,
        config: serde_json::to_value(cfg)?,
    })
}

/// 17 significant digits, exact round-trip for every finite f64.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_outputs(
    cfg: &ExperimentConfig,
    dir: &Path,
    report: &SimulationReport,
    reps: &[ReplicateResult],
) -> Result<()> {
    let mut report_file = fs::File::create(dir.join("report.json"))?;
    writeln!(report_file, "{}", serde_json::to_string_pretty(report)?)?;

    // Interval records, ordered deterministically.
    let mut rows: Vec<&IntervalRecord> = reps
        .iter()
        .flat_map(|r| r.interval_records.iter())
        .collect();
    rows.sort_by(|a, b| {
        (a.dataset_id, a.variant.as_str(), a.j).cmp(&(b.dataset_id, b.variant.as_str(), b.j))
    });
    let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
    w.write_record([
        "dataset_id",
        "j",
        "variant",
        "lower",
        "upper",
        "covered",
        "length",
    ])?;
    for r in rows {
        w.write_record([
            r.dataset_id.to_string(),
            r.j.to_string(),
            r.variant.as_str().to_string(),
            fmt_float(r.lower),
            fmt_float(r.upper),
            (r.covered as u8).to_string(),
            fmt_float(r.length),
        ])?;
    }
    w.flush()?;

    if cfg.mode == ExperimentMode::Sets {
        let mut rows: Vec<&SetRecord> = reps.iter().flat_map(|r| r.set_records.iter()).collect();
        rows.sort_by(|a, b| (a.dataset_id, &a.family, a.m).cmp(&(b.dataset_id, &b.family, b.m)));
        let mut w = csv::Writer::from_path(dir.join("sets.csv"))?;
        w.write_record([
            "dataset_id",
            "family",
            "m",
            "delta",
            "radius",
            "diameter",
            "volume",
            "volume_star",
            "covered",
            "excludes_zero",
            "all_true_support",
        ])?;
        for r in rows {
            w.write_record([
                r.dataset_id.to_string(),
                r.family.clone(),
                r.m.to_string(),
                match r.delta {
                    NormDelta::L2 => "l2".to_string(),
                    NormDelta::LInf => "linf".to_string(),
                },
                fmt_float(r.radius),
                fmt_float(r.diameter),
                fmt_float(r.volume),
                fmt_float(r.volume_star),
                (r.covered as u8).to_string(),
                (r.excludes_zero as u8).to_string(),
                (r.all_true_support as u8).to_string(),
            ])?;
        }
        w.flush()?;
    }

    if cfg.mode == ExperimentMode::Sensitivity {
        let mut w = csv::Writer::from_path(dir.join("lambda_series.csv"))?;
        w.write_record([
            "lambda_index",
            "n_datasets",
            "mean_active_size",
            "coverage",
            "n_pairs",
        ])?;
        for pt in &report.lambda_series {
            w.write_record([
                pt.lambda_index.to_string(),
                pt.n_datasets.to_string(),
                fmt_float(pt.mean_active_size),
                pt.coverage.map(fmt_float).unwrap_or_default(),
                pt.n_pairs.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}
