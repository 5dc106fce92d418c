use std::fs::File;
use std::path::{Path, PathBuf};

use debtsim::analysis::{
    default_kappa, lil_stats_from_rows, policy_cost, predicted_drift, ssc_from_rows, ssc_stats,
    theoretical_bounds, DriftEstimate, DriftObserver, LilStats, PolicyCost, Quantiles, SscStats,
    TheoreticalBound,
};
use debtsim::distributions::{diffusion_constants, sigma_p_tau};
use debtsim::engine::{run_observed, FrameObserver, RunResult, RNG_ALGORITHM};
use debtsim::feasibility::{check_feasibility, FeasibilityReport, MAX_ENUMERATED_CLIENTS};
use debtsim::model::SystemConfig;
use debtsim::policy::PolicySpec;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, ExperimentFile};
use crate::error::{CliError, CliResult};
use crate::output::{to_json, write_atomic, write_trace_csv, RunSummary};

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityOutput {
    pub config_hash: String,
    pub rng_algorithm: &'static str,
    pub throughputs: Vec<f64>,
    pub report: FeasibilityReport<f64>,
}

/// Evaluates every subset constraint. The caller exits with 2 when the
/// report is infeasible.
pub fn feasibility(file: &ExperimentFile, tolerance: f64) -> CliResult<FeasibilityOutput> {
    let system = file.system()?;
    let report = check_feasibility(&system, tolerance)?;
    let hash = crate::config::hash_value(&system);
    Ok(FeasibilityOutput {
        config_hash: hash,
        rng_algorithm: RNG_ALGORITHM,
        throughputs: system.throughputs.clone(),
        report,
    })
}

fn require_feasible(system: &SystemConfig<f64>) -> CliResult<()> {
    if system.n_clients() > MAX_ENUMERATED_CLIENTS {
        eprintln!(
            "warning: {} clients; skipping the feasibility check (limit {MAX_ENUMERATED_CLIENTS})",
            system.n_clients()
        );
        return Ok(());
    }
    let report = check_feasibility(system, debtsim::feasibility::DEFAULT_TIGHT_TOLERANCE)?;
    if report.feasible {
        return Ok(());
    }
    let violated: Vec<String> = report.violated_subsets.iter().map(|s| s.to_string()).collect();
    Err(CliError::Negative(format!(
        "throughputs lie outside the rate region; violated subsets: {}",
        violated.join(" ")
    )))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

struct Outcome {
    result: RunResult<f64>,
    drift: Option<DriftEstimate<f64>>,
}

fn run_one(exp: &Experiment, policy: &PolicySpec<f64>, seed: u64, stride: u64) -> CliResult<Outcome> {
    let rc = exp.run_config(policy, seed).with_stride(stride);
    if exp.system.n_clients() == 2 {
        let kappa = exp.drift_kappa.unwrap_or_else(|| default_kappa(&exp.system));
        let mut obs = DriftObserver::new(&exp.system, kappa)?;
        let result = run_observed(&rc, &mut obs)?;
        Ok(Outcome {
            result,
            drift: Some(obs.estimate()),
        })
    } else {
        let mut none = |_: &_, _: &_, _: &_| {};
        let result = run_observed(&rc, &mut none as &mut dyn FrameObserver<f64>)?;
        Ok(Outcome { result, drift: None })
    }
}

fn pairs(exp: &Experiment) -> Vec<(&PolicySpec<f64>, u64)> {
    exp.policies
        .iter()
        .flat_map(|p| exp.seeds.iter().map(move |&s| (p, s)))
        .collect()
}

pub fn artifact_stem(policy: &PolicySpec<f64>, seed: u64) -> String {
    format!("{policy}-{seed}")
}

/// Runs every (policy, seed) pair and writes `{policy}-{seed}.csv` and
/// `.json` into the output directory. Returns the CSV paths.
pub fn simulate(exp: &Experiment) -> CliResult<Vec<PathBuf>> {
    require_feasible(&exp.system)?;
    ensure_dir(&exp.out_dir)?;
    let hash = exp.config_hash();
    let n = exp.system.n_clients();
    pairs(exp)
        .into_par_iter()
        .map(|(policy, seed)| {
            let out = run_one(exp, policy, seed, exp.record_stride())?;
            let stem = artifact_stem(policy, seed);
            let csv_path = exp.out_dir.join(format!("{stem}.csv"));
            write_atomic(&csv_path, |w| {
                write_trace_csv(w, n, &out.result.series).map_err(std::io::Error::other)
            })?;
            let summary = RunSummary::new(&out.result, &exp.system, &hash, out.drift);
            let json_path = exp.out_dir.join(format!("{stem}.json"));
            write_atomic(&json_path, |w| w.write_all(to_json(&summary).as_bytes()))?;
            Ok(csv_path)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftAggregate {
    pub kappa: f64,
    pub predicted: [f64; 2],
    /// Conditioning events summed over seeds, per side.
    pub counts: [u64; 2],
    /// Event-weighted mean over all seeds, per side.
    pub means: [Option<f64>; 2],
    pub count: u64,
    pub mean: Option<f64>,
    pub per_seed_mean: Option<Quantiles>,
}

fn pool_drift(estimates: &[DriftEstimate<f64>], predicted: [f64; 2]) -> Option<DriftAggregate> {
    let first = estimates.first()?;
    let mut counts = [0u64; 2];
    let mut sums = [0.0; 2];
    for e in estimates {
        for (i, side) in e.sides.iter().enumerate() {
            counts[i] += side.count;
            sums[i] += side.mean.unwrap_or(0.0) * side.count as f64;
        }
    }
    let count = counts[0] + counts[1];
    let per_seed: Vec<f64> = estimates.iter().filter_map(|e| e.mean).collect();
    Some(DriftAggregate {
        kappa: first.kappa,
        predicted,
        counts,
        means: [0, 1].map(|i| (counts[i] > 0).then(|| sums[i] / counts[i] as f64)),
        count,
        mean: (count > 0).then(|| (sums[0] + sums[1]) / count as f64),
        per_seed_mean: Quantiles::of(&per_seed),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyAggregate {
    pub policy: String,
    pub runs: usize,
    pub failures: Vec<SeedFailure>,
    pub max_scaled_debt: Vec<Option<Quantiles>>,
    pub max_scaled_martingale: Vec<Option<Quantiles>>,
    pub max_scaled_weighted: Vec<Option<Quantiles>>,
    pub min_scaled_weighted: Vec<Option<Quantiles>>,
    pub max_scaled_sum: Option<Quantiles>,
    pub min_scaled_sum: Option<Quantiles>,
    pub ssc_trend_slope: Option<Quantiles>,
    pub ssc_final_value: Option<Quantiles>,
    pub max_delivery_spread: Option<u64>,
    pub drift: Option<DriftAggregate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub rng_algorithm: &'static str,
    pub frames: u64,
    pub t_min: u64,
    pub seeds: Vec<u64>,
    pub runs: usize,
    pub failed_runs: usize,
    pub martingale_limit: Vec<f64>,
    pub sigma_p_tau: Option<f64>,
    pub bounds: Vec<TheoreticalBound<f64>>,
    pub policies: Vec<PolicyAggregate>,
    /// Cost comparison; present for symmetric systems with two or more policies.
    pub cost: Option<Vec<PolicyCost<f64>>>,
    pub cost_floor: Option<f64>,
}

fn per_client(results: &[&RunResult<f64>], n: usize, f: impl Fn(&RunResult<f64>) -> &[f64]) -> Vec<Option<Quantiles>> {
    (0..n)
        .map(|j| Quantiles::of(&results.iter().map(|r| f(r)[j]).collect::<Vec<_>>()))
        .collect()
}

/// Runs every pair and writes one aggregate `sweep.json`. Only the aggregate
/// is written; the engine's exact window statistics make traces unnecessary.
pub fn sweep(exp: &Experiment) -> CliResult<(SweepReport, PathBuf)> {
    require_feasible(&exp.system)?;
    ensure_dir(&exp.out_dir)?;
    let n = exp.system.n_clients();
    let outcomes: Vec<(usize, u64, CliResult<Outcome>)> = exp
        .policies
        .iter()
        .enumerate()
        .flat_map(|(i, _)| exp.seeds.iter().map(move |&s| (i, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, seed)| (i, seed, run_one(exp, &exp.policies[i], seed, exp.frames)))
        .collect();
    let failed_runs = outcomes.iter().filter(|o| o.2.is_err()).count();
    if failed_runs == outcomes.len() {
        let first = outcomes
            .into_iter()
            .find_map(|o| o.2.err())
            .expect("at least one run");
        return Err(first);
    }
    let predicted = predicted_drift(&exp.system).ok();
    let mut policies = Vec::new();
    let mut by_policy: Vec<(String, Vec<RunResult<f64>>)> = Vec::new();
    for (i, policy) in exp.policies.iter().enumerate() {
        let mut failures = Vec::new();
        let mut ok = Vec::new();
        let mut drifts = Vec::new();
        for (pi, seed, o) in &outcomes {
            if *pi != i {
                continue;
            }
            match o {
                Ok(out) => {
                    ok.push(&out.result);
                    drifts.extend(out.drift.clone());
                }
                Err(e) => failures.push(SeedFailure {
                    seed: *seed,
                    error: e.to_string(),
                }),
            }
        }
        let windowed: Vec<&RunResult<f64>> =
            ok.iter().copied().filter(|r| r.extrema.samples > 0).collect();
        let sscs: Vec<SscStats<f64>> = ok.iter().map(|r| ssc_stats(r, &exp.system)).collect();
        let scalar = |f: &dyn Fn(&RunResult<f64>) -> f64| {
            Quantiles::of(&windowed.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        policies.push(PolicyAggregate {
            policy: policy.to_string(),
            runs: ok.len(),
            failures,
            max_scaled_debt: per_client(&windowed, n, |r| &r.extrema.max_scaled_debt),
            max_scaled_martingale: per_client(&windowed, n, |r| &r.extrema.max_scaled_martingale),
            max_scaled_weighted: per_client(&windowed, n, |r| &r.extrema.max_scaled_weighted),
            min_scaled_weighted: per_client(&windowed, n, |r| &r.extrema.min_scaled_weighted),
            max_scaled_sum: scalar(&|r| r.extrema.max_scaled_sum),
            min_scaled_sum: scalar(&|r| r.extrema.min_scaled_sum),
            ssc_trend_slope: Quantiles::of(
                &sscs.iter().filter_map(|s| s.trend_slope).collect::<Vec<_>>(),
            ),
            ssc_final_value: Quantiles::of(
                &sscs.iter().filter_map(|s| s.grid.last().map(|g| g.1)).collect::<Vec<_>>(),
            ),
            max_delivery_spread: ok.iter().map(|r| r.max_delivery_spread).max(),
            drift: predicted.and_then(|p| pool_drift(&drifts, p)),
        });
        by_policy.push((policy.to_string(), windowed.into_iter().cloned().collect()));
    }
    let symmetric = exp.system.is_symmetric();
    let sigma = sigma_p_tau(&exp.system.channel).ok();
    let cost = if symmetric && by_policy.len() >= 2 {
        match policy_cost(&by_policy, &exp.system) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("warning: policy cost not computed: {e}");
                None
            }
        }
    } else {
        None
    };
    let report = SweepReport {
        config_hash: exp.config_hash(),
        rng_algorithm: RNG_ALGORITHM,
        frames: exp.frames,
        t_min: exp.t_min,
        seeds: exp.seeds.clone(),
        runs: outcomes.len(),
        failed_runs,
        martingale_limit: diffusion_constants(&exp.system).sqrt_c,
        sigma_p_tau: sigma,
        bounds: theoretical_bounds(&exp.system)?,
        policies,
        cost_floor: cost.as_ref().and(sigma.map(|s| s / n as f64)),
        cost,
    };
    let path = exp.out_dir.join("sweep.json");
    write_atomic(&path, |w| w.write_all(to_json(&report).as_bytes()))?;
    Ok((report, path))
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceAnalysis {
    pub config_hash: String,
    pub rng_algorithm: &'static str,
    pub trace: String,
    pub rows: usize,
    pub lil: Option<LilStats<f64>>,
    pub lil_error: Option<String>,
    pub ssc: SscStats<f64>,
}

/// Re-analyzes a trace CSV. Extrema only see the recorded rows.
pub fn analyze(file: &ExperimentFile, trace: &Path, t_min: u64) -> CliResult<TraceAnalysis> {
    let system = file.system()?;
    let f = File::open(trace).map_err(|e| CliError::io(trace, e))?;
    let rows = crate::output::read_trace_csv(f, &system)?;
    let every_frame = rows.windows(2).all(|w| w[1].t == w[0].t + 1);
    let (lil, lil_error) = match lil_stats_from_rows(&rows, &system, t_min, every_frame) {
        Ok(l) => (Some(l), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(TraceAnalysis {
        config_hash: crate::config::hash_value(&system),
        rng_algorithm: RNG_ALGORITHM,
        trace: trace.display().to_string(),
        rows: rows.len(),
        lil,
        lil_error,
        ssc: ssc_from_rows(&rows, &system, t_min),
    })
}
