//! Statistics over simulated runs: iterated-logarithm extrema and the
//! theoretical envelopes they are compared with, state-space collapse,
//! conditional drift of the two-client gap, and the symmetric policy cost.
//!
//! Almost-sure limits are proxied by extrema over a finite window
//! `[t_min, T]`; finite runs are expected to sit somewhat inside the limits.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distributions::{
    delivery_probabilities, diffusion_constants, idle_table, sigma_p_tau,
};
use crate::engine::{
    run_observed, weighted_gap, FrameObserver, RunConfig, RunResult, SeriesRow, SSC_GRID_RATIO,
};
use crate::error::{Error, Result};
use crate::feasibility::DEFAULT_TIGHT_TOLERANCE;
use crate::model::{ClientId, DebtState, FrameTrace, SystemConfig};
use crate::num::Scalar;
use crate::policy::PolicySpec;

/// Smallest window start accepted by [`lil_stats`].
pub const MIN_T_MIN: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Two clients, one slot per frame: `p_j (√c_1 + √c_2) / 2`.
    TwoClientsSingleSlot,
    /// Two clients, longer frames: `p_j (√c_1 + √c_2 + σ_I) / 2`.
    TwoClientsFrame,
    /// Any number of clients, one slot: `p_j Σ_k √c_k / N`.
    SingleSlot,
    /// Symmetric clients: the limit itself, `p σ_{p,τ} / N`.
    SymmetricLimit,
}

/// Envelope for `limsup d_j(t)/φ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoreticalBound<T> {
    pub kind: BoundKind,
    pub per_client: Vec<T>,
    /// True when the value is the limit rather than an upper bound.
    pub exact: bool,
}

/// Slack of the full-set constraint, `τ(1 - I_full) - Σ q_j/p_j`.
pub fn full_set_slack<T: Scalar>(config: &SystemConfig<T>) -> Result<T> {
    let busy = idle_table(config.channel.all_clients(), &config.channel)?.busy_time();
    let load: T = config
        .throughputs
        .iter()
        .zip(config.reliabilities())
        .map(|(&q, &p)| q / p)
        .sum();
    Ok(busy - load)
}

/// Every envelope whose hypotheses on `(N, τ, symmetry)` hold. All of them
/// presume the throughputs sit on the full-set face; see
/// [`LilStats::on_full_set_face`].
pub fn theoretical_bounds<T: Scalar>(config: &SystemConfig<T>) -> Result<Vec<TheoreticalBound<T>>> {
    let n = config.n_clients();
    let tau = config.period();
    let p = config.reliabilities();
    let dc = diffusion_constants(config);
    let sum_sqrt_c: T = dc.sqrt_c.iter().copied().sum();
    let half = T::lit(0.5);
    let mut out = Vec::new();
    if n == 2 && tau == 1 {
        out.push(TheoreticalBound {
            kind: BoundKind::TwoClientsSingleSlot,
            per_client: p.iter().map(|&pj| pj * sum_sqrt_c * half).collect(),
            exact: false,
        });
    }
    if n == 2 && tau > 1 {
        let sigma_idle = idle_table(config.channel.all_clients(), &config.channel)?.idle_std();
        out.push(TheoreticalBound {
            kind: BoundKind::TwoClientsFrame,
            per_client: p
                .iter()
                .map(|&pj| pj * (sum_sqrt_c + sigma_idle) * half)
                .collect(),
            exact: false,
        });
    }
    if tau == 1 {
        let nn = T::count(n as u64);
        out.push(TheoreticalBound {
            kind: BoundKind::SingleSlot,
            per_client: p.iter().map(|&pj| pj * sum_sqrt_c / nn).collect(),
            exact: false,
        });
    }
    if config.is_symmetric() {
        let sigma = sigma_p_tau(&config.channel)?;
        let value = p[0] * sigma / T::count(n as u64);
        out.push(TheoreticalBound {
            kind: BoundKind::SymmetricLimit,
            per_client: vec![value; n],
            exact: true,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilStats<T> {
    pub t_min: u64,
    pub samples: u64,
    /// False when the extrema were recomputed from decimated rows.
    pub every_frame: bool,
    pub on_full_set_face: bool,
    pub max_scaled_debt: Vec<T>,
    pub max_scaled_martingale: Vec<T>,
    /// `√c_j`, the almost-sure limit of `M_j/φ`.
    pub martingale_limit: Vec<T>,
    pub max_scaled_weighted: Vec<T>,
    pub min_scaled_weighted: Vec<T>,
    pub max_scaled_sum: T,
    pub min_scaled_sum: T,
    pub bounds: Vec<TheoreticalBound<T>>,
    /// Upper envelopes that some client's window maximum of `d_j/φ` exceeds.
    /// Reported, not enforced: finite windows can overshoot a limsup bound.
    pub exceeded_bounds: Vec<BoundKind>,
}

impl<T: Scalar> LilStats<T> {
    pub fn bound(&self, kind: BoundKind) -> Option<&TheoreticalBound<T>> {
        self.bounds.iter().find(|b| b.kind == kind)
    }
}

struct Extremes<T> {
    samples: u64,
    max_debt: Vec<T>,
    max_mart: Vec<T>,
    max_w: Vec<T>,
    min_w: Vec<T>,
    max_sum: T,
    min_sum: T,
}

fn extremes_from_rows<T: Scalar>(rows: &[SeriesRow<T>], p: &[T], t_min: u64) -> Extremes<T> {
    let n = p.len();
    let mut e = Extremes {
        samples: 0,
        max_debt: vec![T::neg_infinity(); n],
        max_mart: vec![T::neg_infinity(); n],
        max_w: vec![T::neg_infinity(); n],
        min_w: vec![T::infinity(); n],
        max_sum: T::neg_infinity(),
        min_sum: T::infinity(),
    };
    for row in rows.iter().filter(|r| r.t >= t_min) {
        e.samples += 1;
        let mut sum = T::zero();
        for j in 0..n {
            let d = row.debts[j] / row.phi;
            let w = d / p[j];
            sum += w;
            e.max_debt[j] = e.max_debt[j].max(d);
            e.max_mart[j] = e.max_mart[j].max(row.martingale[j] / row.phi);
            e.max_w[j] = e.max_w[j].max(w);
            e.min_w[j] = e.min_w[j].min(w);
        }
        e.max_sum = e.max_sum.max(sum);
        e.min_sum = e.min_sum.min(sum);
    }
    e
}

/// Running extrema over `[t_min, T]` with applicable envelopes attached.
///
/// Uses the per-frame extrema tracked by the engine when `t_min` matches the
/// run's window, otherwise recomputes from the recorded rows.
pub fn lil_stats<T: Scalar>(
    result: &RunResult<T>,
    config: &SystemConfig<T>,
    t_min: u64,
) -> Result<LilStats<T>> {
    if t_min == result.extrema.t_min && t_min >= MIN_T_MIN {
        let x = &result.extrema;
        if x.samples == 0 {
            return Err(Error::arg(format!(
                "no frames in the window [{t_min}, {}]",
                result.meta.frames
            )));
        }
        return assemble_lil(
            config,
            t_min,
            true,
            Extremes {
                samples: x.samples,
                max_debt: x.max_scaled_debt.clone(),
                max_mart: x.max_scaled_martingale.clone(),
                max_w: x.max_scaled_weighted.clone(),
                min_w: x.min_scaled_weighted.clone(),
                max_sum: x.max_scaled_sum,
                min_sum: x.min_scaled_sum,
            },
        );
    }
    lil_stats_from_rows(&result.series, config, t_min, result.meta.record_stride == 1)
}

/// Same as [`lil_stats`] but from recorded rows only (e.g. a re-read CSV).
pub fn lil_stats_from_rows<T: Scalar>(
    rows: &[SeriesRow<T>],
    config: &SystemConfig<T>,
    t_min: u64,
    every_frame: bool,
) -> Result<LilStats<T>> {
    if t_min < MIN_T_MIN {
        return Err(Error::arg(format!("t_min must be at least {MIN_T_MIN}")));
    }
    let e = extremes_from_rows(rows, config.reliabilities(), t_min);
    if e.samples == 0 {
        return Err(Error::arg(format!("no recorded frames at or after t = {t_min}")));
    }
    assemble_lil(config, t_min, every_frame, e)
}

fn assemble_lil<T: Scalar>(
    config: &SystemConfig<T>,
    t_min: u64,
    every_frame: bool,
    e: Extremes<T>,
) -> Result<LilStats<T>> {
    if t_min < MIN_T_MIN {
        return Err(Error::arg(format!("t_min must be at least {MIN_T_MIN}")));
    }
    let bounds = theoretical_bounds(config)?;
    let exceeded_bounds = bounds
        .iter()
        .filter(|b| !b.exact && b.per_client.iter().zip(&e.max_debt).any(|(&b, &m)| m > b))
        .map(|b| b.kind)
        .collect();
    Ok(LilStats {
        t_min,
        samples: e.samples,
        every_frame,
        on_full_set_face: full_set_slack(config)?.abs() <= T::lit(DEFAULT_TIGHT_TOLERANCE),
        max_scaled_debt: e.max_debt,
        max_scaled_martingale: e.max_mart,
        martingale_limit: diffusion_constants(config).sqrt_c,
        max_scaled_weighted: e.max_w,
        min_scaled_weighted: e.min_w,
        max_scaled_sum: e.max_sum,
        min_scaled_sum: e.min_sum,
        bounds,
        exceeded_bounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SscStats<T> {
    /// `(t_k, max over (t_{k-1}, t_k] of gap/φ)` on the geometric grid.
    pub grid: Vec<(u64, T)>,
    /// Least-squares slope of `ln value` against `ln t`.
    pub trend_slope: Option<T>,
    pub max_debt_spread: T,
    /// Integer `max_t (max_j d_j - min_j d_j)`; only when all throughputs are equal.
    pub max_integer_debt_spread: Option<u64>,
}

impl<T: Scalar> SscStats<T> {
    /// Value of the block that contains `t` (the first grid point at or
    /// after `t`, or the last block).
    pub fn value_at(&self, t: u64) -> Option<T> {
        self.grid
            .iter()
            .find(|(g, _)| *g >= t)
            .or(self.grid.last())
            .map(|x| x.1)
    }
}

fn log_log_slope<T: Scalar>(grid: &[(u64, T)]) -> Option<T> {
    let pts: Vec<(f64, f64)> = grid
        .iter()
        .filter(|(_, v)| *v > T::zero() && v.is_finite())
        .map(|&(t, v)| ((t as f64).ln(), v.as_f64().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(T::lit(sxy / sxx))
}

fn equal_throughputs<T: Scalar>(config: &SystemConfig<T>) -> bool {
    config.throughputs.windows(2).all(|w| w[0] == w[1])
}

pub fn ssc_stats<T: Scalar>(result: &RunResult<T>, config: &SystemConfig<T>) -> SscStats<T> {
    SscStats {
        trend_slope: log_log_slope(&result.collapse_grid),
        grid: result.collapse_grid.clone(),
        max_debt_spread: result.max_debt_spread,
        max_integer_debt_spread: equal_throughputs(config).then_some(result.max_delivery_spread),
    }
}

/// Collapse statistics from recorded rows; block maxima only see the rows
/// that were kept.
pub fn ssc_from_rows<T: Scalar>(
    rows: &[SeriesRow<T>],
    config: &SystemConfig<T>,
    t_min: u64,
) -> SscStats<T> {
    let p = config.reliabilities();
    let mut grid = Vec::new();
    let mut k = 0;
    let mut next = t_min;
    let mut block = T::neg_infinity();
    let window: Vec<&SeriesRow<T>> = rows.iter().filter(|r| r.t >= t_min).collect();
    for (i, row) in window.iter().enumerate() {
        block = block.max(weighted_gap(&row.debts, p) / row.phi);
        if row.t >= next || i + 1 == window.len() {
            grid.push((row.t, block));
            block = T::neg_infinity();
            while next <= row.t {
                k += 1;
                next = (t_min as f64 * SSC_GRID_RATIO.powi(k)).ceil() as u64;
            }
        }
    }
    let spread = |d: &[T]| {
        let hi = d.iter().copied().fold(T::neg_infinity(), T::max);
        let lo = d.iter().copied().fold(T::infinity(), T::min);
        hi - lo
    };
    let max_debt_spread = rows
        .iter()
        .map(|r| spread(&r.debts))
        .fold(T::zero(), T::max);
    let max_integer_debt_spread = equal_throughputs(config).then(|| {
        rows.iter()
            .map(|r| spread(&r.debts).round().to_u64().unwrap_or(u64::MAX))
            .max()
            .unwrap_or(0)
    });
    SscStats {
        trend_slope: log_log_slope(&grid),
        grid,
        max_debt_spread,
        max_integer_debt_spread,
    }
}

/// Default conditioning level for the two-client gap: `1 + 1/min p` for
/// single-slot frames, `1 + 2/min p` otherwise.
pub fn default_kappa<T: Scalar>(config: &SystemConfig<T>) -> T {
    let pmin = config
        .reliabilities()
        .iter()
        .copied()
        .fold(T::infinity(), T::min);
    let k = if config.period() == 1 { 1.0 } else { 2.0 };
    T::one() + T::lit(k) / pmin
}

/// Expected one-frame change of `Z = |d_2/p_2 - d_1/p_1|` while the gap is
/// wide enough that the order is fixed: `[client 1 leads, client 2 leads]`.
///
/// With the leader `a` served first, `E ΔZ = (q_a - π_a)/p_a - (q_b - π_b)/p_b`.
/// On the full-set face this is `2(q_a/p_a - τ(1 - I_{a}))`, and for a single
/// slot it reduces to `-2 q_b/p_b`.
pub fn predicted_drift<T: Scalar>(config: &SystemConfig<T>) -> Result<[T; 2]> {
    if config.n_clients() != 2 {
        return Err(Error::arg("gap drift is defined for two clients"));
    }
    let p = config.reliabilities();
    let q = &config.throughputs;
    let side = |lead: usize| -> Result<T> {
        let other = 1 - lead;
        let order = [ClientId::from_index(lead), ClientId::from_index(other)];
        let pi = delivery_probabilities(&order, &config.channel)?;
        Ok((q[lead] - pi[lead]) / p[lead] - (q[other] - pi[other]) / p[other])
    };
    Ok([side(0)?, side(1)?])
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SideDrift<T> {
    pub count: u64,
    /// Reported only once `count > 0`.
    pub mean: Option<T>,
    pub predicted: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftEstimate<T> {
    pub kappa: T,
    /// `[client 1 leads by more than κ, client 2 leads by more than κ]`.
    pub sides: [SideDrift<T>; 2],
    pub count: u64,
    pub mean: Option<T>,
    /// False when no frame started with `Z > κ`.
    pub conclusive: bool,
}

/// Accumulates `Z(t+1) - Z(t)` over frames that start with `Z(t) > κ`.
#[derive(Debug, Clone)]
pub struct DriftObserver<T> {
    kappa: T,
    p: [T; 2],
    predicted: [T; 2],
    sums: [f64; 2],
    counts: [u64; 2],
}

impl<T: Scalar> DriftObserver<T> {
    pub fn new(config: &SystemConfig<T>, kappa: T) -> Result<Self> {
        if !(kappa > T::zero()) {
            return Err(Error::arg("kappa must be positive"));
        }
        let predicted = predicted_drift(config)?;
        let p = config.reliabilities();
        Ok(DriftObserver {
            kappa,
            p: [p[0], p[1]],
            predicted,
            sums: [0.0; 2],
            counts: [0; 2],
        })
    }

    fn signed_gap(&self, d: &[T]) -> T {
        d[1] / self.p[1] - d[0] / self.p[0]
    }

    pub fn estimate(&self) -> DriftEstimate<T> {
        let side = |i: usize| SideDrift {
            count: self.counts[i],
            mean: (self.counts[i] > 0).then(|| T::lit(self.sums[i] / self.counts[i] as f64)),
            predicted: self.predicted[i],
        };
        let count = self.counts[0] + self.counts[1];
        DriftEstimate {
            kappa: self.kappa,
            sides: [side(0), side(1)],
            count,
            mean: (count > 0).then(|| T::lit((self.sums[0] + self.sums[1]) / count as f64)),
            conclusive: count > 0,
        }
    }
}

impl<T: Scalar> FrameObserver<T> for DriftObserver<T> {
    fn observe(&mut self, before: &DebtState<T>, _trace: &FrameTrace, after: &DebtState<T>) {
        let g0 = self.signed_gap(&before.debts);
        if g0.abs() <= self.kappa {
            return;
        }
        let side = if g0 > T::zero() { 1 } else { 0 };
        let dz = self.signed_gap(&after.debts).abs() - g0.abs();
        self.sums[side] += dz.as_f64();
        self.counts[side] += 1;
    }
}

/// Fresh run that measures the conditional drift of the two-client gap.
///
/// Starting from zero debts a well-behaved policy may never open the gap past
/// `κ`; `initial_debts` lets the run start inside the conditioning region.
pub fn drift_estimate<T: Scalar>(
    config: &SystemConfig<T>,
    policy: &PolicySpec<T>,
    kappa: T,
    frames: u64,
    seed: u64,
    initial_debts: Option<Vec<T>>,
) -> Result<DriftEstimate<T>> {
    let mut obs = DriftObserver::new(config, kappa)?;
    let mut rc = RunConfig::new(config.clone(), policy.clone(), frames, seed)
        .with_stride(frames.max(1));
    rc.initial_debts = initial_debts;
    run_observed(&rc, &mut obs)?;
    Ok(obs.estimate())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyCost<T> {
    pub policy: String,
    pub seeds: usize,
    /// Seed-averaged `max_t d_j/(p φ)`.
    pub v: Vec<T>,
    /// Seed-averaged `min_t d_j/(p φ)`.
    pub w: Vec<T>,
    /// `max_j v_j`.
    pub cost: T,
    /// `max_j` of the per-seed maxima, for paired comparisons.
    pub per_seed_cost: Vec<T>,
    pub sum_v: T,
    /// `σ_{p,τ}/N`, the smallest achievable cost.
    pub floor: T,
}

/// Cost `max_j v_j` per policy, estimated from window extrema.
pub fn policy_cost<T: Scalar>(
    runs: &[(String, Vec<RunResult<T>>)],
    config: &SystemConfig<T>,
) -> Result<Vec<PolicyCost<T>>> {
    if !config.is_symmetric() {
        return Err(Error::arg("policy cost is defined for symmetric systems"));
    }
    if runs.len() < 2 {
        return Err(Error::arg("policy cost compares at least two policies"));
    }
    let n = config.n_clients();
    let floor = sigma_p_tau(&config.channel)? / T::count(n as u64);
    runs.iter()
        .map(|(name, results)| {
            if results.is_empty() {
                return Err(Error::arg(format!("no runs for policy {name}")));
            }
            if let Some(r) = results.iter().find(|r| r.extrema.samples == 0) {
                return Err(Error::arg(format!(
                    "seed {} of {name} has an empty window",
                    r.meta.seed
                )));
            }
            let k = T::count(results.len() as u64);
            let mean_of = |f: &dyn Fn(&RunResult<T>) -> T| {
                results.iter().map(f).fold(T::zero(), |a, b| a + b) / k
            };
            let v: Vec<T> = (0..n)
                .map(|j| mean_of(&|r| r.extrema.max_scaled_weighted[j]))
                .collect();
            let w: Vec<T> = (0..n)
                .map(|j| mean_of(&|r| r.extrema.min_scaled_weighted[j]))
                .collect();
            let per_seed_cost = results
                .iter()
                .map(|r| {
                    r.extrema
                        .max_scaled_weighted
                        .iter()
                        .copied()
                        .fold(T::neg_infinity(), T::max)
                })
                .collect();
            Ok(PolicyCost {
                policy: name.clone(),
                seeds: results.len(),
                cost: v.iter().copied().fold(T::neg_infinity(), T::max),
                sum_v: v.iter().copied().sum(),
                v,
                w,
                per_seed_cost,
                floor,
            })
        })
        .collect()
}

/// Window extremes `(max, min)` of `Σ_j d_j/(p_j φ)`; in the symmetric case
/// both approach `±σ_{p,τ}` for every non-idling policy.
pub fn kolmogorov_sum_stats<T: Scalar>(result: &RunResult<T>) -> Result<(T, T)> {
    if result.extrema.samples == 0 {
        return Err(Error::arg("empty window"));
    }
    Ok((result.extrema.max_scaled_sum, result.extrema.min_scaled_sum))
}

/// Histogram of per-frame delivery counts `y(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveryHistogram {
    pub counts: Vec<u64>,
}

impl DeliveryHistogram {
    pub fn new(n_clients: usize) -> Self {
        DeliveryHistogram {
            counts: vec![0; n_clients + 1],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

impl<T> FrameObserver<T> for DeliveryHistogram {
    fn observe(&mut self, _before: &DebtState<T>, trace: &FrameTrace, _after: &DebtState<T>) {
        self.counts[trace.delivered_count()] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test of homogeneity between two histograms over the
/// same bins. Bins empty in both samples are dropped.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::arg("histograms have different bin counts"));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::arg("empty histogram"));
    }
    let total = na + nb;
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64;
        if pooled == 0.0 {
            continue;
        }
        bins += 1;
        let ea = pooled * na / total;
        let eb = pooled * nb / total;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let degrees_of_freedom = bins.saturating_sub(1);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .map_err(|e| Error::arg(e.to_string()))?
            .sf(statistic)
    };
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom,
        p_value,
    })
}

/// Order statistics of a sample; all equal for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Quantiles {
            min: v[0],
            q10: at(0.1),
            median: at(0.5),
            q90: at(0.9),
            max: v[v.len() - 1],
        })
    }
}

/// Per-run summary emitted next to each trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary<T> {
    pub lil: LilStats<T>,
    pub ssc: SscStats<T>,
    pub kolmogorov: Option<(T, T)>,
    pub sigma_p_tau: Option<T>,
}

pub fn summarize<T: Scalar>(
    result: &RunResult<T>,
    config: &SystemConfig<T>,
    t_min: u64,
) -> Result<AnalysisSummary<T>> {
    Ok(AnalysisSummary {
        lil: lil_stats(result, config, t_min)?,
        ssc: ssc_stats(result, config),
        kolmogorov: kolmogorov_sum_stats(result).ok(),
        sigma_p_tau: sigma_p_tau(&config.channel).ok(),
    })
}
