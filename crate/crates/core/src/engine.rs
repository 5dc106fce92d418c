//! Slot-level frame simulator.
//!
//! A run is strictly sequential. Channel outcomes and policy randomness come
//! from two independent ChaCha8 streams derived from the run seed, so a run is
//! reproducible bit-for-bit from `(config, policy, seed)`.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ClientId, DebtState, FrameTrace, SystemConfig};
use crate::num::Scalar;
use crate::policy::{priority_order, PolicySpec};

/// Recorded in every run result and emitted artifact.
pub const RNG_ALGORITHM: &str =
    "chacha8 (rand_chacha 0.9, seed_from_u64); stream 0 = channel outcomes, stream 1 = policy";

pub const DEFAULT_T_MIN: u64 = 1000;

/// Ratio between consecutive points of the collapse-metric time grid.
pub const SSC_GRID_RATIO: f64 = 1.5;

/// Below this `ln ln t` is replaced by `ln ln 16`.
pub const PHI_GUARD: u64 = 16;

/// `sqrt(2 t ln ln t)`, with `ln ln 16` used for `t < 16`.
pub fn phi<T: Scalar>(t: u64) -> Result<T> {
    if t == 0 {
        return Err(Error::arg("phi is defined for t >= 1"));
    }
    let ll = T::count(t.max(PHI_GUARD)).ln().ln();
    Ok((T::lit(2.0) * T::count(t) * ll).sqrt())
}

/// Source of per-attempt success/failure.
pub trait OutcomeSource {
    fn attempt(&mut self, client: ClientId, reliability: f64) -> bool;
}

/// Bernoulli draws from a 64-bit generator: success iff `U < p` with `U` the
/// top 53 bits of one output scaled to `[0, 1)`.
#[derive(Debug, Clone)]
pub struct RngOutcomes<R>(pub R);

impl<R: RngCore> OutcomeSource for RngOutcomes<R> {
    fn attempt(&mut self, _client: ClientId, reliability: f64) -> bool {
        let u = (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        u < reliability
    }
}

/// Replays a fixed list of outcomes, for hand-checked traces.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOutcomes(VecDeque<bool>);

impl ScriptedOutcomes {
    pub fn new(outcomes: impl IntoIterator<Item = bool>) -> Self {
        ScriptedOutcomes(outcomes.into_iter().collect())
    }

    pub fn remaining(&self) -> usize {
        self.0.len()
    }
}

impl OutcomeSource for ScriptedOutcomes {
    fn attempt(&mut self, client: ClientId, _reliability: f64) -> bool {
        self.0
            .pop_front()
            .unwrap_or_else(|| panic!("scripted outcomes exhausted at an attempt for client {client}"))
    }
}

/// Serve `order` for one frame: each slot goes to the first client in the
/// order whose packet is still undelivered; once everyone is through, the
/// remaining slots idle.
pub fn simulate_frame<T: Scalar, O: OutcomeSource + ?Sized>(
    state: &DebtState<T>,
    order: &[ClientId],
    config: &SystemConfig<T>,
    outcomes: &mut O,
) -> FrameTrace {
    let n = config.n_clients();
    let mut attempts = vec![0u32; n];
    let mut deliveries = vec![false; n];
    let mut head = 0;
    let mut idle_slots = 0u32;
    for _ in 0..config.period() {
        if head == order.len() {
            idle_slots += 1;
            continue;
        }
        let id = order[head];
        attempts[id.index()] += 1;
        if outcomes.attempt(id, config.channel.reliability(id).as_f64()) {
            deliveries[id.index()] = true;
            head += 1;
        }
    }
    FrameTrace {
        frame_index: state.frame_index,
        priority_order: order.to_vec(),
        attempts,
        deliveries,
        idle_slots,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig<T> {
    pub system: SystemConfig<T>,
    pub policy: PolicySpec<T>,
    pub frames: u64,
    pub seed: u64,
    pub record_stride: u64,
    /// Start of the window over which scaled extrema are tracked.
    pub t_min: u64,
    /// Debts at frame 0; zero when absent.
    pub initial_debts: Option<Vec<T>>,
}

impl<T: Scalar> RunConfig<T> {
    /// Stride defaults to 64 for runs of a million frames or more, else 1.
    pub fn default_stride(frames: u64) -> u64 {
        if frames >= 1_000_000 {
            64
        } else {
            1
        }
    }

    pub fn new(system: SystemConfig<T>, policy: PolicySpec<T>, frames: u64, seed: u64) -> Self {
        RunConfig {
            system,
            policy,
            frames,
            seed,
            record_stride: Self::default_stride(frames),
            t_min: DEFAULT_T_MIN,
            initial_debts: None,
        }
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_t_min(mut self, t_min: u64) -> Self {
        self.t_min = t_min;
        self
    }

    pub fn with_initial_debts(mut self, debts: Vec<T>) -> Self {
        self.initial_debts = Some(debts);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.policy.validate(&self.system)?;
        if self.frames == 0 {
            return Err(Error::config("frames", "must be at least 1"));
        }
        if self.frames > 1 << 53 {
            return Err(Error::config("frames", "must not exceed 2^53"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// `M_j(t) = Σ_l (u_j(l) - g_j(l)/p_j)` and its predictable variance
/// `S_j²(t) = v_j Σ_l u_j(l)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTrace<T> {
    pub martingale: Vec<T>,
    pub predictable_variance: Vec<T>,
}

impl<T: Scalar> MartingaleTrace<T> {
    pub fn from_counts(config: &SystemConfig<T>, attempts: &[u64], delivered: &[u64]) -> Self {
        let mut martingale = Vec::with_capacity(attempts.len());
        let mut predictable_variance = Vec::with_capacity(attempts.len());
        for (j, &p) in config.reliabilities().iter().enumerate() {
            let u = T::count(attempts[j]);
            martingale.push(u - T::count(delivered[j]) / p);
            predictable_variance.push((T::one() - p) / p * u);
        }
        MartingaleTrace {
            martingale,
            predictable_variance,
        }
    }
}

/// One recorded frame boundary. The frame-level fields describe frame `t - 1`,
/// the one that produced the state at `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow<T> {
    pub t: u64,
    pub debts: Vec<T>,
    pub attempts: Vec<u32>,
    pub deliveries: Vec<bool>,
    pub idle: u32,
    pub phi: T,
    pub martingale: Vec<T>,
    pub scaled_debts: Vec<T>,
    pub weighted_debts: Vec<T>,
    pub idle_cumulative: u64,
}

/// Extremes of scaled processes over `t_min ≤ t ≤ T`, updated every frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowExtrema<T> {
    pub t_min: u64,
    /// Frame boundaries that fell inside the window.
    pub samples: u64,
    /// `max d_j(t)/φ(t)`
    pub max_scaled_debt: Vec<T>,
    /// `max M_j(t)/φ(t)`
    pub max_scaled_martingale: Vec<T>,
    /// `max d_j(t)/(p_j φ(t))`
    pub max_scaled_weighted: Vec<T>,
    /// `min d_j(t)/(p_j φ(t))`
    pub min_scaled_weighted: Vec<T>,
    /// `max Σ_j d_j(t)/(p_j φ(t))`
    pub max_scaled_sum: T,
    pub min_scaled_sum: T,
}

impl<T: Scalar> WindowExtrema<T> {
    fn new(n: usize, t_min: u64) -> Self {
        let lo = T::neg_infinity();
        let hi = T::infinity();
        WindowExtrema {
            t_min,
            samples: 0,
            max_scaled_debt: vec![lo; n],
            max_scaled_martingale: vec![lo; n],
            max_scaled_weighted: vec![lo; n],
            min_scaled_weighted: vec![hi; n],
            max_scaled_sum: lo,
            min_scaled_sum: hi,
        }
    }

    fn observe(&mut self, p: &[T], debts: &[T], martingale: &[T], phi: T) {
        self.samples += 1;
        let mut sum = T::zero();
        for j in 0..debts.len() {
            let d = debts[j] / phi;
            let w = d / p[j];
            sum += w;
            self.max_scaled_debt[j] = self.max_scaled_debt[j].max(d);
            self.max_scaled_martingale[j] = self.max_scaled_martingale[j].max(martingale[j] / phi);
            self.max_scaled_weighted[j] = self.max_scaled_weighted[j].max(w);
            self.min_scaled_weighted[j] = self.min_scaled_weighted[j].min(w);
        }
        self.max_scaled_sum = self.max_scaled_sum.max(sum);
        self.min_scaled_sum = self.min_scaled_sum.min(sum);
    }
}

/// Block maxima of `max_{j,k} |d_j/p_j - d_k/p_k| / φ(t)` between consecutive
/// points `⌈t_min · 1.5^k⌉` of a geometric grid. The last block ends at the
/// final frame.
#[derive(Debug, Clone)]
struct CollapseGrid<T> {
    t_min: u64,
    k: i32,
    next_point: u64,
    block_max: T,
    points: Vec<(u64, T)>,
}

impl<T: Scalar> CollapseGrid<T> {
    fn new(t_min: u64) -> Self {
        CollapseGrid {
            t_min,
            k: 0,
            next_point: t_min,
            block_max: T::neg_infinity(),
            points: Vec::new(),
        }
    }

    fn observe(&mut self, t: u64, gap: T, last: bool) {
        if t < self.t_min {
            return;
        }
        self.block_max = self.block_max.max(gap);
        if t >= self.next_point || last {
            self.points.push((t, self.block_max));
            self.block_max = T::neg_infinity();
            while self.next_point <= t {
                self.k += 1;
                self.next_point = (self.t_min as f64 * SSC_GRID_RATIO.powi(self.k)).ceil() as u64;
            }
        }
    }
}

pub fn weighted_gap<T: Scalar>(debts: &[T], reliabilities: &[T]) -> T {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for (&d, &p) in debts.iter().zip(reliabilities) {
        let w = d / p;
        lo = lo.min(w);
        hi = hi.max(w);
    }
    hi - lo
}

/// Hook called after every frame with the states on either side of it.
pub trait FrameObserver<T> {
    fn observe(&mut self, before: &DebtState<T>, trace: &FrameTrace, after: &DebtState<T>);
}

impl<T, F> FrameObserver<T> for F
where
    F: FnMut(&DebtState<T>, &FrameTrace, &DebtState<T>),
{
    fn observe(&mut self, before: &DebtState<T>, trace: &FrameTrace, after: &DebtState<T>) {
        self(before, trace, after)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub policy: String,
    pub seed: u64,
    pub frames: u64,
    pub record_stride: u64,
    pub t_min: u64,
    pub rng_algorithm: String,
    #[serde(with = "duration_secs")]
    pub wall_clock: Duration,
}

mod duration_secs {
    use std::time::Duration;

    pub fn serialize<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult<T> {
    pub final_state: DebtState<T>,
    pub final_martingale: MartingaleTrace<T>,
    pub series: Vec<SeriesRow<T>>,
    pub attempt_totals: Vec<u64>,
    pub idle_total: u64,
    pub extrema: WindowExtrema<T>,
    /// `(grid point, block maximum)` of the weighted-debt gap over `φ`.
    pub collapse_grid: Vec<(u64, T)>,
    /// `max_t (max_j d_j(t) - min_j d_j(t))` over every frame boundary.
    pub max_debt_spread: T,
    /// `max_t (max_j s_j(t) - min_j s_j(t))`; equals the debt spread exactly
    /// when all throughputs are equal.
    pub max_delivery_spread: u64,
    pub meta: RunMeta,
}

impl<T: PartialEq> RunResult<T> {
    /// Equality ignoring wall-clock metadata.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let mut a = self.meta.clone();
        a.wall_clock = other.meta.wall_clock;
        a == other.meta
            && self.final_state == other.final_state
            && self.final_martingale == other.final_martingale
            && self.series == other.series
            && self.attempt_totals == other.attempt_totals
            && self.idle_total == other.idle_total
            && self.extrema == other.extrema
            && self.collapse_grid == other.collapse_grid
            && self.max_debt_spread == other.max_debt_spread
            && self.max_delivery_spread == other.max_delivery_spread
    }
}

/// Channel and policy streams for a seed.
pub fn run_streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut channel = ChaCha8Rng::seed_from_u64(seed);
    channel.set_stream(0);
    let mut policy = ChaCha8Rng::seed_from_u64(seed);
    policy.set_stream(1);
    (channel, policy)
}

pub fn run<T: Scalar>(config: &RunConfig<T>) -> Result<RunResult<T>> {
    run_observed(config, &mut |_: &DebtState<T>, _: &FrameTrace, _: &DebtState<T>| {})
}

/// Simulate `config.frames` frames, calling `observer` after each one.
pub fn run_observed<T: Scalar>(
    config: &RunConfig<T>,
    observer: &mut dyn FrameObserver<T>,
) -> Result<RunResult<T>> {
    config.validate()?;
    let started = Instant::now();
    let sys = &config.system;
    let n = sys.n_clients();
    let p = sys.reliabilities();
    let (channel_rng, mut policy_rng) = run_streams(config.seed);
    let mut outcomes = RngOutcomes(channel_rng);

    let mut state = match &config.initial_debts {
        Some(d) => DebtState::with_initial_debts(sys, d.clone())?,
        None => DebtState::new(sys),
    };
    let mut attempt_totals = vec![0u64; n];
    let mut idle_total = 0u64;
    let mut series = Vec::new();
    let mut extrema = WindowExtrema::new(n, config.t_min);
    let mut grid = CollapseGrid::new(config.t_min);
    let spread = |d: &[T]| {
        let (lo, hi) = d
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        hi - lo
    };
    let count_spread = |s: &[u64]| s.iter().max().unwrap() - s.iter().min().unwrap();
    let mut max_debt_spread = spread(&state.debts);
    let mut max_delivery_spread = 0u64;

    for frame in 0..config.frames {
        let order = priority_order(&config.policy, &state, sys, &mut policy_rng);
        let trace = simulate_frame(&state, &order, sys, &mut outcomes);
        let before = state.clone();
        state.apply(&trace, sys)?;
        for (total, &u) in attempt_totals.iter_mut().zip(&trace.attempts) {
            *total += u as u64;
        }
        idle_total += trace.idle_slots as u64;
        observer.observe(&before, &trace, &state);

        let t = state.frame_index;
        let last = t == config.frames;
        max_debt_spread = max_debt_spread.max(spread(&state.debts));
        max_delivery_spread = max_delivery_spread.max(count_spread(&state.delivered));
        let phi_t: T = phi(t)?;
        let in_window = t >= config.t_min;
        let recorded = frame % config.record_stride == 0 || last;
        if in_window || recorded {
            let mart = MartingaleTrace::from_counts(sys, &attempt_totals, &state.delivered);
            if in_window {
                extrema.observe(p, &state.debts, &mart.martingale, phi_t);
                grid.observe(t, weighted_gap(&state.debts, p) / phi_t, last);
            }
            if recorded {
                series.push(SeriesRow {
                    t,
                    debts: state.debts.clone(),
                    attempts: trace.attempts.clone(),
                    deliveries: trace.deliveries.clone(),
                    idle: trace.idle_slots,
                    phi: phi_t,
                    scaled_debts: state.debts.iter().map(|&d| d / phi_t).collect(),
                    weighted_debts: state.debts.iter().zip(p).map(|(&d, &pj)| d / pj).collect(),
                    martingale: mart.martingale,
                    idle_cumulative: idle_total,
                });
            }
        }
    }

    let final_martingale = MartingaleTrace::from_counts(sys, &attempt_totals, &state.delivered);
    Ok(RunResult {
        final_state: state,
        final_martingale,
        series,
        attempt_totals,
        idle_total,
        extrema,
        collapse_grid: grid.points,
        max_debt_spread,
        max_delivery_spread,
        meta: RunMeta {
            policy: config.policy.to_string(),
            seed: config.seed,
            frames: config.frames,
            record_stride: config.record_stride,
            t_min: config.t_min,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            wall_clock: started.elapsed(),
        },
    })
}
