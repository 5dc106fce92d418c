//! Problem instance, debt bookkeeping and per-frame delivery records.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// 1-based client identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(u32);

impl ClientId {
    /// Panics on 0; ids start at 1.
    pub fn new(id: u32) -> Self {
        assert!(id >= 1, "client ids are 1-based");
        ClientId(id)
    }

    pub fn from_index(index: usize) -> Self {
        ClientId(index as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Zero-based position in per-client vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A subset of clients, stored as a bitmask (bit `i` is client `i + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ClientSet(u64);

impl ClientSet {
    pub const MAX_CLIENTS: usize = 64;

    pub const EMPTY: ClientSet = ClientSet(0);

    pub fn from_bits(bits: u64) -> Self {
        ClientSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// `{1, ..., n}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= Self::MAX_CLIENTS);
        if n == 64 {
            ClientSet(u64::MAX)
        } else {
            ClientSet((1u64 << n) - 1)
        }
    }

    pub fn from_ids(ids: impl IntoIterator<Item = ClientId>) -> Self {
        let mut bits = 0u64;
        for id in ids {
            assert!(id.index() < Self::MAX_CLIENTS);
            bits |= 1 << id.index();
        }
        ClientSet(bits)
    }

    pub fn contains(self, id: ClientId) -> bool {
        id.index() < Self::MAX_CLIENTS && self.0 & (1 << id.index()) != 0
    }

    pub fn insert(&mut self, id: ClientId) {
        self.0 |= 1 << id.index();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Members in ascending id order.
    pub fn ids(self) -> impl Iterator<Item = ClientId> {
        let bits = self.0;
        (0..Self::MAX_CLIENTS)
            .filter(move |i| bits & (1 << i) != 0)
            .map(ClientId::from_index)
    }
}

impl fmt::Display for ClientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, id) in self.ids().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for ClientSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.ids())
    }
}

/// Frame length and per-client channel reliabilities: everything the
/// attempt-count distributions depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel<T> {
    pub period: usize,
    pub reliabilities: Vec<T>,
}

impl<T: Scalar> Channel<T> {
    pub fn new(period: usize, reliabilities: Vec<T>) -> Result<Self> {
        let ch = Channel {
            period,
            reliabilities,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::config("period", "must be at least 1"));
        }
        if self.reliabilities.is_empty() {
            return Err(Error::config("reliabilities", "need at least one client"));
        }
        for (i, &p) in self.reliabilities.iter().enumerate() {
            if !(p > T::zero() && p <= T::one()) {
                return Err(Error::config(
                    format!("reliabilities[{}]", i + 1),
                    format!("{p} is outside (0, 1]"),
                ));
            }
        }
        Ok(())
    }

    pub fn n_clients(&self) -> usize {
        self.reliabilities.len()
    }

    pub fn reliability(&self, id: ClientId) -> T {
        self.reliabilities[id.index()]
    }

    /// True when every client has bitwise the same reliability.
    pub fn is_symmetric(&self) -> bool {
        self.reliabilities.windows(2).all(|w| w[0] == w[1])
    }

    pub fn all_clients(&self) -> ClientSet {
        ClientSet::full(self.n_clients())
    }
}

/// A full problem instance: channel plus throughput requirements and debt weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig<T> {
    pub channel: Channel<T>,
    /// Required timely throughput `q_i`, packets per frame.
    pub throughputs: Vec<T>,
    /// Debt weights `α_i`; all ones unless given.
    pub weights: Vec<T>,
}

impl<T: Scalar> SystemConfig<T> {
    pub fn new(period: usize, reliabilities: Vec<T>, throughputs: Vec<T>) -> Result<Self> {
        let n = reliabilities.len();
        Self::with_weights(period, reliabilities, throughputs, vec![T::one(); n])
    }

    pub fn with_weights(
        period: usize,
        reliabilities: Vec<T>,
        throughputs: Vec<T>,
        weights: Vec<T>,
    ) -> Result<Self> {
        let cfg = SystemConfig {
            channel: Channel {
                period,
                reliabilities,
            },
            throughputs,
            weights,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let n = self.n_clients();
        if self.throughputs.len() != n {
            return Err(Error::config(
                "throughputs",
                format!("expected {n} entries, got {}", self.throughputs.len()),
            ));
        }
        if self.weights.len() != n {
            return Err(Error::config(
                "weights",
                format!("expected {n} entries, got {}", self.weights.len()),
            ));
        }
        for (i, &q) in self.throughputs.iter().enumerate() {
            if !(q > T::zero() && q < T::one()) {
                return Err(Error::config(
                    format!("throughputs[{}]", i + 1),
                    format!("{q} is outside (0, 1)"),
                ));
            }
        }
        for (i, &a) in self.weights.iter().enumerate() {
            if !(a > T::zero() && a.is_finite()) {
                return Err(Error::config(
                    format!("weights[{}]", i + 1),
                    format!("{a} must be positive"),
                ));
            }
        }
        Ok(())
    }

    pub fn n_clients(&self) -> usize {
        self.channel.n_clients()
    }

    pub fn period(&self) -> usize {
        self.channel.period
    }

    pub fn reliabilities(&self) -> &[T] {
        &self.channel.reliabilities
    }

    pub fn clients(&self) -> impl Iterator<Item = ClientId> {
        (0..self.n_clients()).map(ClientId::from_index)
    }

    /// Equal reliabilities and equal throughputs.
    pub fn is_symmetric(&self) -> bool {
        self.channel.is_symmetric() && self.throughputs.windows(2).all(|w| w[0] == w[1])
    }
}

/// Debts at the start of frame `frame_index`.
///
/// `debts[j] = initial[j] + t * q_j - delivered[j]`. The initial offset is zero
/// for ordinary runs; it is only set when a run deliberately starts away from
/// the origin (drift experiments).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebtState<T> {
    pub frame_index: u64,
    pub debts: Vec<T>,
    pub delivered: Vec<u64>,
    pub initial: Vec<T>,
}

impl<T: Scalar> DebtState<T> {
    pub fn new(config: &SystemConfig<T>) -> Self {
        let n = config.n_clients();
        DebtState {
            frame_index: 0,
            debts: vec![T::zero(); n],
            delivered: vec![0; n],
            initial: vec![T::zero(); n],
        }
    }

    pub fn with_initial_debts(config: &SystemConfig<T>, initial: Vec<T>) -> Result<Self> {
        if initial.len() != config.n_clients() {
            return Err(Error::arg(format!(
                "initial debts have {} entries for {} clients",
                initial.len(),
                config.n_clients()
            )));
        }
        if initial.iter().any(|d| !d.is_finite()) {
            return Err(Error::arg("initial debts must be finite"));
        }
        Ok(DebtState {
            frame_index: 0,
            debts: initial.clone(),
            delivered: vec![0; config.n_clients()],
            initial,
        })
    }

    pub fn debt(&self, id: ClientId) -> T {
        self.debts[id.index()]
    }

    /// `initial + t q - s` recomputed from the integer counters.
    pub fn derived_debt(&self, config: &SystemConfig<T>, id: ClientId) -> T {
        let j = id.index();
        self.initial[j] + T::count(self.frame_index) * config.throughputs[j]
            - T::count(self.delivered[j])
    }

    /// In-place form of [`update_debts`].
    pub fn apply(&mut self, trace: &FrameTrace, config: &SystemConfig<T>) -> Result<()> {
        if trace.frame_index != self.frame_index {
            return Err(Error::ContractViolation(format!(
                "trace is for frame {}, state is at frame {}",
                trace.frame_index, self.frame_index
            )));
        }
        if trace.deliveries.len() != self.debts.len() {
            return Err(Error::ContractViolation(format!(
                "trace has {} clients, state has {}",
                trace.deliveries.len(),
                self.debts.len()
            )));
        }
        self.frame_index += 1;
        let t = T::count(self.frame_index);
        for (j, &g) in trace.deliveries.iter().enumerate() {
            self.delivered[j] += g as u64;
            // Re-derived rather than accumulated so long runs do not drift.
            self.debts[j] =
                self.initial[j] + t * config.throughputs[j] - T::count(self.delivered[j]);
        }
        Ok(())
    }
}

/// Advance the debt state by one frame: `d_j(t+1) = d_j(t) + q_j - g_j(t)`.
pub fn update_debts<T: Scalar>(
    state: DebtState<T>,
    trace: &FrameTrace,
    config: &SystemConfig<T>,
) -> Result<DebtState<T>> {
    let mut next = state;
    next.apply(trace, config)?;
    Ok(next)
}

/// `d_j / α_j` for every client, using the configured weights.
pub fn weighted_debt<T: Scalar>(state: &DebtState<T>, config: &SystemConfig<T>) -> Vec<T> {
    state
        .debts
        .iter()
        .zip(&config.weights)
        .map(|(&d, &a)| d / a)
        .collect()
}

/// What happened during one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameTrace {
    pub frame_index: u64,
    pub priority_order: Vec<ClientId>,
    /// Slots spent transmitting to each client, `u_j(t)`.
    pub attempts: Vec<u32>,
    /// Whether each client's packet got through, `g_j(t)`.
    pub deliveries: Vec<bool>,
    pub idle_slots: u32,
}

impl FrameTrace {
    /// Number of packets delivered in the frame.
    pub fn delivered_count(&self) -> usize {
        self.deliveries.iter().filter(|&&g| g).count()
    }

    /// Checks slot accounting and the non-idling property.
    pub fn check(&self, period: usize) -> Result<()> {
        let used: u64 = self.attempts.iter().map(|&u| u as u64).sum();
        if used + self.idle_slots as u64 != period as u64 {
            return Err(Error::ContractViolation(format!(
                "frame {}: attempts {} + idle {} != period {}",
                self.frame_index, used, self.idle_slots, period
            )));
        }
        for (j, (&u, &g)) in self.attempts.iter().zip(&self.deliveries).enumerate() {
            if g && u == 0 {
                return Err(Error::ContractViolation(format!(
                    "frame {}: client {} delivered without an attempt",
                    self.frame_index,
                    j + 1
                )));
            }
        }
        if self.idle_slots > 0 && !self.deliveries.iter().all(|&g| g) {
            return Err(Error::ContractViolation(format!(
                "frame {}: idled with undelivered packets",
                self.frame_index
            )));
        }
        Ok(())
    }
}
