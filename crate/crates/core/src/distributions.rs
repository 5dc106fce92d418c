//! Exact finite distributions built from sums of independent geometric
//! attempt counts.
//!
//! Every pmf is truncated at the frame length: only `(τ - Σγ)⁺` and
//! `min(τ, Σγ)` matter for scheduling, so all support above `τ` is lumped into
//! a single overflow mass. Cost is `O(|S| τ²)` per subset.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Channel, ClientId, ClientSet, SystemConfig};
use crate::num::{ordered_sum, Scalar};

/// Distribution of `X = Σ_{i∈S} γ_i` on `0..=τ`, plus `P(X > τ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptSumPmf<T> {
    pub subset: ClientSet,
    /// `mass[k] = P(X = k)` for `k = 0..=τ`; zero below `|S|`.
    pub mass: Vec<T>,
    pub overflow: T,
}

impl<T: Scalar> AttemptSumPmf<T> {
    /// Point mass at zero: the distribution for the empty subset.
    pub(crate) fn origin(period: usize) -> Self {
        let mut mass = vec![T::zero(); period + 1];
        mass[0] = T::one();
        AttemptSumPmf {
            subset: ClientSet::EMPTY,
            mass,
            overflow: T::zero(),
        }
    }

    pub fn period(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn total(&self) -> T {
        ordered_sum(self.mass.iter().copied()) + self.overflow
    }

    /// Adds one more client's geometric attempt count.
    pub(crate) fn convolve(&self, id: ClientId, p: T) -> Self {
        let tau = self.period();
        let miss = T::one() - p;
        // geo[j] = P(γ = j), tail[m] = P(γ > m)
        let mut geo = vec![T::zero(); tau + 1];
        let mut tail = vec![T::one(); tau + 1];
        for m in 1..=tau {
            tail[m] = tail[m - 1] * miss;
            geo[m] = p * tail[m - 1];
        }
        let mut mass = vec![T::zero(); tau + 1];
        for (k, slot) in mass.iter_mut().enumerate().skip(1) {
            *slot = ordered_sum((1..=k).map(|j| self.mass[k - j] * geo[j]));
        }
        let spill = ordered_sum((0..=tau).map(|k| self.mass[k] * tail[tau - k]));
        let mut subset = self.subset;
        subset.insert(id);
        AttemptSumPmf {
            subset,
            mass,
            overflow: self.overflow + spill,
        }
    }

    /// Idle slots are `(τ - X)⁺`.
    pub fn idle_table(&self) -> SubsetIdleTable<T> {
        let tau = self.period();
        let mut idle_pmf = vec![T::zero(); tau + 1];
        for (k, slot) in idle_pmf.iter_mut().enumerate().skip(1) {
            *slot = self.mass[tau - k];
        }
        idle_pmf[0] = self.mass[tau] + self.overflow;
        let mean = ordered_sum(idle_pmf.iter().enumerate().map(|(k, &m)| T::count(k as u64) * m));
        let variance = ordered_sum(idle_pmf.iter().enumerate().map(|(k, &m)| {
            let dev = T::count(k as u64) - mean;
            dev * dev * m
        }));
        SubsetIdleTable {
            subset: self.subset,
            idle_pmf,
            idle_fraction: mean / T::count(tau as u64),
            idle_variance: variance,
        }
    }
}

/// Idle-time law for a subset of clients served to completion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetIdleTable<T> {
    pub subset: ClientSet,
    /// `idle_pmf[k]` = probability of exactly `k` idle slots.
    pub idle_pmf: Vec<T>,
    /// `I_S`: expected idle slots divided by the frame length.
    pub idle_fraction: T,
    /// Variance of the idle slot count.
    pub idle_variance: T,
}

impl<T: Scalar> SubsetIdleTable<T> {
    /// Expected busy time `τ(1 - I_S)`.
    pub fn busy_time(&self) -> T {
        T::count((self.idle_pmf.len() - 1) as u64) * (T::one() - self.idle_fraction)
    }

    pub fn idle_std(&self) -> T {
        self.idle_variance.sqrt()
    }
}

fn check_members<T: Scalar>(subset: ClientSet, channel: &Channel<T>) -> Result<()> {
    if let Some(id) = subset.ids().find(|id| id.index() >= channel.n_clients()) {
        return Err(Error::arg(format!(
            "client {id} is not part of a {}-client system",
            channel.n_clients()
        )));
    }
    Ok(())
}

/// Exact pmf of the total number of attempts needed to clear every packet
/// in `subset`, truncated at the frame length. Clients are convolved in
/// ascending id order.
pub fn attempt_sum_pmf<T: Scalar>(
    subset: ClientSet,
    channel: &Channel<T>,
) -> Result<AttemptSumPmf<T>> {
    if subset.is_empty() {
        return Err(Error::arg("attempt sum of an empty subset"));
    }
    check_members(subset, channel)?;
    Ok(subset
        .ids()
        .fold(AttemptSumPmf::origin(channel.period), |acc, id| {
            acc.convolve(id, channel.reliability(id))
        }))
}

/// Idle-slot distribution, `I_S` and idle variance for `subset`.
/// The empty subset idles the whole frame (`I_∅ = 1`).
pub fn idle_table<T: Scalar>(subset: ClientSet, channel: &Channel<T>) -> Result<SubsetIdleTable<T>> {
    if subset.is_empty() {
        return Ok(AttemptSumPmf::origin(channel.period).idle_table());
    }
    Ok(attempt_sum_pmf(subset, channel)?.idle_table())
}

fn check_permutation(order: &[ClientId], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::arg(format!(
            "order has {} entries for {n} clients",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &id in order {
        let i = id.index();
        if i >= n || seen[i] {
            return Err(Error::arg(format!("order is not a permutation (client {id})")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Per-client delivery probabilities `π_j` (indexed by client position) under
/// a fixed priority order.
///
/// The head-of-line client is served until delivered, then the next one, and
/// the frame idles once everyone is done. Prefix sums satisfy
/// `Σ_{m≤k} π_{o_m}/p_{o_m} = τ(1 - I_{o_1..o_k})`.
pub fn delivery_probabilities<T: Scalar>(order: &[ClientId], channel: &Channel<T>) -> Result<Vec<T>> {
    check_permutation(order, channel.n_clients())?;
    let mut pi = vec![T::zero(); channel.n_clients()];
    let mut pmf = AttemptSumPmf::origin(channel.period);
    let mut prev_busy = T::zero();
    for &id in order {
        let p = channel.reliability(id);
        pmf = pmf.convolve(id, p);
        let busy = pmf.idle_table().busy_time();
        pi[id.index()] = p * (busy - prev_busy);
        prev_busy = busy;
    }
    Ok(pi)
}

/// Law of the per-frame delivery count in the symmetric case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveryCountDistribution<T> {
    /// `pmf[y]` for `y = 0..=N`.
    pub pmf: Vec<T>,
    pub mean: T,
    pub variance: T,
}

/// `Binomial(n, p)` masses, `0..=n`.
pub fn binomial_masses<T: Scalar>(n: usize, p: T) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    if p >= T::one() {
        out[n] = T::one();
        return out;
    }
    if p <= T::zero() {
        out[0] = T::one();
        return out;
    }
    let (lp, lq) = (p.ln(), (T::one() - p).ln());
    let mut ln_choose = T::zero();
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            ln_choose += (T::count((n - k + 1) as u64) / T::count(k as u64)).ln();
        }
        *slot = (ln_choose + T::count(k as u64) * lp + T::count((n - k) as u64) * lq).exp();
    }
    out
}

fn moments<T: Scalar>(pmf: &[T]) -> (T, T) {
    let mean = ordered_sum(pmf.iter().enumerate().map(|(k, &m)| T::count(k as u64) * m));
    let var = ordered_sum(pmf.iter().enumerate().map(|(k, &m)| {
        let dev = T::count(k as u64) - mean;
        dev * dev * m
    }));
    (mean, var)
}

/// Distribution of the number of packets delivered in one frame when all
/// clients share a reliability `p`, under any non-idling policy.
///
/// Every busy slot succeeds with probability `p` regardless of who is served,
/// so the count is `min(N, B)` with `B ~ Binomial(τ, p)`.
pub fn symmetric_delivery_distribution<T: Scalar>(
    channel: &Channel<T>,
) -> Result<DeliveryCountDistribution<T>> {
    if !channel.is_symmetric() {
        return Err(Error::arg("delivery-count law needs equal reliabilities"));
    }
    let n = channel.n_clients();
    let tau = channel.period;
    let binom = binomial_masses(tau, channel.reliabilities[0]);
    let mut pmf = vec![T::zero(); n + 1];
    let below = n.min(tau + 1);
    pmf[..below].copy_from_slice(&binom[..below]);
    if tau >= n {
        pmf[n] = ordered_sum(binom[n..].iter().copied());
    }
    let (mean, variance) = moments(&pmf);
    Ok(DeliveryCountDistribution {
        pmf,
        mean,
        variance,
    })
}

/// Standard deviation of the per-frame increment of `Σ_j d_j / p` in the
/// symmetric case, `sqrt(Var y) / p`.
///
/// This is the constant that scales the iterated-logarithm envelope of the
/// summed debt, so it is a standard deviation, not a variance.
pub fn sigma_p_tau<T: Scalar>(channel: &Channel<T>) -> Result<T> {
    let dist = symmetric_delivery_distribution(channel)?;
    Ok(dist.variance.max(T::zero()).sqrt() / channel.reliabilities[0])
}

/// `N q / p - τ(1 - I_full)` for a symmetric system; zero on the full-set face.
pub fn hyperplane_residual<T: Scalar>(config: &SystemConfig<T>) -> Result<T> {
    if !config.is_symmetric() {
        return Err(Error::arg("hyperplane residual needs a symmetric system"));
    }
    let full = idle_table(config.channel.all_clients(), &config.channel)?;
    let n = T::count(config.n_clients() as u64);
    Ok(n * config.throughputs[0] / config.reliabilities()[0] - full.busy_time())
}

/// Per-client martingale constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionConstants<T> {
    /// `v_j = (1 - p_j) / p_j`, conditional variance per attempt.
    pub v: Vec<T>,
    /// `c_j = q_j (1 - p_j) / p_j²`.
    pub c: Vec<T>,
    pub sqrt_c: Vec<T>,
}

pub fn diffusion_constants<T: Scalar>(config: &SystemConfig<T>) -> DiffusionConstants<T> {
    let mut v = Vec::with_capacity(config.n_clients());
    let mut c = Vec::with_capacity(config.n_clients());
    for (&p, &q) in config.reliabilities().iter().zip(&config.throughputs) {
        let vj = (T::one() - p) / p;
        v.push(vj);
        c.push(q / p * vj);
    }
    let sqrt_c = c.iter().map(|x| x.sqrt()).collect();
    DiffusionConstants { v, c, sqrt_c }
}
