//! Rate-region membership: one workload/idle-time constraint per client subset,
//! `Σ_{i∈S} q_i/p_i ≤ τ(1 - I_S)`.

use serde::Serialize;

use crate::distributions::AttemptSumPmf;
use crate::error::{Error, Result};
use crate::model::{Channel, ClientId, ClientSet, SystemConfig};
use crate::num::Scalar;

/// Exhaustive enumeration visits `2^N` subsets.
pub const MAX_ENUMERATED_CLIENTS: usize = 20;

pub const DEFAULT_TIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSlack<T> {
    pub subset: ClientSet,
    /// `τ(1 - I_S) - Σ_{i∈S} q_i/p_i`; negative means the constraint is violated.
    pub slack: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport<T> {
    pub feasible: bool,
    pub tolerance: T,
    /// Every subset including the empty one, ordered by bitmask.
    pub slacks: Vec<SubsetSlack<T>>,
    /// Non-empty subsets with `|slack| ≤ tolerance`.
    pub tight_subsets: Vec<ClientSet>,
    pub violated_subsets: Vec<ClientSet>,
}

impl<T: Scalar> FeasibilityReport<T> {
    pub fn slack(&self, subset: ClientSet) -> Option<T> {
        self.slacks
            .binary_search_by_key(&subset, |s| s.subset)
            .ok()
            .map(|i| self.slacks[i].slack)
    }
}

/// Walks subsets depth-first in ascending id order so each subset's pmf is one
/// convolution away from its parent's. The arithmetic per subset is identical
/// to a standalone `idle_table` call.
fn visit_subsets<T: Scalar>(
    config: &SystemConfig<T>,
    parent: &AttemptSumPmf<T>,
    parent_load: T,
    next: usize,
    out: &mut Vec<SubsetSlack<T>>,
) {
    for i in next..config.n_clients() {
        let id = ClientId::from_index(i);
        let p = config.reliabilities()[i];
        let pmf = parent.convolve(id, p);
        let load = parent_load + config.throughputs[i] / p;
        out.push(SubsetSlack {
            subset: pmf.subset,
            slack: pmf.idle_table().busy_time() - load,
        });
        visit_subsets(config, &pmf, load, i + 1, out);
    }
}

/// Slack of every subset constraint.
pub fn check_feasibility<T: Scalar>(
    config: &SystemConfig<T>,
    tolerance: T,
) -> Result<FeasibilityReport<T>> {
    if !(tolerance >= T::zero()) {
        return Err(Error::arg("tolerance must be non-negative"));
    }
    let n = config.n_clients();
    if n > MAX_ENUMERATED_CLIENTS {
        return Err(Error::ResourceLimit {
            what: "clients for exhaustive subset enumeration".into(),
            got: n,
            cap: MAX_ENUMERATED_CLIENTS,
        });
    }
    let mut slacks = Vec::with_capacity(1 << n);
    slacks.push(SubsetSlack {
        subset: ClientSet::EMPTY,
        slack: T::zero(),
    });
    visit_subsets(
        config,
        &AttemptSumPmf::origin(config.period()),
        T::zero(),
        0,
        &mut slacks,
    );
    slacks.sort_by_key(|s| s.subset);

    let tight_subsets: Vec<_> = slacks
        .iter()
        .filter(|s| !s.subset.is_empty() && s.slack.abs() <= tolerance)
        .map(|s| s.subset)
        .collect();
    let violated_subsets: Vec<_> = slacks
        .iter()
        .filter(|s| s.slack < -tolerance)
        .map(|s| s.subset)
        .collect();
    Ok(FeasibilityReport {
        feasible: violated_subsets.is_empty(),
        tolerance,
        slacks,
        tight_subsets,
        violated_subsets,
    })
}

/// Throughputs on the full-set face of the rate region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryThroughputs<T> {
    pub throughputs: Vec<T>,
    /// Tight subsets other than the full set. Empty when the point lies in the
    /// relative interior of the full-set face.
    pub other_tight: Vec<ClientSet>,
    pub violated: Vec<ClientSet>,
}

/// `q_j = w_j τ p_j (1 - I_full)`: splits the full-set capacity between
/// clients in proportions `w`.
pub fn boundary_throughputs<T: Scalar>(
    channel: &Channel<T>,
    split_weights: &[T],
) -> Result<BoundaryThroughputs<T>> {
    channel.validate()?;
    let n = channel.n_clients();
    if split_weights.len() != n {
        return Err(Error::arg(format!(
            "{} split weights for {n} clients",
            split_weights.len()
        )));
    }
    if split_weights.iter().any(|&w| !(w >= T::zero())) {
        return Err(Error::arg("split weights must be non-negative"));
    }
    let total: T = split_weights.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::arg(format!("split weights sum to {total}, not 1")));
    }
    let pmf = AttemptSumPmf::origin(channel.period);
    let full = channel
        .reliabilities
        .iter()
        .enumerate()
        .fold(pmf, |acc, (i, &p)| acc.convolve(ClientId::from_index(i), p));
    let busy = full.idle_table().busy_time();
    let throughputs: Vec<T> = split_weights
        .iter()
        .zip(&channel.reliabilities)
        .map(|(&w, &p)| w * p * busy)
        .collect();
    if let Some((i, q)) = throughputs
        .iter()
        .enumerate()
        .find(|(_, &q)| !(q > T::zero() && q < T::one()))
    {
        return Err(Error::arg(format!(
            "client {} gets throughput {q}, outside (0, 1)",
            i + 1
        )));
    }
    let config = SystemConfig::new(channel.period, channel.reliabilities.clone(), throughputs)?;
    let report = check_feasibility(&config, T::lit(DEFAULT_TIGHT_TOLERANCE))?;
    let all = channel.all_clients();
    Ok(BoundaryThroughputs {
        throughputs: config.throughputs,
        other_tight: report
            .tight_subsets
            .into_iter()
            .filter(|&s| s != all)
            .collect(),
        violated: report.violated_subsets,
    })
}
