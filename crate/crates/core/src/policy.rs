//! Frame-boundary priority orders.
//!
//! A policy only decides the order in which clients are served during the
//! next frame; the engine serves that order strictly, without re-ordering
//! mid-frame. Every policy here is non-idling.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClientId, DebtState, SystemConfig};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind<T> {
    /// Decreasing `d_j / α_j` with caller-supplied weights.
    WeightedDebt { weights: Vec<T> },
    /// Maximum weighted debt first: `α = p`.
    Mwdf,
    /// Maximum debt first: `α = 1`.
    Mdf,
    RoundRobin,
    UniformRandom,
    FixedOrder { order: Vec<ClientId> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestId,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec<T> {
    #[serde(flatten)]
    pub kind: PolicyKind<T>,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl<T: Scalar> PolicySpec<T> {
    pub fn new(kind: PolicyKind<T>) -> Self {
        PolicySpec {
            kind,
            tie_break: TieBreak::LowestId,
        }
    }

    pub fn mwdf() -> Self {
        Self::new(PolicyKind::Mwdf)
    }

    pub fn mdf() -> Self {
        Self::new(PolicyKind::Mdf)
    }

    pub fn fixed_order(ids: &[u32]) -> Self {
        Self::new(PolicyKind::FixedOrder {
            order: ids.iter().map(|&i| ClientId::new(i)).collect(),
        })
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn validate(&self, config: &SystemConfig<T>) -> Result<()> {
        let n = config.n_clients();
        match &self.kind {
            PolicyKind::WeightedDebt { weights } => {
                if weights.len() != n {
                    return Err(Error::config(
                        "policy.weights",
                        format!("expected {n} entries, got {}", weights.len()),
                    ));
                }
                if weights.iter().any(|&a| !(a > T::zero() && a.is_finite())) {
                    return Err(Error::config("policy.weights", "weights must be positive"));
                }
            }
            PolicyKind::FixedOrder { order } => {
                let mut seen = vec![false; n];
                if order.len() != n {
                    return Err(Error::config(
                        "policy.order",
                        format!("expected a permutation of 1..={n}"),
                    ));
                }
                for id in order {
                    if id.index() >= n || std::mem::replace(&mut seen[id.index()], true) {
                        return Err(Error::config(
                            "policy.order",
                            format!("expected a permutation of 1..={n}"),
                        ));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl<T> fmt::Display for PolicySpec<T> {
    /// Short name used in output file names.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PolicyKind::WeightedDebt { .. } => f.write_str("weighted_debt")?,
            PolicyKind::Mwdf => f.write_str("mwdf")?,
            PolicyKind::Mdf => f.write_str("mdf")?,
            PolicyKind::RoundRobin => f.write_str("round_robin")?,
            PolicyKind::UniformRandom => f.write_str("uniform_random")?,
            PolicyKind::FixedOrder { order } => {
                f.write_str("fixed_order")?;
                for id in order {
                    write!(f, "_{id}")?;
                }
            }
        }
        if self.tie_break == TieBreak::Random {
            f.write_str("+random_ties")?;
        }
        Ok(())
    }
}

fn by_weighted_debt<T: Scalar, R: RngCore + ?Sized>(
    state: &DebtState<T>,
    weight: impl Fn(usize) -> T,
    tie_break: TieBreak,
    rng: &mut R,
) -> Vec<ClientId> {
    let keys: Vec<T> = (0..state.debts.len())
        .map(|j| state.debts[j] / weight(j))
        .collect();
    let mut order: Vec<ClientId> = (0..keys.len()).map(ClientId::from_index).collect();
    match tie_break {
        // stable sort keeps ascending ids among equal keys
        TieBreak::LowestId => order.sort_by(|a, b| {
            keys[b.index()]
                .partial_cmp(&keys[a.index()])
                .unwrap_or(Ordering::Equal)
        }),
        TieBreak::Random => {
            let salt: Vec<u64> = (0..keys.len()).map(|_| rng.next_u64()).collect();
            order.sort_by(|a, b| {
                keys[b.index()]
                    .partial_cmp(&keys[a.index()])
                    .unwrap_or(Ordering::Equal)
                    .then(salt[a.index()].cmp(&salt[b.index()]))
            });
        }
    }
    order
}

/// Service order for frame `state.frame_index`.
///
/// Deterministic given the policy, the state and the randomness stream; only
/// `uniform_random` and random tie-breaking draw from `rng`.
pub fn priority_order<T: Scalar, R: RngCore + ?Sized>(
    policy: &PolicySpec<T>,
    state: &DebtState<T>,
    config: &SystemConfig<T>,
    rng: &mut R,
) -> Vec<ClientId> {
    let n = config.n_clients();
    match &policy.kind {
        PolicyKind::WeightedDebt { weights } => {
            by_weighted_debt(state, |j| weights[j], policy.tie_break, rng)
        }
        PolicyKind::Mwdf => by_weighted_debt(
            state,
            |j| config.reliabilities()[j],
            policy.tie_break,
            rng,
        ),
        PolicyKind::Mdf => by_weighted_debt(state, |_| T::one(), policy.tie_break, rng),
        PolicyKind::RoundRobin => {
            let start = (state.frame_index % n as u64) as usize;
            (0..n)
                .map(|k| ClientId::from_index((start + k) % n))
                .collect()
        }
        PolicyKind::UniformRandom => {
            let mut order: Vec<ClientId> = (0..n).map(ClientId::from_index).collect();
            order.shuffle(rng);
            order
        }
        PolicyKind::FixedOrder { order } => order.clone(),
    }
}
