//! Simulation and exact computation for real-time wireless scheduling with
//! hard per-frame deadlines and debt-based priority policies.
//!
//! Each frame of `τ` slots brings one packet per client; a transmission to
//! client `i` succeeds with probability `p_i` and undelivered packets expire
//! at the end of the frame. A client's debt is the shortfall between its
//! required timely throughput `q_i` times elapsed frames and the packets it
//! actually received.
//!
//! * [`model`] – problem instances, debts, per-frame traces
//! * [`distributions`] – exact idle-time and delivery-count laws
//! * [`feasibility`] – rate-region membership over all client subsets
//! * [`policy`] – priority orders (weighted debt, round robin, fixed, ...)
//! * [`engine`] – the slot-level simulator
//! * [`analysis`] – iterated-logarithm extrema, collapse, drift, policy cost
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod analysis;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod feasibility;
pub mod model;
pub mod num;
pub mod policy;

pub use error::{Error, Result};
pub use model::{ClientId, ClientSet, FrameTrace};
pub use num::Scalar;

pub type Channel = model::Channel<f64>;
pub type SystemConfig = model::SystemConfig<f64>;
pub type DebtState = model::DebtState<f64>;
pub type PolicySpec = policy::PolicySpec<f64>;
pub type PolicyKind = policy::PolicyKind<f64>;
pub type RunConfig = engine::RunConfig<f64>;
pub type RunResult = engine::RunResult<f64>;
pub type SeriesRow = engine::SeriesRow<f64>;
pub type SubsetIdleTable = distributions::SubsetIdleTable<f64>;
pub type DeliveryCountDistribution = distributions::DeliveryCountDistribution<f64>;
pub type DiffusionConstants = distributions::DiffusionConstants<f64>;
pub type FeasibilityReport = feasibility::FeasibilityReport<f64>;
pub type LilStats = analysis::LilStats<f64>;
pub type SscStats = analysis::SscStats<f64>;
pub type DriftEstimate = analysis::DriftEstimate<f64>;
pub type PolicyCost = analysis::PolicyCost<f64>;
pub type AnalysisSummary = analysis::AnalysisSummary<f64>;

pub type SystemConfigF32 = model::SystemConfig<f32>;
pub type RunConfigF32 = engine::RunConfig<f32>;
pub type RunResultF32 = engine::RunResult<f32>;
