//! Cost of update delay (CoUD), peak CoUD and value of information of
//! update (VoIU) for M/M/1 FCFS status-update systems: closed forms,
//! density-quadrature cross-checks, a seeded simulator and a utilization
//! optimizer.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases fix the scalar to `f64`.

pub mod analytics;
pub mod cost_model;
pub mod error;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod simulator;
pub mod special;

pub use analytics::{AnalyticReport, QueueParams, Validity, ValidityFlags};
pub use cost_model::{CostFamily, CostModel, ReductionPoint};
pub use error::{Error, Result};
pub use optimizer::{Objective, OptimizeSpec, Optimum};
pub use scalar::Scalar;
pub use simulator::{Estimate, MetricsSummary, PooledSummary, Replicated, SimConfig};

pub type CostModel64 = CostModel<f64>;
pub type QueueParams64 = QueueParams<f64>;
pub type AnalyticReport64 = AnalyticReport<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type MetricsSummary64 = MetricsSummary<f64>;
pub type Replicated64 = Replicated<f64>;
pub type OptimizeSpec64 = OptimizeSpec<f64>;
pub type Optimum64 = Optimum<f64>;

pub type CostModel32 = CostModel<f32>;
pub type QueueParams32 = QueueParams<f32>;
