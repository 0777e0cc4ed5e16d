//! Energy, queueing and occupancy models for duty-cycled IoT fleets behind a
//! Fog/Mist coordinator, with a discrete-event simulator to cross-check them
//! and a codec for the coordinator's control protocol.
//!
//! The analytic modules are generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix them to `f64`, which is what the tables and the CLI use.

// Validation is written as `!(x > 0.0)` on purpose, so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod protocol;
pub mod queueing;
mod scalar;
pub mod schedule;
pub mod sim;
pub mod tables;

pub use scalar::Scalar;

pub type ModuleSpec = energy::ModuleSpec<f64>;
pub type DeviceProfile = energy::DeviceProfile<f64>;
pub type ProfileSet = energy::ProfileSet<f64>;
pub type DutyCycle = energy::DutyCycle<f64>;
pub type Calendar = energy::Calendar<f64>;
pub type PeriodTable = energy::PeriodTable<f64>;
pub type ConsumptionReport = energy::ConsumptionReport<f64>;
pub type MixedConsumption = energy::MixedConsumption<f64>;
pub type LinkSpec = queueing::LinkSpec<f64>;
pub type QueueModel = queueing::QueueModel<f64>;
pub type QueueMetrics = queueing::QueueMetrics<f64>;
pub type TandemSpec = queueing::TandemSpec<f64>;
pub type TandemQueue = queueing::TandemQueue<f64>;
pub type SleepPlan = queueing::SleepPlan<f64>;
pub type OccupancyGroup = schedule::OccupancyGroup<f64>;
pub type GroupSavings = schedule::GroupSavings<f64>;
pub type SavingsBreakdown = schedule::SavingsBreakdown<f64>;
pub type LsSweepRow = schedule::LsSweepRow<f64>;
