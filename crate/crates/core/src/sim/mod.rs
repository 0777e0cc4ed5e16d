//! Seeded discrete-event simulation of a device fleet feeding one coordinator
//! queue.
//!
//! Devices run their duty cycles, transmit one packet per cycle and listen for
//! control traffic during the active period. The coordinator serves sensor and
//! feedback packets from a single FIFO. Emergencies, the broadcast that
//! follows them and schedule-driven Long Sleep are all events on the same
//! clock. Everything is `f64`; the analytic modules are the ones generic over
//! the scalar type.

mod engine;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{Calendar, EnergyError, ProfileSet};
use crate::protocol::{DeviceError, DeviceState, MAX_SLEEP_TIME};
use crate::schedule::{OccupancyGroup, ScheduleError, TimeOfDay};

pub use engine::run;
pub use report::{compare_with_analytic, BroadcastRecord, Comparison, Deviation, PacketCounts, SimReport, Tolerances};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {field}: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("report has no served sensor packets to compare")]
    EmptySample,
    #[error("report and analytic model disagree on {what}: simulated {simulated}, analytic {analytic}")]
    MismatchedConfig { what: String, simulated: f64, analytic: f64 },
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// How a device decides when to transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalModel {
    /// Exponential gaps with the mean of the device's current cycle, so the
    /// fleet's superposed arrivals are Poisson.
    PoissonApprox,
    /// One packet at the end of every active period, as the hardware does.
    DeterministicCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceModel {
    Exponential,
    Deterministic,
}

/// A fire detected by `affected` devices at `start_s`, cleared `duration_s` later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergencyScenario {
    pub start_s: f64,
    pub duration_s: f64,
    /// Device indices that detect the fire themselves.
    pub affected: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub fleet_size: u32,
    pub active_s: f64,
    /// Regular sleep T.
    pub sleep_s: f64,
    /// Sleep while Away.
    pub long_sleep_s: f64,
    /// Transmit slot at the end of each active period; the rest is listening.
    pub tx_time_s: f64,
    pub arrival_model: ArrivalModel,
    pub service_model: ServiceModel,
    pub service_rate_pps: f64,
    pub feedback_fraction: f64,
    pub emergency: Option<EmergencyScenario>,
    /// Devices are handed to groups in order, `apartment_count` at a time.
    /// Devices left over, or all of them when empty, are always Home.
    pub occupancy: Vec<OccupancyGroup<f64>>,
    /// Time of day at `t = 0`.
    pub day_start: TimeOfDay,
    pub profiles: ProfileSet<f64>,
    pub calendar: Calendar<f64>,
    pub seed: u64,
    pub horizon_s: f64,
}

impl SimConfig {
    /// A Poisson/exponential run of `fleet_size` devices with 2 s active
    /// periods and no sleep, over 10 000 s.
    pub fn new(profiles: ProfileSet<f64>, fleet_size: u32, service_rate_pps: f64) -> Self {
        Self {
            fleet_size,
            active_s: 2.0,
            sleep_s: 0.0,
            long_sleep_s: 4.0,
            tx_time_s: 0.0008,
            arrival_model: ArrivalModel::PoissonApprox,
            service_model: ServiceModel::Exponential,
            service_rate_pps,
            feedback_fraction: 0.0,
            emergency: None,
            occupancy: Vec::new(),
            day_start: TimeOfDay::MIDNIGHT,
            profiles,
            calendar: Calendar::default(),
            seed: 0,
            horizon_s: 10_000.0,
        }
    }

    /// Packets per second the fleet offers while every device is Home and Regular.
    pub fn nominal_arrival_rate(&self) -> f64 {
        f64::from(self.fleet_size) / (self.active_s + self.sleep_s)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &str, message: String| Err(SimError::InvalidConfig { field: field.to_string(), message });
        // A zero horizon is accepted and produces an empty report.
        if !(self.horizon_s >= 0.0 && self.horizon_s.is_finite()) {
            return invalid("horizon_s", format!("must be finite and non-negative, got {}", self.horizon_s));
        }
        if !(self.active_s > 0.0 && self.active_s.is_finite()) {
            return invalid("active_s", format!("must be positive, got {}", self.active_s));
        }
        if !(self.tx_time_s >= 0.0 && self.tx_time_s < self.active_s) {
            return invalid("tx_time_s", format!("must lie in [0, active_s), got {}", self.tx_time_s));
        }
        DeviceState::regular(self.sleep_s, self.long_sleep_s)?;
        if !(self.long_sleep_s.fract() == 0.0 && self.long_sleep_s <= f64::from(u8::MAX)) {
            return invalid(
                "long_sleep_s",
                format!("must be a whole number of seconds up to 255, got {}", self.long_sleep_s),
            );
        }
        if !(self.service_rate_pps > 0.0 && self.service_rate_pps.is_finite()) {
            return invalid("service_rate_pps", format!("must be positive, got {}", self.service_rate_pps));
        }
        if !(self.feedback_fraction >= 0.0 && self.feedback_fraction < 1.0) {
            return invalid("feedback_fraction", format!("must lie in [0, 1), got {}", self.feedback_fraction));
        }
        if let Some(e) = &self.emergency {
            if !(e.start_s >= 0.0 && e.duration_s >= 0.0 && e.start_s.is_finite() && e.duration_s.is_finite()) {
                return invalid("emergency", "start and duration must be finite and non-negative".into());
            }
            if let Some(&d) = e.affected.iter().find(|&&d| d >= self.fleet_size) {
                return invalid("emergency.affected", format!("device {d} is outside a fleet of {}", self.fleet_size));
            }
        }
        for g in &self.occupancy {
            g.transitions()?;
        }
        debug_assert!(self.sleep_s <= f64::from(MAX_SLEEP_TIME));
        self.profiles.validate()?;
        Ok(())
    }
}
