//! Simulation output and its comparison with the analytic models.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ArrivalModel, Result, ServiceModel, SimError};
use crate::energy::{energy_rate, DeviceProfile, DutyCycle, PeriodTable};
use crate::queueing::{mean_sojourn_time, QueueModel};

/// Sensor and feedback packet counters. `sent = served + in_queue` always.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketCounts {
    pub sent: u64,
    pub served: u64,
    /// Waiting or in service when the horizon was reached.
    pub in_queue: u64,
    pub feedback_sent: u64,
    pub feedback_served: u64,
    pub feedback_in_queue: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    /// `alarm_on` or `all_clear`.
    pub kind: String,
    pub sent_at_s: f64,
    pub devices: u32,
    /// Until the last device had the message, in its listen window or at wake.
    pub max_latency_s: f64,
    pub mean_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub horizon_s: f64,
    pub fleet_size: u32,
    pub arrival_model: ArrivalModel,
    pub service_model: ServiceModel,
    pub active_s: f64,
    pub sleep_s: f64,
    pub long_sleep_s: f64,
    pub nominal_arrival_rate_pps: f64,
    pub service_rate_pps: f64,
    pub feedback_fraction: f64,
    pub emergency_configured: bool,
    pub occupancy_configured: bool,
    /// Offered sensor load reaches the capacity left after feedback.
    pub saturated: bool,
    pub packets: PacketCounts,
    /// Time-average number of sensor packets at the coordinator.
    pub mean_occupancy: f64,
    /// Same, counting feedback packets too.
    pub mean_total_occupancy: f64,
    /// Mean wait plus service of served sensor packets, seconds.
    pub mean_sojourn_s: f64,
    pub observed_arrival_rate_pps: f64,
    /// `|L − λW| / L` on the sensor packets.
    pub littles_law_residual: f64,
    pub max_queue_len: u64,
    /// Energy of completed cycles, per device.
    pub device_energy_mwh: Vec<f64>,
    pub device_cycles: Vec<u64>,
    pub total_energy_mwh: f64,
    /// Fleet consumption at the simulated mean rate, kWh.
    pub kwh_per: PeriodTable<f64>,
    /// Device-seconds spent in completed cycles of each mode.
    pub mode_time_s: BTreeMap<String, f64>,
    pub broadcasts: Vec<BroadcastRecord>,
    pub event_counts: BTreeMap<String, u64>,
}

impl SimReport {
    pub fn mean_device_energy_mwh(&self) -> f64 {
        if self.fleet_size == 0 {
            0.0
        } else {
            self.total_energy_mwh / f64::from(self.fleet_size)
        }
    }

    /// Percent saved against every device drawing `baseline_mwh_per_s` for
    /// the whole horizon.
    pub fn savings_vs_rate(&self, baseline_mwh_per_s: f64) -> f64 {
        let baseline = baseline_mwh_per_s * self.horizon_s * f64::from(self.fleet_size);
        100.0 * (1.0 - self.total_energy_mwh / baseline)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One `metric,value` row per scalar field.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "value"])?;
        let p = &self.packets;
        let rows: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("horizon_s", self.horizon_s.to_string()),
            ("fleet_size", self.fleet_size.to_string()),
            ("nominal_arrival_rate_pps", self.nominal_arrival_rate_pps.to_string()),
            ("service_rate_pps", self.service_rate_pps.to_string()),
            ("feedback_fraction", self.feedback_fraction.to_string()),
            ("saturated", self.saturated.to_string()),
            ("packets_sent", p.sent.to_string()),
            ("packets_served", p.served.to_string()),
            ("packets_in_queue", p.in_queue.to_string()),
            ("feedback_sent", p.feedback_sent.to_string()),
            ("feedback_served", p.feedback_served.to_string()),
            ("feedback_in_queue", p.feedback_in_queue.to_string()),
            ("mean_occupancy", self.mean_occupancy.to_string()),
            ("mean_total_occupancy", self.mean_total_occupancy.to_string()),
            ("mean_sojourn_s", self.mean_sojourn_s.to_string()),
            ("observed_arrival_rate_pps", self.observed_arrival_rate_pps.to_string()),
            ("littles_law_residual", self.littles_law_residual.to_string()),
            ("max_queue_len", self.max_queue_len.to_string()),
            ("total_energy_mwh", self.total_energy_mwh.to_string()),
            ("kwh_per_minute", self.kwh_per.minute.to_string()),
            ("kwh_per_hour", self.kwh_per.hour.to_string()),
            ("kwh_per_day", self.kwh_per.day.to_string()),
            ("kwh_per_month", self.kwh_per.month.to_string()),
            ("kwh_per_year", self.kwh_per.year.to_string()),
        ];
        for (k, v) in rows {
            w.write_record([k, v.as_str()])?;
        }
        for (mode, secs) in &self.mode_time_s {
            w.write_record([format!("mode_time_s.{mode}"), secs.to_string()])?;
        }
        for (kind, n) in &self.event_counts {
            w.write_record([format!("events.{kind}"), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_devices_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["device", "energy_mwh", "cycles"])?;
        for (d, (e, c)) in self.device_energy_mwh.iter().zip(&self.device_cycles).enumerate() {
            w.write_record([d.to_string(), e.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Relative tolerances for [`compare_with_analytic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub occupancy: f64,
    pub sojourn: f64,
    pub littles_law: f64,
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { occupancy: 0.10, sojourn: 0.10, littles_law: 0.05, energy: 0.005 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub metric: String,
    pub simulated: f64,
    pub analytic: f64,
    /// `|simulated − analytic| / |analytic|`.
    pub relative: f64,
    pub tolerance: f64,
    /// Whether the models are expected to agree. Gaps that follow from a
    /// known model difference are reported but not enforced.
    pub enforced: bool,
    pub within_tolerance: bool,
}

impl Deviation {
    fn new(metric: &str, simulated: f64, analytic: f64, tolerance: f64, enforced: bool) -> Self {
        let relative = if analytic == 0.0 {
            if simulated == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (simulated - analytic).abs() / analytic.abs()
        };
        Self {
            metric: metric.to_string(),
            simulated,
            analytic,
            relative,
            tolerance,
            enforced,
            within_tolerance: relative <= tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        !self.enforced || self.within_tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub deviations: Vec<Deviation>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.deviations.iter().all(Deviation::passed)
    }

    pub fn get(&self, metric: &str) -> Option<&Deviation> {
        self.deviations.iter().find(|d| d.metric == metric)
    }
}

fn check_match(what: &str, simulated: f64, analytic: f64) -> Result<()> {
    let scale = simulated.abs().max(analytic.abs()).max(1.0);
    if (simulated - analytic).abs() > 1e-9 * scale {
        return Err(SimError::MismatchedConfig { what: what.to_string(), simulated, analytic });
    }
    Ok(())
}

/// Sets a run against the queueing and energy models it is meant to agree
/// with. Queue figures are enforced only for Poisson arrivals with
/// exponential service; energy only when no emergency or occupancy schedule
/// changed the duty cycle during the run.
pub fn compare_with_analytic(
    report: &SimReport,
    queue: &QueueModel<f64>,
    profile: &DeviceProfile<f64>,
    duty: &DutyCycle<f64>,
    tolerances: &Tolerances,
) -> Result<Comparison> {
    if report.packets.served == 0 || report.horizon_s <= 0.0 {
        return Err(SimError::EmptySample);
    }
    check_match("arrival rate", report.nominal_arrival_rate_pps, queue.arrival_rate_pps)?;
    check_match("service rate", report.service_rate_pps, queue.service_rate_pps)?;
    check_match("feedback fraction", report.feedback_fraction, queue.feedback_fraction)?;
    check_match("cycle length", report.active_s + report.sleep_s, duty.cycle_s())?;

    let metrics =
        queue.metrics().map_err(|e| SimError::InvalidConfig { field: "queue".into(), message: e.to_string() })?;
    let sojourn = mean_sojourn_time(queue.arrival_rate_pps, queue.effective_service_rate())
        .map_err(|e| SimError::InvalidConfig { field: "queue".into(), message: e.to_string() })?;
    let markovian =
        report.arrival_model == ArrivalModel::PoissonApprox && report.service_model == ServiceModel::Exponential;
    let steady_duty = !report.emergency_configured && !report.occupancy_configured;
    let expected_energy = energy_rate(profile, duty)? * report.horizon_s;

    Ok(Comparison {
        deviations: vec![
            Deviation::new("occupancy", report.mean_occupancy, metrics.system_time_s, tolerances.occupancy, markovian),
            Deviation::new("sojourn", report.mean_sojourn_s, sojourn, tolerances.sojourn, markovian),
            Deviation::new(
                "littles_law",
                report.mean_occupancy,
                report.observed_arrival_rate_pps * report.mean_sojourn_s,
                tolerances.littles_law,
                true,
            ),
            Deviation::new(
                "device_energy",
                report.mean_device_energy_mwh(),
                expected_energy,
                tolerances.energy,
                steady_duty,
            ),
        ],
    })
}
