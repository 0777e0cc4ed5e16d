//! The TOML run configuration shared by every analysis and the simulator.
//!
//! Parse errors carry the line and column of the offending text; validation
//! errors name the field (`fleet.size`, `schedule.groups[2]`, ...).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{Calendar, DutyCycle, ProfileSet};
use crate::queueing::{service_rate, tandem_combined, LinkSpec, RateResolution, TandemSpec};
use crate::schedule::{OccupancyGroup, TimeOfDay};
use crate::sim::{ArrivalModel, EmergencyScenario, ServiceModel, SimConfig};

/// The bundled reference condominium.
pub const REFERENCE_TOML: &str = include_str!("../data/reference.toml");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

fn invalid<T>(field: impl Into<String>, message: impl ToString) -> Result<T> {
    Err(ConfigError::Invalid { field: field.into(), message: message.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub size: u32,
    pub active_s: f64,
    /// Sleep times tabulated by the energy and queue analyses.
    pub sleep_values_s: Vec<f64>,
    /// Regular sleep used when blending in emergency time.
    pub regular_sleep_s: f64,
    pub emergency_fractions: Vec<f64>,
    #[serde(default = "default_response_limit")]
    pub response_limit_s: f64,
}

fn default_response_limit() -> f64 {
    crate::energy::RESPONSE_LIMIT_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub speed_bps: f64,
    pub fog_packet_bytes: u32,
    pub mist_stage_bytes: Vec<u32>,
    #[serde(default)]
    pub feedback_stage_bytes: Vec<u32>,
    pub feedback_fractions: Vec<f64>,
    #[serde(default)]
    pub rate_resolution: RateResolution,
    #[serde(default = "default_budget")]
    pub sleep_budget_s: f64,
}

fn default_budget() -> f64 {
    crate::queueing::SLEEP_BUDGET_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Savings while residents are home.
    pub t_savings_pct: f64,
    /// Feedback share assumed when working out the home-time sleep.
    pub feedback_fraction: f64,
    pub long_sleep_s: f64,
    pub ls_values_s: Vec<f64>,
    pub groups: Vec<OccupancyGroup<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Devices talk to the Fog coordinator directly.
    #[default]
    Fog,
    /// A Mist node sits between the devices and the Fog node.
    Mist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub topology: Topology,
    pub arrival_model: ArrivalModel,
    pub service_model: ServiceModel,
    /// Defaults to `fleet.size`.
    pub fleet_size: Option<u32>,
    pub sleep_s: f64,
    /// Defaults to `schedule.long_sleep_s`.
    pub long_sleep_s: Option<f64>,
    pub feedback_fraction: f64,
    pub tx_time_s: f64,
    /// Drive Long Sleep from the schedule groups.
    pub occupancy: bool,
    pub day_start: TimeOfDay,
    pub seed: u64,
    pub horizon_s: f64,
    pub emergency: Option<EmergencyScenario>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            topology: Topology::Fog,
            arrival_model: ArrivalModel::PoissonApprox,
            service_model: ServiceModel::Exponential,
            fleet_size: None,
            sleep_s: 0.0,
            long_sleep_s: None,
            feedback_fraction: 0.0,
            tx_time_s: 0.0008,
            occupancy: false,
            day_start: TimeOfDay::MIDNIGHT,
            seed: 0,
            horizon_s: 10_000.0,
            emergency: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub calendar: Calendar<f64>,
    pub profiles: ProfileSet<f64>,
    pub fleet: FleetConfig,
    pub link: LinkConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl Config {
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_TOML).expect("bundled reference config is valid")
    }

    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse { line, column, message: e.message().trim().to_string() }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let fleet = &self.fleet;
        if fleet.size == 0 {
            return invalid("fleet.size", "must be at least 1 device");
        }
        if !(fleet.active_s > 0.0) {
            return invalid("fleet.active_s", format!("must be positive, got {}", fleet.active_s));
        }
        if !(self.calendar.days_per_month > 0.0 && self.calendar.months_per_year > 0.0) {
            return invalid("calendar", "month and year lengths must be positive");
        }
        if let Err(e) = self.profiles.validate() {
            return invalid("profiles", e);
        }
        if fleet.sleep_values_s.is_empty() {
            return invalid("fleet.sleep_values_s", "needs at least one value");
        }
        for (i, &s) in fleet.sleep_values_s.iter().enumerate() {
            self.check_regular_sleep(&format!("fleet.sleep_values_s[{i}]"), s)?;
        }
        self.check_regular_sleep("fleet.regular_sleep_s", fleet.regular_sleep_s)?;
        for (i, &f) in fleet.emergency_fractions.iter().enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return invalid(format!("fleet.emergency_fractions[{i}]"), format!("{f} is outside [0, 1]"));
            }
        }

        let link = &self.link;
        if let Err(e) = self.fog_link().validate() {
            return invalid("link", e);
        }
        if link.mist_stage_bytes.is_empty() || link.mist_stage_bytes.contains(&0) {
            return invalid("link.mist_stage_bytes", "needs at least one stage, all non-zero");
        }
        if link.feedback_stage_bytes.contains(&0) {
            return invalid("link.feedback_stage_bytes", "stages must be non-zero");
        }
        for (i, &f) in link.feedback_fractions.iter().enumerate() {
            if !(0.0..1.0).contains(&f) {
                return invalid(format!("link.feedback_fractions[{i}]"), format!("{f} is outside [0, 1)"));
            }
        }
        if !(link.sleep_budget_s > 0.0) {
            return invalid("link.sleep_budget_s", format!("must be positive, got {}", link.sleep_budget_s));
        }

        let schedule = &self.schedule;
        if !(0.0..=100.0).contains(&schedule.t_savings_pct) {
            return invalid("schedule.t_savings_pct", format!("{} is outside [0, 100]", schedule.t_savings_pct));
        }
        if !(0.0..1.0).contains(&schedule.feedback_fraction) {
            return invalid("schedule.feedback_fraction", format!("{} is outside [0, 1)", schedule.feedback_fraction));
        }
        if !(schedule.long_sleep_s >= 0.0) {
            return invalid("schedule.long_sleep_s", "must be non-negative");
        }
        if schedule.ls_values_s.is_empty() {
            return invalid("schedule.ls_values_s", "needs at least one value");
        }
        if let Some((i, v)) = schedule.ls_values_s.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return invalid(format!("schedule.ls_values_s[{i}]"), format!("must be non-negative, got {v}"));
        }
        if schedule.groups.is_empty() {
            return invalid("schedule.groups", "needs at least one group");
        }
        for (i, g) in schedule.groups.iter().enumerate() {
            if let Err(e) = g.away_hours().and_then(|_| g.transitions()) {
                return invalid(format!("schedule.groups[{i}]"), e);
            }
        }

        if let Err(e) = self.sim_config()?.validate() {
            return invalid("simulation", e);
        }
        Ok(())
    }

    fn check_regular_sleep(&self, field: &str, sleep_s: f64) -> Result<()> {
        let checked = DutyCycle::regular(self.fleet.active_s, sleep_s)
            .and_then(|d| d.check_response_limit(self.fleet.response_limit_s));
        match checked {
            Ok(()) => Ok(()),
            Err(e) => invalid(field, e),
        }
    }

    pub fn regular_duty(&self, sleep_s: f64) -> DutyCycle<f64> {
        DutyCycle { active_s: self.fleet.active_s, sleep_s, mode: crate::energy::OperatingMode::Regular }
    }

    pub fn fog_link(&self) -> LinkSpec<f64> {
        LinkSpec { speed_bps: self.link.speed_bps, packet_bytes: self.link.fog_packet_bytes }
    }

    /// `μ` of the Fog coordinator, after the configured rate resolution.
    pub fn fog_service_rate(&self) -> f64 {
        let mu = service_rate(&self.fog_link()).expect("validated link");
        self.link.rate_resolution.apply(mu)
    }

    pub fn mist_tandem(&self) -> TandemSpec<f64> {
        TandemSpec {
            speed_bps: self.link.speed_bps,
            stage_packet_bytes: self.link.mist_stage_bytes.clone(),
            feedback_stage_bytes: self.link.feedback_stage_bytes.clone(),
        }
    }

    /// `μ` of the collapsed Mist + Fog queue.
    pub fn mist_service_rate(&self) -> f64 {
        tandem_combined(0.0, &self.mist_tandem(), self.link.rate_resolution)
            .expect("validated tandem")
            .model
            .service_rate_pps
    }

    pub fn service_rate(&self, topology: Topology) -> f64 {
        match topology {
            Topology::Fog => self.fog_service_rate(),
            Topology::Mist => self.mist_service_rate(),
        }
    }

    /// The `[simulation]` section resolved against the rest of the file.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.simulation;
        if self.link.mist_stage_bytes.is_empty() {
            return invalid("link.mist_stage_bytes", "needs at least one stage");
        }
        Ok(SimConfig {
            fleet_size: s.fleet_size.unwrap_or(self.fleet.size),
            active_s: self.fleet.active_s,
            sleep_s: s.sleep_s,
            long_sleep_s: s.long_sleep_s.unwrap_or(self.schedule.long_sleep_s),
            tx_time_s: s.tx_time_s,
            arrival_model: s.arrival_model,
            service_model: s.service_model,
            service_rate_pps: self.service_rate(s.topology),
            feedback_fraction: s.feedback_fraction,
            emergency: s.emergency.clone(),
            occupancy: if s.occupancy { self.schedule.groups.clone() } else { Vec::new() },
            day_start: s.day_start,
            profiles: self.profiles.clone(),
            calendar: self.calendar,
            seed: s.seed,
            horizon_s: s.horizon_s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_loads() {
        let c = Config::reference();
        assert_eq!(c.fleet.size, 300);
        assert_eq!(c.profiles.regular.modules.len(), 6);
        assert_eq!(c.profiles.regular.sleep_modules.len(), 2);
        assert_eq!(c.profiles.emergency.modules.len(), 8);
        assert_eq!(c.schedule.groups.len(), 5);
        assert_eq!(c.fog_service_rate(), 576.0);
        assert_eq!(c.mist_service_rate(), 411.0);
        let sim = c.sim_config().unwrap();
        assert_eq!(sim.nominal_arrival_rate(), 150.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::reference();
        assert_eq!(Config::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn empty_fleet_is_rejected() {
        let text = REFERENCE_TOML.replace("size = 300", "size = 0");
        let err = Config::from_toml_str(&text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::Invalid { field: "fleet.size".into(), message: "must be at least 1 device".into() }
        );
    }

    #[test]
    fn parse_errors_point_at_the_line() {
        let text = REFERENCE_TOML.replace("speed_bps = 115200.0", "speed_bps = \"fast\"");
        let line = text.lines().position(|l| l.contains("\"fast\"")).unwrap() + 1;
        match Config::from_toml_str(&text).unwrap_err() {
            ConfigError::Parse { line: l, .. } => assert_eq!(l, line),
            other => panic!("{other:?}"),
        }
        let text = REFERENCE_TOML.replace("[fleet]", "[fleet]\ncolour = \"red\"");
        let line = text.lines().position(|l| l.starts_with("colour")).unwrap() + 1;
        assert!(matches!(Config::from_toml_str(&text), Err(ConfigError::Parse { line: l, .. }) if l == line));
    }

    #[test]
    fn field_level_diagnostics() {
        let cases = [
            ("sleep_values_s = [0.0, 1.0, 2.0, 3.0]", "sleep_values_s = [0.0, 4.0]", "fleet.sleep_values_s[1]"),
            ("feedback_fractions = [0.0, 0.01, 0.05, 0.10]", "feedback_fractions = [1.0]", "link.feedback_fractions[0]"),
            ("{ exit = \"06:00\", entry = \"13:00\" }", "{ exit = \"06:00\", entry = \"06:00\" }", "schedule.groups[1]"),
            ("horizon_s = 10000.0", "horizon_s = -1.0", "simulation"),
            ("current_per_second_mah = 4.44e-2\nresponse_time_s = 1.0\n\n[[profiles.regular.modules]]\nname = \"Flames",
             "current_per_second_mah = 4.44e-3\nresponse_time_s = 1.0\n\n[[profiles.regular.modules]]\nname = \"Flames",
             "profiles"),
        ];
        for (from, to, field) in cases {
            assert!(REFERENCE_TOML.contains(from), "{from}");
            let err = Config::from_toml_str(&REFERENCE_TOML.replacen(from, to, 1)).unwrap_err();
            match err {
                ConfigError::Invalid { field: f, .. } => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
    }
}
