//! Charge and energy accounting for duty-cycled devices.
//!
//! A device profile lists the hardware modules that draw current during the
//! active part of a cycle, each with its per-second charge `Cs` (mAh/s) and the
//! time it is powered `RT` (s). The charge of one cycle is `Σ Cs × RT` over the
//! active modules plus `Σ Cs × sleep_s` over the modules that stay powered while
//! asleep. Multiplying by the supply voltage gives the energy of one cycle, in
//! mWh, and dividing by the cycle length gives a consumption rate that every
//! per-period and savings figure is derived from.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{percent, Scalar};

/// Regulatory upper bound on the response time of a fire alarm, in seconds.
pub const RESPONSE_LIMIT_S: f64 = 5.0;

const SECONDS_PER_HOUR: f64 = 3600.0;
const MWH_PER_KWH: f64 = 1.0e6;
/// Relative slack on the `Cs = Ch / 3600` consistency check. Printed
/// three-digit charges sit right at the edge of this band, so a few ulps of
/// the scalar type are added on top.
const CHARGE_CONSISTENCY_TOL: f64 = 1.0e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("{field} must be non-negative, got {value}")]
    Negative { field: String, value: f64 },
    #[error("module '{name}': per-second charge {per_second_mah} mAh/s is not {current_ma} mA / 3600")]
    InconsistentCharge { name: String, current_ma: f64, per_second_mah: f64 },
    #[error("active time must be positive, got {0} s")]
    NonPositiveActive(f64),
    #[error("cycle length is zero")]
    ZeroCycle,
    #[error("regular cycle of {cycle_s} s exceeds the {limit_s} s response limit")]
    ResponseLimit { cycle_s: f64, limit_s: f64 },
    #[error("emergency fraction {0} is outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("baseline consumption rate is zero")]
    ZeroBaseline,
}

pub type Result<T, E = EnergyError> = std::result::Result<T, E>;

fn non_negative<S: Scalar>(field: &str, value: S) -> Result<()> {
    if value < S::zero() || value.is_nan() {
        return Err(EnergyError::Negative { field: field.to_string(), value: value.as_f64() });
    }
    Ok(())
}

/// One hardware module: its current draw and how long it is powered per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSpec<S> {
    pub name: String,
    /// Current while powered, mA.
    pub current_active_ma: S,
    /// Charge per second of operation, mAh/s.
    pub current_per_second_mah: S,
    /// Seconds powered per cycle. Ignored for sleep modules, which are powered
    /// for the sleep part of the cycle instead.
    pub response_time_s: S,
}

impl<S: Scalar> ModuleSpec<S> {
    pub fn new(
        name: impl Into<String>,
        current_active_ma: S,
        current_per_second_mah: S,
        response_time_s: S,
    ) -> Result<Self> {
        let module = Self { name: name.into(), current_active_ma, current_per_second_mah, response_time_s };
        module.validate()?;
        Ok(module)
    }

    /// Builds a module from its current draw alone, deriving `Cs = Ch / 3600`.
    pub fn from_current(name: impl Into<String>, current_active_ma: S, response_time_s: S) -> Result<Self> {
        Self::new(name, current_active_ma, current_active_ma / S::lit(SECONDS_PER_HOUR), response_time_s)
    }

    pub fn validate(&self) -> Result<()> {
        non_negative(&format!("{}.current_active_ma", self.name), self.current_active_ma)?;
        non_negative(&format!("{}.current_per_second_mah", self.name), self.current_per_second_mah)?;
        non_negative(&format!("{}.response_time_s", self.name), self.response_time_s)?;
        let expected = self.current_active_ma / S::lit(SECONDS_PER_HOUR);
        let consistent = if expected == S::zero() {
            self.current_per_second_mah == S::zero()
        } else {
            ((self.current_per_second_mah - expected) / expected).abs()
                <= S::lit(CHARGE_CONSISTENCY_TOL) + S::epsilon() * S::lit(64.0)
        };
        if !consistent {
            return Err(EnergyError::InconsistentCharge {
                name: self.name.clone(),
                current_ma: self.current_active_ma.as_f64(),
                per_second_mah: self.current_per_second_mah.as_f64(),
            });
        }
        Ok(())
    }

    /// `Cs × RT`, the module's charge over one active period.
    pub fn active_charge_mah(&self) -> S {
        self.current_per_second_mah * self.response_time_s
    }
}

/// The modules of one device in one operating regime, plus its supply voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile<S> {
    pub name: String,
    pub voltage_v: S,
    pub modules: Vec<ModuleSpec<S>>,
    pub sleep_modules: Vec<ModuleSpec<S>>,
}

impl<S: Scalar> DeviceProfile<S> {
    pub fn validate(&self) -> Result<()> {
        non_negative(&format!("{}.voltage_v", self.name), self.voltage_v)?;
        self.modules.iter().chain(&self.sleep_modules).try_for_each(ModuleSpec::validate)
    }

    /// Charge drawn during the active part of a cycle, mAh.
    pub fn active_charge_mah(&self) -> S {
        self.modules.iter().fold(S::zero(), |acc, m| acc + m.active_charge_mah())
    }

    /// Charge drawn per second of sleep, mAh/s.
    pub fn sleep_charge_rate(&self) -> S {
        self.sleep_modules.iter().fold(S::zero(), |acc, m| acc + m.current_per_second_mah)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingMode {
    Regular,
    Emergency,
    LongSleep,
}

impl OperatingMode {
    pub const ALL: [OperatingMode; 3] = [Self::Regular, Self::Emergency, Self::LongSleep];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Regular => "regular",
            Self::Emergency => "emergency",
            Self::LongSleep => "long_sleep",
        }
    }
}

/// One repeating active + sleep period. A device sends one packet per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyCycle<S> {
    pub active_s: S,
    pub sleep_s: S,
    pub mode: OperatingMode,
}

impl<S: Scalar> DutyCycle<S> {
    pub fn new(active_s: S, sleep_s: S, mode: OperatingMode) -> Result<Self> {
        let duty = Self { active_s, sleep_s, mode };
        duty.validate()?;
        Ok(duty)
    }

    pub fn regular(active_s: S, sleep_s: S) -> Result<Self> {
        Self::new(active_s, sleep_s, OperatingMode::Regular)
    }

    /// The emergency cycle: one packet per second, no sleep.
    pub fn emergency() -> Self {
        Self { active_s: S::one(), sleep_s: S::zero(), mode: OperatingMode::Emergency }
    }

    pub fn long_sleep(active_s: S, long_sleep_s: S) -> Result<Self> {
        Self::new(active_s, long_sleep_s, OperatingMode::LongSleep)
    }

    pub fn cycle_s(&self) -> S {
        self.active_s + self.sleep_s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.active_s > S::zero()) {
            return Err(EnergyError::NonPositiveActive(self.active_s.as_f64()));
        }
        non_negative("sleep_s", self.sleep_s)
    }

    /// Rejects regular cycles longer than the response limit. Long sleep and
    /// emergency cycles are exempt.
    pub fn check_response_limit(&self, limit_s: S) -> Result<()> {
        if self.mode == OperatingMode::Regular && self.cycle_s() > limit_s {
            return Err(EnergyError::ResponseLimit { cycle_s: self.cycle_s().as_f64(), limit_s: limit_s.as_f64() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Minute,
    Hour,
    Day,
    Month,
    Year,
}

impl Period {
    pub const ALL: [Period; 5] = [Self::Minute, Self::Hour, Self::Day, Self::Month, Self::Year];

    pub fn seconds<S: Scalar>(self, calendar: &Calendar<S>) -> S {
        let day = S::lit(86_400.0);
        match self {
            Self::Minute => S::lit(60.0),
            Self::Hour => S::lit(3600.0),
            Self::Day => day,
            Self::Month => day * calendar.days_per_month,
            Self::Year => day * calendar.days_per_month * calendar.months_per_year,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Minute => "minute",
            Self::Hour => "hour",
            Self::Day => "day",
            Self::Month => "month",
            Self::Year => "year",
        }
    }
}

/// Month and year lengths. Defaults to 30-day months and 12-month years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calendar<S> {
    pub days_per_month: S,
    pub months_per_year: S,
}

impl<S: Scalar> Default for Calendar<S> {
    fn default() -> Self {
        Self { days_per_month: S::lit(30.0), months_per_year: S::lit(12.0) }
    }
}

/// A value for each reporting period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodTable<S> {
    pub minute: S,
    pub hour: S,
    pub day: S,
    pub month: S,
    pub year: S,
}

impl<S: Scalar> PeriodTable<S> {
    pub fn from_fn(mut f: impl FnMut(Period) -> S) -> Self {
        Self {
            minute: f(Period::Minute),
            hour: f(Period::Hour),
            day: f(Period::Day),
            month: f(Period::Month),
            year: f(Period::Year),
        }
    }

    pub fn get(&self, period: Period) -> S {
        match period {
            Period::Minute => self.minute,
            Period::Hour => self.hour,
            Period::Day => self.day,
            Period::Month => self.month,
            Period::Year => self.year,
        }
    }
}

/// Charge of one cycle, mAh: active modules for their RT plus sleep modules
/// for the sleep time.
pub fn cycle_energy<S: Scalar>(profile: &DeviceProfile<S>, duty: &DutyCycle<S>) -> Result<S> {
    profile.validate()?;
    duty.validate()?;
    Ok(profile.active_charge_mah() + profile.sleep_charge_rate() * duty.sleep_s)
}

/// Energy of one cycle, mWh. Charge (mAh) times voltage.
pub fn cycle_power<S: Scalar>(charge_mah: S, voltage_v: S) -> Result<S> {
    non_negative("charge_mah", charge_mah)?;
    non_negative("voltage_v", voltage_v)?;
    Ok(charge_mah * voltage_v)
}

/// Mean consumption of one device, mWh per second.
pub fn energy_rate<S: Scalar>(profile: &DeviceProfile<S>, duty: &DutyCycle<S>) -> Result<S> {
    let per_cycle = cycle_power(cycle_energy(profile, duty)?, profile.voltage_v)?;
    let cycle = duty.cycle_s();
    if cycle == S::zero() {
        return Err(EnergyError::ZeroCycle);
    }
    Ok(per_cycle / cycle)
}

fn rate_to_kwh<S: Scalar>(rate_mwh_per_s: S, period: Period, fleet_size: u32, calendar: &Calendar<S>) -> S {
    rate_mwh_per_s * period.seconds(calendar) * S::count(fleet_size) / S::lit(MWH_PER_KWH)
}

/// Fleet consumption over one period, kWh.
pub fn consumption_over<S: Scalar>(
    profile: &DeviceProfile<S>,
    duty: &DutyCycle<S>,
    period: Period,
    fleet_size: u32,
    calendar: &Calendar<S>,
) -> Result<S> {
    Ok(rate_to_kwh(energy_rate(profile, duty)?, period, fleet_size, calendar))
}

/// Percent saved by running `duty` instead of `baseline` on the same profile.
pub fn savings_vs_baseline<S: Scalar>(
    duty: &DutyCycle<S>,
    baseline: &DutyCycle<S>,
    profile: &DeviceProfile<S>,
) -> Result<S> {
    let rate = energy_rate(profile, duty)?;
    let base = energy_rate(profile, baseline)?;
    if base == S::zero() {
        return Err(EnergyError::ZeroBaseline);
    }
    Ok(percent(S::one() - rate / base))
}

/// Regular and emergency regimes of the same device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet<S> {
    pub regular: DeviceProfile<S>,
    pub emergency: DeviceProfile<S>,
}

impl<S: Scalar> ProfileSet<S> {
    pub fn validate(&self) -> Result<()> {
        self.regular.validate()?;
        self.emergency.validate()
    }

    /// Consumption rate (mWh/s) when a fraction of the time is spent in the
    /// emergency cycle and the rest in `regular_duty`.
    pub fn mixed_rate(&self, regular_duty: &DutyCycle<S>, emergency_fraction: S) -> Result<S> {
        check_fraction(emergency_fraction)?;
        let regular = energy_rate(&self.regular, regular_duty)?;
        let emergency = energy_rate(&self.emergency, &DutyCycle::emergency())?;
        Ok((S::one() - emergency_fraction) * regular + emergency_fraction * emergency)
    }
}

fn check_fraction<S: Scalar>(f: S) -> Result<()> {
    if !(f >= S::zero() && f <= S::one()) {
        return Err(EnergyError::FractionOutOfRange(f.as_f64()));
    }
    Ok(())
}

/// Savings of a regular/emergency blend against the regular cycle without sleep.
pub fn mixed_mode_savings<S: Scalar>(
    profiles: &ProfileSet<S>,
    regular_duty: &DutyCycle<S>,
    emergency_fraction: S,
) -> Result<S> {
    let blended = profiles.mixed_rate(regular_duty, emergency_fraction)?;
    let baseline = DutyCycle::regular(regular_duty.active_s, S::zero())?;
    let base = energy_rate(&profiles.regular, &baseline)?;
    if base == S::zero() {
        return Err(EnergyError::ZeroBaseline);
    }
    Ok(percent(S::one() - blended / base))
}

/// Per-cycle and per-period consumption of a fleet running one duty cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionReport<S> {
    pub sleep_s: S,
    pub fleet_size: u32,
    /// EC, mAh per device and cycle.
    pub charge_per_cycle_mah: S,
    /// TWC, mWh per device and cycle.
    pub energy_per_cycle_mwh: S,
    /// TWC summed over the fleet.
    pub fleet_energy_per_cycle_mwh: S,
    pub kwh_per: PeriodTable<S>,
    /// Savings against the baseline cycle, when one was given.
    pub savings_pct: Option<S>,
}

pub fn consumption_report<S: Scalar>(
    profile: &DeviceProfile<S>,
    duty: &DutyCycle<S>,
    fleet_size: u32,
    calendar: &Calendar<S>,
    baseline: Option<&DutyCycle<S>>,
) -> Result<ConsumptionReport<S>> {
    let charge = cycle_energy(profile, duty)?;
    let energy = cycle_power(charge, profile.voltage_v)?;
    let rate = energy_rate(profile, duty)?;
    let savings_pct = baseline.map(|b| savings_vs_baseline(duty, b, profile)).transpose()?;
    Ok(ConsumptionReport {
        sleep_s: duty.sleep_s,
        fleet_size,
        charge_per_cycle_mah: charge,
        energy_per_cycle_mwh: energy,
        fleet_energy_per_cycle_mwh: energy * S::count(fleet_size),
        kwh_per: PeriodTable::from_fn(|p| rate_to_kwh(rate, p, fleet_size, calendar)),
        savings_pct,
    })
}

/// Fleet consumption when every device spends `emergency_fraction` of its
/// time in the emergency cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedConsumption<S> {
    pub emergency_fraction: S,
    pub fleet_size: u32,
    /// Time-weighted blend of regular and emergency cycle energy, whole fleet.
    pub fleet_energy_per_cycle_mwh: S,
    pub kwh_per: PeriodTable<S>,
    pub savings_pct: S,
}

pub fn mixed_consumption<S: Scalar>(
    profiles: &ProfileSet<S>,
    regular_duty: &DutyCycle<S>,
    emergency_fraction: S,
    fleet_size: u32,
    calendar: &Calendar<S>,
) -> Result<MixedConsumption<S>> {
    let rate = profiles.mixed_rate(regular_duty, emergency_fraction)?;
    let emergency = DutyCycle::emergency();
    let regular_cycle = cycle_power(cycle_energy(&profiles.regular, regular_duty)?, profiles.regular.voltage_v)?;
    let emergency_cycle = cycle_power(cycle_energy(&profiles.emergency, &emergency)?, profiles.emergency.voltage_v)?;
    let per_cycle = (S::one() - emergency_fraction) * regular_cycle + emergency_fraction * emergency_cycle;
    Ok(MixedConsumption {
        emergency_fraction,
        fleet_size,
        fleet_energy_per_cycle_mwh: per_cycle * S::count(fleet_size),
        kwh_per: PeriodTable::from_fn(|p| rate_to_kwh(rate, p, fleet_size, calendar)),
        savings_pct: mixed_mode_savings(profiles, regular_duty, emergency_fraction)?,
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    fn module(name: &str, ch: f64, cs: f64, rt: f64) -> ModuleSpec<f64> {
        ModuleSpec::new(name, ch, cs, rt).unwrap()
    }

    fn sleep_modules() -> Vec<ModuleSpec<f64>> {
        vec![module("mcu sleep", 1e-5, 2.78e-9, 0.0), module("radio sleep", 1e-4, 2.78e-8, 0.0)]
    }

    pub fn regular() -> DeviceProfile<f64> {
        DeviceProfile {
            name: "regular".into(),
            voltage_v: 9.0,
            modules: vec![
                module("air", 0.3, 8.33e-5, 2.0),
                module("gas", 160.0, 4.44e-2, 1.0),
                module("flame", 0.4, 1.11e-4, 1.0),
                module("mcu", 0.3, 8.33e-5, 2.0),
                module("radio tx", 33.0, 9.17e-3, 0.0008),
                module("radio rx", 28.0, 7.78e-3, 1.9992),
            ],
            sleep_modules: sleep_modules(),
        }
    }

    pub fn emergency() -> DeviceProfile<f64> {
        DeviceProfile {
            name: "emergency".into(),
            voltage_v: 9.0,
            modules: vec![
                module("air", 0.3, 8.33e-5, 1.0),
                module("gas", 160.0, 4.44e-2, 1.0),
                module("flame", 0.4, 1.11e-4, 1.0),
                module("mcu", 0.3, 8.33e-5, 1.0),
                module("radio tx", 33.0, 9.17e-3, 0.0008),
                module("radio rx", 28.0, 7.78e-3, 0.9992),
                module("buzzer", 25.0, 6.94e-3, 1.0),
                module("led", 20.0, 5.56e-3, 1.0),
            ],
            sleep_modules: sleep_modules(),
        }
    }

    pub fn profiles() -> ProfileSet<f64> {
        ProfileSet { regular: regular(), emergency: emergency() }
    }

    pub fn duty(sleep: f64) -> DutyCycle<f64> {
        DutyCycle::regular(2.0, sleep).unwrap()
    }
}
