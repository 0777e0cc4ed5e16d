//! Home/Away occupancy and the savings of Long Sleep while residents are out.
//!
//! Each apartment group registers exit/entry times. The hours between them are
//! Away (A) and the rest of the day is Home (H). While Away the devices use a
//! long sleep `LS` that ignores the response limit, so a group saves
//! `H% × T_savings + A% × LS_savings`. The condominium figure weights each
//! group by its share of the total apartment-hours away.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::energy::PeriodTable;
use crate::scalar::{fraction, percent, Scalar};

pub const MINUTES_PER_DAY: u16 = 1440;
const HOURS_PER_DAY: f64 = 24.0;
/// How far `H% + A%` may stray from 100 when shares come from rounded tables.
const SHARE_TOLERANCE_PCT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid time of day '{0}', expected HH:MM between 00:00 and 24:00")]
    BadTime(String),
    #[error("exit and entry are both {0}")]
    EmptyInterval(TimeOfDay),
    #[error("away intervals {first} and {second} overlap")]
    Overlap { first: String, second: String },
    #[error("away hours {0} outside [0, 24]")]
    AwayOutOfRange(f64),
    #[error("home {home}% and away {away}% do not add up to 100%")]
    ShareMismatch { home: f64, away: f64 },
    #[error("long sleep must be non-negative, got {0} s")]
    NegativeLongSleep(f64),
    #[error("at least one occupancy group is required")]
    NoGroups,
    #[error("total away time is zero, group weights are undefined")]
    ZeroAwayTime,
    #[error("long sleep sweep needs at least one value")]
    EmptySweep,
}

pub type Result<T, E = ScheduleError> = std::result::Result<T, E>;

/// Minutes since midnight, `00:00` to `24:00` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(u16);

impl TimeOfDay {
    pub const MIDNIGHT: TimeOfDay = TimeOfDay(0);
    pub const END_OF_DAY: TimeOfDay = TimeOfDay(MINUTES_PER_DAY);

    pub fn from_minutes(minutes: u16) -> Option<Self> {
        (minutes <= MINUTES_PER_DAY).then_some(Self(minutes))
    }

    pub fn hm(hours: u16, minutes: u16) -> Option<Self> {
        if minutes >= 60 {
            return None;
        }
        Self::from_minutes(hours.checked_mul(60)?.checked_add(minutes)?)
    }

    pub fn minutes(self) -> u16 {
        self.0
    }

    /// Same instant folded into `[00:00, 24:00)`.
    fn wrapped(self) -> u16 {
        self.0 % MINUTES_PER_DAY
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for TimeOfDay {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ScheduleError::BadTime(s.to_string());
        let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
        if h.is_empty() || h.len() > 2 || m.len() != 2 {
            return Err(bad());
        }
        let h: u16 = h.parse().map_err(|_| bad())?;
        let m: u16 = m.parse().map_err(|_| bad())?;
        Self::hm(h, m).ok_or_else(bad)
    }
}

impl Serialize for TimeOfDay {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weekday {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

/// One recurring absence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySchedule {
    pub exit: TimeOfDay,
    pub entry: TimeOfDay,
    /// Days the absence applies to. Empty means every day; the analysis
    /// evaluates one representative day either way.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weekdays: Vec<Weekday>,
}

impl DaySchedule {
    pub fn new(exit: TimeOfDay, entry: TimeOfDay) -> Self {
        Self { exit, entry, weekdays: Vec::new() }
    }

    /// Away intervals as `[start, end)` minutes within one day. An absence that
    /// runs past midnight is split in two.
    pub fn intervals(&self) -> Result<Vec<(u16, u16)>> {
        let exit = self.exit.wrapped();
        let entry = self.entry.minutes();
        if entry == exit || (entry == MINUTES_PER_DAY && exit == 0) {
            return Err(ScheduleError::EmptyInterval(self.exit));
        }
        if entry > exit {
            return Ok(vec![(exit, entry)]);
        }
        let mut out = vec![(exit, MINUTES_PER_DAY)];
        if entry > 0 {
            out.push((0, entry));
        }
        Ok(out)
    }
}

fn sorted_intervals(schedules: &[DaySchedule]) -> Result<Vec<(u16, u16)>> {
    let mut all = Vec::new();
    for s in schedules {
        all.extend(s.intervals()?);
    }
    all.sort_unstable();
    for pair in all.windows(2) {
        if pair[1].0 < pair[0].1 {
            let show = |(a, b): (u16, u16)| format!("{}-{}", TimeOfDay(a), TimeOfDay(b));
            return Err(ScheduleError::Overlap { first: show(pair[0]), second: show(pair[1]) });
        }
    }
    Ok(all)
}

/// Total daily hours away, `A = Σ (en − ex)`.
pub fn away_time<S: Scalar>(schedules: &[DaySchedule]) -> Result<S> {
    let minutes: u32 = sorted_intervals(schedules)?.iter().map(|&(a, b)| u32::from(b - a)).sum();
    Ok(S::count(minutes) / S::lit(60.0))
}

/// `H = 24 − A`.
pub fn home_time<S: Scalar>(away_hours: S) -> S {
    S::lit(HOURS_PER_DAY) - away_hours
}

/// Apartments sharing the same absence pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGroup<S> {
    pub name: String,
    pub apartment_count: u32,
    pub schedules: Vec<DaySchedule>,
    /// Replaces the hours derived from `schedules` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub away_hours_override: Option<S>,
}

impl<S: Scalar> OccupancyGroup<S> {
    pub fn derived_away_hours(&self) -> Result<S> {
        away_time(&self.schedules)
    }

    pub fn away_hours(&self) -> Result<S> {
        let derived = self.derived_away_hours()?;
        let hours = self.away_hours_override.unwrap_or(derived);
        if !(hours >= S::zero() && hours <= S::lit(HOURS_PER_DAY)) {
            return Err(ScheduleError::AwayOutOfRange(hours.as_f64()));
        }
        Ok(hours)
    }

    pub fn home_hours(&self) -> Result<S> {
        Ok(home_time(self.away_hours()?))
    }

    /// `(derived, override)` when an override disagrees with the schedules.
    pub fn override_mismatch(&self) -> Result<Option<(S, S)>> {
        let derived = self.derived_away_hours()?;
        Ok(self.away_hours_override.filter(|o| (*o - derived).abs() > S::lit(1e-9)).map(|o| (derived, o)))
    }

    /// Whether the residents are out at `minute` past midnight.
    pub fn is_away_at(&self, minute: u16) -> Result<bool> {
        let m = minute % MINUTES_PER_DAY;
        Ok(sorted_intervals(&self.schedules)?.iter().any(|&(a, b)| a <= m && m < b))
    }

    /// Minutes of the day at which the group leaves (`true`) or returns (`false`).
    /// Back-to-back intervals across midnight produce no transition.
    pub fn transitions(&self) -> Result<Vec<(u16, bool)>> {
        let intervals = sorted_intervals(&self.schedules)?;
        let mut out = Vec::new();
        for &(a, b) in &intervals {
            let continues_from_before = intervals.iter().any(|&(_, e)| e % MINUTES_PER_DAY == a);
            if !continues_from_before {
                out.push((a, true));
            }
            let continues_after = intervals.iter().any(|&(s, _)| s == b % MINUTES_PER_DAY);
            if !continues_after {
                out.push((b % MINUTES_PER_DAY, false));
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Savings of a device sleeping `ls_s` after each `active_s` active period.
pub fn ls_savings<S: Scalar>(active_s: S, ls_s: S) -> Result<S> {
    if !(ls_s >= S::zero()) {
        return Err(ScheduleError::NegativeLongSleep(ls_s.as_f64()));
    }
    Ok(percent(ls_s / (active_s + ls_s)))
}

/// `H% × T_savings + A% × LS_savings`, everything in percent.
pub fn group_daily_savings<S: Scalar>(home_pct: S, away_pct: S, t_savings_pct: S, ls_savings_pct: S) -> Result<S> {
    if (home_pct + away_pct - S::lit(100.0)).abs() > S::lit(SHARE_TOLERANCE_PCT) {
        return Err(ScheduleError::ShareMismatch { home: home_pct.as_f64(), away: away_pct.as_f64() });
    }
    Ok(fraction(home_pct) * t_savings_pct + fraction(away_pct) * ls_savings_pct)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSavings<S> {
    pub name: String,
    pub apartment_count: u32,
    pub away_hours: S,
    pub home_hours: S,
    pub derived_away_hours: S,
    /// TA, apartment-hours away.
    pub total_away_hours: S,
    /// TH, apartment-hours at home.
    pub total_home_hours: S,
    pub away_pct: S,
    pub home_pct: S,
    /// A_g%, the group's share of all apartment-hours away.
    pub weight_pct: S,
    /// E_g.
    pub savings_pct: S,
    /// ES_g = E_g − T savings.
    pub extra_savings_pct: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsBreakdown<S> {
    pub ls_s: S,
    pub ls_savings_pct: S,
    pub t_savings_pct: S,
    pub groups: Vec<GroupSavings<S>>,
    pub total_apartments: u32,
    pub total_away_hours: S,
    pub total_home_hours: S,
    /// Condominium E.
    pub savings_pct: S,
    /// Condominium ES.
    pub extra_savings_pct: S,
    /// Groups whose override disagrees with their listed schedules.
    pub warnings: Vec<String>,
}

/// Condominium savings with Long Sleep `ls_s` during Away time.
pub fn condominium_savings<S: Scalar>(
    groups: &[OccupancyGroup<S>],
    t_savings_pct: S,
    active_s: S,
    ls_s: S,
) -> Result<SavingsBreakdown<S>> {
    if groups.is_empty() {
        return Err(ScheduleError::NoGroups);
    }
    let ls_pct = ls_savings(active_s, ls_s)?;
    let day = S::lit(HOURS_PER_DAY);

    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(groups.len());
    for g in groups {
        let away = g.away_hours()?;
        let derived = g.derived_away_hours()?;
        if let Some((d, o)) = g.override_mismatch()? {
            warnings
                .push(format!("group {}: listed schedules give {:.2} h away, using override {:.2} h", g.name, d, o));
        }
        let count = S::count(g.apartment_count);
        let away_pct = percent(away / day);
        let home_pct = percent(home_time(away) / day);
        let savings = group_daily_savings(home_pct, away_pct, t_savings_pct, ls_pct)?;
        rows.push(GroupSavings {
            name: g.name.clone(),
            apartment_count: g.apartment_count,
            away_hours: away,
            home_hours: home_time(away),
            derived_away_hours: derived,
            total_away_hours: count * away,
            total_home_hours: count * home_time(away),
            away_pct,
            home_pct,
            weight_pct: S::zero(),
            savings_pct: savings,
            extra_savings_pct: savings - t_savings_pct,
        });
    }

    let total_away = rows.iter().fold(S::zero(), |acc, r| acc + r.total_away_hours);
    if total_away == S::zero() {
        return Err(ScheduleError::ZeroAwayTime);
    }
    let total_home = rows.iter().fold(S::zero(), |acc, r| acc + r.total_home_hours);
    let mut savings = S::zero();
    let mut extra = S::zero();
    for r in &mut rows {
        let w = r.total_away_hours / total_away;
        r.weight_pct = percent(w);
        savings = savings + w * r.savings_pct;
        extra = extra + w * r.extra_savings_pct;
    }

    Ok(SavingsBreakdown {
        ls_s,
        ls_savings_pct: ls_pct,
        t_savings_pct,
        total_apartments: groups.iter().map(|g| g.apartment_count).sum(),
        groups: rows,
        total_away_hours: total_away,
        total_home_hours: total_home,
        savings_pct: savings,
        extra_savings_pct: extra,
        warnings,
    })
}

/// Consumption left after saving `savings_pct` of a baseline.
pub fn apply_savings<S: Scalar>(baseline: &PeriodTable<S>, savings_pct: S) -> PeriodTable<S> {
    let keep = S::one() - fraction(savings_pct);
    PeriodTable::from_fn(|p| baseline.get(p) * keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsSweepRow<S> {
    pub ls_s: S,
    pub savings_pct: S,
    pub extra_savings_pct: S,
    /// Fleet consumption with T while home and LS while away, kWh.
    pub consumption: PeriodTable<S>,
    /// Reduction against running T all day, kWh.
    pub delta_vs_sleep_only: PeriodTable<S>,
}

/// Condominium savings for each long sleep value. `baseline` is the fleet's
/// consumption without any sleep.
pub fn ls_sweep<S: Scalar>(
    groups: &[OccupancyGroup<S>],
    t_savings_pct: S,
    active_s: S,
    ls_values: &[S],
    baseline: &PeriodTable<S>,
) -> Result<Vec<LsSweepRow<S>>> {
    if ls_values.is_empty() {
        return Err(ScheduleError::EmptySweep);
    }
    ls_values
        .iter()
        .map(|&ls| {
            let b = condominium_savings(groups, t_savings_pct, active_s, ls)?;
            let extra = fraction(b.savings_pct - t_savings_pct);
            Ok(LsSweepRow {
                ls_s: ls,
                savings_pct: b.savings_pct,
                extra_savings_pct: b.extra_savings_pct,
                consumption: apply_savings(baseline, b.savings_pct),
                delta_vs_sleep_only: PeriodTable::from_fn(|p| baseline.get(p) * extra),
            })
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::fixtures::groups;
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> TimeOfDay {
        s.parse().unwrap()
    }

    #[test]
    fn parses_times() {
        assert_eq!(t("08:00").minutes(), 480);
        assert_eq!(t("7:00").minutes(), 420);
        assert_eq!(t("24:00"), TimeOfDay::END_OF_DAY);
        assert_eq!(t("15:40").to_string(), "15:40");
        for bad in ["24:01", "8", "08:60", "ab:cd", "123:00", "08:5"] {
            assert!(bad.parse::<TimeOfDay>().is_err(), "{bad}");
        }
    }

    #[test]
    fn away_time_examples() {
        let g = groups();
        assert_eq!(g[2].derived_away_hours().unwrap(), 7.0);
        assert!((g[3].derived_away_hours().unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(g[4].derived_away_hours().unwrap(), 12.0);
        assert_eq!(away_time::<f64>(&[]).unwrap(), 0.0);
        assert_eq!(home_time(away_time::<f64>(&[]).unwrap()), 24.0);
    }

    #[test]
    fn midnight_crossing_is_split() {
        let s = DaySchedule::new(t("17:00"), t("05:00"));
        assert_eq!(s.intervals().unwrap(), vec![(1020, 1440), (0, 300)]);
        assert_eq!(away_time::<f64>(&[s]).unwrap(), 12.0);
        let late = DaySchedule::new(t("22:00"), t("00:00"));
        assert_eq!(late.intervals().unwrap(), vec![(1320, 1440)]);
    }

    #[test]
    fn overlapping_and_empty_intervals_rejected() {
        let s = [DaySchedule::new(t("08:00"), t("12:00")), DaySchedule::new(t("11:00"), t("13:00"))];
        assert!(matches!(away_time::<f64>(&s), Err(ScheduleError::Overlap { .. })));
        let e = [DaySchedule::new(t("08:00"), t("08:00"))];
        assert!(matches!(away_time::<f64>(&e), Err(ScheduleError::EmptyInterval(_))));
    }

    #[test]
    fn overrides_report_mismatch() {
        let g = groups();
        assert_eq!(g[0].derived_away_hours().unwrap(), 9.0);
        assert_eq!(g[0].away_hours().unwrap(), 9.5);
        assert_eq!(g[0].override_mismatch().unwrap(), Some((9.0, 9.5)));
        assert_eq!(g[2].override_mismatch().unwrap(), None);
        let mut bad = g[2].clone();
        bad.away_hours_override = Some(25.0);
        assert!(matches!(bad.away_hours(), Err(ScheduleError::AwayOutOfRange(_))));
    }

    #[test]
    fn transitions_merge_midnight() {
        let g = groups();
        assert_eq!(g[4].transitions().unwrap(), vec![(300, false), (1020, true)]);
        assert_eq!(g[2].transitions().unwrap(), vec![(660, true), (960, false), (1200, true), (1320, false)]);
        assert!(g[4].is_away_at(0).unwrap());
        assert!(!g[4].is_away_at(600).unwrap());
    }

    #[test]
    fn ls_savings_examples() {
        assert!((ls_savings(2.0f64, 4.0).unwrap() - 66.66).abs() < 0.01);
        assert_eq!(ls_savings(2.0f64, 0.0).unwrap(), 0.0);
        assert!((ls_savings(2.0f64, 58.0).unwrap() - 100.0 * 58.0 / 60.0).abs() < 1e-12);
        assert!(ls_savings(2.0f64, -1.0).is_err());
    }

    #[test]
    fn group_savings_examples() {
        let e1 = group_daily_savings(60.42f64, 39.58, 58.4, 66.66).unwrap();
        assert!((e1 - 61.67).abs() < 0.005, "{e1}");
        let e5 = group_daily_savings(50.0f64, 50.0, 58.4, 66.66).unwrap();
        assert!((e5 - 62.53).abs() < 0.005, "{e5}");
        assert_eq!(group_daily_savings(100.0f64, 0.0, 58.4, 99.0).unwrap(), 58.4);
        assert!(group_daily_savings(60.0f64, 30.0, 58.4, 66.66).is_err());
    }

    #[test]
    fn condominium_reference() {
        let b = condominium_savings(&groups(), 58.4, 2.0, 4.0).unwrap();
        assert!((b.savings_pct - 61.51).abs() < 0.005, "{}", b.savings_pct);
        assert!((b.extra_savings_pct - 3.11).abs() < 0.005);
        assert!((b.groups[0].weight_pct - 53.67).abs() < 0.005);
        assert_eq!(b.total_away_hours, 2655.0);
        assert_eq!(b.total_home_hours, 4545.0);
        assert_eq!(b.warnings.len(), 2);
        let b8 = condominium_savings(&groups(), 58.4, 2.0, 8.0).unwrap();
        assert!((b8.savings_pct - 66.52).abs() < 0.05);
    }

    #[test]
    fn single_group_is_its_own_total() {
        let g = vec![groups()[3].clone()];
        let b = condominium_savings(&g, 58.4, 2.0, 4.0).unwrap();
        assert!((b.savings_pct - b.groups[0].savings_pct).abs() < 1e-12);
        assert_eq!(b.groups[0].weight_pct, 100.0);
    }

    #[test]
    fn condominium_errors() {
        assert_eq!(condominium_savings::<f64>(&[], 58.4, 2.0, 4.0), Err(ScheduleError::NoGroups));
        let home = vec![OccupancyGroup::<f64> {
            name: "x".into(),
            apartment_count: 3,
            schedules: vec![],
            away_hours_override: None,
        }];
        assert_eq!(condominium_savings(&home, 58.4, 2.0, 4.0), Err(ScheduleError::ZeroAwayTime));
        let base = PeriodTable { minute: 1.0, hour: 1.0, day: 1.0, month: 1.0, year: 1.0 };
        assert_eq!(ls_sweep(&groups(), 58.4, 2.0, &[], &base), Err(ScheduleError::EmptySweep));
    }

    #[test]
    fn sweep_deltas() {
        let base = PeriodTable { minute: 0.0, hour: 0.0, day: 7.045, month: 211.35, year: 2536.22 };
        let rows = ls_sweep(&groups(), 58.4, 2.0, &[4.0, 28.0, 58.0], &base).unwrap();
        assert!((rows[0].delta_vs_sleep_only.year - 78.88).abs() / 78.88 < 0.01);
        assert!((rows[2].savings_pct - 72.80).abs() < 0.05);
        let gain = rows[2].extra_savings_pct - rows[1].extra_savings_pct;
        assert!((gain - 1.26).abs() < 0.1, "{gain}");
    }

    proptest! {
        #[test]
        fn home_and_away_fill_the_day(start in 0u16..1439, len in 1u16..1439) {
            let end = (start + len) % MINUTES_PER_DAY;
            prop_assume!(end != start);
            let s = DaySchedule::new(TimeOfDay::from_minutes(start).unwrap(), TimeOfDay::from_minutes(end).unwrap());
            let away: f64 = away_time(&[s]).unwrap();
            prop_assert!((away + home_time(away) - 24.0).abs() < 1e-12);
            prop_assert!((away - len as f64 / 60.0).abs() < 1e-9);
        }

        #[test]
        fn weights_sum_to_one_hundred(ls in 0.0f64..120.0) {
            let b = condominium_savings(&groups(), 58.4, 2.0, ls).unwrap();
            let total: f64 = b.groups.iter().map(|g| g.weight_pct).sum();
            prop_assert!((total - 100.0).abs() < 0.05);
            let lo = b.groups.iter().map(|g| g.savings_pct).fold(f64::INFINITY, f64::min);
            let hi = b.groups.iter().map(|g| g.savings_pct).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(b.savings_pct >= lo - 1e-9 && b.savings_pct <= hi + 1e-9);
        }

        #[test]
        fn long_sleep_has_diminishing_returns(ls in 0.0f64..100.0, h in 0.5f64..30.0) {
            let e = |x: f64| condominium_savings(&groups(), 58.4, 2.0, x).unwrap().savings_pct;
            let (a, b, c) = (e(ls), e(ls + h), e(ls + 2.0 * h));
            prop_assert!(b >= a);
            prop_assert!(c - b < b - a);
        }

        #[test]
        fn equal_savings_blend_to_themselves(t_sav in 0.0f64..95.0) {
            // LS chosen so that its sleep fraction equals t_sav.
            let ls = 2.0 * t_sav / (100.0 - t_sav);
            let b = condominium_savings(&groups(), t_sav, 2.0, ls).unwrap();
            prop_assert!((b.savings_pct - t_sav).abs() < 1e-9);
        }
    }
}
