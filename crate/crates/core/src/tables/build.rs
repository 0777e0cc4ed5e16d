//! Computes each table from a [`Config`].

use super::{Cell, Column, Format, Result, Table, TableId, Tolerance};
use crate::config::Config;
use crate::energy::{consumption_report, mixed_consumption, savings_vs_baseline, DeviceProfile, PeriodTable};
use crate::queueing::{max_sleep, QueueModel};
use crate::schedule::{apply_savings, condominium_savings, ls_sweep};

fn col(key: &'static str, format: Format, tolerance: Tolerance) -> Column {
    Column::new(key, format, tolerance)
}

fn rel(r: f64) -> Tolerance {
    Tolerance::relative(r).or_printed()
}

fn abs(a: f64) -> Tolerance {
    Tolerance::absolute(a).or_printed()
}

const P: Tolerance = Tolerance::PRINTED;

/// A zero sleep time has nothing to save; the published tables leave it blank.
fn savings_cell(sleep_s: f64, savings: Option<f64>) -> Cell {
    if sleep_s == 0.0 {
        Cell::Missing
    } else {
        savings.into()
    }
}

fn period_cells(kwh: &PeriodTable<f64>) -> [Cell; 5] {
    [kwh.minute.into(), kwh.hour.into(), kwh.day.into(), kwh.month.into(), kwh.year.into()]
}

pub fn build(id: TableId, config: &Config) -> Result<Table> {
    let (columns, rows) = match id {
        TableId::Table1 => modules(&config.profiles.regular),
        TableId::Table2 => modules(&config.profiles.emergency),
        TableId::Table3 => one_device(config)?,
        TableId::Table4 => fleet(config)?,
        TableId::Table5 => emergency_mix(config)?,
        TableId::Table6 => arrivals(config)?,
        TableId::Table7 => sleep_limit(config, config.fog_service_rate())?,
        TableId::Table8 => sleep_limit(config, config.mist_service_rate())?,
        TableId::Table9 => occupancy(config)?,
        TableId::Table10 => group_savings(config)?,
        TableId::Table11 => long_sleep_sweep(config)?,
    };
    debug_assert!(rows.iter().all(|r: &Vec<Cell>| r.len() == columns.len()));
    Ok(Table { id, columns, rows })
}

pub fn build_all(config: &Config) -> Result<Vec<Table>> {
    TableId::ALL.iter().map(|&id| build(id, config)).collect()
}

type Parts = (Vec<Column>, Vec<Vec<Cell>>);

fn modules(profile: &DeviceProfile<f64>) -> Parts {
    let columns = vec![
        col("i", Format::Fixed(0), Tolerance::EXACT),
        Column::text("module"),
        col("ch_ma", Format::General, Tolerance::EXACT),
        col("cs_mah_per_s", Format::Sci(3), rel(5e-3)),
        col("rt_s", Format::General, Tolerance::EXACT),
    ];
    let active = profile.modules.iter().map(|m| (m, Cell::from(m.response_time_s)));
    // Sleep modules run for the sleep time T rather than a fixed response time.
    let asleep = profile.sleep_modules.iter().map(|m| (m, Cell::from("T")));
    let rows = active
        .chain(asleep)
        .zip(1u32..)
        .map(|((m, rt), i)| {
            vec![i.into(), m.name.as_str().into(), m.current_active_ma.into(), m.current_per_second_mah.into(), rt]
        })
        .collect();
    (columns, rows)
}

fn one_device(config: &Config) -> Result<Parts> {
    let columns = vec![
        col("t_s", Format::General, Tolerance::EXACT),
        col("current_mah", Format::Fixed(7), rel(5e-3)),
        col("cycle_mwh", Format::Fixed(6), rel(5e-3)),
        col("minute", Format::Sci(3), rel(5e-3)),
        col("hour", Format::Sci(3), rel(5e-3)),
        col("day", Format::Sci(3), rel(5e-3)),
        col("month", Format::Fixed(3), rel(5e-3)),
        col("year", Format::Fixed(2), rel(5e-3)),
        col("savings_pct", Format::Fixed(2), abs(0.05)),
    ];
    let baseline = config.regular_duty(0.0);
    let mut rows = Vec::new();
    for &t in &config.fleet.sleep_values_s {
        let r = consumption_report(
            &config.profiles.regular,
            &config.regular_duty(t),
            1,
            &config.calendar,
            Some(&baseline),
        )?;
        let mut row = vec![t.into(), r.charge_per_cycle_mah.into(), r.energy_per_cycle_mwh.into()];
        row.extend(period_cells(&r.kwh_per));
        row.push(savings_cell(t, r.savings_pct));
        rows.push(row);
    }
    Ok((columns, rows))
}

fn fleet(config: &Config) -> Result<Parts> {
    let columns = vec![
        col("t_s", Format::General, Tolerance::EXACT),
        col("cycle_mwh", Format::Fixed(4), rel(5e-3)),
        col("minute", Format::Sci(3), rel(5e-3)),
        col("hour", Format::Fixed(2), rel(5e-3)),
        col("day", Format::Fixed(2), rel(5e-3)),
        col("month", Format::Fixed(2), rel(5e-3)),
        col("year", Format::Fixed(2), rel(5e-3)),
    ];
    let mut rows = Vec::new();
    for &t in &config.fleet.sleep_values_s {
        let r = consumption_report(
            &config.profiles.regular,
            &config.regular_duty(t),
            config.fleet.size,
            &config.calendar,
            None,
        )?;
        let mut row = vec![t.into(), r.fleet_energy_per_cycle_mwh.into()];
        row.extend(period_cells(&r.kwh_per));
        rows.push(row);
    }
    Ok((columns, rows))
}

fn emergency_mix(config: &Config) -> Result<Parts> {
    let columns = vec![
        col("emergency_pct", Format::General, Tolerance::EXACT),
        col("cycle_mwh", Format::Fixed(2), rel(5e-3)),
        col("minute", Format::Sci(3), rel(5e-3)),
        col("hour", Format::Fixed(2), rel(5e-3)),
        col("day", Format::Fixed(2), rel(5e-3)),
        col("month", Format::Fixed(2), rel(5e-3)),
        col("year", Format::Fixed(2), rel(5e-3)),
        col("savings_pct", Format::Fixed(2), abs(0.1)),
    ];
    let duty = config.regular_duty(config.fleet.regular_sleep_s);
    let mut rows = Vec::new();
    for &f in &config.fleet.emergency_fractions {
        let m = mixed_consumption(&config.profiles, &duty, f, config.fleet.size, &config.calendar)?;
        let mut row = vec![(100.0 * f).into(), m.fleet_energy_per_cycle_mwh.into()];
        row.extend(period_cells(&m.kwh_per));
        row.push(m.savings_pct.into());
        rows.push(row);
    }
    Ok((columns, rows))
}

fn arrivals(config: &Config) -> Result<Parts> {
    let columns = vec![
        col("t_s", Format::General, Tolerance::EXACT),
        col("lambda_pps", Format::Fixed(0), P),
        col("system_time_ms", Format::Fixed(0), P),
        col("load", Format::Fixed(3), P),
        col("savings_pct", Format::Fixed(2), abs(0.05)),
        col("service_rate_pps", Format::Fixed(0), Tolerance::EXACT),
    ];
    let mu = config.fog_service_rate();
    let template = QueueModel::new(0.0, mu, 0.0)?;
    let baseline = config.regular_duty(0.0);
    let mut rows = Vec::new();
    for &t in &config.fleet.sleep_values_s {
        let duty = config.regular_duty(t);
        let lambda = f64::from(config.fleet.size) / duty.cycle_s();
        let m = template.with_arrival_rate(lambda)?.metrics()?;
        let savings = savings_vs_baseline(&duty, &baseline, &config.profiles.regular)?;
        rows.push(vec![
            t.into(),
            lambda.into(),
            (1000.0 * m.system_time_s).into(),
            m.load.into(),
            savings_cell(t, Some(savings)),
            mu.into(),
        ]);
    }
    Ok((columns, rows))
}

fn sleep_limit(config: &Config, mu: f64) -> Result<Parts> {
    let columns = vec![
        col("feedback_pct", Format::General, Tolerance::EXACT),
        col("t_s", Format::Fixed(2), P),
        col("lambda_pps", Format::Fixed(1), P),
        col("feedback_rate_pps", Format::Fixed(0), P),
        col("system_time_s", Format::Fixed(4), abs(2e-3)),
        col("load", Format::Fixed(4), abs(2e-3)),
        col("total_time_s", Format::Fixed(3), abs(2e-3)),
        col("savings_pct", Format::Fixed(1), P),
        col("service_rate_pps", Format::Fixed(0), Tolerance::EXACT),
    ];
    let mut rows = Vec::new();
    for &f in &config.link.feedback_fractions {
        let plan = max_sleep(config.fleet.size, config.fleet.active_s, mu, f, config.link.sleep_budget_s)?;
        let m = plan.metrics;
        let feedback = if f == 0.0 { Cell::Missing } else { m.feedback_rate_pps.into() };
        rows.push(vec![
            (100.0 * f).into(),
            plan.sleep_s.into(),
            m.arrival_rate_pps.into(),
            feedback,
            m.system_time_s.into(),
            m.load.into(),
            m.total_time_s.into(),
            m.savings_pct.into(),
            mu.into(),
        ]);
    }
    Ok((columns, rows))
}

fn occupancy(config: &Config) -> Result<Parts> {
    let columns = vec![
        Column::text("group"),
        col("apartments", Format::Fixed(0), Tolerance::EXACT),
        Column::text("schedules"),
        col("away_hours", Format::Fixed(2), P),
        col("home_hours", Format::Fixed(2), P),
        col("away_pct", Format::Fixed(2), P),
        col("home_pct", Format::Fixed(2), P),
    ];
    let mut rows = Vec::new();
    for g in &config.schedule.groups {
        let schedules: Vec<String> = g.schedules.iter().map(|s| format!("{}-{}", s.exit, s.entry)).collect();
        let away = g.away_hours()?;
        let home = g.home_hours()?;
        rows.push(vec![
            g.name.as_str().into(),
            g.apartment_count.into(),
            schedules.join(" ").into(),
            away.into(),
            home.into(),
            (100.0 * away / 24.0).into(),
            (100.0 * home / 24.0).into(),
        ]);
    }
    Ok((columns, rows))
}

fn group_savings(config: &Config) -> Result<Parts> {
    let columns = vec![
        Column::text("group"),
        col("apartments", Format::Fixed(0), Tolerance::EXACT),
        col("total_away_hours", Format::Fixed(1), P),
        col("total_home_hours", Format::Fixed(1), P),
        col("weight_pct", Format::Fixed(2), P),
        col("savings_pct", Format::Fixed(2), abs(0.05)),
        col("extra_savings_pct", Format::Fixed(2), abs(0.05)),
    ];
    let s = &config.schedule;
    let b = condominium_savings(&s.groups, s.t_savings_pct, config.fleet.active_s, s.long_sleep_s)?;
    let mut rows: Vec<Vec<Cell>> = b
        .groups
        .iter()
        .map(|g| {
            vec![
                g.name.as_str().into(),
                g.apartment_count.into(),
                g.total_away_hours.into(),
                g.total_home_hours.into(),
                g.weight_pct.into(),
                g.savings_pct.into(),
                g.extra_savings_pct.into(),
            ]
        })
        .collect();
    rows.push(vec![
        "Condo".into(),
        b.total_apartments.into(),
        b.total_away_hours.into(),
        b.total_home_hours.into(),
        100.0.into(),
        b.savings_pct.into(),
        b.extra_savings_pct.into(),
    ]);
    Ok((columns, rows))
}

fn long_sleep_sweep(config: &Config) -> Result<Parts> {
    let columns = vec![
        Column::text("setting"),
        col("seconds", Format::General, P),
        col("savings_pct", Format::Fixed(2), abs(0.05)),
        col("extra_savings_pct", Format::Fixed(2), abs(0.05)),
        col("day", Format::Fixed(2), rel(1e-2)),
        col("day_diff", Format::Fixed(2), rel(1e-2)),
        col("month", Format::Fixed(2), rel(1e-2)),
        col("month_diff", Format::Fixed(2), rel(1e-2)),
        col("year", Format::Fixed(2), rel(1e-2)),
        col("year_diff", Format::Fixed(2), rel(1e-2)),
    ];
    let s = &config.schedule;
    let active = config.fleet.active_s;
    let baseline = consumption_report(
        &config.profiles.regular,
        &config.regular_duty(0.0),
        config.fleet.size,
        &config.calendar,
        None,
    )?
    .kwh_per;
    let plan = max_sleep(
        config.fleet.size,
        active,
        config.mist_service_rate(),
        s.feedback_fraction,
        config.link.sleep_budget_s,
    )?;
    let sleep_only = apply_savings(&baseline, s.t_savings_pct);

    let row = |setting: &str,
               seconds: f64,
               e: f64,
               es: Option<f64>,
               kwh: &PeriodTable<f64>,
               diff: Option<&PeriodTable<f64>>| {
        let d = |p: fn(&PeriodTable<f64>) -> f64| Cell::from(diff.map(p));
        vec![
            setting.into(),
            seconds.into(),
            e.into(),
            es.into(),
            kwh.day.into(),
            d(|t| t.day),
            kwh.month.into(),
            d(|t| t.month),
            kwh.year.into(),
            d(|t| t.year),
        ]
    };

    let saved = PeriodTable::from_fn(|p| baseline.get(p) - sleep_only.get(p));
    let mut rows = vec![
        row("T", 0.0, 0.0, None, &baseline, None),
        row("T", plan.sleep_s, s.t_savings_pct, None, &sleep_only, Some(&saved)),
    ];
    for r in ls_sweep(&s.groups, s.t_savings_pct, active, &s.ls_values_s, &baseline)? {
        rows.push(row(
            "LS",
            r.ls_s,
            r.savings_pct,
            Some(r.extra_savings_pct),
            &r.consumption,
            Some(&r.delta_vs_sleep_only),
        ));
    }
    Ok((columns, rows))
}
