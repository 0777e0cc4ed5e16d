//! `fogduty`: reproduce the energy, queueing and scheduling tables from a
//! config file and run the fleet simulator.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fogduty_core::config::Config;
use fogduty_core::sim::{self, Tolerances};
use fogduty_core::tables::{self, Precision, TableError, TableId};
use fogduty_core::{DutyCycle, QueueModel};

use output::{Format, Output, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "fogduty",
    version,
    about = "Duty-cycle energy, queueing and occupancy analysis for Fog/Mist IoT fleets"
)]
struct Cli {
    /// Config file. The bundled reference config is used when omitted.
    #[arg(long, global = true, env = "FOGDUTY_CONFIG")]
    config: Option<PathBuf>,

    /// Directory for report files. Reports go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Print every digit instead of the published precision.
    #[arg(long, global = true)]
    full_precision: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Module currents, per-device and fleet consumption (tables 1 to 5).
    AnalyzeEnergy(TableArgs),
    /// Coordinator delay, load and largest sleep time (tables 6 to 8).
    AnalyzeQueue {
        #[command(flatten)]
        tables: TableArgs,
        /// Feedback fractions for tables 7 and 8, e.g. `--feedback 0,0.01,0.05`.
        #[arg(long, value_delimiter = ',')]
        feedback: Vec<f64>,
    },
    /// Occupancy groups and Long Sleep savings (tables 9 to 11).
    AnalyzeSchedule {
        #[command(flatten)]
        tables: TableArgs,
        /// Long Sleep used while away, seconds.
        #[arg(long)]
        ls: Option<f64>,
    },
    /// Run the discrete-event simulation described by `[simulation]`.
    Simulate(SimulateArgs),
    /// Every table, plus a per-cell diff against the published values.
    ReproduceTables {
        #[command(flatten)]
        tables: TableArgs,
        /// Exit nonzero if any cell deviates beyond its tolerance.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Only these tables, e.g. `--table table6` or `--table 6`. Repeatable.
    #[arg(long = "table", value_parser = parse_table)]
    tables: Vec<TableId>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Fraction of the coordinator reserved for feedback.
    #[arg(long)]
    feedback: Option<f64>,
    /// Long Sleep while away, seconds.
    #[arg(long)]
    ls: Option<f64>,
    /// Also compare the run with the analytic queue and energy models and
    /// exit nonzero if an enforced metric is out of tolerance.
    #[arg(long)]
    compare: bool,
}

fn parse_table(s: &str) -> Result<TableId, TableError> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    Energy,
    Queue,
    Schedule,
    All,
}

impl Group {
    fn tables(self) -> &'static [TableId] {
        use TableId::*;
        match self {
            Group::Energy => &[Table1, Table2, Table3, Table4, Table5],
            Group::Queue => &[Table6, Table7, Table8],
            Group::Schedule => &[Table9, Table10, Table11],
            Group::All => &TableId::ALL,
        }
    }

    fn command(self) -> &'static str {
        match self {
            Group::Energy => "analyze-energy",
            Group::Queue => "analyze-queue",
            Group::Schedule => "analyze-schedule",
            Group::All => "reproduce-tables",
        }
    }
}

/// The requested tables, in table order, restricted to the ones `group` makes.
fn select(group: Group, requested: &[TableId]) -> Result<Vec<TableId>> {
    let available = group.tables();
    if requested.is_empty() {
        return Ok(available.to_vec());
    }
    if let Some(t) = requested.iter().find(|t| !available.contains(t)) {
        bail!("{t} is not produced by {}", group.command());
    }
    let mut out: Vec<TableId> = requested.to_vec();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn load_config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(path) => Config::load(path).with_context(|| format!("cannot use config {}", path.display())),
        None => Ok(Config::reference()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let mut config = load_config(cli)?;
    let precision = if cli.full_precision { Precision::Full } else { Precision::Printed };
    let out = Output::new(cli.out.clone(), cli.format, precision)?;

    let (group, requested, strict) = match &cli.command {
        Command::AnalyzeEnergy(t) => (Group::Energy, &t.tables, false),
        Command::AnalyzeQueue { tables, feedback } => {
            if !feedback.is_empty() {
                config.link.feedback_fractions = feedback.clone();
            }
            (Group::Queue, &tables.tables, false)
        }
        Command::AnalyzeSchedule { tables, ls } => {
            if let Some(ls) = ls {
                config.schedule.long_sleep_s = *ls;
            }
            (Group::Schedule, &tables.tables, false)
        }
        Command::ReproduceTables { tables, strict } => (Group::All, &tables.tables, *strict),
        Command::Simulate(args) => return simulate(cli, config, args, &out),
    };
    config.validate().context("invalid command-line override")?;
    let selected = select(group, requested)?;

    let built = selected.iter().map(|&id| tables::build(id, &config)).collect::<Result<Vec<_>, _>>()?;
    out.tables(&built)?;

    if group == Group::Schedule && selected.contains(&TableId::Table10) {
        let b = fogduty_core::schedule::condominium_savings(
            &config.schedule.groups,
            config.schedule.t_savings_pct,
            config.fleet.active_s,
            config.schedule.long_sleep_s,
        )?;
        for w in &b.warnings {
            eprintln!("warning: {w}");
        }
        eprintln!("condominium E = {:.2} %, ES = {:.2} % at LS = {} s", b.savings_pct, b.extra_savings_pct, b.ls_s);
    }

    let mut code = ExitCode::SUCCESS;
    if group == Group::All {
        let clean = out.deviations(&built)?;
        if strict && !clean {
            eprintln!("error: some cells deviate from the published tables beyond tolerance");
            code = ExitCode::FAILURE;
        }
    }

    out.manifest(&RunManifest::new(group.command(), cli.config.as_deref(), &selected, cli.format, precision))?;
    Ok(code)
}

fn simulate(cli: &Cli, mut config: Config, args: &SimulateArgs, out: &Output) -> Result<ExitCode> {
    let s = &mut config.simulation;
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(h) = args.horizon {
        s.horizon_s = h;
    }
    if let Some(f) = args.feedback {
        s.feedback_fraction = f;
    }
    if let Some(ls) = args.ls {
        s.long_sleep_s = Some(ls);
    }
    config.validate().context("invalid command-line override")?;
    let sim_config = config.sim_config()?;
    sim_config.validate()?;
    let report = sim::run(&sim_config)?;
    out.simulation(&report)?;

    let mut code = ExitCode::SUCCESS;
    if args.compare {
        let queue = QueueModel::new(
            sim_config.nominal_arrival_rate(),
            sim_config.service_rate_pps,
            sim_config.feedback_fraction,
        )?;
        let duty = DutyCycle::regular(sim_config.active_s, sim_config.sleep_s)?;
        let comparison =
            sim::compare_with_analytic(&report, &queue, &sim_config.profiles.regular, &duty, &Tolerances::default())?;
        out.comparison(&comparison)?;
        if !comparison.passed() {
            eprintln!("error: simulation disagrees with the analytic model beyond tolerance");
            code = ExitCode::FAILURE;
        }
    }
    out.manifest(&RunManifest::new("simulate", cli.config.as_deref(), &[], cli.format, Precision::Full))?;
    Ok(code)
}
