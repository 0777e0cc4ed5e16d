//! The event loop.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::report::{BroadcastRecord, PacketCounts, SimReport};
use super::{ArrivalModel, Result, ServiceModel, SimConfig};
use crate::energy::{cycle_energy, cycle_power, DutyCycle, OperatingMode, PeriodTable};
use crate::protocol::{AlarmCommand, ControlMessage, DeviceState};
use crate::schedule::MINUTES_PER_DAY;

const SECONDS_PER_DAY: f64 = 86_400.0;
const MWH_PER_KWH: f64 = 1.0e6;

// Independent random streams, so that e.g. turning feedback on does not
// reshuffle the device phases.
const STREAM_PHASE: u64 = 0;
const STREAM_TX: u64 = 1;
const STREAM_SERVICE: u64 = 2;
const STREAM_FEEDBACK: u64 = 3;

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Wake(u32),
    Transmit(u32),
    Departure,
    Feedback,
    EmergencyStart,
    EmergencyEnd,
    Occupancy { group: usize, away: bool },
}

impl EventKind {
    fn name(self) -> &'static str {
        match self {
            Self::Wake(_) => "wake",
            Self::Transmit(_) => "transmit",
            Self::Departure => "departure",
            Self::Feedback => "feedback",
            Self::EmergencyStart => "emergency_start",
            Self::EmergencyEnd => "emergency_end",
            Self::Occupancy { .. } => "occupancy",
        }
    }
}

#[derive(Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event, with
    // ties going to whichever was scheduled first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct Agenda {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl Agenda {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.heap.push(Event { time, seq: self.next_seq, kind });
        self.next_seq += 1;
    }

    fn pop_before(&mut self, horizon: f64) -> Option<Event> {
        if self.heap.peek()?.time < horizon {
            self.heap.pop()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum PacketKind {
    Sensor { emergency: bool },
    Feedback { device: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    arrival: f64,
    kind: PacketKind,
}

#[derive(Debug, Clone)]
struct Device {
    state: DeviceState,
    group: Option<usize>,
    /// Has seen the fire itself.
    detected: bool,
    started: bool,
    cycle_start: f64,
    cycle_active: f64,
    cycle_len: f64,
    cycle_mwh: f64,
    cycle_mode: OperatingMode,
    next_wake: f64,
    pending: Vec<ControlMessage>,
    energy_mwh: f64,
    cycles: u64,
}

fn mode_index(mode: OperatingMode) -> usize {
    match mode {
        OperatingMode::Regular => 0,
        OperatingMode::Emergency => 1,
        OperatingMode::LongSleep => 2,
    }
}

/// Per-cycle energy, memoised: only a handful of distinct cycles ever occur.
#[derive(Default)]
struct CycleCosts {
    known: Vec<(OperatingMode, u64, f64)>,
}

impl CycleCosts {
    fn get(&mut self, cfg: &SimConfig, duty: &DutyCycle<f64>) -> Result<f64> {
        let key = (duty.mode, duty.sleep_s.to_bits());
        if let Some(&(_, _, mwh)) = self.known.iter().find(|(m, s, _)| (*m, *s) == key) {
            return Ok(mwh);
        }
        let profile = match duty.mode {
            OperatingMode::Emergency => &cfg.profiles.emergency,
            _ => &cfg.profiles.regular,
        };
        let mwh = cycle_power(cycle_energy(profile, duty)?, profile.voltage_v)?;
        self.known.push((key.0, key.1, mwh));
        Ok(mwh)
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    agenda: Agenda,
    devices: Vec<Device>,
    groups: Vec<Range<u32>>,
    group_away: Vec<bool>,
    queue: VecDeque<Packet>,
    costs: CycleCosts,
    tx_rng: ChaCha8Rng,
    service_rng: ChaCha8Rng,
    feedback_rng: ChaCha8Rng,
    service_time: Option<Exp<f64>>,
    feedback_gap: Option<Exp<f64>>,

    emergency_active: bool,
    alarm_on: bool,

    now: f64,
    sensor_in_system: u64,
    area_sensor: f64,
    area_total: f64,
    counts: PacketCounts,
    sojourn_sum: f64,
    max_queue_len: u64,
    mode_time: [f64; 3],
    events: BTreeMap<&'static str, u64>,
    broadcasts: Vec<BroadcastRecord>,
}

/// Runs one simulation. Identical configs, seed included, give identical
/// reports.
pub fn run(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg)?;
    sim.schedule_initial()?;
    while let Some(event) = sim.agenda.pop_before(cfg.horizon_s) {
        sim.advance(event.time);
        *sim.events.entry(event.kind.name()).or_default() += 1;
        sim.handle(event.kind)?;
        debug_assert_eq!(sim.counts.sent, sim.counts.served + sim.sensor_in_system);
        debug_assert_eq!(sim.queue.len() as u64, sim.sensor_in_system + sim.feedback_in_system());
    }
    sim.advance(cfg.horizon_s);
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(id);
            rng
        };
        let mut phase_rng = stream(STREAM_PHASE);

        let mut groups = Vec::with_capacity(cfg.occupancy.len());
        let mut next = 0u32;
        for g in &cfg.occupancy {
            let end = next.saturating_add(g.apartment_count).min(cfg.fleet_size);
            groups.push(next..end);
            next = end;
        }
        let start_minute = cfg.day_start.minutes() % MINUTES_PER_DAY;
        let group_away =
            cfg.occupancy.iter().map(|g| g.is_away_at(start_minute)).collect::<std::result::Result<Vec<_>, _>>()?;

        let home = DeviceState::regular(cfg.sleep_s, cfg.long_sleep_s)?;
        let away = home.apply_control(ControlMessage::LongSleep(cfg.long_sleep_s as u8))?;
        let devices = (0..cfg.fleet_size)
            .map(|d| {
                let group = groups.iter().position(|r| r.contains(&d));
                let state = if group.is_some_and(|g| group_away[g]) { away } else { home };
                let first_wake = phase_rng.random::<f64>() * (cfg.active_s + state.sleep_s);
                Device {
                    state,
                    group,
                    detected: false,
                    started: false,
                    cycle_start: 0.0,
                    cycle_active: 0.0,
                    cycle_len: 0.0,
                    cycle_mwh: 0.0,
                    cycle_mode: state.mode,
                    next_wake: first_wake,
                    pending: Vec::new(),
                    energy_mwh: 0.0,
                    cycles: 0,
                }
            })
            .collect();

        let feedback_rate = cfg.feedback_fraction * cfg.service_rate_pps;
        Ok(Self {
            cfg,
            agenda: Agenda::default(),
            devices,
            groups,
            group_away,
            queue: VecDeque::new(),
            costs: CycleCosts::default(),
            tx_rng: stream(STREAM_TX),
            service_rng: stream(STREAM_SERVICE),
            feedback_rng: stream(STREAM_FEEDBACK),
            service_time: match cfg.service_model {
                ServiceModel::Exponential => Exp::new(cfg.service_rate_pps).ok(),
                ServiceModel::Deterministic => None,
            },
            feedback_gap: (feedback_rate > 0.0 && cfg.fleet_size > 0).then(|| Exp::new(feedback_rate).ok()).flatten(),
            emergency_active: false,
            alarm_on: false,
            now: 0.0,
            sensor_in_system: 0,
            area_sensor: 0.0,
            area_total: 0.0,
            counts: PacketCounts::default(),
            sojourn_sum: 0.0,
            max_queue_len: 0,
            mode_time: [0.0; 3],
            events: BTreeMap::new(),
            broadcasts: Vec::new(),
        })
    }

    fn schedule_initial(&mut self) -> Result<()> {
        for d in 0..self.cfg.fleet_size {
            let dev = &self.devices[d as usize];
            let (wake, cycle) = (dev.next_wake, self.nominal_cycle(&dev.state));
            self.agenda.push(wake, EventKind::Wake(d));
            if self.cfg.arrival_model == ArrivalModel::PoissonApprox {
                let gap = self.exp_gap(cycle);
                self.agenda.push(gap, EventKind::Transmit(d));
            }
        }
        if let Some(gap) = self.feedback_gap {
            let t = gap.sample(&mut self.feedback_rng);
            self.agenda.push(t, EventKind::Feedback);
        }
        if let Some(e) = &self.cfg.emergency {
            self.agenda.push(e.start_s, EventKind::EmergencyStart);
            self.agenda.push(e.start_s + e.duration_s, EventKind::EmergencyEnd);
        }
        let start = self.cfg.day_start.minutes() % MINUTES_PER_DAY;
        for (group, g) in self.cfg.occupancy.iter().enumerate() {
            for (minute, away) in g.transitions()? {
                let offset = (minute + MINUTES_PER_DAY - start) % MINUTES_PER_DAY;
                // A change exactly at t = 0 is already reflected in the initial state.
                let t = if offset == 0 { SECONDS_PER_DAY } else { f64::from(offset) * 60.0 };
                self.agenda.push(t, EventKind::Occupancy { group, away });
            }
        }
        Ok(())
    }

    fn nominal_cycle(&self, state: &DeviceState) -> f64 {
        match state.mode {
            OperatingMode::Emergency => DutyCycle::<f64>::emergency().cycle_s(),
            _ => self.cfg.active_s + state.sleep_s,
        }
    }

    fn exp_gap(&mut self, mean: f64) -> f64 {
        Exp::new(mean.recip()).map_or(f64::INFINITY, |e| e.sample(&mut self.tx_rng))
    }

    fn feedback_in_system(&self) -> u64 {
        self.counts.feedback_sent - self.counts.feedback_served
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        self.area_sensor += self.sensor_in_system as f64 * dt;
        self.area_total += self.queue.len() as f64 * dt;
        self.now = t;
    }

    fn handle(&mut self, kind: EventKind) -> Result<()> {
        let t = self.now;
        match kind {
            EventKind::Wake(d) => self.wake(d)?,
            EventKind::Transmit(d) => {
                let dev = &self.devices[d as usize];
                let emergency = dev.state.mode == OperatingMode::Emergency;
                let cycle = self.nominal_cycle(&dev.state);
                self.counts.sent += 1;
                self.sensor_in_system += 1;
                self.enqueue(Packet { arrival: t, kind: PacketKind::Sensor { emergency } });
                if self.cfg.arrival_model == ArrivalModel::PoissonApprox {
                    let gap = self.exp_gap(cycle);
                    self.agenda.push(t + gap, EventKind::Transmit(d));
                }
            }
            EventKind::Departure => self.depart()?,
            EventKind::Feedback => {
                let device = self.feedback_rng.random_range(0..self.cfg.fleet_size);
                self.counts.feedback_sent += 1;
                self.enqueue(Packet { arrival: t, kind: PacketKind::Feedback { device } });
                if let Some(gap) = self.feedback_gap {
                    let next = t + gap.sample(&mut self.feedback_rng);
                    self.agenda.push(next, EventKind::Feedback);
                }
            }
            EventKind::EmergencyStart => {
                self.emergency_active = true;
                if let Some(e) = &self.cfg.emergency {
                    for &d in &e.affected {
                        self.devices[d as usize].detected = true;
                    }
                }
            }
            EventKind::EmergencyEnd => {
                self.emergency_active = false;
                self.alarm_on = false;
                for dev in &mut self.devices {
                    dev.detected = false;
                }
                let ls = self.cfg.long_sleep_s as u8;
                self.broadcast("all_clear", |away| {
                    let resume =
                        if away { ControlMessage::LongSleep(ls) } else { ControlMessage::Mode(OperatingMode::Regular) };
                    vec![ControlMessage::Alarm(AlarmCommand::Off), resume]
                });
            }
            EventKind::Occupancy { group, away } => {
                self.group_away[group] = away;
                // During an emergency devices stay in the emergency cycle; the
                // all-clear sends them to whatever their group is doing then.
                if !self.emergency_active {
                    let msg = if away {
                        ControlMessage::LongSleep(self.cfg.long_sleep_s as u8)
                    } else {
                        ControlMessage::Mode(OperatingMode::Regular)
                    };
                    for d in self.groups[group].clone() {
                        self.deliver(d, msg);
                    }
                }
                self.agenda.push(t + SECONDS_PER_DAY, EventKind::Occupancy { group, away });
            }
        }
        Ok(())
    }

    fn wake(&mut self, d: u32) -> Result<()> {
        let t = self.now;
        let dev = &mut self.devices[d as usize];
        if dev.started {
            dev.energy_mwh += dev.cycle_mwh;
            dev.cycles += 1;
            self.mode_time[mode_index(dev.cycle_mode)] += dev.cycle_len;
        }
        dev.started = true;
        let mut rejected = 0;
        for msg in dev.pending.drain(..) {
            match dev.state.apply_control(msg) {
                Ok(next) => dev.state = next,
                Err(_) => rejected += 1,
            }
        }
        if dev.detected && dev.state.mode != OperatingMode::Emergency {
            dev.state = dev.state.apply_control(ControlMessage::Mode(OperatingMode::Emergency))?;
        }
        let duty = match dev.state.mode {
            OperatingMode::Emergency => DutyCycle::emergency(),
            mode => DutyCycle::new(self.cfg.active_s, dev.state.sleep_s, mode)?,
        };
        let mwh = self.costs.get(self.cfg, &duty)?;
        let dev = &mut self.devices[d as usize];
        dev.cycle_start = t;
        dev.cycle_active = duty.active_s;
        dev.cycle_len = duty.cycle_s();
        dev.cycle_mwh = mwh;
        dev.cycle_mode = duty.mode;
        dev.next_wake = t + duty.cycle_s();
        self.agenda.push(dev.next_wake, EventKind::Wake(d));
        if self.cfg.arrival_model == ArrivalModel::DeterministicCycle {
            self.agenda.push(t + duty.active_s - self.cfg.tx_time_s, EventKind::Transmit(d));
        }
        if rejected > 0 {
            *self.events.entry("control_rejected").or_default() += rejected;
        }
        Ok(())
    }

    fn enqueue(&mut self, packet: Packet) {
        self.queue.push_back(packet);
        self.max_queue_len = self.max_queue_len.max(self.queue.len() as u64);
        if self.queue.len() == 1 {
            self.start_service();
        }
    }

    fn start_service(&mut self) {
        let service = match self.service_time {
            Some(exp) => exp.sample(&mut self.service_rng),
            None => 1.0 / self.cfg.service_rate_pps,
        };
        self.agenda.push(self.now + service, EventKind::Departure);
    }

    fn depart(&mut self) -> Result<()> {
        let t = self.now;
        let Some(packet) = self.queue.pop_front() else {
            return Ok(());
        };
        match packet.kind {
            PacketKind::Sensor { emergency } => {
                self.counts.served += 1;
                self.sensor_in_system -= 1;
                self.sojourn_sum += t - packet.arrival;
                if emergency && self.emergency_active && !self.alarm_on {
                    self.alarm_on = true;
                    self.broadcast("alarm_on", |_| {
                        vec![ControlMessage::Alarm(AlarmCommand::On), ControlMessage::Mode(OperatingMode::Emergency)]
                    });
                }
            }
            PacketKind::Feedback { device } => {
                self.counts.feedback_served += 1;
                let cmd = if self.alarm_on { AlarmCommand::On } else { AlarmCommand::Off };
                self.deliver(device, ControlMessage::Alarm(cmd));
            }
        }
        if !self.queue.is_empty() {
            self.start_service();
        }
        Ok(())
    }

    /// Hands `msg` to device `d`. Inside the listen window it is applied at
    /// once, otherwise it waits for the next wake. Returns the time of receipt.
    fn deliver(&mut self, d: u32, msg: ControlMessage) -> f64 {
        let t = self.now;
        let tx = self.cfg.tx_time_s;
        *self.events.entry("control_delivered").or_default() += 1;
        let dev = &mut self.devices[d as usize];
        let listening = dev.started && t >= dev.cycle_start && t < dev.cycle_start + dev.cycle_active - tx;
        if listening {
            match dev.state.apply_control(msg) {
                Ok(next) => dev.state = next,
                Err(_) => *self.events.entry("control_rejected").or_default() += 1,
            }
            t
        } else {
            dev.pending.push(msg);
            dev.next_wake
        }
    }

    /// Sends the same control sequence to every device, picking the messages
    /// from the device's group occupancy.
    fn broadcast(&mut self, kind: &str, messages: impl Fn(bool) -> Vec<ControlMessage>) {
        let t = self.now;
        let (mut max_latency, mut sum_latency) = (0.0f64, 0.0);
        for d in 0..self.cfg.fleet_size {
            let away = self.devices[d as usize].group.is_some_and(|g| self.group_away[g]);
            let mut received = t;
            for msg in messages(away) {
                received = self.deliver(d, msg);
            }
            max_latency = max_latency.max(received - t);
            sum_latency += received - t;
        }
        let devices = self.cfg.fleet_size;
        self.broadcasts.push(BroadcastRecord {
            kind: kind.to_string(),
            sent_at_s: t,
            devices,
            max_latency_s: max_latency,
            mean_latency_s: if devices == 0 { 0.0 } else { sum_latency / f64::from(devices) },
        });
        *self.events.entry("broadcast").or_default() += 1;
    }

    fn finish(self) -> SimReport {
        let cfg = self.cfg;
        let horizon = cfg.horizon_s;
        let per_time = |x: f64| if horizon > 0.0 { x / horizon } else { 0.0 };
        let mean_occupancy = per_time(self.area_sensor);
        let mean_sojourn_s = if self.counts.served > 0 { self.sojourn_sum / self.counts.served as f64 } else { 0.0 };
        let observed_arrival_rate_pps = per_time(self.counts.sent as f64);
        let littles_law_residual = if mean_occupancy > 0.0 {
            (mean_occupancy - observed_arrival_rate_pps * mean_sojourn_s).abs() / mean_occupancy
        } else {
            0.0
        };
        let device_energy_mwh: Vec<f64> = self.devices.iter().map(|d| d.energy_mwh).collect();
        let total_energy_mwh: f64 = device_energy_mwh.iter().sum();
        let rate = per_time(total_energy_mwh);
        let nominal = cfg.nominal_arrival_rate();
        let mut counts = self.counts;
        counts.in_queue = self.sensor_in_system;
        counts.feedback_in_queue = counts.feedback_sent - counts.feedback_served;

        SimReport {
            seed: cfg.seed,
            horizon_s: horizon,
            fleet_size: cfg.fleet_size,
            arrival_model: cfg.arrival_model,
            service_model: cfg.service_model,
            active_s: cfg.active_s,
            sleep_s: cfg.sleep_s,
            long_sleep_s: cfg.long_sleep_s,
            nominal_arrival_rate_pps: nominal,
            service_rate_pps: cfg.service_rate_pps,
            feedback_fraction: cfg.feedback_fraction,
            emergency_configured: cfg.emergency.is_some(),
            occupancy_configured: !cfg.occupancy.is_empty(),
            saturated: nominal >= (1.0 - cfg.feedback_fraction) * cfg.service_rate_pps,
            packets: counts,
            mean_occupancy,
            mean_total_occupancy: per_time(self.area_total),
            mean_sojourn_s,
            observed_arrival_rate_pps,
            littles_law_residual,
            max_queue_len: self.max_queue_len,
            device_cycles: self.devices.iter().map(|d| d.cycles).collect(),
            device_energy_mwh,
            total_energy_mwh,
            kwh_per: PeriodTable::from_fn(|p| rate * p.seconds(&cfg.calendar) / MWH_PER_KWH),
            mode_time_s: OperatingMode::ALL
                .iter()
                .map(|&m| (m.as_str().to_string(), self.mode_time[mode_index(m)]))
                .collect(),
            broadcasts: self.broadcasts,
            event_counts: self.events.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::fog;
    use super::super::{compare_with_analytic, EmergencyScenario, SimError, Tolerances};
    use super::*;
    use crate::energy::{energy_rate, fixtures as energy};
    use crate::queueing::QueueModel;
    use crate::schedule::{DaySchedule, OccupancyGroup, TimeOfDay};

    fn deterministic(fleet: u32, sleep: f64, horizon: f64) -> SimConfig {
        SimConfig { sleep_s: sleep, arrival_model: ArrivalModel::DeterministicCycle, horizon_s: horizon, ..fog(fleet) }
    }

    #[test]
    fn empty_fleet_is_silent() {
        let r = run(&fog(0)).unwrap();
        assert_eq!(r.packets, PacketCounts::default());
        assert_eq!(r.total_energy_mwh, 0.0);
        assert!(r.device_energy_mwh.is_empty());
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = SimConfig { horizon_s: 200.0, feedback_fraction: 0.05, seed: 7, ..fog(300) };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = run(&SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn packets_are_conserved() {
        // Overloaded on purpose so packets are left in the queue.
        let cfg = SimConfig { horizon_s: 50.0, service_rate_pps: 140.0, feedback_fraction: 0.1, ..fog(300) };
        let r = run(&cfg).unwrap();
        let p = r.packets;
        assert!(r.saturated);
        assert!(p.in_queue > 0);
        assert_eq!(p.sent, p.served + p.in_queue);
        assert_eq!(p.feedback_sent, p.feedback_served + p.feedback_in_queue);
    }

    #[test]
    fn deterministic_device_energy_is_sum_of_cycles() {
        let cfg = deterministic(3, 3.0, 1_000.0);
        let r = run(&cfg).unwrap();
        let per_cycle =
            cycle_power(cycle_energy(&cfg.profiles.regular, &DutyCycle::regular(2.0, 3.0).unwrap()).unwrap(), 9.0)
                .unwrap();
        for (e, &n) in r.device_energy_mwh.iter().zip(&r.device_cycles) {
            assert_eq!(*e, (0..n).fold(0.0, |acc, _| acc + per_cycle));
            assert!(n == 199 || n == 200, "{n}");
        }
        // One packet per started cycle.
        assert!(r.packets.sent >= 3 * 199 && r.packets.sent <= 3 * 200);
    }

    #[test]
    fn single_device_day_matches_energy_model() {
        let cfg = deterministic(1, 3.0, 86_400.0);
        let r = run(&cfg).unwrap();
        let analytic = energy_rate(&cfg.profiles.regular, &energy::duty(3.0)).unwrap() * 86_400.0 / 1e6;
        let simulated = r.total_energy_mwh / 1e6;
        assert!((simulated - analytic).abs() / analytic < 0.005, "{simulated} vs {analytic}");
        assert!((r.kwh_per.day - 9.4e-3).abs() / 9.4e-3 < 0.005);
    }

    #[test]
    fn emergency_for_whole_run_uses_emergency_cycle() {
        let cfg = SimConfig {
            emergency: Some(EmergencyScenario { start_s: 0.0, duration_s: 1e9, affected: vec![0, 1] }),
            ..deterministic(2, 3.0, 500.0)
        };
        let r = run(&cfg).unwrap();
        let per_cycle = r.total_energy_mwh / r.device_cycles.iter().sum::<u64>() as f64;
        // The first cycle of each device is still regular.
        assert!((per_cycle - 0.585).abs() < 0.005, "{per_cycle}");
        assert!(r.mode_time_s["emergency"] > 0.98 * 2.0 * 490.0);
    }

    #[test]
    fn alarm_broadcast_reaches_everyone_within_a_cycle() {
        let cfg = SimConfig {
            emergency: Some(EmergencyScenario { start_s: 100.0, duration_s: 50.0, affected: vec![3] }),
            ..deterministic(50, 3.0, 300.0)
        };
        let r = run(&cfg).unwrap();
        let kinds: Vec<&str> = r.broadcasts.iter().map(|b| b.kind.as_str()).collect();
        assert_eq!(kinds, ["alarm_on", "all_clear"]);
        let alarm = &r.broadcasts[0];
        assert_eq!(alarm.devices, 50);
        assert!(alarm.sent_at_s >= 100.0 && alarm.sent_at_s < 106.0);
        assert!(alarm.max_latency_s <= 5.0 + 1e-9, "{}", alarm.max_latency_s);
        // After the all-clear everyone is back in the 5 s cycle.
        assert!(r.mode_time_s["emergency"] > 0.0);
        assert_eq!(r.event_counts.get("control_rejected"), None);
    }

    #[test]
    fn away_groups_switch_to_long_sleep() {
        let group = OccupancyGroup {
            name: "out at night".into(),
            apartment_count: 2,
            schedules: vec![DaySchedule::new("00:00".parse().unwrap(), "12:00".parse().unwrap())],
            away_hours_override: None,
        };
        let cfg = SimConfig {
            occupancy: vec![group],
            long_sleep_s: 58.0,
            day_start: TimeOfDay::hm(6, 0).unwrap(),
            ..deterministic(3, 3.0, 86_400.0)
        };
        let r = run(&cfg).unwrap();
        // Two devices spend half the day in Long Sleep; the third never does.
        let ls = r.mode_time_s["long_sleep"];
        assert!((ls - 2.0 * 43_200.0).abs() < 2.0 * 120.0, "{ls}");
        assert!(r.device_cycles[2] > r.device_cycles[0]);
        assert_eq!(r.event_counts["occupancy"], 2);
    }

    #[test]
    fn poisson_run_matches_mm1() {
        let cfg = SimConfig { horizon_s: 2_000.0, seed: 3, ..fog(300) };
        let r = run(&cfg).unwrap();
        let queue = QueueModel::new(150.0, 576.0, 0.0).unwrap();
        let cmp = compare_with_analytic(
            &r,
            &queue,
            &cfg.profiles.regular,
            &DutyCycle::regular(2.0, 0.0).unwrap(),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(cmp.passed(), "{cmp:?}");
    }

    #[test]
    fn deterministic_gap_is_reported_not_failed() {
        let cfg = SimConfig { horizon_s: 500.0, ..deterministic(300, 0.0, 500.0) };
        let r = run(&cfg).unwrap();
        let queue = QueueModel::new(150.0, 576.0, 0.0).unwrap();
        let cmp = compare_with_analytic(
            &r,
            &queue,
            &cfg.profiles.regular,
            &DutyCycle::regular(2.0, 0.0).unwrap(),
            &Tolerances::default(),
        )
        .unwrap();
        let occ = cmp.get("occupancy").unwrap();
        assert!(!occ.enforced);
        assert!(occ.relative > 0.0);
    }

    #[test]
    fn comparison_errors() {
        let r = run(&SimConfig { horizon_s: 0.0, ..fog(300) }).unwrap();
        let queue = QueueModel::new(150.0, 576.0, 0.0).unwrap();
        let profile = energy::regular();
        let duty = DutyCycle::regular(2.0, 0.0).unwrap();
        let tol = Tolerances::default();
        assert_eq!(compare_with_analytic(&r, &queue, &profile, &duty, &tol), Err(SimError::EmptySample));
        let r = run(&SimConfig { horizon_s: 20.0, ..fog(300) }).unwrap();
        let other = QueueModel::new(60.0, 576.0, 0.0).unwrap();
        assert!(matches!(
            compare_with_analytic(&r, &other, &profile, &duty, &tol),
            Err(SimError::MismatchedConfig { .. })
        ));
    }

    #[test]
    fn deterministic_service_never_waits_below_capacity() {
        // A lone device never finds the server busy.
        let cfg = SimConfig { service_model: ServiceModel::Deterministic, ..deterministic(1, 0.0, 100.0) };
        let r = run(&cfg).unwrap();
        assert!((r.mean_sojourn_s - 1.0 / 576.0).abs() < 1e-12);
    }
}
