//! Analytic models of the coordinator queue.
//!
//! The coordinator's serial link is the bottleneck: packets arrive from the
//! fleet at `λ = fleet / cycle` and are drained at `μ = U / (8 P)`. Control
//! traffic back to the devices reserves a fraction `f` of the server, so sensor
//! packets see `μ_eff = (1 − f) μ`. A Mist coordinator in front of the Fog node
//! forms a tandem of two such queues that is collapsed into one queue whose
//! packet size is the sum of the stage sizes.
//!
//! [`system_time`] is the delay figure used throughout the sleep budget:
//! `λ / (μ_eff − λ)`. It is numerically the M/M/1 mean number in system; the
//! per-packet sojourn time `1 / (μ − λ)` is [`mean_sojourn_time`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{percent, Scalar};

/// Resolution of the sleep-time search, seconds.
pub const SLEEP_GRID_STEP_S: f64 = 0.01;

/// Upper bound on `TT = E{T} + T`, seconds.
pub const SLEEP_BUDGET_S: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("packet size must be positive")]
    ZeroPacket,
    #[error("link speed must be positive, got {0} bps")]
    NonPositiveSpeed(f64),
    #[error("cycle length must be positive, got {0} s")]
    NonPositiveCycle(f64),
    #[error("service rate must be positive, got {0} pct/s")]
    NonPositiveService(f64),
    #[error("arrival rate must be non-negative, got {0} pct/s")]
    NegativeArrival(f64),
    #[error("feedback fraction {0} is outside [0, 1)")]
    FeedbackOutOfRange(f64),
    #[error("queue is unstable: arrival rate {arrival} pct/s >= service rate {service} pct/s")]
    Unstable { arrival: f64, service: f64 },
    #[error("tandem needs at least one stage")]
    EmptyTandem,
    #[error("sleep budget must be positive, got {0} s")]
    NonPositiveBudget(f64),
    #[error("no sleep time on the grid keeps E{{T}} + T within {budget_s} s")]
    Infeasible { budget_s: f64 },
}

pub type Result<T, E = QueueError> = std::result::Result<T, E>;

/// Serial link between radio and host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec<S> {
    pub speed_bps: S,
    pub packet_bytes: u32,
}

impl<S: Scalar> LinkSpec<S> {
    pub fn new(speed_bps: S, packet_bytes: u32) -> Result<Self> {
        let link = Self { speed_bps, packet_bytes };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if self.packet_bytes == 0 {
            return Err(QueueError::ZeroPacket);
        }
        if !(self.speed_bps > S::zero()) {
            return Err(QueueError::NonPositiveSpeed(self.speed_bps.as_f64()));
        }
        Ok(())
    }
}

/// How service rates are carried into the queue formulas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateResolution {
    /// Full-precision `U / 8P`.
    #[default]
    Exact,
    /// Rounded to whole packets per second, as rates are usually quoted.
    WholePackets,
}

impl RateResolution {
    pub fn apply<S: Scalar>(self, rate: S) -> S {
        match self {
            Self::Exact => rate,
            Self::WholePackets => rate.round(),
        }
    }
}

/// `U / (8 P)`, packets per second.
pub fn service_rate<S: Scalar>(link: &LinkSpec<S>) -> Result<S> {
    link.validate()?;
    Ok(link.speed_bps / (S::lit(8.0) * S::count(link.packet_bytes)))
}

/// One packet per device per cycle.
pub fn arrival_rate<S: Scalar>(fleet_size: u32, cycle_s: S) -> Result<S> {
    if !(cycle_s > S::zero()) {
        return Err(QueueError::NonPositiveCycle(cycle_s.as_f64()));
    }
    Ok(S::count(fleet_size) / cycle_s)
}

pub fn load<S: Scalar>(arrival_pps: S, service_pps: S) -> Result<S> {
    check_rates(arrival_pps, service_pps)?;
    Ok(arrival_pps / service_pps)
}

/// `λ / (μ − λ)`, the delay figure the sleep budget is charged with.
pub fn system_time<S: Scalar>(arrival_pps: S, service_pps: S) -> Result<S> {
    check_stable(arrival_pps, service_pps)?;
    Ok(arrival_pps / (service_pps - arrival_pps))
}

/// `1 / (μ − λ)`, the M/M/1 mean time a packet spends queued plus in service.
pub fn mean_sojourn_time<S: Scalar>(arrival_pps: S, service_pps: S) -> Result<S> {
    check_stable(arrival_pps, service_pps)?;
    Ok(S::one() / (service_pps - arrival_pps))
}

fn check_rates<S: Scalar>(arrival: S, service: S) -> Result<()> {
    if !(service > S::zero()) {
        return Err(QueueError::NonPositiveService(service.as_f64()));
    }
    if !(arrival >= S::zero()) {
        return Err(QueueError::NegativeArrival(arrival.as_f64()));
    }
    Ok(())
}

fn check_stable<S: Scalar>(arrival: S, service: S) -> Result<()> {
    check_rates(arrival, service)?;
    if arrival >= service {
        return Err(QueueError::Unstable { arrival: arrival.as_f64(), service: service.as_f64() });
    }
    Ok(())
}

/// A single-server queue, optionally with part of its capacity reserved for
/// feedback (control) traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueModel<S> {
    pub arrival_rate_pps: S,
    pub service_rate_pps: S,
    pub feedback_fraction: S,
}

impl<S: Scalar> QueueModel<S> {
    pub fn new(arrival_rate_pps: S, service_rate_pps: S, feedback_fraction: S) -> Result<Self> {
        let model = Self { arrival_rate_pps, service_rate_pps, feedback_fraction };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        check_rates(self.arrival_rate_pps, self.service_rate_pps)?;
        let f = self.feedback_fraction;
        if !(f >= S::zero() && f < S::one()) {
            return Err(QueueError::FeedbackOutOfRange(f.as_f64()));
        }
        Ok(())
    }

    pub fn with_feedback(self, feedback_fraction: S) -> Result<Self> {
        Self::new(self.arrival_rate_pps, self.service_rate_pps, feedback_fraction)
    }

    pub fn with_arrival_rate(self, arrival_rate_pps: S) -> Result<Self> {
        Self::new(arrival_rate_pps, self.service_rate_pps, self.feedback_fraction)
    }

    /// `(1 − f) μ`.
    pub fn effective_service_rate(&self) -> S {
        (S::one() - self.feedback_fraction) * self.service_rate_pps
    }

    /// `f μ`, the rate reserved for feedback packets.
    pub fn feedback_rate(&self) -> S {
        self.feedback_fraction * self.service_rate_pps
    }

    pub fn is_stable(&self) -> bool {
        self.arrival_rate_pps < self.effective_service_rate()
    }

    /// Metrics with no sleep attached (`TT = E{T}`, no savings).
    pub fn metrics(&self) -> Result<QueueMetrics<S>> {
        self.validate()?;
        let mu = self.effective_service_rate();
        let delay = system_time(self.arrival_rate_pps, mu)?;
        Ok(QueueMetrics {
            arrival_rate_pps: self.arrival_rate_pps,
            effective_service_rate_pps: mu,
            feedback_rate_pps: self.feedback_rate(),
            load: load(self.arrival_rate_pps, mu)?,
            system_time_s: delay,
            sleep_s: S::zero(),
            total_time_s: delay,
            savings_pct: S::zero(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueMetrics<S> {
    pub arrival_rate_pps: S,
    pub effective_service_rate_pps: S,
    /// λ_F; zero without feedback.
    pub feedback_rate_pps: S,
    /// ρ = λ / μ_eff.
    pub load: S,
    /// E{T}.
    pub system_time_s: S,
    pub sleep_s: S,
    /// TT = E{T} + T.
    pub total_time_s: S,
    /// Sleep fraction `T / (active + T)`, percent.
    pub savings_pct: S,
}

impl<S: Scalar> QueueMetrics<S> {
    fn with_sleep(mut self, active_s: S, sleep_s: S) -> Self {
        self.sleep_s = sleep_s;
        self.total_time_s = self.system_time_s + sleep_s;
        self.savings_pct = percent(sleep_s / (active_s + sleep_s));
        self
    }
}

/// Metrics of a queue that reserves `feedback_fraction` of `μ` for control
/// traffic. Each queue of the feedback network is evaluated independently.
pub fn feedback_metrics<S: Scalar>(arrival_pps: S, service_pps: S, feedback_fraction: S) -> Result<QueueMetrics<S>> {
    QueueModel::new(arrival_pps, service_pps, feedback_fraction)?.metrics()
}

/// Stages of a tandem (Mist then Fog) that share one serial link speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemSpec<S> {
    pub speed_bps: S,
    /// Packet size seen by each stage, upstream first.
    pub stage_packet_bytes: Vec<u32>,
    /// Packet size of the control traffic at each stage.
    pub feedback_stage_bytes: Vec<u32>,
}

/// A tandem collapsed into a single equivalent queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemQueue<S> {
    pub packet_bytes: u32,
    pub feedback_packet_bytes: u32,
    pub feedback_service_rate_pps: Option<S>,
    pub model: QueueModel<S>,
}

/// Collapses a tandem of queues into one whose packet is the sum of the stage
/// packets, so its service time is the sum of the stage service times.
pub fn tandem_combined<S: Scalar>(
    arrival_pps: S,
    spec: &TandemSpec<S>,
    resolution: RateResolution,
) -> Result<TandemQueue<S>> {
    if spec.stage_packet_bytes.is_empty() {
        return Err(QueueError::EmptyTandem);
    }
    let packet_bytes: u32 = spec.stage_packet_bytes.iter().sum();
    let mu = resolution.apply(service_rate(&LinkSpec::new(spec.speed_bps, packet_bytes)?)?);
    let feedback_packet_bytes: u32 = spec.feedback_stage_bytes.iter().sum();
    let feedback_service_rate_pps = if feedback_packet_bytes == 0 {
        None
    } else {
        Some(resolution.apply(service_rate(&LinkSpec::new(spec.speed_bps, feedback_packet_bytes)?)?))
    };
    Ok(TandemQueue {
        packet_bytes,
        feedback_packet_bytes,
        feedback_service_rate_pps,
        model: QueueModel::new(arrival_pps, mu, S::zero())?,
    })
}

/// Largest sleep time found by [`max_sleep`] and the queue at that point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SleepPlan<S> {
    pub sleep_s: S,
    pub metrics: QueueMetrics<S>,
}

/// Largest `T` on a 0.01 s grid such that `E{T} + T ≤ budget_s`, where the
/// fleet's arrival rate is `fleet / (active_s + T)`.
pub fn max_sleep<S: Scalar>(
    fleet_size: u32,
    active_s: S,
    service_pps: S,
    feedback_fraction: S,
    budget_s: S,
) -> Result<SleepPlan<S>> {
    max_sleep_on_grid(fleet_size, active_s, service_pps, feedback_fraction, budget_s, S::lit(SLEEP_GRID_STEP_S))
}

/// [`max_sleep`] with an explicit grid step.
pub fn max_sleep_on_grid<S: Scalar>(
    fleet_size: u32,
    active_s: S,
    service_pps: S,
    feedback_fraction: S,
    budget_s: S,
    step_s: S,
) -> Result<SleepPlan<S>> {
    if !(budget_s > S::zero()) {
        return Err(QueueError::NonPositiveBudget(budget_s.as_f64()));
    }
    if !(active_s > S::zero()) {
        return Err(QueueError::NonPositiveCycle(active_s.as_f64()));
    }
    let template = QueueModel::new(S::zero(), service_pps, feedback_fraction)?;
    let steps = (budget_s / step_s + S::lit(1e-9)).floor().to_u32().unwrap_or(0);
    // E{T} >= 0, so T alone can never exceed the budget; scan down from there.
    for k in (0..=steps).rev() {
        let sleep = S::count(k) * step_s;
        let model = template.with_arrival_rate(arrival_rate(fleet_size, active_s + sleep)?)?;
        if !model.is_stable() {
            continue;
        }
        let metrics = model.metrics()?.with_sleep(active_s, sleep);
        if metrics.total_time_s <= budget_s {
            return Ok(SleepPlan { sleep_s: sleep, metrics });
        }
    }
    Err(QueueError::Infeasible { budget_s: budget_s.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const FOG: LinkSpec<f64> = LinkSpec { speed_bps: 115_200.0, packet_bytes: 25 };

    fn mist() -> TandemSpec<f64> {
        TandemSpec { speed_bps: 115_200.0, stage_packet_bytes: vec![25, 10], feedback_stage_bytes: vec![5, 25] }
    }

    #[test]
    fn service_rate_examples() {
        assert_eq!(service_rate(&FOG).unwrap(), 576.0);
        assert_eq!(service_rate(&LinkSpec::new(115_200.0f64, 10).unwrap()).unwrap(), 1440.0);
        let combined = service_rate(&LinkSpec::new(115_200.0f64, 35).unwrap()).unwrap();
        assert!((combined - 411.43).abs() < 0.005);
        assert_eq!(combined.round(), 411.0);
        assert_eq!(LinkSpec::new(115_200.0f64, 0), Err(QueueError::ZeroPacket));
    }

    #[test]
    fn arrival_rate_examples() {
        assert_eq!(arrival_rate(300, 2.0).unwrap(), 150.0);
        assert_eq!(arrival_rate(300, 5.0).unwrap(), 60.0);
        assert_eq!(arrival_rate(0, 2.0).unwrap(), 0.0);
        assert!(matches!(arrival_rate(300, 0.0), Err(QueueError::NonPositiveCycle(_))));
    }

    #[test]
    fn load_and_delay_examples() {
        assert!((load(150.0f64, 576.0).unwrap() - 0.260).abs() < 5e-4);
        assert!((load(60.0f64, 576.0).unwrap() - 0.104).abs() < 5e-4);
        assert_eq!(load(0.0f64, 576.0).unwrap(), 0.0);
        assert!((system_time(150.0f64, 576.0).unwrap() - 0.352).abs() < 5e-4);
        assert!((system_time(60.0f64, 576.0).unwrap() - 0.116).abs() < 5e-4);
        assert!((system_time(100.0f64, 576.0).unwrap() - 0.210).abs() < 5e-4);
        assert!(matches!(system_time(576.0f64, 576.0), Err(QueueError::Unstable { .. })));
        assert_relative_eq!(mean_sojourn_time(150.0, 576.0).unwrap(), 1.0 / 426.0);
    }

    #[test]
    fn feedback_examples() {
        let m = feedback_metrics(150.0f64, 576.0, 0.01).unwrap();
        // 150 / (570.24 - 150); quoted elsewhere truncated to 356 ms.
        assert!((m.system_time_s - 0.357).abs() < 5e-4, "{}", m.system_time_s);
        assert!((m.effective_service_rate_pps - 570.24).abs() < 1e-9);
        let m = feedback_metrics(61.6f64, 576.0, 0.01).unwrap();
        assert!((m.system_time_s - 0.121).abs() < 5e-4);
        assert_eq!(m.feedback_rate_pps.round(), 6.0);
        let plain = feedback_metrics(100.0f64, 576.0, 0.0).unwrap();
        assert_eq!(plain.system_time_s, system_time(100.0f64, 576.0).unwrap());
        assert!(matches!(feedback_metrics(10.0f64, 576.0, 1.0), Err(QueueError::FeedbackOutOfRange(_))));
    }

    #[test]
    fn mist_tandem_collapses() {
        let t = tandem_combined(150.0, &mist(), RateResolution::WholePackets).unwrap();
        assert_eq!(t.packet_bytes, 35);
        assert_eq!(t.feedback_packet_bytes, 30);
        assert_eq!(t.model.service_rate_pps, 411.0);
        assert_eq!(t.feedback_service_rate_pps, Some(480.0));
        let single = TandemSpec { speed_bps: 115_200.0, stage_packet_bytes: vec![25], feedback_stage_bytes: vec![] };
        let s = tandem_combined(150.0, &single, RateResolution::Exact).unwrap();
        assert_eq!(s.model, QueueModel::new(150.0, 576.0, 0.0).unwrap());
        assert_eq!(s.feedback_service_rate_pps, None);
        let empty = TandemSpec { speed_bps: 115_200.0, stage_packet_bytes: vec![], feedback_stage_bytes: vec![] };
        assert_eq!(tandem_combined(150.0, &empty, RateResolution::Exact), Err(QueueError::EmptyTandem));
    }

    #[test]
    fn fog_sleep_optimum() {
        let plan = max_sleep(300, 2.0f64, 576.0, 0.0, 3.0).unwrap();
        assert!((plan.sleep_s - 2.88).abs() < 1e-9);
        assert!((plan.metrics.total_time_s - 2.999).abs() < 1e-3);
        assert!((plan.metrics.savings_pct - 59.0).abs() < 0.05);
    }

    #[test]
    fn mist_sleep_optimum() {
        let mu = tandem_combined(150.0, &mist(), RateResolution::WholePackets).unwrap().model.service_rate_pps;
        let plan = max_sleep(300, 2.0f64, mu, 0.0, 3.0).unwrap();
        assert!((plan.sleep_s - 2.82).abs() < 1e-9);
        assert!((plan.metrics.system_time_s - 0.1785).abs() < 2e-3);
        assert!((plan.metrics.savings_pct - 58.5).abs() < 0.05);
        let plan = max_sleep(300, 2.0f64, mu, 0.01, 3.0).unwrap();
        assert!((plan.sleep_s - 2.81).abs() < 1e-9);
        assert!((plan.metrics.savings_pct - 58.4).abs() < 0.05);
    }

    #[test]
    fn sleep_search_errors() {
        assert!(matches!(max_sleep(300, 2.0f64, 576.0, 0.0, 0.0), Err(QueueError::NonPositiveBudget(_))));
        // 5000 devices saturate a 576 pct/s link for every T <= 3.
        assert!(matches!(max_sleep(5000, 2.0f64, 576.0, 0.0, 3.0), Err(QueueError::Infeasible { .. })));
        let idle = max_sleep(0, 2.0f64, 576.0, 0.0, 3.0).unwrap();
        assert!((idle.sleep_s - 3.0).abs() < 1e-9);
    }

    #[test]
    fn single_precision_delay() {
        let m = feedback_metrics(150.0f32, 576.0, 0.0).unwrap();
        assert!((m.system_time_s - 0.352).abs() < 5e-4);
    }

    proptest! {
        #[test]
        fn delay_equals_load_over_idle(lambda in 0.0f64..570.0, mu in 571.0f64..2000.0) {
            let rho = load(lambda, mu).unwrap();
            let et = system_time(lambda, mu).unwrap();
            prop_assert!((et - rho / (1.0 - rho)).abs() <= 1e-9 * et.max(1.0));
        }

        #[test]
        fn delay_increasing_and_convex(a in 0.0f64..500.0, h in 0.01f64..30.0) {
            let mu = 576.0;
            let f = |x: f64| system_time(x, mu).unwrap();
            prop_assert!(f(a + h) > f(a));
            prop_assert!(f(a + 2.0 * h) - 2.0 * f(a + h) + f(a) >= -1e-12);
        }

        #[test]
        fn scaling_link_leaves_metrics_unchanged(k in 1u32..20, bytes in 1u32..100, lambda in 0.0f64..100.0) {
            let base = LinkSpec::new(115_200.0f64, bytes).unwrap();
            let scaled = LinkSpec::new(115_200.0f64 * k as f64, bytes * k).unwrap();
            let (m1, m2) = (service_rate(&base).unwrap(), service_rate(&scaled).unwrap());
            prop_assert!((m1 - m2).abs() <= 1e-9 * m1);
            prop_assume!(lambda < m1);
            prop_assert!((system_time(lambda, m1).unwrap() - system_time(lambda, m2).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn feedback_free_equals_plain(lambda in 0.0f64..500.0) {
            let m = feedback_metrics(lambda, 576.0f64, 0.0).unwrap();
            prop_assert_eq!(m.system_time_s, system_time(lambda, 576.0f64).unwrap());
        }

        #[test]
        fn appending_stages_slows_service(stages in proptest::collection::vec(1u32..64, 1..6), extra in 1u32..64) {
            let mut spec = TandemSpec { speed_bps: 115_200.0, stage_packet_bytes: stages, feedback_stage_bytes: vec![] };
            let before = tandem_combined(10.0, &spec, RateResolution::Exact).unwrap().model.service_rate_pps;
            spec.stage_packet_bytes.push(extra);
            let after = tandem_combined(10.0, &spec, RateResolution::Exact).unwrap().model.service_rate_pps;
            prop_assert!(after < before);
        }

        #[test]
        fn sleep_optimum_is_grid_maximal(fleet in 1u32..600, f in 0.0f64..0.2, budget in 0.5f64..5.0) {
            let step = SLEEP_GRID_STEP_S;
            if let Ok(plan) = max_sleep(fleet, 2.0f64, 576.0, f, budget) {
                prop_assert!(plan.metrics.total_time_s <= budget);
                let next = plan.sleep_s + step;
                let m = QueueModel::new(arrival_rate(fleet, 2.0 + next).unwrap(), 576.0, f).unwrap();
                if next <= budget + 1e-9 && m.is_stable() {
                    prop_assert!(m.metrics().unwrap().system_time_s + next > budget);
                }
            }
        }
    }
}
