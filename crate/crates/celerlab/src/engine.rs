//! Time-slotted simulation: binds a traffic model, a router, and the network
//! state, records per-slot metrics, and issues stability and balance
//! verdicts.
//!
//! Slot order: sample arrivals, apply the failure schedule, let the router
//! decide, feasibility-check the decision, apply the transfers, record
//! metrics. A token-conservation audit (injected = delivered + queued) runs
//! every slot. Runs are pure functions of (config, seed).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use crate::baseline::{self, LandmarkConfig, PathRoute};
use crate::dbr::{self, DbrParams};
use crate::net::{ArrivalLedger, InitialSplit, NetworkState, RoutingDecision, Topology, REL_TOL};
use crate::oracle::{check_supportable, OracleRouter, RateMatrix, SupportabilityResult};
use crate::traffic::{
    active_nodes, sample_arrivals, ArrivalModel, FailureSchedule, FlowSpec, Payment, SplitMix64,
};
use crate::{Error, Result};

/// Which router drives the run.
#[derive(Debug, Clone, PartialEq)]
pub enum RouterKind {
    Dbr(DbrParams),
    ShortestPath,
    Landmark(LandmarkConfig),
    /// Static-flow reference router; requires supportable rates.
    Oracle,
}

impl RouterKind {
    pub fn name(&self) -> &'static str {
        match self {
            RouterKind::Dbr(_) => "dbr",
            RouterKind::ShortestPath => "shortest_path",
            RouterKind::Landmark(_) => "landmark",
            RouterKind::Oracle => "oracle",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub topology: Arc<Topology>,
    pub flows: Vec<FlowSpec>,
    pub arrival_model: ArrivalModel,
    pub router: RouterKind,
    pub slots: u64,
    pub seed: u64,
    pub failures: FailureSchedule,
    pub max_retries: u32,
    /// Upper bound on any single per-slot arrival entry.
    pub arrival_cap: f64,
    pub initial_split: InitialSplit,
}

impl SimConfig {
    pub fn new(topology: Arc<Topology>, flows: Vec<FlowSpec>, router: RouterKind, slots: u64, seed: u64) -> Self {
        SimConfig {
            topology,
            flows,
            arrival_model: ArrivalModel::Poisson { mean_size: 3.0 },
            router,
            slots,
            seed,
            failures: FailureSchedule::default(),
            max_retries: 100,
            arrival_cap: 1e12,
            initial_split: InitialSplit::Even,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::Config("run needs at least one slot".into()));
        }
        for flow in &self.flows {
            flow.validate(self.topology.node_count())?;
        }
        self.arrival_model.validate(&self.flows)?;
        if let Some(node) = self.failures.max_node() {
            if node >= self.topology.node_count() {
                return Err(Error::Config(format!(
                    "failure schedule references node {node} outside the topology"
                )));
            }
        }
        if self.arrival_cap.is_nan() || self.arrival_cap <= 0.0 {
            return Err(Error::Config("arrival cap must be positive".into()));
        }
        Ok(())
    }

    /// Long-run token arrival rates implied by the flow list.
    pub fn rate_matrix(&self) -> Result<RateMatrix> {
        let mut rates = RateMatrix::new();
        for flow in &self.flows {
            let tokens = match &self.arrival_model {
                ArrivalModel::Poisson { mean_size } => flow.rate * mean_size,
                ArrivalModel::Deterministic => flow.rate,
            };
            rates.set(
                flow.source,
                flow.destination,
                rates.get(flow.source, flow.destination) + tokens,
            )?;
        }
        Ok(rates)
    }
}

/// Per-slot observables, one CSV row each.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    pub slot: u64,
    pub tokens_delivered: f64,
    pub payments_completed: u64,
    pub utilization: f64,
    pub total_queue: f64,
    pub max_queue_ratio: f64,
    pub max_imbalance_ratio: f64,
    pub lyapunov: f64,
    pub messages: u64,
    pub active_payments: u64,
}

/// Steady-state averages (second half of the run) and verdicts.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub router: String,
    pub slots: u64,
    pub avg_payments_per_slot: f64,
    pub avg_tokens_per_slot: f64,
    pub avg_utilization: f64,
    pub stable: bool,
    pub queue_slope: f64,
    pub balanced: bool,
    pub imbalance_slope: f64,
    pub mean_arrival_rate: f64,
    pub failed_payments: u64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub metrics: Vec<SlotMetrics>,
    pub summary: RunSummary,
}

/// Fraction of total deposits moved by a decision.
pub fn channel_utilization(decision: &RoutingDecision, topology: &Topology) -> f64 {
    let total = topology.total_deposit();
    if total == 0.0 {
        0.0
    } else {
        // + 0.0 normalizes the negative zero an empty decision sums to.
        decision.total() / total + 0.0
    }
}

/// Quadratic potential `Σ Q² + (β/2) Σ_{ordered pairs} Δ²`. The channel term
/// ranges over ordered node pairs, counting each channel from both ends.
pub fn lyapunov(state: &NetworkState, beta: f64) -> f64 {
    let n = state.topology().node_count();
    let mut queue_sq = 0.0;
    for node in 0..n {
        for dest in 0..n {
            let q = state.queue(node, dest);
            queue_sq += q * q;
        }
    }
    let mut delta_sq = 0.0;
    for ch in state.topology().channels() {
        let d = state.imbalance(ch.a, ch.b);
        delta_sq += 2.0 * d * d;
    }
    queue_sq + beta / 2.0 * delta_sq
}

#[derive(Debug, Clone)]
struct TrackedPayment {
    remaining: f64,
}

/// Credits delivered tokens against outstanding payments per destination, in
/// arrival order, completing a payment once its cumulative credit covers its
/// size. Multipath routing merges sources, so attribution is per-commodity
/// FIFO rather than per-payment.
#[derive(Debug, Clone, Default)]
pub struct PaymentTracker {
    queues: BTreeMap<usize, VecDeque<TrackedPayment>>,
    surplus: BTreeMap<usize, f64>,
    outstanding: u64,
}

impl PaymentTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn outstanding(&self) -> u64 {
        self.outstanding
    }

    pub fn inject(&mut self, destination: usize, size: f64) {
        self.queues
            .entry(destination)
            .or_default()
            .push_back(TrackedPayment { remaining: size });
        self.outstanding += 1;
        let surplus = self.surplus.entry(destination).or_insert(0.0);
        if *surplus > 0.0 {
            let carry = *surplus;
            *surplus = 0.0;
            let completed = self.credit(destination, carry);
            debug_assert_eq!(completed, 0, "stale surplus should stay fractional");
        }
    }

    /// Applies `tokens` of delivered value toward destination `dest`,
    /// returning how many payments completed.
    pub fn credit(&mut self, dest: usize, tokens: f64) -> u64 {
        let mut remaining_tokens = tokens;
        let mut completed = 0;
        let queue = self.queues.entry(dest).or_default();
        while remaining_tokens > REL_TOL {
            let Some(head) = queue.front_mut() else {
                // Delivered ahead of outstanding payments (float dust or a
                // same-slot race); hold the credit for the next injection.
                *self.surplus.entry(dest).or_insert(0.0) += remaining_tokens;
                break;
            };
            let applied = head.remaining.min(remaining_tokens);
            head.remaining -= applied;
            remaining_tokens -= applied;
            if head.remaining <= REL_TOL {
                queue.pop_front();
                completed += 1;
                self.outstanding -= 1;
            }
        }
        completed
    }
}

enum RouterState {
    Dbr(DbrParams),
    Path {
        landmark: Option<LandmarkConfig>,
        pending: VecDeque<(Payment, u32)>,
    },
    Oracle(Box<OracleRouter>),
}

/// A single deterministic run in progress. [`Simulation::step`] advances one
/// slot; [`Simulation::run`] drives it to completion.
pub struct Simulation {
    config: SimConfig,
    state: NetworkState,
    rng: SplitMix64,
    router: RouterState,
    commodities: Vec<usize>,
    metrics_beta: f64,
    tracker: PaymentTracker,
    next_payment_id: u64,
    injected_total: f64,
    delivered_total: f64,
    failed_payments: u64,
    metrics: Vec<SlotMetrics>,
    started: Instant,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let mut state = NetworkState::build(Arc::clone(&config.topology), &config.initial_split)?;
        // Every node keeps a debt queue per destination; the balanced router
        // scores all of them, so idle destinations can still attract pure
        // balance transfers.
        let commodities: Vec<usize> = (0..config.topology.node_count()).collect();
        let (router, metrics_beta) = match &config.router {
            RouterKind::Dbr(params) => (RouterState::Dbr(*params), params.beta),
            RouterKind::ShortestPath => (
                RouterState::Path {
                    landmark: None,
                    pending: VecDeque::new(),
                },
                1.0,
            ),
            RouterKind::Landmark(lm) => (
                RouterState::Path {
                    landmark: Some(*lm),
                    pending: VecDeque::new(),
                },
                1.0,
            ),
            RouterKind::Oracle => {
                let rates = config.rate_matrix()?;
                match check_supportable(&config.topology, &rates)? {
                    SupportabilityResult::Supportable { witness } => {
                        let router = OracleRouter::new(witness, &rates, &config.topology)?;
                        router.equalize(&mut state)?;
                        (RouterState::Oracle(Box::new(router)), 1.0)
                    }
                    SupportabilityResult::NotSupportable { max_violation } => {
                        return Err(Error::Config(format!(
                            "configured rates are outside the throughput region \
                             (violation {max_violation:.6}); the oracle router needs a witness"
                        )));
                    }
                }
            }
        };
        Ok(Simulation {
            rng: SplitMix64::new(config.seed),
            state,
            config,
            router,
            commodities,
            metrics_beta,
            tracker: PaymentTracker::new(),
            next_payment_id: 0,
            injected_total: 0.0,
            delivered_total: 0.0,
            failed_payments: 0,
            metrics: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn metrics(&self) -> &[SlotMetrics] {
        &self.metrics
    }

    pub fn slots_done(&self) -> u64 {
        self.metrics.len() as u64
    }

    /// Advances one slot and returns its metrics row.
    pub fn step(&mut self) -> Result<&SlotMetrics> {
        let slot = self.state.slot;
        let topology = Arc::clone(&self.config.topology);
        let active = active_nodes(&self.config.failures, slot, topology.node_count());
        let (payments, sampled) = sample_arrivals(
            &self.config.flows,
            &self.config.arrival_model,
            slot,
            &mut self.rng,
            &mut self.next_payment_id,
        )?;
        if sampled.max_entry() > self.config.arrival_cap {
            return Err(Error::Config(format!(
                "slot {slot} arrivals exceed the configured cap {}",
                self.config.arrival_cap
            )));
        }

        // Router decision plus the ledger of tokens that actually enter the
        // network this slot (path routers only inject admitted payments).
        let mut rebalance = dbr::RebalanceLedger::new();
        let (decision, ledger, messages) = match &mut self.router {
            RouterState::Dbr(params) => {
                for p in &payments {
                    self.tracker.inject(p.destination, p.size as f64);
                }
                let (decision, transfers) = dbr::decide_slot_with_rebalance(
                    &self.state,
                    &sampled,
                    params,
                    &active,
                    &self.commodities,
                );
                rebalance = transfers;
                let active_links = topology
                    .directed_links()
                    .iter()
                    .filter(|&&(i, j)| active[i] && active[j])
                    .count() as u64;
                (decision, sampled, 2 * active_links * self.commodities.len() as u64)
            }
            RouterState::Oracle(router) => {
                for p in &payments {
                    self.tracker.inject(p.destination, p.size as f64);
                }
                let decision = router.decide(&self.state, &sampled);
                (decision, sampled, 0)
            }
            RouterState::Path { landmark, pending } => {
                for p in payments {
                    pending.push_back((p, 0));
                }
                let mut routes: Vec<PathRoute> = Vec::new();
                for (payment, _) in pending.iter() {
                    let route = match landmark {
                        Some(cfg) => baseline::route_landmark(payment, &self.state, cfg, &active),
                        None => baseline::route_shortest_path(payment, &self.state, &active),
                    };
                    if let Some(route) = route {
                        routes.push(route);
                    }
                }
                let admission = baseline::paths_to_decision(&routes, &self.state);
                let admitted: BTreeSet<u64> = admission.admitted.iter().copied().collect();
                let mut ledger = ArrivalLedger::new();
                let mut messages = 0u64;
                let mut still_pending = VecDeque::new();
                for (payment, retries) in pending.drain(..) {
                    if admitted.contains(&payment.id) {
                        ledger.add(payment.source, payment.destination, payment.size as f64)?;
                        self.tracker.inject(payment.destination, payment.size as f64);
                    } else if retries + 1 > self.config.max_retries {
                        self.failed_payments += 1;
                    } else {
                        still_pending.push_back((payment, retries + 1));
                    }
                }
                *pending = still_pending;
                for route in &routes {
                    if admitted.contains(&route.payment_id) {
                        messages += route.hops() as u64;
                    }
                }
                (admission.decision, ledger, messages)
            }
        };

        if let Err(violation) = self.state.check_decision_feasible(&ledger, &decision) {
            return Err(Error::Infeasible(violation));
        }
        // The payment part plus the pure balance transfer must fit the link.
        for (&(from, to), &spare) in &rebalance {
            let capacity = self.state.capacity(from, to);
            let sent = decision.link_total(from, to) + spare;
            if sent > capacity + REL_TOL * capacity.max(1.0) {
                return Err(Error::Infeasible(crate::net::Violation::CapacityExceeded {
                    from,
                    to,
                    sent,
                    capacity,
                }));
            }
        }
        let rebalance_total: f64 = rebalance.values().sum::<f64>() + 0.0;
        let utilization = channel_utilization(&decision, &topology)
            + rebalance_total / topology.total_deposit().max(f64::MIN_POSITIVE);
        self.state.apply_rebalance(&rebalance);
        let delivered = self.state.apply_slot(&ledger, &decision);

        self.injected_total += ledger.total();
        let mut delivered_slot = 0.0;
        let mut completed = 0u64;
        for (&dest, &amount) in &delivered {
            delivered_slot += amount;
            completed += self.tracker.credit(dest, amount);
        }
        self.delivered_total += delivered_slot;

        let queued = self.state.total_queue();
        let drift = (self.injected_total - self.delivered_total - queued).abs();
        if drift > REL_TOL * self.injected_total.max(1.0) {
            return Err(Error::Conservation(format!(
                "slot {slot}: injected {} != delivered {} + queued {queued}",
                self.injected_total, self.delivered_total
            )));
        }

        let boundary = (slot + 1) as f64;
        let pending_retries = match &self.router {
            RouterState::Path { pending, .. } => pending.len() as u64,
            _ => 0,
        };
        self.metrics.push(SlotMetrics {
            slot,
            tokens_delivered: delivered_slot,
            payments_completed: completed,
            utilization,
            total_queue: queued,
            max_queue_ratio: self.state.max_queue() / boundary,
            max_imbalance_ratio: self.state.max_abs_imbalance() / boundary,
            lyapunov: lyapunov(&self.state, self.metrics_beta),
            messages,
            active_payments: self.tracker.outstanding() + pending_retries,
        });
        Ok(self.metrics.last().expect("just pushed"))
    }

    /// Runs the configured number of slots and summarizes.
    pub fn run(mut self) -> Result<SimReport> {
        while self.slots_done() < self.config.slots {
            self.step()?;
        }
        let summary = self.summarize()?;
        Ok(SimReport {
            metrics: self.metrics,
            summary,
        })
    }

    fn summarize(&self) -> Result<RunSummary> {
        let slots = self.config.slots;
        let mean_arrival_rate = self.injected_total / slots as f64;
        let window_start = (slots / 2) as usize;
        let window = &self.metrics[window_start..];
        let len = window.len().max(1) as f64;
        let avg_payments_per_slot =
            window.iter().map(|m| m.payments_completed as f64).sum::<f64>() / len;
        let avg_tokens_per_slot = window.iter().map(|m| m.tokens_delivered).sum::<f64>() / len;
        let avg_utilization = window.iter().map(|m| m.utilization).sum::<f64>() / len;
        let v = verdict_unchecked(&self.metrics, mean_arrival_rate);
        let (stable, queue_slope, balanced, imbalance_slope) =
            (v.stable, v.queue_slope, v.balanced, v.imbalance_slope);
        Ok(RunSummary {
            router: self.config.router.name().to_string(),
            slots,
            avg_payments_per_slot,
            avg_tokens_per_slot,
            avg_utilization,
            stable,
            queue_slope,
            balanced,
            imbalance_slope,
            mean_arrival_rate,
            failed_payments: self.failed_payments,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        })
    }
}

/// Minimum series length for a stability verdict.
pub const MIN_VERDICT_SLOTS: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub stable: bool,
    pub queue_slope: f64,
    pub balanced: bool,
    pub imbalance_slope: f64,
}

fn least_squares_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let data: Vec<(f64, f64)> = points.collect();
    let n = data.len() as f64;
    let mean_x = data.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = data.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = data.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let var: f64 = data.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

/// Stability and balance verdicts over a metrics series.
///
/// Stable: the least-squares slope of the total queue over the last half of
/// the run stays within 1% of the mean per-slot token arrival rate. Balanced:
/// the slope of the worst absolute channel imbalance (reconstructed from the
/// per-slot ratio) stays within 5% of the same rate. A queue or imbalance
/// that keeps growing at a constant clip fails; square-root or bounded
/// excursions pass.
pub fn stability_verdict(series: &[SlotMetrics], mean_arrival_rate: f64) -> Result<Verdict> {
    if (series.len() as u64) < MIN_VERDICT_SLOTS {
        return Err(Error::Config(format!(
            "stability verdict needs at least {MIN_VERDICT_SLOTS} slots, got {}",
            series.len()
        )));
    }
    Ok(verdict_unchecked(series, mean_arrival_rate))
}

fn verdict_unchecked(series: &[SlotMetrics], mean_arrival_rate: f64) -> Verdict {
    let half = &series[series.len() / 2..];
    let queue_slope = least_squares_slope(half.iter().map(|m| (m.slot as f64, m.total_queue)));
    let imbalance_slope = least_squares_slope(
        half.iter()
            .map(|m| (m.slot as f64, m.max_imbalance_ratio * (m.slot + 1) as f64)),
    );
    Verdict {
        stable: queue_slope <= 0.01 * mean_arrival_rate,
        queue_slope,
        balanced: imbalance_slope <= 0.05 * mean_arrival_rate,
        imbalance_slope,
    }
}

/// Runs the same configuration under each router. Runs are independent;
/// parallelism is capped by the `CELERLAB_THREADS` environment variable
/// (default: one thread per router).
pub fn run_compare(base: &SimConfig, routers: &[RouterKind]) -> Result<Vec<SimReport>> {
    let limit = std::env::var("CELERLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(routers.len().max(1));
    let mut reports: Vec<Option<Result<SimReport>>> = Vec::new();
    reports.resize_with(routers.len(), || None);
    for chunk_start in (0..routers.len()).step_by(limit) {
        let chunk_end = (chunk_start + limit).min(routers.len());
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (idx, router) in routers.iter().enumerate().take(chunk_end).skip(chunk_start) {
                let mut config = base.clone();
                config.router = router.clone();
                handles.push((idx, scope.spawn(move || Simulation::new(config)?.run())));
            }
            for (idx, handle) in handles {
                reports[idx] = Some(handle.join().expect("run thread must not panic"));
            }
        });
    }
    reports
        .into_iter()
        .map(|r| r.expect("every router scheduled"))
        .collect()
}
