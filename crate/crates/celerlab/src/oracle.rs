//! Throughput-region feasibility oracle and the static-flow reference router.
//!
//! An arrival rate matrix is supportable exactly when static per-commodity
//! flows exist that (1) cover every node's arrivals with net outflow,
//! (2) move equal token volume in both directions of every channel, and
//! (3) fit within every channel's deposit. [`check_supportable`] decides the
//! three linear conditions with a deterministic phase-I simplex and returns a
//! witness; [`verify_flow`] re-checks any witness independently.
//!
//! [`OracleRouter`] replays a witness as the constant per-slot decision,
//! which keeps every channel balanced by construction. It exists as the
//! reference point for throughput comparisons, not as a deployable router:
//! it needs the rate matrix in advance.

use std::collections::{BTreeMap, BTreeSet};

use crate::net::{ArrivalLedger, NetworkState, RoutingDecision, Topology};
use crate::simplex::{solve_feasibility, FeasibilityOutcome, FeasibilityProblem};
use crate::{Error, Result};

/// Absolute tolerance for flow verification.
pub const FLOW_TOL: f64 = 1e-6;

/// Default instance bound for the LP-backed checker.
pub const MAX_ORACLE_NODES: usize = 20;
pub const MAX_ORACLE_COMMODITIES: usize = 20;

/// Long-term token arrival rates per (node, destination); the diagonal is zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateMatrix {
    entries: BTreeMap<(usize, usize), f64>,
}

impl RateMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, node: usize, dest: usize, rate: f64) -> Result<()> {
        if node == dest {
            return Err(Error::Config(format!(
                "rate entry ({node}, {dest}) lies on the diagonal"
            )));
        }
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::Config(format!("rate {rate} invalid")));
        }
        if rate > 0.0 {
            self.entries.insert((node, dest), rate);
        }
        Ok(())
    }

    pub fn get(&self, node: usize, dest: usize) -> f64 {
        self.entries.get(&(node, dest)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    /// Destinations with any positive rate, ascending.
    pub fn commodities(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.entries.keys().map(|&(_, dest)| dest).collect();
        set.into_iter().collect()
    }

    pub fn scaled(&self, factor: f64) -> RateMatrix {
        RateMatrix {
            entries: self
                .entries
                .iter()
                .map(|(&k, &v)| (k, v * factor))
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }
}

/// Static per-commodity flows on directed links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowAssignment {
    entries: BTreeMap<(usize, usize, usize), f64>,
}

impl FlowAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, from: usize, to: usize, commodity: usize, flow: f64) {
        if flow != 0.0 {
            self.entries.insert((from, to, commodity), flow);
        } else {
            self.entries.remove(&(from, to, commodity));
        }
    }

    pub fn get(&self, from: usize, to: usize, commodity: usize) -> f64 {
        self.entries
            .get(&(from, to, commodity))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Directed total over link (from, to).
    pub fn link_total(&self, from: usize, to: usize) -> f64 {
        self.entries
            .range((from, to, 0)..=(from, to, usize::MAX))
            .map(|(_, &v)| v)
            .sum()
    }

    pub fn commodities(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.entries.keys().map(|&(_, _, k)| k).collect();
        set.into_iter().collect()
    }
}

/// One violated feasibility condition, with its slack.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowViolation {
    NegativeFlow { from: usize, to: usize, commodity: usize, flow: f64 },
    NoSuchLink { from: usize, to: usize },
    Conservation { node: usize, commodity: usize, excess: f64 },
    ChannelBalance { a: usize, b: usize, imbalance: f64 },
    ChannelCapacity { a: usize, b: usize, excess: f64 },
}

/// Checks a flow assignment against the three feasibility conditions at
/// absolute tolerance `tol`, listing every violation.
pub fn verify_flow(
    flow: &FlowAssignment,
    rates: &RateMatrix,
    topology: &Topology,
    tol: f64,
) -> std::result::Result<(), Vec<FlowViolation>> {
    let mut violations = Vec::new();
    for ((from, to, commodity), value) in flow.iter() {
        if value < 0.0 || !value.is_finite() {
            violations.push(FlowViolation::NegativeFlow {
                from,
                to,
                commodity,
                flow: value,
            });
        }
        if topology.channel_between(from, to).is_none() {
            violations.push(FlowViolation::NoSuchLink { from, to });
        }
    }
    if !violations.is_empty() {
        return Err(violations);
    }

    let mut commodities: BTreeSet<usize> = rates.commodities().into_iter().collect();
    commodities.extend(flow.commodities());

    for &k in &commodities {
        for node in 0..topology.node_count() {
            if node == k {
                continue;
            }
            let mut net = rates.get(node, k);
            for &j in topology.neighbors(node) {
                net += flow.get(j, node, k) - flow.get(node, j, k);
            }
            if net > tol {
                violations.push(FlowViolation::Conservation {
                    node,
                    commodity: k,
                    excess: net,
                });
            }
        }
    }
    for ch in topology.channels() {
        let forward = flow.link_total(ch.a, ch.b);
        let reverse = flow.link_total(ch.b, ch.a);
        if (forward - reverse).abs() > tol {
            violations.push(FlowViolation::ChannelBalance {
                a: ch.a,
                b: ch.b,
                imbalance: forward - reverse,
            });
        }
        if forward + reverse > ch.deposit + tol {
            violations.push(FlowViolation::ChannelCapacity {
                a: ch.a,
                b: ch.b,
                excess: forward + reverse - ch.deposit,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Verdict of the feasibility checker.
#[derive(Debug, Clone)]
pub enum SupportabilityResult {
    /// Feasible; the witness passes [`verify_flow`] at [`FLOW_TOL`].
    Supportable { witness: FlowAssignment },
    /// Infeasible; the smallest residual violation the solver could reach.
    NotSupportable { max_violation: f64 },
}

impl SupportabilityResult {
    pub fn is_supportable(&self) -> bool {
        matches!(self, SupportabilityResult::Supportable { .. })
    }

    pub fn witness(&self) -> Option<&FlowAssignment> {
        match self {
            SupportabilityResult::Supportable { witness } => Some(witness),
            SupportabilityResult::NotSupportable { .. } => None,
        }
    }
}

/// Decides whether `rates` lie inside the network's throughput region by
/// solving the three-condition linear feasibility system. Boundary rates are
/// supportable: the conditions are non-strict. Deterministic for fixed input.
pub fn check_supportable(topology: &Topology, rates: &RateMatrix) -> Result<SupportabilityResult> {
    let commodities = rates.commodities();
    if topology.node_count() > MAX_ORACLE_NODES || commodities.len() > MAX_ORACLE_COMMODITIES {
        return Err(Error::SizeBound(format!(
            "feasibility checker accepts at most {MAX_ORACLE_NODES} nodes and {MAX_ORACLE_COMMODITIES} commodities"
        )));
    }
    for ((node, dest), _) in rates.iter() {
        if node >= topology.node_count() || dest >= topology.node_count() {
            return Err(Error::Config(format!(
                "rate entry ({node}, {dest}) outside the topology"
            )));
        }
    }
    if rates.is_empty() {
        return Ok(SupportabilityResult::Supportable {
            witness: FlowAssignment::new(),
        });
    }

    // Variable per (directed link, commodity), in sorted order.
    let links = topology.directed_links();
    let mut var_index: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for &(i, j) in &links {
        for &k in &commodities {
            if k == i {
                continue; // a destination never forwards its own commodity out
            }
            let next = var_index.len();
            var_index.insert((i, j, k), next);
        }
    }

    let mut problem = FeasibilityProblem {
        num_vars: var_index.len(),
        ..Default::default()
    };
    // Flow conservation: arrivals plus inflow minus outflow <= 0.
    for &k in &commodities {
        for node in 0..topology.node_count() {
            if node == k {
                continue;
            }
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for &j in topology.neighbors(node) {
                if let Some(&v) = var_index.get(&(j, node, k)) {
                    terms.push((v, 1.0));
                }
                if let Some(&v) = var_index.get(&(node, j, k)) {
                    terms.push((v, -1.0));
                }
            }
            problem.inequalities.push((terms, -rates.get(node, k)));
        }
    }
    for ch in topology.channels() {
        let mut balance: Vec<(usize, f64)> = Vec::new();
        let mut capacity: Vec<(usize, f64)> = Vec::new();
        for &k in &commodities {
            if let Some(&v) = var_index.get(&(ch.a, ch.b, k)) {
                balance.push((v, 1.0));
                capacity.push((v, 1.0));
            }
            if let Some(&v) = var_index.get(&(ch.b, ch.a, k)) {
                balance.push((v, -1.0));
                capacity.push((v, 1.0));
            }
        }
        problem.equalities.push((balance, 0.0));
        problem.inequalities.push((capacity, ch.deposit));
    }

    match solve_feasibility(&problem) {
        FeasibilityOutcome::Feasible(x) => {
            let mut witness = FlowAssignment::new();
            for (&(i, j, k), &v) in &var_index {
                if x[v] > FLOW_TOL {
                    witness.set(i, j, k, x[v]);
                }
            }
            if let Err(violations) = verify_flow(&witness, rates, topology, FLOW_TOL) {
                return Err(Error::Conservation(format!(
                    "feasibility witness failed verification: {violations:?}"
                )));
            }
            Ok(SupportabilityResult::Supportable { witness })
        }
        FeasibilityOutcome::Infeasible { max_violation, .. } => {
            Ok(SupportabilityResult::NotSupportable { max_violation })
        }
    }
}

/// Replays a verified flow assignment as the per-slot routing decision.
#[derive(Debug, Clone)]
pub struct OracleRouter {
    flows: FlowAssignment,
}

impl OracleRouter {
    /// Builds the router from flows that must verify against the rates.
    pub fn new(flows: FlowAssignment, rates: &RateMatrix, topology: &Topology) -> Result<Self> {
        verify_flow(&flows, rates, topology, FLOW_TOL).map_err(|violations| {
            Error::Config(format!(
                "oracle router requires a verified flow assignment: {violations:?}"
            ))
        })?;
        Ok(OracleRouter { flows })
    }

    pub fn flows(&self) -> &FlowAssignment {
        &self.flows
    }

    /// One-time fund adjustment before slot 0: any channel whose directed
    /// capacity cannot carry its required flow has its ends equalized by a
    /// direct transfer from the richer side. Costs at most one deposit per
    /// channel and vanishes from long-run averages.
    pub fn equalize(&self, state: &mut NetworkState) -> Result<()> {
        let channels: Vec<_> = state.topology().channels().to_vec();
        for ch in channels {
            let need_ab = self.flows.link_total(ch.a, ch.b);
            let need_ba = self.flows.link_total(ch.b, ch.a);
            let cap_ab = state.capacity(ch.a, ch.b);
            let cap_ba = state.capacity(ch.b, ch.a);
            if cap_ab < need_ab || cap_ba < need_ba {
                let half = ch.deposit / 2.0;
                if cap_ab > half {
                    state.transfer_balance(ch.a, ch.b, cap_ab - half)?;
                } else if cap_ba > half {
                    state.transfer_balance(ch.b, ch.a, cap_ba - half)?;
                }
            }
        }
        Ok(())
    }

    /// The slot decision: `μ = f`, capped by link capacity and by the
    /// sender's backlog per commodity; shortfall stays queued.
    pub fn decide(&self, state: &NetworkState, arrivals: &ArrivalLedger) -> RoutingDecision {
        let mut decision = RoutingDecision::new(state.slot);
        let mut budget: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut capacity: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for ((from, to, commodity), flow) in self.flows.iter() {
            let b = budget
                .entry((from, commodity))
                .or_insert_with(|| state.backlog(from, commodity, arrivals));
            let c = capacity
                .entry((from, to))
                .or_insert_with(|| state.capacity(from, to));
            let amount = flow.min(*b).min(*c);
            if amount > 0.0 {
                *b -= amount;
                *c -= amount;
                decision.add(from, to, commodity, amount);
            }
        }
        decision
    }
}
