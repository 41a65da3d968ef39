//! Deterministic traffic generation: a fixed 64-bit PRNG, Poisson payment
//! counts, geometric payment sizes, and node failure schedules.
//!
//! Reproducibility contract: every variate consumes exactly one uniform draw
//! (one Poisson count per flow per slot, one geometric size per payment), so
//! identical seeds and flow lists yield identical payment streams on any
//! implementation of the same generator.

use crate::net::ArrivalLedger;
use crate::{Error, Result};

/// splitmix64: a 64-bit mixing generator with a one-word state.
///
/// The sequence is pinned by its published reference vectors (seed 0 yields
/// `0xE220A8397B1DCDAF` first), which makes seeds portable across languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Derives an independent stream, e.g. one per subsystem of a run.
    pub fn fork(&mut self) -> SplitMix64 {
        SplitMix64::new(self.next_u64())
    }
}

/// Largest Poisson rate accepted by the CDF-inversion sampler.
pub const MAX_POISSON_RATE: f64 = 30.0;

/// Poisson count by CDF inversion; exact for `rate <= 30` and consumes one
/// uniform draw.
pub fn sample_poisson(rate: f64, rng: &mut SplitMix64) -> Result<u64> {
    if !(0.0..=MAX_POISSON_RATE).contains(&rate) {
        return Err(Error::Config(format!(
            "poisson rate {rate} outside [0, {MAX_POISSON_RATE}]"
        )));
    }
    let u = rng.next_f64();
    let mut pmf = (-rate).exp();
    let mut cdf = pmf;
    let mut k = 0u64;
    // u < 1 and the CDF reaches 1, but guard the tail against float residue.
    while u >= cdf && k < 400 {
        k += 1;
        pmf *= rate / k as f64;
        cdf += pmf;
    }
    Ok(k)
}

/// Geometric size on {1, 2, ...} with success probability `1 / mean`, by
/// inversion of the closed-form CDF; one uniform draw.
pub fn sample_payment_size(mean: f64, rng: &mut SplitMix64) -> Result<u64> {
    if mean <= 1.0 || !mean.is_finite() {
        return Err(Error::Config(format!(
            "geometric mean {mean} must exceed 1"
        )));
    }
    let u = rng.next_f64();
    let p = 1.0 / mean;
    let size = ((1.0 - u).ln() / (1.0 - p).ln()).floor() + 1.0;
    Ok(size.max(1.0) as u64)
}

/// One source-destination payment stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub source: usize,
    pub destination: usize,
    /// Expected payments per slot (Poisson model) or tokens per slot
    /// (deterministic model).
    pub rate: f64,
}

impl FlowSpec {
    pub fn validate(&self, node_count: usize) -> Result<()> {
        if self.source == self.destination {
            return Err(Error::Config(format!(
                "flow {} -> {} loops on itself",
                self.source, self.destination
            )));
        }
        if self.source >= node_count || self.destination >= node_count {
            return Err(Error::Config(format!(
                "flow {} -> {} references a node outside 0..{}",
                self.source, self.destination, node_count
            )));
        }
        if self.rate < 0.0 || !self.rate.is_finite() {
            return Err(Error::Config(format!("flow rate {} invalid", self.rate)));
        }
        Ok(())
    }
}

/// A single payment request emitted by a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Payment {
    pub id: u64,
    pub source: usize,
    pub destination: usize,
    pub size: u64,
    pub arrival_slot: u64,
}

/// How payment arrivals are drawn each slot.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalModel {
    /// Poisson payment counts per flow, geometric sizes with the given mean.
    Poisson { mean_size: f64 },
    /// One payment per flow per slot of exactly `rate` tokens.
    Deterministic,
}

impl ArrivalModel {
    pub fn validate(&self, flows: &[FlowSpec]) -> Result<()> {
        match self {
            ArrivalModel::Poisson { mean_size } => {
                if mean_size.is_nan() || *mean_size <= 1.0 {
                    return Err(Error::Config(format!(
                        "mean payment size {mean_size} must exceed 1"
                    )));
                }
                for flow in flows {
                    if flow.rate > MAX_POISSON_RATE {
                        return Err(Error::Config(format!(
                            "flow rate {} exceeds poisson sampler bound {MAX_POISSON_RATE}",
                            flow.rate
                        )));
                    }
                }
            }
            ArrivalModel::Deterministic => {
                for flow in flows {
                    if flow.rate.fract() != 0.0 {
                        return Err(Error::Config(format!(
                            "deterministic flow rate {} must be a whole token count",
                            flow.rate
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draws one slot of payments in flow-list order and aggregates them into an
/// arrival ledger. `next_id` numbers payments sequentially across slots.
pub fn sample_arrivals(
    flows: &[FlowSpec],
    model: &ArrivalModel,
    slot: u64,
    rng: &mut SplitMix64,
    next_id: &mut u64,
) -> Result<(Vec<Payment>, ArrivalLedger)> {
    let mut payments = Vec::new();
    let mut ledger = ArrivalLedger::new();
    for flow in flows {
        match model {
            ArrivalModel::Poisson { mean_size } => {
                let count = sample_poisson(flow.rate, rng)?;
                for _ in 0..count {
                    let size = sample_payment_size(*mean_size, rng)?;
                    payments.push(Payment {
                        id: *next_id,
                        source: flow.source,
                        destination: flow.destination,
                        size,
                        arrival_slot: slot,
                    });
                    *next_id += 1;
                    ledger.add(flow.source, flow.destination, size as f64)?;
                }
            }
            ArrivalModel::Deterministic => {
                if flow.rate > 0.0 {
                    payments.push(Payment {
                        id: *next_id,
                        source: flow.source,
                        destination: flow.destination,
                        size: flow.rate as u64,
                        arrival_slot: slot,
                    });
                    *next_id += 1;
                    ledger.add(flow.source, flow.destination, flow.rate)?;
                }
            }
        }
    }
    Ok((payments, ledger))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureAction {
    Down,
    Up,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureEvent {
    pub slot: u64,
    pub node: usize,
    pub action: FailureAction,
}

/// Ordered node down/up events. A node is never downed twice without an up
/// in between; events take effect at the start of their slot, "up" inclusive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FailureSchedule {
    events: Vec<FailureEvent>,
}

impl FailureSchedule {
    pub fn new(events: Vec<FailureEvent>) -> Result<Self> {
        let mut down: Vec<usize> = Vec::new();
        let mut last_slot = 0u64;
        for ev in &events {
            if ev.slot < last_slot {
                return Err(Error::Config("failure events must be sorted by slot".into()));
            }
            last_slot = ev.slot;
            match ev.action {
                FailureAction::Down => {
                    if down.contains(&ev.node) {
                        return Err(Error::Config(format!(
                            "node {} downed twice without an up",
                            ev.node
                        )));
                    }
                    down.push(ev.node);
                }
                FailureAction::Up => {
                    let Some(pos) = down.iter().position(|&n| n == ev.node) else {
                        return Err(Error::Config(format!(
                            "node {} brought up while not down",
                            ev.node
                        )));
                    };
                    down.remove(pos);
                }
            }
        }
        Ok(FailureSchedule { events })
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[FailureEvent] {
        &self.events
    }

    pub fn max_node(&self) -> Option<usize> {
        self.events.iter().map(|e| e.node).max()
    }
}

/// Nodes responsive at `slot`: `active[node]` is false while a node is down.
/// Routers treat links incident to down nodes as unavailable.
pub fn active_nodes(schedule: &FailureSchedule, slot: u64, node_count: usize) -> Vec<bool> {
    let mut active = vec![true; node_count];
    for ev in schedule.events() {
        if ev.slot > slot {
            break;
        }
        active[ev.node] = matches!(ev.action, FailureAction::Up);
    }
    active
}
