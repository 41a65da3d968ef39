//! Path-based comparison routers: balance-aware shortest path and landmark
//! routing.
//!
//! Both route each payment along an explicit node path using only directed
//! links whose current capacity fits the full payment, the way conventional
//! payment-network routers do. They are deliberately favourable stand-ins:
//! routes are computed from global state, so a distributed implementation
//! with partial knowledge can only do worse. Admitted routes transfer the
//! whole payment within the slot, one decision entry per hop.

use crate::net::{NetworkState, RoutingDecision};
use crate::traffic::Payment;

/// A routed payment: source-to-destination node sequence and the amount
/// carried over every hop.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRoute {
    pub payment_id: u64,
    pub nodes: Vec<usize>,
    pub amount: f64,
}

impl PathRoute {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

/// Landmark router configuration; landmarks are the highest-degree nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkConfig {
    pub landmark_count: usize,
}

impl Default for LandmarkConfig {
    fn default() -> Self {
        LandmarkConfig { landmark_count: 1 }
    }
}

/// Breadth-first minimum-hop path from `source` to `dest` over directed links
/// with capacity at least `amount` and both endpoints active. Neighbors are
/// expanded in ascending id order, which fixes tie-breaking.
///
/// Retrying payments re-run this every slot, so the visited marks and queue
/// are reused thread-locally instead of reallocated per call.
fn bfs_path(
    state: &NetworkState,
    source: usize,
    dest: usize,
    amount: f64,
    active: &[bool],
) -> Option<Vec<usize>> {
    struct Scratch {
        stamp: u64,
        seen: Vec<u64>,
        parent: Vec<usize>,
        queue: std::collections::VecDeque<usize>,
    }
    thread_local! {
        static SCRATCH: std::cell::RefCell<Scratch> = const {
            std::cell::RefCell::new(Scratch {
                stamp: 0,
                seen: Vec::new(),
                parent: Vec::new(),
                queue: std::collections::VecDeque::new(),
            })
        };
    }

    if !active[source] || !active[dest] {
        return None;
    }
    if source == dest {
        return Some(vec![source]);
    }
    let n = state.topology().node_count();
    SCRATCH.with(|cell| {
        let scratch = &mut *cell.borrow_mut();
        if scratch.seen.len() < n {
            scratch.seen.resize(n, 0);
            scratch.parent.resize(n, usize::MAX);
        }
        scratch.stamp += 1;
        let stamp = scratch.stamp;
        scratch.queue.clear();
        scratch.seen[source] = stamp;
        scratch.queue.push_back(source);
        while let Some(v) = scratch.queue.pop_front() {
            for &(w, channel) in state.topology().channel_neighbors(v) {
                if scratch.seen[w] == stamp
                    || !active[w]
                    || state.capacity_on(channel, v) < amount
                {
                    continue;
                }
                scratch.seen[w] = stamp;
                scratch.parent[w] = v;
                if w == dest {
                    let mut path = vec![dest];
                    let mut cur = dest;
                    while cur != source {
                        cur = scratch.parent[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                scratch.queue.push_back(w);
            }
        }
        None
    })
}

/// Shortest-path routing with available-balance consideration. Returns the
/// minimum-hop capacity-feasible route, or `None` when the payment cannot be
/// routed this slot.
pub fn route_shortest_path(
    payment: &Payment,
    state: &NetworkState,
    active: &[bool],
) -> Option<PathRoute> {
    bfs_path(
        state,
        payment.source,
        payment.destination,
        payment.size as f64,
        active,
    )
    .map(|nodes| PathRoute {
        payment_id: payment.id,
        nodes,
        amount: payment.size as f64,
    })
}

/// The configured number of landmarks: highest degree first, ties to the
/// smaller node id.
pub fn select_landmarks(state: &NetworkState, config: &LandmarkConfig) -> Vec<usize> {
    let topology = state.topology();
    let mut nodes: Vec<usize> = (0..topology.node_count()).collect();
    nodes.sort_by_key(|&v| (std::cmp::Reverse(topology.degree(v)), v));
    nodes.truncate(config.landmark_count.min(topology.node_count()));
    nodes
}

/// Landmark routing: the payment travels source -> landmark -> destination,
/// trying landmarks in descending degree. Segments are individually
/// capacity-feasible; a concatenation that revisits a node is discarded.
/// Falls back to plain shortest path when every landmark fails.
pub fn route_landmark(
    payment: &Payment,
    state: &NetworkState,
    config: &LandmarkConfig,
    active: &[bool],
) -> Option<PathRoute> {
    let amount = payment.size as f64;
    for landmark in select_landmarks(state, config) {
        let Some(first) = bfs_path(state, payment.source, landmark, amount, active) else {
            continue;
        };
        let Some(second) = bfs_path(state, landmark, payment.destination, amount, active) else {
            continue;
        };
        let mut nodes = first;
        nodes.extend_from_slice(&second[1..]);
        let mut distinct = nodes.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != nodes.len() {
            continue;
        }
        return Some(PathRoute {
            payment_id: payment.id,
            nodes,
            amount,
        });
    }
    route_shortest_path(payment, state, active)
}

/// Outcome of converting routes into one slot decision.
#[derive(Debug, Clone, Default)]
pub struct Admission {
    pub decision: RoutingDecision,
    pub admitted: Vec<u64>,
    /// Routes that no longer fit after earlier admissions; their payments
    /// retry next slot.
    pub dropped: Vec<u64>,
}

/// Merges path routes into a routing decision. Routes are admitted greedily
/// in payment-id order against the remaining per-direction capacity; a route
/// that no longer fits is dropped whole. Every hop carries the payment's
/// destination as its commodity, so admitted decisions satisfy the
/// feasibility checks of the network model.
pub fn paths_to_decision(routes: &[PathRoute], state: &NetworkState) -> Admission {
    let mut ordered: Vec<&PathRoute> = routes.iter().collect();
    ordered.sort_by_key(|r| r.payment_id);
    let mut remaining: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    let mut admission = Admission {
        decision: RoutingDecision::new(state.slot),
        ..Default::default()
    };
    for route in ordered {
        let destination = *route.nodes.last().expect("routes are non-empty");
        let fits = route.nodes.windows(2).all(|hop| {
            let cap = remaining
                .entry((hop[0], hop[1]))
                .or_insert_with(|| state.capacity(hop[0], hop[1]));
            *cap >= route.amount
        });
        if !fits {
            admission.dropped.push(route.payment_id);
            continue;
        }
        for hop in route.nodes.windows(2) {
            *remaining.get_mut(&(hop[0], hop[1])).expect("seeded above") -= route.amount;
            admission.decision.add(hop[0], hop[1], destination, route.amount);
        }
        admission.admitted.push(route.payment_id);
    }
    admission
}
