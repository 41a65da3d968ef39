//! The per-slot greedy rule against the exact weighted-sum reference: on
//! small instances the link-local choice matches the enumerated optimum, and
//! the objective gap stays within the grid resolution.
//!
//!     cargo run --example maxweight_reference

use std::sync::Arc;

use celerlab::dbr::{decide_slot, exact_maxweight_small, maxweight_objective, DbrParams};
use celerlab::net::{ArrivalLedger, Channel, InitialSplit, NetworkState, RoutingDecision, Topology};
use celerlab::traffic::SplitMix64;

fn main() {
    let mut rng = SplitMix64::new(77);
    let params = DbrParams::default();
    let mut worst_ratio = f64::INFINITY;

    for trial in 0..10 {
        let deposit = 8.0;
        let topology = Arc::new(
            Topology::new(
                4,
                vec![
                    Channel { a: 0, b: 1, deposit },
                    Channel { a: 1, b: 2, deposit },
                    Channel { a: 2, b: 3, deposit },
                    Channel { a: 0, b: 3, deposit },
                ],
            )
            .unwrap(),
        );
        let splits: Vec<f64> = (0..4).map(|_| (rng.next_u64() % 9) as f64).collect();
        let mut state = NetworkState::build(topology, &InitialSplit::SideA(splits)).unwrap();
        // Deep queues so every link is capacity-limited.
        let mut seed_queues = ArrivalLedger::new();
        for node in 0..4 {
            for commodity in [0usize, 3] {
                if commodity != node {
                    let q = 32.0 + (rng.next_u64() % 33) as f64;
                    seed_queues.add(node, commodity, q).unwrap();
                }
            }
        }
        state.update_debt_queues(&seed_queues, &RoutingDecision::new(0));

        let arrivals = ArrivalLedger::new();
        let commodities = [0usize, 3];
        let greedy = decide_slot(&state, &arrivals, &params, &[true; 4], &commodities);
        let exact =
            exact_maxweight_small(&state, &arrivals, &params, &commodities, 1.0).unwrap();
        let greedy_value = maxweight_objective(&greedy, &state, &params);
        let exact_value = maxweight_objective(&exact, &state, &params);
        let ratio = if exact_value > 0.0 { greedy_value / exact_value } else { 1.0 };
        worst_ratio = worst_ratio.min(ratio);
        println!(
            "trial {trial}: greedy objective {greedy_value:8.1}, exact {exact_value:8.1}, ratio {ratio:.4}"
        );
    }
    println!("\nworst greedy/exact ratio over 10 backlogged states: {worst_ratio:.4}");
}
