//! The throughput-region feasibility oracle: decide whether a rate matrix is
//! supportable, print the witness flows, locate the boundary by bisection,
//! and replay the witness through the static-flow reference router.
//!
//!     cargo run --example feasibility_oracle

use std::sync::Arc;

use celerlab::engine::{RouterKind, SimConfig, Simulation};
use celerlab::net::{Channel, Topology};
use celerlab::oracle::{check_supportable, RateMatrix, SupportabilityResult};
use celerlab::traffic::{ArrivalModel, FlowSpec};

fn main() {
    let topology = Topology::new(
        3,
        vec![
            Channel { a: 0, b: 1, deposit: 12.0 },
            Channel { a: 1, b: 2, deposit: 8.0 },
            Channel { a: 0, b: 2, deposit: 6.0 },
        ],
    )
    .unwrap();

    // Symmetric demand between the corner nodes.
    let mut rates = RateMatrix::new();
    rates.set(0, 2, 3.0).unwrap();
    rates.set(2, 0, 3.0).unwrap();

    match check_supportable(&topology, &rates).unwrap() {
        SupportabilityResult::Supportable { witness } => {
            println!("rate 3.0 each way: supportable, witness flows:");
            for ((from, to, commodity), flow) in witness.iter() {
                println!("  {from} -> {to}  commodity {commodity}: {flow:.3}");
            }
        }
        SupportabilityResult::NotSupportable { max_violation } => {
            println!("rate 3.0 each way: not supportable (violation {max_violation:.3})");
        }
    }

    // Bisect the boundary scale.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while check_supportable(&topology, &rates.scaled(hi)).unwrap().is_supportable() {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if check_supportable(&topology, &rates.scaled(mid)).unwrap().is_supportable() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    println!("\nboundary: {:.4} x the base rates", lo);
    println!(
        "(channel 0<->2 carries {} total and the 0-1-2 path adds min(12, 8)/2 = 4 per direction)",
        6.0 / 2.0
    );

    // Replay the witness as a router; queues stay empty on deterministic
    // arrivals because service equals demand every slot.
    let flows: Vec<FlowSpec> = rates
        .iter()
        .map(|((s, d), r)| FlowSpec { source: s, destination: d, rate: r })
        .collect();
    let mut config = SimConfig::new(Arc::new(topology), flows, RouterKind::Oracle, 300, 9);
    config.arrival_model = ArrivalModel::Deterministic;
    let report = Simulation::new(config).unwrap().run().unwrap();
    println!(
        "\nstatic-flow replay over 300 slots: delivered {:.1} tokens/slot, final queue {:.3}, balanced: {}",
        report.summary.avg_tokens_per_slot,
        report.metrics.last().unwrap().total_queue,
        report.summary.balanced,
    );
}
