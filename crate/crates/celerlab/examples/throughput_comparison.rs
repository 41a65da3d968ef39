//! Router comparison on a mid-size random network: balanced backpressure vs
//! the path-based baselines, same topology, traffic, and seed. A scaled-down
//! version of the figure-scale experiment the acceptance suite runs.
//!
//!     cargo run --release --example throughput_comparison

use std::collections::BTreeSet;
use std::sync::Arc;

use celerlab::baseline::LandmarkConfig;
use celerlab::dbr::DbrParams;
use celerlab::engine::{run_compare, RouterKind, SimConfig};
use celerlab::net::generate_random_topology;
use celerlab::traffic::{FlowSpec, SplitMix64};

fn main() {
    let topology = Arc::new(generate_random_topology(1, 30, 70, (100.0, 200.0)).unwrap());
    let mut rng = SplitMix64::new(2);
    let mut flows = Vec::new();
    let mut seen = BTreeSet::new();
    while flows.len() < 15 {
        let s = (rng.next_u64() % 30) as usize;
        let d = (rng.next_u64() % 30) as usize;
        if s != d && seen.insert((s, d)) {
            flows.push(FlowSpec { source: s, destination: d, rate: 2.0 });
        }
    }
    let config = SimConfig::new(
        Arc::clone(&topology),
        flows,
        RouterKind::Dbr(DbrParams::default()),
        800,
        3,
    );
    let routers = vec![
        RouterKind::Dbr(DbrParams::default()),
        RouterKind::ShortestPath,
        RouterKind::Landmark(LandmarkConfig { landmark_count: 2 }),
    ];
    let reports = run_compare(&config, &routers).unwrap();

    println!("router         | pay/slot | tokens/slot | utilization | failed");
    for report in &reports {
        let s = &report.summary;
        println!(
            "{:14} | {:8.2} | {:11.2} | {:11.4} | {}",
            s.router, s.avg_payments_per_slot, s.avg_tokens_per_slot, s.avg_utilization, s.failed_payments
        );
    }
    let dbr = &reports[0].summary;
    for report in &reports[1..] {
        let s = &report.summary;
        let throughput = if s.avg_payments_per_slot > 0.0 {
            format!("{:.1}x", dbr.avg_payments_per_slot / s.avg_payments_per_slot)
        } else {
            "inf".into()
        };
        println!("dbr vs {:14}: throughput {throughput}", s.router);
    }
    println!(
        "\nPath routers drain channels until no capacity-feasible route remains;\n\
         the balanced router keeps funds level and keeps delivering."
    );
}
