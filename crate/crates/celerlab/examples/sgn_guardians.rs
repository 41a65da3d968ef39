//! Guardian assignment: requests receive stakes in proportion to their fee
//! flow, stakes are picked by clockwise ring distance from the state hash,
//! fees split per selected stake, and each guardian gets a dispute window.
//!
//!     cargo run --example sgn_guardians

use celerlab::econ::{
    assign_dispute_slots, owner_counts, sgn_assign, sgn_fees, sgn_stake_counts, GuardRequest,
    Stake, StakePool, U256,
};
use celerlab::traffic::SplitMix64;

fn random_hash(rng: &mut SplitMix64) -> U256 {
    U256([rng.next_u64(), rng.next_u64(), rng.next_u64(), rng.next_u64()])
}

fn main() {
    let mut rng = SplitMix64::new(42);
    let owners = ["alice", "bob", "carol"];
    let stakes: Vec<Stake> = (0..12)
        .map(|i| Stake {
            id: random_hash(&mut rng),
            owner: owners[i % owners.len()].to_string(),
        })
        .collect();
    let pool = StakePool::new(stakes).unwrap();

    let requests = vec![
        GuardRequest { hash: random_hash(&mut rng), fee: 90, duration: 30 },
        GuardRequest { hash: random_hash(&mut rng), fee: 40, duration: 10 },
    ];
    let counts = sgn_stake_counts(&requests, pool.len() as u64).unwrap();
    println!(
        "responsibility scores: {:.2} and {:.2} -> stake split {:?} of {} total\n",
        90.0 / 30.0,
        40.0 / 10.0,
        counts,
        pool.len()
    );

    for (idx, (request, &n)) in requests.iter().zip(&counts).enumerate() {
        let selected = sgn_assign(request, &pool, n).unwrap();
        let per_owner = owner_counts(&selected);
        let fees = sgn_fees(request.fee, &per_owner, n).unwrap();
        let windows = assign_dispute_slots(n, 120).unwrap();
        println!("request {idx}: hash {}…, {n} stakes", &request.hash.to_hex()[..16]);
        for (stake, window) in selected.iter().zip(&windows) {
            println!(
                "  stake {}… ({}) disputes in [{}, {})",
                &stake.id.to_hex()[..12],
                stake.owner,
                window.0,
                window.1
            );
        }
        println!("  fee split: {fees:?} (sums to {})\n", request.fee);
    }
    println!(
        "Selection is a pure function of the state hash and the pool: anyone\n\
         can recompute which stakes are responsible for a given state."
    );
}
