//! Lock-time mining: power is locked value times lock duration, and each
//! block reward splits proportionally in exact arithmetic — payouts always
//! sum to the reward to the unit.
//!
//!     cargo run --example polc_rewards

use celerlab::econ::{polc_power, polc_rewards, PolcCommitment};

fn main() {
    let commitments = vec![
        PolcCommitment { backer: "deep-locker".into(), locked: 100, duration: 300 },
        PolcCommitment { backer: "whale".into(), locked: 5_000, duration: 3 },
        PolcCommitment { backer: "steady".into(), locked: 40, duration: 365 },
    ];
    let reward = 1_000;

    println!("backer      | locked | duration | power");
    for c in &commitments {
        println!(
            "{:11} | {:6} | {:8} | {}",
            c.backer,
            c.locked,
            c.duration,
            polc_power(c.locked, c.duration).unwrap()
        );
    }
    let rewards = polc_rewards(&commitments, reward).unwrap();
    println!("\nblock reward {reward} splits into:");
    let mut total = 0;
    for (backer, amount) in &rewards {
        println!("  {backer:11} {amount}");
        total += amount;
    }
    assert_eq!(total, reward);
    println!("  sum = {total} (exact)");
    println!(
        "\nLocking 40 for a year out-earns locking 5000 for three days:\n\
         commitment duration counts as much as size."
    );
}
