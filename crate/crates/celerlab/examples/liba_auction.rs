//! The reverse second-score liquidity auction, on the worked three-bidder
//! example: B's cheap rate wins outright, A beats C on staked tokens despite
//! identical rate and collateral, and winners stake only enough to match the
//! first loser's score.
//!
//!     cargo run --example liba_auction

use celerlab::econ::{
    parse_decimal, rational_string, run_liba, AuctionMode, AuctionRequest, Bid,
};

fn main() {
    let request = AuctionRequest {
        liquidity: 600,
        duration_days: 30,
        max_rate: parse_decimal("0.01").unwrap(),
    };
    let bids = vec![
        Bid {
            bidder: "A".into(),
            rate: parse_decimal("0.01").unwrap(),
            celr: 800,
            value: 400,
        },
        Bid {
            bidder: "B".into(),
            rate: parse_decimal("0.005").unwrap(),
            celr: 800,
            value: 200,
        },
        Bid {
            bidder: "C".into(),
            rate: parse_decimal("0.01").unwrap(),
            celr: 100,
            value: 400,
        },
    ];
    let w = parse_decimal("0.5").unwrap();
    let outcome = run_liba(&request, &bids, &w, &w, AuctionMode::Stake).unwrap();

    println!("request: 600 units for 30 days at up to 1% interest\n");
    println!("bidder | rate   | tokens | value | score");
    for scored in &outcome.scored {
        println!(
            "{:6} | {:6} | {:6} | {:5} | {}",
            scored.bid.bidder,
            rational_string(&scored.bid.rate),
            scored.bid.celr,
            scored.bid.value,
            rational_string(&scored.score)
        );
    }
    println!("\nwinners (cumulative value covers the request):");
    for winner in &outcome.winners {
        println!("  {} stakes {} tokens", winner.bidder, winner.stake);
    }
    println!("first loser: {}", outcome.first_loser.as_deref().unwrap_or("none"));
    println!(
        "\nA and C offer the same rate and value; A's larger token commitment\n\
         wins the tie, and second-score staking means A locks only the 100\n\
         tokens needed to tie C's score, not its full 800."
    );
}
