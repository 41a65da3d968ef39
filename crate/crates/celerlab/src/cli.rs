//! Batch command-line interface: deterministic runs in, files out.
//!
//! Exit codes: 0 on success, 2 on configuration or input errors, 3 when a
//! router produces an infeasible decision or the conservation audit fails
//! (both are internal bugs, not user errors).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{comparison_routers, load_sim_config, Overrides};
use crate::econ::{self, AuctionMode};
use crate::engine::{run_compare, Simulation};
use crate::formats;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "celerlab",
    version,
    about = "Payment-channel network simulation and mechanism toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress the stdout summary lines.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write metrics.csv + summary.json.
    Simulate(SimulateArgs),
    /// Run the same instance under several routers and write comparison.json.
    Compare(CompareArgs),
    /// Generate a random connected topology file.
    Topology(TopologyArgs),
    /// Check whether a rate matrix is inside the throughput region.
    Oracle(OracleArgs),
    /// Run the liquidity backing auction on a request + bids file.
    Liba(LibaArgs),
    /// Split a block reward across liquidity lock commitments.
    Polc(PolcArgs),
    /// Assign guardian stakes to state guarding requests.
    SgnAssign(SgnAssignArgs),
}

#[derive(Debug, Args)]
struct RunOverrideArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the router: dbr | shortest_path | landmark | oracle.
    #[arg(long)]
    router: Option<String>,
    /// Override the channel-balancing weight.
    #[arg(long)]
    beta: Option<f64>,
    /// Override the slot count.
    #[arg(long)]
    slots: Option<u32>,
}

impl RunOverrideArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            router: self.router.clone(),
            beta: self.beta,
            slots: self.slots.map(u64::from),
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunOverrideArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunOverrideArgs,
    /// Comma-separated router list, e.g. dbr,shortest_path,landmark.
    #[arg(long, value_delimiter = ',', default_value = "dbr,shortest_path,landmark")]
    routers: Vec<String>,
}

#[derive(Debug, Args)]
struct TopologyArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    channels: usize,
    #[arg(long, default_value_t = 100.0)]
    deposit_min: f64,
    #[arg(long, default_value_t = 200.0)]
    deposit_max: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Topology JSON file.
    #[arg(long)]
    topology: PathBuf,
    /// Rates JSON file: {"<node>": {"<destination>": tokens_per_slot}}.
    #[arg(long)]
    rates: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LibaArgs {
    /// Input JSON with the request and the bid list.
    #[arg(long)]
    input: PathBuf,
    /// Stake-ratio weight, a decimal string.
    #[arg(long, default_value = "0.5")]
    w1: String,
    /// Interest-rate weight, a decimal string.
    #[arg(long, default_value = "0.5")]
    w2: String,
    /// stake | consume.
    #[arg(long, default_value = "stake")]
    mode: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PolcArgs {
    /// Commitments JSON file.
    #[arg(long)]
    commitments: PathBuf,
    /// Total block reward to distribute.
    #[arg(long)]
    reward: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SgnAssignArgs {
    /// Guard requests JSON file.
    #[arg(long)]
    requests: PathBuf,
    /// Stake pool JSON file.
    #[arg(long)]
    pool: PathBuf,
    /// Settlement timeout in slots; enables dispute-slot windows.
    #[arg(long)]
    timeout: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses argv and executes; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not errors.
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => simulate(args, cli.quiet),
        Command::Compare(args) => compare(args, cli.quiet),
        Command::Topology(args) => topology(args),
        Command::Oracle(args) => oracle(args),
        Command::Liba(args) => liba(args),
        Command::Polc(args) => polc(args),
        Command::SgnAssign(args) => sgn_assign(args),
    }
}

fn write_output(path: Option<&PathBuf>, contents: &str) -> Result<()> {
    match path {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, contents)?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn simulate(args: &SimulateArgs, quiet: bool) -> Result<()> {
    let config = load_sim_config(&args.run.config, &args.run.overrides())?;
    let report = Simulation::new(config)?.run()?;
    std::fs::create_dir_all(&args.run.out)?;
    std::fs::write(
        args.run.out.join("metrics.csv"),
        formats::metrics_csv(&report.metrics),
    )?;
    std::fs::write(
        args.run.out.join("summary.json"),
        formats::summary_json(&report.summary),
    )?;
    if !quiet {
        println!(
            "router={} avg_payments_per_slot={:.4} avg_utilization={:.4}",
            report.summary.router,
            report.summary.avg_payments_per_slot,
            report.summary.avg_utilization
        );
    }
    Ok(())
}

fn compare(args: &CompareArgs, quiet: bool) -> Result<()> {
    let config = load_sim_config(&args.run.config, &args.run.overrides())?;
    let routers = comparison_routers(&config, &args.routers)?;
    let reports = run_compare(&config, &routers)?;
    std::fs::create_dir_all(&args.run.out)?;
    for report in &reports {
        std::fs::write(
            args.run
                .out
                .join(format!("metrics_{}.csv", report.summary.router)),
            formats::metrics_csv(&report.metrics),
        )?;
        if !quiet {
            println!(
                "router={} avg_payments_per_slot={:.4} avg_utilization={:.4}",
                report.summary.router,
                report.summary.avg_payments_per_slot,
                report.summary.avg_utilization
            );
        }
    }
    std::fs::write(
        args.run.out.join("comparison.json"),
        formats::comparison_json(&reports),
    )?;
    Ok(())
}

fn topology(args: &TopologyArgs) -> Result<()> {
    let topo = crate::net::generate_random_topology(
        args.seed,
        args.nodes,
        args.channels,
        (args.deposit_min, args.deposit_max),
    )?;
    write_output(args.out.as_ref(), &formats::emit_topology(&topo))
}

fn oracle(args: &OracleArgs) -> Result<()> {
    let topo = formats::load_topology(&args.topology)?;
    let rates = formats::load_rates(&args.rates)?;
    let result = crate::oracle::check_supportable(&topo, &rates)?;
    write_output(args.out.as_ref(), &formats::oracle_verdict_json(&result))
}

fn liba(args: &LibaArgs) -> Result<()> {
    let (request, bids) = formats::load_liba_input(&args.input)?;
    let w1 = econ::parse_decimal(&args.w1)?;
    let w2 = econ::parse_decimal(&args.w2)?;
    let mode = match args.mode.as_str() {
        "stake" => AuctionMode::Stake,
        "consume" => AuctionMode::Consume,
        other => {
            return Err(Error::Config(format!(
                "mode must be \"stake\" or \"consume\", got {other:?}"
            )))
        }
    };
    let outcome = econ::run_liba(&request, &bids, &w1, &w2, mode)?;
    write_output(args.out.as_ref(), &formats::liba_outcome_json(&outcome))
}

fn polc(args: &PolcArgs) -> Result<()> {
    let commitments = formats::load_polc_commitments(&args.commitments)?;
    let rewards = econ::polc_rewards(&commitments, args.reward)?;
    write_output(
        args.out.as_ref(),
        &formats::polc_outcome_json(args.reward, &rewards),
    )
}

fn sgn_assign(args: &SgnAssignArgs) -> Result<()> {
    let requests = formats::load_guard_requests(&args.requests)?;
    let pool = formats::load_stake_pool(&args.pool)?;
    let counts = econ::sgn_stake_counts(&requests, pool.len() as u64)?;
    let mut assignments = Vec::with_capacity(requests.len());
    for (request, &n) in requests.iter().zip(&counts) {
        let selected = econ::sgn_assign(request, &pool, n)?;
        let owners = econ::owner_counts(&selected);
        let fees = if n > 0 {
            econ::sgn_fees(request.fee, &owners, n)?
        } else {
            Default::default()
        };
        let dispute_slots = match args.timeout {
            Some(timeout) => Some(econ::assign_dispute_slots(n, timeout)?),
            None => None,
        };
        assignments.push(formats::SgnAssignmentEntry {
            hash: request.hash.to_hex(),
            stakes_assigned: n,
            selected: selected.iter().map(|s| s.id.to_hex()).collect(),
            owners,
            fees,
            dispute_slots,
        });
    }
    let file = formats::SgnAssignmentFile {
        k_total: pool.len() as u64,
        assignments,
    };
    write_output(args.out.as_ref(), &formats::sgn_outcome_json(&file))
}
