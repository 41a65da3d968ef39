//! External file formats: topology, flow, failure, and rate inputs, plus
//! metrics CSV and the JSON reports.
//!
//! Emission is bit-stable: fields appear in a fixed order, maps are ordered,
//! reals carry 17 significant digits, lines end with LF, and the decimal
//! separator is always '.'. Parsing is fail-closed: unknown keys are errors.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::LandmarkConfig;
use crate::dbr::DbrParams;
use crate::econ::{rational_string, AuctionOutcome, AuctionRequest, Bid, GuardRequest, PolcCommitment, Stake, StakePool, U256};
use crate::engine::{RunSummary, SimReport, SlotMetrics};
use crate::net::{Channel, Topology};
use crate::oracle::{FlowAssignment, RateMatrix, SupportabilityResult};
use crate::traffic::{FailureAction, FailureEvent, FailureSchedule, FlowSpec};
use crate::{Error, Result};

/// 17 significant digits, round-trip exact for binary64. Negative zero is
/// normalized so empty aggregates print as plain zero.
pub fn fmt_real(value: f64) -> String {
    let value = value + 0.0;
    format!("{value:.16e}")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn json_err(path: &Path, err: serde_json::Error) -> Error {
    Error::Config(format!(
        "{} line {} column {}: {err}",
        path.display(),
        err.line(),
        err.column()
    ))
}

// ---------------------------------------------------------------------------
// Topology file
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    nodes: usize,
    channels: Vec<ChannelEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelEntry {
    a: usize,
    b: usize,
    deposit: f64,
}

pub fn parse_topology(text: &str) -> Result<Topology> {
    let file: TopologyFile = serde_json::from_str(text)?;
    Topology::new(
        file.nodes,
        file.channels
            .into_iter()
            .map(|c| Channel {
                a: c.a,
                b: c.b,
                deposit: c.deposit,
            })
            .collect(),
    )
}

pub fn load_topology(path: &Path) -> Result<Topology> {
    let text = read(path)?;
    serde_json::from_str::<TopologyFile>(&text)
        .map_err(|e| json_err(path, e))
        .and_then(|file| {
            Topology::new(
                file.nodes,
                file.channels
                    .into_iter()
                    .map(|c| Channel {
                        a: c.a,
                        b: c.b,
                        deposit: c.deposit,
                    })
                    .collect(),
            )
        })
}

/// Emits the topology with fixed field order and 17-significant-digit reals.
pub fn emit_topology(topology: &Topology) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"nodes\": {},\n", topology.node_count()));
    out.push_str("  \"channels\": [\n");
    for (idx, ch) in topology.channels().iter().enumerate() {
        let comma = if idx + 1 < topology.channel_count() { "," } else { "" };
        out.push_str(&format!(
            "    {{\"a\": {}, \"b\": {}, \"deposit\": {}}}{comma}\n",
            ch.a,
            ch.b,
            fmt_real(ch.deposit)
        ));
    }
    out.push_str("  ]\n}\n");
    out
}

// ---------------------------------------------------------------------------
// Flow, failure, and rate files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowEntry {
    source: usize,
    destination: usize,
    rate: f64,
}

pub fn parse_flows(text: &str) -> Result<Vec<FlowSpec>> {
    let entries: Vec<FlowEntry> = serde_json::from_str(text)?;
    Ok(entries
        .into_iter()
        .map(|e| FlowSpec {
            source: e.source,
            destination: e.destination,
            rate: e.rate,
        })
        .collect())
}

pub fn load_flows(path: &Path) -> Result<Vec<FlowSpec>> {
    let text = read(path)?;
    serde_json::from_str::<Vec<FlowEntry>>(&text)
        .map_err(|e| json_err(path, e))
        .map(|entries| {
            entries
                .into_iter()
                .map(|e| FlowSpec {
                    source: e.source,
                    destination: e.destination,
                    rate: e.rate,
                })
                .collect()
        })
}

pub fn emit_flows(flows: &[FlowSpec]) -> String {
    let entries: Vec<FlowEntry> = flows
        .iter()
        .map(|f| FlowEntry {
            source: f.source,
            destination: f.destination,
            rate: f.rate,
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("plain data serializes");
    text.push('\n');
    text
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FailureEntry {
    slot: u64,
    node: usize,
    action: String,
}

pub fn parse_failures(text: &str) -> Result<FailureSchedule> {
    let entries: Vec<FailureEntry> = serde_json::from_str(text)?;
    let events = entries
        .into_iter()
        .map(|e| {
            let action = match e.action.as_str() {
                "down" => FailureAction::Down,
                "up" => FailureAction::Up,
                other => {
                    return Err(Error::Config(format!(
                        "failure action must be \"down\" or \"up\", got {other:?}"
                    )))
                }
            };
            Ok(FailureEvent {
                slot: e.slot,
                node: e.node,
                action,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FailureSchedule::new(events)
}

pub fn load_failures(path: &Path) -> Result<FailureSchedule> {
    let text = read(path)?;
    parse_failures(&text).map_err(|e| match e {
        Error::Json(err) => json_err(path, err),
        other => other,
    })
}

/// Rates file: `{"<node>": {"<destination>": tokens_per_slot}}`.
pub fn parse_rates(text: &str) -> Result<RateMatrix> {
    let map: BTreeMap<String, BTreeMap<String, f64>> = serde_json::from_str(text)?;
    let mut rates = RateMatrix::new();
    for (node, row) in map {
        let node: usize = node
            .parse()
            .map_err(|_| Error::Config(format!("rate key {node:?} is not a node id")))?;
        for (dest, rate) in row {
            let dest: usize = dest
                .parse()
                .map_err(|_| Error::Config(format!("rate key {dest:?} is not a node id")))?;
            rates.set(node, dest, rate)?;
        }
    }
    Ok(rates)
}

pub fn load_rates(path: &Path) -> Result<RateMatrix> {
    let text = read(path)?;
    parse_rates(&text).map_err(|e| match e {
        Error::Json(err) => json_err(path, err),
        other => other,
    })
}

// ---------------------------------------------------------------------------
// Metrics CSV and run reports
// ---------------------------------------------------------------------------

pub const METRICS_HEADER: &str = "slot,tokens_delivered,payments_completed,utilization,total_queue,max_queue_ratio,max_imbalance_ratio,lyapunov,messages,active_payments";

pub fn metrics_csv(metrics: &[SlotMetrics]) -> String {
    let mut out = String::with_capacity(64 * (metrics.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            m.slot,
            fmt_real(m.tokens_delivered),
            m.payments_completed,
            fmt_real(m.utilization),
            fmt_real(m.total_queue),
            fmt_real(m.max_queue_ratio),
            fmt_real(m.max_imbalance_ratio),
            fmt_real(m.lyapunov),
            m.messages,
            m.active_payments
        ));
    }
    out
}

#[derive(Debug, Serialize)]
struct SummaryFile<'a> {
    router: &'a str,
    slots: u64,
    avg_payments_per_slot: f64,
    avg_tokens_per_slot: f64,
    avg_utilization: f64,
    stable: bool,
    queue_slope: f64,
    balanced: bool,
    imbalance_slope: f64,
    mean_arrival_rate: f64,
    failed_payments: u64,
    wall_clock_seconds: f64,
}

pub fn summary_json(summary: &RunSummary) -> String {
    let file = SummaryFile {
        router: &summary.router,
        slots: summary.slots,
        avg_payments_per_slot: summary.avg_payments_per_slot,
        avg_tokens_per_slot: summary.avg_tokens_per_slot,
        avg_utilization: summary.avg_utilization,
        stable: summary.stable,
        queue_slope: summary.queue_slope,
        balanced: summary.balanced,
        imbalance_slope: summary.imbalance_slope,
        mean_arrival_rate: summary.mean_arrival_rate,
        failed_payments: summary.failed_payments,
        wall_clock_seconds: summary.wall_clock_seconds,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plain data serializes");
    text.push('\n');
    text
}

/// Per-router entry of the comparison report; wall-clock time is omitted so
/// the file is a pure function of config and seed.
#[derive(Debug, Serialize)]
struct ComparisonEntry {
    avg_payments_per_slot: f64,
    avg_tokens_per_slot: f64,
    avg_utilization: f64,
    stable: bool,
    balanced: bool,
    failed_payments: u64,
}

#[derive(Debug, Serialize)]
struct RatioEntry {
    /// DBR average payments per slot over this router's.
    throughput_ratio: Option<f64>,
    /// DBR average utilization over this router's.
    utilization_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ComparisonFile {
    routers: BTreeMap<String, ComparisonEntry>,
    ratios: BTreeMap<String, RatioEntry>,
}

pub fn comparison_json(reports: &[SimReport]) -> String {
    let mut routers = BTreeMap::new();
    for report in reports {
        let s = &report.summary;
        routers.insert(
            s.router.clone(),
            ComparisonEntry {
                avg_payments_per_slot: s.avg_payments_per_slot,
                avg_tokens_per_slot: s.avg_tokens_per_slot,
                avg_utilization: s.avg_utilization,
                stable: s.stable,
                balanced: s.balanced,
                failed_payments: s.failed_payments,
            },
        );
    }
    let mut ratios = BTreeMap::new();
    if let Some(dbr) = reports.iter().find(|r| r.summary.router == "dbr") {
        let ratio = |num: f64, den: f64| {
            if den > 0.0 {
                Some(num / den)
            } else {
                None
            }
        };
        for report in reports {
            let s = &report.summary;
            ratios.insert(
                s.router.clone(),
                RatioEntry {
                    throughput_ratio: ratio(
                        dbr.summary.avg_payments_per_slot,
                        s.avg_payments_per_slot,
                    ),
                    utilization_ratio: ratio(dbr.summary.avg_utilization, s.avg_utilization),
                },
            );
        }
    }
    let mut text = serde_json::to_string_pretty(&ComparisonFile { routers, ratios })
        .expect("plain data serializes");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Feasibility oracle report
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct WitnessEntry {
    from: usize,
    to: usize,
    commodity: usize,
    flow: f64,
}

#[derive(Debug, Serialize)]
struct OracleVerdictFile {
    supportable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<WitnessEntry>>,
}

pub fn oracle_verdict_json(result: &SupportabilityResult) -> String {
    let file = match result {
        SupportabilityResult::Supportable { witness } => OracleVerdictFile {
            supportable: true,
            max_violation: None,
            witness: Some(witness_entries(witness)),
        },
        SupportabilityResult::NotSupportable { max_violation } => OracleVerdictFile {
            supportable: false,
            max_violation: Some(*max_violation),
            witness: None,
        },
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plain data serializes");
    text.push('\n');
    text
}

fn witness_entries(witness: &FlowAssignment) -> Vec<WitnessEntry> {
    witness
        .iter()
        .map(|((from, to, commodity), flow)| WitnessEntry {
            from,
            to,
            commodity,
            flow,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Mechanism files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibaInputFile {
    request: LibaRequestEntry,
    bids: Vec<LibaBidEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibaRequestEntry {
    liquidity: u64,
    duration_days: u64,
    /// Decimal string, e.g. "0.01"; parsed exactly.
    max_rate: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibaBidEntry {
    bidder: String,
    rate: String,
    celr: u64,
    value: u64,
}

pub fn parse_liba_input(text: &str) -> Result<(AuctionRequest, Vec<Bid>)> {
    let file: LibaInputFile = serde_json::from_str(text)?;
    let request = AuctionRequest {
        liquidity: file.request.liquidity,
        duration_days: file.request.duration_days,
        max_rate: crate::econ::parse_decimal(&file.request.max_rate)?,
    };
    let bids = file
        .bids
        .into_iter()
        .map(|b| {
            Ok(Bid {
                bidder: b.bidder,
                rate: crate::econ::parse_decimal(&b.rate)?,
                celr: b.celr,
                value: b.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((request, bids))
}

pub fn load_liba_input(path: &Path) -> Result<(AuctionRequest, Vec<Bid>)> {
    let text = read(path)?;
    parse_liba_input(&text).map_err(|e| match e {
        Error::Json(err) => json_err(path, err),
        other => other,
    })
}

#[derive(Debug, Serialize)]
struct LibaScoreEntry {
    bidder: String,
    /// Exact rational score as "p/q".
    score: String,
    celr: u64,
    value: u64,
}

#[derive(Debug, Serialize)]
struct LibaWinnerEntry {
    bidder: String,
    stake: u64,
}

#[derive(Debug, Serialize)]
struct LibaOutcomeFile {
    mode: String,
    winners: Vec<LibaWinnerEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_loser: Option<String>,
    scores: Vec<LibaScoreEntry>,
    rejected: Vec<String>,
}

pub fn liba_outcome_json(outcome: &AuctionOutcome) -> String {
    let file = LibaOutcomeFile {
        mode: outcome.mode.to_string(),
        winners: outcome
            .winners
            .iter()
            .map(|w| LibaWinnerEntry {
                bidder: w.bidder.clone(),
                stake: w.stake,
            })
            .collect(),
        first_loser: outcome.first_loser.clone(),
        scores: outcome
            .scored
            .iter()
            .map(|s| LibaScoreEntry {
                bidder: s.bid.bidder.clone(),
                score: rational_string(&s.score),
                celr: s.bid.celr,
                value: s.bid.value,
            })
            .collect(),
        rejected: outcome.rejected.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plain data serializes");
    text.push('\n');
    text
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolcEntry {
    backer: String,
    locked: u64,
    duration: u64,
}

pub fn parse_polc_commitments(text: &str) -> Result<Vec<PolcCommitment>> {
    let entries: Vec<PolcEntry> = serde_json::from_str(text)?;
    Ok(entries
        .into_iter()
        .map(|e| PolcCommitment {
            backer: e.backer,
            locked: e.locked,
            duration: e.duration,
        })
        .collect())
}

pub fn load_polc_commitments(path: &Path) -> Result<Vec<PolcCommitment>> {
    let text = read(path)?;
    parse_polc_commitments(&text).map_err(|e| match e {
        Error::Json(err) => json_err(path, err),
        other => other,
    })
}

#[derive(Debug, Serialize)]
struct PolcOutcomeFile {
    total_reward: u64,
    rewards: Vec<PolcRewardEntry>,
}

#[derive(Debug, Serialize)]
struct PolcRewardEntry {
    backer: String,
    reward: u64,
}

pub fn polc_outcome_json(total_reward: u64, rewards: &[(String, u64)]) -> String {
    let file = PolcOutcomeFile {
        total_reward,
        rewards: rewards
            .iter()
            .map(|(backer, reward)| PolcRewardEntry {
                backer: backer.clone(),
                reward: *reward,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plain data serializes");
    text.push('\n');
    text
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GuardRequestEntry {
    /// 64 lowercase hex characters.
    hash: String,
    fee: u64,
    duration: u64,
}

pub fn parse_guard_requests(text: &str) -> Result<Vec<GuardRequest>> {
    let entries: Vec<GuardRequestEntry> = serde_json::from_str(text)?;
    entries
        .into_iter()
        .map(|e| {
            Ok(GuardRequest {
                hash: U256::from_hex(&e.hash)?,
                fee: e.fee,
                duration: e.duration,
            })
        })
        .collect()
}

pub fn load_guard_requests(path: &Path) -> Result<Vec<GuardRequest>> {
    let text = read(path)?;
    parse_guard_requests(&text).map_err(|e| match e {
        Error::Json(err) => json_err(path, err),
        other => other,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StakePoolFile {
    stakes: Vec<StakeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StakeEntry {
    id: String,
    owner: String,
}

pub fn parse_stake_pool(text: &str) -> Result<StakePool> {
    let file: StakePoolFile = serde_json::from_str(text)?;
    let stakes = file
        .stakes
        .into_iter()
        .map(|s| {
            Ok(Stake {
                id: U256::from_hex(&s.id)?,
                owner: s.owner,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    StakePool::new(stakes)
}

pub fn load_stake_pool(path: &Path) -> Result<StakePool> {
    let text = read(path)?;
    parse_stake_pool(&text).map_err(|e| match e {
        Error::Json(err) => json_err(path, err),
        other => other,
    })
}

#[derive(Debug, Serialize)]
pub struct SgnAssignmentFile {
    pub k_total: u64,
    pub assignments: Vec<SgnAssignmentEntry>,
}

#[derive(Debug, Serialize)]
pub struct SgnAssignmentEntry {
    pub hash: String,
    pub stakes_assigned: u64,
    pub selected: Vec<String>,
    pub owners: BTreeMap<String, u64>,
    pub fees: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispute_slots: Option<Vec<(u64, u64)>>,
}

pub fn sgn_outcome_json(file: &SgnAssignmentFile) -> String {
    let mut text = serde_json::to_string_pretty(file).expect("plain data serializes");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Router parsing shared by config and CLI
// ---------------------------------------------------------------------------

pub fn parse_router(
    name: &str,
    beta: Option<f64>,
    landmarks: Option<usize>,
) -> Result<crate::engine::RouterKind> {
    match name {
        "dbr" => Ok(crate::engine::RouterKind::Dbr(DbrParams::new(
            beta.unwrap_or(1.0),
        )?)),
        "shortest_path" => Ok(crate::engine::RouterKind::ShortestPath),
        "landmark" => Ok(crate::engine::RouterKind::Landmark(LandmarkConfig {
            landmark_count: landmarks.unwrap_or(1).max(1),
        })),
        "oracle" => Ok(crate::engine::RouterKind::Oracle),
        other => Err(Error::Config(format!(
            "unknown router {other:?}; expected dbr, shortest_path, landmark, or oracle"
        ))),
    }
}
