//! Run configuration: one JSON document per simulation, resolved into an
//! [`engine::SimConfig`]. Unknown keys are errors; command-line overrides win
//! over file values; relative paths resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::engine::{self, SimConfig};
use crate::formats;
use crate::traffic::{ArrivalModel, FailureSchedule};
use crate::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    topology: TopologySource,
    flows: FlowsSource,
    router: String,
    slots: u64,
    seed: u64,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    landmarks: Option<usize>,
    #[serde(default)]
    traffic: Option<TrafficSection>,
    #[serde(default)]
    failures: Option<FailuresSource>,
    #[serde(default)]
    max_retries: Option<u32>,
    #[serde(default)]
    arrival_cap: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
enum TopologySource {
    #[serde(rename = "file")]
    File(PathBuf),
    #[serde(rename = "generate")]
    Generate(GenerateTopology),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateTopology {
    seed: u64,
    nodes: usize,
    channels: usize,
    deposit_range: (f64, f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
enum FlowsSource {
    #[serde(rename = "file")]
    File(PathBuf),
    #[serde(rename = "inline")]
    Inline(Vec<InlineFlow>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineFlow {
    source: usize,
    destination: usize,
    rate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSection {
    model: String,
    #[serde(default)]
    mean_payment_size: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
enum FailuresSource {
    #[serde(rename = "file")]
    File(PathBuf),
    #[serde(rename = "inline")]
    Inline(serde_json::Value),
}

/// Command-line overrides; any field set here wins over the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub router: Option<String>,
    pub beta: Option<f64>,
    pub slots: Option<u64>,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Loads and validates a run config, applying overrides.
pub fn load_sim_config(path: &Path, overrides: &Overrides) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: RunConfigFile = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!(
            "{} line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();

    let topology = match &file.topology {
        TopologySource::File(p) => formats::load_topology(&resolve(&base, p))?,
        TopologySource::Generate(gen) => crate::net::generate_random_topology(
            gen.seed,
            gen.nodes,
            gen.channels,
            gen.deposit_range,
        )?,
    };
    let flows = match &file.flows {
        FlowsSource::File(p) => formats::load_flows(&resolve(&base, p))?,
        FlowsSource::Inline(list) => list
            .iter()
            .map(|f| crate::traffic::FlowSpec {
                source: f.source,
                destination: f.destination,
                rate: f.rate,
            })
            .collect(),
    };
    let arrival_model = match &file.traffic {
        None => ArrivalModel::Poisson { mean_size: 3.0 },
        Some(section) => match section.model.as_str() {
            "poisson" => ArrivalModel::Poisson {
                mean_size: section.mean_payment_size.unwrap_or(3.0),
            },
            "deterministic" => {
                if section.mean_payment_size.is_some() {
                    return Err(Error::Config(
                        "mean_payment_size does not apply to the deterministic model".into(),
                    ));
                }
                ArrivalModel::Deterministic
            }
            other => {
                return Err(Error::Config(format!(
                    "traffic model must be \"poisson\" or \"deterministic\", got {other:?}"
                )))
            }
        },
    };
    let failures = match &file.failures {
        None => FailureSchedule::default(),
        Some(FailuresSource::File(p)) => formats::load_failures(&resolve(&base, p))?,
        Some(FailuresSource::Inline(value)) => formats::parse_failures(&value.to_string())?,
    };

    let router_name = overrides.router.clone().unwrap_or(file.router);
    let beta = overrides.beta.or(file.beta);
    let router = formats::parse_router(&router_name, beta, file.landmarks)?;

    let mut config = SimConfig::new(
        Arc::new(topology),
        flows,
        router,
        overrides.slots.unwrap_or(file.slots),
        overrides.seed.unwrap_or(file.seed),
    );
    config.arrival_model = arrival_model;
    config.failures = failures;
    if let Some(r) = file.max_retries {
        config.max_retries = r;
    }
    if let Some(cap) = file.arrival_cap {
        config.arrival_cap = cap;
    }
    config.validate()?;
    Ok(config)
}

/// The routers a config can be compared across.
pub fn comparison_routers(config: &SimConfig, names: &[String]) -> Result<Vec<engine::RouterKind>> {
    names
        .iter()
        .map(|name| {
            let beta = match &config.router {
                engine::RouterKind::Dbr(params) => Some(params.beta),
                _ => None,
            };
            let landmarks = match &config.router {
                engine::RouterKind::Landmark(cfg) => Some(cfg.landmark_count),
                _ => None,
            };
            formats::parse_router(name, beta, landmarks)
        })
        .collect()
}
