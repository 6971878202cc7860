//! Experiment harness: threshold sweep, coverage sweep, and latency
//! evaluation over the Night / Gan / NoCache scenarios, with multi-round
//! averaging, Student-t 95% confidence intervals, and CSV output.

use std::sync::{Arc, RwLock};
use std::time::Duration;

use rand::Rng;

use crate::cloud::CloudStore;
use crate::cloud_service;
use crate::domain::{DomainModel, DomainParams, Scenario};
use crate::edge::{self, EdgeClient, EdgeConfig};
use crate::error::{Error, Result};
use crate::netmodel::{request_latency, LatencyParams, NetworkProfile};
use crate::protocol::{Source, Status};
use crate::ratio_cache::{Decision, RatioCache, RatioConfig, RatioRule};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sim,
    Live,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sim" => Ok(Mode::Sim),
            "live" => Ok(Mode::Live),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Shared configuration of one experiment family.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n_places: usize,
    pub cached: usize,
    pub encodings_per_place: usize,
    pub n_requests: usize,
    pub rounds: usize,
    pub theta: f64,
    pub k: usize,
    pub rule: RatioRule,
    pub domain: DomainParams,
    pub seed: u64,
    pub profile: NetworkProfile,
    pub latency: LatencyParams,
    /// Measured edge-lookup times in ms, sampled per request when present.
    pub edge_lookup_samples: Option<Vec<f64>>,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_places: 100,
            cached: 50,
            encodings_per_place: 8,
            n_requests: 150,
            rounds: 10,
            theta: 0.975,
            k: 5,
            rule: RatioRule::Standard,
            domain: DomainParams::default(),
            seed: 0,
            profile: NetworkProfile::saopaulo(),
            latency: LatencyParams::default(),
            edge_lookup_samples: None,
            mode: Mode::Sim,
        }
    }
}

/// Per-request outcome with ground truth, the input to the metrics.
#[derive(Debug, Clone)]
pub struct RequestRecord {
    pub ground_truth: String,
    pub answer: String,
    pub source: Source,
    pub place_cached: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    /// Absent when no request's place is cached.
    pub recall: Option<f64>,
    pub hit_rate: f64,
}

/// precision = correct final answers / requests;
/// recall = correct cache answers / requests whose place is cached;
/// hit rate = cache answers / requests.
pub fn compute_metrics(records: &[RequestRecord]) -> Metrics {
    let total = records.len() as f64;
    let correct = records.iter().filter(|r| r.answer == r.ground_truth).count() as f64;
    let cache_answers = records.iter().filter(|r| r.source == Source::Cache).count() as f64;
    let cache_correct = records
        .iter()
        .filter(|r| r.source == Source::Cache && r.answer == r.ground_truth)
        .count() as f64;
    let cached_requests = records.iter().filter(|r| r.place_cached).count() as f64;
    Metrics {
        precision: correct / total,
        recall: if cached_requests > 0.0 {
            Some(cache_correct / cached_requests)
        } else {
            None
        },
        hit_rate: cache_answers / total,
    }
}

#[derive(Debug, Clone)]
pub struct RoundResult {
    pub round: usize,
    pub scenario: Scenario,
    pub theta: f64,
    pub n_places: usize,
    pub n_cached: usize,
    pub precision: f64,
    pub recall: Option<f64>,
    pub hit_rate: f64,
    pub mean_latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricAgg {
    pub mean: f64,
    /// Student-t 95% half-width; absent with a single sample.
    pub ci_half: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub precision: MetricAgg,
    pub recall: Option<MetricAgg>,
    pub hit_rate: MetricAgg,
    pub latency_ms: MetricAgg,
}

fn t_critical_975(df: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    StudentsT::new(0.0, 1.0, df)
        .expect("valid t distribution")
        .inverse_cdf(0.975)
}

fn agg_values(values: &[f64]) -> MetricAgg {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return MetricAgg {
            mean,
            ci_half: None,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    MetricAgg {
        mean,
        ci_half: Some(t_critical_975((n - 1) as f64) * se),
    }
}

/// Mean and 95% t-interval half-width per metric across rounds.
pub fn aggregate(rounds: &[RoundResult]) -> AggregateResult {
    let precision: Vec<f64> = rounds.iter().map(|r| r.precision).collect();
    let hit: Vec<f64> = rounds.iter().map(|r| r.hit_rate).collect();
    let latency: Vec<f64> = rounds.iter().map(|r| r.mean_latency_ms).collect();
    let recall: Vec<f64> = rounds.iter().filter_map(|r| r.recall).collect();
    AggregateResult {
        precision: agg_values(&precision),
        recall: if recall.is_empty() {
            None
        } else {
            Some(agg_values(&recall))
        },
        hit_rate: agg_values(&hit),
        latency_ms: agg_values(&latency),
    }
}

/// Threshold-independent trace of one request within a built round: the
/// ratio decides hit/miss at any theta, and the cloud answer is fixed.
#[derive(Debug, Clone)]
pub struct RequestTrace {
    /// None when the cache was empty (always a miss).
    pub ratio: Option<f64>,
    /// True when the whole neighborhood agreed (hit at any theta).
    pub unanimous: bool,
    pub matched_content: Option<String>,
    pub cloud_answer: String,
    pub ground_truth: String,
    pub place_cached: bool,
    pub edge_lookup_ms: f64,
}

impl RequestTrace {
    pub fn decision_at(&self, theta: f64, rule: RatioRule) -> Decision {
        match self.ratio {
            None => Decision::Miss,
            Some(_) if self.unanimous => Decision::Hit,
            Some(r) => {
                let accept = match rule {
                    RatioRule::Standard => r <= theta,
                    RatioRule::PaperLiteral => r > theta,
                };
                if accept {
                    Decision::Hit
                } else {
                    Decision::Miss
                }
            }
        }
    }
}

/// Builds one round of a scenario and replays every request through the
/// cache + cloud pair, recording theta-independent traces.
pub fn build_traces(
    config: &ExperimentConfig,
    scenario: Scenario,
    n_places: usize,
    cached: usize,
    n_requests: usize,
    round: usize,
) -> Result<Vec<RequestTrace>> {
    let model = DomainModel::new(DomainParams {
        seed: config.seed,
        ..config.domain.clone()
    })?;
    let mut rng = SeededRng::substream(config.seed, round as u64);
    let data = model.build_scenario::<f32>(
        n_places,
        cached as f64 / n_places as f64,
        config.encodings_per_place,
        n_requests,
        scenario,
        true,
        &mut rng,
    )?;

    let ratio_config = RatioConfig {
        theta: config.theta,
        k: config.k,
        capacity: None,
        rule: config.rule,
    };
    let mut cache = RatioCache::new(config.domain.dim, ratio_config)?;
    cache.bulk_load(data.cache_entries)?;
    let cloud = CloudStore::from_entries(
        config.domain.dim,
        RatioConfig {
            k: config.k,
            ..CloudStore::<f32>::cloud_config()
        },
        data.cloud_corpus,
    )?;

    let mut traces = Vec::with_capacity(data.requests.len());
    for req in &data.requests {
        let lookup = cache.lookup(&req.encoding)?;
        let (ratio, unanimous, matched) = if lookup.neighbors.is_empty() {
            (None, false, None)
        } else if lookup.d2.is_none() {
            // unanimous neighborhood; matched content is the rank-1 content
            let top = lookup.neighbors[0].handle;
            let content = cache.index().get(top).expect("top resolves").content.id.clone();
            (Some(0.0), true, Some(content))
        } else {
            let top = lookup.neighbors[0].handle;
            let content = cache.index().get(top).expect("top resolves").content.id.clone();
            (lookup.ratio, false, Some(content))
        };
        let cloud_answer = cloud.resolve(&req.encoding)?.content.id;
        let edge_lookup_ms = match &config.edge_lookup_samples {
            Some(samples) if !samples.is_empty() => samples[rng.gen_range(0..samples.len())],
            _ => config.latency.edge_lookup_ms,
        };
        traces.push(RequestTrace {
            ratio,
            unanimous,
            matched_content: matched,
            cloud_answer,
            ground_truth: req.ground_truth.clone(),
            place_cached: req.place_cached,
            edge_lookup_ms,
        });
    }
    Ok(traces)
}

/// Evaluates a built round at one threshold.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_at(
    traces: &[RequestTrace],
    theta: f64,
    rule: RatioRule,
    scenario: Scenario,
    n_places: usize,
    cached: usize,
    round: usize,
    profile: &NetworkProfile,
    latency: &LatencyParams,
) -> RoundResult {
    let mut records = Vec::with_capacity(traces.len());
    let mut latency_sum = 0.0;
    for t in traces {
        let decision = t.decision_at(theta, rule);
        let (answer, source) = match decision {
            Decision::Hit => (
                t.matched_content.clone().expect("hit carries content"),
                Source::Cache,
            ),
            Decision::Miss => (t.cloud_answer.clone(), Source::Cloud),
        };
        let per_request = LatencyParams {
            edge_lookup_ms: t.edge_lookup_ms,
            ..latency.clone()
        };
        latency_sum += request_latency(decision, profile, &per_request);
        records.push(RequestRecord {
            ground_truth: t.ground_truth.clone(),
            answer,
            source,
            place_cached: t.place_cached,
        });
    }
    let metrics = compute_metrics(&records);
    RoundResult {
        round,
        scenario,
        theta,
        n_places,
        n_cached: cached,
        precision: metrics.precision,
        recall: metrics.recall,
        hit_rate: metrics.hit_rate,
        mean_latency_ms: latency_sum / traces.len() as f64,
    }
}

/// One aggregated sweep cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub sweep: &'static str,
    pub scenario: Scenario,
    pub variable: f64,
    pub agg: AggregateResult,
}

fn run_cell(
    config: &ExperimentConfig,
    scenario: Scenario,
    thetas: &[f64],
    n_places: usize,
    cached: usize,
    n_requests: usize,
) -> Result<Vec<(f64, Vec<RoundResult>)>> {
    let mut per_theta: Vec<(f64, Vec<RoundResult>)> =
        thetas.iter().map(|t| (*t, Vec::new())).collect();
    for round in 0..config.rounds {
        let traces = build_traces(config, scenario, n_places, cached, n_requests, round)?;
        for (theta, rounds) in per_theta.iter_mut() {
            rounds.push(evaluate_at(
                &traces,
                *theta,
                config.rule,
                scenario,
                n_places,
                cached,
                round,
                &config.profile,
                &config.latency,
            ));
        }
    }
    Ok(per_theta)
}

/// Threshold sweep over the configured place/coverage counts.
pub fn run_threshold_sweep(
    thetas: &[f64],
    scenarios: &[Scenario],
    config: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &scenario in scenarios {
        let per_theta = run_cell(
            config,
            scenario,
            thetas,
            config.n_places,
            config.cached,
            config.n_requests,
        )?;
        for (theta, rounds) in per_theta {
            rows.push(SweepRow {
                sweep: "theta",
                scenario,
                variable: theta,
                agg: aggregate(&rounds),
            });
        }
    }
    Ok(rows)
}

/// Coverage sweep: fixed theta, possible places = 2x cached, requests = 3x
/// cached.
pub fn run_coverage_sweep(
    cached_counts: &[usize],
    scenarios: &[Scenario],
    config: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &scenario in scenarios {
        for &cached in cached_counts {
            let per_theta = run_cell(
                config,
                scenario,
                &[config.theta],
                2 * cached,
                cached,
                3 * cached,
            )?;
            let (_, rounds) = per_theta.into_iter().next().expect("one theta");
            rows.push(SweepRow {
                sweep: "coverage",
                scenario,
                variable: cached as f64,
                agg: aggregate(&rounds),
            });
        }
    }
    Ok(rows)
}

/// Latency evaluation: cached places fixed, the number of possible places
/// induces each cached percentage.
pub fn run_latency_eval(
    percentages: &[f64],
    scenarios: &[Scenario],
    config: &ExperimentConfig,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &scenario in scenarios {
        for &pct in percentages {
            if !(pct > 0.0 && pct <= 100.0) {
                return Err(Error::InvalidConfig(format!(
                    "cached percentage must be in (0, 100], got {pct}"
                )));
            }
            let cached = config.cached;
            let n_places = ((cached as f64) * 100.0 / pct).round() as usize;
            let rounds = match config.mode {
                Mode::Sim => {
                    let per_theta = run_cell(
                        config,
                        scenario,
                        &[config.theta],
                        n_places,
                        cached,
                        config.n_requests,
                    )?;
                    per_theta.into_iter().next().expect("one theta").1
                }
                Mode::Live => (0..config.rounds)
                    .map(|round| run_live_round(config, scenario, n_places, cached, round))
                    .collect::<Result<Vec<_>>>()?,
            };
            rows.push(SweepRow {
                sweep: "latency",
                scenario,
                variable: pct,
                agg: aggregate(&rounds),
            });
        }
    }
    Ok(rows)
}

/// Drives a real edge + cloud service pair over loopback and measures
/// wall-clock latency client-side.
pub fn run_live_round(
    config: &ExperimentConfig,
    scenario: Scenario,
    n_places: usize,
    cached: usize,
    round: usize,
) -> Result<RoundResult> {
    let model = DomainModel::new(DomainParams {
        seed: config.seed,
        ..config.domain.clone()
    })?;
    let mut rng = SeededRng::substream(config.seed, round as u64);
    let data = model.build_scenario::<f32>(
        n_places,
        cached as f64 / n_places as f64,
        config.encodings_per_place,
        config.n_requests,
        scenario,
        true,
        &mut rng,
    )?;

    let cloud = CloudStore::from_entries(
        config.domain.dim,
        RatioConfig {
            k: config.k,
            ..CloudStore::<f32>::cloud_config()
        },
        data.cloud_corpus,
    )?;
    let cloud_server = cloud_service::serve(cloud, "127.0.0.1:0", config.latency.cloud_proc_ms)?;

    let ratio_config = RatioConfig {
        theta: config.theta,
        k: config.k,
        capacity: None,
        rule: config.rule,
    };
    let mut cache = RatioCache::new(config.domain.dim, ratio_config)?;
    cache.bulk_load(data.cache_entries)?;
    let edge_server = edge::serve_shared(
        Arc::new(RwLock::new(cache)),
        EdgeConfig {
            listen: "127.0.0.1:0".into(),
            cloud_addr: Some(cloud_server.local_addr().to_string()),
            learn: false,
            cloud_timeout: Duration::from_secs(10),
        },
    )?;

    let mut client = EdgeClient::connect(
        &edge_server.local_addr().to_string(),
        Duration::from_secs(10),
    )?;
    let mut records = Vec::new();
    let mut latency_sum = 0.0;
    for (i, req) in data.requests.iter().enumerate() {
        let (resp, wall_ms) = client.query(&format!("r{i}"), req.encoding.values())?;
        if resp.status != Status::Ok {
            return Err(Error::Protocol(format!(
                "request r{i} failed with {:?}: {}",
                resp.status,
                resp.error.unwrap_or_default()
            )));
        }
        latency_sum += wall_ms;
        records.push(RequestRecord {
            ground_truth: req.ground_truth.clone(),
            answer: resp.content.unwrap_or_default(),
            source: resp.source.expect("ok response carries source"),
            place_cached: req.place_cached,
        });
    }
    drop(client);
    edge_server.shutdown();
    cloud_server.shutdown();

    let metrics = compute_metrics(&records);
    Ok(RoundResult {
        round,
        scenario,
        theta: config.theta,
        n_places,
        n_cached: cached,
        precision: metrics.precision,
        recall: metrics.recall,
        hit_rate: metrics.hit_rate,
        mean_latency_ms: latency_sum / records.len() as f64,
    })
}

/// Renders sweep rows as plot-ready CSV: one row per (scenario,
/// sweep-variable, metric). Output is byte-deterministic for a fixed input.
pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sweep,scenario,variable,metric,mean,ci_half\n");
    let fmt_ci = |ci: Option<f64>| ci.map(|c| c.to_string()).unwrap_or_default();
    for row in rows {
        let mut push = |metric: &str, agg: Option<&MetricAgg>| {
            match agg {
                Some(a) => out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.sweep,
                    row.scenario.as_str(),
                    row.variable,
                    metric,
                    a.mean,
                    fmt_ci(a.ci_half)
                )),
                None => out.push_str(&format!(
                    "{},{},{},{},,\n",
                    row.sweep,
                    row.scenario.as_str(),
                    row.variable,
                    metric
                )),
            };
        };
        push("precision", Some(&row.agg.precision));
        push("recall", row.agg.recall.as_ref());
        push("hit_rate", Some(&row.agg.hit_rate));
        push("latency_ms", Some(&row.agg.latency_ms));
    }
    out
}

/// Post-run invariant checks; a violation makes the CLI exit nonzero.
pub fn validate_rows(rows: &[SweepRow]) -> Result<()> {
    for row in rows {
        for (name, agg) in [
            ("precision", Some(&row.agg.precision)),
            ("recall", row.agg.recall.as_ref()),
            ("hit_rate", Some(&row.agg.hit_rate)),
        ] {
            if let Some(a) = agg {
                if !(0.0..=1.0).contains(&a.mean) {
                    return Err(Error::InvalidConfig(format!(
                        "invariant violation: {name} mean {} outside [0, 1] in sweep {} scenario {} variable {}",
                        a.mean,
                        row.sweep,
                        row.scenario.as_str(),
                        row.variable
                    )));
                }
                if let Some(ci) = a.ci_half {
                    if ci < 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "invariant violation: negative ci for {name}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}
