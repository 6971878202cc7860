//! Experiment harness CLI: threshold sweep, coverage sweep, and latency
//! evaluation, writing plot-ready CSV.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ircache::domain::{DomainParams, Scenario};
use ircache::harness::{
    render_csv, run_coverage_sweep, run_latency_eval, run_threshold_sweep, validate_rows,
    ExperimentConfig, Mode, SweepRow,
};
use ircache::netmodel::{LatencyParams, NetworkProfile};
use ircache::ratio_cache::RatioRule;

#[derive(Parser, Debug)]
#[command(name = "harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::enum_variant_names)]
enum Command {
    /// Sweeps the ratio-test threshold at fixed coverage.
    SweepTheta {
        #[command(flatten)]
        common: Common,
        /// Thresholds to evaluate; repeatable.
        #[arg(long = "theta", num_args = 1.., default_values_t = vec![0.8, 0.85, 0.9, 0.925, 0.95, 0.975, 1.0])]
        thetas: Vec<f64>,
    },
    /// Sweeps the number of cached places; possible places and requests
    /// scale with it (2x and 3x).
    SweepCoverage {
        #[command(flatten)]
        common: Common,
        /// Ratio-test threshold.
        #[arg(long, default_value_t = 0.975)]
        theta: f64,
        /// Cached-place counts to evaluate; repeatable.
        #[arg(long = "cached-count", num_args = 1.., default_values_t = vec![10, 25, 50, 100])]
        cached_counts: Vec<usize>,
    },
    /// Evaluates request latency while the cached percentage of possible
    /// places varies (cached count stays fixed).
    SweepLatency {
        #[command(flatten)]
        common: Common,
        /// Ratio-test threshold.
        #[arg(long, default_value_t = 0.975)]
        theta: f64,
        /// Cached percentages to evaluate; repeatable.
        #[arg(long = "percent", num_args = 1.., default_values_t = vec![25.0, 50.0, 75.0, 100.0])]
        percents: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario: night, gan, nocache, or all.
    #[arg(long, default_value = "all")]
    scenario: String,
    /// Possible places.
    #[arg(long, default_value_t = 100)]
    places: usize,
    /// Cached places.
    #[arg(long, default_value_t = 50)]
    cached: usize,
    /// Encodings per cached place.
    #[arg(long, default_value_t = 8)]
    enc_per_place: usize,
    /// Requests per round.
    #[arg(long, default_value_t = 150)]
    requests: usize,
    /// Rounds averaged per data point.
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Network profile: ohio, saopaulo, or custom (with --rtt-ms and
    /// --throughput-mbps).
    #[arg(long, default_value = "saopaulo")]
    net_profile: String,
    /// Round-trip time for the custom profile, in ms.
    #[arg(long)]
    rtt_ms: Option<f64>,
    /// Uplink throughput for the custom profile, in Mbit/s.
    #[arg(long)]
    throughput_mbps: Option<f64>,
    /// Offloaded payload size in bytes.
    #[arg(long, default_value_t = 65536)]
    payload_bytes: u64,
    /// Constant edge lookup time in ms.
    #[arg(long, default_value_t = 0.0)]
    edge_lookup_ms: f64,
    /// Constant cloud processing time in ms.
    #[arg(long, default_value_t = 0.0)]
    cloud_proc_ms: f64,
    /// sim computes latency from the network model; live drives a real
    /// edge/cloud service pair over loopback (sweep-latency only).
    #[arg(long, default_value = "sim")]
    mode: Mode,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Encoding dimensionality of the synthetic domain.
    #[arg(long, default_value_t = 1024)]
    dim: usize,
    /// Neighbors consulted per lookup.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Ratio acceptance rule: standard or paper-literal.
    #[arg(long, default_value = "standard")]
    ratio_rule: RatioRule,
    /// Expected noise norm of day-domain samples.
    #[arg(long)]
    sigma_day: Option<f64>,
    /// Expected noise norm of night-domain samples.
    #[arg(long)]
    sigma_night: Option<f64>,
    /// Expected residual noise norm after day translation.
    #[arg(long)]
    sigma_gan: Option<f64>,
    /// Fraction of coordinates moved by the domain shift.
    #[arg(long)]
    shift_fraction: Option<f64>,
}

fn scenarios(arg: &str) -> anyhow::Result<Vec<Scenario>> {
    Ok(match arg {
        "all" => vec![Scenario::Night, Scenario::Gan, Scenario::NoCache],
        other => vec![other
            .parse()
            .map_err(|e: String| anyhow::anyhow!(e))
            .context("invalid --scenario")?],
    })
}

fn experiment_config(common: &Common, theta: f64) -> anyhow::Result<ExperimentConfig> {
    let profile = match common.net_profile.as_str() {
        "custom" => {
            let (Some(rtt), Some(mbps)) = (common.rtt_ms, common.throughput_mbps) else {
                bail!("--net-profile custom requires --rtt-ms and --throughput-mbps");
            };
            NetworkProfile::new("custom", rtt, mbps * 1e6)?
        }
        name => NetworkProfile::builtin(name)
            .ok_or_else(|| anyhow::anyhow!("unknown network profile {name:?}"))?,
    };
    let defaults = DomainParams::default();
    let domain = DomainParams {
        dim: common.dim,
        sigma_day: common.sigma_day.unwrap_or(defaults.sigma_day),
        sigma_night: common.sigma_night.unwrap_or(defaults.sigma_night),
        sigma_gan: common.sigma_gan.unwrap_or(defaults.sigma_gan),
        shift_fraction: common.shift_fraction.unwrap_or(defaults.shift_fraction),
        seed: common.seed,
    };
    Ok(ExperimentConfig {
        n_places: common.places,
        cached: common.cached,
        encodings_per_place: common.enc_per_place,
        n_requests: common.requests,
        rounds: common.rounds,
        theta,
        k: common.k,
        rule: common.ratio_rule,
        domain,
        seed: common.seed,
        profile,
        latency: LatencyParams {
            edge_lookup_ms: common.edge_lookup_ms,
            cloud_proc_ms: common.cloud_proc_ms,
            payload_bytes: common.payload_bytes,
        },
        edge_lookup_samples: None,
        mode: common.mode,
    })
}

fn emit(rows: &[SweepRow], out: &Option<String>) -> anyhow::Result<()> {
    validate_rows(rows)?;
    let csv = render_csv(rows);
    match out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {path}"))?;
            eprintln!("wrote {} data points to {path}", rows.len());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::SweepTheta { common, thetas } => {
            let config = experiment_config(common, 0.975)?;
            let rows = run_threshold_sweep(thetas, &scenarios(&common.scenario)?, &config)?;
            emit(&rows, &common.out)
        }
        Command::SweepCoverage {
            common,
            theta,
            cached_counts,
        } => {
            let config = experiment_config(common, *theta)?;
            let rows = run_coverage_sweep(cached_counts, &scenarios(&common.scenario)?, &config)?;
            emit(&rows, &common.out)
        }
        Command::SweepLatency {
            common,
            theta,
            percents,
        } => {
            let config = experiment_config(common, *theta)?;
            let rows = run_latency_eval(percents, &scenarios(&common.scenario)?, &config)?;
            emit(&rows, &common.out)
        }
    }
}
