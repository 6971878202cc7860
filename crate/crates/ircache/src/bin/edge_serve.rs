//! Edge cache service CLI.

use std::time::Duration;

use anyhow::Context;
use clap::Parser;

use ircache::edge::{serve, EdgeConfig};
use ircache::encoding::read_encoding_file;
use ircache::ratio_cache::{RatioConfig, RatioRule};
use ircache::RatioCache;

/// Serves the similarity-keyed edge cache over line-delimited JSON.
#[derive(Parser, Debug)]
#[command(name = "edge-serve")]
struct Args {
    /// Listen address, e.g. 127.0.0.1:7400.
    #[arg(long)]
    listen: String,
    /// Encoding file preloading the cache (tab-separated, one entry per
    /// line); omit to start empty.
    #[arg(long)]
    cache: Option<String>,
    /// Cloud service address for miss forwarding.
    #[arg(long)]
    cloud: Option<String>,
    /// Ratio-test threshold.
    #[arg(long, default_value_t = 0.975)]
    theta: f64,
    /// Neighbors consulted per lookup.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Insert cloud answers back into the cache.
    #[arg(long)]
    learn: bool,
    /// Encoding dimensionality; inferred from the cache file when omitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Maximum number of cache entries; unlimited when omitted.
    #[arg(long)]
    capacity: Option<usize>,
    /// Ratio acceptance rule: standard or paper-literal.
    #[arg(long, default_value = "standard")]
    ratio_rule: RatioRule,
    /// Cloud request timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    cloud_timeout_secs: f64,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let config = RatioConfig {
        theta: args.theta,
        k: args.k,
        capacity: args.capacity,
        rule: args.ratio_rule,
    };
    let entries = match &args.cache {
        Some(path) => {
            read_encoding_file(path).with_context(|| format!("loading cache file {path}"))?
        }
        None => Vec::new(),
    };
    let dim = args
        .dim
        .or_else(|| entries.first().map(|e| e.encoding.dim()))
        .unwrap_or(ircache::encoding::DEFAULT_DIM);
    let mut cache = RatioCache::new(dim, config)?;
    if !entries.is_empty() {
        let n = entries.len();
        cache.bulk_load(entries)?;
        eprintln!("loaded {n} cache entries");
    }
    let handle = serve(
        cache,
        EdgeConfig {
            listen: args.listen.clone(),
            cloud_addr: args.cloud.clone(),
            learn: args.learn,
            cloud_timeout: Duration::from_secs_f64(args.cloud_timeout_secs),
        },
    )?;
    eprintln!("edge service listening on {}", handle.local_addr());
    loop {
        std::thread::park();
    }
}
