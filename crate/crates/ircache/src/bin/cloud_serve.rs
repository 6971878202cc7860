//! Emulated cloud recognition service CLI.

use anyhow::Context;
use clap::Parser;

use ircache::cloud_service::serve;
use ircache::encoding::read_encoding_file;
use ircache::ratio_cache::RatioConfig;
use ircache::CloudStore;

/// Serves the emulated cloud resolver over line-delimited JSON.
#[derive(Parser, Debug)]
#[command(name = "cloud-serve")]
struct Args {
    /// Listen address, e.g. 127.0.0.1:7500.
    #[arg(long)]
    listen: String,
    /// Encoding corpus the cloud answers from (tab-separated).
    #[arg(long)]
    corpus: String,
    /// Extra encodings appended to the corpus so the cloud answers those
    /// queries exactly (oracle mode).
    #[arg(long)]
    oracle_requests: Option<String>,
    /// Neighbors consulted per resolution.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Encoding dimensionality; inferred from the corpus when omitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Constant processing time added per request, in ms.
    #[arg(long, default_value_t = 0.0)]
    proc_ms: f64,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let mut entries = read_encoding_file(&args.corpus)
        .with_context(|| format!("loading corpus {}", args.corpus))?;
    if let Some(path) = &args.oracle_requests {
        let extra = read_encoding_file(path)
            .with_context(|| format!("loading oracle requests {path}"))?;
        entries.extend(extra);
    }
    let n = entries.len();
    let dim = args
        .dim
        .or_else(|| entries.first().map(|e| e.encoding.dim()))
        .unwrap_or(ircache::encoding::DEFAULT_DIM);
    let config = RatioConfig {
        k: args.k,
        ..CloudStore::cloud_config()
    };
    let store = CloudStore::from_entries(dim, config, entries)?;
    let handle = serve(store, &args.listen, args.proc_ms)?;
    eprintln!(
        "cloud service listening on {} with {n} corpus entries",
        handle.local_addr()
    );
    loop {
        std::thread::park();
    }
}
