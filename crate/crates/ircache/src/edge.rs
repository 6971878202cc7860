//! The deployable edge cache service.
//!
//! Answers encoding queries from the ratio cache; on a miss the query is
//! forwarded to the cloud service over the same wire protocol. With learn
//! mode enabled, cloud answers are inserted back into the cache.

use std::io::{BufReader, Write};
use std::net::TcpStream;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use crate::encoding::{CacheEntry, ContentLabel, Encoding, Provenance};
use crate::error::{Error, Result};
use crate::protocol::{
    read_json_line, write_json_line, QueryMessage, ResponseMessage, Source, Status,
};
use crate::ratio_cache::{Decision, RatioCache};
use crate::service::{spawn_line_server, ServerHandle};

#[derive(Debug, Clone)]
pub struct EdgeConfig {
    pub listen: String,
    /// Address of the cloud service; `None` disables forwarding (misses
    /// become cloud-unreachable responses).
    pub cloud_addr: Option<String>,
    /// Insert cloud answers into the cache (provenance `Ingested`).
    pub learn: bool,
    pub cloud_timeout: Duration,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:0".into(),
            cloud_addr: None,
            learn: false,
            cloud_timeout: Duration::from_secs(10),
        }
    }
}

/// Starts the edge service. The cache is shared: lookups take a read lock,
/// learn-mode insertions take the write lock.
pub fn serve(cache: RatioCache<f32>, config: EdgeConfig) -> Result<ServerHandle> {
    let cache = Arc::new(RwLock::new(cache));
    serve_shared(cache, config)
}

pub fn serve_shared(
    cache: Arc<RwLock<RatioCache<f32>>>,
    config: EdgeConfig,
) -> Result<ServerHandle> {
    let listen = config.listen.clone();
    let config = Arc::new(config);
    spawn_line_server(&listen, move || {
        let cache = Arc::clone(&cache);
        let config = Arc::clone(&config);
        // One lazily opened cloud connection per client connection.
        let mut cloud_conn: Option<(BufReader<TcpStream>, TcpStream)> = None;
        move |line: &str| {
            let response = handle_query_line(line, &cache, &config, &mut cloud_conn);
            serde_json::to_string(&response).expect("response serializes")
        }
    })
}

fn handle_query_line(
    line: &str,
    cache: &RwLock<RatioCache<f32>>,
    config: &EdgeConfig,
    cloud_conn: &mut Option<(BufReader<TcpStream>, TcpStream)>,
) -> ResponseMessage {
    let query: QueryMessage = match serde_json::from_str(line) {
        Ok(q) => q,
        Err(e) => {
            let id = extract_id(line);
            return ResponseMessage::error(id, Status::BadRequest, e.to_string());
        }
    };
    let started = Instant::now();
    let encoding = match Encoding::new(query.encoding.clone()) {
        Ok(e) => e,
        Err(e) => return ResponseMessage::error(query.id, Status::BadRequest, e.to_string()),
    };
    let lookup = {
        let guard = cache.read().expect("cache lock poisoned");
        match guard.lookup(&encoding) {
            Ok(r) => r,
            Err(e) => return ResponseMessage::error(query.id, Status::BadRequest, e.to_string()),
        }
    };
    match lookup.decision {
        Decision::Hit => {
            let content = lookup.matched_content.expect("hit carries content");
            ResponseMessage {
                id: query.id,
                status: Status::Ok,
                content: Some(content.payload),
                source: Some(Source::Cache),
                d1: lookup.d1,
                ratio: lookup.ratio,
                error: None,
                latency_ms: elapsed_ms(started),
            }
        }
        Decision::Miss => match forward_to_cloud(&query, config, cloud_conn) {
            Ok(cloud_resp) => {
                if config.learn {
                    if let Some(content) = &cloud_resp.content {
                        if let Ok(label) = ContentLabel::new(content.clone(), content.clone()) {
                            let mut guard = cache.write().expect("cache lock poisoned");
                            let _ = guard.insert_result(CacheEntry::new(
                                encoding.clone(),
                                label,
                                Provenance::Ingested,
                            ));
                        }
                    }
                }
                ResponseMessage {
                    id: query.id,
                    status: cloud_resp.status,
                    content: cloud_resp.content,
                    source: Some(Source::Cloud),
                    d1: lookup.d1,
                    ratio: lookup.ratio,
                    error: cloud_resp.error,
                    latency_ms: elapsed_ms(started),
                }
            }
            Err(e) => {
                // Drop the broken connection so the next miss retries.
                *cloud_conn = None;
                ResponseMessage::error(query.id, Status::CloudUnreachable, e.to_string())
            }
        },
    }
}

fn forward_to_cloud(
    query: &QueryMessage,
    config: &EdgeConfig,
    cloud_conn: &mut Option<(BufReader<TcpStream>, TcpStream)>,
) -> Result<ResponseMessage> {
    let addr = config
        .cloud_addr
        .as_deref()
        .ok_or_else(|| Error::CloudUnreachable("no cloud configured".into()))?;
    if cloud_conn.is_none() {
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::CloudUnreachable(format!("{addr}: {e}")))?;
        stream.set_read_timeout(Some(config.cloud_timeout))?;
        let reader = BufReader::new(stream.try_clone()?);
        *cloud_conn = Some((reader, stream));
    }
    let (reader, writer) = cloud_conn.as_mut().expect("connection just established");
    write_json_line(writer, query).map_err(|e| Error::CloudUnreachable(e.to_string()))?;
    match read_json_line::<ResponseMessage, _>(reader) {
        Ok(Some(resp)) => Ok(resp),
        Ok(None) => Err(Error::CloudUnreachable("cloud closed connection".into())),
        Err(e) => Err(Error::CloudUnreachable(e.to_string())),
    }
}

fn extract_id(line: &str) -> String {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("id").and_then(|i| i.as_str().map(str::to_owned)))
        .unwrap_or_else(|| "unknown".into())
}

fn elapsed_ms(started: Instant) -> f64 {
    started.elapsed().as_secs_f64() * 1e3
}

/// Persistent client connection; queries are answered in order and may be
/// pipelined via `send`/`recv`.
pub struct EdgeClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl EdgeClient {
    pub fn connect(addr: &str, timeout: Duration) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(timeout))?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self {
            reader,
            writer: stream,
        })
    }

    pub fn send(&mut self, id: &str, encoding: &[f32]) -> Result<()> {
        let q = QueryMessage {
            id: id.to_owned(),
            encoding: encoding.to_vec(),
        };
        write_json_line(&mut self.writer, &q)
    }

    /// Sends a raw line, bypassing serialization (protocol tests).
    pub fn send_raw(&mut self, line: &str) -> Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<ResponseMessage> {
        match read_json_line(&mut self.reader) {
            Ok(Some(resp)) => Ok(resp),
            Ok(None) => Err(Error::Protocol("server closed connection".into())),
            Err(Error::Io(e))
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                Err(Error::Timeout)
            }
            Err(e) => Err(e),
        }
    }

    /// One query plus the client-side wall-clock latency in milliseconds.
    pub fn query(&mut self, id: &str, encoding: &[f32]) -> Result<(ResponseMessage, f64)> {
        let started = Instant::now();
        self.send(id, encoding)?;
        let resp = self.recv()?;
        Ok((resp, elapsed_ms(started)))
    }
}

/// One-shot convenience client.
pub fn client_query(
    addr: &str,
    encoding: &[f32],
    timeout: Duration,
) -> Result<(ResponseMessage, f64)> {
    let mut client = EdgeClient::connect(addr, timeout)?;
    client.query("q-0", encoding)
}
