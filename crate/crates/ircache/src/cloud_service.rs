//! The emulated cloud as a network service, speaking the same wire protocol
//! as the edge.

use std::sync::Arc;
use std::time::Instant;

use crate::cloud::CloudStore;
use crate::encoding::Encoding;
use crate::error::Result;
use crate::protocol::{QueryMessage, ResponseMessage, Source, Status};
use crate::service::{spawn_line_server, ServerHandle};

/// Optional constant processing time added to every resolution, in ms.
pub fn serve(store: CloudStore<f32>, listen: &str, proc_ms: f64) -> Result<ServerHandle> {
    let store = Arc::new(store);
    spawn_line_server(listen, move || {
        let store = Arc::clone(&store);
        move |line: &str| {
            let response = handle_line(line, &store, proc_ms);
            serde_json::to_string(&response).expect("response serializes")
        }
    })
}

fn handle_line(line: &str, store: &CloudStore<f32>, proc_ms: f64) -> ResponseMessage {
    let query: QueryMessage = match serde_json::from_str(line) {
        Ok(q) => q,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_str().map(str::to_owned)))
                .unwrap_or_else(|| "unknown".into());
            return ResponseMessage::error(id, Status::BadRequest, e.to_string());
        }
    };
    let started = Instant::now();
    let encoding = match Encoding::new(query.encoding) {
        Ok(e) => e,
        Err(e) => return ResponseMessage::error(query.id, Status::BadRequest, e.to_string()),
    };
    if proc_ms > 0.0 {
        std::thread::sleep(std::time::Duration::from_secs_f64(proc_ms / 1e3));
    }
    match store.resolve(&encoding) {
        Ok(resolution) => ResponseMessage {
            id: query.id,
            status: Status::Ok,
            content: Some(resolution.content.payload),
            source: Some(Source::Cloud),
            d1: Some(resolution.d1),
            ratio: resolution.ratio,
            error: None,
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
        },
        Err(crate::error::Error::EmptyStore) => {
            ResponseMessage::error(query.id, Status::EmptyStore, "cloud store is empty")
        }
        Err(e) => ResponseMessage::error(query.id, Status::Error, e.to_string()),
    }
}
