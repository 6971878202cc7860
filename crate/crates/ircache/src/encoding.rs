//! Domain types: encodings, content labels, cache entries, and the shared
//! tab-separated encoding file format.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Encoding dimensionality used when nothing else is configured. Matches a
/// whole-image NetVLAD-style descriptor; desk-scale experiments use much
/// smaller vectors.
pub const DEFAULT_DIM: usize = 16384;

/// Fixed-dimension real vector describing one image; the cache key space.
///
/// All values are finite by construction. Immutable after creation.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding<S: Scalar> {
    values: Vec<S>,
}

impl<S: Scalar> Encoding<S> {
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyEncoding);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| {
                let x = v.as_f64();
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Opaque identifier plus the payload string returned to clients.
///
/// Two entries with equal id must carry equal payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContentLabel {
    pub id: String,
    pub payload: String,
}

impl ContentLabel {
    pub fn new(id: impl Into<String>, payload: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyContentId);
        }
        Ok(Self {
            id,
            payload: payload.into(),
        })
    }

    /// Label whose payload is the id itself, as used by the encoding file
    /// format which carries no separate payload field.
    pub fn from_id(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let payload = id.clone();
        Self::new(id, payload)
    }
}

/// Where a cached encoding came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    NightReal,
    SyntheticDay,
    Ingested,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::NightReal => "night",
            Provenance::SyntheticDay => "synthetic-day",
            Provenance::Ingested => "ingested",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "night" => Ok(Provenance::NightReal),
            "synthetic-day" => Ok(Provenance::SyntheticDay),
            "ingested" => Ok(Provenance::Ingested),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cached record: encoding, its content, and provenance.
#[derive(Debug, Clone)]
pub struct CacheEntry<S: Scalar> {
    pub encoding: Encoding<S>,
    pub content: ContentLabel,
    pub provenance: Provenance,
}

impl<S: Scalar> CacheEntry<S> {
    pub fn new(encoding: Encoding<S>, content: ContentLabel, provenance: Provenance) -> Self {
        Self {
            encoding,
            content,
            provenance,
        }
    }
}

/// Parses the shared encoding file format: one record per line,
/// `<content_id>\t<provenance>\t<comma-separated floats>`, UTF-8,
/// `#`-prefixed comment lines ignored. The content payload equals the id.
pub fn parse_encoding_lines<S: Scalar, R: BufRead>(reader: R) -> Result<Vec<CacheEntry<S>>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let (id, prov, floats) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "expected 3 tab-separated fields".into(),
                })
            }
        };
        let provenance: Provenance = prov.parse().map_err(|e| Error::Parse {
            line: lineno,
            message: e,
        })?;
        let mut values = Vec::new();
        for tok in floats.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad float {tok:?}"),
            })?;
            values.push(S::of_f64(v));
        }
        let encoding = Encoding::new(values).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let content = ContentLabel::from_id(id).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        out.push(CacheEntry::new(encoding, content, provenance));
    }
    Ok(out)
}

pub fn read_encoding_file<S: Scalar>(path: impl AsRef<Path>) -> Result<Vec<CacheEntry<S>>> {
    let file = std::fs::File::open(path)?;
    parse_encoding_lines(BufReader::new(file))
}

/// Writes entries in the shared encoding file format. Floats are written
/// with round-trip precision.
pub fn write_encoding_file<S: Scalar + fmt::Display>(
    path: impl AsRef<Path>,
    entries: &[CacheEntry<S>],
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for e in entries {
        write!(w, "{}\t{}\t", e.content.id, e.provenance)?;
        for (i, v) in e.encoding.values().iter().enumerate() {
            if i > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
