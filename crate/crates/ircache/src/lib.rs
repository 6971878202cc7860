//! Similarity-keyed edge cache for image-recognition offloading.
//!
//! An edge server stores encoding vectors of previously recognized images
//! together with their content. Incoming queries are matched against the
//! store with an exact k-nearest-neighbor search under Euclidean distance,
//! and a two-distance ratio test decides whether the best match is
//! trustworthy (cache hit) or the request must be offloaded to a cloud
//! resolver (cache miss).
//!
//! The crate also ships a synthetic day/night domain model, a deterministic
//! network latency model, a line-delimited JSON edge/cloud service pair, and
//! an experiment harness that sweeps the ratio threshold, the cache
//! coverage, and the resulting request latency.
//!
//! Core math is generic over the scalar type (`f32`/`f64`); the type
//! aliases at the crate root fix the deployment scalar to `f32` with
//! distance accumulation in `f64`.

pub mod cloud;
pub mod cloud_service;
pub mod distance;
pub mod domain;
pub mod edge;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod knn;
pub mod netmodel;
pub mod protocol;
pub mod ratio_cache;
pub mod rng;
pub mod scalar;
pub mod service;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Deployment scalar: encodings are stored in 32-bit floats, distances are
/// accumulated in 64-bit.
pub type Encoding = encoding::Encoding<f32>;
pub type CacheEntry = encoding::CacheEntry<f32>;
pub type KnnIndex = knn::KnnIndex<f32>;
pub type RatioCache = ratio_cache::RatioCache<f32>;
pub type CloudStore = cloud::CloudStore<f32>;
