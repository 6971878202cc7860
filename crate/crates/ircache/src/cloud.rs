//! Emulated cloud retrieval: a near-ideal resolver over the full corpus.
//!
//! The cloud runs the same lookup mechanism as the edge cache but never
//! misses: on ratio rejection it still answers with the rank-1 content.
//! In oracle mode the corpus contains the request encodings themselves, so
//! the top match sits at distance zero and the answer is the ground truth.

use crate::encoding::{CacheEntry, ContentLabel, Encoding};
use crate::error::{Error, Result};
use crate::knn::EntryHandle;
use crate::ratio_cache::{Decision, RatioCache, RatioConfig};
use crate::scalar::Scalar;

/// Correctness-relevant trace of one cloud resolution.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub content: ContentLabel,
    pub d1: f64,
    pub ratio: Option<f64>,
    /// False when the ratio test rejected and the rank-1 content was
    /// returned anyway.
    pub ratio_accepted: bool,
}

#[derive(Debug, Clone)]
pub struct CloudStore<S: Scalar> {
    cache: RatioCache<S>,
}

impl<S: Scalar> CloudStore<S> {
    /// The cloud's own threshold defaults to 1.0: with r in [0, 1] the test
    /// accepts everything and the rank-1 match wins.
    pub fn cloud_config() -> RatioConfig {
        RatioConfig {
            theta: 1.0,
            ..RatioConfig::default()
        }
    }

    pub fn new(dim: usize, config: RatioConfig) -> Result<Self> {
        Ok(Self {
            cache: RatioCache::new(dim, config)?,
        })
    }

    pub fn from_entries(dim: usize, config: RatioConfig, entries: Vec<CacheEntry<S>>) -> Result<Self> {
        let mut store = Self::new(dim, config)?;
        store.cache.bulk_load(entries)?;
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cache.dim()
    }

    pub fn load(&mut self, entries: Vec<CacheEntry<S>>) -> Result<usize> {
        self.cache.bulk_load(entries)
    }

    pub fn insert(&mut self, entry: CacheEntry<S>) -> Result<EntryHandle> {
        self.cache.insert_result(entry)
    }

    /// Always returns some content for a non-empty store.
    pub fn resolve(&self, q: &Encoding<S>) -> Result<Resolution> {
        if self.cache.is_empty() {
            return Err(Error::EmptyStore);
        }
        let lookup = self.cache.lookup(q)?;
        match lookup.decision {
            Decision::Hit => Ok(Resolution {
                content: lookup.matched_content.expect("hit carries content"),
                d1: lookup.d1.unwrap_or(0.0),
                ratio: lookup.ratio,
                ratio_accepted: true,
            }),
            Decision::Miss => {
                let top = lookup
                    .neighbors
                    .first()
                    .expect("non-empty store yields neighbors");
                let content = self
                    .cache
                    .index()
                    .get(top.handle)
                    .expect("rank-1 neighbor must resolve")
                    .content
                    .clone();
                Ok(Resolution {
                    content,
                    d1: top.distance,
                    ratio: lookup.ratio,
                    ratio_accepted: false,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Provenance;

    fn entry(values: &[f32], id: &str) -> CacheEntry<f32> {
        CacheEntry::new(
            Encoding::new(values.to_vec()).unwrap(),
            ContentLabel::from_id(id).unwrap(),
            Provenance::Ingested,
        )
    }

    #[test]
    fn empty_store_errors() {
        let store = CloudStore::<f32>::new(2, CloudStore::<f32>::cloud_config()).unwrap();
        assert!(matches!(
            store.resolve(&Encoding::new(vec![0.0, 0.0]).unwrap()),
            Err(Error::EmptyStore)
        ));
    }

    #[test]
    fn oracle_mode_returns_own_label_at_distance_zero() {
        let mut store = CloudStore::new(2, CloudStore::<f32>::cloud_config()).unwrap();
        store.load(vec![entry(&[5.0, 5.0], "far")]).unwrap();
        // request encoding present in the store
        store.insert(entry(&[1.0, 2.0], "truth")).unwrap();
        let r = store
            .resolve(&Encoding::new(vec![1.0, 2.0]).unwrap())
            .unwrap();
        assert_eq!(r.content.id, "truth");
        assert_eq!(r.d1, 0.0);
    }

    #[test]
    fn non_oracle_mode_finds_nearest_place() {
        // Small synthetic corpus verified by brute force: place P's samples
        // are nearest to a query near P.
        use rand::Rng;
        let mut rng = crate::rng::SeededRng::new(3);
        let dim = 8;
        let centers: Vec<Vec<f32>> = (0..5)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
            .collect();
        let mut entries = Vec::new();
        for (p, c) in centers.iter().enumerate() {
            for _ in 0..4 {
                let sample: Vec<f32> = c
                    .iter()
                    .map(|v| v + rng.gen_range(-0.05f32..0.05))
                    .collect();
                entries.push(entry(&sample, &format!("P{p}")));
            }
        }
        let store =
            CloudStore::from_entries(dim, CloudStore::<f32>::cloud_config(), entries.clone())
                .unwrap();
        for (p, c) in centers.iter().enumerate() {
            let qv: Vec<f32> = c.iter().map(|v| v + rng.gen_range(-0.05f32..0.05)).collect();
            let q = Encoding::new(qv).unwrap();
            // brute-force check that the nearest entry really is place p
            let nearest = entries
                .iter()
                .min_by(|a, b| {
                    crate::distance::euclidean_distance(&q, &a.encoding)
                        .unwrap()
                        .total_cmp(&crate::distance::euclidean_distance(&q, &b.encoding).unwrap())
                })
                .unwrap();
            assert_eq!(nearest.content.id, format!("P{p}"));
            let r = store.resolve(&q).unwrap();
            assert_eq!(r.content.id, format!("P{p}"));
        }
    }

    #[test]
    fn resolve_is_deterministic() {
        let mut store = CloudStore::new(1, CloudStore::<f32>::cloud_config()).unwrap();
        store
            .load(vec![entry(&[0.3], "a"), entry(&[0.6], "b")])
            .unwrap();
        let q = Encoding::new(vec![0.4]).unwrap();
        let a = store.resolve(&q).unwrap();
        let b = store.resolve(&q).unwrap();
        assert_eq!(a.content, b.content);
        assert_eq!(a.d1, b.d1);
    }
}
