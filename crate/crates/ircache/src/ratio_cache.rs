//! The edge cache proper: lookup with a two-distance ratio test.
//!
//! d1 is the distance to the nearest stored encoding; d2 is the distance to
//! the nearest of the k retrieved neighbors whose content differs from the
//! top match. The ratio r = d1/d2 against the threshold theta decides hit
//! vs. miss.

use serde::{Deserialize, Serialize};

use crate::encoding::{CacheEntry, ContentLabel, Encoding};
use crate::error::{Error, Result};
use crate::knn::{EntryHandle, KnnIndex, Neighbor};
use crate::scalar::Scalar;

/// Which reading of the threshold comparison to apply.
///
/// `Standard` is Lowe's test: a small ratio means the top match is
/// distinctive, so r <= theta accepts. `PaperLiteral` inverts the
/// comparison (r <= theta rejects); it exists so both readings can be
/// studied side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RatioRule {
    #[default]
    Standard,
    PaperLiteral,
}

impl std::str::FromStr for RatioRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "standard" => Ok(RatioRule::Standard),
            "paper-literal" => Ok(RatioRule::PaperLiteral),
            other => Err(format!("unknown ratio rule {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioConfig {
    /// Acceptance threshold in (0, 1].
    pub theta: f64,
    /// Number of neighbors retrieved per lookup.
    pub k: usize,
    /// Optional hard cap on stored entries; insertion is rejected when full.
    pub capacity: Option<usize>,
    pub rule: RatioRule,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self {
            theta: 0.975,
            k: 5,
            capacity: None,
            rule: RatioRule::Standard,
        }
    }
}

impl RatioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "theta must be in (0, 1], got {}",
                self.theta
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.capacity == Some(0) {
            return Err(Error::InvalidConfig("capacity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Hit,
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissReason {
    EmptyCache,
    RatioRejected,
    NoNeighbors,
}

/// Value snapshot of one lookup, safe to send between threads.
#[derive(Debug, Clone)]
pub struct LookupResult {
    pub decision: Decision,
    pub matched_content: Option<ContentLabel>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub ratio: Option<f64>,
    pub miss_reason: Option<MissReason>,
    pub neighbors: Vec<Neighbor>,
}

impl LookupResult {
    pub fn is_hit(&self) -> bool {
        self.decision == Decision::Hit
    }
}

#[derive(Debug, Clone)]
pub struct RatioCache<S: Scalar> {
    index: KnnIndex<S>,
    config: RatioConfig,
}

impl<S: Scalar> RatioCache<S> {
    pub fn new(dim: usize, config: RatioConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            index: KnnIndex::new(dim),
            config,
        })
    }

    pub fn config(&self) -> &RatioConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index(&self) -> &KnnIndex<S> {
        &self.index
    }

    pub fn lookup(&self, q: &Encoding<S>) -> Result<LookupResult> {
        self.lookup_at(q, self.config.theta)
    }

    /// Lookup with an explicit threshold, reusing the configured k and rule.
    pub fn lookup_at(&self, q: &Encoding<S>, theta: f64) -> Result<LookupResult> {
        let neighbors = self.index.query(q, self.config.k)?;
        if neighbors.is_empty() {
            return Ok(LookupResult {
                decision: Decision::Miss,
                matched_content: None,
                d1: None,
                d2: None,
                ratio: None,
                miss_reason: Some(MissReason::EmptyCache),
                neighbors,
            });
        }
        let top = &neighbors[0];
        let candidate = self
            .index
            .get(top.handle)
            .expect("rank-1 neighbor must resolve")
            .content
            .clone();
        let d1 = top.distance;

        // d2: nearest neighbor among the k whose content differs from the
        // rank-1 content.
        let competing = neighbors.iter().skip(1).find(|n| {
            self.index
                .get(n.handle)
                .map(|e| e.content.id != candidate.id)
                .unwrap_or(false)
        });

        let result = match competing {
            None => {
                // No competing content within the neighborhood: the evidence
                // is unanimous, treat as maximally distinctive.
                LookupResult {
                    decision: Decision::Hit,
                    matched_content: Some(candidate),
                    d1: Some(d1),
                    d2: None,
                    ratio: Some(0.0),
                    miss_reason: None,
                    neighbors,
                }
            }
            Some(n2) => {
                let d2 = n2.distance;
                // Exact duplicates under different contents: defined as 1,
                // decided by theta.
                let ratio = if d1 == 0.0 && d2 == 0.0 { 1.0 } else { d1 / d2 };
                let accept = match self.config.rule {
                    RatioRule::Standard => ratio <= theta,
                    RatioRule::PaperLiteral => ratio > theta,
                };
                if accept {
                    LookupResult {
                        decision: Decision::Hit,
                        matched_content: Some(candidate),
                        d1: Some(d1),
                        d2: Some(d2),
                        ratio: Some(ratio),
                        miss_reason: None,
                        neighbors,
                    }
                } else {
                    LookupResult {
                        decision: Decision::Miss,
                        matched_content: None,
                        d1: Some(d1),
                        d2: Some(d2),
                        ratio: Some(ratio),
                        miss_reason: Some(MissReason::RatioRejected),
                        neighbors,
                    }
                }
            }
        };
        Ok(result)
    }

    pub fn insert_result(&mut self, entry: CacheEntry<S>) -> Result<EntryHandle> {
        if let Some(cap) = self.config.capacity {
            if self.index.len() >= cap {
                return Err(Error::CapacityFull { capacity: cap });
            }
        }
        self.index.insert(entry)
    }

    /// Inserts all entries, or none: every entry is validated against the
    /// cache dimension and the capacity guard before the first insertion.
    pub fn bulk_load(&mut self, entries: Vec<CacheEntry<S>>) -> Result<usize> {
        for e in &entries {
            if e.encoding.dim() != self.index.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.index.dim(),
                    got: e.encoding.dim(),
                });
            }
        }
        if let Some(cap) = self.config.capacity {
            if self.index.len() + entries.len() > cap {
                return Err(Error::CapacityFull { capacity: cap });
            }
        }
        let n = entries.len();
        for e in entries {
            self.index.insert(e)?;
        }
        Ok(n)
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

    fn enc(values: &[f32]) -> Encoding<f32> {
        Encoding::new(values.to_vec()).unwrap()
    }

    #[test]
    fn empty_cache_misses() {
        let cache = RatioCache::<f32>::new(2, RatioConfig::default()).unwrap();
        let r = cache.lookup(&enc(&[0.0, 0.0])).unwrap();
        assert_eq!(r.decision, Decision::Miss);
        assert_eq!(r.miss_reason, Some(MissReason::EmptyCache));
        assert!(r.matched_content.is_none());
    }

    // Places entries on a line so the distances from the origin query are
    // exactly the values named in the case table.
    #[test]
    fn hit_at_ratio_point_nine() {
        let mut cache = RatioCache::new(1, RatioConfig::default()).unwrap();
        cache.insert_result(entry(&[0.9], "A")).unwrap();
        cache.insert_result(entry(&[0.95], "A")).unwrap();
        cache.insert_result(entry(&[1.0], "B")).unwrap();
        let r = cache.lookup(&enc(&[0.0])).unwrap();
        assert_eq!(r.decision, Decision::Hit);
        assert_eq!(r.matched_content.as_ref().unwrap().id, "A");
        assert!((r.d1.unwrap() - 0.9).abs() < 1e-7);
        assert!((r.d2.unwrap() - 1.0).abs() < 1e-7);
        assert!((r.ratio.unwrap() - 0.9).abs() < 1e-7);
    }

    #[test]
    fn miss_at_ratio_point_nine_nine() {
        let mut cache = RatioCache::new(1, RatioConfig::default()).unwrap();
        cache.insert_result(entry(&[0.99], "A")).unwrap();
        cache.insert_result(entry(&[1.0], "B")).unwrap();
        let r = cache.lookup(&enc(&[0.0])).unwrap();
        assert_eq!(r.decision, Decision::Miss);
        assert_eq!(r.miss_reason, Some(MissReason::RatioRejected));
        assert!((r.ratio.unwrap() - 0.99).abs() < 1e-7);
    }

    #[test]
    fn all_same_content_hits_with_ratio_zero() {
        let mut cache = RatioCache::new(1, RatioConfig::default()).unwrap();
        for i in 0..6 {
            cache
                .insert_result(entry(&[1.0 + i as f32 * 0.01], "A"))
                .unwrap();
        }
        let r = cache.lookup(&enc(&[0.0])).unwrap();
        assert_eq!(r.decision, Decision::Hit);
        assert_eq!(r.matched_content.as_ref().unwrap().id, "A");
        assert_eq!(r.ratio, Some(0.0));
        assert!(r.d2.is_none());
    }

    #[test]
    fn exact_match_hits_with_ratio_zero() {
        let mut cache = RatioCache::new(1, RatioConfig::default()).unwrap();
        cache.insert_result(entry(&[0.5], "A")).unwrap();
        cache.insert_result(entry(&[1.5], "B")).unwrap();
        let r = cache.lookup(&enc(&[0.5])).unwrap();
        assert_eq!(r.decision, Decision::Hit);
        assert_eq!(r.d1, Some(0.0));
        assert_eq!(r.ratio, Some(0.0));
        assert_eq!(r.matched_content.as_ref().unwrap().id, "A");
    }

    #[test]
    fn duplicate_encodings_different_content_use_ratio_one() {
        let mut cache = RatioCache::new(1, RatioConfig::default()).unwrap();
        cache.insert_result(entry(&[0.5], "A")).unwrap();
        cache.insert_result(entry(&[0.5], "B")).unwrap();
        let r = cache.lookup(&enc(&[0.5])).unwrap();
        assert_eq!(r.ratio, Some(1.0));
        // theta = 0.975 < 1 rejects; theta = 1 accepts with content A
        // (insertion-order tie-break).
        assert_eq!(r.decision, Decision::Miss);
        let r1 = cache.lookup_at(&enc(&[0.5]), 1.0).unwrap();
        assert_eq!(r1.decision, Decision::Hit);
        assert_eq!(r1.matched_content.as_ref().unwrap().id, "A");
    }

    #[test]
    fn capacity_rejects_second_insert() {
        let config = RatioConfig {
            capacity: Some(1),
            ..RatioConfig::default()
        };
        let mut cache = RatioCache::new(1, config).unwrap();
        cache.insert_result(entry(&[0.0], "A")).unwrap();
        assert!(matches!(
            cache.insert_result(entry(&[1.0], "B")),
            Err(Error::CapacityFull { capacity: 1 })
        ));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn insert_then_lookup_hits_with_that_content() {
        let mut cache = RatioCache::new(2, RatioConfig::default()).unwrap();
        cache.insert_result(entry(&[5.0, 5.0], "other")).unwrap();
        cache.insert_result(entry(&[1.0, 0.0], "mine")).unwrap();
        let r = cache.lookup(&enc(&[1.0, 0.0])).unwrap();
        assert_eq!(r.decision, Decision::Hit);
        assert_eq!(r.matched_content.as_ref().unwrap().id, "mine");
    }

    #[test]
    fn bulk_load_counts_and_is_atomic() {
        let mut cache = RatioCache::new(2, RatioConfig::default()).unwrap();
        assert_eq!(cache.bulk_load(vec![]).unwrap(), 0);
        assert_eq!(cache.len(), 0);

        let entries: Vec<_> = (0..400)
            .map(|i| entry(&[i as f32, 0.0], &format!("p{}", i / 8)))
            .collect();
        assert_eq!(cache.bulk_load(entries).unwrap(), 400);
        assert_eq!(cache.len(), 400);

        // A malformed (wrong-dimension) entry aborts the whole load.
        let bad = vec![entry(&[0.0, 0.0], "x"), entry(&[0.0], "y")];
        assert!(cache.bulk_load(bad).is_err());
        assert_eq!(cache.len(), 400);
    }

    #[test]
    fn theta_one_accepts_everything_nonempty() {
        let config = RatioConfig {
            theta: 1.0,
            ..RatioConfig::default()
        };
        let mut cache = RatioCache::new(1, config).unwrap();
        cache.insert_result(entry(&[3.0], "A")).unwrap();
        cache.insert_result(entry(&[100.0], "B")).unwrap();
        let r = cache.lookup(&enc(&[0.0])).unwrap();
        assert_eq!(r.decision, Decision::Hit);
    }

    #[test]
    fn paper_literal_rule_inverts() {
        let config = RatioConfig {
            rule: RatioRule::PaperLiteral,
            ..RatioConfig::default()
        };
        let mut cache = RatioCache::new(1, config).unwrap();
        cache.insert_result(entry(&[0.9], "A")).unwrap();
        cache.insert_result(entry(&[1.0], "B")).unwrap();
        // r = 0.9 <= 0.975 -> miss under the literal reading.
        let r = cache.lookup(&enc(&[0.0])).unwrap();
        assert_eq!(r.decision, Decision::Miss);
        // r = 0.99 > 0.975 -> hit under the literal reading.
        let mut cache2 = RatioCache::new(
            1,
            RatioConfig {
                rule: RatioRule::PaperLiteral,
                ..RatioConfig::default()
            },
        )
        .unwrap();
        cache2.insert_result(entry(&[0.99], "A")).unwrap();
        cache2.insert_result(entry(&[1.0], "B")).unwrap();
        let r2 = cache2.lookup(&enc(&[0.0])).unwrap();
        assert_eq!(r2.decision, Decision::Hit);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(RatioCache::<f32>::new(
            1,
            RatioConfig {
                theta: 0.0,
                ..RatioConfig::default()
            }
        )
        .is_err());
        assert!(RatioCache::<f32>::new(
            1,
            RatioConfig {
                theta: 1.5,
                ..RatioConfig::default()
            }
        )
        .is_err());
        assert!(RatioCache::<f32>::new(
            1,
            RatioConfig {
                k: 0,
                ..RatioConfig::default()
            }
        )
        .is_err());
    }

    #[test]
    fn ratio_bound_and_determinism_on_random_caches() {
        use rand::Rng;
        let mut rng = crate::rng::SeededRng::new(11);
        for _ in 0..50 {
            let mut cache = RatioCache::new(4, RatioConfig::default()).unwrap();
            let n = rng.gen_range(1..40);
            for i in 0..n {
                let v: Vec<f32> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                cache
                    .insert_result(entry(&v, &format!("c{}", i % 7)))
                    .unwrap();
            }
            let q = Encoding::new((0..4).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap();
            let a = cache.lookup(&q).unwrap();
            let b = cache.lookup(&q).unwrap();
            assert_eq!(a.decision, b.decision);
            assert_eq!(a.ratio, b.ratio);
            if let (Some(d1), Some(d2)) = (a.d1, a.d2) {
                assert!(d1 <= d2);
                let r = a.ratio.unwrap();
                assert!((0.0..=1.0).contains(&r));
                assert_eq!(r, d1 / d2);
            }
        }
    }
}
