//! Exact k-nearest-neighbor search over cache entries.
//!
//! A linear scan with a bounded max-heap of size k. Ties on distance break
//! toward the lower insertion sequence number, so results are fully
//! deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::encoding::{CacheEntry, Encoding};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stable handle to an inserted entry (its insertion sequence number).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntryHandle(pub u64);

/// One query result: handle, distance, and 1-based rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub handle: EntryHandle,
    pub distance: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct KnnIndex<S: Scalar> {
    dim: usize,
    entries: Vec<(EntryHandle, CacheEntry<S>)>,
    next_seq: u64,
}

// Heap element ordered so the worst candidate (largest distance, then
// largest sequence) sits on top.
struct Candidate {
    dist: f64,
    seq: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.seq == other.seq
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Distances are finite: inputs carry no NaN/Inf.
        self.dist
            .total_cmp(&other.dist)
            .then(self.seq.cmp(&other.seq))
    }
}

impl<S: Scalar> KnnIndex<S> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
            next_seq: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, entry: CacheEntry<S>) -> Result<EntryHandle> {
        if entry.encoding.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: entry.encoding.dim(),
            });
        }
        let handle = EntryHandle(self.next_seq);
        self.next_seq += 1;
        self.entries.push((handle, entry));
        Ok(handle)
    }

    pub fn remove(&mut self, handle: EntryHandle) -> bool {
        match self.entries.iter().position(|(h, _)| *h == handle) {
            Some(pos) => {
                self.entries.remove(pos);
                true
            }
            None => false,
        }
    }

    pub fn get(&self, handle: EntryHandle) -> Option<&CacheEntry<S>> {
        self.entries
            .iter()
            .find(|(h, _)| *h == handle)
            .map(|(_, e)| e)
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntryHandle, &CacheEntry<S>)> {
        self.entries.iter().map(|(h, e)| (*h, e))
    }

    /// The min(k, len) entries closest to `q`, sorted by ascending distance
    /// with ranks 1..m. Equal distances rank by insertion order.
    pub fn query(&self, q: &Encoding<S>, k: usize) -> Result<Vec<Neighbor>> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.dim(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for (handle, entry) in &self.entries {
            let dist = crate::distance::squared_distance(q.values(), entry.encoding.values());
            if heap.len() < k {
                heap.push(Candidate {
                    dist,
                    seq: handle.0,
                });
            } else if let Some(worst) = heap.peek() {
                let cand = Candidate {
                    dist,
                    seq: handle.0,
                };
                if cand.cmp(worst) == Ordering::Less {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        let mut sorted = heap.into_vec();
        sorted.sort_unstable();
        Ok(sorted
            .into_iter()
            .enumerate()
            .map(|(i, c)| Neighbor {
                handle: EntryHandle(c.seq),
                distance: c.dist.sqrt(),
                rank: i + 1,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{ContentLabel, Provenance};
    use rand::Rng;

    fn entry(values: &[f32], id: &str) -> CacheEntry<f32> {
        CacheEntry::new(
            Encoding::new(values.to_vec()).unwrap(),
            ContentLabel::from_id(id).unwrap(),
            Provenance::Ingested,
        )
    }

    #[test]
    fn identity_query_after_insert() {
        let mut idx = KnnIndex::new(2);
        idx.insert(entry(&[1.0, 2.0], "a")).unwrap();
        let hits = idx.query(&Encoding::new(vec![1.0, 2.0]).unwrap(), 3).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].rank, 1);
        assert_eq!(hits[0].distance, 0.0);
    }

    #[test]
    fn size_counts_inserts() {
        let mut idx = KnnIndex::new(1);
        for i in 0..100 {
            idx.insert(entry(&[i as f32], "a")).unwrap();
        }
        assert_eq!(idx.len(), 100);
    }

    #[test]
    fn removed_entry_is_absent() {
        let mut idx = KnnIndex::new(1);
        let h = idx.insert(entry(&[0.0], "a")).unwrap();
        idx.insert(entry(&[10.0], "b")).unwrap();
        assert!(idx.remove(h));
        let hits = idx.query(&Encoding::new(vec![0.0]).unwrap(), 5).unwrap();
        assert!(hits.iter().all(|n| n.handle != h));
        assert!(!idx.remove(h));
    }

    #[test]
    fn empty_index_returns_empty() {
        let idx = KnnIndex::<f32>::new(3);
        let hits = idx
            .query(&Encoding::new(vec![0.0, 0.0, 0.0]).unwrap(), 5)
            .unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn one_dimensional_ordering() {
        let mut idx = KnnIndex::new(2);
        let a = idx.insert(entry(&[0.0, 0.0], "A")).unwrap();
        let b = idx.insert(entry(&[1.0, 0.0], "B")).unwrap();
        idx.insert(entry(&[5.0, 0.0], "C")).unwrap();
        let hits = idx
            .query(&Encoding::new(vec![0.4, 0.0]).unwrap(), 2)
            .unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].handle, a);
        assert!((hits[0].distance - 0.4).abs() < 1e-7);
        assert_eq!(hits[1].handle, b);
        assert!((hits[1].distance - 0.6).abs() < 1e-7);
    }

    #[test]
    fn dimension_mismatch_on_insert_and_query() {
        let mut idx = KnnIndex::new(2);
        assert!(idx.insert(entry(&[1.0], "a")).is_err());
        assert!(idx.query(&Encoding::new(vec![1.0]).unwrap(), 1).is_err());
    }

    /// Brute-force oracle: full sort of all entries by (distance, seq).
    pub(crate) fn brute_force(
        idx: &KnnIndex<f32>,
        q: &Encoding<f32>,
        k: usize,
    ) -> Vec<(EntryHandle, f64)> {
        let mut all: Vec<(EntryHandle, f64)> = idx
            .iter()
            .map(|(h, e)| {
                (
                    h,
                    crate::distance::euclidean_distance(q, &e.encoding).unwrap(),
                )
            })
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn matches_brute_force_on_random_data() {
        let mut rng = crate::rng::SeededRng::new(5);
        let dim = 8;
        let mut idx = KnnIndex::new(dim);
        for i in 0..200 {
            let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            idx.insert(entry(&v, &format!("c{}", i % 17))).unwrap();
        }
        for _ in 0..50 {
            let q =
                Encoding::new((0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap();
            let got = idx.query(&q, 5).unwrap();
            let want = brute_force(&idx, &q, 5);
            assert_eq!(got.len(), want.len());
            for (n, (h, d)) in got.iter().zip(&want) {
                assert_eq!(n.handle, *h);
                assert_eq!(n.distance, *d);
            }
        }
    }

    #[test]
    fn distances_nondecreasing_and_full_k_returns_all() {
        let mut rng = crate::rng::SeededRng::new(9);
        let mut idx = KnnIndex::new(4);
        let mut handles = Vec::new();
        for _ in 0..64 {
            let v: Vec<f32> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            handles.push(idx.insert(entry(&v, "x")).unwrap());
        }
        let q = Encoding::new(vec![0.0; 4]).unwrap();
        let hits = idx.query(&q, idx.len()).unwrap();
        assert_eq!(hits.len(), 64);
        for w in hits.windows(2) {
            assert!(w[0].distance <= w[1].distance);
        }
        let mut seen: Vec<_> = hits.iter().map(|n| n.handle).collect();
        seen.sort();
        handles.sort();
        assert_eq!(seen, handles);
    }

    #[test]
    fn ties_break_by_insertion_order() {
        let mut idx = KnnIndex::new(1);
        let a = idx.insert(entry(&[1.0], "a")).unwrap();
        let b = idx.insert(entry(&[-1.0], "b")).unwrap();
        let hits = idx.query(&Encoding::new(vec![0.0]).unwrap(), 2).unwrap();
        assert_eq!(hits[0].handle, a);
        assert_eq!(hits[1].handle, b);
    }
}
