//! Desk-scale synthetic stand-in for the dataset + encoder + translation
//! pipeline: route segmentation into places, day/night encoding generation,
//! and a parametric night-to-day translation operator.
//!
//! The synthetic model places each location's visual identity on the unit
//! sphere. Night encodings live on a shifted manifold (a seeded signed
//! coordinate permutation applied to a fraction of the coordinates), and
//! translation is the exact inverse of that map plus a residual noise term.
//! Noise vectors have expected norm `sigma` regardless of dimension, so the
//! sigma defaults behave identically at any deployment dimension.

use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::encoding::{CacheEntry, ContentLabel, Encoding, Provenance};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Locally planar GPS sample in meters; capture order is the sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsPoint {
    pub x: f64,
    pub y: f64,
    pub sequence: usize,
}

impl GpsPoint {
    pub fn new(x: f64, y: f64, sequence: usize) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite { index: sequence });
        }
        Ok(Self { x, y, sequence })
    }
}

/// Segment index of each point: floor(cumulative arc length / segment_length).
pub fn segment_indices(points: &[GpsPoint], segment_length: f64) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("route must have at least one point".into()));
    }
    // NaN-safe: rejects NaN along with nonpositive lengths
    if segment_length.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidConfig("segment length must be positive".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    let mut cum = 0.0f64;
    out.push(0);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        cum += ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        out.push((cum / segment_length).floor() as usize);
    }
    Ok(out)
}

/// Maps each point to a stable place id ordered along the route.
pub fn segment_route(points: &[GpsPoint], segment_length: f64) -> Result<Vec<String>> {
    Ok(segment_indices(points, segment_length)?
        .into_iter()
        .map(place_id_for_segment)
        .collect())
}

pub fn place_id_for_segment(index: usize) -> String {
    format!("seg-{index:06}")
}

/// Route file: one `<x>\t<y>` pair per line in meters, capture order = line
/// order. `#`-prefixed comment lines ignored.
pub fn read_route_file(path: impl AsRef<Path>) -> Result<Vec<GpsPoint>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split('\t');
        let parse = |tok: Option<&str>| -> Result<f64> {
            tok.and_then(|t| t.trim().parse::<f64>().ok())
                .ok_or(Error::Parse {
                    line: lineno + 1,
                    message: "expected `<x>\\t<y>`".into(),
                })
        };
        let x = parse(fields.next())?;
        let y = parse(fields.next())?;
        out.push(GpsPoint::new(x, y, out.len())?);
    }
    Ok(out)
}

/// Synthetic visual identity of one place: a unit-norm centroid.
#[derive(Debug, Clone)]
pub struct PlaceModel {
    pub place_id: String,
    pub centroid: Vec<f64>,
}

impl PlaceModel {
    pub fn random(place_id: String, dim: usize, rng: &mut SeededRng) -> Self {
        let mut centroid: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut centroid);
        Self { place_id, centroid }
    }
}

/// Parameters of the synthetic day/night domain model.
///
/// `sigma_*` are expected noise-vector norms. `shift_fraction` is the share
/// of coordinates moved by the night-domain map; the calibrated defaults
/// place night encodings far enough from the day manifold that raw night
/// entries rarely survive the ratio test while translated entries almost
/// always do.
#[derive(Debug, Clone)]
pub struct DomainParams {
    pub dim: usize,
    pub sigma_day: f64,
    pub sigma_night: f64,
    pub sigma_gan: f64,
    pub shift_fraction: f64,
    pub seed: u64,
}

impl Default for DomainParams {
    fn default() -> Self {
        Self {
            dim: 1024,
            sigma_day: 0.15,
            sigma_night: 1.0,
            sigma_gan: 0.25,
            shift_fraction: 0.9,
            seed: 0,
        }
    }
}

impl DomainParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        for (name, s) in [
            ("sigma_day", self.sigma_day),
            ("sigma_night", self.sigma_night),
            ("sigma_gan", self.sigma_gan),
        ] {
            if s.is_nan() || s < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be nonnegative")));
            }
        }
        if !(0.0..=1.0).contains(&self.shift_fraction) {
            return Err(Error::InvalidConfig(
                "shift_fraction must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Fixed orthogonal map of the encoding space: a signed permutation of a
/// seeded subset of coordinates. Exactly norm-preserving and exactly
/// invertible.
#[derive(Debug, Clone)]
pub struct DomainShift {
    // out[i] = sign[i] * in[perm[i]]
    perm: Vec<u32>,
    signs: Vec<f64>,
    inv: Vec<u32>,
}

impl DomainShift {
    pub fn new(dim: usize, fraction: f64, rng: &mut SeededRng) -> Self {
        let n_shift = (fraction * dim as f64).round() as usize;
        let selected = sample(rng, dim, n_shift.min(dim)).into_vec();
        let mut shuffled = selected.clone();
        // Fisher-Yates over the selected positions only.
        for i in (1..shuffled.len()).rev() {
            let j = rng.gen_range(0..=i);
            shuffled.swap(i, j);
        }
        let mut perm: Vec<u32> = (0..dim as u32).collect();
        let mut signs = vec![1.0f64; dim];
        for (slot, src) in selected.iter().zip(&shuffled) {
            perm[*slot] = *src as u32;
            signs[*slot] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let mut inv = vec![0u32; dim];
        for (i, p) in perm.iter().enumerate() {
            inv[*p as usize] = i as u32;
        }
        Self { perm, signs, inv }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|i| self.signs[i] * v[self.perm[i] as usize])
            .collect()
    }

    pub fn invert(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                let slot = self.inv[i] as usize;
                self.signs[slot] * v[slot]
            })
            .collect()
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// The domain model proper: parameters plus the seeded shift map.
#[derive(Debug, Clone)]
pub struct DomainModel {
    params: DomainParams,
    shift: DomainShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Night,
    Gan,
    NoCache,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Night => "night",
            Scenario::Gan => "gan",
            Scenario::NoCache => "nocache",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "night" => Ok(Scenario::Night),
            "gan" => Ok(Scenario::Gan),
            "nocache" => Ok(Scenario::NoCache),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

/// One synthetic request with its ground truth.
#[derive(Debug, Clone)]
pub struct Request<S: Scalar> {
    pub encoding: Encoding<S>,
    pub ground_truth: String,
    pub place_cached: bool,
}

/// Everything one experimental round needs.
#[derive(Debug, Clone)]
pub struct ScenarioData<S: Scalar> {
    pub cache_entries: Vec<CacheEntry<S>>,
    pub cloud_corpus: Vec<CacheEntry<S>>,
    pub requests: Vec<Request<S>>,
    pub cached_place_ids: Vec<String>,
}

impl DomainModel {
    pub fn new(params: DomainParams) -> Result<Self> {
        params.validate()?;
        let mut shift_rng = SeededRng::substream(params.seed, u64::MAX);
        let shift = DomainShift::new(params.dim, params.shift_fraction, &mut shift_rng);
        Ok(Self { params, shift })
    }

    pub fn params(&self) -> &DomainParams {
        &self.params
    }

    pub fn shift(&self) -> &DomainShift {
        &self.shift
    }

    fn noisy<S: Scalar>(&self, base: &[f64], sigma: f64, rng: &mut SeededRng) -> Encoding<S> {
        let scale = sigma / (self.params.dim as f64).sqrt();
        let mut v: Vec<f64> = base
            .iter()
            .map(|x| x + scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        normalize(&mut v);
        Encoding::new(v.into_iter().map(S::of_f64).collect())
            .expect("normalized vector is finite")
    }

    /// Day-domain sample: normalize(centroid + sigma_day * noise).
    pub fn gen_day<S: Scalar>(&self, place: &PlaceModel, rng: &mut SeededRng) -> Encoding<S> {
        self.noisy(&place.centroid, self.params.sigma_day, rng)
    }

    /// Night-domain sample: normalize(shift(centroid) + sigma_night * noise).
    pub fn gen_night<S: Scalar>(&self, place: &PlaceModel, rng: &mut SeededRng) -> Encoding<S> {
        let shifted = self.shift.apply(&place.centroid);
        self.noisy(&shifted, self.params.sigma_night, rng)
    }

    /// Imperfect inverse of the night shift:
    /// normalize(shift⁻¹(e) + sigma_gan * noise).
    pub fn translate_to_day<S: Scalar>(
        &self,
        e: &Encoding<S>,
        rng: &mut SeededRng,
    ) -> Result<Encoding<S>> {
        if e.dim() != self.params.dim {
            return Err(Error::DimensionMismatch {
                expected: self.params.dim,
                got: e.dim(),
            });
        }
        let as_f64: Vec<f64> = e.values().iter().map(|v| v.as_f64()).collect();
        let back = self.shift.invert(&as_f64);
        Ok(self.noisy(&back, self.params.sigma_gan, rng))
    }

    /// Builds one experimental round: cache entries, cloud corpus, and the
    /// request set with ground truth.
    ///
    /// Cached places are a uniform sample of `round(cached_fraction *
    /// n_places)` places. The cloud corpus holds day and night samples for
    /// every place; with `oracle` set it additionally holds the request
    /// encodings themselves under their ground-truth labels.
    #[allow(clippy::too_many_arguments)]
    pub fn build_scenario<S: Scalar>(
        &self,
        n_places: usize,
        cached_fraction: f64,
        encodings_per_place: usize,
        n_requests: usize,
        scenario: Scenario,
        oracle: bool,
        rng: &mut SeededRng,
    ) -> Result<ScenarioData<S>> {
        if !(cached_fraction > 0.0 && cached_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "cached_fraction must be in (0, 1]".into(),
            ));
        }
        if n_places == 0 || encodings_per_place == 0 || n_requests == 0 {
            return Err(Error::InvalidConfig("counts must be positive".into()));
        }

        let places: Vec<PlaceModel> = (0..n_places)
            .map(|i| PlaceModel::random(format!("place-{i:04}"), self.params.dim, rng))
            .collect();

        let n_cached = (cached_fraction * n_places as f64).round() as usize;
        let mut cached_idx = sample(rng, n_places, n_cached).into_vec();
        cached_idx.sort_unstable();
        let cached_flags = {
            let mut flags = vec![false; n_places];
            for &i in &cached_idx {
                flags[i] = true;
            }
            flags
        };

        // Night and day samples for every place; the night samples double as
        // the raw material for the cache.
        let mut night_samples: Vec<Vec<Encoding<S>>> = Vec::with_capacity(n_places);
        let mut day_samples: Vec<Vec<Encoding<S>>> = Vec::with_capacity(n_places);
        for place in &places {
            night_samples.push(
                (0..encodings_per_place)
                    .map(|_| self.gen_night(place, rng))
                    .collect(),
            );
            day_samples.push(
                (0..encodings_per_place)
                    .map(|_| self.gen_day(place, rng))
                    .collect(),
            );
        }

        let mut cache_entries = Vec::new();
        if scenario != Scenario::NoCache {
            for &i in &cached_idx {
                let label = ContentLabel::from_id(places[i].place_id.clone())?;
                for night in &night_samples[i] {
                    let entry = match scenario {
                        Scenario::Night => {
                            CacheEntry::new(night.clone(), label.clone(), Provenance::NightReal)
                        }
                        Scenario::Gan => CacheEntry::new(
                            self.translate_to_day(night, rng)?,
                            label.clone(),
                            Provenance::SyntheticDay,
                        ),
                        Scenario::NoCache => unreachable!(),
                    };
                    cache_entries.push(entry);
                }
            }
        }

        let mut cloud_corpus = Vec::new();
        for (i, place) in places.iter().enumerate() {
            let label = ContentLabel::from_id(place.place_id.clone())?;
            for day in &day_samples[i] {
                cloud_corpus.push(CacheEntry::new(
                    day.clone(),
                    label.clone(),
                    Provenance::Ingested,
                ));
            }
            for night in &night_samples[i] {
                cloud_corpus.push(CacheEntry::new(
                    night.clone(),
                    label.clone(),
                    Provenance::NightReal,
                ));
            }
        }

        let mut requests = Vec::with_capacity(n_requests);
        for _ in 0..n_requests {
            let i = rng.gen_range(0..n_places);
            let encoding = self.gen_day::<S>(&places[i], rng);
            if oracle {
                cloud_corpus.push(CacheEntry::new(
                    encoding.clone(),
                    ContentLabel::from_id(places[i].place_id.clone())?,
                    Provenance::Ingested,
                ));
            }
            requests.push(Request {
                encoding,
                ground_truth: places[i].place_id.clone(),
                place_cached: cached_flags[i],
            });
        }

        Ok(ScenarioData {
            cache_entries,
            cloud_corpus,
            requests,
            cached_place_ids: cached_idx
                .iter()
                .map(|&i| places[i].place_id.clone())
                .collect(),
        })
    }
}

/// Reads precomputed encodings from the shared encoding file format.
pub fn ingest_encodings<S: Scalar>(path: impl AsRef<Path>) -> Result<Vec<CacheEntry<S>>> {
    crate::encoding::read_encoding_file(path)
}
