//! Deterministic latency model of the edge-to-cloud path.
//!
//! A hit costs only the edge lookup. A miss additionally pays one RTT, the
//! payload transfer at the measured throughput, and the cloud processing
//! time. No TCP dynamics are modeled.

use crate::error::{Error, Result};
use crate::ratio_cache::Decision;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkProfile {
    pub name: String,
    pub rtt_ms: f64,
    pub throughput_bps: f64,
}

impl NetworkProfile {
    pub fn new(name: impl Into<String>, rtt_ms: f64, throughput_bps: f64) -> Result<Self> {
        if rtt_ms.is_nan() || rtt_ms < 0.0 {
            return Err(Error::InvalidConfig("rtt must be nonnegative".into()));
        }
        if throughput_bps.is_nan() || throughput_bps <= 0.0 {
            return Err(Error::InvalidConfig("throughput must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            rtt_ms,
            throughput_bps,
        })
    }

    /// us-east-2: 145.65 ms RTT, 86.9 Mbit/s.
    pub fn ohio() -> Self {
        Self::new("ohio", 145.65, 86.9e6).unwrap()
    }

    /// sa-east-1: 12.39 ms RTT, 93.4 Mbit/s.
    pub fn saopaulo() -> Self {
        Self::new("saopaulo", 12.39, 93.4e6).unwrap()
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "ohio" => Some(Self::ohio()),
            "saopaulo" => Some(Self::saopaulo()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyParams {
    pub edge_lookup_ms: f64,
    pub cloud_proc_ms: f64,
    pub payload_bytes: u64,
}

impl Default for LatencyParams {
    fn default() -> Self {
        Self {
            edge_lookup_ms: 0.0,
            cloud_proc_ms: 0.0,
            payload_bytes: 65536,
        }
    }
}

/// Latency of one request in milliseconds.
pub fn request_latency(outcome: Decision, profile: &NetworkProfile, params: &LatencyParams) -> f64 {
    match outcome {
        Decision::Hit => params.edge_lookup_ms,
        Decision::Miss => {
            params.edge_lookup_ms
                + profile.rtt_ms
                + (params.payload_bytes as f64 * 8.0 / profile.throughput_bps) * 1000.0
                + params.cloud_proc_ms
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hit_costs_only_edge_lookup() {
        let params = LatencyParams {
            edge_lookup_ms: 2.0,
            ..LatencyParams::default()
        };
        assert_eq!(
            request_latency(Decision::Hit, &NetworkProfile::ohio(), &params),
            2.0
        );
        assert_eq!(
            request_latency(Decision::Hit, &NetworkProfile::saopaulo(), &params),
            2.0
        );
    }

    #[test]
    fn sao_paulo_miss_arithmetic() {
        let params = LatencyParams::default();
        let got = request_latency(Decision::Miss, &NetworkProfile::saopaulo(), &params);
        // 12.39 + 524288 / 93.4e6 * 1000
        let want = 12.39 + 65536.0 * 8.0 / 93.4e6 * 1000.0;
        assert!((got - want).abs() < 1e-12);
        assert!((got - 18.00).abs() < 0.02);
    }

    #[test]
    fn ohio_miss_arithmetic() {
        let params = LatencyParams::default();
        let got = request_latency(Decision::Miss, &NetworkProfile::ohio(), &params);
        assert!((got - 151.68).abs() < 0.02);
    }

    #[test]
    fn miss_exceeds_hit_when_rtt_positive() {
        for profile in [NetworkProfile::ohio(), NetworkProfile::saopaulo()] {
            let params = LatencyParams {
                edge_lookup_ms: 1.0,
                ..LatencyParams::default()
            };
            assert!(
                request_latency(Decision::Miss, &profile, &params)
                    > request_latency(Decision::Hit, &profile, &params)
            );
        }
    }

    #[test]
    fn monotonicity_in_profile_parameters() {
        let params = LatencyParams::default();
        let base = NetworkProfile::new("base", 50.0, 50e6).unwrap();
        let more_rtt = NetworkProfile::new("r", 60.0, 50e6).unwrap();
        let more_tp = NetworkProfile::new("t", 50.0, 100e6).unwrap();
        let l = |p: &NetworkProfile| request_latency(Decision::Miss, p, &params);
        assert!(l(&more_rtt) > l(&base));
        assert!(l(&more_tp) < l(&base));

        let bigger_payload = LatencyParams {
            payload_bytes: 131072,
            ..LatencyParams::default()
        };
        assert!(request_latency(Decision::Miss, &base, &bigger_payload) > l(&base));
    }

    #[test]
    fn mean_latency_is_linear_in_hit_rate() {
        let params = LatencyParams {
            edge_lookup_ms: 1.5,
            ..LatencyParams::default()
        };
        let profile = NetworkProfile::saopaulo();
        let outcomes: Vec<Decision> = (0..100)
            .map(|i| if i % 3 == 0 { Decision::Hit } else { Decision::Miss })
            .collect();
        let mean = outcomes
            .iter()
            .map(|o| request_latency(*o, &profile, &params))
            .sum::<f64>()
            / outcomes.len() as f64;
        let hit_rate = outcomes.iter().filter(|o| **o == Decision::Hit).count() as f64 / 100.0;
        let l_hit = request_latency(Decision::Hit, &profile, &params);
        let l_miss = request_latency(Decision::Miss, &profile, &params);
        assert!((mean - (hit_rate * l_hit + (1.0 - hit_rate) * l_miss)).abs() < 1e-9);
    }
}
