//! Class A confirmed-uplink/ACK exchange and channel hopping.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{stream_rng, SimConfig, Stream};
use crate::error::{Error, Result};
use crate::model::{AlignedProbes, RssiTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Alice to Bob; Bob measures.
    Uplink,
    /// Bob's ACK back to Alice; Alice measures.
    Downlink,
}

/// One frame on the air. `rssi_dbm` is what the receiver recorded, absent
/// when the frame was lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkEvent {
    pub seq_index: u64,
    pub direction: Direction,
    pub freq_hz: u64,
    pub rssi_dbm: Option<i32>,
    pub delivered: bool,
}

/// Carrier frequency of every uplink. With hopping off every frame uses the
/// first channel of the plan.
pub fn hop_sequence(cfg: &SimConfig) -> Result<Vec<u64>> {
    let plan = &cfg.channel_plan;
    if plan.is_empty() {
        return Err(Error::Config("channel_plan is empty".into()));
    }
    if !cfg.hopping {
        return Ok(vec![plan[0]; cfg.n_probes]);
    }
    let mut rng = stream_rng(cfg.seed, Stream::Hop);
    Ok((0..cfg.n_probes)
        .map(|_| plan[rng.random_range(0..plan.len())])
        .collect())
}

/// Pairs each delivered uplink with its delivered ACK. The uplink RSSI is
/// Bob's sample, the ACK RSSI Alice's. An ACK on a different carrier than
/// its uplink breaks reciprocity and is reported as a protocol violation.
pub fn pair_uplink_ack(events: &[LinkEvent]) -> Result<AlignedProbes> {
    let mut uplinks: HashMap<u64, (u64, i32)> = HashMap::new();
    let mut pairs: Vec<(u64, i32, i32)> = Vec::new();
    let mut violations = Vec::new();
    for ev in events {
        let Some(rssi) = ev.rssi_dbm.filter(|_| ev.delivered) else {
            continue;
        };
        match ev.direction {
            Direction::Uplink => {
                uplinks.insert(ev.seq_index, (ev.freq_hz, rssi));
            }
            Direction::Downlink => {
                let Some(&(freq, rssi_b)) = uplinks.get(&ev.seq_index) else {
                    continue;
                };
                if freq != ev.freq_hz {
                    violations.push(ev.seq_index);
                } else {
                    pairs.push((ev.seq_index, rssi, rssi_b));
                }
            }
        }
    }
    if !violations.is_empty() {
        violations.sort_unstable();
        return Err(Error::ProtocolViolation { seqs: violations });
    }
    pairs.sort_by_key(|p| p.0);
    pairs.dedup_by_key(|p| p.0);
    Ok(AlignedProbes {
        indices: pairs.iter().map(|p| p.0).collect(),
        x_a: pairs.iter().map(|p| p.1).collect(),
        x_b: pairs.iter().map(|p| p.2).collect(),
    })
}

/// Pairs Alice's ACK trace with Bob's uplink trace by sequence index,
/// applying the same-carrier rule of [`pair_uplink_ack`]. Rounds present on
/// only one side are dropped.
pub fn pair_traces(trace_a: &RssiTrace, trace_b: &RssiTrace) -> Result<AlignedProbes> {
    let mut events = Vec::with_capacity(trace_a.len() + trace_b.len());
    let as_event = |r: &crate::model::ProbeRecord, direction| LinkEvent {
        seq_index: r.seq_index,
        direction,
        freq_hz: r.freq_hz,
        rssi_dbm: Some(r.rssi_dbm),
        delivered: true,
    };
    events.extend(
        trace_b
            .records()
            .iter()
            .map(|r| as_event(r, Direction::Uplink)),
    );
    events.extend(
        trace_a
            .records()
            .iter()
            .map(|r| as_event(r, Direction::Downlink)),
    );
    pair_uplink_ack(&events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PathProfile;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn ev(seq: u64, direction: Direction, freq: u64, rssi: Option<i32>) -> LinkEvent {
        LinkEvent {
            seq_index: seq,
            direction,
            freq_hz: freq,
            rssi_dbm: rssi,
            delivered: rssi.is_some(),
        }
    }

    #[test]
    fn matching_pair_is_emitted() {
        let f = 868_100_000;
        let events = [
            ev(7, Direction::Uplink, f, Some(-80)),
            ev(7, Direction::Downlink, f, Some(-82)),
        ];
        let p = pair_uplink_ack(&events).unwrap();
        assert_eq!(p.indices, vec![7]);
        assert_eq!(p.x_a, vec![-82]);
        assert_eq!(p.x_b, vec![-80]);
    }

    #[test]
    fn lost_ack_gives_no_pair() {
        let f = 868_100_000;
        let events = [
            ev(7, Direction::Uplink, f, Some(-80)),
            ev(7, Direction::Downlink, f, None),
            ev(8, Direction::Uplink, f, Some(-81)),
            ev(8, Direction::Downlink, f, Some(-81)),
        ];
        let p = pair_uplink_ack(&events).unwrap();
        assert_eq!(p.indices, vec![8]);
    }

    #[test]
    fn trace_pairing_checks_carriers() {
        let rec = |seq, freq, rssi| crate::model::ProbeRecord {
            seq_index: seq,
            timestamp_ms: seq * 100,
            rssi_dbm: rssi,
            freq_hz: freq,
        };
        let a =
            RssiTrace::new("a", vec![rec(1, 10, -70), rec(2, 20, -71), rec(4, 10, -72)]).unwrap();
        let b =
            RssiTrace::new("b", vec![rec(1, 10, -69), rec(2, 20, -70), rec(3, 10, -75)]).unwrap();
        let p = pair_traces(&a, &b).unwrap();
        assert_eq!(p, crate::model::align_traces(&a, &b));
        let bad = RssiTrace::new("b", vec![rec(1, 10, -69), rec(2, 30, -70)]).unwrap();
        assert!(matches!(
            pair_traces(&a, &bad),
            Err(Error::ProtocolViolation { seqs }) if seqs == vec![2]
        ));
    }

    #[test]
    fn frequency_mismatch_is_a_protocol_violation() {
        let events = [
            ev(3, Direction::Uplink, 868_100_000, Some(-90)),
            ev(3, Direction::Downlink, 868_100_000, Some(-90)),
            ev(4, Direction::Uplink, 868_100_000, Some(-90)),
            ev(4, Direction::Downlink, 868_300_000, Some(-91)),
        ];
        match pair_uplink_ack(&events) {
            Err(Error::ProtocolViolation { seqs }) => assert_eq!(seqs, vec![4]),
            other => panic!("expected protocol violation, got {other:?}"),
        }
    }

    fn hopping_cfg(n: usize, seed: u64) -> SimConfig {
        let mut c = SimConfig::preset(PathProfile::OutdoorUrban);
        c.hopping = true;
        c.n_probes = n;
        c.seed = seed;
        c
    }

    #[test]
    fn hopping_covers_plan_uniformly() {
        let cfg = hopping_cfg(8000, 11);
        let seq = hop_sequence(&cfg).unwrap();
        assert_eq!(seq.len(), 8000);
        let mut counts = HashMap::new();
        for f in &seq {
            *counts.entry(*f).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 8, "every channel used");
        let expected = 1000.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let p = 1.0 - ChiSquared::new(7.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2={chi2} p={p}");
        assert_eq!(hop_sequence(&cfg).unwrap(), seq);
        assert_ne!(hop_sequence(&hopping_cfg(8000, 12)).unwrap(), seq);
    }

    #[test]
    fn empty_plan_is_rejected() {
        let mut cfg = hopping_cfg(10, 1);
        cfg.channel_plan.clear();
        assert!(matches!(hop_sequence(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn no_hopping_stays_on_first_channel() {
        let mut cfg = hopping_cfg(50, 1);
        cfg.hopping = false;
        assert!(hop_sequence(&cfg)
            .unwrap()
            .iter()
            .all(|&f| f == cfg.channel_plan[0]));
    }
}
