use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{hop_sequence, stream_rng, Direction, LinkEvent, SimConfig, Stream};
use crate::error::Result;
use crate::model::{ProbeRecord, RssiTrace, RSSI_MAX_DBM, RSSI_MIN_DBM};

/// Everything one simulated probing session produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbingOutcome {
    pub trace_a: RssiTrace,
    pub trace_b: RssiTrace,
    pub trace_e: RssiTrace,
    pub events: Vec<LinkEvent>,
}

/// Stationary zero-mean AR(1) path with marginal std `sigma`.
fn ar1(rng: &mut ChaCha8Rng, len: usize, coeff: f64, sigma: f64) -> Vec<f64> {
    let innov = sigma * (1.0 - coeff * coeff).sqrt();
    let mut out = Vec::with_capacity(len);
    let mut x = sigma * rng.sample::<f64, _>(StandardNormal);
    for _ in 0..len {
        out.push(x);
        x = coeff * x + innov * rng.sample::<f64, _>(StandardNormal);
    }
    out
}

/// Receiver impairments of one device: slow drift plus white noise.
fn device_noise(cfg: &SimConfig, stream: Stream) -> Vec<f64> {
    let mut rng = stream_rng(cfg.seed, stream);
    let drift = ar1(
        &mut rng,
        cfg.n_probes,
        cfg.device_drift_ar_coeff,
        cfg.device_drift_sigma_db,
    );
    drift
        .into_iter()
        .map(|d| d + cfg.device_noise_sigma_db * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn quantize_dbm(v: f64) -> i32 {
    (v.round() as i64).clamp(RSSI_MIN_DBM as i64, RSSI_MAX_DBM as i64) as i32
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs one probing session: `n_probes` confirmed uplinks from Alice, each
/// answered by Bob's ACK `halfduplex_lag_ms` later on the same carrier.
/// Bob measures the uplink, Alice the ACK, Eve overhears the uplink.
pub fn simulate_probing(cfg: &SimConfig) -> Result<ProbingOutcome> {
    cfg.validate()?;
    let n = cfg.n_probes;
    let dt = cfg.probe_interval_ms as f64;
    let lag_steps = cfg.halfduplex_lag_ms as f64 / dt;
    let grid_len = n + lag_steps.ceil() as usize + 1;

    let mut rng = stream_rng(cfg.seed, Stream::Shadow);
    let shadow = ar1(&mut rng, grid_len, cfg.shadow_ar_coeff, cfg.shadow_sigma_db);
    let large_scale: Vec<f64> = shadow
        .iter()
        .enumerate()
        .map(|(g, s)| {
            let d = cfg.distance_at(g as f64 * dt);
            cfg.tx_power_dbm as f64 - cfg.pathloss_db(d) + s
        })
        .collect();
    let at = |pos: f64| -> f64 {
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if frac == 0.0 {
            large_scale[lo]
        } else {
            large_scale[lo] * (1.0 - frac) + large_scale[lo + 1] * frac
        }
    };

    let freqs = hop_sequence(cfg)?;
    let channel_of = |f: u64| cfg.channel_plan.iter().position(|&c| c == f).unwrap_or(0);
    let offsets = |stream| -> Vec<f64> {
        let mut rng = stream_rng(cfg.seed, stream);
        cfg.channel_plan
            .iter()
            .map(|_| cfg.freq_selectivity_db * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let offset_ab = offsets(Stream::ChannelOffsets);
    let offset_e = offsets(Stream::EveOffsets);

    let noise_a = device_noise(cfg, Stream::NoiseA);
    let noise_b = device_noise(cfg, Stream::NoiseB);
    let noise_e = device_noise(cfg, Stream::NoiseE);

    // Eve's view: the shared process blended with an independent replica of
    // matching mean and spread.
    let (mu, sd) = mean_std(&large_scale[..n]);
    let mut rng = stream_rng(cfg.seed, Stream::EveReplica);
    let replica = ar1(&mut rng, n, cfg.shadow_ar_coeff, sd);
    let c = cfg.eve_correlation;
    let blend = (1.0 - c * c).sqrt();

    let mut loss = stream_rng(cfg.seed, Stream::Loss);
    let p = cfg.packet_loss_prob;
    let mut recs_a = Vec::with_capacity(n);
    let mut recs_b = Vec::with_capacity(n);
    let mut recs_e = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(2 * n);
    for i in 0..n {
        let seq = i as u64 + 1;
        let t_up = i as u64 * cfg.probe_interval_ms;
        let t_ack = t_up + cfg.halfduplex_lag_ms;
        let freq = freqs[i];
        let ch = channel_of(freq);
        // Draw all three outcomes every round so loss does not shift the stream.
        let up_ok = loss.random::<f64>() >= p;
        let ack_ok = loss.random::<f64>() >= p;
        let eve_ok = loss.random::<f64>() >= p;

        let x_b = quantize_dbm(large_scale[i] + offset_ab[ch] + noise_b[i]);
        let x_a = quantize_dbm(at(i as f64 + lag_steps) + offset_ab[ch] + noise_a[i]);
        let x_e = quantize_dbm(
            mu + c * (large_scale[i] - mu) + blend * replica[i] + offset_e[ch] + noise_e[i],
        );

        events.push(LinkEvent {
            seq_index: seq,
            direction: Direction::Uplink,
            freq_hz: freq,
            rssi_dbm: up_ok.then_some(x_b),
            delivered: up_ok,
        });
        if eve_ok {
            recs_e.push(ProbeRecord {
                seq_index: seq,
                timestamp_ms: t_up,
                rssi_dbm: x_e,
                freq_hz: freq,
            });
        }
        if !up_ok {
            // Class A: no receive window opens without a received uplink.
            continue;
        }
        recs_b.push(ProbeRecord {
            seq_index: seq,
            timestamp_ms: t_up,
            rssi_dbm: x_b,
            freq_hz: freq,
        });
        events.push(LinkEvent {
            seq_index: seq,
            direction: Direction::Downlink,
            freq_hz: freq,
            rssi_dbm: ack_ok.then_some(x_a),
            delivered: ack_ok,
        });
        if ack_ok {
            recs_a.push(ProbeRecord {
                seq_index: seq,
                timestamp_ms: t_ack,
                rssi_dbm: x_a,
                freq_hz: freq,
            });
        }
    }

    Ok(ProbingOutcome {
        trace_a: RssiTrace::new("alice", recs_a)?,
        trace_b: RssiTrace::new("bob", recs_b)?,
        trace_e: RssiTrace::new("eve", recs_e)?,
        events,
    })
}

/// Drops each record independently with probability `p` (clamped to [0, 1]).
pub fn apply_packet_loss(trace: &RssiTrace, p: f64, seed: u64) -> RssiTrace {
    let p = p.clamp(0.0, 1.0);
    let mut rng = stream_rng(seed, Stream::Loss);
    let kept = trace
        .records()
        .iter()
        .filter(|_| rng.random::<f64>() >= p)
        .copied()
        .collect();
    RssiTrace::new(trace.device_id.clone(), kept).expect("subset of a valid trace")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::pearson_rho_i32;
    use crate::model::align_traces;
    use crate::sim::{pair_uplink_ack, PathProfile};
    use std::collections::HashSet;

    fn rho_ab(out: &ProbingOutcome) -> f64 {
        let al = align_traces(&out.trace_a, &out.trace_b);
        pearson_rho_i32(&al.x_a, &al.x_b).unwrap()
    }

    fn rho_ae(out: &ProbingOutcome) -> f64 {
        let al = align_traces(&out.trace_a, &out.trace_e);
        pearson_rho_i32(&al.x_a, &al.x_b).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let mut cfg = SimConfig::preset(PathProfile::OutdoorUrban);
        cfg.n_probes = 500;
        let a = simulate_probing(&cfg).unwrap();
        let b = simulate_probing(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed += 1;
        let c = simulate_probing(&cfg).unwrap();
        assert_ne!(a.trace_a, c.trace_a);
    }

    #[test]
    fn noiseless_zero_lag_is_perfectly_reciprocal() {
        let mut cfg = SimConfig::preset(PathProfile::OutdoorUrban);
        cfg.n_probes = 1000;
        cfg.device_noise_sigma_db = 0.0;
        cfg.device_drift_sigma_db = 0.0;
        cfg.halfduplex_lag_ms = 0;
        cfg.packet_loss_prob = 0.0;
        let out = simulate_probing(&cfg).unwrap();
        assert_eq!(out.trace_a.rssi(), out.trace_b.rssi());
        assert!((rho_ab(&out) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outdoor_preset_brackets_reference_statistics() {
        let cfg = SimConfig::preset(PathProfile::OutdoorUrban);
        assert_eq!(cfg.n_probes, 4000);
        let out = simulate_probing(&cfg).unwrap();
        let rho = rho_ab(&out);
        assert!((0.93..=0.98).contains(&rho), "rho={rho}");
        for t in [&out.trace_a, &out.trace_b] {
            let r = t.rssi();
            let (lo, hi) = (*r.iter().min().unwrap(), *r.iter().max().unwrap());
            assert!(lo >= -130 && hi <= -45, "range [{lo}, {hi}]");
        }
    }

    #[test]
    fn static_chamber_calibrates_to_two_db() {
        use crate::quantizer::{calibrate_epsilon, DEFAULT_CALIBRATION_QUANTILE};
        for seed in 1..=5 {
            let mut cfg = SimConfig::preset(PathProfile::StaticChamber);
            cfg.seed = seed;
            let out = simulate_probing(&cfg).unwrap();
            for t in [&out.trace_a, &out.trace_b] {
                assert_eq!(
                    calibrate_epsilon(t, DEFAULT_CALIBRATION_QUANTILE).unwrap(),
                    2
                );
            }
        }
    }

    #[test]
    fn indoor_preset_is_reciprocal() {
        let rho = rho_ab(&simulate_probing(&SimConfig::preset(PathProfile::Indoor)).unwrap());
        assert!((0.93..=0.99).contains(&rho), "rho={rho}");
    }

    #[test]
    fn clamping_keeps_rssi_in_hardware_range() {
        let mut cfg = SimConfig::preset(PathProfile::OutdoorUrban);
        cfg.n_probes = 400;
        cfg.tx_power_dbm = 60;
        cfg.distance_near_m = 1.0;
        cfg.shadow_sigma_db = 40.0;
        let out = simulate_probing(&cfg).unwrap();
        let all: Vec<i32> = [&out.trace_a, &out.trace_b, &out.trace_e]
            .iter()
            .flat_map(|t| t.rssi())
            .collect();
        assert!(all
            .iter()
            .all(|v| (RSSI_MIN_DBM..=RSSI_MAX_DBM).contains(v)));
        assert!(all.contains(&RSSI_MAX_DBM));
        cfg.tx_power_dbm = -100;
        let out = simulate_probing(&cfg).unwrap();
        assert!(out.trace_b.rssi().contains(&RSSI_MIN_DBM));
    }

    #[test]
    fn eve_dial_tracks_configured_correlation() {
        for c in [0.0, 0.1, 0.5, 0.9] {
            let mut cfg = SimConfig::preset(PathProfile::OutdoorUrban);
            cfg.eve_correlation = c;
            let rho = rho_ae(&simulate_probing(&cfg).unwrap());
            assert!((rho - c).abs() <= 0.1, "c={c} rho={rho}");
        }
    }

    #[test]
    fn reciprocity_falls_with_device_noise() {
        let sigmas = [0.0, 1.0, 2.0, 4.0, 8.0];
        let mut prev = f64::INFINITY;
        for s in sigmas {
            let mean: f64 = (0..10)
                .map(|seed| {
                    let mut cfg = SimConfig::preset(PathProfile::OutdoorUrban);
                    cfg.n_probes = 1000;
                    cfg.seed = 100 + seed;
                    cfg.device_noise_sigma_db = s;
                    rho_ab(&simulate_probing(&cfg).unwrap())
                })
                .sum::<f64>()
                / 10.0;
            assert!(mean <= prev, "sigma={s}: {mean} > {prev}");
            prev = mean;
        }
    }

    #[test]
    fn class_a_causality_and_pairing() {
        let mut cfg = SimConfig::preset(PathProfile::OutdoorUrban);
        cfg.n_probes = 2000;
        cfg.packet_loss_prob = 0.2;
        cfg.hopping = true;
        let out = simulate_probing(&cfg).unwrap();
        let delivered_up: HashSet<u64> = out
            .events
            .iter()
            .filter(|e| e.direction == Direction::Uplink && e.delivered)
            .map(|e| e.seq_index)
            .collect();
        for e in out
            .events
            .iter()
            .filter(|e| e.direction == Direction::Downlink)
        {
            assert!(delivered_up.contains(&e.seq_index));
        }
        let paired = pair_uplink_ack(&out.events).unwrap();
        let aligned = align_traces(&out.trace_a, &out.trace_b);
        assert_eq!(paired, aligned);
    }

    #[test]
    fn packet_loss_examples() {
        let mut cfg = SimConfig::preset(PathProfile::OutdoorUrban);
        cfg.n_probes = 1000;
        cfg.packet_loss_prob = 0.0;
        let trace = simulate_probing(&cfg).unwrap().trace_b;
        assert_eq!(trace.len(), 1000);
        assert_eq!(apply_packet_loss(&trace, 0.0, 5), trace);
        let kept = apply_packet_loss(&trace, 0.1, 5).len();
        assert!((860..=940).contains(&kept), "kept {kept}");
        let short = RssiTrace::new("x", trace.records()[..100].to_vec()).unwrap();
        assert!(apply_packet_loss(&short, 0.9999, 5).is_empty());
    }
}
