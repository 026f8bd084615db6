//! Seeded channel-probing simulator.
//!
//! Alice and Bob exchange confirmed uplink frames and their ACKs. Both see
//! the same large-scale process (path loss plus AR(1) shadowing) at slightly
//! different instants, each with its own hardware noise. Eve sees a blend of
//! that process and an independent replica.

mod lorawan;
mod probing;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lorawan::{hop_sequence, pair_traces, pair_uplink_ack, Direction, LinkEvent};
pub use probing::{apply_packet_loss, simulate_probing, ProbingOutcome};

/// Geometry of the moving device relative to the fixed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathProfile {
    /// Single walk from `distance_near_m` out to `distance_far_m`.
    OutdoorUrban,
    /// Back-and-forth sweeps between the near and far distances.
    Indoor,
    /// Fixed separation at `distance_near_m`.
    StaticChamber,
}

impl PathProfile {
    pub const ALL: [PathProfile; 3] = [
        PathProfile::OutdoorUrban,
        PathProfile::Indoor,
        PathProfile::StaticChamber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PathProfile::OutdoorUrban => "outdoor_urban",
            PathProfile::Indoor => "indoor",
            PathProfile::StaticChamber => "static_chamber",
        }
    }

    fn preset_toml(self) -> &'static str {
        match self {
            PathProfile::OutdoorUrban => include_str!("../../presets/outdoor_urban.toml"),
            PathProfile::Indoor => include_str!("../../presets/indoor.toml"),
            PathProfile::StaticChamber => include_str!("../../presets/static_chamber.toml"),
        }
    }
}

impl std::str::FromStr for PathProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PathProfile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown path profile `{s}`")))
    }
}

/// EU868 channels: the three default ones plus five commonly added ones.
pub const EU868_CHANNEL_PLAN: [u64; 8] = [
    868_100_000,
    868_300_000,
    868_500_000,
    867_100_000,
    867_300_000,
    867_500_000,
    867_700_000,
    867_900_000,
];

fn default_tx_power() -> i32 {
    13
}

fn default_channel_plan() -> Vec<u64> {
    EU868_CHANNEL_PLAN.to_vec()
}

fn default_legs() -> u32 {
    1
}

/// Simulator parameters. Loadable from TOML; see the shipped presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_probes: usize,
    pub probe_interval_ms: u64,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: i32,
    pub path_profile: PathProfile,
    pub distance_near_m: f64,
    pub distance_far_m: f64,
    /// Number of near-to-far legs walked by the indoor profile.
    #[serde(default = "default_legs")]
    pub distance_legs: u32,
    pub pathloss_exponent: f64,
    /// Path loss at 1 m, dB.
    pub pathloss_ref_db: f64,
    pub shadow_sigma_db: f64,
    pub shadow_ar_coeff: f64,
    /// White measurement noise per device.
    pub device_noise_sigma_db: f64,
    /// Slow per-device receiver drift (AGC, temperature), stationary std.
    #[serde(default)]
    pub device_drift_sigma_db: f64,
    #[serde(default)]
    pub device_drift_ar_coeff: f64,
    /// Static per-channel gain offset std; common to both directions on a channel.
    #[serde(default)]
    pub freq_selectivity_db: f64,
    pub halfduplex_lag_ms: u64,
    pub eve_correlation: f64,
    #[serde(default = "default_channel_plan")]
    pub channel_plan: Vec<u64>,
    #[serde(default)]
    pub hopping: bool,
    #[serde(default)]
    pub packet_loss_prob: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Loads one of the shipped presets.
    pub fn preset(profile: PathProfile) -> SimConfig {
        SimConfig::from_toml(profile.preset_toml()).expect("shipped presets are valid")
    }

    pub fn from_toml(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(msg: String) -> Result<()> {
            Err(Error::Config(msg))
        }
        let nonneg = [
            ("shadow_sigma_db", self.shadow_sigma_db),
            ("device_noise_sigma_db", self.device_noise_sigma_db),
            ("device_drift_sigma_db", self.device_drift_sigma_db),
            ("freq_selectivity_db", self.freq_selectivity_db),
            ("pathloss_exponent", self.pathloss_exponent),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return bad(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        if !self.pathloss_ref_db.is_finite() {
            return bad("pathloss_ref_db must be finite".into());
        }
        for (name, v) in [
            ("shadow_ar_coeff", self.shadow_ar_coeff),
            ("device_drift_ar_coeff", self.device_drift_ar_coeff),
            ("packet_loss_prob", self.packet_loss_prob),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.eve_correlation) {
            return bad(format!(
                "eve_correlation must lie in [0, 1], got {}",
                self.eve_correlation
            ));
        }
        if self.n_probes < 2 {
            return bad(format!(
                "n_probes must be at least 2, got {}",
                self.n_probes
            ));
        }
        if self.probe_interval_ms == 0 {
            return bad("probe_interval_ms must be positive".into());
        }
        let (near, far) = (self.distance_near_m, self.distance_far_m);
        if !(near.is_finite() && far.is_finite() && near > 0.0 && far >= near) {
            return bad(format!(
                "need 0 < distance_near_m <= distance_far_m, got {near} and {far}"
            ));
        }
        if self.distance_legs == 0 {
            return bad("distance_legs must be at least 1".into());
        }
        if self.channel_plan.is_empty() {
            return bad("channel_plan is empty".into());
        }
        Ok(())
    }

    /// Separation between the devices at time `t_ms`.
    pub(crate) fn distance_at(&self, t_ms: f64) -> f64 {
        let (near, far) = (self.distance_near_m, self.distance_far_m);
        let span = ((self.n_probes - 1) as u64 * self.probe_interval_ms) as f64;
        let u = (t_ms / span).clamp(0.0, 1.0);
        match self.path_profile {
            PathProfile::StaticChamber => near,
            PathProfile::OutdoorUrban => near + (far - near) * u,
            PathProfile::Indoor => {
                let x = u * self.distance_legs as f64;
                let leg = x.floor();
                let frac = x - leg;
                let tri = if (leg as u64).is_multiple_of(2) {
                    frac
                } else {
                    1.0 - frac
                };
                near + (far - near) * tri
            }
        }
    }

    pub(crate) fn pathloss_db(&self, d: f64) -> f64 {
        self.pathloss_ref_db + 10.0 * self.pathloss_exponent * d.log10()
    }
}

/// Independent random streams, so that toggling one feature (hopping, loss)
/// leaves every other random draw unchanged for the same seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Shadow = 1,
    Hop,
    ChannelOffsets,
    EveOffsets,
    NoiseA,
    NoiseB,
    NoiseE,
    EveReplica,
    Loss,
    Sketch,
}

pub(crate) fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::preset(PathProfile::OutdoorUrban)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_match_profile() {
        for p in PathProfile::ALL {
            let cfg = SimConfig::preset(p);
            assert_eq!(cfg.path_profile, p);
            assert_eq!(SimConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
        assert_eq!(SimConfig::default().channel_plan.len(), 8);
        assert_eq!(SimConfig::default().tx_power_dbm, 13);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let base = SimConfig::default();
        type Mutation = Box<dyn Fn(&mut SimConfig)>;
        let cases: Vec<Mutation> = vec![
            Box::new(|c| c.shadow_ar_coeff = 1.0),
            Box::new(|c| c.packet_loss_prob = 1.0),
            Box::new(|c| c.eve_correlation = 1.5),
            Box::new(|c| c.n_probes = 1),
            Box::new(|c| c.channel_plan.clear()),
            Box::new(|c| c.device_noise_sigma_db = -1.0),
            Box::new(|c| c.distance_far_m = 1.0),
            Box::new(|c| c.probe_interval_ms = 0),
        ];
        for mutate in cases {
            let mut c = base.clone();
            mutate(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        assert!(matches!(
            SimConfig::from_toml("n_probes = 3"),
            Err(Error::Toml(_))
        ));
    }

    #[test]
    fn distance_profiles() {
        let mut c = SimConfig::preset(PathProfile::Indoor);
        c.distance_legs = 2;
        let span = ((c.n_probes - 1) as u64 * c.probe_interval_ms) as f64;
        assert_eq!(c.distance_at(0.0), c.distance_near_m);
        assert!((c.distance_at(span / 2.0) - c.distance_far_m).abs() < 1e-9);
        assert!((c.distance_at(span) - c.distance_near_m).abs() < 1e-9);
        let o = SimConfig::default();
        assert!((o.distance_at(1e12) - o.distance_far_m).abs() < 1e-9);
    }
}
