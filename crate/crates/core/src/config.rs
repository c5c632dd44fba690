//! Cell and traffic-class parameterization.
//!
//! A [`SystemConfig`] is loaded from UTF-8 `key = value` text (one pair per line,
//! `#` comments, bandwidth values with optional `kbps`/`Mbps` suffixes), validated
//! once, and is immutable afterwards; every derived quantity used downstream
//! (class minima/maxima, aggregate MBS bounds) is computed here.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::units::{Bandwidth, BandwidthParseError};

/// Rigid voice class: the allocation never changes after admission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoiceClass {
    pub bandwidth: Bandwidth,
}

impl VoiceClass {
    /// Minimum = maximum = current; voice has no adaptation.
    pub fn min_bw(&self) -> Bandwidth {
        self.bandwidth
    }

    pub fn max_bw(&self) -> Bandwidth {
        self.bandwidth
    }
}

/// Layered unicast video class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnicastClass {
    pub base_layer_bw: Bandwidth,
    pub layer_bw: Bandwidth,
    pub max_layers: u8,
    pub min_layers: u8,
}

impl UnicastClass {
    pub fn bw_at(&self, layers: u8) -> Bandwidth {
        self.base_layer_bw + self.layer_bw * layers as u64
    }

    pub fn min_bw(&self) -> Bandwidth {
        self.bw_at(self.min_layers)
    }

    pub fn max_bw(&self) -> Bandwidth {
        self.bw_at(self.max_layers)
    }
}

/// One multicast/broadcast video session. `session_id` is 1-based; lower ids are
/// higher priority (more popular).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbsSessionSpec {
    pub session_id: u16,
    pub base_layer_bw: Bandwidth,
    pub layer_bw: Bandwidth,
    pub max_layers: u8,
    pub min_layers: u8,
}

impl MbsSessionSpec {
    pub fn bw_at(&self, layers: u8) -> Bandwidth {
        self.base_layer_bw + self.layer_bw * layers as u64
    }

    pub fn min_bw(&self) -> Bandwidth {
        self.bw_at(self.min_layers)
    }

    pub fn max_bw(&self) -> Bandwidth {
        self.bw_at(self.max_layers)
    }

    /// Bandwidth of the whole enhancement span (max quality minus min quality).
    pub fn span_bw(&self) -> Bandwidth {
        self.max_bw() - self.min_bw()
    }
}

/// QoS-adaptive background class (e.g. file transfer).
///
/// Two degradation levels exist: the deeper one (`handover_degrade_fraction`,
/// xi) frees bandwidth for handover calls, the milder one
/// (`newcall_degrade_fraction`, xi') for new voice/unicast calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundClass {
    pub requested_bw: Bandwidth,
    pub handover_degrade_fraction: f64,
    pub newcall_degrade_fraction: f64,
}

impl BackgroundClass {
    /// Floor when serving handover calls: (1 - xi) * requested.
    pub fn handover_floor(&self) -> Bandwidth {
        self.requested_bw.scaled(1.0 - self.handover_degrade_fraction)
    }

    /// Floor when serving new voice/unicast calls: (1 - xi') * requested.
    pub fn newcall_floor(&self) -> Bandwidth {
        self.requested_bw.scaled(1.0 - self.newcall_degrade_fraction)
    }

    pub fn min_bw(&self) -> Bandwidth {
        self.handover_floor()
    }

    pub fn max_bw(&self) -> Bandwidth {
        self.requested_bw
    }
}

/// MBS degradation technique used under congestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Technique {
    /// Near-uniform: the removed-layer count differs by at most one across sessions.
    TwoLevel,
    /// Priority-ordered: low-priority sessions are pushed to minimum quality first.
    MultiLevel,
}

impl Technique {
    pub fn as_str(&self) -> &'static str {
        match self {
            Technique::TwoLevel => "two-level",
            Technique::MultiLevel => "multi-level",
        }
    }
}

impl FromStr for Technique {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "two-level" | "two_level" => Ok(Technique::TwoLevel),
            "multi-level" | "multi_level" => Ok(Technique::MultiLevel),
            other => Err(ConfigError::Parse(format!(
                "unknown technique `{other}` (expected two-level or multi-level)"
            ))),
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bandwidth-allocation scheme identifier, 1..=7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchemeId(u8);

impl SchemeId {
    pub fn new(id: u8) -> Result<Self, ConfigError> {
        if (1..=7).contains(&id) {
            Ok(SchemeId(id))
        } else {
            Err(ConfigError::Parse(format!("unknown scheme id {id} (expected 1..=7)")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Full cell parameterization; immutable after [`load_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub capacity: Bandwidth,
    pub voice: VoiceClass,
    pub unicast: UnicastClass,
    pub background: BackgroundClass,
    pub mbs_sessions: Vec<MbsSessionSpec>,
    /// Relative new-call arrival weights voice : unicast : background.
    pub arrival_ratio: [f64; 3],
    pub mean_call_duration_s: f64,
    pub mean_dwell_time_s: f64,
    pub technique: Technique,
    pub scheme: SchemeId,
}

impl SystemConfig {
    pub fn session_count(&self) -> usize {
        self.mbs_sessions.len()
    }

    /// Sum of per-session maxima: most bandwidth the MBS sessions can take.
    pub fn mbs_total_max(&self) -> Bandwidth {
        self.mbs_sessions.iter().map(|s| s.max_bw()).sum()
    }

    /// Sum of per-session minima: bandwidth the MBS sessions always keep.
    pub fn mbs_total_min(&self) -> Bandwidth {
        self.mbs_sessions.iter().map(|s| s.min_bw()).sum()
    }

    /// Most bandwidth the non-MBS calls can ever hold.
    pub fn non_mbs_max(&self) -> Bandwidth {
        self.capacity - self.mbs_total_min()
    }

    /// Non-MBS bandwidth available without degrading any MBS session.
    pub fn non_mbs_min(&self) -> Bandwidth {
        self.capacity - self.mbs_total_max()
    }

    pub fn arrival_weight_sum(&self) -> f64 {
        self.arrival_ratio.iter().sum()
    }

    /// Call-completion rate (1 / mean call duration).
    pub fn completion_rate(&self) -> f64 {
        1.0 / self.mean_call_duration_s
    }

    /// Cell-departure rate (1 / mean dwell time).
    pub fn dwell_rate(&self) -> f64 {
        1.0 / self.mean_dwell_time_s
    }

    /// Validate every invariant; called by [`load_config`], public for
    /// programmatically built configs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn invalid(msg: impl Into<String>) -> Result<(), ConfigError> {
            Err(ConfigError::Invalid(msg.into()))
        }

        if self.capacity.is_zero() {
            return invalid("capacity must be > 0");
        }
        if self.voice.bandwidth.is_zero() {
            return invalid("voice.bw must be > 0");
        }
        if self.unicast.base_layer_bw.is_zero() {
            return invalid("unicast.base_bw must be > 0");
        }
        if self.unicast.min_layers > self.unicast.max_layers {
            return invalid("unicast.min_layers must be <= unicast.max_layers");
        }
        if self.unicast.max_layers > 0 && self.unicast.layer_bw.is_zero() {
            return invalid("unicast.layer_bw must be > 0 when unicast.max_layers > 0");
        }
        if self.background.requested_bw.is_zero() {
            return invalid("background.req_bw must be > 0");
        }
        let xi = self.background.handover_degrade_fraction;
        let xi_new = self.background.newcall_degrade_fraction;
        if !(0.0..1.0).contains(&xi) || !(0.0..1.0).contains(&xi_new) {
            return invalid("background degrade fractions must lie in [0, 1)");
        }
        if xi_new > xi {
            return invalid(
                "background.xi_prime must be <= background.xi \
                 (new-call degradation is the milder level)",
            );
        }
        for (idx, s) in self.mbs_sessions.iter().enumerate() {
            if s.session_id as usize != idx + 1 {
                return invalid(format!(
                    "mbs session ids must be 1..=M in order, found {} at position {}",
                    s.session_id,
                    idx + 1
                ));
            }
            if s.base_layer_bw.is_zero() {
                return invalid(format!("mbs session {}: base_bw must be > 0", s.session_id));
            }
            if s.min_layers > s.max_layers {
                return invalid(format!(
                    "mbs session {}: min_layers must be <= max_layers",
                    s.session_id
                ));
            }
            if s.max_layers > 0 && s.layer_bw.is_zero() {
                return invalid(format!(
                    "mbs session {}: layer_bw must be > 0 when max_layers > 0",
                    s.session_id
                ));
            }
        }
        if self.mbs_total_min() > self.capacity {
            return invalid(format!(
                "total minimum MBS bandwidth {} exceeds capacity {}",
                self.mbs_total_min(),
                self.capacity
            ));
        }
        if self.mbs_total_max() > self.capacity {
            return invalid(format!(
                "total maximum MBS bandwidth {} exceeds capacity {}",
                self.mbs_total_max(),
                self.capacity
            ));
        }
        if self.arrival_ratio.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return invalid("arrival_ratio weights must all be > 0");
        }
        if !(self.mean_call_duration_s.is_finite() && self.mean_call_duration_s > 0.0) {
            return invalid("call_duration_s must be > 0");
        }
        if !(self.mean_dwell_time_s.is_finite() && self.mean_dwell_time_s > 0.0) {
            return invalid("dwell_time_s must be > 0");
        }
        Ok(())
    }
}

/// Errors from [`load_config`].
#[derive(Debug, Error)]
pub enum ConfigError {
    /// Malformed key/value text.
    #[error("config parse error: {0}")]
    Parse(String),
    /// Structurally valid text that violates an invariant.
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<BandwidthParseError> for ConfigError {
    fn from(e: BandwidthParseError) -> Self {
        ConfigError::Parse(e.to_string())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "capacity",
    "voice.bw",
    "unicast.base_bw",
    "unicast.layer_bw",
    "unicast.max_layers",
    "unicast.min_layers",
    "background.req_bw",
    "background.xi",
    "background.xi_prime",
    "mbs.count",
    "mbs.base_bw",
    "mbs.layer_bw",
    "mbs.max_layers",
    "mbs.min_layers",
    "arrival_ratio",
    "call_duration_s",
    "dwell_time_s",
    "technique",
    "scheme",
];

struct KeyValues {
    pairs: Vec<(String, String)>,
}

impl KeyValues {
    fn parse(source: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, raw_line) in source.lines().enumerate() {
            let line = match raw_line.split_once('#') {
                Some((before, _)) => before.trim(),
                None => raw_line.trim(),
            };
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Parse(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if !seen.insert(key.clone()) {
                return Err(ConfigError::Parse(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            if value.is_empty() {
                return Err(ConfigError::Parse(format!(
                    "line {}: key `{key}` has no value",
                    lineno + 1
                )));
            }
            pairs.push((key, value));
        }
        Ok(KeyValues { pairs })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| ConfigError::Parse(format!("missing required key `{key}`")))
    }

    fn bandwidth(&self, key: &str) -> Result<Bandwidth, ConfigError> {
        Ok(self.require(key)?.parse::<Bandwidth>()?)
    }

    fn count(&self, key: &str) -> Result<u8, ConfigError> {
        self.require(key)?
            .parse::<u8>()
            .map_err(|_| ConfigError::Parse(format!("key `{key}`: expected a small count")))
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.require(key)?
            .parse::<f64>()
            .map_err(|_| ConfigError::Parse(format!("key `{key}`: expected a number")))
    }
}

fn parse_arrival_ratio(value: &str) -> Result<[f64; 3], ConfigError> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        return Err(ConfigError::Parse(format!(
            "arrival_ratio: expected `voice:unicast:background`, got `{value}`"
        )));
    }
    let mut weights = [0.0; 3];
    for (slot, part) in weights.iter_mut().zip(parts) {
        *slot = part.trim().parse::<f64>().map_err(|_| {
            ConfigError::Parse(format!("arrival_ratio: `{part}` is not a number"))
        })?;
    }
    Ok(weights)
}

/// Load and validate a [`SystemConfig`] from configuration text.
pub fn load_config(source: &str) -> Result<SystemConfig, ConfigError> {
    let kv = KeyValues::parse(source)?;

    let session_count: u16 = kv
        .require("mbs.count")?
        .parse()
        .map_err(|_| ConfigError::Parse("key `mbs.count`: expected a count".into()))?;

    let mbs_sessions = if session_count == 0 {
        Vec::new()
    } else {
        let base = kv.bandwidth("mbs.base_bw")?;
        let layer = kv.bandwidth("mbs.layer_bw")?;
        let max_layers = kv.count("mbs.max_layers")?;
        let min_layers = kv.count("mbs.min_layers")?;
        (1..=session_count)
            .map(|session_id| MbsSessionSpec {
                session_id,
                base_layer_bw: base,
                layer_bw: layer,
                max_layers,
                min_layers,
            })
            .collect()
    };

    let config = SystemConfig {
        capacity: kv.bandwidth("capacity")?,
        voice: VoiceClass {
            bandwidth: kv.bandwidth("voice.bw")?,
        },
        unicast: UnicastClass {
            base_layer_bw: kv.bandwidth("unicast.base_bw")?,
            layer_bw: kv.bandwidth("unicast.layer_bw")?,
            max_layers: kv.count("unicast.max_layers")?,
            min_layers: kv.count("unicast.min_layers")?,
        },
        background: BackgroundClass {
            requested_bw: kv.bandwidth("background.req_bw")?,
            handover_degrade_fraction: kv.f64("background.xi")?,
            newcall_degrade_fraction: kv.f64("background.xi_prime")?,
        },
        mbs_sessions,
        arrival_ratio: parse_arrival_ratio(kv.require("arrival_ratio")?)?,
        mean_call_duration_s: kv.f64("call_duration_s")?,
        mean_dwell_time_s: kv.f64("dwell_time_s")?,
        technique: kv.require("technique")?.parse()?,
        scheme: SchemeId::new(
            kv.require("scheme")?
                .parse::<u8>()
                .map_err(|_| ConfigError::Parse("key `scheme`: expected 1..=7".into()))?,
        )?,
    };
    config.validate()?;
    Ok(config)
}

fn fmt_weight(w: f64) -> String {
    if w.fract() == 0.0 {
        format!("{}", w as i64)
    } else {
        format!("{w}")
    }
}

/// Serialize a config back to the key=value text format. Reloading the output
/// yields an identical config.
pub fn to_config_text(config: &SystemConfig) -> String {
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    push("capacity", config.capacity.to_string());
    push("voice.bw", config.voice.bandwidth.to_string());
    push("unicast.base_bw", config.unicast.base_layer_bw.to_string());
    push("unicast.layer_bw", config.unicast.layer_bw.to_string());
    push("unicast.max_layers", config.unicast.max_layers.to_string());
    push("unicast.min_layers", config.unicast.min_layers.to_string());
    push("background.req_bw", config.background.requested_bw.to_string());
    push(
        "background.xi",
        format!("{}", config.background.handover_degrade_fraction),
    );
    push(
        "background.xi_prime",
        format!("{}", config.background.newcall_degrade_fraction),
    );
    push("mbs.count", config.mbs_sessions.len().to_string());
    if let Some(first) = config.mbs_sessions.first() {
        push("mbs.base_bw", first.base_layer_bw.to_string());
        push("mbs.layer_bw", first.layer_bw.to_string());
        push("mbs.max_layers", first.max_layers.to_string());
        push("mbs.min_layers", first.min_layers.to_string());
    }
    push(
        "arrival_ratio",
        format!(
            "{}:{}:{}",
            fmt_weight(config.arrival_ratio[0]),
            fmt_weight(config.arrival_ratio[1]),
            fmt_weight(config.arrival_ratio[2])
        ),
    );
    push("call_duration_s", format!("{}", config.mean_call_duration_s));
    push("dwell_time_s", format!("{}", config.mean_dwell_time_s));
    push("technique", config.technique.to_string());
    push("scheme", config.scheme.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 20 Mbps cell, 12 uniform MBS sessions, the baseline parameterization used
    /// throughout the test suite.
    const BASELINE: &str = crate::BASELINE_CONFIG;

    #[test]
    fn baseline_loads_with_expected_values() {
        let cfg = load_config(BASELINE).unwrap();
        assert_eq!(cfg.capacity, Bandwidth::from_mbps(20));
        assert_eq!(cfg.session_count(), 12);
        let s = &cfg.mbs_sessions[0];
        // Derived maxima/minima: base 0.5 Mbps + 10 layers * 50 kbps = 1 Mbps.
        assert_eq!(s.max_bw(), Bandwidth::from_mbps(1));
        assert_eq!(s.min_bw(), Bandwidth::from_kbps(500));
        assert_eq!(s.layer_bw, Bandwidth::from_kbps(50));
        assert_eq!(s.max_layers, 10);
        // Unicast: base 0.3 Mbps + 10 * 20 kbps = 0.5 Mbps.
        assert_eq!(cfg.unicast.max_bw(), Bandwidth::from_kbps(500));
        assert_eq!(cfg.unicast.min_bw(), Bandwidth::from_kbps(300));
        // Background floors per the degrade fractions.
        assert_eq!(cfg.background.handover_floor(), Bandwidth::from_kbps(60));
        assert_eq!(cfg.background.newcall_floor(), Bandwidth::from_kbps(84));
    }

    #[test]
    fn baseline_aggregate_bounds() {
        let cfg = load_config(BASELINE).unwrap();
        assert_eq!(cfg.mbs_total_max(), Bandwidth::from_mbps(12));
        assert_eq!(cfg.mbs_total_min(), Bandwidth::from_mbps(6));
        assert_eq!(cfg.non_mbs_max(), Bandwidth::from_mbps(14));
        assert_eq!(cfg.non_mbs_min(), Bandwidth::from_mbps(8));
    }

    #[test]
    fn zero_sessions_is_valid_with_zero_bounds() {
        let text = BASELINE.replace("mbs.count = 12", "mbs.count = 0");
        // Strip the now-unused per-session keys; they are only required when count > 0.
        let text: String = text
            .lines()
            .filter(|l| !l.starts_with("mbs.base_bw") && !l.starts_with("mbs.layer_bw"))
            .filter(|l| !l.starts_with("mbs.max_layers") && !l.starts_with("mbs.min_layers"))
            .map(|l| format!("{l}\n"))
            .collect();
        let cfg = load_config(&text).unwrap();
        assert_eq!(cfg.session_count(), 0);
        assert_eq!(cfg.mbs_total_max(), Bandwidth::ZERO);
        assert_eq!(cfg.mbs_total_min(), Bandwidth::ZERO);
        assert_eq!(cfg.non_mbs_max(), cfg.capacity);
    }

    #[test]
    fn oversubscribed_mbs_rejected() {
        // 13 sessions of 2 Mbps max against a 20 Mbps cell: 26 > 20.
        let text = BASELINE
            .replace("mbs.count = 12", "mbs.count = 13")
            .replace("mbs.base_bw = 0.5 Mbps", "mbs.base_bw = 1.5 Mbps");
        let err = load_config(&text).unwrap_err();
        match err {
            ConfigError::Invalid(msg) => {
                assert!(msg.contains("maximum MBS bandwidth"), "got: {msg}")
            }
            other => panic!("expected invalid-config error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_name_the_problem() {
        assert!(matches!(
            load_config("capacity 20 Mbps"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            load_config("nonsense.key = 1\n"),
            Err(ConfigError::Parse(_))
        ));
        let dup = format!("{BASELINE}capacity = 5 Mbps\n");
        assert!(matches!(load_config(&dup), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn milder_newcall_degradation_enforced() {
        let text = BASELINE.replace("background.xi_prime = 0.3", "background.xi_prime = 0.7");
        assert!(matches!(load_config(&text), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn serialize_reload_round_trip() {
        let cfg = load_config(BASELINE).unwrap();
        let text = to_config_text(&cfg);
        let reloaded = load_config(&text).unwrap();
        assert_eq!(cfg, reloaded);
    }

    proptest::proptest! {
        #[test]
        fn random_configs_round_trip(
            capacity_mbps in 5u64..=100,
            voice_kbps in 8u64..=128,
            uni_base in 50u64..=400,
            uni_layer in 5u64..=50,
            uni_max in 0u8..=12,
            sessions in 0u16..=8,
            mbs_base in 100u64..=400,
            mbs_layer in 10u64..=60,
            mbs_max in 0u8..=10,
            xi in 0.0f64..0.9,
            xi_frac in 0.0f64..=1.0,
            duration in 30.0f64..600.0,
            dwell in 60.0f64..2000.0,
            scheme in 1u8..=7,
        ) {
            let cfg = SystemConfig {
                capacity: Bandwidth::from_mbps(capacity_mbps),
                voice: VoiceClass { bandwidth: Bandwidth::from_kbps(voice_kbps) },
                unicast: UnicastClass {
                    base_layer_bw: Bandwidth::from_kbps(uni_base),
                    layer_bw: Bandwidth::from_kbps(uni_layer),
                    max_layers: uni_max,
                    min_layers: uni_max / 2,
                },
                background: BackgroundClass {
                    requested_bw: Bandwidth::from_kbps(120),
                    handover_degrade_fraction: xi,
                    newcall_degrade_fraction: xi * xi_frac,
                },
                mbs_sessions: (1..=sessions)
                    .map(|session_id| MbsSessionSpec {
                        session_id,
                        base_layer_bw: Bandwidth::from_kbps(mbs_base),
                        layer_bw: Bandwidth::from_kbps(mbs_layer),
                        max_layers: mbs_max,
                        min_layers: mbs_max / 3,
                    })
                    .collect(),
                arrival_ratio: [5.0, 1.0, 4.0],
                mean_call_duration_s: duration,
                mean_dwell_time_s: dwell,
                technique: if scheme % 2 == 0 { Technique::MultiLevel } else { Technique::TwoLevel },
                scheme: SchemeId::new(scheme).unwrap(),
            };
            proptest::prop_assume!(cfg.validate().is_ok());
            let reloaded = load_config(&to_config_text(&cfg)).unwrap();
            proptest::prop_assert_eq!(cfg, reloaded);
        }
    }
}
