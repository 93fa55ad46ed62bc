//! Scenario configuration: defaults, TOML loading with dotted keys, and
//! validation.
//!
//! Every key lives in a flat registry, so `deployment.isd = 400` and a
//! `[deployment]` table with `isd = 400` are the same setting. Unknown keys
//! are rejected by name.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{AntennaPattern, ShadowConfig, ShadowGenerator};
use crate::deployment::{PerSectorCounts, MAX_TIERS};
use crate::error::{Result, SimError};
use crate::mac::YieldRule;
use crate::power::PowerConfig;

/// What a run simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// No relays.
    Baseline,
    /// Relays without access-link interference management.
    Relay,
    /// Relays with SIR-threshold yielding among access links.
    RelayIm,
    /// Every active UE replaced by its best neighbour.
    UpperBound,
    /// Uplink-spectrum power snapshots.
    Snapshot,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Baseline, Mode::Relay, Mode::RelayIm, Mode::UpperBound, Mode::Snapshot];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Relay => "relay",
            Mode::RelayIm => "relay-im",
            Mode::UpperBound => "upper-bound",
            Mode::Snapshot => "snapshot",
        }
    }

    /// Modes that run the subframe simulation.
    pub fn is_system(self) -> bool {
        matches!(self, Mode::Baseline | Mode::Relay | Mode::RelayIm)
    }

    pub fn has_relays(self) -> bool {
        matches!(self, Mode::Relay | Mode::RelayIm)
    }

    /// SIR threshold used when `mac.gamma_acc` is not set.
    pub fn default_gamma_acc(self) -> f64 {
        match self {
            Mode::RelayIm => 5.0,
            _ => f64::NEG_INFINITY,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

impl FromStr for ShadowGenerator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [ShadowGenerator::Auto, ShadowGenerator::Dense, ShadowGenerator::Grid]
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown shadow generator `{s}`"))
    }
}

impl FromStr for YieldRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [YieldRule::IndependentPairs, YieldRule::PriorityOrder]
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown yield rule `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentConfig {
    pub isd: f64,
    pub tiers: u32,
    pub enb_height: f64,
    pub ue_height: f64,
    pub idle_per_sector: usize,
    pub active_dl_per_sector: usize,
    pub active_ul_per_sector: usize,
    pub max_ues_per_sector: usize,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        DeploymentConfig {
            isd: 500.0,
            tiers: 2,
            enb_height: 32.0,
            ue_height: 1.5,
            idle_per_sector: 100,
            active_dl_per_sector: 10,
            active_ul_per_sector: 10,
            max_ues_per_sector: 2000,
        }
    }
}

impl DeploymentConfig {
    pub fn counts(&self) -> PerSectorCounts {
        PerSectorCounts {
            idle: self.idle_per_sector,
            active_dl: self.active_dl_per_sector,
            active_ul: self.active_ul_per_sector,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayConfig {
    /// Maximum access-link D2D pathloss.
    pub p_acc_max_db: f64,
    /// Neighbour radius of the upper-bound study.
    pub upper_bound_p_acc_max_db: f64,
    pub idle_only: bool,
    /// `None` means two subframes of full-band bits at the SINR cap.
    pub buffer_bits: Option<u64>,
    pub prune_margin: f64,
}

impl Default for RelayConfig {
    fn default() -> Self {
        RelayConfig {
            p_acc_max_db: 85.0,
            upper_bound_p_acc_max_db: 85.0,
            idle_only: true,
            buffer_bits: None,
            prune_margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    /// `None` follows the mode: `-inf` for relay, 5 dB for relay-im.
    pub gamma_acc_db: Option<f64>,
    pub pf_time_constant: f64,
    pub yield_rule: YieldRule,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            gamma_acc_db: None,
            pf_time_constant: 100.0,
            yield_rule: YieldRule::IndependentPairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub drops: usize,
    pub warmup_subframes: u64,
    pub subframes: u64,
    /// Interferer rotations averaged per UE in the upper-bound study.
    pub upper_bound_rotations: usize,
    pub snapshot_subframes: u64,
    /// Grid pitch of the snapshot heatmaps in metres.
    pub snapshot_grid_m: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Relay,
            seed: 1,
            drops: 10,
            warmup_subframes: 200,
            subframes: 2000,
            upper_bound_rotations: 100,
            snapshot_subframes: 2000,
            snapshot_grid_m: 10.0,
        }
    }
}

/// A fully specified scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub deployment: DeploymentConfig,
    pub channel: ShadowConfig,
    pub antenna: AntennaPattern,
    pub power: PowerConfig,
    pub relay: RelayConfig,
    pub mac: MacConfig,
    pub run: RunConfig,
}

/// Idle UEs per sector in the full-density scenario (500 UEs per sector).
pub const FULL_SCALE_IDLE_PER_SECTOR: usize = 480;

/// Conversion between a config field and its TOML value.
trait ConfigValue: Sized {
    fn from_toml(key: &str, v: &toml::Value) -> Result<Self>;
    fn to_toml(&self) -> Option<toml::Value>;
}

fn mismatch(key: &str, expected: &str, v: &toml::Value) -> SimError {
    SimError::config(key, format!("expected {expected}, found {} `{v}`", v.type_str()))
}

impl ConfigValue for f64 {
    fn from_toml(key: &str, v: &toml::Value) -> Result<Self> {
        match v {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(i) => Ok(*i as f64),
            toml::Value::String(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            toml::Value::String(s) if s == "inf" => Ok(f64::INFINITY),
            _ => Err(mismatch(key, "a number", v)),
        }
    }

    fn to_toml(&self) -> Option<toml::Value> {
        Some(toml::Value::Float(*self))
    }
}

macro_rules! integer_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn from_toml(key: &str, v: &toml::Value) -> Result<Self> {
                match v {
                    toml::Value::Integer(i) => <$t>::try_from(*i)
                        .map_err(|_| SimError::config(key, format!("{i} is out of range"))),
                    _ => Err(mismatch(key, "an integer", v)),
                }
            }

            fn to_toml(&self) -> Option<toml::Value> {
                Some(toml::Value::Integer(*self as i64))
            }
        }
    )*};
}

integer_value!(u32, u64, usize);

impl ConfigValue for bool {
    fn from_toml(key: &str, v: &toml::Value) -> Result<Self> {
        v.as_bool().ok_or_else(|| mismatch(key, "a boolean", v))
    }

    fn to_toml(&self) -> Option<toml::Value> {
        Some(toml::Value::Boolean(*self))
    }
}

impl<T: ConfigValue> ConfigValue for Option<T> {
    fn from_toml(key: &str, v: &toml::Value) -> Result<Self> {
        T::from_toml(key, v).map(Some)
    }

    fn to_toml(&self) -> Option<toml::Value> {
        self.as_ref().and_then(T::to_toml)
    }
}

macro_rules! string_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn from_toml(key: &str, v: &toml::Value) -> Result<Self> {
                let s = v.as_str().ok_or_else(|| mismatch(key, "a string", v))?;
                s.parse().map_err(|e: String| SimError::config(key, e))
            }

            fn to_toml(&self) -> Option<toml::Value> {
                Some(toml::Value::String(self.as_str().to_string()))
            }
        }
    )*};
}

string_value!(Mode, ShadowGenerator, YieldRule);

macro_rules! registry {
    ($($key:literal => $($field:ident).+ : $t:ty,)*) => {
        /// Every accepted configuration key.
        pub const CONFIG_KEYS: &[&str] = &[$($key),*];

        impl ScenarioConfig {
            /// Sets one dotted key.
            pub fn set(&mut self, key: &str, value: &toml::Value) -> Result<()> {
                match key {
                    $($key => self$(.$field)+ = <$t as ConfigValue>::from_toml(key, value)?,)*
                    _ => return Err(SimError::UnknownKey { key: key.to_string() }),
                }
                Ok(())
            }

            /// `(key, value)` for every set key, in registry order.
            pub fn entries(&self) -> Vec<(&'static str, toml::Value)> {
                let mut out = Vec::new();
                $(if let Some(v) = <$t as ConfigValue>::to_toml(&self$(.$field)+) {
                    out.push(($key, v));
                })*
                out
            }
        }
    };
}

registry! {
    "deployment.isd" => deployment.isd: f64,
    "deployment.tiers" => deployment.tiers: u32,
    "deployment.enb_height" => deployment.enb_height: f64,
    "deployment.ue_height" => deployment.ue_height: f64,
    "deployment.idle_per_sector" => deployment.idle_per_sector: usize,
    "deployment.active_dl_per_sector" => deployment.active_dl_per_sector: usize,
    "deployment.active_ul_per_sector" => deployment.active_ul_per_sector: usize,
    "deployment.max_ues_per_sector" => deployment.max_ues_per_sector: usize,
    "channel.shadow_sigma_db" => channel.sigma_db: f64,
    "channel.shadow_d_corr" => channel.d_corr: f64,
    "channel.shadow_generator" => channel.generator: ShadowGenerator,
    "channel.shadow_dense_limit" => channel.dense_limit: usize,
    "channel.shadow_grid_spacing" => channel.grid_spacing: f64,
    "channel.antenna_h_beamwidth_deg" => antenna.h_beamwidth_deg: f64,
    "channel.antenna_front_to_back_db" => antenna.front_to_back_db: f64,
    "channel.antenna_v_beamwidth_deg" => antenna.v_beamwidth_deg: f64,
    "channel.antenna_side_lobe_db" => antenna.side_lobe_db: f64,
    "channel.antenna_downtilt_deg" => antenna.downtilt_deg: f64,
    "channel.antenna_gain_dbi" => antenna.element_gain_dbi: f64,
    "power.p_max_dbm" => power.p_max_dbm: f64,
    "power.p0_dbm" => power.p0_dbm: f64,
    "power.alpha" => power.alpha: f64,
    "power.delta_acc_db" => power.delta_acc_db: f64,
    "power.enb_tx_power_dbm" => power.enb_tx_power_dbm: f64,
    "power.noise_fullband_dbm" => power.noise_fullband_dbm: f64,
    "power.nf_ue_db" => power.nf_ue_db: f64,
    "power.nf_enb_db" => power.nf_enb_db: f64,
    "power.sinr_cap_db" => power.sinr_cap_db: f64,
    "power.bandwidth_hz" => power.bandwidth_hz: f64,
    "power.rbs_fullband" => power.rbs_fullband: u32,
    "power.tx_antennas" => power.tx_antennas: u32,
    "power.rx_antennas" => power.rx_antennas: u32,
    "relay.p_acc_max_db" => relay.p_acc_max_db: f64,
    "relay.upper_bound_p_acc_max_db" => relay.upper_bound_p_acc_max_db: f64,
    "relay.idle_only" => relay.idle_only: bool,
    "relay.buffer_bits" => relay.buffer_bits: Option<u64>,
    "relay.prune_margin" => relay.prune_margin: f64,
    "mac.gamma_acc" => mac.gamma_acc_db: Option<f64>,
    "mac.pf_time_constant" => mac.pf_time_constant: f64,
    "mac.yield_rule" => mac.yield_rule: YieldRule,
    "run.mode" => run.mode: Mode,
    "run.seed" => run.seed: u64,
    "run.drops" => run.drops: usize,
    "run.warmup_subframes" => run.warmup_subframes: u64,
    "run.subframes" => run.subframes: u64,
    "run.upper_bound_rotations" => run.upper_bound_rotations: usize,
    "run.snapshot_subframes" => run.snapshot_subframes: u64,
    "run.snapshot_grid_m" => run.snapshot_grid_m: f64,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::Array(_) | toml::Value::Datetime(_) => {
                return Err(SimError::config(key, "arrays and datetimes are not accepted"))
            }
            _ => out.push((key, v.clone())),
        }
    }
    Ok(())
}

impl ScenarioConfig {
    /// Parses TOML text over the defaults and validates the result.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_toml_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Applies TOML text on top of the current values without validating.
    pub fn apply_toml_str(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| SimError::ConfigSyntax(e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat)?;
        for (key, value) in &flat {
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Switches to the full-density deployment (500 UEs per sector).
    pub fn full_scale(mut self) -> Self {
        self.deployment.idle_per_sector = FULL_SCALE_IDLE_PER_SECTOR;
        self
    }

    /// Effective access-link SIR threshold.
    pub fn gamma_acc_db(&self) -> f64 {
        self.mac.gamma_acc_db.unwrap_or_else(|| self.run.mode.default_gamma_acc())
    }

    /// Effective relay buffer capacity in bits.
    pub fn buffer_bits(&self) -> u64 {
        self.relay
            .buffer_bits
            .unwrap_or_else(|| 2 * self.power.peak_bits_per_subframe().floor() as u64)
    }

    /// The same scenario in another mode. An explicit threshold is dropped
    /// so the new mode gets its own default.
    pub fn with_mode(&self, mode: Mode) -> Self {
        let mut c = self.clone();
        if c.run.mode != mode {
            c.mac.gamma_acc_db = None;
        }
        c.run.mode = mode;
        c
    }

    /// Copy with every mode-dependent default written out.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if self.run.mode.has_relays() {
            c.mac.gamma_acc_db = Some(self.gamma_acc_db());
        }
        c.relay.buffer_bits = Some(self.buffer_bits());
        c
    }

    /// TOML text that reproduces this configuration.
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// Total UEs per sector.
    pub fn ues_per_sector(&self) -> usize {
        self.deployment.counts().total()
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.deployment;
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(SimError::config(key, format!("must be positive and finite, got {x}")))
            }
        };
        positive("deployment.isd", d.isd)?;
        if d.tiers > MAX_TIERS {
            return Err(SimError::config("deployment.tiers", format!("at most {MAX_TIERS} tiers are supported")));
        }
        positive("deployment.enb_height", d.enb_height)?;
        positive("deployment.ue_height", d.ue_height)?;
        if d.active_dl_per_sector + d.active_ul_per_sector == 0 {
            return Err(SimError::config("deployment.active_dl_per_sector", "no active UEs in any direction"));
        }
        if d.counts().total() > d.max_ues_per_sector {
            return Err(SimError::config(
                "deployment.idle_per_sector",
                format!("{} UEs per sector exceed deployment.max_ues_per_sector = {}", d.counts().total(), d.max_ues_per_sector),
            ));
        }
        if !(self.channel.sigma_db >= 0.0 && self.channel.sigma_db.is_finite()) {
            return Err(SimError::config("channel.shadow_sigma_db", "must be non-negative"));
        }
        positive("channel.shadow_d_corr", self.channel.d_corr)?;
        positive("channel.shadow_grid_spacing", self.channel.grid_spacing)?;
        positive("power.bandwidth_hz", self.power.bandwidth_hz)?;
        if self.power.rbs_fullband == 0 {
            return Err(SimError::config("power.rbs_fullband", "must be at least 1"));
        }
        if self.relay.buffer_bits == Some(0) {
            return Err(SimError::config("relay.buffer_bits", "must be at least 1"));
        }
        if !(self.relay.prune_margin >= 0.0) {
            return Err(SimError::config("relay.prune_margin", "must be non-negative"));
        }
        if !(self.mac.pf_time_constant >= 1.0) {
            return Err(SimError::config("mac.pf_time_constant", "must be at least one subframe"));
        }
        let r = &self.run;
        if r.drops == 0 {
            return Err(SimError::config("run.drops", "at least one drop is required"));
        }
        if r.subframes == 0 {
            return Err(SimError::config("run.subframes", "at least one measured subframe is required"));
        }
        if r.upper_bound_rotations == 0 {
            return Err(SimError::config("run.upper_bound_rotations", "must be at least 1"));
        }
        if r.snapshot_subframes == 0 {
            return Err(SimError::config("run.snapshot_subframes", "must be at least 1"));
        }
        positive("run.snapshot_grid_m", r.snapshot_grid_m)?;
        if let Some(g) = self.mac.gamma_acc_db {
            match r.mode {
                Mode::Relay if g != f64::NEG_INFINITY => {
                    return Err(SimError::config(
                        "mac.gamma_acc",
                        format!("mode relay runs without interference management; use relay-im for a threshold of {g} dB"),
                    ))
                }
                Mode::RelayIm if !g.is_finite() => {
                    return Err(SimError::config("mac.gamma_acc", "mode relay-im needs a finite threshold"))
                }
                Mode::Baseline | Mode::UpperBound | Mode::Snapshot => {
                    return Err(SimError::config("mac.gamma_acc", format!("has no meaning in mode {}", r.mode)))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c.run.mode, Mode::Relay);
        assert_eq!(c.gamma_acc_db(), f64::NEG_INFINITY);
        assert_eq!(c.power.delta_acc_db, 20.0);
        assert_eq!(c.deployment.isd, 500.0);
        assert_eq!(c.buffer_bits(), 166_186);
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = ScenarioConfig::from_toml_str("[deployment]\nisd = 400\n[mac]\npf_time_constant = 50.0\n").unwrap();
        let b = ScenarioConfig::from_toml_str("deployment.isd = 400.0\nmac.pf_time_constant = 50").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.deployment.isd, 400.0);
    }

    #[test]
    fn minus_infinity_spellings() {
        for text in ["mac.gamma_acc = \"-inf\"", "mac.gamma_acc = -inf"] {
            let c = ScenarioConfig::from_toml_str(text).unwrap();
            assert_eq!(c.gamma_acc_db(), f64::NEG_INFINITY);
        }
    }

    #[test]
    fn relay_im_threshold() {
        let c = ScenarioConfig::from_toml_str("run.mode = \"relay-im\"").unwrap();
        assert_eq!(c.gamma_acc_db(), 5.0);
        let c = ScenarioConfig::from_toml_str("run.mode = \"relay-im\"\nmac.gamma_acc = 8").unwrap();
        assert_eq!(c.gamma_acc_db(), 8.0);
    }

    #[test]
    fn unknown_key_is_named() {
        match ScenarioConfig::from_toml_str("fooo = 1") {
            Err(SimError::UnknownKey { key }) => assert_eq!(key, "fooo"),
            other => panic!("{other:?}"),
        }
        match ScenarioConfig::from_toml_str("[relay]\nfooo = 1") {
            Err(SimError::UnknownKey { key }) => assert_eq!(key, "relay.fooo"),
            other => panic!("{other:?}"),
        }
    }

    fn error_key(text: &str) -> String {
        match ScenarioConfig::from_toml_str(text) {
            Err(SimError::Config { key, .. }) => key,
            other => panic!("{text}: {other:?}"),
        }
    }

    #[test]
    fn distinct_diagnostics() {
        assert_eq!(error_key("deployment.isd = \"far\""), "deployment.isd");
        assert_eq!(error_key("run.drops = 0"), "run.drops");
        assert_eq!(error_key("run.drops = -2"), "run.drops");
        assert_eq!(error_key("mac.gamma_acc = 5"), "mac.gamma_acc");
        assert_eq!(error_key("run.mode = \"baseline\"\nmac.gamma_acc = -inf"), "mac.gamma_acc");
        assert_eq!(error_key("run.mode = \"relay-im\"\nmac.gamma_acc = \"-inf\""), "mac.gamma_acc");
        assert_eq!(error_key("run.mode = \"sideways\""), "run.mode");
        assert_eq!(error_key("deployment.tiers = 9"), "deployment.tiers");
        assert!(matches!(ScenarioConfig::from_toml_str("= broken"), Err(SimError::ConfigSyntax(_))));
        let missing = ScenarioConfig::from_path(Path::new("/nonexistent/relaysim.toml"));
        assert!(matches!(missing, Err(SimError::ConfigFile { .. })));
    }

    #[test]
    fn resolved_round_trip() {
        let c = ScenarioConfig::from_toml_str("run.mode = \"relay-im\"\nrun.seed = 9\nchannel.shadow_generator = \"grid\"")
            .unwrap()
            .full_scale()
            .resolved();
        let text = c.to_toml_string();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(text.contains("mac.gamma_acc = 5.0"));
    }

    #[test]
    fn minus_infinity_round_trips() {
        let c = ScenarioConfig::default().resolved();
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back.mac.gamma_acc_db, Some(f64::NEG_INFINITY));
    }

    #[test]
    fn every_key_is_settable() {
        let c = ScenarioConfig::default().resolved();
        let keys: Vec<&str> = c.entries().iter().map(|(k, _)| *k).collect();
        assert_eq!(keys, CONFIG_KEYS);
    }
}
