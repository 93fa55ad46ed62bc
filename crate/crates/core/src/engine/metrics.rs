use crate::error::{Result, SimError};
use crate::relaying::Direction;
use crate::stats::sorted;
use crate::units::{db_to_linear, linear_to_db, SUBFRAME_S};

/// Measurement-window totals of one active UE.
#[derive(Debug, Clone, PartialEq)]
pub struct UeRecord {
    pub drop: u64,
    pub ue: usize,
    pub direction: Direction,
    pub sector: usize,
    pub relay: Option<usize>,
    pub direct_bits: u64,
    pub relayed_bits: u64,
    /// Sum of linear WAN SINR over subframes in which the flow was granted.
    pub sinr_sum: f64,
    pub sinr_count: u64,
}

impl UeRecord {
    pub fn served_bits(&self) -> u64 {
        self.direct_bits + self.relayed_bits
    }

    /// Mean linear SINR over served subframes, in dB.
    pub fn avg_sinr_db(&self) -> Option<f64> {
        (self.sinr_count > 0).then(|| linear_to_db(self.sinr_sum / self.sinr_count as f64))
    }

    pub fn add_sinr(&mut self, sinr_db: f64) {
        self.sinr_sum += db_to_linear(sinr_db);
        self.sinr_count += 1;
    }
}

/// Everything a system run measures. Accumulators of different drops merge
/// by concatenation; exported statistics sort first, so merge order does
/// not matter.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsAccumulator {
    /// Identifies the scenario; accumulators of different scenarios do not merge.
    pub scenario: String,
    pub drops: Vec<u64>,
    /// Measured subframes per drop.
    pub subframes: u64,
    pub ues: Vec<UeRecord>,
    pub access_sinr_dl_db: Vec<f64>,
    pub access_sinr_ul_db: Vec<f64>,
    /// Transmitting access links summed over subframes and sectors.
    pub active_links: u64,
    pub sector_subframes: u64,
    /// Mean transmitting access links per sector, per drop.
    pub drop_active_links: Vec<(u64, f64)>,
    /// Per (subframe, sector with an uplink grant): received powers at the eNB.
    pub enb_signal_mw: Vec<f64>,
    pub enb_ici_mw: Vec<f64>,
    pub enb_access_mw: Vec<f64>,
    pub max_sinr_db: f64,
    pub max_access_power_dbm: f64,
    pub buffer_violations: u64,
    pub bit_mismatches: u64,
}

impl Default for MetricsAccumulator {
    fn default() -> Self {
        MetricsAccumulator {
            scenario: String::new(),
            drops: Vec::new(),
            subframes: 0,
            ues: Vec::new(),
            access_sinr_dl_db: Vec::new(),
            access_sinr_ul_db: Vec::new(),
            active_links: 0,
            sector_subframes: 0,
            drop_active_links: Vec::new(),
            enb_signal_mw: Vec::new(),
            enb_ici_mw: Vec::new(),
            enb_access_mw: Vec::new(),
            max_sinr_db: f64::NEG_INFINITY,
            max_access_power_dbm: f64::NEG_INFINITY,
            buffer_violations: 0,
            bit_mismatches: 0,
        }
    }
}

impl MetricsAccumulator {
    pub fn new(scenario: impl Into<String>, subframes: u64) -> Self {
        MetricsAccumulator {
            scenario: scenario.into(),
            subframes,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.drops.is_empty() && self.ues.is_empty()
    }

    pub fn note_sinr(&mut self, sinr_db: f64) {
        self.max_sinr_db = self.max_sinr_db.max(sinr_db);
    }

    /// Combines two accumulators of the same scenario.
    pub fn merge(mut self, other: MetricsAccumulator) -> Result<Self> {
        if other.is_empty() {
            return Ok(self);
        }
        if self.is_empty() {
            return Ok(other);
        }
        if self.scenario != other.scenario || self.subframes != other.subframes {
            return Err(SimError::ScenarioMismatch {
                left: format!("{} x{}", self.scenario, self.subframes),
                right: format!("{} x{}", other.scenario, other.subframes),
            });
        }
        self.drops.extend(other.drops);
        self.ues.extend(other.ues);
        self.access_sinr_dl_db.extend(other.access_sinr_dl_db);
        self.access_sinr_ul_db.extend(other.access_sinr_ul_db);
        self.active_links += other.active_links;
        self.sector_subframes += other.sector_subframes;
        self.drop_active_links.extend(other.drop_active_links);
        self.enb_signal_mw.extend(other.enb_signal_mw);
        self.enb_ici_mw.extend(other.enb_ici_mw);
        self.enb_access_mw.extend(other.enb_access_mw);
        self.max_sinr_db = self.max_sinr_db.max(other.max_sinr_db);
        self.max_access_power_dbm = self.max_access_power_dbm.max(other.max_access_power_dbm);
        self.buffer_violations += other.buffer_violations;
        self.bit_mismatches += other.bit_mismatches;
        Ok(self)
    }

    fn ues_of(&self, d: Direction) -> impl Iterator<Item = &UeRecord> {
        self.ues.iter().filter(move |r| r.direction == d)
    }

    /// Per-UE average SINR in dB of UEs served at least once.
    pub fn ue_sinr_db(&self, d: Direction) -> Vec<f64> {
        sorted(&self.ues_of(d).filter_map(UeRecord::avg_sinr_db).collect::<Vec<_>>())
    }

    /// Per-UE throughput in bit/s.
    pub fn ue_rate_bps(&self, d: Direction) -> Vec<f64> {
        let secs = self.subframes as f64 * SUBFRAME_S;
        sorted(&self.ues_of(d).map(|r| r.served_bits() as f64 / secs).collect::<Vec<_>>())
    }

    pub fn access_sinr_db(&self, d: Direction) -> Vec<f64> {
        match d {
            Direction::Dl => sorted(&self.access_sinr_dl_db),
            Direction::Ul => sorted(&self.access_sinr_ul_db),
        }
    }

    /// eNB-side received power samples in dBm for one component.
    pub fn enb_component_dbm(&self, c: EnbComponent) -> Vec<f64> {
        let src = match c {
            EnbComponent::Signal => &self.enb_signal_mw,
            EnbComponent::Ici => &self.enb_ici_mw,
            EnbComponent::Access => &self.enb_access_mw,
        };
        sorted(&src.iter().map(|&x| linear_to_db(x)).collect::<Vec<_>>())
    }

    /// Mean simultaneously transmitting access links per sector.
    pub fn mean_active_links(&self) -> f64 {
        if self.sector_subframes == 0 {
            0.0
        } else {
            self.active_links as f64 / self.sector_subframes as f64
        }
    }

    /// Per-drop mean active links, ordered by drop.
    pub fn per_drop_active_links(&self) -> Vec<(u64, f64)> {
        let mut v = self.drop_active_links.clone();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Fraction of active UEs of direction `d` that received any bits
    /// through a relay.
    pub fn relayed_fraction(&self, d: Direction) -> f64 {
        let (n, k) = self
            .ues_of(d)
            .fold((0usize, 0usize), |(n, k), r| (n + 1, k + usize::from(r.relayed_bits > 0)));
        if n == 0 {
            0.0
        } else {
            k as f64 / n as f64
        }
    }

    /// Records sorted by drop, then UE.
    pub fn sorted_ues(&self) -> Vec<UeRecord> {
        let mut v = self.ues.clone();
        v.sort_by(|a, b| (a.drop, a.ue).cmp(&(b.drop, b.ue)));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnbComponent {
    Signal,
    Ici,
    Access,
}

impl EnbComponent {
    pub const ALL: [EnbComponent; 3] = [EnbComponent::Signal, EnbComponent::Ici, EnbComponent::Access];

    pub fn as_str(self) -> &'static str {
        match self {
            EnbComponent::Signal => "signal",
            EnbComponent::Ici => "ici",
            EnbComponent::Access => "access",
        }
    }
}
