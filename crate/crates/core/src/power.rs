//! Transmit power rules, SINR assembly for every link type, and the SINR to
//! rate mapping.
//!
//! All SINRs are average (large-scale) SINRs: there is no fast fading. Every
//! SINR leaving this module is capped at [`PowerConfig::sinr_cap_db`].

use crate::channel::LinkTable;
use crate::units::{db_to_linear, linear_to_db, SUBFRAME_S};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    pub p_max_dbm: f64,
    /// Open-loop target at one RB.
    pub p0_dbm: f64,
    /// Fractional pathloss compensation.
    pub alpha: f64,
    /// Backoff of access-link power below full-band uplink power.
    pub delta_acc_db: f64,
    pub enb_tx_power_dbm: f64,
    /// Thermal noise over the full bandwidth, before noise figure.
    pub noise_fullband_dbm: f64,
    pub nf_ue_db: f64,
    pub nf_enb_db: f64,
    pub sinr_cap_db: f64,
    pub bandwidth_hz: f64,
    pub rbs_fullband: u32,
    /// Recorded only: SINR is single-stream.
    pub tx_antennas: u32,
    /// Recorded only: no receive-combining gain is modelled.
    pub rx_antennas: u32,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            p_max_dbm: 23.0,
            p0_dbm: -80.0,
            alpha: 0.8,
            delta_acc_db: 20.0,
            enb_tx_power_dbm: 46.0,
            noise_fullband_dbm: -104.5,
            nf_ue_db: 9.0,
            nf_enb_db: 5.0,
            sinr_cap_db: 25.0,
            bandwidth_hz: 10e6,
            rbs_fullband: 50,
            tx_antennas: 1,
            rx_antennas: 2,
        }
    }
}

impl PowerConfig {
    /// Fractional uplink power control for `m_rbs` RBs at coupling loss `pl_db`.
    pub fn ul_tx_power(&self, pl_db: f64, m_rbs: u32) -> f64 {
        let open_loop = self.p0_dbm + 10.0 * (m_rbs.max(1) as f64).log10() + self.alpha * pl_db;
        open_loop.min(self.p_max_dbm)
    }

    /// Uplink power with the whole band allocated.
    pub fn full_band_ul_power(&self, pl_db: f64) -> f64 {
        self.ul_tx_power(pl_db, self.rbs_fullband)
    }

    /// Access-link power: full-band uplink power minus the backoff.
    pub fn access_tx_power(&self, pl_db: f64) -> f64 {
        self.full_band_ul_power(pl_db) - self.delta_acc_db
    }

    pub fn ue_noise_dbm(&self) -> f64 {
        self.noise_fullband_dbm + self.nf_ue_db
    }

    pub fn enb_noise_dbm(&self) -> f64 {
        self.noise_fullband_dbm + self.nf_enb_db
    }

    pub fn ue_noise_mw(&self) -> f64 {
        db_to_linear(self.ue_noise_dbm())
    }

    pub fn enb_noise_mw(&self) -> f64 {
        db_to_linear(self.enb_noise_dbm())
    }

    /// Bits carried in one subframe on `bandwidth_fraction` of the band.
    pub fn rate_from_sinr(&self, sinr_db: f64, bandwidth_fraction: f64) -> f64 {
        bandwidth_fraction * self.bandwidth_hz * SUBFRAME_S * (1.0 + db_to_linear(sinr_db)).log2()
    }

    /// Full-band bits per subframe at the SINR cap.
    pub fn peak_bits_per_subframe(&self) -> f64 {
        self.rate_from_sinr(self.sinr_cap_db, 1.0)
    }

    /// Capped SINR in dB from linear terms.
    #[inline]
    pub fn sinr_db(&self, signal_mw: f64, interference_mw: f64, noise_mw: f64) -> f64 {
        linear_to_db(signal_mw / (interference_mw + noise_mw)).min(self.sinr_cap_db)
    }
}

/// A transmitting UE and its transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmitter {
    pub ue: usize,
    pub power_dbm: f64,
}

/// Downlink SINR of `ue` served by `serving`, with every sector in
/// `transmitting` other than the serving one interfering at full power.
pub fn sinr_dl(ue: usize, serving: usize, transmitting: &[usize], links: &LinkTable, cfg: &PowerConfig) -> f64 {
    let rx = |s: usize| db_to_linear(cfg.enb_tx_power_dbm + links.wan_gain(ue, s));
    let interference: f64 = transmitting.iter().filter(|&&s| s != serving).map(|&s| rx(s)).sum();
    cfg.sinr_db(rx(serving), interference, cfg.ue_noise_mw())
}

/// Downlink SINR of every point under full-buffer traffic (all sectors on).
pub fn dl_sinr_map(links: &LinkTable, serving: &[usize], cfg: &PowerConfig) -> Vec<f64> {
    let noise = cfg.ue_noise_mw();
    (0..links.num_points())
        .map(|u| {
            let interference: f64 = links
                .gains_of(u)
                .iter()
                .enumerate()
                .filter(|&(s, _)| s != serving[u])
                .map(|(_, g)| db_to_linear(cfg.enb_tx_power_dbm + g))
                .sum();
            let signal = db_to_linear(cfg.enb_tx_power_dbm + links.wan_gain(u, serving[u]));
            cfg.sinr_db(signal, interference, noise)
        })
        .collect()
}

/// Uplink SINR at an eNB together with its power decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UlSinr {
    pub sinr_db: f64,
    pub signal_mw: f64,
    /// Interference from WAN uplink transmitters of other sectors.
    pub ici_mw: f64,
    /// Interference from access-link transmitters.
    pub access_mw: f64,
}

/// Uplink SINR at `sector` for `scheduled`, with `other_ul` the other
/// sectors' uplink transmitters and `access` the active access-link
/// transmitters.
pub fn sinr_ul(
    sector: usize,
    scheduled: Transmitter,
    other_ul: &[Transmitter],
    access: &[Transmitter],
    links: &LinkTable,
    cfg: &PowerConfig,
) -> UlSinr {
    let rx = |t: &Transmitter| db_to_linear(t.power_dbm + links.wan_gain(t.ue, sector));
    let signal_mw = rx(&scheduled);
    let ici_mw: f64 = other_ul.iter().map(rx).sum();
    let access_mw: f64 = access.iter().map(rx).sum();
    UlSinr {
        sinr_db: cfg.sinr_db(signal_mw, ici_mw + access_mw, cfg.enb_noise_mw()),
        signal_mw,
        ici_mw,
        access_mw,
    }
}

/// SINR of an access link from `tx` to the UE `rx`, interfered by uplink WAN
/// transmitters and other access transmitters over D2D pathloss.
pub fn sinr_access(
    tx: Transmitter,
    rx: usize,
    ul: &[Transmitter],
    other_access: &[Transmitter],
    links: &LinkTable,
    cfg: &PowerConfig,
) -> f64 {
    let at_rx = |t: &Transmitter| db_to_linear(t.power_dbm - links.d2d_pathloss(t.ue, rx));
    let interference: f64 = ul.iter().chain(other_access).map(at_rx).sum();
    cfg.sinr_db(at_rx(&tx), interference, cfg.ue_noise_mw())
}
