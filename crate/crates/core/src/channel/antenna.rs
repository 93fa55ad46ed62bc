use crate::deployment::{NetworkLayout, Point};

/// Combined horizontal/vertical sector pattern. Angles in degrees, gains in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaPattern {
    pub h_beamwidth_deg: f64,
    pub front_to_back_db: f64,
    pub v_beamwidth_deg: f64,
    pub side_lobe_db: f64,
    pub downtilt_deg: f64,
    pub element_gain_dbi: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern {
            h_beamwidth_deg: 70.0,
            front_to_back_db: 25.0,
            v_beamwidth_deg: 10.0,
            side_lobe_db: 20.0,
            downtilt_deg: 15.0,
            element_gain_dbi: 14.0,
        }
    }
}

impl AntennaPattern {
    /// Horizontal attenuation (non-positive) at azimuth offset `phi`.
    pub fn horizontal(&self, phi_deg: f64) -> f64 {
        -(12.0 * (phi_deg / self.h_beamwidth_deg).powi(2)).min(self.front_to_back_db)
    }

    /// Vertical attenuation (non-positive) at depression angle `theta`.
    pub fn vertical(&self, theta_deg: f64) -> f64 {
        -(12.0 * ((theta_deg - self.downtilt_deg) / self.v_beamwidth_deg).powi(2))
            .min(self.side_lobe_db)
    }

    pub fn gain(&self, phi_deg: f64, theta_deg: f64) -> f64 {
        let atten = -(self.horizontal(phi_deg) + self.vertical(theta_deg));
        -atten.min(self.front_to_back_db) + self.element_gain_dbi
    }
}

fn wrap_angle(deg: f64) -> f64 {
    let a = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if a == -180.0 {
        180.0
    } else {
        a
    }
}

/// Gain of `sector`'s antenna towards a UE at `ue`, using the nearest wrapped
/// image of the site.
pub fn antenna_gain(layout: &NetworkLayout, pattern: &AntennaPattern, sector: usize, ue: Point) -> f64 {
    let d = layout.metric().displacement(layout.sector_site(sector), ue);
    let phi = wrap_angle(d.azimuth_deg() - layout.sectors[sector].azimuth_deg);
    let theta = (layout.enb_height - layout.ue_height).atan2(d.norm()).to_degrees();
    pattern.gain(phi, theta)
}
