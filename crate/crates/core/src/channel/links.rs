use crate::channel::{antenna_gain, pathloss_d2d, pathloss_wan, AntennaPattern, ShadowField};
use crate::deployment::{NetworkLayout, Point, WrapMetric};

/// Large-scale gains for one drop.
///
/// `wan_gain(u, s)` is the total eNB <-> UE gain in dB (antenna gain minus
/// pathloss and shadowing) and is shared by the downlink and uplink spectrum.
/// UE <-> UE pathloss carries no shadowing and no antenna gain, so it is
/// evaluated on demand from positions instead of being stored.
#[derive(Debug, Clone)]
pub struct LinkTable {
    n_sectors: usize,
    wan_gain: Vec<f64>,
    positions: Vec<Point>,
    metric: WrapMetric,
}

/// WAN gain in dB from `sector` to a point whose per-site shadowing is `shadow`.
pub fn wan_gain_at(
    layout: &NetworkLayout,
    pattern: &AntennaPattern,
    pos: Point,
    shadow: &[f64],
    sector: usize,
) -> f64 {
    let site = layout.sectors[sector].site;
    let d = layout.wrap_distance(layout.sites[site], pos);
    -pathloss_wan(d) - shadow[site] + antenna_gain(layout, pattern, sector, pos)
}

pub fn build_link_table(
    layout: &NetworkLayout,
    pattern: &AntennaPattern,
    positions: &[Point],
    field: &ShadowField,
) -> LinkTable {
    assert_eq!(field.num_points(), positions.len(), "field and points differ");
    let n_sectors = layout.num_sectors();
    let mut wan_gain = Vec::with_capacity(positions.len() * n_sectors);
    for (u, &p) in positions.iter().enumerate() {
        let shadow = field.row(u);
        for s in 0..n_sectors {
            wan_gain.push(wan_gain_at(layout, pattern, p, shadow, s));
        }
    }
    LinkTable {
        n_sectors,
        wan_gain,
        positions: positions.to_vec(),
        metric: layout.metric(),
    }
}

impl LinkTable {
    /// A table from raw gains, for tests and tooling.
    pub fn from_gains(wan_gain: Vec<f64>, n_sectors: usize, positions: Vec<Point>, metric: WrapMetric) -> Self {
        assert_eq!(wan_gain.len(), positions.len() * n_sectors);
        LinkTable {
            n_sectors,
            wan_gain,
            positions,
            metric,
        }
    }

    pub fn num_sectors(&self) -> usize {
        self.n_sectors
    }

    pub fn num_points(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, ue: usize) -> Point {
        self.positions[ue]
    }

    pub fn metric(&self) -> WrapMetric {
        self.metric
    }

    #[inline]
    pub fn wan_gain(&self, ue: usize, sector: usize) -> f64 {
        self.wan_gain[ue * self.n_sectors + sector]
    }

    /// Pathloss + shadowing − antenna gain, as a positive loss in dB.
    #[inline]
    pub fn coupling_loss(&self, ue: usize, sector: usize) -> f64 {
        -self.wan_gain(ue, sector)
    }

    pub fn gains_of(&self, ue: usize) -> &[f64] {
        &self.wan_gain[ue * self.n_sectors..(ue + 1) * self.n_sectors]
    }

    #[inline]
    pub fn d2d_distance(&self, a: usize, b: usize) -> f64 {
        self.metric.distance(self.positions[a], self.positions[b])
    }

    #[inline]
    pub fn d2d_pathloss(&self, a: usize, b: usize) -> f64 {
        pathloss_d2d(self.d2d_distance(a, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boresight_composition() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        // Tilt the beam onto a UE 100 m out on sector 0's boresight.
        let tilt = (layout.enb_height - layout.ue_height).atan2(100.0).to_degrees();
        let pattern = AntennaPattern { downtilt_deg: tilt, ..AntennaPattern::default() };
        let az = 30f64.to_radians();
        let ue = Point::new(100.0 * az.cos(), 100.0 * az.sin());
        let table = build_link_table(&layout, &pattern, &[ue], &ShadowField::zeros(1, 19));
        assert!((table.wan_gain(0, 0) - (-96.5)).abs() < 1e-9);
        assert!((table.coupling_loss(0, 0) - 96.5).abs() < 1e-9);
    }

    #[test]
    fn d2d_symmetric_and_self_clamped() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let pts = vec![Point::new(10.0, 20.0), Point::new(-900.0, 300.0), Point::new(50.0, 20.0)];
        let table = build_link_table(&layout, &AntennaPattern::default(), &pts, &ShadowField::zeros(3, 19));
        assert_eq!(table.d2d_pathloss(0, 0), 38.47);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(table.d2d_pathloss(a, b), table.d2d_pathloss(b, a));
            }
        }
        assert!((table.d2d_pathloss(0, 2) - pathloss_d2d(40.0)).abs() < 1e-9);
    }

    #[test]
    fn shadowing_enters_with_negative_sign() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let pts = vec![Point::new(120.0, 80.0)];
        let pattern = AntennaPattern::default();
        let flat = build_link_table(&layout, &pattern, &pts, &ShadowField::zeros(1, 19));
        let mut vals = vec![0.0; 19];
        vals[4] = 6.0;
        let shadowed = build_link_table(&layout, &pattern, &pts, &ShadowField::from_values(vals, 19));
        for s in 0..57 {
            let expect = if layout.sectors[s].site == 4 { 6.0 } else { 0.0 };
            assert!((flat.wan_gain(0, s) - shadowed.wan_gain(0, s) - expect).abs() < 1e-12);
        }
    }
}
