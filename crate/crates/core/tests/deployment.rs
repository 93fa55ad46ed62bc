use relaysim_core::deployment::{drop_ues, NetworkLayout, PerSectorCounts};
use relaysim_core::rng::{stream_rng, Stream};

/// Distance from a site to its hexagon boundary at angle `delta` degrees off
/// a sector boresight; the two hexagon edges of a sector face ±30°.
fn hex_radius(apothem: f64, delta_deg: f64) -> f64 {
    let off = if delta_deg >= 0.0 { delta_deg - 30.0 } else { delta_deg + 30.0 };
    apothem / off.to_radians().cos()
}

/// Area of the sector between two angles off boresight, by midpoint rule.
fn wedge_area(apothem: f64, lo: f64, hi: f64) -> f64 {
    let steps = 2000;
    let h = (hi - lo) / steps as f64;
    (0..steps)
        .map(|i| {
            let r = hex_radius(apothem, lo + (i as f64 + 0.5) * h);
            0.5 * r * r * h.to_radians()
        })
        .sum()
}

fn chi_square(observed: &[usize], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

#[test]
fn sector_drops_are_uniform_in_angle_and_radius() {
    let layout = NetworkLayout::build(500.0, 2).unwrap();
    let counts = PerSectorCounts { idle: 1000, active_dl: 0, active_ul: 0 };
    let ues = drop_ues(&layout, counts, 2000, &mut stream_rng(42, 0, Stream::UeDrop)).unwrap();
    let n = ues.len();
    let apothem = layout.isd / 2.0;
    let area = layout.sector_area();

    let mut angle_bins = [0usize; 12];
    // Radial bins of equal area inside the inscribed disc, plus the rest.
    let mut radial_bins = [0usize; 6];
    for (p, &s) in ues.positions.iter().zip(&ues.drop_sector) {
        let d = *p - layout.sector_site(s);
        let mut delta = d.azimuth_deg() - layout.sectors[s].azimuth_deg;
        delta = (delta + 540.0).rem_euclid(360.0) - 180.0;
        assert!(delta.abs() <= 60.0 + 1e-9, "point outside its sector wedge: {delta}");
        assert!(d.norm() <= hex_radius(apothem, delta) + 1e-9);
        angle_bins[(((delta + 60.0) / 10.0) as usize).min(11)] += 1;
        let r = d.norm();
        radial_bins[if r < apothem { ((r / apothem).powi(2) * 5.0) as usize } else { 5 }] += 1;
    }

    let angle_expected: Vec<f64> = (0..12)
        .map(|k| {
            let lo = -60.0 + 10.0 * k as f64;
            n as f64 * wedge_area(apothem, lo, lo + 10.0) / area
        })
        .collect();
    assert!((angle_expected.iter().sum::<f64>() - n as f64).abs() < 1e-3 * n as f64);
    // 11 degrees of freedom, 0.1% critical value 31.26.
    let chi_a = chi_square(&angle_bins, &angle_expected);
    assert!(chi_a < 31.26, "angular chi-square {chi_a}");

    let disc = apothem * apothem * std::f64::consts::PI / 3.0;
    let mut radial_expected = vec![n as f64 * disc / area / 5.0; 5];
    radial_expected.push(n as f64 * (1.0 - disc / area));
    // 5 degrees of freedom, 0.1% critical value 20.52.
    let chi_r = chi_square(&radial_bins, &radial_expected);
    assert!(chi_r < 20.52, "radial chi-square {chi_r}");
}

#[test]
fn every_sector_gets_its_count() {
    let layout = NetworkLayout::build(500.0, 2).unwrap();
    let counts = PerSectorCounts { idle: 7, active_dl: 2, active_ul: 3 };
    let ues = drop_ues(&layout, counts, 100, &mut stream_rng(1, 0, Stream::UeDrop)).unwrap();
    for s in 0..layout.num_sectors() {
        assert_eq!(ues.drop_sector.iter().filter(|&&d| d == s).count(), 12);
    }
}
