/// Macro (eNB <-> UE) pathloss in dB at distance `d` meters, clamped at 1 m.
pub fn pathloss_wan(d: f64) -> f64 {
    35.3 + 37.6 * d.max(1.0).log10()
}

/// UE <-> UE pathloss in dB at distance `d` meters, clamped at 1 m.
///
/// Line-of-sight up to 44 m, a linear bridge to 64 m, and a 40 dB/decade
/// law beyond.
pub fn pathloss_d2d(d: f64) -> f64 {
    let d = d.max(1.0);
    if d <= 44.0 {
        38.47 + 20.0 * d.log10()
    } else if d <= 64.0 {
        71.34 + 2.29 * (d - 44.0)
    } else {
        44.85 + 40.0 * d.log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wan_values() {
        assert!((pathloss_wan(100.0) - 110.5).abs() < 1e-12);
        assert_eq!(pathloss_wan(1.0), 35.3);
        assert_eq!(pathloss_wan(0.2), 35.3);
        assert!((pathloss_wan(1000.0) - 148.1).abs() < 1e-12);
    }

    #[test]
    fn d2d_values() {
        assert!((pathloss_d2d(10.0) - 58.47).abs() < 1e-12);
        assert!((pathloss_d2d(50.0) - 85.08).abs() < 1e-9);
        assert_eq!(pathloss_d2d(0.0), 38.47);
        assert!((pathloss_d2d(44.0) - 71.34).abs() < 0.01);
    }

    #[test]
    fn d2d_branch_seams() {
        let los_44 = 38.47 + 20.0 * 44f64.log10();
        let bridge_44 = 71.34;
        assert!((los_44 - bridge_44).abs() <= 0.01);
        let bridge_64 = 71.34 + 2.29 * 20.0;
        let far_64 = 44.85 + 40.0 * 64f64.log10();
        assert!((bridge_64 - far_64).abs() <= 0.05);
    }

    #[test]
    fn monotone_in_distance() {
        // The printed constants leave a 0.04 dB step down at the 64 m seam.
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..20_000 {
            let d = 0.5 + i as f64 * 0.1;
            let cur = (pathloss_wan(d), pathloss_d2d(d));
            assert!(cur.0 >= prev.0, "wan non-monotone at {d}");
            assert!(cur.1 >= prev.1 - 0.05, "d2d non-monotone at {d}");
            prev = cur;
        }
    }
}
