//! dB helpers. Powers are carried in dBm at interfaces and summed in mW.

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Subframe duration in seconds.
pub const SUBFRAME_S: f64 = 1e-3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for db in [-130.0, -3.0, 0.0, 25.0, 46.0] {
            assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-12);
        }
        assert_eq!(linear_to_db(0.0), f64::NEG_INFINITY);
    }
}
