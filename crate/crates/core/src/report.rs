//! Shared CSV formatting. Numbers are written with six significant digits in
//! scientific notation so outputs are byte-stable across platforms.

pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.5e}")
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_num;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_num(110.5), "1.10500e2");
        assert_eq!(fmt_num(-95.5), "-9.55000e1");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333e-1");
    }
}
