/// Format a number at six significant digits, shortest form.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("round-trip of formatted float");
    format!("{rounded}")
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1234.5678), "1234.57");
        assert_eq!(sig6(-0.000123456789), "-0.000123457");
        assert_eq!(sig6(2.0 / 3.0), "0.666667");
        assert_eq!(sig6(f64::NAN), "NaN");
    }
}
