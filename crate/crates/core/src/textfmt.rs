//! Fixed-width float formatting for machine-readable outputs.

/// Scientific notation with 17 significant digits: enough to reparse any
/// `f64` to the exact same bits, and stable for golden-file comparisons.
pub fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Up to 6 significant digits with trailing zeros trimmed; used for labels.
pub fn g6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let formatted = format!("{v:.5e}");
    // split mantissa/exponent and re-render compactly when the exponent is small
    let (mantissa, exp) = formatted.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("valid exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_roundtrips_bits() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE, 0.0] {
            let back: f64 = g17(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "value {v}");
        }
    }

    #[test]
    fn g6_is_compact() {
        assert_eq!(g6(0.0), "0");
        assert_eq!(g6(0.25), "0.25");
        assert_eq!(g6(-1.5), "-1.5");
        assert_eq!(g6(123456.0), "123456");
        assert_eq!(g6(0.123456789), "0.123457");
        assert_eq!(g6(1.0e-7), "1e-7");
    }
}
