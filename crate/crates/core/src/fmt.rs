//! Float formatting with 17 significant digits (`%.17g` style).
//!
//! 17 significant digits always identify an `f64` uniquely, so text
//! written with [`g17`] parses back to the identical bit pattern.

/// Formats `x` like C's `%.17g`: 17 significant digits, trailing zeros
/// trimmed, scientific notation for very small or large magnitudes.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        // positional: 17 significant digits means 16 - exp decimals
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", m, sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0');
    t.strip_suffix('.').unwrap_or(t).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_style() {
        assert_eq!(g17(0.5), "0.5");
        assert_eq!(g17(0.1), "0.10000000000000001");
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(-2.0), "-2");
        assert_eq!(g17(1e-6), "9.9999999999999995e-07");
        assert_eq!(g17(1e20), "1e+20");
        assert_eq!(g17(123456.0), "123456");
        assert_eq!(g17(0.0), "0");
    }

    proptest! {
        #[test]
        fn round_trips_exactly(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let back: f64 = g17(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
