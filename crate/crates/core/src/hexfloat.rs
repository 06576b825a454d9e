//! Hexadecimal floating-point literals (`0x1.8p1`) for bit-exact persistence.
//!
//! Non-finite values are written as `inf`, `-inf` and `nan`.

use crate::error::{Error, Result};

/// Shortest hexadecimal literal that parses back to exactly `x`.
pub fn format_hexf64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        (0, -1022)
    } else {
        (1, exp_bits - 1023)
    };
    let digits = format!("{mantissa:013x}");
    let digits = digits.trim_end_matches('0');
    let frac = if digits.is_empty() {
        String::new()
    } else {
        format!(".{digits}")
    };
    let exp_sign = if exp < 0 { '-' } else { '+' };
    format!("{sign}0x{lead}{frac}p{exp_sign}{}", exp.abs())
}

/// Parses a literal produced by [`format_hexf64`] (or any C99-style literal).
pub fn parse_hexf64(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    hexf_parse::parse_hexf64(t, false)
        .map_err(|e| Error::Format(format!("invalid hex float {t:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_literals() {
        assert_eq!(format_hexf64(1.0), "0x1p+0");
        assert_eq!(format_hexf64(3.0), "0x1.8p+1");
        assert_eq!(format_hexf64(-0.5), "-0x1p-1");
        assert_eq!(format_hexf64(0.0), "0x0p+0");
        assert_eq!(format_hexf64(-0.0), "-0x0p+0");
        assert_eq!(format_hexf64(f64::MIN_POSITIVE / 2.0), "0x0.8p-1022");
        assert_eq!(format_hexf64(f64::from_bits(1)), "0x0.0000000000001p-1022");
    }

    #[test]
    fn special_values() {
        for x in [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::MAX,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(parse_hexf64(&format_hexf64(x)).unwrap(), x);
        }
        assert!(parse_hexf64("nan").unwrap().is_nan());
        assert!(parse_hexf64("0x1.zp0").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_bits(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(!x.is_nan());
            let back = parse_hexf64(&format_hexf64(x)).unwrap();
            prop_assert_eq!(back.to_bits(), bits);
        }
    }
}
