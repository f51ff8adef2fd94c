//! Formatting of numbers to a fixed count of significant digits.

/// Default significant digits for printed and exported numbers.
pub const DEFAULT_PRECISION: usize = 6;

/// Formats `v` with `sig` significant digits, in plain notation for moderate
/// magnitudes and scientific notation otherwise. Trailing zeros are trimmed,
/// so the output is the shortest form at that precision.
pub fn format_sig(v: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".to_string()
        } else if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    // Round once in scientific form so that the exponent reflects carries.
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..sig as i32).contains(&exp) {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}
