//! Output formatting for reals: reported values carry 9 significant digits so
//! that serialized results are stable across platforms and runs.

use serde::Serializer;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// Rounds `x` to nine significant decimal digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .unwrap_or(x)
}

pub fn sig9<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_nine_digits() {
        assert_eq!(round_sig(2.0 / 3.0), 0.666666667);
        assert_eq!(round_sig(123456789012.0), 123456789000.0);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(1e-12 / 3.0), 3.33333333e-13);
    }
}
