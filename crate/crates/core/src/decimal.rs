//! Fixed-point rendering of exact scores.

use num_traits::{Signed, Zero};

use crate::model::Score;

/// Renders `value` with `places` decimals, rounding half away from zero.
pub fn fixed(value: Score, places: u32) -> String {
    let scale = 10i64.pow(places);
    let scaled = (value * Score::from_integer(scale)).round().to_integer();
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.abs();
    if places == 0 {
        return format!("{sign}{abs}");
    }
    format!("{sign}{}.{:0width$}", abs / scale, abs % scale, width = places as usize)
}

/// Nearest integer, halves rounded up (for non-negative values).
pub fn round_half_up(value: Score) -> i64 {
    if value.is_negative() {
        -round_half_up(-value)
    } else if value.is_zero() {
        0
    } else {
        (value + Score::new(1, 2)).floor().to_integer()
    }
}
