//! Exact rational loads and their decimal rendering.
//!
//! Every load in this crate is carried as a [`Rational`]; decimal strings are
//! produced only at report boundaries.

use num_integer::Integer;
use num_rational::Ratio;
use serde::Serialize;

pub type Rational = Ratio<u64>;

/// `n choose k`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    u64::try_from(acc).expect("binomial coefficient overflows u64")
}

/// Renders `value` with exactly `places` digits after the decimal point,
/// rounding half to even.
pub fn decimal_half_even(value: Rational, places: u32) -> String {
    let scale = 10u128.pow(places);
    let numer = u128::from(*value.numer()) * scale;
    let denom = u128::from(*value.denom());
    let (mut q, rem) = numer.div_rem(&denom);
    let twice = rem * 2;
    if twice > denom || (twice == denom && q % 2 == 1) {
        q += 1;
    }
    format_scaled(q, places)
}

/// Renders `value` truncated (rounded toward zero) to `places` digits.
pub fn decimal_truncated(value: Rational, places: u32) -> String {
    let scale = 10u128.pow(places);
    let q = u128::from(*value.numer()) * scale / u128::from(*value.denom());
    format_scaled(q, places)
}

fn format_scaled(q: u128, places: u32) -> String {
    if places == 0 {
        return q.to_string();
    }
    let scale = 10u128.pow(places);
    format!(
        "{}.{:0width$}",
        q / scale,
        q % scale,
        width = places as usize
    )
}

/// `"p/q"` (or `"p"` for integers).
pub fn fraction_string(value: Rational) -> String {
    if *value.denom() == 1 {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Number of digits after the decimal point in a printed decimal such as `"0.2428"`.
pub fn printed_places(printed: &str) -> u32 {
    printed
        .split_once('.')
        .map_or(0, |(_, frac)| frac.len() as u32)
}

/// A load as it appears in reports: exact fraction plus 4-place decimal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadValue {
    pub fraction: String,
    pub decimal: String,
}

impl From<Rational> for LoadValue {
    fn from(value: Rational) -> Self {
        LoadValue {
            fraction: fraction_string(value),
            decimal: decimal_half_even(value, 4),
        }
    }
}
