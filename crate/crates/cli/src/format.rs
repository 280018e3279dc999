//! Number formatting for CSV and JSON output.

use std::str::FromStr;

use num_complex::Complex64;
use serde_json::{Number, Value};

/// 17 significant digits, enough for an exact round trip.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn complex(z: Complex64) -> String {
    format!("{},{}", real(z.re), real(z.im))
}

/// A JSON number carrying all 17 digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&real(x)).expect("formatted float is valid JSON"))
}

pub fn nums(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(num).collect())
}

pub fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are serializable");
    s.push('\n');
    s
}
