//! Number formatting shared by reports and exported files.

use serde::Serializer;

/// Serializes non-finite values as the strings `"inf"`, `"-inf"` or `"nan"`.
pub fn extended<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Map counterpart of [`extended`].
pub fn extended_map<S: Serializer>(
    map: &std::collections::BTreeMap<String, f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    struct Value(f64);
    impl serde::Serialize for Value {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            extended(&self.0, s)
        }
    }
    let mut m = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(k, &Value(*v))?;
    }
    m.end()
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let formatted = format!("{:.*e}", digits.saturating_sub(1), x);
    formatted.parse().unwrap_or(x)
}

/// Shortest decimal text of `x` after rounding to 12 significant digits.
pub fn format12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x, 12);
    if r == 0.0 {
        return "0".into();
    }
    if r.abs() < 1e-6 || r.abs() >= 1e16 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}
