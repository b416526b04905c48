//! Deterministic numeric formatting for on-disk artifacts.
//!
//! Every real number this crate writes (ensemble files, CLI outputs) goes
//! through [`float17`]: 17 significant digits round-trip any f64 exactly, and
//! fixing the format makes repeated runs byte-identical.

/// Formats with 17 significant digits in scientific notation.
pub fn float17(x: f64) -> String {
    debug_assert!(x.is_finite(), "refusing to serialize {x}");
    format!("{x:.16e}")
}

/// Formats a slice as a JSON array of [`float17`] numbers.
pub fn float17_array(xs: &[f64]) -> String {
    let mut out = String::with_capacity(xs.len() * 24 + 2);
    out.push('[');
    for (i, &x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&float17(x));
    }
    out.push(']');
    out
}
