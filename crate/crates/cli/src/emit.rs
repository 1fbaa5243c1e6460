//! Output formatting shared by all commands.
//!
//! Numeric precision convention: machine-readable values carry 17
//! significant digits (lossless `f64` round trip), absorption totals 15,
//! and human-oriented summaries 6. CSV output has one header row, `.` as
//! the decimal separator regardless of locale (Rust's `format!` is
//! locale-independent), LF line endings, and no quoting — every emitted
//! field is a number or a bare label, never text containing a delimiter.

use ltube_core::{SiteClass, Symmetry};

/// Requested output encoding for data-producing commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// 17 significant digits: enough to reconstruct the exact `f64`.
pub fn machine(x: f64) -> String {
    format!("{x:.16e}")
}

/// 15 significant digits, used for absorption totals.
pub fn total(x: f64) -> String {
    format!("{x:.14e}")
}

/// 6 significant digits, used in human-readable summaries.
pub fn human(x: f64) -> String {
    format!("{x:.5e}")
}

/// CSV token for a site class (matches the JSON serialization).
pub fn class_token(class: SiteClass) -> &'static str {
    match class {
        SiteClass::Interior => "interior",
        SiteClass::AbsorbingLeft => "absorbing_left",
        SiteClass::AbsorbingRight => "absorbing_right",
        SiteClass::ZeroMesh => "zero_mesh",
    }
}

/// CSV token for a bond orientation (matches the JSON serialization).
pub fn symmetry_token(symmetry: Symmetry) -> &'static str {
    match symmetry {
        Symmetry::None => "none",
        Symmetry::LeftT => "left_t",
        Symmetry::RightT => "right_t",
    }
}

/// Wrap a verdict word in green/red when colour is enabled.
pub fn verdict(pass: bool, color: bool) -> String {
    let word = if pass { "PASS" } else { "FAIL" };
    if color {
        let code = if pass { 32 } else { 31 };
        format!("\x1b[{code}m{word}\x1b[0m")
    } else {
        word.to_string()
    }
}
