//! JSON report types. Every JSON document the tool emits serializes from
//! (and deserializes back into) one of these structs, so output is
//! guaranteed to round-trip through the tool's own parser.

use ltube_core::{LatticeKind, SiteClass, Symmetry};
use serde::{Deserialize, Serialize};

/// Echo of the tube description exactly as the user gave it (the source is
/// in user coordinates even when the computation ran in the reflected
/// frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecEcho {
    pub lattice: LatticeKind,
    pub m: i64,
    pub n: i64,
    pub eta: f64,
    /// `[a, b]`: source column and row.
    pub source: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub p: i64,
    pub q: i64,
    pub class: SiteClass,
    pub symmetry: Symmetry,
    pub value: f64,
}

/// Full-grid expectation field: one row per site, row-major in `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldReport {
    pub command: String,
    pub spec: SpecEcho,
    pub rows: Vec<FieldRow>,
}

/// Per-column absorption probabilities at both ends, plus the end totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbReport {
    pub command: String,
    pub spec: SpecEcho,
    /// `left[p]` = probability of absorption at `(p, 0)`.
    pub left: Vec<f64>,
    /// `right[p]` = probability of absorption at `(p, n+1)`.
    pub right: Vec<f64>,
    pub total_left: f64,
    pub total_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub q: i64,
    pub value: f64,
}

/// Slope diagnostics of the linear ramp between the source row and the far
/// absorbing end (honeycomb only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeAnalysis {
    /// Ramp slope at the requested bias.
    pub slope: f64,
    /// Bias that minimises the ramp slope for this geometry.
    pub eta_argmin: f64,
    /// The minimal slope value.
    pub slope_min: f64,
}

/// Axial profile `e(q)` for the interior rows `q = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub command: String,
    pub spec: SpecEcho,
    pub rows: Vec<ProfileRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_analysis: Option<SlopeAnalysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub value: f64,
}

/// A scalar observable evaluated on a log-spaced bias grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub command: String,
    pub spec: SpecEcho,
    pub observable: String,
    pub from: f64,
    pub to: f64,
    pub steps: u32,
    pub rows: Vec<SweepRow>,
}
