//! Tube geometry: coordinates, validation, site classification and the
//! one-step hop kernels.
//!
//! Sites are addressed by `(p, q)` with `p` periodic (`p ≡ p + m + 1`) and
//! `q ∈ 0..=n+1`; rows `q = 0` and `q = n+1` absorb. The hop kernels, with
//! axial bias `η > 0`:
//!
//! * **Square** (denominator `2 + 2η`): `(p±1, q)` with weight 1 each,
//!   `(p, q±1)` with weight `η` each.
//! * **Triangular** (denominator `2 + 4η`): `(p±2, q)` with weight 1 each,
//!   `(p±1, q±1)` with weight `η` each. Every hop preserves the parity of
//!   `p + q`, so the sublattice with parity opposite to the source's is
//!   unreachable (*zero mesh*); `m + 1` must be even for the parity pattern to
//!   close around the tube, and `m + 1` must not be divisible by 4 (two
//!   circumferential modes become singular there).
//! * **Honeycomb** (denominator `2 + η`): sites alternate between two
//!   orientations. A ⊢ site hops to `(p±1, q)` with weight 1 each and to its
//!   axial bond partner `(p, q+1)` with weight `η`; a ⊣ site is the mirror
//!   with axial partner `(p, q−1)`. Orientation alternates with the parity of
//!   `p + q` (the source is ⊢ by declaration), every hop flips it, and `m + 1`
//!   must be even.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three supported tube geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Square,
    Triangular,
    Honeycomb,
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LatticeKind::Square => "square",
            LatticeKind::Triangular => "triangular",
            LatticeKind::Honeycomb => "honeycomb",
        })
    }
}

/// An unvalidated tube description: geometry, dimensions, axial bias and
/// source site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeSpec {
    pub kind: LatticeKind,
    /// Largest circumferential index; the tube has `m + 1` columns.
    pub m: i64,
    /// Number of interior rows; absorbing rows sit at `q = 0` and `q = n+1`.
    pub n: i64,
    /// Axial hop weight relative to circumferential hops.
    pub eta: f64,
    /// Source column, `0 ≤ a ≤ m`.
    pub a: i64,
    /// Source row, `1 ≤ b ≤ n`.
    pub b: i64,
}

impl TubeSpec {
    /// Convenience constructor.
    pub fn new(kind: LatticeKind, m: i64, n: i64, eta: f64, a: i64, b: i64) -> Self {
        TubeSpec {
            kind,
            m,
            n,
            eta,
            a,
            b,
        }
    }

    /// Checks every structural constraint and returns the proof-carrying
    /// wrapper accepted by the rest of the crate.
    pub fn validate(self) -> Result<ValidatedSpec, SpecError> {
        if self.m < 1 || self.n < 1 {
            return Err(SpecError::BadDimension {
                m: self.m,
                n: self.n,
            });
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(SpecError::BadBias { eta: self.eta });
        }
        if self.a < 0 || self.a > self.m || self.b < 1 || self.b > self.n {
            return Err(SpecError::BadSource {
                a: self.a,
                b: self.b,
                m: self.m,
                n: self.n,
            });
        }
        let circ = self.m + 1;
        match self.kind {
            LatticeKind::Square => {}
            LatticeKind::Triangular => {
                if circ % 2 != 0 {
                    return Err(SpecError::OddCircumference {
                        kind: self.kind,
                        circumference: circ,
                    });
                }
                if circ % 4 == 0 {
                    return Err(SpecError::SingularCircumference {
                        circumference: circ,
                    });
                }
            }
            LatticeKind::Honeycomb => {
                if circ % 2 != 0 {
                    return Err(SpecError::OddCircumference {
                        kind: self.kind,
                        circumference: circ,
                    });
                }
            }
        }
        Ok(ValidatedSpec(self))
    }
}

/// Why a [`TubeSpec`] was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("BadDimension: m and n must both be at least 1 (got m={m}, n={n})")]
    BadDimension { m: i64, n: i64 },
    #[error("BadBias: eta must be finite and positive (got eta={eta})")]
    BadBias { eta: f64 },
    #[error("BadSource: source (a={a}, b={b}) must satisfy 0 <= a <= {m} and 1 <= b <= {n}")]
    BadSource { a: i64, b: i64, m: i64, n: i64 },
    #[error(
        "OddCircumference: a {kind} tube needs an even site count around the tube \
         (m+1 = {circumference} is odd)"
    )]
    OddCircumference {
        kind: LatticeKind,
        circumference: i64,
    },
    #[error(
        "SingularCircumference: a triangular tube with m+1 = {circumference} divisible by 4 \
         has singular circumferential modes at k = (m+1)/4 and 3(m+1)/4"
    )]
    SingularCircumference { circumference: i64 },
}

/// Why a site query failed.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SiteError {
    #[error("AxialOutOfRange: q = {q} outside 0..={limit}")]
    AxialOutOfRange { q: i64, limit: i64 },
    #[error("NotInterior: site (p={p}, q={q}) is {class:?}; only interior sites have hop kernels")]
    NotInterior { p: i64, q: i64, class: SiteClass },
}

/// What kind of site `(p, q)` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteClass {
    /// Reachable, non-absorbing.
    Interior,
    /// On the `q = 0` absorbing row.
    AbsorbingLeft,
    /// On the `q = n+1` absorbing row.
    AbsorbingRight,
    /// Triangular only: on the sublattice the walk can never reach.
    ZeroMesh,
}

/// Honeycomb bond orientation of a site (always `None` on the other
/// lattices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    None,
    /// Axial bond points towards `q + 1`; the source's orientation.
    LeftT,
    /// Axial bond points towards `q - 1`.
    RightT,
}

/// A classified site: canonical coordinates plus class and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteRef {
    /// Canonical column, `0 ≤ p ≤ m`.
    pub p: i64,
    pub q: i64,
    pub class: SiteClass,
    pub symmetry: Symmetry,
}

/// One outgoing hop: target site and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub target: SiteRef,
    pub probability: f64,
}

/// The full one-step distribution out of an interior site. Targets may
/// coincide on narrow tubes (e.g. `m = 1`); entries are then listed
/// separately and their probabilities add.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub steps: Vec<Step>,
}

impl StepDistribution {
    /// Sum of all hop probabilities (exactly the full kernel mass).
    pub fn total(&self) -> f64 {
        self.steps.iter().map(|s| s.probability).sum()
    }

    /// Total probability of hopping to the (canonicalised) site `(p, q)`.
    pub fn probability_to(&self, p: i64, q: i64) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.target.p == p && s.target.q == q)
            .map(|s| s.probability)
            .sum()
    }
}

/// Relative hop offsets for one kernel: `(dp, dq, axial_weight)`. Offsets with
/// `axial_weight = true` carry weight `η`, others weight 1.
pub(crate) type KernelOffsets = &'static [(i64, i64, bool)];

const SQUARE_OFFSETS: KernelOffsets = &[(-1, 0, false), (1, 0, false), (0, -1, true), (0, 1, true)];
const TRIANGULAR_OFFSETS: KernelOffsets = &[
    (-2, 0, false),
    (2, 0, false),
    (-1, -1, true),
    (-1, 1, true),
    (1, -1, true),
    (1, 1, true),
];
const HONEY_LEFT_OFFSETS: KernelOffsets = &[(-1, 0, false), (1, 0, false), (0, 1, true)];
const HONEY_RIGHT_OFFSETS: KernelOffsets = &[(-1, 0, false), (1, 0, false), (0, -1, true)];

/// A [`TubeSpec`] that passed [`TubeSpec::validate`]. All numerical routines
/// take this wrapper, so invalid geometry cannot reach them.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedSpec(TubeSpec);

impl ValidatedSpec {
    pub fn kind(&self) -> LatticeKind {
        self.0.kind
    }
    pub fn m(&self) -> i64 {
        self.0.m
    }
    pub fn n(&self) -> i64 {
        self.0.n
    }
    pub fn eta(&self) -> f64 {
        self.0.eta
    }
    pub fn a(&self) -> i64 {
        self.0.a
    }
    pub fn b(&self) -> i64 {
        self.0.b
    }
    /// Number of columns around the tube, `m + 1`.
    pub fn circumference(&self) -> i64 {
        self.0.m + 1
    }
    /// The plain spec this wrapper certifies.
    pub fn raw(&self) -> &TubeSpec {
        &self.0
    }

    /// Reduces any integer column index to the canonical range `0..=m`.
    pub fn wrap_p(&self, p: i64) -> i64 {
        p.rem_euclid(self.circumference())
    }

    /// Whether `(p, q)` lies on the source's `p + q` parity class.
    pub fn parity_matches_source(&self, p: i64, q: i64) -> bool {
        (p + q).rem_euclid(2) == (self.0.a + self.0.b).rem_euclid(2)
    }

    /// The same tube with the axial direction reversed (`q → n+1−q`, so the
    /// source row becomes `n+1−b` and the two ends trade places). On the
    /// honeycomb this swaps the ⊢ and ⊣ orientations, which is how sources on
    /// the ⊣ sublattice are solved: reflect, solve the ⊢ problem, relabel the
    /// ends.
    pub fn axial_reflection(&self) -> ValidatedSpec {
        let mut raw = self.0;
        raw.b = raw.n + 1 - raw.b;
        // b ∈ 1..=n implies n+1-b ∈ 1..=n; all other constraints are untouched.
        ValidatedSpec(raw)
    }

    /// Classifies `(p, q)`: canonicalises `p`, rejects `q` outside
    /// `0..=n+1`, and attaches class and orientation. Idempotent and invariant
    /// under `p → p + (m+1)`.
    pub fn classify(&self, p: i64, q: i64) -> Result<SiteRef, SiteError> {
        if q < 0 || q > self.0.n + 1 {
            return Err(SiteError::AxialOutOfRange {
                q,
                limit: self.0.n + 1,
            });
        }
        let p = self.wrap_p(p);
        let class = match self.0.kind {
            LatticeKind::Triangular if !self.parity_matches_source(p, q) => SiteClass::ZeroMesh,
            _ if q == 0 => SiteClass::AbsorbingLeft,
            _ if q == self.0.n + 1 => SiteClass::AbsorbingRight,
            _ => SiteClass::Interior,
        };
        let symmetry = match self.0.kind {
            LatticeKind::Honeycomb => {
                if self.parity_matches_source(p, q) {
                    Symmetry::LeftT
                } else {
                    Symmetry::RightT
                }
            }
            _ => Symmetry::None,
        };
        Ok(SiteRef {
            p,
            q,
            class,
            symmetry,
        })
    }

    /// Kernel offsets that apply at a site with the given orientation.
    pub(crate) fn kernel_offsets(&self, symmetry: Symmetry) -> KernelOffsets {
        match self.0.kind {
            LatticeKind::Square => SQUARE_OFFSETS,
            LatticeKind::Triangular => TRIANGULAR_OFFSETS,
            LatticeKind::Honeycomb => match symmetry {
                Symmetry::RightT => HONEY_RIGHT_OFFSETS,
                _ => HONEY_LEFT_OFFSETS,
            },
        }
    }

    /// The kernel normaliser: sum of all hop weights out of one site.
    pub fn step_denominator(&self) -> f64 {
        match self.0.kind {
            LatticeKind::Square => 2.0 + 2.0 * self.0.eta,
            LatticeKind::Triangular => 2.0 + 4.0 * self.0.eta,
            LatticeKind::Honeycomb => 2.0 + self.0.eta,
        }
    }

    /// One-step hop distribution out of an interior site.
    pub fn step_distribution(&self, site: &SiteRef) -> Result<StepDistribution, SiteError> {
        // Re-derive the classification so stale or hand-built SiteRefs cannot
        // smuggle a kernel onto an absorbing or unreachable site.
        let site = self.classify(site.p, site.q)?;
        if site.class != SiteClass::Interior {
            return Err(SiteError::NotInterior {
                p: site.p,
                q: site.q,
                class: site.class,
            });
        }
        let denom = self.step_denominator();
        let steps = self
            .kernel_offsets(site.symmetry)
            .iter()
            .map(|&(dp, dq, axial)| {
                let weight = if axial { self.0.eta } else { 1.0 };
                let target = self
                    .classify(site.p + dp, site.q + dq)
                    .expect("kernel targets of interior sites stay within 0..=n+1");
                Step {
                    target,
                    probability: weight / denom,
                }
            })
            .collect();
        Ok(StepDistribution { steps })
    }
}
