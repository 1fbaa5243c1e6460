//! The user's tube coordinates versus the canonical computation frame.
//!
//! The honeycomb closed forms are derived for a source whose axial bond
//! points towards larger `q` (a ⊢ site; with the fixed embedding used here,
//! `a + b` even). A source with `a + b` odd sits on a ⊣ site and describes
//! the mirror problem: reflecting the axial coordinate, `q → n+1−q`, turns
//! it into a canonical one. This module owns that reflection and the
//! bookkeeping needed to report every result back in the user's frame:
//! field values mirrored in `q`, absorption end labels swapped, and bond
//! orientations flipped. Square and triangular tubes have no orientation,
//! so they are never reflected.

use ltube_core::{
    absorption, LatticeKind, SiteClass, SpecError, Symmetry, TubeSpec, ValidatedSpec,
};

use crate::CliError;

/// A validated tube plus the mapping between the user frame and the frame
/// the closed forms are evaluated in.
#[derive(Debug, Clone)]
pub struct Canonical {
    /// The tube exactly as the user described it.
    user: ValidatedSpec,
    /// The tube the computations run on; equals `user` unless reflected.
    spec: ValidatedSpec,
    /// Whether `spec` is the axial mirror image of `user`.
    reflected: bool,
}

/// Absorption split with the ends named in the user frame.
#[derive(Debug, Clone)]
pub struct Ends {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub total_left: f64,
    pub total_right: f64,
}

impl Canonical {
    pub fn new(
        kind: LatticeKind,
        m: i64,
        n: i64,
        eta: f64,
        a: i64,
        b: i64,
    ) -> Result<Self, SpecError> {
        let user = TubeSpec::new(kind, m, n, eta, a, b).validate()?;
        let reflected = kind == LatticeKind::Honeycomb && (a + b).rem_euclid(2) == 1;
        let spec = if reflected {
            user.axial_reflection()
        } else {
            user.clone()
        };
        Ok(Canonical {
            user,
            spec,
            reflected,
        })
    }

    /// The tube to hand to the numeric routines.
    pub fn spec(&self) -> &ValidatedSpec {
        &self.spec
    }

    /// The tube as the user described it.
    pub fn user(&self) -> &ValidatedSpec {
        &self.user
    }

    pub fn reflected(&self) -> bool {
        self.reflected
    }

    /// Axial coordinate in the computation frame of user row `q`.
    pub fn canonical_q(&self, q: i64) -> i64 {
        if self.reflected {
            self.user.n() + 1 - q
        } else {
            q
        }
    }

    /// Class and bond-orientation labels of user site `(p, q)`.
    ///
    /// The class depends only on the position, so it can be read off the
    /// user spec directly. The orientation label must be flipped when the
    /// computation frame is reflected: the user's source is then a ⊣ site,
    /// while the validated user spec labels the source's parity class ⊢.
    pub fn labels(&self, p: i64, q: i64) -> (SiteClass, Symmetry) {
        let site = self
            .user
            .classify(p, q)
            .expect("grid coordinates are in range");
        let symmetry = match (self.reflected, site.symmetry) {
            (true, Symmetry::LeftT) => Symmetry::RightT,
            (true, Symmetry::RightT) => Symmetry::LeftT,
            (_, s) => s,
        };
        (site.class, symmetry)
    }

    /// Absorption distribution with ends labelled in the user frame.
    pub fn ends(&self) -> Ends {
        let g = absorption(&self.spec);
        if self.reflected {
            Ends {
                left: g.right().to_vec(),
                right: g.left().to_vec(),
                total_left: g.total_right(),
                total_right: g.total_left(),
            }
        } else {
            Ends {
                left: g.left().to_vec(),
                right: g.right().to_vec(),
                total_left: g.total_left(),
                total_right: g.total_right(),
            }
        }
    }
}

/// Convenience constructor used by every spec-bearing command.
pub fn canonicalize(
    kind: LatticeKind,
    m: i64,
    n: i64,
    eta: f64,
    source: (i64, i64),
) -> Result<Canonical, CliError> {
    Ok(Canonical::new(kind, m, n, eta, source.0, source.1)?)
}
