//! Random walks on finite lattice tubes.
//!
//! A *tube* is a strip of lattice sites wrapped into a cylinder: the
//! circumferential coordinate `p` is periodic with period `m+1`, the axial
//! coordinate `q` runs from an absorbing row at `q = 0` to another at
//! `q = n+1`. A walker starts on the interior row `b` at column `a` and hops
//! to nearest neighbours, with axial hops weighted by a bias `η > 0` relative
//! to circumferential hops, until it reaches an absorbing row.
//!
//! Three lattice geometries are supported: square, triangular and honeycomb.
//! For each one the crate computes
//!
//! * the **expectation field** `F(p, q)` — the expected number of visits to
//!   each site before absorption (the initial occupancy of the source counts
//!   once),
//! * the **absorption distribution** — the probability of ending at each site
//!   of either absorbing row, and
//! * the **axial profile** `e(q)` — the field summed around the circumference.
//!
//! The field is evaluated three independent ways, which check each other:
//!
//! 1. [`closed_form`] — exact finite spectral sums, numerically stable for
//!    arbitrarily long tubes;
//! 2. [`linear`] — direct solution of the defining balance equations as a
//!    sparse/dense linear system;
//! 3. [`mc`] — a deterministic parallel Monte Carlo walker simulation.

pub mod closed_form;
pub mod lattice;
pub mod linear;
pub mod mc;
pub mod spectral;

pub use closed_form::{
    absorption, absorption_from_field, axial_profile, expectation_at, expectation_field,
    honeycomb_region1_slope, honeycomb_slope_min, region1_slope, AbsorptionDistribution,
    AxialProfile, ClosedForm,
};
pub use lattice::{
    LatticeKind, SiteClass, SiteError, SiteRef, SpecError, StepDistribution, Symmetry, TubeSpec,
    ValidatedSpec,
};
pub use linear::{master_residual, solve_field, solve_field_with, SolveError, SolveOptions};
pub use mc::{simulate, McConfig, McEstimate, SplitMix64};
pub use spectral::{
    hyperbolic_identity_residuals, modes, ratio4, SignedLog, SpectralError, SpectralMode,
};

/// Expected number of visits to every site of a tube, stored on the dense
/// `(m+1) × (n+2)` grid. The absorbing rows `q = 0` and `q = n+1` and the
/// triangular zero mesh hold exact zeros; where a walk ends is a separate
/// question answered by [`AbsorptionDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationField {
    spec: ValidatedSpec,
    /// Row-major values, index `p * (n + 2) + q`.
    values: Vec<f64>,
}

impl ExpectationField {
    /// Builds a field from a raw value grid; `values.len()` must equal
    /// `(m+1) * (n+2)`.
    pub(crate) fn from_values(spec: ValidatedSpec, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            ((spec.m() + 1) * (spec.n() + 2)) as usize,
            "value grid does not match the tube dimensions"
        );
        ExpectationField { spec, values }
    }

    /// The validated tube this field belongs to.
    pub fn spec(&self) -> &ValidatedSpec {
        &self.spec
    }

    /// Value at `(p, q)`; `p` is reduced modulo `m+1`, `q` must lie in
    /// `0..=n+1`.
    pub fn value(&self, p: i64, q: i64) -> f64 {
        assert!(
            (0..=self.spec.n() + 1).contains(&q),
            "q = {q} outside 0..={}",
            self.spec.n() + 1
        );
        let p = self.spec.wrap_p(p);
        self.values[(p * (self.spec.n() + 2) + q) as usize]
    }

    /// Iterates over all grid sites in `(p, q)` row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let n = self.spec.n();
        (0..=self.spec.m()).flat_map(move |p| {
            (0..=n + 1).map(move |q| (p, q, self.values[(p * (n + 2) + q) as usize]))
        })
    }

    /// Largest value on the grid together with its site.
    pub fn peak(&self) -> (i64, i64, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (p, q, v) in self.iter() {
            if v > best.2 {
                best = (p, q, v);
            }
        }
        best
    }

    /// Sum of values over one row `q` (all `p`).
    pub fn row_sum(&self, q: i64) -> f64 {
        (0..=self.spec.m()).map(|p| self.value(p, q)).sum()
    }
}
