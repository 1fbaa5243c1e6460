//! Exact closed-form evaluation of the expectation field, the absorption
//! distribution and the axial profile.
//!
//! Each interior value is a linear-in-`q` term plus a finite sum over the
//! circumferential modes of [`crate::spectral`]. The hyperbolic mode factors
//! are evaluated through [`ratio4`] / [`SignedLog`], so tubes with
//! `t·n` in the thousands evaluate without overflow or catastrophic
//! cancellation. On the honeycomb every mode numerator and the shared
//! denominator are first reduced (using product-to-sum identities) to sums of
//! *same-sign* hyperbolic terms times an explicit overall sign, which removes
//! all intra-mode cancellation:
//!
//! * denominator: `−σⁿ·sinh t·(η|c|·sinh(tn) + 2c²·sinh(t(n+1)))`,
//! * source bracket: `−σ^{b+n}·(η·sinh(t(n−b)) + 2|c|·sinh(t(n−b+1)))`,
//!
//! with `c = cos α_k` and `(t, σ)` the signed decay pair of the mode.
//!
//! Honeycomb tubes whose circumference is divisible by 4 carry two
//! *concentrated* modes (`cos α_k = 0`) with no finite decay rate; their exact
//! contribution lives on the source row (and the row above it) only and is
//! added separately — see [`SpectralMode::concentrated`].

use crate::lattice::{LatticeKind, SiteClass, Symmetry, ValidatedSpec};
use crate::spectral::{ln_sinh, modes, ratio4, SignedLog, SpectralMode};
use crate::ExpectationField;
use serde::Serialize;

/// Probability of ending at each site of the two absorbing rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionDistribution {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl AbsorptionDistribution {
    pub(crate) fn new(left: Vec<f64>, right: Vec<f64>) -> Self {
        assert_eq!(left.len(), right.len());
        AbsorptionDistribution { left, right }
    }

    /// Per-column probabilities of absorption at `q = 0`, indexed by `p`.
    pub fn left(&self) -> &[f64] {
        &self.left
    }

    /// Per-column probabilities of absorption at `q = n+1`, indexed by `p`.
    pub fn right(&self) -> &[f64] {
        &self.right
    }

    /// Total probability of leaving through `q = 0`.
    pub fn total_left(&self) -> f64 {
        self.left.iter().sum()
    }

    /// Total probability of leaving through `q = n+1`.
    pub fn total_right(&self) -> f64 {
        self.right.iter().sum()
    }
}

/// The expectation field summed around the circumference, one value per
/// interior row `q ∈ 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxialProfile {
    values: Vec<f64>,
}

impl AxialProfile {
    /// Row sums for `q = 1..=n`, in order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row sum at `q` (must lie in `1..=n`).
    pub fn value(&self, q: i64) -> f64 {
        assert!(
            q >= 1 && (q as usize) <= self.values.len(),
            "q = {q} outside 1..={}",
            self.values.len()
        );
        self.values[(q - 1) as usize]
    }

    /// Interior row with the largest sum (first such row on ties).
    pub fn peak(&self) -> (i64, f64) {
        let mut best = (1_i64, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i as i64 + 1, v);
            }
        }
        best
    }
}

/// `sinh(t·r)` for `r ≥ 0` as a non-negative [`SignedLog`].
fn pos_sinh_log(t: f64, r: i64) -> SignedLog {
    debug_assert!(r >= 0);
    if r == 0 {
        SignedLog::zero()
    } else {
        SignedLog::from_ln(1, ln_sinh(t * r as f64))
    }
}

/// `σ^e` for `σ = ±1` and any integer exponent.
fn sigma_pow(sigma: f64, e: i64) -> f64 {
    if sigma > 0.0 || e.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Cancellation-free per-mode factors for the honeycomb evaluation.
struct HoneyMode {
    mode: SpectralMode,
    abs_c: f64,
    /// `sinh t · (η|c|·sinh(tn) + 2c²·sinh(t(n+1)))`; the full denominator is
    /// `−σⁿ` times this.
    den: SignedLog,
    /// `η·sinh(t(n−b)) + 2|c|·sinh(t(n−b+1))`; the source-row bracket is
    /// `−σ^{b+n}` times this.
    wpos: SignedLog,
    /// `sinh(t·b)`.
    shb: SignedLog,
}

/// Evaluator for the exact expectation field of one tube. Construction
/// precomputes the mode data; evaluation is then cheap per site.
pub struct ClosedForm {
    spec: ValidatedSpec,
    modes: Vec<SpectralMode>,
    /// Parallel to the non-concentrated prefix ordering; empty on
    /// square/triangular tubes.
    honey: Vec<HoneyMode>,
    /// Coefficient per concentrated mode on the source row (⊢, `q = b`).
    conc_source_row: f64,
    /// Coefficient per concentrated mode on the row above (⊣, `q = b+1`).
    conc_next_row: f64,
}

impl ClosedForm {
    pub fn new(spec: &ValidatedSpec) -> Self {
        let spec = spec.clone();
        let all_modes = modes(&spec);
        let eta = spec.eta();
        let (n, b) = (spec.n(), spec.b());
        let mut honey = Vec::new();
        if spec.kind() == LatticeKind::Honeycomb {
            for mode in all_modes.iter().filter(|m| !m.concentrated) {
                let t = mode.t;
                let abs_c = mode.cos_alpha.abs();
                let den = pos_sinh_log(t, 1)
                    * (SignedLog::from_f64(eta * abs_c) * pos_sinh_log(t, n)
                        + SignedLog::from_f64(2.0 * abs_c * abs_c) * pos_sinh_log(t, n + 1));
                let wpos = SignedLog::from_f64(eta) * pos_sinh_log(t, n - b)
                    + SignedLog::from_f64(2.0 * abs_c) * pos_sinh_log(t, n - b + 1);
                let shb = pos_sinh_log(t, b);
                honey.push(HoneyMode {
                    mode: *mode,
                    abs_c,
                    den,
                    wpos,
                    shb,
                });
            }
        }
        let d = 2.0 + eta;
        let circ = spec.circumference() as f64;
        // The concentrated modes couple the source row to the row above it
        // unless the source sits on the last interior row, where the upper
        // coupling is replaced by the absorbing boundary condition.
        let (conc_source_row, conc_next_row) = if b < n {
            (
                d * d / (4.0 * (1.0 + eta) * circ),
                eta * d / (4.0 * (1.0 + eta) * circ),
            )
        } else {
            (1.0 / circ, 0.0)
        };
        ClosedForm {
            spec,
            modes: all_modes,
            honey,
            conc_source_row,
            conc_next_row,
        }
    }

    /// The tube this evaluator belongs to.
    pub fn spec(&self) -> &ValidatedSpec {
        &self.spec
    }

    /// Expected number of visits to `(p, q)`; `p` is reduced modulo `m+1` and
    /// `q` must lie in `0..=n+1`. Exactly zero on the absorbing rows and on
    /// the triangular zero mesh — absorbed walks are accounted for by
    /// [`absorption`], not by the field.
    ///
    /// # Panics
    /// If `q` lies outside `0..=n+1`.
    pub fn value(&self, p: i64, q: i64) -> f64 {
        let site = self.spec.classify(p, q).expect("q must lie in 0..=n+1");
        match site.class {
            SiteClass::Interior => self.interior_value(site.p, site.q),
            _ => 0.0,
        }
    }

    /// Value at an interior site of the source's parity class (the caller has
    /// already dispatched absorbing rows and the zero mesh).
    fn interior_value(&self, p: i64, q: i64) -> f64 {
        debug_assert!((1..=self.spec.n()).contains(&q));
        match self.spec.kind() {
            LatticeKind::Square => self.ring_lattice_value(p, q, false),
            LatticeKind::Triangular => self.ring_lattice_value(p, q, true),
            LatticeKind::Honeycomb => self.honeycomb_value(p, q),
        }
    }

    /// Shared square/triangular form: a linear-in-`q` term plus a mode sum of
    /// four-factor sinh ratios. `alternating` selects the triangular variant
    /// (coefficient `1+2η`, parity factor 2, primed sum with an extra
    /// `1/cos α_k`).
    fn ring_lattice_value(&self, p: i64, q: i64, alternating: bool) -> f64 {
        let spec = &self.spec;
        let (n, b) = (spec.n(), spec.b());
        let eta = spec.eta();
        let circ = spec.circumference() as f64;
        let coeff = if alternating {
            1.0 + 2.0 * eta
        } else {
            2.0 + 2.0 * eta
        };
        // Region I (q ≤ b) decays from the source towards q = 0; region II is
        // its mirror towards q = n+1. Both agree at q = b.
        let (r1, r2) = if q <= b {
            (n + 1 - b, q)
        } else {
            (n + 1 - q, b)
        };
        let parity_factor = if alternating { 2.0 } else { 1.0 };
        let linear = coeff * (r1 * r2) as f64 * parity_factor / (eta * (n + 1) as f64 * circ);
        let dp = p - spec.a();
        let mut mode_sum = 0.0;
        for mode in &self.modes {
            let radial = ratio4(mode, r1, r2, 1, n + 1)
                .expect("positive decay rate and nonzero denominator rows");
            let mut term = mode.cos_displacement(dp) * radial;
            if alternating {
                term /= mode.cos_alpha;
            }
            mode_sum += term;
        }
        linear + coeff * mode_sum / (eta * circ)
    }

    fn honeycomb_value(&self, p: i64, q: i64) -> f64 {
        let spec = &self.spec;
        let (n, b) = (spec.n(), spec.b());
        let eta = spec.eta();
        let d = 2.0 + eta;
        let circ = spec.circumference() as f64;
        let nb = d * n as f64 + 2.0;
        // Fraction of walks absorbed at q = 0, written without subtraction.
        let l_factor = (d * (n - b) as f64 + 2.0) / nb;
        let site = spec.classify(p, q).expect("interior row");
        let towards_source = site.symmetry == Symmetry::LeftT;
        let region_one = q <= b;
        let dp = p - spec.a();

        // Branch-specific prefactor (power of 2+η), linear term, mode
        // numerator and overall mode sign exponent.
        let base = d / (2.0 * eta * circ);
        let (pref, linear, sign_exp) = match (towards_source, region_one) {
            (true, true) => (base * d, 2.0 * l_factor * q as f64, q + b),
            (true, false) => (
                base * d,
                2.0 * b as f64 * (d * (n - q) as f64 + 2.0) / nb,
                q + b,
            ),
            (false, true) => (base, 2.0 * l_factor * (d * q as f64 - eta), q + b + 1),
            (false, false) => (base * d * d, 2.0 * (b * (n + 1 - q)) as f64 / nb, q + b + 1),
        };

        let mut mode_sum = 0.0;
        for hm in &self.honey {
            let t = hm.mode.t;
            let numerator = match (towards_source, region_one) {
                (true, true) => pos_sinh_log(t, q) * hm.wpos,
                (true, false) => {
                    hm.shb
                        * (SignedLog::from_f64(eta) * pos_sinh_log(t, n - q)
                            + SignedLog::from_f64(2.0 * hm.abs_c) * pos_sinh_log(t, n + 1 - q))
                }
                (false, true) => {
                    (SignedLog::from_f64(eta) * pos_sinh_log(t, q - 1)
                        + SignedLog::from_f64(2.0 * hm.abs_c) * pos_sinh_log(t, q))
                        * hm.wpos
                }
                (false, false) => pos_sinh_log(t, n + 1 - q) * hm.shb,
            };
            let sign = sigma_pow(hm.mode.sigma, sign_exp);
            mode_sum += hm.mode.cos_displacement(dp) * sign * (numerator / hm.den).to_f64();
        }

        let mut value = pref * (linear + mode_sum);
        // Concentrated modes live on the source row and the row above it.
        let conc = if towards_source && q == b {
            self.conc_source_row
        } else if !towards_source && q == b + 1 {
            self.conc_next_row
        } else {
            0.0
        };
        if conc != 0.0 {
            for mode in self.modes.iter().filter(|m| m.concentrated) {
                value += conc * mode.cos_displacement(dp);
            }
        }
        value
    }

    /// Evaluates the whole `(m+1) × (n+2)` grid.
    pub fn field(&self) -> ExpectationField {
        let (m, n) = (self.spec.m(), self.spec.n());
        let mut values = Vec::with_capacity(((m + 1) * (n + 2)) as usize);
        for p in 0..=m {
            for q in 0..=n + 1 {
                values.push(self.value(p, q));
            }
        }
        ExpectationField::from_values(self.spec.clone(), values)
    }
}

/// Expected number of visits to `(p, q)` (see [`ClosedForm::value`]).
pub fn expectation_at(spec: &ValidatedSpec, p: i64, q: i64) -> f64 {
    ClosedForm::new(spec).value(p, q)
}

/// The full expectation field of a tube.
pub fn expectation_field(spec: &ValidatedSpec) -> ExpectationField {
    ClosedForm::new(spec).field()
}

/// Reads the absorption distribution off any expectation field (closed-form,
/// linear-solve or Monte Carlo): the probability of ending at a boundary site
/// is the axial-hop probability times the field on the interior sites that
/// feed it.
pub fn absorption_from_field(field: &ExpectationField) -> AbsorptionDistribution {
    let spec = field.spec();
    let (m, n) = (spec.m(), spec.n());
    let factor = spec.eta() / spec.step_denominator();
    let mut left = Vec::with_capacity((m + 1) as usize);
    let mut right = Vec::with_capacity((m + 1) as usize);
    for p in 0..=m {
        match spec.kind() {
            LatticeKind::Square => {
                left.push(factor * field.value(p, 1));
                right.push(factor * field.value(p, n));
            }
            LatticeKind::Triangular => {
                // Zero-mesh neighbours hold exact zeros, so unreachable end
                // sites come out as exactly zero.
                left.push(factor * (field.value(p - 1, 1) + field.value(p + 1, 1)));
                right.push(factor * (field.value(p - 1, n) + field.value(p + 1, n)));
            }
            LatticeKind::Honeycomb => {
                let feeds_left =
                    spec.classify(p, 1).expect("interior row").symmetry == Symmetry::RightT;
                let feeds_right =
                    spec.classify(p, n).expect("interior row").symmetry == Symmetry::LeftT;
                left.push(if feeds_left {
                    factor * field.value(p, 1)
                } else {
                    0.0
                });
                right.push(if feeds_right {
                    factor * field.value(p, n)
                } else {
                    0.0
                });
            }
        }
    }
    AbsorptionDistribution::new(left, right)
}

/// Closed-form absorption distribution of a tube.
pub fn absorption(spec: &ValidatedSpec) -> AbsorptionDistribution {
    absorption_from_field(&expectation_field(spec))
}

/// Closed-form axial profile: the field summed around the circumference, for
/// the interior rows `q = 1..=n`. The mode sums cancel around the ring,
/// leaving a profile that is piecewise linear in `q` on each side of the
/// source row.
pub fn axial_profile(spec: &ValidatedSpec) -> AxialProfile {
    let (n, b) = (spec.n(), spec.b());
    let eta = spec.eta();
    let mut values = Vec::with_capacity(n as usize);
    for q in 1..=n {
        let value = match spec.kind() {
            LatticeKind::Square | LatticeKind::Triangular => {
                let coeff = match spec.kind() {
                    LatticeKind::Square => 2.0 + 2.0 * eta,
                    _ => 1.0 + 2.0 * eta,
                };
                let x = if q <= b {
                    q * (n + 1 - b)
                } else {
                    b * (n + 1 - q)
                };
                coeff * x as f64 / (eta * (n + 1) as f64)
            }
            LatticeKind::Honeycomb => {
                let d = 2.0 + eta;
                let nb = d * n as f64 + 2.0;
                if q <= b {
                    let l_factor = (d * (n - b) as f64 + 2.0) / nb;
                    l_factor * (d * d * q as f64 / eta - d / 2.0)
                } else {
                    b as f64 * d * d * (d * (2 * n + 1 - 2 * q) as f64 + 2.0) / (2.0 * eta * nb)
                }
            }
        };
        values.push(value);
    }
    AxialProfile { values }
}

/// Slope of the axial profile on the rising side (`1 ≤ q ≤ b`).
pub fn region1_slope(spec: &ValidatedSpec) -> f64 {
    let (n, b) = (spec.n(), spec.b());
    let eta = spec.eta();
    match spec.kind() {
        LatticeKind::Square => (2.0 + 2.0 * eta) * (n + 1 - b) as f64 / (eta * (n + 1) as f64),
        LatticeKind::Triangular => (1.0 + 2.0 * eta) * (n + 1 - b) as f64 / (eta * (n + 1) as f64),
        LatticeKind::Honeycomb => honeycomb_region1_slope(n, b, eta),
    }
}

/// Rising-side slope of the honeycomb axial profile as a function of the
/// bias alone (it does not depend on the circumference):
/// `(η+2)²/η · ((η+2)(n−b) + 2)/((η+2)n + 2)`. Diverges at both `η → 0` and
/// `η → ∞`, with a single interior minimum whenever `b < n` is not too small.
pub fn honeycomb_region1_slope(n: i64, b: i64, eta: f64) -> f64 {
    assert!(n >= 1 && (1..=n).contains(&b), "need 1 <= b <= n");
    assert!(eta > 0.0 && eta.is_finite(), "need a positive finite bias");
    let d = 2.0 + eta;
    let nb = d * n as f64 + 2.0;
    d * d * (d * (n - b) as f64 + 2.0) / (eta * nb)
}

/// Minimises [`honeycomb_region1_slope`] over `η ∈ [1e-3, 1e3]` by
/// golden-section search on `ln η` (interval tolerance `1e-6`), returning
/// `(η_min, slope(η_min))`. If the slope is monotone on the interval the
/// search converges to the corresponding endpoint.
pub fn honeycomb_slope_min(n: i64, b: i64) -> (f64, f64) {
    let f = |x: f64| honeycomb_region1_slope(n, b, x.exp());
    let (mut lo, mut hi) = (1e-3_f64.ln(), 1e3_f64.ln());
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-6 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let eta = (0.5 * (lo + hi)).exp();
    (eta, honeycomb_region1_slope(n, b, eta))
}
