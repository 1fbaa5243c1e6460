//! Circumferential mode decomposition and overflow-safe hyperbolic ratios.
//!
//! Expectation fields on a tube separate into modes `cos[α_k(p−a)]` with
//! `α_k = 2πk/(m+1)`, `k = 1..m`. Each mode decays axially like
//! `sinh`/`cosh` of `γ_k·q` where `γ_k` solves the lattice dispersion
//! relation:
//!
//! * square:      `cosh γ = 1 + (1 − cos α)/η` (always a real root),
//! * triangular and honeycomb: `2η·cosh γ·cos α = 1 + 2η − cos 2α`.
//!
//! On the alternating lattices the right-hand side is positive while `cos α`
//! changes sign, so for half the modes the root is complex: `γ = t + iπ`.
//! All closed-form expressions stay real because `sinh(γr)` and `cosh(γr)`
//! at integer `r` reduce to `σ^r·sinh(tr)` and `σ^r·cosh(tr)` with
//! `σ = sign(cos α)`. [`SpectralMode`] stores the pair `(t, σ)` and exposes
//! these *generalized hyperbolics* as [`SpectralMode::sinh_g`] /
//! [`SpectralMode::cosh_g`].
//!
//! The mode `k = (m+1)/2` (`cos α = −1`) is excluded on the alternating
//! lattices — its role is played by the parity factor in the closed forms.
//! On the honeycomb, circumferences divisible by 4 additionally contain the
//! modes `k = (m+1)/4` and `3(m+1)/4` with `cos α = 0`, where the dispersion
//! has no finite root: the mode amplitude is forced to zero everywhere except
//! the source row. Such modes are flagged [`SpectralMode::concentrated`]
//! (`t = ∞`) and handled by a closed local term in the field evaluation.
//!
//! For long tubes the hyperbolic factors exceed `f64` range (`t·r` up to
//! several thousand), so products and ratios are manipulated as
//! [`SignedLog`] values — a sign plus log-magnitude — and exponentiated only
//! after all cancellation-free shifts have been applied symbolically.

use crate::lattice::{LatticeKind, ValidatedSpec};
use thiserror::Error;

/// Errors from spectral evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SpectralError {
    #[error("ZeroDenominator: sinh_g vanishes at one of the denominator arguments")]
    ZeroDenominator,
}

/// A number stored as `sign · exp(ln)`: exact sign, log-magnitude. Survives
/// magnitudes far beyond `f64` range; additions use sign-aware
/// log-sum-exp.
#[derive(Debug, Clone, Copy)]
pub struct SignedLog {
    sign: i8,
    ln: f64,
}

impl SignedLog {
    /// Exact zero.
    pub fn zero() -> Self {
        SignedLog {
            sign: 0,
            ln: f64::NEG_INFINITY,
        }
    }

    /// Builds from a plain `f64`.
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::zero()
        } else {
            SignedLog {
                sign: if x > 0.0 { 1 } else { -1 },
                ln: x.abs().ln(),
            }
        }
    }

    /// Builds directly from a sign and a log-magnitude.
    pub(crate) fn from_ln(sign: i8, ln: f64) -> Self {
        Self::normalized(sign, ln)
    }

    fn normalized(sign: i8, ln: f64) -> Self {
        if sign == 0 || ln == f64::NEG_INFINITY {
            Self::zero()
        } else {
            SignedLog { sign, ln }
        }
    }

    /// `sign · exp(ln − shift)` — value with a symbolic exponent shift
    /// applied before exponentiation.
    pub fn to_f64_shifted(self, shift: f64) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * (self.ln - shift).exp()
        }
    }

    /// Collapses to `f64` (may overflow to ±inf if the value genuinely
    /// exceeds `f64` range).
    pub fn to_f64(self) -> f64 {
        self.to_f64_shifted(0.0)
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Log-magnitude (`-inf` for zero).
    pub fn ln_abs(self) -> f64 {
        self.ln
    }

    pub fn signum(self) -> i8 {
        self.sign
    }
}

impl std::ops::Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        SignedLog::normalized(self.sign * rhs.sign, self.ln + rhs.ln)
    }
}

impl std::ops::Div for SignedLog {
    type Output = SignedLog;
    fn div(self, rhs: SignedLog) -> SignedLog {
        assert!(rhs.sign != 0, "SignedLog division by zero");
        SignedLog::normalized(self.sign * rhs.sign, self.ln - rhs.ln)
    }
}

impl std::ops::Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog {
            sign: -self.sign,
            ln: self.ln,
        }
    }
}

impl std::ops::Add for SignedLog {
    type Output = SignedLog;
    fn add(self, rhs: SignedLog) -> SignedLog {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (hi, lo) = if self.ln >= rhs.ln {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = lo.ln - hi.ln; // ≤ 0
        if hi.sign == lo.sign {
            SignedLog::normalized(hi.sign, hi.ln + d.exp().ln_1p())
        } else if d == 0.0 {
            SignedLog::zero()
        } else {
            SignedLog::normalized(hi.sign, hi.ln + (-d.exp()).ln_1p())
        }
    }
}

impl std::ops::Sub for SignedLog {
    type Output = SignedLog;
    fn sub(self, rhs: SignedLog) -> SignedLog {
        self + (-rhs)
    }
}

/// `ln sinh x` for `x > 0`, accurate for all magnitudes.
pub(crate) fn ln_sinh(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    x - std::f64::consts::LN_2 + (-(-2.0 * x).exp_m1()).ln()
}

/// `ln cosh x` for `x ≥ 0`, accurate for all magnitudes.
pub(crate) fn ln_cosh(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    x - std::f64::consts::LN_2 + (-2.0 * x).exp().ln_1p()
}

/// `arccosh(1 + u)` computed from the excess `u ≥ 0` without cancellation.
/// Values driven a hair below 1 by rounding (`u ≥ -1e-14`) clamp to 0.
fn acosh_1p(u: f64) -> f64 {
    assert!(
        u >= -1e-14,
        "arccosh argument below 1 by more than rounding: 1 + {u}"
    );
    let u = u.max(0.0);
    (u + (u * (u + 2.0)).sqrt()).ln_1p()
}

/// One circumferential mode: index, angle, and the signed axial decay pair
/// `(t, σ)` representing `γ = t` (σ = +1) or `γ = t + iπ` (σ = −1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMode {
    /// Mode index in `1..=m`.
    pub k: i64,
    /// Sites around the tube, `m + 1`.
    pub circumference: i64,
    /// `α_k = 2πk/(m+1)`.
    pub alpha: f64,
    /// `cos α_k` (exactly 0 for concentrated modes).
    pub cos_alpha: f64,
    /// Axial decay rate (`+∞` for concentrated modes).
    pub t: f64,
    /// `σ = ±1`; `σ = −1` encodes the extra `iπ` in the decay rate.
    pub sigma: f64,
    /// Honeycomb-only: `cos α_k = 0`, no finite decay rate, the mode lives
    /// entirely on the source row.
    pub concentrated: bool,
    /// Lattice this mode belongs to.
    pub lattice: LatticeKind,
}

impl SpectralMode {
    /// `σ^r` as a float (`r` may be negative).
    #[inline]
    fn sigma_pow(&self, r: i64) -> f64 {
        if r % 2 == 0 {
            1.0
        } else {
            self.sigma
        }
    }

    /// Generalized `sinh(γ_k · r)` at integer `r`: `σ^r · sinh(t·r)`.
    /// Plain evaluation — overflows for large `t·|r|`; use [`ratio4`] or the
    /// log forms for long tubes.
    pub fn sinh_g(&self, r: i64) -> f64 {
        debug_assert!(
            !self.concentrated,
            "concentrated modes have no finite decay rate"
        );
        self.sigma_pow(r) * (self.t * r as f64).sinh()
    }

    /// Generalized `cosh(γ_k · r)` at integer `r`: `σ^r · cosh(t·r)`.
    pub fn cosh_g(&self, r: i64) -> f64 {
        debug_assert!(
            !self.concentrated,
            "concentrated modes have no finite decay rate"
        );
        self.sigma_pow(r) * (self.t * r as f64).cosh()
    }

    /// [`SpectralMode::sinh_g`] as a [`SignedLog`] (overflow-safe).
    pub fn sinh_g_log(&self, r: i64) -> SignedLog {
        debug_assert!(!self.concentrated);
        if r == 0 {
            return SignedLog::zero();
        }
        let sign = if self.sigma_pow(r) * (r as f64).signum() > 0.0 {
            1
        } else {
            -1
        };
        SignedLog::normalized(sign, ln_sinh(self.t * r.unsigned_abs() as f64))
    }

    /// [`SpectralMode::cosh_g`] as a [`SignedLog`] (overflow-safe).
    pub fn cosh_g_log(&self, r: i64) -> SignedLog {
        debug_assert!(!self.concentrated);
        let sign = if self.sigma_pow(r) > 0.0 { 1 } else { -1 };
        SignedLog::normalized(sign, ln_cosh(self.t * r.unsigned_abs() as f64))
    }

    /// `cos[α_k · dp]` with the angle reduced in integer arithmetic first, so
    /// large displacements lose no precision.
    pub fn cos_displacement(&self, dp: i64) -> f64 {
        cos_two_pi_frac(self.k * dp, self.circumference)
    }
}

/// `cos(2π · j / circ)` with `j` reduced modulo `circ` before the float
/// division.
pub(crate) fn cos_two_pi_frac(j: i64, circ: i64) -> f64 {
    let j = j.rem_euclid(circ);
    (std::f64::consts::TAU * j as f64 / circ as f64).cos()
}

/// Builds the mode list for a tube: `k = 1..=m`, excluding `k = (m+1)/2` on
/// the alternating lattices. Modes come out sorted by `k`.
pub fn modes(spec: &ValidatedSpec) -> Vec<SpectralMode> {
    let circ = spec.circumference();
    let eta = spec.eta();
    let mut out = Vec::with_capacity(spec.m() as usize);
    for k in 1..=spec.m() {
        let alternating = spec.kind() != LatticeKind::Square;
        if alternating && 2 * k == circ {
            continue;
        }
        let alpha = std::f64::consts::TAU * k as f64 / circ as f64;
        let mode = if spec.kind() == LatticeKind::Square {
            // cosh t = 1 + (1 − cos α)/η; the excess is 2·sin²(α/2)/η.
            let half = std::f64::consts::PI * k as f64 / circ as f64;
            let u = 2.0 * half.sin().powi(2) / eta;
            SpectralMode {
                k,
                circumference: circ,
                alpha,
                cos_alpha: cos_two_pi_frac(k, circ),
                t: acosh_1p(u),
                sigma: 1.0,
                concentrated: false,
                lattice: spec.kind(),
            }
        } else if 4 * k == circ || 4 * k == 3 * circ {
            // cos α_k = 0 exactly: no finite dispersion root (honeycomb only;
            // triangular validation rejects these circumferences).
            SpectralMode {
                k,
                circumference: circ,
                alpha,
                cos_alpha: 0.0,
                t: f64::INFINITY,
                sigma: 1.0,
                concentrated: true,
                lattice: spec.kind(),
            }
        } else {
            // X = (1 + 2η − cos 2α)/(2η cos α); σ = sign X = sign cos α;
            // cosh t = |X| with the excess |X| − 1 in exactly factored form:
            // (1 − |cos α|)(1 + |cos α| + η)/(η |cos α|).
            let c = cos_two_pi_frac(k, circ);
            let abs_c = c.abs();
            let half = std::f64::consts::PI * k as f64 / circ as f64;
            // 1 − |cos α| without cancellation: 2 sin²(α/2) or 2 cos²(α/2).
            let one_minus_abs = if c >= 0.0 {
                2.0 * half.sin().powi(2)
            } else {
                2.0 * half.cos().powi(2)
            };
            let u = one_minus_abs * (1.0 + abs_c + eta) / (eta * abs_c);
            SpectralMode {
                k,
                circumference: circ,
                alpha,
                cos_alpha: c,
                t: acosh_1p(u),
                sigma: c.signum(),
                concentrated: false,
                lattice: spec.kind(),
            }
        };
        out.push(mode);
    }
    out
}

/// Threshold below which [`ratio4`] multiplies plain `sinh` values directly;
/// above it the factors move into log space.
const NAIVE_RATIO_LIMIT: f64 = 30.0;

/// The four-factor hyperbolic ratio
/// `sinh_g(r1)·sinh_g(r2) / (sinh_g(s1)·sinh_g(s2))`,
/// evaluated without overflow for `t·max(|r|, |s|)` in the thousands.
///
/// Returns 0 when a numerator argument is 0; errors when a denominator
/// argument is 0 (where `sinh_g` vanishes).
pub fn ratio4(
    mode: &SpectralMode,
    r1: i64,
    r2: i64,
    s1: i64,
    s2: i64,
) -> Result<f64, SpectralError> {
    assert!(
        mode.t.is_finite(),
        "ratio4 is undefined for concentrated modes"
    );
    if s1 == 0 || s2 == 0 || mode.t == 0.0 {
        return Err(SpectralError::ZeroDenominator);
    }
    if r1 == 0 || r2 == 0 {
        return Ok(0.0);
    }
    let max_arg = r1.abs().max(r2.abs()).max(s1.abs()).max(s2.abs());
    if mode.t * max_arg as f64 <= NAIVE_RATIO_LIMIT {
        Ok(mode.sinh_g(r1) * mode.sinh_g(r2) / (mode.sinh_g(s1) * mode.sinh_g(s2)))
    } else {
        let num = mode.sinh_g_log(r1) * mode.sinh_g_log(r2);
        let den = mode.sinh_g_log(s1) * mode.sinh_g_log(s2);
        Ok((num / den).to_f64())
    }
}

/// Left-minus-right residuals of the three hyperbolic product identities used
/// to collapse the honeycomb numerators, each normalised by its largest
/// additive term (floored at 1):
///
/// 1. `sinh(γ(b−1))sinh(γ(b−n−1)) + sinh(γb)sinh(γ(b−n))
///     = sinh(γ)sinh(γ(n+1)) + 2cosh(γ)sinh(γb)sinh(γ(b−n−1))`
/// 2. `sinh(γ(b+1−n))sinh(γb) + sinh(γ(b−1))sinh(γ(b−n))
///     = sinh(γ)sinh(γn) + 2cosh(γ)sinh(γb)sinh(γ(b−n))`
/// 3. `sinh(γ(b−n))sinh(γb) − sinh(γ(b−1))sinh(γ(b+1−n))
///     = (cosh(γ(n−2)) − cosh(γn))/2`
///
/// All three are analytically zero for every real `γ` and integers `b`, `n`.
pub fn hyperbolic_identity_residuals(gamma: f64, b: i64, n: i64) -> [f64; 3] {
    let sh = |r: i64| (gamma * r as f64).sinh();
    let ch = |r: i64| (gamma * r as f64).cosh();
    let rel = |lhs_terms: &[f64], rhs_terms: &[f64]| {
        let l: f64 = lhs_terms.iter().sum();
        let r: f64 = rhs_terms.iter().sum();
        let scale = lhs_terms
            .iter()
            .chain(rhs_terms.iter())
            .fold(1.0_f64, |acc, t| acc.max(t.abs()));
        (l - r) / scale
    };
    let r1 = rel(
        &[sh(b - 1) * sh(b - n - 1), sh(b) * sh(b - n)],
        &[sh(1) * sh(n + 1), 2.0 * ch(1) * sh(b) * sh(b - n - 1)],
    );
    let r2 = rel(
        &[sh(b + 1 - n) * sh(b), sh(b - 1) * sh(b - n)],
        &[sh(1) * sh(n), 2.0 * ch(1) * sh(b) * sh(b - n)],
    );
    let r3 = rel(
        &[sh(b - n) * sh(b), -sh(b - 1) * sh(b + 1 - n)],
        &[0.5 * ch(n - 2), -0.5 * ch(n)],
    );
    [r1, r2, r3]
}
