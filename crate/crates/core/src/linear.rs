//! Direct numerical solution of the balance equations that define the
//! expectation field — an oracle that is independent of the spectral closed
//! forms.
//!
//! The expected visit counts on the interior sites satisfy one linear
//! equation per site: the value at a site equals the source indicator plus
//! the probability-weighted values of the sites one hop away. Because every
//! hop kernel here is symmetric site-to-site, that system is `(I − P)·F = e`
//! with `P` symmetric sub-stochastic, so `I − P` is positive definite and
//! both a direct factorisation and conjugate gradients apply.
//!
//! Small systems are solved densely (LU plus one iterative-refinement pass);
//! large ones by conjugate gradients on a compressed sparse-row matrix. The
//! crossover is [`SolveOptions::dense_threshold`].

use crate::lattice::{SiteClass, ValidatedSpec};
use crate::ExpectationField;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

/// Hard cap on the number of unknowns accepted by [`solve_field`].
pub const MAX_UNKNOWNS: usize = 250_000;

/// Tuning knobs for [`solve_field_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Systems with fewer unknowns than this are solved by dense LU;
    /// everything else goes through conjugate gradients.
    pub dense_threshold: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            dense_threshold: 2000,
        }
    }
}

/// Why a linear solve failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("TooLarge: {unknowns} unknowns exceeds the supported maximum of {max}")]
    TooLarge { unknowns: usize, max: usize },
    #[error(
        "NoConvergence: iterative solve stalled after {iterations} iterations \
         (residual norm {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Compressed sparse-row matrix, rows sorted by column with no duplicates.
struct Csr {
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    /// `y ← A·x`. Each output entry is accumulated serially in storage
    /// order, so the result does not depend on the thread schedule.
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            *yi = acc;
        });
    }

    /// Maximum absolute row sum.
    fn inf_norm(&self) -> f64 {
        (0..self.row_ptr.len() - 1)
            .map(|i| {
                self.val[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn order(&self) -> usize {
        self.row_ptr.len() - 1
    }
}

/// The balance equations of one tube in matrix form, together with the
/// site ↔ unknown-index maps needed to scatter the solution back onto the
/// grid.
struct Assembled {
    /// Grid coordinates of each unknown.
    sites: Vec<(i64, i64)>,
    /// `I − P` restricted to the interior accessible sites.
    matrix: Csr,
    /// Source indicator.
    rhs: Vec<f64>,
}

fn assemble(spec: &ValidatedSpec) -> Result<Assembled, SolveError> {
    let (m, n) = (spec.m(), spec.n());
    let slot = |p: i64, q: i64| (p * n + (q - 1)) as usize;

    // Enumerate the interior accessible sites (the triangular zero mesh never
    // becomes an unknown) and bail out before allocating anything big.
    let mut index: Vec<Option<usize>> = vec![None; ((m + 1) * n) as usize];
    let mut sites = Vec::new();
    for p in 0..=m {
        for q in 1..=n {
            let site = spec.classify(p, q).expect("interior rows are in range");
            if site.class == SiteClass::Interior {
                if sites.len() == MAX_UNKNOWNS {
                    let unknowns = (0..=m)
                        .flat_map(|p| (1..=n).map(move |q| (p, q)))
                        .filter(|&(p, q)| {
                            spec.classify(p, q).expect("in range").class == SiteClass::Interior
                        })
                        .count();
                    return Err(SolveError::TooLarge {
                        unknowns,
                        max: MAX_UNKNOWNS,
                    });
                }
                index[slot(p, q)] = Some(sites.len());
                sites.push((p, q));
            }
        }
    }

    let nu = sites.len();
    let mut row_ptr = Vec::with_capacity(nu + 1);
    let mut col = Vec::new();
    let mut val = Vec::new();
    row_ptr.push(0);
    for &(p, q) in &sites {
        let site = spec.classify(p, q).expect("enumerated above");
        let dist = spec.step_distribution(&site).expect("interior site");
        let i = index[slot(p, q)].expect("enumerated above");
        let mut entries = vec![(i, 1.0)];
        for step in &dist.steps {
            if step.target.class == SiteClass::Interior {
                let j = index[slot(step.target.p, step.target.q)]
                    .expect("interior targets were enumerated");
                entries.push((j, -step.probability));
            }
        }
        // Narrow tubes produce coincident targets (and even self-loops on a
        // two-column triangular tube); merge them per column.
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (j, v) in entries {
            match merged.last_mut() {
                Some((jj, vv)) if *jj == j => *vv += v,
                _ => merged.push((j, v)),
            }
        }
        for (j, v) in merged {
            col.push(j);
            val.push(v);
        }
        row_ptr.push(col.len());
    }

    let mut rhs = vec![0.0; nu];
    rhs[index[slot(spec.a(), spec.b())].expect("the source is interior")] = 1.0;
    Ok(Assembled {
        sites,
        matrix: Csr { row_ptr, col, val },
        rhs,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense LU with one iterative-refinement pass (the refinement residual is
/// formed from the sparse matrix, which is exact up to rounding).
fn solve_dense(csr: &Csr, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    let nu = csr.order();
    let mut dense = DMatrix::<f64>::zeros(nu, nu);
    for i in 0..nu {
        for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
            dense[(i, csr.col[k])] = csr.val[k];
        }
    }
    let lu = dense.lu();
    let singular = || SolveError::NoConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    };
    let mut x = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or_else(singular)?;
    let mut residual = vec![0.0; nu];
    csr.matvec(x.as_slice(), &mut residual);
    for (r, b) in residual.iter_mut().zip(rhs) {
        *r = b - *r;
    }
    let correction = lu
        .solve(&DVector::from_vec(residual))
        .ok_or_else(singular)?;
    x += correction;
    Ok(x.data.into())
}

/// Conjugate gradients with exact-residual verification: whenever the
/// recurrence residual reaches the tolerance the true residual `b − A·x` is
/// recomputed, and the iteration restarts from it if rounding drift has made
/// the recurrence optimistic.
fn solve_cg(csr: &Csr, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    let nu = csr.order();
    let b_norm = norm(rhs);
    let a_inf = csr.inf_norm();
    let tolerance = |x: &[f64]| 1e-12 * (b_norm + a_inf * norm(x));

    let mut x = vec![0.0; nu];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; nu];
    let mut rs = dot(&r, &r);
    let mut total_iterations = 0;
    let budget = 2 * nu + 200;

    for _restart in 0..4 {
        while rs.sqrt() > tolerance(&x) {
            if total_iterations >= budget {
                return Err(SolveError::NoConvergence {
                    iterations: total_iterations,
                    residual: rs.sqrt(),
                });
            }
            csr.matvec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !pap.is_finite() || pap <= 0.0 {
                return Err(SolveError::NoConvergence {
                    iterations: total_iterations,
                    residual: rs.sqrt(),
                });
            }
            let alpha = rs / pap;
            for i in 0..nu {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rs_next = dot(&r, &r);
            let beta = rs_next / rs;
            for i in 0..nu {
                p[i] = r[i] + beta * p[i];
            }
            rs = rs_next;
            total_iterations += 1;
        }
        // Confirm against the true residual before declaring victory.
        csr.matvec(&x, &mut ap);
        for i in 0..nu {
            r[i] = rhs[i] - ap[i];
        }
        rs = dot(&r, &r);
        if rs.sqrt() <= tolerance(&x) {
            return Ok(x);
        }
        p.copy_from_slice(&r);
    }
    Err(SolveError::NoConvergence {
        iterations: total_iterations,
        residual: rs.sqrt(),
    })
}

/// Solves the balance equations for the expectation field with the given
/// options. The returned grid carries exact zeros on the absorbing rows and
/// on unreachable sites, exactly like the closed-form field.
pub fn solve_field_with(
    spec: &ValidatedSpec,
    options: &SolveOptions,
) -> Result<ExpectationField, SolveError> {
    let assembled = assemble(spec)?;
    let solution = if assembled.sites.len() < options.dense_threshold {
        solve_dense(&assembled.matrix, &assembled.rhs)?
    } else {
        solve_cg(&assembled.matrix, &assembled.rhs)?
    };

    let (m, n) = (spec.m(), spec.n());
    let mut values = vec![0.0; ((m + 1) * (n + 2)) as usize];
    for (&(p, q), &v) in assembled.sites.iter().zip(&solution) {
        values[(p * (n + 2) + q) as usize] = v;
    }
    Ok(ExpectationField::from_values(spec.clone(), values))
}

/// Solves the balance equations with default options.
pub fn solve_field(spec: &ValidatedSpec) -> Result<ExpectationField, SolveError> {
    solve_field_with(spec, &SolveOptions::default())
}

/// Largest absolute balance-equation residual of a field over the interior
/// accessible sites. For each site the residual is the stored value minus the
/// source indicator minus the hop-probability-weighted values one hop away
/// (the kernels are symmetric site-to-site, so a site's own outgoing hops
/// carry the same probabilities as the incoming ones). Any field claiming to
/// be an expectation field must drive this to rounding level.
pub fn master_residual(field: &ExpectationField) -> f64 {
    let spec = field.spec();
    let mut worst = 0.0_f64;
    for p in 0..=spec.m() {
        for q in 1..=spec.n() {
            let site = spec.classify(p, q).expect("interior rows are in range");
            if site.class != SiteClass::Interior {
                continue;
            }
            let dist = spec.step_distribution(&site).expect("interior site");
            let mut acc = field.value(p, q);
            if p == spec.a() && q == spec.b() {
                acc -= 1.0;
            }
            for step in &dist.steps {
                if step.target.class == SiteClass::Interior {
                    acc -= step.probability * field.value(step.target.p, step.target.q);
                }
            }
            worst = worst.max(acc.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::absorption_from_field;
    use crate::lattice::{LatticeKind, TubeSpec};

    fn spec(kind: LatticeKind, m: i64, n: i64, eta: f64, a: i64, b: i64) -> ValidatedSpec {
        TubeSpec::new(kind, m, n, eta, a, b)
            .validate()
            .expect("test spec must validate")
    }

    fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
        assert!(
            (got - want).abs() <= tol * want.abs().max(1.0),
            "{what}: got {got}, want {want}"
        );
    }

    #[test]
    fn square_unit_tube_matches_hand_solution() {
        let s = spec(LatticeKind::Square, 1, 1, 1.0, 0, 1);
        let field = solve_field(&s).unwrap();
        assert_close(field.value(0, 1), 4.0 / 3.0, 1e-13, "source");
        assert_close(field.value(1, 1), 2.0 / 3.0, 1e-13, "far column");
        assert_eq!(field.value(0, 0), 0.0, "absorbing rows stay zero");
        let g = absorption_from_field(&field);
        assert_close(g.left()[0], 1.0 / 3.0, 1e-13, "left end under source");
        assert_close(g.right()[1], 1.0 / 6.0, 1e-13, "right end far column");
    }

    #[test]
    fn honeycomb_unit_tube_matches_hand_solution() {
        let s = spec(LatticeKind::Honeycomb, 1, 1, 1.0, 0, 1);
        let field = solve_field(&s).unwrap();
        assert_close(field.value(0, 1), 9.0 / 5.0, 1e-13, "source (⊢)");
        assert_close(field.value(1, 1), 6.0 / 5.0, 1e-13, "⊣ site");
        // The ⊢ site cannot reach the left end in one hop, nor ⊣ the right.
        let g = absorption_from_field(&field);
        assert_eq!(g.left()[0], 0.0);
        assert_eq!(g.right()[1], 0.0);
        assert_close(g.left()[1], 2.0 / 5.0, 1e-13, "left end");
        assert_close(g.right()[0], 3.0 / 5.0, 1e-13, "right end");
    }

    #[test]
    fn two_column_triangular_tube_reduces_to_a_biased_line() {
        // With two columns the ring hops are self-loops and the diagonals
        // both land on the opposite column, so each accessible row holds a
        // single site and the axial motion is a simple random walk with
        // self-loops. Expected visits: (1+2η)·q·(n+1−b)/(η·(n+1)) for q ≤ b.
        let (n, b, eta) = (3_i64, 2_i64, 0.7_f64);
        let s = spec(LatticeKind::Triangular, 1, n, eta, 0, b);
        let field = solve_field(&s).unwrap();
        for q in 1..=n {
            let x = if q <= b {
                q * (n + 1 - b)
            } else {
                b * (n + 1 - q)
            };
            let want = (1.0 + 2.0 * eta) * x as f64 / (eta * (n + 1) as f64);
            let p = if (q - b).rem_euclid(2) == 0 { 0 } else { 1 };
            assert_close(field.value(p, q), want, 1e-13, &format!("row {q}"));
            assert_eq!(field.value(p + 1, q), 0.0, "zero-mesh column in row {q}");
        }
    }

    #[test]
    fn conjugate_gradients_agrees_with_dense_lu() {
        let force_cg = SolveOptions { dense_threshold: 0 };
        let specs = [
            spec(LatticeKind::Square, 4, 60, 0.8, 2, 17),
            spec(LatticeKind::Triangular, 5, 40, 1.6, 1, 30),
            spec(LatticeKind::Honeycomb, 5, 40, 0.5, 2, 9),
        ];
        for s in &specs {
            let dense = solve_field(s).unwrap();
            let cg = solve_field_with(s, &force_cg).unwrap();
            for (p, q, v) in dense.iter() {
                let w = cg.value(p, q);
                assert!(
                    (v - w).abs() <= 1e-10 * v.abs().max(1.0),
                    "{:?} site ({p},{q}): dense {v} vs cg {w}",
                    s.kind()
                );
            }
        }
    }

    #[test]
    fn solved_fields_satisfy_the_balance_equations() {
        let specs = [
            spec(LatticeKind::Square, 6, 8, 1.9, 3, 4),
            spec(LatticeKind::Triangular, 9, 7, 0.35, 2, 5),
            spec(LatticeKind::Honeycomb, 7, 6, 1.1, 3, 6),
        ];
        for s in &specs {
            let field = solve_field(s).unwrap();
            let residual = master_residual(&field);
            assert!(residual < 1e-13, "{:?}: residual {residual}", s.kind());
        }
    }

    #[test]
    fn master_residual_flags_a_corrupted_field() {
        let s = spec(LatticeKind::Square, 4, 5, 1.0, 1, 2);
        let field = solve_field(&s).unwrap();
        assert!(master_residual(&field) < 1e-13);
        let mut values: Vec<f64> = field.iter().map(|(_, _, v)| v).collect();
        values[(2 * (s.n() + 2) + 3) as usize] += 1e-3;
        let corrupted = ExpectationField::from_values(s.clone(), values);
        assert!(master_residual(&corrupted) > 1e-4);
    }

    #[test]
    fn absorption_is_conserved_and_split_by_starting_row() {
        let s = spec(LatticeKind::Square, 5, 9, 2.4, 0, 3);
        let g = absorption_from_field(&solve_field(&s).unwrap());
        assert_close(g.total_left() + g.total_right(), 1.0, 1e-13, "conservation");
        assert_close(g.total_left(), 7.0 / 10.0, 1e-13, "left split");
    }

    #[test]
    fn shifting_the_source_column_shifts_the_whole_solution() {
        // Rotational invariance: moving the source around the ring permutes
        // the unknowns (and the assembly order) without changing the physics.
        let base = solve_field(&spec(LatticeKind::Honeycomb, 5, 5, 1.2, 0, 2)).unwrap();
        let shifted = solve_field(&spec(LatticeKind::Honeycomb, 5, 5, 1.2, 2, 2)).unwrap();
        for (p, q, v) in base.iter() {
            assert!(
                (v - shifted.value(p + 2, q)).abs() <= 1e-13 * v.abs().max(1.0),
                "site ({p},{q})"
            );
        }
    }

    #[test]
    fn oversized_systems_are_rejected_up_front() {
        let s = spec(LatticeKind::Square, 999, 999, 1.0, 0, 1);
        match solve_field(&s) {
            Err(SolveError::TooLarge { unknowns, max }) => {
                assert_eq!(unknowns, 999_000);
                assert_eq!(max, MAX_UNKNOWNS);
            }
            other => panic!("expected TooLarge, got {other:?}"),
        }
    }
}
