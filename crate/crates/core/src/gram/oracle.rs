//! Full-matrix reference solver for small problems.
//!
//! Works directly on the `m × m` Gram matrix with ADMM splitting between the
//! polyhedral part (fixed diagonal, entrywise lower bounds) and the PSD cone
//! (eigenvalue clipping). It shares nothing with the low-rank solver except
//! the final feasibility rounding, so agreement between the two is a real
//! cross-check.

use nalgebra::{DMatrix, SymmetricEigen};

use super::problem::GramProblem;
use super::solver::{gram_of, mix_with_aligned, SolverResult};
use crate::error::{Error, Result};

pub const ORACLE_MAX_ATOMS: usize = 8;
const FEAS_TOL: f64 = 1e-9;
const STALL_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 200_000;

fn project_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let vals = eig.eigenvalues.map(|v| v.max(0.0));
    let q = eig.eigenvectors;
    &q * DMatrix::from_diagonal(&vals) * q.transpose()
}

/// Solves `p` in the full matrix space; rejects `m > 8`.
pub fn oracle_solve(p: &GramProblem) -> Result<SolverResult> {
    let m = p.m();
    if m > ORACLE_MAX_ATOMS {
        return Err(Error::OracleTooLarge(m));
    }
    let diag = p.diag();
    let t = p.weights();
    let nz = p.normalizer();
    let c = DMatrix::<f64>::from_fn(m, m, |i, j| t[i] * t[j] / nz);
    let mut lower = DMatrix::<f64>::from_element(m, m, f64::NEG_INFINITY);
    for (i, j, l) in p.lower_bounds() {
        lower[(i, j)] = l;
        lower[(j, i)] = l;
    }
    let project_poly = |a: &DMatrix<f64>| {
        DMatrix::<f64>::from_fn(m, m, |i, j| if i == j { diag[i] } else { a[(i, j)].max(lower[(i, j)]) })
    };

    let aligned = p.aligned_gram();
    let mut z = DMatrix::<f64>::from_fn(m, m, |i, j| aligned[i][j]);
    let mut u = DMatrix::<f64>::zeros(m, m);
    let mut rho = 1.0;
    let mut prev_obj = f64::INFINITY;
    let mut stalled = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERS {
        iterations += 1;
        let x = project_poly(&(&z - &u - &c / rho));
        let z_prev = z;
        z = project_psd(&(&x + &u));
        let r = &x - &z;
        u += &r;
        let primal = r.amax();
        let dual = rho * (&z - &z_prev).amax();
        let obj = c.dot(&z);
        if primal <= FEAS_TOL && dual <= FEAS_TOL {
            if (obj - prev_obj).abs() <= STALL_TOL {
                stalled += 1;
                if stalled >= 20 {
                    converged = true;
                    break;
                }
            } else {
                stalled = 0;
            }
        }
        prev_obj = obj;
        if iterations % 20 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    // Factor the PSD iterate, restore the exact diagonal, then round.
    let eig = SymmetricEigen::new(z);
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|k| eig.eigenvectors[(i, k)] * eig.eigenvalues[k].max(0.0).sqrt()).collect())
        .collect();
    for (i, row) in rows.iter_mut().enumerate() {
        let len = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let target = diag[i].sqrt();
        if target == 0.0 {
            row.fill(0.0);
        } else if len > 0.0 {
            row.iter_mut().for_each(|x| *x *= target / len);
        } else {
            row.fill(0.0);
            row[0] = target;
        }
    }
    let factor = mix_with_aligned(p, rows, FEAS_TOL);
    let gram = gram_of(&factor);
    Ok(SolverResult {
        primal_value: p.objective(&gram).max(0.0),
        max_infeasibility: p.max_violation(&gram),
        factor,
        lower_bound: f64::NEG_INFINITY,
        iterations,
        restarts: 1,
        seed: 0,
        converged,
    })
}
