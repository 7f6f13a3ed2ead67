//! Jacobi-preconditioned BiCGSTAB for nonsymmetric sparse systems.

use serde::{Deserialize, Serialize};

use super::Csr;
use crate::error::{LabError, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once `‖b − Ax‖ ≤ tol · ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 5000 }
    }
}

pub struct KrylovOutput {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

fn axpy_into(out: &mut [f64], a: &[f64], s: f64, b: &[f64]) {
    par::fill_indexed(out, |i| a[i] + s * b[i]);
}

fn norm(x: &[f64]) -> f64 {
    par::dot(x, x).sqrt()
}

/// Solves `A x = b` from `x = 0`. Breakdowns restart with a fresh shadow
/// residual; the iteration count includes restarts.
pub fn bicgstab(a: &Csr, b: &[f64], opts: &SolverOptions) -> Result<KrylovOutput> {
    if !(opts.tol > 0.0) {
        return Err(LabError::Config("solver tolerance must be positive".into()));
    }
    let n = a.n;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(KrylovOutput { x, iterations: 0, relative_residual: 0.0, history: vec![0.0] });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precond = |src: &[f64], dst: &mut [f64]| par::fill_indexed(dst, |i| inv_diag[i] * src[i]);

    let mut r = b.to_vec();
    let mut shadow = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut history = vec![1.0];
    for it in 1..=opts.max_iter {
        let rho_new = par::dot(&shadow, &r);
        if rho_new == 0.0 || omega == 0.0 || !rho_new.is_finite() {
            // restart from the current residual
            shadow.copy_from_slice(&r);
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        axpy_into(&mut tmp, &p, -omega, &v);
        axpy_into(&mut p, &r, beta, &tmp);
        precond(&p, &mut y);
        a.matvec(&y, &mut v);
        alpha = rho / par::dot(&shadow, &v);
        axpy_into(&mut s, &r, -alpha, &v);
        let snorm = norm(&s) / bnorm;
        if snorm <= opts.tol {
            axpy_into(&mut tmp, &x, alpha, &y);
            x.copy_from_slice(&tmp);
            history.push(snorm);
            return Ok(KrylovOutput { x, iterations: it, relative_residual: snorm, history });
        }
        precond(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = par::dot(&t, &t);
        omega = if tt > 0.0 { par::dot(&t, &s) / tt } else { 0.0 };
        par::fill_indexed(&mut tmp, |i| x[i] + alpha * y[i] + omega * z[i]);
        x.copy_from_slice(&tmp);
        axpy_into(&mut r, &s, -omega, &t);
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if !rel.is_finite() {
            break;
        }
        if rel <= opts.tol {
            return Ok(KrylovOutput { x, iterations: it, relative_residual: rel, history });
        }
    }
    Err(LabError::NoConvergence {
        iterations: opts.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
