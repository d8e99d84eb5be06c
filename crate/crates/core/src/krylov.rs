//! Preconditioned conjugate gradients and right-preconditioned full GMRES.
//!
//! Operators are closures `f(x, y)` writing `y = Op x`. Both solvers start
//! from a zero guess and stop on `||b - A x|| <= rel_tol ||b||`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual norms, starting with 1 for the zero guess.
    pub residual_history: Vec<f64>,
    /// Set when the iteration cap was hit.
    pub sentinel_applied: bool,
}

impl SolveReport {
    fn new() -> Self {
        SolveReport { iterations: 0, converged: false, residual_history: vec![1.0], sentinel_applied: false }
    }

    fn push(&mut self, rel: f64) {
        self.residual_history.push(rel);
        self.iterations += 1;
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn zero_rhs(n: usize) -> (Vec<f64>, SolveReport) {
    let mut rep = SolveReport::new();
    rep.residual_history[0] = 0.0;
    rep.converged = true;
    (vec![0.0; n], rep)
}

/// Preconditioned CG. Hitting `max_iter` is not an error: the report is
/// flagged unconverged with `sentinel_applied`.
pub fn cg<A, P>(mut apply_a: A, mut apply_prec: P, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)>
where
    A: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(zero_rhs(n));
    }
    let mut rep = SolveReport::new();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    apply_prec(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        apply_a(&p, &mut q);
        let curv = dot(&p, &q);
        if !(curv > 0.0) {
            return Err(Error::Breakdown { iteration: it, curvature: curv });
        }
        let alpha = rz / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = norm(&r) / bnorm;
        rep.push(rel);
        if rel <= rel_tol {
            rep.converged = true;
            return Ok((x, rep));
        }
        apply_prec(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    rep.sentinel_applied = true;
    Ok((x, rep))
}

/// Full (unrestarted) GMRES with modified Gram-Schmidt and right
/// preconditioning, so the monitored residual is the true one.
pub fn gmres<A, P>(mut apply_a: A, mut apply_prec: P, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)>
where
    A: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(zero_rhs(n));
    }
    let mut rep = SolveReport::new();
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / bnorm).collect()];
    // preconditioned directions z_j = M v_j, kept to form x without reapplying M
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    // Hessenberg columns after Givens rotations
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![bnorm];
    let mut w = vec![0.0; n];
    let mut converged = false;
    for j in 0..max_iter {
        let mut z = vec![0.0; n];
        apply_prec(&basis[j], &mut z);
        apply_a(&z, &mut w);
        dirs.push(z);
        let wnorm0 = norm(&w);
        let mut col = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            col[i] = hij;
            for (wk, vk) in w.iter_mut().zip(v) {
                *wk -= hij * vk;
            }
        }
        let hnext = norm(&w);
        col[j + 1] = hnext;
        for (i, &(c, s)) in cs.iter().enumerate() {
            let (a, bb) = (col[i], col[i + 1]);
            col[i] = c * a + s * bb;
            col[i + 1] = -s * a + c * bb;
        }
        let (a, bb) = (col[j], col[j + 1]);
        let rho = a.hypot(bb);
        if rho == 0.0 {
            return Err(Error::Stagnation { iteration: j });
        }
        let (c, s) = (a / rho, bb / rho);
        col[j] = rho;
        col[j + 1] = 0.0;
        cs.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);
        let rel = g[j + 1].abs() / bnorm;
        rep.push(rel);
        if rel <= rel_tol {
            converged = true;
            break;
        }
        if hnext <= 1e-14 * wnorm0.max(f64::MIN_POSITIVE) {
            return Err(Error::Stagnation { iteration: j });
        }
        basis.push(w.iter().map(|v| v / hnext).collect());
    }
    let k = h.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|m| h[m][i] * y[m]).sum();
        y[i] = (g[i] - s) / h[i][i];
    }
    let mut x = vec![0.0; n];
    for (yi, z) in y.iter().zip(&dirs) {
        for (xk, zk) in x.iter_mut().zip(z) {
            *xk += yi * zk;
        }
    }
    rep.converged = converged;
    rep.sentinel_applied = !converged;
    Ok((x, rep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(m: Vec<Vec<f64>>) -> impl FnMut(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for (i, row) in m.iter().enumerate() {
                y[i] = dot(row, x);
            }
        }
    }

    fn ident(x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }

    #[test]
    fn identity_converges_in_one() {
        let b = [1.0, -2.0, 3.0];
        let (x, r) = cg(ident, ident, &b, 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(x, b.to_vec());
        let (x, r) = gmres(ident, ident, &b, 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
        for (a, bb) in x.iter().zip(&b) {
            assert!((a - bb).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_preconditioner_converges_in_one() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let det = 11.0;
        let inv = vec![vec![3.0 / det, -1.0 / det], vec![-1.0 / det, 4.0 / det]];
        let (_, r) = cg(dense(a.clone()), dense(inv.clone()), &[1.0, 2.0], 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
        let (_, r) = gmres(dense(a), dense(inv), &[1.0, 2.0], 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn small_systems() {
        let (x, r) = cg(dense(vec![vec![1.0, 0.0], vec![0.0, 2.0]]), ident, &[1.0, 2.0], 1e-12, 10).unwrap();
        assert!(r.iterations <= 2 && r.converged);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let (x, r) = gmres(dense(vec![vec![2.0, 1.0], vec![0.0, 3.0]]), ident, &[3.0, 3.0], 1e-12, 10).unwrap();
        assert!(r.iterations <= 2 && r.converged);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert_eq!(r.iterations + 1, r.residual_history.len());
    }

    #[test]
    fn cg_detects_indefinite_operator() {
        let r = cg(dense(vec![vec![-1.0, 0.0], vec![0.0, 1.0]]), ident, &[1.0, 0.0], 1e-12, 10);
        assert!(matches!(r, Err(Error::Breakdown { .. })));
    }

    #[test]
    fn iteration_cap_sets_sentinel() {
        let a: Vec<Vec<f64>> = (0..20).map(|i| (0..20).map(|j| if i == j { 1.0 + i as f64 } else { 0.0 }).collect()).collect();
        let b = vec![1.0; 20];
        let (_, r) = cg(dense(a.clone()), ident, &b, 1e-14, 3).unwrap();
        assert!(!r.converged && r.sentinel_applied && r.iterations == 3);
        let (_, r) = gmres(dense(a), ident, &b, 1e-14, 3).unwrap();
        assert!(!r.converged && r.sentinel_applied);
    }

    #[test]
    fn zero_rhs() {
        let (x, r) = gmres(ident, ident, &[0.0; 3], 1e-8, 5).unwrap();
        assert!(r.converged && r.iterations == 0 && x == vec![0.0; 3]);
    }
}
