//! One-dimensional nodal bases and quadrature on the unit interval.
//!
//! Shape functions are Lagrange polynomials on Gauss–Lobatto nodes, integrated
//! with Gauss–Legendre rules. Every multi-dimensional object in the crate is a
//! tensor product of these tables.

use crate::error::{Error, Result};

/// Legendre polynomial `P_n(t)` and its derivative on `[-1, 1]`.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, t);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let dp = if (1.0 - t * t).abs() < 1e-300 {
        // endpoint limit of the derivative formula
        let s = if t > 0.0 { 1.0 } else if n % 2 == 0 { -1.0 } else { 1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p_prev - t * p) / (1.0 - t * t)
    };
    (p, dp)
}

/// Mirrors the lower half of an ascending point set so that `x[i] + x[n-1-i] == 1`.
fn symmetrize(points: &mut [f64]) {
    let n = points.len();
    for i in 0..n / 2 {
        points[n - 1 - i] = 1.0 - points[i];
    }
    if n % 2 == 1 {
        points[n / 2] = 0.5;
    }
}

/// Gauss–Lobatto nodes of degree `p` (i.e. `p + 1` points) on `[0, 1]`.
pub fn gauss_lobatto_nodes(p: usize) -> Vec<f64> {
    assert!(p >= 1, "Gauss-Lobatto rule needs at least two points");
    let n = p + 1;
    let mut nodes = vec![0.0; n];
    nodes[n - 1] = 1.0;
    for (j, node) in nodes.iter_mut().enumerate().take(n - 1).skip(1) {
        let mut t = -(std::f64::consts::PI * j as f64 / p as f64).cos();
        for _ in 0..100 {
            // Newton on P_p'(t); P_p'' from the Legendre ODE
            let (pp, dpp) = legendre(p, t);
            let d2 = (2.0 * t * dpp - (p * (p + 1)) as f64 * pp) / (1.0 - t * t);
            let step = dpp / d2;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        *node = 0.5 * (1.0 + t);
    }
    symmetrize(&mut nodes);
    nodes
}

/// Gauss–Legendre points and weights with `q` points on `[0, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1, "Gauss rule needs at least one point");
    let mut points = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        // descending initial guess; reversed below
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(q, t);
            let step = p / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(q, t);
        points[q - 1 - i] = 0.5 * (1.0 + t);
        weights[q - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    symmetrize(&mut points);
    for i in 0..q / 2 {
        weights[q - 1 - i] = weights[i];
    }
    (points, weights)
}

/// Value of the `i`-th Lagrange polynomial on `nodes` at `x`.
pub fn lagrange_value(nodes: &[f64], i: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &xj)| (x - xj) / (nodes[i] - xj))
        .product()
}

/// Derivative of the `i`-th Lagrange polynomial on `nodes` at `x`.
pub fn lagrange_derivative(nodes: &[f64], i: usize, x: f64) -> f64 {
    let mut sum = 0.0;
    for (m, &xm) in nodes.iter().enumerate() {
        if m == i {
            continue;
        }
        let mut term = 1.0 / (nodes[i] - xm);
        for (j, &xj) in nodes.iter().enumerate() {
            if j != i && j != m {
                term *= (x - xj) / (nodes[i] - xj);
            }
        }
        sum += term;
    }
    sum
}

/// Matrix `M[r][c] = L_c(points[r])` of the Lagrange basis on `nodes`, row-major.
pub fn interpolation_matrix(nodes: &[f64], points: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut m = vec![0.0; points.len() * n];
    for (r, &x) in points.iter().enumerate() {
        for c in 0..n {
            m[r * n + c] = lagrange_value(nodes, c, x);
        }
    }
    m
}

/// One-dimensional nodal basis together with its quadrature tables.
#[derive(Debug, Clone)]
pub struct Basis1D {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub quad_points: Vec<f64>,
    pub quad_weights: Vec<f64>,
    /// `values[i * q + k]`: shape `i` at quadrature point `k`.
    pub values: Vec<f64>,
    /// `gradients[i * q + k]`: derivative of shape `i` at quadrature point `k`.
    pub gradients: Vec<f64>,
    /// `q x n` interpolation from nodal coefficients to quadrature points.
    pub(crate) interp: Vec<f64>,
    /// `n x q` transpose of `interp`.
    pub(crate) interp_t: Vec<f64>,
    /// `q x n` derivative of the shapes at quadrature points.
    pub(crate) deriv: Vec<f64>,
    /// `q x q` collocation derivative on the quadrature points.
    pub(crate) colloc: Vec<f64>,
    /// `q x q` transpose of `colloc`.
    pub(crate) colloc_t: Vec<f64>,
}

impl Basis1D {
    pub fn n_shapes(&self) -> usize {
        self.degree + 1
    }

    pub fn n_quad(&self) -> usize {
        self.quad_points.len()
    }
}

/// Builds the Gauss–Lobatto basis of degree `p` with a `q`-point Gauss rule.
pub fn make_basis(p: usize, q: usize) -> Result<Basis1D> {
    if p < 1 {
        return Err(Error::InvalidInput(format!("degree must be >= 1, got {p}")));
    }
    if q < p + 1 {
        return Err(Error::InvalidInput(format!(
            "quadrature with {q} points cannot differentiate degree {p} exactly"
        )));
    }
    let n = p + 1;
    let nodes = gauss_lobatto_nodes(p);
    let (quad_points, quad_weights) = gauss_legendre(q);

    let mut values = vec![0.0; n * q];
    let mut gradients = vec![0.0; n * q];
    let mut interp = vec![0.0; q * n];
    let mut deriv = vec![0.0; q * n];
    for i in 0..n {
        for (k, &x) in quad_points.iter().enumerate() {
            let v = lagrange_value(&nodes, i, x);
            let g = lagrange_derivative(&nodes, i, x);
            values[i * q + k] = v;
            gradients[i * q + k] = g;
            interp[k * n + i] = v;
            deriv[k * n + i] = g;
        }
    }
    let mut interp_t = vec![0.0; n * q];
    for k in 0..q {
        for i in 0..n {
            interp_t[i * q + k] = interp[k * n + i];
        }
    }
    let mut colloc = vec![0.0; q * q];
    let mut colloc_t = vec![0.0; q * q];
    for k in 0..q {
        for j in 0..q {
            let v = lagrange_derivative(&quad_points, j, quad_points[k]);
            colloc[k * q + j] = v;
            colloc_t[j * q + k] = v;
        }
    }
    Ok(Basis1D {
        degree: p,
        nodes,
        quad_points,
        quad_weights,
        values,
        gradients,
        interp,
        interp_t,
        deriv,
        colloc,
        colloc_t,
    })
}
