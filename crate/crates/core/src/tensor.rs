//! Sum-factorized tensor kernels.
//!
//! All tensor data is lexicographic with the first axis running fastest. A
//! d-dimensional contraction with a Kronecker product of 1D matrices is
//! evaluated as d successive one-dimensional contractions.

use std::cell::Cell;

use crate::basis::Basis1D;
use crate::error::{Error, Result};

thread_local! {
    static FLOPS: Cell<u64> = const { Cell::new(0) };
}

/// Per-thread floating-point operation counter for the contraction kernels.
pub mod flops {
    use super::FLOPS;

    pub fn reset() {
        FLOPS.with(|f| f.set(0));
    }

    pub fn read() -> u64 {
        FLOPS.with(|f| f.get())
    }

    pub(crate) fn add(n: u64) {
        FLOPS.with(|f| f.set(f.get() + n));
    }
}

/// Contracts `input` along `axis` with the row-major `rows x cols` matrix `mat`.
///
/// `extents` are the input extents; `extents[axis]` must equal `cols`. The
/// output has the same extents with `rows` in place of `cols` and is
/// overwritten.
pub fn contract(
    axis: usize,
    mat: &[f64],
    rows: usize,
    cols: usize,
    extents: &[usize],
    input: &[f64],
    output: &mut [f64],
) {
    debug_assert_eq!(extents[axis], cols);
    debug_assert_eq!(mat.len(), rows * cols);
    let pre: usize = extents[..axis].iter().product();
    let post: usize = extents[axis + 1..].iter().product();
    debug_assert!(input.len() >= pre * cols * post);
    debug_assert!(output.len() >= pre * rows * post);
    flops::add((2 * rows * cols * pre * post) as u64);

    if pre == 1 {
        for s in 0..post {
            let src = &input[s * cols..(s + 1) * cols];
            let dst = &mut output[s * rows..(s + 1) * rows];
            for (i, d) in dst.iter_mut().enumerate() {
                let row = &mat[i * cols..(i + 1) * cols];
                *d = row.iter().zip(src).map(|(a, b)| a * b).sum();
            }
        }
        return;
    }
    for s in 0..post {
        let src = &input[s * cols * pre..(s + 1) * cols * pre];
        let dst = &mut output[s * rows * pre..(s + 1) * rows * pre];
        for i in 0..rows {
            let out = &mut dst[i * pre..(i + 1) * pre];
            out.fill(0.0);
            for j in 0..cols {
                let a = mat[i * cols + j];
                let line = &src[j * pre..(j + 1) * pre];
                for (o, v) in out.iter_mut().zip(line) {
                    *o += a * v;
                }
            }
        }
    }
}

/// Like [`contract`] but adds into `output` instead of overwriting it.
pub fn contract_add(
    axis: usize,
    mat: &[f64],
    rows: usize,
    cols: usize,
    extents: &[usize],
    input: &[f64],
    output: &mut [f64],
) {
    let pre: usize = extents[..axis].iter().product();
    let post: usize = extents[axis + 1..].iter().product();
    flops::add((2 * rows * cols * pre * post) as u64);
    if pre == 1 {
        for s in 0..post {
            let src = &input[s * cols..(s + 1) * cols];
            let dst = &mut output[s * rows..(s + 1) * rows];
            for (i, d) in dst.iter_mut().enumerate() {
                let row = &mat[i * cols..(i + 1) * cols];
                *d += row.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        return;
    }
    for s in 0..post {
        let src = &input[s * cols * pre..(s + 1) * cols * pre];
        let dst = &mut output[s * rows * pre..(s + 1) * rows * pre];
        for i in 0..rows {
            let out = &mut dst[i * pre..(i + 1) * pre];
            for j in 0..cols {
                let a = mat[i * cols + j];
                let line = &src[j * pre..(j + 1) * pre];
                for (o, v) in out.iter_mut().zip(line) {
                    *o += a * v;
                }
            }
        }
    }
}

/// Applies the same square-or-rectangular 1D matrix along every axis.
///
/// `buf` is scratch of at least `max(rows, cols)^d` entries.
pub fn kron_apply(
    dim: usize,
    mat: &[f64],
    rows: usize,
    cols: usize,
    input: &[f64],
    output: &mut [f64],
    buf: &mut Vec<f64>,
) {
    let big = rows.max(cols).pow(dim as u32);
    if buf.len() < 2 * big {
        buf.resize(2 * big, 0.0);
    }
    let (a, b) = buf.split_at_mut(big);
    let mut extents = vec![cols; dim];
    let mut current: &mut [f64] = a;
    let mut next: &mut [f64] = b;
    let n_in: usize = extents.iter().product();
    current[..n_in].copy_from_slice(&input[..n_in]);
    for axis in 0..dim {
        contract(axis, mat, rows, cols, &extents, current, next);
        extents[axis] = rows;
        std::mem::swap(&mut current, &mut next);
    }
    let n_out: usize = extents.iter().product();
    output[..n_out].copy_from_slice(&current[..n_out]);
}

/// Dense tensor with lexicographic ordering (first axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub extents: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorField {
    pub fn new(extents: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = extents.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch { expected: len, found: data.len() });
        }
        Ok(TensorField { extents, data })
    }

    pub fn zeros(extents: Vec<usize>) -> Self {
        let len = extents.iter().product();
        TensorField { extents, data: vec![0.0; len] }
    }
}

/// Contracts `field` along `axis` with a row-major `rows x cols` matrix.
pub fn apply_1d_contraction(
    axis: usize,
    matrix: &[f64],
    rows: usize,
    cols: usize,
    field: &TensorField,
) -> Result<TensorField> {
    if axis >= field.extents.len() {
        return Err(Error::InvalidInput(format!(
            "axis {axis} out of range for a {}-dimensional field",
            field.extents.len()
        )));
    }
    if field.extents[axis] != cols {
        return Err(Error::ShapeMismatch { expected: cols, found: field.extents[axis] });
    }
    if matrix.len() != rows * cols {
        return Err(Error::ShapeMismatch { expected: rows * cols, found: matrix.len() });
    }
    let mut extents = field.extents.clone();
    extents[axis] = rows;
    let mut out = TensorField::zeros(extents);
    contract(axis, matrix, rows, cols, &field.extents, &field.data, &mut out.data);
    Ok(out)
}

/// Scratch buffers for the cell kernels; sized lazily.
#[derive(Debug, Default, Clone)]
pub struct KernelScratch {
    a: Vec<f64>,
    b: Vec<f64>,
    grads: Vec<f64>,
}

impl KernelScratch {
    fn ensure(&mut self, dim: usize, n: usize, q: usize) {
        let big = n.max(q).pow(dim as u32);
        if self.a.len() < big {
            self.a.resize(big, 0.0);
            self.b.resize(big, 0.0);
        }
        if self.grads.len() < dim * big {
            self.grads.resize(dim * big, 0.0);
        }
    }
}

/// Interpolates nodal coefficients to all `q^d` quadrature points.
fn values_at_quad(basis: &Basis1D, dim: usize, coeffs: &[f64], out: &mut [f64], tmp: &mut [f64]) {
    let n = basis.n_shapes();
    let q = basis.n_quad();
    let mut extents = vec![n; dim];
    match dim {
        1 => contract(0, &basis.interp, q, n, &extents, coeffs, out),
        2 => {
            contract(0, &basis.interp, q, n, &extents, coeffs, tmp);
            extents[0] = q;
            contract(1, &basis.interp, q, n, &extents, tmp, out);
        }
        3 => {
            contract(0, &basis.interp, q, n, &extents, coeffs, out);
            extents[0] = q;
            contract(1, &basis.interp, q, n, &extents, out, tmp);
            extents[1] = q;
            contract(2, &basis.interp, q, n, &extents, tmp, out);
        }
        _ => unreachable!("dimension must be 1, 2 or 3"),
    }
}

/// Transpose of [`values_at_quad`]; overwrites `out`.
fn integrate_values(basis: &Basis1D, dim: usize, data: &mut [f64], out: &mut [f64], tmp: &mut [f64]) {
    let n = basis.n_shapes();
    let q = basis.n_quad();
    let mut extents = vec![q; dim];
    match dim {
        1 => contract(0, &basis.interp_t, n, q, &extents, data, out),
        2 => {
            contract(1, &basis.interp_t, n, q, &extents, data, tmp);
            extents[1] = n;
            contract(0, &basis.interp_t, n, q, &extents, tmp, out);
        }
        3 => {
            contract(2, &basis.interp_t, n, q, &extents, data, tmp);
            extents[2] = n;
            contract(1, &basis.interp_t, n, q, &extents, tmp, data);
            extents[1] = n;
            contract(0, &basis.interp_t, n, q, &extents, data, out);
        }
        _ => unreachable!("dimension must be 1, 2 or 3"),
    }
}

/// Reference gradients `d u / d xi_k` at the `q^d` quadrature points of one cell.
///
/// Returns `dim` fields of `q^d` entries each, concatenated.
pub fn cell_gradients(basis: &Basis1D, dim: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
    let n = basis.n_shapes();
    let q = basis.n_quad();
    let len = n.pow(dim as u32);
    if coeffs.len() != len {
        return Err(Error::ShapeMismatch { expected: len, found: coeffs.len() });
    }
    let nq = q.pow(dim as u32);
    let mut scratch = KernelScratch::default();
    scratch.ensure(dim, n, q);
    let mut uq = vec![0.0; nq];
    values_at_quad(basis, dim, coeffs, &mut uq, &mut scratch.a);
    let mut grads = vec![0.0; dim * nq];
    let extents = vec![q; dim];
    for k in 0..dim {
        contract(k, &basis.colloc, q, q, &extents, &uq, &mut grads[k * nq..(k + 1) * nq]);
    }
    Ok(grads)
}

/// Tests quadrature-point fluxes against shape gradients: returns
/// `sum_k sum_x w(x) flux_k(x) d phi_i / d xi_k (x)` for every shape `i`.
pub fn cell_integrate_gradients(basis: &Basis1D, dim: usize, fluxes: &[f64]) -> Result<Vec<f64>> {
    let n = basis.n_shapes();
    let q = basis.n_quad();
    let nq = q.pow(dim as u32);
    if fluxes.len() != dim * nq {
        return Err(Error::ShapeMismatch { expected: dim * nq, found: fluxes.len() });
    }
    let mut scratch = KernelScratch::default();
    scratch.ensure(dim, n, q);
    let extents = vec![q; dim];
    let mut weighted = fluxes.to_vec();
    for k in 0..dim {
        for (idx, v) in weighted[k * nq..(k + 1) * nq].iter_mut().enumerate() {
            *v *= tensor_weight(&basis.quad_weights, dim, idx);
        }
    }
    let mut acc = vec![0.0; nq];
    for k in 0..dim {
        contract_add(k, &basis.colloc_t, q, q, &extents, &weighted[k * nq..(k + 1) * nq], &mut acc);
    }
    let mut out = vec![0.0; n.pow(dim as u32)];
    integrate_values(basis, dim, &mut acc, &mut out, &mut scratch.a);
    Ok(out)
}

/// Product of 1D weights for the lexicographic point index `idx`.
pub(crate) fn tensor_weight(w: &[f64], dim: usize, mut idx: usize) -> f64 {
    let q = w.len();
    let mut out = 1.0;
    for _ in 0..dim {
        out *= w[idx % q];
        idx /= q;
    }
    out
}

/// Number of independent entries of a symmetric `dim x dim` matrix.
pub(crate) const fn n_sym(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Index of entry `(a, b)` in the packed symmetric storage used for metrics.
#[inline]
pub(crate) fn sym_index(dim: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    match dim {
        1 => 0,
        2 => [[0, 1], [1, 2]][a][b],
        3 => [[0, 1, 2], [1, 3, 4], [2, 4, 5]][a][b],
        _ => unreachable!(),
    }
}

/// Applies the cell stiffness operator `v += K_cell u` given the packed metric
/// tensor `G(x) = mu |det J| w J^{-1} J^{-T}` at every quadrature point.
pub fn laplace_cell_apply(
    basis: &Basis1D,
    dim: usize,
    metric: &[f64],
    u: &[f64],
    v: &mut [f64],
    scratch: &mut KernelScratch,
) {
    let n = basis.n_shapes();
    let q = basis.n_quad();
    scratch.ensure(dim, n, q);
    let nq = q.pow(dim as u32);
    let ns = n_sym(dim);
    let extents = vec![q; dim];
    let KernelScratch { a, b, grads } = scratch;

    values_at_quad(basis, dim, u, a, b);
    for k in 0..dim {
        contract(k, &basis.colloc, q, q, &extents, &a[..nq], &mut grads[k * nq..(k + 1) * nq]);
    }
    match dim {
        1 => {
            for x in 0..nq {
                grads[x] *= metric[x];
            }
        }
        2 => {
            let (g0, g1) = grads.split_at_mut(nq);
            for x in 0..nq {
                let m = &metric[x * ns..x * ns + 3];
                let (d0, d1) = (g0[x], g1[x]);
                g0[x] = m[0] * d0 + m[1] * d1;
                g1[x] = m[1] * d0 + m[2] * d1;
            }
        }
        3 => {
            let (g0, rest) = grads.split_at_mut(nq);
            let (g1, g2) = rest.split_at_mut(nq);
            for x in 0..nq {
                let m = &metric[x * ns..x * ns + 6];
                let (d0, d1, d2) = (g0[x], g1[x], g2[x]);
                g0[x] = m[0] * d0 + m[1] * d1 + m[2] * d2;
                g1[x] = m[1] * d0 + m[3] * d1 + m[4] * d2;
                g2[x] = m[2] * d0 + m[4] * d1 + m[5] * d2;
            }
        }
        _ => unreachable!(),
    }
    flops::add((nq * (2 * dim * dim)) as u64);
    contract(0, &basis.colloc_t, q, q, &extents, &grads[..nq], &mut a[..nq]);
    for k in 1..dim {
        contract_add(k, &basis.colloc_t, q, q, &extents, &grads[k * nq..(k + 1) * nq], &mut a[..nq]);
    }
    let nn = n.pow(dim as u32);
    let out = &mut grads[..nn];
    integrate_values(basis, dim, a, out, b);
    for (vi, oi) in v.iter_mut().zip(out.iter()) {
        *vi += oi;
    }
}

/// Exact diagonal of the cell stiffness matrix, accumulated into `diag`.
///
/// Uses the factorization `d phi_i / d xi_k = prod_m T_m[i_m]` with `T_m` the
/// shape derivative along `m == k` and the shape value otherwise, so each
/// metric component costs one sum-factorized contraction of squared tables.
pub fn laplace_cell_diagonal(basis: &Basis1D, dim: usize, metric: &[f64], diag: &mut [f64]) {
    let n = basis.n_shapes();
    let q = basis.n_quad();
    let nq = q.pow(dim as u32);
    let ns = n_sym(dim);
    // n x q tables of products of 1D factors
    let mut vv = vec![0.0; n * q];
    let mut vd = vec![0.0; n * q];
    let mut dd = vec![0.0; n * q];
    for i in 0..n {
        for k in 0..q {
            let v = basis.interp[k * n + i];
            let g = basis.deriv[k * n + i];
            vv[i * q + k] = v * v;
            vd[i * q + k] = v * g;
            dd[i * q + k] = g * g;
        }
    }
    let mut field = vec![0.0; nq];
    let mut tmp_a = vec![0.0; n.max(q).pow(dim as u32)];
    let mut tmp_b = tmp_a.clone();
    for a in 0..dim {
        for b in a..dim {
            let s = sym_index(dim, a, b);
            let factor = if a == b { 1.0 } else { 2.0 };
            for x in 0..nq {
                field[x] = factor * metric[x * ns + s];
            }
            // contract each axis with the right table, quad -> shape
            let mut extents = vec![q; dim];
            tmp_a[..nq].copy_from_slice(&field);
            for axis in 0..dim {
                let table = match (axis == a, axis == b) {
                    (true, true) => &dd,
                    (true, false) | (false, true) => &vd,
                    (false, false) => &vv,
                };
                contract(axis, table, n, q, &extents, &tmp_a, &mut tmp_b);
                extents[axis] = n;
                std::mem::swap(&mut tmp_a, &mut tmp_b);
            }
            for (d, t) in diag.iter_mut().zip(tmp_a.iter()) {
                *d += t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::make_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kron(a: &[f64], ar: usize, ac: usize, b: &[f64], br: usize, bc: usize) -> Vec<f64> {
        // (A ⊗ B)[(ia*br+ib), (ja*bc+jb)]
        let (r, c) = (ar * br, ac * bc);
        let mut out = vec![0.0; r * c];
        for ia in 0..ar {
            for ja in 0..ac {
                for ib in 0..br {
                    for jb in 0..bc {
                        out[(ia * br + ib) * c + ja * bc + jb] = a[ia * ac + ja] * b[ib * bc + jb];
                    }
                }
            }
        }
        out
    }

    fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
        (0..rows).map(|i| (0..cols).map(|j| m[i * cols + j] * x[j]).sum()).collect()
    }

    #[test]
    fn identity_contraction_is_noop() {
        let f = TensorField::new(vec![3, 3], (0..9).map(|x| x as f64).collect()).unwrap();
        let eye: Vec<f64> = (0..9).map(|k| if k % 4 == 0 { 1.0 } else { 0.0 }).collect();
        for axis in 0..2 {
            assert_eq!(apply_1d_contraction(axis, &eye, 3, 3, &f).unwrap(), f);
        }
    }

    #[test]
    fn ones_contraction_sums_everything() {
        let f = TensorField::new(vec![3, 4], (0..12).map(|x| x as f64).collect()).unwrap();
        let g = apply_1d_contraction(0, &[1.0; 3], 1, 3, &f).unwrap();
        let h = apply_1d_contraction(1, &[1.0; 4], 1, 4, &g).unwrap();
        assert_eq!(h.data, vec![66.0]);
    }

    #[test]
    fn contraction_shape_mismatch() {
        let f = TensorField::zeros(vec![3, 3]);
        assert!(matches!(
            apply_1d_contraction(0, &[1.0; 4], 2, 2, &f),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn contraction_matches_dense_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 2..=3 {
            for n in 2usize..=5 {
                for _ in 0..20 {
                    let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let len = n.pow(dim as u32);
                    let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let mut buf = Vec::new();
                    let mut y = vec![0.0; len];
                    kron_apply(dim, &m, n, n, &x, &mut y, &mut buf);
                    // x fastest: index = i0 + n*i1 (+ n^2*i2) => full = M ⊗ M (⊗ M)
                    let mut full = m.clone();
                    let mut size = n;
                    for _ in 1..dim {
                        full = kron(&m, n, n, &full, size, size);
                        size *= n;
                    }
                    let z = matvec(&full, len, len, &x);
                    let scale = z.iter().map(|v| v.abs()).fold(1.0, f64::max);
                    for (a, b) in y.iter().zip(&z) {
                        assert!((a - b).abs() < 1e-12 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_of_constant_and_linear_fields() {
        for dim in 1..=3 {
            for p in 1..=5 {
                let b = make_basis(p, p + 1).unwrap();
                let n = p + 1;
                let len = n.pow(dim as u32);
                let g = cell_gradients(&b, dim, &vec![2.5; len]).unwrap();
                assert!(g.iter().all(|v| v.abs() < 1e-12));
                // interpolant of xi_1
                let coeffs: Vec<f64> = (0..len).map(|i| b.nodes[i % n]).collect();
                let g = cell_gradients(&b, dim, &coeffs).unwrap();
                let nq = (p + 1).pow(dim as u32);
                for x in 0..nq {
                    assert!((g[x] - 1.0).abs() < 1e-12);
                    for k in 1..dim {
                        assert!(g[k * nq + x].abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_dense_differentiation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = make_basis(2, 3).unwrap();
        let (n, q) = (3, 3);
        let u: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = cell_gradients(&b, 2, &u).unwrap();
        for k1 in 0..q {
            for k0 in 0..q {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for i1 in 0..n {
                    for i0 in 0..n {
                        let c = u[i0 + n * i1];
                        gx += c * b.gradients[i0 * q + k0] * b.values[i1 * q + k1];
                        gy += c * b.values[i0 * q + k0] * b.gradients[i1 * q + k1];
                    }
                }
                let x = k0 + q * k1;
                assert!((g[x] - gx).abs() < 1e-13);
                assert!((g[q * q + x] - gy).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn integrate_unit_flux_1d() {
        let b = make_basis(1, 2).unwrap();
        let out = cell_integrate_gradients(&b, 1, &[1.0, 1.0]).unwrap();
        assert!((out[0] + 1.0).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
        let zero = cell_integrate_gradients(&b, 1, &[0.0, 0.0]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn integrate_is_weighted_adjoint_of_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in 2..=3 {
            for p in 1..=4 {
                let b = make_basis(p, p + 1).unwrap();
                let len = (p + 1).pow(dim as u32);
                let nq = len;
                for _ in 0..100 {
                    let u: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let g: Vec<f64> = (0..dim * nq).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let lhs: f64 = cell_integrate_gradients(&b, dim, &g)
                        .unwrap()
                        .iter()
                        .zip(&u)
                        .map(|(a, b)| a * b)
                        .sum();
                    let gu = cell_gradients(&b, dim, &u).unwrap();
                    let mut rhs = 0.0;
                    for k in 0..dim {
                        for x in 0..nq {
                            rhs += tensor_weight(&b.quad_weights, dim, x) * g[k * nq + x] * gu[k * nq + x];
                        }
                    }
                    assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn cell_diagonal_matches_unit_vector_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in 2..=3 {
            for p in 1..=4 {
                let b = make_basis(p, p + 1).unwrap();
                let nq = (p + 1).pow(dim as u32);
                let ns = n_sym(dim);
                // random SPD metric per point
                let mut metric = vec![0.0; nq * ns];
                for x in 0..nq {
                    for a in 0..dim {
                        for c in a..dim {
                            let v = if a == c { 1.0 + rng.random::<f64>() } else { 0.2 * rng.random_range(-1.0..1.0) };
                            metric[x * ns + sym_index(dim, a, c)] = v;
                        }
                    }
                }
                let len = nq;
                let mut diag = vec![0.0; len];
                laplace_cell_diagonal(&b, dim, &metric, &mut diag);
                let mut scratch = KernelScratch::default();
                for i in 0..len {
                    let mut e = vec![0.0; len];
                    e[i] = 1.0;
                    let mut out = vec![0.0; len];
                    laplace_cell_apply(&b, dim, &metric, &e, &mut out, &mut scratch);
                    assert!((out[i] - diag[i]).abs() < 1e-12 * out[i].abs());
                }
            }
        }
    }
}
