//! Matrix-free variable-coefficient Laplace operator `a(u, v) = (mu grad u, grad v)`.
//!
//! Geometry enters through a packed symmetric metric per quadrature point,
//! `G = mu |det J| w J^{-1} J^{-T}`, precomputed once per level and degree.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{make_basis, Basis1D};
use crate::dofs::DofMap;
use crate::error::{Error, Result};
use crate::mesh::{self, grid_coords, MeshLevel, VertexPatch};
use crate::tensor::{self, laplace_cell_apply, laplace_cell_diagonal, n_sym, sym_index, KernelScratch};

/// Largest system [`assemble_dense`] will build.
pub const DENSE_LIMIT: usize = 20_000;

/// Quadrature-point metric data of every cell of a level.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub dim: usize,
    pub points_per_cell: usize,
    /// `n_cells * points_per_cell * n_sym(dim)` packed metric entries.
    pub metric: Vec<f64>,
}

impl CellGeometry {
    /// Evaluates the metric on the tensor Gauss points of `basis` for every
    /// cell, with cell-constant coefficients `mu`.
    pub fn new(level: &MeshLevel, basis: &Basis1D, mu: &[f64]) -> Result<Self> {
        let dim = level.dim;
        let n_cells = level.n_cells();
        if mu.len() != n_cells {
            return Err(Error::ShapeMismatch { expected: n_cells, found: mu.len() });
        }
        if let Some((c, &m)) = mu.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
            return Err(Error::InvalidInput(format!("coefficient of cell {c} must be positive, got {m}")));
        }
        let q = basis.n_quad();
        let npts = q.pow(dim as u32);
        let ns = n_sym(dim);
        let mut metric = vec![0.0; n_cells * npts * ns];
        for c in 0..n_cells {
            let verts = level.cell_vertices(c);
            for x in 0..npts {
                let g = grid_coords(dim, q, x);
                let xi: Vec<f64> = (0..dim).map(|a| basis.quad_points[g[a]]).collect();
                let jac = mesh::jacobian(dim, &verts, &xi);
                let det = mesh::jacobian_det(dim, &jac);
                if det <= 0.0 || !det.is_finite() {
                    return Err(Error::DegenerateMesh { cell: c, det });
                }
                let inv = invert(dim, &jac, det);
                let w = mu[c] * det * tensor::tensor_weight(&basis.quad_weights, dim, x);
                let out = &mut metric[(c * npts + x) * ns..(c * npts + x + 1) * ns];
                for a in 0..dim {
                    for b in a..dim {
                        // (J^{-1} J^{-T})_{ab} = sum_k Jinv[a][k] Jinv[b][k]
                        let s: f64 = (0..dim).map(|k| inv[a][k] * inv[b][k]).sum();
                        out[sym_index(dim, a, b)] = w * s;
                    }
                }
            }
        }
        Ok(CellGeometry { dim, points_per_cell: npts, metric })
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let len = self.points_per_cell * n_sym(self.dim);
        &self.metric[c * len..(c + 1) * len]
    }
}

fn invert(dim: usize, j: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    match dim {
        1 => inv[0][0] = 1.0 / det,
        2 => {
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
        }
        3 => {
            for a in 0..3 {
                for b in 0..3 {
                    let (r0, r1) = ((b + 1) % 3, (b + 2) % 3);
                    let (c0, c1) = ((a + 1) % 3, (a + 2) % 3);
                    inv[a][b] = (j[r0][c0] * j[r1][c1] - j[r0][c1] * j[r1][c0]) / det;
                }
            }
        }
        _ => unreachable!(),
    }
    inv
}

/// Cell-level operator of one polynomial degree on one mesh level.
#[derive(Debug, Clone)]
pub struct CellOperator {
    pub dim: usize,
    pub basis: Basis1D,
    pub geometry: CellGeometry,
    /// Element stiffness diagonals, `(p+1)^d` per cell.
    diagonals: Vec<f64>,
}

impl CellOperator {
    /// Degree-`p` operator with a `(p+1)`-point Gauss rule.
    pub fn new(level: &MeshLevel, p: usize, mu: &[f64]) -> Result<Self> {
        let basis = make_basis(p, p + 1)?;
        let geometry = CellGeometry::new(level, &basis, mu)?;
        let k = (p + 1).pow(level.dim as u32);
        let mut diagonals = vec![0.0; level.n_cells() * k];
        for c in 0..level.n_cells() {
            laplace_cell_diagonal(&basis, level.dim, geometry.cell(c), &mut diagonals[c * k..(c + 1) * k]);
        }
        Ok(CellOperator { dim: level.dim, basis, geometry, diagonals })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.basis.n_shapes().pow(self.dim as u32)
    }

    /// `v += K_c u` for cell `c`.
    pub fn apply_cell(&self, c: usize, u: &[f64], v: &mut [f64], scratch: &mut KernelScratch) {
        laplace_cell_apply(&self.basis, self.dim, self.geometry.cell(c), u, v, scratch);
    }

    pub fn element_diagonal(&self, c: usize) -> &[f64] {
        let k = self.dofs_per_cell();
        &self.diagonals[c * k..(c + 1) * k]
    }
}

/// Reusable buffers for operator applications.
#[derive(Debug, Default, Clone)]
pub struct ApplyScratch {
    pub(crate) kernel: KernelScratch,
    cell_in: Vec<f64>,
    cell_out: Vec<f64>,
}

impl ApplyScratch {
    fn ensure(&mut self, k: usize) {
        if self.cell_in.len() < k {
            self.cell_in.resize(k, 0.0);
            self.cell_out.resize(k, 0.0);
        }
    }
}

/// Global operator of one mesh level with homogeneous Dirichlet conditions
/// on the whole boundary. Constrained rows and columns are replaced by the
/// identity so the operator is SPD on full-length vectors.
#[derive(Debug, Clone)]
pub struct LevelOperator {
    pub dofs: DofMap,
    pub cells: Arc<CellOperator>,
    pub coefficients: Vec<f64>,
}

impl LevelOperator {
    pub fn new(level: &MeshLevel, p: usize, mu: &[f64]) -> Result<Self> {
        let dofs = DofMap::new(level, p)?;
        let cells = Arc::new(CellOperator::new(level, p, mu)?);
        Ok(LevelOperator { dofs, cells, coefficients: mu.to_vec() })
    }

    /// Operator with `mu = 1` everywhere.
    pub fn laplace(level: &MeshLevel, p: usize) -> Result<Self> {
        Self::new(level, p, &vec![1.0; level.n_cells()])
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs
    }

    pub fn degree(&self) -> usize {
        self.dofs.degree
    }

    /// `v = A u`; values of `u` on constrained DoFs are ignored by the
    /// unconstrained rows and copied through on the constrained ones.
    pub fn vmult(&self, u: &[f64], v: &mut [f64], scratch: &mut ApplyScratch) {
        let k = self.dofs.dofs_per_cell();
        scratch.ensure(k);
        v.fill(0.0);
        let mask = &self.dofs.boundary_mask;
        for c in 0..self.dofs.n_cells() {
            let idx = self.dofs.cell(c);
            for (slot, &g) in scratch.cell_in[..k].iter_mut().zip(idx) {
                *slot = if mask[g] { 0.0 } else { u[g] };
            }
            scratch.cell_out[..k].fill(0.0);
            self.cells.apply_cell(c, &scratch.cell_in[..k], &mut scratch.cell_out[..k], &mut scratch.kernel);
            for (&g, &val) in idx.iter().zip(&scratch.cell_out[..k]) {
                v[g] += val;
            }
        }
        for (i, &b) in mask.iter().enumerate() {
            if b {
                v[i] = u[i];
            }
        }
    }

    pub fn apply_global(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.n_dofs() {
            return Err(Error::ShapeMismatch { expected: self.n_dofs(), found: u.len() });
        }
        let mut v = vec![0.0; u.len()];
        self.vmult(u, &mut v, &mut ApplyScratch::default());
        Ok(v)
    }

    /// `Pi_j A_bar_j u_bar_j`: the patch cells' contribution tested against the
    /// patch interior, from closure values ordered like `patch.closure_dofs`.
    pub fn apply_patch(&self, patch: &VertexPatch, u_closure: &[f64]) -> Result<Vec<f64>> {
        if u_closure.len() != patch.closure_dofs.len() {
            return Err(Error::ShapeMismatch { expected: patch.closure_dofs.len(), found: u_closure.len() });
        }
        let layout = PatchLayout::from_patch(patch, &self.dofs)?;
        let masked: Vec<f64> = u_closure
            .iter()
            .zip(&patch.closure_dofs)
            .map(|(&x, &g)| if self.dofs.boundary_mask[g] { 0.0 } else { x })
            .collect();
        let mut out = vec![0.0; layout.n_closure];
        apply_on_patch(&self.cells, &patch.cells, &layout, &masked, &mut out, &mut ApplyScratch::default());
        Ok(layout.interior.iter().map(|&i| out[i]).collect())
    }

    /// Exact diagonal of the patch interior operator at this level's degree.
    pub fn patch_diagonal(&self, patch: &VertexPatch) -> Result<Vec<f64>> {
        let layout = PatchLayout::from_patch(patch, &self.dofs)?;
        Ok(patch_diagonal(&self.cells, &patch.cells, &layout))
    }

    /// Dense matrix of the operator (or of the patch interior block) built
    /// from unit-vector applications.
    pub fn assemble_dense(&self, restrict_to: Option<&VertexPatch>) -> Result<DMatrix<f64>> {
        match restrict_to {
            None => {
                let n = self.n_dofs();
                if n > DENSE_LIMIT {
                    return Err(Error::TooLarge { size: n, limit: DENSE_LIMIT });
                }
                let mut m = DMatrix::zeros(n, n);
                let mut e = vec![0.0; n];
                let mut col = vec![0.0; n];
                let mut scratch = ApplyScratch::default();
                for j in 0..n {
                    e[j] = 1.0;
                    self.vmult(&e, &mut col, &mut scratch);
                    e[j] = 0.0;
                    m.column_mut(j).copy_from_slice(&col);
                }
                Ok(m)
            }
            Some(patch) => {
                let layout = PatchLayout::from_patch(patch, &self.dofs)?;
                dense_patch_matrix(&self.cells, &patch.cells, &layout)
            }
        }
    }
}

/// Closure-local DoF layout of a patch at one polynomial degree.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchLayout {
    pub dim: usize,
    pub degree: usize,
    pub n_closure: usize,
    /// Closure-local indices, `(p+1)^d` per patch cell.
    pub cell_dofs: Vec<usize>,
    /// Interior position -> closure-local index.
    pub interior: Vec<usize>,
    /// Interior extent per direction when the patch is a `2^d` tensor patch.
    pub tensor_extent: Option<usize>,
}

impl PatchLayout {
    /// Lexicographic layout of a `2^d`-cell tensor patch of degree `p`:
    /// `(2p+1)^d` closure nodes, `(2p-1)^d` interior nodes.
    pub fn structured(dim: usize, p: usize) -> Self {
        let side = 2 * p + 1;
        let k = (p + 1).pow(dim as u32);
        let mut cell_dofs = Vec::with_capacity(k << dim);
        for bits in 0..1usize << dim {
            for local in 0..k {
                let lg = grid_coords(dim, p + 1, local);
                let mut idx = 0;
                for a in (0..dim).rev() {
                    idx = idx * side + ((bits >> a) & 1) * p + lg[a];
                }
                cell_dofs.push(idx);
            }
        }
        let interior = (0..side.pow(dim as u32))
            .filter(|&i| {
                let g = grid_coords(dim, side, i);
                (0..dim).all(|a| g[a] > 0 && g[a] < side - 1)
            })
            .collect();
        PatchLayout {
            dim,
            degree: p,
            n_closure: side.pow(dim as u32),
            cell_dofs,
            interior,
            tensor_extent: Some(2 * p - 1),
        }
    }

    /// Layout of a standalone mesh treated as one patch: closure = all DoFs
    /// of `dofs`, interior = its unconstrained DoFs.
    pub fn from_dofmap(dofs: &DofMap) -> Self {
        PatchLayout {
            dim: dofs.dim,
            degree: dofs.degree,
            n_closure: dofs.n_dofs,
            cell_dofs: dofs.cell_dofs.clone(),
            interior: (0..dofs.n_dofs).filter(|&i| !dofs.boundary_mask[i]).collect(),
            tensor_extent: None,
        }
    }

    /// Layout induced by a vertex patch's global closure/interior lists.
    pub fn from_patch(patch: &VertexPatch, dofs: &DofMap) -> Result<Self> {
        let local: HashMap<usize, usize> = patch.closure_dofs.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut cell_dofs = Vec::with_capacity(patch.cells.len() * dofs.dofs_per_cell());
        for &c in &patch.cells {
            for g in dofs.cell(c) {
                let l = local.get(g).ok_or_else(|| {
                    Error::InvalidInput(format!("DoF {g} of patch cell {c} missing from the closure"))
                })?;
                cell_dofs.push(*l);
            }
        }
        let interior = patch
            .interior_dofs
            .iter()
            .map(|g| local.get(g).copied().ok_or_else(|| Error::InvalidInput(format!("interior DoF {g} not in closure"))))
            .collect::<Result<Vec<_>>>()?;
        let tensor_extent = (patch.cells.len() == 1 << dofs.dim
            && patch.closure_dofs.len() == (2 * dofs.degree + 1).pow(dofs.dim as u32))
            .then_some(2 * dofs.degree - 1);
        Ok(PatchLayout {
            dim: dofs.dim,
            degree: dofs.degree,
            n_closure: patch.closure_dofs.len(),
            cell_dofs,
            interior,
            tensor_extent,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn dofs_per_cell(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    pub fn cell(&self, i: usize) -> &[usize] {
        let k = self.dofs_per_cell();
        &self.cell_dofs[i * k..(i + 1) * k]
    }

    pub fn n_cells(&self) -> usize {
        self.cell_dofs.len() / self.dofs_per_cell()
    }

    pub fn scatter_interior(&self, interior: &[f64], closure: &mut [f64]) {
        closure[..self.n_closure].fill(0.0);
        for (&i, &v) in self.interior.iter().zip(interior) {
            closure[i] = v;
        }
    }

    pub fn gather_interior(&self, closure: &[f64], interior: &mut [f64]) {
        for (slot, &i) in interior.iter_mut().zip(&self.interior) {
            *slot = closure[i];
        }
    }
}

/// `out = sum_{patch cells} K_c u` on closure-local vectors.
pub fn apply_on_patch(
    op: &CellOperator,
    cells: &[usize],
    layout: &PatchLayout,
    u: &[f64],
    out: &mut [f64],
    scratch: &mut ApplyScratch,
) {
    let k = layout.dofs_per_cell();
    scratch.ensure(k);
    out[..layout.n_closure].fill(0.0);
    for (i, &c) in cells.iter().enumerate() {
        let idx = layout.cell(i);
        for (slot, &l) in scratch.cell_in[..k].iter_mut().zip(idx) {
            *slot = u[l];
        }
        scratch.cell_out[..k].fill(0.0);
        op.apply_cell(c, &scratch.cell_in[..k], &mut scratch.cell_out[..k], &mut scratch.kernel);
        for (&l, &val) in idx.iter().zip(&scratch.cell_out[..k]) {
            out[l] += val;
        }
    }
}

/// Diagonal of the patch interior operator, accumulated from element diagonals.
pub fn patch_diagonal(op: &CellOperator, cells: &[usize], layout: &PatchLayout) -> Vec<f64> {
    let mut closure = vec![0.0; layout.n_closure];
    for (i, &c) in cells.iter().enumerate() {
        for (&l, &d) in layout.cell(i).iter().zip(op.element_diagonal(c)) {
            closure[l] += d;
        }
    }
    layout.interior.iter().map(|&i| closure[i]).collect()
}

/// Dense interior-interior patch matrix from unit-vector applications.
pub fn dense_patch_matrix(op: &CellOperator, cells: &[usize], layout: &PatchLayout) -> Result<DMatrix<f64>> {
    let n = layout.n_interior();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { size: n, limit: DENSE_LIMIT });
    }
    let mut m = DMatrix::zeros(n, n);
    let mut closure = vec![0.0; layout.n_closure];
    let mut out = vec![0.0; layout.n_closure];
    let mut scratch = ApplyScratch::default();
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        layout.scatter_interior(&e, &mut closure);
        e[j] = 0.0;
        apply_on_patch(op, cells, layout, &closure, &mut out, &mut scratch);
        layout.gather_interior(&out, &mut col);
        m.column_mut(j).copy_from_slice(&col);
    }
    Ok(m)
}
