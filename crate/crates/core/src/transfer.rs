//! Grid transfers: embedding prolongation and its l2-adjoint restriction,
//! between mesh levels (h) and between polynomial degrees on a patch (p).

use crate::basis::{gauss_lobatto_nodes, interpolation_matrix};
use crate::dofs::DofMap;
use crate::error::{Error, Result};
use crate::mesh::{grid_coords, MeshHierarchy};
use crate::operator::PatchLayout;
use crate::tensor::contract;

/// Applies a per-axis Kronecker product `mats[d-1] ⊗ ... ⊗ mats[0]` where every
/// matrix is `rows x cols`. `buf` is scratch.
fn kron_axes(dim: usize, mats: &[&[f64]], rows: usize, cols: usize, input: &[f64], output: &mut [f64], buf: &mut Vec<f64>) {
    let big = rows.max(cols).pow(dim as u32);
    if buf.len() < 2 * big {
        buf.resize(2 * big, 0.0);
    }
    let (a, b) = buf.split_at_mut(big);
    let n_in = cols.pow(dim as u32);
    a[..n_in].copy_from_slice(&input[..n_in]);
    let mut extents = vec![cols; dim];
    let (mut cur, mut nxt) = (a, b);
    for axis in 0..dim {
        contract(axis, mats[axis], rows, cols, &extents, cur, nxt);
        extents[axis] = rows;
        std::mem::swap(&mut cur, &mut nxt);
    }
    let n_out = rows.pow(dim as u32);
    output[..n_out].copy_from_slice(&cur[..n_out]);
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = m[i * cols + j];
        }
    }
    t
}

/// Embedding between two consecutive structured levels of equal degree.
#[derive(Debug, Clone)]
pub struct HTransfer {
    dim: usize,
    degree: usize,
    /// Half-interval embeddings `[left, right]`, `(p+1) x (p+1)` each, and transposes.
    halves: [Vec<f64>; 2],
    halves_t: [Vec<f64>; 2],
    coarse_cells: Vec<usize>,
    /// Child position bits of every fine cell inside its parent.
    child_bits: Vec<usize>,
    /// Per fine cell DoF slot: does this cell own the DoF for the adjoint.
    owned: Vec<bool>,
}

impl HTransfer {
    /// Transfer from level `fine - 1` to level `fine` of `h`.
    pub fn new(h: &MeshHierarchy, fine: usize, coarse_dofs: &DofMap, fine_dofs: &DofMap) -> Result<Self> {
        if fine == 0 || fine >= h.n_levels() {
            return Err(Error::InvalidInput(format!("level {fine} has no coarser neighbour")));
        }
        if coarse_dofs.degree != fine_dofs.degree {
            return Err(Error::InvalidInput("h-transfer needs equal degrees".into()));
        }
        let dim = fine_dofs.dim;
        let p = fine_dofs.degree;
        let n_fine = h.levels[fine]
            .cells_per_dir
            .ok_or_else(|| Error::InvalidInput("h-transfer needs structured levels".into()))?;
        let nodes = gauss_lobatto_nodes(p);
        let halves = [0.0, 1.0].map(|shift| {
            let pts: Vec<f64> = nodes.iter().map(|x| 0.5 * (x + shift)).collect();
            interpolation_matrix(&nodes, &pts)
        });
        let halves_t = [transpose(&halves[0], p + 1, p + 1), transpose(&halves[1], p + 1, p + 1)];
        let n_cells = h.levels[fine].n_cells();
        let child_bits = (0..n_cells)
            .map(|c| {
                let g = grid_coords(dim, n_fine, c);
                (0..dim).map(|a| (g[a] % 2) << a).sum()
            })
            .collect();
        let k = fine_dofs.dofs_per_cell();
        let mut seen = vec![false; fine_dofs.n_dofs];
        let mut owned = vec![false; n_cells * k];
        for c in 0..n_cells {
            for (slot, &g) in fine_dofs.cell(c).iter().enumerate() {
                if !seen[g] {
                    seen[g] = true;
                    owned[c * k + slot] = true;
                }
            }
        }
        let _ = coarse_dofs;
        Ok(HTransfer { dim, degree: p, halves, halves_t, coarse_cells: h.parent_map[fine].clone(), child_bits, owned })
    }

    /// Interpolates the coarse finite element function at the fine nodes.
    pub fn prolongate(&self, coarse_dofs: &DofMap, fine_dofs: &DofMap, coarse: &[f64], fine: &mut [f64]) {
        let k = fine_dofs.dofs_per_cell();
        let n = self.degree + 1;
        let mut cell_in = vec![0.0; k];
        let mut cell_out = vec![0.0; k];
        let mut buf = Vec::new();
        for (c, &parent) in self.coarse_cells.iter().enumerate() {
            for (slot, &g) in cell_in.iter_mut().zip(coarse_dofs.cell(parent)) {
                *slot = coarse[g];
            }
            let mats: Vec<&[f64]> = (0..self.dim).map(|a| self.halves[(self.child_bits[c] >> a) & 1].as_slice()).collect();
            kron_axes(self.dim, &mats, n, n, &cell_in, &mut cell_out, &mut buf);
            for (slot, &g) in fine_dofs.cell(c).iter().enumerate() {
                if self.owned[c * k + slot] {
                    fine[g] = cell_out[slot];
                }
            }
        }
    }

    /// Exact transpose of [`HTransfer::prolongate`]; overwrites `coarse`.
    pub fn restrict(&self, coarse_dofs: &DofMap, fine_dofs: &DofMap, fine: &[f64], coarse: &mut [f64]) {
        let k = fine_dofs.dofs_per_cell();
        let n = self.degree + 1;
        coarse.fill(0.0);
        let mut cell_in = vec![0.0; k];
        let mut cell_out = vec![0.0; k];
        let mut buf = Vec::new();
        for (c, &parent) in self.coarse_cells.iter().enumerate() {
            for (slot, &g) in fine_dofs.cell(c).iter().enumerate() {
                cell_in[slot] = if self.owned[c * k + slot] { fine[g] } else { 0.0 };
            }
            let mats: Vec<&[f64]> = (0..self.dim).map(|a| self.halves_t[(self.child_bits[c] >> a) & 1].as_slice()).collect();
            kron_axes(self.dim, &mats, n, n, &cell_in, &mut cell_out, &mut buf);
            for (&g, &v) in coarse_dofs.cell(parent).iter().zip(&cell_out) {
                coarse[g] += v;
            }
        }
    }
}

/// Degree transfer on patch interior vectors.
#[derive(Debug, Clone)]
pub enum PTransfer {
    /// Kronecker transfer on `2^d` tensor patches.
    Tensor { dim: usize, rows: usize, cols: usize, matrix: Vec<f64>, matrix_t: Vec<f64> },
    /// Cell-by-cell embedding for general patches.
    CellWise {
        coarse: PatchLayout,
        fine: PatchLayout,
        matrix: Vec<f64>,
        matrix_t: Vec<f64>,
        owned: Vec<bool>,
    },
}

/// Piecewise Lagrange embedding on the two-cell patch `[0, 2]`, restricted to
/// interior nodes: `(2 p_f - 1) x (2 p_c - 1)`.
pub fn patch_embedding_1d(p_coarse: usize, p_fine: usize) -> Vec<f64> {
    let cn = gauss_lobatto_nodes(p_coarse);
    let fn_ = gauss_lobatto_nodes(p_fine);
    let (rows, cols) = (2 * p_fine - 1, 2 * p_coarse - 1);
    let mut m = vec![0.0; rows * cols];
    for r in 0..rows {
        // fine interior node r + 1 on the patch node grid
        let fi = r + 1;
        let (cell, local) = if fi < p_fine { (0, fi) } else { (1, fi - p_fine) };
        let x = fn_[local];
        for col in 0..cols {
            let ci = col + 1;
            // coarse patch node ci lives in cell 0 (ci <= p_c) and/or cell 1
            let mut v = 0.0;
            if cell == 0 && ci <= p_coarse {
                v = crate::basis::lagrange_value(&cn, ci, x);
            }
            if cell == 1 && ci >= p_coarse {
                v = crate::basis::lagrange_value(&cn, ci - p_coarse, x);
            }
            m[r * cols + col] = v;
        }
    }
    m
}

impl PTransfer {
    pub fn tensor(dim: usize, p_coarse: usize, p_fine: usize) -> Result<Self> {
        if p_coarse >= p_fine {
            return Err(Error::InvalidInput(format!("p-transfer needs {p_coarse} < {p_fine}")));
        }
        let (rows, cols) = (2 * p_fine - 1, 2 * p_coarse - 1);
        let matrix = patch_embedding_1d(p_coarse, p_fine);
        let matrix_t = transpose(&matrix, rows, cols);
        Ok(PTransfer::Tensor { dim, rows, cols, matrix, matrix_t })
    }

    pub fn cellwise(coarse: PatchLayout, fine: PatchLayout) -> Result<Self> {
        if coarse.degree >= fine.degree || coarse.n_cells() != fine.n_cells() {
            return Err(Error::InvalidInput("incompatible patch layouts for p-transfer".into()));
        }
        let cn = gauss_lobatto_nodes(coarse.degree);
        let fnodes = gauss_lobatto_nodes(fine.degree);
        let matrix = interpolation_matrix(&cn, &fnodes);
        let matrix_t = transpose(&matrix, fine.degree + 1, coarse.degree + 1);
        let k = fine.dofs_per_cell();
        let mut seen = vec![false; fine.n_closure];
        let mut owned = vec![false; fine.cell_dofs.len()];
        for i in 0..fine.n_cells() {
            for (slot, &l) in fine.cell(i).iter().enumerate() {
                if !seen[l] {
                    seen[l] = true;
                    owned[i * k + slot] = true;
                }
            }
        }
        Ok(PTransfer::CellWise { coarse, fine, matrix, matrix_t, owned })
    }

    /// Builds the tensor variant when both layouts are tensor patches.
    pub fn between(coarse: &PatchLayout, fine: &PatchLayout) -> Result<Self> {
        match (coarse.tensor_extent, fine.tensor_extent) {
            (Some(_), Some(_)) => Self::tensor(fine.dim, coarse.degree, fine.degree),
            _ => Self::cellwise(coarse.clone(), fine.clone()),
        }
    }

    pub fn n_coarse(&self) -> usize {
        match self {
            PTransfer::Tensor { dim, cols, .. } => cols.pow(*dim as u32),
            PTransfer::CellWise { coarse, .. } => coarse.n_interior(),
        }
    }

    pub fn n_fine(&self) -> usize {
        match self {
            PTransfer::Tensor { dim, rows, .. } => rows.pow(*dim as u32),
            PTransfer::CellWise { fine, .. } => fine.n_interior(),
        }
    }

    pub fn prolongate_into(&self, coarse: &[f64], fine_out: &mut [f64], buf: &mut Vec<f64>) {
        match self {
            PTransfer::Tensor { dim, rows, cols, matrix, .. } => {
                let mats = vec![matrix.as_slice(); *dim];
                kron_axes(*dim, &mats, *rows, *cols, coarse, fine_out, buf);
            }
            PTransfer::CellWise { coarse: cl, fine: fl, matrix, owned, .. } => {
                let mut cc = vec![0.0; cl.n_closure];
                cl.scatter_interior(coarse, &mut cc);
                let mut fc = vec![0.0; fl.n_closure];
                let (kc, kf) = (cl.dofs_per_cell(), fl.dofs_per_cell());
                let mut cell_in = vec![0.0; kc];
                let mut cell_out = vec![0.0; kf];
                let mats = vec![matrix.as_slice(); cl.dim];
                for i in 0..cl.n_cells() {
                    for (slot, &l) in cell_in.iter_mut().zip(cl.cell(i)) {
                        *slot = cc[l];
                    }
                    kron_axes(cl.dim, &mats, fl.degree + 1, cl.degree + 1, &cell_in, &mut cell_out, buf);
                    for (slot, &l) in fl.cell(i).iter().enumerate() {
                        if owned[i * kf + slot] {
                            fc[l] = cell_out[slot];
                        }
                    }
                }
                fl.gather_interior(&fc, fine_out);
            }
        }
    }

    pub fn restrict_into(&self, fine: &[f64], coarse_out: &mut [f64], buf: &mut Vec<f64>) {
        match self {
            PTransfer::Tensor { dim, rows, cols, matrix_t, .. } => {
                let mats = vec![matrix_t.as_slice(); *dim];
                kron_axes(*dim, &mats, *cols, *rows, fine, coarse_out, buf);
            }
            PTransfer::CellWise { coarse: cl, fine: fl, matrix_t, owned, .. } => {
                let mut fc = vec![0.0; fl.n_closure];
                fl.scatter_interior(fine, &mut fc);
                let mut cc = vec![0.0; cl.n_closure];
                let (kc, kf) = (cl.dofs_per_cell(), fl.dofs_per_cell());
                let mut cell_in = vec![0.0; kf];
                let mut cell_out = vec![0.0; kc];
                let mats = vec![matrix_t.as_slice(); cl.dim];
                for i in 0..cl.n_cells() {
                    for (slot, &l) in fl.cell(i).iter().enumerate() {
                        cell_in[slot] = if owned[i * kf + slot] { fc[l] } else { 0.0 };
                    }
                    kron_axes(cl.dim, &mats, cl.degree + 1, fl.degree + 1, &cell_in, &mut cell_out, buf);
                    for (&l, &v) in cl.cell(i).iter().zip(&cell_out) {
                        cc[l] += v;
                    }
                }
                cl.gather_interior(&cc, coarse_out);
            }
        }
    }

    pub fn prolongate(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        if coarse.len() != self.n_coarse() {
            return Err(Error::ShapeMismatch { expected: self.n_coarse(), found: coarse.len() });
        }
        let mut out = vec![0.0; self.n_fine()];
        self.prolongate_into(coarse, &mut out, &mut Vec::new());
        Ok(out)
    }

    pub fn restrict(&self, fine: &[f64]) -> Result<Vec<f64>> {
        if fine.len() != self.n_fine() {
            return Err(Error::ShapeMismatch { expected: self.n_fine(), found: fine.len() });
        }
        let mut out = vec![0.0; self.n_coarse()];
        self.restrict_into(fine, &mut out, &mut Vec::new());
        Ok(out)
    }
}
