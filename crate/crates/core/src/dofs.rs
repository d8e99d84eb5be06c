//! Degree-`p` continuous nodal DoF numbering.

use std::collections::HashMap;

use crate::basis::gauss_lobatto_nodes;
use crate::error::{Error, Result};
use crate::mesh::{self, MeshLevel, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub dim: usize,
    pub degree: usize,
    pub n_dofs: usize,
    /// `(p+1)^d` global indices per cell, lexicographic in the cell.
    pub cell_dofs: Vec<usize>,
    /// Domain-boundary (constrained) DoFs.
    pub boundary_mask: Vec<bool>,
    /// Nodes per direction for structured levels.
    pub nodes_per_dir: Option<usize>,
}

impl DofMap {
    pub fn dofs_per_cell(&self) -> usize {
        (self.degree + 1).pow(self.dim as u32)
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dofs_per_cell();
        &self.cell_dofs[c * k..(c + 1) * k]
    }

    pub fn n_cells(&self) -> usize {
        self.cell_dofs.len() / self.dofs_per_cell()
    }

    /// Builds the DoF map of a level, structured or not.
    pub fn new(level: &MeshLevel, p: usize) -> Result<Self> {
        match level.cells_per_dir {
            Some(_) => Self::structured(level, p),
            None => Self::unstructured(level, p),
        }
    }

    /// Tensor-lexicographic numbering on an `n^d`-cell structured level:
    /// `(n p + 1)^d` DoFs, boundary = nodes on the outer grid faces.
    pub fn structured(level: &MeshLevel, p: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidInput("degree must be >= 1".into()));
        }
        let n = level
            .cells_per_dir
            .ok_or_else(|| Error::InvalidInput("structured numbering needs a structured level".into()))?;
        let dim = level.dim;
        let nodes = n * p + 1;
        let n_dofs = nodes.pow(dim as u32);
        let k = (p + 1).pow(dim as u32);
        let mut cell_dofs = Vec::with_capacity(level.n_cells() * k);
        for c in 0..level.n_cells() {
            let g = mesh::grid_coords(dim, n, c);
            for local in 0..k {
                let lg = mesh::grid_coords(dim, p + 1, local);
                let mut idx = 0;
                for a in (0..dim).rev() {
                    idx = idx * nodes + g[a] * p + lg[a];
                }
                cell_dofs.push(idx);
            }
        }
        let boundary_mask = (0..n_dofs)
            .map(|i| {
                let g = mesh::grid_coords(dim, nodes, i);
                (0..dim).any(|a| g[a] == 0 || g[a] == nodes - 1)
            })
            .collect();
        Ok(DofMap { dim, degree: p, n_dofs, cell_dofs, boundary_mask, nodes_per_dir: Some(nodes) })
    }

    /// Numbering for arbitrary conforming meshes. A node is identified by the
    /// (vertex, multilinear weight) pairs that place it inside its cell, which
    /// is independent of the cell's local orientation.
    pub fn unstructured(level: &MeshLevel, p: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidInput("degree must be >= 1".into()));
        }
        let dim = level.dim;
        let nodes_1d = gauss_lobatto_nodes(p);
        let k = (p + 1).pow(dim as u32);
        let nv = 1usize << dim;
        let mut ids: HashMap<Vec<(usize, i64)>, usize> = HashMap::new();
        let mut cell_dofs = Vec::with_capacity(level.n_cells() * k);
        for c in 0..level.n_cells() {
            let cell = level.cell(c);
            for local in 0..k {
                let lg = mesh::grid_coords(dim, p + 1, local);
                let xi: Vec<f64> = (0..dim).map(|a| nodes_1d[lg[a]]).collect();
                let mut key: Vec<(usize, i64)> = (0..nv)
                    .filter_map(|v| {
                        let w = mesh::vertex_shape(dim, v, &xi);
                        let q = (w * 1e9).round() as i64;
                        (q != 0).then_some((cell[v], q))
                    })
                    .collect();
                key.sort_unstable();
                let next = ids.len();
                cell_dofs.push(*ids.entry(key).or_insert(next));
            }
        }
        let n_dofs = ids.len();
        let mut boundary_mask = vec![false; n_dofs];
        for (c, face) in mesh::boundary_facets(level) {
            let (axis, side) = (face / 2, face % 2);
            for local in 0..k {
                let lg = mesh::grid_coords(dim, p + 1, local);
                if lg[axis] == side * p {
                    boundary_mask[cell_dofs[c * k + local]] = true;
                }
            }
        }
        Ok(DofMap { dim, degree: p, n_dofs, cell_dofs, boundary_mask, nodes_per_dir: None })
    }

    /// Physical coordinates of every DoF node.
    pub fn support_points(&self, level: &MeshLevel) -> Vec<Point> {
        let nodes_1d = gauss_lobatto_nodes(self.degree);
        let k = self.dofs_per_cell();
        let mut pts = vec![[0.0; 3]; self.n_dofs];
        for c in 0..self.n_cells() {
            for local in 0..k {
                let lg = mesh::grid_coords(self.dim, self.degree + 1, local);
                let xi: Vec<f64> = (0..self.dim).map(|a| nodes_1d[lg[a]]).collect();
                pts[self.cell_dofs[c * k + local]] = level.map_point(c, &xi);
            }
        }
        pts
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, level: &MeshLevel, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.support_points(level).iter().map(f).collect()
    }

    pub fn n_unconstrained(&self) -> usize {
        self.boundary_mask.iter().filter(|b| !**b).count()
    }
}

/// DoF count `(cells_per_dir * p + 1)^d` on a structured level.
pub fn structured_dof_count(dim: usize, cells_per_dir: usize, p: usize) -> usize {
    (cells_per_dir * p + 1).pow(dim as u32)
}
