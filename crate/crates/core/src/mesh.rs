//! Nested quadrilateral/hexahedral mesh hierarchies on the unit square/cube.
//!
//! Cells are multilinear images of the reference cell `[0,1]^d`; their
//! vertices are stored in tensor order (first axis fastest).

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::gauss_legendre;
use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct MeshLevel {
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Flat cell-to-vertex table, `2^dim` entries per cell.
    pub cells: Vec<usize>,
    pub level: usize,
    /// Structured extent; `None` for unstructured standalone patches.
    pub cells_per_dir: Option<usize>,
}

impl MeshLevel {
    pub fn vertices_per_cell(&self) -> usize {
        1 << self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.vertices_per_cell()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.vertices_per_cell();
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cell_vertices(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    /// Vertices strictly inside the domain (not on any boundary facet).
    pub fn interior_vertices(&self) -> Vec<usize> {
        let on_boundary = self.boundary_vertex_mask();
        (0..self.vertices.len()).filter(|&v| !on_boundary[v]).collect()
    }

    /// Flags every vertex lying on a facet that belongs to exactly one cell.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for (c, face) in boundary_facets(self) {
            for v in facet_vertices(self.dim, self.cell(c), face) {
                mask[v] = true;
            }
        }
        mask
    }

    /// Writes the plain-text dump: one vertex per line, then one cell per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.vertices {
            let coords: Vec<String> = v[..self.dim].iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{}", coords.join(" "))?;
        }
        for c in 0..self.n_cells() {
            let ids: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", ids.join(" "))?;
        }
        Ok(())
    }

    /// Fails if any cell Jacobian determinant is non-positive at the cell
    /// corners or at a tensor Gauss rule with `q` points per direction.
    pub fn check_jacobians(&self, q: usize) -> Result<()> {
        let (gauss, _) = gauss_legendre(q);
        let mut samples: Vec<f64> = vec![0.0, 1.0];
        samples.extend_from_slice(&gauss);
        let pts = tensor_points(self.dim, &samples);
        for c in 0..self.n_cells() {
            let verts = self.cell_vertices(c);
            for xi in &pts {
                let det = jacobian_det(self.dim, &jacobian(self.dim, &verts, xi));
                if det <= 0.0 || !det.is_finite() {
                    return Err(Error::DegenerateMesh { cell: c, det });
                }
            }
        }
        Ok(())
    }

    /// Physical position of reference point `xi` in cell `c`.
    pub fn map_point(&self, c: usize, xi: &[f64]) -> Point {
        map_multilinear(self.dim, &self.cell_vertices(c), xi)
    }
}

fn tensor_points(dim: usize, samples: &[f64]) -> Vec<[f64; 3]> {
    let n = samples.len();
    let total = n.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = [0.0; 3];
            for slot in p.iter_mut().take(dim) {
                *slot = samples[idx % n];
                idx /= n;
            }
            p
        })
        .collect()
}

/// Multilinear shape function of local vertex `v` at `xi`.
pub(crate) fn vertex_shape(dim: usize, v: usize, xi: &[f64]) -> f64 {
    (0..dim)
        .map(|a| if (v >> a) & 1 == 1 { xi[a] } else { 1.0 - xi[a] })
        .product()
}

fn vertex_shape_grad(dim: usize, v: usize, xi: &[f64], b: usize) -> f64 {
    (0..dim)
        .map(|a| {
            let bit = (v >> a) & 1 == 1;
            if a == b {
                if bit { 1.0 } else { -1.0 }
            } else if bit {
                xi[a]
            } else {
                1.0 - xi[a]
            }
        })
        .product()
}

pub(crate) fn map_multilinear(dim: usize, verts: &[Point], xi: &[f64]) -> Point {
    let mut x = [0.0; 3];
    for (v, vert) in verts.iter().enumerate() {
        let s = vertex_shape(dim, v, xi);
        for a in 0..dim {
            x[a] += s * vert[a];
        }
    }
    x
}

/// Jacobian `J[a][b] = d x_a / d xi_b` of the multilinear map at `xi`.
pub(crate) fn jacobian(dim: usize, verts: &[Point], xi: &[f64]) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    for (v, vert) in verts.iter().enumerate() {
        for b in 0..dim {
            let g = vertex_shape_grad(dim, v, xi, b);
            for a in 0..dim {
                j[a][b] += vert[a] * g;
            }
        }
    }
    j
}

pub(crate) fn jacobian_det(dim: usize, j: &[[f64; 3]; 3]) -> f64 {
    match dim {
        1 => j[0][0],
        2 => j[0][0] * j[1][1] - j[0][1] * j[1][0],
        3 => {
            j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
        }
        _ => unreachable!(),
    }
}

/// Local vertices of facet `face = 2 * axis + side` of a tensor-ordered cell.
fn facet_vertices(dim: usize, cell: &[usize], face: usize) -> impl Iterator<Item = usize> + '_ {
    let (axis, side) = (face / 2, face % 2);
    (0..1usize << dim).filter(move |v| (v >> axis) & 1 == side).map(move |v| cell[v])
}

/// `(cell, face)` pairs whose facet is not shared with another cell.
pub(crate) fn boundary_facets(mesh: &MeshLevel) -> Vec<(usize, usize)> {
    let mut count: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
    for c in 0..mesh.n_cells() {
        for face in 0..2 * mesh.dim {
            let mut key: Vec<usize> = facet_vertices(mesh.dim, mesh.cell(c), face).collect();
            key.sort_unstable();
            count.entry(key).or_default().push((c, face));
        }
    }
    let mut out: Vec<(usize, usize)> = count
        .into_values()
        .filter(|owners| owners.len() == 1)
        .map(|owners| owners[0])
        .collect();
    out.sort_unstable();
    out
}

/// A sequence of uniformly refined levels with parent links.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshHierarchy {
    pub levels: Vec<MeshLevel>,
    /// `parent_map[l][c]`: parent in level `l - 1` of cell `c` of level `l`;
    /// empty for the coarsest level.
    pub parent_map: Vec<Vec<usize>>,
}

impl MeshHierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy has at least one level")
    }
}

/// Structured vertex index of grid coordinates `g` on a level with `n` cells/dir.
pub(crate) fn grid_vertex(dim: usize, n: usize, g: &[usize]) -> usize {
    let mut idx = 0;
    for a in (0..dim).rev() {
        idx = idx * (n + 1) + g[a];
    }
    idx
}

pub(crate) fn grid_coords(dim: usize, n: usize, mut idx: usize) -> [usize; 3] {
    let mut g = [0; 3];
    for slot in g.iter_mut().take(dim) {
        *slot = idx % n;
        idx /= n;
    }
    g
}

fn structured_level(dim: usize, n: usize, level: usize) -> MeshLevel {
    let nv = (n + 1).pow(dim as u32);
    let vertices = (0..nv)
        .map(|v| {
            let g = grid_coords(dim, n + 1, v);
            let mut x = [0.0; 3];
            for a in 0..dim {
                x[a] = g[a] as f64 / n as f64;
            }
            x
        })
        .collect();
    let ncells = n.pow(dim as u32);
    let mut cells = Vec::with_capacity(ncells << dim);
    for c in 0..ncells {
        let g = grid_coords(dim, n, c);
        for v in 0..1usize << dim {
            let mut gv = [0; 3];
            for a in 0..dim {
                gv[a] = g[a] + ((v >> a) & 1);
            }
            cells.push(grid_vertex(dim, n, &gv[..dim]));
        }
    }
    MeshLevel { dim, vertices, cells, level, cells_per_dir: Some(n) }
}

fn structured_parents(dim: usize, n_fine: usize) -> Vec<usize> {
    let n_coarse = n_fine / 2;
    (0..n_fine.pow(dim as u32))
        .map(|c| {
            let g = grid_coords(dim, n_fine, c);
            let mut idx = 0;
            for a in (0..dim).rev() {
                idx = idx * n_coarse + g[a] / 2;
            }
            idx
        })
        .collect()
}

/// Uniformly refined hierarchy of the unit square/cube. Level `l` (1-based)
/// has `coarse_cells_per_dir * 2^(l-1)` cells per direction.
pub fn build_cartesian_hierarchy(dim: usize, n_levels: usize, coarse_cells_per_dir: usize) -> Result<MeshHierarchy> {
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidInput(format!("dimension must be 2 or 3, got {dim}")));
    }
    if n_levels < 1 || coarse_cells_per_dir < 1 {
        return Err(Error::InvalidInput("need at least one level and one cell".into()));
    }
    let mut levels = Vec::with_capacity(n_levels);
    let mut parent_map = Vec::with_capacity(n_levels);
    for l in 0..n_levels {
        let n = coarse_cells_per_dir << l;
        levels.push(structured_level(dim, n, l + 1));
        parent_map.push(if l == 0 { Vec::new() } else { structured_parents(dim, n) });
    }
    Ok(MeshHierarchy { levels, parent_map })
}

/// Random distortion parameters: each displaced vertex moves by `delta * h_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionSpec {
    pub delta: f64,
    pub seed: u64,
}

fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let mut d = [0.0; 3];
        for slot in d.iter_mut().take(dim) {
            *slot = rng.sample(StandardNormal);
        }
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for slot in d.iter_mut() {
                *slot /= norm;
            }
            return d;
        }
    }
}

/// Minimum length of the cell edges incident to each vertex.
pub fn min_incident_edge(mesh: &MeshLevel) -> Vec<f64> {
    let mut h = vec![f64::INFINITY; mesh.vertices.len()];
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        for v in 0..cell.len() {
            for a in 0..mesh.dim {
                let w = v ^ (1 << a);
                if w < v {
                    continue;
                }
                let (p, q) = (mesh.vertices[cell[v]], mesh.vertices[cell[w]]);
                let len = (0..mesh.dim).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>().sqrt();
                h[cell[v]] = h[cell[v]].min(len);
                h[cell[w]] = h[cell[w]].min(len);
            }
        }
    }
    h
}

/// Displaces every vertex flagged in `movable` by `delta * h_v` in a uniformly
/// random direction; `h_v` is measured before any vertex of this pass moves.
fn displace(mesh: &mut MeshLevel, movable: &[bool], delta: f64, rng: &mut ChaCha8Rng) {
    let h = min_incident_edge(mesh);
    for v in 0..mesh.vertices.len() {
        if !movable[v] {
            continue;
        }
        let dir = random_direction(mesh.dim, rng);
        for a in 0..mesh.dim {
            mesh.vertices[v][a] += delta * h[v] * dir[a];
        }
    }
}

fn degeneracy_quadrature(dim: usize) -> usize {
    if dim == 2 { 2 } else { 4 }
}

/// Randomly distorts the interior vertices of a structured hierarchy level by
/// level. Coarse vertices move first; each finer level inherits them,
/// recomputes refinement midpoints from the distorted parent cells and then
/// displaces only its newly created interior vertices.
pub fn distort_hierarchy(h: &MeshHierarchy, spec: DistortionSpec) -> Result<MeshHierarchy> {
    if spec.delta < 0.0 {
        return Err(Error::InvalidInput("distortion must be non-negative".into()));
    }
    let mut out = h.clone();
    if spec.delta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for l in 0..out.levels.len() {
        let dim = out.levels[l].dim;
        let n = out.levels[l].cells_per_dir.ok_or_else(|| {
            Error::InvalidInput("hierarchical distortion needs structured levels".into())
        })?;
        let mut movable = interior_mask(&out.levels[l]);
        if l > 0 {
            let coarse = out.levels[l - 1].clone();
            let fine = &mut out.levels[l];
            for v in 0..fine.vertices.len() {
                let g = grid_coords(dim, n + 1, v);
                if (0..dim).all(|a| g[a] % 2 == 0) {
                    let mut gc = [0; 3];
                    for a in 0..dim {
                        gc[a] = g[a] / 2;
                    }
                    fine.vertices[v] = coarse.vertices[grid_vertex(dim, n / 2, &gc[..dim])];
                    movable[v] = false;
                } else {
                    // locate the parent cell and the reference midpoint inside it
                    let mut gcell = [0; 3];
                    let mut xi = [0.0; 3];
                    for a in 0..dim {
                        let c = (g[a] / 2).min(n / 2 - 1);
                        gcell[a] = c;
                        xi[a] = (g[a] as f64 - 2.0 * c as f64) / 2.0;
                    }
                    let mut cidx = 0;
                    for a in (0..dim).rev() {
                        cidx = cidx * (n / 2) + gcell[a];
                    }
                    fine.vertices[v] = coarse.map_point(cidx, &xi[..dim]);
                }
            }
        }
        displace(&mut out.levels[l], &movable, spec.delta, &mut rng);
        out.levels[l].check_jacobians(degeneracy_quadrature(dim))?;
    }
    Ok(out)
}

/// Randomly distorts the interior vertices of the finest level only. Each
/// coarser level takes the displaced positions of the vertices it shares with
/// the finest level, so coarse cells stay multilinear between moved vertices
/// and the hierarchy is nested in reference coordinates only.
pub fn distort_finest(h: &MeshHierarchy, spec: DistortionSpec) -> Result<MeshHierarchy> {
    if spec.delta < 0.0 {
        return Err(Error::InvalidInput("distortion must be non-negative".into()));
    }
    let mut out = h.clone();
    if spec.delta == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let last = out.levels.len() - 1;
    let movable = interior_mask(&out.levels[last]);
    displace(&mut out.levels[last], &movable, spec.delta, &mut rng);
    for l in (0..last).rev() {
        let dim = out.levels[l].dim;
        let n = out.levels[l].cells_per_dir.ok_or_else(|| {
            Error::InvalidInput("finest-level distortion needs structured levels".into())
        })?;
        let fine = out.levels[l + 1].clone();
        let coarse = &mut out.levels[l];
        for v in 0..coarse.vertices.len() {
            let g = grid_coords(dim, n + 1, v);
            let mut gf = [0; 3];
            for a in 0..dim {
                gf[a] = 2 * g[a];
            }
            coarse.vertices[v] = fine.vertices[grid_vertex(dim, 2 * n, &gf[..dim])];
        }
    }
    for level in &out.levels {
        level.check_jacobians(degeneracy_quadrature(level.dim))?;
    }
    Ok(out)
}

fn interior_mask(mesh: &MeshLevel) -> Vec<bool> {
    mesh.boundary_vertex_mask().into_iter().map(|b| !b).collect()
}

/// Piecewise-linear 1D profile that compresses the lower half by `eps`.
fn kershaw_right(eps: f64, x: f64) -> f64 {
    if x <= 0.5 { (2.0 - eps) * x } else { 1.0 + eps * (x - 1.0) }
}

fn kershaw_left(eps: f64, x: f64) -> f64 {
    1.0 - kershaw_right(eps, 1.0 - x)
}

/// Smoothstep blend from `a` (t <= 0) to `b` (t >= 1).
fn kershaw_step(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    a + (b - a) * (t * t * (3.0 - 2.0 * t))
}

/// Kershaw transformation of the unit square/cube with the same anisotropy
/// `eps` in every transverse direction. `eps = 1` is the identity.
pub fn kershaw_map(dim: usize, eps: f64, x: Point) -> Point {
    let layer = ((x[0] * 6.0).floor() as i64).clamp(0, 6);
    let lambda = (x[0] - layer as f64 / 6.0) * 6.0;
    let mut out = x;
    for a in 1..dim {
        let (l, r) = (kershaw_left(eps, x[a]), kershaw_right(eps, x[a]));
        out[a] = match layer {
            0 => l,
            1 | 4 => kershaw_step(l, r, lambda),
            2 => kershaw_step(r, l, lambda / 2.0),
            3 => kershaw_step(r, l, (1.0 + lambda) / 2.0),
            _ => r,
        };
    }
    out
}

/// Kershaw hierarchy: uniform refinement of a 6-cells-per-direction coarse
/// mesh with every vertex of every level mapped pointwise.
pub fn build_kershaw_hierarchy(dim: usize, n_levels: usize, epsilon: f64) -> Result<MeshHierarchy> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput(format!("Kershaw epsilon must lie in (0, 1], got {epsilon}")));
    }
    let mut h = build_cartesian_hierarchy(dim, n_levels, KERSHAW_COARSE_CELLS)?;
    for level in &mut h.levels {
        for v in &mut level.vertices {
            *v = kershaw_map(dim, epsilon, *v);
        }
        level.check_jacobians(degeneracy_quadrature(dim))?;
    }
    Ok(h)
}

pub const KERSHAW_COARSE_CELLS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchKind {
    Cartesian,
    Simplex,
}

/// Single-patch mesh around one interior vertex.
///
/// `Cartesian` is the `2^d` unit cells of `[0,2]^d`; `Simplex` splits the
/// reference triangle/tetrahedron into quadrilaterals/hexahedra by joining
/// edge midpoints (and face centroids) to the barycenter. All vertices of the
/// patch are displaced by `delta * h_v`.
pub fn build_standalone_patch(kind: PatchKind, dim: usize, delta: f64, seed: u64) -> Result<MeshLevel> {
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidInput(format!("dimension must be 2 or 3, got {dim}")));
    }
    let mut mesh = match kind {
        PatchKind::Cartesian => {
            let mut m = structured_level(dim, 2, 1);
            for v in &mut m.vertices {
                for x in v.iter_mut().take(dim) {
                    *x *= 2.0;
                }
            }
            m
        }
        PatchKind::Simplex => simplex_patch(dim),
    };
    if delta > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = vec![true; mesh.vertices.len()];
        displace(&mut mesh, &all, delta, &mut rng);
    } else if delta < 0.0 {
        return Err(Error::InvalidInput("distortion must be non-negative".into()));
    }
    mesh.check_jacobians(degeneracy_quadrature(dim))?;
    Ok(mesh)
}

fn simplex_patch(dim: usize) -> MeshLevel {
    let corners: Vec<Point> = (0..=dim)
        .map(|i| {
            let mut p = [0.0; 3];
            if i > 0 {
                p[i - 1] = 1.0;
            }
            p
        })
        .collect();
    let mut vertices: Vec<Point> = Vec::new();
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    // vertex for the barycenter of a subset of simplex corners
    let mut vertex_of = |subset: &[usize], vertices: &mut Vec<Point>| -> usize {
        let mut key = subset.to_vec();
        key.sort_unstable();
        *ids.entry(key.clone()).or_insert_with(|| {
            let mut p = [0.0; 3];
            for &k in &key {
                for a in 0..3 {
                    p[a] += corners[k][a] / key.len() as f64;
                }
            }
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let all: Vec<usize> = (0..=dim).collect();
    let mut cells = Vec::new();
    for v in 0..=dim {
        let others: Vec<usize> = all.iter().copied().filter(|&k| k != v).collect();
        // local tensor vertex bits select which "other" corners join the subset
        let mut local = Vec::with_capacity(1 << dim);
        for bits in 0..1usize << dim {
            let mut subset = vec![v];
            for (a, &o) in others.iter().enumerate().take(dim) {
                if (bits >> a) & 1 == 1 {
                    subset.push(o);
                }
            }
            // the all-ones corner is the full barycenter
            if bits == (1 << dim) - 1 {
                subset = all.clone();
            }
            local.push(vertex_of(&subset, &mut vertices));
        }
        let verts: Vec<Point> = local.iter().map(|&i| vertices[i]).collect();
        let mid = vec![0.5; dim];
        if jacobian_det(dim, &jacobian(dim, &verts, &mid)) < 0.0 {
            // mirror the first two axes to fix orientation
            let swapped: Vec<usize> = (0..1usize << dim)
                .map(|b| {
                    let (b0, b1) = (b & 1, (b >> 1) & 1);
                    local[(b & !3) | (b0 << 1) | b1]
                })
                .collect();
            local = swapped;
        }
        cells.extend(local);
    }
    MeshLevel { dim, vertices, cells, level: 1, cells_per_dir: None }
}

/// Cells around an interior vertex and the degree-`p` DoFs they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPatch {
    pub center_vertex: usize,
    pub cells: Vec<usize>,
    /// Global DoFs strictly inside the patch, in patch-local order.
    pub interior_dofs: Vec<usize>,
    /// Global DoFs of all patch cells, in patch-local order.
    pub closure_dofs: Vec<usize>,
}

/// One patch per interior vertex of a structured level, ordered
/// lexicographically by vertex grid coordinates. Patch-local DoF ordering is
/// lexicographic over the `(2p+1)^d` closure grid.
pub fn collect_vertex_patches(level: &MeshLevel, dofs: &crate::dofs::DofMap) -> Result<Vec<VertexPatch>> {
    let n = level
        .cells_per_dir
        .ok_or_else(|| Error::InvalidInput("vertex patches need a structured level".into()))?;
    if n < 2 {
        return Err(Error::InvalidInput("need at least two cells per direction".into()));
    }
    let dim = level.dim;
    let p = dofs.degree;
    let nodes = n * p + 1;
    let side = 2 * p + 1;
    let mut patches = Vec::new();
    let nv = (n + 1).pow(dim as u32);
    for v in 0..nv {
        let g = grid_coords(dim, n + 1, v);
        if (0..dim).any(|a| g[a] == 0 || g[a] == n) {
            continue;
        }
        let cells: Vec<usize> = (0..1usize << dim)
            .map(|bits| {
                let mut idx = 0;
                for a in (0..dim).rev() {
                    idx = idx * n + g[a] - 1 + ((bits >> a) & 1);
                }
                idx
            })
            .collect();
        let mut closure = Vec::with_capacity(side.pow(dim as u32));
        let mut interior = Vec::with_capacity((side - 2).pow(dim as u32));
        for local in 0..side.pow(dim as u32) {
            let lg = grid_coords(dim, side, local);
            let mut gidx = 0;
            for a in (0..dim).rev() {
                gidx = gidx * nodes + (g[a] - 1) * p + lg[a];
            }
            closure.push(gidx);
            if (0..dim).all(|a| lg[a] > 0 && lg[a] < side - 1) {
                interior.push(gidx);
            }
        }
        patches.push(VertexPatch { center_vertex: v, cells, interior_dofs: interior, closure_dofs: closure });
    }
    Ok(patches)
}

/// The whole standalone patch as a single vertex patch (closure = every DoF).
pub fn standalone_vertex_patch(level: &MeshLevel, dofs: &crate::dofs::DofMap) -> Result<VertexPatch> {
    let interior = level.interior_vertices();
    if interior.len() != 1 {
        return Err(Error::InvalidInput(format!(
            "standalone patch must have one interior vertex, found {}",
            interior.len()
        )));
    }
    Ok(VertexPatch {
        center_vertex: interior[0],
        cells: (0..level.n_cells()).collect(),
        interior_dofs: (0..dofs.n_dofs).filter(|&i| !dofs.boundary_mask[i]).collect(),
        closure_dofs: (0..dofs.n_dofs).collect(),
    })
}
