//! Nested p-multigrid V-cycle approximating the inverse of a patch-interior
//! operator. Levels follow the degree sequence `1, 3, 7, 15, ...` capped at
//! the patch degree; smoothing is damped preconditioned Richardson with either
//! the inverse patch diagonal (Jacobi) or a reference-patch fast
//! diagonalization rescaled by diagonals (Cartesian-reinforced).

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::make_basis;
use crate::dofs::DofMap;
use crate::error::{Error, Result};
use crate::mesh::MeshLevel;
use crate::operator::{apply_on_patch, dense_patch_matrix, patch_diagonal, ApplyScratch, CellOperator, PatchLayout};
use crate::tensor::kron_apply;
use crate::transfer::PTransfer;

/// Richardson damping. Steps whose preconditioner is an exact patch inverse
/// run undamped regardless.
pub const DEFAULT_OMEGA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherKind {
    Jacobi,
    CartesianReinforced,
}

impl std::str::FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(SmootherKind::Jacobi),
            "cartesian" | "cartesian-reinforced" | "cartesian_reinforced" => Ok(SmootherKind::CartesianReinforced),
            other => Err(Error::InvalidInput(format!("unknown smoother '{other}'"))),
        }
    }
}

impl std::fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SmootherKind::Jacobi => "jacobi",
            SmootherKind::CartesianReinforced => "cartesian",
        })
    }
}

/// Degrees `1, 3, 7, ...` (`p_{k+1} = 2 p_k + 1`) while below `p`, then `p`.
pub fn degree_sequence(p: usize) -> Vec<usize> {
    let mut seq = vec![1];
    while *seq.last().unwrap() < p {
        let next = 2 * seq.last().unwrap() + 1;
        seq.push(next.min(p));
    }
    seq
}

/// 1D interior stiffness and mass matrices on the two-cell patch `[0, 2]`
/// with unit cells, `(2p-1) x (2p-1)`, row-major.
pub fn reference_patch_matrices_1d(p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = make_basis(p, p + 1)?;
    let n = p + 1;
    let q = b.n_quad();
    let full = 2 * p + 1;
    let mut k = vec![0.0; full * full];
    let mut m = vec![0.0; full * full];
    for cell in 0..2 {
        for i in 0..n {
            for j in 0..n {
                let (mut kij, mut mij) = (0.0, 0.0);
                for x in 0..q {
                    let w = b.quad_weights[x];
                    kij += w * b.gradients[i * q + x] * b.gradients[j * q + x];
                    mij += w * b.values[i * q + x] * b.values[j * q + x];
                }
                let (gi, gj) = (cell * p + i, cell * p + j);
                k[gi * full + gj] += kij;
                m[gi * full + gj] += mij;
            }
        }
    }
    let ni = full - 2;
    let interior = |a: &[f64]| {
        let mut out = vec![0.0; ni * ni];
        for i in 0..ni {
            for j in 0..ni {
                out[i * ni + j] = a[(i + 1) * full + j + 1];
            }
        }
        out
    };
    Ok((interior(&k), interior(&m)))
}

/// Fast diagonalization of the reference Cartesian patch operator
/// `A_b = sum_k M x .. x K (k-th) x .. x M`.
#[derive(Debug, Clone)]
pub struct FastDiag {
    pub dim: usize,
    /// Interior nodes per direction.
    pub n: usize,
    /// Generalized eigenvectors (columns), `M`-orthonormal, row-major.
    pub eigenvectors: Vec<f64>,
    eigenvectors_t: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `1 / sum_k lambda_{i_k}` over the tensor grid.
    inv_lambda: Vec<f64>,
    /// Diagonal of `A_b`.
    pub diagonal: Vec<f64>,
}

impl FastDiag {
    pub fn new(dim: usize, p: usize) -> Result<Self> {
        let (k, m) = reference_patch_matrices_1d(p)?;
        let n = 2 * p - 1;
        let km = DMatrix::from_row_slice(n, n, &k);
        let mm = DMatrix::from_row_slice(n, n, &m);
        let chol = mm
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("reference mass matrix not positive definite".into()))?;
        let l = chol.l();
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("singular Cholesky factor".into()))?;
        let c = &l_inv * km * l_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        let z = l_inv.transpose() * eig.eigenvectors;
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let mut eigenvectors = vec![0.0; n * n];
        let mut eigenvectors_t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                eigenvectors[i * n + j] = z[(i, j)];
                eigenvectors_t[j * n + i] = z[(i, j)];
            }
        }
        let total = n.pow(dim as u32);
        let mut inv_lambda = vec![0.0; total];
        let mut diagonal = vec![0.0; total];
        for (idx, (il, dg)) in inv_lambda.iter_mut().zip(diagonal.iter_mut()).enumerate() {
            let g = crate::mesh::grid_coords(dim, n, idx);
            let s: f64 = (0..dim).map(|a| eigenvalues[g[a]]).sum();
            *il = 1.0 / s;
            *dg = (0..dim)
                .map(|kdir| {
                    (0..dim)
                        .map(|a| if a == kdir { k[g[a] * n + g[a]] } else { m[g[a] * n + g[a]] })
                        .product::<f64>()
                })
                .sum();
        }
        Ok(FastDiag { dim, n, eigenvectors, eigenvectors_t, eigenvalues, inv_lambda, diagonal })
    }

    pub fn len(&self) -> usize {
        self.inv_lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_lambda.is_empty()
    }

    /// `out = A_b^{-1} r`.
    pub fn solve_into(&self, r: &[f64], out: &mut [f64], buf: &mut Vec<f64>) {
        kron_apply(self.dim, &self.eigenvectors_t, self.n, self.n, r, out, buf);
        for (o, il) in out.iter_mut().zip(&self.inv_lambda) {
            *o *= il;
        }
        let tmp = out.to_vec();
        kron_apply(self.dim, &self.eigenvectors, self.n, self.n, &tmp, out, buf);
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found: r.len() });
        }
        let mut out = vec![0.0; r.len()];
        self.solve_into(r, &mut out, &mut Vec::new());
        Ok(out)
    }
}

/// Data of one p-level shared by all patches of a mesh level.
#[derive(Debug, Clone)]
pub struct PLevel {
    pub degree: usize,
    pub op: Arc<CellOperator>,
    pub layout: PatchLayout,
    pub fast_diag: Option<FastDiag>,
}

/// Degree hierarchy shared by every patch on one mesh level.
#[derive(Debug, Clone)]
pub struct PSetup {
    pub dim: usize,
    pub sequence: Vec<usize>,
    pub levels: Vec<PLevel>,
    /// `transfers[k]` maps degree `sequence[k]` to `sequence[k + 1]`.
    pub transfers: Vec<PTransfer>,
    pub kind: SmootherKind,
    pub omega: f64,
}

impl PSetup {
    /// Setup for `2^d`-cell tensor patches of a structured level. `top` may
    /// supply an already built degree-`p` cell operator.
    pub fn structured(
        level: &MeshLevel,
        mu: &[f64],
        p: usize,
        kind: SmootherKind,
        omega: f64,
        top: Option<Arc<CellOperator>>,
    ) -> Result<Self> {
        let dim = level.dim;
        let sequence = degree_sequence(p);
        let layouts = sequence.iter().map(|&pk| PatchLayout::structured(dim, pk)).collect();
        Self::build(level, mu, sequence, layouts, kind, omega, top)
    }

    /// Setup for a standalone mesh treated as one patch (closure = all DoFs,
    /// interior = unconstrained DoFs). Tensor transfers and fast
    /// diagonalization are used when the mesh is a structured 2x2(x2) patch.
    pub fn standalone(level: &MeshLevel, mu: &[f64], p: usize, kind: SmootherKind, omega: f64) -> Result<Self> {
        if level.cells_per_dir == Some(2) {
            return Self::structured(level, mu, p, kind, omega, None);
        }
        let sequence = degree_sequence(p);
        let layouts = sequence
            .iter()
            .map(|&pk| DofMap::new(level, pk).map(|d| PatchLayout::from_dofmap(&d)))
            .collect::<Result<Vec<_>>>()?;
        Self::build(level, mu, sequence, layouts, kind, omega, None)
    }

    fn build(
        level: &MeshLevel,
        mu: &[f64],
        sequence: Vec<usize>,
        layouts: Vec<PatchLayout>,
        kind: SmootherKind,
        omega: f64,
        top: Option<Arc<CellOperator>>,
    ) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidInput(format!("damping must be positive, got {omega}")));
        }
        let dim = level.dim;
        let p = *sequence.last().unwrap();
        let mut levels = Vec::with_capacity(sequence.len());
        for (&pk, layout) in sequence.iter().zip(layouts) {
            let op = match &top {
                Some(t) if pk == p => {
                    if t.degree() != p {
                        return Err(Error::InvalidInput("top operator degree mismatch".into()));
                    }
                    t.clone()
                }
                _ => Arc::new(CellOperator::new(level, pk, mu)?),
            };
            let fast_diag = match kind {
                SmootherKind::Jacobi => None,
                SmootherKind::CartesianReinforced if pk == 1 => None,
                SmootherKind::CartesianReinforced => {
                    if layout.tensor_extent.is_none() {
                        return Err(Error::InvalidInput(
                            "the Cartesian-reinforced smoother needs tensor-product patches".into(),
                        ));
                    }
                    Some(FastDiag::new(dim, pk)?)
                }
            };
            levels.push(PLevel { degree: pk, op, layout, fast_diag });
        }
        let transfers = levels
            .windows(2)
            .map(|w| PTransfer::between(&w[0].layout, &w[1].layout))
            .collect::<Result<Vec<_>>>()?;
        Ok(PSetup { dim, sequence, levels, transfers, kind, omega })
    }

    pub fn degree(&self) -> usize {
        *self.sequence.last().unwrap()
    }

    pub fn n_interior(&self) -> usize {
        self.levels.last().unwrap().layout.n_interior()
    }

    /// Per-patch data for the patch made of `cells` (in layout order).
    pub fn patch(&self, cells: &[usize]) -> Result<PatchSolver> {
        PatchSolver::new(self, cells)
    }
}

/// Coarse (degree-1) solver of one patch.
#[derive(Debug, Clone)]
pub enum CoarseSolver {
    /// Reciprocal of the single unconstrained entry.
    Scalar(f64),
    /// Dense inverse when the degree-1 interior has several DoFs.
    Dense(DMatrix<f64>),
}

/// Precomputed per-patch p-level data: preconditioner scalings and the coarse
/// solver.
#[derive(Debug, Clone)]
pub struct PatchSolver {
    pub cells: Vec<usize>,
    /// Per level: inverse diagonal (Jacobi) or `diag(A_b) / diag(A_j)`.
    scale: Vec<Vec<f64>>,
    /// Per level Richardson damping: the setup value, or 1 where the
    /// reinforced preconditioner inverts the patch matrix exactly.
    omega: Vec<f64>,
    pub coarse: CoarseSolver,
    /// Degree-1 patch matrix entry when the coarse space is one DoF.
    coarse_value: Option<f64>,
}

impl PatchSolver {
    pub fn new(setup: &PSetup, cells: &[usize]) -> Result<Self> {
        let mut scale = Vec::with_capacity(setup.levels.len());
        for lvl in &setup.levels {
            if cells.len() != lvl.layout.n_cells() {
                return Err(Error::ShapeMismatch { expected: lvl.layout.n_cells(), found: cells.len() });
            }
            let diag = patch_diagonal(&lvl.op, cells, &lvl.layout);
            if let Some(bad) = diag.iter().find(|d| !(**d > 0.0)) {
                return Err(Error::InvalidInput(format!("non-positive patch diagonal entry {bad}")));
            }
            let s: Vec<f64> = match &lvl.fast_diag {
                Some(fd) => diag.iter().zip(&fd.diagonal).map(|(d, b)| b / d).collect(),
                None => diag.iter().map(|d| 1.0 / d).collect(),
            };
            scale.push(s);
        }
        let omega = setup
            .levels
            .iter()
            .zip(&scale)
            .map(|(lvl, s)| if is_exact_inverse(lvl, cells, s) { 1.0 } else { setup.omega })
            .collect();
        let l0 = &setup.levels[0];
        let (coarse, coarse_value) = if l0.layout.n_interior() == 1 {
            let a = patch_diagonal(&l0.op, cells, &l0.layout)[0];
            (CoarseSolver::Scalar(1.0 / a), Some(a))
        } else {
            let m = dense_patch_matrix(&l0.op, cells, &l0.layout)?;
            let inv = m
                .try_inverse()
                .ok_or_else(|| Error::InvalidInput("singular coarse patch matrix".into()))?;
            (CoarseSolver::Dense(inv), None)
        };
        Ok(PatchSolver { cells: cells.to_vec(), scale, omega, coarse, coarse_value })
    }

    /// The scalar `A_{j,1}`; fails when the coarse space has several DoFs.
    pub fn coarse_scalar(&self) -> Result<f64> {
        match (&self.coarse, self.coarse_value) {
            (CoarseSolver::Scalar(_), Some(a)) => Ok(a),
            (CoarseSolver::Dense(m), _) => Err(Error::MultiDofCoarse(m.nrows())),
            _ => unreachable!(),
        }
    }

    /// Inverse patch diagonal at level `k` of the sequence (Jacobi scaling).
    pub fn scaling(&self, k: usize) -> &[f64] {
        &self.scale[k]
    }

    /// Richardson damping used at level `k`.
    pub fn omega(&self, k: usize) -> f64 {
        self.omega[k]
    }
}

/// Whether the reinforced preconditioner of `lvl` satisfies `P A_j x = x` for
/// a fixed non-smooth test vector, i.e. the patch is a scaled reference patch.
fn is_exact_inverse(lvl: &PLevel, cells: &[usize], scale: &[f64]) -> bool {
    if lvl.fast_diag.is_none() {
        return false;
    }
    let n = lvl.layout.n_interior();
    let x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let (mut y, mut z) = (vec![0.0; n], vec![0.0; n]);
    let (mut closure_in, mut closure_out) = (vec![0.0; lvl.layout.n_closure], vec![0.0; lvl.layout.n_closure]);
    let (mut apply, mut kron) = (ApplyScratch::default(), Vec::new());
    let mut sh = Shared { closure_in: &mut closure_in, closure_out: &mut closure_out, apply: &mut apply, kron: &mut kron };
    apply_level(lvl, cells, &x, &mut y, &mut sh);
    precondition(lvl, scale, &y, &mut z, sh.kron);
    let err = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    err <= 1e-10 * norm
}

#[derive(Debug, Clone, Default)]
struct LevelBuf {
    d: Vec<f64>,
    r: Vec<f64>,
    res: Vec<f64>,
    tmp: Vec<f64>,
}

/// Work vectors for [`v_cycle`] and [`local_solve`], reusable across patches.
#[derive(Debug, Clone, Default)]
pub struct PmgWorkspace {
    bufs: Vec<LevelBuf>,
    closure_in: Vec<f64>,
    closure_out: Vec<f64>,
    apply: ApplyScratch,
    kron: Vec<f64>,
}

impl PmgWorkspace {
    pub fn new(setup: &PSetup) -> Self {
        let mut ws = PmgWorkspace::default();
        ws.ensure(setup);
        ws
    }

    fn ensure(&mut self, setup: &PSetup) {
        if self.bufs.len() != setup.levels.len()
            || self.bufs.iter().zip(&setup.levels).any(|(b, l)| b.d.len() != l.layout.n_interior())
        {
            self.bufs = setup
                .levels
                .iter()
                .map(|l| {
                    let n = l.layout.n_interior();
                    LevelBuf { d: vec![0.0; n], r: vec![0.0; n], res: vec![0.0; n], tmp: vec![0.0; n] }
                })
                .collect();
        }
        let nc = setup.levels.iter().map(|l| l.layout.n_closure).max().unwrap();
        if self.closure_in.len() < nc {
            self.closure_in.resize(nc, 0.0);
            self.closure_out.resize(nc, 0.0);
        }
    }
}

struct Shared<'a> {
    closure_in: &'a mut Vec<f64>,
    closure_out: &'a mut Vec<f64>,
    apply: &'a mut ApplyScratch,
    kron: &'a mut Vec<f64>,
}

/// `y = A_{j,p_k} x` on interior vectors.
fn apply_level(lvl: &PLevel, cells: &[usize], x: &[f64], y: &mut [f64], sh: &mut Shared) {
    lvl.layout.scatter_interior(x, sh.closure_in);
    apply_on_patch(&lvl.op, cells, &lvl.layout, sh.closure_in, sh.closure_out, sh.apply);
    lvl.layout.gather_interior(sh.closure_out, y);
}

/// `out = P_k v`.
fn precondition(lvl: &PLevel, scale: &[f64], v: &[f64], out: &mut [f64], kron: &mut Vec<f64>) {
    match &lvl.fast_diag {
        Some(fd) => {
            fd.solve_into(v, out, kron);
            for (o, s) in out.iter_mut().zip(scale) {
                *o *= s;
            }
        }
        None => {
            for ((o, s), x) in out.iter_mut().zip(scale).zip(v) {
                *o = s * x;
            }
        }
    }
}

/// One Richardson step `d += omega P (r - A d)` on level `k`; `zero` marks `d = 0`.
fn smooth_level(setup: &PSetup, patch: &PatchSolver, k: usize, buf: &mut LevelBuf, zero: bool, sh: &mut Shared) {
    let lvl = &setup.levels[k];
    if zero {
        buf.res.copy_from_slice(&buf.r);
    } else {
        apply_level(lvl, &patch.cells, &buf.d, &mut buf.res, sh);
        for (res, r) in buf.res.iter_mut().zip(&buf.r) {
            *res = r - *res;
        }
    }
    precondition(lvl, &patch.scale[k], &buf.res, &mut buf.tmp, sh.kron);
    let w = patch.omega[k];
    if zero {
        for (d, t) in buf.d.iter_mut().zip(&buf.tmp) {
            *d = w * t;
        }
    } else {
        for (d, t) in buf.d.iter_mut().zip(&buf.tmp) {
            *d += w * t;
        }
    }
}

fn coarse_apply(patch: &PatchSolver, r: &[f64], d: &mut [f64]) {
    match &patch.coarse {
        CoarseSolver::Scalar(inv) => d[0] = inv * r[0],
        CoarseSolver::Dense(inv) => {
            let n = inv.nrows();
            for i in 0..n {
                d[i] = (0..n).map(|j| inv[(i, j)] * r[j]).sum();
            }
        }
    }
}

fn cycle(setup: &PSetup, patch: &PatchSolver, bufs: &mut [LevelBuf], zero: bool, sh: &mut Shared) {
    let k = bufs.len() - 1;
    let (lower, top) = bufs.split_at_mut(k);
    let buf = &mut top[0];
    if k == 0 {
        // exact coarse solve: the initial guess is irrelevant
        coarse_apply(patch, &buf.r, &mut buf.d);
        return;
    }
    smooth_level(setup, patch, k, buf, zero, sh);
    apply_level(&setup.levels[k], &patch.cells, &buf.d, &mut buf.res, sh);
    for (res, r) in buf.res.iter_mut().zip(&buf.r) {
        *res = r - *res;
    }
    let tr = &setup.transfers[k - 1];
    tr.restrict_into(&buf.res, &mut lower[k - 1].r, sh.kron);
    cycle(setup, patch, lower, true, sh);
    tr.prolongate_into(&lower[k - 1].d, &mut buf.tmp, sh.kron);
    for (d, t) in buf.d.iter_mut().zip(&buf.tmp) {
        *d += t;
    }
    smooth_level(setup, patch, k, buf, false, sh);
}

fn run_cycles(setup: &PSetup, patch: &PatchSolver, r: &[f64], d: &mut [f64], n_cycles: usize, init: Option<&[f64]>, ws: &mut PmgWorkspace) {
    ws.ensure(setup);
    let PmgWorkspace { bufs, closure_in, closure_out, apply, kron } = ws;
    let mut sh = Shared { closure_in, closure_out, apply, kron };
    let top = bufs.len() - 1;
    bufs[top].r.copy_from_slice(r);
    let mut zero = true;
    if let Some(x) = init {
        bufs[top].d.copy_from_slice(x);
        zero = false;
    }
    for _ in 0..n_cycles {
        cycle(setup, patch, bufs, zero, &mut sh);
        zero = false;
    }
    d.copy_from_slice(&bufs[top].d);
}

/// One V-cycle at the top degree starting from `d` (`None` = zero guess).
pub fn v_cycle(setup: &PSetup, patch: &PatchSolver, d: Option<&[f64]>, r: &[f64], ws: &mut PmgWorkspace) -> Result<Vec<f64>> {
    let n = setup.n_interior();
    if r.len() != n {
        return Err(Error::ShapeMismatch { expected: n, found: r.len() });
    }
    if let Some(x) = d {
        if x.len() != n {
            return Err(Error::ShapeMismatch { expected: n, found: x.len() });
        }
    }
    let mut out = vec![0.0; n];
    run_cycles(setup, patch, r, &mut out, 1, d, ws);
    Ok(out)
}

/// `N_MG` stationary V-cycles from a zero guess; a fixed linear map `r -> d`.
pub fn local_solve_into(setup: &PSetup, patch: &PatchSolver, r: &[f64], n_mg: usize, d: &mut [f64], ws: &mut PmgWorkspace) {
    run_cycles(setup, patch, r, d, n_mg.max(1), None, ws);
}

pub fn local_solve(setup: &PSetup, patch: &PatchSolver, r: &[f64], n_mg: usize, ws: &mut PmgWorkspace) -> Result<Vec<f64>> {
    if n_mg == 0 {
        return Err(Error::InvalidInput("N_MG must be at least 1".into()));
    }
    let n = setup.n_interior();
    if r.len() != n {
        return Err(Error::ShapeMismatch { expected: n, found: r.len() });
    }
    let mut d = vec![0.0; n];
    local_solve_into(setup, patch, r, n_mg, &mut d, ws);
    Ok(d)
}

/// `y = A_{j,p} x` at the top degree on interior vectors.
pub fn apply_top(setup: &PSetup, patch: &PatchSolver, x: &[f64], y: &mut [f64], ws: &mut PmgWorkspace) {
    ws.ensure(setup);
    let PmgWorkspace { closure_in, closure_out, apply, kron, .. } = ws;
    let mut sh = Shared { closure_in, closure_out, apply, kron };
    apply_level(setup.levels.last().unwrap(), &patch.cells, x, y, &mut sh);
}

/// One smoothing step at level `k` on explicit vectors (for validation).
pub fn smooth(setup: &PSetup, patch: &PatchSolver, k: usize, d: &mut [f64], r: &[f64], ws: &mut PmgWorkspace) {
    ws.ensure(setup);
    let PmgWorkspace { bufs, closure_in, closure_out, apply, kron } = ws;
    let mut sh = Shared { closure_in, closure_out, apply, kron };
    let buf = &mut bufs[k];
    buf.d.copy_from_slice(d);
    buf.r.copy_from_slice(r);
    smooth_level(setup, patch, k, buf, false, &mut sh);
    d.copy_from_slice(&buf.d);
}
