//! Multiplicative vertex-patch smoother: for every patch in a fixed
//! lexicographic order, gather the closure values, form the local residual,
//! solve approximately and add the correction to the patch interior.

use crate::error::{Error, Result};
use crate::mesh::{collect_vertex_patches, MeshLevel, VertexPatch};
use crate::operator::{apply_on_patch, ApplyScratch, LevelOperator};
use crate::pmg::{local_solve_into, PSetup, PatchSolver, PmgWorkspace, SmootherKind, DEFAULT_OMEGA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    /// Local V-cycles per patch solve.
    pub n_mg: usize,
    /// Richardson damping of the local smoother.
    pub omega: f64,
}

impl SmootherConfig {
    pub fn new(kind: SmootherKind, n_mg: usize) -> Self {
        SmootherConfig { kind, n_mg, omega: DEFAULT_OMEGA }
    }
}

/// Patch smoother of one structured mesh level.
#[derive(Debug, Clone)]
pub struct PatchSmoother {
    pub config: SmootherConfig,
    pub setup: PSetup,
    pub patches: Vec<VertexPatch>,
    pub solvers: Vec<PatchSolver>,
}

/// Work vectors for [`PatchSmoother::sweep`].
#[derive(Debug, Clone, Default)]
pub struct SweepWorkspace {
    closure: Vec<f64>,
    out: Vec<f64>,
    r: Vec<f64>,
    d: Vec<f64>,
    apply: ApplyScratch,
    pmg: PmgWorkspace,
}

impl PatchSmoother {
    pub fn new(level: &MeshLevel, op: &LevelOperator, config: SmootherConfig) -> Result<Self> {
        if config.n_mg == 0 {
            return Err(Error::InvalidInput("N_MG must be at least 1".into()));
        }
        let setup = PSetup::structured(
            level,
            &op.coefficients,
            op.degree(),
            config.kind,
            config.omega,
            Some(op.cells.clone()),
        )?;
        let patches = collect_vertex_patches(level, &op.dofs)?;
        let solvers = patches.iter().map(|p| setup.patch(&p.cells)).collect::<Result<Vec<_>>>()?;
        Ok(PatchSmoother { config, setup, patches, solvers })
    }

    pub fn workspace(&self) -> SweepWorkspace {
        let top = self.setup.levels.last().unwrap();
        let n = top.layout.n_interior();
        SweepWorkspace {
            closure: vec![0.0; top.layout.n_closure],
            out: vec![0.0; top.layout.n_closure],
            r: vec![0.0; n],
            d: vec![0.0; n],
            apply: ApplyScratch::default(),
            pmg: PmgWorkspace::new(&self.setup),
        }
    }

    /// `r_j = Pi_j b - Pi_j A_bar_j u_bar_j`, written to `ws.r`.
    fn local_residual(&self, j: usize, op: &LevelOperator, u: &[f64], b: &[f64], ws: &mut SweepWorkspace) {
        let patch = &self.patches[j];
        let top = self.setup.levels.last().unwrap();
        let mask = &op.dofs.boundary_mask;
        for (slot, &g) in ws.closure.iter_mut().zip(&patch.closure_dofs) {
            *slot = if mask[g] { 0.0 } else { u[g] };
        }
        apply_on_patch(&top.op, &patch.cells, &top.layout, &ws.closure, &mut ws.out, &mut ws.apply);
        for ((r, &l), &g) in ws.r.iter_mut().zip(&top.layout.interior).zip(&patch.interior_dofs) {
            *r = b[g] - ws.out[l];
        }
    }

    /// Interior correction `d_j` of patch `j` for the current `u`.
    pub fn local_update(&self, j: usize, op: &LevelOperator, u: &[f64], b: &[f64], ws: &mut SweepWorkspace) -> Vec<f64> {
        self.local_residual(j, op, u, b, ws);
        local_solve_into(&self.setup, &self.solvers[j], &ws.r, self.config.n_mg, &mut ws.d, &mut ws.pmg);
        ws.d.clone()
    }

    /// One forward multiplicative sweep with the p-multigrid local solver.
    pub fn sweep(&self, op: &LevelOperator, u: &mut [f64], b: &[f64], ws: &mut SweepWorkspace) {
        let n_mg = self.config.n_mg;
        for j in 0..self.patches.len() {
            self.local_residual(j, op, u, b, ws);
            local_solve_into(&self.setup, &self.solvers[j], &ws.r, n_mg, &mut ws.d, &mut ws.pmg);
            for (&g, &d) in self.patches[j].interior_dofs.iter().zip(&ws.d) {
                u[g] += d;
            }
        }
    }

    /// Sweep with a caller-supplied local solver `solve(j, r_j, d_j)`.
    pub fn sweep_with<F>(&self, op: &LevelOperator, u: &mut [f64], b: &[f64], ws: &mut SweepWorkspace, mut solve: F)
    where
        F: FnMut(usize, &[f64], &mut [f64]),
    {
        for j in 0..self.patches.len() {
            self.local_residual(j, op, u, b, ws);
            solve(j, &ws.r, &mut ws.d);
            for (&g, &d) in self.patches[j].interior_dofs.iter().zip(&ws.d) {
                u[g] += d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cartesian_hierarchy;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(cells: usize, p: usize) -> (MeshLevel, LevelOperator, PatchSmoother) {
        let h = build_cartesian_hierarchy(2, 1, cells).unwrap();
        let level = h.finest().clone();
        let op = LevelOperator::laplace(&level, p).unwrap();
        let sm = PatchSmoother::new(&level, &op, SmootherConfig::new(SmootherKind::Jacobi, 1)).unwrap();
        (level, op, sm)
    }

    fn exact_inverses(op: &LevelOperator, sm: &PatchSmoother) -> Vec<DMatrix<f64>> {
        sm.patches.iter().map(|p| op.assemble_dense(Some(p)).unwrap().try_inverse().unwrap()).collect()
    }

    #[test]
    fn local_residual_matches_global() {
        let (_, op, sm) = setup(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = op.n_dofs();
        let u: Vec<f64> = (0..n).map(|i| if op.dofs.boundary_mask[i] { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let b: Vec<f64> = (0..n).map(|i| if op.dofs.boundary_mask[i] { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let au = op.apply_global(&u).unwrap();
        let mut ws = sm.workspace();
        for j in 0..sm.patches.len() {
            sm.local_residual(j, &op, &u, &b, &mut ws);
            for (k, &g) in sm.patches[j].interior_dofs.iter().enumerate() {
                let expect = b[g] - au[g];
                assert!((ws.r[k] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn exact_local_solve_zeroes_local_residual() {
        let (_, op, sm) = setup(4, 3);
        let inv = exact_inverses(&op, &sm);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = op.n_dofs();
        let mut u: Vec<f64> = (0..n).map(|i| if op.dofs.boundary_mask[i] { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let b = vec![0.0; n];
        let mut ws = sm.workspace();
        let d = {
            sm.local_residual(0, &op, &u, &b, &mut ws);
            let x = &inv[0] * DVector::from_column_slice(&ws.r);
            x.as_slice().to_vec()
        };
        for (&g, dv) in sm.patches[0].interior_dofs.iter().zip(&d) {
            u[g] += dv;
        }
        sm.local_residual(0, &op, &u, &b, &mut ws);
        assert!(ws.r.iter().all(|r| r.abs() < 1e-10));
        // a solved patch produces no correction
        let again = sm.local_update(0, &op, &u, &b, &mut ws);
        assert!(again.iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn exact_sweep_is_an_energy_contraction() {
        for p in [2, 3] {
            let (_, op, sm) = setup(4, p);
            let inv = exact_inverses(&op, &sm);
            let a = op.assemble_dense(None).unwrap();
            let n = op.n_dofs();
            let free: Vec<usize> = (0..n).filter(|&i| !op.dofs.boundary_mask[i]).collect();
            let mut ws = sm.workspace();
            let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
            for _ in 0..20 {
                // error propagation with b = 0: the new iterate is the new error
                let mut e = vec![0.0; n];
                for &i in &free {
                    e[i] = rng.random_range(-1.0..1.0);
                }
                let energy = |v: &[f64]| {
                    let x = DVector::from_column_slice(v);
                    x.dot(&(&a * &x))
                };
                let before = energy(&e);
                let mut u = e.clone();
                sm.sweep_with(&op, &mut u, &vec![0.0; n], &mut ws, |j, r, d| {
                    d.copy_from_slice((&inv[j] * DVector::from_column_slice(r)).as_slice());
                });
                assert!(energy(&u) < before);
            }
        }
    }

    #[test]
    fn sweep_is_deterministic_and_linear() {
        let (_, op, sm) = setup(4, 3);
        let n = op.n_dofs();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let e: Vec<f64> = (0..n).map(|i| if op.dofs.boundary_mask[i] { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let zero = vec![0.0; n];
        let mut ws = sm.workspace();
        let (mut u1, mut u2) = (e.clone(), e.clone());
        sm.sweep(&op, &mut u1, &zero, &mut ws);
        sm.sweep(&op, &mut u2, &zero, &mut ws);
        assert_eq!(u1, u2);
        let mut u3: Vec<f64> = e.iter().map(|x| 3.0 * x).collect();
        sm.sweep(&op, &mut u3, &zero, &mut ws);
        for (a, b) in u1.iter().zip(&u3) {
            assert!((3.0 * a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn sweep_only_touches_patch_interiors() {
        let (_, op, sm) = setup(4, 2);
        let n = op.n_dofs();
        let b = vec![1.0; n];
        let mut u = vec![0.0; n];
        let mut ws = sm.workspace();
        sm.sweep(&op, &mut u, &b, &mut ws);
        let mut touched = vec![false; n];
        for p in &sm.patches {
            for &g in &p.interior_dofs {
                touched[g] = true;
            }
        }
        for i in 0..n {
            if !touched[i] {
                assert_eq!(u[i], 0.0);
            }
        }
    }
}
