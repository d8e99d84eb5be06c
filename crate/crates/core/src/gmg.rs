//! Geometric multigrid V-cycle preconditioner with patch smoothing on every
//! level and a GMRES coarse solve, plus the outer GMRES driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dofs::DofMap;
use crate::error::{Error, Result};
use crate::krylov::{gmres, SolveReport};
use crate::mesh::MeshHierarchy;
use crate::operator::{ApplyScratch, LevelOperator};
use crate::smoother::{PatchSmoother, SmootherConfig, SweepWorkspace};
use crate::transfer::HTransfer;

#[derive(Debug, Clone)]
pub struct GmgLevel {
    pub op: LevelOperator,
    pub smoother: PatchSmoother,
}

#[derive(Debug, Clone)]
pub struct GmgContext {
    pub levels: Vec<GmgLevel>,
    /// `transfers[l - 1]` connects level `l - 1` to level `l`.
    pub transfers: Vec<HTransfer>,
    pub coarse_tol: f64,
    pub coarse_max_iter: usize,
}

/// Per-level work vectors for the V-cycle.
#[derive(Debug, Clone)]
pub struct GmgWorkspace {
    u: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    sweep: Vec<SweepWorkspace>,
    apply: ApplyScratch,
    /// GMRES iterations of the most recent coarse solve.
    pub last_coarse_iterations: usize,
}

impl GmgContext {
    /// Unit-coefficient hierarchy of degree `p` on every level.
    pub fn new(h: &MeshHierarchy, p: usize, config: SmootherConfig) -> Result<Self> {
        let mut levels = Vec::with_capacity(h.n_levels());
        for level in &h.levels {
            let op = LevelOperator::laplace(level, p)?;
            let smoother = PatchSmoother::new(level, &op, config)?;
            levels.push(GmgLevel { op, smoother });
        }
        let transfers = (1..h.n_levels())
            .map(|l| HTransfer::new(h, l, &levels[l - 1].op.dofs, &levels[l].op.dofs))
            .collect::<Result<Vec<_>>>()?;
        Ok(GmgContext { levels, transfers, coarse_tol: 1e-8, coarse_max_iter: 200 })
    }

    pub fn finest(&self) -> &GmgLevel {
        self.levels.last().unwrap()
    }

    pub fn n_dofs(&self) -> usize {
        self.finest().op.n_dofs()
    }

    pub fn workspace(&self) -> GmgWorkspace {
        GmgWorkspace {
            u: self.levels.iter().map(|l| vec![0.0; l.op.n_dofs()]).collect(),
            r: self.levels.iter().map(|l| vec![0.0; l.op.n_dofs()]).collect(),
            b: self.levels.iter().map(|l| vec![0.0; l.op.n_dofs()]).collect(),
            sweep: self.levels.iter().map(|l| l.smoother.workspace()).collect(),
            apply: ApplyScratch::default(),
            last_coarse_iterations: 0,
        }
    }

    /// GMRES on the coarsest level preconditioned by one patch sweep.
    pub fn coarse_solve(&self, rhs: &[f64], ws: &mut GmgWorkspace) -> Result<Vec<f64>> {
        let lvl = &self.levels[0];
        let sw = &mut ws.sweep[0];
        let apply = &mut ws.apply;
        let (x, rep) = gmres(
            |x: &[f64], y: &mut [f64]| lvl.op.vmult(x, y, apply),
            |x: &[f64], y: &mut [f64]| {
                y.fill(0.0);
                lvl.smoother.sweep(&lvl.op, y, x, sw);
            },
            rhs,
            self.coarse_tol,
            self.coarse_max_iter,
        )?;
        ws.last_coarse_iterations = rep.iterations;
        if !rep.converged {
            return Err(Error::CoarseNotConverged { iterations: rep.iterations, residual: rep.final_residual() });
        }
        Ok(x)
    }

    /// V-cycle on level `l` from a zero guess for right-hand side `ws.b[l]`,
    /// leaving the result in `ws.u[l]`.
    fn cycle(&self, l: usize, ws: &mut GmgWorkspace) -> Result<()> {
        if l == 0 {
            let b = std::mem::take(&mut ws.b[0]);
            let x = self.coarse_solve(&b, ws);
            ws.b[0] = b;
            ws.u[0] = x?;
            return Ok(());
        }
        let lvl = &self.levels[l];
        ws.u[l].fill(0.0);
        lvl.smoother.sweep(&lvl.op, &mut ws.u[l], &ws.b[l], &mut ws.sweep[l]);
        lvl.op.vmult(&ws.u[l], &mut ws.r[l], &mut ws.apply);
        for (r, b) in ws.r[l].iter_mut().zip(&ws.b[l]) {
            *r = b - *r;
        }
        let coarse = &self.levels[l - 1].op.dofs;
        let t = &self.transfers[l - 1];
        t.restrict(coarse, &lvl.op.dofs, &ws.r[l], &mut ws.b[l - 1]);
        for (v, &m) in ws.b[l - 1].iter_mut().zip(&coarse.boundary_mask) {
            if m {
                *v = 0.0;
            }
        }
        self.cycle(l - 1, ws)?;
        t.prolongate(coarse, &lvl.op.dofs, &ws.u[l - 1], &mut ws.r[l]);
        for (u, e) in ws.u[l].iter_mut().zip(&ws.r[l]) {
            *u += e;
        }
        lvl.smoother.sweep(&lvl.op, &mut ws.u[l], &ws.b[l], &mut ws.sweep[l]);
        Ok(())
    }

    /// Approximate `A^{-1} rhs` on the finest level by one V-cycle.
    pub fn v_cycle(&self, rhs: &[f64], out: &mut [f64], ws: &mut GmgWorkspace) -> Result<()> {
        let top = self.levels.len() - 1;
        if rhs.len() != self.n_dofs() {
            return Err(Error::ShapeMismatch { expected: self.n_dofs(), found: rhs.len() });
        }
        ws.b[top].copy_from_slice(rhs);
        self.cycle(top, ws)?;
        out.copy_from_slice(&ws.u[top]);
        Ok(())
    }

    /// Outer GMRES preconditioned by one V-cycle.
    pub fn solve(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
        let fine = self.finest();
        let mut ws = self.workspace();
        let mut apply = ApplyScratch::default();
        let mut failure: Option<Error> = None;
        let (x, rep) = gmres(
            |x: &[f64], y: &mut [f64]| fine.op.vmult(x, y, &mut apply),
            |x: &[f64], y: &mut [f64]| {
                if failure.is_some() {
                    y.fill(0.0);
                } else if let Err(e) = self.v_cycle(x, y, &mut ws) {
                    failure = Some(e);
                    y.fill(0.0);
                }
            },
            b,
            rel_tol,
            max_iter,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok((x, rep)),
        }
    }
}

/// Uniform `[-1, 1]` entries on unconstrained DoFs, zero on constrained ones.
pub fn random_rhs(dofs: &DofMap, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dofs.boundary_mask.iter().map(|&m| if m { 0.0 } else { rng.random_range(-1.0..=1.0) }).collect()
}

/// Builds the context and solves with a seeded random right-hand side.
pub fn solve_global(h: &MeshHierarchy, p: usize, config: SmootherConfig, seed: u64, rel_tol: f64) -> Result<SolveReport> {
    let ctx = GmgContext::new(h, p, config)?;
    let b = random_rhs(&ctx.finest().op.dofs, seed);
    Ok(ctx.solve(&b, rel_tol, 200)?.1)
}
