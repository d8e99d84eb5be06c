//! Experiment drivers behind the `patchmg-bench` CLI: single-patch CG studies
//! and global GMRES runs, emitting CSV rows.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dofs::structured_dof_count;
use crate::error::{Error, Result};
use crate::gmg::{random_rhs, GmgContext};
use crate::krylov::cg;
use crate::mesh::{
    build_cartesian_hierarchy, build_kershaw_hierarchy, build_standalone_patch, distort_finest, DistortionSpec,
    MeshHierarchy, PatchKind, KERSHAW_COARSE_CELLS,
};
use crate::pmg::{apply_top, local_solve_into, PSetup, PmgWorkspace, SmootherKind, DEFAULT_OMEGA};
use crate::smoother::SmootherConfig;

/// Iteration count recorded for a non-convergent local run.
pub const SENTINEL_ITERATIONS: usize = 1000;
/// Local CG iteration cap.
pub const LOCAL_MAX_ITER: usize = 100;
/// Outer GMRES iteration cap.
pub const GLOBAL_MAX_ITER: usize = 200;
/// Fresh geometries tried per realization before giving up on degenerate draws.
pub const DEGENERATE_RETRIES: u64 = 100;
/// Stride between retry seeds of consecutive realizations.
const RETRY_STRIDE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Cartesian,
    Kershaw,
    SimplexPatch,
}

impl std::str::FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(MeshKind::Cartesian),
            "kershaw" => Ok(MeshKind::Kershaw),
            "simplex-patch" | "simplex" => Ok(MeshKind::SimplexPatch),
            other => Err(Error::InvalidInput(format!("unknown mesh kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for MeshKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeshKind::Cartesian => "cartesian",
            MeshKind::Kershaw => "kershaw",
            MeshKind::SimplexPatch => "simplex-patch",
        })
    }
}

/// Finest-level DoF count `(cells * p + 1)^d` of a structured hierarchy.
pub fn dof_count(dim: usize, p: usize, levels: usize, mesh: MeshKind) -> Result<usize> {
    if levels == 0 {
        return Err(Error::InvalidInput("need at least one level".into()));
    }
    let coarse = match mesh {
        MeshKind::Cartesian => 2,
        MeshKind::Kershaw => KERSHAW_COARSE_CELLS,
        MeshKind::SimplexPatch => return Err(Error::InvalidInput("DoF tables cover structured meshes only".into())),
    };
    Ok(structured_dof_count(dim, coarse << (levels - 1), p))
}

/// Outcome of one single-patch configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SinglePatchRow {
    pub degree: usize,
    pub distortion: f64,
    pub mu: f64,
    pub avg: f64,
    /// Iterations per realization (sentinel for failures).
    pub iterations: Vec<usize>,
    /// Realizations with no valid geometry after all retries.
    pub rejected: usize,
}

/// One CG solve on a standalone patch preconditioned by one local V-cycle.
/// Returns `None` when the iteration cap was hit.
pub fn single_patch_iterations(
    kind: PatchKind,
    dim: usize,
    p: usize,
    delta: f64,
    mu: f64,
    smoother: SmootherKind,
    seed: u64,
    rel_tol: f64,
) -> Result<Option<usize>> {
    let mesh = build_standalone_patch(kind, dim, delta, seed)?;
    let mut coeff = vec![1.0; mesh.n_cells()];
    coeff[0] = mu;
    let setup = PSetup::standalone(&mesh, &coeff, p, smoother, DEFAULT_OMEGA)?;
    let cells: Vec<usize> = (0..mesh.n_cells()).collect();
    let patch = setup.patch(&cells)?;
    let n = setup.n_interior();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut ws_a = PmgWorkspace::new(&setup);
    let mut ws_p = PmgWorkspace::new(&setup);
    let result = cg(
        |x: &[f64], y: &mut [f64]| apply_top(&setup, &patch, x, y, &mut ws_a),
        |x: &[f64], y: &mut [f64]| local_solve_into(&setup, &patch, x, 1, y, &mut ws_p),
        &b,
        rel_tol,
        LOCAL_MAX_ITER,
    );
    match result {
        Ok((_, rep)) if rep.converged => Ok(Some(rep.iterations)),
        Ok(_) => Ok(None),
        // an indefinite preconditioned operator counts as non-convergence
        Err(Error::Breakdown { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Averages over `realizations` runs; realization `r` uses seed
/// `base_seed + r`, and a degenerate draw retries with
/// `base_seed + r + k * 2^32` for `k = 1, 2, ...`.
#[allow(clippy::too_many_arguments)]
pub fn run_single_patch_config(
    kind: PatchKind,
    dim: usize,
    p: usize,
    delta: f64,
    mu: f64,
    smoother: SmootherKind,
    realizations: usize,
    base_seed: u64,
    rel_tol: f64,
) -> Result<SinglePatchRow> {
    if realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    let mut iterations = Vec::with_capacity(realizations);
    let mut rejected = 0;
    for r in 0..realizations as u64 {
        let mut outcome = None;
        for k in 0..DEGENERATE_RETRIES {
            let seed = base_seed.wrapping_add(r).wrapping_add(k.wrapping_mul(RETRY_STRIDE));
            match single_patch_iterations(kind, dim, p, delta, mu, smoother, seed, rel_tol) {
                Err(Error::DegenerateMesh { .. }) => continue,
                Err(e) => return Err(e),
                Ok(it) => {
                    outcome = Some(it.unwrap_or(SENTINEL_ITERATIONS));
                    break;
                }
            }
        }
        match outcome {
            Some(it) => iterations.push(it),
            None => rejected += 1,
        }
    }
    if iterations.is_empty() {
        return Err(Error::DegenerateMesh { cell: 0, det: 0.0 });
    }
    let avg = iterations.iter().sum::<usize>() as f64 / iterations.len() as f64;
    Ok(SinglePatchRow { degree: p, distortion: delta, mu, avg, iterations, rejected })
}

/// Builds the structured hierarchy for a global run. Distortion moves the
/// finest-level vertices and coarse levels inherit them.
pub fn build_hierarchy(dim: usize, levels: usize, mesh: MeshKind, delta: f64, epsilon: f64, seed: u64) -> Result<MeshHierarchy> {
    let h = match mesh {
        MeshKind::Cartesian => build_cartesian_hierarchy(dim, levels, 2)?,
        MeshKind::Kershaw => build_kershaw_hierarchy(dim, levels, epsilon)?,
        MeshKind::SimplexPatch => {
            return Err(Error::InvalidInput("global runs need a structured mesh".into()));
        }
    };
    if delta > 0.0 {
        distort_finest(&h, DistortionSpec { delta, seed })
    } else {
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRow {
    pub dim: usize,
    pub degree: usize,
    pub levels: usize,
    pub distortion: f64,
    pub mesh: MeshKind,
    pub smoother: SmootherKind,
    pub n_mg: usize,
    pub iterations: usize,
    pub converged: bool,
    pub dofs: usize,
}

/// One global GMRES solve with a seeded random right-hand side; the same seed
/// drives the distortion.
#[allow(clippy::too_many_arguments)]
pub fn run_global_config(
    dim: usize,
    p: usize,
    levels: usize,
    mesh: MeshKind,
    delta: f64,
    epsilon: f64,
    smoother: SmootherKind,
    n_mg: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<GlobalRow> {
    let h = build_hierarchy(dim, levels, mesh, delta, epsilon, seed)?;
    let ctx = GmgContext::new(&h, p, SmootherConfig::new(smoother, n_mg))?;
    let b = random_rhs(&ctx.finest().op.dofs, seed);
    let (_, rep) = ctx.solve(&b, rel_tol, GLOBAL_MAX_ITER)?;
    Ok(GlobalRow {
        dim,
        degree: p,
        levels,
        distortion: delta,
        mesh,
        smoother,
        n_mg,
        iterations: rep.iterations,
        converged: rep.converged,
        dofs: ctx.n_dofs(),
    })
}

pub const SINGLE_PATCH_HEADER: &str = "degree,distortion,mu,avg";
pub const GLOBAL_HEADER: &str = "dim,degree,L,distortion,mesh,smoother,n_mg,iterations,converged,dofs";

pub fn write_single_patch_row<W: Write>(out: &mut W, row: &SinglePatchRow) -> std::io::Result<()> {
    writeln!(out, "{},{},{},{}", row.degree, row.distortion, row.mu, row.avg)
}

pub fn write_global_row<W: Write>(out: &mut W, row: &GlobalRow) -> std::io::Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        row.dim,
        row.degree,
        row.levels,
        row.distortion,
        row.mesh,
        row.smoother,
        row.n_mg,
        row.iterations,
        row.converged,
        row.dofs
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_counts() {
        assert_eq!(dof_count(2, 3, 5, MeshKind::Cartesian).unwrap(), 9409);
        assert_eq!(dof_count(3, 7, 3, MeshKind::Cartesian).unwrap(), 185_193);
        assert_eq!(dof_count(2, 15, 4, MeshKind::Kershaw).unwrap(), 519_841);
        assert!(dof_count(2, 3, 1, MeshKind::SimplexPatch).is_err());
    }

    #[test]
    fn undistorted_realizations_agree_up_to_rhs() {
        let row = run_single_patch_config(PatchKind::Cartesian, 2, 3, 0.0, 1.0, SmootherKind::Jacobi, 4, 7, 1e-8).unwrap();
        let (lo, hi) = (row.iterations.iter().min().unwrap(), row.iterations.iter().max().unwrap());
        assert!(hi - lo <= 1);
        assert_eq!(row.rejected, 0);
    }

    #[test]
    fn csv_rows() {
        let row = SinglePatchRow { degree: 3, distortion: 0.1, mu: 1.0, avg: 10.5, iterations: vec![], rejected: 0 };
        let mut buf = Vec::new();
        write_single_patch_row(&mut buf, &row).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3,0.1,1,10.5\n");
    }

    #[test]
    fn small_global_row() {
        let row = run_global_config(2, 2, 2, MeshKind::Cartesian, 0.1, 0.3, SmootherKind::Jacobi, 1, 3, 1e-8).unwrap();
        assert!(row.converged);
        assert_eq!(row.dofs, 81);
    }
}
