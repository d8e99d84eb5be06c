//! Randomized invariants of the mesh, kernel, operator, transfer, local and
//! global solver layers.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use patchmg::basis::make_basis;
use patchmg::bench::{run_single_patch_config, write_single_patch_row};
use patchmg::dofs::DofMap;
use patchmg::gmg::{random_rhs, GmgContext};
use patchmg::krylov::gmres;
use patchmg::mesh::{
    build_cartesian_hierarchy, build_standalone_patch, collect_vertex_patches, distort_finest, distort_hierarchy, min_incident_edge,
    DistortionSpec, MeshLevel, PatchKind,
};
use patchmg::operator::{dense_patch_matrix, LevelOperator, PatchLayout};
use patchmg::pmg::{apply_top, degree_sequence, local_solve, PSetup, PmgWorkspace, SmootherKind};
use patchmg::smoother::{PatchSmoother, SmootherConfig};
use patchmg::tensor::{apply_1d_contraction, cell_gradients, cell_integrate_gradients, TensorField};
use patchmg::transfer::PTransfer;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn masked_random(rng: &mut ChaCha8Rng, dofs: &DofMap) -> Vec<f64> {
    dofs.boundary_mask.iter().map(|&m| if m { 0.0 } else { rng.random_range(-1.0..1.0) }).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Reference coordinates of `x` in the bilinear/trilinear cell `c` by Newton.
fn reference_coords(level: &MeshLevel, c: usize, x: &[f64; 3]) -> [f64; 3] {
    let dim = level.dim;
    let mut xi = [0.5; 3];
    for _ in 0..50 {
        let f = level.map_point(c, &xi[..dim]);
        let mut jac = DMatrix::zeros(dim, dim);
        for b in 0..dim {
            let mut e = xi;
            e[b] += 1e-7;
            let fe = level.map_point(c, &e[..dim]);
            for a in 0..dim {
                jac[(a, b)] = (fe[a] - f[a]) / 1e-7;
            }
        }
        let rhs = DVector::from_iterator(dim, (0..dim).map(|a| x[a] - f[a]));
        let step = jac.lu().solve(&rhs).unwrap();
        for a in 0..dim {
            xi[a] += step[a];
        }
        if step.norm() < 1e-15 {
            break;
        }
    }
    xi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fine_vertices_lie_in_parent_cells(dim in 2usize..=3, coarse in 1usize..=3) {
        // only the undistorted hierarchy is nested: displaced fine vertices may leave the parent
        let levels = if dim == 2 { 3 } else { 2 };
        let h = build_cartesian_hierarchy(dim, levels, coarse).unwrap();
        for l in 1..h.n_levels() {
            let (fine, coarse) = (&h.levels[l], &h.levels[l - 1]);
            for c in 0..fine.n_cells() {
                let parent = h.parent_map[l][c];
                for &v in fine.cell(c) {
                    let xi = reference_coords(coarse, parent, &fine.vertices[v]);
                    for a in 0..dim {
                        prop_assert!(xi[a] > -1e-12 && xi[a] < 1.0 + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn coarsest_displacement_has_prescribed_length(dim in 2usize..=3, seed in any::<u64>(), delta in 0.01f64..0.3) {
        let base = build_cartesian_hierarchy(dim, 1, 4).unwrap();
        let h = distort_hierarchy(&base, DistortionSpec { delta, seed });
        prop_assume!(h.is_ok());
        let h = h.unwrap();
        let before = &base.levels[0];
        let hv = min_incident_edge(before);
        let boundary = before.boundary_vertex_mask();
        for v in 0..before.vertices.len() {
            let moved: f64 = (0..dim).map(|a| (h.levels[0].vertices[v][a] - before.vertices[v][a]).powi(2)).sum::<f64>().sqrt();
            let expect = if boundary[v] { 0.0 } else { delta * hv[v] };
            prop_assert!((moved - expect).abs() < 1e-12);
        }
        let again = distort_hierarchy(&base, DistortionSpec { delta, seed }).unwrap();
        prop_assert_eq!(h, again);
    }

    #[test]
    fn finest_distortion_is_exact_and_inherited(seed in any::<u64>(), delta in 0.01f64..0.35, levels in 2usize..=4) {
        let base = build_cartesian_hierarchy(2, levels, 2).unwrap();
        // every vertex of a uniform grid moves by less than the 2D degeneracy threshold
        let h = distort_finest(&base, DistortionSpec { delta, seed }).unwrap();
        let (before, after) = (base.finest(), h.finest());
        let hv = min_incident_edge(before);
        let boundary = before.boundary_vertex_mask();
        for v in 0..before.vertices.len() {
            let moved: f64 = (0..2).map(|a| (after.vertices[v][a] - before.vertices[v][a]).powi(2)).sum::<f64>().sqrt();
            let expect = if boundary[v] { 0.0 } else { delta * hv[v] };
            prop_assert!((moved - expect).abs() < 1e-12);
        }
        for l in 0..levels - 1 {
            let (coarse, fine) = (&h.levels[l], &h.levels[l + 1]);
            let n = coarse.cells_per_dir.unwrap();
            for v in 0..coarse.vertices.len() {
                let (i, j) = (v % (n + 1), v / (n + 1));
                prop_assert_eq!(coarse.vertices[v], fine.vertices[2 * i + 2 * j * (2 * n + 1)]);
            }
        }
    }

    #[test]
    fn contraction_matches_kronecker(dim in 2usize..=3, n in 2usize..=5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = n + 1;
        let mats: Vec<Vec<f64>> = (0..dim).map(|_| random_vec(&mut rng, m * n)).collect();
        let data = random_vec(&mut rng, n.pow(dim as u32));
        let mut field = TensorField::new(vec![n; dim], data.clone()).unwrap();
        for (axis, mat) in mats.iter().enumerate() {
            field = apply_1d_contraction(axis, mat, m, n, &field).unwrap();
        }
        // Kronecker product with axis 0 fastest: kron(A_{d-1}, ..., A_0)
        let to_mat = |v: &Vec<f64>| DMatrix::from_row_slice(m, n, v);
        let mut k = to_mat(&mats[0]);
        for mat in &mats[1..] {
            k = to_mat(mat).kronecker(&k);
        }
        let expect = k * DVector::from_column_slice(&data);
        let err = (DVector::from_column_slice(&field.data) - &expect).norm();
        prop_assert!(err <= 1e-12 * expect.norm().max(1.0));
    }

    #[test]
    fn gradient_integration_is_adjoint(dim in 2usize..=3, p in 1usize..=4, seed in any::<u64>()) {
        let basis = make_basis(p, p + 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vec(&mut rng, (p + 1).pow(dim as u32));
        let g = random_vec(&mut rng, dim * (p + 1).pow(dim as u32));
        let lhs = dot(&cell_integrate_gradients(&basis, dim, &g).unwrap(), &u);
        let gu = cell_gradients(&basis, dim, &u).unwrap();
        let nq = (p + 1).pow(dim as u32);
        let weight = |mut x: usize| {
            let mut w = 1.0;
            for _ in 0..dim {
                w *= basis.quad_weights[x % (p + 1)];
                x /= p + 1;
            }
            w
        };
        let rhs: f64 = (0..dim * nq).map(|i| weight(i % nq) * g[i] * gu[i]).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn operator_is_symmetric_positive(dim in 2usize..=3, p in 1usize..=3, delta in 0.0f64..0.15, seed in any::<u64>()) {
        let h = distort_hierarchy(&build_cartesian_hierarchy(dim, 1, 2).unwrap(), DistortionSpec { delta, seed });
        prop_assume!(h.is_ok());
        let level = h.unwrap().levels.remove(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu: Vec<f64> = (0..level.n_cells()).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let op = LevelOperator::new(&level, p, &mu).unwrap();
        for _ in 0..5 {
            let u = masked_random(&mut rng, &op.dofs);
            let w = masked_random(&mut rng, &op.dofs);
            let (au, aw) = (op.apply_global(&u).unwrap(), op.apply_global(&w).unwrap());
            let (a, b) = (dot(&au, &w), dot(&u, &aw));
            prop_assert!((a - b).abs() <= 1e-12 * (a.abs() + b.abs() + 1.0));
            prop_assert!(dot(&au, &u) > 0.0);
        }
    }

    #[test]
    fn patch_rows_vanish_outside_closure(p in 1usize..=3, delta in 0.0f64..0.15, seed in any::<u64>()) {
        let h = distort_hierarchy(&build_cartesian_hierarchy(2, 1, 3).unwrap(), DistortionSpec { delta, seed });
        prop_assume!(h.is_ok());
        let level = h.unwrap().levels.remove(0);
        let op = LevelOperator::laplace(&level, p).unwrap();
        let a = op.assemble_dense(None).unwrap();
        for patch in collect_vertex_patches(&level, &op.dofs).unwrap() {
            for &i in &patch.interior_dofs {
                for j in 0..op.n_dofs() {
                    if !patch.closure_dofs.contains(&j) {
                        prop_assert!(a[(i, j)].abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn galerkin_projection_on_affine_patches(dim in 2usize..=3, pf in 2usize..=4, mu in 0.1f64..10.0) {
        let m = build_standalone_patch(PatchKind::Cartesian, dim, 0.0, 0).unwrap();
        let coeff = vec![mu; m.n_cells()];
        let cells: Vec<usize> = (0..m.n_cells()).collect();
        for pc in 1..pf {
            let (lf, lc) = (PatchLayout::structured(dim, pf), PatchLayout::structured(dim, pc));
            let af = dense_patch_matrix(&patchmg::operator::CellOperator::new(&m, pf, &coeff).unwrap(), &cells, &lf).unwrap();
            let ac = dense_patch_matrix(&patchmg::operator::CellOperator::new(&m, pc, &coeff).unwrap(), &cells, &lc).unwrap();
            let t = PTransfer::tensor(dim, pc, pf).unwrap();
            let nc = t.n_coarse();
            let mut p = DMatrix::zeros(t.n_fine(), nc);
            for j in 0..nc {
                let mut e = vec![0.0; nc];
                e[j] = 1.0;
                p.set_column(j, &DVector::from_vec(t.prolongate(&e).unwrap()));
            }
            let galerkin = p.transpose() * af.clone() * &p;
            prop_assert!((galerkin - &ac).norm() <= 1e-11 * ac.norm());
        }
    }

    #[test]
    fn degree_sequence_law(p in 1usize..=64) {
        let s = degree_sequence(p);
        prop_assert_eq!(s[0], 1);
        prop_assert_eq!(*s.last().unwrap(), p);
        for w in s.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for w in s[..s.len() - 1].windows(2) {
            prop_assert_eq!(w[1], 2 * w[0] + 1);
        }
        if s.len() >= 2 {
            prop_assert!(p <= 2 * s[s.len() - 2] + 1);
        }
    }

    #[test]
    fn preconditioned_patch_operator_is_positive(
        kind in prop_oneof![Just(PatchKind::Cartesian), Just(PatchKind::Simplex)],
        dim in 2usize..=3,
        p in 2usize..=4,
        delta in 0.0f64..0.2,
        seed in any::<u64>(),
    ) {
        prop_assume!(!(kind == PatchKind::Simplex && dim == 3 && p > 3));
        let m = build_standalone_patch(kind, dim, delta, seed);
        prop_assume!(m.is_ok());
        let m = m.unwrap();
        let setup = PSetup::standalone(&m, &vec![1.0; m.n_cells()], p, SmootherKind::Jacobi, 0.5).unwrap();
        let cells: Vec<usize> = (0..m.n_cells()).collect();
        let patch = setup.patch(&cells).unwrap();
        let mut ws = PmgWorkspace::new(&setup);
        let n = setup.n_interior();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let x = random_vec(&mut rng, n);
            let mut ax = vec![0.0; n];
            apply_top(&setup, &patch, &x, &mut ax, &mut ws);
            let bax = local_solve(&setup, &patch, &ax, 1, &mut ws).unwrap();
            // A-inner product of x with B A x
            prop_assert!(dot(&ax, &bax) > 0.0);
        }
    }

    #[test]
    fn sweep_error_propagation_is_linear(p in 1usize..=3, alpha in -5.0f64..5.0, seed in any::<u64>()) {
        let level = build_cartesian_hierarchy(2, 1, 4).unwrap().levels.remove(0);
        let op = LevelOperator::laplace(&level, p).unwrap();
        let sm = PatchSmoother::new(&level, &op, SmootherConfig::new(SmootherKind::Jacobi, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = masked_random(&mut rng, &op.dofs);
        let zero = vec![0.0; e.len()];
        let mut ws = sm.workspace();
        let mut u1 = e.clone();
        sm.sweep(&op, &mut u1, &zero, &mut ws);
        let mut u2: Vec<f64> = e.iter().map(|x| alpha * x).collect();
        sm.sweep(&op, &mut u2, &zero, &mut ws);
        for (a, b) in u1.iter().zip(&u2) {
            prop_assert!((alpha * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn csv_rows_are_reproducible(seed in 0u64..1000, delta in 0.0f64..0.2) {
        let render = || {
            let row = run_single_patch_config(PatchKind::Cartesian, 2, 3, delta, 1.0, SmootherKind::Jacobi, 2, seed, 1e-8).unwrap();
            let mut buf = Vec::new();
            write_single_patch_row(&mut buf, &row).unwrap();
            buf
        };
        prop_assert_eq!(render(), render());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn gmres_history_is_monotone_and_true(seed in any::<u64>(), delta in 0.0f64..0.2) {
        let h = distort_hierarchy(&build_cartesian_hierarchy(2, 3, 2).unwrap(), DistortionSpec { delta, seed });
        prop_assume!(h.is_ok());
        let ctx = GmgContext::new(&h.unwrap(), 2, SmootherConfig::new(SmootherKind::Jacobi, 1)).unwrap();
        let b = random_rhs(&ctx.finest().op.dofs, seed);
        let (x, rep) = ctx.solve(&b, 1e-8, 100).unwrap();
        prop_assert!(rep.converged);
        for w in rep.residual_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let ax = ctx.finest().op.apply_global(&x).unwrap();
        let r: Vec<f64> = ax.iter().zip(&b).map(|(a, c)| c - a).collect();
        let true_rel = norm(&r) / norm(&b);
        prop_assert!((true_rel - rep.final_residual()).abs() <= 1e-10);
        prop_assert_eq!(ctx.solve(&b, 1e-8, 100).unwrap().1, rep);
    }

    #[test]
    fn gmres_with_identity_solves_spd_systems(n in 2usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(n, n) * n as f64;
        let b = random_vec(&mut rng, n);
        let (x, rep) = gmres(
            |x: &[f64], y: &mut [f64]| y.copy_from_slice((&a * DVector::from_column_slice(x)).as_slice()),
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            &b,
            1e-10,
            n + 5,
        )
        .unwrap();
        prop_assert!(rep.converged && rep.iterations <= n);
        let r = &a * DVector::from_vec(x) - DVector::from_column_slice(&b);
        prop_assert!(r.norm() <= 1e-9 * norm(&b));
    }
}
