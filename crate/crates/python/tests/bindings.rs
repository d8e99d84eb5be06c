use std::ffi::CString;

use pyo3::prelude::*;

use patchmg_py::patchmg_py;

fn run(code: &str) -> PyResult<()> {
    pyo3::append_to_inittab!(patchmg_py);
    Python::initialize();
    Python::attach(|py| {
        let code = CString::new(code).unwrap();
        py.run(&code, None, None)
    })
}

#[test]
fn module_round_trip() {
    run(r#"
import patchmg_py as pm
assert pm.degree_sequence(8) == [1, 3, 7, 8]
assert pm.dof_count(2, 3, 5) == 9409
h = pm.Hierarchy.cartesian(2, 3)
assert h.n_levels == 3 and h.n_cells(2) == 64
op = pm.LevelOperator(h, 0, 2)
u = [0.0 if m else 1.0 for m in op.boundary_mask]
au = op.apply(u)
assert len(au) == op.n_dofs
assert sum(a * b for a, b in zip(au, u)) > 0
mg = pm.Multigrid(h, 3, "cartesian", 1)
x, rep = mg.solve(mg.random_rhs(1))
assert rep.converged and rep.iterations <= 8
avg, its = pm.single_patch(2, 3, realizations=2)
assert len(its) == 2 and 5 <= avg <= 20
fine = h.distorted(0.3, 4)
assert fine.vertices(0) == h.distorted(0.3, 4).vertices(0)
assert fine.vertices(1)[6] == fine.vertices(2)[20] != h.vertices(1)[6]
nested = h.distorted(0.1, 4, mode="hierarchical")
assert nested.vertices(0) != h.vertices(0)
for bad in (lambda: h.distorted(0.1, 4, mode="other"), lambda: pm.Multigrid(h, 3, "nonsense")):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
"#)
    .unwrap();
}
