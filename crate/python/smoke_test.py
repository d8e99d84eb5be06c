"""Smoke test for the patchmg Python bindings.

Build the extension first, e.g.

    cargo build --release -p patchmg-py --features extension-module

The script imports an installed ``patchmg_py`` if present and otherwise loads
the freshly built shared library from ``target/``.
"""

import importlib.util
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import patchmg_py

        return patchmg_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libpatchmg_py.so", "libpatchmg_py.dylib", "patchmg_py.dll"):
            lib = ROOT / "target" / profile / name
            if lib.exists():
                suffix = ".pyd" if name.endswith(".dll") else ".so"
                dest = pathlib.Path(tempfile.mkdtemp()) / f"patchmg_py{suffix}"
                shutil.copy(lib, dest)
                spec = importlib.util.spec_from_file_location("patchmg_py", dest)
                module = importlib.util.module_from_spec(spec)
                spec.loader.exec_module(module)
                return module
    sys.exit("patchmg_py not found; build it with cargo first")


def main():
    pm = load()
    assert pm.degree_sequence(15) == [1, 3, 7, 15]
    assert pm.dof_count(3, 15, 3) == 1771561

    h = pm.Hierarchy.cartesian(2, 4)
    print(h)
    op = pm.LevelOperator(h, 1, 3)
    u = [0.0 if m else 1.0 for m in op.boundary_mask]
    energy = sum(a * b for a, b in zip(op.apply(u), u))
    assert energy > 0.0
    print(f"operator: {op.n_dofs} DoFs, energy of the interior indicator {energy:.4f}")

    for smoother in ("jacobi", "cartesian"):
        mg = pm.Multigrid(h.distorted(0.1, 7), 3, smoother)
        x, rep = mg.solve(mg.random_rhs(7))
        assert rep.converged, rep
        print(f"{smoother:9s}: {rep.iterations} GMRES iterations, final residual {rep.residual_history[-1]:.2e}")

    avg, its = pm.single_patch(2, 7, realizations=3)
    print(f"single patch p=7: average {avg} CG iterations {its}")
    its, converged, dofs = pm.global_iterations(2, 3, 3, mesh="kershaw")
    assert converged
    print(f"Kershaw 2D p=3 L=3: {its} iterations on {dofs} DoFs")
    print("smoke test passed")


if __name__ == "__main__":
    main()
