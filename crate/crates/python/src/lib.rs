//! Python bindings: mesh hierarchies, the matrix-free operator, the
//! patch-smoothed multigrid solver and the benchmark drivers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use patchmg::bench::{self, MeshKind};
use patchmg::gmg::{random_rhs, GmgContext};
use patchmg::krylov;
use patchmg::mesh::{self, MeshHierarchy, PatchKind};
use patchmg::operator;
use patchmg::pmg::{self, SmootherKind};
use patchmg::smoother::SmootherConfig;
use patchmg::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::CoarseNotConverged { .. } | Error::Breakdown { .. } | Error::Stagnation { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn patch_kind(s: &str) -> PyResult<PatchKind> {
    match s {
        "cartesian" => Ok(PatchKind::Cartesian),
        "simplex" | "simplex-patch" => Ok(PatchKind::Simplex),
        other => Err(PyValueError::new_err(format!("unknown patch kind '{other}'"))),
    }
}

/// Sequence of uniformly refined mesh levels.
#[pyclass(name = "Hierarchy", frozen)]
struct PyHierarchy {
    inner: MeshHierarchy,
}

#[pymethods]
impl PyHierarchy {
    /// Unit square/cube with `coarse_cells` cells per direction on level 1.
    #[staticmethod]
    #[pyo3(signature = (dim, levels, coarse_cells = 2))]
    fn cartesian(dim: usize, levels: usize, coarse_cells: usize) -> PyResult<Self> {
        Ok(PyHierarchy { inner: mesh::build_cartesian_hierarchy(dim, levels, coarse_cells).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (dim, levels, epsilon = 0.3))]
    fn kershaw(dim: usize, levels: usize, epsilon: f64) -> PyResult<Self> {
        Ok(PyHierarchy { inner: mesh::build_kershaw_hierarchy(dim, levels, epsilon).map_err(to_py)? })
    }

    /// Randomly displaced copy; raises ValueError on a degenerate draw.
    /// `mode="finest"` moves the finest-level vertices and lets coarse levels
    /// inherit them; `mode="hierarchical"` displaces new vertices level by level.
    #[pyo3(signature = (delta, seed, mode = "finest"))]
    fn distorted(&self, delta: f64, seed: u64, mode: &str) -> PyResult<Self> {
        let spec = mesh::DistortionSpec { delta, seed };
        let inner = match mode {
            "finest" => mesh::distort_finest(&self.inner, spec),
            "hierarchical" => mesh::distort_hierarchy(&self.inner, spec),
            other => return Err(PyValueError::new_err(format!("unknown distortion mode '{other}'"))),
        };
        Ok(PyHierarchy { inner: inner.map_err(to_py)? })
    }

    #[getter]
    fn n_levels(&self) -> usize {
        self.inner.n_levels()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.finest().dim
    }

    fn n_cells(&self, level: usize) -> PyResult<usize> {
        Ok(self.level(level)?.n_cells())
    }

    /// Vertex coordinates of `level` as a list of `dim`-tuples.
    fn vertices(&self, level: usize) -> PyResult<Vec<Vec<f64>>> {
        let l = self.level(level)?;
        Ok(l.vertices.iter().map(|v| v[..l.dim].to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Hierarchy(dim={}, levels={})", self.dim(), self.n_levels())
    }
}

impl PyHierarchy {
    fn level(&self, level: usize) -> PyResult<&mesh::MeshLevel> {
        self.inner
            .levels
            .get(level)
            .ok_or_else(|| PyValueError::new_err(format!("level {level} out of range")))
    }
}

/// Matrix-free variable-coefficient Laplacian on one level.
#[pyclass(name = "LevelOperator", frozen)]
struct PyLevelOperator {
    inner: operator::LevelOperator,
}

#[pymethods]
impl PyLevelOperator {
    /// Operator of degree `p` on `level`; `mu` holds one coefficient per cell
    /// (defaults to 1).
    #[new]
    #[pyo3(signature = (hierarchy, level, p, mu = None))]
    fn new(hierarchy: &PyHierarchy, level: usize, p: usize, mu: Option<Vec<f64>>) -> PyResult<Self> {
        let l = hierarchy.level(level)?;
        let mu = mu.unwrap_or_else(|| vec![1.0; l.n_cells()]);
        Ok(PyLevelOperator { inner: operator::LevelOperator::new(l, p, &mu).map_err(to_py)? })
    }

    #[getter]
    fn n_dofs(&self) -> usize {
        self.inner.n_dofs()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn boundary_mask(&self) -> Vec<bool> {
        self.inner.dofs.boundary_mask.clone()
    }

    /// `A u` with identity rows on boundary DoFs.
    fn apply(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply_global(&u).map_err(to_py)
    }

    /// Dense matrix as a list of rows (small problems only).
    fn dense(&self) -> PyResult<Vec<Vec<f64>>> {
        let a = self.inner.assemble_dense(None).map_err(to_py)?;
        Ok(a.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

/// Outcome of a Krylov solve.
#[pyclass(name = "SolveReport", frozen, get_all)]
struct PySolveReport {
    iterations: usize,
    converged: bool,
    residual_history: Vec<f64>,
}

impl From<krylov::SolveReport> for PySolveReport {
    fn from(r: krylov::SolveReport) -> Self {
        PySolveReport { iterations: r.iterations, converged: r.converged, residual_history: r.residual_history }
    }
}

#[pymethods]
impl PySolveReport {
    fn __repr__(&self) -> String {
        format!("SolveReport(iterations={}, converged={})", self.iterations, self.converged)
    }
}

/// Geometric multigrid with vertex-patch smoothing and p-multigrid local solves.
#[pyclass(name = "Multigrid", frozen)]
struct PyMultigrid {
    inner: GmgContext,
}

#[pymethods]
impl PyMultigrid {
    #[new]
    #[pyo3(signature = (hierarchy, p, smoother = "jacobi", n_mg = 1))]
    fn new(hierarchy: &PyHierarchy, p: usize, smoother: &str, n_mg: usize) -> PyResult<Self> {
        let config = SmootherConfig::new(parse::<SmootherKind>(smoother)?, n_mg);
        Ok(PyMultigrid { inner: GmgContext::new(&hierarchy.inner, p, config).map_err(to_py)? })
    }

    #[getter]
    fn n_dofs(&self) -> usize {
        self.inner.n_dofs()
    }

    /// Seeded uniform right-hand side on the finest level.
    fn random_rhs(&self, seed: u64) -> Vec<f64> {
        random_rhs(&self.inner.finest().op.dofs, seed)
    }

    /// One V-cycle applied to `rhs`.
    fn v_cycle(&self, rhs: Vec<f64>) -> PyResult<Vec<f64>> {
        let mut out = vec![0.0; rhs.len()];
        let mut ws = self.inner.workspace();
        self.inner.v_cycle(&rhs, &mut out, &mut ws).map_err(to_py)?;
        Ok(out)
    }

    /// GMRES preconditioned by one V-cycle; returns `(x, report)`.
    #[pyo3(signature = (b, tol = 1e-8, max_iter = 200))]
    fn solve(&self, py: Python<'_>, b: Vec<f64>, tol: f64, max_iter: usize) -> PyResult<(Vec<f64>, PySolveReport)> {
        if b.len() != self.inner.n_dofs() {
            return Err(PyValueError::new_err(format!("expected {} entries, got {}", self.inner.n_dofs(), b.len())));
        }
        let (x, rep) = py.detach(|| self.inner.solve(&b, tol, max_iter)).map_err(to_py)?;
        Ok((x, rep.into()))
    }
}

/// Nested degree sequence of the local p-multigrid.
#[pyfunction]
fn degree_sequence(p: usize) -> Vec<usize> {
    pmg::degree_sequence(p)
}

/// Finest-level DoF count of a structured hierarchy.
#[pyfunction]
#[pyo3(signature = (dim, p, levels, mesh = "cartesian"))]
fn dof_count(dim: usize, p: usize, levels: usize, mesh: &str) -> PyResult<usize> {
    bench::dof_count(dim, p, levels, parse::<MeshKind>(mesh)?).map_err(to_py)
}

/// Average CG iterations on a standalone patch preconditioned by one local
/// V-cycle; failures count as the sentinel value.
#[pyfunction]
#[pyo3(signature = (dim, p, delta = 0.0, mu = 1.0, smoother = "jacobi", kind = "cartesian", realizations = 20, seed = 0, tol = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn single_patch(
    py: Python<'_>,
    dim: usize,
    p: usize,
    delta: f64,
    mu: f64,
    smoother: &str,
    kind: &str,
    realizations: usize,
    seed: u64,
    tol: f64,
) -> PyResult<(f64, Vec<usize>)> {
    let kind = patch_kind(kind)?;
    let smoother = parse::<SmootherKind>(smoother)?;
    let row = py
        .detach(|| bench::run_single_patch_config(kind, dim, p, delta, mu, smoother, realizations, seed, tol))
        .map_err(to_py)?;
    Ok((row.avg, row.iterations))
}

/// Global GMRES iteration count for one configuration; returns
/// `(iterations, converged, dofs)`.
#[pyfunction]
#[pyo3(signature = (dim, p, levels, mesh = "cartesian", delta = 0.0, smoother = "jacobi", n_mg = 1, seed = 0, epsilon = 0.3, tol = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn global_iterations(
    py: Python<'_>,
    dim: usize,
    p: usize,
    levels: usize,
    mesh: &str,
    delta: f64,
    smoother: &str,
    n_mg: usize,
    seed: u64,
    epsilon: f64,
    tol: f64,
) -> PyResult<(usize, bool, usize)> {
    let mesh = parse::<MeshKind>(mesh)?;
    let smoother = parse::<SmootherKind>(smoother)?;
    let row = py
        .detach(|| bench::run_global_config(dim, p, levels, mesh, delta, epsilon, smoother, n_mg, seed, tol))
        .map_err(to_py)?;
    Ok((row.iterations, row.converged, row.dofs))
}

#[pymodule]
pub fn patchmg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHierarchy>()?;
    m.add_class::<PyLevelOperator>()?;
    m.add_class::<PyMultigrid>()?;
    m.add_class::<PySolveReport>()?;
    m.add_function(wrap_pyfunction!(degree_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(dof_count, m)?)?;
    m.add_function(wrap_pyfunction!(single_patch, m)?)?;
    m.add_function(wrap_pyfunction!(global_iterations, m)?)?;
    Ok(())
}
