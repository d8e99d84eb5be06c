use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A cell mapping has a non-positive Jacobian determinant somewhere.
    #[error("degenerate mesh: cell {cell} has Jacobian determinant {det:.3e}")]
    DegenerateMesh { cell: usize, det: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("dense assembly of size {size} exceeds the cap of {limit}")]
    TooLarge { size: usize, limit: usize },

    /// The degree-one interior space of a patch is not a single scalar.
    #[error("coarse patch space has {0} degrees of freedom instead of one")]
    MultiDofCoarse(usize),

    #[error("degree {0} is not part of the patch degree sequence")]
    DegreeNotInSequence(usize),

    /// CG encountered a non-positive curvature direction.
    #[error("CG breakdown at iteration {iteration}: p^T A p = {curvature:.3e}")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("GMRES stagnation at iteration {iteration}")]
    Stagnation { iteration: usize },

    #[error("coarse solver did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CoarseNotConverged { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
