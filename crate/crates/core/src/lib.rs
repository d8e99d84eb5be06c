//! Matrix-free high-order geometric multigrid for variable-coefficient Poisson
//! problems, smoothed by vertex-patch sweeps whose local problems are solved
//! inexactly with a nested p-multigrid cycle.

pub mod basis;
pub mod bench;
pub mod dofs;
pub mod gmg;
pub mod krylov;
pub mod error;
pub mod mesh;
pub mod operator;
pub mod pmg;
pub mod smoother;
pub mod tensor;
pub mod transfer;

pub use error::{Error, Result};
