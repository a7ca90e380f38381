//! Total-variation regularisation of first-kind convolutional Volterra
//! equations by the subgradient inclusion `A u + α ∂TV(u) ∋ f`.
//!
//! The crate provides the discretised operators ([`volterra`]), a check of
//! the monotonicity of a kernel ([`monotonicity`]), the direct tube solver
//! ([`tv`]), an independent iterative reference solver ([`oracle`]) and the
//! experiment tooling behind the `volterra-tv` binary ([`harness`]).

pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod monotonicity;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod tv;
pub mod volterra;

pub use error::{Error, Result};
pub use grid::{Grid, Signal};
pub use tv::{check_optimality, solve_tv_lavrentiev, taut_string_prox, OptimalityCertificate, SolverTrace};
pub use volterra::{Kernel, VolterraOperator};
