//! Stäckel separable systems: Hamiltonians from separation relations,
//! control matrices, bi-Hamiltonian lifts to an extended phase space, and
//! pointwise numerical certification of the identities linking them.
//!
//! Everything is evaluated pointwise. Smooth data (separation functions,
//! charts, printed closed forms) are [`expr::Expr`] trees; derived objects
//! (Hamiltonians, control matrices, Poisson tensors) are evaluation
//! procedures generic over [`scalar::Scalar`], so forward-mode dual numbers
//! supply every gradient and, nested, every second derivative.

pub mod catalog;
pub mod control;
pub mod corpus;
pub mod error;
pub mod expr;
pub mod flows;
pub mod hj;
pub mod lift;
pub mod linalg;
pub mod phase;
pub mod poisson;
pub mod quad;
pub mod sampling;
pub mod scalar;
pub mod specfile;
pub mod stackel;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{Environment, Expr};
pub use scalar::{Dual, Scalar};
pub use stackel::SeparationSystem;
