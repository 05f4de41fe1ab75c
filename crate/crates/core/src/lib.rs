//! Proximal point methods for weakly convex optimization.
//!
//! The crate provides certified proximal maps and Moreau envelopes, the
//! proximally guided stochastic subgradient method, the prox-linear method for
//! composite problems `g + h∘c`, Catalyst acceleration for finite sums, and
//! generators for synthetic test problems.

pub mod catalyst;
pub mod check;
pub mod composite;
pub mod error;
pub mod linalg;
pub mod moreau;
pub mod oracle;
pub mod pgsg;
pub mod problems;
pub mod proxlinear;
pub mod report;
pub mod rng;

pub use composite::CompositeProblem;
pub use error::{Error, Result};
pub use linalg::Vector;
pub use report::SolverReport;
pub use rng::RandomStream;
