//! Finite-volume Gibbs measures for long-range two-body lattice spin systems,
//! their high-temperature polymer expansion, the constants controlling its
//! convergence, and numerical checks of the integral and local central limit
//! theorems on small volumes.

// negated comparisons are used deliberately so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cluster;
pub mod error;
pub mod gibbs;
pub mod lclt;
pub mod model;
pub mod polymer;
mod unionfind;

pub use error::{Error, Result};
pub use gibbs::{metropolis_run, ExactGibbs, McChain, McOptions, McRun, SkStatistics};
pub use model::{
    coupling_j, hamiltonian, potential_norm, BoundaryCondition, Coupling, Kernel, LatticeBox,
    Model, PairConvention, PairPotential, Region, Site, SpinSpace, Tail,
};
pub use unionfind::UnionFind;
