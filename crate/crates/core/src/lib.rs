//! Partial-transpose distinguishability bounds for bipartite state
//! ensembles, their multi-copy decay, and simulation of the resulting
//! data-hiding protocol.

pub mod constructions;
pub mod discrimination;
pub mod ensemble;
pub mod error;
pub mod multifold;
pub mod operator;
pub mod random;
pub mod sim;

pub use discrimination::{Objective, OptimalityReport, Povm, SolverOptions};
pub use ensemble::{EnsembleItem, IndexVector, StateEnsemble};
pub use error::{Error, Result};
pub use operator::{BipartiteDims, HermitianOperator, Spectrum};
