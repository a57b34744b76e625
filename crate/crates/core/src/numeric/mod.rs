//! Dense linear algebra, forward-mode differentiation and root finding.

pub mod diff;
pub mod jet;
pub mod jet_linalg;
pub mod matrix;
pub mod newton;
pub mod svd;

pub use diff::{dual_eval, gradient, jacobian, DualVector, ScalarFn, VectorFn};
pub use jet::Jet;
pub use jet_linalg::{pinv_jet, JetMat};
pub use matrix::DenseMatrix;
pub use newton::{newton_root, newton_root_subset};
pub use svd::{numeric_rank, pseudoinverse, svd, Svd};
