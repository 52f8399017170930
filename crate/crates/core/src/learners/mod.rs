//! Supervised cores driven by the multiple-instance wrappers.

pub mod forest;
pub mod svm;

pub use forest::{forest_train, ForestModel, ForestParams};
pub use svm::{smo_solve, smo_train, Kernel, KernelCache, SmoSolution, SvmModel, SvmParams};
