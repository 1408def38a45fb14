//! Laplace-domain algebra: rational convolution kernels, the resolvent
//! transform and its pole decomposition.

mod decompose;
mod example2;
mod exppoly;
mod kernel;
mod poly;

pub use decompose::{decompose, phi_tilde, Pole, RationalFunction, ResolventDecomposition};
pub use example2::{example2_coefficients, Example2Coefficients};
pub use exppoly::{pole_coefficients, ExpPoly, ExpTerm};
pub use kernel::RationalLaplaceKernel;
pub use poly::{binomial, factorial, Polynomial, RootCluster, C64};
