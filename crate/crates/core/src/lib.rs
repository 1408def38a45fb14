pub mod cli;
pub mod deconv;
pub mod error;
pub mod kernels;
pub mod quad;
pub mod resolvent;
pub mod sim;
pub mod smoother;

pub use error::{DeconvError, Result};
