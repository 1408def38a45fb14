use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum DeconvError {
    #[error("kernel order (L = {l}, j = {j}) is invalid: need L >= 2 and 0 <= j < L")]
    InvalidKernelOrder { l: usize, j: usize },

    #[error("boundary kernel ratio rho must lie in (0, 1], got {0}")]
    InvalidRho(f64),

    #[error("moment system for kernel ({l}, {j}) with rho = {rho} is singular")]
    SingularMomentSystem { l: usize, j: usize, rho: f64 },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("no observation falls within bandwidth {bandwidth} of t = {t}")]
    EmptyWindow { t: f64, bandwidth: f64 },

    #[error(
        "bandwidth grid for derivative order {j} is empty (sigma^2 T^2 >= n or bandwidths below the design mesh); \
         adaptation is impossible at this noise level"
    )]
    EmptyBandwidthGrid { j: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid convolution kernel: {0}")]
    InvalidKernel(String),

    #[error("smoothing kernel order L = {l} must exceed the kernel's r = {r}")]
    KernelOrderTooLow { l: usize, r: usize },

    #[error("polynomial P(s) has repeated roots; use the general decomposition instead")]
    RepeatedRoots,

    #[error("unknown builtin {0}")]
    UnknownBuiltin(String),
}

pub type Result<T> = std::result::Result<T, DeconvError>;
