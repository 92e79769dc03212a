use thiserror::Error;

use crate::dyadic::DyadicInterval;

/// Errors raised by the analysis kernels and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An interval does not lie inside the grid's domain.
    #[error("interval {0} lies outside the domain [0, 2^{1})")]
    Domain(DyadicInterval, i32),

    /// The grid is too coarse to resolve an interval as a union of cells.
    #[error("interval {interval} is finer than the grid cell scale {cell_scale}")]
    Resolution {
        interval: DyadicInterval,
        cell_scale: i32,
    },

    /// Two grid-backed objects do not share a grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A family or variant does not match what the operation requires.
    #[error("configuration error: {0}")]
    Config(String),

    /// A documented precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A size cap (oracle sizes, tabulated grids) was exceeded.
    #[error("size cap exceeded: {0}")]
    Cap(String),

    /// Band separation too small for the completion windows of the cascade.
    #[error("insufficient band separation: {0}")]
    Separation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
