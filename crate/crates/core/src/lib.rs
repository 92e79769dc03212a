//! Dyadic time-frequency analysis on periodic grids.
//!
//! Exact dyadic geometry, Haar and smooth wavelet families, maximal and square
//! functions, size/energy functionals with stopping-time decompositions, the
//! discrete flag-paraproduct model operators, and a spectral realization of
//! the five-linear multiplier `T_ab` with its fractional Leibniz harness.

pub mod dyadic;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod harness;
pub mod maximal;
pub mod model;
pub mod multiplier;
pub mod rng;
pub mod size_energy;
pub mod stopping;
pub mod wavelets;

pub use dyadic::{contains, enumerate_dyadic, DyadicInterval, DyadicRectangle};
pub use error::{Error, Result};
pub use grid::{measure_intersection, Grid1D, GridFunction1D, GridFunction2D};
pub use harness::{run, ExperimentConfig, ExperimentKind, InputKind, RunReport};
pub use model::{ModelInputs, ModelKind, ModelOperatorSpec};
pub use multiplier::{ExponentTuple, SymbolSpec};
pub use wavelets::{
    all_coefficients, coefficient, haar_eval, smooth_bump, CoefficientSequence, CutoffFamily, CutoffKind,
    RectSequence,
};
