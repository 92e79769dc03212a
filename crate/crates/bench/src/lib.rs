//! Shared fixtures for the criterion benchmarks.

use dyadtf::harness::checks::{random_small_spec, NoiseInputs};
use dyadtf::rng::trial_rng;
use dyadtf::{Grid1D, GridFunction1D, ModelKind, ModelOperatorSpec};

pub const SEED: u64 = 7;

pub fn grid(box_exp: i32, res_exp: i32) -> Grid1D {
    Grid1D::new(box_exp, res_exp).expect("bench grid")
}

pub fn noise(g: Grid1D) -> NoiseInputs {
    NoiseInputs::new(g, &mut trial_rng(SEED, 0))
}

pub fn signal(g: Grid1D) -> GridFunction1D {
    GridFunction1D::from_fn(g, |x| (7.0 * x).sin() + (x * x).cos())
}

pub fn small_spec(model: ModelKind) -> ModelOperatorSpec {
    random_small_spec(model, true, &mut trial_rng(SEED, 1))
}
