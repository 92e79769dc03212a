//! Seeded test functions.
//!
//! Indicator-bounded and Haar-sparse inputs are piecewise constant on cells of width
//! `2^{-input_res}` and drawn on that coarse grid first, so the same seed yields the same
//! function on every finer grid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicInterval, DyadicRectangle};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction1D, GridFunction2D};
use crate::rng::trial_rng;
use crate::wavelets::haar_eval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// `|f| ≤ χ_F` with `F` a random union of one to four dyadic intervals, one amplitude in
    /// `[−1, 1]` per interval (later intervals overwrite earlier ones).
    IndicatorBounded,
    /// Sums of modulated Gaussians centred in `[0.3L, 0.7L]`, width at most `L/40`.
    SchwartzLike,
    /// A few Haar functions with random coefficients.
    HaarSparse,
}

impl InputKind {
    pub const ALL: [Self; 3] = [Self::IndicatorBounded, Self::SchwartzLike, Self::HaarSparse];

    pub fn name(&self) -> &'static str {
        match self {
            Self::IndicatorBounded => "indicator_bounded",
            Self::SchwartzLike => "schwartz_like",
            Self::HaarSparse => "haar_sparse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown input kind {s:?}")))
    }
}

/// A test function and the set `F` it is attached to.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub f: GridFunction1D,
    /// `χ_F`.
    pub support: GridFunction1D,
}

impl TestFunction {
    /// `|F|`.
    pub fn measure(&self) -> f64 {
        self.support.support_measure()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction2D {
    pub f: GridFunction2D,
    pub support: GridFunction2D,
}

fn coarse(grid: Grid1D, input_res: i32) -> Result<Grid1D> {
    if input_res > grid.res_exp {
        return Err(Error::Config(format!(
            "input resolution 2^-{input_res} is finer than the grid 2^-{}",
            grid.res_exp
        )));
    }
    Grid1D::new(grid.box_exp, input_res)
}

fn refine_1d(f: &GridFunction1D, grid: Grid1D) -> GridFunction1D {
    let r = grid.len() / f.len();
    GridFunction1D::new(grid, f.values.iter().flat_map(|v| std::iter::repeat_n(*v, r)).collect()).unwrap()
}

fn refine_2d(f: &GridFunction2D, gx: Grid1D, gy: Grid1D) -> GridFunction2D {
    let (rx, ry) = (gx.len() / f.nx(), gy.len() / f.ny());
    let nx = gx.len();
    let values = (0..nx * gy.len()).map(|i| f.at((i % nx) / rx, (i / nx) / ry)).collect();
    GridFunction2D::new(gx, gy, values).unwrap()
}

fn random_interval(grid: Grid1D, rng: &mut impl Rng) -> DyadicInterval {
    let k = rng.random_range(grid.cell_scale()..grid.box_exp);
    DyadicInterval::new(k, rng.random_range(0..1i64 << (grid.box_exp - k)))
}

fn amplitude(rng: &mut impl Rng) -> f64 {
    rng.random_range(-1.0..=1.0)
}

pub fn generate_test_function(kind: InputKind, grid: Grid1D, input_res: i32, rng: &mut impl Rng) -> Result<TestFunction> {
    let cg = coarse(grid, input_res)?;
    match kind {
        InputKind::IndicatorBounded => {
            let mut support = GridFunction1D::zeros(cg);
            let mut f = GridFunction1D::zeros(cg);
            for _ in 0..rng.random_range(1..=4) {
                let iv = random_interval(cg, rng);
                let a = amplitude(rng);
                for i in cg.cell_range(&iv)? {
                    support.values[i] = 1.0;
                    f.values[i] = a;
                }
            }
            Ok(TestFunction { f: refine_1d(&f, grid), support: refine_1d(&support, grid) })
        }
        InputKind::SchwartzLike => {
            let l = grid.length();
            let count = rng.random_range(1..=3);
            let bumps: Vec<(f64, f64, f64, f64)> = (0..count)
                .map(|_| {
                    let c = rng.random_range(0.3 * l..=0.7 * l);
                    let sigma = rng.random_range(l / 80.0..=l / 40.0);
                    let freq = rng.random_range(0..=4) as f64 / sigma / 8.0;
                    (amplitude(rng) / count as f64, c, sigma, freq)
                })
                .collect();
            let f = GridFunction1D::from_fn(grid, |x| {
                bumps
                    .iter()
                    .map(|(a, c, s, w)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp() * (2.0 * std::f64::consts::PI * w * (x - c)).cos())
                    .sum()
            });
            Ok(TestFunction { f, support: GridFunction1D::from_fn(grid, |_| 1.0) })
        }
        InputKind::HaarSparse => {
            let mut f = GridFunction1D::zeros(cg);
            let fine = Grid1D::new(cg.box_exp, cg.res_exp)?;
            for _ in 0..rng.random_range(1..=6) {
                let k = rng.random_range(fine.cell_scale() + 1..=fine.box_exp);
                let iv = DyadicInterval::new(k, rng.random_range(0..1i64 << (fine.box_exp - k)));
                let c = amplitude(rng) * iv.length().sqrt();
                for i in fine.cell_range(&iv)? {
                    f.values[i] += c * haar_eval(&iv, true, fine.point(i));
                }
            }
            let support = f.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
            Ok(TestFunction { f: refine_1d(&f, grid), support: refine_1d(&support, grid) })
        }
    }
}

/// `count` functions, the `i`-th drawn from stream `i` of `seed`.
pub fn generate_test_functions(
    kind: InputKind,
    grid: Grid1D,
    input_res: i32,
    seed: u64,
    count: usize,
) -> Result<Vec<TestFunction>> {
    (0..count)
        .map(|i| generate_test_function(kind, grid, input_res, &mut trial_rng(seed, i as u64)))
        .collect()
}

fn random_rectangle(gx: Grid1D, gy: Grid1D, rng: &mut impl Rng) -> DyadicRectangle {
    DyadicRectangle::new(random_interval(gx, rng), random_interval(gy, rng))
}

/// `χ_E` for a random union of one to four dyadic rectangles at the input resolution.
pub fn random_set_2d(gx: Grid1D, gy: Grid1D, input_res: i32, rng: &mut impl Rng) -> Result<GridFunction2D> {
    let (cx, cy) = (coarse(gx, input_res)?, coarse(gy, input_res)?);
    let mut e = GridFunction2D::zeros(cx, cy);
    for _ in 0..rng.random_range(1..=4) {
        let r = random_rectangle(cx, cy, rng);
        e = e.add(&GridFunction2D::rect_indicator(cx, cy, &r)?)?.map(|v| v.min(1.0));
    }
    Ok(refine_2d(&e, gx, gy))
}

pub fn generate_test_function_2d(
    kind: InputKind,
    gx: Grid1D,
    gy: Grid1D,
    input_res: i32,
    rng: &mut impl Rng,
) -> Result<TestFunction2D> {
    match kind {
        InputKind::IndicatorBounded => {
            let (cx, cy) = (coarse(gx, input_res)?, coarse(gy, input_res)?);
            let mut support = GridFunction2D::zeros(cx, cy);
            let mut f = GridFunction2D::zeros(cx, cy);
            let nx = cx.len();
            for _ in 0..rng.random_range(1..=4) {
                let r = random_rectangle(cx, cy, rng);
                let a = amplitude(rng);
                for iy in cy.cell_range(&r.y)? {
                    for ix in cx.cell_range(&r.x)? {
                        support.values[iy * nx + ix] = 1.0;
                        f.values[iy * nx + ix] = a;
                    }
                }
            }
            Ok(TestFunction2D { f: refine_2d(&f, gx, gy), support: refine_2d(&support, gx, gy) })
        }
        InputKind::SchwartzLike | InputKind::HaarSparse => {
            let a = generate_test_function(kind, gx, input_res, rng)?;
            let b = generate_test_function(kind, gy, input_res, rng)?;
            Ok(TestFunction2D {
                f: GridFunction2D::tensor(&a.f, &b.f),
                support: GridFunction2D::tensor(&a.support, &b.support),
            })
        }
    }
}
