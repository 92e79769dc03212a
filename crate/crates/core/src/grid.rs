//! Uniform periodic grids on `[0, 2^J)` and sampled functions on them.

use std::ops::Range;

use num_complex::Complex64;

use crate::dyadic::{pow2, DyadicInterval, DyadicRectangle};
use crate::error::{Error, Result};

/// The grid on `[0, 2^box_exp)` with `2^res_exp` cells per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid1D {
    pub box_exp: i32,
    pub res_exp: i32,
}

impl Grid1D {
    /// Total cell count must stay between 1 and 2^26.
    pub fn new(box_exp: i32, res_exp: i32) -> Result<Self> {
        let e = box_exp + res_exp;
        if !(0..=26).contains(&e) {
            return Err(Error::Config(format!(
                "grid with 2^{box_exp} length and 2^{res_exp} cells per unit has 2^{e} cells"
            )));
        }
        Ok(Self { box_exp, res_exp })
    }

    pub fn len(&self) -> usize {
        1usize << (self.box_exp + self.res_exp)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        pow2(self.box_exp)
    }

    pub fn cell_width(&self) -> f64 {
        pow2(-self.res_exp)
    }

    /// Scale of a single cell as a dyadic interval.
    pub fn cell_scale(&self) -> i32 {
        -self.res_exp
    }

    /// Left endpoint of cell `i`.
    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.cell_width()
    }

    /// Index of the cell containing `x`, wrapping periodically.
    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.len() as i64;
        let i = (x / self.cell_width()).floor() as i64;
        i.rem_euclid(n) as usize
    }

    pub fn cell_interval(&self, i: usize) -> DyadicInterval {
        DyadicInterval::new(self.cell_scale(), i as i64)
    }

    /// The whole domain as a dyadic interval.
    pub fn domain(&self) -> DyadicInterval {
        DyadicInterval::new(self.box_exp, 0)
    }

    /// Cell indices covered by `iv`.
    pub fn cell_range(&self, iv: &DyadicInterval) -> Result<Range<usize>> {
        if !self.domain().contains(iv) {
            return Err(Error::Domain(*iv, self.box_exp));
        }
        let (start, width) = iv.cell_span(self.cell_scale()).ok_or(Error::Resolution {
            interval: *iv,
            cell_scale: self.cell_scale(),
        })?;
        Ok(start as usize..(start + width) as usize)
    }

    /// Signed periodic displacement `x - c` reduced to `[-L/2, L/2)`.
    pub fn periodic_offset(&self, x: f64, c: f64) -> f64 {
        let l = self.length();
        (x - c + 0.5 * l).rem_euclid(l) - 0.5 * l
    }
}

/// Samples on a [`Grid1D`]; sample `i` belongs to cell `[i·w, (i+1)·w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction1D<T = f64> {
    pub grid: Grid1D,
    pub values: Vec<T>,
}

impl<T: Clone + Default> GridFunction1D<T> {
    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![T::default(); grid.len()],
        }
    }
}

impl<T> GridFunction1D<T> {
    pub fn new(grid: Grid1D, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl GridFunction1D<f64> {
    /// `χ_I` on the grid.
    pub fn indicator(grid: Grid1D, iv: &DyadicInterval) -> Result<Self> {
        let r = grid.cell_range(iv)?;
        let mut f = Self::zeros(grid);
        f.values[r].iter_mut().for_each(|v| *v = 1.0);
        Ok(f)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_width()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        check_same(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_width())
    }

    /// `L^p` norm (quasinorm for `p < 1`); `p = ∞` is the max of the samples.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p, self.grid.cell_width())
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// Measure of the support.
    pub fn support_measure(&self) -> f64 {
        self.values.iter().filter(|v| **v != 0.0).count() as f64 * self.grid.cell_width()
    }

    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn to_complex(&self) -> GridFunction1D<Complex64> {
        GridFunction1D {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// `|I ∩ S|` for an indicator grid function `S`; exact for unions of cells.
pub fn measure_intersection(iv: &DyadicInterval, s: &GridFunction1D) -> Result<f64> {
    if !s.is_indicator() {
        return Err(Error::Precondition("S must take values in {0,1}".into()));
    }
    let r = s.grid.cell_range(iv)?;
    let count = s.values[r].iter().filter(|v| **v != 0.0).count();
    Ok(count as f64 * s.grid.cell_width())
}

/// Prefix counts of a boolean cell mask for O(1) interval queries.
#[derive(Debug, Clone)]
pub struct CellCounter {
    pub grid: Grid1D,
    prefix: Vec<u64>,
}

impl CellCounter {
    pub fn new(grid: Grid1D, mask: &[bool]) -> Self {
        let mut prefix = Vec::with_capacity(mask.len() + 1);
        prefix.push(0);
        let mut acc = 0u64;
        for &b in mask {
            acc += b as u64;
            prefix.push(acc);
        }
        Self { grid, prefix }
    }

    /// Number of marked cells in `iv`.
    pub fn count(&self, iv: &DyadicInterval) -> Result<u64> {
        let r = self.grid.cell_range(iv)?;
        Ok(self.prefix[r.end] - self.prefix[r.start])
    }

    pub fn total(&self) -> u64 {
        *self.prefix.last().unwrap_or(&0)
    }
}

/// Samples on a product grid, `x` fastest: `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction2D<T = f64> {
    pub gx: Grid1D,
    pub gy: Grid1D,
    pub values: Vec<T>,
}

impl<T: Clone + Default> GridFunction2D<T> {
    pub fn zeros(gx: Grid1D, gy: Grid1D) -> Self {
        Self {
            gx,
            gy,
            values: vec![T::default(); gx.len() * gy.len()],
        }
    }
}

impl<T: Copy> GridFunction2D<T> {
    pub fn new(gx: Grid1D, gy: Grid1D, values: Vec<T>) -> Result<Self> {
        if values.len() != gx.len() * gy.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a {}x{} grid",
                values.len(),
                gx.len(),
                gy.len()
            )));
        }
        Ok(Self { gx, gy, values })
    }

    pub fn from_fn(gx: Grid1D, gy: Grid1D, f: impl Fn(f64, f64) -> T) -> Self {
        let mut values = Vec::with_capacity(gx.len() * gy.len());
        for iy in 0..gy.len() {
            let y = gy.point(iy);
            for ix in 0..gx.len() {
                values.push(f(gx.point(ix), y));
            }
        }
        Self { gx, gy, values }
    }

    pub fn nx(&self) -> usize {
        self.gx.len()
    }

    pub fn ny(&self) -> usize {
        self.gy.len()
    }

    pub fn at(&self, ix: usize, iy: usize) -> T {
        self.values[iy * self.gx.len() + ix]
    }

    pub fn row(&self, iy: usize) -> &[T] {
        let nx = self.gx.len();
        &self.values[iy * nx..(iy + 1) * nx]
    }
}

impl GridFunction2D<f64> {
    /// `f ⊗ g`, i.e. `(x, y) ↦ f(x) g(y)`.
    pub fn tensor(f: &GridFunction1D, g: &GridFunction1D) -> Self {
        let mut values = Vec::with_capacity(f.len() * g.len());
        for &gy in &g.values {
            values.extend(f.values.iter().map(|&fx| fx * gy));
        }
        Self {
            gx: f.grid,
            gy: g.grid,
            values,
        }
    }

    /// `χ_R` on the grid.
    pub fn rect_indicator(gx: Grid1D, gy: Grid1D, r: &DyadicRectangle) -> Result<Self> {
        let fx = GridFunction1D::indicator(gx, &r.x)?;
        let fy = GridFunction1D::indicator(gy, &r.y)?;
        Ok(Self::tensor(&fx, &fy))
    }

    pub fn cell_area(&self) -> f64 {
        self.gx.cell_width() * self.gy.cell_width()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.cell_area())
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p, self.cell_area())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            gx: self.gx,
            gy: self.gy,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            gx: self.gx,
            gy: self.gy,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn support_measure(&self) -> f64 {
        self.values.iter().filter(|v| **v != 0.0).count() as f64 * self.cell_area()
    }

    pub fn is_indicator(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        check_same(&self.gx, &other.gx)?;
        check_same(&self.gy, &other.gy)
    }
}

pub(crate) fn check_same(a: &Grid1D, b: &Grid1D) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Riemann-sum `L^p` norm with uniform weight `w`.
pub fn lp_norm(values: &[f64], p: f64, w: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * w;
    s.powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_one_integrates_to_length() {
        for (j, m) in [(0, 0), (3, 5), (6, 12), (-2, 7)] {
            let g = Grid1D::new(j, m).unwrap();
            let one = GridFunction1D::from_fn(g, |_| 1.0);
            assert_eq!(one.integral(), g.length());
            assert_eq!(g.len() as f64, g.length() * pow2(m));
        }
    }

    #[test]
    fn measure_intersection_examples() {
        let g = Grid1D::new(0, 4).unwrap();
        let unit = DyadicInterval::new(0, 0);
        let chi = GridFunction1D::indicator(g, &unit).unwrap();
        assert_eq!(measure_intersection(&unit, &chi).unwrap(), 1.0);
        let zero = GridFunction1D::zeros(g);
        assert_eq!(measure_intersection(&unit, &zero).unwrap(), 0.0);
        let quarter = GridFunction1D::indicator(g, &DyadicInterval::new(-2, 0)).unwrap();
        assert_eq!(measure_intersection(&unit, &quarter).unwrap(), 0.25);
    }

    #[test]
    fn out_of_domain_and_too_fine_are_errors() {
        let g = Grid1D::new(0, 2).unwrap();
        let s = GridFunction1D::zeros(g);
        assert!(matches!(
            measure_intersection(&DyadicInterval::new(0, 1), &s),
            Err(Error::Domain(..))
        ));
        assert!(matches!(
            measure_intersection(&DyadicInterval::new(-3, 0), &s),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn tensor_matches_pointwise_product() {
        let gx = Grid1D::new(0, 3).unwrap();
        let gy = Grid1D::new(1, 2).unwrap();
        let f = GridFunction1D::from_fn(gx, |x| x * x - 0.3);
        let g = GridFunction1D::from_fn(gy, |y| (3.0 * y).sin());
        let t = GridFunction2D::tensor(&f, &g);
        let direct = GridFunction2D::from_fn(gx, gy, |x, y| (x * x - 0.3) * (3.0 * y).sin());
        assert_eq!(t, direct);
    }
}
