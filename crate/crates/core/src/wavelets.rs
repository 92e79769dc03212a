//! Haar wavelets, L²-normalized indicators, sampled smooth bumps and
//! coefficient extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dyadic::{pow2, DyadicInterval, DyadicRectangle};
use crate::error::{Error, Result};
use crate::fourier;
use crate::grid::{Grid1D, GridFunction1D};

/// Standard deviation of the Gaussian envelope, in units of `|I|`.
pub const ENVELOPE_WIDTH: f64 = 1.25;
/// Modulation frequency of lacunary smooth bumps, in units of `|I|⁻¹`.
pub const MODULATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutoffKind {
    HaarLacunary,
    HaarNonlacunary,
    SmoothLacunary,
    SmoothNonlacunary,
}

/// A family `(φ_I)_I` of L²-normalized cutoffs, indexed by dyadic intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CutoffFamily {
    pub kind: CutoffKind,
    /// Decay exponent `M` used by adaptedness checks of smooth members.
    pub decay: u32,
}

impl CutoffFamily {
    pub const HAAR_LAC: Self = Self {
        kind: CutoffKind::HaarLacunary,
        decay: 0,
    };
    pub const HAAR_NONLAC: Self = Self {
        kind: CutoffKind::HaarNonlacunary,
        decay: 0,
    };

    pub fn haar(lacunary: bool) -> Self {
        if lacunary {
            Self::HAAR_LAC
        } else {
            Self::HAAR_NONLAC
        }
    }

    pub fn smooth(lacunary: bool, decay: u32) -> Self {
        let kind = if lacunary {
            CutoffKind::SmoothLacunary
        } else {
            CutoffKind::SmoothNonlacunary
        };
        Self { kind, decay }
    }

    pub fn is_lacunary(&self) -> bool {
        matches!(self.kind, CutoffKind::HaarLacunary | CutoffKind::SmoothLacunary)
    }

    pub fn is_haar(&self) -> bool {
        matches!(self.kind, CutoffKind::HaarLacunary | CutoffKind::HaarNonlacunary)
    }

    /// Same smoothness class, opposite lacunarity.
    pub fn with_lacunary(&self, lacunary: bool) -> Self {
        if self.is_haar() {
            Self::haar(lacunary)
        } else {
            Self::smooth(lacunary, self.decay)
        }
    }

    /// Samples of the member adapted to `iv` on `grid`.
    pub fn sample(&self, iv: &DyadicInterval, grid: Grid1D) -> Result<Bump> {
        match self.kind {
            CutoffKind::HaarLacunary | CutoffKind::HaarNonlacunary => {
                haar_bump(iv, self.is_lacunary(), grid)
            }
            CutoffKind::SmoothLacunary | CutoffKind::SmoothNonlacunary => {
                smooth_bump(iv, self.is_lacunary(), self.decay, grid)
            }
        }
    }
}

/// A sampled family member, nonzero only on cells `start..start + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub start: usize,
    pub values: Vec<f64>,
}

impl Bump {
    /// `Σ_i f_i φ_i` over the support (no cell weight).
    pub fn dot(&self, f: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(&f[self.start..self.start + self.values.len()])
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn to_grid(&self, grid: Grid1D) -> GridFunction1D {
        let mut g = GridFunction1D::zeros(grid);
        g.values[self.start..self.start + self.values.len()].copy_from_slice(&self.values);
        g
    }

    /// Adds `c·φ` into `out`.
    pub fn add_to(&self, c: f64, out: &mut [f64]) {
        for (o, v) in out[self.start..].iter_mut().zip(&self.values) {
            *o += c * v;
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            start: self.start,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }
}

/// Exact value of `ψ^H_I(x)` (lacunary) or `φ^H_I(x) = |I|^{-1/2} χ_I(x)`.
pub fn haar_eval(iv: &DyadicInterval, lacunary: bool, x: f64) -> f64 {
    if !iv.contains_point(x) {
        return 0.0;
    }
    let amp = pow2(-iv.scale).sqrt();
    if !lacunary {
        return amp;
    }
    let mid = iv.center();
    if x < mid {
        amp
    } else {
        -amp
    }
}

fn haar_bump(iv: &DyadicInterval, lacunary: bool, grid: Grid1D) -> Result<Bump> {
    let r = grid.cell_range(iv)?;
    if lacunary && r.len() < 2 {
        return Err(Error::Resolution {
            interval: *iv,
            cell_scale: grid.cell_scale(),
        });
    }
    let amp = pow2(-iv.scale).sqrt();
    let half = r.len() / 2;
    let values = (0..r.len())
        .map(|i| if lacunary && i >= half { -amp } else { amp })
        .collect();
    Ok(Bump {
        start: r.start,
        values,
    })
}

/// L²-normalized Gaussian bump adapted to `iv`; the lacunary variant is
/// modulated at frequency `|I|⁻¹` and projected to exact grid mean zero.
pub fn smooth_bump(iv: &DyadicInterval, lacunary: bool, decay: u32, grid: Grid1D) -> Result<Bump> {
    if decay < 2 {
        return Err(Error::Precondition(format!("decay exponent {decay} < 2")));
    }
    grid.cell_range(iv)?;
    let len = iv.length();
    let c = iv.center();
    let sigma = ENVELOPE_WIDTH * len;
    let env: Vec<f64> = (0..grid.len())
        .map(|i| {
            let d = grid.periodic_offset(grid.point(i), c);
            (-0.5 * (d / sigma).powi(2)).exp()
        })
        .collect();
    let mut values = if lacunary {
        let raw: Vec<f64> = (0..grid.len())
            .map(|i| {
                let d = grid.periodic_offset(grid.point(i), c);
                env[i] * (2.0 * PI * MODULATION * d / len).cos()
            })
            .collect();
        let ratio = raw.iter().sum::<f64>() / env.iter().sum::<f64>();
        raw.iter().zip(&env).map(|(r, e)| r - ratio * e).collect::<Vec<_>>()
    } else {
        env
    };
    let norm = (values.iter().map(|v| v * v).sum::<f64>() * grid.cell_width()).sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(Bump { start: 0, values })
}

/// Adaptedness constants `C_l = sup_x |φ^{(l)}(x)| |I|^{l+1/2} (1 + dist(x,I)/|I|)^M`
/// for `l = 0..=3`, with derivatives by centered periodic differences.
pub fn adaptedness_constants(bump: &Bump, iv: &DyadicInterval, grid: Grid1D, decay: u32) -> [f64; 4] {
    let full = bump.to_grid(grid).values;
    let n = full.len();
    let h = grid.cell_width();
    let mut deriv = full.clone();
    let mut out = [0.0; 4];
    for (l, slot) in out.iter_mut().enumerate() {
        if l > 0 {
            let prev = deriv.clone();
            deriv = (0..n)
                .map(|i| (prev[(i + 1) % n] - prev[(i + n - 1) % n]) / (2.0 * h))
                .collect();
        }
        let len = iv.length();
        *slot = (0..n)
            .map(|i| {
                let x = grid.point(i);
                let dist = distance_to_interval(grid, x, iv);
                deriv[i].abs() * len.powf(l as f64 + 0.5) * (1.0 + dist / len).powi(decay as i32)
            })
            .fold(0.0, f64::max);
    }
    out
}

/// Periodic distance from `x` to the interval.
pub fn distance_to_interval(grid: Grid1D, x: f64, iv: &DyadicInterval) -> f64 {
    let d = grid.periodic_offset(x, iv.center()).abs();
    (d - 0.5 * iv.length()).max(0.0)
}

/// Fraction of spectral energy of a sampled bump inside the band of its class:
/// `|ξ| ≤ 1/(4|I|)` (non-lacunary) or `1/(4|I|) ≤ |ξ| ≤ 4/|I|` (lacunary).
pub fn spectral_band_fraction(bump: &Bump, iv: &DyadicInterval, grid: Grid1D, lacunary: bool) -> f64 {
    let full: Vec<Complex64> = bump.to_grid(grid).values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spec = fourier::dft(&full);
    let n = spec.len();
    let len = iv.length();
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, c) in spec.iter().enumerate() {
        let xi = fourier::symmetric_index(k, n) as f64 / grid.length();
        let e = c.norm_sqr();
        total += e;
        let a = xi.abs() * len;
        let ok = if lacunary { (0.25..=4.0).contains(&a) } else { a <= 0.25 };
        if ok {
            inside += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        inside / total
    }
}

/// A sparse map from a declared finite key set to scalars; absent keys read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<K: Ord + Copy> {
    keys: BTreeSet<K>,
    values: BTreeMap<K, f64>,
}

/// `(⟨f, φ_I⟩)_I`.
pub type CoefficientSequence = Sequence<DyadicInterval>;
/// `(⟨h, φ_I ⊗ φ_J⟩)_{I×J}`.
pub type RectSequence = Sequence<DyadicRectangle>;

impl<K: Ord + Copy + std::fmt::Debug> Sequence<K> {
    pub fn new(keys: impl IntoIterator<Item = K>) -> Self {
        Self {
            keys: keys.into_iter().collect(),
            values: BTreeMap::new(),
        }
    }

    pub fn from_pairs(keys: impl IntoIterator<Item = K>, pairs: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let mut s = Self::new(keys);
        for (k, v) in pairs {
            s.set(k, v)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: K, value: f64) -> Result<()> {
        if !self.keys.contains(&key) {
            return Err(Error::Precondition(format!("{key:?} is not in the declared collection")));
        }
        if value == 0.0 {
            self.values.remove(&key);
        } else {
            self.values.insert(key, value);
        }
        Ok(())
    }

    pub fn get(&self, key: &K) -> f64 {
        self.values.get(key).copied().unwrap_or(0.0)
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.keys.iter()
    }

    pub fn contains_key(&self, key: &K) -> bool {
        self.keys.contains(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn nonzero(&self) -> impl Iterator<Item = (&K, &f64)> {
        self.values.iter()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Self {
            keys: self.keys.clone(),
            values: BTreeMap::new(),
        };
        for (k, v) in &self.values {
            let w = c * v;
            if w != 0.0 {
                out.values.insert(*k, w);
            }
        }
        out
    }

    /// Restriction to the keys satisfying `keep`.
    pub fn restrict(&self, keep: impl Fn(&K) -> bool) -> Self {
        Self {
            keys: self.keys.iter().copied().filter(|k| keep(k)).collect(),
            values: self.values.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (*k, *v)).collect(),
        }
    }
}

/// `⟨f, φ_I⟩` by grid quadrature; exact for Haar kinds.
pub fn coefficient(f: &GridFunction1D, iv: &DyadicInterval, family: &CutoffFamily) -> Result<f64> {
    let b = family.sample(iv, f.grid)?;
    Ok(b.dot(&f.values) * f.grid.cell_width())
}

/// Cell sums of `f` at every scale from the cell scale up to the box.
#[derive(Debug, Clone)]
pub struct HaarPyramid {
    grid: Grid1D,
    /// `sums[s][n]` = `∫` of `f` over the interval of scale `cell_scale + s`, position `n`.
    sums: Vec<Vec<f64>>,
}

impl HaarPyramid {
    pub fn new(f: &GridFunction1D) -> Self {
        let w = f.grid.cell_width();
        let mut sums = vec![f.values.iter().map(|v| v * w).collect::<Vec<_>>()];
        while sums.last().map_or(0, Vec::len) > 1 {
            let prev = sums.last().unwrap();
            let next = prev.chunks(2).map(|c| c[0] + c[1]).collect();
            sums.push(next);
        }
        Self { grid: f.grid, sums }
    }

    /// `∫_I f`.
    pub fn integral(&self, iv: &DyadicInterval) -> Result<f64> {
        self.grid.cell_range(iv)?;
        let s = (iv.scale - self.grid.cell_scale()) as usize;
        Ok(self.sums[s][iv.pos as usize])
    }

    pub fn coefficient(&self, iv: &DyadicInterval, lacunary: bool) -> Result<f64> {
        let norm = pow2(-iv.scale).sqrt();
        if !lacunary {
            return Ok(self.integral(iv)? * norm);
        }
        self.grid.cell_range(iv)?;
        if iv.scale <= self.grid.cell_scale() {
            return Err(Error::Resolution {
                interval: *iv,
                cell_scale: self.grid.cell_scale(),
            });
        }
        let [l, r] = iv.children();
        Ok((self.integral(&l)? - self.integral(&r)?) * norm)
    }
}

/// Coefficients of `f` against a family on every interval of a collection.
/// Haar kinds go through the pyramid; smooth kinds through quadrature.
pub fn all_coefficients(
    f: &GridFunction1D,
    collection: &[DyadicInterval],
    family: &CutoffFamily,
) -> Result<CoefficientSequence> {
    let vals: Vec<(DyadicInterval, f64)> = if family.is_haar() {
        let p = HaarPyramid::new(f);
        collection
            .iter()
            .map(|iv| Ok((*iv, p.coefficient(iv, family.is_lacunary())?)))
            .collect::<Result<_>>()?
    } else {
        collection
            .par_iter()
            .map(|iv| Ok((*iv, coefficient(f, iv, family)?)))
            .collect::<Result<_>>()?
    };
    Sequence::from_pairs(collection.iter().copied(), vals)
}

/// Coefficients `⟨h, φ_I ⊗ φ'_J⟩` for every pair in `xs × ys`, by separable quadrature.
pub fn tensor_coefficients(
    h: &crate::grid::GridFunction2D,
    xs: &[DyadicInterval],
    fx: &CutoffFamily,
    ys: &[DyadicInterval],
    fy: &CutoffFamily,
) -> Result<Vec<Vec<f64>>> {
    let (nx, ny) = (h.nx(), h.ny());
    let bx: Vec<Bump> = xs.iter().map(|i| fx.sample(i, h.gx)).collect::<Result<_>>()?;
    let by: Vec<Bump> = ys.iter().map(|j| fy.sample(j, h.gy)).collect::<Result<_>>()?;
    let (wx, wy) = (h.gx.cell_width(), h.gy.cell_width());
    // a[i][iy] = ⟨h(·, y), φ_I⟩
    let a: Vec<Vec<f64>> = bx
        .par_iter()
        .map(|b| (0..ny).map(|iy| b.dot(&h.values[iy * nx..(iy + 1) * nx]) * wx).collect())
        .collect();
    Ok(a.par_iter()
        .map(|col| by.iter().map(|b| b.dot(col) * wy).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> DyadicInterval {
        DyadicInterval::new(0, 0)
    }

    #[test]
    fn haar_eval_values() {
        assert_eq!(haar_eval(&unit(), true, 0.25), 1.0);
        assert_eq!(haar_eval(&unit(), true, 0.75), -1.0);
        assert_eq!(haar_eval(&DyadicInterval::new(1, 0), true, 0.5), std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(haar_eval(&unit(), false, 1.5), 0.0);
    }

    #[test]
    fn coefficient_examples() {
        let g = Grid1D::new(0, 4).unwrap();
        let one = GridFunction1D::indicator(g, &unit()).unwrap();
        let half = GridFunction1D::indicator(g, &DyadicInterval::new(-1, 0)).unwrap();
        assert_eq!(coefficient(&one, &unit(), &CutoffFamily::HAAR_LAC).unwrap(), 0.0);
        assert_eq!(coefficient(&half, &unit(), &CutoffFamily::HAAR_LAC).unwrap(), 0.5);
        assert_eq!(coefficient(&one, &unit(), &CutoffFamily::HAAR_NONLAC).unwrap(), 1.0);
        let coarse = Grid1D::new(0, 1).unwrap();
        let f = GridFunction1D::zeros(coarse);
        assert!(coefficient(&f, &DyadicInterval::new(-2, 0), &CutoffFamily::HAAR_NONLAC).is_err());
    }

    #[test]
    fn all_coefficients_example() {
        let g = Grid1D::new(0, 3).unwrap();
        let half = GridFunction1D::indicator(g, &DyadicInterval::new(-1, 0)).unwrap();
        let coll = [unit(), DyadicInterval::new(-1, 0)];
        let s = all_coefficients(&half, &coll, &CutoffFamily::HAAR_LAC).unwrap();
        assert_eq!(s.get(&unit()), 0.5);
        assert_eq!(s.get(&DyadicInterval::new(-1, 0)), 0.0);
        let z = all_coefficients(&GridFunction1D::zeros(g), &coll, &CutoffFamily::HAAR_NONLAC).unwrap();
        assert_eq!(z.nonzero().count(), 0);
    }

    #[test]
    fn smooth_bump_contracts() {
        let g = Grid1D::new(3, 6).unwrap();
        let iv = DyadicInterval::new(0, 3);
        for lac in [false, true] {
            let b = smooth_bump(&iv, lac, 10, g).unwrap();
            let norm: f64 = b.values.iter().map(|v| v * v).sum::<f64>() * g.cell_width();
            assert_abs_diff_eq!(norm.sqrt(), 1.0, epsilon = 1e-6);
            if lac {
                let mean = b.values.iter().sum::<f64>() * g.cell_width();
                assert!(mean.abs() <= 1e-8, "mean {mean}");
            }
        }
        assert!(smooth_bump(&iv, false, 1, g).is_err());
    }

    #[test]
    fn smooth_bump_decays_away_from_its_interval() {
        let g = Grid1D::new(3, 7).unwrap();
        let iv = DyadicInterval::new(-1, 0);
        let b = smooth_bump(&iv, false, 10, g).unwrap();
        let c = adaptedness_constants(&b, &iv, g, 10);
        let at4 = b.values[g.cell_of(4.0)].abs();
        let dist = distance_to_interval(g, 4.0, &iv);
        assert!(at4 <= c[0] * iv.length().powf(-0.5) * (1.0 + dist / iv.length()).powi(-10) * (1.0 + 1e-12));
        assert!(at4 < 1e-6);
        assert!(c.iter().all(|v| v.is_finite() && *v < 1e7), "{c:?}");
    }

    #[test]
    fn smooth_bumps_are_frequency_localized() {
        let g = Grid1D::new(5, 6).unwrap();
        let iv = DyadicInterval::new(0, 12);
        for lac in [false, true] {
            let b = smooth_bump(&iv, lac, 10, g).unwrap();
            let frac = spectral_band_fraction(&b, &iv, g, lac);
            assert!(frac >= 0.99, "lacunary={lac}: {frac}");
        }
    }

    #[test]
    fn biest_support_fact_on_a_pyramid() {
        let g = Grid1D::new(0, 5).unwrap();
        let coll = crate::dyadic::enumerate_dyadic(0, -4, 0);
        for p in &coll {
            let phi = haar_bump(p, false, g).unwrap().to_grid(g);
            for q in coll.iter().filter(|q| q.scale >= p.scale) {
                let psi = haar_bump(q, true, g).unwrap().to_grid(g);
                let ip = phi.inner(&psi).unwrap();
                let strict = q.contains(p) && q != p;
                assert_eq!(ip.abs() > 1e-12, strict, "P={p} Q={q} ip={ip}");
            }
        }
    }

    #[test]
    fn haar_orthonormality() {
        let g = Grid1D::new(1, 4).unwrap();
        let coll = crate::dyadic::enumerate_dyadic(1, -3, 1);
        let samples: Vec<GridFunction1D> = coll
            .iter()
            .map(|i| haar_bump(i, true, g).unwrap().to_grid(g))
            .collect();
        for (a, fa) in samples.iter().enumerate() {
            for (b, fb) in samples.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                // odd scales carry a rounded 2^{-k/2}
                assert_abs_diff_eq!(fa.inner(fb).unwrap(), want, epsilon = 1e-15);
            }
        }
    }
}
