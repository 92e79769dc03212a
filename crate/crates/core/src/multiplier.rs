//! Spectral realization of the five-linear multiplier `T_ab`, fractional derivatives,
//! Littlewood-Paley bands, the special-symbol cascade and the Leibniz harness.
//!
//! Band windows act on integer torus frequencies `n ∈ (−N/2, N/2]`; fractional
//! derivatives use the physical frequency `n/L` so that dilations rescale exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{dft, dft2, idft, idft2, symmetric_index};
use crate::grid::{lp_norm, Grid1D, GridFunction1D, GridFunction2D};
use crate::model::{pairwise_sum, ModelInputs};

/// `C^∞` step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// `φ̂`: 1 on `|ξ| ≤ 3/2`, 0 on `|ξ| ≥ 2`, radially nonincreasing.
pub fn phi_hat(xi: f64) -> f64 {
    smooth_step(4.0 - 2.0 * xi.abs())
}

/// `ψ̂(ξ) = φ̂(ξ) − φ̂(2ξ)`: 1 on `1 ≤ |ξ| ≤ 3/2`, supported in `3/4 < |ξ| < 2`.
pub fn psi_hat(xi: f64) -> f64 {
    phi_hat(xi) - phi_hat(2.0 * xi)
}

/// 1 on `|ζ| ≤ hi`.
fn ball(hi: f64, z: f64) -> f64 {
    phi_hat(1.5 * z / hi)
}

/// 1 on `lo ≤ |ζ| ≤ hi`, 0 near the origin.
fn annulus(lo: f64, hi: f64, z: f64) -> f64 {
    phi_hat(1.5 * z / hi) - phi_hat(2.0 * z / lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandType {
    Psi,
    Phi,
}

impl BandType {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "psi" => Ok(Self::Psi),
            "phi" => Ok(Self::Phi),
            _ => Err(Error::Config(format!("unknown band type {s:?}"))),
        }
    }
}

/// Offset of the ball windows of Littlewood-Paley projections: `φ̂_k = Σ_{k' ≤ k−10} ψ̂_{k'}`.
pub const LP_PHI_OFFSET: i32 = 10;

/// `ψ̂_k(n) = ψ̂(2^{-k}n)`, or `φ̂(2^{-(k−offset)}n)` for the ball type.
pub fn band_window(kind: BandType, k: i32, offset: i32, n: f64) -> f64 {
    match kind {
        BandType::Psi => psi_hat(n * (-k as f64).exp2()),
        BandType::Phi => phi_hat(n * (-(k - offset) as f64).exp2()),
    }
}

/// Top band `K = log₂(N/2)`; bands `0..=K` partition unity on every nonzero frequency.
pub fn top_band(n: usize) -> Result<i32> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Config(format!("grid size {n} is not a power of two ≥ 2")));
    }
    Ok(n.trailing_zeros() as i32 - 1)
}

fn frequencies(n: usize) -> Vec<f64> {
    (0..n).map(|k| symmetric_index(k, n) as f64).collect()
}

fn window_values(n: usize, w: impl Fn(f64) -> f64) -> Vec<f64> {
    frequencies(n).into_iter().map(w).collect()
}

fn filter(f: &[Complex64], w: &[f64]) -> Vec<Complex64> {
    f.iter().zip(w).map(|(c, v)| c * v).collect()
}

/// Multiply the spectrum of `f` by the band window `k` and transform back.
pub fn lp_project(f: &GridFunction1D, k: i32, kind: BandType) -> Result<GridFunction1D> {
    let top = top_band(f.len())?;
    if !(0..=top).contains(&k) {
        return Err(Error::Config(format!("band {k} outside 0..={top}")));
    }
    let spec = dft(&f.to_complex().values);
    let w = window_values(f.len(), |n| band_window(kind, k, LP_PHI_OFFSET, n));
    let out = idft(&filter(&spec, &w));
    GridFunction1D::new(f.grid, out.iter().map(|c| c.re).collect())
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Config(format!("derivative order {alpha} must be ≥ 0")));
    }
    Ok(())
}

/// `|n/L|^α` per slot, with `0^0 = 1`.
fn derivative_symbol(grid: Grid1D, alpha: f64) -> Vec<f64> {
    let l = grid.length();
    window_values(grid.len(), |n| if alpha == 0.0 { 1.0 } else { (n / l).abs().powf(alpha) })
}

pub fn fractional_derivative_complex(f: &GridFunction1D<Complex64>, alpha: f64) -> Result<GridFunction1D<Complex64>> {
    check_order(alpha)?;
    let s = derivative_symbol(f.grid, alpha);
    GridFunction1D::new(f.grid, idft(&filter(&dft(&f.values), &s)))
}

/// `D^α f` and the largest imaginary part discarded.
pub fn fractional_derivative_with_residue(f: &GridFunction1D, alpha: f64) -> Result<(GridFunction1D, f64)> {
    let c = fractional_derivative_complex(&f.to_complex(), alpha)?;
    let residue = c.values.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    Ok((GridFunction1D::new(f.grid, c.values.iter().map(|v| v.re).collect())?, residue))
}

pub fn fractional_derivative(f: &GridFunction1D, alpha: f64) -> Result<GridFunction1D> {
    Ok(fractional_derivative_with_residue(f, alpha)?.0)
}

/// `D₁^{α₁}D₂^{α₂} h`.
pub fn fractional_derivative_2d(h: &GridFunction2D, a1: f64, a2: f64) -> Result<GridFunction2D> {
    check_order(a1)?;
    check_order(a2)?;
    if a1 == 0.0 && a2 == 0.0 {
        return Ok(h.clone());
    }
    let (nx, ny) = (h.nx(), h.ny());
    let sx = derivative_symbol(h.gx, a1);
    let sy = derivative_symbol(h.gy, a2);
    let mut spec = dft2(&h.values.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>(), nx, ny);
    for iy in 0..ny {
        for ix in 0..nx {
            spec[iy * nx + ix] *= sx[ix] * sy[iy];
        }
    }
    let out = idft2(&spec, nx, ny);
    GridFunction2D::new(h.gx, h.gy, out.iter().map(|c| c.re).collect())
}

/// `(p₁, q₁, p₂, q₂, s)` with `1/p₁ + 1/q₁ + 1/s = 1/p₂ + 1/q₂ + 1/s = 1/r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentTuple {
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
    pub s: f64,
}

/// Tolerance of the scaling identity.
pub const EXPONENT_TOL: f64 = 1e-12;

impl ExponentTuple {
    pub fn new(p1: f64, q1: f64, p2: f64, q2: f64, s: f64) -> Result<Self> {
        let t = Self { p1, q1, p2, q2, s };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p1", self.p1), ("q1", self.q1), ("p2", self.p2), ("q2", self.q2), ("s", self.s)] {
            if v.is_nan() || v <= 1.0 {
                return Err(Error::Config(format!("exponent {name} = {v} must lie in (1, ∞]")));
            }
        }
        if self.p1.is_infinite() && self.q1.is_infinite() {
            return Err(Error::Config("(p1, q1) = (∞, ∞) is excluded".into()));
        }
        if self.p2.is_infinite() && self.q2.is_infinite() {
            return Err(Error::Config("(p2, q2) = (∞, ∞) is excluded".into()));
        }
        let x = 1.0 / self.p1 + 1.0 / self.q1;
        let y = 1.0 / self.p2 + 1.0 / self.q2;
        if (x - y).abs() > EXPONENT_TOL {
            return Err(Error::Config(format!(
                "1/p1 + 1/q1 = {x} differs from 1/p2 + 1/q2 = {y}"
            )));
        }
        Ok(())
    }

    pub fn inv_r(&self) -> f64 {
        1.0 / self.p1 + 1.0 / self.q1 + 1.0 / self.s
    }

    pub fn r(&self) -> f64 {
        1.0 / self.inv_r()
    }

    /// `1/r' = 1 − 1/r`.
    pub fn inv_r_conjugate(&self) -> f64 {
        1.0 - self.inv_r()
    }
}

/// Largest `N` for tabulated symbols and the direct sextuple sum.
pub const DIRECT_CAP: usize = 16;
/// Largest `N` for the fast paths.
pub const FAST_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolSpec {
    ConstantOne,
    /// Band types per factor: two per axis for `a`, three per axis for `b`.
    ProductSpecial { x: Vec<BandType>, y: Vec<BandType> },
    /// Values on the frequency grid: `N⁴` for `a` indexed `(ξ₁,η₁,ξ₂,η₂)`, `N⁶` for `b`
    /// indexed `(ξ₁,η₁,ξ₂,η₂,ξ₃,η₃)`, slots in DFT order, last index fastest.
    Tabulated { n: usize, bound: f64, values: Vec<f64> },
}

/// Which symbol slot a [`SymbolSpec`] fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolRole {
    A,
    B,
}

impl SymbolRole {
    fn arity(&self) -> usize {
        match self {
            Self::A => 2,
            Self::B => 3,
        }
    }
}

impl SymbolSpec {
    pub fn validate(&self, role: SymbolRole) -> Result<()> {
        match self {
            Self::ConstantOne => Ok(()),
            Self::ProductSpecial { x, y } => {
                for (axis, types) in [("x", x), ("y", y)] {
                    if types.len() != role.arity() {
                        return Err(Error::Config(format!(
                            "{role:?} symbol needs {} band types on {axis}, got {}",
                            role.arity(),
                            types.len()
                        )));
                    }
                    if !types.contains(&BandType::Psi) {
                        return Err(Error::Config(format!("{role:?} symbol on {axis} needs a psi-type factor")));
                    }
                }
                Ok(())
            }
            Self::Tabulated { n, bound, values } => {
                if *n > DIRECT_CAP {
                    return Err(Error::Cap(format!("tabulated symbols need N ≤ {DIRECT_CAP}, got {n}")));
                }
                let want = n.pow(2 * role.arity() as u32);
                if values.len() != want {
                    return Err(Error::Config(format!("tabulated symbol has {} values, expected {want}", values.len())));
                }
                if let Some(v) = values.iter().find(|v| !(v.abs() <= *bound)) {
                    return Err(Error::Config(format!("tabulated value {v} exceeds the bound {bound}")));
                }
                Ok(())
            }
        }
    }

    fn types(&self, axis: usize) -> Option<&[BandType]> {
        match self {
            Self::ProductSpecial { x, y } => Some(if axis == 0 { x } else { y }),
            _ => None,
        }
    }
}

/// Relative position of the `a` scale and the `b` scale that enters the sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    All,
    /// `k₁ < k₂ − gap` and `j₁ < j₂ − gap`.
    Separated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierOptions {
    /// Scale gap standing in for `k₁ ≪ k₂`; also the offset of φ-type windows in special symbols.
    pub gap: i32,
    pub regime: Regime,
}

impl Default for MultiplierOptions {
    fn default() -> Self {
        Self { gap: 3, regime: Regime::All }
    }
}

/// Band-indexed window tuples of one symbol along one axis.
struct AxisBands {
    bands: Vec<(Option<i32>, Vec<Vec<f64>>)>,
}

fn axis_bands(sym: &SymbolSpec, arity: usize, axis: usize, n: usize, gap: i32) -> Result<AxisBands> {
    match sym.types(axis) {
        None => Ok(AxisBands { bands: vec![(None, vec![vec![1.0; n]; arity])] }),
        Some(types) => {
            let top = top_band(n)?;
            let bands = (0..=top)
                .map(|k| {
                    let ws = types.iter().map(|t| window_values(n, |f| band_window(*t, k, gap, f))).collect();
                    (Some(k), ws)
                })
                .collect();
            Ok(AxisBands { bands })
        }
    }
}

fn admissible(k1: Option<i32>, k2: Option<i32>, opts: &MultiplierOptions) -> bool {
    match (opts.regime, k1, k2) {
        (Regime::Separated, Some(a), Some(b)) => a < b - opts.gap,
        _ => true,
    }
}

fn check_inputs(inputs: &ModelInputs<'_>) -> Result<usize> {
    let n = inputs.h.nx();
    if inputs.h.ny() != n {
        return Err(Error::GridMismatch("h must live on an N×N grid".into()));
    }
    for f in [inputs.f1, inputs.f2] {
        if f.grid != inputs.h.gx {
            return Err(Error::GridMismatch("f and h".into()));
        }
    }
    for g in [inputs.g1, inputs.g2] {
        if g.grid != inputs.h.gy {
            return Err(Error::GridMismatch("g and h".into()));
        }
    }
    top_band(n)?;
    Ok(n)
}

fn check_symbols(a: &SymbolSpec, b: &SymbolSpec, opts: &MultiplierOptions) -> Result<()> {
    a.validate(SymbolRole::A)?;
    b.validate(SymbolRole::B)?;
    if opts.regime == Regime::Separated
        && !(matches!(a, SymbolSpec::ProductSpecial { .. }) && matches!(b, SymbolSpec::ProductSpecial { .. }))
    {
        return Err(Error::Config("the separated regime needs product_special a and b".into()));
    }
    Ok(())
}

fn spectrum(f: &GridFunction1D) -> Vec<Complex64> {
    dft(&f.to_complex().values)
}

fn spectrum2(h: &GridFunction2D) -> Vec<Complex64> {
    dft2(&h.values.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>(), h.nx(), h.ny())
}

fn mul_into(acc: &mut [Complex64], a: &[Complex64], b: &[Complex64]) {
    for ((o, x), y) in acc.iter_mut().zip(a).zip(b) {
        *o += x * y;
    }
}

fn filter3(f: &[Complex64], a: &[f64], b: &[f64]) -> Vec<Complex64> {
    f.iter().zip(a).zip(b).map(|((c, x), y)| c * (x * y)).collect()
}

/// `Σ_{k₂} [Σ_{k₁} (f₁ * φ¹_{k₁} * φ¹_{k₂})(f₂ * φ²_{k₁} * φ²_{k₂})]`, one row per `b` band.
fn axis_products(
    f1: &GridFunction1D,
    f2: &GridFunction1D,
    a: &AxisBands,
    b: &AxisBands,
    opts: &MultiplierOptions,
) -> Vec<(Option<i32>, Vec<Complex64>)> {
    let n = f1.len();
    let (s1, s2) = (spectrum(f1), spectrum(f2));
    b.bands
        .iter()
        .map(|(k2, wb)| {
            let mut acc = vec![Complex64::default(); n];
            for (k1, wa) in &a.bands {
                if !admissible(*k1, *k2, opts) {
                    continue;
                }
                let u = idft(&filter3(&s1, &wa[0], &wb[0]));
                let v = idft(&filter3(&s2, &wa[1], &wb[1]));
                mul_into(&mut acc, &u, &v);
            }
            (*k2, acc)
        })
        .collect()
}

fn real_output(h: &GridFunction2D, values: &[Complex64]) -> Result<GridFunction2D> {
    GridFunction2D::new(h.gx, h.gy, values.iter().map(|c| c.re).collect())
}

/// `T_ab(f₁,f₂,g₁,g₂,h)`; tabulated symbols go through [`apply_multiplier_direct`].
pub fn apply_multiplier(
    a: &SymbolSpec,
    b: &SymbolSpec,
    opts: &MultiplierOptions,
    inputs: ModelInputs<'_>,
) -> Result<GridFunction2D> {
    check_symbols(a, b, opts)?;
    let n = check_inputs(&inputs)?;
    if matches!(a, SymbolSpec::Tabulated { .. }) || matches!(b, SymbolSpec::Tabulated { .. }) {
        return apply_multiplier_direct(a, b, opts, inputs);
    }
    if n > FAST_CAP {
        return Err(Error::Cap(format!("multiplier grids need N ≤ {FAST_CAP}, got {n}")));
    }
    let bands = |s: &SymbolSpec, ar, axis| axis_bands(s, ar, axis, n, opts.gap);
    let (ax, bx) = (bands(a, 2, 0)?, bands(b, 3, 0)?);
    let (ay, by) = (bands(a, 2, 1)?, bands(b, 3, 1)?);
    let px = axis_products(inputs.f1, inputs.f2, &ax, &bx, opts);
    let py = axis_products(inputs.g1, inputs.g2, &ay, &by, opts);
    let hs = spectrum2(inputs.h);
    let mut out = vec![Complex64::default(); n * n];
    for ((_, wx), (_, p)) in bx.bands.iter().zip(&px) {
        for ((_, wy), (_, q)) in by.bands.iter().zip(&py) {
            let mut hf = hs.clone();
            for iy in 0..n {
                for ix in 0..n {
                    hf[iy * n + ix] *= wx[2][ix] * wy[2][iy];
                }
            }
            let hk = idft2(&hf, n, n);
            for iy in 0..n {
                for ix in 0..n {
                    out[iy * n + ix] += p[ix] * q[iy] * hk[iy * n + ix];
                }
            }
        }
    }
    real_output(inputs.h, &out)
}

/// Joint symbol of one axis for separable (non-tabulated) `a`, `b`: an `N³` table over `(ξ₁,ξ₂,ξ₃)`.
fn axis_symbol_table(a: &AxisBands, b: &AxisBands, n: usize, opts: &MultiplierOptions) -> Vec<f64> {
    let mut t = vec![0.0; n * n * n];
    for (k1, wa) in &a.bands {
        for (k2, wb) in &b.bands {
            if !admissible(*k1, *k2, opts) {
                continue;
            }
            for x1 in 0..n {
                let u = wa[0][x1] * wb[0][x1];
                if u == 0.0 {
                    continue;
                }
                for x2 in 0..n {
                    let v = u * wa[1][x2] * wb[1][x2];
                    if v == 0.0 {
                        continue;
                    }
                    for x3 in 0..n {
                        t[(x1 * n + x2) * n + x3] += v * wb[2][x3];
                    }
                }
            }
        }
    }
    t
}

/// `T̂` by the sextuple frequency sum, each term deposited at `(ξ₁+ξ₂+ξ₃, η₁+η₂+η₃) mod N`.
pub fn multiplier_spectrum_direct(
    a: &SymbolSpec,
    b: &SymbolSpec,
    opts: &MultiplierOptions,
    inputs: ModelInputs<'_>,
) -> Result<Vec<Complex64>> {
    check_symbols(a, b, opts)?;
    let n = check_inputs(&inputs)?;
    if n > DIRECT_CAP {
        return Err(Error::Cap(format!("the direct sum needs N ≤ {DIRECT_CAP}, got {n}")));
    }
    for s in [a, b] {
        if let SymbolSpec::Tabulated { n: m, .. } = s {
            if *m != n {
                return Err(Error::GridMismatch(format!("tabulated symbol for N = {m} on N = {n}")));
            }
        }
    }
    let (f1, f2, g1, g2) = (spectrum(inputs.f1), spectrum(inputs.f2), spectrum(inputs.g1), spectrum(inputs.g2));
    let hs = spectrum2(inputs.h);
    let bands = |s: &SymbolSpec, ar, axis| axis_bands(s, ar, axis, n, opts.gap);
    // For tabulated symbols the separable tables of the other factor are still used.
    let table = |sa: &SymbolSpec, sb: &SymbolSpec, axis| -> Result<Vec<f64>> {
        let one = SymbolSpec::ConstantOne;
        let sa = if matches!(sa, SymbolSpec::Tabulated { .. }) { &one } else { sa };
        let sb = if matches!(sb, SymbolSpec::Tabulated { .. }) { &one } else { sb };
        Ok(axis_symbol_table(&bands(sa, 2, axis)?, &bands(sb, 3, axis)?, n, opts))
    };
    let tx = table(a, b, 0)?;
    let ty = table(a, b, 1)?;
    let ta = match a {
        SymbolSpec::Tabulated { values, .. } => Some(values),
        _ => None,
    };
    let tb = match b {
        SymbolSpec::Tabulated { values, .. } => Some(values),
        _ => None,
    };
    let mut out = vec![Complex64::default(); n * n];
    for x1 in 0..n {
        for y1 in 0..n {
            for x2 in 0..n {
                for y2 in 0..n {
                    let ia = ((x1 * n + y1) * n + x2) * n + y2;
                    let av = ta.map_or(1.0, |t| t[ia]);
                    let c12 = f1[x1] * f2[x2] * g1[y1] * g2[y2] * av;
                    if c12 == Complex64::default() {
                        continue;
                    }
                    for x3 in 0..n {
                        let sx = tx[(x1 * n + x2) * n + x3];
                        if sx == 0.0 {
                            continue;
                        }
                        for y3 in 0..n {
                            let sy = ty[(y1 * n + y2) * n + y3];
                            let bv = tb.map_or(1.0, |t| t[(ia * n + x3) * n + y3]);
                            let m = sx * sy * bv;
                            if m == 0.0 {
                                continue;
                            }
                            let kx = (x1 + x2 + x3) % n;
                            let ky = (y1 + y2 + y3) % n;
                            out[ky * n + kx] += c12 * hs[y3 * n + x3] * m;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Oracle for [`apply_multiplier`]: the sextuple sum followed by one inverse transform.
pub fn apply_multiplier_direct(
    a: &SymbolSpec,
    b: &SymbolSpec,
    opts: &MultiplierOptions,
    inputs: ModelInputs<'_>,
) -> Result<GridFunction2D> {
    let n = inputs.h.nx();
    let spec = multiplier_spectrum_direct(a, b, opts, inputs)?;
    real_output(inputs.h, &idft2(&spec, n, n))
}

/// Completion windows of one axis of the cascade.
struct Completion {
    /// `φ̃³_{k₁}` on `ξ₁+ξ₂`.
    inner: Vec<Vec<f64>>,
    /// `φ̃¹_{k₂}` on `ξ₁+ξ₂`.
    outer: Vec<Vec<f64>>,
    /// `ψ̃³_{k₂}` on the output frequency.
    output: Vec<Vec<f64>>,
}

fn completion(a_types: &[BandType], n: usize, gap: i32) -> Result<Completion> {
    let top = top_band(n)?;
    let psi_count = a_types.iter().filter(|t| **t == BandType::Psi).count();
    let p = |e: i32| (e as f64).exp2();
    let inner = (0..=top)
        .map(|k| {
            window_values(n, |z| if psi_count == 2 { ball(p(k + 2), z) } else { annulus(p(k - 2), p(k + 2), z) })
        })
        .collect();
    let outer = (0..=top).map(|k| window_values(n, |z| ball(p(k - gap + 1), z))).collect();
    let output = (0..=top).map(|k| window_values(n, |z| annulus(p(k - 2), p(k + 2), z))).collect();
    Ok(Completion { inner, outer, output })
}

/// `S_{k₂} = ((Σ_{k₁ < k₂−gap} (f₁ * φ¹_{k₁})(f₂ * φ²_{k₁}) * φ̃³_{k₁}) * φ̃¹_{k₂})`.
fn cascade_axis(
    f1: &GridFunction1D,
    f2: &GridFunction1D,
    a_types: &[BandType],
    comp: &Completion,
    gap: i32,
) -> Vec<Vec<Complex64>> {
    let n = f1.len();
    let top = comp.outer.len() as i32 - 1;
    let (s1, s2) = (spectrum(f1), spectrum(f2));
    let inner: Vec<Vec<Complex64>> = (0..=top)
        .map(|k1| {
            let w1 = window_values(n, |z| band_window(a_types[0], k1, gap, z));
            let w2 = window_values(n, |z| band_window(a_types[1], k1, gap, z));
            let mut prod = vec![Complex64::default(); n];
            mul_into(&mut prod, &idft(&filter(&s1, &w1)), &idft(&filter(&s2, &w2)));
            filter(&dft(&prod), &comp.inner[k1 as usize])
        })
        .collect();
    (0..=top)
        .map(|k2| {
            let mut acc = vec![Complex64::default(); n];
            for k1 in 0..k2 - gap {
                for (o, v) in acc.iter_mut().zip(&inner[k1 as usize]) {
                    *o += v;
                }
            }
            idft(&filter(&acc, &comp.outer[k2 as usize]))
        })
        .collect()
}

/// The convolution cascade for product-special symbols with `b` of types `(φ, φ, ψ)` on both axes,
/// summed over `k₁ < k₂ − gap`, `j₁ < j₂ − gap`.
pub fn special_symbol_cascade(
    a: &SymbolSpec,
    b: &SymbolSpec,
    gap: i32,
    inputs: ModelInputs<'_>,
) -> Result<GridFunction2D> {
    let opts = MultiplierOptions { gap, regime: Regime::Separated };
    check_symbols(a, b, &opts)?;
    let n = check_inputs(&inputs)?;
    if n > FAST_CAP {
        return Err(Error::Cap(format!("multiplier grids need N ≤ {FAST_CAP}, got {n}")));
    }
    if gap < 2 {
        return Err(Error::Separation(format!("gap {gap} < 2 leaves the completion windows short of 1")));
    }
    let want = [BandType::Phi, BandType::Phi, BandType::Psi];
    for axis in 0..2 {
        if b.types(axis) != Some(&want[..]) {
            return Err(Error::Config("the cascade needs b of types (phi, phi, psi) on both axes".into()));
        }
    }
    let (ax, ay) = (a.types(0).unwrap(), a.types(1).unwrap());
    let (cx, cy) = (completion(ax, n, gap)?, completion(ay, n, gap)?);
    let sx = cascade_axis(inputs.f1, inputs.f2, ax, &cx, gap);
    let sy = cascade_axis(inputs.g1, inputs.g2, ay, &cy, gap);
    let top = top_band(n)?;
    let hs = spectrum2(inputs.h);
    let mut total = vec![Complex64::default(); n * n];
    for k2 in 0..=top {
        if k2 - gap <= 0 {
            continue;
        }
        let wx = window_values(n, |z| band_window(BandType::Psi, k2, gap, z));
        for j2 in 0..=top {
            if j2 - gap <= 0 {
                continue;
            }
            let wy = window_values(n, |z| band_window(BandType::Psi, j2, gap, z));
            let mut hf = hs.clone();
            for iy in 0..n {
                for ix in 0..n {
                    hf[iy * n + ix] *= wx[ix] * wy[iy];
                }
            }
            let hk = idft2(&hf, n, n);
            let (p, q) = (&sx[k2 as usize], &sy[j2 as usize]);
            let prod: Vec<Complex64> = (0..n * n).map(|i| p[i % n] * q[i / n] * hk[i]).collect();
            let mut ps = dft2(&prod, n, n);
            let (ox, oy) = (&cx.output[k2 as usize], &cy.output[j2 as usize]);
            for iy in 0..n {
                for ix in 0..n {
                    ps[iy * n + ix] *= ox[ix] * oy[iy];
                }
            }
            for (t, v) in total.iter_mut().zip(&ps) {
                *t += v;
            }
        }
    }
    real_output(inputs.h, &idft2(&total, n, n))
}

/// Derivative orders `(α₁, α₂, β₁, β₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeibnizOrders {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl LeibnizOrders {
    pub fn uniform(v: f64) -> Self {
        Self { alpha1: v, alpha2: v, beta1: v, beta2: v }
    }

    fn validate(&self) -> Result<()> {
        for v in [self.alpha1, self.alpha2, self.beta1, self.beta2] {
            check_order(v)?;
        }
        Ok(())
    }

    /// `α₁ + β₁ + α₂ + β₂`.
    pub fn total(&self) -> f64 {
        self.alpha1 + self.alpha2 + self.beta1 + self.beta2
    }
}

/// Where the derivatives fall in one right-hand term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermShape {
    /// `f₁` (0) or `f₂` (1) carries `D^{α₁}`.
    pub f_alpha: usize,
    /// `D₁^{β₁}` hits `h` rather than the `f` carrying `D^{α₁}`.
    pub beta1_on_h: bool,
    pub g_alpha: usize,
    pub beta2_on_h: bool,
}

impl TermShape {
    /// The sixteen shapes in a fixed order.
    pub fn all() -> Vec<Self> {
        let mut v = Vec::with_capacity(16);
        for f_alpha in 0..2 {
            for beta1_on_h in [false, true] {
                for g_alpha in 0..2 {
                    for beta2_on_h in [false, true] {
                        v.push(Self { f_alpha, beta1_on_h, g_alpha, beta2_on_h });
                    }
                }
            }
        }
        v
    }

    pub fn label(&self) -> String {
        format!(
            "f{}{}g{}{}",
            self.f_alpha + 1,
            if self.beta1_on_h { "h" } else { "" },
            self.g_alpha + 1,
            if self.beta2_on_h { "h" } else { "" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeibnizTerm {
    pub shape: TermShape,
    pub exponents: ExponentTuple,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeibnizReport {
    pub orders: LeibnizOrders,
    pub r: f64,
    pub lhs: f64,
    pub terms: Vec<LeibnizTerm>,
    pub rhs: f64,
    /// `lhs/rhs`, 0 when both vanish.
    pub ratio: f64,
}

impl LeibnizReport {
    pub const CSV_HEADER: &'static str = "alpha1,alpha2,beta1,beta2,N,gap,seed,lhs,rhs,ratio";

    pub fn csv_row(&self, n: usize, gap: i32, seed: u64) -> String {
        let o = &self.orders;
        format!(
            "{},{},{},{},{n},{gap},{seed},{:e},{:e},{:e}",
            o.alpha1, o.alpha2, o.beta1, o.beta2, self.lhs, self.rhs, self.ratio
        )
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// `‖D₁^{β₁}D₂^{β₂}(D₁^{α₁}D₂^{α₂}(f₁f₂g₁g₂)·h)‖_r` against the sixteen right-hand terms.
/// `exponents` holds one tuple for all terms or one per [`TermShape::all`] entry; all share `r`.
pub fn leibniz_check(
    orders: LeibnizOrders,
    exponents: &[ExponentTuple],
    inputs: ModelInputs<'_>,
) -> Result<LeibnizReport> {
    orders.validate()?;
    check_inputs(&inputs)?;
    let shapes = TermShape::all();
    let tuples: Vec<ExponentTuple> = match exponents.len() {
        1 => vec![exponents[0]; 16],
        16 => exponents.to_vec(),
        n => return Err(Error::Config(format!("need 1 or 16 exponent tuples, got {n}"))),
    };
    for t in &tuples {
        t.validate()?;
    }
    let r = tuples[0].r();
    if tuples.iter().any(|t| (t.inv_r() - tuples[0].inv_r()).abs() > EXPONENT_TOL) {
        return Err(Error::Config("all terms must share the same r".into()));
    }
    let d = fractional_derivative;
    let prod = |a: &GridFunction1D, b: &GridFunction1D| a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
    let fx = GridFunction1D::new(inputs.f1.grid, prod(inputs.f1, inputs.f2))?;
    let gy = GridFunction1D::new(inputs.g1.grid, prod(inputs.g1, inputs.g2))?;
    let inner = GridFunction2D::tensor(&d(&fx, orders.alpha1)?, &d(&gy, orders.alpha2)?);
    let weighted = GridFunction2D::new(
        inner.gx,
        inner.gy,
        inner.values.iter().zip(&inputs.h.values).map(|(a, b)| a * b).collect(),
    )?;
    let outer = fractional_derivative_2d(&weighted, orders.beta1, orders.beta2)?;
    let lhs = lp_norm(&outer.values, r, outer.cell_area());

    let fs = [inputs.f1, inputs.f2];
    let gs = [inputs.g1, inputs.g2];
    let mut terms = Vec::with_capacity(16);
    for (shape, t) in shapes.into_iter().zip(tuples) {
        let xa = orders.alpha1 + if shape.beta1_on_h { 0.0 } else { orders.beta1 };
        let ya = orders.alpha2 + if shape.beta2_on_h { 0.0 } else { orders.beta2 };
        let fd = d(fs[shape.f_alpha], xa)?;
        let gd = d(gs[shape.g_alpha], ya)?;
        let f_norms = if shape.f_alpha == 0 {
            fd.lp_norm(t.p1) * fs[1].lp_norm(t.q1)
        } else {
            fs[0].lp_norm(t.p1) * fd.lp_norm(t.q1)
        };
        let g_norms = if shape.g_alpha == 0 {
            gd.lp_norm(t.p2) * gs[1].lp_norm(t.q2)
        } else {
            gs[0].lp_norm(t.p2) * gd.lp_norm(t.q2)
        };
        let hd = fractional_derivative_2d(
            inputs.h,
            if shape.beta1_on_h { orders.beta1 } else { 0.0 },
            if shape.beta2_on_h { orders.beta2 } else { 0.0 },
        )?;
        let value = f_norms * g_norms * hd.lp_norm(t.s);
        terms.push(LeibnizTerm { shape, exponents: t, value });
    }
    let rhs = pairwise_sum(&terms.iter().map(|t| t.value).collect::<Vec<_>>());
    Ok(LeibnizReport { orders, r, lhs, terms, rhs, ratio: ratio(lhs, rhs) })
}

/// `‖f₁f₂g₁g₂h‖_r` and `‖f₁‖_{p₁}‖f₂‖_{q₁}‖g₁‖_{p₂}‖g₂‖_{q₂}‖h‖_s`.
pub fn holder_check(exponents: &ExponentTuple, inputs: ModelInputs<'_>) -> Result<(f64, f64)> {
    exponents.validate()?;
    check_inputs(&inputs)?;
    let n = inputs.h.nx();
    let vals: Vec<f64> = (0..n * n)
        .map(|i| {
            let (ix, iy) = (i % n, i / n);
            inputs.f1.values[ix] * inputs.f2.values[ix] * inputs.g1.values[iy] * inputs.g2.values[iy] * inputs.h.values[i]
        })
        .collect();
    let lhs = lp_norm(&vals, exponents.r(), inputs.h.cell_area());
    let t = exponents;
    let rhs = inputs.f1.lp_norm(t.p1)
        * inputs.f2.lp_norm(t.q1)
        * inputs.g1.lp_norm(t.p2)
        * inputs.g2.lp_norm(t.q2)
        * inputs.h.lp_norm(t.s);
    Ok((lhs, rhs))
}

/// Fitted `log₂` slopes of the left side and of every right-hand term against `log₂ λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationReport {
    /// `α₁ + β₁ + α₂ + β₂ − 2/r`.
    pub predicted: f64,
    pub lhs_slope: f64,
    pub term_slopes: Vec<f64>,
}

impl DilationReport {
    pub fn max_error(&self) -> f64 {
        self.term_slopes
            .iter()
            .chain(std::iter::once(&self.lhs_slope))
            .fold(0.0f64, |m, s| m.max((s - self.predicted).abs()))
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn dilate_1d(f: &GridFunction1D, j: i32) -> Result<GridFunction1D> {
    GridFunction1D::new(Grid1D::new(f.grid.box_exp - j, f.grid.res_exp + j)?, f.values.clone())
}

/// Reinterprets the samples on the box shrunk by `λ = 2^j` (`f(x) → f(λx)`) for each `j` and fits slopes.
pub fn leibniz_dilation(
    orders: LeibnizOrders,
    exponents: &[ExponentTuple],
    inputs: ModelInputs<'_>,
    js: &[i32],
) -> Result<DilationReport> {
    if js.len() < 2 {
        return Err(Error::Config("a slope needs at least two dilations".into()));
    }
    let mut lhs = Vec::new();
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); 16];
    let mut r = 0.0;
    for &j in js {
        let (f1, f2) = (dilate_1d(inputs.f1, j)?, dilate_1d(inputs.f2, j)?);
        let (g1, g2) = (dilate_1d(inputs.g1, j)?, dilate_1d(inputs.g2, j)?);
        let h = GridFunction2D::new(f1.grid, g1.grid, inputs.h.values.clone())?;
        let rep = leibniz_check(orders, exponents, ModelInputs { f1: &f1, f2: &f2, g1: &g1, g2: &g2, h: &h })?;
        r = rep.r;
        lhs.push(rep.lhs);
        for (t, v) in terms.iter_mut().zip(&rep.terms) {
            t.push(v.value);
        }
    }
    let logs = |v: &[f64]| -> Result<Vec<f64>> {
        v.iter()
            .map(|x| {
                if *x > 0.0 && x.is_finite() {
                    Ok(x.log2())
                } else {
                    Err(Error::Precondition(format!("dilation sweep needs positive finite values, got {x}")))
                }
            })
            .collect()
    };
    let xs: Vec<f64> = js.iter().map(|j| *j as f64).collect();
    Ok(DilationReport {
        predicted: orders.total() - 2.0 / r,
        lhs_slope: slope(&xs, &logs(&lhs)?),
        term_slopes: terms.iter().map(|t| Ok(slope(&xs, &logs(t)?))).collect::<Result<_>>()?,
    })
}
