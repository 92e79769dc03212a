//! Seeded trials of the exact invariants, shared by the `invariants` suite and the test suites.
//!
//! Every trial takes `(master, trial)` and draws from [`trial_rng`], so trials can run in any
//! order and still reproduce.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::dyadic::{enumerate_dyadic, DyadicInterval, DyadicRectangle};
use crate::error::Result;
use crate::grid::{CellCounter, Grid1D, GridFunction1D, GridFunction2D};
use crate::maximal::{hybrid_2d, maximal_function, AxisCollections, HybridKind, ScaleWindow};
use crate::model::{
    energy_localization_check, level_set_u, model_operator, oracle_model_operator, BilinearBlockSpec, BlockVariant,
    ModelInputs, ModelKind, ModelOperatorSpec,
};
use crate::multiplier::{
    apply_multiplier, fractional_derivative_complex, leibniz_dilation, lp_project, special_symbol_cascade, top_band,
    BandType, ExponentTuple, LeibnizOrders, MultiplierOptions, Regime, SymbolSpec,
};
use crate::rng::trial_rng;
use crate::size_energy::{stopping_time_maximal, stopping_time_normalized};
use crate::stopping::{
    level_set_decomposition_1d, pointwise_claim_check, sparsity_check_1d, sparsity_check_2d, sparsity_pairs_1d, Fraction,
};
use crate::wavelets::{haar_eval, CoefficientSequence, CutoffFamily, HaarPyramid};

/// Pass/fail tally of one check over many trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckSummary {
    /// A trial fails when its error exceeds `tolerance` or is not a number.
    pub fn from_errors(name: &str, tolerance: f64, errors: &[f64]) -> Self {
        Self {
            name: name.to_string(),
            trials: errors.len(),
            failures: errors.iter().filter(|e| !(**e <= tolerance)).count(),
            max_error: errors.iter().copied().fold(0.0, f64::max),
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: trials={} failures={} max_error={:e} tolerance={:e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.failures,
            self.max_error,
            self.tolerance
        )
    }
}

fn random_1d(g: Grid1D, rng: &mut impl Rng) -> GridFunction1D {
    GridFunction1D::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_2d(gx: Grid1D, gy: Grid1D, rng: &mut impl Rng) -> GridFunction2D {
    GridFunction2D::new(gx, gy, (0..gx.len() * gy.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Five inputs with independent uniform `(−1, 1)` samples in every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseInputs {
    pub f1: GridFunction1D,
    pub f2: GridFunction1D,
    pub g1: GridFunction1D,
    pub g2: GridFunction1D,
    pub h: GridFunction2D,
}

impl NoiseInputs {
    pub fn new(g: Grid1D, rng: &mut impl Rng) -> Self {
        Self {
            f1: random_1d(g, rng),
            f2: random_1d(g, rng),
            g1: random_1d(g, rng),
            g2: random_1d(g, rng),
            h: random_2d(g, g, rng),
        }
    }

    pub fn inputs(&self) -> ModelInputs<'_> {
        ModelInputs { f1: &self.f1, f2: &self.f2, g1: &self.g1, g2: &self.g2, h: &self.h }
    }
}

/// One sparsity instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityTrial {
    /// `|F|`, the weight of the decomposition.
    pub weight: f64,
    pub levels: usize,
    /// Pairs `(J₀, n₂)` inspected by the one-dimensional check.
    pub pairs: usize,
    pub violations_1d: usize,
    /// Intervals breaking the pointwise lower bound on `Mf` (reported, not counted).
    pub pointwise: usize,
    pub lhs_2d: f64,
    pub rhs_2d: f64,
}

impl SparsityTrial {
    /// Number of broken inequalities.
    pub fn error(&self) -> f64 {
        self.violations_1d as f64 + if self.lhs_2d <= 10.0 * self.rhs_2d { 0.0 } else { 1.0 }
    }
}

/// One to four dyadic blocks with amplitudes in `(0, 1]`; block scales lie within a random number of
/// levels above the cell scale. Half the draws stay within two levels of the cells, which gives
/// `Mf` a ladder of more than ten levels.
pub fn multiscale_blocks(grid: Grid1D, rng: &mut impl Rng) -> Result<GridFunction1D> {
    let top = grid.box_exp - grid.cell_scale();
    let spread = if rng.random_bool(0.5) { rng.random_range(0..top.min(3)) } else { rng.random_range(0..top) };
    let mut f = GridFunction1D::zeros(grid);
    for _ in 0..rng.random_range(1..=4) {
        let k = grid.cell_scale() + rng.random_range(0..=spread);
        let iv = DyadicInterval::new(k, rng.random_range(0..1i64 << (grid.box_exp - k)));
        let a = 1.0 - rng.random_range(0.0..1.0);
        f.values[grid.cell_range(&iv)?].iter_mut().for_each(|v| *v = a);
    }
    Ok(f)
}

/// Decomposes a nonnegative [`multiscale_blocks`] function over every dyadic interval of the grid and runs both
/// sparsity checks; the 2D check uses 256 random rectangles with `J` from the collection.
pub fn sparsity_trial(grid: Grid1D, constant: f64, master: u64, trial: u64) -> Result<SparsityTrial> {
    let mut rng = trial_rng(master, trial);
    let f = multiscale_blocks(grid, &mut rng)?;
    let weight = f.support_measure();
    let coll = enumerate_dyadic(grid.box_exp, grid.cell_scale(), grid.box_exp);
    let d = level_set_decomposition_1d(&coll, &f, weight, constant, Fraction::TENTH)?;
    let violations_1d = sparsity_check_1d(&d).len();
    let pairs = sparsity_pairs_1d(&d, 10).len();
    let pointwise = pointwise_claim_check(&d, -7)?.len();
    let rects: Vec<DyadicRectangle> = (0..256)
        .map(|_| {
            let k = rng.random_range(grid.cell_scale()..=grid.box_exp);
            let x = DyadicInterval::new(k, rng.random_range(0..1i64 << (grid.box_exp - k)));
            DyadicRectangle::new(x, coll[rng.random_range(0..coll.len())])
        })
        .collect();
    let (lhs_2d, rhs_2d) = sparsity_check_2d(&rects, &d, grid)?;
    Ok(SparsityTrial { weight, levels: d.levels.len(), pairs, violations_1d, pointwise, lhs_2d, rhs_2d })
}

/// Random sequence on the pyramid of depth `depth` under `[0, 1)`: 90% of entries uniform in `(−1, 1)`.
pub fn random_sequence(master: u64, trial: u64, depth: i32) -> (CoefficientSequence, Vec<DyadicInterval>) {
    let coll = enumerate_dyadic(0, -depth, 0);
    let mut rng = trial_rng(master, trial);
    let mut seq = CoefficientSequence::new(coll.iter().copied());
    for iv in &coll {
        if rng.random_bool(0.9) {
            seq.set(*iv, rng.random_range(-1.0..1.0)).unwrap();
        }
    }
    (seq, coll)
}

/// Constants `C₁` exercised by [`stopping_trial`].
pub const STOPPING_CONSTANTS: [f64; 4] = [1.0, 2.0, 4.0, 1024.0];

/// Structure, size sandwich and top-mass bound of both stopping times, lacunary and not, for every
/// constant in [`STOPPING_CONSTANTS`]. Returns the number of failed verifications.
pub fn stopping_trial(master: u64, trial: u64, depth: i32) -> Result<f64> {
    let (seq, coll) = random_sequence(master, trial, depth);
    let mut bad = 0;
    for lac in [false, true] {
        for c1 in STOPPING_CONSTANTS {
            let d = stopping_time_maximal(&seq, &coll, lac, c1)?;
            bad += d.verify_structure(&coll).is_err() as usize;
            bad += d.verify_size_sandwich(&seq, &coll).is_err() as usize;
            let n = stopping_time_normalized(&seq, &coll, lac, c1)?;
            bad += n.verify_structure(&coll).is_err() as usize;
            bad += n.verify_size_sandwich(&seq, &coll).is_err() as usize;
            bad += n.mass_violations().len();
        }
    }
    Ok(bad as f64)
}

/// Localization identity (lacunary third family) and inequality (non-lacunary) on 63 intervals of
/// `[0, 1)` with 64 cells. `U` is the first level set `{Mv₁ ≤ 2^n, Mv₂ ≤ 2^n}`, `n ≥ −1`, that is not
/// empty. Returns the number of violating intervals.
pub fn localization_trial(master: u64, trial: u64) -> Result<f64> {
    let g = Grid1D::new(0, 6)?;
    let coll = enumerate_dyadic(0, -5, 0);
    let mut rng = trial_rng(master, trial);
    let (v1, v2) = (random_1d(g, &mut rng), random_1d(g, &mut rng));
    let mut n = -1;
    let u = loop {
        let u = level_set_u(&v1, &v2, n, n, 1.0, [1.0, 1.0])?;
        if u.iter().any(|b| *b) {
            break u;
        }
        n += 1;
    };
    let counter = CellCounter::new(g, &u);
    let outer: Vec<DyadicInterval> = coll.iter().copied().filter(|p| counter.count(p).unwrap_or(0) > 0).collect();
    let first_lac = rng.random_bool(0.5);
    let mut bad = 0;
    for fams in [
        [CutoffFamily::haar(first_lac), CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_LAC],
        [CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_NONLAC],
    ] {
        let block = BilinearBlockSpec::new(coll.clone(), fams, BlockVariant::Local(coll[0]))?;
        bad += energy_localization_check(&block, &v1, &v2, &u, &outer)?.len();
    }
    Ok(bad as f64)
}

/// A random spec over intervals of `[0, 1)` down to scale `−3`: at most 8 × 8 rectangles, 12 inner
/// intervals per axis, random scale offsets and non-lacunary slots.
pub fn random_small_spec(model: ModelKind, haar: bool, rng: &mut impl Rng) -> ModelOperatorSpec {
    let all = enumerate_dyadic(0, -3, 0);
    let mut pick = |n: usize| -> Vec<DyadicInterval> {
        let mut v: Vec<DyadicInterval> = all.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
        v.truncate(n);
        if v.is_empty() {
            v.push(all[0]);
        }
        v
    };
    let (xs, ys) = (pick(8), pick(8));
    let mut spec = ModelOperatorSpec::haar_product(model, &xs, &ys);
    spec.inner_x = pick(12);
    spec.inner_y = pick(12);
    spec.haar = haar;
    spec.sharp1 = rng.random_range(0..3);
    spec.sharp2 = rng.random_range(0..3);
    let mut slot = || match rng.random_range(0..4) {
        3 => None,
        s => Some(s),
    };
    spec.inner_x_nonlac = slot();
    spec.inner_y_nonlac = slot();
    spec.para_nonlac = slot();
    spec
}

/// One oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrial {
    pub model: ModelKind,
    pub haar: bool,
    pub rectangles: usize,
    pub deviation: f64,
}

/// Fast model operator against the nested-loop oracle; trials cycle through the five models, then
/// alternate Haar and smooth families.
pub fn oracle_trial(grid: Grid1D, master: u64, trial: u64) -> Result<OracleTrial> {
    let mut rng = trial_rng(master, trial);
    let model = ModelKind::ALL[trial as usize % 5];
    let haar = (trial / 5) % 2 == 0;
    let spec = random_small_spec(model, haar, &mut rng);
    let five = NoiseInputs::new(grid, &mut rng);
    let fast = model_operator(&spec, five.inputs())?;
    let slow = oracle_model_operator(&spec, five.inputs())?;
    Ok(OracleTrial { model, haar, rectangles: spec.rectangles.len(), deviation: fast.max_abs_diff(&slow)? })
}

/// Errors of the three transform checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformErrors {
    /// Haar pyramid against full-grid quadrature, every interval and both families.
    pub pyramid: f64,
    /// `f − mean − Σ_k Δ_k f`.
    pub partition: f64,
    /// `D^α e_k − |k/L|^α e_k`, relative to `max(1, ‖D^α‖)` on the grid.
    pub eigen: f64,
}

pub fn transforms_trial(grid: Grid1D, master: u64, trial: u64) -> Result<TransformErrors> {
    let mut rng = trial_rng(master, trial);
    let f = random_1d(grid, &mut rng);
    let w = grid.cell_width();
    let pyr = HaarPyramid::new(&f);
    let mut pyramid: f64 = 0.0;
    for iv in enumerate_dyadic(grid.box_exp, grid.cell_scale(), grid.box_exp) {
        for lac in [false, true] {
            if lac && iv.scale == grid.cell_scale() {
                continue;
            }
            let quad: f64 = grid.cell_range(&iv)?.map(|i| f.values[i] * haar_eval(&iv, lac, grid.point(i))).sum::<f64>() * w;
            pyramid = pyramid.max((pyr.coefficient(&iv, lac)? - quad).abs());
        }
    }

    let mean = f.integral() / grid.length();
    let mut sum = GridFunction1D::from_fn(grid, |_| mean);
    for k in 0..=top_band(grid.len())? {
        sum = sum.add(&lp_project(&f, k, BandType::Psi)?)?;
    }
    let partition = sum.values.iter().zip(&f.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let half = grid.len() as i64 / 2;
    let k = rng.random_range(-half + 1..=half);
    let alpha = rng.random_range(0.0..3.0);
    let l = grid.length();
    let mode = GridFunction1D::from_fn(grid, |x| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x / l));
    let d = fractional_derivative_complex(&mode, alpha)?;
    let c = (k.abs() as f64 / l).powf(alpha);
    // roundoff in the other bins is amplified by the largest symbol value
    let norm = (half as f64 / l).powf(alpha).max(1.0);
    let eigen = d.values.iter().zip(&mode.values).fold(0.0f64, |m, (a, b)| m.max((a - b * c).norm())) / norm;
    Ok(TransformErrors { pyramid, partition, eigen })
}

/// Errors of the hybrid-operator checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridErrors {
    /// `‖SS_H h‖₂ − ‖h‖₂` (Bessel allows at most 0).
    pub bessel_excess: f64,
    /// Cells where `|f| ≤ |g|` but `Mf > Mg`.
    pub monotone: usize,
    /// Cells where `M(f + g) > Mf + Mg`.
    pub sublinear: usize,
}

pub fn hybrid_trial(grid: Grid1D, master: u64, trial: u64) -> Result<HybridErrors> {
    let mut rng = trial_rng(master, trial);
    let h = random_2d(grid, grid, &mut rng);
    let haar = (CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_LAC);
    let ss = hybrid_2d(&h, HybridKind::SsH, &AxisCollections::lacunary_pyramids(grid, grid), haar)?;
    let bessel_excess = ss.lp_norm(2.0) - h.lp_norm(2.0);

    // multiples of 1/64 keep every dyadic average exact
    let eighths = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(-8i32..=8) as f64 / 8.0;
    let g = GridFunction1D::new(grid, (0..grid.len()).map(|_| eighths(&mut rng)).collect())?;
    let f = GridFunction1D::new(grid, g.values.iter().map(|v| v * eighths(&mut rng).abs()).collect())?;
    let e = GridFunction1D::new(grid, (0..grid.len()).map(|_| eighths(&mut rng)).collect())?;
    let m = |v: &GridFunction1D| maximal_function(v, ScaleWindow::full(grid));
    let (mf, mg, me) = (m(&f)?, m(&g)?, m(&e)?);
    let mfe = m(&f.add(&e)?)?;
    let monotone = mf.values.iter().zip(&mg.values).filter(|(a, b)| a > b).count();
    let sublinear = (0..grid.len()).filter(|i| mfe.values[*i] > mf.values[*i] + me.values[*i]).count();
    Ok(HybridErrors { bessel_excess, monotone, sublinear })
}

/// `T_ab` with `a = b = 1` against the pointwise product `f₁f₂g₁g₂h` on `[0, 1)²` with `2^m` cells per side.
pub fn constant_multiplier_trial(res_exp: i32, master: u64, trial: u64) -> Result<f64> {
    let g = Grid1D::new(0, res_exp)?;
    let five = NoiseInputs::new(g, &mut trial_rng(master, trial));
    let one = SymbolSpec::ConstantOne;
    let t = apply_multiplier(&one, &one, &MultiplierOptions::default(), five.inputs())?;
    let n = g.len();
    let mut err: f64 = 0.0;
    for i in 0..n * n {
        let (ix, iy) = (i % n, i / n);
        let want = five.f1.values[ix] * five.f2.values[ix] * five.g1.values[iy] * five.g2.values[iy] * five.h.values[i];
        err = err.max((t.values[i] - want).abs());
    }
    Ok(err)
}

/// `a` of types `(ψ, φ) ⊗ (ψ, ψ)`, the first product-special symbol of the cascade.
pub fn cascade_symbol_a() -> SymbolSpec {
    SymbolSpec::ProductSpecial { x: vec![BandType::Psi, BandType::Phi], y: vec![BandType::Psi, BandType::Psi] }
}

/// `b` of types `(φ, φ, ψ)` on both axes.
pub fn cascade_symbol_b() -> SymbolSpec {
    let t = vec![BandType::Phi, BandType::Phi, BandType::Psi];
    SymbolSpec::ProductSpecial { x: t.clone(), y: t }
}

/// Convolution cascade against the spectral multiplier on `N = 32`, for gaps 2 and 3.
pub fn cascade_trial(master: u64, trial: u64) -> Result<f64> {
    let g = Grid1D::new(0, 5)?;
    let five = NoiseInputs::new(g, &mut trial_rng(master, trial));
    let (a, b) = (cascade_symbol_a(), cascade_symbol_b());
    let mut err: f64 = 0.0;
    for gap in [2, 3] {
        let c = special_symbol_cascade(&a, &b, gap, five.inputs())?;
        let m = apply_multiplier(&a, &b, &MultiplierOptions { gap, regime: Regime::Separated }, five.inputs())?;
        err = err.max(c.max_abs_diff(&m)?);
    }
    Ok(err)
}

/// Largest slope error of the Leibniz dilation sweep `λ = 1, 2, 4` at `α₁ = α₂ = β₁ = β₂ = order`.
pub fn homogeneity_trial(grid: Grid1D, exponents: &ExponentTuple, order: f64, master: u64, trial: u64) -> Result<f64> {
    let five = NoiseInputs::new(grid, &mut trial_rng(master, trial));
    Ok(leibniz_dilation(LeibnizOrders::uniform(order), &[*exponents], five.inputs(), &[0, 1, 2])?.max_error())
}

fn summarize<T: Send>(
    trials: usize,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..trials as u64).into_par_iter().map(f).collect()
}

/// Every exact check, `trials` seeded trials each. Sparsity, transforms and hybrid checks run on
/// `grid`; the rest use their own small fixed grids.
pub fn invariant_suite(grid: Grid1D, constant: f64, exponents: &ExponentTuple, trials: usize, seed: u64) -> Result<Vec<CheckSummary>> {
    let mut out = Vec::new();
    let sp = summarize(trials, |t| sparsity_trial(grid, constant, seed, t))?;
    out.push(CheckSummary::from_errors("sparsity", 0.0, &sp.iter().map(SparsityTrial::error).collect::<Vec<_>>()));
    let st = summarize(trials, |t| stopping_trial(seed, t, 5))?;
    out.push(CheckSummary::from_errors("stopping_time", 0.0, &st));
    let lo = summarize(trials, |t| localization_trial(seed, t))?;
    out.push(CheckSummary::from_errors("localization", 0.0, &lo));
    let oracle_grid = Grid1D::new(0, 4)?;
    let or = summarize(trials, |t| oracle_trial(oracle_grid, seed, t))?;
    out.push(CheckSummary::from_errors("oracle", 1e-12, &or.iter().map(|o| o.deviation).collect::<Vec<_>>()));
    let tr = summarize(trials, |t| transforms_trial(grid, seed, t))?;
    out.push(CheckSummary::from_errors("haar_pyramid", 1e-12, &tr.iter().map(|t| t.pyramid).collect::<Vec<_>>()));
    out.push(CheckSummary::from_errors("lp_partition", 1e-10, &tr.iter().map(|t| t.partition).collect::<Vec<_>>()));
    out.push(CheckSummary::from_errors("derivative_eigen", 1e-12, &tr.iter().map(|t| t.eigen).collect::<Vec<_>>()));
    let hy = summarize(trials, |t| hybrid_trial(grid, seed, t))?;
    out.push(CheckSummary::from_errors("bessel", 1e-9, &hy.iter().map(|h| h.bessel_excess).collect::<Vec<_>>()));
    out.push(CheckSummary::from_errors(
        "maximal_order",
        0.0,
        &hy.iter().map(|h| (h.monotone + h.sublinear) as f64).collect::<Vec<_>>(),
    ));
    let mut cm = Vec::new();
    for m in [4, 5] {
        cm.extend(summarize(trials, |t| constant_multiplier_trial(m, seed, t))?);
    }
    out.push(CheckSummary::from_errors("constant_multiplier", 1e-10, &cm));
    let ca = summarize(trials, |t| cascade_trial(seed, t))?;
    out.push(CheckSummary::from_errors("cascade", 1e-9, &ca));
    let mut ho = Vec::new();
    for v in [0.0, 1.0] {
        ho.extend(summarize(trials, |t| homogeneity_trial(grid, exponents, v, seed, t))?);
    }
    out.push(CheckSummary::from_errors("homogeneity", 1e-8, &ho));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_counts_nan_as_failure() {
        let s = CheckSummary::from_errors("x", 1e-3, &[0.0, 2e-3, f64::NAN]);
        assert_eq!(s.failures, 2);
        assert_eq!(s.max_error, 2e-3);
        assert!(s.line().starts_with("FAIL x: trials=3"));
        assert!(!CheckSummary::from_errors("y", 0.0, &[]).passed());
    }

    #[test]
    fn small_suite_passes() {
        let g = Grid1D::new(0, 5).unwrap();
        let t = ExponentTuple::new(4.0 / 3.0, 4.0, 4.0, 4.0 / 3.0, 1.5).unwrap();
        let s = invariant_suite(g, 1.0, &t, 3, 11).unwrap();
        for c in &s {
            assert!(c.passed(), "{}", c.line());
        }
        assert_eq!(s, invariant_suite(g, 1.0, &t, 3, 11).unwrap());
    }

    #[test]
    fn sparsity_trial_is_reproducible() {
        let g = Grid1D::new(2, 6).unwrap();
        let a = sparsity_trial(g, 1.0, 4, 2).unwrap();
        assert_eq!(a, sparsity_trial(g, 1.0, 4, 2).unwrap());
        assert_eq!(a.error(), 0.0);
        assert!(a.rhs_2d > 0.0 && a.lhs_2d >= a.rhs_2d);
    }

    #[test]
    fn sparsity_trials_reach_gap_ten_pairs() {
        let g = Grid1D::new(4, 10).unwrap();
        let trials: Vec<_> = (0..16).map(|t| sparsity_trial(g, 1024.0, 11, t).unwrap()).collect();
        assert!(trials.iter().any(|t| t.pairs > 0));
        assert!(trials.iter().all(|t| t.error() == 0.0));
    }
}
