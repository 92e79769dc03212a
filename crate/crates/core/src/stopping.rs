//! Level-set stopping times, exceptional sets and the sparsity verifiers.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dyadic::{pow2, union_area_cells, DyadicInterval, DyadicRectangle};
use crate::error::{Error, Result};
use crate::grid::{CellCounter, Grid1D, GridFunction1D, GridFunction2D};
use crate::maximal::{hybrid_2d, maximal_exceeds, maximal_function, AxisCollections, HybridKind, ScaleWindow};
use crate::size_energy::{stopping_time_with_norm, strict_level, TreeDecomposition};
use crate::wavelets::CoefficientSequence;

/// Bucket index; `Bottom` collects intervals that qualify at no level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Bottom,
    At(i32),
}

impl Level {
    pub fn value(&self) -> Option<i32> {
        match self {
            Level::Bottom => None,
            Level::At(k) => Some(*k),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Bottom => write!(f, "bottom"),
            Level::At(k) => write!(f, "{k}"),
        }
    }
}

/// `a + b < 0` with `Bottom` read as `-∞`.
fn sum_negative(a: Level, b: Level) -> bool {
    match (a, b) {
        (Level::At(x), Level::At(y)) => x + y < 0,
        _ => true,
    }
}

/// The fraction `num/den` in "`|I ∩ Ω| > (num/den)|I|`".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub const TENTH: Self = Self { num: 1, den: 10 };
    pub const HUNDREDTH: Self = Self { num: 1, den: 100 };

    /// `count/total > num/den`, in integers.
    pub fn exceeds(&self, count: u64, total: u64) -> bool {
        self.den * count > self.num * total
    }

    /// Smallest count that exceeds the fraction of `total`.
    fn quota(&self, total: u64) -> u64 {
        self.num * total / self.den + 1
    }
}

/// `q`-th largest entry (1-based), or 0 when `q` exceeds the length.
fn qth_largest(mut v: Vec<f64>, q: u64) -> f64 {
    let q = q as usize;
    if q == 0 || q > v.len() {
        return 0.0;
    }
    let idx = v.len() - q;
    let (_, x, _) = v.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *x
}

/// Level of a quota value against thresholds `base·2^n`.
fn level_of_value(v: f64, base: f64) -> Result<Level> {
    if v <= 0.0 {
        return Ok(Level::Bottom);
    }
    if !(base > 0.0) {
        return Err(Error::Precondition("zero threshold weight with a nonzero function".into()));
    }
    Ok(Level::At(strict_level(v, base)))
}

/// One-dimensional level-set decomposition driven by `Mf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetDecomposition1D {
    pub grid: Grid1D,
    /// `Mf` on the grid.
    pub maximal: GridFunction1D,
    pub constant: f64,
    pub weight: f64,
    pub fraction: Fraction,
    pub levels: BTreeMap<Level, Vec<DyadicInterval>>,
    pub assignment: BTreeMap<DyadicInterval, Level>,
}

impl LevelSetDecomposition1D {
    pub fn base(&self) -> f64 {
        self.constant * self.weight
    }

    /// `C·2^n·w`.
    pub fn threshold(&self, n: i32) -> f64 {
        self.base() * pow2(n)
    }

    /// `Ω_n = {Mf > C·2^n·w}`.
    pub fn level_set(&self, n: i32) -> Vec<bool> {
        let t = self.threshold(n);
        self.maximal.values.iter().map(|v| *v > t).collect()
    }

    pub fn level_of(&self, iv: &DyadicInterval) -> Option<Level> {
        self.assignment.get(iv).copied()
    }

    /// Partition plus `|I ∩ Ω_n| > frac·|I|` and `|I ∩ Ω_{n+1}| ≤ frac·|I|`, in cell counts.
    pub fn verify(&self, collection: &[DyadicInterval]) -> std::result::Result<(), String> {
        let mut seen = 0usize;
        for ivs in self.levels.values() {
            seen += ivs.len();
        }
        if seen != collection.len() || collection.iter().any(|i| !self.assignment.contains_key(i)) {
            return Err("levels do not partition the collection".into());
        }
        let mut counters: BTreeMap<i32, CellCounter> = BTreeMap::new();
        let mut counter = |n: i32| -> CellCounter {
            counters
                .entry(n)
                .or_insert_with(|| CellCounter::new(self.grid, &self.level_set(n)))
                .clone()
        };
        let positive = CellCounter::new(self.grid, &self.maximal.values.iter().map(|v| *v > 0.0).collect::<Vec<_>>());
        for (level, ivs) in &self.levels {
            for iv in ivs {
                let total = self.grid.cell_range(iv).map_err(|e| e.to_string())?.len() as u64;
                match level {
                    Level::At(n) => {
                        let inside = counter(*n).count(iv).map_err(|e| e.to_string())?;
                        let above = counter(n + 1).count(iv).map_err(|e| e.to_string())?;
                        if !self.fraction.exceeds(inside, total) || self.fraction.exceeds(above, total) {
                            return Err(format!("{iv} at level {n}: counts {inside}, {above} of {total}"));
                        }
                    }
                    Level::Bottom => {
                        let p = positive.count(iv).map_err(|e| e.to_string())?;
                        if self.fraction.exceeds(p, total) {
                            return Err(format!("{iv} in the bottom bucket qualifies at some level"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `level <k>: I(k=..,n=..) ...`, one line per nonempty level, top first.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (level, ivs) in self.levels.iter().rev() {
            let mut line = format!("level {level}:");
            for iv in ivs {
                let _ = write!(line, " {iv}");
            }
            let _ = writeln!(s, "{line}");
        }
        s
    }
}

/// Descending level-set decomposition: `I ∈ 𝓘_n` for the largest `n` with
/// `|I ∩ {Mf > C·2^n·w}| > frac·|I|`.
pub fn level_set_decomposition_1d(
    collection: &[DyadicInterval],
    f: &GridFunction1D,
    weight: f64,
    constant: f64,
    fraction: Fraction,
) -> Result<LevelSetDecomposition1D> {
    let grid = f.grid;
    let maximal = maximal_function(f, ScaleWindow::full(grid))?;
    let base = constant * weight;
    let assigned: Vec<(DyadicInterval, Level)> = collection
        .par_iter()
        .map(|iv| {
            let r = grid.cell_range(iv)?;
            let q = fraction.quota(r.len() as u64);
            let v = qth_largest(maximal.values[r].to_vec(), q);
            Ok((*iv, level_of_value(v, base)?))
        })
        .collect::<Result<_>>()?;
    let mut levels: BTreeMap<Level, Vec<DyadicInterval>> = BTreeMap::new();
    for (iv, l) in &assigned {
        levels.entry(*l).or_default().push(*iv);
    }
    Ok(LevelSetDecomposition1D {
        grid,
        maximal,
        constant,
        weight,
        fraction,
        levels,
        assignment: assigned.into_iter().collect(),
    })
}

/// The four one-dimensional decompositions `𝓘_{n₁}, 𝓘'_{m₁}, 𝓙_{n₂}, 𝓙'_{m₂}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDecompositionI {
    pub x_f1: LevelSetDecomposition1D,
    pub x_f2: LevelSetDecomposition1D,
    pub y_g1: LevelSetDecomposition1D,
    pub y_g2: LevelSetDecomposition1D,
}

impl TensorDecompositionI {
    /// `(n₁, m₁, n₂, m₂)` for a rectangle.
    pub fn indices(&self, r: &DyadicRectangle) -> Option<[Level; 4]> {
        Some([
            self.x_f1.level_of(&r.x)?,
            self.x_f2.level_of(&r.x)?,
            self.y_g1.level_of(&r.y)?,
            self.y_g2.level_of(&r.y)?,
        ])
    }
}

/// Distinct `x` and `y` intervals of a rectangle collection, in first-seen order.
pub fn projections(rects: &[DyadicRectangle]) -> (Vec<DyadicInterval>, Vec<DyadicInterval>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sx = std::collections::BTreeSet::new();
    let mut sy = std::collections::BTreeSet::new();
    for r in rects {
        if sx.insert(r.x) {
            xs.push(r.x);
        }
        if sy.insert(r.y) {
            ys.push(r.y);
        }
    }
    (xs, ys)
}

/// Tensor-type decomposition I. `weights = [|F₁|, |F₂|, |G₁|, |G₂|]` (or the
/// normalized values used by the exceptional set).
#[allow(clippy::too_many_arguments)]
pub fn tensor_decomposition_i(
    collection_x: &[DyadicInterval],
    collection_y: &[DyadicInterval],
    f1: &GridFunction1D,
    f2: &GridFunction1D,
    g1: &GridFunction1D,
    g2: &GridFunction1D,
    weights: [f64; 4],
    c1: f64,
    c2: f64,
) -> Result<TensorDecompositionI> {
    let t = Fraction::TENTH;
    Ok(TensorDecompositionI {
        x_f1: level_set_decomposition_1d(collection_x, f1, weights[0], c1, t)?,
        x_f2: level_set_decomposition_1d(collection_x, f2, weights[1], c1, t)?,
        y_g1: level_set_decomposition_1d(collection_y, g1, weights[2], c2, t)?,
        y_g2: level_set_decomposition_1d(collection_y, g2, weights[3], c2, t)?,
    })
}

/// Maximal-interval trees for `(⟨B_I, φ_I⟩)_I` and `(⟨B̃_J, φ_J⟩)_J`, thresholded by the supplied norms.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDecompositionII {
    pub x: TreeDecomposition,
    pub y: TreeDecomposition,
}

impl TensorDecompositionII {
    fn level_in(d: &TreeDecomposition, iv: &DyadicInterval) -> Level {
        d.trees()
            .find(|(_, t)| t.members.contains(iv))
            .map(|(k, _)| Level::At(k))
            .unwrap_or(Level::Bottom)
    }

    /// Spec-labelled levels `(k₁, k₂)` of the trees containing `I` and `J`.
    pub fn indices(&self, r: &DyadicRectangle) -> [Level; 2] {
        [Self::level_in(&self.x, &r.x), Self::level_in(&self.y, &r.y)]
    }
}

pub fn tensor_decomposition_ii(
    collection_x: &[DyadicInterval],
    collection_y: &[DyadicInterval],
    b_seq_x: &CoefficientSequence,
    b_seq_y: &CoefficientSequence,
    norms: [f64; 2],
    c1: f64,
    c2: f64,
) -> Result<TensorDecompositionII> {
    Ok(TensorDecompositionII {
        x: stopping_time_with_norm(b_seq_x, collection_x, false, c1, norms[0])?,
        y: stopping_time_with_norm(b_seq_y, collection_y, false, c2, norms[1])?,
    })
}

/// Which union of products defines `Ω¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExceptionalMode {
    FixedScale,
    Flag0,
    LinfFixed,
    LinfEasy,
}

impl ExceptionalMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FixedScale => "fixed_scale",
            Self::Flag0 => "flag0",
            Self::LinfFixed => "linf_fixed",
            Self::LinfEasy => "linf_easy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fixed_scale" => Ok(Self::FixedScale),
            "flag0" => Ok(Self::Flag0),
            "linf_fixed" => Ok(Self::LinfFixed),
            "linf_easy" => Ok(Self::LinfEasy),
            _ => Err(Error::Config(format!("unknown exceptional-set mode {s:?}"))),
        }
    }

    fn needs_b(&self) -> bool {
        matches!(self, Self::Flag0 | Self::LinfEasy)
    }
}

/// Constants and exponents for [`build_exceptional_set`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceptionalConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Exponent of `‖h‖_s`.
    pub s: f64,
    /// Exponent of `‖f₁‖_p`, `‖g₁‖_p` in `linf_fixed`.
    pub p: f64,
    /// Exponent of `‖B‖_t` in `linf_easy`.
    pub t: f64,
    /// Rescale weights as if `|E| = 1`.
    pub normalize: bool,
    /// `SS` or `SS_H` for `Ω²`.
    pub square: HybridKind,
}

impl Default for ExceptionalConstants {
    fn default() -> Self {
        Self {
            c1: 1024.0,
            c2: 1024.0,
            c3: 1024.0,
            s: 1.5,
            p: 2.0,
            t: 1.0,
            normalize: true,
            square: HybridKind::SsH,
        }
    }
}

/// Functions entering the exceptional set; `b_x`, `b_y` are `B(f₁,f₂)` and
/// `B̃(g₁,g₂)`, required by the `flag0` and `linf_easy` modes.
#[derive(Debug, Clone, Copy)]
pub struct ExceptionalInputs<'a> {
    pub f1: &'a GridFunction1D,
    pub f2: &'a GridFunction1D,
    pub g1: &'a GridFunction1D,
    pub g2: &'a GridFunction1D,
    pub h: &'a GridFunction2D,
    pub e: &'a GridFunction2D,
    pub b_x: Option<&'a GridFunction1D>,
    pub b_y: Option<&'a GridFunction1D>,
}

/// Weights as used in the thresholds (after the optional `|E| = 1` rescaling).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EffectiveWeights {
    pub f1: f64,
    pub f2: f64,
    pub g1: f64,
    pub g2: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub h: f64,
}

/// One product `∪_n {u > C₁2^n w_x} × {v > C₂2^{-n} w_y}`, stored as per-axis integer levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductFactor {
    pub name: String,
    pub x_levels: Vec<Option<i32>>,
    pub y_levels: Vec<Option<i32>>,
}

impl ProductFactor {
    fn new(name: &str, u: &GridFunction1D, base_x: f64, v: &GridFunction1D, base_y: f64) -> Result<Self> {
        let lv = |g: &GridFunction1D, base: f64| -> Result<Vec<Option<i32>>> {
            let m = maximal_function(g, ScaleWindow::full(g.grid))?;
            m.values.iter().map(|x| level_of_value(*x, base).map(|l| l.value())).collect()
        };
        Ok(Self {
            name: name.to_string(),
            x_levels: lv(u, base_x)?,
            y_levels: lv(v, base_y)?,
        })
    }

    /// `(x, y)` lies in the product iff `a(x) + b(y) ≥ 0`.
    pub fn contains(&self, ix: usize, iy: usize) -> bool {
        matches!((self.x_levels[ix], self.y_levels[iy]), (Some(a), Some(b)) if a + b >= 0)
    }
}

/// `Ω = Ω¹ ∪ Ω²`, its enlargement and `E' = E \ Enl(Ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionalSet {
    pub mode: ExceptionalMode,
    pub constants: ExceptionalConstants,
    pub gx: Grid1D,
    pub gy: Grid1D,
    pub products: Vec<ProductFactor>,
    pub omega1: Vec<bool>,
    pub omega2: Vec<bool>,
    pub omega: Vec<bool>,
    pub enl: Vec<bool>,
    pub e_prime: GridFunction2D,
    pub weights: EffectiveWeights,
    /// `|E|^{-1/2}` when normalizing, else 1.
    pub dilation: f64,
    /// `SSh` (or its Haar variant) on the grid.
    pub square_h: GridFunction2D,
}

impl ExceptionalSet {
    fn measure(&self, mask: &[bool]) -> f64 {
        mask.iter().filter(|b| **b).count() as f64 * self.gx.cell_width() * self.gy.cell_width()
    }

    pub fn omega_measure(&self) -> f64 {
        self.measure(&self.omega)
    }

    pub fn enl_measure(&self) -> f64 {
        self.measure(&self.enl)
    }

    pub fn e_prime_measure(&self) -> f64 {
        self.e_prime.support_measure()
    }

    /// Whether some cell of `r` lies outside `Enl(Ω)`.
    pub fn meets_complement(&self, r: &DyadicRectangle) -> Result<bool> {
        let rx = self.gx.cell_range(&r.x)?;
        let ry = self.gy.cell_range(&r.y)?;
        let nx = self.gx.len();
        Ok(ry.into_iter().any(|iy| rx.clone().any(|ix| !self.enl[iy * nx + ix])))
    }

    /// `Ω ⊆ Enl(Ω)` and `E' ∩ Enl(Ω) = ∅`.
    pub fn verify(&self) -> std::result::Result<(), String> {
        if self.omega.iter().zip(&self.enl).any(|(o, e)| *o && !*e) {
            return Err("Ω is not contained in Enl(Ω)".into());
        }
        if self.e_prime.values.iter().zip(&self.enl).any(|(v, e)| *v != 0.0 && *e) {
            return Err("E' meets Enl(Ω)".into());
        }
        Ok(())
    }
}

/// Square function used for `Ω²` and the second 2D family.
fn square_function(h: &GridFunction2D, kind: HybridKind) -> Result<GridFunction2D> {
    let fam = kind
        .required_families()
        .filter(|_| matches!(kind, HybridKind::SS | HybridKind::SsH))
        .ok_or_else(|| Error::Config(format!("{} is not a double square function", kind.name())))?;
    hybrid_2d(h, kind, &AxisCollections::lacunary_pyramids(h.gx, h.gy), fam)
}

pub fn build_exceptional_set(
    inputs: ExceptionalInputs<'_>,
    constants: ExceptionalConstants,
    mode: ExceptionalMode,
) -> Result<ExceptionalSet> {
    let ExceptionalInputs { f1, f2, g1, g2, h, e, b_x, b_y } = inputs;
    let (gx, gy) = (h.gx, h.gy);
    for f in [f1, f2] {
        if f.grid != gx {
            return Err(Error::GridMismatch("x functions and h".into()));
        }
    }
    for g in [g1, g2] {
        if g.grid != gy {
            return Err(Error::GridMismatch("y functions and h".into()));
        }
    }
    h.check_same(e)?;
    if !e.is_indicator() {
        return Err(Error::Precondition("E must be an indicator".into()));
    }
    let e_measure = e.support_measure();
    if e_measure <= 0.0 {
        return Err(Error::Precondition("|E| must be positive".into()));
    }
    let delta = if constants.normalize { e_measure.powf(-0.5) } else { 1.0 };
    let c = constants;
    let mut w = EffectiveWeights {
        h: h.lp_norm(c.s) * delta.powf(2.0 / c.s),
        ..Default::default()
    };
    let mut products = Vec::new();
    if mode.needs_b() && (b_x.is_none() || b_y.is_none()) {
        return Err(Error::Config(format!("mode {} needs B and B~", mode.name())));
    }
    match mode {
        ExceptionalMode::FixedScale | ExceptionalMode::Flag0 => {
            w.f1 = f1.support_measure() * delta;
            w.f2 = f2.support_measure() * delta;
            w.g1 = g1.support_measure() * delta;
            w.g2 = g2.support_measure() * delta;
            products.push(ProductFactor::new("f1g1", f1, c.c1 * w.f1, g1, c.c2 * w.g1)?);
            products.push(ProductFactor::new("f2g2", f2, c.c1 * w.f2, g2, c.c2 * w.g2)?);
            if mode == ExceptionalMode::FixedScale {
                products.push(ProductFactor::new("f1g2", f1, c.c1 * w.f1, g2, c.c2 * w.g2)?);
                products.push(ProductFactor::new("f2g1", f2, c.c1 * w.f2, g1, c.c2 * w.g1)?);
            } else {
                let (bx, by) = (b_x.unwrap(), b_y.unwrap());
                w.b_x = bx.lp_norm(1.0) * delta;
                w.b_y = by.lp_norm(1.0) * delta;
                products.push(ProductFactor::new("BB", bx, c.c1 * w.b_x, by, c.c2 * w.b_y)?);
            }
        }
        ExceptionalMode::LinfFixed => {
            w.f1 = f1.lp_norm(c.p) * delta.powf(1.0 / c.p);
            w.g1 = g1.lp_norm(c.p) * delta.powf(1.0 / c.p);
            products.push(ProductFactor::new("f1g1", f1, c.c1 * w.f1, g1, c.c2 * w.g1)?);
        }
        ExceptionalMode::LinfEasy => {
            let (bx, by) = (b_x.unwrap(), b_y.unwrap());
            w.b_x = bx.lp_norm(c.t) * delta.powf(1.0 / c.t);
            w.b_y = by.lp_norm(c.t) * delta.powf(1.0 / c.t);
            products.push(ProductFactor::new("BB", bx, c.c1 * w.b_x, by, c.c2 * w.b_y)?);
        }
    }
    let (nx, ny) = (gx.len(), gy.len());
    let omega1: Vec<bool> = (0..nx * ny)
        .into_par_iter()
        .map(|i| products.iter().any(|p| p.contains(i % nx, i / nx)))
        .collect();
    let square_h = square_function(h, c.square)?;
    let t2 = c.c3 * w.h;
    let omega2: Vec<bool> = square_h.values.iter().map(|v| *v > t2).collect();
    let omega: Vec<bool> = omega1.iter().zip(&omega2).map(|(a, b)| *a || *b).collect();
    let enl = maximal_exceeds(&omega, gx, gy, &AxisCollections::full(h), 1, 100)?;
    let e_prime = GridFunction2D::new(
        gx,
        gy,
        e.values.iter().zip(&enl).map(|(v, b)| if *b { 0.0 } else { *v }).collect(),
    )?;
    Ok(ExceptionalSet {
        mode,
        constants,
        gx,
        gy,
        products,
        omega1,
        omega2,
        omega,
        enl,
        e_prime,
        weights: w,
        dilation: delta,
        square_h,
    })
}

/// Rectangles meeting `Enl(Ω)^c` whose indices break `n₁+n₂, m₁+m₂, n₁+m₂, m₁+n₂ < 0`.
pub fn obs_indice_check(
    td: &TensorDecompositionI,
    rects: &[DyadicRectangle],
    es: &ExceptionalSet,
) -> Result<Vec<(DyadicRectangle, [Level; 4])>> {
    let mut out = Vec::new();
    for r in rects {
        if !es.meets_complement(r)? {
            continue;
        }
        let idx = td
            .indices(r)
            .ok_or_else(|| Error::Precondition(format!("{r} not in the decomposition")))?;
        let [n1, m1, n2, m2] = idx;
        if !(sum_negative(n1, n2) && sum_negative(m1, m2) && sum_negative(n1, m2) && sum_negative(m1, n2)) {
            out.push((*r, idx));
        }
    }
    Ok(out)
}

/// Rectangles meeting `Enl(Ω)^c` whose tree levels break `(k₁−1) + (k₂−1) < 0`
/// (tree levels are spec-labelled by their upper threshold).
pub fn obs_st_b_check(
    td: &TensorDecompositionII,
    rects: &[DyadicRectangle],
    es: &ExceptionalSet,
) -> Result<Vec<(DyadicRectangle, [Level; 2])>> {
    let mut out = Vec::new();
    for r in rects {
        if !es.meets_complement(r)? {
            continue;
        }
        let idx = td.indices(r);
        let ok = match idx {
            [Level::At(a), Level::At(b)] => (a - 1) + (b - 1) < 0,
            _ => true,
        };
        if !ok {
            out.push((*r, idx));
        }
    }
    Ok(out)
}

/// Parameters of [`level_set_decomposition_2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level2DParams {
    pub c3: f64,
    pub s: f64,
    /// Multiplies `‖h‖_s` (e.g. `|E|^{-1/s}` rescaling); 1 by default.
    pub norm_factor: f64,
    pub square: HybridKind,
    pub fraction: Fraction,
}

impl Default for Level2DParams {
    fn default() -> Self {
        Self {
            c3: 1024.0,
            s: 1.5,
            norm_factor: 1.0,
            square: HybridKind::SsH,
            fraction: Fraction::HUNDREDTH,
        }
    }
}

/// Joint `(k₁, k₂)` buckets of rectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetDecomposition2D {
    pub buckets: BTreeMap<(Level, Level), Vec<DyadicRectangle>>,
    pub assignment: BTreeMap<DyadicRectangle, (Level, Level)>,
    /// `SSh`.
    pub square_h: GridFunction2D,
    /// `(SS)^H χ_{E'}`.
    pub square_e: GridFunction2D,
    /// `C₃‖h‖_s` (times the norm factor).
    pub base1: f64,
    pub fraction: Fraction,
}

impl LevelSetDecomposition2D {
    /// `Ω²_{k} = {SSh > base1·2^k}`.
    pub fn omega_h(&self, k: i32) -> Vec<bool> {
        let t = self.base1 * pow2(k);
        self.square_h.values.iter().map(|v| *v > t).collect()
    }

    /// `Ω'²_{k} = {(SS)^H χ_{E'} > 2^k}`.
    pub fn omega_e(&self, k: i32) -> Vec<bool> {
        let t = pow2(k);
        self.square_e.values.iter().map(|v| *v > t).collect()
    }

    fn count(mask: &[bool], nx: usize, gx: Grid1D, gy: Grid1D, r: &DyadicRectangle) -> Result<(u64, u64)> {
        let rx = gx.cell_range(&r.x)?;
        let ry = gy.cell_range(&r.y)?;
        let total = (rx.len() * ry.len()) as u64;
        let c = ry.into_iter().map(|iy| mask[iy * nx + rx.start..iy * nx + rx.end].iter().filter(|b| **b).count() as u64).sum();
        Ok((c, total))
    }

    /// Partition plus the `> frac` rule at each assigned level and its failure one level up
    /// (at `k₁ = −1` the failure is checked only for rectangles meeting `Enl(Ω)^c`).
    pub fn verify(&self, rects: &[DyadicRectangle], es: Option<&ExceptionalSet>) -> std::result::Result<(), String> {
        let n: usize = self.buckets.values().map(Vec::len).sum();
        if n != rects.len() || rects.iter().any(|r| !self.assignment.contains_key(r)) {
            return Err("buckets do not partition the rectangles".into());
        }
        let (gx, gy) = (self.square_h.gx, self.square_h.gy);
        let nx = gx.len();
        let e = |x: Result<(u64, u64)>| x.map_err(|e| e.to_string());
        let pos_h: Vec<bool> = self.square_h.values.iter().map(|v| *v > 0.0).collect();
        let pos_e: Vec<bool> = self.square_e.values.iter().map(|v| *v > 0.0).collect();
        for (r, (k1, k2)) in &self.assignment {
            match k1 {
                Level::At(k) => {
                    let (c, t) = e(Self::count(&self.omega_h(*k), nx, gx, gy, r))?;
                    if !self.fraction.exceeds(c, t) {
                        return Err(format!("{r}: fails at k1 = {k}"));
                    }
                    let check_up = *k < -1 || match es {
                        Some(es) => es.meets_complement(r).map_err(|e| e.to_string())?,
                        None => false,
                    };
                    if check_up {
                        let (c, t) = e(Self::count(&self.omega_h(k + 1), nx, gx, gy, r))?;
                        if self.fraction.exceeds(c, t) {
                            return Err(format!("{r}: still qualifies above k1 = {k}"));
                        }
                    }
                }
                Level::Bottom => {
                    let (c, t) = e(Self::count(&pos_h, nx, gx, gy, r))?;
                    if self.fraction.exceeds(c, t) {
                        return Err(format!("{r}: bottom k1 but qualifies"));
                    }
                }
            }
            match k2 {
                Level::At(k) => {
                    let (c, t) = e(Self::count(&self.omega_e(*k), nx, gx, gy, r))?;
                    let (c2, _) = e(Self::count(&self.omega_e(k + 1), nx, gx, gy, r))?;
                    if !self.fraction.exceeds(c, t) || self.fraction.exceeds(c2, t) {
                        return Err(format!("{r}: wrong k2 = {k}"));
                    }
                }
                Level::Bottom => {
                    let (c, t) = e(Self::count(&pos_e, nx, gx, gy, r))?;
                    if self.fraction.exceeds(c, t) {
                        return Err(format!("{r}: bottom k2 but qualifies"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `level (k1,k2): R(..) ...` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for ((a, b), rs) in self.buckets.iter().rev() {
            let mut line = format!("level ({a},{b}):");
            for r in rs {
                let _ = write!(line, " {r}");
            }
            let _ = writeln!(s, "{line}");
        }
        s
    }
}

/// Buckets `𝓡_{k₁,k₂}` from `SSh` (levels `k₁ ≤ −1`) and `(SS)^H χ_{E'}` (levels up to the data maximum).
pub fn level_set_decomposition_2d(
    rects: &[DyadicRectangle],
    h: &GridFunction2D,
    e_prime: &GridFunction2D,
    params: Level2DParams,
) -> Result<LevelSetDecomposition2D> {
    h.check_same(e_prime)?;
    let hn = h.lp_norm(params.s);
    if hn == 0.0 {
        return Err(Error::Precondition("h must be nonzero".into()));
    }
    let square_h = square_function(h, params.square)?;
    let square_e = square_function(e_prime, HybridKind::SsH)?;
    let base1 = params.c3 * hn * params.norm_factor;
    let (gx, gy) = (h.gx, h.gy);
    let nx = gx.len();
    let collect = |vals: &GridFunction2D, r: &DyadicRectangle| -> Result<(Vec<f64>, u64)> {
        let rx = gx.cell_range(&r.x)?;
        let ry = gy.cell_range(&r.y)?;
        let mut v = Vec::with_capacity(rx.len() * ry.len());
        for iy in ry {
            v.extend_from_slice(&vals.values[iy * nx + rx.start..iy * nx + rx.end]);
        }
        let n = v.len() as u64;
        Ok((v, n))
    };
    let assigned: Vec<(DyadicRectangle, (Level, Level))> = rects
        .par_iter()
        .map(|r| {
            let (vh, n) = collect(&square_h, r)?;
            let q = params.fraction.quota(n);
            let k1 = match level_of_value(qth_largest(vh, q), base1)? {
                Level::At(k) => Level::At(k.min(-1)),
                b => b,
            };
            let (ve, _) = collect(&square_e, r)?;
            let k2 = level_of_value(qth_largest(ve, q), 1.0)?;
            Ok((*r, (k1, k2)))
        })
        .collect::<Result<_>>()?;
    let mut buckets: BTreeMap<(Level, Level), Vec<DyadicRectangle>> = BTreeMap::new();
    for (r, k) in &assigned {
        buckets.entry(*k).or_default().push(*r);
    }
    Ok(LevelSetDecomposition2D {
        buckets,
        assignment: assigned.into_iter().collect(),
        square_h,
        square_e,
        base1,
        fraction: params.fraction,
    })
}

/// A failed instance of the one-dimensional sparsity inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityViolation {
    pub n2: i32,
    pub j0: DyadicInterval,
    /// `Σ |J|` over `J ∈ 𝓙_{n₂}` meeting `J₀`.
    pub sum: f64,
    /// `|∪ J|` over the same intervals.
    pub union: f64,
}

/// Per-pair sums for every `n₂` and `J₀ ∈ 𝓙_{n₂−gap}`.
pub fn sparsity_pairs_1d(d: &LevelSetDecomposition1D, gap: i32) -> Vec<SparsityViolation> {
    let mut out = Vec::new();
    for (level, js) in &d.levels {
        let Level::At(n2) = level else { continue };
        let Some(j0s) = d.levels.get(&Level::At(n2 - gap)) else { continue };
        for j0 in j0s {
            let meet: Vec<DyadicInterval> = js.iter().filter(|j| j.intersects(j0)).copied().collect();
            if meet.is_empty() {
                continue;
            }
            let sum = meet.iter().map(|j| j.length()).sum();
            let union = crate::size_energy::maximal_intervals(meet.iter().copied())
                .iter()
                .map(|j| j.length())
                .sum();
            out.push(SparsityViolation { n2: *n2, j0: *j0, sum, union });
        }
    }
    out
}

/// Pairs with `Σ_{J∈𝓙_{n₂}, J∩J₀≠∅} |J| > |J₀|/2`, for `J₀ ∈ 𝓙_{n₂−10}`.
pub fn sparsity_check_1d(d: &LevelSetDecomposition1D) -> Vec<SparsityViolation> {
    sparsity_pairs_1d(d, 10)
        .into_iter()
        .filter(|v| v.sum > 0.5 * v.j0.length())
        .collect()
}

/// Intervals `J ∈ 𝓙_{n}` where `min_J Mg ≤ 2^{exp}·C·2^n·w` (the pointwise claim uses `exp = −7`).
pub fn pointwise_claim_check(d: &LevelSetDecomposition1D, exp: i32) -> Result<Vec<(DyadicInterval, i32, f64, f64)>> {
    let mut out = Vec::new();
    for (level, js) in &d.levels {
        let Level::At(n) = level else { continue };
        let bound = pow2(exp) * d.threshold(*n);
        for j in js {
            let r = d.grid.cell_range(j)?;
            let m = d.maximal.values[r].iter().copied().fold(f64::INFINITY, f64::min);
            if !(m > bound) {
                out.push((*j, *n, m, bound));
            }
        }
    }
    Ok(out)
}

/// `(Σ_{n₂} |∪_{J∈𝓙_{n₂}} R|, |∪ R|)`; rectangles whose `J` is in the bottom bucket form one more term.
pub fn sparsity_check_2d(rects: &[DyadicRectangle], decomp_y: &LevelSetDecomposition1D, gx: Grid1D) -> Result<(f64, f64)> {
    let gy = decomp_y.grid;
    let (sx, sy) = (gx.cell_scale(), gy.cell_scale());
    let unit = gx.cell_width() * gy.cell_width();
    let mut groups: BTreeMap<Level, Vec<DyadicRectangle>> = BTreeMap::new();
    for r in rects {
        let l = decomp_y
            .level_of(&r.y)
            .ok_or_else(|| Error::Precondition(format!("{} is not in the decomposition", r.y)))?;
        gx.cell_range(&r.x)?;
        groups.entry(l).or_default().push(*r);
    }
    let lhs: u64 = groups.values().map(|g| union_area_cells(g, sx, sy)).sum();
    let rhs = union_area_cells(rects, sx, sy);
    Ok((lhs as f64 * unit, rhs as f64 * unit))
}
