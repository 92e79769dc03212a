//! Bilinear blocks `B_𝓠`, the five flag-paraproduct model operators `Π`, and naive oracles.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{pow2, DyadicInterval, DyadicRectangle};
use crate::error::{Error, Result};
use crate::grid::{CellCounter, Grid1D, GridFunction1D, GridFunction2D};
use crate::maximal::{maximal_function, ScaleWindow};
use crate::size_energy::size;
use crate::stopping::projections;
use crate::wavelets::{all_coefficients, tensor_coefficients, Bump, CoefficientSequence, CutoffFamily};

/// Sum with a fixed binary-tree association, independent of thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `⟨a, b⟩` of two sampled bumps with cell weight `w`; zero without overlap.
pub fn bump_inner(a: &Bump, b: &Bump, w: f64) -> f64 {
    let lo = a.start.max(b.start);
    let hi = (a.start + a.values.len()).min(b.start + b.values.len());
    if lo >= hi {
        return 0.0;
    }
    let s: f64 = a.values[lo - a.start..hi - a.start]
        .iter()
        .zip(&b.values[lo - b.start..hi - b.start])
        .map(|(x, y)| x * y)
        .sum();
    s * w
}

fn meets(mask: &[bool], grid: Grid1D, iv: &DyadicInterval) -> Result<bool> {
    Ok(mask[grid.cell_range(iv)?].iter().any(|b| *b))
}

/// Summation constraint of a bilinear block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockVariant {
    Global,
    /// `|Q| ≥ |P|`.
    Local(DyadicInterval),
    /// `2^#|P| ≤ |Q| < 2^{#+1}|P|`.
    FixedScale(DyadicInterval, u32),
    /// `Q ∩ 𝒰 ≠ ∅`, signed terms; `𝒰` is a cell mask.
    LocalizedLac(Vec<bool>),
    /// `Q ∩ 𝒰 ≠ ∅`, terms `|⟨v₁,ψ¹_Q⟩||⟨v₂,ψ²_Q⟩||φ³_Q|`.
    LocalizedNonlac(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearBlockSpec {
    pub collection: Vec<DyadicInterval>,
    pub families: [CutoffFamily; 3],
    pub variant: BlockVariant,
}

impl BilinearBlockSpec {
    pub fn new(collection: Vec<DyadicInterval>, families: [CutoffFamily; 3], variant: BlockVariant) -> Result<Self> {
        let s = Self { collection, families, variant };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let lac = self.families.map(|f| f.is_lacunary());
        let count = lac.iter().filter(|b| **b).count();
        let ok = match self.variant {
            BlockVariant::LocalizedLac(_) => lac[2] && (lac[0] || lac[1]),
            BlockVariant::LocalizedNonlac(_) => !lac[2] && lac[0] && lac[1],
            _ => count >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("block families {lac:?} do not fit variant {:?}", self.variant_name())))
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self.variant {
            BlockVariant::Global => "global",
            BlockVariant::Local(_) => "local",
            BlockVariant::FixedScale(..) => "fixed_scale",
            BlockVariant::LocalizedLac(_) => "localized_lac",
            BlockVariant::LocalizedNonlac(_) => "localized_nonlac",
        }
    }

    /// The same block with reference interval `p` (local and fixed-scale variants).
    pub fn at(&self, p: DyadicInterval) -> Self {
        let variant = match &self.variant {
            BlockVariant::Local(_) => BlockVariant::Local(p),
            BlockVariant::FixedScale(_, s) => BlockVariant::FixedScale(p, *s),
            v => v.clone(),
        };
        Self { variant, ..self.clone() }
    }

    fn admits(&self, q: &DyadicInterval, grid: Grid1D) -> Result<bool> {
        Ok(match &self.variant {
            BlockVariant::Global => true,
            BlockVariant::Local(p) => q.scale >= p.scale,
            BlockVariant::FixedScale(p, s) => q.scale == p.scale + *s as i32,
            BlockVariant::LocalizedLac(u) | BlockVariant::LocalizedNonlac(u) => {
                if u.len() != grid.len() {
                    return Err(Error::GridMismatch("level-set mask and block inputs".into()));
                }
                meets(u, grid, q)?
            }
        })
    }

    /// Intervals that enter the sum.
    pub fn active(&self, grid: Grid1D) -> Result<Vec<DyadicInterval>> {
        let mut out = Vec::new();
        for q in &self.collection {
            if self.admits(q, grid)? {
                out.push(*q);
            }
        }
        Ok(out)
    }

    fn absolute(&self) -> bool {
        matches!(self.variant, BlockVariant::LocalizedNonlac(_))
    }
}

/// Weights `⟨v₁,φ¹_Q⟩⟨v₂,φ²_Q⟩/|Q|^{1/2}` (absolute values for the nonlacunary localized block).
pub fn block_weights(
    spec: &BilinearBlockSpec,
    v1: &GridFunction1D,
    v2: &GridFunction1D,
) -> Result<Vec<(DyadicInterval, f64)>> {
    spec.validate()?;
    if v1.grid != v2.grid {
        return Err(Error::GridMismatch("block inputs".into()));
    }
    let active = spec.active(v1.grid)?;
    let c1 = all_coefficients(v1, &active, &spec.families[0])?;
    let c2 = all_coefficients(v2, &active, &spec.families[1])?;
    Ok(active
        .iter()
        .map(|q| {
            let (a, b) = (c1.get(q), c2.get(q));
            let w = if spec.absolute() { a.abs() * b.abs() } else { a * b };
            (*q, w / q.length().sqrt())
        })
        .collect())
}

fn third_bump(spec: &BilinearBlockSpec, q: &DyadicInterval, grid: Grid1D) -> Result<Bump> {
    let b = spec.families[2].sample(q, grid)?;
    Ok(if spec.absolute() { b.abs() } else { b })
}

pub fn bilinear_block(spec: &BilinearBlockSpec, v1: &GridFunction1D, v2: &GridFunction1D) -> Result<GridFunction1D> {
    let grid = v1.grid;
    let mut out = GridFunction1D::zeros(grid);
    for (q, w) in block_weights(spec, v1, v2)? {
        if w != 0.0 {
            third_bump(spec, &q, grid)?.add_to(w, &mut out.values);
        }
    }
    Ok(out)
}

/// `⟨B(v₁,v₂), φ⟩` for a sampled `φ`, by the Gram entries `⟨φ³_Q, φ⟩`.
pub fn block_pairing(spec: &BilinearBlockSpec, v1: &GridFunction1D, v2: &GridFunction1D, phi: &Bump) -> Result<f64> {
    let grid = v1.grid;
    let w = grid.cell_width();
    let mut terms = Vec::new();
    for (q, c) in block_weights(spec, v1, v2)? {
        if c != 0.0 {
            terms.push(c * bump_inner(&third_bump(spec, &q, grid)?, phi, w));
        }
    }
    Ok(pairwise_sum(&terms))
}

/// The five discrete model operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Flag0Paraproduct,
    FlagSharpParaproduct,
    Flag0Flag0,
    Flag0FlagSharp,
    FlagSharpFlagSharp,
}

impl ModelKind {
    pub const ALL: [Self; 5] = [
        Self::Flag0Paraproduct,
        Self::FlagSharpParaproduct,
        Self::Flag0Flag0,
        Self::Flag0FlagSharp,
        Self::FlagSharpFlagSharp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Flag0Paraproduct => "flag0_paraproduct",
            Self::FlagSharpParaproduct => "flag_sharp_paraproduct",
            Self::Flag0Flag0 => "flag0_flag0",
            Self::Flag0FlagSharp => "flag0_flag_sharp",
            Self::FlagSharpFlagSharp => "flag_sharp_flag_sharp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }

    /// `y` side is a paraproduct rather than a flag.
    pub fn paraproduct_y(&self) -> bool {
        matches!(self, Self::Flag0Paraproduct | Self::FlagSharpParaproduct)
    }

    pub fn sharp_x(&self) -> bool {
        matches!(self, Self::FlagSharpParaproduct | Self::FlagSharpFlagSharp)
    }

    pub fn sharp_y(&self) -> bool {
        matches!(self, Self::Flag0FlagSharp | Self::FlagSharpFlagSharp)
    }
}

/// Which model, its collections, scale offsets and family roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOperatorSpec {
    pub model: ModelKind,
    pub rectangles: Vec<DyadicRectangle>,
    /// `𝓚`.
    pub inner_x: Vec<DyadicInterval>,
    /// `𝓛`.
    pub inner_y: Vec<DyadicInterval>,
    #[serde(default)]
    pub sharp1: u32,
    #[serde(default)]
    pub sharp2: u32,
    /// Haar cutoffs everywhere; otherwise smooth bumps with `decay`.
    pub haar: bool,
    #[serde(default = "default_decay")]
    pub decay: u32,
    /// Non-lacunary slot (0..3) of the `𝓚` block; `None` for all lacunary.
    pub inner_x_nonlac: Option<usize>,
    pub inner_y_nonlac: Option<usize>,
    /// Non-lacunary slot among `φ¹_J, φ²_J, φ³_J` in the paraproduct models.
    pub para_nonlac: Option<usize>,
}

fn default_decay() -> u32 {
    4
}

impl ModelOperatorSpec {
    /// Haar spec over `𝓘 × 𝓙` with `𝓚 = 𝓘`, `𝓛 = 𝓙`, first slots non-lacunary.
    pub fn haar_product(model: ModelKind, xs: &[DyadicInterval], ys: &[DyadicInterval]) -> Self {
        Self {
            model,
            rectangles: crate::dyadic::product_rectangles(xs, ys),
            inner_x: xs.to_vec(),
            inner_y: ys.to_vec(),
            sharp1: 1,
            sharp2: 1,
            haar: true,
            decay: default_decay(),
            inner_x_nonlac: Some(0),
            inner_y_nonlac: Some(0),
            para_nonlac: Some(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, slot) in [
            ("inner_x_nonlac", self.inner_x_nonlac),
            ("inner_y_nonlac", self.inner_y_nonlac),
            ("para_nonlac", self.para_nonlac),
        ] {
            if slot.is_some_and(|s| s > 2) {
                return Err(Error::Config(format!("{name} must be 0, 1 or 2")));
            }
        }
        if !self.haar && self.decay == 0 {
            return Err(Error::Config("smooth families need decay ≥ 1".into()));
        }
        Ok(())
    }

    pub fn family(&self, lacunary: bool) -> CutoffFamily {
        if self.haar {
            CutoffFamily::haar(lacunary)
        } else {
            CutoffFamily::smooth(lacunary, self.decay)
        }
    }

    fn triple(&self, nonlac: Option<usize>) -> [CutoffFamily; 3] {
        [0, 1, 2].map(|i| self.family(nonlac != Some(i)))
    }

    /// `φ¹_I, ψ²_I, ψ³_I`.
    pub fn outer_x_families(&self) -> [CutoffFamily; 3] {
        self.triple(Some(0))
    }

    pub fn outer_y_families(&self) -> [CutoffFamily; 3] {
        if self.model.paraproduct_y() {
            self.triple(self.para_nonlac)
        } else {
            self.triple(Some(0))
        }
    }

    /// The `𝓚` block localized to `I`.
    pub fn block_x(&self, i: DyadicInterval) -> BilinearBlockSpec {
        let variant = if self.model.sharp_x() {
            BlockVariant::FixedScale(i, self.sharp1)
        } else {
            BlockVariant::Local(i)
        };
        BilinearBlockSpec {
            collection: self.inner_x.clone(),
            families: self.triple(self.inner_x_nonlac),
            variant,
        }
    }

    pub fn block_y(&self, j: DyadicInterval) -> BilinearBlockSpec {
        let variant = if self.model.sharp_y() {
            BlockVariant::FixedScale(j, self.sharp2)
        } else {
            BlockVariant::Local(j)
        };
        BilinearBlockSpec {
            collection: self.inner_y.clone(),
            families: self.triple(self.inner_y_nonlac),
            variant,
        }
    }

    /// `1/(|I|^{1/2}|J|)` for the paraproduct models, `1/(|I||J|)^{1/2}` otherwise.
    pub fn normalization(&self, r: &DyadicRectangle) -> f64 {
        let jx = r.x.length().sqrt();
        if self.model.paraproduct_y() {
            1.0 / (jx * r.y.length())
        } else {
            1.0 / (jx * r.y.length().sqrt())
        }
    }

    pub fn with_rectangles(&self, rectangles: Vec<DyadicRectangle>) -> Self {
        Self { rectangles, ..self.clone() }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// The five functions fed to a model operator.
#[derive(Debug, Clone, Copy)]
pub struct ModelInputs<'a> {
    pub f1: &'a GridFunction1D,
    pub f2: &'a GridFunction1D,
    pub g1: &'a GridFunction1D,
    pub g2: &'a GridFunction1D,
    pub h: &'a GridFunction2D,
}

impl ModelInputs<'_> {
    fn check(&self) -> Result<()> {
        for f in [self.f1, self.f2] {
            if f.grid != self.h.gx {
                return Err(Error::GridMismatch("f and h".into()));
            }
        }
        for g in [self.g1, self.g2] {
            if g.grid != self.h.gy {
                return Err(Error::GridMismatch("g and h".into()));
            }
        }
        Ok(())
    }
}

/// `⟨B_{𝓚,I}(v₁,v₂), φ¹_I⟩` for every `I` in `outer`, sharing coefficients and Gram entries.
fn flag_coefficients(
    spec: &ModelOperatorSpec,
    x_axis: bool,
    outer: &[DyadicInterval],
    v1: &GridFunction1D,
    v2: &GridFunction1D,
) -> Result<BTreeMap<DyadicInterval, f64>> {
    let grid = v1.grid;
    let w = grid.cell_width();
    let (inner, fam) = if x_axis {
        (&spec.inner_x, spec.triple(spec.inner_x_nonlac))
    } else {
        (&spec.inner_y, spec.triple(spec.inner_y_nonlac))
    };
    let sharp = if x_axis {
        spec.model.sharp_x().then_some(spec.sharp1)
    } else {
        spec.model.sharp_y().then_some(spec.sharp2)
    };
    let c1 = all_coefficients(v1, inner, &fam[0])?;
    let c2 = all_coefficients(v2, inner, &fam[1])?;
    let weights: Vec<(DyadicInterval, f64, Bump)> = inner
        .iter()
        .map(|k| Ok((*k, c1.get(k) * c2.get(k) / k.length().sqrt(), fam[2].sample(k, grid)?)))
        .collect::<Result<_>>()?;
    let phi1 = if x_axis { spec.outer_x_families()[0] } else { spec.outer_y_families()[0] };
    outer
        .par_iter()
        .map(|i| {
            let b = phi1.sample(i, grid)?;
            let terms: Vec<f64> = weights
                .iter()
                .filter(|(k, c, _)| {
                    *c != 0.0
                        && match sharp {
                            Some(s) => k.scale == i.scale + s as i32,
                            None => k.scale >= i.scale,
                        }
                })
                .map(|(_, c, kb)| c * bump_inner(kb, &b, w))
                .collect();
            Ok((*i, pairwise_sum(&terms)))
        })
        .collect()
}

/// Per-rectangle coefficients `c_R` with `Π = Σ_R c_R φ³_I ⊗ φ³_J`.
pub fn model_coefficients(spec: &ModelOperatorSpec, inputs: ModelInputs<'_>) -> Result<Vec<(DyadicRectangle, f64)>> {
    spec.validate()?;
    inputs.check()?;
    let (xs, ys) = projections(&spec.rectangles);
    let fx = spec.outer_x_families();
    let fy = spec.outer_y_families();
    let a = flag_coefficients(spec, true, &xs, inputs.f1, inputs.f2)?;
    let b: BTreeMap<DyadicInterval, f64> = if spec.model.paraproduct_y() {
        let c1 = all_coefficients(inputs.g1, &ys, &fy[0])?;
        let c2 = all_coefficients(inputs.g2, &ys, &fy[1])?;
        ys.iter().map(|j| (*j, c1.get(j) * c2.get(j))).collect()
    } else {
        flag_coefficients(spec, false, &ys, inputs.g1, inputs.g2)?
    };
    let hc = tensor_coefficients(inputs.h, &xs, &fx[1], &ys, &fy[1])?;
    let xi: BTreeMap<DyadicInterval, usize> = xs.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let yi: BTreeMap<DyadicInterval, usize> = ys.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    Ok(spec
        .rectangles
        .iter()
        .map(|r| {
            let c = spec.normalization(r) * a[&r.x] * b[&r.y] * hc[xi[&r.x]][yi[&r.y]];
            (*r, c)
        })
        .collect())
}

/// Separable synthesis `Σ_R c_R φ_I(x) φ'_J(y)`, grouped by `J` and accumulated in a fixed order.
pub fn synthesize_2d(
    gx: Grid1D,
    gy: Grid1D,
    terms: &[(DyadicRectangle, f64)],
    fx: &CutoffFamily,
    fy: &CutoffFamily,
) -> Result<GridFunction2D> {
    let nx = gx.len();
    let mut by_j: BTreeMap<DyadicInterval, Vec<(DyadicInterval, f64)>> = BTreeMap::new();
    for (r, c) in terms {
        if *c != 0.0 {
            by_j.entry(r.y).or_default().push((r.x, *c));
        }
    }
    let rows: Vec<(Bump, Vec<f64>)> = by_j
        .par_iter()
        .map(|(j, xs)| {
            let mut u = vec![0.0; nx];
            for (i, c) in xs {
                fx.sample(i, gx)?.add_to(*c, &mut u);
            }
            Ok((fy.sample(j, gy)?, u))
        })
        .collect::<Result<_>>()?;
    let mut out = GridFunction2D::zeros(gx, gy);
    for (b, u) in &rows {
        for (k, v) in b.values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let row = &mut out.values[(b.start + k) * nx..(b.start + k + 1) * nx];
            for (o, x) in row.iter_mut().zip(u) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

pub fn model_operator(spec: &ModelOperatorSpec, inputs: ModelInputs<'_>) -> Result<GridFunction2D> {
    let terms = model_coefficients(spec, inputs)?;
    synthesize_2d(
        inputs.h.gx,
        inputs.h.gy,
        &terms,
        &spec.outer_x_families()[2],
        &spec.outer_y_families()[2],
    )
}

/// Largest rectangle or inner collection the oracle accepts.
pub const ORACLE_CAP: usize = 64;

fn full_samples(fam: &CutoffFamily, iv: &DyadicInterval, grid: Grid1D) -> Result<Vec<f64>> {
    Ok(fam.sample(iv, grid)?.to_grid(grid).values)
}

fn naive_inner(a: &[f64], b: &[f64], w: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s * w
}

/// `B_{𝓚,I}(v₁,v₂)` on the whole grid, recomputed from scratch.
fn naive_block(spec: &BilinearBlockSpec, v1: &GridFunction1D, v2: &GridFunction1D) -> Result<Vec<f64>> {
    let grid = v1.grid;
    let w = grid.cell_width();
    let mut out = vec![0.0; grid.len()];
    for q in &spec.collection {
        if !spec.admits(q, grid)? {
            continue;
        }
        let a = naive_inner(&v1.values, &full_samples(&spec.families[0], q, grid)?, w);
        let b = naive_inner(&v2.values, &full_samples(&spec.families[1], q, grid)?, w);
        let phi = full_samples(&spec.families[2], q, grid)?;
        let c = a * b / q.length().sqrt();
        for i in 0..out.len() {
            out[i] += c * phi[i];
        }
    }
    Ok(out)
}

/// Nested-loop evaluation of the model sum with full-grid quadrature for every inner product.
pub fn oracle_model_operator(spec: &ModelOperatorSpec, inputs: ModelInputs<'_>) -> Result<GridFunction2D> {
    spec.validate()?;
    inputs.check()?;
    for (what, n) in [
        ("rectangles", spec.rectangles.len()),
        ("inner_x", spec.inner_x.len()),
        ("inner_y", spec.inner_y.len()),
    ] {
        if n > ORACLE_CAP {
            return Err(Error::Cap(format!("oracle takes at most {ORACLE_CAP} {what}, got {n}")));
        }
    }
    let (gx, gy) = (inputs.h.gx, inputs.h.gy);
    let (nx, ny) = (gx.len(), gy.len());
    let (wx, wy) = (gx.cell_width(), gy.cell_width());
    let fx = spec.outer_x_families();
    let fy = spec.outer_y_families();
    let mut out = GridFunction2D::zeros(gx, gy);
    for r in &spec.rectangles {
        let (i, j) = (r.x, r.y);
        let phi1_i = full_samples(&fx[0], &i, gx)?;
        let psi2_i = full_samples(&fx[1], &i, gx)?;
        let psi3_i = full_samples(&fx[2], &i, gx)?;
        let phi2_j = full_samples(&fy[1], &j, gy)?;
        let phi3_j = full_samples(&fy[2], &j, gy)?;
        let a = naive_inner(&naive_block(&spec.block_x(i), inputs.f1, inputs.f2)?, &phi1_i, wx);
        let b = if spec.model.paraproduct_y() {
            let phi1_j = full_samples(&fy[0], &j, gy)?;
            naive_inner(&inputs.g1.values, &phi1_j, wy) * naive_inner(&inputs.g2.values, &phi2_j, wy)
        } else {
            let phi1_j = full_samples(&fy[0], &j, gy)?;
            naive_inner(&naive_block(&spec.block_y(j), inputs.g1, inputs.g2)?, &phi1_j, wy)
        };
        let mut hc = 0.0;
        for iy in 0..ny {
            for ix in 0..nx {
                hc += inputs.h.values[iy * nx + ix] * psi2_i[ix] * phi2_j[iy];
            }
        }
        hc *= wx * wy;
        let c = spec.normalization(r) * a * b * hc;
        for iy in 0..ny {
            for ix in 0..nx {
                out.values[iy * nx + ix] += c * psi3_i[ix] * phi3_j[iy];
            }
        }
    }
    Ok(out)
}

/// `Λ = ⟨Π(f₁,f₂,g₁,g₂,h), dual⟩`.
pub fn multilinear_form(spec: &ModelOperatorSpec, inputs: ModelInputs<'_>, dual: &GridFunction2D) -> Result<f64> {
    inputs.h.check_same(dual)?;
    let p = model_operator(spec, inputs)?;
    let prods: Vec<f64> = p.values.iter().zip(&dual.values).map(|(a, b)| a * b).collect();
    Ok(pairwise_sum(&prods) * p.cell_area())
}

/// `𝒰_{ñ,m̃} = {Mv₁ ≤ C2^ñ|V₁|} ∩ {Mv₂ ≤ C2^m̃|V₂|}`.
pub fn level_set_u(
    v1: &GridFunction1D,
    v2: &GridFunction1D,
    n: i32,
    m: i32,
    c: f64,
    measures: [f64; 2],
) -> Result<Vec<bool>> {
    if v1.grid != v2.grid {
        return Err(Error::GridMismatch("level-set inputs".into()));
    }
    let m1 = maximal_function(v1, ScaleWindow::full(v1.grid))?;
    let m2 = maximal_function(v2, ScaleWindow::full(v2.grid))?;
    let (t1, t2) = (c * pow2(n) * measures[0], c * pow2(m) * measures[1]);
    Ok(m1.values.iter().zip(&m2.values).map(|(a, b)| *a <= t1 && *b <= t2).collect())
}

fn check_outer(outer: &[DyadicInterval], u: &[bool], grid: Grid1D) -> Result<()> {
    if u.len() != grid.len() {
        return Err(Error::GridMismatch("level-set mask".into()));
    }
    let counter = CellCounter::new(grid, u);
    for p in outer {
        if counter.count(p)? == 0 {
            return Err(Error::Precondition(format!("{p} does not meet the level set")));
        }
    }
    Ok(())
}

/// Both sides of the local size estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSizeCheck {
    /// `size_{𝓟'}((⟨B^{#,H}_{𝓠,P}(v₁,v₂), φ^H_P⟩)_P)`.
    pub lhs: f64,
    /// `sup |⟨v₁,φ¹_Q⟩|/|Q|^{1/2} · sup |⟨v₂,φ²_Q⟩|/|Q|^{1/2}` over `Q ∩ 𝒰 ≠ ∅`.
    pub rhs: f64,
}

impl LocalSizeCheck {
    /// `lhs/rhs`, or 0 when both vanish.
    pub fn constant(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

/// `block` must be a fixed-scale block with a Haar third family; its reference interval is replaced by each `P`.
pub fn local_size_bound_check(
    block: &BilinearBlockSpec,
    v1: &GridFunction1D,
    v2: &GridFunction1D,
    u: &[bool],
    outer: &[DyadicInterval],
) -> Result<LocalSizeCheck> {
    if !matches!(block.variant, BlockVariant::FixedScale(..)) || !block.families[2].is_haar() {
        return Err(Error::Config("local size check needs a fixed-scale Haar block".into()));
    }
    let grid = v1.grid;
    check_outer(outer, u, grid)?;
    let mut seq = CoefficientSequence::new(outer.iter().copied());
    for p in outer {
        let phi = CutoffFamily::HAAR_NONLAC.sample(p, grid)?;
        seq.set(*p, block_pairing(&block.at(*p), v1, v2, &phi)?)?;
    }
    let lhs = if outer.is_empty() { 0.0 } else { size(&seq, outer, false)?.0 };
    let sup = |v: &GridFunction1D, fam: &CutoffFamily| -> Result<f64> {
        let mut s: f64 = 0.0;
        for q in &block.collection {
            if meets(u, grid, q)? {
                s = s.max(crate::wavelets::coefficient(v, q, fam)?.abs() / q.length().sqrt());
            }
        }
        Ok(s)
    };
    let rhs = sup(v1, &block.families[0])? * sup(v2, &block.families[1])?;
    Ok(LocalSizeCheck { lhs, rhs })
}

/// One `P` where the localization identity or inequality fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationViolation {
    pub interval: DyadicInterval,
    /// `⟨B^H_{𝓠,P}(v₁,v₂), φ^H_P⟩`.
    pub lhs: f64,
    /// `⟨B^{ñ,m̃,0}(v₁,v₂), φ^H_P⟩`.
    pub rhs: f64,
}

/// Tolerance of the per-interval comparison.
pub const LOCALIZATION_TOL: f64 = 1e-12;

/// Compares `⟨B^H_{𝓠,P}, φ^H_P⟩` with the `P`-independent localized block for every `P ∈ 𝓟'`:
/// equality when the third family is lacunary, `|lhs| ≤ |rhs|` otherwise.
pub fn energy_localization_check(
    block: &BilinearBlockSpec,
    v1: &GridFunction1D,
    v2: &GridFunction1D,
    u: &[bool],
    outer: &[DyadicInterval],
) -> Result<Vec<LocalizationViolation>> {
    if !matches!(block.variant, BlockVariant::Local(_)) || !block.families[2].is_haar() {
        return Err(Error::Config("energy localization needs a local Haar block".into()));
    }
    block.validate()?;
    let grid = v1.grid;
    check_outer(outer, u, grid)?;
    let lac = block.families[2].is_lacunary();
    let localized = BilinearBlockSpec::new(
        block.collection.clone(),
        block.families,
        if lac {
            BlockVariant::LocalizedLac(u.to_vec())
        } else {
            BlockVariant::LocalizedNonlac(u.to_vec())
        },
    )?;
    let mut out = Vec::new();
    for p in outer {
        let phi = CutoffFamily::HAAR_NONLAC.sample(p, grid)?;
        let lhs = block_pairing(&block.at(*p), v1, v2, &phi)?;
        let rhs = block_pairing(&localized, v1, v2, &phi)?;
        let bad = if lac {
            (lhs - rhs).abs() > LOCALIZATION_TOL
        } else {
            lhs.abs() > rhs.abs() + LOCALIZATION_TOL
        };
        if bad {
            out.push(LocalizationViolation { interval: *p, lhs, rhs });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::enumerate_dyadic;
    use crate::rng::trial_rng;
    use crate::wavelets::haar_eval;
    use rand::Rng;

    fn iv(k: i32, n: i64) -> DyadicInterval {
        DyadicInterval::new(k, n)
    }

    fn random_1d(g: Grid1D, rng: &mut impl Rng) -> GridFunction1D {
        let v = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        GridFunction1D::new(g, v).unwrap()
    }

    fn random_2d(g: Grid1D, rng: &mut impl Rng) -> GridFunction2D {
        let v = (0..g.len() * g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        GridFunction2D::new(g, g, v).unwrap()
    }

    #[test]
    fn empty_block_is_zero() {
        let g = Grid1D::new(0, 3).unwrap();
        let f = GridFunction1D::from_fn(g, |x| x);
        let spec = BilinearBlockSpec::new(vec![], [CutoffFamily::HAAR_LAC; 3], BlockVariant::Global).unwrap();
        assert!(bilinear_block(&spec, &f, &f).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn one_term_block() {
        let g = Grid1D::new(0, 3).unwrap();
        let q = iv(0, 0);
        let v = GridFunction1D::indicator(g, &iv(-1, 0)).unwrap();
        let fams = [CutoffFamily::HAAR_NONLAC, CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_LAC];
        let spec = BilinearBlockSpec::new(vec![q], fams, BlockVariant::Global).unwrap();
        let out = bilinear_block(&spec, &v, &v).unwrap();
        // ⟨χ_{[0,1/2)}, χ_{[0,1)}⟩ = 1/2 and ⟨χ_{[0,1/2)}, ψ_{[0,1)}⟩ = 1/2
        for (i, o) in out.values.iter().enumerate() {
            assert!((o - 0.25 * haar_eval(&q, true, g.point(i))).abs() < 1e-15);
        }
        let full = GridFunction1D::indicator(g, &q).unwrap();
        let out = bilinear_block(&spec, &full, &v).unwrap();
        for (i, o) in out.values.iter().enumerate() {
            assert!((o - 0.5 * haar_eval(&q, true, g.point(i))).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_scale_filter() {
        let g = Grid1D::new(1, 3).unwrap();
        let pyramid = enumerate_dyadic(1, -3, 1);
        let p = iv(-1, 0);
        let spec = BilinearBlockSpec::new(pyramid, [CutoffFamily::HAAR_LAC; 3], BlockVariant::FixedScale(p, 1)).unwrap();
        let active = spec.active(g).unwrap();
        assert_eq!(active.len(), 2);
        assert!(active.iter().all(|q| q.length() >= 1.0 && q.length() < 2.0));
    }

    #[test]
    fn family_rules() {
        let h = CutoffFamily::haar;
        assert!(BilinearBlockSpec::new(vec![], [h(false), h(false), h(true)], BlockVariant::Global).is_err());
        assert!(BilinearBlockSpec::new(vec![], [h(false), h(true), h(true)], BlockVariant::LocalizedNonlac(vec![])).is_err());
        assert!(BilinearBlockSpec::new(vec![], [h(true), h(true), h(false)], BlockVariant::LocalizedNonlac(vec![])).is_ok());
        assert!(BilinearBlockSpec::new(vec![], [h(false), h(true), h(true)], BlockVariant::LocalizedLac(vec![])).is_ok());
    }

    fn small_spec(model: ModelKind, haar: bool, rng: &mut impl Rng) -> ModelOperatorSpec {
        let all = enumerate_dyadic(0, -3, 0);
        let pick = |rng: &mut dyn rand::RngCore, n: usize| -> Vec<DyadicInterval> {
            let mut v: Vec<DyadicInterval> = all.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
            v.truncate(n);
            if v.is_empty() {
                v.push(all[0]);
            }
            v
        };
        let xs = pick(rng, 8);
        let ys = pick(rng, 8);
        let mut spec = ModelOperatorSpec::haar_product(model, &xs, &ys);
        spec.inner_x = pick(rng, 12);
        spec.inner_y = pick(rng, 12);
        spec.haar = haar;
        spec.sharp1 = rng.random_range(0..3);
        spec.sharp2 = rng.random_range(0..3);
        let slot = |rng: &mut dyn rand::RngCore| match rng.random_range(0..4) {
            3 => None,
            s => Some(s),
        };
        spec.inner_x_nonlac = slot(rng);
        spec.inner_y_nonlac = slot(rng);
        spec.para_nonlac = slot(rng);
        spec
    }

    #[test]
    fn fast_path_matches_oracle() {
        let g = Grid1D::new(0, 4).unwrap();
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let mut rng = trial_rng(seed, 0);
            let model = ModelKind::ALL[seed as usize % 5];
            let spec = small_spec(model, seed % 2 == 0, &mut rng);
            let (f1, f2, g1, g2) = (random_1d(g, &mut rng), random_1d(g, &mut rng), random_1d(g, &mut rng), random_1d(g, &mut rng));
            let h = random_2d(g, &mut rng);
            let inputs = ModelInputs { f1: &f1, f2: &f2, g1: &g1, g2: &g2, h: &h };
            let fast = model_operator(&spec, inputs).unwrap();
            let slow = oracle_model_operator(&spec, inputs).unwrap();
            worst = worst.max(fast.max_abs_diff(&slow).unwrap());
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn single_rectangle_hand_value() {
        let g = Grid1D::new(0, 3).unwrap();
        let u = iv(0, 0);
        let f = GridFunction1D::indicator(g, &iv(-1, 0)).unwrap();
        let one = GridFunction1D::indicator(g, &u).unwrap();
        let h = GridFunction2D::tensor(&f, &f);
        let spec = ModelOperatorSpec::haar_product(ModelKind::Flag0Flag0, &[u], &[u]);
        let inputs = ModelInputs { f1: &one, f2: &f, g1: &one, g2: &f, h: &h };
        let out = model_operator(&spec, inputs).unwrap();
        // B(1, χ) = ⟨1,φ⟩⟨χ,ψ⟩ψ = (1)(1/2)ψ, ⟨B, φ⟩ = 0: the product vanishes.
        assert!(out.values.iter().all(|v| *v == 0.0));
        let mut spec = spec;
        spec.inner_x_nonlac = Some(2);
        spec.inner_y_nonlac = Some(2);
        // B = ⟨1,ψ⟩⟨χ,ψ⟩φ = 0·(1/2)φ, so pick f₁ = χ: (1/2)(1/2)φ, ⟨B, φ⟩ = 1/4.
        let inputs = ModelInputs { f1: &f, f2: &f, g1: &f, g2: &f, h: &h };
        let out = model_operator(&spec, inputs).unwrap();
        let expect = 0.25 * 0.25 * 0.25;
        for iy in 0..g.len() {
            for ix in 0..g.len() {
                let want = expect * haar_eval(&u, true, g.point(ix)) * haar_eval(&u, true, g.point(iy));
                assert!((out.at(ix, iy) - want).abs() < 1e-15);
            }
        }
        let slow = oracle_model_operator(&spec, inputs).unwrap();
        assert!(out.max_abs_diff(&slow).unwrap() < 1e-15);
    }

    #[test]
    fn zero_h_and_linearity() {
        let g = Grid1D::new(0, 4).unwrap();
        let mut rng = trial_rng(3, 0);
        let spec = small_spec(ModelKind::Flag0FlagSharp, true, &mut rng);
        let (f1, f2, g1, g2) = (random_1d(g, &mut rng), random_1d(g, &mut rng), random_1d(g, &mut rng), random_1d(g, &mut rng));
        let (h1, h2) = (random_2d(g, &mut rng), random_2d(g, &mut rng));
        let z = GridFunction2D::zeros(g, g);
        let run = |h: &GridFunction2D| model_operator(&spec, ModelInputs { f1: &f1, f2: &f2, g1: &g1, g2: &g2, h }).unwrap();
        assert!(run(&z).values.iter().all(|v| *v == 0.0));
        let sum = run(&h1.add(&h2).unwrap());
        let parts = run(&h1).add(&run(&h2)).unwrap();
        assert!(sum.max_abs_diff(&parts).unwrap() < 1e-12);
    }

    #[test]
    fn form_positivity_and_zero_dual() {
        let g = Grid1D::new(0, 4).unwrap();
        let mut rng = trial_rng(4, 0);
        let spec = small_spec(ModelKind::Flag0Flag0, true, &mut rng);
        let (f1, f2, g1, g2) = (random_1d(g, &mut rng), random_1d(g, &mut rng), random_1d(g, &mut rng), random_1d(g, &mut rng));
        let h = random_2d(g, &mut rng);
        let inputs = ModelInputs { f1: &f1, f2: &f2, g1: &g1, g2: &g2, h: &h };
        assert_eq!(multilinear_form(&spec, inputs, &GridFunction2D::zeros(g, g)).unwrap(), 0.0);
        let p = model_operator(&spec, inputs).unwrap();
        let l = multilinear_form(&spec, inputs, &p).unwrap();
        assert!(l >= 0.0);
        assert!((l - p.lp_norm(2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let mut rng = trial_rng(5, 0);
        let spec = small_spec(ModelKind::FlagSharpParaproduct, false, &mut rng);
        let s = spec.to_toml().unwrap();
        assert_eq!(ModelOperatorSpec::from_toml(&s).unwrap(), spec);
    }

    #[test]
    fn localization_identity_and_inequality() {
        let g = Grid1D::new(0, 5).unwrap();
        let coll = enumerate_dyadic(0, -5, 0);
        for seed in 0..10u64 {
            let mut rng = trial_rng(seed, 1);
            let v1 = random_1d(g, &mut rng);
            let v2 = random_1d(g, &mut rng);
            let u = level_set_u(&v1, &v2, -1, -1, 1.0, [1.0, 1.0]).unwrap();
            if !u.iter().any(|b| *b) {
                continue;
            }
            let outer: Vec<DyadicInterval> = coll.iter().copied().filter(|p| meets(&u, g, p).unwrap()).collect();
            for third_lac in [true, false] {
                let fams = if third_lac {
                    [CutoffFamily::haar(seed % 2 == 0), CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_LAC]
                } else {
                    [CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_NONLAC]
                };
                let block = BilinearBlockSpec::new(coll.clone(), fams, BlockVariant::Local(coll[0])).unwrap();
                let v = energy_localization_check(&block, &v1, &v2, &u, &outer).unwrap();
                assert!(v.is_empty(), "{v:?}");
            }
        }
    }

    #[test]
    fn local_size_examples() {
        let g = Grid1D::new(0, 4).unwrap();
        let coll = enumerate_dyadic(0, -3, 0);
        let z = GridFunction1D::zeros(g);
        let u = vec![true; g.len()];
        let fams = [CutoffFamily::HAAR_NONLAC, CutoffFamily::HAAR_LAC, CutoffFamily::HAAR_LAC];
        let block = BilinearBlockSpec::new(coll.clone(), fams, BlockVariant::FixedScale(coll[0], 1)).unwrap();
        let c = local_size_bound_check(&block, &z, &z, &u, &coll).unwrap();
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let mut rng = trial_rng(seed, 2);
            let (v1, v2) = (random_1d(g, &mut rng), random_1d(g, &mut rng));
            let c = local_size_bound_check(&block, &v1, &v2, &u, &coll).unwrap();
            worst = worst.max(c.constant());
        }
        assert!(worst <= 4.0, "{worst}");
        let p = iv(-2, 1);
        let single = BilinearBlockSpec::new(vec![iv(0, 0)], fams, BlockVariant::FixedScale(p, 2)).unwrap();
        let mut rng = trial_rng(9, 2);
        let (v1, v2) = (random_1d(g, &mut rng), random_1d(g, &mut rng));
        let c = local_size_bound_check(&single, &v1, &v2, &u, &[p]).unwrap();
        assert!(c.lhs <= c.rhs);
    }
}
