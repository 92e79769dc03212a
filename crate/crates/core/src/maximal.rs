//! Dyadic maximal functions, square functions and the hybrid 2D operators.

use rand::Rng;
use rayon::prelude::*;

use crate::dyadic::{enumerate_dyadic, DyadicInterval};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction1D, GridFunction2D};
use crate::rng::trial_rng;
use crate::wavelets::{all_coefficients, tensor_coefficients, CutoffFamily, HaarPyramid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HybridKind {
    M,
    S,
    SS,
    SsH,
    MS,
    MsH,
    SM,
    SmH,
    MM,
}

impl HybridKind {
    pub const ALL: [HybridKind; 9] = [
        Self::M,
        Self::S,
        Self::SS,
        Self::SsH,
        Self::MS,
        Self::MsH,
        Self::SM,
        Self::SmH,
        Self::MM,
    ];

    pub fn is_two_dimensional(&self) -> bool {
        !matches!(self, Self::M | Self::S)
    }

    /// Required `(x, y)` families, `None` for the maximal kinds.
    pub fn required_families(&self) -> Option<(CutoffFamily, CutoffFamily)> {
        let s = |lac| CutoffFamily::smooth(lac, 10);
        let h = CutoffFamily::haar;
        match self {
            Self::SS => Some((s(true), s(true))),
            Self::SsH => Some((h(true), h(true))),
            Self::MS => Some((s(false), s(true))),
            Self::MsH => Some((h(false), h(true))),
            Self::SM => Some((s(true), s(false))),
            Self::SmH => Some((h(true), h(false))),
            Self::S => Some((h(true), h(true))),
            Self::M | Self::MM => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::M => "M",
            Self::S => "S",
            Self::SS => "SS",
            Self::SsH => "SS_H",
            Self::MS => "MS",
            Self::MsH => "MS_H",
            Self::SM => "SM",
            Self::SmH => "SM_H",
            Self::MM => "MM",
        }
    }
}

/// How contributions attached to nested intervals combine at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Sum,
    Max,
}

impl Combine {
    #[inline]
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Combine::Sum => a + b,
            Combine::Max => a.max(b),
        }
    }
}

/// Per-cell value `⊕_{I ∋ cell} v_I`, pushing contributions down the dyadic tree.
pub fn push_down(grid: Grid1D, contributions: &[(DyadicInterval, f64)], op: Combine) -> Result<Vec<f64>> {
    let levels = (grid.box_exp - grid.cell_scale()) as usize;
    let mut acc: Vec<Vec<f64>> = (0..=levels).map(|s| vec![0.0; 1usize << (levels - s)]).collect();
    for (iv, v) in contributions {
        grid.cell_range(iv)?;
        let s = (iv.scale - grid.cell_scale()) as usize;
        let slot = &mut acc[s][iv.pos as usize];
        *slot = op.apply(*slot, *v);
    }
    for s in (0..levels).rev() {
        let (lo, hi) = acc.split_at_mut(s + 1);
        let parent = &hi[0];
        for (n, v) in lo[s].iter_mut().enumerate() {
            *v = op.apply(parent[n / 2], *v);
        }
    }
    Ok(acc.swap_remove(0))
}

/// Vector-valued [`push_down`] along `x`; result is laid out `[iy * nx + ix]`.
pub fn push_down_rows(
    grid: Grid1D,
    ny: usize,
    contributions: &[(DyadicInterval, Vec<f64>)],
    op: Combine,
) -> Result<Vec<f64>> {
    let levels = (grid.box_exp - grid.cell_scale()) as usize;
    let mut acc: Vec<Vec<Vec<f64>>> = (0..=levels)
        .map(|s| vec![Vec::new(); 1usize << (levels - s)])
        .collect();
    for (iv, v) in contributions {
        grid.cell_range(iv)?;
        let s = (iv.scale - grid.cell_scale()) as usize;
        let slot = &mut acc[s][iv.pos as usize];
        if slot.is_empty() {
            *slot = v.clone();
        } else {
            slot.iter_mut().zip(v).for_each(|(a, b)| *a = op.apply(*a, *b));
        }
    }
    for s in (0..levels).rev() {
        let (lo, hi) = acc.split_at_mut(s + 1);
        let parent = &hi[0];
        lo[s].par_iter_mut().enumerate().for_each(|(n, v)| {
            let p = &parent[n / 2];
            if p.is_empty() {
                return;
            }
            if v.is_empty() {
                *v = p.clone();
            } else {
                v.iter_mut().zip(p).for_each(|(a, b)| *a = op.apply(*b, *a));
            }
        });
        hi[0] = Vec::new();
    }
    let nx = grid.len();
    let mut out = vec![0.0; nx * ny];
    for (ix, col) in acc[0].iter().enumerate() {
        if col.is_empty() {
            continue;
        }
        for (iy, v) in col.iter().enumerate() {
            out[iy * nx + ix] = *v;
        }
    }
    Ok(out)
}

/// Scale window `[k_min, k_max]` of the dyadic suprema; defaults to cell..box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleWindow {
    pub k_min: i32,
    pub k_max: i32,
}

impl ScaleWindow {
    pub fn full(grid: Grid1D) -> Self {
        Self {
            k_min: grid.cell_scale(),
            k_max: grid.box_exp,
        }
    }

    pub fn intervals(&self, grid: Grid1D) -> Vec<DyadicInterval> {
        enumerate_dyadic(grid.box_exp, self.k_min.max(grid.cell_scale()), self.k_max)
    }
}

/// Dyadic maximal function `Mf` on every cell, over the scale window.
pub fn maximal_function(f: &GridFunction1D, window: ScaleWindow) -> Result<GridFunction1D> {
    let p = HaarPyramid::new(&f.abs());
    let contributions: Vec<(DyadicInterval, f64)> = window
        .intervals(f.grid)
        .into_iter()
        .map(|iv| Ok((iv, p.integral(&iv)? / iv.length())))
        .collect::<Result<_>>()?;
    let values = push_down(f.grid, &contributions, Combine::Max)?;
    GridFunction1D::new(f.grid, values)
}

/// `Mf(x)`: sup over dyadic intervals of the box containing `x` of the average of `|f|`.
pub fn maximal_1d(f: &GridFunction1D, x: f64) -> f64 {
    let grid = f.grid;
    let cell = grid.cell_of(x);
    let p = HaarPyramid::new(&f.abs());
    let mut best: f64 = 0.0;
    for k in grid.cell_scale()..=grid.box_exp {
        let iv = grid.cell_interval(cell).ancestor(k);
        if let Ok(s) = p.integral(&iv) {
            best = best.max(s / iv.length());
        }
    }
    best
}

/// `Sf = (Σ_I |⟨f,ψ_I⟩|²/|I| χ_I)^{1/2}` over the collection.
pub fn square_1d(f: &GridFunction1D, collection: &[DyadicInterval], family: &CutoffFamily) -> Result<GridFunction1D> {
    if !family.is_lacunary() {
        return Err(Error::Config("the square function needs a lacunary family".into()));
    }
    let c = all_coefficients(f, collection, family)?;
    let contributions: Vec<(DyadicInterval, f64)> = collection
        .iter()
        .map(|iv| (*iv, c.get(iv).powi(2) / iv.length()))
        .collect();
    let values = push_down(f.grid, &contributions, Combine::Sum)?;
    GridFunction1D::new(f.grid, values.into_iter().map(f64::sqrt).collect())
}

/// Collections along each axis for the hybrid operators.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisCollections {
    pub x: Vec<DyadicInterval>,
    pub y: Vec<DyadicInterval>,
}

impl AxisCollections {
    pub fn full(h: &GridFunction2D) -> Self {
        Self {
            x: ScaleWindow::full(h.gx).intervals(h.gx),
            y: ScaleWindow::full(h.gy).intervals(h.gy),
        }
    }

    /// Full pyramids without single-cell intervals, so Haar wavelets are resolved.
    pub fn lacunary_pyramids(gx: Grid1D, gy: Grid1D) -> Self {
        Self {
            x: enumerate_dyadic(gx.box_exp, gx.cell_scale() + 1, gx.box_exp),
            y: enumerate_dyadic(gy.box_exp, gy.cell_scale() + 1, gy.box_exp),
        }
    }
}

/// Column profile `Σ/max over J ∋ y` of per-`J` values.
fn column(grid: Grid1D, ys: &[DyadicInterval], vals: impl Iterator<Item = f64>, op: Combine) -> Result<Vec<f64>> {
    let contributions: Vec<(DyadicInterval, f64)> = ys.iter().copied().zip(vals).collect();
    push_down(grid, &contributions, op)
}

/// The hybrid operators on `h`; families are `(x, y)` and must match the kind.
pub fn hybrid_2d(
    h: &GridFunction2D,
    kind: HybridKind,
    collections: &AxisCollections,
    families: (CutoffFamily, CutoffFamily),
) -> Result<GridFunction2D> {
    if !kind.is_two_dimensional() {
        return Err(Error::Config(format!("{} is one-dimensional", kind.name())));
    }
    if let Some(req) = kind.required_families() {
        let lac_ok = families.0.is_lacunary() == req.0.is_lacunary() && families.1.is_lacunary() == req.1.is_lacunary();
        let haar_ok = families.0.is_haar() == req.0.is_haar() && families.1.is_haar() == req.1.is_haar();
        if !(lac_ok && haar_ok) {
            return Err(Error::Config(format!(
                "{} requires families {:?} x {:?}, got {:?} x {:?}",
                kind.name(),
                req.0.kind,
                req.1.kind,
                families.0.kind,
                families.1.kind
            )));
        }
    }
    let (xs, ys) = (&collections.x, &collections.y);
    let (gx, gy) = (h.gx, h.gy);
    let ny = h.ny();
    let rows: Vec<(DyadicInterval, Vec<f64>)> = if kind == HybridKind::MM {
        let abs = h.map(f64::abs);
        let nx = h.nx();
        let wy = gy.cell_width();
        xs.par_iter()
            .map(|iv| {
                let r = gx.cell_range(iv)?;
                let a: Vec<f64> = (0..ny)
                    .map(|iy| abs.values[iy * nx + r.start..iy * nx + r.end].iter().sum::<f64>() * gx.cell_width() / iv.length())
                    .collect();
                let avgs = ys
                    .iter()
                    .map(|j| {
                        let rj = gy.cell_range(j)?;
                        Ok(a[rj].iter().sum::<f64>() * wy / j.length())
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((*iv, column(gy, ys, avgs.into_iter(), Combine::Max)?))
            })
            .collect::<Result<_>>()?
    } else {
        let c = tensor_coefficients(h, xs, &families.0, ys, &families.1)?;
        xs.par_iter()
            .zip(c.par_iter())
            .map(|(iv, ci)| {
                let li = iv.length();
                let v = match kind {
                    HybridKind::SS | HybridKind::SsH => {
                        column(gy, ys, ci.iter().zip(ys).map(|(c, j)| c * c / (li * j.length())), Combine::Sum)?
                    }
                    HybridKind::MS | HybridKind::MsH => {
                        let s = column(gy, ys, ci.iter().zip(ys).map(|(c, j)| c * c / j.length()), Combine::Sum)?;
                        s.into_iter().map(|v| v.sqrt() / li.sqrt()).collect()
                    }
                    HybridKind::SM | HybridKind::SmH => {
                        let m = column(gy, ys, ci.iter().zip(ys).map(|(c, j)| c.abs() / j.length()), Combine::Max)?;
                        m.into_iter().map(|v| v / li).collect()
                    }
                    _ => unreachable!(),
                };
                Ok((*iv, v))
            })
            .collect::<Result<_>>()?
    };
    let op = match kind {
        HybridKind::MS | HybridKind::MsH | HybridKind::MM => Combine::Max,
        _ => Combine::Sum,
    };
    let mut values = push_down_rows(gx, ny, &rows, op)?;
    if matches!(kind, HybridKind::SS | HybridKind::SsH | HybridKind::SM | HybridKind::SmH) {
        values.iter_mut().for_each(|v| *v = v.sqrt());
    }
    GridFunction2D::new(gx, gy, values)
}

/// Cells `(x, y)` lying in some rectangle `I × J` (from the collections) with
/// `den · |I×J ∩ Ω| > num · |I×J|`, computed with integer cell counts.
pub fn maximal_exceeds(
    omega: &[bool],
    gx: Grid1D,
    gy: Grid1D,
    collections: &AxisCollections,
    num: u64,
    den: u64,
) -> Result<Vec<bool>> {
    let (nx, ny) = (gx.len(), gy.len());
    if omega.len() != nx * ny {
        return Err(Error::GridMismatch("mask size".into()));
    }
    let rows: Vec<(DyadicInterval, Vec<f64>)> = collections
        .x
        .par_iter()
        .map(|iv| {
            let r = gx.cell_range(iv)?;
            let counts: Vec<u64> = (0..ny)
                .map(|iy| omega[iy * nx + r.start..iy * nx + r.end].iter().filter(|b| **b).count() as u64)
                .collect();
            let mut prefix = vec![0u64; ny + 1];
            for iy in 0..ny {
                prefix[iy + 1] = prefix[iy] + counts[iy];
            }
            let flags = collections
                .y
                .iter()
                .map(|j| {
                    let rj = gy.cell_range(j)?;
                    let cnt = prefix[rj.end] - prefix[rj.start];
                    let area = (r.len() * rj.len()) as u64;
                    Ok(if den * cnt > num * area { 1.0 } else { 0.0 })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((*iv, column(gy, &collections.y, flags.into_iter(), Combine::Max)?))
        })
        .collect::<Result<_>>()?;
    let v = push_down_rows(gx, ny, &rows, Combine::Max)?;
    Ok(v.into_iter().map(|x| x > 0.0).collect())
}

/// Outcome of a randomized operator-norm probe.
#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

/// Grid used by [`estimate_operator_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeGrid {
    pub box_exp: i32,
    pub res_exp: i32,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self { box_exp: 0, res_exp: 5 }
    }
}

fn random_blocks(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let levels = n.trailing_zeros();
    let mut v = vec![0.0; n];
    for _ in 0..4 {
        let block = 1usize << rng.random_range(0..=levels.min(4));
        let density: f64 = rng.random_range(0.1..1.0);
        for chunk in v.chunks_mut(block) {
            if rng.random_bool(density) {
                let a: f64 = rng.random_range(-1.0..1.0);
                chunk.iter_mut().for_each(|x| *x += a);
            }
        }
    }
    v
}

/// `‖Op f‖_p / ‖f‖_p` for a given input.
pub fn operator_norm_ratio(kind: HybridKind, p: f64, f: &OperatorInput) -> Result<f64> {
    let (num, den) = match (kind, f) {
        (HybridKind::M, OperatorInput::OneD(f)) => (maximal_function(f, ScaleWindow::full(f.grid))?.lp_norm(p), f.lp_norm(p)),
        (HybridKind::S, OperatorInput::OneD(f)) => {
            let coll = enumerate_dyadic(f.grid.box_exp, f.grid.cell_scale() + 1, f.grid.box_exp);
            (square_1d(f, &coll, &CutoffFamily::HAAR_LAC)?.lp_norm(p), f.lp_norm(p))
        }
        (k, OperatorInput::TwoD(h)) if k.is_two_dimensional() => {
            let coll = if k == HybridKind::MM {
                AxisCollections::full(h)
            } else {
                AxisCollections::lacunary_pyramids(h.gx, h.gy)
            };
            let fam = k.required_families().unwrap_or((CutoffFamily::HAAR_NONLAC, CutoffFamily::HAAR_NONLAC));
            (hybrid_2d(h, k, &coll, fam)?.lp_norm(p), h.lp_norm(p))
        }
        _ => return Err(Error::Config(format!("input dimension does not match {}", kind.name()))),
    };
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// Input to [`operator_norm_ratio`].
#[derive(Debug, Clone)]
pub enum OperatorInput {
    OneD(GridFunction1D),
    TwoD(GridFunction2D),
}

/// Max over seeded random inputs of `‖Op f‖_p/‖f‖_p`.
pub fn estimate_operator_norm(kind: HybridKind, p: f64, trials: usize, seed: u64, grid: ProbeGrid) -> Result<NormEstimate> {
    let maximal = matches!(kind, HybridKind::M | HybridKind::MM);
    let ok = if p.is_infinite() { maximal } else { p > 1.0 };
    if !ok {
        return Err(Error::Precondition(format!("p = {p} out of range for {}", kind.name())));
    }
    if trials == 0 {
        return Err(Error::Precondition("trials must be >= 1".into()));
    }
    let g = Grid1D::new(grid.box_exp, grid.res_exp)?;
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let input = if kind.is_two_dimensional() {
                let cols = random_blocks(&mut rng, g.len());
                let rows = random_blocks(&mut rng, g.len());
                let noise = random_blocks(&mut rng, g.len() * g.len());
                let vals = (0..g.len() * g.len())
                    .map(|i| rows[i / g.len()] * cols[i % g.len()] + 0.5 * noise[i])
                    .collect();
                OperatorInput::TwoD(GridFunction2D::new(g, g, vals)?)
            } else {
                OperatorInput::OneD(GridFunction1D::new(g, random_blocks(&mut rng, g.len()))?)
            };
            operator_norm_ratio(kind, p, &input)
        })
        .collect::<Result<_>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(NormEstimate { max_ratio, ratios })
}
