//! Empirical restricted weak-type constants of the model forms.

use rayon::prelude::*;

use crate::dyadic::enumerate_dyadic;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, GridFunction1D, GridFunction2D};
use crate::harness::generate::{generate_test_function, generate_test_function_2d, random_set_2d, InputKind};
use crate::maximal::HybridKind;
use crate::model::{bilinear_block, multilinear_form, BilinearBlockSpec, BlockVariant, ModelInputs, ModelKind, ModelOperatorSpec};
use crate::multiplier::ExponentTuple;
use crate::rng::trial_rng;
use crate::stopping::{build_exceptional_set, ExceptionalConstants, ExceptionalInputs, ExceptionalMode};

/// Everything fixed across the trials of one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakTypeParams {
    pub model: ModelKind,
    pub box_exp: i32,
    pub res_exp: i32,
    /// Collections hold all dyadic intervals of scales `J − depth ..= J`.
    pub depth: i32,
    pub sharp1: u32,
    pub sharp2: u32,
    pub haar: bool,
    pub exponents: ExponentTuple,
    pub constants: [f64; 3],
    pub input_kind: InputKind,
    pub input_res: i32,
}

impl WeakTypeParams {
    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.box_exp, self.res_exp)
    }

    /// Model spec over `𝓘 × 𝓘` with `𝓚 = 𝓛 = 𝓘`.
    pub fn spec(&self) -> ModelOperatorSpec {
        let xs = enumerate_dyadic(self.box_exp, self.box_exp - self.depth, self.box_exp);
        let mut spec = ModelOperatorSpec::haar_product(self.model, &xs, &xs);
        spec.sharp1 = self.sharp1;
        spec.sharp2 = self.sharp2;
        spec.haar = self.haar;
        spec
    }

    /// `flag0` (with `B`, `B̃` the global blocks) for the doubly non-sharp model, `fixed_scale` otherwise.
    pub fn mode(&self) -> ExceptionalMode {
        if self.model == ModelKind::Flag0Flag0 {
            ExceptionalMode::Flag0
        } else {
            ExceptionalMode::FixedScale
        }
    }

    fn exceptional_constants(&self) -> ExceptionalConstants {
        let [c1, c2, c3] = self.constants;
        ExceptionalConstants { c1, c2, c3, s: self.exponents.s, square: HybridKind::SsH, ..Default::default() }
    }
}

/// The sets and functions of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakTypeInputs {
    pub f: [GridFunction1D; 4],
    /// `|F₁|, |F₂|, |G₁|, |G₂|`.
    pub measures: [f64; 4],
    pub h: GridFunction2D,
    pub e: GridFunction2D,
}

impl WeakTypeInputs {
    pub fn generate(params: &WeakTypeParams, master: u64, trial: u64) -> Result<Self> {
        let g = params.grid()?;
        let mut rng = trial_rng(master, trial);
        let mut f = Vec::with_capacity(4);
        let mut measures = [0.0; 4];
        for m in &mut measures {
            let t = generate_test_function(params.input_kind, g, params.input_res, &mut rng)?;
            *m = t.measure();
            f.push(t.f);
        }
        let h = generate_test_function_2d(params.input_kind, g, g, params.input_res, &mut rng)?.f;
        let e = random_set_2d(g, g, params.input_res, &mut rng)?;
        Ok(Self { f: f.try_into().unwrap(), measures, h, e })
    }

    pub fn model_inputs(&self) -> ModelInputs<'_> {
        ModelInputs { f1: &self.f[0], f2: &self.f[1], g1: &self.f[2], g2: &self.f[3], h: &self.h }
    }
}

/// Measured quantities of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakTypeTrial {
    pub e: f64,
    pub e_prime: f64,
    /// `Λ(f₁, f₂, g₁, g₂, h, χ_{E'})`.
    pub lambda: f64,
    /// `|F₁|^{1/p₁}|F₂|^{1/q₁}|G₁|^{1/p₂}|G₂|^{1/q₂}‖h‖_s|E|^{1/r'}`.
    pub denominator: f64,
    pub ratio: f64,
    /// `Ω ⊆ Enl(Ω)` and `E' ∩ Enl(Ω) = ∅` hold.
    pub exceptional_ok: bool,
    /// Zero denominator; the ratio is not recorded.
    pub degenerate: bool,
}

impl WeakTypeTrial {
    pub fn e_prime_ok(&self) -> bool {
        self.e_prime >= 0.5 * self.e
    }
}

fn global_block(spec: &ModelOperatorSpec, x_axis: bool) -> BilinearBlockSpec {
    let top = if x_axis { spec.inner_x[0] } else { spec.inner_y[0] };
    let block = if x_axis { spec.block_x(top) } else { spec.block_y(top) };
    BilinearBlockSpec { variant: BlockVariant::Global, ..block }
}

/// Builds `E'` for the given inputs and evaluates the normalized form.
pub fn evaluate_trial(params: &WeakTypeParams, spec: &ModelOperatorSpec, inputs: &WeakTypeInputs) -> Result<WeakTypeTrial> {
    let [f1, f2, g1, g2] = &inputs.f;
    let mode = params.mode();
    let (bx, by) = if mode == ExceptionalMode::Flag0 {
        (
            Some(bilinear_block(&global_block(spec, true), f1, f2)?),
            Some(bilinear_block(&global_block(spec, false), g1, g2)?),
        )
    } else {
        (None, None)
    };
    let es = build_exceptional_set(
        ExceptionalInputs { f1, f2, g1, g2, h: &inputs.h, e: &inputs.e, b_x: bx.as_ref(), b_y: by.as_ref() },
        params.exceptional_constants(),
        mode,
    )?;
    let lambda = multilinear_form(spec, inputs.model_inputs(), &es.e_prime)?;
    let t = &params.exponents;
    let e = inputs.e.support_measure();
    let [m1, m2, m3, m4] = inputs.measures;
    let denominator = m1.powf(1.0 / t.p1)
        * m2.powf(1.0 / t.q1)
        * m3.powf(1.0 / t.p2)
        * m4.powf(1.0 / t.q2)
        * inputs.h.lp_norm(t.s)
        * e.powf(t.inv_r_conjugate());
    let degenerate = !(denominator > 0.0 && denominator.is_finite());
    Ok(WeakTypeTrial {
        e,
        e_prime: es.e_prime_measure(),
        lambda,
        denominator,
        ratio: if degenerate { 0.0 } else { lambda.abs() / denominator },
        exceptional_ok: es.verify().is_ok(),
        degenerate,
    })
}

/// Aggregate of one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakTypeEstimate {
    pub params: WeakTypeParams,
    pub trials: Vec<WeakTypeTrial>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub degenerate: usize,
    /// Fraction of non-degenerate trials with `|E'| ≥ |E|/2`.
    pub e_prime_rate: f64,
    /// Trials whose exceptional set broke its own contract.
    pub exceptional_failures: usize,
}

/// Runs `trials` seeded trials in parallel; trial `i` uses stream `i` of `seed`.
pub fn estimate_weak_type_constant(params: &WeakTypeParams, seed: u64, trials: usize) -> Result<WeakTypeEstimate> {
    params.exponents.validate()?;
    if params.input_res > params.res_exp {
        return Err(Error::Config("input_res exceeds the grid resolution".into()));
    }
    let spec = params.spec();
    let records: Vec<WeakTypeTrial> = (0..trials as u64)
        .into_par_iter()
        .map(|t| evaluate_trial(params, &spec, &WeakTypeInputs::generate(params, seed, t)?))
        .collect::<Result<_>>()?;
    let live: Vec<&WeakTypeTrial> = records.iter().filter(|t| !t.degenerate).collect();
    let mut ratios: Vec<f64> = live.iter().map(|t| t.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    Ok(WeakTypeEstimate {
        params: params.clone(),
        max_ratio: ratios.last().copied().unwrap_or(0.0),
        median_ratio: if ratios.is_empty() { 0.0 } else { ratios[ratios.len() / 2] },
        degenerate: records.len() - live.len(),
        e_prime_rate: if live.is_empty() {
            0.0
        } else {
            live.iter().filter(|t| t.e_prime_ok()).count() as f64 / live.len() as f64
        },
        exceptional_failures: records.iter().filter(|t| !t.exceptional_ok).count(),
        trials: records,
    })
}

/// Relative growth `b/a − 1` of a max ratio (0 when both vanish).
pub fn growth(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        b / a - 1.0
    }
}

/// Estimates at `m, m+1, …, m+grid_doublings` and at depths `d+1, …, d+depth_doublings` (base `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeakTypeSweep {
    pub grid_runs: Vec<WeakTypeEstimate>,
    pub depth_runs: Vec<WeakTypeEstimate>,
    /// Largest relative growth between consecutive grid runs.
    pub grid_growth: f64,
    /// Largest relative growth between consecutive depth runs, starting from the base run.
    pub depth_growth: f64,
    /// Smallest `|E'| ≥ |E|/2` rate over all runs.
    pub e_prime_rate: f64,
}

impl WeakTypeSweep {
    pub fn runs(&self) -> impl Iterator<Item = &WeakTypeEstimate> {
        self.grid_runs.iter().chain(&self.depth_runs)
    }
}

fn max_growth(runs: &[&WeakTypeEstimate]) -> f64 {
    runs.windows(2).map(|w| growth(w[0].max_ratio, w[1].max_ratio)).fold(0.0, f64::max)
}

pub fn weak_type_sweep(
    base: &WeakTypeParams,
    grid_doublings: i32,
    depth_doublings: i32,
    seed: u64,
    trials: usize,
) -> Result<WeakTypeSweep> {
    let mut grid_runs = Vec::new();
    for d in 0..=grid_doublings {
        let p = WeakTypeParams { res_exp: base.res_exp + d, ..base.clone() };
        grid_runs.push(estimate_weak_type_constant(&p, seed, trials)?);
    }
    let mut depth_runs = Vec::new();
    for d in 1..=depth_doublings {
        let p = WeakTypeParams { depth: base.depth + d, ..base.clone() };
        depth_runs.push(estimate_weak_type_constant(&p, seed, trials)?);
    }
    let grid_growth = max_growth(&grid_runs.iter().collect::<Vec<_>>());
    let depth_chain: Vec<&WeakTypeEstimate> = grid_runs.iter().take(1).chain(&depth_runs).collect();
    let depth_growth = max_growth(&depth_chain);
    let e_prime_rate = grid_runs.iter().chain(&depth_runs).map(|r| r.e_prime_rate).fold(1.0, f64::min);
    Ok(WeakTypeSweep { grid_runs, depth_runs, grid_growth, depth_growth, e_prime_rate })
}
