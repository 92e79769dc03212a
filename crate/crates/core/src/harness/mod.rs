//! Experiment orchestration: seeded inputs, invariant suites, constant sweeps and reports.

pub mod checks;
pub mod config;
pub mod generate;
pub mod report;
pub mod weak_type;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::multiplier::{leibniz_check, leibniz_dilation, LeibnizOrders};
use crate::rng::{trial_rng, RNG_NAME};

pub use checks::{invariant_suite, CheckSummary};
pub use config::{ExperimentConfig, ExperimentKind};
pub use generate::{generate_test_function, generate_test_functions, InputKind, TestFunction};
pub use report::{fmt_f64, RunReport};
pub use weak_type::{estimate_weak_type_constant, weak_type_sweep, WeakTypeEstimate, WeakTypeParams};

fn header(config: &ExperimentConfig) -> Vec<(String, String)> {
    let g = config.grid_section();
    let c = &config.constants;
    let t = &config.exponents;
    [
        ("experiment", config.kind().name().to_string()),
        ("rng", RNG_NAME.to_string()),
        ("seed", config.run.seed.to_string()),
        ("trials", config.trials().to_string()),
        ("box_exp", g.box_exp.to_string()),
        ("res_exp", g.res_exp.to_string()),
        ("cells", (1u64 << (g.box_exp + g.res_exp)).to_string()),
        ("constants", format!("{} {} {}", fmt_f64(c.c1), fmt_f64(c.c2), fmt_f64(c.c3))),
        ("exponents", [t.p1, t.q1, t.p2, t.q2, t.s].map(fmt_f64).join(" ")),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Validates `config`, then runs the suite it names.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let mut report = RunReport::new(config.kind(), header(config));
    match config.kind() {
        ExperimentKind::Invariants => run_invariants(config, &mut report)?,
        ExperimentKind::SparsitySuite => run_sparsity(config, &mut report)?,
        ExperimentKind::OracleEquivalence => run_oracle(config, &mut report)?,
        ExperimentKind::LeibnizSweep => run_leibniz(config, &mut report)?,
        ExperimentKind::WeakTypeSweep => run_weak_type(config, &mut report)?,
    }
    Ok(report)
}

fn strings<const N: usize>(v: [&str; N]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn run_invariants(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let summaries = invariant_suite(config.grid()?, config.constants.c1, &config.exponents, config.trials(), config.run.seed)?;
    for s in &summaries {
        report.aggregate(&format!("check.{}", s.name), s.line());
        report.invariant_failures += s.failures;
    }
    Ok(())
}

fn run_sparsity(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let grid = config.grid()?;
    let seed = config.run.seed;
    let trials: Vec<_> = (0..config.trials() as u64)
        .into_par_iter()
        .map(|t| checks::sparsity_trial(grid, config.constants.c1, seed, t))
        .collect::<Result<_>>()?;
    report.columns = strings(["trial", "weight", "levels", "pairs", "violations_1d", "pointwise", "lhs_2d", "rhs_2d", "pass"]);
    let mut worst: f64 = 0.0;
    for (i, t) in trials.iter().enumerate() {
        let pass = t.error() == 0.0;
        report.invariant_failures += !pass as usize;
        worst = worst.max(t.lhs_2d / t.rhs_2d);
        report.rows.push(vec![
            i.to_string(),
            fmt_f64(t.weight),
            t.levels.to_string(),
            t.pairs.to_string(),
            t.violations_1d.to_string(),
            t.pointwise.to_string(),
            fmt_f64(t.lhs_2d),
            fmt_f64(t.rhs_2d),
            pass.to_string(),
        ]);
    }
    report.aggregate("violations_1d", trials.iter().map(|t| t.violations_1d).sum::<usize>());
    report.aggregate("max_lhs_over_rhs_2d", fmt_f64(worst));
    Ok(())
}

fn run_oracle(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let grid = config.grid()?;
    let seed = config.run.seed;
    let trials: Vec<_> = (0..config.trials() as u64)
        .into_par_iter()
        .map(|t| checks::oracle_trial(grid, seed, t))
        .collect::<Result<_>>()?;
    report.columns = strings(["trial", "model", "haar", "rectangles", "deviation", "pass"]);
    let mut worst: f64 = 0.0;
    for (i, t) in trials.iter().enumerate() {
        let pass = t.deviation <= 1e-12;
        report.invariant_failures += !pass as usize;
        worst = worst.max(t.deviation);
        report.rows.push(vec![
            i.to_string(),
            t.model.name().to_string(),
            t.haar.to_string(),
            t.rectangles.to_string(),
            fmt_f64(t.deviation),
            pass.to_string(),
        ]);
    }
    report.aggregate("max_deviation", fmt_f64(worst));
    Ok(())
}

fn run_leibniz(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let grid = config.grid()?;
    let l = &config.leibniz;
    let seed = config.run.seed;
    let kind = config.model.input_kind;
    let res = config.model.input_res;
    let mut columns: Vec<String> = multiplier_csv_header();
    columns.extend(strings(["slope_error", "pass"]));
    report.columns = columns;
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut degenerate = 0usize;
    for &v in &l.orders {
        let orders = LeibnizOrders::uniform(v);
        let rows: Vec<_> = (0..config.trials() as u64)
            .into_par_iter()
            .map(|t| -> Result<_> {
                let mut rng = trial_rng(seed, t);
                let fs: Vec<_> = (0..4)
                    .map(|_| generate_test_function(kind, grid, res, &mut rng).map(|f| f.f))
                    .collect::<Result<_>>()?;
                let h = generate::generate_test_function_2d(kind, grid, grid, res, &mut rng)?.f;
                let inputs = crate::model::ModelInputs { f1: &fs[0], f2: &fs[1], g1: &fs[2], g2: &fs[3], h: &h };
                let rep = leibniz_check(orders, &[config.exponents], inputs)?;
                // a vanishing side has no slope
                let slope = match leibniz_dilation(orders, &[config.exponents], inputs, &l.dilations) {
                    Ok(d) => Some(d.max_error()),
                    Err(Error::Precondition(_)) => None,
                    Err(e) => return Err(e),
                };
                Ok((t, rep, slope))
            })
            .collect::<Result<_>>()?;
        for (t, rep, slope) in rows {
            let mut row: Vec<String> = rep.csv_row(grid.len(), l.gap, t).split(',').map(str::to_string).collect();
            match slope {
                Some(slope) => {
                    let pass = slope <= l.slope_tol;
                    report.invariant_failures += !pass as usize;
                    worst = worst.max(slope);
                    row.extend([fmt_f64(slope), pass.to_string()]);
                }
                None => {
                    degenerate += 1;
                    row.extend(["".to_string(), "degenerate".to_string()]);
                }
            }
            worst_ratio = worst_ratio.max(rep.ratio);
            report.rows.push(row);
        }
    }
    report.aggregate("degenerate", degenerate);
    report.aggregate("max_slope_error", fmt_f64(worst));
    report.aggregate("max_ratio", fmt_f64(worst_ratio));
    Ok(())
}

fn multiplier_csv_header() -> Vec<String> {
    crate::multiplier::LeibnizReport::CSV_HEADER.split(',').map(str::to_string).collect()
}

/// Parameters of the base weak-type run described by `config`.
pub fn weak_type_params(config: &ExperimentConfig) -> WeakTypeParams {
    let g = config.grid_section();
    let m = &config.model;
    let c = &config.constants;
    WeakTypeParams {
        model: m.model,
        box_exp: g.box_exp,
        res_exp: g.res_exp,
        depth: m.depth,
        sharp1: m.sharp1,
        sharp2: m.sharp2,
        haar: m.haar,
        exponents: config.exponents,
        constants: [c.c1, c.c2, c.c3],
        input_kind: m.input_kind,
        input_res: m.input_res,
    }
}

fn run_weak_type(config: &ExperimentConfig, report: &mut RunReport) -> Result<()> {
    let w = &config.weak_type;
    let base = weak_type_params(config);
    let sweep = weak_type_sweep(&base, w.grid_doublings, w.depth_doublings, config.run.seed, config.trials())?;
    report.header.push(("model".into(), base.model.name().to_string()));
    report.header.push(("haar".into(), base.haar.to_string()));
    report.header.push(("input_kind".into(), base.input_kind.name().to_string()));
    report.header.push(("input_res".into(), base.input_res.to_string()));
    report.columns =
        strings(["res_exp", "depth", "trial", "e", "e_prime", "lambda", "denominator", "ratio", "e_prime_ok", "degenerate"]);
    for run in sweep.runs() {
        for (i, t) in run.trials.iter().enumerate() {
            report.rows.push(vec![
                run.params.res_exp.to_string(),
                run.params.depth.to_string(),
                i.to_string(),
                fmt_f64(t.e),
                fmt_f64(t.e_prime),
                fmt_f64(t.lambda),
                fmt_f64(t.denominator),
                fmt_f64(t.ratio),
                t.e_prime_ok().to_string(),
                t.degenerate.to_string(),
            ]);
        }
        let key = format!("run.m{}.d{}", run.params.res_exp, run.params.depth);
        report.aggregate(
            &key,
            format!(
                "max_ratio={} median_ratio={} e_prime_rate={} degenerate={}",
                fmt_f64(run.max_ratio),
                fmt_f64(run.median_ratio),
                fmt_f64(run.e_prime_rate),
                run.degenerate
            ),
        );
        report.invariant_failures += run.exceptional_failures;
    }
    report.aggregate("grid_growth", fmt_f64(sweep.grid_growth));
    report.aggregate("depth_growth", fmt_f64(sweep.depth_growth));
    report.aggregate("e_prime_rate", fmt_f64(sweep.e_prime_rate));
    let stable = sweep.grid_growth <= w.growth_tol && sweep.depth_growth <= w.growth_tol;
    report.aggregate("growth_within_tolerance", stable);
    report.aggregate("e_prime_rate_met", sweep.e_prime_rate >= w.e_prime_rate);
    Ok(())
}

/// `J`, `m` on the default grid of `kind`.
pub fn default_grid(kind: ExperimentKind) -> Result<Grid1D> {
    let g = kind.default_grid();
    Grid1D::new(g.box_exp, g.res_exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.run.trials = Some(3);
        c.run.seed = 9;
        c
    }

    #[test]
    fn every_suite_runs_and_reproduces() {
        for kind in ExperimentKind::ALL {
            let mut c = small(kind);
            if kind == ExperimentKind::WeakTypeSweep {
                c.grid = Some(config::GridSection { box_exp: 0, res_exp: 5 });
                c.model.depth = 3;
                c.model.input_res = 4;
                c.weak_type.grid_doublings = 1;
            }
            if kind == ExperimentKind::SparsitySuite {
                c.grid = Some(config::GridSection { box_exp: 2, res_exp: 6 });
            }
            let a = run(&c).unwrap();
            assert_eq!(a.exit_code(), 0, "{}", a.render().unwrap());
            assert_eq!(a.render().unwrap(), run(&c).unwrap().render().unwrap());
            assert!(a.render().unwrap().contains("ChaCha8Rng"));
        }
    }

    #[test]
    fn invalid_exponents_are_rejected_before_running() {
        let mut c = small(ExperimentKind::WeakTypeSweep);
        c.exponents.q2 = 2.0;
        assert!(run(&c).unwrap_err().to_string().contains("exponents"));
    }
}
