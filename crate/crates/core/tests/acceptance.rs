//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.

use std::io::Write;
use std::time::{Duration, Instant};

use dyadtf::grid::Grid1D;
use dyadtf::harness::checks::{self, CheckSummary};
use dyadtf::harness::config::default_exponents;
use dyadtf::harness::{weak_type_params, weak_type_sweep, ExperimentConfig, ExperimentKind};

const SEED: u64 = 20260101;

/// Written straight to stdout so the line shows up without `--nocapture`.
fn verdict(id: u32, ok: bool, detail: &str) {
    let line = format!("{} criterion {id}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {id} failed: {detail}");
}

fn summary(id: u32, s: &CheckSummary) {
    verdict(id, s.passed(), &s.line());
}

fn errors<T>(trials: u64, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..trials).map(f).collect()
}

#[test]
fn c01_sparsity() {
    let start = Instant::now();
    let grid = Grid1D::new(4, 10).unwrap();
    let trials = errors(100, |t| checks::sparsity_trial(grid, 1024.0, SEED, t).unwrap());
    let elapsed = start.elapsed();
    let violations: usize = trials.iter().map(|t| t.violations_1d).sum();
    let over = trials.iter().filter(|t| t.lhs_2d > 10.0 * t.rhs_2d).count();
    let with_pairs = trials.iter().filter(|t| t.pairs > 0).count();
    let ok = violations == 0 && over == 0 && elapsed <= Duration::from_secs(60);
    verdict(
        1,
        ok,
        &format!(
            "sparsity: trials=100 violations_1d={violations} lhs_over_10rhs={over} trials_with_pairs={with_pairs} elapsed={:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn c02_stopping_time() {
    let e = errors(100, |t| checks::stopping_trial(SEED, t, 5).unwrap());
    summary(2, &CheckSummary::from_errors("stopping_time", 0.0, &e));
}

#[test]
fn c03_localization() {
    let e = errors(100, |t| checks::localization_trial(SEED, t).unwrap());
    summary(3, &CheckSummary::from_errors("localization", 0.0, &e));
}

#[test]
fn c04_oracle() {
    let grid = Grid1D::new(0, 4).unwrap();
    let trials = errors(100, |t| checks::oracle_trial(grid, SEED, t).unwrap());
    let mut flavours: Vec<_> = trials.iter().map(|t| (t.model, t.haar)).collect();
    flavours.sort_by_key(|(m, h)| (m.name(), *h));
    flavours.dedup();
    assert_eq!(flavours.len(), 10);
    let e: Vec<f64> = trials.iter().map(|t| t.deviation).collect();
    summary(4, &CheckSummary::from_errors("oracle", 1e-12, &e));
}

#[test]
fn c05_transforms() {
    let grid = Grid1D::new(0, 8).unwrap();
    let trials = errors(100, |t| checks::transforms_trial(grid, SEED, t).unwrap());
    let parts = [
        CheckSummary::from_errors("haar_pyramid", 1e-12, &trials.iter().map(|t| t.pyramid).collect::<Vec<_>>()),
        CheckSummary::from_errors("lp_partition", 1e-10, &trials.iter().map(|t| t.partition).collect::<Vec<_>>()),
        CheckSummary::from_errors("derivative_eigen", 1e-12, &trials.iter().map(|t| t.eigen).collect::<Vec<_>>()),
    ];
    let ok = parts.iter().all(CheckSummary::passed);
    verdict(5, ok, &parts.iter().map(CheckSummary::line).collect::<Vec<_>>().join("; "));
}

#[test]
fn c06_hybrid() {
    let grid = Grid1D::new(0, 6).unwrap();
    let trials = errors(100, |t| checks::hybrid_trial(grid, SEED, t).unwrap());
    let bessel = CheckSummary::from_errors("bessel", 1e-9, &trials.iter().map(|h| h.bessel_excess).collect::<Vec<_>>());
    let order = CheckSummary::from_errors(
        "maximal_order",
        0.0,
        &trials.iter().map(|h| (h.monotone + h.sublinear) as f64).collect::<Vec<_>>(),
    );
    verdict(6, bessel.passed() && order.passed(), &format!("{}; {}", bessel.line(), order.line()));
}

#[test]
fn c07_constant_multiplier() {
    let mut e = Vec::new();
    for m in [4, 5] {
        e.extend(errors(20, |t| checks::constant_multiplier_trial(m, SEED, t).unwrap()));
    }
    summary(7, &CheckSummary::from_errors("constant_multiplier", 1e-10, &e));
}

#[test]
fn c08_cascade() {
    let e = errors(20, |seed| checks::cascade_trial(SEED + seed, 0).unwrap());
    summary(8, &CheckSummary::from_errors("cascade", 1e-9, &e));
}

#[test]
fn c09_homogeneity() {
    let grid = Grid1D::new(0, 6).unwrap();
    let exponents = default_exponents();
    let mut e = Vec::new();
    for order in [0.0, 1.0] {
        e.extend(errors(20, |t| checks::homogeneity_trial(grid, &exponents, order, SEED, t).unwrap()));
    }
    summary(9, &CheckSummary::from_errors("homogeneity", 1e-8, &e));
}

#[test]
fn c10_weak_type_stability() {
    let start = Instant::now();
    let config = ExperimentConfig::new(ExperimentKind::WeakTypeSweep);
    let base = weak_type_params(&config);
    assert_eq!((base.model, base.res_exp, base.haar, base.constants[0]), (dyadtf::ModelKind::Flag0Flag0, 8, true, 1024.0));
    assert_eq!(base.exponents, default_exponents());
    let sweep = weak_type_sweep(&base, 2, 1, SEED, 100).unwrap();
    let elapsed = start.elapsed();
    let exceptional: usize = sweep.runs().map(|r| r.exceptional_failures).sum();
    let ok = sweep.grid_growth <= 0.10
        && sweep.depth_growth <= 0.10
        && sweep.e_prime_rate >= 0.99
        && exceptional == 0
        && elapsed <= Duration::from_secs(600);
    let maxima: Vec<String> =
        sweep.runs().map(|r| format!("m{}d{}={:e}", r.params.res_exp, r.params.depth, r.max_ratio)).collect();
    verdict(
        10,
        ok,
        &format!(
            "weak_type: grid_growth={:e} depth_growth={:e} e_prime_rate={} exceptional_failures={exceptional} max_ratio[{}] elapsed={:.1}s",
            sweep.grid_growth,
            sweep.depth_growth,
            sweep.e_prime_rate,
            maxima.join(" "),
            elapsed.as_secs_f64()
        ),
    );
}
