use proptest::prelude::*;

use dyadtf::harness::checks;
use dyadtf::harness::config::default_exponents;
use dyadtf::harness::{ExperimentConfig, ExperimentKind};
use dyadtf::maximal::{maximal_function, ScaleWindow};
use dyadtf::model::{model_operator, multilinear_form, ModelInputs, ModelKind};
use dyadtf::multiplier::{apply_multiplier, ExponentTuple, MultiplierOptions};
use dyadtf::rng::trial_rng;
use dyadtf::size_energy::{energy, size, EnergyKind};
use dyadtf::wavelets::CutoffFamily;
use dyadtf::{
    coefficient, contains, enumerate_dyadic, haar_eval, measure_intersection, CoefficientSequence, DyadicInterval,
    DyadicRectangle, Grid1D, GridFunction1D, GridFunction2D,
};

fn grid(box_exp: i32, res_exp: i32) -> Grid1D {
    Grid1D::new(box_exp, res_exp).unwrap()
}

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

fn interval(box_exp: i32, k_min: i32) -> impl Strategy<Value = DyadicInterval> {
    (k_min..=box_exp).prop_flat_map(move |k| (0..1i64 << (box_exp - k)).prop_map(move |n| DyadicInterval::new(k, n)))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dyadic_dichotomy(a in interval(2, -6), b in interval(2, -6)) {
        prop_assert!(contains(&a, &b) || contains(&b, &a) || !a.intersects(&b));
        prop_assert_eq!(a.intersects(&b), contains(&a, &b) || contains(&b, &a));
    }

    #[test]
    fn rectangle_area_is_product(x in interval(1, -5), y in interval(3, -2)) {
        prop_assert_eq!(DyadicRectangle::new(x, y).area(), x.length() * y.length());
    }

    #[test]
    fn indicator_measure_and_nesting(iv in interval(1, -5), small in samples(64), extra in samples(64)) {
        let g = grid(1, 5);
        let chi = GridFunction1D::indicator(g, &iv).unwrap();
        prop_assert_eq!(measure_intersection(&iv, &chi).unwrap(), iv.length());
        let s = GridFunction1D::new(g, small.iter().map(|v| (*v > 0.3) as u8 as f64).collect()).unwrap();
        let t = GridFunction1D::new(g, small.iter().zip(&extra).map(|(v, w)| (*v > 0.3 || *w > 0.0) as u8 as f64).collect()).unwrap();
        prop_assert!(measure_intersection(&iv, &s).unwrap() <= measure_intersection(&iv, &t).unwrap());
    }

    #[test]
    fn quadrature_of_one_is_exact(box_exp in -2i32..4, res_exp in 2i32..8) {
        let g = grid(box_exp, res_exp);
        prop_assert_eq!(g.len(), 1usize << (box_exp + res_exp));
        prop_assert_eq!(GridFunction1D::from_fn(g, |_| 1.0).integral(), g.length());
    }

    #[test]
    fn tensor_is_pointwise_product(a in samples(16), b in samples(8)) {
        let (gx, gy) = (grid(0, 4), grid(0, 3));
        let f = GridFunction1D::new(gx, a.clone()).unwrap();
        let h = GridFunction1D::new(gy, b.clone()).unwrap();
        let t = GridFunction2D::tensor(&f, &h);
        for iy in 0..8 {
            for ix in 0..16 {
                prop_assert_eq!(t.at(ix, iy), a[ix] * b[iy]);
            }
        }
    }

    #[test]
    fn haar_orthonormality(a in interval(0, -5), b in interval(0, -5)) {
        let g = grid(0, 6);
        let ip: f64 = (0..g.len())
            .map(|i| haar_eval(&a, true, g.point(i)) * haar_eval(&b, true, g.point(i)))
            .sum::<f64>()
            * g.cell_width();
        // |I|^{-1/2} is irrational at odd scales, so allow one rounding
        prop_assert!((ip - if a == b { 1.0 } else { 0.0 }).abs() <= 1e-15, "{ip}");
    }

    #[test]
    fn haar_biest_support(p in interval(0, -6), q in interval(0, -6)) {
        prop_assume!(q.scale > p.scale);
        let g = grid(0, 6);
        let ip: f64 = (0..g.len())
            .map(|i| haar_eval(&p, false, g.point(i)) * haar_eval(&q, true, g.point(i)))
            .sum::<f64>()
            * g.cell_width();
        prop_assert_eq!(ip != 0.0, contains(&q, &p));
    }

    #[test]
    fn coefficient_is_linear(a in samples(64), b in samples(64), s in -3.0..3.0f64, iv in interval(0, -5), lac: bool, haar: bool) {
        let g = grid(0, 6);
        let fam = if haar { CutoffFamily::haar(lac) } else { CutoffFamily::smooth(lac, 6) };
        let f = GridFunction1D::new(g, a).unwrap();
        let h = GridFunction1D::new(g, b).unwrap();
        let lhs = coefficient(&f.scaled(s).add(&h).unwrap(), &iv, &fam).unwrap();
        let rhs = s * coefficient(&f, &iv, &fam).unwrap() + coefficient(&h, &iv, &fam).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn maximal_function_is_monotone_and_sublinear(a in samples(64), b in samples(64), t in samples(64)) {
        let g = grid(0, 6);
        let w = ScaleWindow::full(g);
        let f = GridFunction1D::new(g, a.clone()).unwrap();
        let h = GridFunction1D::new(g, b).unwrap();
        let big = GridFunction1D::new(g, a.iter().zip(&t).map(|(v, s)| v.abs() + s.abs()).collect()).unwrap();
        let mf = maximal_function(&f, w).unwrap();
        let mh = maximal_function(&h, w).unwrap();
        let mbig = maximal_function(&big, w).unwrap();
        let msum = maximal_function(&f.add(&h).unwrap(), w).unwrap();
        for i in 0..g.len() {
            prop_assert!(mf.values[i] <= mbig.values[i]);
            prop_assert!(msum.values[i] <= mf.values[i] + mh.values[i] + 1e-15 * (mf.values[i] + mh.values[i]));
        }
    }

    #[test]
    fn size_and_energy_scale_linearly(seed: u64, e in -6i32..6, lac: bool) {
        let (seq, coll) = checks::random_sequence(seed, 0, 4);
        let coll: Vec<DyadicInterval> = coll.into_iter().filter(|i| !lac || i.scale > -4).collect();
        let lambda = 2f64.powi(e);
        let scaled = seq.scaled(lambda);
        prop_assert_eq!(size(&scaled, &coll, lac).unwrap().0, lambda * size(&seq, &coll, lac).unwrap().0);
        for kind in [EnergyKind::Weak1Inf, EnergyKind::StrongT(2.0)] {
            let a = energy(&seq, &coll, lac, kind).unwrap().0;
            let b = energy(&scaled, &coll, lac, kind).unwrap().0;
            prop_assert!(close(b, lambda * a, 1e-14), "{kind:?}: {b} vs {}", lambda * a);
        }
    }

    #[test]
    fn exponent_tuples_follow_the_scaling_identity(a in 0.05..0.9f64, b in 0.05..0.9f64, a2 in 0.05..0.9f64, c in 0.0..0.9f64) {
        let b2 = a + b - a2;
        prop_assume!(b2 > 0.01 && b2 < 0.99);
        let s = if c == 0.0 { f64::INFINITY } else { 1.0 / c };
        let t = ExponentTuple::new(1.0 / a, 1.0 / b, 1.0 / a2, 1.0 / b2, s);
        prop_assert!(t.is_ok(), "{t:?}");
        prop_assert!(close(t.unwrap().inv_r(), a + b + c, 1e-12));
        let skew = 1.0 / (b2 * 0.9);
        prop_assert!(ExponentTuple::new(1.0 / a, 1.0 / b, 1.0 / a2, skew, s).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stopping_time_has_no_violations(seed: u64) {
        prop_assert_eq!(checks::stopping_trial(seed, 0, 4).unwrap(), 0.0);
    }

    #[test]
    fn sparsity_holds_on_nonnegative_inputs(seed: u64) {
        let t = checks::sparsity_trial(grid(2, 8), 1024.0, seed, 0).unwrap();
        prop_assert_eq!(t.violations_1d, 0);
        prop_assert!(t.lhs_2d <= 10.0 * t.rhs_2d);
    }

    #[test]
    fn localization_is_exact(seed: u64) {
        prop_assert_eq!(checks::localization_trial(seed, 0).unwrap(), 0.0);
    }

    #[test]
    fn fast_operator_matches_oracle(seed: u64, trial in 0u64..10) {
        let t = checks::oracle_trial(grid(0, 4), seed, trial).unwrap();
        prop_assert!(t.deviation <= 1e-12, "{:?} haar={}: {}", t.model, t.haar, t.deviation);
    }

    #[test]
    fn model_operator_is_multilinear(seed: u64, slot in 0usize..5, s in -2.0..2.0f64, model_ix in 0usize..5, haar: bool) {
        let g = grid(0, 4);
        let mut rng = trial_rng(seed, 0);
        let spec = checks::random_small_spec(ModelKind::ALL[model_ix], haar, &mut rng);
        let a = checks::NoiseInputs::new(g, &mut rng);
        let b = checks::NoiseInputs::new(g, &mut rng);
        let mut mixed = a.clone();
        match slot {
            0 => mixed.f1 = a.f1.scaled(s).add(&b.f1).unwrap(),
            1 => mixed.f2 = a.f2.scaled(s).add(&b.f2).unwrap(),
            2 => mixed.g1 = a.g1.scaled(s).add(&b.g1).unwrap(),
            3 => mixed.g2 = a.g2.scaled(s).add(&b.g2).unwrap(),
            _ => mixed.h = a.h.map(|v| v * s).add(&b.h).unwrap(),
        }
        let mut other = a.clone();
        match slot {
            0 => other.f1 = b.f1.clone(),
            1 => other.f2 = b.f2.clone(),
            2 => other.g1 = b.g1.clone(),
            3 => other.g2 = b.g2.clone(),
            _ => other.h = b.h.clone(),
        }
        let lhs = model_operator(&spec, mixed.inputs()).unwrap();
        let ta = model_operator(&spec, a.inputs()).unwrap();
        let tb = model_operator(&spec, other.inputs()).unwrap();
        let rhs = ta.map(|v| v * s).add(&tb).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12);
        let dual = GridFunction2D::from_fn(g, g, |x, y| (x - y).cos());
        let form = multilinear_form(&spec, mixed.inputs(), &dual).unwrap();
        let want = s * multilinear_form(&spec, a.inputs(), &dual).unwrap() + multilinear_form(&spec, other.inputs(), &dual).unwrap();
        prop_assert!((form - want).abs() <= 1e-12);
    }

    #[test]
    fn multiplier_is_linear_in_each_slot(seed: u64, slot in 0usize..5, s in -2.0..2.0f64) {
        let g = grid(0, 4);
        let mut rng = trial_rng(seed, 1);
        let a = checks::NoiseInputs::new(g, &mut rng);
        let b = checks::NoiseInputs::new(g, &mut rng);
        let (sa, sb) = (checks::cascade_symbol_a(), checks::cascade_symbol_b());
        let opts = MultiplierOptions::default();
        let apply = |i: ModelInputs<'_>| apply_multiplier(&sa, &sb, &opts, i).unwrap();
        let mut mixed = a.clone();
        let mut other = a.clone();
        match slot {
            0 => { mixed.f1 = a.f1.scaled(s).add(&b.f1).unwrap(); other.f1 = b.f1.clone(); }
            1 => { mixed.f2 = a.f2.scaled(s).add(&b.f2).unwrap(); other.f2 = b.f2.clone(); }
            2 => { mixed.g1 = a.g1.scaled(s).add(&b.g1).unwrap(); other.g1 = b.g1.clone(); }
            3 => { mixed.g2 = a.g2.scaled(s).add(&b.g2).unwrap(); other.g2 = b.g2.clone(); }
            _ => { mixed.h = a.h.map(|v| v * s).add(&b.h).unwrap(); other.h = b.h.clone(); }
        }
        let want = apply(a.inputs()).map(|v| v * s).add(&apply(other.inputs())).unwrap();
        prop_assert!(apply(mixed.inputs()).max_abs_diff(&want).unwrap() <= 1e-10);
    }

    #[test]
    fn cascade_matches_spectral_path(seed: u64) {
        prop_assert!(checks::cascade_trial(seed, 0).unwrap() <= 1e-9);
    }

    #[test]
    fn flag_scaling_is_dilation_invariant(seed: u64) {
        let e = checks::homogeneity_trial(grid(0, 5), &default_exponents(), 0.0, seed, 0).unwrap();
        prop_assert!(e <= 1e-8, "{e}");
    }

    #[test]
    fn reports_are_reproducible(seed: u64) {
        let mut c = ExperimentConfig::new(ExperimentKind::OracleEquivalence);
        c.run.seed = seed;
        c.run.trials = Some(2);
        let a = dyadtf::harness::run(&c).unwrap().render().unwrap();
        prop_assert_eq!(a, dyadtf::harness::run(&c).unwrap().render().unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected(field in 0usize..6, bad in -4.0..1.0f64) {
        let mut c = ExperimentConfig::new(ExperimentKind::WeakTypeSweep);
        match field {
            0 => c.exponents.p1 = bad,
            1 => c.exponents.q2 = 1.0 + bad.abs() + 0.5,
            2 => c.constants.c1 = bad,
            3 => c.model.depth = bad.floor() as i32,
            4 => c.weak_type.growth_tol = bad.min(0.0),
            _ => c.weak_type.e_prime_rate = 1.0 + bad.abs() + 1e-3,
        }
        prop_assert!(c.validate().is_err());
    }
}

#[test]
fn coefficient_sequence_defaults_to_zero() {
    let keys = enumerate_dyadic(0, -2, 0);
    let seq = CoefficientSequence::new(keys.iter().copied());
    assert!(keys.iter().all(|k| seq.get(k) == 0.0));
    assert!(!seq.contains_key(&DyadicInterval::new(-3, 0)));
}
