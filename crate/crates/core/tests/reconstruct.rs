use genexp::analysis::standard_battery;
use genexp::reconstruct::{coefficients, reconstruct, synthesize};
use genexp::{Measure, PhaseMap, QuadratureSpec, ScalarFn, SpectrumSet, TestFunction};
use num_complex::Complex;
use proptest::prelude::*;

#[test]
fn round_trip_error_shrinks_with_the_spectrum() {
    let mu = Measure::unit_cube(1);
    let quad = QuadratureSpec::gauss(128);
    for f in standard_battery(&mu).unwrap() {
        let mut last = f64::INFINITY;
        for r in [2, 4, 8, 16, 32] {
            let rep = reconstruct(&f, &mu, &PhaseMap::identity(1), &SpectrumSet::integers(-r, r), &quad).unwrap();
            assert!(rep.l2_error.value <= last + 1e-9, "{} at {r}", f.name);
            last = rep.l2_error.value;
        }
        assert!(last < 2e-3, "{}: {last}", f.name);
    }
}

#[test]
fn linear_function_tail_bound() {
    // ‖x − S_R x‖² = Σ_{|k|>R} 1/(4π²k²)
    let mu = Measure::unit_cube(1);
    let f = TestFunction::real("x", |x: &[f64]| x[0]);
    let r = 16;
    let rep = reconstruct(
        &f,
        &mu,
        &PhaseMap::identity(1),
        &SpectrumSet::integers(-r, r),
        &QuadratureSpec::gauss(256),
    )
    .unwrap();
    let tail: f64 = (r + 1..1_000_000)
        .map(|k| 2.0 / (4.0 * std::f64::consts::PI.powi(2) * (k as f64).powi(2)))
        .sum();
    assert!(
        (rep.l2_error.value - tail.sqrt()).abs() < 5e-3 * tail.sqrt(),
        "{} vs {}",
        rep.l2_error.value,
        tail.sqrt()
    );
}

#[test]
fn partial_sum_at_a_quarter() {
    let mu = Measure::unit_cube(1);
    let f = TestFunction::real("x", |x: &[f64]| x[0]);
    let lambda = SpectrumSet::integers(-64, 64);
    let c = coefficients(&f, &mu, &PhaseMap::identity(1), &lambda, &QuadratureSpec::gauss(128)).unwrap();
    let e = synthesize(&c.values, &PhaseMap::identity(1), &lambda).unwrap();
    let v = e.eval(&[0.25]).unwrap();
    // the partial Fourier sum of the sawtooth at 1/4: Σ_{|k|≤R} sin(πk/2)/(πk) tail
    let tail: f64 = (65..200_000)
        .map(|k| ((std::f64::consts::FRAC_PI_2 * k as f64).sin() / (std::f64::consts::PI * k as f64)).abs())
        .sum::<f64>();
    assert!((v.re - 0.25).abs() <= tail.min(0.01) && v.im.abs() < 1e-12, "{v}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coefficients_are_linear(al in -2.0f64..2.0, be in -2.0f64..2.0, s in 0.0f64..1.0) {
        let mu = Measure::unit_cube(2);
        let l = ScalarFn::new("shear", move |t: &[f64]| s * t[0]);
        let phi = PhaseMap::unipotent(vec![l]).unwrap();
        let lambda = genexp::spectra::integer_lattice(2, 2);
        let quad = QuadratureSpec::gauss(24);
        let f = TestFunction::real("f", |x: &[f64]| x[0] * x[1]);
        let g = TestFunction::new("g", |x: &[f64]| Complex::new(x[0].cos(), x[1]));
        let (f2, g2) = (f.clone(), g.clone());
        let h = TestFunction::new("h", move |x: &[f64]| f2.eval(x) * al + g2.eval(x) * be);
        let cf = coefficients(&f, &mu, &phi, &lambda, &quad).unwrap();
        let cg = coefficients(&g, &mu, &phi, &lambda, &quad).unwrap();
        let ch = coefficients(&h, &mu, &phi, &lambda, &quad).unwrap();
        for i in 0..ch.len() {
            let want = cf.values[i] * al + cg.values[i] * be;
            let tol = 2.0 * (ch.errors[i] + al.abs() * cf.errors[i] + be.abs() * cg.errors[i]) + 1e-13;
            prop_assert!((ch.values[i] - want).norm() <= tol);
        }
    }
}
