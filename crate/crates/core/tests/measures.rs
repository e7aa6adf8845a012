use approx::assert_abs_diff_eq;
use genexp::measures::{self, fourier_transform, integrate, SelfSimilar};
use genexp::phases::DigitMap;
use genexp::real::cis_turns;
use genexp::{Mat, Measure, PhaseMap, QuadratureSpec};
use num_complex::Complex;
use proptest::prelude::*;

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |s, a| s * x + a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pushforward_integral_matches_composition(
        c in prop::collection::vec(-2.0f64..2.0, 1..5),
        a in 0.5f64..2.0,
        b in -1.0f64..1.0,
        xi in -6.0f64..6.0,
    ) {
        let mu = Measure::unit_cube(1);
        let phi = PhaseMap::affine(Mat::diag(&[a]), vec![b]).unwrap();
        let nu = Measure::pushforward(&mu, &phi).unwrap();
        let q = QuadratureSpec::gauss(32);
        let f = |y: &[f64]| Complex::new(poly(&c, y[0]), 0.0) * cis_turns(xi * y[0]);
        let lhs = integrate(f, &nu, &q).unwrap();
        let rhs = integrate(|x: &[f64]| f(&phi.eval(x).unwrap()), &mu, &q).unwrap();
        prop_assert!((lhs.value - rhs.value).norm() <= lhs.err + rhs.err + 1e-12);
    }

    #[test]
    fn fourier_transform_is_hermitian(xi in -40.0f64..40.0, eta in -40.0f64..40.0) {
        for mu in [Measure::nu4(), Measure::nu3(), Measure::unit_cube(1)] {
            let a = fourier_transform(&mu, &[xi], 40).unwrap();
            let b = fourier_transform(&mu, &[-xi], 40).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-15);
        }
        let sq = Measure::unit_cube(2);
        let a = fourier_transform(&sq, &[xi, eta], 40).unwrap();
        let b = fourier_transform(&sq, &[-xi, -eta], 40).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-15);
    }

    #[test]
    fn digit_depths_agree(xi in -16.0f64..16.0) {
        // e^{2πiξx} is 2π|ξ|-Lipschitz; the cylinders at depth D have width
        // (offset span)·4^{−D}
        let mu = Measure::nu4();
        let f = |x: &[f64]| cis_turns(xi * x[0]);
        let d = 8;
        let a = integrate(f, &mu, &QuadratureSpec::SelfSimilarDigit { depth: d }).unwrap();
        let b = integrate(f, &mu, &QuadratureSpec::SelfSimilarDigit { depth: d + 5 }).unwrap();
        let bound = std::f64::consts::TAU * xi.abs() * 4f64.powi(-(d as i32));
        prop_assert!((a.value - b.value).norm() <= bound.max(1e-15));
    }
}

#[test]
fn constant_integrates_to_mass_for_every_kind() {
    let one = |_: &[f64]| Complex::new(1.0, 0.0);
    let boxm = Measure::lebesgue_box(vec![-1.0, 0.5], vec![2.0, 1.5]).unwrap();
    for q in [QuadratureSpec::gauss(8), QuadratureSpec::adaptive(1e-10)] {
        assert_abs_diff_eq!(integrate(one, &boxm, &q).unwrap().value.re, 3.0, epsilon = 1e-12);
        let disc = Measure::lebesgue_disc([0.3, -0.2], 2.0).unwrap();
        assert_abs_diff_eq!(
            integrate(one, &disc, &q).unwrap().value.re,
            4.0 * std::f64::consts::PI,
            epsilon = 1e-11
        );
    }
    let mc = QuadratureSpec::MonteCarlo { samples: 1000, seed: 2 };
    assert_abs_diff_eq!(integrate(one, &boxm, &mc).unwrap().value.re, 3.0, epsilon = 1e-12);
    for mu in [Measure::nu3(), Measure::nu4()] {
        let r = integrate(one, &mu, &QuadratureSpec::SelfSimilarDigit { depth: 6 }).unwrap();
        assert_abs_diff_eq!(r.value.re, 1.0, epsilon = 1e-14);
    }
    let pushed = Measure::pushforward(
        &Measure::unit_cube(1),
        &PhaseMap::Digit(DigitMap::binary_to_quaternary()),
    )
    .unwrap();
    assert_abs_diff_eq!(
        integrate(one, &pushed, &QuadratureSpec::gauss(8)).unwrap().value.re,
        1.0,
        epsilon = 1e-14
    );
}

#[test]
fn nu4_transform_at_one_matches_digit_sampler() {
    use rand::{Rng, SeedableRng};
    let v = fourier_transform(&Measure::nu4(), &[1.0], 40).unwrap();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(70);
    let n = 1_000_000;
    let (mut s, mut s2) = (Complex::new(0.0, 0.0), 0.0);
    for _ in 0..n {
        let bits: u32 = r.random();
        let y = (1..=30).fold(0.0, |a, k| a + 2.0 * ((bits >> (k - 1)) & 1) as f64 * 0.25f64.powi(k));
        let z = cis_turns(y);
        s += z;
        s2 += z.norm_sqr();
    }
    let mean = s / n as f64;
    let sigma = ((s2 / n as f64 - mean.norm_sqr()) / n as f64).sqrt();
    assert!((v - mean).norm() <= 3.0 * sigma, "{v} vs {mean} (sigma {sigma})");
}

#[test]
fn product_formula_validates_for_presets() {
    for s in [
        SelfSimilar::new(4, vec![0.0, 2.0], vec![0.5, 0.5]).unwrap(),
        SelfSimilar::new(3, vec![0.0, 2.0], vec![0.5, 0.5]).unwrap(),
        SelfSimilar::new(2, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
    ] {
        s.validate_product_formula().unwrap();
    }
}

#[test]
fn single_precision_integration() {
    let mu = measures::Measure::<f32>::unit_cube(1);
    let r = integrate(
        |x: &[f32]| Complex::new(x[0] * x[0], 0.0),
        &mu,
        &QuadratureSpec::gauss(8),
    )
    .unwrap();
    assert!((r.value.re - 1.0 / 3.0).abs() < 1e-6);
    let v = fourier_transform(&measures::Measure::<f32>::nu4(), &[1.0], 20).unwrap();
    let w = fourier_transform(&Measure::nu4(), &[1.0], 20).unwrap();
    assert!(((v.re as f64) - w.re).abs() < 1e-5 && ((v.im as f64) - w.im).abs() < 1e-5);
}
