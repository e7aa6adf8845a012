use genexp::phases::{
    essential_injectivity_probe, holhos, DigitMap, PhaseMap, ScalarFn, Triangular2D, HOLHOS_HALF_DIAGONAL,
};
use genexp::Measure;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn sin_unipotent() -> PhaseMap<f64> {
    let l1 = ScalarFn::new("sin", |t: &[f64]| (std::f64::consts::TAU * t[0]).sin());
    let l2 = ScalarFn::new("sq", |t: &[f64]| t[0] * t[0]);
    PhaseMap::unipotent(vec![l1, l2]).unwrap()
}

proptest! {
    #[test]
    fn unipotent_jacobian_is_unit_upper_triangular(x in prop::array::uniform3(-2.0f64..2.0)) {
        let j = sin_unipotent().jacobian(&x, 1e-6).unwrap();
        for r in 0..3 {
            prop_assert_eq!(j[(r, r)], 1.0);
            for c in 0..r {
                prop_assert_eq!(j[(r, c)], 0.0);
            }
        }
        prop_assert_eq!(j.det().unwrap(), 1.0);
    }

    #[test]
    fn triangular_second_component_ignores_x1(x1 in 0.0f64..1.0, x1b in 0.0f64..1.0, x2 in 0.0f64..1.0) {
        let t = PhaseMap::Triangular2D(Triangular2D::exponential());
        let a = t.eval(&[x1, x2]).unwrap();
        let b = t.eval(&[x1b, x2]).unwrap();
        prop_assert_eq!(a[1], b[1]);
    }

    #[test]
    fn triangular_inner_integral_matches_antiderivatives(x2 in -1.0f64..2.0) {
        let e = Triangular2D::exponential();
        let k = e.k();
        let y = e.eval(&[0.5, x2]).unwrap();
        prop_assert!((y[1] - ((-1.0f64).exp() - (-x2).exp() + k)).abs() <= 1e-10);
        let flat = Triangular2D::new(ScalarFn::constant(1.0), ScalarFn::constant(0.0), 0.25);
        let y = flat.eval(&[0.5, x2]).unwrap();
        prop_assert!((y[1] - (x2 - 1.0 + 0.25)).abs() <= 1e-10);
    }

    #[test]
    fn holhos_preserves_quadrants(r in 0.01f64..1.0, t in 0.0f64..std::f64::consts::TAU) {
        let (x, y) = (r * t.cos(), r * t.sin());
        let (u, v) = holhos(x, y);
        prop_assert!(u * x >= 0.0 && v * y >= 0.0);
        prop_assert!((u.abs() + v.abs() - r * HOLHOS_HALF_DIAGONAL).abs() <= 1e-12);
    }
}

#[test]
fn digit_map_is_monotone_on_random_points() {
    let dm = DigitMap::binary_to_quaternary();
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(151);
    let mut xs: Vec<f64> = (0..100_000).map(|_| r.random::<f64>()).collect();
    xs.sort_by(f64::total_cmp);
    let ys: Vec<f64> = xs.iter().map(|&x| dm.eval(x).unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn digit_map_has_no_collisions() {
    let phi = PhaseMap::Digit(DigitMap::binary_to_quaternary());
    let r = essential_injectivity_probe(&phi, &Measure::unit_cube(1), 20_000, None, None, 3).unwrap();
    assert_eq!(r.collision_fraction, 0.0);
}

#[test]
fn folding_map_collides() {
    let fold = PhaseMap::Custom(genexp::phases::VectorFn::new("fold", 1, 1, |x: &[f64]| {
        vec![(2.0 * x[0] - 1.0).abs()]
    }));
    let r = essential_injectivity_probe(&fold, &Measure::unit_cube(1), 20_000, None, None, 3).unwrap();
    assert!(r.collision_fraction > 0.5, "{}", r.collision_fraction);
    for (x, xp) in &r.collisions {
        assert!((x[0] - xp[0]).abs() > r.delta_x);
    }
}

#[test]
fn holhos_boundary_identity() {
    for i in 0..1000 {
        let t = std::f64::consts::TAU * i as f64 / 1000.0;
        let (x, y) = holhos(t.cos(), t.sin());
        assert!((x.abs() + y.abs() - HOLHOS_HALF_DIAGONAL).abs() <= 1e-9);
    }
}

#[test]
fn single_precision_phases() {
    let (x, y) = holhos(1.0f32, 0.0);
    assert!((x - HOLHOS_HALF_DIAGONAL as f32).abs() < 1e-6 && y == 0.0);
    let dm = DigitMap::binary_to_quaternary();
    for x in [0.1f32, 0.3, 0.7499, 0.9] {
        let v = dm.eval(x).unwrap();
        let w = dm.eval(x as f64).unwrap();
        assert!((v as f64 - w).abs() < 1e-6, "{x}: {v} vs {w}");
    }
}
