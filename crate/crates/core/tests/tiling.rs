use genexp::analysis::{gram, GramOptions};
use genexp::spectra::{dual_lattice, lattice};
use genexp::tiling::{frac_histogram_test, overlap_volume, tiling_verdict, TilingConfig, TilingVerdict, Uniformity};
use genexp::{Mat, Measure, PhaseMap, QuadratureSpec, ScalarFn};
use proptest::prelude::*;

fn unit() -> (Vec<f64>, Vec<f64>) {
    (vec![0.0, 0.0], vec![1.0, 1.0])
}

fn sin_unipotent() -> PhaseMap {
    let l = ScalarFn::new("sin", |t: &[f64]| (std::f64::consts::TAU * t[0]).sin());
    PhaseMap::unipotent(vec![l]).unwrap()
}

#[test]
fn tiles_imply_orthogonal_dual_spectrum() {
    let (lo, hi) = unit();
    let a = Mat::identity(2);
    let config = TilingConfig::default();
    for phi in [PhaseMap::identity(2), sin_unipotent()] {
        let t = tiling_verdict(&phi, &lo, &hi, &a, &config).unwrap();
        assert_eq!(t.tiling, TilingVerdict::Tiles, "{}", phi.name());
        assert_ne!(t.histogram.verdict, Uniformity::Nonuniform);
        let spec = lattice(&dual_lattice(&a).unwrap(), 3.0).unwrap();
        let g = gram(
            &Measure::unit_cube(2),
            &phi,
            &spec,
            &QuadratureSpec::gauss(48),
            &GramOptions::default(),
        )
        .unwrap();
        assert!(g.max_offdiag <= 1e-10, "{}: {:e}", phi.name(), g.max_offdiag);
    }
}

#[test]
fn sheared_lattice_tiles_for_identity() {
    let (lo, hi) = unit();
    let a = Mat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
    let t = tiling_verdict(&PhaseMap::identity(2), &lo, &hi, &a, &TilingConfig::default()).unwrap();
    assert_eq!(t.tiling, TilingVerdict::Tiles);
}

#[test]
fn wrong_volume_is_not_a_tiling() {
    let (lo, hi) = unit();
    let a = Mat::diag(&[2.0, 1.0]);
    let t = tiling_verdict(&PhaseMap::identity(2), &lo, &hi, &a, &TilingConfig::default()).unwrap();
    assert_eq!(t.tiling, TilingVerdict::NotTiling);
    assert!(!t.volume.matches);
}

#[test]
fn histogram_flags_nonuniform_fractional_parts() {
    let (lo, hi) = unit();
    let sq = PhaseMap::Custom(genexp::phases::VectorFn::new("square-x1", 2, 2, |x: &[f64]| {
        vec![x[0] * x[0], x[1]]
    }));
    let h = frac_histogram_test(&sq, &lo, &hi, &Mat::identity(2), 100_000, 8, 1).unwrap();
    assert_eq!(h.verdict, Uniformity::Nonuniform);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn overlap_is_symmetric(k1 in -1.5f64..1.5, k2 in -1.5f64..1.5, seed in 0u64..1000) {
        let (lo, hi) = unit();
        let phi = sin_unipotent();
        let a = overlap_volume(&phi, &lo, &hi, &[k1, k2], 20_000, seed).unwrap();
        let b = overlap_volume(&phi, &lo, &hi, &[-k1, -k2], 20_000, seed + 1).unwrap();
        let s = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        prop_assert!((a.volume_est - b.volume_est).abs() <= 3.0 * s + 1e-12);
    }
}
