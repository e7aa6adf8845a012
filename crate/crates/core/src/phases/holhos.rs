//! Area-preserving map of the unit disc onto a square.

use crate::error::{Error, Result};
use crate::real::Real;

/// `√(π/2)`: the half diagonal of the image square `|X| + |Y| ≤ √(π/2)`.
pub const HOLHOS_HALF_DIAGONAL: f64 = 1.253_314_137_315_500_3;

/// `X = sgn(x)·r/√(2π)·(π/2 + asin((x²−y²)/r²))`,
/// `Y = sgn(y)·r/√(2π)·(π/2 − asin((x²−y²)/r²))`, with `sgn(0) = 0`.
pub fn holhos<T: Real>(x: T, y: T) -> (T, T) {
    let r = x.hypot(y);
    if r == T::zero() {
        return (T::zero(), T::zero());
    }
    let s = ((x * x - y * y) / (r * r)).max(-T::one()).min(T::one()).asin();
    let c = r / T::two_pi().sqrt();
    let h = T::FRAC_PI_2();
    (x.sgn0() * c * (h + s), y.sgn0() * c * (h - s))
}

pub(super) fn eval<T: Real>(p: &[T], check: bool) -> Result<Vec<T>> {
    if check && p[0].hypot(p[1]) > T::one() + T::lit(1e-12) {
        return Err(Error::DomainViolation {
            map: "holhos",
            point: p.iter().map(|v| v.as_f64()).collect(),
        });
    }
    let (x, y) = holhos(p[0], p[1]);
    Ok(vec![x, y])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phases::PhaseMap;
    use approx::assert_abs_diff_eq;

    #[test]
    fn axis_points() {
        for &r in &[0.1, 0.5, 1.0] {
            let (x, y) = holhos(r, 0.0f64);
            assert_abs_diff_eq!(x, r * HOLHOS_HALF_DIAGONAL, epsilon = 1e-15);
            assert_eq!(y, 0.0);
        }
        assert_eq!(holhos(0.0f64, 0.0), (0.0, 0.0));
    }

    #[test]
    fn boundary_lands_on_square() {
        for i in 0..1000 {
            let t = std::f64::consts::TAU * i as f64 / 1000.0;
            let (x, y) = holhos(t.cos(), t.sin());
            assert!((x.abs() + y.abs() - HOLHOS_HALF_DIAGONAL).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_points_outside_disc() {
        let p = PhaseMap::<f64>::Holhos;
        assert!(p.eval(&[0.9, 0.9]).is_err());
        assert!(p.eval(&[0.6, 0.8]).is_ok());
    }

    #[test]
    fn finite_difference_determinant_is_one() {
        let p = PhaseMap::<f64>::Holhos;
        for &(x, y) in &[(0.3, 0.4), (-0.5, 0.2), (-0.1, -0.7), (0.6, -0.6)] {
            let d = p.jacobian(&[x, y], 1e-5).unwrap().det().unwrap();
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-8);
        }
    }
}
