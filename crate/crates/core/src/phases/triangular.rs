//! Triangular maps `φ(x₁,x₂) = (z(x₂)x₁ + f(x₂), ∫₁^{x₂} dt/z(t) + K)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::quadrature::adaptive_gk;
use crate::real::Real;

use super::ScalarFn;

/// Spacing of the lazily built anchor grid for `∫₁^{x₂} dt/z`.
const ANCHORS_PER_UNIT: f64 = 16.0;
const MEMO_CAPACITY: usize = 1 << 20;

struct InnerMemo<T> {
    anchors: RwLock<HashMap<i64, T>>,
    values: RwLock<HashMap<u64, T>>,
}

/// `z` must stay positive on every queried point; `z` and `f` are functions
/// of `x₂` alone and receive a one-element slice.
#[derive(Clone)]
pub struct Triangular2D<T: Real> {
    z: ScalarFn<T>,
    f: ScalarFn<T>,
    k: T,
    memo: Arc<InnerMemo<T>>,
}

impl<T: Real> fmt::Debug for Triangular2D<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Triangular2D")
            .field("z", &self.z)
            .field("f", &self.f)
            .field("k", &self.k)
            .finish()
    }
}

impl<T: Real> Triangular2D<T> {
    pub fn new(z: ScalarFn<T>, f: ScalarFn<T>, k: T) -> Self {
        Self {
            z,
            f,
            k,
            memo: Arc::new(InnerMemo {
                anchors: RwLock::new(HashMap::new()),
                values: RwLock::new(HashMap::new()),
            }),
        }
    }

    /// `z = e^{x₂}`, `f = 0`, with `K = 1 − e^{−1}` so that `φ₂(·, 0) = 0`.
    pub fn exponential() -> Self {
        let z = ScalarFn::new("exp(x2)", |t: &[T]| t[0].exp()).with_grad(|t: &[T]| vec![t[0].exp()]);
        let k = T::one() - (-T::one()).exp();
        Self::new(z, ScalarFn::constant(T::zero()), k)
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn z(&self, x2: T) -> T {
        self.z.eval(&[x2])
    }

    pub fn f(&self, x2: T) -> T {
        self.f.eval(&[x2])
    }

    fn tol() -> T {
        T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
    }

    fn integrate(&self, a: T, b: T) -> T {
        let z = &self.z;
        let (v, _) = adaptive_gk(
            |t: T| {
                let zt = z.eval(&[t]);
                if zt > T::zero() {
                    T::one() / zt
                } else {
                    T::nan()
                }
            },
            a,
            b,
            Self::tol() / T::lit(4.0),
            2000,
        );
        v
    }

    fn anchor(&self, j: i64) -> T {
        if let Some(v) = self.memo.anchors.read().expect("memo lock").get(&j) {
            return *v;
        }
        let a = T::lit(j as f64 / ANCHORS_PER_UNIT);
        let v = self.integrate(T::one(), a);
        self.memo.anchors.write().expect("memo lock").insert(j, v);
        v
    }

    /// `∫₁^{x₂} dt/z(t)`.
    pub fn inner_integral(&self, x2: T) -> Result<T> {
        let key = x2.as_f64().to_bits();
        if let Some(v) = self.memo.values.read().expect("memo lock").get(&key) {
            return Ok(*v);
        }
        let j = (x2.as_f64() * ANCHORS_PER_UNIT).round() as i64;
        let a = T::lit(j as f64 / ANCHORS_PER_UNIT);
        let v = self.anchor(j) + self.integrate(a, x2);
        if !v.is_finite() {
            return Err(self.violation(&[T::nan(), x2]));
        }
        let mut memo = self.memo.values.write().expect("memo lock");
        if memo.len() >= MEMO_CAPACITY {
            memo.clear();
        }
        memo.insert(key, v);
        Ok(v)
    }

    fn violation(&self, x: &[T]) -> Error {
        Error::DomainViolation {
            map: "triangular-2d",
            point: x.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        let z = self.z(x[1]);
        if !(z > T::zero()) {
            return Err(self.violation(x));
        }
        let y2 = self.inner_integral(x[1])? + self.k;
        Ok(vec![z * x[0] + self.f(x[1]), y2])
    }

    /// `[[z, f′ + x₁z′], [0, 1/z]]`.
    pub fn jacobian(&self, x: &[T], h: T) -> Result<Mat<T>> {
        let z = self.z(x[1]);
        if !(z > T::zero()) {
            return Err(self.violation(x));
        }
        let dz = self.z.gradient(&x[1..2], h)[0];
        let df = self.f.gradient(&x[1..2], h)[0];
        let mut j = Mat::zeros(2, 2);
        j[(0, 0)] = z;
        j[(0, 1)] = df + x[0] * dz;
        j[(1, 1)] = T::one() / z;
        Ok(j)
    }

    /// Solves `φ₂(x₂) = y₂` for `x₂ ∈ [lo, hi]` by bracketed Newton steps
    /// (`φ₂′ = 1/z > 0`). Returns `None` when `y₂` is outside the image
    /// interval.
    pub fn invert_second(&self, y2: T, lo: T, hi: T) -> Result<Option<T>> {
        let g = |t: T| -> Result<T> { Ok(self.inner_integral(t)? + self.k - y2) };
        let (mut a, mut b) = (lo, hi);
        let (ga, gb) = (g(a)?, g(b)?);
        if ga > T::zero() || gb < T::zero() {
            return Ok(None);
        }
        let two = T::lit(2.0);
        let mut t = (a + b) / two;
        for _ in 0..200 {
            let gt = g(t)?;
            if gt == T::zero() {
                return Ok(Some(t));
            }
            if gt < T::zero() {
                a = t;
            } else {
                b = t;
            }
            let mut next = t - gt * self.z(t);
            if !(next > a && next < b) {
                next = (a + b) / two;
            }
            let step = (next - t).abs();
            t = next;
            let scale = T::one() + t.abs();
            if step <= T::epsilon() * T::lit(4.0) * scale || b - a <= T::epsilon() * scale {
                break;
            }
        }
        Ok(Some(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phases::PhaseMap;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inner_integral_matches_antiderivatives() {
        let flat = Triangular2D::new(ScalarFn::constant(1.0f64), ScalarFn::constant(0.0), 0.25);
        let ex = Triangular2D::<f64>::exponential();
        for i in 0..=40 {
            let x2 = i as f64 / 40.0;
            assert_abs_diff_eq!(flat.inner_integral(x2).unwrap(), x2 - 1.0, epsilon = 1e-10);
            let want = (-1.0f64).exp() - (-x2).exp();
            assert_abs_diff_eq!(ex.inner_integral(x2).unwrap(), want, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(ex.eval(&[0.7, 0.0]).unwrap()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn second_component_ignores_first() {
        let p = PhaseMap::Triangular2D(Triangular2D::<f64>::exponential());
        let a = p.eval(&[0.1, 0.4]).unwrap();
        let b = p.eval(&[0.9, 0.4]).unwrap();
        assert_eq!(a[1], b[1]);
    }

    #[test]
    fn determinant_is_one() {
        let p = PhaseMap::Triangular2D(Triangular2D::<f64>::exponential());
        for &(x1, x2) in &[(0.1, 0.2), (0.5, 0.9), (0.99, 0.01)] {
            assert_abs_diff_eq!(
                p.jacobian(&[x1, x2], 1e-5).unwrap().det().unwrap(),
                1.0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn nonpositive_z_is_rejected() {
        let z = ScalarFn::new("x2", |t: &[f64]| t[0]);
        let p = PhaseMap::Triangular2D(Triangular2D::new(z, ScalarFn::constant(0.0), 0.0));
        assert!(p.eval(&[0.5, -0.2]).is_err());
    }

    #[test]
    fn inverts_second_component() {
        let t = Triangular2D::<f64>::exponential();
        let y2 = t.eval(&[0.3, 0.6]).unwrap()[1];
        let x2 = t.invert_second(y2, 0.0, 1.0).unwrap().unwrap();
        assert_abs_diff_eq!(x2, 0.6, epsilon = 1e-12);
        assert!(t.invert_second(0.9, 0.0, 1.0).unwrap().is_none());
    }
}
