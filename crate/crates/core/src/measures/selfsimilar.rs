//! Self-similar measures `ν = Σ_j w_j ν∘S_j^{-1}` with `S_j(x) = (x + d_j)/ρ`.

use std::sync::{Arc, OnceLock};

use num_complex::Complex;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::real::{cis_turns, Real};
use crate::rng;

/// Agreement required between the product formula and the stratified
/// sampling estimate before the product formula is used.
pub const PRODUCT_VALIDATION_TOL: f64 = 1e-3;
const VALIDATION_TRUNC: usize = 40;
const VALIDATION_FREQS: [f64; 6] = [0.37, 1.0, 2.5, -3.1, 7.3, 21.0];
const VALIDATION_STRATA: usize = 4096;
const VALIDATION_TAILS: usize = 4;

#[derive(Clone, Debug)]
pub struct SelfSimilar<T: Real> {
    pub ratio: u32,
    pub digits: Vec<T>,
    pub weights: Vec<T>,
    check: Arc<OnceLock<std::result::Result<(), Error>>>,
}

impl<T: Real> PartialEq for SelfSimilar<T> {
    fn eq(&self, other: &Self) -> bool {
        self.ratio == other.ratio && self.digits == other.digits && self.weights == other.weights
    }
}

impl<T: Real> SelfSimilar<T> {
    pub fn new(ratio: u32, digits: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if ratio < 2 {
            return Err(invalid("ratio", "must be an integer ≥ 2"));
        }
        if digits.is_empty() || digits.len() != weights.len() {
            return Err(invalid("digits", "need one weight per digit"));
        }
        if weights.iter().any(|w| !(*w > T::zero())) {
            return Err(invalid("weights", "must be positive"));
        }
        let sum = weights.iter().fold(T::zero(), |s, &w| s + w);
        if (sum - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return Err(invalid("weights", format!("sum to {sum}, not 1")));
        }
        Ok(Self {
            ratio,
            digits,
            weights,
            check: Arc::new(OnceLock::new()),
        })
    }

    /// Convex hull `[min d/(ρ−1), max d/(ρ−1)]` of the attractor.
    pub fn hull(&self) -> (T, T) {
        let r1 = T::of(self.ratio as usize - 1);
        let lo = self.digits.iter().fold(T::infinity(), |m, &d| m.min(d));
        let hi = self.digits.iter().fold(T::neg_infinity(), |m, &d| m.max(d));
        (lo / r1, hi / r1)
    }

    /// Mean of the measure, `Σ w_j d_j/(ρ−1)`.
    pub fn barycenter(&self) -> T {
        let r1 = T::of(self.ratio as usize - 1);
        self.digits
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |s, (&d, &w)| s + w * d)
            / r1
    }

    /// `m(ξ) = Σ_j w_j e^{2πi d_j ξ}`.
    pub fn mask(&self, xi: T) -> Complex<T> {
        self.digits
            .iter()
            .zip(&self.weights)
            .fold(Complex::new(T::zero(), T::zero()), |s, (&d, &w)| {
                s + cis_turns(d * xi) * w
            })
    }

    /// `Π_{n=1}^{trunc} m(ξ/ρⁿ)` without validation.
    pub fn product(&self, xi: T, trunc: usize) -> Complex<T> {
        let r = T::of(self.ratio as usize);
        let mut p = Complex::new(T::one(), T::zero());
        let mut x = xi;
        for _ in 0..trunc {
            x /= r;
            p *= self.mask(x);
        }
        p
    }

    /// Bound on `|Π_{n≤trunc} − Π_{n<∞}|` from `|1 − m(η)| ≤ 2π|η| max|d|`.
    pub fn truncation_bound(&self, xi: T, trunc: usize) -> T {
        let r = T::of(self.ratio as usize);
        let dmax = self.digits.iter().fold(T::zero(), |m, &d| m.max(d.abs()));
        T::two_pi() * xi.abs() * dmax * r.powi(-(trunc as i32)) / (r - T::one())
    }

    /// Random point `Σ_{i=1}^{depth} d_{j_i}/ρ^i` with `j_i` drawn from the
    /// weights.
    pub fn draw<R: Rng>(&self, r: &mut R, depth: usize) -> T {
        let rho = T::of(self.ratio as usize);
        let mut idx = Vec::with_capacity(depth);
        for _ in 0..depth {
            idx.push(self.pick(r));
        }
        idx.iter().rev().fold(T::zero(), |acc, &j| (acc + self.digits[j]) / rho)
    }

    fn pick<R: Rng>(&self, r: &mut R) -> usize {
        let u = T::lit(r.random::<f64>());
        let mut c = T::zero();
        for (j, &w) in self.weights.iter().enumerate() {
            c += w;
            if u < c {
                return j;
            }
        }
        self.weights.len() - 1
    }

    /// Stratified digit-sampling estimate of `ν̂(ξ)`: the leading digits are
    /// enumerated exhaustively and the remaining ones drawn at random.
    pub fn stratified_transform(&self, xi: T, depth: usize, seed: u64) -> Complex<T> {
        let k = self.digits.len();
        let rho = T::of(self.ratio as usize);
        let mut levels = 0;
        let mut strata = 1usize;
        while levels < depth && strata * k <= VALIDATION_STRATA {
            strata *= k;
            levels += 1;
        }
        let mut r = rng::stream(seed, rng::INTERNAL_STREAM_BASE + 7);
        let tail_scale = rho.powi(-(levels as i32));
        let mut total = Complex::new(T::zero(), T::zero());
        for s in 0..strata {
            let mut prefix = T::zero();
            let mut w = T::one();
            let mut idx = s;
            let mut scale = T::one();
            for _ in 0..levels {
                let j = idx % k;
                idx /= k;
                scale /= rho;
                prefix += self.digits[j] * scale;
                w *= self.weights[j];
            }
            let mut acc = Complex::new(T::zero(), T::zero());
            for _ in 0..VALIDATION_TAILS {
                let tail = self.draw(&mut r, depth - levels);
                acc += cis_turns(xi * (prefix + tail_scale * tail));
            }
            total += acc * (w / T::of(VALIDATION_TAILS));
        }
        total
    }

    /// Compares the product formula with [`SelfSimilar::stratified_transform`]
    /// at a fixed set of frequencies. Runs once per measure.
    pub fn validate_product_formula(&self) -> Result<()> {
        self.check
            .get_or_init(|| {
                for &f in &VALIDATION_FREQS {
                    let xi = T::lit(f);
                    let p = self.product(xi, VALIDATION_TRUNC);
                    let s = self.stratified_transform(xi, VALIDATION_TRUNC, 0x0dd_c0de);
                    let dev = (p - s).norm().as_f64();
                    if !(dev <= PRODUCT_VALIDATION_TOL) {
                        return Err(Error::ProductFormulaRejected { xi: f, deviation: dev });
                    }
                }
                Ok(())
            })
            .clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nu4() -> SelfSimilar<f64> {
        SelfSimilar::new(4, vec![0.0, 2.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(SelfSimilar::new(4, vec![0.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(SelfSimilar::new(1, vec![0.0], vec![1.0]).is_err());
        assert!(SelfSimilar::new(3, vec![0.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn product_formula_validates() {
        assert!(nu4().validate_product_formula().is_ok());
        let nu3 = SelfSimilar::new(3, vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert!(nu3.validate_product_formula().is_ok());
    }

    #[test]
    fn hull_and_barycenter() {
        let n = nu4();
        let (a, b) = n.hull();
        assert_eq!(a, 0.0);
        assert_abs_diff_eq!(b, 2.0 / 3.0, epsilon = 1e-16);
        assert_abs_diff_eq!(n.barycenter(), 1.0 / 3.0, epsilon = 1e-16);
    }

    #[test]
    fn draws_stay_on_cantor_set() {
        let n3 = SelfSimilar::new(3, vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let mut r = rng::stream(5, 0);
        for _ in 0..2000 {
            let x: f64 = n3.draw(&mut r, 30);
            assert!((0.0..=1.0).contains(&x));
            assert!(!(x > 1.0 / 3.0 + 1e-14 && x < 2.0 / 3.0 - 1e-14));
        }
    }
}
