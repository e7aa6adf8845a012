//! Finite Borel measures: Lebesgue on boxes and discs, self-similar Cantor
//! type measures and pushforwards.

mod discretize;
mod selfsimilar;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

pub(crate) use discretize::integrate_adaptive;
pub use discretize::{discretize, integrate, BandHint, Discretization, ErrorModel, Integral};
pub use selfsimilar::{SelfSimilar, PRODUCT_VALIDATION_TOL};

use crate::error::{invalid, Error, Result};
use crate::phases::PhaseMap;
use crate::quadrature::QuadratureSpec;
use crate::real::{cis_turns, Real};
use crate::rng;

/// Depth of random digit strings drawn from self-similar measures.
pub const DEFAULT_SAMPLE_DEPTH: usize = 30;

#[derive(Clone, Debug)]
pub enum MeasureKind<T: Real> {
    LebesgueBox { lo: Vec<T>, hi: Vec<T> },
    LebesgueDisc { center: [T; 2], radius: T },
    SelfSimilar(SelfSimilar<T>),
    Pushforward { base: Box<Measure<T>>, map: PhaseMap<T> },
}

#[derive(Clone, Debug)]
pub struct Measure<T: Real> {
    kind: MeasureKind<T>,
    dim: usize,
    total_mass: T,
}

impl<T: Real> Measure<T> {
    pub fn lebesgue_box(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite())
        {
            return Err(invalid("box", "every side must satisfy lo < hi"));
        }
        let mass = lo.iter().zip(&hi).fold(T::one(), |p, (&a, &b)| p * (b - a));
        Ok(Self {
            dim: lo.len(),
            kind: MeasureKind::LebesgueBox { lo, hi },
            total_mass: mass,
        })
    }

    /// Lebesgue measure on `[0,1]^d`.
    pub fn unit_cube(d: usize) -> Self {
        Self::lebesgue_box(vec![T::zero(); d], vec![T::one(); d]).expect("valid cube")
    }

    pub fn lebesgue_disc(center: [T; 2], radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(invalid("radius", "must be positive"));
        }
        Ok(Self {
            dim: 2,
            kind: MeasureKind::LebesgueDisc { center, radius },
            total_mass: T::PI() * radius * radius,
        })
    }

    pub fn unit_disc() -> Self {
        Self::lebesgue_disc([T::zero(), T::zero()], T::one()).expect("valid disc")
    }

    pub fn self_similar(ratio: u32, digits: Vec<T>, weights: Vec<T>) -> Result<Self> {
        Ok(Self::from_self_similar(SelfSimilar::new(ratio, digits, weights)?))
    }

    pub fn from_self_similar(s: SelfSimilar<T>) -> Self {
        Self {
            dim: 1,
            kind: MeasureKind::SelfSimilar(s),
            total_mass: T::one(),
        }
    }

    /// Quarter Cantor measure: ratio 4, offsets {0, 2}, equal weights.
    pub fn nu4() -> Self {
        Self::self_similar(4, vec![T::zero(), T::lit(2.0)], vec![T::lit(0.5); 2]).expect("valid")
    }

    /// Middle-third Cantor measure: ratio 3, offsets {0, 2}, equal weights.
    pub fn nu3() -> Self {
        Self::self_similar(3, vec![T::zero(), T::lit(2.0)], vec![T::lit(0.5); 2]).expect("valid")
    }

    /// `φ_*μ`. Pushing forward by the identity returns the measure itself.
    pub fn pushforward(mu: &Measure<T>, phi: &PhaseMap<T>) -> Result<Self> {
        if phi.in_dim() != mu.dim {
            return Err(Error::DimensionMismatch {
                expected: mu.dim,
                got: phi.in_dim(),
            });
        }
        if phi.is_identity() {
            return Ok(mu.clone());
        }
        Ok(Self {
            dim: phi.out_dim(),
            total_mass: mu.total_mass,
            kind: MeasureKind::Pushforward {
                base: Box::new(mu.clone()),
                map: phi.clone(),
            },
        })
    }

    pub fn kind(&self) -> &MeasureKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_mass(&self) -> T {
        self.total_mass
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            MeasureKind::LebesgueBox { .. } => "lebesgue-box",
            MeasureKind::LebesgueDisc { .. } => "lebesgue-disc",
            MeasureKind::SelfSimilar(_) => "self-similar",
            MeasureKind::Pushforward { .. } => "pushforward",
        }
    }

    pub fn as_self_similar(&self) -> Option<&SelfSimilar<T>> {
        match &self.kind {
            MeasureKind::SelfSimilar(s) => Some(s),
            _ => None,
        }
    }

    /// The innermost non-pushforward measure and the maps applied to it, in
    /// order of application.
    pub fn chain(&self) -> (&Measure<T>, Vec<&PhaseMap<T>>) {
        let mut maps = Vec::new();
        let mut cur = self;
        while let MeasureKind::Pushforward { base, map } = &cur.kind {
            maps.push(map);
            cur = base;
        }
        maps.reverse();
        (cur, maps)
    }

    /// Recognises pushforwards that are themselves self-similar: a digit map
    /// applied to Lebesgue measure on `[0,1]` (full input alphabet) or to a
    /// self-similar measure written in the map's input base.
    pub fn as_self_similar_pushforward(&self) -> Option<SelfSimilar<T>> {
        let (base, maps) = self.chain();
        let maps: Vec<_> = maps.into_iter().filter(|m| !m.is_identity()).collect();
        match (maps.as_slice(), &base.kind) {
            ([], MeasureKind::SelfSimilar(s)) => Some(s.clone()),
            ([PhaseMap::Digit(dm)], MeasureKind::LebesgueBox { lo, hi }) => {
                if lo.len() == 1 && lo[0] == T::zero() && hi[0] == T::one() && dm.uses_full_input_alphabet() {
                    let k = dm.in_base as usize;
                    let digits = (0..k as u32).map(|d| T::of(dm.out_digit(d) as usize)).collect();
                    SelfSimilar::new(dm.out_base, digits, vec![T::one() / T::of(k); k]).ok()
                } else {
                    None
                }
            }
            ([PhaseMap::Digit(dm)], MeasureKind::SelfSimilar(s)) => {
                if s.ratio != dm.in_base {
                    return None;
                }
                let mut digits = Vec::with_capacity(s.digits.len());
                for d in &s.digits {
                    let r = d.round();
                    if (*d - r).abs() > T::lit(1e-12) || r < T::zero() {
                        return None;
                    }
                    let di = r.to_u32()?;
                    if !dm.in_digits.contains(&di) {
                        return None;
                    }
                    digits.push(T::of(dm.out_digit(di) as usize));
                }
                SelfSimilar::new(dm.out_base, digits, s.weights.clone()).ok()
            }
            _ => None,
        }
    }

    /// Axis-aligned box containing the support. Pushforwards through
    /// non-affine maps use a sampled estimate.
    pub fn support_box(&self) -> Result<(Vec<T>, Vec<T>)> {
        match &self.kind {
            MeasureKind::LebesgueBox { lo, hi } => Ok((lo.clone(), hi.clone())),
            MeasureKind::LebesgueDisc { center, radius } => Ok((
                vec![center[0] - *radius, center[1] - *radius],
                vec![center[0] + *radius, center[1] + *radius],
            )),
            MeasureKind::SelfSimilar(s) => {
                let (a, b) = s.hull();
                Ok((vec![a], vec![b]))
            }
            MeasureKind::Pushforward { base, map } => match map {
                PhaseMap::Affine { m, b } => {
                    let (lo, hi) = base.support_box()?;
                    let d = lo.len();
                    let mut out_lo = vec![T::infinity(); m.rows()];
                    let mut out_hi = vec![T::neg_infinity(); m.rows()];
                    for corner in 0..(1usize << d) {
                        let p: Vec<T> = (0..d)
                            .map(|k| if corner >> k & 1 == 1 { hi[k] } else { lo[k] })
                            .collect();
                        let y = m.matvec(&p);
                        for i in 0..y.len() {
                            out_lo[i] = out_lo[i].min(y[i] + b[i]);
                            out_hi[i] = out_hi[i].max(y[i] + b[i]);
                        }
                    }
                    Ok((out_lo, out_hi))
                }
                _ => {
                    let pts = self.sample_flat(8192, 0x5eed_b0c5, rng::INTERNAL_STREAM_BASE)?;
                    let d = self.dim;
                    let mut lo = vec![T::infinity(); d];
                    let mut hi = vec![T::neg_infinity(); d];
                    for p in pts.chunks(d) {
                        for k in 0..d {
                            lo[k] = lo[k].min(p[k]);
                            hi[k] = hi[k].max(p[k]);
                        }
                    }
                    Ok((lo, hi))
                }
            },
        }
    }

    /// Euclidean diameter of [`Measure::support_box`].
    pub fn support_diameter(&self) -> Result<T> {
        let (lo, hi) = self.support_box()?;
        Ok(crate::real::euclid_dist(&lo, &hi))
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        Ok(self
            .sample_flat(n, seed, 0)?
            .chunks(self.dim)
            .map(|c| c.to_vec())
            .collect())
    }

    /// Draws `n` points stored row-wise. Batches use streams starting at
    /// `stream_base`.
    pub fn sample_flat(&self, n: usize, seed: u64, stream_base: u64) -> Result<Vec<T>> {
        if n == 0 {
            return Err(invalid("n", "sample count must be positive"));
        }
        let (base, maps) = self.chain();
        let batches: Vec<(u64, usize)> = rng::batches(n).collect();
        let parts: Vec<Result<Vec<T>>> = batches
            .par_iter()
            .map(|&(id, count)| {
                let mut r = rng::stream(seed, stream_base + id);
                let mut pts = base.sample_base(&mut r, count);
                for map in &maps {
                    pts = apply_map(map, &pts)?;
                }
                Ok(pts)
            })
            .collect();
        let mut out = Vec::with_capacity(n * self.dim);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    fn sample_base<R: Rng>(&self, r: &mut R, count: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(count * self.dim);
        match &self.kind {
            MeasureKind::LebesgueBox { lo, hi } => {
                for _ in 0..count {
                    for k in 0..lo.len() {
                        let u: f64 = r.random();
                        out.push(lo[k] + (hi[k] - lo[k]) * T::lit(u));
                    }
                }
            }
            MeasureKind::LebesgueDisc { center, radius } => {
                let mut got = 0;
                while got < count {
                    let u = T::lit(2.0 * r.random::<f64>() - 1.0);
                    let v = T::lit(2.0 * r.random::<f64>() - 1.0);
                    if u * u + v * v <= T::one() {
                        out.push(center[0] + *radius * u);
                        out.push(center[1] + *radius * v);
                        got += 1;
                    }
                }
            }
            MeasureKind::SelfSimilar(s) => {
                for _ in 0..count {
                    out.push(s.draw(r, DEFAULT_SAMPLE_DEPTH));
                }
            }
            MeasureKind::Pushforward { .. } => unreachable!("chain() strips pushforwards"),
        }
        out
    }
}

/// Applies a map to a flat row-wise point list.
pub(crate) fn apply_map<T: Real>(map: &PhaseMap<T>, pts: &[T]) -> Result<Vec<T>> {
    let din = map.in_dim();
    let mut out = Vec::with_capacity(pts.len() / din * map.out_dim());
    for p in pts.chunks(din) {
        out.extend(map.eval(p)?);
    }
    Ok(out)
}

/// Parallel version of [`apply_map`] for large node sets.
pub(crate) fn apply_map_par<T: Real>(map: &PhaseMap<T>, pts: &[T]) -> Result<Vec<T>> {
    let din = map.in_dim();
    let chunk = 2048 * din;
    let parts: Vec<Result<Vec<T>>> = pts.par_chunks(chunk).map(|c| apply_map(map, c)).collect();
    let mut out = Vec::with_capacity(pts.len() / din * map.out_dim());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// `∫₀^ξ`-style closed form: `∫_a^b e^{2πiξx} dx`.
fn interval_transform<T: Real>(a: T, b: T, xi: T) -> Complex<T> {
    let len = b - a;
    if xi == T::zero() {
        return Complex::new(len, T::zero());
    }
    let arg = T::PI() * xi * len;
    let sinc = if arg.abs() < T::lit(1e-4) {
        len * (T::one() - arg * arg / T::lit(6.0))
    } else {
        arg.sin() / (T::PI() * xi)
    };
    cis_turns(xi * (a + b) / T::lit(2.0)) * sinc
}

/// `μ̂(ξ) = ∫ e^{2πiξ·x} dμ(x)`.
///
/// Boxes use exact one-dimensional closed forms. Self-similar measures use
/// the truncated product `Π_{n=1}^{trunc} m(ξ/ρⁿ)`, which is checked once per
/// measure against a stratified digit-sampling estimate and refused if the
/// two disagree. Discs and pushforwards fall back to quadrature.
pub fn fourier_transform<T: Real>(mu: &Measure<T>, xi: &[T], trunc: usize) -> Result<Complex<T>> {
    if xi.len() != mu.dim {
        return Err(Error::DimensionMismatch {
            expected: mu.dim,
            got: xi.len(),
        });
    }
    match &mu.kind {
        MeasureKind::LebesgueBox { lo, hi } => Ok((0..lo.len())
            .map(|k| interval_transform(lo[k], hi[k], xi[k]))
            .fold(Complex::new(T::one(), T::zero()), |p, v| p * v)),
        MeasureKind::SelfSimilar(s) => {
            if trunc == 0 {
                return Err(invalid("trunc", "must be at least 1"));
            }
            s.validate_product_formula()?;
            Ok(s.product(xi[0], trunc))
        }
        MeasureKind::LebesgueDisc { .. } => {
            let f = |x: &[T]| cis_turns(crate::real::dot(xi, x));
            Ok(integrate(f, mu, &QuadratureSpec::adaptive(1e-12))?.value)
        }
        MeasureKind::Pushforward { .. } => {
            if let Some(s) = mu.as_self_similar_pushforward() {
                s.validate_product_formula()?;
                return Ok(s.product(xi[0], trunc.max(1)) * mu.total_mass);
            }
            let (base, _) = mu.chain();
            let quad = match &base.kind {
                MeasureKind::SelfSimilar(_) => QuadratureSpec::SelfSimilarDigit { depth: 30 },
                _ => QuadratureSpec::adaptive(1e-10),
            };
            let f = |x: &[T]| cis_turns(crate::real::dot(xi, x));
            Ok(integrate(f, mu, &quad)?.value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn masses() {
        let b = Measure::<f64>::lebesgue_box(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(b.total_mass(), 4.0);
        let d = Measure::<f64>::lebesgue_disc([0.0, 0.0], 2.0).unwrap();
        assert_abs_diff_eq!(d.total_mass(), 4.0 * std::f64::consts::PI, epsilon = 1e-15);
        let p = Measure::pushforward(&b, &PhaseMap::Holhos).unwrap();
        assert_eq!(p.total_mass(), 4.0);
        assert!(Measure::<f64>::lebesgue_box(vec![1.0], vec![0.0]).is_err());
        assert!(Measure::pushforward(&Measure::<f64>::unit_cube(1), &PhaseMap::Holhos).is_err());
    }

    #[test]
    fn box_transform_closed_form() {
        let m = Measure::<f64>::unit_cube(1);
        assert_abs_diff_eq!(fourier_transform(&m, &[0.0], 1).unwrap().re, 1.0);
        let v = fourier_transform(&m, &[3.0], 1).unwrap();
        assert!(v.norm() < 1e-15);
        // ∫_0^1 e^{2πi x/2} dx = (e^{πi} − 1)/(πi) = 2i/π
        let v = fourier_transform(&m, &[0.5], 1).unwrap();
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 2.0 / std::f64::consts::PI, epsilon = 1e-15);
        let tiny = fourier_transform(&m, &[1e-9], 1).unwrap();
        assert_abs_diff_eq!(tiny.re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_is_hermitian() {
        let nu = Measure::<f64>::nu4();
        for &xi in &[0.3, 1.0, 5.7, 17.0] {
            let a = fourier_transform(&nu, &[xi], 40).unwrap();
            let b = fourier_transform(&nu, &[-xi], 40).unwrap();
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn samples_are_deterministic() {
        let m = Measure::<f64>::unit_disc();
        let a = m.sample(5000, 11).unwrap();
        let b = m.sample(5000, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p[0] * p[0] + p[1] * p[1] <= 1.0));
        assert_ne!(a, m.sample(5000, 12).unwrap());
    }

    #[test]
    fn digit_pushforward_is_recognised() {
        let mu = Measure::<f64>::unit_cube(1);
        let push =
            Measure::pushforward(&mu, &PhaseMap::Digit(crate::phases::DigitMap::binary_to_quaternary())).unwrap();
        let s = push.as_self_similar_pushforward().unwrap();
        assert_eq!(s.ratio, 4);
        assert_eq!(s.digits, vec![0.0, 2.0]);
        let push3 = Measure::pushforward(
            &Measure::<f64>::nu3(),
            &PhaseMap::Digit(crate::phases::DigitMap::ternary_to_quaternary()),
        )
        .unwrap();
        assert_eq!(push3.as_self_similar_pushforward().unwrap().digits, vec![0.0, 2.0]);
        let wrong = Measure::pushforward(
            &Measure::<f64>::nu4(),
            &PhaseMap::Digit(crate::phases::DigitMap::ternary_to_quaternary()),
        )
        .unwrap();
        assert!(wrong.as_self_similar_pushforward().is_none());
    }

    #[test]
    fn support_boxes() {
        let (lo, hi) = Measure::<f64>::nu3().support_box().unwrap();
        assert_eq!((lo[0], hi[0]), (0.0, 1.0));
        let (lo, hi) = Measure::<f64>::nu4().support_box().unwrap();
        assert_abs_diff_eq!(hi[0] - lo[0], 2.0 / 3.0, epsilon = 1e-15);
        let sq = Measure::pushforward(&Measure::<f64>::unit_disc(), &PhaseMap::Holhos).unwrap();
        let (lo, hi) = sq.support_box().unwrap();
        assert!(hi[0] <= crate::phases::HOLHOS_HALF_DIAGONAL + 1e-12 && hi[0] > 1.2);
        assert!(lo[1] >= -crate::phases::HOLHOS_HALF_DIAGONAL - 1e-12);
    }
}
