//! Frequency sets: lattices, their duals, the quarter-Cantor spectrum and
//! Beurling density estimates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::real::{sup_norm, Real};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", rename_all = "snake_case", tag = "kind")]
pub enum Generator<T: Real> {
    Lattice { a: Mat<T> },
    Lambda4 { n: usize },
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Sup-norm radius.
    Radius(f64),
    Level(usize),
    None,
}

/// A finite list of distinct frequencies with a description of where it
/// came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectrumSet<T: Real> {
    pub dim: usize,
    pub points: Vec<Vec<T>>,
    pub generator: Generator<T>,
    pub truncation: Truncation,
}

impl<T: Real> SpectrumSet<T> {
    /// An explicit list; duplicates are rejected.
    pub fn explicit(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| invalid("points", "empty spectrum"))?;
        if points.iter().any(|p| p.len() != dim) {
            return Err(invalid("points", "mixed dimensions"));
        }
        let mut sorted: Vec<&Vec<T>> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("points", "frequencies must be distinct"));
        }
        Ok(Self {
            dim,
            points,
            generator: Generator::Explicit,
            truncation: Truncation::None,
        })
    }

    /// Integers `lo..=hi` on the line.
    pub fn integers(lo: i64, hi: i64) -> Self {
        let points = (lo..=hi).map(|k| vec![T::lit(k as f64)]).collect();
        Self {
            dim: 1,
            points,
            generator: Generator::Lattice { a: Mat::identity(1) },
            truncation: Truncation::Radius(lo.unsigned_abs().max(hi.unsigned_abs()) as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Image under `λ ↦ Mλ`.
    pub fn transformed(&self, m: &Mat<T>) -> Self {
        Self {
            dim: m.rows(),
            points: self.points.iter().map(|p| m.matvec(p)).collect(),
            generator: Generator::Explicit,
            truncation: self.truncation.clone(),
        }
    }

    /// Each point mapped through `f`.
    pub fn mapped(&self, f: impl Fn(&[T]) -> Vec<T>) -> Self {
        let points: Vec<Vec<T>> = self.points.iter().map(|p| f(p)).collect();
        Self {
            dim: points.first().map_or(self.dim, |p| p.len()),
            points,
            generator: Generator::Explicit,
            truncation: self.truncation.clone(),
        }
    }

    /// Embeds `λ ↦ (0, …, 0, λ)` with `lead` leading zeros.
    pub fn padded(&self, lead: usize) -> Self {
        self.mapped(|p| {
            let mut v = vec![T::zero(); lead];
            v.extend_from_slice(p);
            v
        })
    }
}

/// All points `Ak`, `k ∈ ℤ^d`, with `|Ak|_∞ ≤ R`, in lexicographic order of
/// `k`.
pub fn lattice<T: Real>(a: &Mat<T>, radius: T) -> Result<SpectrumSet<T>> {
    if !a.is_square() {
        return Err(invalid("A", "lattice generator must be square"));
    }
    let inv = a.inverse()?;
    if !(radius >= T::zero()) {
        return Err(invalid("radius", "must be nonnegative"));
    }
    let d = a.rows();
    let slack = T::lit(1e-12) * radius.max(T::one());
    let bound = (0..d)
        .map(|i| (0..d).fold(T::zero(), |s, j| s + inv[(i, j)].abs()) * radius)
        .collect::<Vec<T>>();
    let kmax: Vec<i64> = bound
        .iter()
        .map(|b| (*b + slack).floor().to_i64().unwrap_or(0))
        .collect();
    let mut points = Vec::new();
    let mut k: Vec<i64> = kmax.iter().map(|m| -m).collect();
    'outer: loop {
        let kv: Vec<T> = k.iter().map(|&v| T::lit(v as f64)).collect();
        let p = a.matvec(&kv);
        if sup_norm(&p) <= radius + slack {
            points.push(p);
        }
        for i in (0..d).rev() {
            k[i] += 1;
            if k[i] <= kmax[i] {
                continue 'outer;
            }
            k[i] = -kmax[i];
        }
        break;
    }
    Ok(SpectrumSet {
        dim: d,
        points,
        generator: Generator::Lattice { a: a.clone() },
        truncation: Truncation::Radius(radius.as_f64()),
    })
}

/// `ℤ^d` truncated at sup-norm radius `r`.
pub fn integer_lattice<T: Real>(d: usize, r: i64) -> SpectrumSet<T> {
    lattice(&Mat::identity(d), T::lit(r as f64)).expect("identity is invertible")
}

/// Generator `A^{−T}` of the dual lattice.
pub fn dual_lattice<T: Real>(a: &Mat<T>) -> Result<Mat<T>> {
    Ok(a.inverse()?.transpose())
}

/// `{Σ_{i<n} 4^i a_i : a_i ∈ {0,1}}`, sorted ascending.
pub fn lambda4_values(n: usize) -> Result<Vec<u64>> {
    if !(1..=16).contains(&n) {
        return Err(invalid("n", "level must be between 1 and 16"));
    }
    let mut v: Vec<u64> = (0u64..1 << n)
        .map(|bits| (0..n).filter(|i| bits >> i & 1 == 1).map(|i| 4u64.pow(i as u32)).sum())
        .collect();
    v.sort_unstable();
    Ok(v)
}

pub fn lambda4<T: Real>(n: usize) -> Result<SpectrumSet<T>> {
    Ok(SpectrumSet {
        dim: 1,
        points: lambda4_values(n)?.into_iter().map(|v| vec![T::lit(v as f64)]).collect(),
        generator: Generator::Lambda4 { n },
        truncation: Truncation::Level(n),
    })
}

/// Number of elements of the full (infinite) `Λ₄` below `x`.
pub fn lambda4_count_below(x: f64) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    let top = x.ceil() - 1.0;
    if top >= u64::MAX as f64 {
        return u64::MAX;
    }
    count_le(top as u64)
}

/// `#{λ ∈ Λ₄ : λ ≤ m}` by a digit walk over the base-4 expansion of `m`.
fn count_le(m: u64) -> u64 {
    let mut digits = Vec::new();
    let mut v = m;
    while v > 0 {
        digits.push(v % 4);
        v /= 4;
    }
    let mut count = 0u64;
    for i in (0..digits.len()).rev() {
        let d = digits[i];
        // numbers agreeing above position i and smaller at position i
        let smaller = match d {
            0 => 0,
            1 => 1,
            _ => 2,
        };
        count += smaller * (1u64 << i);
        if d > 1 {
            return count;
        }
    }
    count + 1
}

/// Where frequencies are counted from.
#[derive(Clone, Debug)]
pub enum DensitySource<T: Real> {
    Lattice(Mat<T>),
    /// The infinite set `Λ₄`, counted lazily.
    Lambda4,
    Explicit(SpectrumSet<T>),
}

impl<T: Real> DensitySource<T> {
    pub fn dim(&self) -> usize {
        match self {
            DensitySource::Lattice(a) => a.rows(),
            DensitySource::Lambda4 => 1,
            DensitySource::Explicit(s) => s.dim,
        }
    }

    /// `#(Λ ∩ (c + [−R/2, R/2)^d))`.
    pub fn window_count(&self, center: &[f64], r: f64) -> Result<u64> {
        let lo: Vec<f64> = center.iter().map(|c| c - r / 2.0).collect();
        let hi: Vec<f64> = center.iter().map(|c| c + r / 2.0).collect();
        self.count_in(&lo, &hi)
    }

    /// Count in the half-open box `[lo, hi)`.
    pub fn count_in(&self, lo: &[f64], hi: &[f64]) -> Result<u64> {
        match self {
            DensitySource::Lambda4 => Ok(lambda4_count_below(hi[0]) - lambda4_count_below(lo[0])),
            DensitySource::Explicit(s) => {
                if let Truncation::Radius(rad) = s.truncation {
                    if lo.iter().chain(hi).any(|v| v.abs() > rad) {
                        return Err(Error::WindowOutOfRange);
                    }
                } else if let Some((plo, phi)) = bounds(s) {
                    if lo.iter().zip(&plo).any(|(a, b)| a < b) || hi.iter().zip(&phi).any(|(a, b)| a > b) {
                        return Err(Error::WindowOutOfRange);
                    }
                }
                Ok(s.points
                    .iter()
                    .filter(|p| {
                        p.iter()
                            .zip(lo.iter().zip(hi))
                            .all(|(v, (a, b))| v.as_f64() >= *a && v.as_f64() < *b)
                    })
                    .count() as u64)
            }
            DensitySource::Lattice(a) => {
                let a64 = Mat::from_rows(
                    &a.to_rows()
                        .iter()
                        .map(|r| r.iter().map(|v| v.as_f64()).collect())
                        .collect::<Vec<Vec<f64>>>(),
                )?;
                let inv = a64.inverse()?;
                let d = a64.rows();
                // bounding box of A^{-1}(box) through its corners
                let mut kmin = vec![f64::INFINITY; d];
                let mut kmax = vec![f64::NEG_INFINITY; d];
                for corner in 0..(1usize << d) {
                    let p: Vec<f64> = (0..d)
                        .map(|k| if corner >> k & 1 == 1 { hi[k] } else { lo[k] })
                        .collect();
                    let q = inv.matvec(&p);
                    for i in 0..d {
                        kmin[i] = kmin[i].min(q[i]);
                        kmax[i] = kmax[i].max(q[i]);
                    }
                }
                let kmin: Vec<i64> = kmin.iter().map(|v| v.floor() as i64 - 1).collect();
                let kmax: Vec<i64> = kmax.iter().map(|v| v.ceil() as i64 + 1).collect();
                let mut k = kmin.clone();
                let mut count = 0u64;
                'outer: loop {
                    let kv: Vec<f64> = k.iter().map(|&v| v as f64).collect();
                    let p = a64.matvec(&kv);
                    if p.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v < *b) {
                        count += 1;
                    }
                    for i in (0..d).rev() {
                        k[i] += 1;
                        if k[i] <= kmax[i] {
                            continue 'outer;
                        }
                        k[i] = kmin[i];
                    }
                    break;
                }
                Ok(count)
            }
        }
    }
}

fn bounds<T: Real>(s: &SpectrumSet<T>) -> Option<(Vec<f64>, Vec<f64>)> {
    let first = s.points.first()?;
    let mut lo: Vec<f64> = first.iter().map(|v| v.as_f64()).collect();
    let mut hi = lo.clone();
    for p in &s.points {
        for k in 0..p.len() {
            lo[k] = lo[k].min(p[k].as_f64());
            hi[k] = hi[k].max(p[k].as_f64());
        }
    }
    Some((lo, hi))
}

/// How window centers are chosen.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSampling {
    pub count: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub seed: u64,
}

impl CenterSampling {
    /// 10³ uniform centers in `[lo, hi]` (the origin is always added).
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, seed: u64) -> Self {
        Self {
            count: 1000,
            lo,
            hi,
            seed,
        }
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        let d = self.lo.len();
        let mut r = rng::stream(self.seed, rng::INTERNAL_STREAM_BASE + 3);
        let mut out = vec![vec![0.0; d]];
        for _ in 0..self.count {
            out.push(
                (0..d)
                    .map(|k| self.lo[k] + (self.hi[k] - self.lo[k]) * r.random::<f64>())
                    .collect(),
            );
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowEstimate {
    pub r: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum DensityVerdict {
    Converging { value: f64 },
    ZeroLowerDensity,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub windows: Vec<WindowEstimate>,
    pub verdict: DensityVerdict,
    pub centers: usize,
}

/// Empirical upper and lower Beurling densities over half-open windows
/// `Q_R(x) = x + [−R/2, R/2)^d`. The sup and inf run over the sampled
/// centers only, so `d_plus` underestimates and `d_minus` overestimates the
/// true quantities.
pub fn beurling_density<T: Real>(
    source: &DensitySource<T>,
    radii: &[f64],
    centers: &CenterSampling,
) -> Result<DensityReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii", "need positive window sizes"));
    }
    let d = source.dim();
    if centers.lo.len() != d || centers.hi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: centers.lo.len(),
        });
    }
    let cs = centers.centers();
    let mut windows = Vec::with_capacity(radii.len());
    for &r in radii {
        let counts: Vec<u64> = cs
            .par_iter()
            .map(|c| source.window_count(c, r))
            .collect::<Result<_>>()?;
        let vol = r.powi(d as i32);
        let max = *counts.iter().max().expect("nonempty") as f64;
        let min = *counts.iter().min().expect("nonempty") as f64;
        windows.push(WindowEstimate {
            r,
            d_plus: max / vol,
            d_minus: min / vol,
        });
    }
    let last = windows.last().expect("nonempty");
    let verdict = if last.d_minus * last.r.powi(d as i32) < 1.0 {
        DensityVerdict::ZeroLowerDensity
    } else if last.d_plus - last.d_minus <= 4.0 * d as f64 / last.r {
        DensityVerdict::Converging {
            value: (last.d_plus + last.d_minus) / 2.0,
        }
    } else {
        DensityVerdict::Undetermined
    };
    Ok(DensityReport {
        windows,
        verdict,
        centers: cs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lattices() {
        let s = lattice(&Mat::<f64>::identity(1), 2.0).unwrap();
        assert_eq!(s.points, vec![vec![-2.0], vec![-1.0], vec![0.0], vec![1.0], vec![2.0]]);
        let s = lattice(&Mat::<f64>::diag(&[2.0]), 3.0).unwrap();
        assert_eq!(s.points, vec![vec![-2.0], vec![0.0], vec![2.0]]);
        assert!(lattice(&Mat::<f64>::zeros(2, 2), 1.0).is_err());
    }

    #[test]
    fn dual_of_diagonal() {
        let d = dual_lattice(&Mat::<f64>::diag(&[2.0, 1.0])).unwrap();
        assert_eq!(d, Mat::diag(&[0.5, 1.0]));
    }

    #[test]
    fn lambda4_levels() {
        assert_eq!(lambda4_values(1).unwrap(), vec![0, 1]);
        assert_eq!(lambda4_values(2).unwrap(), vec![0, 1, 4, 5]);
        let l3 = lambda4_values(3).unwrap();
        assert_eq!(l3.len(), 8);
        assert_eq!(*l3.last().unwrap(), 21);
        assert!(lambda4_values(0).is_err());
        assert!(lambda4_values(17).is_err());
    }

    #[test]
    fn lambda4_counting_matches_enumeration() {
        let all = lambda4_values(8).unwrap();
        for m in [0.5, 1.0, 1.5, 2.0, 5.0, 6.0, 17.0, 21.0, 21.5, 100.0, 4096.0] {
            let want = all.iter().filter(|&&v| (v as f64) < m).count() as u64;
            assert_eq!(lambda4_count_below(m), want, "m={m}");
        }
    }

    #[test]
    fn explicit_rejects_duplicates() {
        assert!(SpectrumSet::<f64>::explicit(vec![vec![1.0], vec![1.0]]).is_err());
        let s = SpectrumSet::<f64>::explicit(vec![vec![1.0], vec![2.0]]).unwrap();
        let src = DensitySource::Explicit(s);
        assert_eq!(src.count_in(&[1.0], &[2.0]).unwrap(), 1);
        assert_eq!(src.count_in(&[0.0], &[2.0]), Err(Error::WindowOutOfRange));
    }

    #[test]
    fn integer_density() {
        let rep = beurling_density(
            &DensitySource::Lattice(Mat::<f64>::identity(1)),
            &[10.0, 20.0, 40.0],
            &CenterSampling::uniform(vec![-100.0], vec![100.0], 1),
        )
        .unwrap();
        for w in &rep.windows {
            assert!((w.d_plus - 1.0).abs() <= 2.0 / w.r);
            assert!((w.d_minus - 1.0).abs() <= 2.0 / w.r);
        }
        assert_eq!(rep.verdict, DensityVerdict::Converging { value: 1.0 });
    }
}
