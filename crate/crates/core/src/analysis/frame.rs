use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::singular_values;
use crate::measures::{discretize, BandHint, Measure, MeasureKind};
use crate::phases::PhaseMap;
use crate::quadrature::QuadratureSpec;
use crate::real::{cis_turns, Real};
use crate::spectra::{SpectrumSet, Truncation};

use super::gram::band;

/// Required orthonormality of the test family.
const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthonormal test family spanning the subspace on which the frame
/// inequality is probed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TestBasis {
    /// Normalised indicators of `m` congruent dyadic cells; `m` must be a
    /// perfect `d`-th power.
    Dyadic { m: usize },
    /// Tensor Legendre polynomials of degree `≤ degree` in every direction.
    Legendre { degree: usize },
}

impl TestBasis {
    pub fn describe(&self) -> String {
        match self {
            TestBasis::Dyadic { m } => format!("dyadic indicators (M={m})"),
            TestBasis::Legendre { degree } => format!("tensor Legendre (degree ≤ {degree})"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameBoundsReport<T: Real> {
    /// `σ_min²` of the coefficient matrix.
    pub a_est: T,
    /// `σ_max²` of the coefficient matrix.
    pub b_est: T,
    /// `|Λ|`.
    pub k: usize,
    /// Dimension of the test subspace.
    pub m: usize,
    pub test_family: String,
    pub singular_values: Vec<T>,
    pub truncation: Truncation,
    /// Largest deviation of the test family's Gram matrix from `I`.
    pub orthonormality_dev: T,
    pub bias: &'static str,
}

const BIAS: &str = "a_est bounds the subspace-restricted lower frame bound from above; b_est bounds the true upper bound from below; both grow toward their limits as the truncation of Lambda grows";

fn box_of<T: Real>(mu: &Measure<T>) -> Result<(Vec<T>, Vec<T>)> {
    match mu.kind() {
        MeasureKind::LebesgueBox { lo, hi } => Ok((lo.clone(), hi.clone())),
        _ => Err(Error::Unsupported(format!(
            "frame test bases are defined on Lebesgue boxes, not {}",
            mu.kind_name()
        ))),
    }
}

/// Columns `T_{·,j} = (∫ ψ_j e^{−2πiλ·φ} dμ)_λ` of the coefficient matrix.
type Columns<T> = Vec<Vec<Complex<T>>>;

fn dyadic_columns<T: Real>(
    lo: &[T],
    hi: &[T],
    m: usize,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    quad: &QuadratureSpec,
    freq: &[T],
) -> Result<(Columns<T>, T)> {
    let d = lo.len();
    let per = (m as f64).powf(1.0 / d as f64).round() as usize;
    if per == 0 || per.pow(d as u32) != m {
        return Err(invalid("M", format!("{m} is not a perfect {d}-th power")));
    }
    let cells: Vec<Vec<usize>> = (0..m)
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let i = c % per;
                    c /= per;
                    i
                })
                .collect()
        })
        .collect();
    let hint = BandHint {
        outer: Some(phi),
        freq: Some(freq),
    };
    let per_t = T::of(per);
    let out: Vec<Result<(Vec<Complex<T>>, T)>> = cells
        .par_iter()
        .map(|c| {
            let clo: Vec<T> = (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * T::of(c[k]) / per_t).collect();
            let chi: Vec<T> = (0..d)
                .map(|k| lo[k] + (hi[k] - lo[k]) * T::of(c[k] + 1) / per_t)
                .collect();
            let cell = Measure::lebesgue_box(clo, chi)?;
            let vol = cell.total_mass();
            let x = discretize(&cell, quad, &hint)?;
            let y = x.mapped(phi)?;
            let scale = T::one() / vol.sqrt();
            let total = y.weights.iter().fold(T::zero(), |s, w| s + *w);
            let dev = (total * scale * scale - T::one()).abs();
            let dim = y.dim;
            let col = lambda
                .points
                .iter()
                .map(|l| {
                    let vals: Vec<Complex<T>> = (0..y.len())
                        .map(|i| {
                            let p = &y.points[i * dim..(i + 1) * dim];
                            cis_turns(-p.iter().zip(l).fold(T::zero(), |s, (a, b)| s + *a * *b))
                        })
                        .collect();
                    y.combine(&vals).value * scale
                })
                .collect();
            Ok((col, dev))
        })
        .collect();
    let mut cols = Vec::with_capacity(m);
    let mut dev = T::zero();
    for r in out {
        let (c, e) = r?;
        cols.push(c);
        dev = dev.max(e);
    }
    Ok((cols, dev))
}

/// Orthonormal Legendre polynomial of degree `n` on `[0,1]` at `u`.
fn legendre01<T: Real>(n: usize, u: T) -> T {
    let x = u + u - T::one();
    let (mut p0, mut p1) = (T::one(), x);
    let val = match n {
        0 => p0,
        1 => p1,
        _ => {
            for k in 1..n {
                let kt = T::of(k);
                let p2 = ((kt + kt + T::one()) * x * p1 - kt * p0) / (kt + T::one());
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    val * T::of(2 * n + 1).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn legendre_columns<T: Real>(
    mu: &Measure<T>,
    lo: &[T],
    hi: &[T],
    degree: usize,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    quad: &QuadratureSpec,
    freq: &[T],
) -> Result<(Columns<T>, T)> {
    let d = lo.len();
    let per = degree + 1;
    let m = per.pow(d as u32);
    let hint = BandHint {
        outer: Some(phi),
        freq: Some(freq),
    };
    let x = discretize(mu, quad, &hint)?;
    let y = x.mapped(phi)?;
    let scale = T::one() / mu.total_mass().sqrt();
    let alpha: Vec<Vec<usize>> = (0..m)
        .map(|mut c| {
            (0..d)
                .map(|_| {
                    let i = c % per;
                    c /= per;
                    i
                })
                .collect()
        })
        .collect();
    let psi: Vec<Vec<T>> = alpha
        .par_iter()
        .map(|a| {
            (0..x.len())
                .map(|i| {
                    let p = x.point(i);
                    (0..d).fold(scale, |s, k| s * legendre01(a[k], (p[k] - lo[k]) / (hi[k] - lo[k])))
                })
                .collect()
        })
        .collect();
    let mut dev = T::zero();
    for a in 0..m {
        for b in a..m {
            let ip = (0..x.len()).fold(T::zero(), |s, i| s + x.weights[i] * psi[a][i] * psi[b][i]);
            let target = if a == b { T::one() } else { T::zero() };
            dev = dev.max((ip - target).abs());
        }
    }
    let dim = y.dim;
    let phases: Vec<Vec<Complex<T>>> = lambda
        .points
        .par_iter()
        .map(|l| {
            (0..y.len())
                .map(|i| {
                    let p = &y.points[i * dim..(i + 1) * dim];
                    cis_turns(-p.iter().zip(l).fold(T::zero(), |s, (a, b)| s + *a * *b))
                })
                .collect()
        })
        .collect();
    let cols = psi
        .par_iter()
        .map(|ps| {
            phases
                .iter()
                .map(|e| {
                    let vals: Vec<Complex<T>> = e.iter().zip(ps).map(|(z, p)| *z * *p).collect();
                    x.combine(&vals).value
                })
                .collect()
        })
        .collect();
    Ok((cols, dev))
}

/// Estimates frame bounds of `E(Λ, φ)` in `L²(μ)` on the span of an
/// orthonormal test family: for `f = Σ c_j ψ_j`, `Σ_λ |⟨f, e_λ∘φ⟩|² = ‖Tc‖²`
/// with `T_{λ,j} = ∫ ψ_j e^{−2πiλ·φ} dμ`, so the extreme squared singular
/// values of `T` estimate `A` and `B`.
pub fn frame_bounds<T: Real>(
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    basis: &TestBasis,
    quad: &QuadratureSpec,
) -> Result<FrameBoundsReport<T>> {
    if phi.in_dim() != mu.dim() || lambda.dim != phi.out_dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.out_dim(),
            got: lambda.dim,
        });
    }
    if lambda.is_empty() {
        return Err(invalid("Lambda", "empty spectrum"));
    }
    if matches!(quad, QuadratureSpec::Adaptive { .. }) {
        return Err(Error::Unsupported("frame bounds need a fixed node set".into()));
    }
    let (lo, hi) = box_of(mu)?;
    let freq = band(&lambda.points, phi.out_dim());
    let (cols, dev) = match basis {
        TestBasis::Dyadic { m } => dyadic_columns(&lo, &hi, *m, phi, lambda, quad, &freq)?,
        TestBasis::Legendre { degree } => legendre_columns(mu, &lo, &hi, *degree, phi, lambda, quad, &freq)?,
    };
    if !(dev.as_f64() <= ORTHONORMAL_TOL) {
        return Err(Error::NotOrthonormal(dev.as_f64()));
    }
    let sv = singular_values(&cols)?;
    let m = cols.len();
    let smax = sv.first().copied().unwrap_or(T::zero());
    // With fewer frequencies than test functions T has a kernel.
    let smin = if lambda.len() < m {
        T::zero()
    } else {
        sv.last().copied().unwrap_or(T::zero())
    };
    Ok(FrameBoundsReport {
        a_est: smin * smin,
        b_est: smax * smax,
        k: lambda.len(),
        m,
        test_family: basis.describe(),
        singular_values: sv,
        truncation: lambda.truncation.clone(),
        orthonormality_dev: dev,
        bias: BIAS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_orthonormal() {
        let (x, w) = crate::quadrature::gauss_legendre::<f64>(12);
        for a in 0..6 {
            for b in 0..6 {
                let ip: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(t, wt)| 0.5 * wt * legendre01(a, 0.5 * (t + 1.0)) * legendre01(b, 0.5 * (t + 1.0)))
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn half_lattice_is_not_a_frame() {
        let mu = Measure::<f64>::unit_cube(1);
        let lambda = SpectrumSet::integers(-32, 32).mapped(|p| vec![2.0 * p[0]]);
        let r = frame_bounds(
            &mu,
            &PhaseMap::identity(1),
            &lambda,
            &TestBasis::Dyadic { m: 16 },
            &QuadratureSpec::gauss(32),
        )
        .unwrap();
        assert!(r.a_est <= 0.1, "{}", r.a_est);
        assert!(r.b_est <= 1.0 + 1e-9);
    }

    #[test]
    fn legendre_basis_on_full_lattice() {
        let mu = Measure::<f64>::unit_cube(1);
        let r = frame_bounds(
            &mu,
            &PhaseMap::identity(1),
            &SpectrumSet::integers(-64, 64),
            &TestBasis::Legendre { degree: 3 },
            &QuadratureSpec::gauss(32),
        )
        .unwrap();
        assert!(r.a_est > 0.95 && r.b_est <= 1.0 + 1e-9, "{} {}", r.a_est, r.b_est);
    }

    #[test]
    fn non_power_cell_count_is_rejected() {
        let e = frame_bounds(
            &Measure::<f64>::unit_cube(2),
            &PhaseMap::identity(2),
            &crate::spectra::integer_lattice(2, 2),
            &TestBasis::Dyadic { m: 8 },
            &QuadratureSpec::gauss(8),
        );
        assert!(e.is_err());
    }
}
