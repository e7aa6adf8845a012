use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::measures::{discretize, integrate_adaptive, BandHint, Discretization, Measure};
use crate::phases::PhaseMap;
use crate::quadrature::QuadratureSpec;
use crate::real::{cis_turns, Real};
use crate::spectra::{integer_lattice, SpectrumSet};

/// Largest number of Gauss order doublings tried when a tolerance is set.
const MAX_REFINEMENTS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct GramOptions {
    /// Largest accepted `|Λ|`.
    pub cap: usize,
    /// Truncation of the self-similar product formula; `None` disables the
    /// product-formula path.
    pub product_trunc: Option<usize>,
    /// Largest acceptable per-entry error estimate.
    pub tolerance: Option<f64>,
}

impl Default for GramOptions {
    fn default() -> Self {
        Self {
            cap: 4096,
            product_trunc: Some(40),
            tolerance: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GramMethod {
    ProductFormula,
    Quadrature,
    Adaptive,
}

/// `G_{λλ′} = ∫ e^{2πi(λ−λ′)·φ} dμ` with residuals.
#[derive(Clone, Debug)]
pub struct GramReport<T: Real> {
    pub spectrum: SpectrumSet<T>,
    pub n: usize,
    /// Row-major entries.
    pub entries: Vec<Complex<T>>,
    /// Row-major error estimates.
    pub errors: Vec<T>,
    pub max_offdiag: T,
    /// `max |G_{λλ} − total_mass|`.
    pub diag_dev: T,
    /// `max |G − G*|`.
    pub hermiticity_residual: T,
    pub max_err: T,
    pub total_mass: T,
    pub quad: QuadratureSpec,
    pub method: GramMethod,
    pub distinct_differences: usize,
    pub cache_hits: usize,
}

/// JSON view of a [`GramReport`] without the matrix.
#[derive(Clone, Debug, Serialize)]
pub struct GramSummary {
    pub max_offdiag: f64,
    pub diag_dev: f64,
    pub hermiticity: f64,
    pub max_err: f64,
    pub n: usize,
    pub quad: QuadratureSpec,
    pub method: GramMethod,
    pub distinct_differences: usize,
    pub cache_hits: usize,
}

impl<T: Real> GramReport<T> {
    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        self.entries[i * self.n + j]
    }

    pub fn err(&self, i: usize, j: usize) -> T {
        self.errors[i * self.n + j]
    }

    /// Index of `λ` in the spectrum.
    pub fn index_of(&self, lambda: &[T]) -> Option<usize> {
        self.spectrum.points.iter().position(|p| p.as_slice() == lambda)
    }

    pub fn summary(&self) -> GramSummary {
        GramSummary {
            max_offdiag: self.max_offdiag.as_f64(),
            diag_dev: self.diag_dev.as_f64(),
            hermiticity: self.hermiticity_residual.as_f64(),
            max_err: self.max_err.as_f64(),
            n: self.n,
            quad: self.quad.clone(),
            method: self.method,
            distinct_differences: self.distinct_differences,
            cache_hits: self.cache_hits,
        }
    }

    /// Writes `row,col,re,im` lines with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,re,im")?;
        for i in 0..self.n {
            for j in 0..self.n {
                let g = self.entry(i, j);
                writeln!(w, "{i},{j},{:e},{:e}", g.re, g.im)?;
            }
        }
        Ok(())
    }
}

fn diff_key<T: Real>(xi: &[T]) -> Vec<i64> {
    let s = T::lit((1u64 << 30) as f64);
    xi.iter()
        .map(|v| (*v * s).round().to_i64().unwrap_or(i64::MAX))
        .collect()
}

/// Distinct differences `λ_i − λ_j` and the index of each `(i, j)` among
/// them.
fn differences<T: Real>(lambda: &SpectrumSet<T>) -> (Vec<Vec<T>>, Vec<usize>) {
    let n = lambda.len();
    let mut map: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut uniq = Vec::new();
    let mut idx = Vec::with_capacity(n * n);
    for a in &lambda.points {
        for b in &lambda.points {
            let xi: Vec<T> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
            let k = *map.entry(diff_key(&xi)).or_insert_with(|| {
                uniq.push(xi);
                uniq.len() - 1
            });
            idx.push(k);
        }
    }
    (uniq, idx)
}

/// Componentwise `max |ξ_j|` over a frequency list.
pub(crate) fn band<T: Real>(freqs: &[Vec<T>], dim: usize) -> Vec<T> {
    let mut m = vec![T::zero(); dim];
    for f in freqs {
        for (k, v) in f.iter().enumerate() {
            m[k] = m[k].max(v.abs());
        }
    }
    m
}

/// Nodes of `mu` together with their images under `phi`.
pub(crate) struct Prepared<T: Real> {
    pub x: Discretization<T>,
    pub y: Discretization<T>,
}

pub(crate) fn prepare<T: Real>(
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    quad: &QuadratureSpec,
    freq: &[T],
) -> Result<Prepared<T>> {
    let hint = BandHint {
        outer: Some(phi),
        freq: Some(freq),
    };
    let x = discretize(mu, quad, &hint)?;
    let y = x.mapped(phi)?;
    Ok(Prepared { x, y })
}

/// `Σ_i w_i e^{2πi s ξ·y_i}` with its error estimate, `s = ±1`.
pub(crate) fn exp_sum<T: Real>(y: &Discretization<T>, xi: &[T], sign: T) -> (Complex<T>, T) {
    let d = y.dim;
    let vals: Vec<Complex<T>> = (0..y.len())
        .map(|i| {
            let p = &y.points[i * d..(i + 1) * d];
            let t = p.iter().zip(xi).fold(T::zero(), |s, (a, b)| s + *a * *b);
            cis_turns(sign * t)
        })
        .collect();
    let r = y.combine(&vals);
    (r.value, r.err)
}

fn check_dims<T: Real>(mu: &Measure<T>, phi: &PhaseMap<T>, lambda: &SpectrumSet<T>, cap: usize) -> Result<()> {
    if phi.in_dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: phi.in_dim(),
        });
    }
    if lambda.dim != phi.out_dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.out_dim(),
            got: lambda.dim,
        });
    }
    if lambda.is_empty() {
        return Err(invalid("Lambda", "empty spectrum"));
    }
    if lambda.len() > cap {
        return Err(invalid(
            "Lambda",
            format!("{} frequencies exceed the cap {cap}", lambda.len()),
        ));
    }
    Ok(())
}

/// Gram matrix of `E(Λ, φ)` in `L²(μ)`, unnormalised (the diagonal is the
/// total mass). One integral is computed per distinct difference `λ − λ′`.
pub fn gram<T: Real>(
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    quad: &QuadratureSpec,
    opts: &GramOptions,
) -> Result<GramReport<T>> {
    check_dims(mu, phi, lambda, opts.cap)?;
    quad.validate()?;
    let (uniq, idx) = differences(lambda);
    let nu = Measure::pushforward(mu, phi)?;
    let mass = mu.total_mass();

    let (values, method, used_quad): (Vec<(Complex<T>, T)>, GramMethod, QuadratureSpec) =
        match (opts.product_trunc, nu.as_self_similar_pushforward()) {
            (Some(trunc), Some(s)) => {
                s.validate_product_formula()?;
                let v = uniq
                    .par_iter()
                    .map(|xi| {
                        (
                            s.product(xi[0], trunc) * mass,
                            s.truncation_bound(xi[0], trunc) * mass.abs(),
                        )
                    })
                    .collect();
                (v, GramMethod::ProductFormula, quad.clone())
            }
            _ => match quad {
                QuadratureSpec::Adaptive {
                    abs_tol,
                    max_subdivisions,
                } => {
                    let tol = T::lit(*abs_tol);
                    let v = uniq
                        .par_iter()
                        .map(|xi| {
                            let f = |y: &[T]| cis_turns(y.iter().zip(xi).fold(T::zero(), |s, (a, b)| s + *a * *b));
                            integrate_adaptive(&f, &nu, tol, *max_subdivisions, quad.name()).map(|r| (r.value, r.err))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (v, GramMethod::Adaptive, quad.clone())
                }
                _ => {
                    let freq = band(&uniq, phi.out_dim());
                    let mut q = quad.clone();
                    let mut attempt = 0;
                    loop {
                        let prep = prepare(mu, phi, &q, &freq)?;
                        let v: Vec<(Complex<T>, T)> =
                            uniq.par_iter().map(|xi| exp_sum(&prep.y, xi, T::one())).collect();
                        let worst = v.iter().fold(T::zero(), |m, (_, e)| m.max(*e)).as_f64();
                        match (opts.tolerance, &q) {
                            (Some(tol), QuadratureSpec::TensorGauss { orders, panels })
                                if worst > tol && attempt < MAX_REFINEMENTS =>
                            {
                                q = QuadratureSpec::TensorGauss {
                                    orders: orders.iter().map(|o| o * 2).collect(),
                                    panels: panels.clone(),
                                };
                                attempt += 1;
                            }
                            _ => break (v, GramMethod::Quadrature, q),
                        }
                    }
                }
            },
        };

    let n = lambda.len();
    let mut entries = Vec::with_capacity(n * n);
    let mut errors = Vec::with_capacity(n * n);
    for &k in &idx {
        entries.push(values[k].0);
        errors.push(values[k].1);
    }
    let max_err = errors.iter().fold(T::zero(), |m, e| m.max(*e));
    if let Some(tol) = opts.tolerance {
        if max_err.as_f64() > tol || max_err.is_nan() {
            return Err(Error::QuadratureFailure {
                tol,
                err: max_err.as_f64(),
            });
        }
    }
    let mut max_offdiag = T::zero();
    let mut diag_dev = T::zero();
    let mut herm = T::zero();
    for i in 0..n {
        for j in 0..n {
            let g = entries[i * n + j];
            if i == j {
                diag_dev = diag_dev.max((g - Complex::new(mass, T::zero())).norm());
            } else {
                max_offdiag = max_offdiag.max(g.norm());
            }
            herm = herm.max((g - entries[j * n + i].conj()).norm());
        }
    }
    Ok(GramReport {
        spectrum: lambda.clone(),
        n,
        entries,
        errors,
        max_offdiag,
        diag_dev,
        hermiticity_residual: herm,
        max_err,
        total_mass: mass,
        quad: used_quad,
        method,
        distinct_differences: uniq.len(),
        cache_hits: n * n - uniq.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugationReport {
    pub max_dev: f64,
    /// Largest combined error estimate of a compared pair of entries.
    pub max_err: f64,
    pub pairs_compared: usize,
}

/// Compares `G^{Mφ}_{k,k′}` with `G^{φ}_{Mᵀk, Mᵀk′}` over `ℤ^d` truncated
/// at sup-radius `r`, for every pair whose images stay inside the
/// truncation.
pub fn unimodular_conjugation_check<T: Real>(
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    m: &Mat<T>,
    r: i64,
    quad: &QuadratureSpec,
) -> Result<ConjugationReport> {
    let d = phi.out_dim();
    if m.rows() != d || m.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.rows(),
        });
    }
    let integral = (0..d).all(|i| (0..d).all(|j| m[(i, j)] == m[(i, j)].round()));
    if !integral || (m.det()?.abs() - T::one()).abs() > T::lit(1e-9) {
        return Err(invalid("M", "must be an integer matrix with |det M| = 1"));
    }
    let lambda: SpectrumSet<T> = integer_lattice(d, r);
    let mphi = phi.clone().then_affine(m.clone(), vec![T::zero(); d])?;
    let opts = GramOptions {
        product_trunc: None,
        ..GramOptions::default()
    };
    let g_m = gram(mu, &mphi, &lambda, quad, &opts)?;
    let g = gram(mu, phi, &lambda, quad, &opts)?;
    let mt = m.transpose();
    let images: Vec<Option<usize>> = lambda.points.iter().map(|k| g.index_of(&mt.matvec(k))).collect();
    let mut max_dev: f64 = 0.0;
    let mut max_err: f64 = 0.0;
    let mut pairs = 0;
    for i in 0..lambda.len() {
        for j in 0..lambda.len() {
            if let (Some(a), Some(b)) = (images[i], images[j]) {
                let dev = (g_m.entry(i, j) - g.entry(a, b)).norm().as_f64();
                max_dev = max_dev.max(dev);
                max_err = max_err.max((g_m.err(i, j) + g.err(a, b)).as_f64());
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(invalid("R", "truncation too small to compare any pair"));
    }
    Ok(ConjugationReport {
        max_dev,
        max_err,
        pairs_compared: pairs,
    })
}
