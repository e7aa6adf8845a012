use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measures::{integrate_adaptive, Measure};
use crate::phases::PhaseMap;
use crate::quadrature::QuadratureSpec;
use crate::real::{cis_turns, Real};
use crate::spectra::{SpectrumSet, Truncation};

use super::battery::TestFunction;
use super::gram::{band, gram, prepare, GramOptions, GramReport, GramSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParsevalEntry {
    pub name: String,
    /// `Σ_λ |c_λ|² / (mass·‖f‖²)`.
    pub ratio: f64,
    pub norm2: f64,
    /// Bound on the error of `ratio` propagated from the coefficient errors.
    pub ratio_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OnbReport<T: Real> {
    pub verdict: Verdict,
    pub orthogonal: bool,
    /// Some ratio exceeded `1 + tol_c`, which an orthonormal system cannot
    /// produce; points at quadrature error.
    pub bessel_violation: bool,
    pub tol_orth: f64,
    pub tol_c: f64,
    pub parseval: Vec<ParsevalEntry>,
    pub gram_summary: GramSummary,
    pub spectrum_size: usize,
    pub truncation: Truncation,
    #[serde(skip)]
    pub gram: GramReport<T>,
}

/// Checks orthogonality through the Gram matrix and completeness through
/// Parseval ratios of the test functions.
///
/// Completeness has no finite certificate: ratios below `1 − tol_c` give
/// `Inconclusive`, since truncating `Λ` alone can cause them.
#[allow(clippy::too_many_arguments)]
pub fn verify_onb<T: Real>(
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    quad: &QuadratureSpec,
    tol_orth: f64,
    tol_c: f64,
    tests: &[TestFunction<T>],
    opts: &GramOptions,
) -> Result<OnbReport<T>> {
    if tests.is_empty() {
        return Err(invalid("test_functions", "need at least one test function"));
    }
    let g = gram(mu, phi, lambda, quad, opts)?;
    let orthogonal = g.max_offdiag.as_f64() <= tol_orth && g.diag_dev.as_f64() <= tol_orth;
    let mass = mu.total_mass();

    let parseval = tests
        .iter()
        .map(|t| {
            let (coef, norm2) = coefficients_and_norm(t, mu, phi, lambda, quad)?;
            if !(norm2.0 > T::zero()) {
                return Err(invalid("test_functions", format!("{} has zero norm", t.name)));
            }
            let s = coef.iter().fold(T::zero(), |a, (c, _)| a + c.norm_sqr());
            let ds = coef
                .iter()
                .fold(T::zero(), |a, (c, e)| a + T::lit(2.0) * c.norm() * *e + *e * *e);
            let denom = mass * norm2.0;
            let ratio = s / denom;
            let ratio_err = ds / denom + ratio * norm2.1 / norm2.0;
            Ok(ParsevalEntry {
                name: t.name.clone(),
                ratio: ratio.as_f64(),
                norm2: norm2.0.as_f64(),
                ratio_err: ratio_err.as_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let bessel_violation = parseval.iter().any(|p| !(p.ratio <= 1.0 + tol_c));
    let complete = parseval.iter().all(|p| p.ratio >= 1.0 - tol_c);
    let verdict = if !orthogonal || bessel_violation {
        Verdict::Fail
    } else if complete {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    Ok(OnbReport {
        verdict,
        orthogonal,
        bessel_violation,
        tol_orth,
        tol_c,
        parseval,
        gram_summary: g.summary(),
        spectrum_size: lambda.len(),
        truncation: lambda.truncation.clone(),
        gram: g,
    })
}

type Coeffs<T> = Vec<(Complex<T>, T)>;

/// `c_λ = ∫ f e^{−2πiλ·φ} dμ` for every `λ` with error estimates, and
/// `(‖f‖², err)`.
pub(crate) fn coefficients_and_norm<T: Real>(
    t: &TestFunction<T>,
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    quad: &QuadratureSpec,
) -> Result<(Coeffs<T>, (T, T))> {
    if let QuadratureSpec::Adaptive {
        abs_tol,
        max_subdivisions,
    } = quad
    {
        let tol = T::lit(*abs_tol);
        let nan = Complex::new(T::nan(), T::nan());
        let coef = lambda
            .points
            .par_iter()
            .map(|l| {
                let g = |x: &[T]| match phi.eval(x) {
                    Ok(y) => t.eval(x) * cis_turns(-y.iter().zip(l).fold(T::zero(), |s, (a, b)| s + *a * *b)),
                    Err(_) => nan,
                };
                integrate_adaptive(&g, mu, tol, *max_subdivisions, quad.name()).map(|r| (r.value, r.err))
            })
            .collect::<Result<Vec<_>>>()?;
        let n2 = integrate_adaptive(
            &|x: &[T]| Complex::new(t.eval(x).norm_sqr(), T::zero()),
            mu,
            tol,
            *max_subdivisions,
            quad.name(),
        )?;
        return Ok((coef, (n2.value.re, n2.err)));
    }
    let freq = band(&lambda.points, phi.out_dim());
    let prep = prepare(mu, phi, quad, &freq)?;
    let fx: Vec<Complex<T>> = (0..prep.x.len())
        .into_par_iter()
        .map(|i| t.eval(prep.x.point(i)))
        .collect();
    if let Some(i) = fx.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFiniteValue {
            node: prep.x.point(i).iter().map(|v| v.as_f64()).collect(),
        });
    }
    let d = prep.y.dim;
    let coef = lambda
        .points
        .par_iter()
        .map(|l| {
            let vals: Vec<Complex<T>> = fx
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    let y = &prep.y.points[i * d..(i + 1) * d];
                    *f * cis_turns(-y.iter().zip(l).fold(T::zero(), |s, (a, b)| s + *a * *b))
                })
                .collect();
            let r = prep.x.combine(&vals);
            (r.value, r.err)
        })
        .collect();
    let sq: Vec<Complex<T>> = fx.iter().map(|f| Complex::new(f.norm_sqr(), T::zero())).collect();
    let n2 = prep.x.combine(&sq);
    Ok((coef, (n2.value.re, n2.err)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::standard_battery;

    #[test]
    fn linear_function_ratio_matches_tail() {
        let mu = Measure::<f64>::unit_cube(1);
        let f = TestFunction::real("x", |x: &[f64]| x[0]);
        let r = verify_onb(
            &mu,
            &PhaseMap::identity(1),
            &SpectrumSet::integers(-32, 32),
            &QuadratureSpec::gauss(64),
            1e-10,
            0.01,
            &[f],
            &GramOptions::default(),
        )
        .unwrap();
        // ‖x‖² = 1/3 and |c_k|² = 1/(4π²k²)
        let tail: f64 = (33..200_000)
            .map(|k| 2.0 / (4.0 * std::f64::consts::PI.powi(2) * (k as f64 * k as f64)))
            .sum();
        let expected = 1.0 - tail * 3.0;
        assert!(
            (r.parseval[0].ratio - expected).abs() < 1e-5,
            "{} vs {expected}",
            r.parseval[0].ratio
        );
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn square_phase_is_not_orthogonal() {
        let mu = Measure::<f64>::unit_cube(1);
        let tests = standard_battery(&mu).unwrap();
        let r = verify_onb(
            &mu,
            &PhaseMap::square(),
            &SpectrumSet::integers(-4, 4),
            &QuadratureSpec::gauss(32),
            1e-8,
            0.02,
            &tests,
            &GramOptions::default(),
        )
        .unwrap();
        assert!(!r.orthogonal);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn short_spectrum_is_inconclusive() {
        let mu = Measure::<f64>::unit_cube(1);
        let f = TestFunction::real("x", |x: &[f64]| x[0]);
        let r = verify_onb(
            &mu,
            &PhaseMap::identity(1),
            &SpectrumSet::integers(-1, 1),
            &QuadratureSpec::gauss(16),
            1e-10,
            0.01,
            &[f],
            &GramOptions::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(!r.bessel_violation);
    }

    #[test]
    fn empty_battery_is_rejected() {
        let mu = Measure::<f64>::unit_cube(1);
        let e = verify_onb(
            &mu,
            &PhaseMap::identity(1),
            &SpectrumSet::integers(-1, 1),
            &QuadratureSpec::gauss(16),
            1e-10,
            0.01,
            &[],
            &GramOptions::default(),
        );
        assert!(e.is_err());
    }
}
