//! Analysis and synthesis with generalized exponentials.

use std::io::Write;

use num_complex::Complex;
use serde::Serialize;

use crate::analysis::{coefficients_and_norm, TestFunction};
use crate::error::{invalid, Result};
use crate::measures::{integrate, Measure};
use crate::phases::PhaseMap;
use crate::quadrature::QuadratureSpec;
use crate::real::{cis_turns, dot, Real};
use crate::spectra::{SpectrumSet, Truncation};

/// `c_λ = ∫ f e^{−2πiλ·φ} dμ` with per-entry error estimates. An entry
/// whose estimate exceeds the scheme's tolerance is flagged, not zeroed.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct Coefficients<T: Real> {
    pub spectrum: SpectrumSet<T>,
    pub values: Vec<Complex<T>>,
    pub errors: Vec<T>,
    pub flagged: Vec<bool>,
}

impl<T: Real> Coefficients<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }

    /// Headerful CSV: `lambda1..lambdad,re,im,err,flagged`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let head: Vec<String> = (1..=self.spectrum.dim).map(|k| format!("lambda{k}")).collect();
        writeln!(w, "{},re,im,err,flagged", head.join(","))?;
        for (i, p) in self.spectrum.points.iter().enumerate() {
            let comps: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            let c = self.values[i];
            writeln!(
                w,
                "{},{:e},{:e},{:e},{}",
                comps.join(","),
                c.re,
                c.im,
                self.errors[i],
                self.flagged[i]
            )?;
        }
        Ok(())
    }
}

pub fn coefficients<T: Real>(
    f: &TestFunction<T>,
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    quad: &QuadratureSpec,
) -> Result<Coefficients<T>> {
    if lambda.dim != phi.out_dim() {
        return Err(invalid("Lambda", "dimension differs from the phase's output"));
    }
    let (c, _) = coefficients_and_norm(f, mu, phi, lambda, quad)?;
    let tol = quad.tolerance();
    let flagged = c
        .iter()
        .map(|(v, e)| {
            let finite = v.re.is_finite() && v.im.is_finite() && e.is_finite();
            !finite || tol.is_some_and(|t| e.as_f64() > t)
        })
        .collect();
    Ok(Coefficients {
        spectrum: lambda.clone(),
        values: c.iter().map(|(v, _)| *v).collect(),
        errors: c.iter().map(|(_, e)| *e).collect(),
        flagged,
    })
}

/// `x ↦ Σ_λ c_λ e^{2πiλ·φ(x)}`.
#[derive(Clone, Debug)]
pub struct Expansion<T: Real> {
    pub coefficients: Vec<Complex<T>>,
    pub phi: PhaseMap<T>,
    pub spectrum: SpectrumSet<T>,
}

impl<T: Real> Expansion<T> {
    pub fn eval(&self, x: &[T]) -> Result<Complex<T>> {
        let y = self.phi.eval(x)?;
        Ok(self
            .spectrum
            .points
            .iter()
            .zip(&self.coefficients)
            .fold(Complex::new(T::zero(), T::zero()), |s, (l, c)| {
                s + *c * cis_turns(dot(l, &y))
            }))
    }

    /// The expansion as a test function; evaluation failures give NaN.
    pub fn to_function(&self, name: impl Into<String>) -> TestFunction<T> {
        let e = self.clone();
        TestFunction::new(name, move |x| e.eval(x).unwrap_or(Complex::new(T::nan(), T::nan())))
    }
}

pub fn synthesize<T: Real>(c: &[Complex<T>], phi: &PhaseMap<T>, lambda: &SpectrumSet<T>) -> Result<Expansion<T>> {
    if c.len() != lambda.len() {
        return Err(invalid("c", "one coefficient per frequency"));
    }
    Ok(Expansion {
        coefficients: c.to_vec(),
        phi: phi.clone(),
        spectrum: lambda.clone(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct L2Error {
    pub value: f64,
    /// Error estimate of `value` propagated from the quadrature.
    pub err: f64,
}

/// `‖f − g‖_{L²(μ)}`.
pub fn l2_error<T: Real>(
    f: &TestFunction<T>,
    g: &TestFunction<T>,
    mu: &Measure<T>,
    quad: &QuadratureSpec,
) -> Result<L2Error> {
    let r = integrate(
        |x| Complex::new((f.eval(x) - g.eval(x)).norm_sqr(), T::zero()),
        mu,
        quad,
    )?;
    let sq = r.value.re.max(T::zero()).as_f64();
    let value = sq.sqrt();
    let e = r.err.as_f64();
    let err = if value > 0.0 { e / (2.0 * value) } else { e.sqrt() };
    Ok(L2Error { value, err })
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound = "")]
pub struct ReconstructionReport<T: Real> {
    pub function: String,
    pub spectrum_size: usize,
    pub truncation: Truncation,
    pub l2_error: L2Error,
    pub norm: f64,
    pub flagged: usize,
    #[serde(skip)]
    pub coefficients: Coefficients<T>,
}

/// Coefficients, resynthesis and the `L²(μ)` error of the round trip. The
/// result describes the truncated `Λ` only.
pub fn reconstruct<T: Real>(
    f: &TestFunction<T>,
    mu: &Measure<T>,
    phi: &PhaseMap<T>,
    lambda: &SpectrumSet<T>,
    quad: &QuadratureSpec,
) -> Result<ReconstructionReport<T>> {
    let c = coefficients(f, mu, phi, lambda, quad)?;
    let mass = mu.total_mass();
    let scaled: Vec<Complex<T>> = c.values.iter().map(|v| *v / mass).collect();
    let g = synthesize(&scaled, phi, lambda)?.to_function("synthesis");
    let zero = TestFunction::real("zero", |_| T::zero());
    Ok(ReconstructionReport {
        function: f.name.clone(),
        spectrum_size: lambda.len(),
        truncation: lambda.truncation.clone(),
        l2_error: l2_error(f, &g, mu, quad)?,
        norm: l2_error(f, &zero, mu, quad)?.value,
        flagged: c.flagged.iter().filter(|&&b| b).count(),
        coefficients: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn coefficients_of_x() {
        let f = TestFunction::real("x", |x: &[f64]| x[0]);
        let c = coefficients(
            &f,
            &Measure::unit_cube(1),
            &PhaseMap::identity(1),
            &SpectrumSet::integers(-5, 5),
            &QuadratureSpec::gauss(32),
        )
        .unwrap();
        for (p, v) in c.spectrum.points.iter().zip(&c.values) {
            let k = p[0];
            let want = if k == 0.0 {
                Complex::new(0.5, 0.0)
            } else {
                Complex::new(0.0, 1.0 / (2.0 * PI * k))
            };
            assert!((v - want).norm() < 1e-12, "{k}: {v}");
        }
        assert!(!c.any_flagged());
    }

    #[test]
    fn synthesis_of_delta_is_constant() {
        let lambda = SpectrumSet::integers(-2, 2);
        let mut c = vec![Complex::new(0.0, 0.0); 5];
        c[2] = Complex::new(1.0, 0.0);
        let e = synthesize(&c, &PhaseMap::square(), &lambda).unwrap();
        for x in [0.1, 0.37, 0.9] {
            assert!((e.eval(&[x]).unwrap() - 1.0).norm() < 1e-15);
        }
        assert!(synthesize(&c[..3], &PhaseMap::square(), &lambda).is_err());
    }

    #[test]
    fn csv_lists_every_frequency() {
        let f = TestFunction::real("one", |_: &[f64]| 1.0);
        let c = coefficients(
            &f,
            &Measure::unit_cube(1),
            &PhaseMap::identity(1),
            &SpectrumSet::integers(0, 3),
            &QuadratureSpec::gauss(8),
        )
        .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("lambda1,re,im,err,flagged\n"));
        assert_eq!(s.lines().count(), 5);
    }
}
