//! Turning a measure and a quadrature spec into weighted nodes.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phases::{DigitMap, PhaseMap};
use crate::quadrature::{adaptive_cubature, composite_gauss, NodeSet, QuadratureSpec};
use crate::real::{is_finite_c, Real};

use super::{apply_map_par, Measure, MeasureKind, SelfSimilar};

/// Upper bound on the number of cylinders enumerated by the digit rule.
pub const MAX_CYLINDERS: usize = 1 << 14;
/// Upper bound on composite panels per direction.
pub const MAX_PANELS: usize = 1024;

/// A value with its absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integral<T> {
    pub value: Complex<T>,
    pub err: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// Difference between the primary rule and a coarser companion rule.
    Difference,
    /// One Monte-Carlo standard error.
    StandardError,
}

/// Weighted nodes in the measure's own coordinates. Difference-type rules
/// carry the companion weights on the same node list (zero where a node
/// belongs to only one of the two rules).
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub dim: usize,
    pub points: Vec<T>,
    pub weights: Vec<T>,
    pub alt_weights: Option<Vec<T>>,
    pub model: ErrorModel,
    pub mass: T,
    pub scheme: &'static str,
    /// Digit strings of cylinder-rule nodes, kept until the first map so
    /// digit maps can be applied exactly.
    pub(crate) cylinders: Option<Arc<CylinderNodes>>,
}

/// Node `i` is the point of cylinder `codes[i].0` (level `level`) whose
/// remaining digits all equal digit index `codes[i].1`.
#[derive(Debug)]
pub(crate) struct CylinderNodes {
    level: usize,
    ratio: u32,
    /// Integer digits of the base measure, when all offsets are integers.
    int_digits: Option<Vec<u32>>,
    codes: Vec<(usize, usize)>,
}

impl CylinderNodes {
    /// Exact image of every node under a compatible digit map.
    fn apply<T: Real>(&self, dm: &DigitMap) -> Option<Vec<T>> {
        let digits = self.int_digits.as_ref()?;
        if dm.in_base != self.ratio || digits.iter().any(|d| !dm.in_digits.contains(d)) {
            return None;
        }
        let k = digits.len();
        let ob = T::of(dm.out_base as usize);
        let depth = dm.depth;
        let kept = self.level.min(depth);
        let tail_len = depth - kept;
        let tail_factor = (T::one() - ob.powi(-(tail_len as i32))) / (ob - T::one());
        let scale_l = ob.powi(-(kept as i32));
        let mut out = Vec::with_capacity(self.codes.len());
        for &(cyl, tail) in &self.codes {
            let mut idx = cyl;
            let mut seq = vec![0usize; self.level];
            for i in (0..self.level).rev() {
                seq[i] = idx % k;
                idx /= k;
            }
            let mut v = T::zero();
            for &j in seq[..kept].iter().rev() {
                v = (v + T::of(dm.out_digit(digits[j]) as usize)) / ob;
            }
            if tail_len > 0 {
                v += scale_l * T::of(dm.out_digit(digits[tail]) as usize) * tail_factor;
            }
            out.push(v);
        }
        Some(out)
    }
}

impl<T: Real> Discretization<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Rounding floor added to every difference estimate.
    pub fn rounding_floor(&self) -> T {
        T::of(self.len()) * T::epsilon() * self.mass.abs()
    }

    /// Combines integrand values at the nodes.
    pub fn combine(&self, values: &[Complex<T>]) -> Integral<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let mut s = zero;
        let mut abs = T::zero();
        for (v, &w) in values.iter().zip(&self.weights) {
            s += *v * w;
            abs += v.norm() * w.abs();
        }
        let err = match self.model {
            ErrorModel::Difference => {
                let alt = match &self.alt_weights {
                    Some(aw) => values.iter().zip(aw).fold(zero, |a, (v, &w)| a + *v * w),
                    None => s,
                };
                (s - alt).norm() + T::of(self.len()) * T::epsilon() * abs
            }
            ErrorModel::StandardError => {
                let n = T::of(self.len());
                let mean = s / self.mass;
                let sq = values
                    .iter()
                    .zip(&self.weights)
                    .fold(T::zero(), |a, (v, &w)| a + v.norm_sqr() * w)
                    / self.mass;
                let var = (sq - mean.norm_sqr()).max(T::zero());
                self.mass.abs() * (var / (n - T::one())).sqrt()
            }
        };
        Integral { value: s, err }
    }

    /// Pushes every node through `map`.
    pub fn mapped(&self, map: &PhaseMap<T>) -> Result<Self> {
        if map.is_identity() {
            return Ok(self.clone());
        }
        if let (Some(cyl), PhaseMap::Digit(dm)) = (&self.cylinders, map) {
            if let Some(points) = cyl.apply(dm) {
                return Ok(Self {
                    dim: 1,
                    points,
                    cylinders: None,
                    ..self.clone()
                });
            }
        }
        Ok(Self {
            dim: map.out_dim(),
            points: apply_map_par(map, &self.points)?,
            cylinders: None,
            ..self.clone()
        })
    }
}

/// Frequency content of the exponentials that will be integrated, used to
/// choose composite Gauss panels. `freq[j]` bounds `|ξ_j|` in the
/// coordinates after `outer` (or the measure's own coordinates when `outer`
/// is absent).
#[derive(Clone, Copy, Debug, Default)]
pub struct BandHint<'a, T: Real> {
    pub outer: Option<&'a PhaseMap<T>>,
    pub freq: Option<&'a [T]>,
}

/// A parameter box with a map into the base measure's space.
#[derive(Clone, Debug)]
pub(crate) struct Chart<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    polar_center: Option<[T; 2]>,
}

impl<T: Real> Chart<T> {
    /// Point and density at parameter `u`.
    #[inline]
    pub fn map(&self, u: &[T]) -> (Vec<T>, T) {
        match self.polar_center {
            None => (u.to_vec(), T::one()),
            Some(c) => {
                let (s, co) = u[1].sin_cos();
                (vec![c[0] + u[0] * co, c[1] + u[0] * s], u[0])
            }
        }
    }
}

/// Charts covering a base (non-pushforward) measure, if it has any.
pub(crate) fn charts<T: Real>(base: &Measure<T>) -> Option<Vec<Chart<T>>> {
    match base.kind() {
        MeasureKind::LebesgueBox { lo, hi } => Some(vec![Chart {
            lo: lo.clone(),
            hi: hi.clone(),
            polar_center: None,
        }]),
        MeasureKind::LebesgueDisc { center, radius } => Some(
            (0..4)
                .map(|q| Chart {
                    lo: vec![T::zero(), T::FRAC_PI_2() * T::of(q)],
                    hi: vec![*radius, T::FRAC_PI_2() * T::of(q + 1)],
                    polar_center: Some(*center),
                })
                .collect(),
        ),
        _ => None,
    }
}

fn push_through<T: Real>(maps: &[&PhaseMap<T>], x: Vec<T>) -> Result<Vec<T>> {
    let mut p = x;
    for m in maps {
        p = m.eval(&p)?;
    }
    Ok(p)
}

/// Per-direction panel counts from a sampled Lipschitz bound of
/// `u ↦ outer(maps(chart(u)))`.
fn auto_panels<T: Real>(
    chart: &Chart<T>,
    maps: &[&PhaseMap<T>],
    hint: &BandHint<'_, T>,
    orders: &[usize],
) -> Vec<usize> {
    let p = chart.lo.len();
    let Some(freq) = hint.freq else {
        return vec![1; p];
    };
    let per_dim: usize = match p {
        1 => 65,
        2 => 17,
        3 => 7,
        _ => 3,
    };
    let total = per_dim.pow(p as u32);
    let width: Vec<T> = (0..p).map(|k| chart.hi[k] - chart.lo[k]).collect();
    let eval = |u: &[T]| -> Option<Vec<T>> {
        let (x, _) = chart.map(u);
        let y = push_through(maps, x).ok()?;
        match hint.outer {
            Some(o) => o.eval(&y).ok(),
            None => Some(y),
        }
    };
    let out_dim = freq.len();
    let mut jmax = vec![vec![T::zero(); p]; out_dim];
    let mut u = vec![T::zero(); p];
    for idx in 0..total {
        let mut rem = idx;
        for k in 0..p {
            let i = rem % per_dim;
            rem /= per_dim;
            u[k] = chart.lo[k] + width[k] * (T::of(i) + T::lit(0.5)) / T::of(per_dim);
        }
        for k in 0..p {
            let h = width[k] * T::lit(1e-4);
            let uk = u[k];
            u[k] = uk + h;
            let fp = eval(&u);
            u[k] = uk - h;
            let fm = eval(&u);
            u[k] = uk;
            if let (Some(a), Some(b)) = (fp, fm) {
                for j in 0..out_dim.min(a.len()) {
                    let d = ((a[j] - b[j]) / (h + h)).abs();
                    if d.is_finite() {
                        jmax[j][k] = jmax[j][k].max(d);
                    } else {
                        jmax[j][k] = T::infinity();
                    }
                }
            }
        }
    }
    (0..p)
        .map(|k| {
            let rate = (0..out_dim).fold(T::zero(), |s, j| s + freq[j].abs() * jmax[j][k]);
            let cycles = width[k] * rate * T::lit(1.25);
            let want = (T::lit(4.0) * cycles / T::of(orders[k])).ceil();
            if !want.is_finite() || want > T::of(MAX_PANELS) {
                MAX_PANELS
            } else {
                want.to_usize().unwrap_or(1).max(1)
            }
        })
        .collect()
}

fn tensor_on_chart<T: Real>(chart: &Chart<T>, orders: &[usize], panels: &[usize]) -> NodeSet<T> {
    let rules: Vec<_> = (0..chart.lo.len())
        .map(|k| composite_gauss(orders[k], panels[k], chart.lo[k], chart.hi[k]))
        .collect();
    let params = NodeSet::tensor(&rules);
    let dim = if chart.polar_center.is_some() {
        2
    } else {
        chart.lo.len()
    };
    let mut out = NodeSet::new(dim);
    for i in 0..params.len() {
        let (x, dens) = chart.map(params.point(i));
        out.push(&x, params.weights[i] * dens);
    }
    out
}

/// Builds the node set for `(mu, quad)`. Adaptive schemes are
/// integrand-driven and are handled by [`integrate`] directly.
pub fn discretize<T: Real>(
    mu: &Measure<T>,
    quad: &QuadratureSpec,
    hint: &BandHint<'_, T>,
) -> Result<Discretization<T>> {
    quad.validate()?;
    let (base, maps) = mu.chain();
    let mismatch = || Error::SchemeMismatch {
        scheme: quad.name(),
        measure: base.kind_name(),
    };
    let base_disc = match quad {
        QuadratureSpec::TensorGauss { orders, panels } => {
            let charts = charts(base).ok_or_else(mismatch)?;
            let p = charts[0].lo.len();
            let orders = broadcast(orders, p, "orders")?;
            let lo_orders: Vec<usize> = orders.iter().map(|&o| (3 * o / 4).max(1)).collect();
            let mut hi_set = NodeSet::new(base.dim());
            let mut lo_set = NodeSet::new(base.dim());
            for chart in &charts {
                let pan = match panels {
                    Some(pn) => broadcast(pn, p, "panels")?,
                    None => auto_panels(chart, &maps, hint, &orders),
                };
                hi_set.extend(&tensor_on_chart(chart, &orders, &pan));
                lo_set.extend(&tensor_on_chart(chart, &lo_orders, &pan));
            }
            let nh = hi_set.len();
            let nl = lo_set.len();
            let mut points = hi_set.points;
            points.extend_from_slice(&lo_set.points);
            let mut weights = hi_set.weights;
            weights.resize(nh + nl, T::zero());
            let mut alt = vec![T::zero(); nh];
            alt.extend_from_slice(&lo_set.weights);
            Discretization {
                dim: base.dim(),
                points,
                weights,
                alt_weights: Some(alt),
                model: ErrorModel::Difference,
                mass: base.total_mass(),
                scheme: quad.name(),
                cylinders: None,
            }
        }
        QuadratureSpec::MonteCarlo { samples, seed } => {
            let points = base.sample_flat(*samples, *seed, 0)?;
            Discretization {
                dim: base.dim(),
                points,
                weights: vec![base.total_mass() / T::of(*samples); *samples],
                alt_weights: None,
                model: ErrorModel::StandardError,
                mass: base.total_mass(),
                scheme: quad.name(),
                cylinders: None,
            }
        }
        QuadratureSpec::SelfSimilarDigit { depth } => {
            let s = base.as_self_similar().ok_or_else(mismatch)?;
            cylinder_rule(s, *depth, quad.name())
        }
        QuadratureSpec::Adaptive { .. } => {
            return Err(Error::Unsupported("adaptive quadrature has no fixed node set".into()))
        }
    };
    let mut d = base_disc;
    for m in maps {
        d = d.mapped(m)?;
    }
    Ok(d)
}

fn broadcast(v: &[usize], p: usize, name: &'static str) -> Result<Vec<usize>> {
    match v.len() {
        1 => Ok(vec![v[0]; p]),
        n if n == p => Ok(v.to_vec()),
        n => Err(crate::error::invalid(
            name,
            format!("expected 1 or {p} entries, got {n}"),
        )),
    }
}

/// Two-point rule per level-`L` cylinder, at the two extreme points of the
/// cylinder's attractor copy and weighted to reproduce its barycenter. The
/// companion level-`L−1` rule reuses the same nodes.
fn cylinder_rule<T: Real>(s: &SelfSimilar<T>, depth: usize, scheme: &'static str) -> Discretization<T> {
    let k = s.digits.len();
    let mut level = 0;
    let mut count = 1usize;
    while level < depth && count * k <= MAX_CYLINDERS {
        count *= k;
        level += 1;
    }
    let level = level.max(1);
    let rho = T::of(s.ratio as usize);
    let mut prefix = vec![T::zero()];
    let mut weight = vec![T::one()];
    let mut parent_weight = vec![T::one()];
    let mut scale = T::one();
    for _ in 0..level {
        scale /= rho;
        let mut np = Vec::with_capacity(prefix.len() * k);
        let mut nw = Vec::with_capacity(prefix.len() * k);
        let mut npw = Vec::with_capacity(prefix.len() * k);
        for (p, w) in prefix.iter().zip(&weight) {
            for j in 0..k {
                np.push(*p + s.digits[j] * scale);
                nw.push(*w * s.weights[j]);
                npw.push(*w);
            }
        }
        prefix = np;
        weight = nw;
        parent_weight = npw;
    }
    let (a, b) = s.hull();
    let c = s.barycenter();
    let mut points = Vec::new();
    let mut w = Vec::new();
    let mut alt = Vec::new();
    let mut codes = Vec::new();
    let jmin = argext(&s.digits, |x, y| x < y);
    let jmax = argext(&s.digits, |x, y| x > y);
    if b - a <= T::zero() {
        for (idx, (p, wt)) in prefix.iter().zip(&weight).enumerate() {
            points.push(*p + scale * a);
            w.push(*wt);
            alt.push(*wt);
            codes.push((idx, jmin));
        }
    } else {
        let al = (b - c) / (b - a);
        let ar = (c - a) / (b - a);
        for (idx, (p, wt)) in prefix.iter().zip(&weight).enumerate() {
            let j = idx % k;
            points.push(*p + scale * a);
            w.push(*wt * al);
            alt.push(if j == jmin { parent_weight[idx] * al } else { T::zero() });
            codes.push((idx, jmin));
            points.push(*p + scale * b);
            w.push(*wt * ar);
            alt.push(if j == jmax { parent_weight[idx] * ar } else { T::zero() });
            codes.push((idx, jmax));
        }
    }
    let int_digits = s
        .digits
        .iter()
        .map(|d| {
            let r = d.round();
            if (*d - r).abs() <= T::lit(1e-12) && r >= T::zero() {
                r.to_u32()
            } else {
                None
            }
        })
        .collect::<Option<Vec<u32>>>();
    Discretization {
        dim: 1,
        points,
        weights: w,
        alt_weights: Some(alt),
        model: ErrorModel::Difference,
        mass: T::one(),
        scheme,
        cylinders: Some(Arc::new(CylinderNodes {
            level,
            ratio: s.ratio,
            int_digits,
            codes,
        })),
    }
}

fn argext<T: Real>(v: &[T], better: impl Fn(T, T) -> bool) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if better(x, v[best]) {
            best = i;
        }
    }
    best
}

/// `∫ f dμ` with an absolute error estimate. For pushforwards the integrand
/// is evaluated at the pushed nodes, realising `∫ f d(φ_*μ) = ∫ f∘φ dμ`.
pub fn integrate<T: Real, F>(f: F, mu: &Measure<T>, quad: &QuadratureSpec) -> Result<Integral<T>>
where
    F: Fn(&[T]) -> Complex<T> + Sync,
{
    quad.validate()?;
    if let QuadratureSpec::Adaptive {
        abs_tol,
        max_subdivisions,
    } = quad
    {
        return integrate_adaptive(&f, mu, T::lit(*abs_tol), *max_subdivisions, quad.name());
    }
    let d = discretize(mu, quad, &BandHint::default())?;
    let values = eval_at_nodes(&f, &d)?;
    Ok(d.combine(&values))
}

/// Integrand values at every node, rejecting non-finite results.
pub(crate) fn eval_at_nodes<T: Real, F>(f: &F, d: &Discretization<T>) -> Result<Vec<Complex<T>>>
where
    F: Fn(&[T]) -> Complex<T> + Sync,
{
    let values: Vec<Complex<T>> = (0..d.len()).into_par_iter().map(|i| f(d.point(i))).collect();
    if let Some(i) = values.iter().position(|v| !is_finite_c(*v)) {
        return Err(Error::NonFiniteValue {
            node: d.point(i).iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(values)
}

pub(crate) fn integrate_adaptive<T: Real, F>(
    f: &F,
    mu: &Measure<T>,
    abs_tol: T,
    max_subdivisions: usize,
    scheme: &'static str,
) -> Result<Integral<T>>
where
    F: Fn(&[T]) -> Complex<T> + Sync,
{
    let (base, maps) = mu.chain();
    let charts = charts(base).ok_or(Error::SchemeMismatch {
        scheme,
        measure: base.kind_name(),
    })?;
    let boxes: Vec<(Vec<T>, Vec<T>)> = charts.iter().map(|c| (c.lo.clone(), c.hi.clone())).collect();
    let mut value = Complex::new(T::zero(), T::zero());
    let mut err = T::zero();
    let share = abs_tol / T::of(charts.len());
    for (chart, bx) in charts.iter().zip(&boxes) {
        let g = |u: &[T]| -> Result<Complex<T>> {
            let (x, dens) = chart.map(u);
            let y = push_through(&maps, x)?;
            let v = f(&y);
            if !is_finite_c(v) {
                return Err(Error::NonFiniteValue {
                    node: y.iter().map(|t| t.as_f64()).collect(),
                });
            }
            Ok(v * dens)
        };
        let r = adaptive_cubature(&g, std::slice::from_ref(bx), share, max_subdivisions)?;
        value += r.value;
        err += r.err;
    }
    Ok(Integral { value, err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::cis_turns;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_integrates_to_mass() {
        let one = |_: &[f64]| Complex::new(1.0, 0.0);
        let cube = Measure::<f64>::unit_cube(1);
        let r = integrate(one, &cube, &QuadratureSpec::gauss(8)).unwrap();
        assert_eq!(r.value.re, 1.0);
        let disc = Measure::<f64>::unit_disc();
        let r = integrate(one, &disc, &QuadratureSpec::gauss(12)).unwrap();
        assert_abs_diff_eq!(r.value.re, std::f64::consts::PI, epsilon = 1e-13);
        let r = integrate(one, &disc, &QuadratureSpec::adaptive(1e-10)).unwrap();
        assert_abs_diff_eq!(r.value.re, std::f64::consts::PI, epsilon = 1e-12);
        let r = integrate(
            one,
            &Measure::<f64>::nu3(),
            &QuadratureSpec::SelfSimilarDigit { depth: 10 },
        )
        .unwrap();
        assert_abs_diff_eq!(r.value.re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn integer_frequency_vanishes() {
        let f = |x: &[f64]| cis_turns(3.0 * x[0]);
        let r = integrate(f, &Measure::unit_cube(1), &QuadratureSpec::gauss(32)).unwrap();
        assert!(r.value.norm() <= 1e-12);
    }

    #[test]
    fn scheme_mismatch() {
        let one = |_: &[f64]| Complex::new(1.0, 0.0);
        let e = integrate(one, &Measure::<f64>::nu4(), &QuadratureSpec::gauss(8)).unwrap_err();
        assert!(matches!(e, Error::SchemeMismatch { .. }));
        let e = integrate(
            one,
            &Measure::<f64>::unit_cube(1),
            &QuadratureSpec::SelfSimilarDigit { depth: 3 },
        );
        assert!(e.is_err());
    }

    #[test]
    fn non_finite_values_are_reported() {
        let f = |x: &[f64]| Complex::new(1.0 / (x[0] - x[0]), 0.0);
        let e = integrate(f, &Measure::unit_cube(1), &QuadratureSpec::gauss(4)).unwrap_err();
        assert!(matches!(e, Error::NonFiniteValue { .. }));
    }

    #[test]
    fn auto_panels_resolve_high_frequency() {
        let mu = Measure::<f64>::unit_cube(1);
        let freq = [64.0];
        let hint = BandHint {
            outer: None,
            freq: Some(&freq),
        };
        let d = discretize(&mu, &QuadratureSpec::gauss(64), &hint).unwrap();
        let vals: Vec<_> = (0..d.len()).map(|i| cis_turns(64.0 * d.point(i)[0])).collect();
        let r = d.combine(&vals);
        assert!(r.value.norm() < 1e-13, "{}", r.value);
        assert!(r.err < 1e-10);
    }

    #[test]
    fn digit_rule_is_exact_for_linear_functions() {
        let nu = Measure::<f64>::nu3();
        let d = discretize(
            &nu,
            &QuadratureSpec::SelfSimilarDigit { depth: 6 },
            &BandHint::default(),
        )
        .unwrap();
        let vals: Vec<_> = (0..d.len()).map(|i| Complex::new(d.point(i)[0], 0.0)).collect();
        let r = d.combine(&vals);
        assert_abs_diff_eq!(r.value.re, 0.5, epsilon = 1e-15);
        assert!(d
            .points
            .iter()
            .all(|&x| !(x > 1.0 / 3.0 + 1e-15 && x < 2.0 / 3.0 - 1e-15)));
    }

    #[test]
    fn monte_carlo_reports_standard_error() {
        let f = |x: &[f64]| Complex::new(x[0], 0.0);
        let r = integrate(
            f,
            &Measure::unit_cube(1),
            &QuadratureSpec::MonteCarlo {
                samples: 100_000,
                seed: 3,
            },
        )
        .unwrap();
        // σ of U(0,1) is 1/√12
        assert_abs_diff_eq!(r.err, (1.0 / 12.0f64).sqrt() / (100_000f64).sqrt(), epsilon = 2e-5);
        assert!((r.value.re - 0.5).abs() < 3.0 * r.err + 1e-12);
    }
}
