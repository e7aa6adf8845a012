//! Phase functions `φ: ℝ^d → ℝ^d` used to build generalized exponentials
//! `e^{2πiλ·φ(x)}`.

mod digit;
mod group;
mod holhos;
mod probe;
mod triangular;

use std::fmt;
use std::sync::Arc;

pub use digit::{DigitMap, DEFAULT_DIGIT_DEPTH};
pub use group::GroupPhase;
pub use holhos::{holhos, HOLHOS_HALF_DIAGONAL};
pub use probe::{
    essential_injectivity_probe, measure_preservation_check, CollisionReport, PreservationOptions, PreservationReport,
};
pub use triangular::Triangular2D;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::real::Real;

pub type ValueFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type GradFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type MapFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type JacobianFn<T> = Arc<dyn Fn(&[T]) -> Mat<T> + Send + Sync>;

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Scalar function handle with an optional analytic gradient.
#[derive(Clone)]
pub struct ScalarFn<T> {
    label: String,
    value: ValueFn<T>,
    grad: Option<GradFn<T>>,
}

impl<T: Real> ScalarFn<T> {
    pub fn new(label: impl Into<String>, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(f),
            grad: None,
        }
    }

    pub fn with_grad(mut self, g: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn from_parts(label: impl Into<String>, value: ValueFn<T>, grad: Option<GradFn<T>>) -> Self {
        Self {
            label: label.into(),
            value,
            grad,
        }
    }

    /// Constant function of any arity.
    pub fn constant(c: T) -> Self {
        Self::new(format!("{c}"), move |_| c).with_grad(|x| vec![T::zero(); x.len()])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        (self.value)(x)
    }

    /// Analytic gradient when available, central differences with step `h`
    /// otherwise.
    pub fn gradient(&self, x: &[T], h: T) -> Vec<T> {
        if let Some(g) = &self.grad {
            return g(x);
        }
        let mut p = x.to_vec();
        (0..x.len())
            .map(|k| {
                let xk = p[k];
                p[k] = xk + h;
                let fp = self.eval(&p);
                p[k] = xk - h;
                let fm = self.eval(&p);
                p[k] = xk;
                (fp - fm) / (h + h)
            })
            .collect()
    }
}

impl<T> fmt::Debug for ScalarFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

/// Vector-valued function handle with an optional analytic Jacobian.
#[derive(Clone)]
pub struct VectorFn<T> {
    label: String,
    in_dim: usize,
    out_dim: usize,
    value: MapFn<T>,
    jacobian: Option<JacobianFn<T>>,
}

impl<T: Real> VectorFn<T> {
    pub fn new(
        label: impl Into<String>,
        in_dim: usize,
        out_dim: usize,
        f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            in_dim,
            out_dim,
            value: Arc::new(f),
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, j: impl Fn(&[T]) -> Mat<T> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl<T> fmt::Debug for VectorFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorFn({}: {}→{})", self.label, self.in_dim, self.out_dim)
    }
}

/// A Borel phase map with its variant metadata.
#[derive(Clone, Debug)]
pub enum PhaseMap<T: Real> {
    Identity {
        dim: usize,
    },
    /// `x ↦ Mx + b`.
    Affine {
        m: Mat<T>,
        b: Vec<T>,
    },
    Digit(DigitMap),
    /// Area-preserving map from the closed unit disc onto the square
    /// `|X| + |Y| ≤ √(π/2)`.
    Holhos,
    /// `φ_k = x_k + l_k(x_{k+1}, …, x_d)` for `k < d`, `φ_d = x_d`. Each
    /// `l_k` receives the tail slice `x[k+1..]`.
    Unipotent {
        l: Vec<ScalarFn<T>>,
    },
    Triangular2D(Triangular2D<T>),
    GroupExp(GroupPhase<T>),
    Custom(VectorFn<T>),
    /// Applies `first`, then `then`.
    Composed {
        first: Box<PhaseMap<T>>,
        then: Box<PhaseMap<T>>,
    },
}

impl<T: Real> PhaseMap<T> {
    pub fn identity(dim: usize) -> Self {
        PhaseMap::Identity { dim }
    }

    pub fn affine(m: Mat<T>, b: Vec<T>) -> Result<Self> {
        if m.rows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                got: b.len(),
            });
        }
        Ok(PhaseMap::Affine { m, b })
    }

    /// Translation `x ↦ x + b`.
    pub fn shift(b: Vec<T>) -> Self {
        PhaseMap::Affine {
            m: Mat::identity(b.len()),
            b,
        }
    }

    pub fn unipotent(l: Vec<ScalarFn<T>>) -> Result<Self> {
        if l.is_empty() {
            return Err(crate::error::invalid("l", "a unipotent map needs d ≥ 2"));
        }
        Ok(PhaseMap::Unipotent { l })
    }

    /// `φ(x) = x²` on the line, used as a non-spectral example.
    pub fn square() -> Self {
        PhaseMap::Custom(
            VectorFn::new("x^2", 1, 1, |x: &[T]| vec![x[0] * x[0]]).with_jacobian(|x: &[T]| Mat::diag(&[x[0] + x[0]])),
        )
    }

    /// Post-composes with `y ↦ My + b`.
    pub fn then_affine(self, m: Mat<T>, b: Vec<T>) -> Result<Self> {
        let outer = PhaseMap::affine(m, b)?;
        self.then(outer)
    }

    /// `other ∘ self`.
    pub fn then(self, other: PhaseMap<T>) -> Result<Self> {
        if self.out_dim() != other.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.out_dim(),
                got: other.in_dim(),
            });
        }
        Ok(PhaseMap::Composed {
            first: Box::new(self),
            then: Box::new(other),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhaseMap::Identity { .. } => "identity",
            PhaseMap::Affine { .. } => "affine",
            PhaseMap::Digit(_) => "digit-map",
            PhaseMap::Holhos => "holhos",
            PhaseMap::Unipotent { .. } => "unipotent",
            PhaseMap::Triangular2D(_) => "triangular-2d",
            PhaseMap::GroupExp(_) => "group-exp",
            PhaseMap::Custom(_) => "custom",
            PhaseMap::Composed { .. } => "composed",
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            PhaseMap::Identity { dim } => *dim,
            PhaseMap::Affine { m, .. } => m.cols(),
            PhaseMap::Digit(_) => 1,
            PhaseMap::Holhos | PhaseMap::Triangular2D(_) => 2,
            PhaseMap::Unipotent { l } => l.len() + 1,
            PhaseMap::GroupExp(g) => g.m(),
            PhaseMap::Custom(c) => c.in_dim,
            PhaseMap::Composed { first, .. } => first.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            PhaseMap::Identity { dim } => *dim,
            PhaseMap::Affine { m, .. } => m.rows(),
            PhaseMap::Digit(_) => 1,
            PhaseMap::Holhos | PhaseMap::Triangular2D(_) => 2,
            PhaseMap::Unipotent { l } => l.len() + 1,
            PhaseMap::GroupExp(g) => g.d(),
            PhaseMap::Custom(c) => c.out_dim,
            PhaseMap::Composed { then, .. } => then.out_dim(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, PhaseMap::Identity { .. })
    }

    pub fn is_differentiable(&self) -> bool {
        match self {
            PhaseMap::Digit(_) => false,
            PhaseMap::Composed { first, then } => first.is_differentiable() && then.is_differentiable(),
            _ => true,
        }
    }

    /// Evaluates `φ(x)`.
    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        self.eval_impl(x, true)
    }

    /// Evaluation without domain checks, used for difference stencils that
    /// may step just outside the domain.
    fn eval_impl(&self, x: &[T], check: bool) -> Result<Vec<T>> {
        match self {
            PhaseMap::Identity { .. } => Ok(x.to_vec()),
            PhaseMap::Affine { m, b } => {
                let mut y = m.matvec(x);
                for (yi, bi) in y.iter_mut().zip(b) {
                    *yi += *bi;
                }
                Ok(y)
            }
            PhaseMap::Digit(d) => Ok(vec![d.eval(x[0])?]),
            PhaseMap::Holhos => holhos::eval(x, check),
            PhaseMap::Unipotent { l } => {
                let d = x.len();
                let mut y = x.to_vec();
                for k in 0..d - 1 {
                    y[k] += l[k].eval(&x[k + 1..]);
                }
                Ok(y)
            }
            PhaseMap::Triangular2D(t) => t.eval(x),
            PhaseMap::GroupExp(g) => g.eval(x),
            PhaseMap::Custom(c) => {
                let y = (c.value)(x);
                if y.len() != c.out_dim {
                    return Err(Error::DimensionMismatch {
                        expected: c.out_dim,
                        got: y.len(),
                    });
                }
                Ok(y)
            }
            PhaseMap::Composed { first, then } => {
                let mid = first.eval_impl(x, check)?;
                then.eval_impl(&mid, check)
            }
        }
    }

    /// Jacobian `∂φ_i/∂x_j` (rows are outputs). Variants with an analytic
    /// form use it; the others fall back to central differences with step
    /// `h`.
    pub fn jacobian(&self, x: &[T], h: T) -> Result<Mat<T>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        match self {
            PhaseMap::Identity { dim } => Ok(Mat::identity(*dim)),
            PhaseMap::Affine { m, .. } => Ok(m.clone()),
            PhaseMap::Digit(_) => Err(Error::NotDifferentiable { map: "digit-map" }),
            PhaseMap::Holhos => self.finite_difference(x, h),
            PhaseMap::Unipotent { l } => {
                let d = x.len();
                let mut j = Mat::identity(d);
                for k in 0..d - 1 {
                    let g = l[k].gradient(&x[k + 1..], h);
                    for (off, gk) in g.into_iter().enumerate() {
                        j[(k, k + 1 + off)] = gk;
                    }
                }
                Ok(j)
            }
            PhaseMap::Triangular2D(t) => t.jacobian(x, h),
            PhaseMap::GroupExp(g) => g.jacobian(x),
            PhaseMap::Custom(c) => match &c.jacobian {
                Some(jf) => Ok(jf(x)),
                None => self.finite_difference(x, h),
            },
            PhaseMap::Composed { first, then } => {
                let mid = first.eval_impl(x, false)?;
                let j1 = first.jacobian(x, h)?;
                let j2 = then.jacobian(&mid, h)?;
                Ok(j2.matmul(&j1))
            }
        }
    }

    /// Central-difference Jacobian.
    pub fn finite_difference(&self, x: &[T], h: T) -> Result<Mat<T>> {
        if !self.is_differentiable() {
            return Err(Error::NotDifferentiable { map: self.name() });
        }
        let n = x.len();
        let mut j = Mat::zeros(self.out_dim(), n);
        let mut p = x.to_vec();
        for k in 0..n {
            let xk = p[k];
            p[k] = xk + h;
            let fp = self.eval_impl(&p, false)?;
            p[k] = xk - h;
            let fm = self.eval_impl(&p, false)?;
            p[k] = xk;
            for i in 0..fp.len() {
                j[(i, k)] = (fp[i] - fm[i]) / (h + h);
            }
        }
        Ok(j)
    }

    /// True when `x` lies within `band` of a locus where the map is not
    /// smooth (the coordinate axes for the disc map).
    pub fn near_nonsmooth(&self, x: &[T], band: T) -> bool {
        match self {
            PhaseMap::Holhos => x[0].abs() < band || x[1].abs() < band,
            PhaseMap::Composed { first, then } => {
                if first.near_nonsmooth(x, band) {
                    return true;
                }
                match first.eval_impl(x, false) {
                    Ok(mid) => then.near_nonsmooth(&mid, band),
                    Err(_) => true,
                }
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sine_unipotent() -> PhaseMap<f64> {
        PhaseMap::unipotent(vec![ScalarFn::new("sin(2*pi*x2)", |t: &[f64]| (2.0 * PI * t[0]).sin())
            .with_grad(|t: &[f64]| vec![2.0 * PI * (2.0 * PI * t[0]).cos()])])
        .unwrap()
    }

    #[test]
    fn identity_eval() {
        let p = PhaseMap::<f64>::identity(2);
        assert_eq!(p.eval(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        assert!(p.eval(&[0.3]).is_err());
    }

    #[test]
    fn unipotent_jacobian_is_unit_upper_triangular() {
        let p = sine_unipotent();
        for &x2 in &[0.0, 0.1, 0.37, 0.9] {
            let j = p.jacobian(&[0.2, x2], 1e-5).unwrap();
            assert_eq!(j[(0, 0)], 1.0);
            assert_eq!(j[(1, 1)], 1.0);
            assert_eq!(j[(1, 0)], 0.0);
            assert_abs_diff_eq!(j[(0, 1)], 2.0 * PI * (2.0 * PI * x2).cos(), epsilon = 1e-14);
            assert_eq!(j.det().unwrap(), 1.0);
        }
    }

    #[test]
    fn unipotent_three_dims_uses_tail() {
        let l1 = ScalarFn::new("x2*x3", |t: &[f64]| t[0] * t[1]);
        let l2 = ScalarFn::new("x3^2", |t: &[f64]| t[0] * t[0]);
        let p = PhaseMap::unipotent(vec![l1, l2]).unwrap();
        let y = p.eval(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![7.0, 11.0, 3.0]);
        let j = p.jacobian(&[1.0, 2.0, 3.0], 1e-6).unwrap();
        assert_abs_diff_eq!(j[(0, 1)], 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(0, 2)], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(1, 2)], 6.0, epsilon = 1e-8);
        assert_eq!(j[(2, 1)], 0.0);
    }

    #[test]
    fn composed_jacobian_chain_rule() {
        let m = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let p = sine_unipotent().then_affine(m, vec![0.0, 0.0]).unwrap();
        let x = [0.3, 0.2];
        let j = p.jacobian(&x, 1e-6).unwrap();
        let fd = p.finite_difference(&x, 1e-6).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                assert_abs_diff_eq!(j[(i, k)], fd[(i, k)], epsilon = 1e-8);
            }
        }
        assert_abs_diff_eq!(j.det().unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn affine_and_square() {
        let p = PhaseMap::affine(Mat::diag(&[2.0, 1.0]), vec![1.0, 0.0]).unwrap();
        assert_eq!(p.eval(&[1.0, 1.0]).unwrap(), vec![3.0, 1.0]);
        assert_eq!(p.jacobian(&[0.0, 0.0], 1e-5).unwrap().det().unwrap(), 2.0);
        let s = PhaseMap::<f64>::square();
        assert_eq!(s.eval(&[-0.5]).unwrap(), vec![0.25]);
    }

    #[test]
    fn works_in_single_precision() {
        let p = PhaseMap::<f32>::unipotent(vec![ScalarFn::new("x2", |t: &[f32]| t[0])]).unwrap();
        assert_eq!(p.eval(&[0.25f32, 0.5]).unwrap(), vec![0.75f32, 0.5]);
    }
}
