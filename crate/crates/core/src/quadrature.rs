//! Quadrature rules: Gauss–Legendre (composite and tensor), Gauss–Kronrod
//! 7/15 in one dimension, and adaptive tensor Gauss–Kronrod cubature on
//! boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::real::Real;

/// How an integral against a measure is discretised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme", deny_unknown_fields)]
pub enum QuadratureSpec {
    /// Composite tensor Gauss–Legendre. `panels` splits each parameter
    /// direction into equal panels; `None` lets the caller choose from the
    /// integrand bandwidth (one panel when nothing is known).
    TensorGauss {
        orders: Vec<usize>,
        #[serde(default)]
        panels: Option<Vec<usize>>,
    },
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
    /// Cylinder enumeration for self-similar measures.
    SelfSimilarDigit {
        depth: usize,
    },
    Adaptive {
        abs_tol: f64,
        max_subdivisions: usize,
    },
}

impl QuadratureSpec {
    pub fn gauss(order: usize) -> Self {
        QuadratureSpec::TensorGauss {
            orders: vec![order],
            panels: None,
        }
    }

    pub fn adaptive(abs_tol: f64) -> Self {
        QuadratureSpec::Adaptive {
            abs_tol,
            max_subdivisions: 4000,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QuadratureSpec::TensorGauss { .. } => "tensor-gauss",
            QuadratureSpec::MonteCarlo { .. } => "monte-carlo",
            QuadratureSpec::SelfSimilarDigit { .. } => "self-similar-digit",
            QuadratureSpec::Adaptive { .. } => "adaptive",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QuadratureSpec::TensorGauss { orders, panels } => {
                if orders.is_empty() || orders.iter().any(|&o| o < 2) {
                    return Err(invalid("orders", "every Gauss order must be at least 2"));
                }
                if let Some(p) = panels {
                    if p.contains(&0) {
                        return Err(invalid("panels", "panel counts must be positive"));
                    }
                }
            }
            QuadratureSpec::MonteCarlo { samples, .. } => {
                if *samples < 2 {
                    return Err(invalid("samples", "need at least two samples"));
                }
            }
            QuadratureSpec::SelfSimilarDigit { depth } => {
                if *depth < 1 {
                    return Err(invalid("depth", "digit depth must be at least 1"));
                }
            }
            QuadratureSpec::Adaptive {
                abs_tol,
                max_subdivisions,
            } => {
                if !(*abs_tol > 0.0) {
                    return Err(invalid("abs_tol", "must be positive"));
                }
                if *max_subdivisions == 0 {
                    return Err(invalid("max_subdivisions", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Requested absolute tolerance, when the scheme has one.
    pub fn tolerance(&self) -> Option<f64> {
        match self {
            QuadratureSpec::Adaptive { abs_tol, .. } => Some(*abs_tol),
            _ => None,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let m = n.div_ceil(2);
    let nf = T::of(n);
    for i in 0..m {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (T::PI() * (T::of(i) + T::lit(0.75)) / (nf + T::lit(0.5))).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
    }
    (nodes, weights)
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::of(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::of(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Nodes and weights for the composite rule with `panels` equal panels of
/// `order` points each on `[lo, hi]`.
pub fn composite_gauss<T: Real>(order: usize, panels: usize, lo: T, hi: T) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(order);
    let h = (hi - lo) / T::of(panels);
    let half = h / T::lit(2.0);
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let mid = lo + h * (T::of(p) + T::lit(0.5));
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * *xi);
            weights.push(half * *wi);
        }
    }
    (nodes, weights)
}

/// Weighted point cloud in `dim` dimensions; points stored row-wise.
#[derive(Clone, Debug, Default)]
pub struct NodeSet<T> {
    pub dim: usize,
    pub points: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> NodeSet<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[T], w: T) {
        debug_assert_eq!(p.len(), self.dim);
        self.points.extend_from_slice(p);
        self.weights.push(w);
    }

    pub fn extend(&mut self, other: &NodeSet<T>) {
        debug_assert_eq!(self.dim, other.dim);
        self.points.extend_from_slice(&other.points);
        self.weights.extend_from_slice(&other.weights);
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().fold(T::zero(), |s, &w| s + w)
    }

    /// Tensor product of per-dimension 1-D rules on a box.
    pub fn tensor(rules: &[(Vec<T>, Vec<T>)]) -> Self {
        let dim = rules.len();
        let total: usize = rules.iter().map(|r| r.0.len()).product();
        let mut out = Self {
            dim,
            points: Vec::with_capacity(total * dim),
            weights: Vec::with_capacity(total),
        };
        let mut idx = vec![0usize; dim];
        let mut p = vec![T::zero(); dim];
        for _ in 0..total {
            let mut w = T::one();
            for k in 0..dim {
                p[k] = rules[k].0[idx[k]];
                w *= rules[k].1[idx[k]];
            }
            out.push(&p, w);
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < rules[k].0.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

// Gauss–Kronrod 7/15 abscissae on [0, 1] half (symmetric), from QUADPACK.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// The 15 Kronrod nodes on `[-1, 1]` with Kronrod and embedded Gauss weights
/// (Gauss weight 0 at non-Gauss nodes).
fn kronrod15<T: Real>() -> ([T; 15], [T; 15], [T; 15]) {
    let mut x = [T::zero(); 15];
    let mut wk = [T::zero(); 15];
    let mut wg = [T::zero(); 15];
    for j in 0..7 {
        x[j] = -T::lit(XGK[j]);
        x[14 - j] = T::lit(XGK[j]);
        wk[j] = T::lit(WGK[j]);
        wk[14 - j] = T::lit(WGK[j]);
        if j % 2 == 1 {
            wg[j] = T::lit(WG[j / 2]);
            wg[14 - j] = T::lit(WG[j / 2]);
        }
    }
    x[7] = T::zero();
    wk[7] = T::lit(WGK[7]);
    wg[7] = T::lit(WG[3]);
    (x, wk, wg)
}

fn gk15_interval<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let (x, wk, wg) = kronrod15::<T>();
    let c = (a + b) / T::lit(2.0);
    let h = (b - a) / T::lit(2.0);
    let mut k = T::zero();
    let mut g = T::zero();
    for j in 0..15 {
        let v = f(c + h * x[j]);
        k += wk[j] * v;
        g += wg[j] * v;
    }
    (k * h, ((k - g) * h).abs())
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T: Real> Eq for Segment<T> {}
impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Adaptive Gauss–Kronrod 7/15 on `[a, b]` for real integrands. Returns
/// `(value, error estimate)`; the orientation of `[a, b]` is respected.
pub fn adaptive_gk<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T, max_subdivisions: usize) -> (T, T) {
    if a == b {
        return (T::zero(), T::zero());
    }
    let (v, e) = gk15_interval(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, err: e });
    let mut total_v = v;
    let mut total_e = e;
    let mut splits = 0;
    while total_e > abs_tol && splits < max_subdivisions {
        let Some(seg) = heap.pop() else { break };
        let mid = (seg.a + seg.b) / T::lit(2.0);
        let (v1, e1) = gk15_interval(&f, seg.a, mid);
        let (v2, e2) = gk15_interval(&f, mid, seg.b);
        total_v = total_v - seg.value + v1 + v2;
        total_e = total_e - seg.err + e1 + e2;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
        splits += 1;
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let (mut sv, mut se) = (T::zero(), T::zero());
    for s in heap.iter() {
        sv += s.value;
        se += s.err;
    }
    (sv, se)
}

/// Result of an adaptive cubature run.
#[derive(Clone, Copy, Debug)]
pub struct CubatureResult<T> {
    pub value: Complex<T>,
    pub err: T,
    pub regions: usize,
    pub converged: bool,
}

struct Region<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    value: Complex<T>,
    err: T,
    split_dim: usize,
}

impl<T: Real> PartialEq for Region<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T: Real> Eq for Region<T> {}
impl<T: Real> PartialOrd for Region<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Region<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Tensor Kronrod-15 on a box, with the tensor Gauss-7 difference as error
/// and the direction whose Gauss/Kronrod swap changes the value most as the
/// preferred split direction. All estimates reuse the same 15^d values.
fn gk_tensor_region<T: Real, F>(f: &F, lo: &[T], hi: &[T]) -> Result<Region<T>>
where
    F: Fn(&[T]) -> Result<Complex<T>>,
{
    let d = lo.len();
    let (x, wk, wg) = kronrod15::<T>();
    let half: Vec<T> = lo.iter().zip(hi).map(|(&a, &b)| (b - a) / T::lit(2.0)).collect();
    let mid: Vec<T> = lo.iter().zip(hi).map(|(&a, &b)| (a + b) / T::lit(2.0)).collect();
    let jac = half.iter().fold(T::one(), |p, &h| p * h);
    let total = 15usize.pow(d as u32);
    let mut idx = vec![0usize; d];
    let mut p = vec![T::zero(); d];
    let zero = Complex::new(T::zero(), T::zero());
    let mut k_all = zero;
    let mut g_all = zero;
    let mut g_dir = vec![zero; d];
    for _ in 0..total {
        let mut wk_prod = T::one();
        let mut wg_prod = T::one();
        for k in 0..d {
            p[k] = mid[k] + half[k] * x[idx[k]];
            wk_prod *= wk[idx[k]];
            wg_prod *= wg[idx[k]];
        }
        let v = f(&p)?;
        k_all += v * wk_prod;
        g_all += v * wg_prod;
        for k in 0..d {
            let w = wk_prod / wk[idx[k]] * wg[idx[k]];
            g_dir[k] += v * w;
        }
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < 15 {
                break;
            }
            idx[k] = 0;
        }
    }
    let value = k_all * jac;
    let err = (k_all - g_all).norm() * jac.abs();
    let split_dim = (0..d)
        .map(|k| (k, (k_all - g_dir[k]).norm()))
        .fold((0, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    Ok(Region {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        value,
        err,
        split_dim,
    })
}

/// Globally adaptive tensor Gauss–Kronrod cubature over a union of boxes.
pub fn adaptive_cubature<T: Real, F>(
    f: &F,
    boxes: &[(Vec<T>, Vec<T>)],
    abs_tol: T,
    max_subdivisions: usize,
) -> Result<CubatureResult<T>>
where
    F: Fn(&[T]) -> Result<Complex<T>>,
{
    let mut heap = BinaryHeap::new();
    let mut total_e = T::zero();
    for (lo, hi) in boxes {
        let r = gk_tensor_region(f, lo, hi)?;
        total_e += r.err;
        heap.push(r);
    }
    let mut splits = 0;
    while total_e > abs_tol && splits < max_subdivisions {
        let Some(r) = heap.pop() else { break };
        let k = r.split_dim;
        let m = (r.lo[k] + r.hi[k]) / T::lit(2.0);
        let mut hi1 = r.hi.clone();
        hi1[k] = m;
        let mut lo2 = r.lo.clone();
        lo2[k] = m;
        let a = gk_tensor_region(f, &r.lo, &hi1)?;
        let b = gk_tensor_region(f, &lo2, &r.hi)?;
        total_e = total_e - r.err + a.err + b.err;
        heap.push(a);
        heap.push(b);
        splits += 1;
    }
    let mut value = Complex::new(T::zero(), T::zero());
    let mut err = T::zero();
    let regions = heap.len();
    for r in heap.into_vec() {
        value += r.value;
        err += r.err;
    }
    Ok(CubatureResult {
        value,
        err,
        regions,
        converged: err <= abs_tol,
    })
}
