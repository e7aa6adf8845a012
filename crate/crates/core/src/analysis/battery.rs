use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::Result;
use crate::measures::Measure;
use crate::real::{cis_turns, Real};

pub type EvalFn<T> = Arc<dyn Fn(&[T]) -> Complex<T> + Send + Sync>;

/// Named complex-valued test function.
#[derive(Clone)]
pub struct TestFunction<T> {
    pub name: String,
    pub f: EvalFn<T>,
}

impl<T> fmt::Debug for TestFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish()
    }
}

impl<T: Real> TestFunction<T> {
    pub fn new(name: impl Into<String>, f: impl Fn(&[T]) -> Complex<T> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Real-valued test function.
    pub fn real(name: impl Into<String>, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self::new(name, move |x| Complex::new(f(x), T::zero()))
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> Complex<T> {
        (self.f)(x)
    }
}

/// Default test battery on the support box of `mu`, in normalised box
/// coordinates `u ∈ [0,1]^d`: the constant, the bubbles `4u_k(1−u_k)` and
/// `16u_k²(1−u_k)²`, their tensor product, and one oscillatory bubble
/// `e^{2πi·u_d}·Π_k 4u_k(1−u_k)`.
///
/// The bubbles vanish on the box boundary, so their periodic extensions
/// are continuous and the Parseval sums over a truncated lattice converge
/// quickly.
pub fn standard_battery<T: Real>(mu: &Measure<T>) -> Result<Vec<TestFunction<T>>> {
    let (lo, hi) = mu.support_box()?;
    let d = lo.len();
    let norm = move |lo: &[T], hi: &[T], x: &[T], k: usize| -> T {
        let w = hi[k] - lo[k];
        if w > T::zero() {
            (x[k] - lo[k]) / w
        } else {
            T::zero()
        }
    };
    let four = T::lit(4.0);
    let mut out = vec![TestFunction::real("constant", |_| T::one())];
    for k in 0..d {
        let (l, h) = (lo.clone(), hi.clone());
        out.push(TestFunction::real(format!("bubble-x{}", k + 1), move |x| {
            let u = norm(&l, &h, x, k);
            four * u * (T::one() - u)
        }));
        let (l, h) = (lo.clone(), hi.clone());
        out.push(TestFunction::real(format!("bubble2-x{}", k + 1), move |x| {
            let u = norm(&l, &h, x, k);
            let b = four * u * (T::one() - u);
            b * b
        }));
    }
    let tensor = {
        let (l, h) = (lo.clone(), hi.clone());
        move |x: &[T]| -> T {
            (0..d).fold(T::one(), |p, k| {
                let u = norm(&l, &h, x, k);
                p * four * u * (T::one() - u)
            })
        }
    };
    if d > 1 {
        let t = tensor.clone();
        out.push(TestFunction::real("tensor-bubble", t));
    }
    let (l, h) = (lo.clone(), hi.clone());
    let cycles = T::lit(1.0);
    out.push(TestFunction::new("oscillatory-bubble", move |x| {
        cis_turns(cycles * norm(&l, &h, x, d - 1)) * tensor(x)
    }));
    Ok(out)
}
