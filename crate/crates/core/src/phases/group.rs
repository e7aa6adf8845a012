//! Phases of the form `φ(t) = exp(−Σ t_k A_k)ᵀ ℓ` for commuting `A_k`.

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::real::Real;

/// Largest tolerated `‖A_iA_j − A_jA_i‖_∞`.
pub const COMMUTATOR_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GroupPhase<T: Real> {
    a: Vec<Mat<T>>,
    ell: Vec<T>,
}

impl<T: Real> GroupPhase<T> {
    pub fn new(a: Vec<Mat<T>>, ell: Vec<T>) -> Result<Self> {
        if a.is_empty() {
            return Err(invalid("A", "need at least one matrix"));
        }
        let d = ell.len();
        for m in &a {
            if m.rows() != d || m.cols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.rows().max(m.cols()),
                });
            }
        }
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let c = a[i].matmul(&a[j]).sub(&a[j].matmul(&a[i]));
                let residual = c.max_abs().as_f64();
                if residual > COMMUTATOR_TOL {
                    return Err(Error::NonCommuting { i, j, residual });
                }
            }
        }
        Ok(Self { a, ell })
    }

    pub fn matrices(&self) -> &[Mat<T>] {
        &self.a
    }

    pub fn ell(&self) -> &[T] {
        &self.ell
    }

    /// Number of parameters `t`.
    pub fn m(&self) -> usize {
        self.a.len()
    }

    /// Dimension of `ℓ`.
    pub fn d(&self) -> usize {
        self.ell.len()
    }

    /// `exp(Σ t_k A_k)`.
    pub fn flow(&self, t: &[T]) -> Result<Mat<T>> {
        let d = self.d();
        let mut s = Mat::zeros(d, d);
        for (tk, ak) in t.iter().zip(&self.a) {
            s = s.add(&ak.scale(*tk));
        }
        s.expm()
    }

    /// `t•y = exp(Σ t_k A_k) y`.
    pub fn act(&self, t: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(self.flow(t)?.matvec(y))
    }

    pub fn eval(&self, t: &[T]) -> Result<Vec<T>> {
        let neg: Vec<T> = t.iter().map(|v| -*v).collect();
        Ok(self.flow(&neg)?.transpose().matvec(&self.ell))
    }

    /// Column `k` is `−Eᵀ A_kᵀ ℓ` with `E = exp(−Σ t_j A_j)`.
    pub fn jacobian(&self, t: &[T]) -> Result<Mat<T>> {
        let neg: Vec<T> = t.iter().map(|v| -*v).collect();
        let et = self.flow(&neg)?.transpose();
        let mut j = Mat::zeros(self.d(), self.m());
        for (k, ak) in self.a.iter().enumerate() {
            let col = et.matvec(&ak.transpose().matvec(&self.ell));
            for i in 0..self.d() {
                j[(i, k)] = -col[i];
            }
        }
        Ok(j)
    }
}
