//! Small dense linear algebra: real matrices for lattices and group data,
//! the matrix exponential, and singular values of complex coefficient
//! matrices.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: "empty matrix".into(),
            });
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| crate::real::dot(self.row(i), v)).collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |s, i| s + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// LU factorisation with partial pivoting. Returns the packed factors,
    /// the row permutation and its sign.
    fn lu(&self) -> Result<(Self, Vec<usize>, T)> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let scale = self.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= scale * T::epsilon() * T::of(n) {
                return Err(Error::SingularMatrix);
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            for i in (k + 1)..n {
                let f = a[(i, k)] / a[(k, k)];
                a[(i, k)] = f;
                for j in (k + 1)..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        Ok((a, perm, sign))
    }

    pub fn det(&self) -> Result<T> {
        match self.lu() {
            Ok((lu, _, sign)) => Ok((0..self.rows).fold(sign, |d, i| d * lu[(i, i)])),
            Err(Error::SingularMatrix) => Ok(T::zero()),
            Err(e) => Err(e),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        let (lu, perm, _) = self.lu()?;
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for col in 0..n {
            let mut x: Vec<T> = (0..n)
                .map(|i| if perm[i] == col { T::one() } else { T::zero() })
                .collect();
            for i in 0..n {
                for k in 0..i {
                    let v = x[k];
                    x[i] -= lu[(i, k)] * v;
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    let v = x[k];
                    x[i] -= lu[(i, k)] * v;
                }
                x[i] /= lu[(i, i)];
            }
            for i in 0..n {
                inv[(i, col)] = x[i];
            }
        }
        Ok(inv)
    }

    /// Solves `self · x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        Ok(self.inverse()?.matvec(b))
    }

    /// Matrix exponential by scaling and squaring with the degree-13 Padé
    /// approximant.
    pub fn expm(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA13: f64 = 5.371920351148152;
        let n = self.rows;
        let norm = self.norm1();
        if !norm.is_finite() {
            return Err(Error::Overflow);
        }
        let mut squarings = 0i32;
        if norm.as_f64() > THETA13 {
            squarings = (norm.as_f64() / THETA13).log2().ceil() as i32;
        }
        let a = self.scale(T::lit(2f64.powi(-squarings)));
        let b = |k: usize| T::lit(B[k]);
        let id = Self::identity(n);
        let a2 = a.matmul(&a);
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let u_inner = a6
            .matmul(&a6.scale(b(13)).add(&a4.scale(b(11))).add(&a2.scale(b(9))))
            .add(&a6.scale(b(7)))
            .add(&a4.scale(b(5)))
            .add(&a2.scale(b(3)))
            .add(&id.scale(b(1)));
        let u = a.matmul(&u_inner);
        let v = a6
            .matmul(&a6.scale(b(12)).add(&a4.scale(b(10))).add(&a2.scale(b(8))))
            .add(&a6.scale(b(6)))
            .add(&a4.scale(b(4)))
            .add(&a2.scale(b(2)))
            .add(&id.scale(b(0)));
        let mut r = v.sub(&u).inverse()?.matmul(&v.add(&u));
        for _ in 0..squarings {
            r = r.matmul(&r);
        }
        if !r.is_finite() {
            return Err(Error::Overflow);
        }
        Ok(r)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Singular values (descending) of a complex matrix given by its columns,
/// computed with one-sided Jacobi rotations.
pub fn singular_values<T: Real>(columns: &[Vec<Complex<T>>]) -> Result<Vec<T>> {
    let ncols = columns.len();
    if ncols == 0 {
        return Ok(Vec::new());
    }
    let nrows = columns[0].len();
    // One-sided Jacobi wants at least as many rows as columns.
    let mut cols: Vec<Vec<Complex<T>>> = if nrows >= ncols {
        columns.to_vec()
    } else {
        (0..nrows)
            .map(|i| columns.iter().map(|c| c[i].conj()).collect())
            .collect()
    };
    let n = cols.len();
    let tol = T::epsilon() * T::of(cols[0].len().max(1)).sqrt();
    const MAX_SWEEPS: usize = 60;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = Complex::new(T::zero(), T::zero());
                    for (x, y) in cp.iter().zip(cq) {
                        alpha += x.norm_sqr();
                        beta += y.norm_sqr();
                        gamma += x.conj() * y;
                    }
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == T::zero() || alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let rel = g / (alpha * beta).sqrt();
                off = off.max(rel);
                if rel <= tol {
                    continue;
                }
                let phase = gamma / g;
                let zeta = (beta - alpha) / (T::lit(2.0) * g);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let t = if zeta == T::zero() { T::one() } else { t };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let cp = &mut left[p];
                let cq = &mut right[0];
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let yq = *y * phase.conj();
                    let nx = *x * c - yq * s;
                    let ny = *x * s + yq * c;
                    *x = nx;
                    *y = ny;
                }
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNonConvergence { sweeps: MAX_SWEEPS });
    }
    let mut sv: Vec<T> = cols
        .iter()
        .map(|c| c.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inverse_and_det() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        assert_abs_diff_eq!(a.det().unwrap(), 5.0, epsilon = 1e-14);
        let prod = a.matmul(&a.inverse().unwrap());
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[(i, j)], e, epsilon = 1e-14);
            }
        }
        let s = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(s.inverse(), Err(Error::SingularMatrix));
        assert_eq!(s.det().unwrap(), 0.0);
    }

    #[test]
    fn expm_of_nilpotent_and_diagonal() {
        let n = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let e = n.scale(-3.5).expm().unwrap();
        assert_abs_diff_eq!(e[(0, 1)], -3.5, epsilon = 1e-13);
        assert_abs_diff_eq!(e[(0, 0)], 1.0, epsilon = 1e-14);
        let d = Mat::diag(&[1.0, -2.0, 10.0]);
        let e = d.expm().unwrap();
        for (i, v) in [1.0f64, -2.0, 10.0].iter().enumerate() {
            assert!((e[(i, i)] - v.exp()).abs() <= 1e-13 * v.exp());
        }
    }

    #[test]
    fn expm_rotation() {
        let t = 2.3f64;
        let g = Mat::from_rows(&[vec![0.0, -t], vec![t, 0.0]]).unwrap();
        let e = g.expm().unwrap();
        assert_abs_diff_eq!(e[(0, 0)], t.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 0)], t.sin(), epsilon = 1e-14);
    }

    #[test]
    fn singular_values_of_known_matrix() {
        // diag(3, 1) rotated on the left by a unitary keeps singular values.
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let cols = vec![
            vec![Complex::new(3.0 * s2, 0.0), Complex::new(0.0, 3.0 * s2)],
            vec![Complex::new(s2, 0.0), Complex::new(0.0, -s2)],
        ];
        let sv = singular_values(&cols).unwrap();
        assert_abs_diff_eq!(sv[0], 3.0, epsilon = 1e-13);
        assert_abs_diff_eq!(sv[1], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn singular_values_wide_matrix() {
        let cols = vec![
            vec![Complex::new(1.0, 0.0)],
            vec![Complex::new(0.0, 1.0)],
            vec![Complex::new(1.0, 1.0)],
        ];
        let sv = singular_values(&cols).unwrap();
        assert_eq!(sv.len(), 1);
        assert_abs_diff_eq!(sv[0], 2.0, epsilon = 1e-14);
    }
}
