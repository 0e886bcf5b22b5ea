//! Small dense matrices over any [`Scalar`], including jets.

use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::scalar::{fm, Scalar};

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| T::zero()).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    /// Conjugate transpose.
    pub fn adjoint_h(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, f: f64) -> Self {
        self.map(|x| x.scale(f))
    }

    pub fn scale_by(&self, s: &T) -> Self {
        self.map(|x| x.clone() * s)
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)].clone())
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat<T>) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)].clone();
            }
        }
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for i in 0..self.rows.min(self.cols) {
            t = t + &self[(i, i)];
        }
        t
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..self.cols {
                    acc.mul_acc(&self[(i, j)], &v[j]);
                }
                acc
            })
            .collect()
    }

    /// Largest magnitude of a base value, used for relative pivot tests.
    fn base_scale(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.base().norm())
            .fold(0.0, f64::max)
    }

    /// LU-style elimination with partial pivoting on base values. Returns the
    /// eliminated matrix, the row permutation sign and the pivot list, or
    /// `None` when a pivot falls below `rel_tol` relative to the matrix scale.
    fn eliminate(&self, rhs: Option<&mut Mat<T>>, rel_tol: f64) -> Option<(Mat<T>, f64, Vec<T>)> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut rhs = rhs;
        let scale = self.base_scale();
        let mut sign = 1.0;
        let mut pivots = Vec::with_capacity(n);
        for col in 0..n {
            let (prow, pmag) = (col..n)
                .map(|r| (r, a[(r, col)].base().norm()))
                .fold((col, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmag <= rel_tol * scale || pmag == 0.0 || !pmag.is_finite() {
                return None;
            }
            if prow != col {
                for j in 0..n {
                    a.data.swap(prow * n + j, col * n + j);
                }
                if let Some(r) = rhs.as_deref_mut() {
                    let m = r.cols;
                    for j in 0..m {
                        r.data.swap(prow * m + j, col * m + j);
                    }
                }
                sign = -sign;
            }
            let inv = a[(col, col)].recip();
            pivots.push(a[(col, col)].clone());
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)].clone() * &inv;
                for j in col..n {
                    let t = f.clone() * &a[(col, j)];
                    a[(r, j)] = a[(r, j)].clone() - &t;
                }
                if let Some(rm) = rhs.as_deref_mut() {
                    for j in 0..rm.cols {
                        let t = f.clone() * &rm[(col, j)];
                        rm[(r, j)] = rm[(r, j)].clone() - &t;
                    }
                }
            }
        }
        if let Some(rm) = rhs {
            for r in 0..n {
                let inv = a[(r, r)].recip();
                for j in 0..rm.cols {
                    rm[(r, j)] = rm[(r, j)].clone() * &inv;
                }
            }
        }
        Some((a, sign, pivots))
    }

    /// Solves `self · X = b`.
    pub fn solve(&self, b: &Mat<T>) -> Result<Mat<T>> {
        self.solve_tol(b, 1e-14)
    }

    pub fn solve_tol(&self, b: &Mat<T>, rel_tol: f64) -> Result<Mat<T>> {
        let mut x = b.clone();
        self.eliminate(Some(&mut x), rel_tol)
            .ok_or(Error::Singular {
                what: "linear solve",
            })?;
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Mat<T>> {
        self.solve(&Mat::identity(self.rows))
    }

    pub fn inverse_tol(&self, rel_tol: f64) -> Result<Mat<T>> {
        self.solve_tol(&Mat::identity(self.rows), rel_tol)
    }

    pub fn det(&self) -> T {
        match self.eliminate(None, 0.0) {
            None => T::zero(),
            Some((_, sign, pivots)) => {
                let mut d = T::from_f64(sign);
                for p in pivots {
                    d = d * &p;
                }
                d
            }
        }
    }

    /// Base values (degree-0 coefficients) as a complex matrix.
    pub fn base(&self) -> Mat<Complex64> {
        self.map(|x| x.base())
    }
}

impl<'a, T: Scalar> Add<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn add(self, o: &'a Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| a.clone() + b)
                .collect(),
        }
    }
}

impl<'a, T: Scalar> Sub<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn sub(self, o: &'a Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| a.clone() - b)
                .collect(),
        }
    }
}

impl<'a, T: Scalar> Mul<&'a Mat<T>> for &'a Mat<T> {
    type Output = Mat<T>;
    fn mul(self, o: &'a Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, o.rows);
        let mut out: Mat<T> = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                for j in 0..o.cols {
                    out.data[i * o.cols + j].mul_acc(a, &o[(k, j)]);
                }
            }
        }
        out
    }
}

impl<'a, T: Scalar> Neg for &'a Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.map(|x| -x.clone())
    }
}

impl Mat<Complex64> {
    pub fn frobenius(&self) -> f64 {
        fm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn max_abs_diff(&self, o: &Mat<Complex64>) -> f64 {
        self.data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Mat<f64> {
    pub fn frobenius(&self) -> f64 {
        fm::sqrt(self.data.iter().map(|z| z * z).sum())
    }

    pub fn to_complex(&self) -> Mat<Complex64> {
        self.map(|x| Complex64::new(*x, 0.0))
    }
}

impl<T: Scalar> Mat<Jet<T>> {
    /// Matrix of degree-0 coefficients.
    pub fn value(&self) -> Mat<T> {
        self.map(|j| j.value().clone())
    }

    pub fn derivative(&self, var: usize) -> Self {
        self.map(|j| j.derivative(var))
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.map(|j| j.truncate(order))
    }

    pub fn scale_vars(&self, f: f64) -> Self {
        self.map(|j| j.scale_vars(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Layout;

    #[test]
    fn inverse_and_det_of_real_matrix() {
        let a = Mat::from_vec(
            3,
            3,
            alloc::vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0],
        );
        let inv = a.inverse().unwrap();
        let id = &a * &inv;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - want).abs() < 1e-14);
            }
        }
        assert!((a.det() - 18.0).abs() < 1e-12);
        let p = Mat::from_vec(2, 2, alloc::vec![0.0, 1.0, 1.0, 0.0]);
        assert!((p.det() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        let a = Mat::from_vec(2, 2, alloc::vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(a.inverse(), Err(Error::Singular { .. })));
        assert_eq!(a.det(), 0.0);
    }

    #[test]
    fn jet_inverse_matches_series() {
        let lay = Layout::new(1, 3);
        let t = Jet::variable(&lay, 0.0, 0);
        // [[1, t], [0, 1]]^{-1} = [[1, -t], [0, 1]]
        let one = Jet::constant_in(&lay, 1.0);
        let zero = Jet::constant_in(&lay, 0.0);
        let a = Mat::from_vec(2, 2, alloc::vec![one.clone(), t.clone(), zero, one]);
        let inv = a.inverse().unwrap();
        assert!((inv[(0, 1)].coeff(&[1]) + 1.0).abs() < 1e-15);
        assert!(inv[(0, 1)].coeff(&[2]).abs() < 1e-15);
        let d = a.det();
        assert!((d.value() - 1.0).abs() < 1e-15 && d.coeff(&[1]).abs() < 1e-15);
    }
}
