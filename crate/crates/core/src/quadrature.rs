//! Gauss–Legendre quadrature on `[0, 1]` and Richardson extrapolation.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::scalar::fm;

/// Nodes and weights of the `n`-point Gauss–Legendre rule mapped to `[0, 1]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess for the i-th root of P_n, descending in [-1, 1].
        let mut z = fm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if fm::abs(dz) < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - z));
        weights.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (nodes, weights)
}

/// Extrapolates `f(ρ0), f(ρ0/2), f(ρ0/4), …` to `ρ = 0`, cancelling the
/// error terms `ρ, ρ², …, ρ^{m−1}` for `m` values (Neville table).
pub fn richardson_halving<T>(values: &[T]) -> T
where
    T: Clone + core::ops::Mul<f64, Output = T> + core::ops::Add<Output = T>,
{
    assert!(!values.is_empty(), "extrapolation needs at least one value");
    let mut t: Vec<T> = values.to_vec();
    for j in 1..values.len() {
        let p = fm::powi(2.0, j as i32);
        for i in (j..values.len()).rev() {
            t[i] = t[i].clone() * (p / (p - 1.0)) + t[i - 1].clone() * (-1.0 / (p - 1.0));
        }
    }
    t[values.len() - 1].clone()
}

/// Central-difference derivative with one Richardson step, `O(h⁴)` error.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 32] {
            let (x, w) = gauss_legendre(n);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!(
                    (q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14,
                    "n={n} deg={deg}"
                );
            }
        }
    }

    #[test]
    fn richardson_cancels_quadratic() {
        let f = |r: f64| 2.0 + 3.0 * r - 5.0 * r * r;
        assert!((richardson_halving(&[f(0.1), f(0.05), f(0.025)]) - 2.0).abs() < 1e-14);
        let g = |r: f64| 1.0 - r + 4.0 * r.powi(3);
        let four: Vec<f64> = (0..4).map(|k| g(0.2 / f64::from(1u32 << k))).collect();
        assert!((richardson_halving(&four) - 1.0).abs() < 1e-13);
        assert!((richardson_halving(&four[..3]) - 1.0).abs() > 1e-4);
        assert!((central_diff(|x| x.sin(), 0.3, 1e-2) - 0.3f64.cos()).abs() < 1e-10);
    }
}
