//! A smooth function of `λ` with prescribed Taylor coefficients at `λ = 0`,
//! `H(x, λ) = Σ iⁿ χ(λ/λ_n) λⁿ h_n(x)`, where the cutoff `χ` switches each
//! term off beyond the scale `λ_n` and `λ_n` shrinks with the size of `h_n`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::fm;

fn phi(u: f64) -> f64 {
    if u > 0.0 {
        num_traits::Float::exp(-1.0 / u)
    } else {
        0.0
    }
}

/// `χ(t) = φ(2(1−|t|)) / (φ(2(1−|t|)) + φ(2|t|−1))`, `φ(u) = e^{−1/u}` for
/// `u > 0`. Smooth, 1 on `[−½, ½]`, 0 outside `(−1, 1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cutoff;

impl Cutoff {
    pub fn eval(&self, t: f64) -> f64 {
        let a = fm::abs(t);
        if a <= 0.5 {
            return 1.0;
        }
        if a >= 1.0 {
            return 0.0;
        }
        let p = phi(2.0 * (1.0 - a));
        p / (p + phi(2.0 * a - 1.0))
    }

    /// Grid estimates of `sup |χ^{(k)}|` for `k ≤ k_max`, for diagnostics.
    pub fn derivative_sups(&self, k_max: usize, points: usize) -> Result<Vec<f64>> {
        let g = GridFunction::sample(-1.0, 1.0, points, |t| self.eval(t));
        (0..=k_max).map(|k| g.max_derivative(k)).collect()
    }
}

pub fn build_cutoff() -> Cutoff {
    Cutoff
}

/// Samples of a function on a uniform grid over `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
}

/// Finite-difference weights for the `k`-th derivative at `z` from nodes `xs`.
fn fd_weights(z: f64, xs: &[f64], k: usize) -> Vec<f64> {
    // Fornberg's recursion
    let n = xs.len();
    let mut c = alloc::vec![alloc::vec![0.0; k + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(k);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for s in (1..=mn).rev() {
                    c[i][s] = c1 * (s as f64 * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for s in (1..=mn).rev() {
                c[j][s] = (c4 * c[j][s] - s as f64 * c[j][s - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[k]).collect()
}

impl GridFunction {
    pub fn sample(a: f64, b: f64, points: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = points.max(2);
        let values = (0..n)
            .map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64))
            .collect();
        GridFunction { a, b, values }
    }

    pub fn constant(a: f64, b: f64, points: usize, v: f64) -> Self {
        Self::sample(a, b, points, |_| v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> f64 {
        self.a + (self.b - self.a) * i as f64 / (self.len() - 1) as f64
    }

    /// `max_i |f^{(k)}(x_i)|` from local stencils of `k + 4` nodes, shifted
    /// inward near the ends.
    pub fn max_derivative(&self, k: usize) -> Result<f64> {
        let n = self.len();
        let width = k + 4;
        if k > 0 && n < width {
            return Err(Error::Invalid(alloc::format!(
                "grid of {n} points is too coarse for derivatives of order {k}"
            )));
        }
        if k == 0 {
            return Ok(self.values.iter().fold(0.0, |m, v| m.max(fm::abs(*v))));
        }
        let mut best = 0.0f64;
        for i in 0..n {
            let lo = i.saturating_sub(width / 2).min(n - width);
            let xs: Vec<f64> = (lo..lo + width).map(|j| self.point(j)).collect();
            let w = fd_weights(self.point(i), &xs, k);
            // the weights sum to zero; centring keeps constants exact
            let c = self.values[i];
            let v: f64 = w
                .iter()
                .zip(&self.values[lo..lo + width])
                .map(|(a, b)| a * (b - c))
                .sum();
            best = best.max(fm::abs(v));
        }
        Ok(best)
    }
}

/// `max_{|α| ≤ n} sup |∂^α h_n|` over the grid.
pub fn estimate_sup(h: &GridFunction, n: usize) -> Result<f64> {
    let mut best = 0.0f64;
    for k in 0..=n {
        best = best.max(h.max_derivative(k)?);
    }
    Ok(best)
}

/// The coefficients `h_n`, cutoff, sup estimates `L_n` and scales `λ_n`.
#[derive(Debug, Clone)]
pub struct BorelBuilder {
    pub h: Vec<GridFunction>,
    pub chi: Cutoff,
    pub l: Vec<f64>,
    pub lam: Vec<f64>,
    pub safety: f64,
}

impl BorelBuilder {
    /// `L_n = 1.25 · (grid estimate)`, `λ_n = min(1/(n+1), 1/L_n)`.
    pub fn new(h: Vec<GridFunction>) -> Result<Self> {
        Self::with_safety(h, 1.25)
    }

    pub fn with_safety(h: Vec<GridFunction>, safety: f64) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::Invalid(
                "at least one coefficient function is needed".into(),
            ));
        }
        let mut l = Vec::with_capacity(h.len());
        let mut lam = Vec::with_capacity(h.len());
        for (n, hn) in h.iter().enumerate() {
            let ln = safety * estimate_sup(hn, n)?;
            let inv = if ln > 0.0 { 1.0 / ln } else { f64::INFINITY };
            l.push(ln);
            lam.push((1.0 / (n as f64 + 1.0)).min(inv));
        }
        Ok(BorelBuilder {
            h,
            chi: Cutoff,
            l,
            lam,
            safety,
        })
    }

    /// `Σ_{n ≤ n_trunc} iⁿ χ(λ/λ_n) λⁿ h_n(x_i)`.
    pub fn borel_sum(&self, i: usize, lambda: f64, n_trunc: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut ipow = Complex64::new(1.0, 0.0);
        let mut lpow = 1.0;
        for n in 0..=n_trunc.min(self.h.len() - 1) {
            let c = self.chi.eval(lambda / self.lam[n]);
            if c != 0.0 {
                acc += ipow * (c * lpow * self.h[n].values[i]);
            }
            ipow *= Complex64::new(0.0, 1.0);
            lpow *= lambda;
        }
        acc
    }

    /// `max_λ |H(λ) − Σ_{n≤N} iⁿλⁿh_n| / λ^{N+1}` over the part of `lambdas`
    /// inside `(0, ½ min_{n≤N} λ_n)`.
    pub fn taylor_match_check(&self, i: usize, n: usize, lambdas: &[f64]) -> Result<f64> {
        let bound = 0.5
            * self.lam[..=n.min(self.lam.len() - 1)]
                .iter()
                .fold(f64::INFINITY, |a, b| a.min(*b));
        let mut worst: Option<f64> = None;
        for &lam in lambdas.iter().filter(|&&l| l > 0.0 && l < bound) {
            let full = self.borel_sum(i, lam, self.h.len() - 1);
            let mut poly = Complex64::new(0.0, 0.0);
            let mut ipow = Complex64::new(1.0, 0.0);
            for k in 0..=n.min(self.h.len() - 1) {
                poly += ipow * (fm::powi(lam, k as i32) * self.h[k].values[i]);
                ipow *= Complex64::new(0.0, 1.0);
            }
            let v = (full - poly).norm() / fm::powi(lam, n as i32 + 1);
            worst = Some(worst.map_or(v, |w: f64| w.max(v)));
        }
        worst.ok_or_else(|| Error::Invalid("no λ values inside the certified range".into()))
    }

    /// `∂_λⁿ H(x_i, 0)` for `n ≤ 3` by central differences with one
    /// Richardson step.
    pub fn fd_derivative_at_zero(&self, i: usize, n: usize, step: f64) -> Result<Complex64> {
        let top = self.h.len() - 1;
        let f = |l: f64| self.borel_sum(i, l, top);
        let d = |h: f64| -> Complex64 {
            match n {
                0 => f(0.0),
                1 => (f(h) - f(-h)) / (2.0 * h),
                2 => (f(h) - f(0.0) * 2.0 + f(-h)) / (h * h),
                _ => (f(2.0 * h) - f(h) * 2.0 + f(-h) * 2.0 - f(-2.0 * h)) / (2.0 * h * h * h),
            }
        };
        if n > 3 {
            return Err(Error::Invalid(
                "finite-difference derivatives are provided up to order 3".into(),
            ));
        }
        Ok((d(step / 2.0) * 4.0 - d(step)) / 3.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cutoff_shape() {
        let chi = build_cutoff();
        assert_eq!(chi.eval(0.4), 1.0);
        assert_eq!(chi.eval(-0.5), 1.0);
        assert_eq!(chi.eval(1.2), 0.0);
        assert_eq!(chi.eval(-1.0), 0.0);
        let v = chi.eval(0.75);
        assert!(v > 0.0 && v < 1.0 && (v - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for k in 0..=1000 {
            let c = chi.eval(0.5 + 0.5 * k as f64 / 1000.0);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn sup_estimates() {
        assert_eq!(
            estimate_sup(&GridFunction::constant(0.0, 1.0, 50, 1.0), 3).unwrap(),
            1.0
        );
        let s = GridFunction::sample(0.0, 2.0 * core::f64::consts::PI, 2001, |x| x.sin());
        assert!((estimate_sup(&s, 1).unwrap() - 1.0).abs() < 1e-3);
        let e = GridFunction::sample(0.0, 1.0, 1001, |x| (2.0 * x).exp());
        let want = 4.0 * 1f64.exp().powi(2);
        assert!((estimate_sup(&e, 2).unwrap() - want).abs() < 1e-6 * want);
        assert!(estimate_sup(&GridFunction::constant(0.0, 1.0, 3, 1.0), 2).is_err());
    }

    #[test]
    fn sums() {
        let ones: Vec<_> = (0..30)
            .map(|_| GridFunction::constant(0.0, 1.0, 40, 1.0))
            .collect();
        let b = BorelBuilder::new(ones).unwrap();
        assert_eq!(b.borel_sum(0, 0.0, 29), Complex64::new(1.0, 0.0));
        let mut want = Complex64::new(0.0, 0.0);
        for n in 0..=19 {
            let c = b.chi.eval(0.05 / b.lam[n]);
            want += Complex64::new(0.0, 0.05).powu(n as u32) * c;
        }
        assert!((b.borel_sum(0, 0.05, 29) - want).norm() < 1e-15);
        let zeros: Vec<_> = (0..5)
            .map(|_| GridFunction::constant(0.0, 1.0, 10, 0.0))
            .collect();
        let z = BorelBuilder::new(zeros).unwrap();
        assert_eq!(z.borel_sum(3, 0.2, 4), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn taylor_match() {
        let ones: Vec<_> = (0..12)
            .map(|_| GridFunction::constant(0.0, 1.0, 20, 1.0))
            .collect();
        let b = BorelBuilder::new(ones).unwrap();
        let grid: Vec<f64> = (1..100).map(|k| k as f64 * 1e-3).collect();
        let defect = b.taylor_match_check(0, 3, &grid).unwrap();
        assert!(defect <= 2.0, "{defect}");
        let single = BorelBuilder::new(vec![GridFunction::constant(0.0, 1.0, 10, 2.0)]).unwrap();
        assert_eq!(single.taylor_match_check(0, 0, &grid).unwrap(), 0.0);
    }
}
