//! Fiber data: the sesquilinear form, gauge potential `A_μ`, potential `B`,
//! and the modified parallel transport `H` along geodesics.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::geodesic::{integrate_generic, GeodesicSolution};
use crate::geometry::MetricField;
use crate::linalg::Mat;
use crate::scalar::Real;

/// Complex-valued expression as a pair of real expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexExpr {
    pub re: Expr,
    pub im: Expr,
}

impl ComplexExpr {
    pub fn zero() -> Self {
        ComplexExpr {
            re: Expr::Num(0.0),
            im: Expr::Num(0.0),
        }
    }

    pub fn constant(z: Complex64) -> Self {
        ComplexExpr {
            re: Expr::Num(z.re),
            im: Expr::Num(z.im),
        }
    }

    pub fn parse(re: &str, im: &str, d: usize) -> Result<Self> {
        Ok(ComplexExpr {
            re: parse_expression(re, d)?,
            im: parse_expression(im, d)?,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn eval<S: Real>(&self, x: &[S]) -> Result<S::Complex> {
        Ok(S::complex(&self.re.eval(x)?, &self.im.eval(x)?))
    }
}

/// Nondegenerate hermitian form `S` on the fiber, defining `M† = S⁻¹ Mᴴ S`.
#[derive(Debug, Clone)]
pub struct FiberForm {
    s: Mat<Complex64>,
    s_inv: Mat<Complex64>,
}

impl FiberForm {
    pub fn new(s: Mat<Complex64>) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::Invalid("fiber form must be square".into()));
        }
        let defect = s.max_abs_diff(&s.adjoint_h());
        let scale = s.frobenius().max(1.0);
        if defect > 1e-12 * scale {
            return Err(Error::NotHermitian {
                what: "fiber form".into(),
                defect,
            });
        }
        let s_inv = s
            .inverse()
            .map_err(|_| Error::Singular { what: "fiber form" })?;
        Ok(FiberForm { s, s_inv })
    }

    pub fn identity(k: usize) -> Self {
        FiberForm {
            s: Mat::identity(k),
            s_inv: Mat::identity(k),
        }
    }

    pub fn k(&self) -> usize {
        self.s.rows
    }

    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.s
    }

    /// `S⁻¹ Mᴴ S`.
    pub fn adjoint(&self, m: &Mat<Complex64>) -> Mat<Complex64> {
        &(&self.s_inv * &m.adjoint_h()) * &self.s
    }
}

/// Gauge potential `A_μ` (lower index) and potential `B` on a trivial rank-k bundle.
#[derive(Debug, Clone)]
pub struct GaugeFields {
    d: usize,
    k: usize,
    a: Vec<Vec<ComplexExpr>>,
    b: Vec<ComplexExpr>,
}

impl GaugeFields {
    /// `a[μ]` and `b` are row-major `k × k` entry lists.
    pub fn new(d: usize, k: usize, a: Vec<Vec<ComplexExpr>>, b: Vec<ComplexExpr>) -> Result<Self> {
        if a.len() != d || a.iter().any(|m| m.len() != k * k) || b.len() != k * k {
            return Err(Error::Invalid(format!(
                "gauge fields need {d} matrices A and one matrix B, each {k}x{k}"
            )));
        }
        Ok(GaugeFields { d, k, a, b })
    }

    /// `A = 0`, `B = 0`.
    pub fn trivial(d: usize, k: usize) -> Self {
        GaugeFields {
            d,
            k,
            a: (0..d)
                .map(|_| (0..k * k).map(|_| ComplexExpr::zero()).collect())
                .collect(),
            b: (0..k * k).map(|_| ComplexExpr::zero()).collect(),
        }
    }

    /// `A = 0`, `B = b·I` for a real constant `b`.
    pub fn scalar_potential(d: usize, k: usize, b: f64) -> Self {
        let mut g = Self::trivial(d, k);
        for i in 0..k {
            g.b[i * k + i] = ComplexExpr::constant(Complex64::new(b, 0.0));
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn a_entries(&self, mu: usize) -> &[ComplexExpr] {
        &self.a[mu]
    }

    pub fn b_entries(&self) -> &[ComplexExpr] {
        &self.b
    }

    pub fn a_is_zero(&self) -> bool {
        self.a.iter().all(|m| m.iter().all(|e| e.is_zero()))
    }

    pub fn eval_a<S: Real>(&self, x: &[S]) -> Result<Vec<Mat<S::Complex>>> {
        self.a
            .iter()
            .map(|m| {
                let data = m.iter().map(|e| e.eval(x)).collect::<Result<Vec<_>>>()?;
                Ok(Mat::from_vec(self.k, self.k, data))
            })
            .collect()
    }

    pub fn eval_b<S: Real>(&self, x: &[S]) -> Result<Mat<S::Complex>> {
        let data = self
            .b
            .iter()
            .map(|e| e.eval(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mat::from_vec(self.k, self.k, data))
    }

    /// Checks `A_μ† = −A_μ` and `B† = B` at every sample point.
    pub fn validate(&self, form: &FiberForm, samples: &[Vec<f64>], tol: f64) -> Result<()> {
        if form.k() != self.k {
            return Err(Error::Invalid(format!(
                "fiber form is {}x{}, gauge fields are {}x{}",
                form.k(),
                form.k(),
                self.k,
                self.k
            )));
        }
        for x in samples {
            for (mu, a) in self.eval_a::<f64>(x)?.iter().enumerate() {
                let defect = (&form.adjoint(a) + a).frobenius();
                if defect > tol {
                    return Err(Error::NotHermitian {
                        what: format!("A_{mu} (anti-hermiticity) at {x:?}"),
                        defect,
                    });
                }
            }
            let b = self.eval_b::<f64>(x)?;
            let defect = (&form.adjoint(&b) - &b).frobenius();
            if defect > tol {
                return Err(Error::NotHermitian {
                    what: format!("B at {x:?}"),
                    defect,
                });
            }
        }
        Ok(())
    }
}

/// `H(x, x′)` and `H(x′, x)`.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub h: Mat<Complex64>,
    pub h_inv: Mat<Complex64>,
}

/// Solves `dH/ds = −γ̇^μ A_μ(γ) H`, `H(0) = I`, along the solution, and along
/// the reversed geodesic for `H(x′, x)`.
pub fn parallel_transport(
    m: &MetricField,
    sol: &GeodesicSolution,
    gauge: &GaugeFields,
) -> Result<TransportResult> {
    let fwd = integrate_generic::<f64>(
        m,
        &sol.x_start,
        &sol.p_start(),
        sol.steps,
        false,
        Some(gauge),
        &[1.0],
    )?;
    let h = fwd.h.unwrap().pop().unwrap();
    let p_end = sol.p_end();
    let back_p: Vec<f64> = p_end.iter().map(|v| -v).collect();
    let x_end = sol.x_end_numeric();
    let rev = integrate_generic::<f64>(m, &x_end, &back_p, sol.steps, false, Some(gauge), &[1.0])?;
    let h_inv = rev.h.unwrap().pop().unwrap();
    if !h.data.iter().chain(&h_inv.data).all(|z| z.is_finite()) {
        return Err(Error::NonFinite {
            what: "parallel transport",
        });
    }
    Ok(TransportResult { h, h_inv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn adjoint_examples() {
        let f = FiberForm::identity(2);
        let m = Mat::from_vec(
            2,
            2,
            alloc::vec![c(1.0, 2.0), c(0.0, 1.0), c(3.0, 0.0), c(0.5, -1.0)],
        );
        let a = f.adjoint(&m);
        assert_eq!(a[(0, 1)], c(3.0, 0.0));
        assert_eq!(a[(1, 0)], c(0.0, -1.0));
        let s = FiberForm::new(Mat::from_vec(
            2,
            2,
            alloc::vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ))
        .unwrap();
        let n = Mat::from_vec(
            2,
            2,
            alloc::vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        let a = s.adjoint(&n);
        assert_eq!(
            a.data,
            alloc::vec![c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]
        );
    }

    #[test]
    fn form_validation() {
        let bad = Mat::from_vec(
            2,
            2,
            alloc::vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)],
        );
        assert!(matches!(
            FiberForm::new(bad),
            Err(Error::NotHermitian { .. })
        ));
        let sing = Mat::from_vec(
            2,
            2,
            alloc::vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
        );
        assert!(FiberForm::new(sing).is_err());
    }

    #[test]
    fn gauge_validation() {
        let a = alloc::vec![alloc::vec![ComplexExpr::parse("0", "x0", 1).unwrap()]];
        let ok = GaugeFields::new(
            1,
            1,
            a,
            alloc::vec![ComplexExpr::parse("x0^2", "0", 1).unwrap()],
        )
        .unwrap();
        ok.validate(
            &FiberForm::identity(1),
            &[alloc::vec![0.3], alloc::vec![-2.0]],
            1e-10,
        )
        .unwrap();
        let a = alloc::vec![alloc::vec![ComplexExpr::parse("x0", "0", 1).unwrap()]];
        let bad = GaugeFields::new(1, 1, a, alloc::vec![ComplexExpr::zero()]).unwrap();
        assert!(bad
            .validate(&FiberForm::identity(1), &[alloc::vec![0.3]], 1e-10)
            .is_err());
    }
}
