//! The Klein–Gordon type operator `(∇_μ + A_μ)(∇^μ + A^μ) + B` acting on
//! fiber-matrix valued jets in a coordinate chart.
//!
//! The first `d` jet variables are chart coordinates; further variables (a
//! spectral parameter, say) ride along untouched.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bundle::GaugeFields;
use crate::error::Result;
use crate::geometry::{christoffel_from, ChristoffelData, MetricField};
use crate::jets::{Jet, Layout};
use crate::linalg::Mat;
use crate::scalar::{Real, Scalar};

pub type CJet = Jet<Complex64>;

pub fn complexify(m: &Mat<Jet<f64>>) -> Mat<CJet> {
    m.map(|j| j.to_complex())
}

/// Chart data for the operator, stored in the contracted form
/// `KG U = G^{ab} ∂_a∂_b U − Γ^c ∂_c U + 2 A^a ∂_a U + V U` with
/// `Γ^c = G^{ab}Γ^c_{ab}` and `V = ∂_a A^a + Γ^a_{ab} A^b + A_a A^a + B`.
#[derive(Debug, Clone)]
pub struct ChartGeometry {
    d: usize,
    ginv: Mat<CJet>,
    gamma_up: Vec<CJet>,
    a_up: Vec<Mat<CJet>>,
    potential: Mat<CJet>,
}

impl ChartGeometry {
    pub fn new(
        ginv: &Mat<CJet>,
        gamma: &ChristoffelData<CJet>,
        a_lower: &[Mat<CJet>],
        b: &Mat<CJet>,
    ) -> Self {
        let d = ginv.rows;
        let k = b.rows;
        let gamma_up = (0..d)
            .map(|c| {
                let mut acc = CJet::zero();
                for a in 0..d {
                    for bb in 0..d {
                        acc.mul_acc(&ginv[(a, bb)], gamma.get(c, a, bb));
                    }
                }
                acc
            })
            .collect();
        let a_up: Vec<Mat<CJet>> = (0..d)
            .map(|a| {
                let mut acc: Mat<CJet> = Mat::zeros(k, k);
                for bb in 0..d {
                    acc = &acc + &a_lower[bb].scale_by(&ginv[(a, bb)]);
                }
                acc
            })
            .collect();
        let mut potential = b.clone();
        for a in 0..d {
            potential = &potential + &a_up[a].derivative(a);
            potential = &potential + &(&a_lower[a] * &a_up[a]);
            let mut tr = CJet::zero();
            for c in 0..d {
                tr = tr + gamma.get(c, c, a);
            }
            potential = &potential + &a_up[a].scale_by(&tr);
        }
        ChartGeometry {
            d,
            ginv: ginv.clone(),
            gamma_up,
            a_up,
            potential,
        }
    }

    /// Chart data from metric jets alone; Christoffel symbols come from jet
    /// derivatives and so carry one order less than `g`.
    pub fn from_metric_jets(
        g: &Mat<Jet<f64>>,
        a_lower: &[Mat<CJet>],
        b: &Mat<CJet>,
    ) -> Result<Self> {
        let d = g.rows;
        let ginv = g.inverse()?;
        let dg: Vec<Mat<Jet<f64>>> = (0..d).map(|a| g.derivative(a)).collect();
        let gamma = christoffel_from(&ginv, &dg);
        let gamma_c = ChristoffelData {
            d,
            gamma: gamma.gamma.iter().map(|j| j.to_complex()).collect(),
        };
        Ok(Self::new(&complexify(&ginv), &gamma_c, a_lower, b))
    }

    /// Chart data for the coordinates of `m` at the jet point `x`, with
    /// Christoffel symbols from symbolic metric derivatives.
    pub fn at_point(m: &MetricField, gauge: &GaugeFields, x: &[Jet<f64>]) -> Result<Self> {
        let d = m.dim();
        let at = m.metric_at(x)?;
        let gamma = m.christoffel(x)?;
        let gamma_c = ChristoffelData {
            d,
            gamma: gamma.gamma.iter().map(|j| j.to_complex()).collect(),
        };
        let a = gauge.eval_a(x)?;
        let b = gauge.eval_b(x)?;
        Ok(Self::new(&complexify(&at.ginv), &gamma_c, &a, &b))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Applies the operator; the result has two orders less than `u`.
    pub fn apply(&self, u: &Mat<CJet>) -> Mat<CJet> {
        let d = self.d;
        let du: Vec<Mat<CJet>> = (0..d).map(|a| u.derivative(a)).collect();
        let mut out = &self.potential * u;
        for a in 0..d {
            let dda = du[a].derivative(a);
            out = &out + &dda.scale_by(&self.ginv[(a, a)]);
            for b in (a + 1)..d {
                let ddab = du[a].derivative(b);
                let w = self.ginv[(a, b)].clone() + &self.ginv[(b, a)];
                out = &out + &ddab.scale_by(&w);
            }
            out = &out - &du[a].scale_by(&self.gamma_up[a]);
            out = &out + &(&self.a_up[a] * &du[a]).scale(2.0);
        }
        out
    }
}

/// Evaluates the operator on `field` at the point `x` of the chart of `m`.
pub fn apply_kg<F>(
    m: &MetricField,
    gauge: &GaugeFields,
    x: &[f64],
    field: F,
) -> Result<Mat<Complex64>>
where
    F: Fn(&[Jet<f64>]) -> Result<Mat<CJet>>,
{
    let lay = Layout::new(m.dim(), 2);
    let xj = Jet::lift(&lay, x);
    let geo = ChartGeometry::at_point(m, gauge, &xj)?;
    let u = field(&xj)?;
    Ok(geo.apply(&u).map(|j| *j.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog;
    use alloc::vec;

    fn scalar(v: CJet) -> Mat<CJet> {
        Mat::from_vec(1, 1, vec![v])
    }

    #[test]
    fn flat_laplacian_and_mass() {
        let m = catalog::flat(2);
        let g = GaugeFields::trivial(2, 1);
        let r = apply_kg(&m, &g, &[0.4, -1.0], |x| {
            Ok(scalar(x[0].square().to_complex()))
        })
        .unwrap();
        assert!((r[(0, 0)].re - 2.0).abs() < 1e-14);
        let g = GaugeFields::scalar_potential(2, 2, -3.0);
        let r = apply_kg(&m, &g, &[0.4, -1.0], |_| Ok(Mat::identity(2))).unwrap();
        assert!((r[(0, 0)].re + 3.0).abs() < 1e-14 && r[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn sphere_harmonic_eigenvalue() {
        let m = catalog::sphere2(1.0);
        let g = GaugeFields::trivial(2, 1);
        for th in [0.4, 1.1, 2.5] {
            let r = apply_kg(&m, &g, &[th, 0.7], |x| Ok(scalar(x[0].cos().to_complex()))).unwrap();
            assert!((r[(0, 0)].re + 2.0 * th.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn chart_from_metric_jets_matches_symbolic() {
        let m = catalog::sphere2(1.0);
        let g = GaugeFields::trivial(2, 1);
        let lay = Layout::new(2, 4);
        let x = Jet::lift(&lay, &[1.0, 0.2]);
        let gj = m.metric_at(&x).unwrap().g;
        let a: Vec<Mat<CJet>> = (0..2).map(|_| Mat::zeros(1, 1)).collect();
        let jet_chart = ChartGeometry::from_metric_jets(&gj, &a, &Mat::zeros(1, 1)).unwrap();
        let sym_chart = ChartGeometry::at_point(&m, &g, &x).unwrap();
        let u = scalar((x[0].sin() * x[1].cos()).to_complex());
        let (p, q) = (jet_chart.apply(&u), sym_chart.apply(&u));
        assert_eq!(p[(0, 0)].order(), 2);
        for (a, b) in p[(0, 0)].coeffs().iter().zip(q[(0, 0)].coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
