//! World function `σ(x, x′)`, its first and mixed second derivatives, and the
//! van Vleck–Morette determinant `Δ`, all read off the geodesic flow.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geodesic::{GeodesicSolution, LiftedGeodesic};
use crate::geometry::MetricField;
use crate::linalg::Mat;
use crate::scalar::{fm, Real, Scalar};

/// `σ`, `σ_{;μ}` (at `x`), `σ_{;′μ′}` (at `x′`) and the mixed block
/// `σ_{;μ;′ν′}` with rows indexed by `x` and columns by `x′`.
#[derive(Debug, Clone)]
pub struct WorldFunctionData<S> {
    pub sigma: S,
    pub grad_x: Vec<S>,
    pub grad_xp: Vec<S>,
    pub mixed: Mat<S>,
}

/// `Δ`, its positive root `√|Δ|`, and the sign of `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanVleckData {
    pub delta: f64,
    pub delta_sqrt: f64,
    pub sign: i32,
}

/// Mixed block `C − D B⁻¹ A` of `Φ(1) = [[A, B], [C, D]]`: the change of
/// `p(1)` with `x′` at fixed `x`.
fn mixed_block<S: Scalar>(phi: &Mat<S>, d: usize) -> Result<Mat<S>> {
    let a = phi.block(0, 0, d, d);
    let b = phi.block(0, d, d, d);
    let c = phi.block(d, 0, d, d);
    let dd = phi.block(d, d, d, d);
    let bia = b.solve(&a).map_err(|_| Error::ConjugatePoint {
        det: b.det().base().re,
    })?;
    Ok(&c - &(&dd * &bia))
}

fn half_dot<S: Scalar>(p: &[S], v: &[S]) -> S {
    let mut acc = S::zero();
    for (a, b) in p.iter().zip(v) {
        acc.mul_acc(a, b);
    }
    acc.scale(0.5)
}

pub fn world_function(sol: &GeodesicSolution) -> Result<WorldFunctionData<f64>> {
    let d = sol.dim();
    Ok(WorldFunctionData {
        sigma: sol.sigma(),
        grad_x: sol.p_end(),
        grad_xp: sol.p_start().iter().map(|v| -v).collect(),
        mixed: mixed_block(sol.propagator.last().unwrap(), d)?,
    })
}

/// World function data for a lifted solution; derivatives of the lifted
/// endpoints carry through to every field.
pub fn world_function_lifted<S: Real>(lg: &LiftedGeodesic<S>) -> Result<WorldFunctionData<S>> {
    let d = lg.x_start.len();
    Ok(WorldFunctionData {
        sigma: half_dot(&lg.p0, &lg.v0),
        grad_x: lg.p1.clone(),
        grad_xp: lg.p0.iter().map(|v| -v.clone()).collect(),
        mixed: mixed_block(&lg.phi1, d)?,
    })
}

/// `(−1)` raised to the number of negative metric eigenvalues.
pub fn expected_sign(m: &MetricField) -> i32 {
    if m.negative_count() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Signed `Δ = det(−σ_{;μ;′ν′}) / (√|det g(x)| √|det g(x′)|)`, generic.
pub fn delta_generic<S: Scalar>(m: &MetricField, mixed: &Mat<S>, x: &[S], xp: &[S]) -> Result<S> {
    let gx = m.metric_at(x)?.det;
    let gxp = m.metric_at(xp)?.det;
    let abs = |v: S| if v.base().re < 0.0 { -v } else { v };
    let den = abs(gx).sqrt() * abs(gxp).sqrt();
    Ok((-mixed).det() * den.recip())
}

/// `√|Δ|` for a generic signed `Δ`.
pub fn delta_sqrt_generic<S: Scalar>(delta: &S) -> S {
    if delta.base().re < 0.0 {
        (-delta.clone()).sqrt()
    } else {
        delta.sqrt()
    }
}

pub fn van_vleck(
    m: &MetricField,
    wf: &WorldFunctionData<f64>,
    x: &[f64],
    xp: &[f64],
) -> Result<VanVleckData> {
    let delta = delta_generic(m, &wf.mixed, x, xp)?;
    if !delta.is_finite() || delta == 0.0 {
        return Err(Error::ConjugatePoint { det: delta });
    }
    let sign = if delta < 0.0 { -1 } else { 1 };
    let expected = expected_sign(m);
    if sign != expected {
        return Err(Error::VanVleckSign {
            expected,
            found: sign,
        });
    }
    Ok(VanVleckData {
        delta,
        delta_sqrt: fm::sqrt(fm::abs(delta)),
        sign,
    })
}

/// `|g^{μν}(x) σ_{;μ} σ_{;ν} − 2σ|`.
pub fn eikonal_defect(m: &MetricField, wf: &WorldFunctionData<f64>, x: &[f64]) -> Result<f64> {
    let ginv = m.metric_at(x)?.ginv;
    let up = ginv.mul_vec(&wf.grad_x);
    let s: f64 = up.iter().zip(&wf.grad_x).map(|(a, b)| a * b).sum();
    Ok(fm::abs(s - 2.0 * wf.sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{shoot_bvp, BvpOptions};
    use crate::geometry::catalog;
    use core::f64::consts::PI;

    fn solve(m: &MetricField, a: &[f64], b: &[f64]) -> (WorldFunctionData<f64>, VanVleckData) {
        let sol = shoot_bvp(m, a, b, None, &BvpOptions::default()).unwrap();
        let wf = world_function(&sol).unwrap();
        let vv = van_vleck(m, &wf, b, a).unwrap();
        (wf, vv)
    }

    #[test]
    fn flat_world_function() {
        let (wf, vv) = solve(&catalog::flat(2), &[0.0, 0.0], &[1.0, 2.0]);
        assert!((wf.sigma - 2.5).abs() < 1e-14);
        assert!((wf.grad_x[1] - 2.0).abs() < 1e-14 && (wf.grad_xp[0] + 1.0).abs() < 1e-14);
        assert!((wf.mixed[(0, 0)] + 1.0).abs() < 1e-13 && wf.mixed[(0, 1)].abs() < 1e-13);
        assert!((vv.delta - 1.0).abs() < 1e-13 && vv.sign == 1);
    }

    #[test]
    fn minkowski_sign() {
        let (wf, vv) = solve(&catalog::minkowski2(), &[0.0, 0.0], &[1.0, 0.0]);
        assert!((wf.sigma + 0.5).abs() < 1e-14);
        assert!((wf.mixed[(0, 0)] - 1.0).abs() < 1e-13 && (wf.mixed[(1, 1)] + 1.0).abs() < 1e-13);
        assert!(
            (vv.delta + 1.0).abs() < 1e-12 && vv.sign == -1 && (vv.delta_sqrt - 1.0).abs() < 1e-12
        );
    }

    #[test]
    fn sphere_quarter_arc() {
        let m = catalog::sphere2(1.0);
        let (wf, vv) = solve(&m, &[PI / 2.0, 0.0], &[PI / 2.0, PI / 2.0]);
        assert!((wf.sigma - PI * PI / 8.0).abs() < 1e-9);
        assert!((vv.delta - PI / 2.0).abs() < 1e-7, "{}", vv.delta);
        assert!(eikonal_defect(&m, &wf, &[PI / 2.0, PI / 2.0]).unwrap() < 1e-9);
    }
}
