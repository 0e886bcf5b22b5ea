//! Metric fields given by expressions, with Christoffel symbols and curvature.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::linalg::Mat;
use crate::scalar::{fm, Scalar};

/// A metric `g_{μν}(x)` on a single chart, with its first and second
/// coordinate derivatives obtained by symbolic differentiation.
#[derive(Debug, Clone)]
pub struct MetricField {
    name: String,
    d: usize,
    comps: Vec<Expr>,
    dcomps: Vec<Expr>,
    ddcomps: Vec<Expr>,
    signature: i32,
}

/// Metric, inverse and determinant at a point.
#[derive(Debug, Clone)]
pub struct MetricAt<S> {
    pub g: Mat<S>,
    pub ginv: Mat<S>,
    pub det: S,
}

/// Metric data with coordinate derivatives of the inverse metric.
#[derive(Debug, Clone)]
pub struct MetricDerivs<S> {
    pub g: Mat<S>,
    pub ginv: Mat<S>,
    /// `∂_μ g_{αβ}` for each μ.
    pub dg: Vec<Mat<S>>,
    /// `∂_μ g^{αβ}` for each μ.
    pub dginv: Vec<Mat<S>>,
    /// `∂_μ ∂_ν g^{αβ}`, indexed `μ * d + ν`; present when requested.
    pub ddginv: Option<Vec<Mat<S>>>,
}

/// Christoffel symbols `Γ^λ_{μν}` at a point.
#[derive(Debug, Clone)]
pub struct ChristoffelData<S> {
    pub d: usize,
    pub gamma: Vec<S>,
}

impl<S> ChristoffelData<S> {
    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize) -> &S {
        &self.gamma[(l * self.d + m) * self.d + n]
    }
}

impl MetricField {
    /// Builds a metric from a row-major `d × d` component array. The array
    /// must be structurally symmetric. The signature is detected from the
    /// eigenvalues at `samples` and must agree at all of them.
    pub fn new(name: &str, d: usize, comps: Vec<Expr>, samples: &[Vec<f64>]) -> Result<Self> {
        if d == 0 || comps.len() != d * d {
            return Err(Error::Invalid(format!(
                "metric needs {} components for dimension {d}, got {}",
                d * d,
                comps.len()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if comps[i * d + j] != comps[j * d + i] {
                    return Err(Error::Invalid(format!(
                        "metric component ({i},{j}) differs from ({j},{i})"
                    )));
                }
            }
        }
        let mut dcomps = Vec::with_capacity(d * d * d);
        for mu in 0..d {
            for c in &comps {
                dcomps.push(c.diff(mu));
            }
        }
        let mut ddcomps = Vec::with_capacity(d * d * d * d);
        for mu in 0..d {
            for nu in 0..d {
                for ab in 0..d * d {
                    ddcomps.push(dcomps[nu * d * d + ab].diff(mu));
                }
            }
        }
        let mut m = MetricField {
            name: name.to_string(),
            d,
            comps,
            dcomps,
            ddcomps,
            signature: 0,
        };
        if samples.is_empty() {
            return Err(Error::Invalid(
                "signature detection needs sample points".into(),
            ));
        }
        let mut sig = None;
        for x in samples {
            let s = m.signature_at(x)?;
            match sig {
                None => sig = Some(s),
                Some(e) if e != s => {
                    return Err(Error::Signature {
                        expected: e,
                        found: s,
                    })
                }
                _ => {}
            }
        }
        m.signature = sig.unwrap();
        Ok(m)
    }

    /// Parses the components from strings.
    pub fn from_strings(
        name: &str,
        d: usize,
        comps: &[&str],
        samples: &[Vec<f64>],
    ) -> Result<Self> {
        let parsed = comps
            .iter()
            .map(|s| parse_expression(s, d))
            .collect::<core::result::Result<Vec<_>, _>>()?;
        Self::new(name, d, parsed, samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Sum of the signs of the metric eigenvalues.
    pub fn signature(&self) -> i32 {
        self.signature
    }

    /// Number of negative eigenvalues.
    pub fn negative_count(&self) -> usize {
        ((self.d as i32 - self.signature) / 2) as usize
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.comps[i * self.d + j]
    }

    /// Signature from the eigenvalues of `g(x)`.
    pub fn signature_at(&self, x: &[f64]) -> Result<i32> {
        let g = self.eval_g(x)?;
        let mat = nalgebra::DMatrix::from_row_slice(self.d, self.d, &g.data);
        let eig = mat.symmetric_eigenvalues();
        let scale = eig.iter().fold(0.0f64, |a, v| a.max(fm::abs(*v)));
        let mut s = 0;
        for v in eig.iter() {
            if fm::abs(*v) <= 1e-12 * scale || scale == 0.0 {
                return Err(Error::SingularMetric {
                    at: format!("{x:?}"),
                });
            }
            s += if *v > 0.0 { 1 } else { -1 };
        }
        Ok(s)
    }

    fn eval_list<S: Scalar>(&self, list: &[Expr], x: &[S]) -> Result<Vec<S>> {
        let d = self.d;
        let mut out: Vec<Option<S>> = (0..list.len()).map(|_| None).collect();
        for (k, e) in list.iter().enumerate() {
            let ab = k % (d * d);
            let (a, b) = (ab / d, ab % d);
            if b < a {
                continue;
            }
            out[k] = Some(e.eval(x)?);
        }
        for k in 0..list.len() {
            if out[k].is_none() {
                let ab = k % (d * d);
                let (a, b) = (ab / d, ab % d);
                let mirror = k - ab + b * d + a;
                out[k] = out[mirror].clone();
            }
        }
        Ok(out.into_iter().map(|v| v.unwrap()).collect())
    }

    fn eval_g<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        if x.len() != self.d {
            return Err(Error::Invalid(format!(
                "point has {} coordinates, metric dimension is {}",
                x.len(),
                self.d
            )));
        }
        Ok(Mat::from_vec(
            self.d,
            self.d,
            self.eval_list(&self.comps, x)?,
        ))
    }

    /// Metric, exact truncated inverse and determinant at `x`.
    pub fn metric_at<S: Scalar>(&self, x: &[S]) -> Result<MetricAt<S>> {
        let g = self.eval_g(x)?;
        let (ginv, det) = invert_metric(&g, x)?;
        Ok(MetricAt { g, ginv, det })
    }

    /// Metric together with first (and optionally second) derivatives of the
    /// inverse metric, as needed by the Hamiltonian flow.
    pub fn derivs<S: Scalar>(&self, x: &[S], second: bool) -> Result<MetricDerivs<S>> {
        let d = self.d;
        let g = self.eval_g(x)?;
        let (ginv, _) = invert_metric(&g, x)?;
        let dflat = self.eval_list(&self.dcomps, x)?;
        let dg: Vec<Mat<S>> = (0..d)
            .map(|mu| Mat::from_vec(d, d, dflat[mu * d * d..(mu + 1) * d * d].to_vec()))
            .collect();
        // ∂g⁻¹ = -g⁻¹ (∂g) g⁻¹
        let dginv: Vec<Mat<S>> = dg.iter().map(|dm| -&(&(&ginv * dm) * &ginv)).collect();
        let ddginv = if second {
            let ddflat = self.eval_list(&self.ddcomps, x)?;
            let mut out = Vec::with_capacity(d * d);
            for mu in 0..d {
                for nu in 0..d {
                    let off = (mu * d + nu) * d * d;
                    let ddg = Mat::from_vec(d, d, ddflat[off..off + d * d].to_vec());
                    // ∂μ∂ν g⁻¹ = -(∂μ g⁻¹)(∂ν g) g⁻¹ - g⁻¹ (∂μ∂ν g) g⁻¹ - g⁻¹ (∂ν g)(∂μ g⁻¹)
                    let t1 = &(&dginv[mu] * &dg[nu]) * &ginv;
                    let t2 = &(&ginv * &ddg) * &ginv;
                    let t3 = &(&ginv * &dg[nu]) * &dginv[mu];
                    out.push(-&(&(&t1 + &t2) + &t3));
                }
            }
            Some(out)
        } else {
            None
        };
        Ok(MetricDerivs {
            g,
            ginv,
            dg,
            dginv,
            ddginv,
        })
    }

    /// Levi-Civita connection `Γ^λ_{μν} = ½ g^{λρ}(∂_μ g_{ρν} + ∂_ν g_{ρμ} − ∂_ρ g_{μν})`.
    pub fn christoffel<S: Scalar>(&self, x: &[S]) -> Result<ChristoffelData<S>> {
        let md = self.derivs(x, false)?;
        Ok(christoffel_from(&md.ginv, &md.dg))
    }

    /// Ricci scalar from the Riemann tensor
    /// `R^ρ_{σμν} = ∂_μ Γ^ρ_{νσ} − ∂_ν Γ^ρ_{μσ} + Γ^ρ_{μλ} Γ^λ_{νσ} − Γ^ρ_{νλ} Γ^λ_{μσ}`.
    pub fn scalar_curvature<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let d = self.d;
        let md = self.derivs(x, false)?;
        let gamma = christoffel_from(&md.ginv, &md.dg);
        let ddflat = self.eval_list(&self.ddcomps, x)?;
        let ddg = |k: usize, m: usize, a: usize, b: usize| &ddflat[((k * d + m) * d + a) * d + b];
        let dg = |k: usize, a: usize, b: usize| &md.dg[k][(a, b)];
        // dgamma[k][l][m][n] = ∂_k Γ^l_{mn}
        let mut dgamma = Vec::with_capacity(d * d * d * d);
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    for n in 0..d {
                        let mut acc = S::zero();
                        for r in 0..d {
                            let first = dg(m, r, n).clone() + dg(n, r, m) - dg(r, m, n);
                            let second =
                                ddg(k, m, r, n).clone() + ddg(k, n, r, m) - ddg(k, r, m, n);
                            acc.mul_acc(&md.dginv[k][(l, r)], &first);
                            acc.mul_acc(&md.ginv[(l, r)], &second);
                        }
                        dgamma.push(acc.scale(0.5));
                    }
                }
            }
        }
        let dgm = |k: usize, l: usize, m: usize, n: usize| &dgamma[((k * d + l) * d + m) * d + n];
        let mut r = S::zero();
        for s in 0..d {
            for n in 0..d {
                // Ricci R_{σν} = R^μ_{σμν}
                let mut ric = S::zero();
                for mu in 0..d {
                    ric = ric + dgm(mu, mu, n, s) - dgm(n, mu, mu, s);
                    for l in 0..d {
                        ric.mul_acc(gamma.get(mu, mu, l), gamma.get(l, n, s));
                        let t = gamma.get(mu, n, l).clone() * gamma.get(l, mu, s);
                        ric = ric - t;
                    }
                }
                r.mul_acc(&md.ginv[(s, n)], &ric);
            }
        }
        Ok(r)
    }
}

fn invert_metric<S: Scalar>(g: &Mat<S>, x: &[S]) -> Result<(Mat<S>, S)> {
    let det = g.det();
    let scale = g.data.iter().map(|v| v.base().norm()).fold(0.0, f64::max);
    let n = g.rows as i32;
    if !(det.base().norm() > 1e-13 * fm::powi(scale, n)) {
        return Err(Error::SingularMetric {
            at: format!("{:?}", x.iter().map(|v| v.base().re).collect::<Vec<_>>()),
        });
    }
    let ginv = g.inverse().map_err(|_| Error::SingularMetric {
        at: format!("{:?}", x.iter().map(|v| v.base().re).collect::<Vec<_>>()),
    })?;
    Ok((ginv, det))
}

/// Christoffel symbols from the inverse metric and metric derivatives.
pub fn christoffel_from<S: Scalar>(ginv: &Mat<S>, dg: &[Mat<S>]) -> ChristoffelData<S> {
    let d = ginv.rows;
    let mut gamma: Vec<S> = Vec::with_capacity(d * d * d);
    for l in 0..d {
        for m in 0..d {
            for n in 0..d {
                if n < m {
                    let v: S = gamma[(l * d + n) * d + m].clone();
                    gamma.push(v);
                    continue;
                }
                let mut acc = S::zero();
                for r in 0..d {
                    let t = dg[m][(r, n)].clone() + &dg[n][(r, m)] - &dg[r][(m, n)];
                    acc.mul_acc(&ginv[(l, r)], &t);
                }
                gamma.push(acc.scale(0.5));
            }
        }
    }
    ChristoffelData { d, gamma }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn radius_sq(r: f64) -> String {
    fmt_num(r * r)
}

/// Catalog metrics. Each takes a radius (curvature scale) where meaningful.
pub mod catalog {
    use super::*;

    pub const NAMES: [&str; 5] = ["flat", "minkowski2", "sphere2", "hyperbolic2", "desitter2"];

    pub fn flat(d: usize) -> MetricField {
        let comps: Vec<Expr> = (0..d * d)
            .map(|k| Expr::Num(if k / d == k % d { 1.0 } else { 0.0 }))
            .collect();
        MetricField::new("flat", d, comps, &[alloc::vec![0.0; d]]).expect("flat metric")
    }

    pub fn minkowski2() -> MetricField {
        MetricField::from_strings(
            "minkowski2",
            2,
            &["-1", "0", "0", "1"],
            &[alloc::vec![0.0, 0.0]],
        )
        .expect("minkowski metric")
    }

    /// Round sphere of radius `r` in coordinates (θ, φ).
    pub fn sphere2(r: f64) -> MetricField {
        let r2 = radius_sq(r);
        let g11 = format!("{r2} * sin(x0)^2");
        MetricField::from_strings(
            "sphere2",
            2,
            &[&r2, "0", "0", &g11],
            &[
                alloc::vec![0.5, 0.3],
                alloc::vec![1.5, 2.0],
                alloc::vec![2.5, -1.0],
            ],
        )
        .expect("sphere metric")
    }

    /// Hyperbolic plane of curvature radius `r` in geodesic polar form.
    pub fn hyperbolic2(r: f64) -> MetricField {
        let r2 = radius_sq(r);
        let g11 = format!("{r2} * sinh(x0)^2");
        MetricField::from_strings(
            "hyperbolic2",
            2,
            &[&r2, "0", "0", &g11],
            &[
                alloc::vec![0.5, 0.3],
                alloc::vec![1.5, 2.0],
                alloc::vec![2.5, -1.0],
            ],
        )
        .expect("hyperbolic metric")
    }

    /// Two-dimensional de Sitter space `-dt² + r² cosh²(t/r) dx²`.
    pub fn desitter2(r: f64) -> MetricField {
        let r2 = radius_sq(r);
        let g11 = format!("{r2} * cosh(x0 / {})^2", fmt_num(r));
        MetricField::from_strings(
            "desitter2",
            2,
            &["-1", "0", "0", &g11],
            &[
                alloc::vec![0.0, 0.0],
                alloc::vec![1.0, 2.0],
                alloc::vec![-1.5, -1.0],
            ],
        )
        .expect("de Sitter metric")
    }

    /// Looks up a catalog metric by name; `flat` uses `dim`.
    pub fn by_name(name: &str, dim: usize, radius: f64) -> Option<MetricField> {
        Some(match name {
            "flat" => flat(dim),
            "minkowski2" => minkowski2(),
            "sphere2" => sphere2(radius),
            "hyperbolic2" => hyperbolic2(radius),
            "desitter2" => desitter2(radius),
            _ => return None,
        })
    }
}
