//! The transport recursion for the coefficients `g_n`, `f_n = Δ^{1/2} H g_n`,
//! and the residual checks built on it.
//!
//! All quantities of the recursion are computed in normal coordinates `w`
//! centred at the source point `x′`, where the geodesics from `x′` are the
//! rays `s ↦ s·w` and the transport equation integrates to
//!
//! ```text
//! g_n(w) = ∫₀¹ s^{n−1} J(g_{n−1})(s·w) ds,   J(g) = (Δ^{1/2}H)⁻¹ KG(Δ^{1/2}H g).
//! ```
//!
//! One integration of the geodesic flow from `x′` with a jet-valued initial
//! velocity `w₀ + ζ` yields the exponential map, and hence metric, gauge
//! field, `Δ` and `H` as jets in `w`, at every point `t·w₀` the nested
//! quadrature visits. The jets of `g_{n−1}` needed by `J` at those points
//! follow from the same formula with rescaled jet variables, so the whole
//! recursion reduces to jet algebra on one ray.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bundle::{FiberForm, GaugeFields};
use crate::chart::{complexify, CJet, ChartGeometry};
use crate::error::{Error, Result};
use crate::geodesic::{
    check_conjugate_free, graded_mesh, integrate_on_mesh, shoot_bvp, shoot_bvp_lifted, BvpOptions,
    ConjugateReport, GeodesicSolution,
};
use crate::geometry::MetricField;
use crate::jets::{Jet, Layout};
use crate::linalg::Mat;
use crate::quadrature::{central_diff, gauss_legendre, richardson_halving};
use crate::scalar::{fm, Real, Scalar};
use crate::synge::{delta_generic, delta_sqrt_generic, expected_sign, world_function_lifted};

/// Numerical settings for the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadamardOptions {
    pub steps: usize,
    pub quad_nodes: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub conjugate_tol: f64,
    /// Run the conjugate-point scan on every connecting geodesic.
    pub check_conjugate: bool,
    /// Upper bound on the number of quadrature points visited.
    pub cost_guard: u64,
}

impl Default for HadamardOptions {
    fn default() -> Self {
        HadamardOptions {
            steps: 200,
            quad_nodes: 16,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            conjugate_tol: 1e-3,
            check_conjugate: true,
            cost_guard: 10_000_000,
        }
    }
}

impl HadamardOptions {
    pub fn bvp(&self) -> BvpOptions {
        BvpOptions {
            steps: self.steps,
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
        }
    }

    /// Refinement factor of the graded mesh near the source point.
    fn mesh_rel(&self) -> usize {
        (self.steps / 2).max(8)
    }
}

/// Number of quadrature points visited by the recursion up to `n_max`:
/// multisets of size `1..=n_max` drawn from `q` nodes.
pub fn quadrature_cost(q: usize, n_max: usize) -> u64 {
    // C(q + n, n) − 1
    let mut c: u128 = 1;
    for i in 1..=n_max as u128 {
        c = c * (q as u128 + i) / i;
    }
    (c - 1).min(u64::MAX as u128) as u64
}

struct NodeGeometry {
    chart: ChartGeometry,
    dh: Mat<CJet>,
    dh_inv: Mat<CJet>,
}

fn const_mat(m: &Mat<Complex64>) -> Mat<CJet> {
    m.map(|z| CJet::constant(*z))
}

fn values(m: &Mat<CJet>) -> Mat<Complex64> {
    m.map(|j| *j.value())
}

/// `S⁻¹ Mᴴ S` for jet-valued `M` of a real variable.
fn adjoint_jet(form: &FiberForm, m: &Mat<CJet>) -> Mat<CJet> {
    let s = const_mat(form.matrix());
    let s_inv = const_mat(
        &form
            .matrix()
            .inverse()
            .unwrap_or_else(|_| Mat::identity(form.k())),
    );
    &(&s_inv * &m.adjoint_h()) * &s
}

/// Recursion state along the ray from `x′` to `x`.
pub struct RayExpansion<'a> {
    m: &'a MetricField,
    gauge: &'a GaugeFields,
    x: Vec<f64>,
    n_max: usize,
    extra: usize,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    seed: Mat<Complex64>,
    key_stop: BTreeMap<Vec<u16>, usize>,
    geo: Vec<NodeGeometry>,
    memo: BTreeMap<(usize, Vec<u16>), Mat<CJet>>,
    root_e: Vec<Jet<f64>>,
    g_prime: Mat<f64>,
    w0: Vec<f64>,
    solution: GeodesicSolution,
    conjugate: Option<ConjugateReport>,
}

impl<'a> RayExpansion<'a> {
    /// Prepares the recursion for `g_n(x, x′)`, `n ≤ n_max`, with `extra`
    /// orders of derivatives in `x` available at the root.
    pub fn new(
        m: &'a MetricField,
        gauge: &'a GaugeFields,
        x: &[f64],
        xp: &[f64],
        n_max: usize,
        extra: usize,
        opts: &HadamardOptions,
    ) -> Result<Self> {
        Self::with_guess(m, gauge, x, xp, None, n_max, extra, opts)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_guess(
        m: &'a MetricField,
        gauge: &'a GaugeFields,
        x: &[f64],
        xp: &[f64],
        v_guess: Option<&[f64]>,
        n_max: usize,
        extra: usize,
        opts: &HadamardOptions,
    ) -> Result<Self> {
        let d = m.dim();
        if gauge.dim() != d {
            return Err(Error::Invalid(
                "gauge fields and metric disagree on dimension".into(),
            ));
        }
        let q = opts.quad_nodes.max(1);
        let cost = quadrature_cost(q, n_max);
        if cost > opts.cost_guard {
            return Err(Error::CostGuard {
                needed: cost,
                limit: opts.cost_guard,
            });
        }
        let solution = shoot_bvp(m, xp, x, v_guess, &opts.bvp())?;
        let conjugate = if opts.check_conjugate {
            let r = check_conjugate_free(m, &solution, opts.conjugate_tol)?;
            if !r.pass {
                return Err(Error::ConjugatePoint {
                    det: r.min_normalized,
                });
            }
            Some(r)
        } else {
            None
        };
        let (nodes, weights) = gauss_legendre(q);
        let mut keys: Vec<Vec<u16>> = vec![Vec::new()];
        let mut frontier: Vec<Vec<u16>> = vec![Vec::new()];
        for _ in 0..n_max {
            let mut next = Vec::new();
            for k in &frontier {
                let lo = k.last().copied().unwrap_or(0);
                for j in lo..q as u16 {
                    let mut nk = k.clone();
                    nk.push(j);
                    next.push(nk);
                }
            }
            keys.extend(next.iter().cloned());
            frontier = next;
        }
        let t_of = |k: &[u16]| k.iter().fold(1.0, |acc, &j| acc * nodes[j as usize]);
        let mut stops: Vec<f64> = keys.iter().map(|k| t_of(k)).collect();
        stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
        stops.dedup();
        let key_stop = keys
            .into_iter()
            .map(|k| {
                let t = t_of(&k);
                let i = stops
                    .binary_search_by(|s| s.partial_cmp(&t).unwrap())
                    .unwrap();
                (k, i)
            })
            .collect();

        let order = 2 * n_max + 1 + extra;
        let lay = Layout::new(d, order);
        let w0 = solution.v0.clone();
        let g_prime = m.metric_at(xp)?.g;
        let x0: Vec<Jet<f64>> = xp.iter().map(|&v| Jet::constant_in(&lay, v)).collect();
        let v: Vec<Jet<f64>> = Jet::lift(&lay, &w0);
        let p0 = complexless_mul(&g_prime, &v);
        let mesh = graded_mesh(&stops, opts.steps, opts.mesh_rel());
        let traj = integrate_on_mesh(m, &x0, &p0, &mesh, &stops, false, Some(gauge))?;
        let hs = traj.h.unwrap();
        let det_gp = g_prime.det();
        let mut geo = Vec::with_capacity(stops.len());
        let mut root_e = Vec::new();
        for (i, &t) in stops.iter().enumerate() {
            let e: Vec<Jet<f64>> = traj.x[i].iter().map(|j| j.scale_vars(1.0 / t)).collect();
            let h = hs[i].scale_vars(1.0 / t);
            geo.push(node_geometry(m, gauge, &e, &h, det_gp)?);
            if i + 1 == stops.len() {
                root_e = e;
            }
        }
        Ok(RayExpansion {
            m,
            gauge,
            x: x.to_vec(),
            n_max,
            extra,
            order,
            nodes,
            weights,
            seed: Mat::identity(gauge.k()),
            key_stop,
            geo,
            memo: BTreeMap::new(),
            root_e,
            g_prime,
            w0,
            solution,
            conjugate,
        })
    }

    /// Starts the recursion from the constant matrix `c` instead of `I`.
    pub fn set_seed(&mut self, c: Mat<Complex64>) {
        self.seed = c;
        self.memo.clear();
    }

    pub fn solution(&self) -> &GeodesicSolution {
        &self.solution
    }

    pub fn conjugate_report(&self) -> Option<&ConjugateReport> {
        self.conjugate.as_ref()
    }

    pub fn quadrature_points(&self) -> usize {
        self.key_stop.len() - 1
    }

    pub fn jet_order(&self) -> usize {
        self.order
    }

    fn node(&self, key: &[u16]) -> &NodeGeometry {
        &self.geo[self.key_stop[key]]
    }

    /// `J(ĝ_{m−1})` at the point of `key`, as a jet of the given order.
    fn k_term(&mut self, m: usize, key: &[u16], order: usize) -> Result<Mat<CJet>> {
        if let Some(v) = self.memo.get(&(m, key.to_vec())) {
            if v.data[0].order() >= order {
                return Ok(v.truncate(order));
            }
        }
        let prev = self.g_hat(m - 1, key, order + 2)?;
        let node = self.node(key);
        let u = &node.dh * &prev;
        let out = (&node.dh_inv * &node.chart.apply(&u)).truncate(order);
        if out.data[0].order() < order {
            return Err(Error::Invalid(
                "jet order exhausted in the recursion".into(),
            ));
        }
        self.memo.insert((m, key.to_vec()), out.clone());
        Ok(out)
    }

    /// `g_m` around the point of `key`, in the normal-coordinate jet variables.
    fn g_hat(&mut self, m: usize, key: &[u16], order: usize) -> Result<Mat<CJet>> {
        if m == 0 {
            return Ok(const_mat(&self.seed));
        }
        let k = self.seed.rows;
        let mut acc: Mat<CJet> = Mat::zeros(k, k);
        for j in 0..self.nodes.len() {
            let mut sub = key.to_vec();
            let pos = sub.partition_point(|&v| v <= j as u16);
            sub.insert(pos, j as u16);
            let t = self.nodes[j];
            let w = self.weights[j] * fm::powi(t, m as i32 - 1);
            let term = self.k_term(m, &sub, order)?.scale_vars(t).scale(w);
            acc = &acc + &term;
        }
        Ok(acc)
    }

    /// `g_n(x, x′)` as a normal-coordinate jet of the given order at `x`.
    pub fn g_jet(&mut self, n: usize, order: usize) -> Result<Mat<CJet>> {
        if n > self.n_max || order > self.extra {
            return Err(Error::Invalid(
                "coefficient or derivative order beyond the prepared range".into(),
            ));
        }
        self.g_hat(n, &[], order)
    }

    /// `Δ^{1/2}(x, x′) H(x, x′)` as a normal-coordinate jet at `x`.
    pub fn dh_jet(&self) -> &Mat<CJet> {
        &self.node(&[]).dh
    }

    pub fn g_values(&mut self) -> Result<Vec<Mat<Complex64>>> {
        (0..=self.n_max)
            .map(|n| self.g_jet(n, 0).map(|m| values(&m)))
            .collect()
    }

    pub fn f_values(&mut self) -> Result<Vec<Mat<Complex64>>> {
        let dh = values(self.dh_jet());
        Ok(self.g_values()?.iter().map(|g| &dh * g).collect())
    }

    /// Normal coordinates `w₀ + η(ε)` of `x + ε` as jets in `layout`, whose
    /// first `d` variables are the chart perturbation `ε`.
    pub fn normal_coordinates(&self, layout: &Arc<Layout>) -> Result<Vec<Jet<f64>>> {
        let d = self.m.dim();
        let base: Vec<f64> = self.root_e.iter().map(|j| *j.value()).collect();
        let m0 = Mat::from_fn(d, d, |mu, a| *self.root_e[mu].derivative(a).value());
        let m0_inv = m0.inverse()?;
        let eps: Vec<Jet<f64>> = (0..d).map(|mu| Jet::variable(layout, 0.0, mu)).collect();
        let mut eta: Vec<Jet<f64>> = (0..d)
            .map(|a| {
                let mut acc = Jet::constant_in(layout, 0.0);
                for mu in 0..d {
                    acc = acc + &eps[mu].scale(m0_inv[(a, mu)]);
                }
                acc
            })
            .collect();
        for _ in 0..layout.order() {
            let resid: Vec<Jet<f64>> = (0..d)
                .map(|mu| {
                    let mut r = eps[mu].clone() - &self.root_e[mu].compose(&eta);
                    r = r + &Jet::constant(base[mu]);
                    r
                })
                .collect();
            eta = (0..d)
                .map(|a| {
                    let mut acc = eta[a].clone();
                    for mu in 0..d {
                        acc = acc + &resid[mu].scale(m0_inv[(a, mu)]);
                    }
                    acc.nilpotent()
                })
                .collect();
        }
        Ok(eta)
    }

    /// Re-expands a normal-coordinate jet at the root in the chart
    /// perturbation variables given by [`Self::normal_coordinates`].
    pub fn to_chart(jet: &Mat<CJet>, eta: &[Jet<f64>]) -> Mat<CJet> {
        let ec: Vec<CJet> = eta.iter().map(|j| j.to_complex()).collect();
        jet.map(|j| j.compose(&ec))
    }

    /// `σ(x + ε, x′)` from the normal coordinates.
    pub fn sigma_chart(&self, eta: &[Jet<f64>]) -> Jet<f64> {
        let d = eta.len();
        let w: Vec<Jet<f64>> = (0..d)
            .map(|a| eta[a].clone() + &Jet::constant(self.w0[a]))
            .collect();
        let gw = complexless_mul(&self.g_prime, &w);
        let mut s = Jet::constant(0.0);
        for a in 0..d {
            s.mul_acc(&w[a], &gw[a]);
        }
        s.scale(0.5)
    }

    /// Chart-coordinate ingredients at `x` in `layout`.
    pub fn point_jets(&mut self, layout: &Arc<Layout>, n_top: usize) -> Result<PointJets> {
        let r = layout.order();
        let eta = self.normal_coordinates(layout)?;
        let dh = Self::to_chart(self.dh_jet(), &eta);
        let mut g = Vec::with_capacity(n_top + 1);
        for n in 0..=n_top {
            g.push(Self::to_chart(&self.g_jet(n, r)?, &eta));
        }
        let xj: Vec<Jet<f64>> = (0..self.m.dim())
            .map(|mu| Jet::variable(layout, self.x[mu], mu))
            .collect();
        let chart = ChartGeometry::at_point(self.m, self.gauge, &xj)?;
        let ginv = complexify(&self.m.metric_at(&xj)?.ginv);
        Ok(PointJets {
            d: self.m.dim(),
            sigma: self.sigma_chart(&eta).to_complex(),
            dh,
            g,
            chart,
            ginv,
        })
    }

    /// `‖σ_{,μ} g_n^{,μ} + n g_n − J(g_{n−1})‖_F` at `x`, evaluated in the
    /// chart of the metric.
    pub fn pde_residual(&mut self, n: usize) -> Result<f64> {
        Ok(self.pde_term(n)?.frobenius())
    }

    fn pde_term(&mut self, n: usize) -> Result<Mat<Complex64>> {
        let lay = Layout::new(self.m.dim(), 2);
        let pj = self.point_jets(&lay, n)?;
        Ok(pj.transport_defect(n))
    }

    /// Raw λ-coefficients of `P(F^SD)`: the `λⁿ` coefficient is
    /// `iⁿ Δ^{1/2}H (σ_{,μ}g_n^{,μ} + n g_n − J(g_{n−1}))`.
    pub fn p_series(&mut self) -> Result<LambdaPolynomial> {
        let lay = Layout::new(self.m.dim(), 2);
        let pj = self.point_jets(&lay, self.n_max)?;
        let dh = values(&pj.dh);
        let coeffs = (0..=self.n_max)
            .map(|n| (&dh * &pj.transport_defect(n)).scale_by(&i_pow(n)))
            .collect();
        Ok(LambdaPolynomial { coeffs })
    }

    /// `KG(Δ^{1/2}H)` at `x`, applied to the first argument.
    pub fn kg_of_transport(&self) -> Mat<Complex64> {
        let node = self.node(&[]);
        values(&node.chart.apply(&node.dh))
    }
}

fn i_pow(n: usize) -> Complex64 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][n % 4]
}

fn complexless_mul(g: &Mat<f64>, v: &[Jet<f64>]) -> Vec<Jet<f64>> {
    (0..g.rows)
        .map(|i| {
            let mut acc = Jet::constant(0.0);
            for j in 0..g.cols {
                acc = acc + &v[j].scale(g[(i, j)]);
            }
            acc
        })
        .collect()
}

fn node_geometry(
    m: &MetricField,
    gauge: &GaugeFields,
    e: &[Jet<f64>],
    h: &Mat<CJet>,
    det_gp: f64,
) -> Result<NodeGeometry> {
    let d = m.dim();
    let jac = Mat::from_fn(d, d, |mu, a| e[mu].derivative(a));
    let at = m.metric_at(e)?;
    let g = &(&jac.transpose() * &at.g) * &jac;
    let a_x = gauge.eval_a(e)?;
    let jac_c = complexify(&jac);
    let k = gauge.k();
    let a_w: Vec<Mat<CJet>> = (0..d)
        .map(|a| {
            let mut acc: Mat<CJet> = Mat::zeros(k, k);
            for mu in 0..d {
                acc = &acc + &a_x[mu].scale_by(&jac_c[(mu, a)]);
            }
            acc
        })
        .collect();
    let b = gauge.eval_b(e)?;
    let chart = ChartGeometry::from_metric_jets(&g, &a_w, &b)?;
    let abs_det = if at.det.value() < &0.0 {
        -at.det.clone()
    } else {
        at.det.clone()
    };
    let delta = (jac.det() * abs_det.sqrt())
        .recip()
        .scale(det_gp.signum() * fm::sqrt(fm::abs(det_gp)));
    let sign = if *delta.value() < 0.0 { -1 } else { 1 };
    let expected = expected_sign(m);
    if sign != expected {
        return Err(Error::VanVleckSign {
            expected,
            found: sign,
        });
    }
    let root = delta_sqrt_generic(&delta).to_complex();
    let dh = h.scale_by(&root);
    let dh_inv = h.inverse()?.scale_by(&root.recip());
    Ok(NodeGeometry { chart, dh, dh_inv })
}

/// Chart-coordinate jets at a point `x` for a fixed source `x′`.
pub struct PointJets {
    d: usize,
    /// `σ(·, x′)`.
    pub sigma: CJet,
    /// `Δ^{1/2} H(·, x′)`.
    pub dh: Mat<CJet>,
    /// `g_n(·, x′)`.
    pub g: Vec<Mat<CJet>>,
    pub chart: ChartGeometry,
    ginv: Mat<CJet>,
}

impl PointJets {
    fn gradient_dot(&self, u: &Mat<CJet>) -> Mat<CJet> {
        let mut out: Mat<CJet> = Mat::zeros(u.rows, u.cols);
        for nu in 0..self.d {
            let mut w = CJet::zero();
            for mu in 0..self.d {
                w = w + &(self.ginv[(mu, nu)].clone() * &self.sigma.derivative(mu));
            }
            out = &out + &u.derivative(nu).scale_by(&w);
        }
        out
    }

    /// `J(g) = (Δ^{1/2}H)⁻¹ KG(Δ^{1/2}H g)`.
    pub fn j_operator(&self, g: &Mat<CJet>) -> Result<Mat<CJet>> {
        let u = &self.dh * g;
        Ok(&self.dh.inverse()? * &self.chart.apply(&u))
    }

    /// `σ_{,μ} g_n^{,μ} + n g_n − J(g_{n−1})` (or `σ_{,μ} g_0^{,μ}` for `n = 0`).
    pub fn transport_defect(&self, n: usize) -> Mat<Complex64> {
        let mut r = &values(&self.gradient_dot(&self.g[n])) + &values(&self.g[n]).scale(n as f64);
        if n > 0 {
            let j = self
                .j_operator(&self.g[n - 1])
                .expect("transport factor is invertible");
            r = &r - &values(&j);
        }
        r
    }
}

/// Coefficients at a point pair with diagnostics.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    pub n_max: usize,
    pub g: Vec<Mat<Complex64>>,
    pub f: Vec<Mat<Complex64>>,
    pub sigma: f64,
    pub delta_sqrt: f64,
    pub quad_nodes: usize,
    pub quadrature_points: usize,
    pub conjugate: Option<ConjugateReport>,
}

pub fn seeley_dewitt(
    m: &MetricField,
    gauge: &GaugeFields,
    x: &[f64],
    xp: &[f64],
    n_max: usize,
    opts: &HadamardOptions,
) -> Result<CoefficientTable> {
    seeley_dewitt_with_guess(m, gauge, x, xp, None, n_max, opts)
}

pub fn seeley_dewitt_with_guess(
    m: &MetricField,
    gauge: &GaugeFields,
    x: &[f64],
    xp: &[f64],
    v_guess: Option<&[f64]>,
    n_max: usize,
    opts: &HadamardOptions,
) -> Result<CoefficientTable> {
    let mut ray = RayExpansion::with_guess(m, gauge, x, xp, v_guess, n_max, 0, opts)?;
    let g = ray.g_values()?;
    let f = ray.f_values()?;
    let sol = ray.solution();
    let wf = crate::synge::world_function(sol)?;
    let vv = crate::synge::van_vleck(m, &wf, x, xp)?;
    Ok(CoefficientTable {
        x: x.to_vec(),
        xp: xp.to_vec(),
        n_max,
        g,
        f,
        sigma: wf.sigma,
        delta_sqrt: vv.delta_sqrt,
        quad_nodes: opts.quad_nodes,
        quadrature_points: ray.quadrature_points(),
        conjugate: ray.conjugate_report().cloned(),
    })
}

/// `‖f_n(x,x′) − f_n(x′,x)†‖_F / max(1, ‖f_n(x,x′)‖_F)` for `n ≤ n_max`.
pub fn symmetry_residual(
    m: &MetricField,
    gauge: &GaugeFields,
    form: &FiberForm,
    x: &[f64],
    xp: &[f64],
    n_max: usize,
    opts: &HadamardOptions,
) -> Result<Vec<f64>> {
    let fwd = seeley_dewitt(m, gauge, x, xp, n_max, opts)?;
    let rev = seeley_dewitt(m, gauge, xp, x, n_max, opts)?;
    Ok(fwd
        .f
        .iter()
        .zip(&rev.f)
        .map(|(a, b)| (a - &form.adjoint(b)).frobenius() / a.frobenius().max(1.0))
        .collect())
}

/// Hadamard PDE residual for `g_n` at `(x, x′)`.
pub fn hadamard_pde_residual(
    m: &MetricField,
    gauge: &GaugeFields,
    x: &[f64],
    xp: &[f64],
    n: usize,
    opts: &HadamardOptions,
) -> Result<f64> {
    let mut ray = RayExpansion::new(m, gauge, x, xp, n, 2, opts)?;
    ray.pde_residual(n)
}

/// Truncated `F(λ) = Σ c_n λⁿ` with raw coefficients `c_n = iⁿ f_n`.
#[derive(Debug, Clone)]
pub struct LambdaPolynomial {
    pub coeffs: Vec<Mat<Complex64>>,
}

impl LambdaPolynomial {
    pub fn from_f(f: &[Mat<Complex64>]) -> Self {
        LambdaPolynomial {
            coeffs: f
                .iter()
                .enumerate()
                .map(|(n, m)| m.scale_by(&i_pow(n)))
                .collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// `f_n = c_n / iⁿ`.
    pub fn f(&self, n: usize) -> Mat<Complex64> {
        self.coeffs[n].scale_by(&i_pow(n).conj())
    }

    pub fn eval(&self, lambda: f64) -> Mat<Complex64> {
        let k = self.coeffs[0].rows;
        let mut acc: Mat<Complex64> = Mat::zeros(k, k);
        for c in self.coeffs.iter().rev() {
            acc = &acc.scale(lambda) + c;
        }
        acc
    }

    /// `F^*(x, x′, λ) = F(x′, x, −λ)†` given the polynomial at the swapped
    /// pair: `c_n^* = (−1)ⁿ c_n(x′, x)†`.
    pub fn star(swapped: &LambdaPolynomial, form: &FiberForm) -> LambdaPolynomial {
        LambdaPolynomial {
            coeffs: swapped
                .coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| form.adjoint(c).scale(if n % 2 == 0 { 1.0 } else { -1.0 }))
                .collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.frobenius())
            .fold(0.0, f64::max)
    }
}

/// Both sides of
/// `P(F) = −iλ|λ|^{d/2} e^{−iσ/2λ} [KG + i∂_λ](F |λ|^{−d/2} e^{iσ/2λ})`
/// at `x`, for `F` given by chart jets of its raw λ-coefficients in a layout
/// with `d + 1` variables (the last one is λ). Returns `‖LHS − RHS‖_F`.
pub fn spectral_identity_check(pj: &PointJets, f: &[Mat<CJet>], lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::Invalid("the identity needs a nonzero λ".into()));
    }
    let d = pj.d;
    let lay = pj
        .sigma
        .layout()
        .cloned()
        .ok_or_else(|| Error::Invalid("point jets carry no layout".into()))?;
    if lay.dim() != d + 1 || lay.order() < 2 {
        return Err(Error::Invalid(
            "the identity needs order-2 jets in (x, λ)".into(),
        ));
    }
    let k = pj.dh.rows;
    let lam = Jet::variable(&lay, lambda, d);
    let lam_c = lam.to_complex();
    // F(x, λ) as a jet in (x, λ)
    let mut big_f: Mat<CJet> = Mat::zeros(k, k);
    for c in f.iter().rev() {
        big_f = &big_f.scale_by(&lam_c) + c;
    }
    let dh_inv = pj.dh.inverse()?;
    let big_g = &dh_inv * &big_f;
    let kg_f = pj.chart.apply(&big_f);
    let i = Complex64::new(0.0, 1.0);
    let lhs = &(&(&pj.dh * &pj.gradient_dot(&big_g))
        + &(&pj.dh * &big_g.derivative(d)).scale_by(&lam_c))
        - &kg_f.scale_by(&(lam_c.clone() * &CJet::constant(i)));
    let abs_lam = if lambda < 0.0 {
        -lam.clone()
    } else {
        lam.clone()
    };
    let half_d = d as f64 / 2.0;
    let phase = (pj.sigma.clone() * &(lam_c.recip().scale(0.5)) * &CJet::constant(i)).exp();
    let weight = abs_lam.powf(-half_d).to_complex() * &phase;
    let phi = big_f.scale_by(&weight);
    let inner = &pj.chart.apply(&phi) + &phi.derivative(d).scale_by(&CJet::constant(i));
    let pre =
        (lam_c.clone() * &CJet::constant(-i)) * &abs_lam.powf(half_d).to_complex() * &phase.recip();
    let rhs = inner.scale_by(&pre);
    Ok((&values(&lhs) - &values(&rhs)).frobenius())
}

/// Ingredients for the spectral identity check at `(x, x′)`: chart jets in `(x, λ)`
/// and the raw λ-coefficients of the degree-`deg` truncation of `F^SD`.
pub fn spectral_inputs(
    ray: &mut RayExpansion<'_>,
    deg: usize,
) -> Result<(PointJets, Vec<Mat<CJet>>)> {
    let d = ray.m.dim();
    let lay = Layout::new(d + 1, 2);
    let pj = ray.point_jets(&lay, deg)?;
    let f = (0..=deg)
        .map(|n| (&pj.dh * &pj.g[n]).scale_by(&CJet::constant(i_pow(n))))
        .collect();
    Ok((pj, f))
}

/// `‖M − M†‖_F` for `M = ⌊KG(Δ^{1/2}H)⌋(x′)`, extrapolated from `levels`
/// separations `ρ₀, ρ₀/2, …` along the unit direction `dir` (in `g(x′)` norm).
#[allow(clippy::too_many_arguments)]
pub fn coincidence_check(
    m: &MetricField,
    gauge: &GaugeFields,
    form: &FiberForm,
    xp: &[f64],
    dir: &[f64],
    rho0: f64,
    levels: usize,
    opts: &HadamardOptions,
) -> Result<(f64, Mat<Complex64>)> {
    if levels == 0 {
        return Err(Error::Invalid(
            "extrapolation needs at least one separation".into(),
        ));
    }
    let mut ms = Vec::with_capacity(levels);
    let mut o = *opts;
    o.check_conjugate = false;
    for k in 0..levels {
        let rho = rho0 / fm::powi(2.0, k as i32);
        let v: Vec<f64> = dir.iter().map(|u| u * rho).collect();
        let sol = crate::geodesic::integrate_flow(m, xp, &v, opts.steps)?;
        let x = sol.x_end_numeric();
        let ray = RayExpansion::with_guess(m, gauge, &x, xp, Some(&v), 0, 2, &o)?;
        ms.push(ray.kg_of_transport());
    }
    let (rows, cols) = (ms[0].rows, ms[0].cols);
    let data = (0..rows * cols)
        .map(|i| richardson_halving(&ms.iter().map(|a| a.data[i]).collect::<Vec<_>>()))
        .collect();
    let mm = Mat::from_vec(rows, cols, data);
    Ok(((&mm - &form.adjoint(&mm)).frobenius(), mm))
}

/// `Δ^{1/2} H(y, y′)` and `σ_{;μ}(y, y′)` as jets in `y` from a boundary value
/// solve with the endpoint lifted.
fn lifted_target(
    m: &MetricField,
    gauge: &GaugeFields,
    y: &[f64],
    yp: &[f64],
    order: usize,
    opts: &HadamardOptions,
) -> Result<(Mat<CJet>, Vec<Jet<f64>>)> {
    let lay = Layout::new(m.dim(), order);
    let yj = Jet::lift(&lay, y);
    let ypj: Vec<Jet<f64>> = yp.iter().map(|&v| Jet::constant_in(&lay, v)).collect();
    let lg = shoot_bvp_lifted(m, &ypj, &yj, None, &opts.bvp(), order, Some(gauge))?;
    let wf = world_function_lifted(&lg)?;
    let delta = delta_generic(m, &wf.mixed, &yj, &ypj)?;
    let dh =
        lg.h.unwrap()
            .scale_by(&delta_sqrt_generic(&delta).to_complex());
    Ok((dh, wf.grad_x))
}

/// `f_0(y′, y) = Δ^{1/2} H(y′, y)` as jets in its second argument `y`.
fn lifted_source(
    m: &MetricField,
    gauge: &GaugeFields,
    y: &[f64],
    yp: &[f64],
    order: usize,
    opts: &HadamardOptions,
) -> Result<Mat<CJet>> {
    let lay = Layout::new(m.dim(), order);
    let yj = Jet::lift(&lay, y);
    let ypj: Vec<Jet<f64>> = yp.iter().map(|&v| Jet::constant_in(&lay, v)).collect();
    let lg = shoot_bvp_lifted(m, &yj, &ypj, None, &opts.bvp(), order, Some(gauge))?;
    let wf = world_function_lifted(&lg)?;
    let delta = delta_generic(m, &wf.mixed, &ypj, &yj)?;
    Ok(lg
        .h
        .unwrap()
        .scale_by(&delta_sqrt_generic(&delta).to_complex()))
}

/// Order-0 coefficient of `P′(F^SD)` at `(x, x′)`:
/// `P′(F) = P(F^*)^*`, whose `λ⁰` term at `(x, x′)` is `Q(x′, x)†` with
/// `Q(y, y′) = Δ^{1/2}H σ_{,μ} g^{μν} ∂_ν[(Δ^{1/2}H)⁻¹ f_0(y′, y)†]`.
pub fn p_prime_order0(
    m: &MetricField,
    gauge: &GaugeFields,
    form: &FiberForm,
    x: &[f64],
    xp: &[f64],
    opts: &HadamardOptions,
) -> Result<Mat<Complex64>> {
    let (y, yp) = (xp, x);
    let d = m.dim();
    let (dh, grad) = lifted_target(m, gauge, y, yp, 1, opts)?;
    let f0_swapped = lifted_source(m, gauge, y, yp, 1, opts)?;
    let bracket = &dh.inverse()? * &adjoint_jet(form, &f0_swapped);
    let ginv = m.metric_at(y)?.ginv;
    let k = gauge.k();
    let mut acc: Mat<Complex64> = Mat::zeros(k, k);
    for nu in 0..d {
        let mut w = 0.0;
        for mu in 0..d {
            w += *grad[mu].value() * ginv[(mu, nu)];
        }
        acc = &acc + &values(&bracket.derivative(nu)).scale(w);
    }
    let q = &values(&dh) * &acc;
    Ok(form.adjoint(&q))
}

/// `J(g)(x, x′)` computed directly: the endpoint is jet-lifted through the
/// boundary value problem, with no use of the ray expansion.
pub fn j_operator<F>(
    m: &MetricField,
    gauge: &GaugeFields,
    x: &[f64],
    xp: &[f64],
    g_eval: F,
    opts: &HadamardOptions,
) -> Result<Mat<Complex64>>
where
    F: Fn(&[Jet<f64>]) -> Result<Mat<CJet>>,
{
    let lay = Layout::new(m.dim(), 2);
    let (dh, _) = lifted_target(m, gauge, x, xp, 2, opts)?;
    let xj = Jet::lift(&lay, x);
    let chart = ChartGeometry::at_point(m, gauge, &xj)?;
    let u = &dh * &g_eval(&xj)?;
    Ok(values(&(&dh.inverse()? * &chart.apply(&u))))
}

/// Defect `σ^{,μ}(Δ^{1/2})_{,μ} − (d/2 − ½□σ)Δ^{1/2}` at `x` from an
/// order-2 lift of the endpoint.
pub fn delta_transport_defect(
    m: &MetricField,
    x: &[f64],
    xp: &[f64],
    opts: &HadamardOptions,
) -> Result<f64> {
    let d = m.dim();
    let lay = Layout::new(d, 2);
    let xj = Jet::lift(&lay, x);
    let xpj: Vec<Jet<f64>> = xp.iter().map(|&v| Jet::constant_in(&lay, v)).collect();
    let lg = shoot_bvp_lifted::<Jet<f64>>(m, &xpj, &xj, None, &opts.bvp(), 2, None)?;
    let wf = world_function_lifted(&lg)?;
    let root = delta_sqrt_generic(&delta_generic(m, &wf.mixed, &xj, &xpj)?);
    let ginv = m.metric_at(x)?.ginv;
    let gamma = m.christoffel(x)?;
    let ds: Vec<f64> = (0..d).map(|mu| *wf.sigma.derivative(mu).value()).collect();
    let mut lhs = 0.0;
    let mut box_sigma = 0.0;
    for mu in 0..d {
        for nu in 0..d {
            lhs += ds[mu] * ginv[(mu, nu)] * root.derivative(nu).value();
            let mut h = *wf.sigma.derivative(mu).derivative(nu).value();
            for l in 0..d {
                h -= gamma.get(l, mu, nu) * ds[l];
            }
            box_sigma += ginv[(mu, nu)] * h;
        }
    }
    let rhs = (d as f64 / 2.0 - 0.5 * box_sigma) * root.value();
    Ok(fm::abs(lhs - rhs))
}

/// Largest disagreement between chart derivatives of `f_n` from jets and
/// from Richardson-extrapolated central differences of `f_n` values.
pub fn fd_crosscheck(
    m: &MetricField,
    gauge: &GaugeFields,
    x: &[f64],
    xp: &[f64],
    n: usize,
    opts: &HadamardOptions,
) -> Result<f64> {
    let d = m.dim();
    let mut o = *opts;
    o.check_conjugate = false;
    let mut ray = RayExpansion::new(m, gauge, x, xp, n, 1, &o)?;
    let lay = Layout::new(d, 1);
    let eta = ray.normal_coordinates(&lay)?;
    let gj = ray.g_jet(n, 1)?;
    let fj = RayExpansion::to_chart(&(ray.dh_jet() * &gj), &eta);
    let v0 = ray.solution().v0.clone();
    let scale = x.iter().fold(1.0f64, |a, v| a.max(fm::abs(*v)));
    let h = 1e-4 * scale;
    let mut worst = 0.0f64;
    let k = gauge.k();
    for mu in 0..d {
        let eval = |t: f64, idx: usize| -> f64 {
            let mut xs = x.to_vec();
            xs[mu] += t;
            let f = RayExpansion::with_guess(m, gauge, &xs, xp, Some(&v0), n, 0, &o)
                .and_then(|mut r| r.f_values())
                .map(|f| f[n].data[idx / 2])
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
            if idx % 2 == 0 {
                f.re
            } else {
                f.im
            }
        };
        for idx in 0..2 * k * k {
            let fd = central_diff(|t| eval(t, idx), 0.0, h);
            let jd = *fj.data[idx / 2].derivative(mu).value();
            let jd = if idx % 2 == 0 { jd.re } else { jd.im };
            worst = worst.max(fm::abs(fd - jd));
        }
    }
    Ok(worst)
}
