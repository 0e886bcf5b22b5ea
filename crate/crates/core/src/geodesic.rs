//! Hamiltonian geodesic flow, its variational (Jacobi) propagator, parallel
//! transport along the flow, the shooting boundary value solver and the
//! conjugate-point diagnostic.
//!
//! The flow is `ẋ^μ = g^{μν} p_ν`, `ṗ_μ = −½ ∂_μ g^{αβ} p_α p_β` on
//! `s ∈ [0, 1]`, integrated with fixed-step RK4. The propagator
//! `Φ(s) = ∂(x(s), p(s)) / ∂(x(0), p(0))` is integrated with the same tableau.

use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::GaugeFields;
use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::linalg::Mat;
use crate::scalar::{fm, Real, Scalar};

/// Numeric geodesic on the uniform grid `s_i = i / steps`.
#[derive(Debug, Clone)]
pub struct GeodesicSolution {
    pub x_start: Vec<f64>,
    /// Requested endpoint (for a shooting solution) or the computed `γ(1)`.
    pub x_end: Vec<f64>,
    pub v0: Vec<f64>,
    pub steps: usize,
    pub s: Vec<f64>,
    /// `(γ(s_i), p(s_i))`.
    pub nodes: Vec<(Vec<f64>, Vec<f64>)>,
    /// `Φ(s_i)`, each `2d × 2d` in (position, momentum) blocks.
    pub propagator: Vec<Mat<f64>>,
}

impl GeodesicSolution {
    pub fn dim(&self) -> usize {
        self.x_start.len()
    }

    pub fn p_start(&self) -> Vec<f64> {
        self.nodes[0].1.clone()
    }

    pub fn p_end(&self) -> Vec<f64> {
        self.nodes.last().unwrap().1.clone()
    }

    /// Computed `γ(1)`.
    pub fn x_end_numeric(&self) -> Vec<f64> {
        self.nodes.last().unwrap().0.clone()
    }

    /// `½ g(v0, v0)`.
    pub fn sigma(&self) -> f64 {
        0.5 * self.nodes[0]
            .1
            .iter()
            .zip(&self.v0)
            .map(|(p, v)| p * v)
            .sum::<f64>()
    }

    /// Geodesic length `√|g(v0, v0)|`.
    pub fn arc_length(&self) -> f64 {
        fm::sqrt(fm::abs(2.0 * self.sigma()))
    }

    /// `½ g^{μν}(γ(s_i)) p_μ p_ν` at every node.
    pub fn hamiltonian(&self, m: &MetricField) -> Result<Vec<f64>> {
        self.nodes
            .iter()
            .map(|(x, p)| {
                let ginv = m.metric_at(x)?.ginv;
                let gp = ginv.mul_vec(p);
                Ok(0.5 * p.iter().zip(&gp).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect()
    }
}

/// Output of [`integrate_generic`] at the requested stop times.
#[derive(Debug, Clone)]
pub struct Trajectory<S: Real> {
    pub stops: Vec<f64>,
    pub x: Vec<Vec<S>>,
    pub p: Vec<Vec<S>>,
    pub phi: Option<Vec<Mat<S>>>,
    pub h: Option<Vec<Mat<S::Complex>>>,
}

#[derive(Clone)]
struct State<S: Real> {
    x: Vec<S>,
    p: Vec<S>,
    phi: Option<Mat<S>>,
    h: Option<Mat<S::Complex>>,
}

fn axpy_vec<T: Scalar>(y: &[T], a: f64, k: &[T]) -> Vec<T> {
    y.iter()
        .zip(k)
        .map(|(u, v)| u.clone() + &v.scale(a))
        .collect()
}

fn axpy_mat<T: Scalar>(y: &Mat<T>, a: f64, k: &Mat<T>) -> Mat<T> {
    Mat {
        rows: y.rows,
        cols: y.cols,
        data: axpy_vec(&y.data, a, &k.data),
    }
}

impl<S: Real> State<S> {
    fn axpy(&self, a: f64, k: &State<S>) -> State<S> {
        State {
            x: axpy_vec(&self.x, a, &k.x),
            p: axpy_vec(&self.p, a, &k.p),
            phi: self
                .phi
                .as_ref()
                .map(|m| axpy_mat(m, a, k.phi.as_ref().unwrap())),
            h: self
                .h
                .as_ref()
                .map(|m| axpy_mat(m, a, k.h.as_ref().unwrap())),
        }
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.p).all(|v| v.base().is_finite())
    }
}

fn rhs<S: Real>(m: &MetricField, gauge: Option<&GaugeFields>, st: &State<S>) -> Result<State<S>> {
    let d = m.dim();
    let variational = st.phi.is_some();
    let md = m.derivs(&st.x, variational)?;
    let xdot = md.ginv.mul_vec(&st.p);
    // (∂_μ g⁻¹) p for each μ
    let dgp: Vec<Vec<S>> = md.dginv.iter().map(|dm| dm.mul_vec(&st.p)).collect();
    let pdot: Vec<S> = (0..d)
        .map(|mu| {
            let mut acc = S::zero();
            for a in 0..d {
                acc.mul_acc(&st.p[a], &dgp[mu][a]);
            }
            acc.scale(-0.5)
        })
        .collect();
    let phi = if let Some(phi) = &st.phi {
        let dd = md.ddginv.as_ref().unwrap();
        let mut jac = Mat::zeros(2 * d, 2 * d);
        for a in 0..d {
            for mu in 0..d {
                jac[(a, mu)] = dgp[mu][a].clone();
                jac[(a, d + mu)] = md.ginv[(a, mu)].clone();
            }
        }
        for mu in 0..d {
            for nu in 0..d {
                let hp = dd[mu * d + nu].mul_vec(&st.p);
                let mut acc = S::zero();
                for a in 0..d {
                    acc.mul_acc(&st.p[a], &hp[a]);
                }
                jac[(d + mu, nu)] = acc.scale(-0.5);
                jac[(d + mu, d + nu)] = -dgp[mu][nu].clone();
            }
        }
        Some(&jac * phi)
    } else {
        None
    };
    let h = match (&st.h, gauge) {
        (Some(h), Some(gauge)) => {
            let a = gauge.eval_a(&st.x)?;
            let k = gauge.k();
            let mut gen: Mat<S::Complex> = Mat::zeros(k, k);
            for mu in 0..d {
                let v = xdot[mu].to_complex();
                for (g, am) in gen.data.iter_mut().zip(&a[mu].data) {
                    g.mul_acc(&v, am);
                }
            }
            Some(-&(&gen * h))
        }
        _ => None,
    };
    Ok(State {
        x: xdot,
        p: pdot,
        phi,
        h,
    })
}

fn rk4_step<S: Real>(
    m: &MetricField,
    gauge: Option<&GaugeFields>,
    y: &State<S>,
    h: f64,
) -> Result<State<S>> {
    let k1 = rhs(m, gauge, y)?;
    let k2 = rhs(m, gauge, &y.axpy(0.5 * h, &k1))?;
    let k3 = rhs(m, gauge, &y.axpy(0.5 * h, &k2))?;
    let k4 = rhs(m, gauge, &y.axpy(h, &k3))?;
    let out = y
        .axpy(h / 6.0, &k1)
        .axpy(h / 3.0, &k2)
        .axpy(h / 3.0, &k3)
        .axpy(h / 6.0, &k4);
    if !out.is_finite() {
        return Err(Error::NonFinite {
            what: "geodesic flow",
        });
    }
    Ok(out)
}

/// Mesh with `steps` uniform intervals per unit time; each interval between
/// consecutive stops is split into `ceil(Δs · steps)` equal substeps.
pub fn uniform_mesh(stops: &[f64], steps: usize) -> Vec<f64> {
    let mut mesh = vec![0.0];
    let mut prev = 0.0;
    for &t in stops {
        let n = fm::ceil((t - prev) * steps as f64 - 1e-9).max(1.0) as usize;
        for i in 1..=n {
            mesh.push(if i == n {
                t
            } else {
                prev + (t - prev) * i as f64 / n as f64
            });
        }
        prev = t;
    }
    mesh
}

/// Mesh whose step near `s` is `min(1/steps, s/rel)`, so that every stop,
/// however close to 0, is reached with a step small relative to its own
/// distance from the origin. The first `rel` steps are uniform up to the
/// smallest stop.
pub fn graded_mesh(stops: &[f64], steps: usize, rel: usize) -> Vec<f64> {
    let t_min = stops.first().copied().unwrap_or(1.0);
    let h_max = 1.0 / steps as f64;
    let rel = rel.max(1) as f64;
    let mut mesh = vec![0.0];
    let mut s = 0.0;
    let mut next = 0;
    while next < stops.len() {
        let h = if s < t_min {
            t_min / rel
        } else {
            (s / rel).min(h_max)
        };
        let mut t = s + h;
        if t >= stops[next] - 1e-12 * stops[next] {
            t = stops[next];
            next += 1;
        }
        mesh.push(t);
        s = t;
    }
    mesh
}

/// Integrates the flow from `(x0, p0)` over `mesh` (a strictly increasing
/// list starting at 0) and records the state at each time in `stops`,
/// which must all be mesh points.
pub fn integrate_on_mesh<S: Real>(
    m: &MetricField,
    x0: &[S],
    p0: &[S],
    mesh: &[f64],
    stops: &[f64],
    variational: bool,
    gauge: Option<&GaugeFields>,
) -> Result<Trajectory<S>> {
    let d = m.dim();
    if x0.len() != d || p0.len() != d {
        return Err(Error::Invalid("initial data dimension mismatch".into()));
    }
    let mut st = State {
        x: x0.to_vec(),
        p: p0.to_vec(),
        phi: if variational {
            Some(Mat::identity(2 * d))
        } else {
            None
        },
        h: gauge.map(|g| Mat::identity(g.k())),
    };
    let mut out = Trajectory {
        stops: stops.to_vec(),
        x: Vec::with_capacity(stops.len()),
        p: Vec::with_capacity(stops.len()),
        phi: if variational {
            Some(Vec::with_capacity(stops.len()))
        } else {
            None
        },
        h: gauge.map(|_| Vec::with_capacity(stops.len())),
    };
    let record = |st: &State<S>, out: &mut Trajectory<S>| {
        out.x.push(st.x.clone());
        out.p.push(st.p.clone());
        if let Some(v) = out.phi.as_mut() {
            v.push(st.phi.clone().unwrap());
        }
        if let Some(v) = out.h.as_mut() {
            v.push(st.h.clone().unwrap());
        }
    };
    let mut next = 0;
    while next < stops.len() && stops[next] == 0.0 {
        record(&st, &mut out);
        next += 1;
    }
    for w in mesh.windows(2) {
        st = rk4_step(m, gauge, &st, w[1] - w[0])?;
        while next < stops.len() && stops[next] == w[1] {
            record(&st, &mut out);
            next += 1;
        }
    }
    if next != stops.len() {
        return Err(Error::Invalid(
            "stop times must be mesh points in [0, 1]".into(),
        ));
    }
    Ok(out)
}

/// Integrates on the uniform mesh of `steps` intervals with the given stops.
pub fn integrate_generic<S: Real>(
    m: &MetricField,
    x0: &[S],
    p0: &[S],
    steps: usize,
    variational: bool,
    gauge: Option<&GaugeFields>,
    stops: &[f64],
) -> Result<Trajectory<S>> {
    let nonzero: Vec<f64> = stops.iter().copied().filter(|&t| t > 0.0).collect();
    let mesh = uniform_mesh(&nonzero, steps.max(1));
    integrate_on_mesh(m, x0, p0, &mesh, stops, variational, gauge)
}

/// RK4 integration of the geodesic and its propagator from `x0` with initial
/// velocity `v0`, recording every grid node.
pub fn integrate_flow(
    m: &MetricField,
    x0: &[f64],
    v0: &[f64],
    steps: usize,
) -> Result<GeodesicSolution> {
    if steps == 0 {
        return Err(Error::Invalid("steps must be at least 1".into()));
    }
    let g0 = m.metric_at(x0)?.g;
    let p0 = g0.mul_vec(v0);
    let s: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let traj = integrate_generic(m, x0, &p0, steps, true, None, &s)?;
    let nodes = traj.x.into_iter().zip(traj.p).collect::<Vec<_>>();
    Ok(GeodesicSolution {
        x_start: x0.to_vec(),
        x_end: nodes.last().unwrap().0.clone(),
        v0: v0.to_vec(),
        steps,
        s,
        nodes,
        propagator: traj.phi.unwrap(),
    })
}

/// Newton and integration settings for the boundary value problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpOptions {
    pub steps: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions {
            steps: 200,
            tol: 1e-12,
            max_iter: 50,
        }
    }
}

/// `|det J| / ‖J‖_F^d`, a scale-free singularity measure.
fn singularity_ratio(j: &Mat<f64>) -> f64 {
    let norm = fm::powi(j.frobenius(), j.rows as i32);
    if norm == 0.0 {
        return 0.0;
    }
    fm::abs(j.det()) / norm
}

const CONJUGATE_RATIO: f64 = 1e-7;

/// Endpoint map `v ↦ γ(1)` and its Jacobian `∂γ(1)/∂v = Φ_xp(1) g(x_start)`.
fn endpoint<S: Real>(
    m: &MetricField,
    x_start: &[S],
    g0: &Mat<S>,
    v: &[S],
    steps: usize,
) -> Result<(Vec<S>, Mat<S>, Trajectory<S>)> {
    let d = m.dim();
    let p0 = g0.mul_vec(v);
    let traj = integrate_generic(m, x_start, &p0, steps, true, None, &[1.0])?;
    let phi = &traj.phi.as_ref().unwrap()[0];
    let jac = &phi.block(0, d, d, d) * g0;
    Ok((traj.x[0].clone(), jac, traj))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(fm::abs(*x)))
}

/// Numeric shooting: returns the initial velocity connecting the endpoints.
fn shoot_velocity(
    m: &MetricField,
    x_start: &[f64],
    x_end: &[f64],
    v_guess: Option<&[f64]>,
    opts: &BvpOptions,
) -> Result<Vec<f64>> {
    let d = m.dim();
    if x_start.len() != d || x_end.len() != d {
        return Err(Error::Invalid("endpoint dimension mismatch".into()));
    }
    let g0 = m.metric_at(x_start)?.g;
    let mut v: Vec<f64> = match v_guess {
        Some(v) => v.to_vec(),
        None => x_end.iter().zip(x_start).map(|(a, b)| a - b).collect(),
    };
    let residual = |xe: &[f64]| -> Vec<f64> { xe.iter().zip(x_end).map(|(a, b)| a - b).collect() };
    let (mut xe, mut jac, _) = endpoint(m, x_start, &g0, &v, opts.steps)?;
    let mut r = residual(&xe);
    let mut rn = max_abs(&r);
    for _ in 0..opts.max_iter {
        if singularity_ratio(&jac) < CONJUGATE_RATIO {
            return Err(Error::ConjugatePoint { det: jac.det() });
        }
        if rn < opts.tol {
            return Ok(v);
        }
        let rm = Mat::from_vec(d, 1, r.clone());
        let dv = jac
            .solve(&rm)
            .map_err(|_| Error::ConjugatePoint { det: jac.det() })?;
        // Backtracking keeps Newton from jumping out of the chart.
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = v
                .iter()
                .enumerate()
                .map(|(i, vi)| vi - lam * dv.data[i])
                .collect();
            if let Ok((xt, jt, _)) = endpoint(m, x_start, &g0, &trial, opts.steps) {
                let rt = residual(&xt);
                let rtn = max_abs(&rt);
                if rtn < rn || rtn < opts.tol {
                    v = trial;
                    xe = xt;
                    jac = jt;
                    r = rt;
                    rn = rtn;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let _ = xe;
    if rn < opts.tol {
        if singularity_ratio(&jac) < CONJUGATE_RATIO {
            return Err(Error::ConjugatePoint { det: jac.det() });
        }
        return Ok(v);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: rn,
    })
}

/// Solves `γ(0) = x_start`, `γ(1) = x_end` by Newton iteration on the initial
/// velocity, starting from `v_guess` or the chart straight line.
pub fn shoot_bvp(
    m: &MetricField,
    x_start: &[f64],
    x_end: &[f64],
    v_guess: Option<&[f64]>,
    opts: &BvpOptions,
) -> Result<GeodesicSolution> {
    let v = shoot_velocity(m, x_start, x_end, v_guess, opts)?;
    let mut sol = integrate_flow(m, x_start, &v, opts.steps)?;
    sol.x_end = x_end.to_vec();
    Ok(sol)
}

/// Boundary value solution with jet-valued (or otherwise lifted) endpoints.
#[derive(Debug, Clone)]
pub struct LiftedGeodesic<S: Real> {
    pub x_start: Vec<S>,
    pub x_end: Vec<S>,
    pub v0: Vec<S>,
    pub p0: Vec<S>,
    pub p1: Vec<S>,
    pub phi1: Mat<S>,
    /// `H(x_end, x_start)` when gauge fields were supplied.
    pub h: Option<Mat<S::Complex>>,
}

/// Number of lifted Newton steps needed to make a jet solution exact through
/// `order`: each step doubles the number of correct Taylor orders.
pub fn lifted_newton_steps(order: usize) -> usize {
    let mut k = 0;
    while (1usize << k) < order + 1 {
        k += 1;
    }
    k.max(2)
}

/// Shooting with lifted endpoints: numeric Newton on the base values, then
/// [`lifted_newton_steps`] Newton steps in the lifted arithmetic.
pub fn shoot_bvp_lifted<S: Real>(
    m: &MetricField,
    x_start: &[S],
    x_end: &[S],
    v_guess: Option<&[f64]>,
    opts: &BvpOptions,
    order: usize,
    gauge: Option<&GaugeFields>,
) -> Result<LiftedGeodesic<S>> {
    let d = m.dim();
    let xs0: Vec<f64> = x_start.iter().map(|v| v.base_re()).collect();
    let xe0: Vec<f64> = x_end.iter().map(|v| v.base_re()).collect();
    let v_num = shoot_velocity(m, &xs0, &xe0, v_guess, opts)?;
    let g0 = m.metric_at(x_start)?.g;
    let mut v: Vec<S> = v_num.iter().map(|&a| S::from_f64(a)).collect();
    for _ in 0..lifted_newton_steps(order) {
        let (xe, jac, _) = endpoint(m, x_start, &g0, &v, opts.steps)?;
        let r: Vec<S> = xe.iter().zip(x_end).map(|(a, b)| a.clone() - b).collect();
        let dv = jac.solve(&Mat::from_vec(d, 1, r))?;
        v = v.iter().zip(&dv.data).map(|(a, b)| a.clone() - b).collect();
    }
    let p0 = g0.mul_vec(&v);
    let traj = integrate_generic(m, x_start, &p0, opts.steps, true, gauge, &[1.0])?;
    Ok(LiftedGeodesic {
        x_start: x_start.to_vec(),
        x_end: x_end.to_vec(),
        v0: v,
        p0,
        p1: traj.p[0].clone(),
        phi1: traj.phi.unwrap().pop().unwrap(),
        h: traj.h.map(|mut v| v.pop().unwrap()),
    })
}

/// `∂γ(s_i)/∂γ̇(s_j)` at fixed `γ(s_j)`: the position-momentum block of
/// `Φ(s_i)Φ(s_j)⁻¹` times `g(γ(s_j))`.
pub fn jacobi_block(
    m: &MetricField,
    sol: &GeodesicSolution,
    i: usize,
    j: usize,
) -> Result<Mat<f64>> {
    let d = sol.dim();
    let inv = sol.propagator[j].inverse()?;
    let g = m.metric_at(&sol.nodes[j].0)?.g;
    Ok(&(&sol.propagator[i].block(0, 0, d, 2 * d) * &inv.block(0, d, 2 * d, d)) * &g)
}

/// Result of the conjugate-point scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateReport {
    pub pass: bool,
    /// Minimum over grid pairs of `det J(s,t) / (s−t)^d`.
    pub min_normalized: f64,
    /// Offending `(s, t)` on failure, with `s` refined to the zero of `det J`.
    pub pair: Option<(f64, f64)>,
    /// `arc_length · |s − t|` for the offending pair.
    pub arc_separation: Option<f64>,
}

/// Scans all distinct grid pairs for conjugate points.
///
/// The normalized determinant `n(s,t) = det J(s,t)/(s−t)^d` is 1 in flat
/// space and passes through zero with a sign change at a conjugate pair, so
/// the scan fails when `n < tol` anywhere.
pub fn check_conjugate_free(
    m: &MetricField,
    sol: &GeodesicSolution,
    tol: f64,
) -> Result<ConjugateReport> {
    let d = sol.dim();
    let n = sol.s.len();
    let mut xrows = Vec::with_capacity(n);
    let mut pcols = Vec::with_capacity(n);
    for j in 0..n {
        let inv = sol.propagator[j].inverse()?;
        let g = m.metric_at(&sol.nodes[j].0)?.g;
        xrows.push(sol.propagator[j].block(0, 0, d, 2 * d));
        pcols.push(&inv.block(0, d, 2 * d, d) * &g);
    }
    let det_at = |i: usize, j: usize| (&xrows[i] * &pcols[j]).det();
    let mut min_norm = f64::INFINITY;
    // Closest offending pair: (separation index, i, j).
    let mut worst: Option<(usize, usize, usize)> = None;
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let ds = sol.s[i] - sol.s[j];
            let nv = det_at(i, j) / fm::powi(ds, d as i32);
            if nv < min_norm {
                min_norm = nv;
            }
            if i > j && nv < tol {
                let sep = i - j;
                if worst.map_or(true, |w| sep < w.0) {
                    worst = Some((sep, i, j));
                }
            }
        }
    }
    let pass = min_norm >= tol;
    let mut report = ConjugateReport {
        pass,
        min_normalized: min_norm,
        pair: None,
        arc_separation: None,
    };
    if let (false, Some((_, i, j))) = (pass, worst) {
        let t = sol.s[j];
        let mut s_star = sol.s[i];
        if i > j + 1 {
            let (a, b) = (det_at(i - 1, j), det_at(i, j));
            if a.signum() != b.signum() && a != b {
                let (sa, sb) = (sol.s[i - 1], sol.s[i]);
                s_star = sa + (sb - sa) * a / (a - b);
            }
        }
        report.pair = Some((s_star, t));
        report.arc_separation = Some(sol.arc_length() * fm::abs(s_star - t));
    }
    Ok(report)
}
