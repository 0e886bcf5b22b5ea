//! Subcommand drivers. Each returns a report plus whether any audited
//! quantity exceeded its tolerance.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use seeley_core::borel::{BorelBuilder, GridFunction};
use seeley_core::bundle::parallel_transport;
use seeley_core::geodesic::{check_conjugate_free, shoot_bvp};
use seeley_core::hadamard::{
    coincidence_check, delta_transport_defect, fd_crosscheck, p_prime_order0,
    seeley_dewitt_with_guess, spectral_identity_check, spectral_inputs, symmetry_residual,
    HadamardOptions, RayExpansion,
};
use seeley_core::linalg::Mat;
use seeley_core::synge::{eikonal_defect, van_vleck, world_function};
use seeley_core::{Complex64, VERSION};

use crate::config::{ConfigError, PointPair, Scenario};
use crate::report::{
    BorelOut, BorelRow, ConjugateOut, IdentityOut, MatrixOut, PairResult, Report, ResolvedRun,
};
use crate::scenarios::sample_pairs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Geodesic,
    Coefficients,
    AuditSymmetry,
    VerifyIdentities,
    BorelDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Geodesic => "geodesic",
            Command::Coefficients => "coefficients",
            Command::AuditSymmetry => "audit-symmetry",
            Command::VerifyIdentities => "verify-identities",
            Command::BorelDemo => "borel-demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub order: Option<usize>,
    pub tol: f64,
    pub seed: u64,
    pub fd_crosscheck: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            order: None,
            tol: 1e-6,
            seed: 0,
            fd_crosscheck: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("pair {index} (x = {x:?}, x' = {xp:?}): {message}")]
    Numerical {
        index: usize,
        x: Vec<f64>,
        xp: Vec<f64>,
        message: String,
    },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    /// Some audited residual or identity exceeded its tolerance.
    pub exceeded: bool,
}

/// Pinned tolerances of the identity suite.
pub mod tolerances {
    pub const EIKONAL: f64 = 1e-8;
    pub const DELTA_TRANSPORT: f64 = 1e-6;
    pub const TRANSPORT_INVERSE: f64 = 1e-9;
    pub const TRANSPORT_ADJOINT: f64 = 1e-9;
    pub const PDE: f64 = 1e-6;
    pub const SPECTRAL: f64 = 1e-9;
    pub const COINCIDENCE_HERMITICITY: f64 = 1e-6;
    pub const P_PRIME_ORDER0: f64 = 1e-6;
    pub const SEEDING: f64 = 1e-9;
    /// Largest separation and number of halvings for the coincidence limit.
    pub const COINCIDENCE_RHO: f64 = 0.1;
    pub const COINCIDENCE_LEVELS: usize = 5;
}

/// Configured pairs followed by the seeded sample, if the config has one.
pub fn resolve_pairs(s: &Scenario, seed: u64) -> Result<Vec<PointPair>, RunError> {
    let mut pairs = s.config.points.clone();
    if let Some(cfg) = &s.config.sampling {
        let extra =
            sample_pairs(&s.metric, cfg, s.config.numerics.steps, seed).map_err(RunError::Other)?;
        pairs.extend(extra);
    }
    Ok(pairs)
}

fn numerical(index: usize, p: &PointPair, e: impl ToString) -> RunError {
    RunError::Numerical {
        index,
        x: p.x.clone(),
        xp: p.xp.clone(),
        message: e.to_string(),
    }
}

/// Maps pairs in parallel and reduces in input order; the first failure in
/// input order wins.
fn per_pair<F>(pairs: &[PointPair], f: F) -> Result<Vec<PairResult>, RunError>
where
    F: Fn(&PointPair) -> Result<PairResult, String> + Sync,
{
    let out: Vec<Result<PairResult, String>> = pairs.par_iter().map(&f).collect();
    out.into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| numerical(i, &pairs[i], e)))
        .collect()
}

fn geodesic_pair(
    s: &Scenario,
    p: &PointPair,
    opts: &HadamardOptions,
) -> Result<PairResult, String> {
    let m = &s.metric;
    let sol =
        shoot_bvp(m, &p.xp, &p.x, p.v_guess.as_deref(), &opts.bvp()).map_err(|e| e.to_string())?;
    let report = check_conjugate_free(m, &sol, opts.conjugate_tol).map_err(|e| e.to_string())?;
    if !report.pass {
        let (a, b) = report.pair.unwrap_or((f64::NAN, f64::NAN));
        return Err(format!(
            "conjugate points at parameters {a:.6} and {b:.6} (arc separation {:.6})",
            report.arc_separation.unwrap_or(f64::NAN)
        ));
    }
    let wf = world_function(&sol).map_err(|e| e.to_string())?;
    let vv = van_vleck(m, &wf, &p.x, &p.xp).map_err(|e| e.to_string())?;
    let mut r = PairResult::new(p.clone());
    r.sigma = Some(wf.sigma);
    r.delta = Some(vv.delta);
    r.arc_length = Some(sol.arc_length());
    r.conjugate_report = Some(ConjugateOut::from(&report));
    Ok(r)
}

fn coefficient_pair(
    s: &Scenario,
    p: &PointPair,
    order: usize,
    fd: bool,
    opts: &HadamardOptions,
) -> Result<PairResult, String> {
    let (m, g) = (&s.metric, &s.gauge);
    let t = seeley_dewitt_with_guess(m, g, &p.x, &p.xp, p.v_guess.as_deref(), order, opts)
        .map_err(|e| e.to_string())?;
    let mut r = PairResult::new(p.clone());
    let sign = seeley_core::synge::expected_sign(m) as f64;
    r.sigma = Some(t.sigma);
    r.delta = Some(sign * t.delta_sqrt * t.delta_sqrt);
    r.conjugate_report = t.conjugate.as_ref().map(ConjugateOut::from);
    r.f = t.f.iter().map(MatrixOut::from).collect();
    if fd {
        r.residuals.fd_crosscheck = (0..=order)
            .map(|n| fd_crosscheck(m, g, &p.x, &p.xp, n, opts))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
    }
    Ok(r)
}

fn symmetry_pair(
    s: &Scenario,
    p: &PointPair,
    order: usize,
    opts: &HadamardOptions,
) -> Result<PairResult, String> {
    let res = symmetry_residual(&s.metric, &s.gauge, &s.form, &p.x, &p.xp, order, opts)
        .map_err(|e| e.to_string())?;
    let mut r = PairResult::new(p.clone());
    r.residuals.symmetry = res;
    Ok(r)
}

/// Constant seeds for the linearity check, drawn from the run seed and the
/// pair position so that reports stay reproducible.
fn seed_matrix(k: usize, seed: u64, pair: &PointPair) -> Mat<Complex64> {
    let mix = pair
        .x
        .iter()
        .chain(&pair.xp)
        .fold(seed, |h, v| h.rotate_left(13) ^ v.to_bits());
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    Mat::from_fn(k, k, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn identity_pair(
    s: &Scenario,
    p: &PointPair,
    order: usize,
    seed: u64,
    opts: &HadamardOptions,
) -> Result<PairResult, String> {
    use tolerances::*;
    let (m, g, form) = (&s.metric, &s.gauge, &s.form);
    let err = |e: seeley_core::Error| e.to_string();
    let mut ids: BTreeMap<String, IdentityOut> = BTreeMap::new();

    let sol = shoot_bvp(m, &p.xp, &p.x, p.v_guess.as_deref(), &opts.bvp()).map_err(err)?;
    let wf = world_function(&sol).map_err(err)?;
    let vv = van_vleck(m, &wf, &p.x, &p.xp).map_err(err)?;
    ids.insert(
        "eikonal".into(),
        IdentityOut::new(eikonal_defect(m, &wf, &p.x).map_err(err)?, EIKONAL),
    );
    ids.insert(
        "delta_transport".into(),
        IdentityOut::new(
            delta_transport_defect(m, &p.x, &p.xp, opts).map_err(err)?,
            DELTA_TRANSPORT,
        ),
    );
    let tr = parallel_transport(m, &sol, g).map_err(err)?;
    let k = g.k();
    let inv = (&(&tr.h * &tr.h_inv) - &Mat::identity(k)).frobenius();
    let adj = (&tr.h - &form.adjoint(&tr.h_inv)).frobenius();
    ids.insert(
        "transport_inverse".into(),
        IdentityOut::new(inv, TRANSPORT_INVERSE),
    );
    ids.insert(
        "transport_adjoint".into(),
        IdentityOut::new(adj, TRANSPORT_ADJOINT),
    );

    let top = order.max(2);
    let mut ray = RayExpansion::with_guess(m, g, &p.x, &p.xp, p.v_guess.as_deref(), top, 2, opts)
        .map_err(err)?;
    let pde = (1..=order.max(1))
        .map(|n| ray.pde_residual(n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    ids.insert("pde_n1".into(), IdentityOut::new(pde[0], PDE));
    let (pj, f) = spectral_inputs(&mut ray, 2).map_err(err)?;
    for lam in [0.3, 1.0] {
        let v = spectral_identity_check(&pj, &f, lam).map_err(err)?;
        ids.insert(
            format!("spectral_lambda_{lam}"),
            IdentityOut::new(v, SPECTRAL),
        );
    }
    let base = ray.g_values().map_err(err)?;
    let c = seed_matrix(k, seed, p);
    ray.set_seed(c.clone());
    let seeded = ray.g_values().map_err(err)?;
    let worst = base
        .iter()
        .zip(&seeded)
        .map(|(a, b)| (&(a * &c) - b).frobenius() / (a * &c).frobenius().max(1.0))
        .fold(0.0f64, f64::max);
    ids.insert("seeding_linearity".into(), IdentityOut::new(worst, SEEDING));

    // coincidence limit at x′ approached along the connecting geodesic
    let v0 = &sol.v0;
    let gp = m.metric_at(&p.xp).map_err(err)?.g;
    let q: f64 = (0..v0.len())
        .flat_map(|a| (0..v0.len()).map(move |b| (a, b)))
        .map(|(a, b)| gp[(a, b)] * v0[a] * v0[b])
        .sum();
    if q.abs() > 1e-8 {
        let dir: Vec<f64> = v0.iter().map(|v| v / q.abs().sqrt()).collect();
        let (defect, _) = coincidence_check(
            m,
            g,
            form,
            &p.xp,
            &dir,
            COINCIDENCE_RHO,
            COINCIDENCE_LEVELS,
            opts,
        )
        .map_err(err)?;
        ids.insert(
            "coincidence_hermiticity".into(),
            IdentityOut::new(defect, COINCIDENCE_HERMITICITY),
        );
    }
    let pp = p_prime_order0(m, g, form, &p.x, &p.xp, opts).map_err(err)?;
    ids.insert(
        "p_prime_order0".into(),
        IdentityOut::new(pp.frobenius(), P_PRIME_ORDER0),
    );

    let mut r = PairResult::new(p.clone());
    r.sigma = Some(wf.sigma);
    r.delta = Some(vv.delta);
    r.residuals.pde = pde;
    r.residuals.identities = ids;
    Ok(r)
}

/// Coefficients `h_n(x) = n!(1 + ½ sin x)` on `[0, 1]`: factorial growth,
/// nonconstant in `x`.
pub fn borel_demo(order: usize, tol: f64) -> Result<(BorelOut, bool), RunError> {
    let points = 60;
    let mut fact = 1.0;
    let h: Vec<GridFunction> = (0..=order)
        .map(|n| {
            if n > 0 {
                fact *= n as f64;
            }
            let c = fact;
            GridFunction::sample(0.0, 1.0, points, move |x| c * (1.0 + 0.5 * x.sin()))
        })
        .collect();
    let b = BorelBuilder::new(h).map_err(|e| RunError::Other(e.to_string()))?;
    let i = points / 2;
    let lam_min = b.lam.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    let taylor_order = order.min(3);
    let lambdas: Vec<f64> = (1..200).map(|k| k as f64 * lam_min / 400.0).collect();
    let taylor_defect = b
        .taylor_match_check(i, taylor_order, &lambdas)
        .map_err(|e| RunError::Other(e.to_string()))?;
    // the stencil reaches 2·step, which stays on the plateau of every cutoff
    let step = lam_min / 4.0;
    let mut exceeded = !taylor_defect.is_finite();
    let mut rows = Vec::new();
    let mut fact = 1.0;
    for n in 0..=order.min(3) {
        if n > 0 {
            fact *= n as f64;
        }
        let got = b
            .fd_derivative_at_zero(i, n, step)
            .map_err(|e| RunError::Other(e.to_string()))?;
        let want = Complex64::new(0.0, 1.0).powu(n as u32) * (fact * b.h[n].values[i]);
        let rel = (got - want).norm() / want.norm();
        exceeded |= !(rel <= tol);
        rows.push(BorelRow {
            n,
            sup_estimate: b.l[n],
            scale: b.lam[n],
            derivative_re: got.re,
            derivative_im: got.im,
            expected_re: want.re,
            expected_im: want.im,
            relative_error: rel,
        });
    }
    Ok((
        BorelOut {
            point: b.h[0].point(i),
            taylor_order,
            taylor_defect,
            fd_step: step,
            rows,
        },
        exceeded,
    ))
}

pub fn run(cmd: Command, s: &Scenario, ro: &RunOptions) -> Result<Outcome, RunError> {
    let opts = s.config.numerics.options();
    let order = ro.order.unwrap_or(s.config.numerics.jet_order);
    let resolved = ResolvedRun {
        command: cmd.name().into(),
        order,
        tol: ro.tol,
        seed: ro.seed,
        fd_crosscheck: ro.fd_crosscheck,
        scenario: s.config.clone(),
    };
    let mut exceeded = false;
    let mut borel = None;
    let results = match cmd {
        Command::BorelDemo => {
            let (b, ex) = borel_demo(order.max(3), ro.tol)?;
            borel = Some(b);
            exceeded = ex;
            Vec::new()
        }
        _ => {
            let pairs = resolve_pairs(s, ro.seed)?;
            match cmd {
                Command::Geodesic => per_pair(&pairs, |p| geodesic_pair(s, p, &opts))?,
                Command::Coefficients => per_pair(&pairs, |p| {
                    coefficient_pair(s, p, order, ro.fd_crosscheck, &opts)
                })?,
                Command::AuditSymmetry => {
                    let r = per_pair(&pairs, |p| symmetry_pair(s, p, order, &opts))?;
                    exceeded = r
                        .iter()
                        .flat_map(|x| &x.residuals.symmetry)
                        .any(|v| !(*v <= ro.tol));
                    r
                }
                Command::VerifyIdentities => {
                    let r = per_pair(&pairs, |p| identity_pair(s, p, order, ro.seed, &opts))?;
                    exceeded = r
                        .iter()
                        .flat_map(|x| x.residuals.identities.values())
                        .any(|v| !v.pass);
                    r
                }
                Command::BorelDemo => unreachable!(),
            }
        }
    };
    Ok(Outcome {
        report: Report {
            scenario: s.config.name.clone(),
            version: VERSION.into(),
            config_resolved: resolved,
            results,
            borel,
        },
        exceeded,
    })
}
