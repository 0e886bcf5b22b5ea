//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.
//! Runs without the libtest harness so the lines always reach the output.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use seeley::config::Scenario;
use seeley::run::{borel_demo, resolve_pairs, run, Command, RunOptions};
use seeley::scenarios;
use seeley_core::geodesic::{check_conjugate_free, integrate_flow, shoot_bvp, BvpOptions};
use seeley_core::geometry::catalog;
use seeley_core::hadamard::{
    seeley_dewitt_with_guess, spectral_identity_check, spectral_inputs, symmetry_residual,
    HadamardOptions, RayExpansion,
};
use seeley_core::synge::{van_vleck, world_function};

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn scenario(name: &str, count: usize) -> Scenario {
    let mut c = scenarios::by_name(name).expect("built-in scenario");
    if let Some(s) = c.sampling.as_mut() {
        s.count = count;
    }
    c.build().expect("scenario validates")
}

/// Hand-solved recursion for constant `B` in flat space: each step
/// multiplies by `B / n`.
fn flat_oracle(b: f64, n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * b / k as f64)
}

fn c1_flat_closed_form() -> Line {
    let s = scenario("flat_massive", 10);
    let pairs = resolve_pairs(&s, 11).unwrap();
    let opts = s.config.numerics.options();
    let mut worst = 0.0f64;
    for p in &pairs {
        let t = seeley_dewitt_with_guess(
            &s.metric,
            &s.gauge,
            &p.x,
            &p.xp,
            p.v_guess.as_deref(),
            3,
            &opts,
        )
        .unwrap();
        for (n, f) in t.f.iter().enumerate() {
            let want = flat_oracle(-1.0, n);
            let rel = (f[(0, 0)].re - want).abs().max(f[(0, 0)].im.abs()) / want.abs();
            worst = worst.max(rel);
        }
    }
    Line {
        id: "1 flat closed form",
        pass: pairs.len() == 10 && worst <= 1e-8,
        detail: format!(
            "{} pairs, max relative error {worst:.2e} (tol 1e-8)",
            pairs.len()
        ),
    }
}

fn c2_constant_curvature() -> Line {
    let bvp = BvpOptions::default();
    let s2 = catalog::sphere2(1.0);
    let (a, b) = ([PI / 2.0, 0.0], [PI / 2.0, PI / 2.0]);
    let sol = shoot_bvp(&s2, &a, &b, None, &bvp).unwrap();
    let wf = world_function(&sol).unwrap();
    let vv = van_vleck(&s2, &wf, &b, &a).unwrap();
    let e_sigma = (wf.sigma - PI * PI / 8.0).abs();
    let e_delta = (vv.delta - PI / 2.0).abs();
    // a tilted quarter arc, closed form from the spherical law of cosines
    let (c, d): ([f64; 2], [f64; 2]) = ([1.1, -0.4], [1.9, 0.6]);
    let cos_rho = c[0].cos() * d[0].cos() + c[0].sin() * d[0].sin() * (d[1] - c[1]).cos();
    let rho = cos_rho.acos();
    let sol = shoot_bvp(&s2, &c, &d, None, &bvp).unwrap();
    let vv2 = van_vleck(&s2, &world_function(&sol).unwrap(), &d, &c).unwrap();
    let e_delta2 = (vv2.delta - rho / rho.sin()).abs();

    let h2 = catalog::hyperbolic2(1.0);
    let mut e_h = 0.0f64;
    let h2_pairs: [([f64; 2], [f64; 2]); 3] = [
        ([1.0, 0.2], [1.5, -0.4]),
        ([0.8, 1.0], [1.8, 0.1]),
        ([1.2, -0.5], [0.9, 0.7]),
    ];
    for (x, xp) in h2_pairs {
        let ch = x[0].cosh() * xp[0].cosh() - x[0].sinh() * xp[0].sinh() * (x[1] - xp[1]).cos();
        let rho = ch.acosh();
        let sol = shoot_bvp(&h2, &xp, &x, None, &bvp).unwrap();
        let vv = van_vleck(&h2, &world_function(&sol).unwrap(), &x, &xp).unwrap();
        e_h = e_h.max((vv.delta - rho / rho.sinh()).abs());
    }
    Line {
        id: "2 constant curvature",
        pass: e_sigma <= 1e-8 && e_delta.max(e_delta2) <= 1e-6 && e_h <= 1e-6,
        detail: format!(
            "S2 sigma err {e_sigma:.2e}, Delta err {:.2e}; H2 Delta err {e_h:.2e}",
            e_delta.max(e_delta2)
        ),
    }
}

fn c3_signature_sign() -> Line {
    let m = catalog::minkowski2();
    let bvp = BvpOptions::default();
    let mut worst = 0.0f64;
    for (x, xp) in [
        ([1.0, 0.3], [0.0, 0.0]),
        ([0.2, 1.5], [-0.3, 0.1]),
        ([-0.7, 0.4], [0.5, 0.2]),
    ] {
        let sol = shoot_bvp(&m, &xp, &x, None, &bvp).unwrap();
        let vv = van_vleck(&m, &world_function(&sol).unwrap(), &x, &xp).unwrap();
        worst = worst.max((vv.delta + 1.0).abs());
    }
    Line {
        id: "3 signature sign rule",
        pass: worst <= 1e-9,
        detail: format!("Minkowski max |Delta + 1| = {worst:.2e} (tol 1e-9)"),
    }
}

fn c4_symmetry() -> Line {
    let start = Instant::now();
    let coarse = HadamardOptions::default();
    let fine = HadamardOptions {
        steps: 2 * coarse.steps,
        quad_nodes: 2 * coarse.quad_nodes,
        ..coarse
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for name in scenarios::GAUGE_NAMES {
        let s = scenario(name, 20);
        let pairs = resolve_pairs(&s, 4).unwrap();
        let (mut r0, mut r1) = (0.0f64, 0.0f64);
        for p in &pairs {
            let a =
                symmetry_residual(&s.metric, &s.gauge, &s.form, &p.x, &p.xp, 2, &coarse).unwrap();
            let b = symmetry_residual(&s.metric, &s.gauge, &s.form, &p.x, &p.xp, 2, &fine).unwrap();
            r0 = a.into_iter().fold(r0, f64::max);
            r1 = b.into_iter().fold(r1, f64::max);
        }
        let ratio = r0 / r1;
        pass &= pairs.len() == 20 && r0 <= 1e-6 && ratio >= 8.0;
        parts.push(format!("{name} {r0:.1e}->{r1:.1e} (x{ratio:.1})"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 1800.0;
    Line {
        id: "4 sesqui-symmetry",
        pass,
        detail: format!("{}; {secs:.0}s", parts.join(", ")),
    }
}

/// Identity reports for 10 samples of every built-in scenario.
fn identity_reports() -> Vec<(String, seeley::report::Report)> {
    scenarios::NAMES
        .iter()
        .map(|name| {
            let s = scenario(name, 10);
            let ro = RunOptions {
                order: Some(1),
                seed: 5,
                ..RunOptions::default()
            };
            let out = run(Command::VerifyIdentities, &s, &ro).unwrap();
            (name.to_string(), out.report)
        })
        .collect()
}

fn worst_of(
    reports: &[(String, seeley::report::Report)],
    key: &str,
    only: Option<&[&str]>,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (name, r) in reports {
        if only.is_some_and(|o| !o.contains(&name.as_str())) {
            continue;
        }
        for p in &r.results {
            if let Some(v) = p.residuals.identities.get(key) {
                worst = if v.value.is_finite() {
                    worst.max(v.value)
                } else {
                    f64::INFINITY
                };
                count += 1;
            }
        }
    }
    (worst, count)
}

fn c5_identities(reports: &[(String, seeley::report::Report)]) -> Line {
    let checks = [
        ("eikonal", 1e-8),
        ("delta_transport", 1e-6),
        ("transport_inverse", 1e-9),
        ("transport_adjoint", 1e-9),
        ("pde_n1", 1e-6),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (key, tol) in checks {
        let (w, n) = worst_of(reports, key, None);
        pass &= n >= 50 && w <= tol;
        parts.push(format!("{key} {w:.1e}/{n}"));
    }
    Line {
        id: "5 identity suite",
        pass,
        detail: parts.join(", "),
    }
}

/// The identity holds exactly for the true world function and transport, so
/// its defect measures integrator error; the step count is doubled here.
fn c6_spectral() -> Line {
    let opts = HadamardOptions {
        steps: 400,
        ..HadamardOptions::default()
    };
    let mut worst = [0.0f64; 2];
    let mut count = 0;
    for name in ["flat_massive", "sphere_gauge"] {
        let s = scenario(name, 10);
        for p in resolve_pairs(&s, 5).unwrap() {
            let mut ray = RayExpansion::with_guess(
                &s.metric,
                &s.gauge,
                &p.x,
                &p.xp,
                p.v_guess.as_deref(),
                2,
                2,
                &opts,
            )
            .unwrap();
            let (pj, f) = spectral_inputs(&mut ray, 2).unwrap();
            for (w, lam) in worst.iter_mut().zip([0.3, 1.0]) {
                *w = w.max(spectral_identity_check(&pj, &f, lam).unwrap());
            }
            count += 1;
        }
    }
    Line {
        id: "6 spectral identity",
        pass: count == 20 && worst[0].max(worst[1]) <= 1e-9,
        detail: format!(
            "flat+sphere, degree 2, lambda 0.3: {:.2e}, lambda 1.0: {:.2e} over {count} pairs (tol 1e-9, steps 400)",
            worst[0], worst[1]
        ),
    }
}

fn c7_coincidence(reports: &[(String, seeley::report::Report)]) -> Line {
    let gauge: &[&str] = &scenarios::GAUGE_NAMES;
    let (h, nh) = worst_of(reports, "coincidence_hermiticity", Some(gauge));
    let (p, np) = worst_of(reports, "p_prime_order0", Some(gauge));
    Line {
        id: "7 coincidence hermiticity",
        pass: nh >= 4 && np >= 4 && h <= 1e-6 && p <= 1e-6,
        detail: format!(
            "hermiticity defect {h:.2e} ({nh} points), order-0 P' {p:.2e} ({np} pairs)"
        ),
    }
}

fn c8_conjugate() -> Line {
    let s2 = catalog::sphere2(1.0);
    let mut pass = true;
    let mut sep_err = 0.0f64;
    let starts: [([f64; 2], [f64; 2]); 2] =
        [([PI / 2.0, 0.0], [0.0, 1.0]), ([PI / 2.0, 0.3], [0.4, 0.8])];
    for (x0, dir) in starts {
        let norm = (dir[0] * dir[0] + x0[0].sin().powi(2) * dir[1] * dir[1]).sqrt();
        for frac in [0.3, 0.6, 0.85, 0.89, 1.11, 1.2, 1.5] {
            let v = [dir[0] * frac * PI / norm, dir[1] * frac * PI / norm];
            let sol = integrate_flow(&s2, &x0, &v, 400).unwrap();
            let r = check_conjugate_free(&s2, &sol, 1e-3).unwrap();
            if frac < 0.9 {
                pass &= r.pass;
            } else {
                pass &= !r.pass;
                let e = r.arc_separation.map_or(f64::INFINITY, |a| (a - PI).abs());
                sep_err = sep_err.max(e);
            }
        }
    }
    Line {
        id: "8 conjugate detection",
        pass: pass && sep_err <= 1e-2,
        detail: format!("arcs < 0.9pi pass, > 1.1pi fail; max |separation - pi| = {sep_err:.2e}"),
    }
}

fn c9_borel() -> Line {
    let (b, _) = borel_demo(5, 1e-6).unwrap();
    let worst = b
        .rows
        .iter()
        .map(|r| r.relative_error)
        .fold(0.0f64, f64::max);
    Line {
        id: "9 Borel construction",
        pass: b.taylor_defect.is_finite() && b.rows.len() == 4 && worst <= 1e-6,
        detail: format!(
            "Taylor defect {:.3e} (finite), derivative rel err {worst:.2e} for n <= 3",
            b.taylor_defect
        ),
    }
}

fn c10_seeding(reports: &[(String, seeley::report::Report)]) -> Line {
    let (w, n) = worst_of(reports, "seeding_linearity", None);
    let per = reports.iter().all(|(_, r)| r.results.len() >= 3);
    Line {
        id: "10 seeding linearity",
        pass: per && w <= 1e-9,
        detail: format!("max relative defect {w:.2e} over {n} seeds (tol 1e-9)"),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut lines = vec![
        c1_flat_closed_form(),
        c2_constant_curvature(),
        c3_signature_sign(),
    ];
    let reports = identity_reports();
    lines.push(c4_symmetry());
    lines.push(c5_identities(&reports));
    lines.push(c6_spectral());
    lines.push(c7_coincidence(&reports));
    lines.push(c8_conjugate());
    lines.push(c9_borel());
    lines.push(c10_seeding(&reports));
    let mut failed = 0;
    for l in &lines {
        println!(
            "criterion {}: {} | {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.detail
        );
        failed += usize::from(!l.pass);
    }
    println!(
        "acceptance: {} of {} passed in {:.0}s",
        lines.len() - failed,
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
