//! Built-in scenarios and seeded sampling of conjugate-free point pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seeley_core::geodesic::integrate_flow;
use seeley_core::geometry::MetricField;

use crate::config::{
    BundleConfig, ComplexEntry, ManifoldConfig, MetricSpec, NumericsConfig, PointPair,
    SamplingConfig, ScenarioConfig,
};

pub const NAMES: [&str; 5] = [
    "flat_massive",
    "sphere_gauge",
    "hyperbolic_gauge",
    "desitter_gauge",
    "minkowski_gauge",
];

/// The four curved or indefinite gauge scenarios used by the symmetry audit.
pub const GAUGE_NAMES: [&str; 4] = [
    "sphere_gauge",
    "hyperbolic_gauge",
    "desitter_gauge",
    "minkowski_gauge",
];

fn c(re: &str, im: &str) -> ComplexEntry {
    ComplexEntry::new(re, im)
}

/// `A_μ = i H_μ` with position-dependent hermitian `H_μ`, and a hermitian
/// `B`, for the identity fiber form.
fn unitary_gauge() -> (Vec<Vec<Vec<ComplexEntry>>>, Vec<Vec<ComplexEntry>>) {
    let a0 = vec![
        vec![c("0", "0.3*cos(x1)"), c("-0.1*x0", "0.2")],
        vec![c("0.1*x0", "0.2"), c("0", "-0.2*sin(x0)")],
    ];
    let a1 = vec![
        vec![c("0", "0.1*x0"), c("-0.1*cos(x1)", "0.25*sin(x0)")],
        vec![c("0.1*cos(x1)", "0.25*sin(x0)"), c("0", "-0.15")],
    ];
    let b = vec![
        vec![c("-0.5 + 0.2*cos(x0)", "0"), c("0.3*x1", "0.1")],
        vec![c("0.3*x1", "-0.1"), c("0.4*sin(x0*x1)", "0")],
    ];
    (vec![a0, a1], b)
}

/// Gauge fields anti-hermitian and hermitian for the form `diag(1, −1)`.
fn split_gauge() -> (Vec<Vec<Vec<ComplexEntry>>>, Vec<Vec<ComplexEntry>>) {
    let a0 = vec![
        vec![c("0", "0.3*cos(x1)"), c("0.2*x0", "0.1")],
        vec![c("0.2*x0", "-0.1"), c("0", "-0.2*sin(x0)")],
    ];
    let a1 = vec![
        vec![c("0", "0.1*x0"), c("0.25*sin(x0)", "-0.1*cos(x1)")],
        vec![c("0.25*sin(x0)", "0.1*cos(x1)"), c("0", "-0.15")],
    ];
    let b = vec![
        vec![c("-0.5 + 0.2*cos(x0)", "0"), c("0.3*x1", "0.1")],
        vec![c("-0.3*x1", "0.1"), c("0.4*cos(x1)", "0")],
    ];
    (vec![a0, a1], b)
}

fn sampling(
    count: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    min_length: f64,
    max_length: f64,
) -> SamplingConfig {
    SamplingConfig {
        count,
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        min_length,
        max_length,
    }
}

fn gauge_scenario(name: &str, metric: &str, split: bool, s: SamplingConfig) -> ScenarioConfig {
    let (a, b) = if split {
        split_gauge()
    } else {
        unitary_gauge()
    };
    let form_s = split.then(|| {
        vec![
            vec![ComplexEntry::real(1.0), ComplexEntry::real(0.0)],
            vec![ComplexEntry::real(0.0), ComplexEntry::real(-1.0)],
        ]
    });
    ScenarioConfig {
        name: name.into(),
        manifold: ManifoldConfig {
            dim: 2,
            metric: MetricSpec::Catalog(metric.into()),
            radius: 1.0,
            samples: Vec::new(),
        },
        bundle: BundleConfig {
            k: 2,
            form_s,
            a: Some(a),
            b: Some(b),
        },
        numerics: NumericsConfig::default(),
        points: Vec::new(),
        sampling: Some(s),
    }
}

/// A built-in scenario by name.
pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "flat_massive" => ScenarioConfig {
            name: name.into(),
            manifold: ManifoldConfig {
                dim: 2,
                metric: MetricSpec::Catalog("flat".into()),
                radius: 1.0,
                samples: Vec::new(),
            },
            bundle: BundleConfig {
                k: 1,
                form_s: None,
                a: None,
                b: Some(vec![vec![ComplexEntry::real(-1.0)]]),
            },
            numerics: NumericsConfig {
                jet_order: 3,
                ..NumericsConfig::default()
            },
            points: Vec::new(),
            sampling: Some(sampling(10, [-2.0, -2.0], [2.0, 2.0], 0.2, 2.0)),
        },
        "sphere_gauge" => gauge_scenario(
            name,
            "sphere2",
            false,
            sampling(20, [0.9, -1.0], [2.2, 1.0], 0.3, 1.2),
        ),
        "hyperbolic_gauge" => gauge_scenario(
            name,
            "hyperbolic2",
            false,
            sampling(20, [0.9, -1.0], [1.8, 1.0], 0.3, 1.0),
        ),
        "desitter_gauge" => gauge_scenario(
            name,
            "desitter2",
            true,
            sampling(20, [-0.6, -1.0], [0.6, 1.0], 0.3, 1.0),
        ),
        "minkowski_gauge" => gauge_scenario(
            name,
            "minkowski2",
            false,
            sampling(20, [-1.0, -1.0], [1.0, 1.0], 0.3, 1.5),
        ),
        _ => return None,
    })
}

/// Smallest `|g(u,u)|` accepted for a Euclidean-unit direction `u`; keeps
/// indefinite samples away from the light cone.
const MIN_NORM: f64 = 0.3;
const MAX_ATTEMPTS: usize = 10_000;

/// Draws pairs `(x, x′)` with `x′` uniform in the box and `x` the endpoint of a
/// geodesic from `x′` of length uniform in the configured range. The initial
/// velocity is kept as the shooting guess. Endpoints must land in the box
/// widened by half its size on each side.
pub fn sample_pairs(
    m: &MetricField,
    s: &SamplingConfig,
    steps: usize,
    seed: u64,
) -> Result<Vec<PointPair>, String> {
    let d = m.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(s.count);
    let mut attempts = 0;
    while out.len() < s.count {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(format!(
                "only {} of {} pairs found in the sampling box",
                out.len(),
                s.count
            ));
        }
        let xp: Vec<f64> = (0..d)
            .map(|i| rng.random_range(s.lo[i]..=s.hi[i]))
            .collect();
        let mut u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let len = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len < 1e-3 {
            continue;
        }
        u.iter_mut().for_each(|v| *v /= len);
        let g = m.metric_at(&xp).map_err(|e| e.to_string())?.g;
        let q: f64 = (0..d)
            .flat_map(|a| (0..d).map(move |b| (a, b)))
            .map(|(a, b)| g[(a, b)] * u[a] * u[b])
            .sum();
        if q.abs() < MIN_NORM {
            continue;
        }
        let rho = rng.random_range(s.min_length..=s.max_length);
        let v: Vec<f64> = u.iter().map(|x| x * rho / q.abs().sqrt()).collect();
        let Ok(sol) = integrate_flow(m, &xp, &v, steps) else {
            continue;
        };
        let x = sol.x_end_numeric();
        let inside = (0..d).all(|i| {
            let w = 0.5 * (s.hi[i] - s.lo[i]);
            x[i] >= s.lo[i] - w && x[i] <= s.hi[i] + w
        });
        if inside && x.iter().all(|v| v.is_finite()) {
            out.push(PointPair {
                x,
                xp,
                v_guess: Some(v),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates() {
        for name in NAMES {
            by_name(name)
                .unwrap()
                .build()
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = by_name("sphere_gauge").unwrap().build().unwrap();
        let cfg = s.config.sampling.clone().unwrap();
        let a = sample_pairs(&s.metric, &cfg, 50, 7).unwrap();
        let b = sample_pairs(&s.metric, &cfg, 50, 7).unwrap();
        let c = sample_pairs(&s.metric, &cfg, 50, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 20);
    }
}
