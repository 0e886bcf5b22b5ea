//! Scenario files: manifold, bundle, numerics and the point pairs to visit.
//!
//! Numbers inside expressions are written as strings so that the file, not
//! the parser of the file format, decides how they round.

use std::path::Path;

use serde::{Deserialize, Serialize};

use seeley_core::bundle::{ComplexExpr, FiberForm, GaugeFields};
use seeley_core::geometry::{catalog, MetricField};
use seeley_core::hadamard::HadamardOptions;
use seeley_core::linalg::Mat;
use seeley_core::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("{0}")]
    Invalid(String),
}

impl From<seeley_core::Error> for ConfigError {
    fn from(e: seeley_core::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

/// A scalar entry that may be written as a number or as an expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Num(f64),
    Text(String),
}

impl Entry {
    fn text(&self) -> String {
        match self {
            Entry::Num(v) => format!("{v:?}"),
            Entry::Text(s) => s.clone(),
        }
    }
}

impl Default for Entry {
    fn default() -> Self {
        Entry::Num(0.0)
    }
}

/// `{ re, im }`, either part defaulting to zero; a bare entry is real.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "ComplexRepr")]
pub struct ComplexEntry {
    pub re: Entry,
    pub im: Entry,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Parts {
    #[serde(default)]
    re: Entry,
    #[serde(default)]
    im: Entry,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComplexRepr {
    Real(Entry),
    Pair(Parts),
}

impl From<ComplexRepr> for ComplexEntry {
    fn from(r: ComplexRepr) -> Self {
        match r {
            ComplexRepr::Real(re) => ComplexEntry {
                re,
                im: Entry::Num(0.0),
            },
            ComplexRepr::Pair(Parts { re, im }) => ComplexEntry { re, im },
        }
    }
}

impl ComplexEntry {
    pub fn new(re: &str, im: &str) -> Self {
        ComplexEntry {
            re: Entry::Text(re.into()),
            im: Entry::Text(im.into()),
        }
    }

    pub fn real(v: f64) -> Self {
        ComplexEntry {
            re: Entry::Num(v),
            im: Entry::Num(0.0),
        }
    }
}

/// Either a catalog name or explicit components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Catalog(String),
    Components(Vec<Vec<Entry>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub dim: usize,
    pub metric: MetricSpec,
    #[serde(default = "one")]
    pub radius: f64,
    /// Points used to detect the signature of an explicit metric.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    pub k: usize,
    #[serde(rename = "form_S", default, skip_serializing_if = "Option::is_none")]
    pub form_s: Option<Vec<Vec<ComplexEntry>>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<Vec<ComplexEntry>>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<ComplexEntry>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_quad")]
    pub quad_nodes: usize,
    /// Highest coefficient order computed unless `--order` overrides it.
    #[serde(default = "d_order")]
    pub jet_order: usize,
    #[serde(default = "d_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "d_newton_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "d_conj_tol")]
    pub conjugate_tol: f64,
    #[serde(default = "d_cost")]
    pub cost_guard: u64,
}

fn d_steps() -> usize {
    HadamardOptions::default().steps
}
fn d_quad() -> usize {
    HadamardOptions::default().quad_nodes
}
fn d_order() -> usize {
    2
}
fn d_newton_tol() -> f64 {
    HadamardOptions::default().newton_tol
}
fn d_newton_iter() -> usize {
    HadamardOptions::default().newton_max_iter
}
fn d_conj_tol() -> f64 {
    HadamardOptions::default().conjugate_tol
}
fn d_cost() -> u64 {
    HadamardOptions::default().cost_guard
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            steps: d_steps(),
            quad_nodes: d_quad(),
            jet_order: d_order(),
            newton_tol: d_newton_tol(),
            newton_max_iter: d_newton_iter(),
            conjugate_tol: d_conj_tol(),
            cost_guard: d_cost(),
        }
    }
}

impl NumericsConfig {
    pub fn options(&self) -> HadamardOptions {
        HadamardOptions {
            steps: self.steps,
            quad_nodes: self.quad_nodes,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            conjugate_tol: self.conjugate_tol,
            check_conjugate: true,
            cost_guard: self.cost_guard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointPair {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_guess: Option<Vec<f64>>,
}

/// Region for seeded random pairs: `x′` uniform in the box, `x` reached by a
/// geodesic of length in `[min_length, max_length]` from `x′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub count: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub min_length: f64,
    pub max_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "unnamed")]
    pub name: String,
    pub manifold: ManifoldConfig,
    pub bundle: BundleConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub points: Vec<PointPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
}

fn unnamed() -> String {
    "scenario".into()
}

/// Validated objects built from a config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub metric: MetricField,
    pub gauge: GaugeFields,
    pub form: FiberForm,
}

const HERMITICITY_SAMPLES: usize = 64;
const HERMITICITY_TOL: f64 = 1e-10;

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            source: Box::new(e),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<string>".into(),
            source: Box::new(e),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn metric(&self) -> Result<MetricField, ConfigError> {
        let mf = &self.manifold;
        let d = mf.dim;
        match &mf.metric {
            MetricSpec::Catalog(name) => {
                let m = catalog::by_name(name, d, mf.radius).ok_or_else(|| {
                    ConfigError::Invalid(format!("unknown catalog metric `{name}`"))
                })?;
                if m.dim() != d {
                    return Err(ConfigError::Invalid(format!(
                        "metric `{name}` has dimension {}, config says {d}",
                        m.dim()
                    )));
                }
                Ok(m)
            }
            MetricSpec::Components(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(ConfigError::Invalid(format!(
                        "metric must be a {d}x{d} matrix"
                    )));
                }
                let comps: Vec<String> = rows.iter().flatten().map(Entry::text).collect();
                let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
                let mut samples = mf.samples.clone();
                samples.extend(self.points.iter().flat_map(|p| [p.x.clone(), p.xp.clone()]));
                if samples.is_empty() {
                    return Err(ConfigError::Invalid(
                        "explicit metric needs `manifold.samples` or points for signature detection".into(),
                    ));
                }
                Ok(MetricField::from_strings("custom", d, &refs, &samples)?)
            }
        }
    }

    fn matrix(
        &self,
        what: &str,
        rows: &[Vec<ComplexEntry>],
    ) -> Result<Vec<ComplexExpr>, ConfigError> {
        let (d, k) = (self.manifold.dim, self.bundle.k);
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(ConfigError::Invalid(format!(
                "{what} must be a {k}x{k} matrix"
            )));
        }
        rows.iter()
            .flatten()
            .map(|e| ComplexExpr::parse(&e.re.text(), &e.im.text(), d).map_err(ConfigError::from))
            .collect()
    }

    fn form(&self) -> Result<FiberForm, ConfigError> {
        let k = self.bundle.k;
        let Some(rows) = &self.bundle.form_s else {
            return Ok(FiberForm::identity(k));
        };
        let exprs = self.matrix("form_S", rows)?;
        let data = exprs
            .iter()
            .map(|e| {
                let (re, im) = (e.re.constant_value(), e.im.constant_value());
                match (re, im) {
                    (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                    _ => Err(ConfigError::Invalid(
                        "form_S entries must be constants".into(),
                    )),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FiberForm::new(Mat::from_vec(k, k, data))?)
    }

    /// Sample points for the hermiticity check: the configured pairs and the
    /// sampling box, padded with a deterministic lattice.
    fn check_points(&self) -> Vec<Vec<f64>> {
        let d = self.manifold.dim;
        let mut pts: Vec<Vec<f64>> = self
            .points
            .iter()
            .flat_map(|p| [p.x.clone(), p.xp.clone()])
            .collect();
        let (lo, hi) = match &self.sampling {
            Some(s) if s.lo.len() == d && s.hi.len() == d => (s.lo.clone(), s.hi.clone()),
            _ => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for p in &pts {
                    for i in 0..d {
                        lo[i] = lo[i].min(p[i]);
                        hi[i] = hi[i].max(p[i]);
                    }
                }
                if pts.is_empty() {
                    (vec![0.5; d], vec![1.5; d])
                } else {
                    (lo, hi)
                }
            }
        };
        let mut i = 0usize;
        while pts.len() < HERMITICITY_SAMPLES {
            // low-discrepancy fill of the box
            let p = (0..d)
                .map(|c| {
                    let base = [
                        0.618_033_988_749_895,
                        0.754_877_666_246_693,
                        0.569_840_290_998_053,
                    ][c % 3];
                    let u = ((i + 1) as f64 * base).fract();
                    lo[c] + u * (hi[c] - lo[c])
                })
                .collect();
            pts.push(p);
            i += 1;
        }
        pts
    }

    pub fn build(self) -> Result<Scenario, ConfigError> {
        let d = self.manifold.dim;
        let k = self.bundle.k;
        if d == 0 || k == 0 {
            return Err(ConfigError::Invalid(
                "dimension and fiber rank must be positive".into(),
            ));
        }
        let n = &self.numerics;
        if n.steps == 0 || n.quad_nodes == 0 || n.newton_max_iter == 0 {
            return Err(ConfigError::Invalid(
                "numerics counts must be positive".into(),
            ));
        }
        if !(n.newton_tol > 0.0 && n.conjugate_tol > 0.0) {
            return Err(ConfigError::Invalid(
                "numerics tolerances must be positive".into(),
            ));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.x.len() != d || p.xp.len() != d || p.v_guess.as_ref().is_some_and(|v| v.len() != d)
            {
                return Err(ConfigError::Invalid(format!(
                    "point pair {i} does not have dimension {d}"
                )));
            }
        }
        if let Some(s) = &self.sampling {
            if s.lo.len() != d
                || s.hi.len() != d
                || !(0.0 < s.min_length && s.min_length <= s.max_length)
            {
                return Err(ConfigError::Invalid(
                    "sampling box or length range is malformed".into(),
                ));
            }
        }
        let metric = self.metric()?;
        let form = self.form()?;
        let a = match &self.bundle.a {
            None => (0..d).map(|_| vec![ComplexExpr::zero(); k * k]).collect(),
            Some(list) => {
                if list.len() != d {
                    return Err(ConfigError::Invalid(format!(
                        "A needs {d} matrices, got {}",
                        list.len()
                    )));
                }
                list.iter()
                    .enumerate()
                    .map(|(mu, m)| self.matrix(&format!("A[{mu}]"), m))
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        let b = match &self.bundle.b {
            None => vec![ComplexExpr::zero(); k * k],
            Some(m) => self.matrix("B", m)?,
        };
        let gauge = GaugeFields::new(d, k, a, b)?;
        gauge.validate(&form, &self.check_points(), HERMITICITY_TOL)?;
        Ok(Scenario {
            config: self,
            metric,
            gauge,
            form,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"
name = "s"
[manifold]
dim = 2
metric = "sphere2"
[bundle]
k = 1
B = [[{ re = "-1" }]]
[[points]]
x = [1.0, 0.2]
xp = [1.2, 0.5]
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = ScenarioConfig::from_toml(SPHERE).unwrap();
        assert_eq!(c.numerics, NumericsConfig::default());
        let s = c.build().unwrap();
        assert_eq!(s.metric.name(), "sphere2");
        assert_eq!(s.gauge.k(), 1);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ScenarioConfig::from_toml(SPHERE).unwrap();
        let again = ScenarioConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_non_hermitian_potential() {
        let text = SPHERE.replace(
            r#"B = [[{ re = "-1" }]]"#,
            r#"B = [[{ re = "-1", im = "x0" }]]"#,
        );
        let err = ScenarioConfig::from_toml(&text)
            .unwrap()
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("hermiticity"), "{err}");
    }

    #[test]
    fn rejects_asymmetric_metric() {
        let text = SPHERE.replace(
            r#"metric = "sphere2""#,
            r#"metric = [["1", "x0"], ["0", "1"]]"#,
        );
        assert!(ScenarioConfig::from_toml(&text).unwrap().build().is_err());
    }

    #[test]
    fn rejects_singular_form() {
        let text = SPHERE.replace("k = 1", "k = 1\nform_S = [[{ re = 0 }]]");
        assert!(ScenarioConfig::from_toml(&text).unwrap().build().is_err());
    }

    #[test]
    fn bare_entries_are_real() {
        let text = SPHERE.replace(r#"B = [[{ re = "-1" }]]"#, "B = [[-1]]\nform_S = [[2]]");
        let s = ScenarioConfig::from_toml(&text).unwrap().build().unwrap();
        assert_eq!(s.form.matrix()[(0, 0)], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = SPHERE.replace("[bundle]", "[bundle]\nextra = 1");
        assert!(ScenarioConfig::from_toml(&text).is_err());
        let text = SPHERE.replace(r#"{ re = "-1" }"#, r#"{ rea = "-1" }"#);
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }
}
