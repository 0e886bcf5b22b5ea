//! Report records and their JSON and CSV encodings.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use seeley_core::geodesic::ConjugateReport;
use seeley_core::linalg::Mat;
use seeley_core::Complex64;

use crate::config::{PointPair, ScenarioConfig};

/// Row-major complex matrix with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixOut {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&Mat<Complex64>> for MatrixOut {
    fn from(m: &Mat<Complex64>) -> Self {
        MatrixOut {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateOut {
    pub pass: bool,
    pub min_normalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_separation: Option<f64>,
}

impl From<&ConjugateReport> for ConjugateOut {
    fn from(r: &ConjugateReport) -> Self {
        ConjugateOut {
            pass: r.pass,
            min_normalized: r.min_normalized,
            pair: r.pair,
            arc_separation: r.arc_separation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityOut {
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl IdentityOut {
    pub fn new(value: f64, tol: f64) -> Self {
        IdentityOut {
            value,
            tol,
            pass: value.is_finite() && value <= tol,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Residuals {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub symmetry: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pde: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fd_crosscheck: Vec<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub identities: BTreeMap<String, IdentityOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResult {
    pub pair: PointPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arc_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conjugate_report: Option<ConjugateOut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub f: Vec<MatrixOut>,
    pub residuals: Residuals,
}

impl PairResult {
    pub fn new(pair: PointPair) -> Self {
        PairResult {
            pair,
            sigma: None,
            delta: None,
            arc_length: None,
            conjugate_report: None,
            f: Vec::new(),
            residuals: Residuals::default(),
        }
    }
}

/// One row of the Borel demonstration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorelRow {
    pub n: usize,
    pub sup_estimate: f64,
    pub scale: f64,
    pub derivative_re: f64,
    pub derivative_im: f64,
    pub expected_re: f64,
    pub expected_im: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorelOut {
    pub point: f64,
    pub taylor_order: usize,
    pub taylor_defect: f64,
    pub fd_step: f64,
    pub rows: Vec<BorelRow>,
}

/// Everything that varies the output, resolved to concrete values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRun {
    pub command: String,
    pub order: usize,
    pub tol: f64,
    pub seed: u64,
    pub fd_crosscheck: bool,
    pub scenario: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub version: String,
    pub config_resolved: ResolvedRun,
    pub results: Vec<PairResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub borel: Option<BorelOut>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per pair and coefficient order; identities go on the `n = 0`
    /// row of their pair. Borel rows use `pair = -1`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "pair",
            "n",
            "x",
            "xp",
            "sigma",
            "delta",
            "symmetry",
            "pde",
            "fd_crosscheck",
            "rows",
            "cols",
            "f_re",
            "f_im",
            "identities",
        ])?;
        let num = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        for (i, r) in self.results.iter().enumerate() {
            let res = &r.residuals;
            let orders =
                r.f.len()
                    .max(res.symmetry.len())
                    .max(res.pde.len() + 1)
                    .max(1);
            for n in 0..orders {
                let fm = r.f.get(n);
                let ids = if n == 0 {
                    res.identities
                        .iter()
                        .map(|(k, v)| format!("{k}={:e}", v.value))
                        .collect::<Vec<_>>()
                        .join(";")
                } else {
                    String::new()
                };
                let pde = if n == 0 {
                    None
                } else {
                    res.pde.get(n - 1).copied()
                };
                out.write_record([
                    i.to_string(),
                    n.to_string(),
                    list(&r.pair.x),
                    list(&r.pair.xp),
                    num(r.sigma),
                    num(r.delta),
                    num(res.symmetry.get(n).copied()),
                    num(pde),
                    num(res.fd_crosscheck.get(n).copied()),
                    fm.map(|m| m.rows.to_string()).unwrap_or_default(),
                    fm.map(|m| m.cols.to_string()).unwrap_or_default(),
                    fm.map(|m| list(&m.re)).unwrap_or_default(),
                    fm.map(|m| list(&m.im)).unwrap_or_default(),
                    ids,
                ])?;
            }
        }
        if let Some(b) = &self.borel {
            for row in &b.rows {
                out.write_record([
                    "-1".to_string(),
                    row.n.to_string(),
                    format!("{:e}", b.point),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("{:e}", row.relative_error),
                    String::new(),
                    String::new(),
                    format!("{:e}", row.derivative_re),
                    format!("{:e}", row.derivative_im),
                    format!("sup={:e};scale={:e}", row.sup_estimate, row.scale),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
