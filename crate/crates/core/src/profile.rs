//! Curvature profiles `κ(s), τ(s), σ(s)` on an arc-length interval.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, EvalFault, Expr};
use crate::frame::FrameKind;

/// Samples taken by [`CurvatureProfile::validate`].
pub const VALIDATION_SAMPLES: usize = 1001;
const ZERO_TOL: f64 = 1e-12;

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    s: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if s.len() != values.len() {
            return Err(Error::InvalidProfile(format!(
                "sample table has {} abscissae and {} values",
                s.len(),
                values.len()
            )));
        }
        if s.len() < 2 {
            return Err(Error::InvalidProfile("sample table needs at least 2 points".into()));
        }
        if s.windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
            || s.iter().chain(&values).any(|x| !x.is_finite())
        {
            return Err(Error::InvalidProfile(
                "sample abscissae must be finite and strictly increasing".into(),
            ));
        }
        let n = s.len();
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (values[k + 1] - values[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                let (d0, d1) = (delta[k - 1], delta[k]);
                if d0 * d1 > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(MonotoneCubic { s, values, slopes })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        let n = self.s.len();
        let (lo, hi) = (self.s[0], self.s[n - 1]);
        let slack = 1e-9 * (hi - lo);
        if !(x >= lo - slack && x <= hi + slack) {
            return None;
        }
        let x = x.clamp(lo, hi);
        let k = match self.s.partition_point(|&v| v <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let h = self.s[k + 1] - self.s[k];
        let t = (x - self.s[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(h00 * self.values[k] + h10 * h * self.slopes[k] + h01 * self.values[k + 1] + h11 * h * self.slopes[k + 1])
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// One curvature function: a parsed expression or a sample table.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFn {
    Expr(Arc<Expr>),
    Table(Arc<MonotoneCubic>),
}

impl ScalarFn {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(ScalarFn::Expr(Arc::new(parse_expression(text)?)))
    }

    pub fn constant(v: f64) -> Self {
        ScalarFn::Expr(Arc::new(Expr::num(v)))
    }

    pub fn table(s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(ScalarFn::Table(Arc::new(MonotoneCubic::new(s, values)?)))
    }

    pub fn eval(&self, s: f64) -> Result<f64, EvalFault> {
        match self {
            ScalarFn::Expr(e) => e.eval(s),
            ScalarFn::Table(t) => t.eval(s).ok_or_else(|| EvalFault {
                reason: format!("s = {s} outside the sample table"),
            }),
        }
    }

    /// `eval` for numerical kernels that test finiteness themselves.
    pub fn value_or_nan(&self, s: f64) -> f64 {
        self.eval(s).unwrap_or(f64::NAN)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarFn::Expr(e) => e.as_constant(),
            ScalarFn::Table(_) => None,
        }
    }

    fn to_spec(&self) -> ScalarSpec {
        match self {
            ScalarFn::Expr(e) => ScalarSpec::Expr(e.to_string()),
            ScalarFn::Table(t) => ScalarSpec::Table {
                s: t.abscissae().to_vec(),
                values: t.values().to_vec(),
            },
        }
    }
}

/// Pointwise curvature values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvatures {
    pub kappa: f64,
    pub tau: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub kind: FrameKind,
    pub kappa: ScalarFn,
    pub tau: ScalarFn,
    pub sigma: ScalarFn,
    pub domain: (f64, f64),
    pub label: String,
}

/// Non-fatal findings of [`CurvatureProfile::validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationNotes {
    pub warnings: Vec<String>,
}

impl CurvatureProfile {
    pub fn new(
        kind: FrameKind,
        kappa: ScalarFn,
        tau: ScalarFn,
        sigma: ScalarFn,
        domain: (f64, f64),
        label: impl Into<String>,
    ) -> Result<Self> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidProfile(format!(
                "domain [{a}, {b}] is empty or not finite"
            )));
        }
        Ok(CurvatureProfile {
            kind,
            kappa,
            tau,
            sigma,
            domain,
            label: label.into(),
        })
    }

    /// Partially null profile with `σ ≡ 0`, from expression strings.
    pub fn partially_null(kappa: &str, tau: &str, domain: (f64, f64)) -> Result<Self> {
        let label = format!("pn[kappa={kappa}; tau={tau}]");
        Self::new(
            FrameKind::PartiallyNull,
            ScalarFn::parse(kappa)?,
            ScalarFn::parse(tau)?,
            ScalarFn::constant(0.0),
            domain,
            label,
        )
    }

    /// Pseudo null profile with `κ ≡ 1`, from expression strings.
    pub fn pseudo_null(tau: &str, sigma: &str, domain: (f64, f64)) -> Result<Self> {
        let label = format!("psn[tau={tau}; sigma={sigma}]");
        Self::new(
            FrameKind::PseudoNull,
            ScalarFn::constant(1.0),
            ScalarFn::parse(tau)?,
            ScalarFn::parse(sigma)?,
            domain,
            label,
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn s_min(&self) -> f64 {
        self.domain.0
    }

    pub fn s_max(&self) -> f64 {
        self.domain.1
    }

    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    pub fn contains(&self, s: f64) -> bool {
        let slack = 1e-9 * self.length();
        s >= self.domain.0 - slack && s <= self.domain.1 + slack
    }

    fn fault(&self, s: f64, which: &str, f: EvalFault) -> Error {
        Error::Eval {
            s,
            reason: format!("{which}: {}", f.reason),
        }
    }

    pub fn eval(&self, s: f64) -> Result<Curvatures> {
        if !self.contains(s) {
            return Err(Error::OutOfDomain {
                s,
                min: self.domain.0,
                max: self.domain.1,
            });
        }
        Ok(Curvatures {
            kappa: self.kappa.eval(s).map_err(|e| self.fault(s, "kappa", e))?,
            tau: self.tau.eval(s).map_err(|e| self.fault(s, "tau", e))?,
            sigma: self.sigma.eval(s).map_err(|e| self.fault(s, "sigma", e))?,
        })
    }

    /// `n` uniform samples of the domain, endpoints included.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = self.domain;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    /// Checks the family assumptions by sampling.
    ///
    /// Hard failures: non-finite values anywhere; `κ = 0` (partially null);
    /// `κ ≠ 1` or `τ = 0` (pseudo null). Sampled zeros of the remaining
    /// curvature (`τ` for partially null, `σ` for pseudo null) and a
    /// non-zero `σ` on a partially null profile are reported as warnings.
    pub fn validate(&self) -> Result<ValidationNotes> {
        let mut notes = ValidationNotes::default();
        let mut zero_tau = None;
        let mut zero_sigma = None;
        let mut nonzero_sigma = None;
        for s in self.sample_grid(VALIDATION_SAMPLES) {
            let c = self.eval(s)?;
            let bad = |what: &str| Err(Error::InvalidProfile(format!("{}: {what} at s = {s}", self.label)));
            match self.kind {
                FrameKind::PartiallyNull => {
                    if c.kappa.abs() <= ZERO_TOL {
                        return bad("kappa vanishes");
                    }
                    if c.tau.abs() <= ZERO_TOL {
                        zero_tau.get_or_insert(s);
                    }
                    if c.sigma != 0.0 {
                        nonzero_sigma.get_or_insert(s);
                    }
                }
                FrameKind::PseudoNull => {
                    if (c.kappa - 1.0).abs() > ZERO_TOL {
                        return bad("kappa differs from 1");
                    }
                    if c.tau.abs() <= ZERO_TOL {
                        return bad("tau vanishes");
                    }
                    if c.sigma.abs() <= ZERO_TOL {
                        zero_sigma.get_or_insert(s);
                    }
                }
            }
        }
        if let Some(s) = zero_tau {
            notes.warnings.push(format!("tau vanishes at s = {s}"));
        }
        if let Some(s) = zero_sigma {
            notes.warnings.push(format!("sigma vanishes at s = {s}"));
        }
        if let Some(s) = nonzero_sigma {
            notes
                .warnings
                .push(format!("partially null profile with non-zero sigma (first at s = {s})"));
        }
        Ok(notes)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ProfileDoc = serde_json::from_str(text)?;
        doc.into_profile()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_doc(&self) -> ProfileDoc {
        ProfileDoc {
            kind: self.kind,
            domain: [self.domain.0, self.domain.1],
            kappa: Some(self.kappa.to_spec()),
            tau: self.tau.to_spec(),
            sigma: Some(self.sigma.to_spec()),
            label: Some(self.label.clone()),
        }
    }
}

/// A curvature function as written in a profile document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Number(f64),
    Expr(String),
    Table { s: Vec<f64>, values: Vec<f64> },
}

impl ScalarSpec {
    fn build(&self) -> Result<ScalarFn> {
        match self {
            ScalarSpec::Number(v) => Ok(ScalarFn::constant(*v)),
            ScalarSpec::Expr(text) => ScalarFn::parse(text),
            ScalarSpec::Table { s, values } => ScalarFn::table(s.clone(), values.clone()),
        }
    }
}

/// JSON profile document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDoc {
    pub kind: FrameKind,
    pub domain: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<ScalarSpec>,
    pub tau: ScalarSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ProfileDoc {
    pub fn into_profile(self) -> Result<CurvatureProfile> {
        let default_kappa = match self.kind {
            FrameKind::PseudoNull => Some(ScalarFn::constant(1.0)),
            FrameKind::PartiallyNull => None,
        };
        let kappa = match (&self.kappa, default_kappa) {
            (Some(spec), _) => spec.build()?,
            (None, Some(k)) => k,
            (None, None) => return Err(Error::InvalidProfile("partially null profile needs kappa".into())),
        };
        let sigma = match (&self.sigma, self.kind) {
            (Some(spec), _) => spec.build()?,
            (None, FrameKind::PartiallyNull) => ScalarFn::constant(0.0),
            (None, FrameKind::PseudoNull) => {
                return Err(Error::InvalidProfile("pseudo null profile needs sigma".into()))
            }
        };
        let tau = self.tau.build()?;
        let label = self.label.unwrap_or_else(|| format!("{}", self.kind));
        CurvatureProfile::new(self.kind, kappa, tau, sigma, (self.domain[0], self.domain[1]), label)
    }
}
