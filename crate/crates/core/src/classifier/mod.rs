//! k-type slant helix classification for both curve families.
//!
//! A curve is a k-type slant helix when some non-zero constant vector `U`
//! makes `g(V_{k+1}, U)` constant, with `V1..V4 = T, N, B1, B2`. Each family
//! has closed-form conditions on its curvatures for some k, explicit axis
//! constructions, and an implication structure between the k values. Every
//! verdict is cross-checked against a nullspace oracle working directly on
//! the synthesized frames.

mod oracle;
pub mod partially_null;
pub mod pseudo_null;

use std::collections::BTreeMap;
use std::fmt;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{canonical_frame, Frame, FrameKind};
use crate::integrator::{integrate_frame, CurveTrace, DriftMode, IntegrateOptions};
use crate::minkowski::{metric, Vec4};
use crate::profile::{CurvatureProfile, ScalarFn};
use crate::pseudohyperbolic::{self, PseudoHyperbolicReport};
use crate::verifier::{validate_axis, AxisValidation};

pub use oracle::{oracle_detect, OracleResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance on closed-form conditions.
    pub cond: f64,
    /// Axis constancy tolerance, scaled by `1 + max‖U‖`.
    pub axis: f64,
    /// Oracle threshold per square root of the row count.
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            cond: 1e-6,
            axis: 1e-6,
            oracle: 1e-7,
        }
    }
}

impl Tolerances {
    pub fn axis_limit(&self, scale: f64) -> f64 {
        self.axis * (1.0 + scale)
    }

    pub fn oracle_limit(&self, rows: usize) -> f64 {
        self.oracle * (rows as f64).sqrt()
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [("cond", self.cond), ("axis", self.axis), ("oracle", self.oracle)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Precondition(format!("tolerance {name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Undetermined,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }

    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Undetermined => "undetermined",
        })
    }
}

/// Which construction produced an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisSource {
    /// `(τ/κ)T + B1 + B2`, constant-ratio partially null curves.
    RatioAxisWithB1,
    /// `(τ/κ)T + B2`, constant-ratio partially null curves.
    RatioAxis,
    /// Axis with `g(N, U) = 1` of the affine-ratio family.
    NormalAxis,
    /// Axis with `g(B1, U) = 1` of a partially null curve.
    BinormalAxis,
    /// `−ρ'T + ρN + B2` with `ρ = σ/τ` quadratic.
    QuadraticAxis,
    /// Axis with `g(B1, U) = 1` of a pseudo null curve.
    BinormalPseudoAxis,
    /// Constant vector recovered by the nullspace oracle.
    Oracle,
    /// The constant first binormal of a partially null curve.
    TrivialB1,
}

impl AxisSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisSource::RatioAxisWithB1 => "ratio-axis-with-b1",
            AxisSource::RatioAxis => "ratio-axis",
            AxisSource::NormalAxis => "normal-axis",
            AxisSource::BinormalAxis => "binormal-axis",
            AxisSource::QuadraticAxis => "quadratic-axis",
            AxisSource::BinormalPseudoAxis => "binormal-pseudo-axis",
            AxisSource::Oracle => "oracle",
            AxisSource::TrivialB1 => "trivial-b1",
        }
    }
}

impl fmt::Display for AxisSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Frame coordinates `(u1, u2, u3, u4)` of an ambient vector, so that
/// `frame.combine(u) == v`. Uses the dual pairings of each family.
pub fn frame_coefficients(frame: &Frame, kind: FrameKind, v: &Vec4) -> [f64; 4] {
    let g = |w: &Vec4| metric(w, v);
    match kind {
        FrameKind::PartiallyNull => [g(&frame.t), g(&frame.n), g(&frame.b2), g(&frame.b1)],
        FrameKind::PseudoNull => [g(&frame.t), g(&frame.b2), g(&frame.b1), g(&frame.n)],
    }
}

/// A candidate constant vector `U = u1 T + u2 N + u3 B1 + u4 B2`, sampled on
/// the grid of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisCandidate {
    pub k: usize,
    pub source: AxisSource,
    pub coefficients: Vec<[f64; 4]>,
    /// `U(s_i)` in ambient coordinates.
    pub vectors: Vec<Vec4>,
}

impl AxisCandidate {
    pub fn from_coefficients(
        trace: &CurveTrace,
        k: usize,
        source: AxisSource,
        coefficients: Vec<[f64; 4]>,
    ) -> Result<Self> {
        if coefficients.len() != trace.len() {
            return Err(Error::GridMismatch {
                candidate: coefficients.len(),
                trace: trace.len(),
            });
        }
        let vectors = trace
            .frames
            .iter()
            .zip(&coefficients)
            .map(|(f, u)| f.combine(*u))
            .collect();
        Ok(AxisCandidate {
            k,
            source,
            coefficients,
            vectors,
        })
    }

    /// A fixed ambient vector repeated over the trace grid.
    pub fn constant(trace: &CurveTrace, k: usize, source: AxisSource, u: Vec4) -> Self {
        AxisCandidate {
            k,
            source,
            coefficients: trace
                .frames
                .iter()
                .map(|f| frame_coefficients(f, trace.kind, &u))
                .collect(),
            vectors: vec![u; trace.len()],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        AxisCandidate {
            k: self.k,
            source: self.source,
            coefficients: self.coefficients.iter().map(|u| u.map(|x| x * factor)).collect(),
            vectors: self.vectors.iter().map(|v| *v * factor).collect(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn at_start(&self) -> Vec4 {
        self.vectors[0]
    }
}

/// Validates a candidate and turns a failure into an inconsistency error.
pub fn checked_axis(
    trace: &CurveTrace,
    candidate: AxisCandidate,
    tol: &Tolerances,
) -> Result<(AxisCandidate, AxisValidation)> {
    let v = validate_axis(trace, &candidate, tol)?;
    if !v.pass {
        return Err(Error::Inconsistent(format!(
            "{} axis for k = {} fails validation: max |dU/ds| = {:e}, g variance = {:e}",
            candidate.source, candidate.k, v.max_du, v.g_variance
        )));
    }
    Ok((candidate, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub value: f64,
    pub residual: f64,
}

pub type FittedConstants = BTreeMap<String, FittedConstant>;

/// Auxiliary functions of the partially null 2-type construction and the
/// pseudo null 3-type condition, sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedQuantities {
    pub s: Vec<f64>,
    /// `θ(s) = ∫_{s_min}^s κ`.
    pub theta: Vec<f64>,
    /// `τ/κ`, the ratio as a function of `θ` along the grid.
    pub ratio: Vec<f64>,
    /// `∫_{s_min}^s τ / √(1 + σ²)`.
    pub epsilon: Vec<f64>,
    /// First coefficient of the 2-type partially null axis, constants `(1, 0, 0)`.
    pub v1: Vec<f64>,
}

pub fn derived_quantities(p: &CurvatureProfile, grid: &[f64]) -> Result<DerivedQuantities> {
    let theta = crate::calculus::cumulative_integral(|s| p.kappa.value_or_nan(s), grid)?;
    let mut ratio = Vec::with_capacity(grid.len());
    for &s in grid {
        let c = p.eval(s)?;
        ratio.push(c.tau / c.kappa);
    }
    let epsilon = crate::calculus::cumulative_integral(
        |s| {
            let (t, g) = (p.tau.value_or_nan(s), p.sigma.value_or_nan(s));
            t / (1.0 + g * g).sqrt()
        },
        grid,
    )?;
    let v1 = if p.kind == FrameKind::PartiallyNull && grid.len() >= 4 {
        partially_null::binormal_coefficients(p, grid, [1.0, 0.0, 0.0])?
            .iter()
            .map(|u| u[0])
            .collect()
    } else {
        Vec::new()
    };
    Ok(DerivedQuantities {
        s: grid.to_vec(),
        theta,
        ratio,
        epsilon,
        v1,
    })
}

/// Applies the implication graph of the family to raw per-k verdicts.
///
/// Partially null: `0 ⇒ {1, 2, 3}`, `1 ⇒ 2`, `3 ⇒ {0, 1, 2}`, and
/// therefore `No` at 0 forces `No` at 3 and vice versa. Pseudo null:
/// `1 ⇒ 2`, and `0` is never realized. Implications only fill
/// `Undetermined` entries; a contradiction with an existing verdict is
/// reported and left in place.
pub fn implication_closure(kind: FrameKind, raw: [Verdict; 4]) -> ([Verdict; 4], Vec<String>) {
    use Verdict::*;
    let mut v = raw;
    let mut flags = Vec::new();
    let rules: &[(usize, Verdict, usize, Verdict)] = match kind {
        FrameKind::PartiallyNull => &[
            (0, Yes, 1, Yes),
            (0, Yes, 2, Yes),
            (0, Yes, 3, Yes),
            (1, Yes, 2, Yes),
            (3, Yes, 0, Yes),
            (3, Yes, 1, Yes),
            (3, Yes, 2, Yes),
            (0, No, 3, No),
            (3, No, 0, No),
        ],
        FrameKind::PseudoNull => &[(1, Yes, 2, Yes), (2, No, 1, No)],
    };
    loop {
        let mut changed = false;
        for &(from, premise, to, implied) in rules {
            if v[from] != premise {
                continue;
            }
            if v[to] == Undetermined {
                v[to] = implied;
                changed = true;
            } else if v[to] != implied {
                let flag = format!(
                    "inconsistent: k{from} {premise} implies k{to} {implied}, found {}",
                    v[to]
                );
                if !flags.contains(&flag) {
                    flags.push(flag);
                }
            }
        }
        if !changed {
            break;
        }
    }
    if kind == FrameKind::PseudoNull && v[0] == Yes {
        flags.push("inconsistent: pseudo null curves admit no 0-type axis".into());
    }
    (v, flags)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub tol: Tolerances,
    /// Integration step; defaults to `1e-3 · (s_max − s_min)`.
    pub h: Option<f64>,
    pub drift_mode: DriftMode,
    /// Constants `(c1, c2, c3)` of the partially null 2-type axis.
    pub binormal_constants: [f64; 3],
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: Tolerances::default(),
            h: None,
            drift_mode: DriftMode::Monitor,
            binormal_constants: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub verdict: Verdict,
    pub sigma_min: f64,
    pub threshold: f64,
}

impl From<&OracleResult> for OracleSummary {
    fn from(o: &OracleResult) -> Self {
        OracleSummary {
            verdict: o.verdict,
            sigma_min: o.sigma_min,
            threshold: o.threshold,
        }
    }
}

/// Per-k detail of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KCheck {
    /// Verdict of the closed-form condition and axis, before closure.
    pub condition: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_residual: Option<f64>,
    pub oracle: OracleSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub k: usize,
    pub source: AxisSource,
    #[serde(rename = "U_at_s0")]
    pub u_at_s0: [f64; 4],
    #[serde(rename = "max_dU")]
    pub max_du: f64,
    pub g_mean: f64,
    pub g_variance: f64,
    pub pass: bool,
}

impl AxisReport {
    pub fn new(c: &AxisCandidate, v: &AxisValidation) -> Self {
        AxisReport {
            k: c.k,
            source: c.source,
            u_at_s0: c.at_start().to_array(),
            max_du: v.max_du,
            g_mean: v.g_mean,
            g_variance: v.g_variance,
            pass: v.pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub label: String,
    pub kind: FrameKind,
    pub verdicts: BTreeMap<String, Verdict>,
    pub checks: BTreeMap<String, KCheck>,
    pub constants: FittedConstants,
    pub axes: Vec<AxisReport>,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudohyperbolic: Option<PseudoHyperbolicReport>,
    pub max_gram_residual: f64,
}

pub fn k_key(k: usize) -> String {
    format!("k{k}")
}

impl ClassificationReport {
    pub fn verdict(&self, k: usize) -> Verdict {
        self.verdicts.get(&k_key(k)).copied().unwrap_or(Verdict::Undetermined)
    }

    pub fn check(&self, k: usize) -> &KCheck {
        &self.checks[&k_key(k)]
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).map(|c| c.value)
    }

    pub fn axes_for(&self, k: usize) -> impl Iterator<Item = &AxisReport> {
        self.axes.iter().filter(move |a| a.k == k)
    }

    /// Fixed-width human-readable summary.
    pub fn render_table(&self) -> String {
        let mut out = format!("{} ({})\n", self.label, self.kind);
        out.push_str(&format!(
            "{:<4} {:<13} {:<13} {:<13} {:>13} {:>13}\n",
            "k", "verdict", "condition", "oracle", "sigma_min", "threshold"
        ));
        for k in 0..4 {
            let c = self.check(k);
            out.push_str(&format!(
                "{:<4} {:<13} {:<13} {:<13} {:>13.3e} {:>13.3e}\n",
                k,
                self.verdict(k).to_string(),
                c.condition.to_string(),
                c.oracle.verdict.to_string(),
                c.oracle.sigma_min,
                c.oracle.threshold
            ));
        }
        if !self.constants.is_empty() {
            out.push_str("constants:\n");
            for (name, c) in &self.constants {
                out.push_str(&format!(
                    "  {name:<10} {:>22.15e}  residual {:.3e}\n",
                    c.value, c.residual
                ));
            }
        }
        for a in &self.axes {
            out.push_str(&format!(
                "axis k{} {:<22} max|dU| {:.3e}  g {:.12} {}\n",
                a.k,
                a.source.as_str(),
                a.max_du,
                a.g_mean,
                if a.pass { "pass" } else { "FAIL" }
            ));
        }
        if let Some(h) = &self.pseudohyperbolic {
            out.push_str(&format!("pseudohyperbolic family: {}\n", h.is_h3_family));
        }
        for f in &self.flags {
            out.push_str(&format!("flag: {f}\n"));
        }
        out
    }
}

/// Partially null profiles are classified with `σ ≡ 0`.
fn normalized_profile(p: &CurvatureProfile, flags: &mut Vec<String>) -> CurvatureProfile {
    if p.kind == FrameKind::PartiallyNull && p.sigma.as_constant() != Some(0.0) {
        flags.push("sigma set to zero for the partially null family".into());
        let mut q = p.clone();
        q.sigma = ScalarFn::constant(0.0);
        q
    } else {
        p.clone()
    }
}

/// Synthesizes the curve from the canonical frame and classifies it.
pub fn classify(p: &CurvatureProfile, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    opts.tol.check()?;
    let mut flags = Vec::new();
    let q = normalized_profile(p, &mut flags);
    let mut iopts = IntegrateOptions::for_profile(&q).with_drift_mode(opts.drift_mode);
    if let Some(h) = opts.h {
        iopts = iopts.with_step(h);
    }
    let trace = integrate_frame(&q, &canonical_frame(q.kind), Vec4::ZERO, &iopts)?;
    let mut report = classify_trace(&trace, opts)?;
    flags.append(&mut report.flags);
    report.flags = flags;
    Ok(report)
}

pub(crate) struct Partial {
    pub raw: [Verdict; 4],
    pub residuals: [Option<f64>; 4],
    pub constants: FittedConstants,
    pub axes: Vec<AxisReport>,
    pub flags: Vec<String>,
    pub pseudohyperbolic: Option<PseudoHyperbolicReport>,
}

/// Classifies an existing trace; its profile supplies the curvatures.
pub fn classify_trace(trace: &CurveTrace, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    opts.tol.check()?;
    let tol = &opts.tol;
    if trace.len() < 9 {
        return Err(Error::Precondition(
            "classification needs at least 9 grid points".into(),
        ));
    }
    let oracles: Vec<OracleResult> = (0..4).map(|k| oracle_detect(trace, k, tol)).collect::<Result<_>>()?;
    let mut part = match trace.kind {
        FrameKind::PartiallyNull => partially_null::classify_conditions(trace, opts)?,
        FrameKind::PseudoNull => pseudo_null::classify_conditions(trace, &oracles, opts)?,
    };
    if trace.kind == FrameKind::PseudoNull {
        part.pseudohyperbolic = Some(pseudohyperbolic::report(trace, tol)?);
        if let Some(h) = &part.pseudohyperbolic {
            if h.is_h3_family {
                if part.raw[1] == Verdict::Yes {
                    part.flags
                        .push("inconsistent: quadratic ratio test accepts a pseudohyperbolic curve".into());
                }
                part.raw[1] = Verdict::No;
            }
        }
    }

    let mut flags: Vec<String> = trace.warnings.iter().map(|w| format!("warning: {w}")).collect();
    flags.append(&mut part.flags);
    // compare condition verdicts with the oracle where both are decisive
    for (k, o) in oracles.iter().enumerate() {
        let c = part.raw[k];
        if c != Verdict::Undetermined && o.verdict != Verdict::Undetermined && c != o.verdict {
            flags.push(format!("oracle disagrees at k{k}: condition {c}, oracle {}", o.verdict));
        }
        if let Some(note) = &o.note {
            flags.push(format!("oracle k{k}: {note}"));
        }
    }
    let (closed, mut closure_flags) = implication_closure(trace.kind, part.raw);
    flags.append(&mut closure_flags);

    let mut verdicts = BTreeMap::new();
    let mut checks = BTreeMap::new();
    for k in 0..4 {
        verdicts.insert(k_key(k), closed[k]);
        checks.insert(
            k_key(k),
            KCheck {
                condition: part.raw[k],
                condition_residual: part.residuals[k],
                oracle: OracleSummary::from(&oracles[k]),
            },
        );
    }
    debug!("{}: raw {:?} closed {:?}", trace.profile.label, part.raw, closed);
    info!(
        "{}: k0 {} k1 {} k2 {} k3 {}",
        trace.profile.label, closed[0], closed[1], closed[2], closed[3]
    );
    Ok(ClassificationReport {
        label: trace.profile.label.clone(),
        kind: trace.kind,
        verdicts,
        checks,
        constants: part.constants,
        axes: part.axes,
        flags,
        pseudohyperbolic: part.pseudohyperbolic,
        max_gram_residual: trace.max_gram_residual,
    })
}

/// Combines a passed condition with axis validation and the oracle.
pub(crate) fn settle(
    condition: bool,
    axis_pass: Option<bool>,
    oracle: Verdict,
    k: usize,
    flags: &mut Vec<String>,
) -> Verdict {
    if !condition {
        return Verdict::No;
    }
    match axis_pass {
        Some(true) => Verdict::Yes,
        _ if oracle == Verdict::Yes => {
            flags.push(format!("k{k}: condition holds, axis not validated, oracle confirms"));
            Verdict::Yes
        }
        _ => {
            flags.push(format!(
                "k{k}: condition holds but neither the axis nor the oracle confirms"
            ));
            Verdict::Undetermined
        }
    }
}
