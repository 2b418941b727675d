//! Axis validation against the definition and the two-sided regression suite.

use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::grid_derivative;
use crate::classifier::{classify, k_key, AxisCandidate, ClassificationReport, ClassifyOptions, Tolerances, Verdict};
use crate::error::{Error, Result};
use crate::frame::FrameKind;
use crate::integrator::CurveTrace;
use crate::minkowski::metric;
use crate::profile::ProfileDoc;
use crate::pseudohyperbolic::h3_type2_tau_form;

pub const DEFAULT_SEED: u64 = 20_241_014;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisValidation {
    pub k: usize,
    /// Largest `‖dU/ds‖` (Euclidean, finite differences) over the interior grid.
    pub max_du: f64,
    /// Largest `‖U‖` over the grid.
    pub max_norm: f64,
    pub g_mean: f64,
    pub g_variance: f64,
    pub pass: bool,
}

/// Checks that `U` is constant in ambient coordinates and pairs constantly
/// with `V_{k+1}`.
pub fn validate_axis(trace: &CurveTrace, candidate: &AxisCandidate, tol: &Tolerances) -> Result<AxisValidation> {
    let n = trace.len();
    if candidate.vectors.len() != n {
        return Err(Error::GridMismatch {
            candidate: candidate.vectors.len(),
            trace: n,
        });
    }
    if candidate.k > 3 {
        return Err(Error::Precondition(format!("k = {} is not in 0..=3", candidate.k)));
    }
    if n < 5 {
        return Err(Error::Precondition(
            "axis validation needs at least 5 grid points".into(),
        ));
    }
    let du = grid_derivative(&candidate.vectors, trace.h);
    let max_du = du[2..n - 2].iter().map(|d| d.norm_euclid()).fold(0.0, f64::max);
    let max_norm = candidate.vectors.iter().map(|u| u.norm_euclid()).fold(0.0, f64::max);
    let g: Vec<f64> = trace
        .frames
        .iter()
        .zip(&candidate.vectors)
        .map(|(f, u)| metric(&f.vector(candidate.k), u))
        .collect();
    let g_mean = g.iter().sum::<f64>() / n as f64;
    let g_variance = g.iter().map(|x| (x - g_mean) * (x - g_mean)).sum::<f64>() / n as f64;
    let nonzero = max_norm > 0.0;
    let pass = nonzero && max_du < tol.axis_limit(max_norm) && g_variance < tol.axis * tol.axis;
    Ok(AxisValidation {
        k: candidate.k,
        max_du,
        max_norm,
        g_mean,
        g_variance,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expectation {
    #[serde(rename = "Y")]
    Yes,
    #[serde(rename = "N")]
    No,
    /// Whatever the oracle decides.
    #[serde(rename = "oracle")]
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub profile: ProfileDoc,
    pub expected: BTreeMap<String, Expectation>,
}

impl Fixture {
    fn new(profile: ProfileDoc, expected: [Expectation; 4]) -> Self {
        Fixture {
            profile,
            expected: (0..4).map(|k| (k_key(k), expected[k])).collect(),
        }
    }

    pub fn label(&self) -> String {
        self.profile
            .label
            .clone()
            .unwrap_or_else(|| self.profile.kind.to_string())
    }
}

pub fn load_suite(text: &str) -> Result<Vec<Fixture>> {
    let suite: Vec<Fixture> = serde_json::from_str(text)?;
    for f in &suite {
        for key in f.expected.keys() {
            if !matches!(key.as_str(), "k0" | "k1" | "k2" | "k3") {
                return Err(Error::Malformed(format!(
                    "{}: unknown expectation key {key}",
                    f.label()
                )));
            }
        }
    }
    Ok(suite)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureResult {
    pub label: String,
    pub kind: Option<FrameKind>,
    pub passed: bool,
    pub expected: BTreeMap<String, Expectation>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub condition: BTreeMap<String, Verdict>,
    pub oracle: BTreeMap<String, Verdict>,
    pub oracle_sigma_min: BTreeMap<String, f64>,
    pub condition_residuals: BTreeMap<String, f64>,
    pub mismatches: Vec<String>,
    /// Decisive condition and oracle verdicts that differ.
    pub disagreements: Vec<String>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl FixtureResult {
    fn failed(label: String, expected: BTreeMap<String, Expectation>, error: &Error) -> Self {
        FixtureResult {
            label,
            kind: None,
            passed: false,
            expected,
            verdicts: BTreeMap::new(),
            condition: BTreeMap::new(),
            oracle: BTreeMap::new(),
            oracle_sigma_min: BTreeMap::new(),
            condition_residuals: BTreeMap::new(),
            mismatches: Vec::new(),
            disagreements: Vec::new(),
            flags: Vec::new(),
            error: Some(error.to_string()),
        }
    }

    fn from_report(expected: BTreeMap<String, Expectation>, r: &ClassificationReport) -> Self {
        let mut mismatches = Vec::new();
        let mut disagreements = Vec::new();
        let mut condition = BTreeMap::new();
        let mut oracle = BTreeMap::new();
        let mut sigma = BTreeMap::new();
        let mut residuals = BTreeMap::new();
        for k in 0..4 {
            let key = k_key(k);
            let c = r.check(k);
            condition.insert(key.clone(), c.condition);
            oracle.insert(key.clone(), c.oracle.verdict);
            sigma.insert(key.clone(), c.oracle.sigma_min);
            if let Some(res) = c.condition_residual {
                residuals.insert(key.clone(), res);
            }
            let got = r.verdict(k);
            match expected.get(&key) {
                Some(Expectation::Yes) if got != Verdict::Yes => {
                    mismatches.push(format!("{key}: expected yes, got {got}"))
                }
                Some(Expectation::No) if got != Verdict::No => {
                    mismatches.push(format!("{key}: expected no, got {got}"))
                }
                Some(Expectation::Oracle) if got != c.oracle.verdict => {
                    mismatches.push(format!("{key}: expected the oracle's {}, got {got}", c.oracle.verdict))
                }
                _ => {}
            }
            let decisive = c.condition != Verdict::Undetermined && c.oracle.verdict != Verdict::Undetermined;
            if decisive && c.condition != c.oracle.verdict {
                disagreements.push(format!("{key}: condition {}, oracle {}", c.condition, c.oracle.verdict));
            }
        }
        let inconsistent = r.flags.iter().any(|f| f.starts_with("inconsistent"));
        if inconsistent {
            mismatches.push("implication closure reported an inconsistency".into());
        }
        FixtureResult {
            label: r.label.clone(),
            kind: Some(r.kind),
            passed: mismatches.is_empty() && disagreements.is_empty(),
            expected,
            verdicts: r.verdicts.clone(),
            condition,
            oracle,
            oracle_sigma_min: sigma,
            condition_residuals: residuals,
            mismatches,
            disagreements,
            flags: r.flags.clone(),
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub fixtures: usize,
    pub passed: usize,
    pub failed: usize,
    pub disagreements: usize,
    pub results: Vec<FixtureResult>,
}

impl SuiteSummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<64} {:<5} {:<18} {:<18} {}\n",
            "fixture", "ok", "verdicts k0..k3", "expected", "notes"
        );
        let short = |v: Verdict| match v {
            Verdict::Yes => "Y",
            Verdict::No => "N",
            Verdict::Undetermined => "?",
        };
        let exp = |e: Option<&Expectation>| match e {
            Some(Expectation::Yes) => "Y",
            Some(Expectation::No) => "N",
            Some(Expectation::Oracle) => "o",
            None => "-",
        };
        for r in &self.results {
            let verdicts: Vec<&str> = (0..4)
                .map(|k| r.verdicts.get(&k_key(k)).map_or("-", |v| short(*v)))
                .collect();
            let expected: Vec<&str> = (0..4).map(|k| exp(r.expected.get(&k_key(k)))).collect();
            let mut notes: Vec<String> = r.mismatches.clone();
            notes.extend(r.disagreements.iter().cloned());
            notes.extend(r.error.iter().cloned());
            out.push_str(&format!(
                "{:<64} {:<5} {:<18} {:<18} {}\n",
                r.label,
                if r.passed { "pass" } else { "FAIL" },
                verdicts.join(" "),
                expected.join(" "),
                notes.join("; ")
            ));
        }
        out.push_str(&format!(
            "{} fixtures, {} passed, {} failed, {} oracle disagreements\n",
            self.fixtures, self.passed, self.failed, self.disagreements
        ));
        out
    }
}

/// Classifies every fixture (in parallel) and compares against the
/// expectations. Results are sorted by label.
pub fn run_suite(suite: &[Fixture], opts: &ClassifyOptions) -> SuiteSummary {
    if suite.is_empty() {
        warn!("empty suite: zero fixtures");
    }
    let mut results: Vec<FixtureResult> = suite
        .par_iter()
        .map(|f| {
            let label = f.label();
            match f.profile.clone().into_profile().and_then(|p| classify(&p, opts)) {
                Ok(report) => FixtureResult::from_report(f.expected.clone(), &report),
                Err(e) => FixtureResult::failed(label, f.expected.clone(), &e),
            }
        })
        .collect();
    results.sort_by(|a, b| a.label.cmp(&b.label));
    let passed = results.iter().filter(|r| r.passed).count();
    SuiteSummary {
        fixtures: results.len(),
        passed,
        failed: results.len() - passed,
        disagreements: results.iter().map(|r| r.disagreements.len()).sum(),
        results,
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn num(x: f64) -> String {
    if x < 0.0 {
        format!("({x})")
    } else {
        format!("{x}")
    }
}

fn doc(
    kind: FrameKind,
    kappa: Option<String>,
    tau: String,
    sigma: Option<String>,
    len: f64,
    label: String,
) -> ProfileDoc {
    use crate::profile::ScalarSpec::Expr;
    ProfileDoc {
        kind,
        domain: [0.0, len],
        kappa: kappa.map(Expr),
        tau: Expr(tau),
        sigma: sigma.map(Expr),
        label: Some(label),
    }
}

/// The bundled regression suite: 25 partially null and 25 pseudo null
/// profiles drawn from parametric families with known verdicts.
pub fn default_suite(seed: u64) -> Vec<Fixture> {
    use Expectation::{No as N, Oracle as O, Yes as Y};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| round4(rng.gen_range(lo..hi));
    let sign = |coin: f64| if coin < 0.5 { -1.0 } else { 1.0 };
    let pn = FrameKind::PartiallyNull;
    let psn = FrameKind::PseudoNull;
    let mut out = Vec::with_capacity(50);

    for i in 0..6 {
        let k = u(0.5, 3.0);
        let coin = u(0.0, 1.0);
        let t = sign(coin) * u(0.3, 3.0);
        let len = u(1.0, 2.0);
        let label = format!("pn-const-{i}(kappa={k},tau={t})");
        out.push(Fixture::new(
            doc(pn, Some(num(k)), num(t), None, len, label),
            [Y, Y, Y, Y],
        ));
    }
    for i in 0..6 {
        let (a, b) = (u(0.5, 2.0), u(0.2, 1.0));
        let coin = u(0.0, 1.0);
        let r = sign(coin) * u(0.5, 3.0);
        let len = u(1.0, 2.0);
        let kappa = format!("{a} + {b}*s^2");
        let tau = format!("{}*({kappa})", num(r));
        let label = format!("pn-ratio-{i}(a={a},b={b},ratio={r})");
        out.push(Fixture::new(doc(pn, Some(kappa), tau, None, len, label), [Y, Y, Y, Y]));
    }
    for i in 0..7 {
        let (a, b) = (u(0.5, 2.0), u(0.0, 1.0));
        let coin = u(0.0, 1.0);
        let c = sign(coin) * u(0.5, 2.0);
        let c0 = u(0.2, 1.0);
        let len = u(1.0, 2.0);
        let kappa = format!("{a} + {b}*s");
        let tau = format!("{}*({kappa})*({c0} + {a}*s + {b}*s^2/2)", num(c));
        let label = format!("pn-affine-{i}(a={a},b={b},C={c},c0={c0})");
        out.push(Fixture::new(doc(pn, Some(kappa), tau, None, len, label), [N, Y, Y, N]));
    }
    for i in 0..6 {
        let (a, b, w) = (u(1.0, 2.0), u(0.2, 0.6), u(1.0, 3.0));
        let (c, d) = (u(0.5, 2.0), u(0.5, 1.5));
        let len = u(1.0, 2.0);
        let kappa = format!("{a} + {b}*sin({w}*s)");
        let tau = format!("{c}*exp({d}*s)");
        let label = format!("pn-generic-{i}(a={a},b={b},w={w},c={c},d={d})");
        out.push(Fixture::new(doc(pn, Some(kappa), tau, None, len, label), [N, N, Y, N]));
    }

    for i in 0..9 {
        let (a, b) = (u(-1.0, 1.0), u(-1.0, 1.0));
        let (p, q) = (u(0.5, 2.0), u(-0.4, 0.4));
        let len = u(1.0, 2.0);
        let tau = format!("{p}*exp({}*s)", num(q));
        let sigma = format!("({tau})*(-s^2/2 + {}*s + {})", num(a), num(b));
        let label = format!("psn-quadratic-{i}(a={a},b={b},p={p},q={q})");
        out.push(Fixture::new(doc(psn, None, tau, Some(sigma), len, label), [N, Y, Y, O]));
    }
    for i in 0..8 {
        let c = u(-2.0, -0.25);
        let (l, m) = (u(0.1, 2.0), u(0.0, 2.0));
        let len = u(1.0, 2.0);
        let e = h3_type2_tau_form(c, l, m).expect("parameters in range");
        let tau = e.tau_expr();
        let sigma = format!("({c})*({tau})");
        let label = format!("psn-exp-h3-{i}(c={c},lambda={l},mu={m})");
        out.push(Fixture::new(doc(psn, None, tau, Some(sigma), len, label), [N, N, Y, O]));
    }
    for i in 0..8 {
        let (p, q) = (u(1.0, 2.0), u(0.0, 1.0));
        let (a, b, c) = (u(0.3, 1.5), u(0.5, 1.5), u(-1.0, 1.0));
        let len = u(1.0, 2.0);
        let tau = format!("{p} + {q}*s");
        let sigma = format!("{a}*exp({b}*s) + {}", num(c));
        let label = format!("psn-generic-{i}(p={p},q={q},a={a},b={b},c={c})");
        out.push(Fixture::new(doc(psn, None, tau, Some(sigma), len, label), [N, N, N, O]));
    }
    out
}
