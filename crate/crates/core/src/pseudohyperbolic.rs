//! Pseudo null curves in pseudohyperbolic spaces
//! `H³₀ = {x : g(x − x0, x − x0) = −r²}`.
//!
//! A pseudo null curve lies in some `H³₀` exactly when `σ/τ = c` is a
//! negative constant; then `α + cN + B2` is the (constant) center and
//! `r² = −2c`.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::calculus::{derivative, second_derivative, third_derivative};
use crate::classifier::pseudo_null::psn_type1_check;
use crate::classifier::{Tolerances, Verdict};
use crate::error::{Error, Result};
use crate::frame::FrameKind;
use crate::integrator::CurveTrace;
use crate::minkowski::{least_squares, metric, Vec4};
use crate::profile::{CurvatureProfile, ScalarFn};

const FIT_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoHyperbolicSpec {
    pub x0: Vec4,
    pub r: f64,
}

impl PseudoHyperbolicSpec {
    pub fn new(x0: Vec4, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Precondition(format!("radius {r} must be positive")));
        }
        Ok(PseudoHyperbolicSpec { x0, r })
    }

    /// `g(x − x0, x − x0) + r²`.
    pub fn defect(&self, x: &Vec4) -> f64 {
        let d = *x - self.x0;
        metric(&d, &d) + self.r * self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    pub max_deviation: f64,
}

pub fn h3_membership(trace: &CurveTrace, spec: &PseudoHyperbolicSpec, tol: &Tolerances) -> Membership {
    let max_deviation = trace.positions.iter().map(|x| spec.defect(x).abs()).fold(0.0, f64::max);
    Membership {
        inside: max_deviation < tol.cond * spec.r * spec.r,
        max_deviation,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoHyperbolicFit {
    pub spec: PseudoHyperbolicSpec,
    pub max_deviation: f64,
    pub iterations: usize,
}

/// Least-squares `(x0, r)` for points on a pseudohyperbolic space.
///
/// Starts from the linear fit of `g(x, x) = 2 g(x, x0) − K`,
/// `K = g(x0, x0) + r²`, then refines the geometric residual by
/// Gauss–Newton.
pub fn fit_pseudohyperbolic(points: &[Vec4]) -> Result<PseudoHyperbolicFit> {
    if points.len() < 5 {
        return Err(Error::Precondition("fitting needs at least 5 points".into()));
    }
    let eta = crate::minkowski::METRIC_DIAG;
    let mut columns: Vec<Vec<f64>> = (0..4)
        .map(|j| points.iter().map(|x| 2.0 * eta[j] * x[j]).collect())
        .collect();
    columns.push(vec![-1.0; points.len()]);
    let y: Vec<f64> = points.iter().map(|x| metric(x, x)).collect();
    let lin = least_squares(&columns, &y)?;
    let c = &lin.coefficients;
    let mut x0 = Vec4::try_new(c[0], c[1], c[2], c[3])?;
    let r2 = c[4] - metric(&x0, &x0);
    if r2.is_nan() || r2 <= 0.0 {
        return Err(Error::Precondition(format!(
            "points are not on a pseudohyperbolic space (fitted r² = {r2:e})"
        )));
    }
    let mut r = r2.sqrt();
    let mut iterations = 0;
    for _ in 0..FIT_ITERATIONS {
        iterations += 1;
        let mut cols: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(points.len())).collect();
        let mut f = Vec::with_capacity(points.len());
        for x in points {
            let d = *x - x0;
            let grad = d.lowered() * -2.0;
            for j in 0..4 {
                cols[j].push(grad[j]);
            }
            cols[4].push(2.0 * r);
            f.push(-(metric(&d, &d) + r * r));
        }
        let step = least_squares(&cols, &f)?.coefficients;
        x0 += Vec4::try_new(step[0], step[1], step[2], step[3])?;
        r += step[4];
        let size = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if size <= 1e-15 * (1.0 + x0.max_abs() + r) {
            break;
        }
    }
    let spec = PseudoHyperbolicSpec::new(x0, r.abs())?;
    let max_deviation = points.iter().map(|x| spec.defect(x).abs()).fold(0.0, f64::max);
    debug!("pseudohyperbolic fit: r = {r}, deviation {max_deviation:e} after {iterations} iterations");
    Ok(PseudoHyperbolicFit {
        spec,
        max_deviation,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H3RatioCheck {
    pub verdict: Verdict,
    /// Mean of `σ/τ`.
    pub c_ratio: f64,
    pub relative_spread: f64,
}

pub fn h3_ratio_check(p: &CurvatureProfile, grid: &[f64], tol: &Tolerances) -> Result<H3RatioCheck> {
    if p.kind != FrameKind::PseudoNull {
        return Err(Error::Precondition(format!("{} is not a pseudo null profile", p.label)));
    }
    let mut r = Vec::with_capacity(grid.len());
    for &s in grid {
        let c = p.eval(s)?;
        if c.tau.abs() <= 1e-12 {
            return Err(Error::InvalidProfile(format!("{}: tau vanishes at s = {s}", p.label)));
        }
        r.push(c.sigma / c.tau);
    }
    let (lo, hi) = r
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let relative_spread = (hi - lo) / (1.0 + mean.abs());
    Ok(H3RatioCheck {
        verdict: Verdict::from_bool(relative_spread < tol.cond && mean < 0.0),
        c_ratio: mean,
        relative_spread,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H3Type1 {
    pub verdict: Verdict,
    /// Relative residual of the quadratic-ratio fit.
    pub quadratic_residual: f64,
    /// The quadratic-ratio test also rejects the profile.
    pub consistent: bool,
}

/// No pseudohyperbolic pseudo null curve is a 1-type slant helix.
pub fn h3_type1_nonexistence(p: &CurvatureProfile, grid: &[f64], tol: &Tolerances) -> Result<H3Type1> {
    let ratio = h3_ratio_check(p, grid, tol)?;
    if !ratio.verdict.is_yes() {
        return Err(Error::Precondition("sigma/tau is not a negative constant".into()));
    }
    let q = psn_type1_check(p, grid, tol)?;
    Ok(H3Type1 {
        verdict: Verdict::No,
        quadratic_residual: q.relative_residual,
        consistent: !q.verdict.is_yes(),
    })
}

/// `τ(s) = λ e^{s/ω} + μ e^{−s/ω}`, `ω = √(−2c)`: the pseudohyperbolic
/// 2-type family, solving `2cτ'' + τ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTau {
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
}

pub fn h3_type2_tau_form(c: f64, lambda: f64, mu: f64) -> Result<ExpTau> {
    if !(c < 0.0 && c.is_finite()) {
        return Err(Error::Precondition(format!("ratio c = {c} must be negative")));
    }
    if lambda == 0.0 && mu == 0.0 {
        return Err(Error::Precondition("lambda and mu are both zero".into()));
    }
    if !(lambda.is_finite() && mu.is_finite()) {
        return Err(Error::Precondition("lambda and mu must be finite".into()));
    }
    Ok(ExpTau { c, lambda, mu })
}

impl ExpTau {
    pub fn omega(&self) -> f64 {
        (-2.0 * self.c).sqrt()
    }

    /// `d^order τ / ds^order`.
    pub fn derivative(&self, order: u32, s: f64) -> f64 {
        let w = self.omega();
        let k = w.powi(-(order as i32));
        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
        k * (self.lambda * (s / w).exp() + sign * self.mu * (-s / w).exp())
    }

    pub fn value(&self, s: f64) -> f64 {
        self.derivative(0, s)
    }

    /// `2cτ'' + τ`.
    pub fn ode_residual(&self, s: f64) -> f64 {
        2.0 * self.c * self.derivative(2, s) + self.value(s)
    }

    pub fn tau_expr(&self) -> String {
        let w = self.omega();
        format!("({:?})*exp(s/({w:?})) + ({:?})*exp(-s/({w:?}))", self.lambda, self.mu)
    }

    /// Pseudo null profile with this `τ` and `σ = cτ`.
    pub fn profile(&self, domain: (f64, f64)) -> Result<CurvatureProfile> {
        let tau = self.tau_expr();
        let sigma = format!("({:?})*({tau})", self.c);
        CurvatureProfile::new(
            FrameKind::PseudoNull,
            ScalarFn::constant(1.0),
            ScalarFn::parse(&tau)?,
            ScalarFn::parse(&sigma)?,
            domain,
            format!("psn-exp-h3(c={},lambda={},mu={})", self.c, self.lambda, self.mu),
        )
    }
}

/// Normalized residual of the 3-type closed form on a pseudohyperbolic
/// curve, `σ = cτ`:
/// `2c²ττ'τ''' = cτ''[5τ²(1+c²τ²) + c(3τ'² + 4ττ'')] + c²τ⁵(2+c²τ²) + τ³(1 − 15c³τ'²)`.
/// Evaluated with finite differences away from the domain edges.
pub fn h3_type3_residual(p: &CurvatureProfile, c: f64, grid: &[f64]) -> Result<f64> {
    let f = |s: f64| p.tau.value_or_nan(s);
    let dom = Some(p.domain);
    let (mut worst, mut scale) = (0.0f64, 1.0f64);
    let mut interior = 0;
    for &s in grid {
        let d1 = derivative(&f, s, dom);
        let d2 = second_derivative(&f, s, dom);
        let d3 = third_derivative(&f, s, dom);
        if d1.one_sided || d2.one_sided || d3.one_sided {
            continue;
        }
        interior += 1;
        let (t, t1, t2, t3) = (f(s), d1.value, d2.value, d3.value);
        let (c2, t2sq) = (c * c, t * t);
        let lhs = 2.0 * c2 * t * t1 * t3;
        let rhs = c * t2 * (5.0 * t2sq * (1.0 + c2 * t2sq) + c * (3.0 * t1 * t1 + 4.0 * t * t2))
            + c2 * t.powi(5) * (2.0 + c2 * t2sq)
            + t.powi(3) * (1.0 - 15.0 * c.powi(3) * t1 * t1);
        worst = worst.max((lhs - rhs).abs());
        scale = scale.max(lhs.abs()).max(rhs.abs());
    }
    if interior == 0 {
        return Err(Error::Precondition("no grid point clears the stencil reach".into()));
    }
    Ok(worst / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoHyperbolicReport {
    pub is_h3_family: bool,
    pub c_ratio: f64,
    pub fitted_center: Option<[f64; 4]>,
    pub fitted_radius: Option<f64>,
    /// `max |g(α − x0, α − x0) + r²|` for the fitted space.
    pub membership_deviation: Option<f64>,
    /// Center `α + cN + B2` at `s_min`, exact for the family.
    pub exact_center: Option<[f64; 4]>,
    pub type3_residual: Option<f64>,
}

pub fn report(trace: &CurveTrace, tol: &Tolerances) -> Result<PseudoHyperbolicReport> {
    let p = &trace.profile;
    let ratio = h3_ratio_check(p, &trace.s_values, tol)?;
    let mut out = PseudoHyperbolicReport {
        is_h3_family: ratio.verdict.is_yes(),
        c_ratio: ratio.c_ratio,
        fitted_center: None,
        fitted_radius: None,
        membership_deviation: None,
        exact_center: None,
        type3_residual: None,
    };
    if !out.is_h3_family {
        return Ok(out);
    }
    let f0 = trace.frames[0];
    out.exact_center = Some((trace.positions[0] + f0.n * ratio.c_ratio + f0.b2).to_array());
    match fit_pseudohyperbolic(&trace.positions) {
        Ok(fit) => {
            out.fitted_center = Some(fit.spec.x0.to_array());
            out.fitted_radius = Some(fit.spec.r);
            out.membership_deviation = Some(fit.max_deviation);
        }
        Err(e) => debug!("{}: pseudohyperbolic fit failed: {e}", p.label),
    }
    out.type3_residual = h3_type3_residual(p, ratio.c_ratio, &trace.s_values).ok();
    Ok(out)
}
