//! Conditions and axes for partially null curves (`σ ≡ 0`).
//!
//! With `U = u1 T + u2 N + u3 B1 + u4 B2`, `U' = 0` reads
//!
//! ```text
//! T:  u1' − κ u2         = 0
//! N:  κ u1 + u2' − τ u4  = 0
//! B1: τ u2 + u3'         = 0
//! B2: u4'                = 0
//! ```
//!
//! and `g(T, U) = u1`, `g(N, U) = u2`, `g(B1, U) = u4`, `g(B2, U) = u3`.
//! Fixing one of these to a constant gives the k-type conditions: a
//! constant `τ/κ` for k = 0 and k = 3, an affine dependence of `τ/κ` on
//! `θ = ∫κ` for k = 1, and no condition at all for k = 2.

use crate::calculus::{cumulative_integral, grid_cumulative};
use crate::error::{Error, Result};
use crate::frame::FrameKind;
use crate::integrator::CurveTrace;
use crate::minkowski::least_squares;
use crate::profile::CurvatureProfile;
use crate::verifier::validate_axis;

use super::{
    settle, AxisCandidate, AxisReport, AxisSource, ClassifyOptions, FittedConstant, Partial, Tolerances, Verdict,
};

const ZERO: f64 = 1e-12;

fn require_kind(p: &CurvatureProfile) -> Result<()> {
    if p.kind != FrameKind::PartiallyNull {
        return Err(Error::Precondition(format!(
            "{} is not a partially null profile",
            p.label
        )));
    }
    Ok(())
}

fn ratios(p: &CurvatureProfile, grid: &[f64]) -> Result<Vec<f64>> {
    require_kind(p)?;
    grid.iter()
        .map(|&s| {
            let c = p.eval(s)?;
            if c.kappa.abs() <= ZERO {
                return Err(Error::InvalidProfile(format!("{}: kappa vanishes at s = {s}", p.label)));
            }
            Ok(c.tau / c.kappa)
        })
        .collect()
}

/// Constant-ratio test for k = 0 (and k = 3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    pub verdict: Verdict,
    /// Mean of `τ/κ` over the grid.
    pub constant: f64,
    /// `(max − min) / (1 + |mean|)`.
    pub relative_spread: f64,
}

pub fn pn_type0_check(p: &CurvatureProfile, grid: &[f64], tol: &Tolerances) -> Result<RatioCheck> {
    let r = ratios(p, grid)?;
    let (lo, hi) = r
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let relative_spread = (hi - lo) / (1.0 + mean.abs());
    Ok(RatioCheck {
        verdict: Verdict::from_bool(relative_spread < tol.cond),
        constant: mean,
        relative_spread,
    })
}

/// k = 3 holds exactly when k = 0 does.
pub fn pn_type3_check(p: &CurvatureProfile, grid: &[f64], tol: &Tolerances) -> Result<RatioCheck> {
    pn_type0_check(p, grid, tol)
}

/// Fit of `τ/κ = C (c0 + θ)`, `θ = ∫_{s_min}^s κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineRatioCheck {
    pub verdict: Verdict,
    /// Slope `C`.
    pub c: f64,
    /// Integration constant `c0`; NaN for a degenerate fit.
    pub c0: f64,
    /// `C · c0`, the ratio at `s_min`.
    pub intercept: f64,
    /// `max |residual| / (1 + max |τ/κ|)`.
    pub relative_residual: f64,
    /// The slope is indistinguishable from zero: the ratio is constant.
    pub degenerate: bool,
}

pub fn pn_type1_check(p: &CurvatureProfile, grid: &[f64], tol: &Tolerances) -> Result<AffineRatioCheck> {
    let y = ratios(p, grid)?;
    let theta = cumulative_integral(|s| p.kappa.value_or_nan(s), grid)?;
    let fit = least_squares(&[theta.clone(), vec![1.0; grid.len()]], &y)?;
    let (slope, intercept) = (fit.coefficients[0], fit.coefficients[1]);
    let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let relative_residual = fit.max_abs_residual() / scale;
    let span = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = (slope * span).abs() <= tol.cond * scale;
    Ok(AffineRatioCheck {
        verdict: Verdict::from_bool(relative_residual < tol.cond),
        c: slope,
        c0: if degenerate { f64::NAN } else { intercept / slope },
        intercept,
        relative_residual,
        degenerate,
    })
}

fn ratio_coefficients(trace: &CurveTrace, with_b1: bool) -> Result<Vec<[f64; 4]>> {
    let r = ratios(&trace.profile, &trace.s_values)?;
    Ok(r.iter()
        .map(|&q| [q, 0.0, if with_b1 { 1.0 } else { 0.0 }, 1.0])
        .collect())
}

/// `D = (τ/κ)T + B1 + B2` and `U = (τ/κ)T + B2`, both with `g(T, ·) = τ/κ`.
pub fn pn_type0_axis(trace: &CurveTrace, tol: &Tolerances) -> Result<[AxisCandidate; 2]> {
    let check = pn_type0_check(&trace.profile, &trace.s_values, tol)?;
    if !check.verdict.is_yes() {
        return Err(Error::Precondition("tau/kappa is not constant".into()));
    }
    Ok([
        AxisCandidate::from_coefficients(trace, 0, AxisSource::RatioAxisWithB1, ratio_coefficients(trace, true)?)?,
        AxisCandidate::from_coefficients(trace, 0, AxisSource::RatioAxis, ratio_coefficients(trace, false)?)?,
    ])
}

/// `U = (c0 + θ)T + N − (∫τ)B1 + (1/C)B2`, with `g(N, U) = 1`.
pub fn pn_type1_axis(trace: &CurveTrace, fit: &AffineRatioCheck) -> Result<AxisCandidate> {
    let p = &trace.profile;
    require_kind(p)?;
    if !fit.verdict.is_yes() {
        return Err(Error::Precondition(
            "tau/kappa is not affine in the integrated curvature".into(),
        ));
    }
    if fit.degenerate || fit.c == 0.0 {
        return Err(Error::DegenerateAxis(format!("fitted C = {:e} is zero", fit.c)));
    }
    let grid = &trace.s_values;
    let theta = cumulative_integral(|s| p.kappa.value_or_nan(s), grid)?;
    let itau = cumulative_integral(|s| p.tau.value_or_nan(s), grid)?;
    let coefficients = theta
        .iter()
        .zip(&itau)
        .map(|(t, i)| [fit.c0 + t, 1.0, -i, 1.0 / fit.c])
        .collect();
    AxisCandidate::from_coefficients(trace, 1, AxisSource::NormalAxis, coefficients)
}

/// Coefficients of the axis with `g(B1, U) = 1`, on a uniform grid.
///
/// With `θ = ∫κ` the first two equations become a rotation in `θ` driven
/// by `τ/κ`, solved by variation of constants:
/// `u1 = cos θ (c1 − ∫τ sin θ ds) + sin θ (c2 + ∫τ cos θ ds)`,
/// `u2 = u1'/κ`, `u3 = c3 − ∫τ u2 ds`, `u4 = 1`.
pub fn binormal_coefficients(p: &CurvatureProfile, grid: &[f64], c: [f64; 3]) -> Result<Vec<[f64; 4]>> {
    require_kind(p)?;
    if grid.len() < 4 {
        return Err(Error::Precondition("binormal axis needs at least 4 grid points".into()));
    }
    let h = grid[1] - grid[0];
    let theta = cumulative_integral(|s| p.kappa.value_or_nan(s), grid)?;
    let tau: Vec<f64> = grid
        .iter()
        .map(|&s| p.tau.eval(s).map_err(|e| Error::Eval { s, reason: e.reason }))
        .collect::<Result<_>>()?;
    let sin_part: Vec<f64> = tau.iter().zip(&theta).map(|(t, th)| t * th.sin()).collect();
    let cos_part: Vec<f64> = tau.iter().zip(&theta).map(|(t, th)| t * th.cos()).collect();
    let ps = grid_cumulative(&sin_part, h);
    let pc = grid_cumulative(&cos_part, h);
    let mut u1 = Vec::with_capacity(grid.len());
    let mut u2 = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (sn, cs) = theta[i].sin_cos();
        let a = c[0] - ps[i];
        let b = c[1] + pc[i];
        u1.push(cs * a + sn * b);
        u2.push(-sn * a + cs * b);
    }
    let tu2: Vec<f64> = tau.iter().zip(&u2).map(|(t, u)| t * u).collect();
    let u3 = grid_cumulative(&tu2, h);
    Ok((0..grid.len()).map(|i| [u1[i], u2[i], c[2] - u3[i], 1.0]).collect())
}

pub fn pn_type2_axis(trace: &CurveTrace, c: [f64; 3]) -> Result<AxisCandidate> {
    let coefficients = binormal_coefficients(&trace.profile, &trace.s_values, c)?;
    AxisCandidate::from_coefficients(trace, 2, AxisSource::BinormalAxis, coefficients)
}

pub(crate) fn classify_conditions(trace: &CurveTrace, opts: &ClassifyOptions) -> Result<Partial> {
    let tol = &opts.tol;
    let p = &trace.profile;
    let grid = &trace.s_values;
    let mut flags = Vec::new();
    let mut constants = super::FittedConstants::new();
    let mut axes = Vec::new();
    let validated = |cand: AxisCandidate, axes: &mut Vec<AxisReport>| -> Result<bool> {
        let v = validate_axis(trace, &cand, tol)?;
        axes.push(AxisReport::new(&cand, &v));
        Ok(v.pass)
    };
    let oracle = |k: usize| super::oracle_detect(trace, k, tol).map(|o| o.verdict);

    let c0 = pn_type0_check(p, grid, tol)?;
    let c1 = pn_type1_check(p, grid, tol)?;
    let mut raw = [Verdict::Undetermined; 4];

    // k = 0 and k = 3 share the ratio condition and axes
    let (mut pass0, mut pass3) = (None, None);
    if c0.verdict.is_yes() {
        constants.insert(
            "ratio".into(),
            FittedConstant {
                value: c0.constant,
                residual: c0.relative_spread,
            },
        );
        let [with_b1, plain] = pn_type0_axis(trace, tol)?;
        let a = validated(with_b1.clone(), &mut axes)?;
        let b = validated(plain.clone(), &mut axes)?;
        pass0 = Some(a || b);
        pass3 = Some(validated(with_b1.with_k(3), &mut axes)?);
    }
    raw[0] = settle(c0.verdict.is_yes(), pass0, oracle(0)?, 0, &mut flags);
    raw[3] = settle(c0.verdict.is_yes(), pass3, oracle(3)?, 3, &mut flags);

    let mut pass1 = None;
    if c1.verdict.is_yes() {
        constants.insert(
            "C".into(),
            FittedConstant {
                value: c1.c,
                residual: c1.relative_residual,
            },
        );
        constants.insert(
            "C_c0".into(),
            FittedConstant {
                value: c1.intercept,
                residual: c1.relative_residual,
            },
        );
        if c1.degenerate {
            flags.push(format!(
                "degenerate fit at k1: tau/kappa constant ({}); C = 0 with g(N, U) = 0 via the ratio axis, or any C with C c0 = {}",
                c1.intercept, c1.intercept
            ));
            let plain =
                AxisCandidate::from_coefficients(trace, 1, AxisSource::RatioAxis, ratio_coefficients(trace, false)?)?;
            pass1 = Some(validated(plain, &mut axes)?);
        } else {
            constants.insert(
                "c0".into(),
                FittedConstant {
                    value: c1.c0,
                    residual: c1.relative_residual,
                },
            );
            pass1 = Some(validated(pn_type1_axis(trace, &c1)?, &mut axes)?);
        }
    }
    raw[1] = settle(c1.verdict.is_yes(), pass1, oracle(1)?, 1, &mut flags);

    let [k1, k2, k3] = opts.binormal_constants;
    for (name, v) in [("c1", k1), ("c2", k2), ("c3", k3)] {
        constants.insert(
            name.into(),
            FittedConstant {
                value: v,
                residual: 0.0,
            },
        );
    }
    let pass2 = validated(pn_type2_axis(trace, opts.binormal_constants)?, &mut axes)?;
    raw[2] = settle(true, Some(pass2), oracle(2)?, 2, &mut flags);

    let b1 = AxisCandidate::constant(trace, 0, AxisSource::TrivialB1, trace.frames[0].b1);
    let trivial = (0..4).all(|k| {
        validate_axis(trace, &b1.clone().with_k(k), tol)
            .map(|v| v.pass)
            .unwrap_or(false)
    });
    if trivial {
        flags.push(
            "trivial-b1: the constant B1 pairs constantly with every frame vector (excluded from verdicts)".into(),
        );
    }

    Ok(Partial {
        raw,
        residuals: [
            Some(c0.relative_spread),
            Some(c1.relative_residual),
            None,
            Some(c0.relative_spread),
        ],
        constants,
        axes,
        flags,
        pseudohyperbolic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::canonical_frame;
    use crate::integrator::{integrate_frame, IntegrateOptions};
    use crate::minkowski::{metric, Vec4};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn profile(k: &str, t: &str, d: (f64, f64)) -> CurvatureProfile {
        CurvatureProfile::partially_null(k, t, d).unwrap()
    }

    fn trace(p: &CurvatureProfile) -> CurveTrace {
        integrate_frame(
            p,
            &canonical_frame(p.kind),
            Vec4::ZERO,
            &IntegrateOptions::for_profile(p),
        )
        .unwrap()
    }

    fn grid(p: &CurvatureProfile) -> Vec<f64> {
        p.sample_grid(501)
    }

    #[test]
    fn type0_examples() {
        let p = profile("2", "6", (0.0, 1.0));
        let c = pn_type0_check(&p, &grid(&p), &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::Yes);
        assert!((c.constant - 3.0).abs() < 1e-15);

        let p = profile("1", "s", (1.0, 2.0));
        assert_eq!(pn_type0_check(&p, &grid(&p), &tol()).unwrap().verdict, Verdict::No);

        let p = profile("1+s^2", "3*(1+s^2)", (0.0, 1.0));
        let c = pn_type0_check(&p, &grid(&p), &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::Yes);
        assert!((c.constant - 3.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_kappa_is_a_validation_error() {
        let p = profile("s - 0.5", "1", (0.0, 1.0));
        assert!(matches!(
            pn_type0_check(&p, &grid(&p), &tol()),
            Err(Error::InvalidProfile(_))
        ));
    }

    #[test]
    fn type0_axes_on_the_explicit_helix() {
        let p = profile("1", "1", (0.0, 1.0));
        let tr = trace(&p);
        let [d, u] = pn_type0_axis(&tr, &tol()).unwrap();
        for cand in [d, u] {
            let v = validate_axis(&tr, &cand, &tol()).unwrap();
            assert!(v.pass && v.max_du < 1e-7, "{:?}: {v:?}", cand.source);
            assert!((v.g_mean - 1.0).abs() < 1e-8);
        }
        let p = profile("2", "6", (0.0, 1.0));
        let tr = trace(&p);
        let [d, _] = pn_type0_axis(&tr, &tol()).unwrap();
        for (f, u) in tr.frames.iter().zip(&d.vectors) {
            assert!((metric(&f.t, u) - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn type1_examples() {
        let p = profile("1", "s", (0.0, 1.0));
        let c = pn_type1_check(&p, &grid(&p), &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::Yes);
        assert!((c.c - 1.0).abs() < 1e-10 && c.c0.abs() < 1e-10);
        assert!(!c.degenerate);

        let p = profile("2", "6", (0.0, 1.0));
        let c = pn_type1_check(&p, &grid(&p), &tol()).unwrap();
        assert_eq!(c.verdict, Verdict::Yes);
        assert!(c.degenerate);
        assert!((c.intercept - 3.0).abs() < 1e-9);

        let p = profile("1", "exp(s)", (0.0, 1.0));
        assert_eq!(pn_type1_check(&p, &grid(&p), &tol()).unwrap().verdict, Verdict::No);
    }

    #[test]
    fn type1_axis_on_the_linear_torsion() {
        let p = profile("1", "s", (0.0, 1.0));
        let tr = trace(&p);
        let fit = pn_type1_check(&p, &tr.s_values, &tol()).unwrap();
        let cand = pn_type1_axis(&tr, &fit).unwrap();
        let v = validate_axis(&tr, &cand, &tol()).unwrap();
        assert!(v.pass && v.max_du < 1e-6, "{v:?}");
        for (f, u) in tr.frames.iter().zip(&cand.vectors) {
            assert!((metric(&f.n, u) - 1.0).abs() < 1e-8);
        }
        // matches sT + N − (s²/2)B1 + B2 when C = 1
        let i = tr.len() / 2;
        let s = tr.s_values[i];
        let want = tr.frames[i].combine([s, 1.0, -s * s / 2.0, 1.0]);
        assert!((cand.vectors[i] - want).max_abs() < 1e-9);
    }

    #[test]
    fn type1_axis_general_slope() {
        // τ/κ = 2(0.5 + θ) with κ = 1 + s
        let p = profile("1 + s", "2*(1+s)*(0.5 + s + s^2/2)", (0.0, 1.0));
        let tr = trace(&p);
        let fit = pn_type1_check(&p, &tr.s_values, &tol()).unwrap();
        assert!((fit.c - 2.0).abs() < 1e-8 && (fit.c0 - 0.5).abs() < 1e-8);
        let v = validate_axis(&tr, &pn_type1_axis(&tr, &fit).unwrap(), &tol()).unwrap();
        assert!(v.pass, "{v:?}");
    }

    #[test]
    fn degenerate_slope_is_an_error() {
        let p = profile("2", "6", (0.0, 1.0));
        let tr = trace(&p);
        let fit = pn_type1_check(&p, &tr.s_values, &tol()).unwrap();
        assert!(matches!(pn_type1_axis(&tr, &fit), Err(Error::DegenerateAxis(_))));
    }

    #[test]
    fn type2_axis_for_any_constants() {
        for (k, t) in [("1", "1"), ("2", "6"), ("1 + s", "exp(s)")] {
            let p = profile(k, t, (0.0, 1.0));
            let tr = trace(&p);
            for c in [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 2.0, 3.0]] {
                let cand = pn_type2_axis(&tr, c).unwrap();
                let v = validate_axis(&tr, &cand, &tol()).unwrap();
                assert!(v.pass && v.max_du < 1e-6, "{k}, {t}, {c:?}: {v:?}");
                for (f, u) in tr.frames.iter().zip(&cand.vectors) {
                    assert!((metric(&f.b1, u) - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn type3_follows_type0() {
        let p = profile("2", "6", (0.0, 1.0));
        assert!(pn_type3_check(&p, &grid(&p), &tol()).unwrap().verdict.is_yes());
        let p = profile("1", "s", (0.5, 1.0));
        assert!(!pn_type3_check(&p, &grid(&p), &tol()).unwrap().verdict.is_yes());
    }

    #[test]
    fn wrong_family_is_rejected() {
        let p = CurvatureProfile::pseudo_null("1", "1", (0.0, 1.0)).unwrap();
        assert!(matches!(
            pn_type0_check(&p, &grid(&p), &tol()),
            Err(Error::Precondition(_))
        ));
    }
}
