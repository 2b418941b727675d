//! Constant-axis detection straight from the frames.
//!
//! `g(V(s_i), U) = g(V(s_0), U)` for all `i` is a linear system in `U`
//! with rows `M (V(s_i) − V(s_0))`, `M = diag(−1, 1, 1, 1)`. A constant axis
//! exists iff the system has a non-trivial nullspace. For partially null
//! curves the constant `B1` is always a solution, so one extra row pins `U`
//! Euclidean-orthogonal to it.

use crate::error::{Error, Result};
use crate::frame::FrameKind;
use crate::integrator::CurveTrace;
use crate::minkowski::{metric, nullspace_min_singular, Vec4};

use super::{Tolerances, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub k: usize,
    pub verdict: Verdict,
    /// Unit (Euclidean) vector for the smallest singular value.
    pub u: Vec4,
    pub sigma_min: f64,
    pub threshold: f64,
    /// Variance of `g(V_{k+1}, U)` over the grid.
    pub g_variance: f64,
    pub note: Option<String>,
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    (mean, xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

pub fn oracle_detect(trace: &CurveTrace, k: usize, tol: &Tolerances) -> Result<OracleResult> {
    if k > 3 {
        return Err(Error::Precondition(format!("k = {k} is not in 0..=3")));
    }
    if trace.len() < 9 {
        return Err(Error::Precondition("oracle needs at least 9 grid points".into()));
    }
    let v = trace.indicatrix(k);
    let v0 = v[0];
    let mut rows: Vec<Vec4> = v[1..].iter().map(|x| (*x - v0).lowered()).collect();
    let m = rows.len();
    let threshold = tol.oracle_limit(m);

    let largest = rows.iter().map(Vec4::max_abs).fold(0.0, f64::max);
    if largest <= 1e-13 * (1.0 + v0.max_abs()) {
        let u = v0 * (1.0 / v0.norm_euclid().max(f64::MIN_POSITIVE));
        return Ok(OracleResult {
            k,
            verdict: Verdict::Yes,
            u,
            sigma_min: 0.0,
            threshold,
            g_variance: 0.0,
            note: Some("indicatrix constant".into()),
        });
    }

    if trace.kind == FrameKind::PartiallyNull {
        let b1 = trace.frames[0].b1;
        let weight = rows.iter().map(|r| r.dot_euclid(r)).sum::<f64>().sqrt();
        rows.push(b1 * (weight / b1.norm_euclid()));
    }
    let est = nullspace_min_singular(&rows)?;
    let u = est.vector;
    let (_, g_variance) = variance(v.iter().map(|x| metric(x, &u)));
    let found = est.sigma_min < threshold && g_variance < tol.axis * tol.axis;
    Ok(OracleResult {
        k,
        verdict: Verdict::from_bool(found),
        u,
        sigma_min: est.sigma_min,
        threshold,
        g_variance,
        note: None,
    })
}
