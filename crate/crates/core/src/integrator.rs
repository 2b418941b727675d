//! Fixed-step RK4 synthesis of curves from curvature profiles.
//!
//! The state is `(α, T, N, B1, B2)`, twenty reals, advanced by `α' = T`
//! together with the Frenet system of the profile's family.

use std::io::Write;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::calculus::grid_derivative;
use crate::error::{Error, Result};
use crate::frame::{frenet_rhs, gram_residual, gram_target, Frame, FrameKind, DEFAULT_EPS_GRAM, GRAM_PAIRS};
use crate::minkowski::{metric, solve, Vec4};
use crate::profile::{CurvatureProfile, Curvatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    #[default]
    Monitor,
    Project,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub h: f64,
    pub drift_mode: DriftMode,
    pub eps_gram: f64,
    /// Run [`CurvatureProfile::validate`] first.
    pub validate: bool,
}

impl IntegrateOptions {
    /// `h = 1e-3 · (s_max − s_min)`, monitor mode.
    pub fn for_profile(p: &CurvatureProfile) -> Self {
        IntegrateOptions {
            h: default_step(p),
            drift_mode: DriftMode::Monitor,
            eps_gram: DEFAULT_EPS_GRAM,
            validate: true,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_drift_mode(mut self, mode: DriftMode) -> Self {
        self.drift_mode = mode;
        self
    }

    pub fn unvalidated(mut self) -> Self {
        self.validate = false;
        self
    }
}

pub fn default_step(p: &CurvatureProfile) -> f64 {
    1e-3 * p.length()
}

/// Number of grid intervals for step `h` on an interval of length `len`.
pub fn step_count(len: f64, h: f64) -> usize {
    (len / h + 1e-9).floor() as usize
}

/// Sampled curve with its frame field on a uniform grid.
#[derive(Debug, Clone)]
pub struct CurveTrace {
    pub kind: FrameKind,
    pub h: f64,
    pub s_values: Vec<f64>,
    pub positions: Vec<Vec4>,
    pub frames: Vec<Frame>,
    /// Largest Gram residual entry at each grid point.
    pub gram_residuals: Vec<f64>,
    pub max_gram_residual: f64,
    pub profile: CurvatureProfile,
    pub warnings: Vec<String>,
}

impl CurveTrace {
    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    /// `V_{k+1}` along the grid.
    pub fn indicatrix(&self, k: usize) -> Vec<Vec4> {
        self.frames.iter().map(|f| f.vector(k)).collect()
    }

    /// CSV export: `s, x1..x4, T1..T4, N1..N4, B11..B14, B21..B24, gram_residual`,
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["s".to_string()];
        header.extend((1..=4).map(|i| format!("x{i}")));
        for name in ["T", "N", "B1", "B2"] {
            header.extend((1..=4).map(|i| format!("{name}{i}")));
        }
        header.push("gram_residual".into());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(22);
            row.push(self.s_values[i]);
            row.extend(self.positions[i].to_array());
            for v in self.frames[i].vectors() {
                row.extend(v.to_array());
            }
            row.push(self.gram_residuals[i]);
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct State {
    alpha: Vec4,
    frame: Frame,
}

impl State {
    fn axpy(&self, k: f64, d: &State) -> State {
        State {
            alpha: self.alpha + d.alpha * k,
            frame: self.frame + d.frame * k,
        }
    }
}

fn rate(p: &CurvatureProfile, s: f64, st: &State) -> Result<State> {
    let Curvatures { kappa, tau, sigma } = p.eval(s)?;
    Ok(State {
        alpha: st.frame.t,
        frame: frenet_rhs(&st.frame, kappa, tau, sigma, p.kind),
    })
}

/// Integrates the frame system of `p` from `initial` at `s_min`, with the
/// curve starting at `alpha0`.
pub fn integrate_frame(
    p: &CurvatureProfile,
    initial: &Frame,
    alpha0: Vec4,
    opts: &IntegrateOptions,
) -> Result<CurveTrace> {
    let mut warnings = Vec::new();
    if opts.validate {
        warnings.extend(p.validate()?.warnings);
    }
    let h = opts.h;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidStep(format!("h = {h} must be positive")));
    }
    if h > p.length() / 10.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidStep(format!(
            "h = {h} exceeds a tenth of the domain length {}",
            p.length()
        )));
    }
    let r0 = gram_residual(initial, p.kind).max();
    if r0 >= opts.eps_gram {
        return Err(Error::Precondition(format!(
            "initial frame gram residual {r0:e} is not below {:e}",
            opts.eps_gram
        )));
    }
    let abort_at = 1e3 * opts.eps_gram;
    let n = step_count(p.length(), h);
    let s0 = p.s_min();

    let mut s_values = Vec::with_capacity(n + 1);
    let mut positions = Vec::with_capacity(n + 1);
    let mut frames = Vec::with_capacity(n + 1);
    let mut gram = Vec::with_capacity(n + 1);
    let mut st = State {
        alpha: alpha0,
        frame: *initial,
    };
    s_values.push(s0);
    positions.push(st.alpha);
    frames.push(st.frame);
    gram.push(r0);
    let mut singular_projections = 0usize;

    for i in 0..n {
        let s = s0 + i as f64 * h;
        let k1 = rate(p, s, &st)?;
        let k2 = rate(p, s + 0.5 * h, &st.axpy(0.5 * h, &k1))?;
        let k3 = rate(p, s + 0.5 * h, &st.axpy(0.5 * h, &k2))?;
        let k4 = rate(p, s + h, &st.axpy(h, &k3))?;
        st = st
            .axpy(h / 6.0, &k1)
            .axpy(h / 3.0, &k2)
            .axpy(h / 3.0, &k3)
            .axpy(h / 6.0, &k4);
        let s_next = s0 + (i + 1) as f64 * h;
        if !(st.alpha.is_finite() && st.frame.is_finite()) {
            return Err(Error::GramDrift {
                s: s_next,
                residual: f64::INFINITY,
                limit: abort_at,
            });
        }
        if opts.drift_mode == DriftMode::Project {
            let residual = gram_residual(&st.frame, p.kind).max();
            if residual < 0.1 {
                let projected = project_frame(&st.frame, p.kind)?;
                if projected.singular {
                    singular_projections += 1;
                }
                st.frame = projected.frame;
            }
        }
        let residual = gram_residual(&st.frame, p.kind).max();
        if residual > abort_at {
            return Err(Error::GramDrift {
                s: s_next,
                residual,
                limit: abort_at,
            });
        }
        s_values.push(s_next);
        positions.push(st.alpha);
        frames.push(st.frame);
        gram.push(residual);
    }

    let max_gram_residual = gram.iter().fold(0.0f64, |m, &r| m.max(r));
    if max_gram_residual >= opts.eps_gram {
        warn!(
            "{}: gram residual {max_gram_residual:e} exceeds tolerance {:e}",
            p.label, opts.eps_gram
        );
        warnings.push(format!(
            "gram residual {max_gram_residual:e} exceeds {:e}",
            opts.eps_gram
        ));
    }
    if singular_projections > 0 {
        warnings.push(format!(
            "{singular_projections} projection steps hit a singular constraint Jacobian"
        ));
    }
    debug!(
        "{}: {} steps of h = {h}, max gram residual {max_gram_residual:e}",
        p.label, n
    );
    Ok(CurveTrace {
        kind: p.kind,
        h,
        s_values,
        positions,
        frames,
        gram_residuals: gram,
        max_gram_residual,
        profile: p.clone(),
        warnings,
    })
}

/// Output of [`project_frame`].
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub frame: Frame,
    /// The constraint Jacobian was singular; `frame` is the unchanged input.
    pub singular: bool,
}

/// One Newton step towards the Gram constraints, taking the correction of
/// minimal Euclidean norm in the sixteen frame coordinates.
pub fn project_frame(frame: &Frame, kind: FrameKind) -> Result<Projection> {
    let residual = gram_residual(frame, kind);
    if residual.max() >= 0.1 {
        return Err(Error::Precondition(format!(
            "frame too far from the constraint manifold (gram residual {:e})",
            residual.max()
        )));
    }
    if residual.max() <= 4.0 * f64::EPSILON {
        return Ok(Projection {
            frame: *frame,
            singular: false,
        });
    }
    let v = frame.vectors();
    let lowered: [Vec4; 4] = v.map(|x| x.lowered());
    // rows of the 10 × 16 constraint Jacobian
    let mut jac = [[0.0f64; 16]; 10];
    let mut c = [0.0f64; 10];
    for (row, &(i, j)) in GRAM_PAIRS.iter().enumerate() {
        c[row] = metric(&v[i], &v[j]) - gram_target(kind, i, j);
        for m in 0..4 {
            jac[row][4 * i + m] += lowered[j][m];
            jac[row][4 * j + m] += lowered[i][m];
        }
    }
    let mut jjt = [0.0f64; 100];
    for a in 0..10 {
        for b in 0..10 {
            jjt[a * 10 + b] = (0..16).map(|k| jac[a][k] * jac[b][k]).sum();
        }
    }
    let Some(lambda) = solve(&jjt, &c, 10) else {
        warn!("singular constraint Jacobian in frame projection");
        return Ok(Projection {
            frame: *frame,
            singular: true,
        });
    };
    let mut coords = [[0.0f64; 4]; 4];
    for (k, vk) in v.iter().enumerate() {
        for m in 0..4 {
            let delta: f64 = (0..10).map(|row| jac[row][4 * k + m] * lambda[row]).sum();
            coords[k][m] = vk[m] - delta;
        }
    }
    Ok(Projection {
        frame: Frame::from_vectors(coords.map(Vec4::from_array)),
        singular: false,
    })
}

/// Recovers `(κ, τ, σ)` at each grid point from finite-difference frame
/// derivatives, by pairing each derivative against the frame vector that
/// isolates the wanted coefficient.
pub fn resample_curvatures(trace: &CurveTrace) -> Result<Vec<Curvatures>> {
    if trace.len() < 5 {
        return Err(Error::Precondition("resampling needs at least 5 grid points".into()));
    }
    let d = |k: usize| grid_derivative(&trace.indicatrix(k), trace.h);
    let (dt, dn, db1) = (d(0), d(1), d(2));
    Ok(trace
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| match trace.kind {
            FrameKind::PartiallyNull => Curvatures {
                kappa: metric(&dt[i], &f.n),
                tau: metric(&dn[i], &f.b2),
                sigma: metric(&db1[i], &f.b2),
            },
            FrameKind::PseudoNull => Curvatures {
                kappa: metric(&dt[i], &f.b2),
                tau: metric(&dn[i], &f.b1),
                sigma: metric(&db1[i], &f.b2),
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::canonical_frame;
    use crate::profile::ScalarFn;
    use std::f64::consts::TAU;

    fn zero_profile(kind: FrameKind) -> CurvatureProfile {
        CurvatureProfile::new(
            kind,
            ScalarFn::constant(if kind == FrameKind::PseudoNull { 1.0 } else { 0.0 }),
            ScalarFn::constant(0.0),
            ScalarFn::constant(0.0),
            (0.0, 1.0),
            "flat",
        )
        .unwrap()
    }

    #[test]
    fn explicit_helix_matches_closed_form_invariants() {
        let p = CurvatureProfile::partially_null("1", "1", (0.0, TAU)).unwrap();
        let opts = IntegrateOptions::for_profile(&p).with_step(1e-3);
        let tr = integrate_frame(&p, &canonical_frame(p.kind), Vec4::ZERO, &opts).unwrap();
        assert_eq!(tr.len(), 6284);
        assert!(tr.max_gram_residual < 1e-8);
        // (cs, cos s, sin s, cs) has g(α(s) − α(0), same) = 2 − 2 cos s
        for (s, x) in tr.s_values.iter().zip(&tr.positions) {
            let d = *x - tr.positions[0];
            assert!((metric(&d, &d) - (2.0 - 2.0 * s.cos())).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_curvature_gives_straight_line() {
        let p = zero_profile(FrameKind::PartiallyNull);
        let opts = IntegrateOptions::for_profile(&p).unvalidated();
        let f0 = canonical_frame(p.kind);
        let tr = integrate_frame(&p, &f0, Vec4::ZERO, &opts).unwrap();
        for (s, (x, f)) in tr.s_values.iter().zip(tr.positions.iter().zip(&tr.frames)) {
            assert_eq!(*f, f0);
            assert!((*x - f0.t * *s).max_abs() < 1e-13);
        }
    }

    #[test]
    fn pseudo_null_flat_profile_is_a_parabola() {
        let p = zero_profile(FrameKind::PseudoNull);
        let opts = IntegrateOptions::for_profile(&p).unvalidated().with_step(0.05);
        let f0 = canonical_frame(p.kind);
        let a0 = Vec4::new(0.5, -1.0, 2.0, 0.0);
        let tr = integrate_frame(&p, &f0, a0, &opts).unwrap();
        for (s, x) in tr.s_values.iter().zip(&tr.positions) {
            let want = a0 + f0.t * *s + f0.n * (0.5 * s * s);
            assert!((*x - want).max_abs() < 1e-14, "s = {s}");
        }
    }

    #[test]
    fn rejects_bad_steps() {
        let p = CurvatureProfile::partially_null("1", "1", (0.0, 1.0)).unwrap();
        let f0 = canonical_frame(p.kind);
        for h in [0.0, -1e-3, f64::NAN, 0.2] {
            let opts = IntegrateOptions::for_profile(&p).with_step(h);
            assert!(matches!(
                integrate_frame(&p, &f0, Vec4::ZERO, &opts),
                Err(Error::InvalidStep(_))
            ));
        }
        let bad = CurvatureProfile::partially_null("s - 0.5", "1", (0.0, 1.0)).unwrap();
        assert!(matches!(
            integrate_frame(&bad, &f0, Vec4::ZERO, &IntegrateOptions::for_profile(&bad)),
            Err(Error::InvalidProfile(_))
        ));
    }

    #[test]
    fn rejects_off_manifold_initial_frame() {
        let p = CurvatureProfile::partially_null("1", "1", (0.0, 1.0)).unwrap();
        let mut f0 = canonical_frame(p.kind);
        f0.t = f0.t * 1.01;
        assert!(matches!(
            integrate_frame(&p, &f0, Vec4::ZERO, &IntegrateOptions::for_profile(&p)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn huge_curvature_aborts_on_drift() {
        let p = CurvatureProfile::partially_null("3000", "3000", (0.0, 1.0)).unwrap();
        let opts = IntegrateOptions::for_profile(&p).with_step(0.01);
        let r = integrate_frame(&p, &canonical_frame(p.kind), Vec4::ZERO, &opts);
        assert!(matches!(r, Err(Error::GramDrift { .. })), "{r:?}");
    }

    #[test]
    fn projection_leaves_exact_frames_alone() {
        for kind in [FrameKind::PartiallyNull, FrameKind::PseudoNull] {
            let f = canonical_frame(kind);
            let out = project_frame(&f, kind).unwrap();
            assert_eq!(out.frame, f);
            assert!(!out.singular);
        }
    }

    #[test]
    fn projection_contracts_quadratically() {
        let kind = FrameKind::PartiallyNull;
        let mut f = canonical_frame(kind);
        f.t = f.t * (1.0 + 1e-4);
        let before = gram_residual(&f, kind);
        assert!((before.get(0, 0) - 2e-4).abs() < 1e-7);
        let after = gram_residual(&project_frame(&f, kind).unwrap().frame, kind);
        assert!(after.max() < 1e-7, "{:?}", after);
    }

    #[test]
    fn projection_precondition() {
        let kind = FrameKind::PseudoNull;
        let mut f = canonical_frame(kind);
        f.b1 = f.b1 * 1.5f64.sqrt(); // g(B1, B1) = 1.5
        assert!(matches!(project_frame(&f, kind), Err(Error::Precondition(_))));
    }

    #[test]
    fn projection_reduces_generic_perturbations() {
        for kind in [FrameKind::PartiallyNull, FrameKind::PseudoNull] {
            let f = canonical_frame(kind);
            let bump = |v: Vec4, k: f64| v + Vec4::new(1e-3 * k, -2e-3 * k, 5e-4, 1e-3);
            let g = Frame::from_vectors([bump(f.t, 1.0), bump(f.n, -1.0), bump(f.b1, 0.5), bump(f.b2, 2.0)]);
            let r0 = gram_residual(&g, kind).max();
            let r1 = gram_residual(&project_frame(&g, kind).unwrap().frame, kind).max();
            assert!(r1 < r0 * r0 * 100.0 && r1 < r0, "{kind}: {r0:e} -> {r1:e}");
        }
    }

    #[test]
    fn project_mode_keeps_residual_small() {
        let p = CurvatureProfile::pseudo_null("2 + sin(3*s)", "1 + s", (0.0, 2.0)).unwrap();
        let opts = IntegrateOptions::for_profile(&p)
            .with_step(0.02)
            .with_drift_mode(DriftMode::Project);
        let tr = integrate_frame(&p, &canonical_frame(p.kind), Vec4::ZERO, &opts).unwrap();
        assert!(tr.max_gram_residual < 1e-10, "{:e}", tr.max_gram_residual);
    }

    #[test]
    fn resample_recovers_profiles() {
        let p = CurvatureProfile::partially_null("2", "6", (0.0, 1.0)).unwrap();
        let tr = integrate_frame(
            &p,
            &canonical_frame(p.kind),
            Vec4::ZERO,
            &IntegrateOptions::for_profile(&p),
        )
        .unwrap();
        let rec = resample_curvatures(&tr).unwrap();
        for c in &rec[2..rec.len() - 2] {
            assert!((c.kappa - 2.0).abs() < 1e-6 && (c.tau - 6.0).abs() < 1e-6 && c.sigma.abs() < 1e-6);
        }

        let q = CurvatureProfile::pseudo_null("1", "-s^2/2", (0.0, 2.0)).unwrap();
        let opts = IntegrateOptions::for_profile(&q).unvalidated();
        let tr = integrate_frame(&q, &canonical_frame(q.kind), Vec4::ZERO, &opts).unwrap();
        let rec = resample_curvatures(&tr).unwrap();
        let i = tr.s_values.iter().position(|s| (s - 1.0).abs() < 1e-9).unwrap();
        assert!((rec[i].sigma + 0.5).abs() < 1e-6);
        assert!((rec[i].tau - 1.0).abs() < 1e-6);
        assert!((rec[i].kappa - 1.0).abs() < 1e-6);
    }

    #[test]
    fn resample_of_constant_frame_is_zero() {
        let p = zero_profile(FrameKind::PartiallyNull);
        let opts = IntegrateOptions::for_profile(&p).unvalidated();
        let tr = integrate_frame(&p, &canonical_frame(p.kind), Vec4::ZERO, &opts).unwrap();
        for c in resample_curvatures(&tr).unwrap() {
            assert!(c.kappa.abs() < 1e-12 && c.tau.abs() < 1e-12 && c.sigma.abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let p = CurvatureProfile::partially_null("1", "1", (0.0, 1.0)).unwrap();
        let opts = IntegrateOptions::for_profile(&p).with_step(0.1);
        let tr = integrate_frame(&p, &canonical_frame(p.kind), Vec4::ZERO, &opts).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "s,x1,x2,x3,x4,T1,T2,T3,T4,N1,N2,N3,N4,B11,B12,B13,B14,B21,B22,B23,B24,gram_residual"
        );
        assert_eq!(lines.len(), 12);
        let cells: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(cells.len(), 22);
        let mantissa = cells[0].split('e').next().unwrap();
        assert_eq!(mantissa.replace(['.', '-'], "").len(), 17);
        let s: f64 = cells[0].parse().unwrap();
        assert_eq!(s, tr.s_values[2]);
    }

    #[test]
    fn step_sanity_bound_and_unit_speed() {
        let p = CurvatureProfile::pseudo_null("1 + s", "-(1 + s)/3", (0.0, 3.0)).unwrap();
        let tr = integrate_frame(
            &p,
            &canonical_frame(p.kind),
            Vec4::ZERO,
            &IntegrateOptions::for_profile(&p),
        )
        .unwrap();
        let max_t = tr.frames.iter().map(|f| f.t.norm_euclid()).fold(0.0, f64::max);
        for w in tr.positions.windows(2) {
            assert!((w[1] - w[0]).norm_euclid() < 10.0 * tr.h * max_t);
        }
        for f in &tr.frames {
            assert!((metric(&f.t, &f.t) - 1.0).abs() < DEFAULT_EPS_GRAM);
        }
    }
}
