//! Quadrature and finite-difference derivatives for curvature functions.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Absolute tolerance of [`antiderivative`].
pub const QUAD_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 40;
const MAX_PANELS: usize = 4000;

// Gauss–Kronrod 7/15 nodes on [-1, 1] (non-negative half, Kronrod order).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss–Kronrod 15-point panel: `(kronrod estimate, |kronrod − gauss|)`.
pub fn gauss_kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand(x))
        }
    };
    let fc = eval(c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = r * XGK[j];
        let pair = eval(c - dx)? + eval(c + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kronrod * r, ((kronrod - gauss) * r).abs()))
}

struct Panel {
    a: f64,
    b: f64,
    est: f64,
    err: f64,
    depth: u32,
}

// Globally adaptive: always bisect the panel with the largest error estimate.
fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let panel = |a: f64, b: f64, depth: u32| -> Result<Panel> {
        let (est, err) = gauss_kronrod15(f, a, b)?;
        Ok(Panel { a, b, est, err, depth })
    };
    let mut panels = vec![panel(a, b, 0)?];
    loop {
        let total: f64 = panels.iter().map(|p| p.est).sum();
        let error: f64 = panels.iter().map(|p| p.err).sum();
        if error <= tol.max(50.0 * f64::EPSILON * total.abs()) {
            return Ok((total, error));
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.depth < MAX_DEPTH)
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| panels.len() < MAX_PANELS) else {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: total,
                error,
            });
        };
        let p = panels.swap_remove(i);
        let m = 0.5 * (p.a + p.b);
        panels.push(panel(p.a, m, p.depth + 1)?);
        panels.push(panel(m, p.b, p.depth + 1)?);
    }
}

/// `∫_{s0}^{s} f`, adaptive Gauss–Kronrod to absolute tolerance [`QUAD_TOL`].
/// Antisymmetric in the limits.
pub fn antiderivative<F: Fn(f64) -> f64>(f: F, s0: f64, s: f64) -> Result<f64> {
    antiderivative_tol(&f, s0, s, QUAD_TOL)
}

pub fn antiderivative_tol<F: Fn(f64) -> f64>(f: &F, s0: f64, s: f64, tol: f64) -> Result<f64> {
    if s0 == s {
        return Ok(0.0);
    }
    if s < s0 {
        return antiderivative_tol(f, s, s0, tol).map(|v| -v);
    }
    adaptive(f, s0, s, tol).map(|(v, _)| v)
}

/// Running integral `∫_{grid[0]}^{grid[i]} f` at each grid point.
pub fn cumulative_integral<F: Fn(f64) -> f64>(f: F, grid: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    if let Some(&first) = grid.first() {
        out.push(0.0);
        let mut prev = first;
        for &s in &grid[1..] {
            acc += antiderivative_tol(&f, prev, s, QUAD_TOL)?;
            out.push(acc);
            prev = s;
        }
    }
    Ok(out)
}

/// A finite-difference estimate; `one_sided` marks stencils shifted away
/// from a domain edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdEstimate {
    pub value: f64,
    pub one_sided: bool,
}

/// Step for the first derivative at `s`.
pub fn first_step(s: f64) -> f64 {
    1e-4 * (1.0 + s.abs())
}

/// Step for the second and third derivatives at `s`; larger than the
/// first-derivative step so that rounding stays below truncation.
pub fn higher_step(s: f64) -> f64 {
    1e-3 * (1.0 + s.abs())
}

#[derive(Clone, Copy)]
enum Placement {
    Central,
    Forward,
    Backward,
}

fn placement(s: f64, reach: f64, domain: Option<(f64, f64)>) -> Placement {
    match domain {
        Some((a, _)) if s - reach < a => Placement::Forward,
        Some((_, b)) if s + reach > b => Placement::Backward,
        _ => Placement::Central,
    }
}

/// Derivative of order 1, 2 or 3 with an explicit step.
///
/// Central stencils are fourth order for the first and second derivative
/// and second order for the third. Near a domain edge the stencil is
/// mirrored to the inside with matching one-sided coefficients.
pub fn derivative_with_step<F: Fn(f64) -> f64>(
    f: &F,
    s: f64,
    order: u8,
    h: f64,
    domain: Option<(f64, f64)>,
) -> FdEstimate {
    let reach = match order {
        1..=3 => 2.0 * h,
        _ => panic!("derivative order {order} not supported"),
    };
    let place = placement(s, reach, domain);
    let at = |k: f64| f(s + k * h);
    let value = match (order, place) {
        (1, Placement::Central) => (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h),
        (2, Placement::Central) => {
            (-at(-2.0) + 16.0 * at(-1.0) - 30.0 * at(0.0) + 16.0 * at(1.0) - at(2.0)) / (12.0 * h * h)
        }
        (3, Placement::Central) => (-at(-2.0) + 2.0 * at(-1.0) - 2.0 * at(1.0) + at(2.0)) / (2.0 * h * h * h),
        (_, Placement::Forward) => one_sided(order, h, at),
        (_, Placement::Backward) => {
            let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
            sign * one_sided(order, h, |k| at(-k))
        }
        _ => unreachable!(),
    };
    FdEstimate {
        value,
        one_sided: !matches!(place, Placement::Central),
    }
}

fn one_sided(order: u8, h: f64, at: impl Fn(f64) -> f64) -> f64 {
    match order {
        1 => (-25.0 * at(0.0) + 48.0 * at(1.0) - 36.0 * at(2.0) + 16.0 * at(3.0) - 3.0 * at(4.0)) / (12.0 * h),
        2 => {
            (45.0 * at(0.0) - 154.0 * at(1.0) + 214.0 * at(2.0) - 156.0 * at(3.0) + 61.0 * at(4.0) - 10.0 * at(5.0))
                / (12.0 * h * h)
        }
        3 => (-5.0 * at(0.0) + 18.0 * at(1.0) - 24.0 * at(2.0) + 14.0 * at(3.0) - 3.0 * at(4.0)) / (2.0 * h * h * h),
        _ => unreachable!(),
    }
}

pub fn derivative<F: Fn(f64) -> f64>(f: &F, s: f64, domain: Option<(f64, f64)>) -> FdEstimate {
    derivative_with_step(f, s, 1, first_step(s), domain)
}

pub fn second_derivative<F: Fn(f64) -> f64>(f: &F, s: f64, domain: Option<(f64, f64)>) -> FdEstimate {
    derivative_with_step(f, s, 2, higher_step(s), domain)
}

pub fn third_derivative<F: Fn(f64) -> f64>(f: &F, s: f64, domain: Option<(f64, f64)>) -> FdEstimate {
    derivative_with_step(f, s, 3, higher_step(s), domain)
}

/// Fourth-order first derivative of uniformly sampled data (step `h`),
/// with one-sided stencils in the two outermost points at both ends.
pub fn grid_derivative<T>(values: &[T], h: f64) -> Vec<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    assert!(n >= 5, "grid derivative needs at least 5 samples");
    let f = values;
    let k = 1.0 / (12.0 * h);
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                ((f[i + 1] - f[i - 1]) * 8.0 - (f[i + 2] - f[i - 2])) * k
            } else if i == 0 {
                (f[1] * 48.0 - f[0] * 25.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * k
            } else if i == 1 {
                (f[2] * 18.0 - f[0] * 3.0 - f[1] * 10.0 - f[3] * 6.0 + f[4]) * k
            } else if i == n - 2 {
                (f[n - 5] * -1.0 + f[n - 4] * 6.0 - f[n - 3] * 18.0 + f[n - 2] * 10.0 + f[n - 1] * 3.0) * k
            } else {
                (f[n - 5] * 3.0 - f[n - 4] * 16.0 + f[n - 3] * 36.0 - f[n - 2] * 48.0 + f[n - 1] * 25.0) * k
            }
        })
        .collect()
}

/// Running integral of uniformly sampled data, fourth order: each interval
/// uses the cubic through its four nearest samples.
pub fn grid_cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "grid quadrature needs at least 4 samples");
    let f = values;
    let k = h / 24.0;
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 0..n - 1 {
        acc += if i == 0 {
            (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) * k
        } else if i == n - 2 {
            (f[n - 4] - 5.0 * f[n - 3] + 19.0 * f[n - 2] + 9.0 * f[n - 1]) * k
        } else {
            (13.0 * (f[i] + f[i + 1]) - f[i - 1] - f[i + 2]) * k
        };
        out.push(acc);
    }
    out
}
