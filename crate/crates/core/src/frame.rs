//! Frenet frames of partially null and pseudo null curves.
//!
//! Both families carry a tetrad `(T, N, B1, B2)` whose pairwise metric
//! products are fixed, and both evolve by a linear system whose coefficient
//! matrix depends on the curvatures `(κ, τ, σ)`:
//!
//! | family          | T'  | N'         | B1'        | B2'        |
//! |-----------------|-----|------------|------------|------------|
//! | partially null  | κN  | -κT + τB1  | σB1        | -τN - σB2  |
//! | pseudo null     | κN  | τB1        | σN - τB2   | -κT - σB1  |

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::minkowski::{metric, Vec4};

/// Default tolerance on Gram residuals.
pub const DEFAULT_EPS_GRAM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// `N` spacelike, `B1` and `B2` lightlike with `g(B1, B2) = 1`.
    PartiallyNull,
    /// `N` and `B2` lightlike with `g(N, B2) = 1`, `B1` unit spacelike.
    PseudoNull,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::PartiallyNull => "partially_null",
            FrameKind::PseudoNull => "pseudo_null",
        })
    }
}

/// The moving tetrad at one arc-length value. `V1..V4` of the k-type
/// definition are `t, n, b1, b2` in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: Vec4,
    pub n: Vec4,
    pub b1: Vec4,
    pub b2: Vec4,
}

impl Frame {
    pub fn from_vectors(v: [Vec4; 4]) -> Self {
        Frame {
            t: v[0],
            n: v[1],
            b1: v[2],
            b2: v[3],
        }
    }

    pub fn vectors(&self) -> [Vec4; 4] {
        [self.t, self.n, self.b1, self.b2]
    }

    /// `V_{index+1}`, i.e. `vector(0) == t`.
    pub fn vector(&self, index: usize) -> Vec4 {
        self.vectors()[index]
    }

    pub fn zero() -> Self {
        Frame::from_vectors([Vec4::ZERO; 4])
    }

    /// `u1 T + u2 N + u3 B1 + u4 B2`.
    pub fn combine(&self, u: [f64; 4]) -> Vec4 {
        self.t * u[0] + self.n * u[1] + self.b1 * u[2] + self.b2 * u[3]
    }

    pub fn is_finite(&self) -> bool {
        self.vectors().iter().all(Vec4::is_finite)
    }
}

impl std::ops::Add for Frame {
    type Output = Frame;

    fn add(self, o: Frame) -> Frame {
        Frame {
            t: self.t + o.t,
            n: self.n + o.n,
            b1: self.b1 + o.b1,
            b2: self.b2 + o.b2,
        }
    }
}

impl std::ops::Mul<f64> for Frame {
    type Output = Frame;

    fn mul(self, k: f64) -> Frame {
        Frame {
            t: self.t * k,
            n: self.n * k,
            b1: self.b1 * k,
            b2: self.b2 * k,
        }
    }
}

/// The ten index pairs `(i, j)`, `i <= j`, in storage order.
pub const GRAM_PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

const NAMES: [&str; 4] = ["T", "N", "B1", "B2"];

/// Prescribed value of `g(V_i, V_j)` for the family.
pub fn gram_target(kind: FrameKind, i: usize, j: usize) -> f64 {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    match (kind, i, j) {
        (_, 0, 0) => 1.0,
        (FrameKind::PartiallyNull, 1, 1) => 1.0,
        (FrameKind::PartiallyNull, 2, 3) => 1.0,
        (FrameKind::PseudoNull, 2, 2) => 1.0,
        (FrameKind::PseudoNull, 1, 3) => 1.0,
        _ => 0.0,
    }
}

/// `|g(V_i, V_j) − target|` for each of the ten pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramResidual {
    pub entries: [f64; 10],
}

impl GramResidual {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        let idx = GRAM_PAIRS.iter().position(|&p| p == key).expect("index pair in range");
        self.entries[idx]
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, &e| m.max(e))
    }

    /// Entries labelled as `"g(T,N)"` etc.
    pub fn labelled(&self) -> impl Iterator<Item = (String, f64)> + '_ {
        GRAM_PAIRS
            .iter()
            .zip(self.entries.iter())
            .map(|(&(i, j), &e)| (format!("g({},{})", NAMES[i], NAMES[j]), e))
    }
}

pub fn gram_residual(frame: &Frame, kind: FrameKind) -> GramResidual {
    let v = frame.vectors();
    let entries = GRAM_PAIRS.map(|(i, j)| (metric(&v[i], &v[j]) - gram_target(kind, i, j)).abs());
    GramResidual { entries }
}

pub fn canonical_frame(kind: FrameKind) -> Frame {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        FrameKind::PartiallyNull => Frame {
            t: Vec4::new(0.0, 1.0, 0.0, 0.0),
            n: Vec4::new(0.0, 0.0, 1.0, 0.0),
            b1: Vec4::new(r, 0.0, 0.0, r),
            b2: Vec4::new(-r, 0.0, 0.0, r),
        },
        FrameKind::PseudoNull => Frame {
            t: Vec4::new(0.0, 0.0, 1.0, 0.0),
            n: Vec4::new(1.0, 1.0, 0.0, 0.0),
            b1: Vec4::new(0.0, 0.0, 0.0, 1.0),
            b2: Vec4::new(-0.5, 0.5, 0.0, 0.0),
        },
    }
}

/// Derivative of the frame along the curve. The returned `Frame` holds
/// `(T', N', B1', B2')`.
pub fn frenet_rhs(frame: &Frame, kappa: f64, tau: f64, sigma: f64, kind: FrameKind) -> Frame {
    let Frame { t, n, b1, b2 } = *frame;
    match kind {
        FrameKind::PartiallyNull => Frame {
            t: n * kappa,
            n: t * -kappa + b1 * tau,
            b1: b1 * sigma,
            b2: n * -tau - b2 * sigma,
        },
        FrameKind::PseudoNull => Frame {
            t: n * kappa,
            n: b1 * tau,
            b1: n * sigma - b2 * tau,
            b2: t * -kappa - b1 * sigma,
        },
    }
}
