//! Four-vectors of Minkowski space with signature (-, +, +, +).

use std::fmt;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal of the metric matrix.
pub const METRIC_DIAG: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

/// A point or vector of E⁴₁ in rectangular coordinates `(x1, x2, x3, x4)`.
///
/// `x1` is the timelike coordinate.
#[derive(Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Vec4 {
    c: [f64; 4],
}

impl Vec4 {
    pub const ZERO: Vec4 = Vec4 { c: [0.0; 4] };

    /// Builds a vector from coordinates known to be finite.
    pub fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        let v = Vec4 { c: [x1, x2, x3, x4] };
        debug_assert!(v.is_finite(), "non-finite Vec4 {:?}", v.c);
        v
    }

    /// Checked constructor for coordinates coming from outside the crate.
    pub fn try_new(x1: f64, x2: f64, x3: f64, x4: f64) -> Result<Self> {
        Self::try_from_array([x1, x2, x3, x4])
    }

    pub fn try_from_array(c: [f64; 4]) -> Result<Self> {
        if c.iter().all(|x| x.is_finite()) {
            Ok(Vec4 { c })
        } else {
            Err(Error::NonFinite(c))
        }
    }

    pub(crate) fn from_array(c: [f64; 4]) -> Self {
        Vec4 { c }
    }

    /// Standard basis vector `e_{i+1}`.
    pub fn basis(i: usize) -> Self {
        let mut c = [0.0; 4];
        c[i] = 1.0;
        Vec4 { c }
    }

    pub fn to_array(self) -> [f64; 4] {
        self.c
    }

    pub fn x1(&self) -> f64 {
        self.c[0]
    }
    pub fn x2(&self) -> f64 {
        self.c[1]
    }
    pub fn x3(&self) -> f64 {
        self.c[2]
    }
    pub fn x4(&self) -> f64 {
        self.c[3]
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    /// Euclidean inner product of the coordinate tuples.
    pub fn dot_euclid(&self, other: &Vec4) -> f64 {
        self.c.iter().zip(other.c.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_euclid(&self) -> f64 {
        self.dot_euclid(self).sqrt()
    }

    /// The metric matrix `diag(-1, 1, 1, 1)` applied to the coordinates, so
    /// that `v.lowered().dot_euclid(w) == metric(v, w)`.
    pub fn lowered(&self) -> Vec4 {
        Vec4::new(-self.c[0], self.c[1], self.c[2], self.c[3])
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

impl TryFrom<[f64; 4]> for Vec4 {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        Vec4::try_from_array(c)
    }
}

impl From<Vec4> for [f64; 4] {
    fn from(v: Vec4) -> Self {
        v.c
    }
}

impl fmt::Debug for Vec4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vec4({}, {}, {}, {})", self.c[0], self.c[1], self.c[2], self.c[3])
    }
}

impl Index<usize> for Vec4 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.c[i]
    }
}

impl Add for Vec4 {
    type Output = Vec4;

    fn add(self, o: Vec4) -> Vec4 {
        Vec4::from_array([
            self.c[0] + o.c[0],
            self.c[1] + o.c[1],
            self.c[2] + o.c[2],
            self.c[3] + o.c[3],
        ])
    }
}

impl AddAssign for Vec4 {
    fn add_assign(&mut self, o: Vec4) {
        *self = *self + o;
    }
}

impl Sub for Vec4 {
    type Output = Vec4;

    fn sub(self, o: Vec4) -> Vec4 {
        Vec4::from_array([
            self.c[0] - o.c[0],
            self.c[1] - o.c[1],
            self.c[2] - o.c[2],
            self.c[3] - o.c[3],
        ])
    }
}

impl SubAssign for Vec4 {
    fn sub_assign(&mut self, o: Vec4) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec4 {
    type Output = Vec4;

    fn mul(self, k: f64) -> Vec4 {
        Vec4::from_array([self.c[0] * k, self.c[1] * k, self.c[2] * k, self.c[3] * k])
    }
}

impl Mul<Vec4> for f64 {
    type Output = Vec4;

    fn mul(self, v: Vec4) -> Vec4 {
        v * self
    }
}

impl Neg for Vec4 {
    type Output = Vec4;

    fn neg(self) -> Vec4 {
        self * -1.0
    }
}

/// Causal character of a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CausalCharacter {
    Spacelike,
    Timelike,
    Lightlike,
    Zero,
}

/// The Lorentzian metric `g = -dx1² + dx2² + dx3² + dx4²`.
pub fn metric(v: &Vec4, w: &Vec4) -> f64 {
    -v.c[0] * w.c[0] + v.c[1] * w.c[1] + v.c[2] * w.c[2] + v.c[3] * w.c[3]
}

/// Scale-aware zero test for `g(v, v)`.
pub fn null_tolerance(v: &Vec4) -> f64 {
    1e-9 * (1.0 + v.dot_euclid(v))
}

pub fn causal_character(v: &Vec4) -> CausalCharacter {
    if v.c.iter().all(|&x| x == 0.0) {
        return CausalCharacter::Zero;
    }
    let q = metric(v, v);
    if q.abs() <= null_tolerance(v) {
        CausalCharacter::Lightlike
    } else if q > 0.0 {
        CausalCharacter::Spacelike
    } else {
        CausalCharacter::Timelike
    }
}

/// `sqrt(|g(v, v)|)`.
pub fn lorentz_norm(v: &Vec4) -> f64 {
    metric(v, v).abs().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        let e1 = Vec4::new(1.0, 0.0, 0.0, 0.0);
        let e2 = Vec4::new(0.0, 1.0, 0.0, 0.0);
        let n = Vec4::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(metric(&e1, &e1), -1.0);
        assert_eq!(metric(&e2, &e2), 1.0);
        assert_eq!(metric(&n, &n), 0.0);
    }

    #[test]
    fn signature_has_one_negative_direction() {
        let diag: Vec<f64> = (0..4).map(|i| metric(&Vec4::basis(i), &Vec4::basis(i))).collect();
        assert_eq!(diag, METRIC_DIAG.to_vec());
    }

    #[test]
    fn causal_examples() {
        assert_eq!(
            causal_character(&Vec4::new(1.0, 0.0, 0.0, 0.0)),
            CausalCharacter::Timelike
        );
        assert_eq!(causal_character(&Vec4::ZERO), CausalCharacter::Zero);
        assert_eq!(
            causal_character(&Vec4::new(3.0, 3.0, 0.0, 0.0)),
            CausalCharacter::Lightlike
        );
        assert_eq!(
            causal_character(&Vec4::new(0.0, 0.0, 2.0, 0.0)),
            CausalCharacter::Spacelike
        );
    }

    #[test]
    fn norm_examples() {
        assert_eq!(lorentz_norm(&Vec4::new(2.0, 0.0, 0.0, 0.0)), 2.0);
        assert_eq!(lorentz_norm(&Vec4::new(0.0, 3.0, 4.0, 0.0)), 5.0);
        assert_eq!(lorentz_norm(&Vec4::new(1.0, 1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Vec4::try_new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(Vec4::try_new(0.0, f64::INFINITY, 0.0, 0.0).is_err());
        assert!(serde_json::from_str::<Vec4>("[1, 2, 3, 4]").is_ok());
    }

    fn vec4() -> impl Strategy<Value = Vec4> {
        prop::array::uniform4(-10.0..10.0f64).prop_map(Vec4::from_array)
    }

    proptest! {
        #[test]
        fn metric_is_bilinear(u in vec4(), v in vec4(), w in vec4(), a in -5.0..5.0f64, b in -5.0..5.0f64) {
            let lhs = metric(&(a * u + b * v), &w);
            let rhs = a * metric(&u, &w) + b * metric(&v, &w);
            let scale = 1.0 + (a.abs() * u.norm_euclid() + b.abs() * v.norm_euclid()) * w.norm_euclid();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn metric_is_symmetric(u in vec4(), v in vec4()) {
            prop_assert_eq!(metric(&u, &v), metric(&v, &u));
        }

        #[test]
        fn norm_squares_to_abs_metric(v in vec4()) {
            let n = lorentz_norm(&v);
            let q = metric(&v, &v).abs();
            prop_assert!((n * n - q).abs() <= 1e-12 * (1.0 + q));
        }

        #[test]
        fn lowered_realizes_metric(u in vec4(), v in vec4()) {
            let q = metric(&u, &v);
            prop_assert!((u.lowered().dot_euclid(&v) - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }
}
