//! Dense helpers for the small systems that show up around the frame
//! geometry: singular value decomposition of tall `m × 4` matrices, square
//! solves, and damped linear least squares.

use crate::error::{Error, Result};

use super::vector::Vec4;

/// Singular values (descending) and matching right singular vectors of an
/// `m × 4` matrix.
#[derive(Debug, Clone)]
pub struct Svd4 {
    pub singular_values: [f64; 4],
    pub right_vectors: [Vec4; 4],
}

/// One-sided Jacobi SVD of the matrix whose rows are `rows`.
///
/// Column pairs are rotated until mutually orthogonal, so the small singular
/// values keep absolute accuracy of order `eps * ||A||` instead of the
/// `sqrt(eps) * ||A||` floor of the normal-matrix route.
pub fn svd4(rows: &[Vec4]) -> Svd4 {
    let m = rows.len();
    let mut cols: [Vec<f64>; 4] = std::array::from_fn(|j| rows.iter().map(|r| r[j]).collect());
    let mut v = [[0.0f64; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..3 {
            for q in (p + 1)..4 {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for i in 0..m {
                        a += cp[i] * cp[i];
                        b += cq[i] * cq[i];
                        g += cp[i] * cq[i];
                    }
                    (a, b, g)
                };
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                let (cp, cq) = (&mut lo[p], &mut hi[0]);
                for i in 0..m {
                    let xp = cp[i];
                    let xq = cq[i];
                    cp[i] = c * xp - s * xq;
                    cq[i] = s * xp + c * xq;
                }
                for row in v.iter_mut() {
                    let xp = row[p];
                    let xq = row[q];
                    row[p] = c * xp - s * xq;
                    row[q] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: [f64; 4] = std::array::from_fn(|j| cols[j].iter().map(|x| x * x).sum::<f64>().sqrt());
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    Svd4 {
        singular_values: order.map(|j| norms[j]),
        right_vectors: order.map(|j| Vec4::from_array([v[0][j], v[1][j], v[2][j], v[3][j]])),
    }
}

/// Result of [`nullspace_min_singular`].
#[derive(Debug, Clone)]
pub struct NullspaceEstimate {
    /// Unit (Euclidean) right singular vector of the smallest singular value.
    pub vector: Vec4,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Every row vanished: the whole space is the nullspace.
    pub degenerate: bool,
}

/// Approximate nullspace direction of an `m × 4` system.
pub fn nullspace_min_singular(rows: &[Vec4]) -> Result<NullspaceEstimate> {
    if rows.is_empty() {
        return Err(Error::Precondition("nullspace of an empty matrix".into()));
    }
    let svd = svd4(rows);
    let sigma_max = svd.singular_values[0];
    if sigma_max == 0.0 {
        return Ok(NullspaceEstimate {
            vector: Vec4::basis(0),
            sigma_min: 0.0,
            sigma_max,
            degenerate: true,
        });
    }
    let mut vector = svd.right_vectors[3];
    let n = vector.norm_euclid();
    vector = vector * (1.0 / n);
    Ok(NullspaceEstimate {
        vector,
        sigma_min: svd.singular_values[3],
        sigma_max,
        degenerate: false,
    })
}

/// Solves the `n × n` system `a x = b` (row-major `a`) by Gaussian
/// elimination with partial pivoting. `None` when a pivot collapses.
pub fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[piv * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in (col + 1)..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in (col + 1)..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }
    Some(x)
}

/// Coefficients and residual vector of a linear least-squares fit.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl LinearFit {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Tikhonov damping relative to the largest normal-matrix diagonal entry.
pub const TIKHONOV: f64 = 1e-12;

/// Fits `y ≈ Σ_j β_j · columns[j]` through damped normal equations.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = columns.len();
    if n == 0 || columns.iter().any(|c| c.len() != y.len()) {
        return Err(Error::Precondition("least squares: column length mismatch".into()));
    }
    let mut ata = vec![0.0; n * n];
    let mut aty = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            ata[i * n + j] = v;
            ata[j * n + i] = v;
        }
        aty[i] = columns[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    let diag_max = (0..n).fold(0.0f64, |m, i| m.max(ata[i * n + i]));
    let damping = TIKHONOV * diag_max.max(1.0);
    for i in 0..n {
        ata[i * n + i] += damping;
    }
    let coefficients =
        solve(&ata, &aty, n).ok_or_else(|| Error::Precondition("least squares: singular normal matrix".into()))?;
    let residuals = y
        .iter()
        .enumerate()
        .map(|(k, &yk)| yk - (0..n).map(|j| coefficients[j] * columns[j][k]).sum::<f64>())
        .collect();
    Ok(LinearFit {
        coefficients,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_timelike_row_has_spatial_nullspace() {
        let est = nullspace_min_singular(&[Vec4::new(1.0, 0.0, 0.0, 0.0)]).unwrap();
        assert_eq!(est.sigma_min, 0.0);
        assert!(est.vector.x1().abs() < 1e-15);
        assert!((est.vector.norm_euclid() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn euclidean_basis_has_unit_singular_values() {
        let rows: Vec<Vec4> = (0..4).map(Vec4::basis).collect();
        let est = nullspace_min_singular(&rows).unwrap();
        assert!((est.sigma_min - 1.0).abs() < 1e-15);
        assert!((est.vector.norm_euclid() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_rows_are_flagged() {
        let est = nullspace_min_singular(&[Vec4::ZERO, Vec4::ZERO]).unwrap();
        assert!(est.degenerate);
        assert!(nullspace_min_singular(&[]).is_err());
    }

    #[test]
    fn svd_reconstructs_singular_values_of_diagonal() {
        let rows = vec![
            Vec4::new(3.0, 0.0, 0.0, 0.0),
            Vec4::new(0.0, -5.0, 0.0, 0.0),
            Vec4::new(0.0, 0.0, 0.5, 0.0),
            Vec4::new(0.0, 0.0, 0.0, 2.0),
        ];
        let svd = svd4(&rows);
        assert_eq!(svd.singular_values, [5.0, 3.0, 2.0, 0.5]);
    }

    #[test]
    fn small_singular_value_is_accurate_for_tall_matrices() {
        // rows orthogonal to u = (1, 2, -1, 0.5)/|.| up to a 1e-11 perturbation
        let mut rows = Vec::new();
        for i in 0..2000 {
            let t = i as f64 * 0.003;
            let a = Vec4::new(t.cos(), t.sin(), t * t, 1.0 + t);
            // remove component along u
            let u = [1.0, 2.0, -1.0, 0.5];
            let un: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let uv = Vec4::new(u[0] / un, u[1] / un, u[2] / un, u[3] / un);
            rows.push(a - uv * a.dot_euclid(&uv));
        }
        let est = nullspace_min_singular(&rows).unwrap();
        assert!(est.sigma_min < 1e-10, "sigma_min = {}", est.sigma_min);
        let u = Vec4::new(1.0, 2.0, -1.0, 0.5);
        let cos = est.vector.dot_euclid(&u).abs() / u.norm_euclid();
        assert!(cos > 1.0 - 1e-12);
    }

    #[test]
    fn solve_small_system() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let x = solve(&a, &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn least_squares_recovers_line() {
        let s: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = s.iter().map(|x| 0.3 * x + 0.1).collect();
        let fit = least_squares(&[s.clone(), vec![1.0; s.len()]], &y).unwrap();
        assert!((fit.coefficients[0] - 0.3).abs() < 1e-10);
        assert!((fit.coefficients[1] - 0.1).abs() < 1e-10);
        assert!(fit.max_abs_residual() < 1e-10);
    }

    fn row() -> impl Strategy<Value = Vec4> {
        prop::array::uniform4(-3.0..3.0f64).prop_map(Vec4::from_array)
    }

    proptest! {
        // Appending any row can only raise σ_min (interlacing), so the
        // property is stated where it holds: a rank-deficient system keeps its
        // nullspace when a dependent row is added.
        #[test]
        fn dependent_row_does_not_raise_sigma_min(
            gens in prop::collection::vec(row(), 1..4),
            weights in prop::collection::vec(prop::array::uniform3(-2.0..2.0f64), 2..9),
            extra in prop::array::uniform3(-2.0..2.0f64),
        ) {
            let combo = |w: &[f64; 3]| gens.iter().zip(w).fold(Vec4::ZERO, |acc, (g, &c)| acc + *g * c);
            let rows: Vec<Vec4> = weights.iter().map(combo).collect();
            let before = nullspace_min_singular(&rows).unwrap();
            let mut more = rows.clone();
            more.push(combo(&extra));
            let after = nullspace_min_singular(&more).unwrap();
            let scale = svd4(&more).singular_values[0];
            prop_assert!(after.sigma_min <= before.sigma_min + 1e-12 * (1.0 + scale),
                "before {} after {}", before.sigma_min, after.sigma_min);
        }

        #[test]
        fn singular_vectors_are_orthonormal(rows in prop::collection::vec(row(), 4..10)) {
            let svd = svd4(&rows);
            for i in 0..4 {
                for j in 0..4 {
                    let d = svd.right_vectors[i].dot_euclid(&svd.right_vectors[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((d - want).abs() < 1e-12);
                }
            }
        }
    }
}
