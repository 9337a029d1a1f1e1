//! Minimal dense linear algebra for the small systems this crate solves
//! (factor covariances and Newton steps, dimension <= ~16). Matrices are
//! row-major `&[R]` slices.

use crate::error::{Error, Result};
use crate::real::Real;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Pivots are tested against a relative floor so numerically singular inputs
/// are rejected rather than factored into round-off noise.
pub fn cholesky<R: Real>(a: &[R], d: usize) -> Result<Vec<R>> {
    assert_eq!(a.len(), d * d);
    let mut diag_max = R::zero();
    for i in 0..d {
        diag_max = diag_max.max(a[i * d + i].abs());
    }
    let floor = diag_max * R::epsilon() * R::lit(100.0);
    let mut l = vec![R::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= floor || !sum.is_finite() {
                    return Err(Error::invalid(format!(
                        "matrix is not positive definite (pivot {i} = {sum})"
                    )));
                }
                l[i * d + j] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Solve `L y = b` for lower-triangular `L`.
pub fn forward_sub<R: Real>(l: &[R], b: &[R], d: usize) -> Vec<R> {
    let mut y = vec![R::zero(); d];
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * d + k] * y[k];
        }
        y[i] = sum / l[i * d + i];
    }
    y
}

/// Solve `L^T x = y` for lower-triangular `L`.
pub fn backward_sub_t<R: Real>(l: &[R], y: &[R], d: usize) -> Vec<R> {
    let mut x = vec![R::zero(); d];
    for i in (0..d).rev() {
        let mut sum = y[i];
        for k in (i + 1)..d {
            sum -= l[k * d + i] * x[k];
        }
        x[i] = sum / l[i * d + i];
    }
    x
}

/// Solve `A x = b` given the Cholesky factor of `A`.
pub fn chol_solve<R: Real>(l: &[R], b: &[R], d: usize) -> Vec<R> {
    backward_sub_t(l, &forward_sub(l, b, d), d)
}

/// Inverse of a symmetric positive-definite matrix from its Cholesky factor.
pub fn chol_inverse<R: Real>(l: &[R], d: usize) -> Vec<R> {
    let mut inv = vec![R::zero(); d * d];
    let mut e = vec![R::zero(); d];
    for j in 0..d {
        e[j] = R::one();
        let col = chol_solve(l, &e, d);
        e[j] = R::zero();
        for i in 0..d {
            inv[i * d + j] = col[i];
        }
    }
    inv
}

/// ln det A from the Cholesky factor of A.
pub fn chol_ln_det<R: Real>(l: &[R], d: usize) -> R {
    let mut acc = R::zero();
    for i in 0..d {
        acc += l[i * d + i].ln();
    }
    acc + acc
}

/// Solve a general square system by LU with partial pivoting.
/// Errors on (numerically) singular systems.
pub fn lu_solve<R: Real>(a: &[R], b: &[R], d: usize) -> Result<Vec<R>> {
    assert_eq!(a.len(), d * d);
    assert_eq!(b.len(), d);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..d {
        let mut pivot = col;
        let mut best = m[col * d + col].abs();
        for row in (col + 1)..d {
            let v = m[row * d + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if !(best > R::zero()) || !best.is_finite() {
            return Err(Error::numerical(format!(
                "singular system: pivot column {col}"
            )));
        }
        if pivot != col {
            for k in 0..d {
                m.swap(col * d + k, pivot * d + k);
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..d {
            let f = m[row * d + col] / m[col * d + col];
            m[row * d + col] = R::zero();
            for k in (col + 1)..d {
                let upd = m[col * d + k] * f;
                m[row * d + k] -= upd;
            }
            let upd = x[col] * f;
            x[row] -= upd;
        }
    }
    for i in (0..d).rev() {
        let mut sum = x[i];
        for k in (i + 1)..d {
            sum -= m[i * d + k] * x[k];
        }
        x[i] = sum / m[i * d + i];
    }
    Ok(x)
}

pub fn mat_vec<R: Real>(a: &[R], v: &[R], d: usize) -> Vec<R> {
    let mut out = vec![R::zero(); d];
    for i in 0..d {
        let mut acc = R::zero();
        for j in 0..d {
            acc += a[i * d + j] * v[j];
        }
        out[i] = acc;
    }
    out
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = R::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let a = vec![4.0f64, 2.0, 0.5, 2.0, 5.0, 1.0, 0.5, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += l[i * 3 + k] * l[j * 3 + k];
                }
                assert!((acc - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = vec![1.0f64, 2.0, 2.0, 1.0];
        assert!(cholesky(&a, 2).is_err());
    }

    #[test]
    fn chol_solve_and_inverse() {
        let a = vec![4.0f64, 2.0, 2.0, 5.0];
        let l = cholesky(&a, 2).unwrap();
        let x = chol_solve(&l, &[1.0, 1.0], 2);
        // A x = b
        assert!((4.0 * x[0] + 2.0 * x[1] - 1.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 5.0 * x[1] - 1.0).abs() < 1e-14);
        let inv = chol_inverse(&l, 2);
        let det = 16.0;
        assert!((inv[0] - 5.0 / det).abs() < 1e-14);
        assert!((chol_ln_det(&l, 2) - det.ln()).abs() < 1e-14);
    }

    #[test]
    fn lu_solves_with_pivoting() {
        let a = vec![0.0f64, 1.0, 2.0, 1.0, -1.0, 0.5, 3.0, 0.0, 1.0];
        let b = vec![5.0, 0.5, 4.0];
        let x = lu_solve(&a, &b, 3).unwrap();
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += a[i * 3 + j] * x[j];
            }
            assert!((acc - b[i]).abs() < 1e-12);
        }
        let singular = vec![1.0f64, 2.0, 2.0, 4.0];
        assert!(lu_solve(&singular, &[1.0, 1.0], 2).is_err());
    }
}
