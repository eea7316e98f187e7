//! Dense symmetric positive-definite solves for the small (≤ 8) systems
//! arising in Newton steps.

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, n×n)
/// via Cholesky. Returns `None` if `A` is not numerically positive definite.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Solves `(A + mu I) x = b`, raising `mu` from zero until the shifted
/// matrix factors. `A` here is the negated Hessian.
pub(crate) fn damped_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    if let Some(x) = cholesky_solve(a, b) {
        return Some(x);
    }
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(1e-8, f64::max);
    let mut mu = 1e-6 * scale;
    for _ in 0..40 {
        let mut shifted = a.to_vec();
        for i in 0..n {
            shifted[i * n + i] += mu;
        }
        if let Some(x) = cholesky_solve(&shifted, b) {
            return Some(x);
        }
        mu *= 10.0;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = cholesky_solve(&a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_and_damps() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(cholesky_solve(&a, &[1.0, 1.0]).is_none());
        assert!(damped_solve(&a, &[1.0, 1.0]).is_some());
    }
}
