//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Largest singular value of `a`, by power iteration on `AᵀA`.
///
/// Iterates until the relative change of the estimate drops below `rel_tol`
/// (or 10 000 sweeps). The start vector is all-ones so the result is
/// deterministic.
pub fn spectral_norm(a: &DMatrix<f64>, rel_tol: f64) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut est = 0.0_f64;
    for _ in 0..10_000 {
        let av = a * &v;
        let w = a.tr_mul(&av);
        let norm_w = w.norm();
        if norm_w == 0.0 {
            // all-ones landed in the null space; fall back to the Frobenius bound
            return a.norm();
        }
        let next = norm_w.sqrt();
        v = w / norm_w;
        if (next - est).abs() <= rel_tol * next {
            return next;
        }
        est = next;
    }
    est
}

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_matches_svd() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 3.0, 0.25, -1.0]);
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        assert!((spectral_norm(&a, 1e-12) - smax).abs() < 1e-9 * smax);
    }

    #[test]
    fn spectral_norm_of_scaled_identity() {
        let a = DMatrix::<f64>::identity(4, 4) * 2f64.sqrt();
        assert!((spectral_norm(&a, 1e-12) - 2f64.sqrt()).abs() < 1e-14);
    }
}
