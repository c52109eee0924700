//! Singular-value and eigenvalue based quantities: Schatten p-norms, the
//! Hilbert-Schmidt inner product, and numerical rank.
//!
//! Every norm here goes through one SVD code path, including p = 1, p = 2 and
//! p = ∞. The entrywise Frobenius formula appears only in tests as an
//! independent oracle.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{argument, Result};
use crate::tensorspace::{ComplexMatrix, MultipartiteMatrix};

/// Relative rank tolerance is this constant times max(nrows, ncols).
pub const RANK_TOL_BASE: f64 = 1e-10;

/// Singular values and the rank decision derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralProfile {
    /// Singular values in descending order, all ≥ 0.
    pub singular_values: Vec<f64>,
    /// Count of singular values strictly above `tol_used`.
    pub numerical_rank: usize,
    /// Absolute threshold applied to the singular values.
    pub tol_used: f64,
}

/// Singular values of a (possibly rectangular) matrix, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    sv
}

/// Schatten p-norm of a raw matrix for p ≥ 1 or p = ∞ (`f64::INFINITY`).
pub fn matrix_schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(argument(format!("Schatten exponent p = {p} must be ≥ 1")));
    }
    let sv = singular_values(m);
    Ok(norm_from_singular_values(&sv, p))
}

/// Combines precomputed singular values into the p-norm value.
pub fn norm_from_singular_values(sv: &[f64], p: f64) -> f64 {
    if sv.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return sv.iter().copied().fold(0.0, f64::max);
    }
    // Factor out σ_max to keep σ^p from overflowing for large p.
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let sum: f64 = sv.iter().map(|&s| (s / top).powf(p)).sum();
    top * sum.powf(1.0 / p)
}

/// Schatten p-norm of a multipartite operator.
pub fn schatten_norm(c: &MultipartiteMatrix, p: f64) -> Result<f64> {
    matrix_schatten_norm(c.matrix(), p)
}

/// Operator norm, i.e. the largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Hilbert-Schmidt inner product `tr(A† B)`, conjugate-linear in `A`.
pub fn hs_inner(a: &MultipartiteMatrix, b: &MultipartiteMatrix) -> Result<Complex64> {
    if a.dims() != b.dims() {
        return Err(argument(format!(
            "Hilbert-Schmidt pairing across dims {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(a.matrix()
        .iter()
        .zip(b.matrix().iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Rank decision from the SVD: σ_i counts toward the rank iff
/// σ_i > tol · σ_max, with `tol` defaulting to `1e-10 · max(nrows, ncols)`.
pub fn numerical_rank(c: &MultipartiteMatrix, tol: Option<f64>) -> SpectralProfile {
    matrix_numerical_rank(c.matrix(), tol)
}

/// Rank decision for a raw, possibly rectangular matrix.
pub fn matrix_numerical_rank(m: &ComplexMatrix, tol: Option<f64>) -> SpectralProfile {
    let sv = singular_values(m);
    let rel = tol.unwrap_or_else(|| RANK_TOL_BASE * m.nrows().max(m.ncols()) as f64);
    let top = sv.first().copied().unwrap_or(0.0);
    let tol_used = rel * top;
    let numerical_rank = sv.iter().filter(|&&s| s > tol_used).count();
    SpectralProfile {
        singular_values: sv,
        numerical_rank,
        tol_used,
    }
}

/// Ascending eigenvalues of a Hermitian operator.
///
/// Hermiticity is validated against a scale-relative tolerance so that
/// accumulated floating error in operator arithmetic does not trip the check.
pub fn hermitian_eigenvalues(c: &MultipartiteMatrix) -> Result<Vec<f64>> {
    let scale = c.max_entry_norm().max(1.0);
    let residual = c.hermiticity_residual();
    if residual > 1e-8 * scale {
        return Err(argument(format!(
            "operator is not Hermitian (residual {residual:.3e} at scale {scale:.3e})"
        )));
    }
    // Symmetrize so the eigensolver sees an exactly Hermitian input.
    let sym = (c.matrix() + c.matrix().adjoint()).map(|z| z * Complex64::new(0.5, 0.0));
    let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    Ok(eig)
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn min_eigenvalue(c: &MultipartiteMatrix) -> Result<f64> {
    Ok(hermitian_eigenvalues(c)?[0])
}

/// Builds a rectangular complex matrix from a closure; convenience for the
/// creation/annihilation operators which act between spaces of different size.
pub fn rectangular_from_fn(
    nrows: usize,
    ncols: usize,
    f: impl Fn(usize, usize) -> Complex64,
) -> ComplexMatrix {
    DMatrix::from_fn(nrows, ncols, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorspace::ComplexVector;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Deterministic pseudo-random-looking dense test matrix.
    fn wavy(d: usize) -> MultipartiteMatrix {
        MultipartiteMatrix::from_fn(vec![d], |r, col| {
            c(
                ((1 + r * 3 + col) as f64).sin(),
                ((2 + r + 5 * col) as f64).cos() * 0.5,
            )
        })
        .unwrap()
    }

    #[test]
    fn identity_norms_follow_power_law() {
        for d in [2usize, 3, 5] {
            let id = MultipartiteMatrix::identity(vec![d]).unwrap();
            for p in [1.0, 1.5, 2.0, 3.0] {
                assert_relative_eq!(
                    schatten_norm(&id, p).unwrap(),
                    (d as f64).powf(1.0 / p),
                    epsilon = 1e-12
                );
            }
            assert_relative_eq!(schatten_norm(&id, f64::INFINITY).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn infinity_norm_is_largest_singular_value() {
        let m = wavy(4);
        let sv = singular_values(m.matrix());
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
        assert_relative_eq!(
            schatten_norm(&m, f64::INFINITY).unwrap(),
            sv[0],
            epsilon = 1e-12
        );
    }

    #[test]
    fn frobenius_matches_entrywise_sum() {
        let m = wavy(3);
        let direct: f64 = m.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert_relative_eq!(schatten_norm(&m, 2.0).unwrap(), direct, epsilon = 1e-12);
    }

    #[test]
    fn quasi_norm_exponents_are_rejected() {
        let m = wavy(2);
        assert!(schatten_norm(&m, 0.5).is_err());
        assert!(schatten_norm(&m, f64::NAN).is_err());
    }

    #[test]
    fn hs_inner_basics() {
        for d in [2usize, 4] {
            let id = MultipartiteMatrix::identity(vec![d]).unwrap();
            let v = hs_inner(&id, &id).unwrap();
            assert_relative_eq!(v.re, d as f64, epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
        let e12 = MultipartiteMatrix::from_fn(vec![2], |r, col| {
            if r == 0 && col == 1 {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap();
        assert_eq!(hs_inner(&e12, &e12).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn hs_inner_is_conjugate_symmetric() {
        let a = wavy(3);
        let b = MultipartiteMatrix::from_fn(vec![3], |r, col| {
            c((r as f64 - 1.2) * 0.3, (col as f64 + 0.7).ln())
        })
        .unwrap();
        let ab = hs_inner(&a, &b).unwrap();
        let ba = hs_inner(&b, &a).unwrap();
        assert_relative_eq!(ab.re, ba.re, epsilon = 1e-12);
        assert_relative_eq!(ab.im, -ba.im, epsilon = 1e-12);
        let aa = hs_inner(&a, &a).unwrap();
        assert_relative_eq!(aa.im, 0.0, epsilon = 1e-12);
        assert_relative_eq!(aa.re, schatten_norm(&a, 2.0).unwrap().powi(2), epsilon = 1e-10);
    }

    #[test]
    fn hs_inner_rejects_shape_mismatch() {
        let a = wavy(2);
        let b = wavy(3);
        assert!(hs_inner(&a, &b).is_err());
    }

    #[test]
    fn rank_of_zero_and_outer_products() {
        let z = MultipartiteMatrix::zeros(vec![3]).unwrap();
        assert_eq!(numerical_rank(&z, None).numerical_rank, 0);

        let v = ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)]);
        let w = ComplexVector::from_vec(vec![c(0.5, 0.5), c(1.0, 0.0), c(0.0, -1.0)]);
        let vw = MultipartiteMatrix::from_outer(vec![3], &v, &w).unwrap();
        assert_eq!(numerical_rank(&vw, None).numerical_rank, 1);
    }

    #[test]
    fn rank_counts_independent_outer_terms() {
        // Orthogonal v_i and Vandermonde-row w_i give exact rank 3.
        let mut sum = MultipartiteMatrix::zeros(vec![4]).unwrap();
        for i in 0..3usize {
            let mut v = ComplexVector::zeros(4);
            v[i] = c(1.0, 0.0);
            let w =
                ComplexVector::from_fn(4, |k, _| c(((k + 1) as f64).powi(i as i32 + 1), -0.1));
            sum = &sum + &MultipartiteMatrix::from_outer(vec![4], &v, &w).unwrap();
        }
        let profile = numerical_rank(&sum, None);
        assert_eq!(profile.numerical_rank, 3);
        assert!(profile.singular_values.iter().all(|&s| s >= 0.0));
        assert_eq!(
            profile.numerical_rank,
            profile
                .singular_values
                .iter()
                .filter(|&&s| s > profile.tol_used)
                .count()
        );
    }

    #[test]
    fn hermitian_eigenvalues_sorted_and_validated() {
        let h = MultipartiteMatrix::from_fn(vec![3], |r, col| {
            if r == col {
                c(r as f64, 0.0)
            } else if r < col {
                c(0.25, 0.5)
            } else {
                c(0.25, -0.5)
            }
        })
        .unwrap();
        let eig = hermitian_eigenvalues(&h).unwrap();
        assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = eig.iter().sum();
        assert_relative_eq!(trace, h.trace().re, epsilon = 1e-10);

        let not_h = wavy(3);
        assert!(hermitian_eigenvalues(&not_h).is_err());
    }

    #[test]
    fn norm_chain_against_rank() {
        // ‖T‖₂ ≤ ‖T‖₁ ≤ √r ‖T‖₂ on a deterministic rank-2 example.
        let mut t = MultipartiteMatrix::zeros(vec![4]).unwrap();
        for i in 0..2usize {
            let v = ComplexVector::from_fn(4, |k, _| c((k as f64 + 1.0) * (i as f64 + 0.5), 0.2));
            let w = ComplexVector::from_fn(4, |k, _| c(0.1 * k as f64, (i + k) as f64 * 0.4));
            t = &t + &MultipartiteMatrix::from_outer(vec![4], &v, &w).unwrap();
        }
        let r = numerical_rank(&t, None).numerical_rank as f64;
        assert_eq!(r, 2.0);
        let n1 = schatten_norm(&t, 1.0).unwrap();
        let n2 = schatten_norm(&t, 2.0).unwrap();
        assert!(n2 <= n1 + 1e-10);
        assert!(n1 <= r.sqrt() * n2 + 1e-10);
        assert!(n2 * n2 + 1e-10 >= t.trace().norm_sqr() / r);
    }
}
