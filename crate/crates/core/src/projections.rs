//! Projection kernels: scaled simplex, PSD with fixed trace, box with
//! gangster pattern, and the dual mask that keeps `Z` in its affine set.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Euclidean projection of `d` onto `{x >= 0, sum(x) = c}` (`c > 0`).
///
/// Sort-and-threshold: with `u` sorted descending, the support is the
/// longest prefix with `u_j > (sum_{i<=j} u_i - c) / j`.
pub fn project_simplex<T: Real>(d: &[T], c: T) -> Vec<T> {
    if d.is_empty() {
        return Vec::new();
    }
    let mut u = d.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = T::zero();
    let mut tau = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - c) / T::from_count(j + 1);
        if uj > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    d.iter().map(|&x| (x - tau).max(T::zero())).collect()
}

/// Positive part of the projection onto `{R >= 0, tr(R) = c}`:
/// `R = vectors * diag(values) * vectors^T` with every `values[k] > 0`.
#[derive(Debug, Clone)]
pub struct PsdFactor<T: Real> {
    pub vectors: DMatrix<T>,
    pub values: Vec<T>,
}

impl<T: Real> PsdFactor<T> {
    /// `W diag(values) W^T` where `W = left * vectors`, symmetrized.
    pub fn congruence(&self, left: &DMatrix<T>) -> DMatrix<T> {
        let w = left * &self.vectors;
        let mut scaled = w.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(lambda);
        }
        symmetrize(&(scaled * w.transpose()))
    }

    pub fn to_matrix(&self) -> DMatrix<T> {
        let n = self.vectors.nrows();
        self.congruence(&DMatrix::identity(n, n))
    }
}

pub(crate) fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let half = T::lit(0.5);
    (m + m.transpose()) * half
}

pub(crate) fn symmetric_eigen<T: Real>(m: DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    if m.iter().any(|x| !x.is_finite_value()) {
        return Err(Error::Numerical("non-finite entry passed to the eigensolver".into()));
    }
    SymmetricEigen::try_new(m, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))
}

/// Eigendecomposes the symmetrized `m`, projects its spectrum onto the
/// scaled simplex and keeps the strictly positive part.
pub fn psd_trace_factor<T: Real>(m: &DMatrix<T>, c: T) -> Result<PsdFactor<T>> {
    let eig = symmetric_eigen(symmetrize(m))?;
    let projected = project_simplex(eig.eigenvalues.as_slice(), c);
    let keep: Vec<usize> = (0..projected.len()).filter(|&k| projected[k] > T::zero()).collect();
    let vectors = eig.eigenvectors.select_columns(keep.iter());
    let values = keep.iter().map(|&k| projected[k]).collect();
    Ok(PsdFactor { vectors, values })
}

/// Projection of a symmetric matrix onto `{R >= 0, tr(R) = c}`.
pub fn project_psd_trace<T: Real>(m: &DMatrix<T>, c: T) -> Result<DMatrix<T>> {
    Ok(psd_trace_factor(m, c)?.to_matrix())
}

/// Projection onto the box `[0, 1]` after fixing the gangster entries:
/// `(0,0)` becomes 1 and every other gangster position becomes 0.
pub fn project_box_gangster<T: Real>(m: &DMatrix<T>, gangster: &[(usize, usize)]) -> DMatrix<T> {
    let mut y = symmetrize(m);
    y.apply(|x| *x = x.clamp(T::zero(), T::one()));
    for &(r, c) in gangster {
        y[(r, c)] = if r == 0 && c == 0 { T::one() } else { T::zero() };
    }
    y
}

/// Zeroes row 0, column 0 and the diagonal.
pub fn mask_za<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let mut out = m.clone();
    mask_za_mut(&mut out);
    out
}

pub(crate) fn mask_za_mut<T: Real>(m: &mut DMatrix<T>) {
    m.row_mut(0).fill(T::zero());
    m.column_mut(0).fill(T::zero());
    m.fill_diagonal(T::zero());
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(d))
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(project_simplex(&[1.0, 1.0], 2.0), vec![1.0, 1.0]);
        assert_eq!(project_simplex(&[3.0, 1.0], 2.0), vec![2.0, 0.0]);
        assert_eq!(project_simplex(&[5.0, -1.0, 0.0], 3.0), vec![3.0, 0.0, 0.0]);
        let u = project_simplex(&[0.0; 4], 2.0);
        assert_eq!(u, vec![0.5; 4]);
    }

    #[test]
    fn psd_trace_examples() {
        let m = DMatrix::<f64>::identity(3, 3) * (2.0 / 3.0);
        assert!(close(&project_psd_trace(&m, 2.0).unwrap(), &m, 1e-14));
        assert!(close(&project_psd_trace(&diag(&[3.0, 1.0]), 2.0).unwrap(), &diag(&[2.0, 0.0]), 1e-14));
        assert!(close(&project_psd_trace(&diag(&[-1.0, -1.0]), 2.0).unwrap(), &diag(&[1.0, 1.0]), 1e-14));
    }

    #[test]
    fn psd_trace_rejects_nan() {
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(project_psd_trace(&m, 1.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn box_gangster_examples() {
        let j = vec![(0, 0), (1, 2), (2, 1)];
        let y = project_box_gangster(&DMatrix::<f64>::zeros(3, 3), &j);
        let mut e00 = DMatrix::zeros(3, 3);
        e00[(0, 0)] = 1.0;
        assert_eq!(y, e00);

        let mut m = DMatrix::<f64>::zeros(3, 3);
        m[(0, 1)] = 7.3;
        m[(1, 0)] = 7.3;
        m[(2, 2)] = -4.0;
        m[(1, 2)] = 0.5;
        m[(2, 1)] = 0.5;
        let y = project_box_gangster(&m, &j);
        assert_eq!(y[(0, 1)], 1.0);
        assert_eq!(y[(1, 0)], 1.0);
        assert_eq!(y[(2, 2)], 0.0);
        assert_eq!(y[(1, 2)], 0.0);

        let yx = crate::lifting::lift_indicator::<f64>(&[true, false]);
        assert_eq!(project_box_gangster(&yx, &j), yx);
    }

    #[test]
    fn mask_examples() {
        assert_eq!(mask_za(&DMatrix::<f64>::identity(4, 4)), DMatrix::zeros(4, 4));
        let mut m = DMatrix::<f64>::zeros(4, 4);
        m[(2, 3)] = 1.5;
        assert_eq!(mask_za(&m), m);
    }

    fn sym_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
            let m = DMatrix::from_vec(n, n, v);
            symmetrize(&m)
        })
    }

    proptest! {
        #[test]
        fn simplex_output_is_feasible(d in proptest::collection::vec(-10.0f64..10.0, 1..30), c in 0.1f64..20.0) {
            let x = project_simplex(&d, c);
            prop_assert!(x.iter().all(|&v| v >= 0.0));
            let s: f64 = x.iter().sum();
            prop_assert!((s - c).abs() <= 1e-12 * (1.0 + c));
        }

        #[test]
        fn simplex_is_nonexpansive(
            pair in (1usize..20).prop_flat_map(|n| (
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
            )),
            c in 0.1f64..10.0,
        ) {
            let (a, b) = pair;
            let pa = project_simplex(&a, c);
            let pb = project_simplex(&b, c);
            let dp: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum();
            let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!(dp.sqrt() <= d.sqrt() + 1e-10);
        }

        #[test]
        fn psd_trace_is_idempotent_and_feasible(m in sym_matrix(6), c in 0.5f64..8.0) {
            let r = project_psd_trace(&m, c).unwrap();
            prop_assert!((r.trace() - c).abs() <= 1e-10);
            let lmin = r.clone().symmetric_eigenvalues().min();
            prop_assert!(lmin >= -1e-10);
            let again = project_psd_trace(&r, c).unwrap();
            prop_assert!(close(&again, &r, 1e-10));
        }

        #[test]
        fn matrix_projections_are_nonexpansive(a in sym_matrix(5), b in sym_matrix(5)) {
            let d = (&a - &b).norm();
            let j = vec![(0, 0), (1, 2), (2, 1)];
            let pr = (project_psd_trace(&a, 3.0).unwrap() - project_psd_trace(&b, 3.0).unwrap()).norm();
            prop_assert!(pr <= d + 1e-9);
            let pb = (project_box_gangster(&a, &j) - project_box_gangster(&b, &j)).norm();
            prop_assert!(pb <= d + 1e-12);
            let pm = (mask_za(&a) - mask_za(&b)).norm();
            prop_assert!(pm <= d + 1e-12);
        }

        #[test]
        fn mask_is_idempotent(m in sym_matrix(5)) {
            prop_assert_eq!(mask_za(&mask_za(&m)), mask_za(&m));
        }

        #[test]
        fn box_output_lies_in_feasible_set(m in sym_matrix(5)) {
            let j = vec![(0, 0), (1, 2), (2, 1), (3, 4), (4, 3)];
            let y = project_box_gangster(&m, &j);
            prop_assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert_eq!(y[(0, 0)], 1.0);
            for &(r, c) in &j[1..] {
                prop_assert_eq!(y[(r, c)], 0.0);
            }
            prop_assert_eq!(&y, &y.transpose());
        }
    }
}
