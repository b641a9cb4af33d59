//! Lifted geometry of the relaxation.
//!
//! Lifted indices run over `0..=n0`: index 0 is the homogenizing coordinate
//! and rotamer `u` (zero-based) sits at lifted index `u + 1`.

use nalgebra::DMatrix;

use crate::instance::{EnergyMatrix, RotamerPartition, ScpInstance};
use crate::scalar::Real;

/// Block row-sum matrix `A` (p x n0): row `i` is one on block `i`'s columns.
pub fn build_a<T: Real>(partition: &RotamerPartition) -> DMatrix<T> {
    let mut a = DMatrix::zeros(partition.p(), partition.n0());
    for (i, block) in partition.blocks().enumerate() {
        for c in block {
            a[(i, c)] = T::one();
        }
    }
    a
}

/// `[-e_p, A]`, whose null space contains every lifted feasible point.
pub fn homogenized_constraints<T: Real>(partition: &RotamerPartition) -> DMatrix<T> {
    let a = build_a::<T>(partition);
    let mut b = DMatrix::zeros(partition.p(), partition.n0() + 1);
    b.column_mut(0).fill(-T::one());
    b.columns_mut(1, partition.n0()).copy_from(&a);
    b
}

/// Exposing matrix `K = [-e_p, A]^T [-e_p, A]`. Only used for checks.
pub fn exposing_matrix<T: Real>(partition: &RotamerPartition) -> DMatrix<T> {
    let b = homogenized_constraints::<T>(partition);
    b.transpose() * b
}

/// Orthonormal basis of `Null([-e_p, A])`, shape `(n0+1) x (n0+1-p)`.
///
/// Householder QR of the square-completed matrix `[B^T | I]` yields a full
/// orthogonal `Q`; since `B^T` has full column rank `p`, its first `p`
/// columns span `range(B^T)` and the remaining ones span the complement.
pub fn build_v<T: Real>(partition: &RotamerPartition) -> DMatrix<T> {
    let n = partition.n0() + 1;
    let p = partition.p();
    let bt = homogenized_constraints::<T>(partition).transpose();
    let mut aug = DMatrix::<T>::zeros(n, p + n);
    aug.columns_mut(0, p).copy_from(&bt);
    aug.columns_mut(p, n).fill_with_identity();
    let q = aug.qr().q();
    debug_assert_eq!(q.ncols(), n);
    q.columns(p, n - p).into_owned()
}

/// Gangster index set over lifted indices: `(0,0)` plus every ordered
/// off-diagonal pair inside a diagonal block, sorted row-major.
pub fn gangster_indices(partition: &RotamerPartition) -> Vec<(usize, usize)> {
    let mut idx = Vec::with_capacity(1 + partition.within_block_pairs());
    idx.push((0, 0));
    for block in partition.blocks() {
        for r in block.clone() {
            for c in block.clone() {
                if r != c {
                    idx.push((r + 1, c + 1));
                }
            }
        }
    }
    // blocks are consecutive, so this is already row-major
    debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
    idx
}

/// `blkdiag(0, E)`.
pub fn build_ehat<T: Real>(energy: &EnergyMatrix<T>) -> DMatrix<T> {
    let n0 = energy.order();
    let mut ehat = DMatrix::zeros(n0 + 1, n0 + 1);
    ehat.view_mut((1, 1), (n0, n0)).copy_from(energy.matrix());
    ehat
}

/// Entries of `m` at the gangster positions, in the order of `gangster`.
pub fn gangster_apply<T: Real>(m: &DMatrix<T>, gangster: &[(usize, usize)]) -> Vec<T> {
    gangster.iter().map(|&(r, c)| m[(r, c)]).collect()
}

/// Lifted rank-one matrix `[1; x][1; x]^T` of an indicator vector.
pub fn lift_indicator<T: Real>(x: &[bool]) -> DMatrix<T> {
    let n = x.len() + 1;
    let on = |i: usize| i == 0 || x[i - 1];
    DMatrix::from_fn(n, n, |r, c| if on(r) && on(c) { T::one() } else { T::zero() })
}

/// Everything the solver needs about the lifted problem, built once per instance.
#[derive(Debug, Clone)]
pub struct LiftedGeometry<T: Real> {
    pub a: DMatrix<T>,
    pub ehat: DMatrix<T>,
    pub gangster: Vec<(usize, usize)>,
    pub v: DMatrix<T>,
    p: usize,
}

impl<T: Real> LiftedGeometry<T> {
    pub fn new(instance: &ScpInstance<T>) -> Self {
        let partition = instance.partition();
        Self {
            a: build_a(partition),
            ehat: build_ehat(instance.energy()),
            gangster: gangster_indices(partition),
            v: build_v(partition),
            p: partition.p(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Rank of the exposing matrix, which equals `p`.
    pub fn k_rank(&self) -> usize {
        self.p
    }

    /// Order of lifted matrices, `n0 + 1`.
    pub fn lifted_order(&self) -> usize {
        self.ehat.nrows()
    }

    /// Order of the reduced variable `R`, `n0 + 1 - p`.
    pub fn reduced_order(&self) -> usize {
        self.v.ncols()
    }
}
