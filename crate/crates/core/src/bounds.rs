//! Lower bounds from the Lagrangian dual functional and upper bounds from
//! rounding the relaxed solution to the nearest feasible selection.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Assignment, RotamerPartition, ScpInstance};
use crate::lifting::LiftedGeometry;
use crate::projections::{symmetric_eigen, symmetrize};
use crate::scalar::Real;

/// `min <W, Y>` over the box-and-gangster set: `W_00` plus the negative part
/// of every ordered non-gangster entry.
pub fn inner_minimum<T: Real>(w: &DMatrix<T>, gangster: &[(usize, usize)]) -> T {
    let n = w.nrows();
    let mut fixed = gangster.iter().peekable();
    let mut total = w[(0, 0)];
    for r in 0..n {
        for c in 0..n {
            if fixed.peek() == Some(&&(r, c)) {
                fixed.next();
                continue;
            }
            total += w[(r, c)].min(T::zero());
        }
    }
    total
}

/// Largest eigenvalue of the symmetrized `V^T Z V`.
pub fn lambda_max_reduced<T: Real>(z: &DMatrix<T>, v: &DMatrix<T>) -> Result<T> {
    let reduced = v.transpose() * z * v;
    let eig = symmetric_eigen(symmetrize(&reduced))?;
    Ok(eig.eigenvalues.max())
}

/// Dual functional `g(Z) = min_Y <Ehat + Z, Y> - (p+1) lambda_max(V^T Z V)`.
///
/// Valid lower bound on the relaxation, hence on the integer optimum, for
/// every symmetric `Z`.
pub fn lower_bound<T: Real>(z: &DMatrix<T>, geometry: &LiftedGeometry<T>) -> Result<T> {
    let w = &geometry.ehat + z;
    let inner = inner_minimum(&w, &geometry.gangster);
    let lmax = lambda_max_reduced(z, &geometry.v)?;
    Ok(inner - T::from_count(geometry.p() + 1) * lmax)
}

/// Where the fractional point fed to the rounding step comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperSource {
    FirstColumn,
    DominantEigenvector,
}

impl UpperSource {
    pub const ALL: [UpperSource; 2] = [UpperSource::FirstColumn, UpperSource::DominantEigenvector];
}

impl fmt::Display for UpperSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpperSource::FirstColumn => "first_column",
            UpperSource::DominantEigenvector => "dominant_eigenvector",
        })
    }
}

impl FromStr for UpperSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_column" | "column" => Ok(UpperSource::FirstColumn),
            "dominant_eigenvector" | "eig" => Ok(UpperSource::DominantEigenvector),
            other => Err(Error::InvalidParams(format!("unknown upper-bound source {other:?}"))),
        }
    }
}

/// Fractional indicator in `[0,1]^n0` read off a lifted matrix.
///
/// The eigenvector variant scales the unit eigenvector by `sqrt(lambda_max)`,
/// i.e. returns the dominant rank-one factor, so a lifted `[1;x][1;x]^T`
/// yields `x` itself.
pub fn extract_approx<T: Real>(y: &DMatrix<T>, source: UpperSource) -> Result<Vec<T>> {
    let n = y.nrows();
    let unit = |x: T| x.clamp(T::zero(), T::one());
    match source {
        UpperSource::FirstColumn => Ok((1..n).map(|i| unit(y[(i, 0)])).collect()),
        UpperSource::DominantEigenvector => {
            let eig = symmetric_eigen(symmetrize(y))?;
            let k = eig.eigenvalues.imax();
            let scale = eig.eigenvalues[k].max(T::zero()).sqrt();
            let col = eig.eigenvectors.column(k);
            let sign = if col.sum() >= T::zero() { T::one() } else { -T::one() };
            Ok((1..n).map(|i| unit(col[i] * sign * scale)).collect())
        }
    }
}

/// Nearest feasible selection: blockwise argmax, lowest index on ties.
pub fn round_to_feasible<T: Real>(x: &[T], partition: &RotamerPartition) -> Result<Assignment> {
    if x.len() != partition.n0() {
        return Err(Error::DimensionMismatch { expected: partition.n0(), found: x.len() });
    }
    let choice = partition
        .blocks()
        .map(|block| {
            let vals = &x[block];
            let mut best = 0;
            for (k, &v) in vals.iter().enumerate().skip(1) {
                if v > vals[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    Assignment::new(choice, partition)
}

/// Feasible point found by one rounding strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound<T: Real> {
    pub value: T,
    pub source: UpperSource,
    pub assignment: Assignment,
}

pub fn upper_bound<T: Real>(y: &DMatrix<T>, instance: &ScpInstance<T>, source: UpperSource) -> Result<UpperBound<T>> {
    let x = extract_approx(y, source)?;
    let assignment = round_to_feasible(&x, instance.partition())?;
    let value = instance.energy_of(&assignment);
    Ok(UpperBound { value, source, assignment })
}

/// Bounds evaluated at one solver checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRecord<T: Real> {
    pub iteration: usize,
    pub lower: T,
    pub upper: T,
    pub upper_source: UpperSource,
    pub assignment: Assignment,
}

/// `2 |u - l| / |u + l + 1|`.
pub fn relative_gap<T: Real>(ubd: T, lbd: T) -> T {
    T::lit(2.0) * (ubd - lbd).abs() / (ubd + lbd + T::one()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::lift_indicator;
    use crate::testing::derived_instance;

    fn part(sizes: &[usize]) -> RotamerPartition {
        RotamerPartition::new(sizes.to_vec()).unwrap()
    }

    #[test]
    fn lower_bound_zero_dual_nonnegative_energy() {
        let raw = DMatrix::from_fn(3, 3, |r, c| (r + c) as f64);
        let inst = ScpInstance::from_raw("nn", vec![2, 1], &raw).unwrap();
        let geo = LiftedGeometry::new(&inst);
        let g = lower_bound(&DMatrix::zeros(4, 4), &geo).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn lower_bound_at_initial_dual_is_valid() {
        let inst = derived_instance();
        let geo = LiftedGeometry::new(&inst);
        let mut z0 = DMatrix::<f64>::zeros(5, 5);
        for i in 1..5 {
            z0[(i, i)] = -geo.ehat[(i, i)];
        }
        let g = lower_bound(&z0, &geo).unwrap();
        // W = Ehat + Z0 has zero diagonal and row 0, cross entries all >= 0
        assert_eq!(inner_minimum(&(&geo.ehat + &z0), &geo.gangster), 0.0);
        assert!(g <= 6.0, "g = {g}");
    }

    #[test]
    fn inner_minimum_skips_gangster_entries() {
        let j = vec![(0, 0), (1, 2), (2, 1)];
        let mut w = DMatrix::<f64>::from_element(3, 3, -1.0);
        w[(0, 0)] = 4.0;
        // (0,0) contributes its value, gangster (1,2),(2,1) excluded, six others -1
        assert_eq!(inner_minimum(&w, &j), 4.0 - 6.0);
    }

    #[test]
    fn extract_from_lifted_feasible_point() {
        let x = [false, true, true, false, false];
        let y = lift_indicator::<f64>(&x);
        let expect: Vec<f64> = x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        assert_eq!(extract_approx(&y, UpperSource::FirstColumn).unwrap(), expect);
        let eig = extract_approx(&y, UpperSource::DominantEigenvector).unwrap();
        for (a, b) in eig.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let pt = part(&[2, 3]);
        let a = round_to_feasible(&eig, &pt).unwrap();
        assert_eq!(a.to_indicator(&pt), x.to_vec());
    }

    #[test]
    fn extract_from_e00_is_zero() {
        let mut y = DMatrix::<f64>::zeros(4, 4);
        y[(0, 0)] = 1.0;
        for s in UpperSource::ALL {
            assert!(extract_approx(&y, s).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rounding_examples() {
        let pt = part(&[2, 2]);
        let a = round_to_feasible(&[0.7, 0.3, 0.2, 0.8], &pt).unwrap();
        assert_eq!(a.choice(), &[0, 1]);
        assert_eq!(a.to_indicator(&pt), vec![true, false, false, true]);
        let a = round_to_feasible(&[0.5, 0.5, 0.1, 0.1], &pt).unwrap();
        assert_eq!(a.choice(), &[0, 0]);
        let a = round_to_feasible(&[0.0, 1.0, 1.0, 0.0], &pt).unwrap();
        assert_eq!(a.choice(), &[1, 0]);
        assert!(round_to_feasible(&[0.0; 3], &pt).is_err());
    }

    #[test]
    fn upper_bound_examples() {
        let inst = derived_instance();
        let y = lift_indicator::<f64>(&[true, false, false, true]);
        for s in UpperSource::ALL {
            let ub = upper_bound(&y, &inst, s).unwrap();
            assert_eq!(ub.value, 6.0);
            assert_eq!(ub.assignment.choice(), &[0, 1]);
        }
        let zero = ScpInstance::from_raw("z", vec![3, 2], &DMatrix::zeros(5, 5)).unwrap();
        let y = DMatrix::from_element(6, 6, 0.3);
        assert_eq!(upper_bound(&y, &zero, UpperSource::FirstColumn).unwrap().value, 0.0);
    }

    #[test]
    fn relative_gap_examples() {
        assert_eq!(relative_gap(-48.46, -48.46), 0.0);
        assert_eq!(relative_gap(1.0, 0.0), 1.0);
        assert_eq!(relative_gap(0.0, 0.0), 0.0);
        assert!((relative_gap(-7.81f32, -7.81)).abs() < 1e-7);
    }

    #[test]
    fn upper_source_parses_cli_names() {
        assert_eq!("column".parse::<UpperSource>().unwrap(), UpperSource::FirstColumn);
        assert_eq!("eig".parse::<UpperSource>().unwrap(), UpperSource::DominantEigenvector);
        assert!("both".parse::<UpperSource>().is_err());
    }
}
