//! Exhaustive reference solver and Goldstein dead-end elimination.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::instance::{Assignment, EnergyMatrix, RotamerPartition, ScpInstance};
use crate::scalar::Real;

/// Default cap on the number of enumerated selections.
pub const DEFAULT_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T: Real> {
    pub optimum: T,
    pub argmin: Assignment,
    pub enumerated: u128,
}

/// Exact minimum over all `prod m_i` selections, visited in lexicographic
/// order; the first minimizer found wins ties.
pub fn brute_force<T: Real>(instance: &ScpInstance<T>, limit: u128) -> Result<OracleResult<T>> {
    let partition = instance.partition();
    let size = partition.feasible_count();
    if size > limit {
        return Err(Error::TooLarge { size, limit });
    }
    let sizes = partition.sizes();
    let p = partition.p();
    let mut choice = vec![0usize; p];
    let mut best: Option<(T, Vec<usize>)> = None;
    let mut enumerated = 0u128;
    loop {
        let a = Assignment::new(choice.clone(), partition)?;
        let value = instance.energy_of(&a);
        enumerated += 1;
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, choice.clone()));
        }
        // odometer, last block fastest
        let mut k = p;
        loop {
            if k == 0 {
                let (optimum, argmin) = best.expect("at least one selection");
                return Ok(OracleResult { optimum, argmin: Assignment::new(argmin, partition)?, enumerated });
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < sizes[k] {
                break;
            }
            choice[k] = 0;
        }
    }
}

/// Result of dead-end elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct DeeReduction<T: Real> {
    /// Surviving local rotamer indices of every block, ascending.
    pub kept: Vec<Vec<usize>>,
    pub reduced: ScpInstance<T>,
    /// Global index in the original instance of each reduced rotamer.
    pub mapping: Vec<usize>,
}

impl<T: Real> DeeReduction<T> {
    /// Translates an assignment of the reduced instance back to the original.
    pub fn lift_assignment(&self, reduced: &Assignment, original: &RotamerPartition) -> Result<Assignment> {
        let choice = reduced.choice().iter().zip(&self.kept).map(|(&c, kept)| kept[c]).collect();
        Assignment::new(choice, original)
    }
}

/// Goldstein criterion: rotamer `r` of block `i` is dead if some other
/// surviving `t` in the same block satisfies
/// `(E_rr - E_tt) + sum_{j != i} min_{s in block j} 2 (E_rs - E_ts) > 0`.
///
/// Cross pairs carry the factor 2 because `x^T E x` counts them twice.
/// Elimination cascades to a fixed point; a block never loses its last
/// rotamer.
pub fn goldstein_reduce<T: Real>(instance: &ScpInstance<T>) -> Result<DeeReduction<T>> {
    let partition = instance.partition();
    let e = instance.energy();
    let p = partition.p();
    let mut kept: Vec<Vec<usize>> = partition.blocks().map(|b| b.collect()).collect();

    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..p {
            let candidates = kept[i].clone();
            for r in candidates {
                if kept[i].len() == 1 {
                    break;
                }
                let dead = kept[i]
                    .iter()
                    .filter(|&&t| t != r)
                    .any(|&t| goldstein_score(e, &kept, i, r, t) > T::zero());
                if dead {
                    kept[i].retain(|&u| u != r);
                    changed = true;
                }
            }
        }
    }

    let mapping: Vec<usize> = kept.iter().flatten().copied().collect();
    let sizes: Vec<usize> = kept.iter().map(Vec::len).collect();
    let offsets = partition.offsets();
    let local: Vec<Vec<usize>> = kept
        .iter()
        .zip(offsets)
        .map(|(ks, &off)| ks.iter().map(|&g| g - off).collect())
        .collect();
    let n = mapping.len();
    let raw = DMatrix::from_fn(n, n, |r, c| e.get(mapping[r], mapping[c]));
    let reduced_partition = RotamerPartition::new(sizes)?;
    let energy = EnergyMatrix::canonicalize(&raw, &reduced_partition)?;
    let reduced = ScpInstance::new(instance.name.clone(), reduced_partition, energy)?;
    Ok(DeeReduction { kept: local, reduced, mapping })
}

fn goldstein_score<T: Real>(e: &EnergyMatrix<T>, kept: &[Vec<usize>], block: usize, r: usize, t: usize) -> T {
    let two = T::lit(2.0);
    let mut score = e.get(r, r) - e.get(t, t);
    for (j, others) in kept.iter().enumerate() {
        if j == block {
            continue;
        }
        let worst = others
            .iter()
            .map(|&s| two * (e.get(r, s) - e.get(t, s)))
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v))));
        if let Some(w) = worst {
            score += w;
        }
    }
    score
}
