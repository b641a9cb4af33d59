//! Side-chain positioning instances: rotamer partition, energy matrix, the
//! quadratic objective, feasibility, a seeded generator, and the text format.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance used when accepting a raw energy matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Partition of the `n0` rotamers into `p` consecutive blocks, one per residue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotamerPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    n0: usize,
}

impl RotamerPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("at least one block is required".into()));
        }
        if let Some(i) = sizes.iter().position(|&m| m == 0) {
            return Err(Error::InvalidPartition(format!("block {i} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut n0 = 0;
        for &m in &sizes {
            offsets.push(n0);
            n0 += m;
        }
        Ok(Self { sizes, offsets, n0 })
    }

    /// Number of residues.
    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    /// Total number of rotamers.
    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Zero-based start index of every block.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Global (zero-based) rotamer indices of block `i`.
    pub fn block(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.p()).map(move |i| self.block(i))
    }

    /// Block owning each global rotamer index.
    pub fn block_index(&self) -> Vec<usize> {
        let mut owner = Vec::with_capacity(self.n0);
        for (i, &m) in self.sizes.iter().enumerate() {
            owner.extend(std::iter::repeat_n(i, m));
        }
        owner
    }

    /// Number of feasible selections, `prod m_i`, saturating at `u128::MAX`.
    pub fn feasible_count(&self) -> u128 {
        self.sizes
            .iter()
            .fold(1u128, |acc, &m| acc.saturating_mul(m as u128))
    }

    /// Number of ordered within-block off-diagonal pairs, `sum m_i (m_i - 1)`.
    pub fn within_block_pairs(&self) -> usize {
        self.sizes.iter().map(|&m| m * (m - 1)).sum()
    }
}

/// Symmetric energy matrix with zero within-block off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatrix<T: Real> {
    entries: DMatrix<T>,
}

impl<T: Real> EnergyMatrix<T> {
    /// Symmetrizes `raw` by averaging with its transpose and zeroes every
    /// within-block off-diagonal entry.
    pub fn canonicalize(raw: &DMatrix<T>, partition: &RotamerPartition) -> Result<Self> {
        let n0 = partition.n0();
        if raw.nrows() != raw.ncols() {
            return Err(Error::Malformed(format!(
                "energy matrix is {}x{}, expected square",
                raw.nrows(),
                raw.ncols()
            )));
        }
        if raw.nrows() != n0 {
            return Err(Error::DimensionMismatch { expected: n0, found: raw.nrows() });
        }
        let tol = T::lit(SYMMETRY_TOL);
        for r in 0..n0 {
            for c in (r + 1)..n0 {
                let (a, b) = (raw[(r, c)], raw[(c, r)]);
                if !a.is_finite_value() || !b.is_finite_value() {
                    return Err(Error::Malformed(format!("non-finite energy at ({r}, {c})")));
                }
                let diff = (a - b).abs();
                let scale = T::one().max(a.abs()).max(b.abs());
                if diff > tol * scale {
                    return Err(Error::Asymmetric { row: r, col: c, diff: diff.to_f64_lossy() });
                }
            }
        }
        let half = T::lit(0.5);
        let mut entries = DMatrix::from_fn(n0, n0, |r, c| {
            if r == c {
                raw[(r, r)]
            } else {
                (raw[(r, c)] + raw[(c, r)]) * half
            }
        });
        for block in partition.blocks() {
            for r in block.clone() {
                for c in block.clone() {
                    if r != c {
                        entries[(r, c)] = T::zero();
                    }
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.entries[(r, c)]
    }
}

/// One rotamer per block, stored as zero-based local indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    choice: Vec<usize>,
}

impl Assignment {
    pub fn new(choice: Vec<usize>, partition: &RotamerPartition) -> Result<Self> {
        if choice.len() != partition.p() {
            return Err(Error::DimensionMismatch { expected: partition.p(), found: choice.len() });
        }
        for (i, (&c, &m)) in choice.iter().zip(partition.sizes()).enumerate() {
            if c >= m {
                return Err(Error::Malformed(format!(
                    "block {i} has {m} rotamers, choice {c} is out of range"
                )));
            }
        }
        Ok(Self { choice })
    }

    /// First rotamer in every block.
    pub fn first(partition: &RotamerPartition) -> Self {
        Self { choice: vec![0; partition.p()] }
    }

    /// Zero-based local index chosen in each block.
    pub fn choice(&self) -> &[usize] {
        &self.choice
    }

    /// Global (zero-based) rotamer index chosen in each block.
    pub fn global_indices(&self, partition: &RotamerPartition) -> Vec<usize> {
        self.choice
            .iter()
            .zip(partition.offsets())
            .map(|(&c, &off)| off + c)
            .collect()
    }

    pub fn to_indicator(&self, partition: &RotamerPartition) -> Vec<bool> {
        let mut x = vec![false; partition.n0()];
        for g in self.global_indices(partition) {
            x[g] = true;
        }
        x
    }

    /// Inverse of [`Assignment::to_indicator`]; `None` when `x` is infeasible.
    pub fn from_indicator(x: &[bool], partition: &RotamerPartition) -> Option<Self> {
        if !is_feasible(x, partition) {
            return None;
        }
        let choice = partition
            .blocks()
            .map(|b| x[b].iter().position(|&on| on).expect("feasible block has a one"))
            .collect();
        Some(Self { choice })
    }
}

/// A side-chain positioning instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpInstance<T: Real> {
    pub name: String,
    partition: RotamerPartition,
    energy: EnergyMatrix<T>,
}

impl<T: Real> ScpInstance<T> {
    pub fn new(name: impl Into<String>, partition: RotamerPartition, energy: EnergyMatrix<T>) -> Result<Self> {
        if energy.order() != partition.n0() {
            return Err(Error::DimensionMismatch { expected: partition.n0(), found: energy.order() });
        }
        Ok(Self { name: name.into(), partition, energy })
    }

    /// Canonicalizes `raw` and builds the instance in one step.
    pub fn from_raw(name: impl Into<String>, sizes: Vec<usize>, raw: &DMatrix<T>) -> Result<Self> {
        let partition = RotamerPartition::new(sizes)?;
        let energy = EnergyMatrix::canonicalize(raw, &partition)?;
        Self::new(name, partition, energy)
    }

    pub fn partition(&self) -> &RotamerPartition {
        &self.partition
    }

    pub fn energy(&self) -> &EnergyMatrix<T> {
        &self.energy
    }

    pub fn p(&self) -> usize {
        self.partition.p()
    }

    pub fn n0(&self) -> usize {
        self.partition.n0()
    }

    /// Energy of an assignment: self terms plus twice every cross pair,
    /// summed in block order so equal selections always give equal bits.
    pub fn energy_of(&self, assignment: &Assignment) -> T {
        let picks = assignment.global_indices(&self.partition);
        let two = T::lit(2.0);
        let mut total = T::zero();
        for (i, &u) in picks.iter().enumerate() {
            total += self.energy.get(u, u);
            for &v in &picks[i + 1..] {
                total += two * self.energy.get(u, v);
            }
        }
        total
    }
}

/// `x^T E x` for a binary indicator vector.
pub fn objective<T: Real>(x: &[bool], energy: &EnergyMatrix<T>) -> Result<T> {
    if x.len() != energy.order() {
        return Err(Error::DimensionMismatch { expected: energy.order(), found: x.len() });
    }
    let on: Vec<usize> = x.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    let mut total = T::zero();
    for &u in &on {
        for &v in &on {
            total += energy.get(u, v);
        }
    }
    Ok(total)
}

/// True iff every block of `x` holds exactly one selected rotamer.
pub fn is_feasible(x: &[bool], partition: &RotamerPartition) -> bool {
    x.len() == partition.n0()
        && partition
            .blocks()
            .all(|b| x[b].iter().filter(|&&on| on).count() == 1)
}

/// Seeded random instance: block sizes uniform on `1..=m_max`, upper-triangle
/// energies i.i.d. uniform on `[lo, hi]`, mirrored and canonicalized.
pub fn random_instance<T: Real>(p: usize, m_max: usize, lo: f64, hi: f64, seed: u64) -> Result<ScpInstance<T>> {
    if p == 0 || m_max == 0 {
        return Err(Error::InvalidPartition("p and m_max must be positive".into()));
    }
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Malformed(format!("empty energy interval [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size_dist = Uniform::new_inclusive(1, m_max);
    let sizes: Vec<usize> = (0..p).map(|_| size_dist.sample(&mut rng)).collect();
    let n0: usize = sizes.iter().sum();
    let energy_dist = Uniform::new_inclusive(lo, hi);
    let mut raw = DMatrix::<T>::zeros(n0, n0);
    for r in 0..n0 {
        for c in r..n0 {
            let e = T::lit(energy_dist.sample(&mut rng));
            raw[(r, c)] = e;
            raw[(c, r)] = e;
        }
    }
    ScpInstance::from_raw(format!("random-p{p}-m{m_max}-s{seed}"), sizes, &raw)
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    p: usize,
    m: Vec<usize>,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
}

/// Parses the JSON instance format (`name`, `p`, `m`, `E`).
pub fn parse_instance<T: Real>(text: &str) -> Result<ScpInstance<T>> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.m.len() != file.p {
        return Err(Error::Malformed(format!("p = {} but m has {} entries", file.p, file.m.len())));
    }
    let partition = RotamerPartition::new(file.m)?;
    let n0 = partition.n0();
    if file.e.len() != n0 {
        return Err(Error::Malformed(format!(
            "E has {} rows but the block sizes sum to {n0}",
            file.e.len()
        )));
    }
    if let Some(r) = file.e.iter().position(|row| row.len() != n0) {
        return Err(Error::Malformed(format!(
            "E row {r} has {} entries, expected {n0}",
            file.e[r].len()
        )));
    }
    let raw = DMatrix::from_fn(n0, n0, |r, c| T::lit(file.e[r][c]));
    let energy = EnergyMatrix::canonicalize(&raw, &partition)?;
    ScpInstance::new(file.name, partition, energy)
}

/// Writes the JSON instance format, one matrix row per line.
pub fn serialize_instance<T: Real>(inst: &ScpInstance<T>) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let name = serde_json::to_string(&inst.name).expect("string serializes");
    let _ = writeln!(out, "  \"name\": {name},");
    let _ = writeln!(out, "  \"p\": {},", inst.p());
    let sizes: Vec<String> = inst.partition.sizes().iter().map(|m| m.to_string()).collect();
    let _ = writeln!(out, "  \"m\": [{}],", sizes.join(", "));
    out.push_str("  \"E\": [\n");
    let n0 = inst.n0();
    for r in 0..n0 {
        let row: Vec<String> = (0..n0).map(|c| json_number(inst.energy.get(r, c))).collect();
        let sep = if r + 1 < n0 { "," } else { "" };
        let _ = writeln!(out, "    [{}]{sep}", row.join(", "));
    }
    out.push_str("  ]\n}\n");
    out
}

fn json_number<T: Real>(x: T) -> String {
    serde_json::to_string(&x.to_f64_lossy()).expect("finite energies serialize")
}
