//! Linear algebra over GF(2) and over `Z/2^a`.
//!
//! Residues modulo `2^a` are held in a `u128` with `a <= 128`; arithmetic is
//! wrapping and masked, so any lift of an entry works as long as the final
//! congruences are read modulo the per-column power of two.

use std::fmt;

use thiserror::Error;

/// Largest supported exponent `a` for `Z/2^a`.
pub const MAX_ALPHA: u32 = 128;

/// A Gold-family exponent candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Candidate {
    /// `2^a + 1`
    Quadratic(u32),
    /// `2^a + 2^b + 1`, `a > b >= 1`
    Cubic(u32, u32),
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidate::Quadratic(a) => write!(f, "2^{a}+1"),
            Candidate::Cubic(a, b) => write!(f, "2^{a}+2^{b}+1"),
        }
    }
}

/// Quadratic-character pattern of a candidate: bit `j` is set iff the
/// candidate is a non-residue modulo the `j`-th prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityVector {
    pub candidate: Candidate,
    pub bits: Vec<bool>,
}

impl ParityVector {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_unit(&self, i: usize) -> bool {
        self.bits.iter().enumerate().all(|(j, &b)| b == (i == j))
    }

    pub fn render(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinError {
    #[error("vectors span only {rank} of {target} dimensions")]
    InsufficientRank { rank: usize, target: usize },
    #[error("vector {index} has length {len}, expected {expected}")]
    LengthMismatch { index: usize, len: usize, expected: usize },
    #[error("matrix is singular modulo 2")]
    SingularMod2,
    #[error("malformed matrix: {0}")]
    Malformed(String),
}

type Row = Vec<u64>;

fn pack(bits: &[bool]) -> Row {
    let mut row = vec![0u64; bits.len().div_ceil(64).max(1)];
    for (j, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        row[j / 64] |= 1 << (j % 64);
    }
    row
}

fn lowest_bit(row: &Row) -> Option<usize> {
    row.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Incremental GF(2) echelon basis keyed by pivot position.
#[derive(Default)]
struct Gf2Basis {
    rows: Vec<(usize, Row)>,
}

impl Gf2Basis {
    fn reduce(&self, mut v: Row) -> Row {
        for (pivot, r) in &self.rows {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                v.iter_mut().zip(r).for_each(|(a, b)| *a ^= b);
            }
        }
        v
    }

    /// Adds `v` if independent; returns whether it was added.
    fn insert(&mut self, v: Row) -> bool {
        let v = self.reduce(v);
        match lowest_bit(&v) {
            None => false,
            Some(p) => {
                self.rows.push((p, v));
                true
            }
        }
    }
}

/// Rank over GF(2).
pub fn gf2_rank(vectors: &[ParityVector]) -> usize {
    let mut basis = Gf2Basis::default();
    vectors.iter().filter(|v| basis.insert(pack(&v.bits))).count()
}

/// Greedy first-found basis: scans `vectors` in order and keeps each one that
/// is independent of those kept so far, stopping at `k`.
pub fn gf2_rank_select(vectors: &[ParityVector], k: usize) -> Result<Vec<usize>, LinError> {
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != k {
            return Err(LinError::LengthMismatch {
                index,
                len: v.len(),
                expected: k,
            });
        }
    }
    let mut basis = Gf2Basis::default();
    let mut chosen = Vec::with_capacity(k);
    for (i, v) in vectors.iter().enumerate() {
        if chosen.len() == k {
            break;
        }
        if basis.insert(pack(&v.bits)) {
            chosen.push(i);
        }
    }
    if chosen.len() < k {
        return Err(LinError::InsufficientRank {
            rank: chosen.len(),
            target: k,
        });
    }
    Ok(chosen)
}

/// The matrix of 2-adic discrete logs: `entries[i][j]` is the log of the
/// `i`-th candidate modulo the `j`-th prime, reduced into `[0, 2^alphas[j])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlogMatrix {
    pub alphas: Vec<u32>,
    pub entries: Vec<Vec<u128>>,
}

impl DlogMatrix {
    pub fn new(alphas: Vec<u32>, entries: Vec<Vec<u128>>) -> Result<Self, LinError> {
        let k = alphas.len();
        if entries.len() != k || entries.iter().any(|r| r.len() != k) {
            return Err(LinError::Malformed(format!("expected a {k}x{k} matrix")));
        }
        if let Some(&a) = alphas.iter().find(|&&a| a == 0 || a > MAX_ALPHA) {
            return Err(LinError::Malformed(format!("column exponent {a} out of range")));
        }
        for row in &entries {
            for (j, &e) in row.iter().enumerate() {
                if e > mask(alphas[j]) {
                    return Err(LinError::Malformed(format!(
                        "entry {e} not reduced modulo 2^{}",
                        alphas[j]
                    )));
                }
            }
        }
        Ok(DlogMatrix { alphas, entries })
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn max_alpha(&self) -> u32 {
        self.alphas.iter().copied().max().unwrap_or(1)
    }

    /// Entries mod 2 as parity rows.
    pub fn parity_rows(&self) -> Vec<Vec<bool>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|e| e & 1 == 1).collect())
            .collect()
    }

    /// Checks `Σ_i y_i b_ij ≡ 2^(α_j - 1) (mod 2^α_j)` for every column.
    pub fn is_solution(&self, y: &[u128]) -> bool {
        y.len() == self.dim()
            && (0..self.dim()).all(|j| {
                let a = self.alphas[j];
                let s = (0..self.dim()).fold(0u128, |acc, i| {
                    acc.wrapping_add(y[i].wrapping_mul(self.entries[i][j]))
                });
                s & mask(a) == 1u128 << (a - 1)
            })
    }
}

fn mask(bits: u32) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

/// Inverse of an odd residue modulo 2^128 by Newton iteration.
fn inverse_odd(u: u128) -> u128 {
    debug_assert!(u & 1 == 1);
    let mut x = u; // correct to 3 bits
    for _ in 0..7 {
        x = x.wrapping_mul(2u128.wrapping_sub(u.wrapping_mul(x)));
    }
    x
}

/// Solves `Σ_i y_i b_ij ≡ 2^(α_j - 1) (mod 2^α_j)` for all `j`, working
/// uniformly modulo `2^α` with `α = max α_j`.
///
/// Gaussian elimination with the first odd entry in each column as pivot;
/// the result is substituted back and checked before returning.
pub fn solve_unit_system(m: &DlogMatrix) -> Result<Vec<u128>, LinError> {
    let k = m.dim();
    let alpha = m.max_alpha();
    let mk = mask(alpha);
    // equation j: Σ_i b_ij y_i = t_j  (rows are columns of m)
    let mut a: Vec<Vec<u128>> = (0..k)
        .map(|j| (0..k).map(|i| m.entries[i][j]).collect())
        .collect();
    let mut t: Vec<u128> = m.alphas.iter().map(|&aj| 1u128 << (aj - 1)).collect();

    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| a[r][col] & 1 == 1)
            .ok_or(LinError::SingularMod2)?;
        a.swap(col, pivot);
        t.swap(col, pivot);
        let inv = inverse_odd(a[col][col]);
        for c in col..k {
            a[col][c] = a[col][c].wrapping_mul(inv) & mk;
        }
        t[col] = t[col].wrapping_mul(inv) & mk;
        for r in 0..k {
            if r == col || a[r][col] == 0 {
                continue;
            }
            let f = a[r][col];
            for c in col..k {
                a[r][c] = a[r][c].wrapping_sub(f.wrapping_mul(a[col][c])) & mk;
            }
            t[r] = t[r].wrapping_sub(f.wrapping_mul(t[col])) & mk;
        }
    }
    if !m.is_solution(&t) {
        return Err(LinError::Malformed("back-substitution check failed".into()));
    }
    Ok(t)
}
