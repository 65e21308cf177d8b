//! Symmetric run-by-run matrices of pair statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::par;

/// Symmetric `size × size` matrix with a zero diagonal, holding one value
/// per unordered run pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    size: usize,
    values: Vec<f64>,
}

impl PairMatrix {
    /// Evaluates `f(i, j)` for every `i < j`. Evaluation may run in
    /// parallel; the stored values do not depend on scheduling.
    pub fn build<F>(size: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let pairs: Vec<(usize, usize)> = (0..size)
            .flat_map(|i| (i + 1..size).map(move |j| (i, j)))
            .collect();
        let computed = par::map_indexed(pairs.len(), |p| f(pairs[p].0, pairs[p].1));
        let mut values = vec![0.0; size * size];
        for (&(i, j), v) in pairs.iter().zip(computed) {
            values[i * size + j] = v;
            values[j * size + i] = v;
        }
        PairMatrix { size, values }
    }

    /// Like [`PairMatrix::build`] for fallible pair functions; the first
    /// error in `(i, j)` order is returned.
    pub fn try_build<F, E>(size: usize, f: F) -> Result<Self, E>
    where
        F: Fn(usize, usize) -> Result<f64, E> + Sync + Send,
        E: Send,
    {
        let pairs: Vec<(usize, usize)> = (0..size)
            .flat_map(|i| (i + 1..size).map(move |j| (i, j)))
            .collect();
        let computed = par::map_indexed(pairs.len(), |p| f(pairs[p].0, pairs[p].1));
        let mut values = vec![0.0; size * size];
        for (&(i, j), v) in pairs.iter().zip(computed) {
            let v = v?;
            values[i * size + j] = v;
            values[j * size + i] = v;
        }
        Ok(PairMatrix { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Mean over all pairs of positions `a < b` in `members`. Repeated
    /// members pair with themselves at distance zero.
    pub fn mean_over(&self, members: &[usize]) -> f64 {
        let k = members.len();
        let mut sum = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                sum += self.get(members[a], members[b]);
            }
        }
        sum / (k * (k - 1) / 2) as f64
    }

    /// Mean over all `i < j` pairs of the full matrix.
    pub fn mean(&self) -> f64 {
        let all: Vec<usize> = (0..self.size).collect();
        self.mean_over(&all)
    }
}
