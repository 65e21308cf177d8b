//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose key is
//! expanded from the user seed (`SeedableRng::seed_from_u64`) and whose
//! 64-bit stream id encodes a purpose tag (high 16 bits) and a counter such
//! as the bootstrap iteration or subsample number (low 48 bits). Stream `i`
//! is therefore reproducible without generating streams `0..i`, and results
//! do not depend on evaluation order or thread count.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps streams of different purposes disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum Purpose {
    Synthesis = 1,
    Bootstrap = 2,
    Subsample = 3,
}

const COUNTER_BITS: u32 = 48;

pub fn stream(seed: u64, purpose: Purpose, counter: u64) -> ChaCha8Rng {
    debug_assert!(counter < 1 << COUNTER_BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << COUNTER_BITS) | counter);
    rng
}

/// `m` draws with replacement from `0..m` for one bootstrap iteration.
pub fn resample_indices(seed: u64, iteration: u64, m: usize) -> Vec<usize> {
    let mut rng = stream(seed, Purpose::Bootstrap, iteration);
    (0..m).map(|_| rng.random_range(0..m)).collect()
}

/// `size` distinct indices from `0..n`, ascending, for one subsample.
pub fn subsample_indices(seed: u64, subsample: u64, n: usize, size: usize) -> Vec<usize> {
    let mut rng = stream(seed, Purpose::Subsample, subsample);
    let mut picked = rand::seq::index::sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();
    picked
}
