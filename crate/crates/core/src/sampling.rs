//! Counter-based uniform sampling on the dyadic lattice.
//!
//! The sample stream is a pure function of `(seed, index)`, so work can be
//! split into arbitrary disjoint index ranges and recombined in a fixed order.
//! It is deliberately unrelated to the generator in [`crate::rng`].

use crate::dynamics::TorusPoint;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Number of samples per work unit. Fixed, so the reduction tree does not
/// depend on the number of threads.
pub const CHUNK: u64 = 4096;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sequential splitmix64 step.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    mix64(*state)
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeSampler {
    key: u64,
    dim: usize,
}

impl LatticeSampler {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self {
            key: mix64(seed ^ 0x6a09_e667_f3bc_c909),
            dim,
        }
    }

    #[inline]
    pub fn word(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn fill(&self, index: u64, out: &mut [u64]) {
        let base = index.wrapping_mul(self.dim as u64);
        for (d, w) in out.iter_mut().enumerate() {
            *w = self.word(base.wrapping_add(d as u64));
        }
    }

    pub fn point(&self, index: u64) -> TorusPoint {
        let mut coords = vec![0; self.dim];
        self.fill(index, &mut coords);
        TorusPoint::new(coords)
    }
}

/// Pairwise summation in a fixed tree order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// `[start, end)` sample ranges of at most [`CHUNK`] samples.
pub fn chunks(samples: u64) -> Vec<(u64, u64)> {
    (0..samples.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(samples)))
        .collect()
}
