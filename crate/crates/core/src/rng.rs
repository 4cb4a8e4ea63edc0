//! Matrix-recurrence generator `v <- T v mod p` over the prime `p = 2^61 - 1`.
//!
//! Each state vector yields `N` outputs `v_i / p`, emitted in index order
//! before the next recurrence step. There is no output skipping or
//! tempering. Independent streams are obtained by jumping ahead: stream `i`
//! starts `2^64 · i` recurrence steps after the seeded state.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::matrix::{build_family_matrix, IntegerMatrix};
use crate::sampling::mix64;

pub const MERSENNE_61: u64 = (1 << 61) - 1;
/// Minimum stream length accepted by [`self_test`].
pub const MIN_SELF_TEST_SAMPLES: u64 = 100_000;
/// Bins of the uniformity chi-square test.
pub const CHI_SQUARE_BINS: usize = 256;

const MANTISSA_BITS: u32 = 53;

/// `x mod p` for `x < 2^122 + 2^64`.
#[inline]
fn reduce(x: u128) -> u64 {
    let folded = (x & MERSENNE_61 as u128) + (x >> 61);
    let folded = ((folded & MERSENNE_61 as u128) + (folded >> 61)) as u64;
    if folded >= MERSENNE_61 {
        folded - MERSENNE_61
    } else {
        folded
    }
}

/// `Σ row_j · v_j mod p` with all operands in `[0, p)`.
#[inline]
fn dot_mod(row: &[u64], v: &[u64]) -> u64 {
    // Each partially reduced product is below 2^62, so the u128 sum cannot
    // overflow for any realistic dimension.
    let acc: u128 = row
        .iter()
        .zip(v)
        .map(|(&a, &b)| {
            let prod = a as u128 * b as u128;
            (prod & MERSENNE_61 as u128) + (prod >> 61)
        })
        .sum();
    let hi = acc >> 61;
    reduce((acc & MERSENNE_61 as u128) + hi)
}

fn mat_vec(m: &[u64], dim: usize, v: &[u64]) -> Vec<u64> {
    m.chunks_exact(dim).map(|row| dot_mod(row, v)).collect()
}

fn mat_mul(a: &[u64], b: &[u64], dim: usize) -> Vec<u64> {
    let mut bt = vec![0u64; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            bt[j * dim + i] = b[i * dim + j];
        }
    }
    a.par_chunks_exact(dim)
        .flat_map_iter(|row| bt.chunks_exact(dim).map(|col| dot_mod(row, col)).collect::<Vec<_>>())
        .collect()
}

/// `m^k mod p` by binary exponentiation.
fn mat_pow(m: &[u64], dim: usize, k: &BigUint) -> Vec<u64> {
    let mut result: Vec<u64> = (0..dim * dim)
        .map(|idx| u64::from(idx / dim == idx % dim))
        .collect();
    let mut base = m.to_vec();
    let bits = k.bits();
    for bit in 0..bits {
        if k.bit(bit) {
            result = mat_mul(&result, &base, dim);
        }
        if bit + 1 < bits {
            base = mat_mul(&base, &base, dim);
        }
    }
    result
}

/// `floor(v · 2^53 / p) · 2^-53`, strictly below 1 for `v < p`.
#[inline]
pub fn to_unit(v: u64) -> f64 {
    let scaled = ((v as u128) << MANTISSA_BITS) / MERSENNE_61 as u128;
    scaled as f64 / (1u64 << MANTISSA_BITS) as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorState {
    dim: usize,
    state: Vec<u64>,
    /// Index of the next component of `state` to emit; `dim` means exhausted.
    counter: usize,
    /// Row-major matrix reduced into `[0, p)`.
    matrix: Vec<u64>,
}

impl GeneratorState {
    /// The family generator of dimension `dim` seeded from `seed_value`.
    ///
    /// State components are splitmix hashes of `(seed, round, index)`
    /// reduced mod `p`; an all-zero vector triggers another round.
    pub fn seed(dim: usize, seed_value: u64) -> Result<Self> {
        Self::with_matrix(&build_family_matrix(dim)?, seed_value)
    }

    /// A generator with an arbitrary integer matrix, seeded as in [`Self::seed`].
    pub fn with_matrix(m: &IntegerMatrix, seed_value: u64) -> Result<Self> {
        let dim = m.dim();
        let key = mix64(seed_value);
        let mut round = 0u64;
        let state = loop {
            let salt = mix64(key ^ round.wrapping_mul(0xd1b5_4a32_d192_ed03));
            let candidate: Vec<u64> = (0..dim as u64)
                .map(|i| mix64(salt.wrapping_add(i.wrapping_mul(0x9e37_79b9_7f4a_7c15))) % MERSENNE_61)
                .collect();
            if candidate.iter().any(|&v| v != 0) {
                break candidate;
            }
            round += 1;
        };
        Ok(Self {
            dim,
            state,
            counter: dim,
            matrix: m.to_residues(MERSENNE_61),
        })
    }

    /// The family generator started from an explicit state vector.
    pub fn from_state(state: Vec<u64>) -> Result<Self> {
        let dim = state.len();
        if state.iter().any(|&v| v >= MERSENNE_61) {
            return Err(Error::InvalidParameter("state components must lie in [0, p)".into()));
        }
        if state.iter().all(|&v| v == 0) {
            return Err(Error::InvalidParameter("all-zero state is a fixed point".into()));
        }
        Ok(Self {
            dim,
            counter: dim,
            matrix: build_family_matrix(dim)?.to_residues(MERSENNE_61),
            state,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self) -> &[u64] {
        &self.state
    }

    /// One recurrence step; returns the new state as uniforms in `[0, 1)`.
    /// Discards any unread outputs of the previous state.
    pub fn next_vector(&mut self) -> Vec<f64> {
        self.advance();
        self.counter = self.dim;
        self.state.iter().map(|&v| to_unit(v)).collect()
    }

    fn advance(&mut self) {
        self.state = mat_vec(&self.matrix, self.dim, &self.state);
    }

    /// Next raw output in `[0, p)`.
    pub fn next_raw(&mut self) -> u64 {
        if self.counter == self.dim {
            self.advance();
            self.counter = 0;
        }
        let v = self.state[self.counter];
        self.counter += 1;
        v
    }

    pub fn next_f64(&mut self) -> f64 {
        to_unit(self.next_raw())
    }

    /// Advances `k` recurrence steps using `T^k mod p`. Resets the output
    /// position so the next output is the first component of the jumped
    /// state's successor, matching a freshly seeded generator.
    pub fn jump_ahead(&mut self, k: &BigUint) {
        let power = mat_pow(&self.matrix, self.dim, k);
        self.state = mat_vec(&power, self.dim, &self.state);
        self.counter = self.dim;
    }

    /// Stream `index` of the seeded generator: jumped ahead by `2^64 · index`.
    pub fn stream(dim: usize, seed_value: u64, index: u64) -> Result<Self> {
        let mut g = Self::seed(dim, seed_value)?;
        if index > 0 {
            g.jump_ahead(&(BigUint::from(index) << 64));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub dim: usize,
    pub samples: u64,
    pub chi_square: f64,
    pub chi_square_dof: usize,
    pub chi_square_p_value: f64,
    pub lag1_correlation: f64,
    /// `4/√samples`.
    pub lag1_threshold: f64,
    /// Largest `|z|` of the per-coordinate output means.
    pub max_coordinate_z: f64,
    pub coordinate_z_threshold: f64,
    pub passed: bool,
}

/// Chi-square p-values outside this band fail.
pub const CHI_SQUARE_BAND: (f64, f64) = (0.001, 0.999);
/// Largest accepted coordinate-mean z-score.
pub const COORDINATE_Z_THRESHOLD: f64 = 5.0;

/// Uniformity, serial and per-coordinate checks on `samples` outputs.
pub fn self_test(dim: usize, seed_value: u64, samples: u64) -> Result<SelfTestReport> {
    self_test_state(GeneratorState::seed(dim, seed_value)?, samples)
}

/// As [`self_test`] for an explicitly constructed generator.
pub fn self_test_state(mut g: GeneratorState, samples: u64) -> Result<SelfTestReport> {
    if samples < MIN_SELF_TEST_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "self test needs at least {MIN_SELF_TEST_SAMPLES} samples, got {samples}"
        )));
    }
    let dim = g.dim();
    let mut bins = vec![0u64; CHI_SQUARE_BINS];
    let mut coord_sum = vec![0.0f64; dim];
    let mut coord_count = vec![0u64; dim];
    let (mut sx, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64);
    let mut prev = None;
    let (mut first, mut last) = (0.0, 0.0);
    for i in 0..samples {
        let pos = g.counter % dim;
        let u = g.next_f64();
        bins[((u * CHI_SQUARE_BINS as f64) as usize).min(CHI_SQUARE_BINS - 1)] += 1;
        coord_sum[pos] += u;
        coord_count[pos] += 1;
        sx += u;
        sxx += u * u;
        if let Some(p) = prev {
            sxy += p * u;
        } else {
            first = u;
        }
        if i + 1 == samples {
            last = u;
        }
        prev = Some(u);
    }
    let n = samples as f64;
    let expected = n / CHI_SQUARE_BINS as f64;
    let chi_square: f64 = bins
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = CHI_SQUARE_BINS - 1;
    let chi_square_p_value = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(chi_square);

    // Pearson correlation of (u_i, u_{i+1}) over the n - 1 consecutive pairs.
    let pairs = n - 1.0;
    let (sa, sb) = (sx - last, sx - first);
    let (saa, sbb) = (sxx - last * last, sxx - first * first);
    let cov = sxy / pairs - (sa / pairs) * (sb / pairs);
    let var_a = saa / pairs - (sa / pairs).powi(2);
    let var_b = sbb / pairs - (sb / pairs).powi(2);
    let lag1_correlation = if var_a > 0.0 && var_b > 0.0 {
        cov / (var_a * var_b).sqrt()
    } else {
        // A constant stream is maximally suspicious.
        1.0
    };
    let lag1_threshold = 4.0 / n.sqrt();

    let max_coordinate_z = coord_sum
        .iter()
        .zip(&coord_count)
        .filter(|(_, &c)| c > 0)
        .map(|(&s, &c)| ((s / c as f64 - 0.5) / (1.0 / 12.0 / c as f64).sqrt()).abs())
        .fold(0.0, f64::max);

    let passed = (CHI_SQUARE_BAND.0..=CHI_SQUARE_BAND.1).contains(&chi_square_p_value)
        && lag1_correlation.abs() <= lag1_threshold
        && max_coordinate_z <= COORDINATE_Z_THRESHOLD;
    Ok(SelfTestReport {
        dim,
        samples,
        chi_square,
        chi_square_dof: dof,
        chi_square_p_value,
        lag1_correlation,
        lag1_threshold,
        max_coordinate_z,
        coordinate_z_threshold: COORDINATE_Z_THRESHOLD,
        passed,
    })
}
