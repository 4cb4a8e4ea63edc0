//! Exact integer matrices for the operator family and its powers.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Square matrix of arbitrary-precision integers, stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntegerMatrix {
    dim: usize,
    entries: Vec<BigInt>,
}

impl IntegerMatrix {
    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::NotSquare);
        }
        Ok(Self {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
                .collect(),
        )
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![BigInt::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = BigInt::one();
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[BigInt]> {
        self.entries.chunks(self.dim)
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                entries.push(self.get(i, j).clone());
            }
        }
        Self { dim: n, entries }
    }

    /// Matrix product. Output rows are computed in parallel; the result does
    /// not depend on the thread count.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let n = self.dim;
        let rows: Vec<Vec<BigInt>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let a = self.row(i);
                (0..n)
                    .map(|j| {
                        let mut acc = BigInt::zero();
                        for (k, aik) in a.iter().enumerate() {
                            if !aik.is_zero() {
                                acc += aik * other.get(k, j);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            dim: n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    /// `self^n` by binary exponentiation.
    pub fn pow(&self, mut n: u64) -> Self {
        let mut result = Self::identity(self.dim);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base).expect("same dimension");
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base).expect("same dimension");
            }
        }
        result
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        let n = self.dim;
        let mut a: Vec<Vec<BigInt>> = self.rows().map(|r| r.to_vec()).collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n.saturating_sub(1) {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                    Some(r) => {
                        a.swap(k, r);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * &a[n - 1][n - 1]
    }

    /// Exact inverse of a unimodular matrix (determinant ±1).
    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs() != BigInt::one() {
            return Err(Error::NotUnimodular(det.to_string()));
        }
        let n = self.dim;
        let mut a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                let mut row: Vec<BigRational> = self
                    .row(i)
                    .iter()
                    .map(|v| BigRational::from_integer(v.clone()))
                    .collect();
                row.extend((0..n).map(|j| {
                    if i == j {
                        BigRational::one()
                    } else {
                        BigRational::zero()
                    }
                }));
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a[r][col].is_zero())
                .ok_or_else(|| Error::NotUnimodular("0".into()))?;
            a.swap(col, pivot);
            let inv = a[col][col].recip();
            for v in a[col].iter_mut() {
                *v *= &inv;
            }
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r == col || row[col].is_zero() {
                    continue;
                }
                let factor = row[col].clone();
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= &factor * p;
                }
            }
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in a {
            for v in row.into_iter().skip(n) {
                debug_assert!(v.is_integer());
                entries.push(v.to_integer());
            }
        }
        Ok(Self { dim: n, entries })
    }

    /// Entries reduced modulo 2^64, as wrapping words.
    pub fn to_wrapping_u64(&self) -> Vec<u64> {
        let modulus = BigInt::one() << 64;
        self.entries
            .iter()
            .map(|v| v.mod_floor(&modulus).to_u64().expect("reduced below 2^64"))
            .collect()
    }

    /// Entries reduced into `[0, modulus)`.
    pub fn to_residues(&self, modulus: u64) -> Vec<u64> {
        let m = BigInt::from(modulus);
        self.entries
            .iter()
            .map(|v| v.mod_floor(&m).to_u64().expect("reduced below modulus"))
            .collect()
    }

    /// Entries as doubles; `None` if any entry is not exactly representable.
    pub fn to_f64(&self) -> Option<Vec<f64>> {
        self.entries
            .iter()
            .map(|v| {
                let f = v.to_f64()?;
                (f.abs() < 9.007_199_254_740_992e15).then_some(f)
            })
            .collect()
    }

    pub fn max_abs_entry(&self) -> BigInt {
        self.entries
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or_default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = self
            .rows()
            .map(|r| r.iter().map(|v| v.to_string()).collect())
            .collect();
        f.debug_struct("IntegerMatrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

// Entries exceed 64 bits, so the wire form is an array of arrays of decimal strings.
impl Serialize for IntegerMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = self
            .rows()
            .map(|r| r.iter().map(|v| v.to_str_radix(10)).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntegerMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rows: Vec<Vec<String>> = Vec::deserialize(deserializer)?;
        let parsed = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|s| s.trim().parse::<BigInt>().map_err(D::Error::custom))
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        IntegerMatrix::from_rows(parsed).map_err(D::Error::custom)
    }
}

fn family_entry(i: usize, j: usize) -> i64 {
    match (i, j) {
        (_, 0) => 1,
        // Printed instances have row 2 = (1, 2, 2, 1, ..., 1).
        (2, 1) => 2,
        _ if j > i => 1,
        _ if j == i => 2,
        _ => (i - j + 2) as i64,
    }
}

/// The N-dimensional operator of the family: first row all ones, row `i`
/// reads `1, i+1, i, ..., 3, 2, 1, ..., 1` (0-indexed), with row 2 equal to
/// `1, 2, 2, 1, ..., 1`.
pub fn build_family_matrix(n: usize) -> Result<IntegerMatrix> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    let entries = (0..n)
        .flat_map(|i| (0..n).map(move |j| BigInt::from(family_entry(i, j))))
        .collect();
    Ok(IntegerMatrix { dim: n, entries })
}

pub fn determinant_exact(m: &IntegerMatrix) -> BigInt {
    m.determinant()
}

pub fn matrix_power(m: &IntegerMatrix, n: u64) -> IntegerMatrix {
    m.pow(n)
}

/// Coefficients of `T^n` for the two-dimensional operator `[[1,1],[1,2]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibonacciPower {
    pub n: u64,
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl FibonacciPower {
    pub fn determinant(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn to_matrix(&self) -> IntegerMatrix {
        IntegerMatrix::from_rows(vec![
            vec![self.a.clone(), self.b.clone()],
            vec![self.c.clone(), self.d.clone()],
        ])
        .expect("2x2")
    }
}

/// `F_k` by the integer recurrence.
pub fn fibonacci(k: u64) -> BigInt {
    let (mut prev, mut cur) = (BigInt::zero(), BigInt::one());
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let next = &prev + &cur;
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// `a_n = F_{2n} - F_{2n-2}`, `b_n = c_n = F_{2n}`, `d_n = 2F_{2n} - F_{2n-2}`.
pub fn fibonacci_power(n: u64) -> FibonacciPower {
    // F_{-2} = -1 extends the closed form to n = 0.
    let f2n = fibonacci(2 * n);
    let f2n_2 = if n == 0 {
        -BigInt::one()
    } else {
        fibonacci(2 * n - 2)
    };
    FibonacciPower {
        n,
        a: &f2n - &f2n_2,
        b: f2n.clone(),
        c: f2n.clone(),
        d: BigInt::from(2) * &f2n - &f2n_2,
    }
}
