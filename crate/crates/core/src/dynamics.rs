//! Exact iteration of `x -> T x mod 1` on the dyadic lattice `2^-64 Z^N / Z^N`.
//!
//! A coordinate is a `u64` word `w` standing for `w / 2^64`. Multiplying by an
//! integer and adding with wrapping arithmetic is then exactly `mod 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::IntegerMatrix;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// A point of the unit N-torus with 64-bit fixed-point coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusPoint {
    pub coords: Vec<u64>,
}

impl TorusPoint {
    pub fn new(coords: Vec<u64>) -> Self {
        Self { coords }
    }

    pub fn origin(dim: usize) -> Self {
        Self { coords: vec![0; dim] }
    }

    /// Nearest lattice point to each coordinate reduced into `[0, 1)`.
    pub fn from_f64(values: &[f64]) -> Self {
        Self {
            coords: values.iter().map(|&v| fraction_to_word(v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord_f64(&self, i: usize) -> f64 {
        word_to_f64(self.coords[i])
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|&w| word_to_f64(w)).collect()
    }

    /// Largest per-coordinate circular distance, in `[0, 1/2]`.
    pub fn torus_distance(&self, other: &Self) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| {
                let d = a.wrapping_sub(b);
                word_to_f64(d.min(d.wrapping_neg()))
            })
            .fold(0.0, f64::max)
    }

    pub fn to_hex(&self) -> String {
        self.coords
            .iter()
            .map(|w| format!("{w:016x}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_hex(line: &str) -> Result<Self> {
        line.split_whitespace()
            .map(|t| u64::from_str_radix(t, 16).map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

/// `word / 2^64`, rounded to nearest. May return 1.0 for words within
/// 2^-54 of the top of the range.
pub fn word_to_f64(w: u64) -> f64 {
    w as f64 / TWO_POW_64
}

pub fn fraction_to_word(v: f64) -> u64 {
    let frac = v - v.floor();
    // Values that round up to 1.0 wrap to 0.
    let scaled = (frac * TWO_POW_64).round();
    if scaled >= TWO_POW_64 {
        0
    } else {
        scaled as u64
    }
}

/// A linear torus map with its integer matrix reduced modulo 2^64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusMap {
    dim: usize,
    words: Vec<u64>,
}

impl TorusMap {
    pub fn new(m: &IntegerMatrix) -> Self {
        Self {
            dim: m.dim(),
            words: m.to_wrapping_u64(),
        }
    }

    /// The map `x -> M^n x mod 1`.
    pub fn power(m: &IntegerMatrix, n: u64) -> Self {
        Self::new(&m.pow(n))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &TorusPoint) -> Result<TorusPoint> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        Ok(self.apply_unchecked(&x.coords))
    }

    pub(crate) fn apply_unchecked(&self, x: &[u64]) -> TorusPoint {
        let coords = self
            .words
            .chunks_exact(self.dim)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .fold(0u64, |acc, (&t, &w)| acc.wrapping_add(t.wrapping_mul(w)))
            })
            .collect();
        TorusPoint { coords }
    }
}

pub fn step(m: &IntegerMatrix, x: &TorusPoint) -> Result<TorusPoint> {
    TorusMap::new(m).apply(x)
}

/// `T^n x`, computed through the exact power of `T` reduced modulo 2^64.
pub fn step_n(m: &IntegerMatrix, n: u64, x: &TorusPoint) -> Result<TorusPoint> {
    TorusMap::power(m, n).apply(x)
}

/// `[x0, T x0, ..., T^{length-1} x0]`.
pub fn trajectory(m: &IntegerMatrix, x0: &TorusPoint, length: usize) -> Result<Vec<TorusPoint>> {
    if length == 0 {
        return Err(Error::InvalidParameter("trajectory length must be >= 1".into()));
    }
    let map = TorusMap::new(m);
    let mut out = Vec::with_capacity(length);
    out.push(x0.clone());
    for _ in 1..length {
        let next = map.apply(out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}

/// Trajectory as CSV with columns `x_0..x_{N-1}`, 17 significant digits.
pub fn trajectory_csv(points: &[TorusPoint]) -> String {
    let dim = points.first().map(TorusPoint::dim).unwrap_or(0);
    let header: Vec<String> = (0..dim).map(|i| format!("x_{i}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.to_f64().iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Raw replay dump: one point per line, coordinates as 16-digit hex words.
pub fn trajectory_hex(points: &[TorusPoint]) -> String {
    points.iter().map(|p| p.to_hex() + "\n").collect()
}
