//! Anosov C-systems on the N-torus.
//!
//! The operator family `T` acts on the unit torus by `x -> T x mod 1`. This
//! crate builds `T` and its exact powers, checks the hyperbolicity conditions
//! and entropy from the spectrum, iterates the map exactly in 64-bit fixed
//! point, evaluates correlation functions of trigonometric observables both
//! exactly (by matching integer frequencies) and by Monte Carlo, compares
//! their decay with the entropy bound, and derives the characteristic time
//! scales. It also ships the matrix-recurrence generator over `2^61 - 1`.

pub mod correlation;
pub mod dynamics;
pub mod error;
pub mod matrix;
pub mod observables;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod timescales;

pub use correlation::{
    exact_correlation, fit_decay, monte_carlo_correlation, one_step_sawtooth_correlator,
    polynomial_one_step_scan, CorrelationSeries, DecayFit, EntropyBound, Method,
    MonteCarloEstimate,
};
pub use dynamics::{step, step_n, trajectory, TorusMap, TorusPoint};
pub use error::{Error, Result};
pub use matrix::{
    build_family_matrix, determinant_exact, fibonacci_power, matrix_power, FibonacciPower,
    IntegerMatrix,
};
pub use observables::{sawtooth_series, smooth_family, Observable, Phase, ProductTerm, Term};
pub use rng::{GeneratorState, SelfTestReport, MERSENNE_61};
pub use sampling::splitmix64;
pub use spectral::{compute_spectrum, entropy, invariant_subspaces, Spectrum, SubspaceSplit};
pub use timescales::{TimeScales, TimescaleReport};
