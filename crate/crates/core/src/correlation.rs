//! Correlation functions `D_n(f, g) = ⟨f(x) g(T^n x)⟩ − ⟨f⟩⟨g⟩`.
//!
//! Three routes are provided:
//!
//! * exact resonance: `g(T^n x)` is again a trigonometric polynomial whose
//!   frequencies are `(T^n)ᵀ j` for the frequencies `j` of `g`. The torus
//!   integral of a product of two modes vanishes unless the frequencies
//!   agree up to sign, so the correlation is an exact join on integer
//!   frequency vectors (arbitrary precision, since they grow like `λ^n`);
//! * Monte Carlo over the dyadic lattice with a counter-based sampler;
//! * closed forms for one-step correlators against the sawtooth `{x_1 + x_2}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::TorusMap;
use crate::error::{Error, Result};
use crate::matrix::{build_family_matrix, IntegerMatrix};
use crate::observables::{Observable, Phase};
use crate::sampling::{chunks, pairwise_sum, LatticeSampler};
use crate::spectral::Spectrum;

/// Minimum Monte Carlo sample count.
pub const MIN_SAMPLES: u64 = 1000;
/// Noise floor for exactly computed series.
pub const EXACT_NOISE_FLOOR: f64 = 1e-14;
/// Noise floor for Monte Carlo series, in standard errors.
pub const MC_NOISE_FLOOR_SIGMAS: f64 = 5.0;
/// Multiplier applied to each grid-estimated derivative bound.
pub const DERIV_BOUND_SAFETY: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactResonance,
    MonteCarlo,
    ClosedForm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactResonance => "exact_resonance",
            Method::MonteCarlo => "monte_carlo",
            Method::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub n_values: Vec<u64>,
    pub d_values: Vec<f64>,
    pub method: Method,
    pub stderr: Option<Vec<f64>>,
    pub sample_count: Option<u64>,
}

impl CorrelationSeries {
    pub fn new(
        n_values: Vec<u64>,
        d_values: Vec<f64>,
        method: Method,
        stderr: Option<Vec<f64>>,
        sample_count: Option<u64>,
    ) -> Result<Self> {
        if n_values.len() != d_values.len() || stderr.as_ref().is_some_and(|s| s.len() != n_values.len()) {
            return Err(Error::InvalidParameter("series columns differ in length".into()));
        }
        if method == Method::ExactResonance && stderr.is_some() {
            return Err(Error::InvalidParameter("exact series carry no standard errors".into()));
        }
        Ok(Self {
            n_values,
            d_values,
            method,
            stderr,
            sample_count,
        })
    }

    pub fn len(&self) -> usize {
        self.n_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty()
    }

    /// CSV with header `n,d_n,stderr,method,samples`; absent fields are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,d_n,stderr,method,samples\n");
        for (i, (n, d)) in self.n_values.iter().zip(&self.d_values).enumerate() {
            let se = self
                .stderr
                .as_ref()
                .map(|s| format!("{:.16e}", s[i]))
                .unwrap_or_default();
            let samples = self.sample_count.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{n},{d:.16e},{se},{},{samples}", self.method.as_str());
        }
        out
    }

    /// Per-point noise floor used when selecting points for a fit.
    fn noise_floor(&self, i: usize) -> f64 {
        match &self.stderr {
            Some(se) => MC_NOISE_FLOOR_SIGMAS * se[i],
            None => EXACT_NOISE_FLOOR,
        }
    }
}

/// `∫_{T^N} trig_a(2π k_a·x) trig_b(2π k_b·x) dx` for arbitrary (not
/// necessarily canonical) integer frequencies.
pub fn pair_integral(phase_a: Phase, freq_a: &[BigInt], phase_b: Phase, freq_b: &[BigInt]) -> f64 {
    let a_zero = freq_a.iter().all(Zero::is_zero);
    let b_zero = freq_b.iter().all(Zero::is_zero);
    if a_zero || b_zero {
        return match (phase_a, phase_b) {
            (Phase::Cos, Phase::Cos) if a_zero && b_zero => 1.0,
            _ => 0.0,
        };
    }
    let same = freq_a == freq_b;
    let opposite = freq_a.iter().zip(freq_b).all(|(a, b)| *a == -b);
    match (phase_a, phase_b) {
        (Phase::Cos, Phase::Cos) if same || opposite => 0.5,
        (Phase::Sin, Phase::Sin) if same => 0.5,
        (Phase::Sin, Phase::Sin) if opposite => -0.5,
        _ => 0.0,
    }
}

/// A matched pair of modes contributing to the exact correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    pub f_term: usize,
    pub g_term: usize,
    /// Canonical frequency shared by both modes.
    pub freq: Vec<BigInt>,
    pub contribution: f64,
}

fn canonical(freq: Vec<BigInt>) -> Vec<BigInt> {
    match freq.iter().find(|k| !k.is_zero()) {
        Some(k) if k.is_negative() => freq.into_iter().map(|k| -k).collect(),
        _ => freq,
    }
}

fn check_pair(m: &IntegerMatrix, f: &Observable, g: &Observable) -> Result<()> {
    for obs in [f, g] {
        if obs.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                actual: obs.dim(),
            });
        }
    }
    Ok(())
}

/// All mode pairs `(f-term, g-term)` with a nonzero overlap after `n` steps,
/// sorted by frequency.
pub fn resonances(m: &IntegerMatrix, f: &Observable, g: &Observable, n: u64) -> Result<Vec<Resonance>> {
    check_pair(m, f, g)?;
    let power_t = m.pow(n).transpose();
    let f_index: HashMap<(Vec<BigInt>, Phase), usize> = f
        .terms()
        .iter()
        .enumerate()
        .map(|(i, t)| ((t.freq.iter().map(|&k| BigInt::from(k)).collect(), t.phase), i))
        .collect();
    let mut found: Vec<Resonance> = g
        .terms()
        .par_iter()
        .enumerate()
        .filter_map(|(gi, t)| {
            let j: Vec<BigInt> = t.freq.iter().map(|&k| BigInt::from(k)).collect();
            let image: Vec<BigInt> = power_t
                .rows()
                .map(|row| row.iter().zip(&j).map(|(a, b)| a * b).sum())
                .collect();
            let key = canonical(image.clone());
            let &fi = f_index.get(&(key.clone(), t.phase))?;
            let ft = &f.terms()[fi];
            let overlap = pair_integral(ft.phase, &key, t.phase, &image);
            Some(Resonance {
                f_term: fi,
                g_term: gi,
                freq: key,
                contribution: ft.amp * t.amp * overlap,
            })
        })
        .collect();
    found.sort_by(|a, b| a.freq.cmp(&b.freq).then(a.g_term.cmp(&b.g_term)));
    Ok(found)
}

/// Exact `D_n(f, g)` by frequency matching.
pub fn exact_correlation(m: &IntegerMatrix, f: &Observable, g: &Observable, n: u64) -> Result<f64> {
    Ok(resonances(m, f, g, n)?.iter().map(|r| r.contribution).sum())
}

pub fn exact_series(
    m: &IntegerMatrix,
    f: &Observable,
    g: &Observable,
    n_values: &[u64],
) -> Result<CorrelationSeries> {
    let d_values = n_values
        .iter()
        .map(|&n| exact_correlation(m, f, g, n))
        .collect::<Result<Vec<_>>>()?;
    CorrelationSeries::new(n_values.to_vec(), d_values, Method::ExactResonance, None, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Sample covariance of `a(x)` and `b(x)` over lattice samples `x`.
///
/// The first pass computes sample means; the second averages the centred
/// products, whose spread gives the standard error. Both passes regenerate
/// samples from the counter-based sampler and reduce per-chunk partial sums
/// pairwise in chunk order, so the result is independent of thread count.
fn mc_covariance<F>(samples: u64, seed: u64, dim: usize, eval: F) -> MonteCarloEstimate
where
    F: Fn(&[u64]) -> (f64, f64) + Sync,
{
    let sampler = LatticeSampler::new(seed, dim);
    let ranges = chunks(samples);
    let first: Vec<(f64, f64)> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut x = vec![0u64; dim];
            let (mut sa, mut sb) = (0.0, 0.0);
            for i in lo..hi {
                sampler.fill(i, &mut x);
                let (a, b) = eval(&x);
                sa += a;
                sb += b;
            }
            (sa, sb)
        })
        .collect();
    let count = samples as f64;
    let mean_a = pairwise_sum(&first.iter().map(|p| p.0).collect::<Vec<_>>()) / count;
    let mean_b = pairwise_sum(&first.iter().map(|p| p.1).collect::<Vec<_>>()) / count;
    let second: Vec<(f64, f64)> = ranges
        .par_iter()
        .map(|&(lo, hi)| {
            let mut x = vec![0u64; dim];
            let (mut s1, mut s2) = (0.0, 0.0);
            for i in lo..hi {
                sampler.fill(i, &mut x);
                let (a, b) = eval(&x);
                let c = (a - mean_a) * (b - mean_b);
                s1 += c;
                s2 += c * c;
            }
            (s1, s2)
        })
        .collect();
    let sum_c = pairwise_sum(&second.iter().map(|p| p.0).collect::<Vec<_>>());
    let sum_c2 = pairwise_sum(&second.iter().map(|p| p.1).collect::<Vec<_>>());
    let estimate = sum_c / count;
    let var = ((sum_c2 / count - estimate * estimate) * count / (count - 1.0)).max(0.0);
    MonteCarloEstimate {
        estimate,
        stderr: (var / count).sqrt(),
        samples,
    }
}

/// Monte Carlo estimate of `D_n(f, g)` with its standard error.
pub fn monte_carlo_correlation(
    m: &IntegerMatrix,
    f: &Observable,
    g: &Observable,
    n: u64,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_pair(m, f, g)?;
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let map = TorusMap::power(m, n);
    Ok(mc_covariance(samples, seed, m.dim(), |x| {
        let y = map.apply_unchecked(x);
        (f.evaluate_words(x), g.evaluate_words(&y.coords))
    }))
}

pub fn monte_carlo_series(
    m: &IntegerMatrix,
    f: &Observable,
    g: &Observable,
    n_values: &[u64],
    samples: u64,
    seed: u64,
) -> Result<CorrelationSeries> {
    let estimates = n_values
        .iter()
        .map(|&n| monte_carlo_correlation(m, f, g, n, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    CorrelationSeries::new(
        n_values.to_vec(),
        estimates.iter().map(|e| e.estimate).collect(),
        Method::MonteCarlo,
        Some(estimates.iter().map(|e| e.stderr).collect()),
        Some(samples),
    )
}

/// Closed form of `⟨f(x) {x_1 + x_2}⟩ − ⟨f⟩/2` for a two-dimensional
/// trigonometric observable. Expanding the sawtooth in sines, only sine modes
/// of `f` at frequency `(r, r)` survive, each contributing `−amp/(2πr)`; for
/// `f = Σ a_{i1 i2} sin(2π i1 x1) cos(2π i2 x2)` this is `−Σ_r a_rr/(4πr)`.
pub fn one_step_sawtooth_correlator(f: &Observable) -> Result<f64> {
    if f.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: f.dim(),
        });
    }
    Ok(f.terms()
        .iter()
        .filter(|t| t.phase == Phase::Sin && t.freq[0] == t.freq[1] && t.freq[0] > 0)
        .map(|t| -t.amp / (2.0 * PI * t.freq[0] as f64))
        .sum())
}

/// Monte Carlo scans of the polynomial one-step correlators on the
/// two-dimensional system:
///
/// * `D_1(r) = ⟨x_1 x_2^r {x_1+x_2}⟩ − ⟨x_1 x_2^r⟩⟨{x_1+x_2}⟩`
/// * `K_1(r) = ⟨x_1 x_2 {x_1+2x_2}^r⟩ − ⟨x_1 x_2⟩⟨{x_1+2x_2}^r⟩`
///
/// The `mod 1` is applied by the exact dynamics; the polynomials are then
/// evaluated on the exported doubles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialScan {
    pub d1: CorrelationSeries,
    pub k1: CorrelationSeries,
}

pub fn polynomial_one_step_scan(r_max: u32, samples: u64, seed: u64) -> Result<PolynomialScan> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let map = TorusMap::new(&build_family_matrix(2)?);
    let mut d_est = Vec::new();
    let mut k_est = Vec::new();
    for r in 0..=r_max as i32 {
        // Every r reuses the same samples, as a single simulation would.
        d_est.push(mc_covariance(samples, seed, 2, |x| {
            let y = map.apply_unchecked(x);
            let (x1, x2) = (word(x[0]), word(x[1]));
            (x1 * x2.powi(r), word(y.coords[0]))
        }));
        k_est.push(mc_covariance(samples, seed, 2, |x| {
            let y = map.apply_unchecked(x);
            let (x1, x2) = (word(x[0]), word(x[1]));
            (x1 * x2, word(y.coords[1]).powi(r))
        }));
    }
    let ns: Vec<u64> = (0..=r_max as u64).collect();
    let to_series = |est: Vec<MonteCarloEstimate>| {
        CorrelationSeries::new(
            ns.clone(),
            est.iter().map(|e| e.estimate).collect(),
            Method::MonteCarlo,
            Some(est.iter().map(|e| e.stderr).collect()),
            Some(samples),
        )
    };
    Ok(PolynomialScan {
        d1: to_series(d_est)?,
        k1: to_series(k_est)?,
    })
}

fn word(w: u64) -> f64 {
    crate::dynamics::word_to_f64(w)
}

/// `ζ(s) = Σ_{r≥1} r^{-s}` for `s > 1`, via a partial sum with an
/// Euler–Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    let cut = 1000.0f64;
    let head: f64 = (1..1000).map(|r| (r as f64).powf(-s)).sum();
    head + cut.powf(1.0 - s) / (s - 1.0) + 0.5 * cut.powf(-s) + s / 12.0 * cut.powf(-s - 1.0)
}

/// Upper bound `|D_n| ≤ prefactor · exp(−n · rate)` with `rate = h ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyBound {
    pub entropy: f64,
    pub nu: f64,
    pub rate: f64,
    pub prefactor: f64,
    pub smoothness_p: u32,
}

impl EntropyBound {
    pub fn at(&self, n: u64) -> f64 {
        self.prefactor * (-(n as f64) * self.rate).exp()
    }

    pub fn holds(&self, n: u64, d: f64) -> bool {
        d.abs() <= self.at(n)
    }
}

/// Prefactor of the entropy bound for observables of common smoothness `p`
/// with derivative bounds `m_f`, `m_g`.
///
/// For `N = 2` the four-term estimate sums to `72 M_f M_g ζ(2p)² / (2π)^{8p}`;
/// for general `N` the single-term form `M_f M_g ζ(2p)^N / (2π)^{4pN}` applies.
pub fn bound_prefactor(dim: usize, p: u32, m_f: f64, m_g: f64) -> f64 {
    let z = zeta(2.0 * p as f64);
    let two_pi = 2.0 * PI;
    if dim == 2 {
        72.0 * m_f * m_g * z * z / two_pi.powi(8 * p as i32)
    } else {
        m_f * m_g * z.powi(dim as i32) / two_pi.powi((4 * p as usize * dim) as i32)
    }
}

/// The entropy bound for `D_n(f, g)` on the system with the given spectrum.
/// Uses `p = min(p_f, p_g)`, `ν = 2pN`, and the stored derivative bounds each
/// scaled by [`DERIV_BOUND_SAFETY`].
pub fn entropy_bound(spectrum: &Spectrum, f: &Observable, g: &Observable) -> Result<EntropyBound> {
    let missing = || Error::InvalidParameter("observables need smoothness p and derivative bound Mp".into());
    let p = f.smoothness_p().ok_or_else(missing)?.min(g.smoothness_p().ok_or_else(missing)?);
    let m_f = f.deriv_bound().ok_or_else(missing)? * DERIV_BOUND_SAFETY;
    let m_g = g.deriv_bound().ok_or_else(missing)? * DERIV_BOUND_SAFETY;
    let dim = spectrum.eigenvalues.len();
    let nu = 2.0 * p as f64 * dim as f64;
    Ok(EntropyBound {
        entropy: spectrum.entropy,
        nu,
        rate: spectrum.entropy * nu,
        prefactor: bound_prefactor(dim, p, m_f, m_g),
        smoothness_p: p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Slope of `−ln|D_n|` against `n`, nats per iteration.
    pub fitted_rate: f64,
    pub fitted_prefactor: f64,
    /// `h(T) · ν`.
    pub bound_rate: f64,
    pub bound_prefactor: f64,
    pub nu: f64,
    pub entropy: f64,
    pub points_used: usize,
    pub n_used: Vec<u64>,
    pub bound_violated: bool,
}

impl DecayFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

/// Least-squares exponential fit of the points above the noise floor, plus
/// a pointwise check against the entropy bound.
pub fn fit_decay(
    series: &CorrelationSeries,
    spectrum: &Spectrum,
    f: &Observable,
    g: &Observable,
) -> Result<DecayFit> {
    fit_decay_with_floor(series, spectrum, f, g, None)
}

/// As [`fit_decay`], with an absolute noise floor replacing the default.
pub fn fit_decay_with_floor(
    series: &CorrelationSeries,
    spectrum: &Spectrum,
    f: &Observable,
    g: &Observable,
    noise_floor: Option<f64>,
) -> Result<DecayFit> {
    let usable: Vec<(u64, f64)> = (0..series.len())
        .filter(|&i| series.d_values[i].abs() > noise_floor.unwrap_or_else(|| series.noise_floor(i)))
        .map(|i| (series.n_values[i], series.d_values[i]))
        .collect();
    if usable.len() < 3 {
        return Err(Error::TooFewPoints(usable.len()));
    }
    let bound = entropy_bound(spectrum, f, g)?;
    let k = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|&(_, d)| d.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit needs at least two distinct n".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(DecayFit {
        fitted_rate: -slope,
        fitted_prefactor: intercept.exp(),
        bound_rate: bound.rate,
        bound_prefactor: bound.prefactor,
        nu: bound.nu,
        entropy: bound.entropy,
        points_used: usable.len(),
        n_used: usable.iter().map(|&(n, _)| n).collect(),
        bound_violated: usable.iter().any(|&(n, d)| !bound.holds(n, d)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{sawtooth_series, smooth_family, ProductTerm, Term};
    use crate::spectral::compute_spectrum;

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&k| BigInt::from(k)).collect()
    }

    fn t2() -> IntegerMatrix {
        build_family_matrix(2).unwrap()
    }

    fn single(freq: Vec<i64>, phase: Phase, amp: f64) -> Observable {
        let dim = freq.len();
        Observable::from_terms(dim, 0.0, vec![Term { freq, phase, amp }]).unwrap()
    }

    #[test]
    fn pair_integral_sixteen_cases() {
        let k = big(&[2, -3]);
        let neg = big(&[-2, 3]);
        let other = big(&[1, 1]);
        let zero = big(&[0, 0]);
        use Phase::{Cos, Sin};
        let cases = [
            (Cos, Cos, &k, 0.5),
            (Cos, Cos, &neg, 0.5),
            (Cos, Cos, &other, 0.0),
            (Cos, Cos, &zero, 0.0),
            (Sin, Sin, &k, 0.5),
            (Sin, Sin, &neg, -0.5),
            (Sin, Sin, &other, 0.0),
            (Sin, Sin, &zero, 0.0),
            (Sin, Cos, &k, 0.0),
            (Sin, Cos, &neg, 0.0),
            (Sin, Cos, &other, 0.0),
            (Sin, Cos, &zero, 0.0),
            (Cos, Sin, &k, 0.0),
            (Cos, Sin, &neg, 0.0),
            (Cos, Sin, &other, 0.0),
            (Cos, Sin, &zero, 0.0),
        ];
        for (pa, pb, kb, expected) in cases {
            assert_eq!(pair_integral(pa, &k, pb, kb), expected, "{pa:?} {pb:?} {kb:?}");
        }
        assert_eq!(pair_integral(Cos, &zero, Cos, &zero), 1.0);
        assert_eq!(pair_integral(Sin, &zero, Sin, &zero), 0.0);
    }

    #[test]
    fn disjoint_frequencies_give_zero() {
        let f = smooth_family(1, 1, 2).unwrap();
        assert!(resonances(&t2(), &f, &f, 1).unwrap().is_empty());
        assert_eq!(exact_correlation(&t2(), &f, &f, 1).unwrap(), 0.0);
    }

    #[test]
    fn matched_frequency_gives_quarter() {
        let f = single(vec![2, 3], Phase::Cos, 1.0);
        let g = smooth_family(1, 1, 2).unwrap();
        let r = resonances(&t2(), &f, &g, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].freq, big(&[2, 3]));
        assert_eq!(exact_correlation(&t2(), &f, &g, 1).unwrap(), 0.25);
    }

    #[test]
    fn autocorrelation_at_zero_is_variance() {
        for f in [smooth_family(1, 3, 2).unwrap(), sawtooth_series(2, 1, 10).unwrap()] {
            let d0 = exact_correlation(&t2(), &f, &f, 0).unwrap();
            assert!((d0 - f.variance()).abs() < 1e-15);
            assert!(d0 >= 0.0);
        }
    }

    #[test]
    fn sine_sign_bookkeeping() {
        // g = sin(2π(x1 - x2)) has T-image frequency (0, -1): sin(2π(-x2)) = -sin(2π x2).
        let g = single(vec![1, -1], Phase::Sin, 1.0);
        let f = single(vec![0, 1], Phase::Sin, 1.0);
        assert_eq!(exact_correlation(&t2(), &f, &g, 1).unwrap(), -0.5);
        let mc = monte_carlo_correlation(&t2(), &f, &g, 1, 200_000, 5).unwrap();
        assert!((mc.estimate + 0.5).abs() < 4.0 * mc.stderr + 1e-12);
    }

    #[test]
    fn empty_observables_and_dimension_checks() {
        let c = Observable::constant(2, 3.0);
        assert_eq!(exact_correlation(&t2(), &c, &c, 4).unwrap(), 0.0);
        let f3 = smooth_family(1, 1, 3).unwrap();
        assert!(exact_correlation(&t2(), &f3, &c, 1).is_err());
        assert!(monte_carlo_correlation(&t2(), &c, &c, 1, 10, 0).is_err());
    }

    #[test]
    fn vanishes_once_frequencies_outgrow_support() {
        let f = smooth_family(1, 4, 2).unwrap();
        let h = compute_spectrum(&t2(), 1e-9).unwrap().entropy;
        let limit = ((4.0 * 4.0 * 2.0f64).ln() / h).ceil() as u64 + 2;
        for n in limit..limit + 10 {
            assert!(resonances(&t2(), &f, &f, n).unwrap().is_empty(), "n={n}");
        }
    }

    #[test]
    fn constant_observable_decorrelates() {
        let c = Observable::constant(2, 2.0);
        let g = smooth_family(1, 2, 2).unwrap();
        let mc = monte_carlo_correlation(&t2(), &c, &g, 2, 10_000, 1).unwrap();
        assert!(mc.estimate.abs() <= mc.stderr.max(1e-15));
    }

    #[test]
    fn stderr_scales_like_inverse_root() {
        let f = single(vec![2, 3], Phase::Cos, 1.0);
        let g = smooth_family(1, 1, 2).unwrap();
        let a = monte_carlo_correlation(&t2(), &f, &g, 1, 100_000, 3).unwrap();
        let b = monte_carlo_correlation(&t2(), &f, &g, 1, 200_000, 3).unwrap();
        let ratio = b.stderr / a.stderr;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.15 * std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let f = smooth_family(1, 2, 2).unwrap();
        let a = monte_carlo_correlation(&t2(), &f, &f, 1, 50_000, 11).unwrap();
        let b = monte_carlo_correlation(&t2(), &f, &f, 1, 50_000, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sawtooth_closed_form_examples() {
        let diag = Observable::from_products(
            2,
            &[ProductTerm { amp: 1.0, factors: vec![(1, Phase::Sin), (1, Phase::Cos)] }],
        )
        .unwrap();
        assert!((one_step_sawtooth_correlator(&diag).unwrap() + 1.0 / (4.0 * PI)).abs() <= 1e-15);
        let off = Observable::from_products(
            2,
            &[ProductTerm { amp: 1.0, factors: vec![(1, Phase::Sin), (2, Phase::Cos)] }],
        )
        .unwrap();
        assert_eq!(one_step_sawtooth_correlator(&off).unwrap(), 0.0);
        assert!(one_step_sawtooth_correlator(&smooth_family(1, 1, 3).unwrap()).is_err());
    }

    #[test]
    fn sawtooth_closed_form_matches_exact_engine() {
        // Against the truncated series the exact engine reproduces the closed form
        // once the cutoff exceeds f's diagonal frequencies.
        let f = Observable::from_products(
            2,
            &[
                ProductTerm { amp: 1.0, factors: vec![(1, Phase::Sin), (1, Phase::Cos)] },
                ProductTerm { amp: -0.5, factors: vec![(3, Phase::Sin), (3, Phase::Cos)] },
                ProductTerm { amp: 0.25, factors: vec![(2, Phase::Sin), (1, Phase::Cos)] },
            ],
        )
        .unwrap();
        let g = sawtooth_series(2, 0, 8).unwrap();
        let exact = exact_correlation(&t2(), &f, &g, 1).unwrap();
        let closed = one_step_sawtooth_correlator(&f).unwrap();
        assert!((exact - closed).abs() < 1e-15);
    }

    #[test]
    fn map_preserves_lattice_measure() {
        let g = smooth_family(1, 3, 2).unwrap();
        let sampler = LatticeSampler::new(21, 2);
        let samples = 200_000u64;
        for n in 0..=10u64 {
            let map = TorusMap::power(&t2(), n);
            let mut x = vec![0u64; 2];
            let (mut s, mut ss) = (0.0, 0.0);
            for i in 0..samples {
                sampler.fill(i, &mut x);
                let v = g.evaluate_words(&map.apply_unchecked(&x).coords);
                s += v;
                ss += v * v;
            }
            let mean = s / samples as f64;
            let se = ((ss / samples as f64 - mean * mean) / samples as f64).sqrt();
            assert!((mean - g.mean()).abs() <= 4.0 * se, "n={n}: {mean}");
        }
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn synthetic_exponential_fit() {
        let ns: Vec<u64> = (0..10).collect();
        let ds: Vec<f64> = ns.iter().map(|&n| (-2.0 * n as f64).exp()).collect();
        let series = CorrelationSeries::new(ns, ds, Method::ExactResonance, None, None).unwrap();
        let f = smooth_family(1, 1, 2).unwrap();
        let spectrum = compute_spectrum(&t2(), 1e-9).unwrap();
        let fit = fit_decay(&series, &spectrum, &f, &f).unwrap();
        assert!((fit.fitted_rate - 2.0).abs() < 1e-9);
        assert!((fit.fitted_prefactor - 1.0).abs() < 1e-9);
        assert_eq!(fit.points_used, 10);
        assert!((fit.nu - 4.0).abs() < 1e-15);
    }

    #[test]
    fn fit_needs_three_points() {
        let series = CorrelationSeries::new(
            vec![0, 1, 2, 3],
            vec![0.3, 0.1, 0.0, 0.0],
            Method::ExactResonance,
            None,
            None,
        )
        .unwrap();
        let f = smooth_family(1, 1, 2).unwrap();
        let spectrum = compute_spectrum(&t2(), 1e-9).unwrap();
        assert_eq!(fit_decay(&series, &spectrum, &f, &f), Err(Error::TooFewPoints(2)));
    }

    #[test]
    fn fit_requires_smoothness_metadata() {
        let series = CorrelationSeries::new(
            vec![0, 1, 2],
            vec![1.0, 0.5, 0.25],
            Method::ExactResonance,
            None,
            None,
        )
        .unwrap();
        let c = sawtooth_series(2, 0, 4).unwrap();
        let spectrum = compute_spectrum(&t2(), 1e-9).unwrap();
        assert!(fit_decay(&series, &spectrum, &c, &c).is_err());
    }

    #[test]
    fn series_validation_and_csv() {
        assert!(CorrelationSeries::new(vec![0], vec![], Method::MonteCarlo, None, None).is_err());
        assert!(CorrelationSeries::new(vec![0], vec![1.0], Method::ExactResonance, Some(vec![0.1]), None).is_err());
        let s = CorrelationSeries::new(vec![1], vec![0.25], Method::MonteCarlo, Some(vec![0.01]), Some(1000)).unwrap();
        assert_eq!(
            s.to_csv(),
            "n,d_n,stderr,method,samples\n1,2.5000000000000000e-1,1.0000000000000000e-2,monte_carlo,1000\n"
        );
    }

    #[test]
    fn polynomial_scan_shape() {
        let scan = polynomial_one_step_scan(4, 20_000, 9).unwrap();
        assert_eq!(scan.d1.len(), 5);
        assert_eq!(scan.k1.len(), 5);
        // K_1(0) correlates with a constant.
        assert!(scan.k1.d_values[0].abs() < 1e-15);
        assert!(polynomial_one_step_scan(4, 10, 9).is_err());
    }
}
