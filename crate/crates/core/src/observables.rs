//! Observables on the torus as finite trigonometric polynomials.
//!
//! Every observable is kept in expanded form: a constant plus a flat list of
//! single-frequency terms `amp * cos(2π k·x)` or `amp * sin(2π k·x)`, with each
//! frequency vector canonical (first nonzero entry positive). Products of
//! per-coordinate factors are expanded with the product-to-sum identities at
//! construction time.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::TorusPoint;
use crate::error::{Error, Result};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub freq: Vec<i64>,
    pub phase: Phase,
    pub amp: f64,
}

/// One factor-per-coordinate product `amp * Π_d trig_d(2π i_d x_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm {
    pub amp: f64,
    pub factors: Vec<(i64, Phase)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    dim: usize,
    mean: f64,
    terms: Vec<Term>,
    smoothness_p: Option<u32>,
    deriv_bound: Option<f64>,
}

fn is_canonical(freq: &[i64]) -> bool {
    freq.iter().find(|&&k| k != 0).is_none_or(|&k| k > 0)
}

impl Observable {
    pub fn constant(dim: usize, value: f64) -> Self {
        Self {
            dim,
            mean: value,
            terms: Vec::new(),
            smoothness_p: None,
            deriv_bound: None,
        }
    }

    /// Builds an observable from arbitrary terms, canonicalizing frequencies,
    /// folding zero-frequency cosines into the mean and merging duplicates.
    pub fn from_terms(dim: usize, mean: f64, terms: Vec<Term>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.freq.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: t.freq.len(),
            });
        }
        Ok(Self {
            dim,
            mean,
            terms,
            smoothness_p: None,
            deriv_bound: None,
        }
        .canonicalize())
    }

    pub fn from_products(dim: usize, products: &[ProductTerm]) -> Result<Self> {
        let mut expanded = Vec::new();
        for product in products {
            if product.factors.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: product.factors.len(),
                });
            }
            let mut partial = vec![Term {
                freq: vec![0; dim],
                phase: Phase::Cos,
                amp: product.amp,
            }];
            for (d, &(k, phase)) in product.factors.iter().enumerate() {
                let mut factor = vec![0; dim];
                factor[d] = k;
                partial = partial
                    .iter()
                    .flat_map(|t| multiply(t, &factor, phase))
                    .collect();
            }
            expanded.extend(partial);
        }
        Self::from_terms(dim, 0.0, expanded)
    }

    pub fn canonicalize(&self) -> Self {
        let mut mean = self.mean;
        let mut merged: BTreeMap<(Vec<i64>, Phase), f64> = BTreeMap::new();
        for t in &self.terms {
            let mut freq = t.freq.clone();
            let mut amp = t.amp;
            if freq.iter().all(|&k| k == 0) {
                if t.phase == Phase::Cos {
                    mean += amp;
                }
                continue;
            }
            if !is_canonical(&freq) {
                freq.iter_mut().for_each(|k| *k = -*k);
                if t.phase == Phase::Sin {
                    amp = -amp;
                }
            }
            *merged.entry((freq, t.phase)).or_insert(0.0) += amp;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, amp)| *amp != 0.0)
            .map(|((freq, phase), amp)| Term { freq, phase, amp })
            .collect();
        Self {
            dim: self.dim,
            mean,
            terms,
            smoothness_p: self.smoothness_p,
            deriv_bound: self.deriv_bound,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Torus average `⟨f⟩`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn smoothness_p(&self) -> Option<u32> {
        self.smoothness_p
    }

    pub fn deriv_bound(&self) -> Option<f64> {
        self.deriv_bound
    }

    pub fn with_smoothness(mut self, p: u32, deriv_bound: Option<f64>) -> Self {
        self.smoothness_p = Some(p);
        self.deriv_bound = deriv_bound;
        self
    }

    pub fn max_abs_frequency(&self) -> i64 {
        self.terms
            .iter()
            .flat_map(|t| t.freq.iter().map(|k| k.abs()))
            .max()
            .unwrap_or(0)
    }

    /// `∫ f² - ⟨f⟩²`, from Parseval.
    pub fn variance(&self) -> f64 {
        self.terms.iter().map(|t| 0.5 * t.amp * t.amp).sum()
    }

    pub fn evaluate(&self, x: &TorusPoint) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        Ok(self.evaluate_words(&x.coords))
    }

    /// Evaluation on raw fixed-point words; `k·x mod 1` is computed exactly
    /// in wrapping arithmetic before the trigonometric call.
    pub(crate) fn evaluate_words(&self, coords: &[u64]) -> f64 {
        let mut acc = self.mean;
        for t in &self.terms {
            let angle = 2.0 * PI * (phase_word(&t.freq, coords) as f64 / TWO_POW_64);
            acc += t.amp
                * match t.phase {
                    Phase::Cos => angle.cos(),
                    Phase::Sin => angle.sin(),
                };
        }
        acc
    }

    /// Numerical estimate of `sup |∂^{2p}_{x_1} ... ∂^{2p}_{x_N} f|` by grid
    /// maximization. The grid has 256 points per axis over the first
    /// `min(N, 2)` coordinates; remaining coordinates are held at 0.
    pub fn derivative_bound_estimate(&self, p: u32) -> f64 {
        let derivative: Vec<Term> = self
            .terms
            .iter()
            .map(|t| {
                let factor: f64 = t
                    .freq
                    .iter()
                    .map(|&k| (2.0 * PI * k as f64).powi(2 * p as i32))
                    .product();
                let sign = if (p as usize * self.dim) % 2 == 1 { -1.0 } else { 1.0 };
                Term {
                    freq: t.freq.clone(),
                    phase: t.phase,
                    amp: sign * factor * t.amp,
                }
            })
            .collect();
        let d = Observable {
            dim: self.dim,
            mean: 0.0,
            terms: derivative,
            smoothness_p: None,
            deriv_bound: None,
        };
        let axes = self.dim.min(2);
        let points = 256usize.pow(axes as u32);
        let mut coords = vec![0u64; self.dim];
        let mut best = 0.0f64;
        for idx in 0..points {
            if axes >= 1 {
                coords[0] = ((idx % 256) as u64) << 56;
            }
            if axes == 2 {
                coords[1] = ((idx / 256) as u64) << 56;
            }
            best = best.max(d.evaluate_words(&coords).abs());
        }
        best
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ObservableJson::from(self)).expect("observable serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: ObservableJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let dim = wire
            .terms
            .first()
            .map(|t| t.freq.len())
            .or(wire.dim)
            .ok_or_else(|| Error::Parse("observable without terms needs a \"dim\" field".into()))?;
        let f = Observable::from_terms(dim, wire.mean, wire.terms)?;
        Ok(Self {
            smoothness_p: wire.p,
            deriv_bound: wire.mp,
            ..f
        })
    }
}

/// Wire form: `{"mean", "terms": [{"freq", "phase", "amp"}], "p", "Mp"}`.
#[derive(Serialize, Deserialize)]
struct ObservableJson {
    mean: f64,
    terms: Vec<Term>,
    p: Option<u32>,
    #[serde(rename = "Mp")]
    mp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl From<&Observable> for ObservableJson {
    fn from(f: &Observable) -> Self {
        Self {
            mean: f.mean,
            terms: f.terms.clone(),
            p: f.smoothness_p,
            mp: f.deriv_bound,
            dim: f.terms.is_empty().then_some(f.dim),
        }
    }
}

/// `Σ_d k_d x_d mod 1` as a 64-bit fraction.
pub(crate) fn phase_word(freq: &[i64], coords: &[u64]) -> u64 {
    freq.iter()
        .zip(coords)
        .fold(0u64, |acc, (&k, &w)| acc.wrapping_add((k as u64).wrapping_mul(w)))
}

fn multiply(t: &Term, factor: &[i64], phase: Phase) -> [Term; 2] {
    let plus: Vec<i64> = t.freq.iter().zip(factor).map(|(a, b)| a + b).collect();
    let minus: Vec<i64> = t.freq.iter().zip(factor).map(|(a, b)| a - b).collect();
    let half = 0.5 * t.amp;
    let (p_minus, a_minus, p_plus, a_plus) = match (t.phase, phase) {
        (Phase::Cos, Phase::Cos) => (Phase::Cos, half, Phase::Cos, half),
        (Phase::Sin, Phase::Sin) => (Phase::Cos, half, Phase::Cos, -half),
        (Phase::Sin, Phase::Cos) => (Phase::Sin, half, Phase::Sin, half),
        (Phase::Cos, Phase::Sin) => (Phase::Sin, -half, Phase::Sin, half),
    };
    [
        Term {
            freq: minus,
            phase: p_minus,
            amp: a_minus,
        },
        Term {
            freq: plus,
            phase: p_plus,
            amp: a_plus,
        },
    ]
}

/// Truncated Fourier series of the sawtooth `{x_c} = 1/2 - (1/π) Σ_r sin(2π r x_c)/r`.
pub fn sawtooth_series(dim: usize, coordinate: usize, cutoff: u32) -> Result<Observable> {
    if coordinate >= dim {
        return Err(Error::InvalidParameter(format!(
            "coordinate {coordinate} out of range for dimension {dim}"
        )));
    }
    if cutoff == 0 {
        return Err(Error::InvalidParameter("sawtooth cutoff must be >= 1".into()));
    }
    let terms = (1..=cutoff as i64)
        .map(|r| {
            let mut freq = vec![0; dim];
            freq[coordinate] = r;
            Term {
                freq,
                phase: Phase::Sin,
                amp: -1.0 / (PI * r as f64),
            }
        })
        .collect();
    Observable::from_terms(dim, 0.5, terms)
}

/// Bound on the squared L² truncation error of [`sawtooth_series`]:
/// `Σ_{r>R} 1/(2π² r²) ≤ 1/(2π² R)`.
pub fn sawtooth_l2_tail_bound(cutoff: u32) -> f64 {
    1.0 / (2.0 * PI * PI * cutoff as f64)
}

/// Product amplitude `Π_d i_d^{-2p}`.
pub fn smooth_family_coefficient(indices: &[i64], p: u32) -> f64 {
    let denom: f64 = indices.iter().map(|&i| (i as f64).powi(2 * p as i32)).product();
    1.0 / denom
}

/// `Σ_{i ∈ [1, cutoff]^N} Π_d i_d^{-2p} cos(2π i_d x_d)`, a zero-mean
/// observable whose Fourier coefficients decay like `i^{-2p}`.
pub fn smooth_family(p: u32, cutoff: u32, dim: usize) -> Result<Observable> {
    if p == 0 || cutoff == 0 || dim == 0 {
        return Err(Error::InvalidParameter(
            "smooth family needs p >= 1, cutoff >= 1 and dim >= 1".into(),
        ));
    }
    let total = (cutoff as usize).pow(dim as u32);
    let products: Vec<ProductTerm> = (0..total)
        .map(|mut code| {
            let indices: Vec<i64> = (0..dim)
                .map(|_| {
                    let i = (code % cutoff as usize) as i64 + 1;
                    code /= cutoff as usize;
                    i
                })
                .collect();
            ProductTerm {
                amp: smooth_family_coefficient(&indices, p),
                factors: indices.iter().map(|&i| (i, Phase::Cos)).collect(),
            }
        })
        .collect();
    let f = Observable::from_products(dim, &products)?;
    let bound = f.derivative_bound_estimate(p);
    Ok(f.with_smoothness(p, Some(bound)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos1(dim: usize) -> Observable {
        let mut freq = vec![0; dim];
        freq[0] = 1;
        Observable::from_terms(dim, 0.0, vec![Term { freq, phase: Phase::Cos, amp: 1.0 }]).unwrap()
    }

    #[test]
    fn constant_evaluates_to_mean() {
        let f = Observable::constant(3, 2.5);
        assert_eq!(f.evaluate(&TorusPoint::new(vec![1, 2, 3])).unwrap(), 2.5);
    }

    #[test]
    fn cosine_at_origin() {
        assert_eq!(cos1(2).evaluate(&TorusPoint::origin(2)).unwrap(), 1.0);
        assert!(cos1(2).evaluate(&TorusPoint::origin(3)).is_err());
    }

    #[test]
    fn product_expansion_matches_direct_product() {
        let f = Observable::from_products(
            2,
            &[ProductTerm {
                amp: 1.0,
                factors: vec![(1, Phase::Sin), (1, Phase::Cos)],
            }],
        )
        .unwrap();
        assert_eq!(f.terms().len(), 2);
        let mut state = 0x1234_5678_9abc_def0u64;
        for _ in 0..100 {
            let x = TorusPoint::new(vec![crate::splitmix64(&mut state), crate::splitmix64(&mut state)]);
            let v = x.to_f64();
            let direct = (2.0 * PI * v[0]).sin() * (2.0 * PI * v[1]).cos();
            assert!((f.evaluate(&x).unwrap() - direct).abs() <= 1e-14);
        }
    }

    #[test]
    fn all_sixteen_product_sign_cases() {
        // Each two-factor product against direct evaluation, with mixed signs.
        let mut state = 99u64;
        for pa in [Phase::Cos, Phase::Sin] {
            for pb in [Phase::Cos, Phase::Sin] {
                for (ka, kb) in [(1, 2), (-1, 2), (2, -3), (-2, -1)] {
                    let f = Observable::from_products(
                        2,
                        &[ProductTerm { amp: 0.75, factors: vec![(ka, pa), (kb, pb)] }],
                    )
                    .unwrap();
                    for _ in 0..10 {
                        let x = TorusPoint::new(vec![crate::splitmix64(&mut state), crate::splitmix64(&mut state)]);
                        let v = x.to_f64();
                        let trig = |p: Phase, a: f64| match p {
                            Phase::Cos => a.cos(),
                            Phase::Sin => a.sin(),
                        };
                        let direct = 0.75
                            * trig(pa, 2.0 * PI * ka as f64 * v[0])
                            * trig(pb, 2.0 * PI * kb as f64 * v[1]);
                        assert!((f.evaluate(&x).unwrap() - direct).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_form_and_merging() {
        let f = Observable::from_terms(
            2,
            0.0,
            vec![
                Term { freq: vec![-1, 2], phase: Phase::Sin, amp: 1.0 },
                Term { freq: vec![1, -2], phase: Phase::Sin, amp: 0.5 },
                Term { freq: vec![0, -3], phase: Phase::Cos, amp: 2.0 },
                Term { freq: vec![0, 0], phase: Phase::Cos, amp: 4.0 },
                Term { freq: vec![0, 0], phase: Phase::Sin, amp: 9.0 },
            ],
        )
        .unwrap();
        assert_eq!(f.mean(), 4.0);
        assert_eq!(
            f.terms(),
            &[
                Term { freq: vec![0, 3], phase: Phase::Cos, amp: 2.0 },
                Term { freq: vec![1, -2], phase: Phase::Sin, amp: -0.5 },
            ]
        );
        assert_eq!(f.canonicalize(), f);
        assert!(f.terms().iter().all(|t| is_canonical(&t.freq)));
    }

    #[test]
    fn sawtooth_examples() {
        let s = sawtooth_series(1, 0, 1).unwrap();
        let v = s.evaluate(&TorusPoint::from_f64(&[0.25])).unwrap();
        assert!((v - (0.5 - 1.0 / PI)).abs() < 1e-15);
        for r in [1, 5, 64] {
            assert_eq!(sawtooth_series(2, 1, r).unwrap().mean(), 0.5);
        }
        assert!(sawtooth_series(2, 2, 4).is_err());
        assert!(sawtooth_series(2, 0, 0).is_err());
    }

    fn sawtooth_l2_error_squared(cutoff: u32) -> f64 {
        // Midpoint rule on 2^16 cells.
        let s = sawtooth_series(1, 0, cutoff).unwrap();
        let cells = 1u64 << 16;
        let mut sum = 0.0;
        for i in 0..cells {
            let x = (i as f64 + 0.5) / cells as f64;
            let e = s.evaluate(&TorusPoint::from_f64(&[x])).unwrap() - x;
            sum += e * e;
        }
        sum / cells as f64
    }

    #[test]
    fn sawtooth_error_halves_with_cutoff() {
        let errors: Vec<f64> = [8, 16, 32, 64].iter().map(|&r| sawtooth_l2_error_squared(r)).collect();
        for (w, r) in errors.windows(2).zip([8u32, 16, 32]) {
            let ratio = w[1] / w[0];
            assert!(ratio <= 0.55, "R={r}: {ratio}");
        }
        for (e, r) in errors.iter().zip([8u32, 16, 32, 64]) {
            assert!(*e <= sawtooth_l2_tail_bound(r), "R={r}");
        }
    }

    #[test]
    fn smooth_family_examples() {
        let f = smooth_family(1, 1, 2).unwrap();
        // cos(2πx1)cos(2πx2) = ½cos(2π(x1-x2)) + ½cos(2π(x1+x2)).
        assert_eq!(
            f.terms(),
            &[
                Term { freq: vec![1, -1], phase: Phase::Cos, amp: 0.5 },
                Term { freq: vec![1, 1], phase: Phase::Cos, amp: 0.5 },
            ]
        );
        assert_eq!(f.mean(), 0.0);
        assert_eq!(f.smoothness_p(), Some(1));

        let g = smooth_family(1, 2, 2).unwrap();
        let mut amps: Vec<(i64, i64, f64)> = g
            .terms()
            .iter()
            .filter(|t| t.freq[1] > 0)
            .map(|t| (t.freq[0], t.freq[1], 2.0 * t.amp))
            .collect();
        amps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(amps, vec![(1, 1, 1.0), (1, 2, 0.25), (2, 1, 0.25), (2, 2, 0.0625)]);
    }

    #[test]
    fn smooth_family_coefficients_follow_power_law() {
        for p in [1, 2, 3] {
            for i1 in 1..=6i64 {
                for i2 in 1..=6i64 {
                    let a = smooth_family_coefficient(&[i1, i2], p);
                    let scale = ((i1 * i2) as f64).powi(2 * p as i32);
                    assert!((a * scale - 1.0).abs() <= 4.0 * f64::EPSILON, "p={p} ({i1},{i2})");
                }
            }
        }
    }

    #[test]
    fn derivative_bound_for_single_product() {
        // ∂²_{x1}∂²_{x2} cos(2πx1)cos(2πx2) = (2π)^4 cos cos; max at the origin.
        let f = smooth_family(1, 1, 2).unwrap();
        let expected = (2.0 * PI).powi(4);
        assert!((f.deriv_bound().unwrap() - expected).abs() < 1e-9 * expected);
        let g = smooth_family(1, 4, 2).unwrap();
        assert!((g.deriv_bound().unwrap() - 16.0 * expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn periodic_in_each_coordinate() {
        let f = smooth_family(2, 3, 3).unwrap();
        let mut state = 7u64;
        for _ in 0..50 {
            let x = TorusPoint::new((0..3).map(|_| crate::splitmix64(&mut state)).collect());
            let real = x.to_f64();
            let shifted: Vec<f64> = real.iter().map(|v| v + 1.0).collect();
            let y = TorusPoint::from_f64(&shifted);
            assert!((f.evaluate(&y).unwrap() - f.evaluate(&TorusPoint::from_f64(&real)).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn json_schema() {
        let f = smooth_family(1, 2, 2).unwrap();
        let s = f.to_json();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("mean").is_some() && v.get("Mp").is_some() && v.get("p").is_some());
        assert_eq!(v["terms"][0]["phase"], "cos");
        assert_eq!(Observable::from_json(&s).unwrap(), f);
        let c = Observable::constant(4, 1.5);
        assert_eq!(Observable::from_json(&c.to_json()).unwrap(), c);
        assert!(Observable::from_json("{\"mean\":0,\"terms\":[],\"p\":null,\"Mp\":null}").is_err());
    }

    fn lattice_mean(f: &Observable, samples: u64, seed: u64) -> (f64, f64) {
        let sampler = crate::sampling::LatticeSampler::new(seed, f.dim());
        let mut x = vec![0u64; f.dim()];
        let (mut s, mut ss) = (0.0, 0.0);
        for i in 0..samples {
            sampler.fill(i, &mut x);
            let v = f.evaluate_words(&x);
            s += v;
            ss += v * v;
        }
        let n = samples as f64;
        let mean = s / n;
        (mean, ((ss / n - mean * mean) / n).sqrt())
    }

    #[test]
    fn sampled_mean_matches_stored_mean() {
        let fs = [
            smooth_family(1, 4, 2).unwrap(),
            smooth_family(2, 3, 3).unwrap(),
            sawtooth_series(2, 1, 16).unwrap(),
            Observable::from_terms(2, 0.3, vec![Term { freq: vec![1, -2], phase: Phase::Sin, amp: 0.8 }]).unwrap(),
        ];
        for (i, f) in fs.iter().enumerate() {
            let (mean, se) = lattice_mean(f, 1_000_000, i as u64);
            assert!((mean - f.mean()).abs() <= 4.0 * se, "observable {i}: {mean} vs {}", f.mean());
        }
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let f = Observable::from_products(
            3,
            &[ProductTerm { amp: 0.5, factors: vec![(2, Phase::Sin), (-1, Phase::Cos), (3, Phase::Sin)] }],
        )
        .unwrap();
        let once = f.canonicalize();
        assert_eq!(once.canonicalize(), once);
    }

    #[test]
    fn variance_from_parseval() {
        let f = smooth_family(1, 1, 2).unwrap();
        assert_eq!(f.variance(), 0.25);
    }
}
