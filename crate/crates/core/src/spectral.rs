//! Eigenvalue spectrum of the operator, the C-condition check and the
//! Kolmogorov entropy.
//!
//! The eigensolver is the classical dense pipeline: diagonal balancing,
//! Householder reduction to upper Hessenberg form, then Francis double-shift
//! QR on the Hessenberg matrix. Eigenvectors for the invariant subspaces come
//! from complex inverse iteration against the original (unbalanced) matrix.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::IntegerMatrix;

/// Default half-width of the dead band around the unit circle.
pub const DEFAULT_UNIT_CIRCLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Sorted by decreasing modulus, conjugate pairs with positive imaginary part first.
    pub eigenvalues: Vec<Complex64>,
    /// Indices with `|λ| < 1 - tol`.
    pub contracting: Vec<usize>,
    /// Indices with `|λ| > 1 + tol`.
    pub expanding: Vec<usize>,
    /// Indices inside the dead band; nonempty means the C-condition fails.
    pub on_unit_circle: Vec<usize>,
    pub is_c_system: bool,
    /// Sum of `ln|λ|` over the expanding set, in nats per iteration.
    pub entropy: f64,
}

impl Spectrum {
    pub fn log_modulus_sum(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm().ln()).sum()
    }

    pub fn product(&self) -> Complex64 {
        self.eigenvalues.iter().product()
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.first().map(|l| l.norm()).unwrap_or(0.0)
    }
}

/// Real bases of the expanding and contracting invariant subspaces. A complex
/// pair contributes the real and imaginary parts of its eigenvector, which
/// span a two-dimensional invariant plane.
#[derive(Debug, Clone, Serialize)]
pub struct SubspaceSplit {
    pub expanding_basis: Vec<Vec<f64>>,
    pub contracting_basis: Vec<Vec<f64>>,
    /// Largest relative residual `‖Tv − λv‖ / ‖v‖` seen.
    pub max_residual: f64,
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::InvalidParameter(format!(
            "unit-circle tolerance must lie in (0, 1e-4], got {tol}"
        )));
    }
    Ok(())
}

fn to_dense(m: &IntegerMatrix) -> Result<Vec<f64>> {
    m.to_f64().ok_or_else(|| {
        Error::InvalidParameter("matrix entries are not exactly representable as doubles".into())
    })
}

pub fn compute_spectrum(m: &IntegerMatrix, tol: f64) -> Result<Spectrum> {
    check_tol(tol)?;
    let n = m.dim();
    let mut a = to_dense(m)?;
    balance(&mut a, n);
    hessenberg(&mut a, n);
    let mut eigenvalues = hqr(&mut a, n)?;
    eigenvalues.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });
    Ok(classify(eigenvalues, tol))
}

fn classify(eigenvalues: Vec<Complex64>, tol: f64) -> Spectrum {
    let mut contracting = Vec::new();
    let mut expanding = Vec::new();
    let mut on_unit_circle = Vec::new();
    for (i, l) in eigenvalues.iter().enumerate() {
        let r = l.norm();
        if (r - 1.0).abs() <= tol {
            on_unit_circle.push(i);
        } else if r < 1.0 {
            contracting.push(i);
        } else {
            expanding.push(i);
        }
    }
    let entropy = expanding.iter().map(|&i| eigenvalues[i].norm().ln()).sum();
    Spectrum {
        is_c_system: on_unit_circle.is_empty(),
        eigenvalues,
        contracting,
        expanding,
        on_unit_circle,
        entropy,
    }
}

/// Kolmogorov entropy `Σ_β ln|λ_β|` of a C-system.
pub fn entropy(m: &IntegerMatrix) -> Result<f64> {
    let s = compute_spectrum(m, DEFAULT_UNIT_CIRCLE_TOL)?;
    if !s.is_c_system {
        return Err(Error::NotCSystem);
    }
    Ok(s.entropy)
}

pub fn invariant_subspaces(m: &IntegerMatrix, tol: f64) -> Result<SubspaceSplit> {
    let spectrum = compute_spectrum(m, tol)?;
    if !spectrum.is_c_system {
        return Err(Error::NotCSystem);
    }
    let n = m.dim();
    let a = to_dense(m)?;
    let mut split = SubspaceSplit {
        expanding_basis: Vec::new(),
        contracting_basis: Vec::new(),
        max_residual: 0.0,
    };
    for (i, &lambda) in spectrum.eigenvalues.iter().enumerate() {
        // Each conjugate pair is handled once, at its positive-imaginary member.
        if lambda.im < 0.0 {
            continue;
        }
        let v = inverse_iteration(&a, n, lambda);
        let residual = relative_residual(&a, n, lambda, &v);
        split.max_residual = split.max_residual.max(residual);
        if residual > tol {
            return Err(Error::Degenerate { residual });
        }
        let target = if spectrum.expanding.contains(&i) {
            &mut split.expanding_basis
        } else {
            &mut split.contracting_basis
        };
        target.push(v.iter().map(|z| z.re).collect());
        if lambda.im > 0.0 {
            target.push(v.iter().map(|z| z.im).collect());
        }
    }
    Ok(split)
}

/// Eigenvalue tables for plotting: `re,im` rows for `T` and, when requested,
/// for `T^{-1}` (the reciprocals of the eigenvalues of `T`).
#[derive(Debug, Clone)]
pub struct DistributionTables {
    pub forward: String,
    pub inverse: Option<String>,
}

pub fn spectrum_distribution_csv(m: &IntegerMatrix, also_inverse: bool) -> Result<DistributionTables> {
    let s = compute_spectrum(m, DEFAULT_UNIT_CIRCLE_TOL)?;
    let table = |values: &mut dyn Iterator<Item = Complex64>| {
        let mut out = String::from("re,im\n");
        for z in values {
            // Adding 0.0 maps -0.0 to 0.0.
            out.push_str(&format!("{:.16e},{:.16e}\n", z.re + 0.0, z.im + 0.0));
        }
        out
    };
    let forward = table(&mut s.eigenvalues.iter().copied());
    let inverse = also_inverse.then(|| table(&mut s.eigenvalues.iter().rev().map(|z| z.inv())));
    Ok(DistributionTables { forward, inverse })
}

fn balance(a: &mut [f64], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j * n + i].abs();
                    r += a[i * n + j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let s = c + r;
                let mut f = 1.0;
                let mut g = r / RADIX;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i * n + j] *= g;
                    }
                    for j in 0..n {
                        a[j * n + i] *= f;
                    }
                }
            }
        }
    }
}

/// Householder similarity reduction to upper Hessenberg form, in place.
fn hessenberg(a: &mut [f64], n: usize) {
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let norm: f64 = (k + 1..n).map(|i| a[i * n + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] -= alpha;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // A <- H A
        for j in 0..n {
            let dot: f64 = (k + 1..n).map(|i| v[i] * a[i * n + j]).sum();
            let s = beta * dot;
            for i in k + 1..n {
                a[i * n + j] -= s * v[i];
            }
        }
        // A <- A H
        for i in 0..n {
            let dot: f64 = (k + 1..n).map(|j| a[i * n + j] * v[j]).sum();
            let s = beta * dot;
            for j in k + 1..n {
                a[i * n + j] -= s * v[j];
            }
        }
        for i in k + 2..n {
            a[i * n + k] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
fn hqr(h: &mut [f64], n: usize) -> Result<Vec<Complex64>> {
    let dim = n as isize;
    let idx = |i: isize, j: isize| (i * dim + j) as usize;
    let eps = f64::EPSILON;
    let max_iterations = 100 * n.max(1);
    let mut total_iterations = 0usize;
    let mut w = vec![Complex64::new(0.0, 0.0); n];

    let mut anorm = 0.0;
    for i in 0..dim {
        for j in (i - 1).max(0)..dim {
            anorm += h[idx(i, j)].abs();
        }
    }

    let mut nn = dim - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let mut s = h[idx(l - 1, l - 1)].abs() + h[idx(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if h[idx(l, l - 1)].abs() <= eps * s {
                    h[idx(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[idx(nn, nn)];
            if l == nn {
                w[nn as usize] = Complex64::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            let mut y = h[idx(nn - 1, nn - 1)];
            let mut ww = h[idx(nn, nn - 1)] * h[idx(nn - 1, nn)];
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + ww;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    let mut second = x + z;
                    if z != 0.0 {
                        second = x - ww / z;
                    }
                    w[(nn - 1) as usize] = Complex64::new(x + z, 0.0);
                    w[nn as usize] = Complex64::new(second, 0.0);
                } else {
                    w[nn as usize] = Complex64::new(x + p, -z);
                    w[(nn - 1) as usize] = Complex64::new(x + p, z);
                }
                nn -= 2;
                break;
            }

            if total_iterations >= max_iterations {
                return Err(Error::NoConvergence(total_iterations));
            }
            if its > 0 && its % 10 == 0 {
                // Exceptional shift.
                t += x;
                for i in 0..=nn {
                    h[idx(i, i)] -= x;
                }
                let s = h[idx(nn, nn - 1)].abs() + h[idx(nn - 1, nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                ww = -0.4375 * s * s;
            }
            its += 1;
            total_iterations += 1;

            let (mut p, mut q, mut r, mut z);
            let mut m = nn - 2;
            loop {
                z = h[idx(m, m)];
                r = x - z;
                let s = y - z;
                p = (r * s - ww) / h[idx(m + 1, m)] + h[idx(m, m + 1)];
                q = h[idx(m + 1, m + 1)] - z - r - s;
                r = h[idx(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = h[idx(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (h[idx(m - 1, m - 1)].abs() + z.abs() + h[idx(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nn - 1 {
                h[idx(i + 2, i)] = 0.0;
                if i != m {
                    h[idx(i + 2, i - 1)] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = h[idx(k, k - 1)];
                    q = h[idx(k + 1, k - 1)];
                    r = 0.0;
                    if k + 1 != nn {
                        r = h[idx(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            h[idx(k, k - 1)] = -h[idx(k, k - 1)];
                        }
                    } else {
                        h[idx(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = h[idx(k, j)] + q * h[idx(k + 1, j)];
                        if k + 1 != nn {
                            p += r * h[idx(k + 2, j)];
                            h[idx(k + 2, j)] -= p * z;
                        }
                        h[idx(k + 1, j)] -= p * y;
                        h[idx(k, j)] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * h[idx(i, k)] + y * h[idx(i, k + 1)];
                        if k + 1 != nn {
                            p += z * h[idx(i, k + 2)];
                            h[idx(i, k + 2)] -= p * r;
                        }
                        h[idx(i, k + 1)] -= p * q;
                        h[idx(i, k)] -= p;
                    }
                }
                k += 1;
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok(w)
}

/// Inverse iteration for the eigenvector of `lambda`, normalized so that its
/// largest component is real and equal to one.
fn inverse_iteration(a: &[f64], n: usize, lambda: Complex64) -> Vec<Complex64> {
    let scale = 1.0 + lambda.norm();
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-11 * scale);
    let mut lu: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for i in 0..n {
        lu[i * n + i] -= shift;
    }
    let piv = lu_factor(&mut lu, n);
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..4 {
        lu_solve(&lu, &piv, n, &mut v);
        normalize(&mut v);
    }
    v
}

fn normalize(v: &mut [Complex64]) {
    let pivot = v
        .iter()
        .copied()
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() > 0.0 {
        for z in v.iter_mut() {
            *z /= pivot;
        }
    }
}

fn lu_factor(a: &mut [Complex64], n: usize) -> Vec<usize> {
    let mut piv: Vec<usize> = (0..n).collect();
    let tiny = f64::EPSILON * 1e-3;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
            .unwrap_or(k);
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            piv.swap(k, p);
        }
        if a[k * n + k].norm() == 0.0 {
            a[k * n + k] = Complex64::new(tiny, 0.0);
        }
        let d = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / d;
            a[i * n + k] = f;
            for j in k + 1..n {
                let u = a[k * n + j];
                a[i * n + j] -= f * u;
            }
        }
    }
    piv
}

fn lu_solve(lu: &[Complex64], piv: &[usize], n: usize, b: &mut [Complex64]) {
    let permuted: Vec<Complex64> = piv.iter().map(|&p| b[p]).collect();
    b.copy_from_slice(&permuted);
    for i in 0..n {
        for j in 0..i {
            let l = lu[i * n + j];
            b[i] -= l * b[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let u = lu[i * n + j];
            b[i] -= u * b[j];
        }
        b[i] /= lu[i * n + i];
    }
}

fn relative_residual(a: &[f64], n: usize, lambda: Complex64, v: &[Complex64]) -> f64 {
    let mut num = 0.0;
    for i in 0..n {
        let tv: Complex64 = (0..n).map(|j| v[j] * a[i * n + j]).sum();
        num += (tv - lambda * v[i]).norm_sqr();
    }
    let den: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    (num / den).sqrt()
}
