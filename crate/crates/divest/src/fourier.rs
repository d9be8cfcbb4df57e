//! Complex-exponential basis on the unit cube, empirical Fourier
//! coefficients, and the frequency-lattice selection rule.
//!
//! Basis functions are `φ_k(x) = e^{2πi k·x}` for integer frequency vectors
//! `k`. A [`FrequencySet`] is the cubic lattice `{k : |k_j| ≤ w}`; its size
//! trades the bias of the projection estimators against their variance.
//!
//! Convention used across the crate: empirical coefficients conjugate the
//! basis, `â_k = (1/n) Σ_i conj(φ_k(X_i))`, so that `Σ_k â_k φ_k` is the
//! reconstruction of the sampled density.

use crate::point::PointSet;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Guard on lattice size; larger lattices signal a misconfigured rule.
const LATTICE_GUARD: usize = 1_000_000;

/// The cubic integer lattice `{k ∈ Z^d : |k_j| ≤ half_width}`.
///
/// Members are stored in a fixed odometer order (last axis fastest), closed
/// under negation and containing the zero frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencySet {
    dim: usize,
    half_width: u32,
    /// Flat row-major member storage, `len() * dim` entries.
    members: Vec<i64>,
}

impl FrequencySet {
    pub fn with_half_width(dim: usize, half_width: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("lattice dimension must be at least 1"));
        }
        let side = 2 * half_width as usize + 1;
        let count = side.checked_pow(dim as u32).unwrap_or(usize::MAX);
        if count > LATTICE_GUARD {
            return Err(Error::LatticeTooLarge(count, LATTICE_GUARD));
        }
        let w = half_width as i64;
        let mut members = Vec::with_capacity(count * dim);
        let mut k = vec![-w; dim];
        loop {
            members.extend_from_slice(&k);
            let mut c = dim;
            loop {
                if c == 0 {
                    break;
                }
                c -= 1;
                k[c] += 1;
                if k[c] <= w {
                    break;
                }
                k[c] = -w;
                if c == 0 {
                    c = usize::MAX;
                    break;
                }
            }
            if c == usize::MAX {
                break;
            }
        }
        Ok(FrequencySet {
            dim,
            half_width,
            members,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> u32 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.members.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &[i64] {
        &self.members[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.members.chunks_exact(self.dim)
    }

    /// Index of a member frequency in the odometer order.
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let w = self.half_width as i64;
        let side = 2 * w + 1;
        let mut idx = 0usize;
        for &kj in k {
            if kj.abs() > w {
                return None;
            }
            idx = idx * side as usize + (kj + w) as usize;
        }
        Some(idx)
    }
}

/// Lattice sizing rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencyRule {
    /// `m = c_m · n^{2d/(4s'+d)}`: the rate with a free constant.
    Scaled { c_m: f64 },
    /// The closed-form constant from the bias/variance tradeoff:
    /// `m = (18 (d/s') 2^{4s'/d} n^{-2})^{-d/(4s'+d)}`. Same rate as
    /// [`FrequencyRule::Scaled`]; the constant is tuned for worst-case
    /// analysis rather than finite-sample behavior.
    AnalyticConstant,
}

/// Choose the frequency lattice for `n` samples at working smoothness `s'`:
/// target size `m`, half-width `round((m^{1/d} - 1)/2)` floored at zero.
pub fn frequency_set_with_rule(
    n: usize,
    s_prime: f64,
    d: usize,
    rule: FrequencyRule,
) -> Result<FrequencySet> {
    if n < 2 {
        return Err(Error::domain("lattice rule needs n >= 2"));
    }
    if !(s_prime > 0.0) || d == 0 {
        return Err(Error::domain(format!(
            "lattice rule needs s' > 0 and d >= 1 (got s'={s_prime}, d={d})"
        )));
    }
    let df = d as f64;
    let nf = n as f64;
    let m_target = match rule {
        FrequencyRule::Scaled { c_m } => {
            if !(c_m > 0.0) {
                return Err(Error::domain(format!("c_m must be positive, got {c_m}")));
            }
            c_m * nf.powf(2.0 * df / (4.0 * s_prime + df))
        }
        FrequencyRule::AnalyticConstant => {
            let base = 18.0 * (df / s_prime) * 2f64.powf(4.0 * s_prime / df) * nf.powi(-2);
            base.powf(-df / (4.0 * s_prime + df))
        }
    };
    let side = m_target.max(0.0).powf(1.0 / df);
    let w = (((side - 1.0) / 2.0).round()).max(0.0) as u32;
    FrequencySet::with_half_width(d, w)
}

/// Convenience wrapper: the scaled rule with constant `c_m`.
pub fn frequency_set(n: usize, s_prime: f64, d: usize, c_m: f64) -> Result<FrequencySet> {
    frequency_set_with_rule(n, s_prime, d, FrequencyRule::Scaled { c_m })
}

/// `φ_k(x) = e^{2πi k·x}`.
#[inline]
pub fn phi(k: &[i64], x: &[f64]) -> Complex64 {
    debug_assert_eq!(k.len(), x.len());
    let mut dot = 0.0;
    for (kj, xj) in k.iter().zip(x) {
        dot += *kj as f64 * xj;
    }
    let (s, c) = (TAU * dot).sin_cos();
    Complex64::new(c, s)
}

/// Empirical Fourier coefficients over a lattice, index-aligned with the
/// lattice's member order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    freqs: FrequencySet,
    values: Vec<Complex64>,
}

impl CoefficientVector {
    pub fn frequencies(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, k: &[i64]) -> Option<Complex64> {
        self.freqs.index_of(k).map(|i| self.values[i])
    }

    /// Reconstruction `Σ_k â_k φ_k(x)`.
    pub fn reconstruct(&self, x: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, k) in self.freqs.iter().enumerate() {
            acc += self.values[i] * phi(k, x);
        }
        acc
    }
}

/// `â_k = (1/n) Σ_i conj(φ_k(X_i))`.
///
/// The zero coefficient is exactly one. Each negation pair is summed once
/// and mirrored, so `â_{-k} = conj(â_k)` holds bit-for-bit.
pub fn empirical_coefficients(samples: &PointSet, m: &FrequencySet) -> Result<CoefficientVector> {
    if samples.is_empty() {
        return Err(Error::Empty("empirical coefficients need samples"));
    }
    if samples.dim() != m.dim() {
        return Err(Error::DimensionMismatch(samples.dim(), m.dim()));
    }
    let n = samples.len() as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); m.len()];
    // pass 1: zero frequency and canonical representatives (first nonzero
    // component positive)
    for (i, k) in m.iter().enumerate() {
        match first_nonzero_sign(k) {
            0 => values[i] = Complex64::new(1.0, 0.0),
            1 => {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in samples.iter() {
                    acc += phi(k, x).conj();
                }
                values[i] = acc / n;
            }
            _ => {}
        }
    }
    // pass 2: mirror onto the negated representatives
    let mut neg = vec![0i64; m.dim()];
    for (i, k) in m.iter().enumerate() {
        if first_nonzero_sign(k) < 0 {
            for (t, kj) in neg.iter_mut().zip(k) {
                *t = -kj;
            }
            let j = m
                .index_of(&neg)
                .expect("negation stays inside a symmetric lattice");
            values[i] = values[j].conj();
        }
    }
    Ok(CoefficientVector {
        freqs: m.clone(),
        values,
    })
}

fn first_nonzero_sign(k: &[i64]) -> i8 {
    for &kj in k {
        if kj > 0 {
            return 1;
        }
        if kj < 0 {
            return -1;
        }
    }
    0
}
