//! Synthetic densities on the unit cube with samplers and ground-truth
//! functionals.
//!
//! The trigonometric family `1 + Σ_j a_j Π_c cos(2π f_{j,c} x_c + φ_{j,c})`
//! with integer frequencies integrates to one exactly, is infinitely smooth
//! and periodic, and has explicit bounds `1 ± Σ|a_j|`. That makes it the
//! workhorse for convergence experiments: the truth is computable by
//! quadrature (often in closed form) at any smoothness profile we like.

use crate::point::PointSet;
use crate::quadrature::{integrate, GridSpec};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// An evaluable probability density on [0,1]^d with known bounds.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
    /// Known lower bound κ_l with 0 < κ_l ≤ density everywhere.
    fn lower_bound(&self) -> f64;
    /// Known upper bound κ_u with density ≤ κ_u < ∞ everywhere.
    fn upper_bound(&self) -> f64;
}

/// The uniform density on [0,1]^d.
#[derive(Debug, Clone)]
pub struct UniformDensity {
    dim: usize,
}

impl UniformDensity {
    pub fn new(dim: usize) -> Self {
        UniformDensity { dim }
    }
}

impl Density for UniformDensity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, _x: &[f64]) -> f64 {
        1.0
    }
    fn lower_bound(&self) -> f64 {
        1.0
    }
    fn upper_bound(&self) -> f64 {
        1.0
    }
}

/// One term of a [`TrigDensity`]: `amplitude · Π_c cos(2π f_c x_c + φ_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: Vec<u32>,
    pub phase: Vec<f64>,
}

impl TrigTerm {
    /// A term with the same frequency and phase on every axis.
    pub fn isotropic(dim: usize, amplitude: f64, frequency: u32, phase: f64) -> Self {
        TrigTerm {
            amplitude,
            frequency: vec![frequency; dim],
            phase: vec![phase; dim],
        }
    }
}

/// `1 + Σ_j a_j Π_c cos(2π f_{j,c} x_c + φ_{j,c})` on [0,1]^d.
///
/// Construction enforces: integer frequencies ≥ 1 (so every term integrates
/// to zero and the density to one), phases in {0, π/2}, and Σ|a_j| < 1 (so
/// the density stays positive). Bounds are the conservative `1 ± Σ|a_j|`.
#[derive(Debug, Clone)]
pub struct TrigDensity {
    dim: usize,
    terms: Vec<TrigTerm>,
    kappa_l: f64,
    kappa_u: f64,
}

const PHASE_TOL: f64 = 1e-12;

impl TrigDensity {
    pub fn new(dim: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("density dimension must be at least 1"));
        }
        let mut amp_sum = 0.0;
        for (j, t) in terms.iter().enumerate() {
            if t.frequency.len() != dim || t.phase.len() != dim {
                return Err(Error::DimensionMismatch(t.frequency.len().max(t.phase.len()), dim));
            }
            if t.frequency.iter().any(|&f| f == 0) {
                return Err(Error::domain(format!(
                    "term {j}: frequencies must be positive integers"
                )));
            }
            for &p in &t.phase {
                let ok = p.abs() < PHASE_TOL || (p - PI / 2.0).abs() < PHASE_TOL;
                if !ok {
                    return Err(Error::domain(format!(
                        "term {j}: phase {p} not in {{0, π/2}}"
                    )));
                }
            }
            if !t.amplitude.is_finite() {
                return Err(Error::NonFinite(format!("term {j} amplitude")));
            }
            amp_sum += t.amplitude.abs();
        }
        if amp_sum >= 1.0 {
            return Err(Error::domain(format!(
                "amplitudes sum to {amp_sum} >= 1; density would not stay positive"
            )));
        }
        let density = TrigDensity {
            dim,
            terms,
            kappa_l: 1.0 - amp_sum,
            kappa_u: 1.0 + amp_sum,
        };
        // scan for positivity against the stated bound
        let scan = scan_grid(dim)?;
        let mut min_seen = f64::INFINITY;
        scan.for_each_node(|_, x| {
            let v = density.evaluate(x);
            if v < min_seen {
                min_seen = v;
            }
        });
        if min_seen < density.kappa_l - 1e-9 || min_seen <= 0.0 {
            return Err(Error::domain(format!(
                "grid scan found density value {min_seen} below the bound {}",
                density.kappa_l
            )));
        }
        Ok(density)
    }

    /// A family whose effective smoothness is controlled by the decay of its
    /// amplitudes: term k sits at frequency k with amplitude
    /// `amplitude · k^{-(s+0.5)}`, all cosine phases.
    pub fn smooth_family(dim: usize, s: f64, amplitude: f64, num_terms: u32) -> Result<Self> {
        Self::smooth_family_with_phase(dim, s, amplitude, num_terms, 0.0)
    }

    /// As [`TrigDensity::smooth_family`] with one phase (0 or π/2) applied
    /// to every term; π/2 turns the cosines into sines, giving a family
    /// orthogonal in shape to the cosine one.
    pub fn smooth_family_with_phase(
        dim: usize,
        s: f64,
        amplitude: f64,
        num_terms: u32,
        phase: f64,
    ) -> Result<Self> {
        if num_terms == 0 {
            return Err(Error::Empty("smooth family needs at least one term"));
        }
        let terms = (1..=num_terms)
            .map(|k| TrigTerm::isotropic(dim, amplitude * (k as f64).powf(-(s + 0.5)), k, phase))
            .collect();
        TrigDensity::new(dim, terms)
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }
}

fn scan_grid(dim: usize) -> Result<GridSpec> {
    match dim {
        1 => GridSpec::new(1, 4096),
        2 => GridSpec::new(2, 128),
        3 => GridSpec::new(3, 48),
        _ => GridSpec::new(dim, 12),
    }
}

impl Density for TrigDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for t in &self.terms {
            let mut prod = t.amplitude;
            for c in 0..self.dim {
                prod *= (2.0 * PI * t.frequency[c] as f64 * x[c] + t.phase[c]).cos();
            }
            v += prod;
        }
        v
    }

    fn lower_bound(&self) -> f64 {
        self.kappa_l
    }

    fn upper_bound(&self) -> f64 {
        self.kappa_u
    }
}

/// Upper bound on rejection rounds per accepted point before giving up;
/// only reachable when the stated density bounds are wrong.
const MAX_REJECTIONS: u32 = 100_000;

/// Draw `n` i.i.d. points by rejection sampling against the uniform proposal
/// with envelope constant κ_u. Deterministic for a fixed seed.
pub fn sample(density: &dyn Density, n: usize, seed: u64) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::Empty("sample count must be at least 1"));
    }
    let kappa_u = density.upper_bound();
    let kappa_l = density.lower_bound();
    if !(kappa_u.is_finite() && kappa_u > 0.0 && kappa_l > 0.0) {
        return Err(Error::domain(format!(
            "density bounds ({kappa_l}, {kappa_u}) unusable for rejection sampling"
        )));
    }
    let d = density.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = PointSet::with_capacity(d, n);
    let mut candidate = vec![0.0; d];
    for _ in 0..n {
        let mut accepted = false;
        for _ in 0..MAX_REJECTIONS {
            for c in candidate.iter_mut() {
                *c = rng.gen::<f64>();
            }
            let p = density.evaluate(&candidate);
            if p > kappa_u * (1.0 + 1e-12) {
                return Err(Error::domain(format!(
                    "density value {p} exceeds its stated upper bound {kappa_u}; sampler would be biased"
                )));
            }
            let u: f64 = rng.gen::<f64>();
            if u * kappa_u < p {
                out.push(&candidate)?;
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::domain(
                "rejection sampler exceeded the retry limit; check the density bounds",
            ));
        }
    }
    Ok(out)
}

/// Ground-truth `T(p,q) = ∫ p^α q^β` by grid quadrature.
pub fn true_t(
    p: &dyn Density,
    q: &dyn Density,
    alpha: f64,
    beta: f64,
    grid: &GridSpec,
) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    if p.dim() != grid.dim() {
        return Err(Error::DimensionMismatch(p.dim(), grid.dim()));
    }
    integrate(|x| p.evaluate(x).powf(alpha) * q.evaluate(x).powf(beta), grid)
}

/// Which divergence to compute or estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceKind {
    /// ∫ (p - q)²
    L2,
    /// log(∫ p^α q^{1-α}) / (α - 1)
    Renyi(f64),
    /// (∫ p^α q^{1-α} - 1) / (α - 1)
    Tsallis(f64),
}

/// Oracle divergence value by grid quadrature.
pub fn true_divergence(
    p: &dyn Density,
    q: &dyn Density,
    kind: DivergenceKind,
    grid: &GridSpec,
) -> Result<f64> {
    match kind {
        DivergenceKind::L2 => {
            if p.dim() != q.dim() || p.dim() != grid.dim() {
                return Err(Error::DimensionMismatch(p.dim(), grid.dim()));
            }
            integrate(
                |x| {
                    let diff = p.evaluate(x) - q.evaluate(x);
                    diff * diff
                },
                grid,
            )
        }
        DivergenceKind::Renyi(alpha) => {
            check_alpha(alpha)?;
            let t = true_t(p, q, alpha, 1.0 - alpha, grid)?;
            if t <= 0.0 {
                return Err(Error::domain(format!(
                    "∫ p^α q^(1-α) = {t} is not positive; log undefined"
                )));
            }
            Ok(t.ln() / (alpha - 1.0))
        }
        DivergenceKind::Tsallis(alpha) => {
            check_alpha(alpha)?;
            let t = true_t(p, q, alpha, 1.0 - alpha, grid)?;
            Ok((t - 1.0) / (alpha - 1.0))
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::NonFinite("divergence order alpha".into()));
    }
    if (alpha - 1.0).abs() < 1e-9 {
        return Err(Error::domain(
            "divergence order alpha must not equal 1 (the KL limit is out of scope)",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trig1(amp: f64, freq: u32) -> TrigDensity {
        TrigDensity::new(1, vec![TrigTerm::isotropic(1, amp, freq, 0.0)]).unwrap()
    }

    #[test]
    fn test_uniform_sample_mean() {
        let u = UniformDensity::new(1);
        let pts = sample(&u, 100_000, 7).unwrap();
        let mean: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn test_zero_samples_rejected() {
        let u = UniformDensity::new(1);
        assert!(sample(&u, 0, 1).is_err());
    }

    #[test]
    fn test_sampler_deterministic() {
        let d = trig1(0.5, 1);
        let a = sample(&d, 500, 42).unwrap();
        let b = sample(&d, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = sample(&d, 500, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn test_sampler_matches_density_histogram() {
        let d = trig1(0.5, 1);
        let pts = sample(&d, 100_000, 11).unwrap();
        let bins = 20;
        let mut counts = vec![0usize; bins];
        for p in pts.iter() {
            let b = ((p[0] * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        // exact bin mass: ∫_a^b (1 + 0.5 cos 2πx) dx
        let mut sup = 0.0f64;
        for b in 0..bins {
            let (lo, hi) = (b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
            let mass = (hi - lo)
                + 0.5 * ((2.0 * PI * hi).sin() - (2.0 * PI * lo).sin()) / (2.0 * PI);
            let emp = counts[b] as f64 / pts.len() as f64;
            // compare densities (mass / width)
            sup = sup.max(((emp - mass) * bins as f64).abs());
        }
        assert!(sup < 0.05, "sup bin discrepancy {sup}");
    }

    #[test]
    fn test_trig_density_integrates_to_one() {
        let grid = GridSpec::default_for_dim(1).unwrap();
        for d in [
            trig1(0.5, 1),
            trig1(0.3, 4),
            TrigDensity::smooth_family(1, 2.0, 0.6, 3).unwrap(),
        ] {
            let total = integrate(|x| d.evaluate(x), &grid).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "integral {total}");
        }
        let grid2 = GridSpec::default_for_dim(2).unwrap();
        let d2 = TrigDensity::smooth_family(2, 2.0, 0.4, 2).unwrap();
        let total = integrate(|x| d2.evaluate(x), &grid2).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "integral {total}");
    }

    #[test]
    fn test_construction_guards() {
        // amplitude sum >= 1
        assert!(TrigDensity::new(1, vec![TrigTerm::isotropic(1, 1.0, 1, 0.0)]).is_err());
        // zero frequency
        assert!(TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.5, 0, 0.0)]).is_err());
        // phase outside {0, π/2}
        assert!(TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.5, 1, 0.3)]).is_err());
        // π/2 phase accepted
        assert!(TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.5, 1, PI / 2.0)]).is_ok());
    }

    #[test]
    fn test_true_t_uniform_pair_is_exactly_one() {
        let u = UniformDensity::new(1);
        let grid = GridSpec::new(1, 100).unwrap();
        for (a, b) in [(0.5, 0.5), (2.0, -1.0), (0.0, 0.0)] {
            assert_eq!(true_t(&u, &u, a, b, &grid).unwrap(), 1.0);
        }
    }

    #[test]
    fn test_true_t_quadratic_closed_form() {
        // ∫ (1 + a cos 2πx)² dx = 1 + a²/2
        let a = 0.4;
        let p = trig1(a, 1);
        let u = UniformDensity::new(1);
        let grid = GridSpec::default_for_dim(1).unwrap();
        let t = true_t(&p, &u, 2.0, 0.0, &grid).unwrap();
        assert!((t - (1.0 + a * a / 2.0)).abs() < 1e-6, "got {t}");
    }

    #[test]
    fn test_true_t_bilinear_closed_form() {
        // ∫ (1 + a cos)(1 + b cos) = 1 + ab/2
        let (a, b) = (0.5, 0.25);
        let p = trig1(a, 1);
        let q = trig1(b, 1);
        let grid = GridSpec::default_for_dim(1).unwrap();
        let t = true_t(&p, &q, 1.0, 1.0, &grid).unwrap();
        assert!((t - (1.0 + a * b / 2.0)).abs() < 1e-6, "got {t}");
    }

    #[test]
    fn test_divergence_of_identical_is_zero() {
        let p = trig1(0.5, 1);
        let grid = GridSpec::default_for_dim(1).unwrap();
        for kind in [
            DivergenceKind::L2,
            DivergenceKind::Renyi(0.5),
            DivergenceKind::Tsallis(0.5),
        ] {
            let v = true_divergence(&p, &p, kind, &grid).unwrap();
            assert!(v.abs() < 1e-9, "{kind:?} gave {v}");
        }
    }

    #[test]
    fn test_l2_closed_form() {
        // ∫ ((1+a cos) - (1+b cos))² = (a-b)²/2
        let (a, b) = (0.4, 0.1);
        let p = trig1(a, 1);
        let q = trig1(b, 1);
        let grid = GridSpec::default_for_dim(1).unwrap();
        let v = true_divergence(&p, &q, DivergenceKind::L2, &grid).unwrap();
        assert!((v - (a - b).powi(2) / 2.0).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn test_renyi_refinement_agreement() {
        let p = trig1(0.5, 1);
        let q = UniformDensity::new(1);
        let coarse = GridSpec::default_for_dim(1).unwrap();
        let fine = GridSpec::new(1, 2 * coarse.points_per_axis()).unwrap();
        let v1 = true_divergence(&p, &q, DivergenceKind::Renyi(0.5), &coarse).unwrap();
        let v2 = true_divergence(&p, &q, DivergenceKind::Renyi(0.5), &fine).unwrap();
        assert!(v1 > 0.0);
        assert!((v1 - v2).abs() < 1e-6, "coarse {v1} vs fine {v2}");
    }

    #[test]
    fn test_divergences_nonnegative_on_family() {
        let grid = GridSpec::default_for_dim(1).unwrap();
        let densities = [trig1(0.5, 1), trig1(0.2, 2), trig1(0.0, 1)];
        for p in &densities {
            for q in &densities {
                for kind in [
                    DivergenceKind::L2,
                    DivergenceKind::Renyi(0.5),
                    DivergenceKind::Tsallis(2.0),
                ] {
                    let v = true_divergence(p, q, kind, &grid).unwrap();
                    assert!(v > -1e-9, "{kind:?} gave {v}");
                }
            }
        }
    }

    #[test]
    fn test_alpha_one_rejected() {
        let p = trig1(0.3, 1);
        let grid = GridSpec::new(1, 64).unwrap();
        assert!(true_divergence(&p, &p, DivergenceKind::Renyi(1.0), &grid).is_err());
    }
}
