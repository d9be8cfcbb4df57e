//! Direct-summation reference implementations.
//!
//! Each estimator here spells out its defining sums with explicit pair
//! loops and pointwise KDE evaluation, trading all speed for obviousness.
//! They exist to cross-check the optimized implementations (`validate`
//! subcommand and the equivalence test suite); the two sides must agree to
//! within accumulated rounding on any input.

use crate::density::check_alpha;
use crate::estimators::{c1, c2, split_set, EstimatorConfig, EstimatorKind};
use crate::fourier::{phi, FrequencySet};
use crate::functional::{b_matrix, BMatrix, PsiFunction};
use crate::kde::TruncatedKde;
use crate::point::PointSet;
use crate::quadrature::integrate;
use crate::{Error, Result};
use num_complex::Complex64;

/// `(1/n_y) Σ_j Σ_k [(1/n_x) Σ_i conj(φ_k(X_i))] φ_k(Y_j) ψ(Y_j)`,
/// written out loop by loop.
pub fn naive_bilinear_functional(
    x: &PointSet,
    y: &PointSet,
    psi: &PsiFunction,
    m: &FrequencySet,
) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("bilinear reference needs both sample sets"));
    }
    let nx = x.len() as f64;
    let ny = y.len() as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for yj in y.iter() {
        let psi_j = psi.evaluate(yj);
        for k in m.iter() {
            let mut coeff = Complex64::new(0.0, 0.0);
            for xi in x.iter() {
                coeff += phi(k, xi).conj();
            }
            coeff /= nx;
            total += coeff * phi(k, yj) * psi_j;
        }
    }
    Ok((total / ny).re)
}

/// The quadratic projection estimator over ordered pairs i ≠ j, written out
/// loop by loop (the per-sample basis table is hoisted; the pair structure
/// is not).
pub fn naive_quadratic_functional(
    x: &PointSet,
    psi: &PsiFunction,
    m: &FrequencySet,
    b: &BMatrix,
) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::domain("quadratic reference needs at least 2 samples"));
    }
    let mlen = m.len();
    let mut table = vec![Complex64::new(0.0, 0.0); n * mlen];
    for (i, xi) in x.iter().enumerate() {
        for (ki, k) in m.iter().enumerate() {
            table[i * mlen + ki] = phi(k, xi);
        }
    }
    let psi_vals: Vec<f64> = x.iter().map(|xi| psi.evaluate(xi)).collect();

    let mut t1 = Complex64::new(0.0, 0.0);
    for ki in 0..mlen {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                t1 += table[i * mlen + ki].conj() * table[j * mlen + ki] * psi_vals[j];
            }
        }
    }
    let mut t2 = Complex64::new(0.0, 0.0);
    for ki in 0..mlen {
        for kj in 0..mlen {
            let bkk = b.get(ki, kj);
            let mut pairs = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    pairs += table[i * mlen + ki].conj() * table[j * mlen + kj].conj();
                }
            }
            t2 += bkk * pairs;
        }
    }
    let denom = (n * (n - 1)) as f64;
    Ok(((2.0 * t1 - t2) / denom).re)
}

fn plugin_by_pointwise_integration(
    p_hat: &TruncatedKde,
    q_hat: &TruncatedKde,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    integrate(
        |t| p_hat.evaluate_point(t).powf(cfg.alpha) * q_hat.evaluate_point(t).powf(cfg.beta),
        &cfg.grid,
    )
}

/// Plug-in estimator via pointwise KDE queries at every grid node.
pub fn naive_t_plugin(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<f64> {
    let p_hat = cfg.fit_truncated(x.clone())?;
    let q_hat = cfg.fit_truncated(y.clone())?;
    plugin_by_pointwise_integration(&p_hat, &q_hat, cfg)
}

/// First-order corrected estimator, assembled term by term.
pub fn naive_t_linear(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<f64> {
    let (x1, x2) = split_set(x);
    let (y1, y2) = split_set(y);
    let p_hat = cfg.fit_truncated(x1)?;
    let q_hat = cfg.fit_truncated(y1)?;
    let (alpha, beta) = (cfg.alpha, cfg.beta);

    let mut value = 0.0;
    let c1v = c1(alpha, beta);
    if c1v != 0.0 || cfg.force_plugin_term {
        value += c1v * plugin_by_pointwise_integration(&p_hat, &q_hat, cfg)?;
    }
    let mut sum_p = 0.0;
    for xi in x2.iter() {
        sum_p += alpha * p_hat.evaluate_point(xi).powf(alpha - 1.0)
            * q_hat.evaluate_point(xi).powf(beta);
    }
    value += sum_p / x2.len() as f64;
    let mut sum_q = 0.0;
    for yj in y2.iter() {
        sum_q += beta * p_hat.evaluate_point(yj).powf(alpha)
            * q_hat.evaluate_point(yj).powf(beta - 1.0);
    }
    value += sum_q / y2.len() as f64;
    Ok(value)
}

/// Second-order corrected estimator, assembled term by term with naive sums.
pub fn naive_t_quadratic(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<f64> {
    let (x1, x2) = split_set(x);
    let (y1, y2) = split_set(y);
    let p_hat = cfg.fit_truncated(x1)?;
    let q_hat = cfg.fit_truncated(y1)?;
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let lattice = cfg.frequency_lattice(x2.len().min(y2.len()))?;

    let mut value = 0.0;
    let c2v = c2(alpha, beta);
    if c2v != 0.0 || cfg.force_plugin_term {
        value += c2v * plugin_by_pointwise_integration(&p_hat, &q_hat, cfg)?;
    }

    let lin = 2.0 - alpha - beta;
    let mut sum_p = 0.0;
    for xi in x2.iter() {
        sum_p += alpha * lin * p_hat.evaluate_point(xi).powf(alpha - 1.0)
            * q_hat.evaluate_point(xi).powf(beta);
    }
    value += sum_p / x2.len() as f64;
    let mut sum_q = 0.0;
    for yj in y2.iter() {
        sum_q += beta * lin * p_hat.evaluate_point(yj).powf(alpha)
            * q_hat.evaluate_point(yj).powf(beta - 1.0);
    }
    value += sum_q / y2.len() as f64;

    let coef_p = 0.5 * alpha * (alpha - 1.0);
    if coef_p != 0.0 {
        let p2 = p_hat.clone();
        let q2 = q_hat.clone();
        let bound = power_bound(&p_hat, alpha - 2.0) * power_bound(&q_hat, beta) * coef_p.abs();
        let psi_p = PsiFunction::new(bound, move |t: &[f64]| {
            coef_p * p2.evaluate_point(t).powf(alpha - 2.0) * q2.evaluate_point(t).powf(beta)
        });
        let b_p = b_matrix(&psi_p, &lattice, &cfg.grid)?;
        value += naive_quadratic_functional(&x2, &psi_p, &lattice, &b_p)?;
    }
    let coef_q = 0.5 * beta * (beta - 1.0);
    if coef_q != 0.0 {
        let p2 = p_hat.clone();
        let q2 = q_hat.clone();
        let bound = power_bound(&p_hat, alpha) * power_bound(&q_hat, beta - 2.0) * coef_q.abs();
        let psi_q = PsiFunction::new(bound, move |t: &[f64]| {
            coef_q * p2.evaluate_point(t).powf(alpha) * q2.evaluate_point(t).powf(beta - 2.0)
        });
        let b_q = b_matrix(&psi_q, &lattice, &cfg.grid)?;
        value += naive_quadratic_functional(&y2, &psi_q, &lattice, &b_q)?;
    }
    let coef_pq = alpha * beta;
    if coef_pq != 0.0 {
        let p2 = p_hat.clone();
        let q2 = q_hat.clone();
        let bound =
            power_bound(&p_hat, alpha - 1.0) * power_bound(&q_hat, beta - 1.0) * coef_pq.abs();
        let psi_pq = PsiFunction::new(bound, move |t: &[f64]| {
            coef_pq * p2.evaluate_point(t).powf(alpha - 1.0)
                * q2.evaluate_point(t).powf(beta - 1.0)
        });
        value += naive_bilinear_functional(&x2, &y2, &psi_pq, &lattice)?;
    }
    Ok(value)
}

fn power_bound(kde: &TruncatedKde, e: f64) -> f64 {
    let lo = crate::density::Density::lower_bound(kde);
    let hi = crate::density::Density::upper_bound(kde);
    lo.powf(e).max(hi.powf(e))
}

/// L2 estimator assembly from the naive sums (analytic b-matrix for ψ ≡ 1).
pub fn naive_l2_squared(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<f64> {
    let lattice = cfg.frequency_lattice(x.len().min(y.len()))?;
    let b = BMatrix::for_constant_psi(&lattice, 1.0);
    let one = PsiFunction::constant(1.0);
    let two = PsiFunction::constant(2.0);
    let theta_p = naive_quadratic_functional(x, &one, &lattice, &b)?;
    let theta_q = naive_quadratic_functional(y, &one, &lattice, &b)?;
    let theta_pq = naive_bilinear_functional(x, y, &two, &lattice)?;
    Ok(theta_p + theta_q - theta_pq)
}

pub fn naive_t_estimate(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<f64> {
    match cfg.kind {
        EstimatorKind::Plugin => naive_t_plugin(x, y, cfg),
        EstimatorKind::Linear => naive_t_linear(x, y, cfg),
        EstimatorKind::Quadratic => naive_t_quadratic(x, y, cfg),
    }
}

pub fn naive_renyi(x: &PointSet, y: &PointSet, alpha: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_alpha(alpha)?;
    let mut c = cfg.clone();
    c.alpha = alpha;
    c.beta = 1.0 - alpha;
    let t = naive_t_estimate(x, y, &c)?;
    if t <= 0.0 {
        return Err(Error::NonPositiveEstimate(t));
    }
    Ok(t.ln() / (alpha - 1.0))
}

pub fn naive_tsallis(x: &PointSet, y: &PointSet, alpha: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_alpha(alpha)?;
    let mut c = cfg.clone();
    c.alpha = alpha;
    c.beta = 1.0 - alpha;
    let t = naive_t_estimate(x, y, &c)?;
    Ok((t - 1.0) / (alpha - 1.0))
}

/// `|a - b| ≤ tol · (1 + max(|a|, |b|))`.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{sample, TrigDensity, TrigTerm, UniformDensity};
    use crate::functional::{bilinear_functional, quadratic_functional};
    use crate::quadrature::GridSpec;
    use std::f64::consts::PI;

    fn small_cfg(alpha: f64, beta: f64, kind: EstimatorKind, dim: usize) -> EstimatorConfig {
        let mut cfg = EstimatorConfig::new(alpha, beta, 2.0, dim, 0.4, 1.6).unwrap();
        cfg.grid = GridSpec::new(dim, if dim == 1 { 128 } else { 40 }).unwrap();
        cfg.kind = kind;
        cfg
    }

    #[test]
    fn test_bilinear_matches_reference() {
        let d = TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.4, 1, 0.0)]).unwrap();
        let x = sample(&d, 20, 1).unwrap();
        let y = sample(&d, 20, 2).unwrap();
        let m = FrequencySet::with_half_width(1, 1).unwrap();
        let psi = PsiFunction::new(2.0, |t: &[f64]| 1.0 + (2.0 * PI * t[0]).cos());
        let fast = bilinear_functional(&x, &y, &psi, &m).unwrap().value;
        let slow = naive_bilinear_functional(&x, &y, &psi, &m).unwrap();
        assert!((fast - slow).abs() < 1e-12, "fast {fast} slow {slow}");
    }

    #[test]
    fn test_quadratic_matches_reference() {
        let d = TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.4, 1, 0.0)]).unwrap();
        let x = sample(&d, 20, 3).unwrap();
        let m = FrequencySet::with_half_width(1, 1).unwrap();
        let grid = GridSpec::new(1, 128).unwrap();
        let psi = PsiFunction::new(2.0, |t: &[f64]| 1.0 + (2.0 * PI * t[0]).sin());
        let b = b_matrix(&psi, &m, &grid).unwrap();
        let fast = quadratic_functional(&x, &psi, &m, &b).unwrap().value;
        let slow = naive_quadratic_functional(&x, &psi, &m, &b).unwrap();
        assert!((fast - slow).abs() < 1e-12, "fast {fast} slow {slow}");
    }

    #[test]
    fn test_l2_assembly_matches_reference() {
        let p = TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.4, 1, 0.0)]).unwrap();
        let q = UniformDensity::new(1);
        let x = sample(&p, 20, 4).unwrap();
        let y = sample(&q, 20, 5).unwrap();
        let cfg = small_cfg(1.0, 1.0, EstimatorKind::Quadratic, 1);
        let fast = crate::estimators::l2_squared(&x, &y, &cfg).unwrap().value;
        let slow = naive_l2_squared(&x, &y, &cfg).unwrap();
        assert!((fast - slow).abs() < 1e-12, "fast {fast} slow {slow}");
    }

    #[test]
    fn test_divergence_assemblies_match_reference() {
        let p = TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.5, 1, 0.0)]).unwrap();
        let q = TrigDensity::new(1, vec![TrigTerm::isotropic(1, 0.2, 2, 0.0)]).unwrap();
        let x = sample(&p, 24, 6).unwrap();
        let y = sample(&q, 24, 7).unwrap();
        for kind in [
            EstimatorKind::Plugin,
            EstimatorKind::Linear,
            EstimatorKind::Quadratic,
        ] {
            let cfg = small_cfg(0.75, 0.25, kind, 1);
            let fast = crate::estimators::t_estimate(&x, &y, &cfg).unwrap().value;
            let slow = naive_t_estimate(&x, &y, &cfg).unwrap();
            assert!(
                close_rel(fast, slow, 1e-10),
                "{kind:?}: fast {fast} slow {slow}"
            );
        }
    }
}
