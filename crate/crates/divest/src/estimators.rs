//! The assembled estimators of `T(p,q) = ∫ p^α q^β` and the divergence
//! wrappers built on them.
//!
//! Three estimators, by correction order:
//!
//! - [`t_plugin`]: integrate `p̂^α q̂^β` over the grid, KDEs fitted on the
//!   full samples.
//! - [`t_linear`]: data-split first-order correction,
//!   `C₁ T(p̂,q̂) + θ̂₁p + θ̂₁q` with `C₁ = 1-α-β`; the weighted plug-in
//!   term is skipped entirely when `C₁ = 0` (as for Rényi/Tsallis).
//! - [`t_quadratic`]: second-order correction adding the projection
//!   estimators for the quadratic and bilinear expansion terms, with
//!   `C₂ = 1 - 3(α+β)/2 + (α+β)²/2`.
//!
//! Data splitting: the first half of each sample fits the truncated KDEs,
//! the second half feeds every correction sum, so the two are independent.
//! Unequal sample counts are fine; each set splits on its own and each sum
//! normalizes by its own count. (An odd count drops its last point first.)
//!
//! The weight functions fed to the projection estimators are powers of the
//! truncated KDEs, e.g. `ψ_p = ½α(α-1) p̂^{α-2} q̂^β`; truncation keeps every
//! such power bounded, so no per-evaluation clamping happens anywhere.

use crate::density::{check_alpha, Density, UniformDensity};
use crate::fourier::{frequency_set_with_rule, FrequencyRule, FrequencySet};
use crate::functional::{b_matrix_from_values, bilinear_from_values, quadratic_from_values};
use crate::kde::{bandwidth, MirroredKde, TruncatedKde};
use crate::kernels::{legendre_kernel, smoothness_order, KernelD};
use crate::point::PointSet;
use crate::quadrature::{integrate_values, GridSpec};
use crate::{Error, Result};
use std::sync::Arc;

/// Which estimator backs a divergence estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Plugin,
    Linear,
    Quadratic,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::Linear => "linear",
            EstimatorKind::Quadratic => "quadratic",
        }
    }
}

/// All tuning in one place: exponents, assumed smoothness, density bounds,
/// truncation margin, bandwidth/lattice constants, and the quadrature grid.
#[derive(Clone)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Assumed smoothness of both densities.
    pub s: f64,
    pub dim: usize,
    /// Known density bounds.
    pub kappa_l: f64,
    pub kappa_u: f64,
    /// Truncation margin; the KDE window is [κ_l - ε, κ_u + ε].
    pub epsilon: f64,
    /// Bandwidth constant: h = c_h · n^{-1/(2s+d)}.
    pub c_h: f64,
    /// Lattice constant: m = c_m · n^{2d/(4s'+d)}.
    pub c_m: f64,
    /// Working smoothness for the lattice rule (defaults to s - 0.01).
    pub s_prime: f64,
    pub grid: GridSpec,
    pub kind: EstimatorKind,
    /// Use the closed-form lattice constant instead of `c_m`.
    pub analytic_m_constant: bool,
    /// Compute the C-weighted plug-in term even when the constant is zero
    /// (testing hook for the skip-path identity).
    pub force_plugin_term: bool,
    /// Fallback density for truncation; uniform when absent.
    pub fallback: Option<Arc<dyn Density>>,
}

impl EstimatorConfig {
    /// Defaults: ε = 0.1 κ_l, c_h = c_m = 1, s' = s - 0.01, the default grid
    /// for the dimension, linear estimator.
    pub fn new(
        alpha: f64,
        beta: f64,
        s: f64,
        dim: usize,
        kappa_l: f64,
        kappa_u: f64,
    ) -> Result<Self> {
        let cfg = EstimatorConfig {
            alpha,
            beta,
            s,
            dim,
            kappa_l,
            kappa_u,
            epsilon: 0.1 * kappa_l,
            c_h: 1.0,
            c_m: 1.0,
            s_prime: (s - 0.01).max(s * 0.9),
            grid: GridSpec::default_for_dim(dim)?,
            kind: EstimatorKind::Linear,
            analytic_m_constant: false,
            force_plugin_term: false,
            fallback: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::NonFinite("config exponents".into()));
        }
        if !(self.s > 0.0) || !(self.s_prime > 0.0) {
            return Err(Error::domain("config needs s > 0 and s' > 0"));
        }
        if !(self.kappa_l - self.epsilon > 0.0) {
            return Err(Error::domain(format!(
                "config needs κ_l - ε > 0, got {} - {}",
                self.kappa_l, self.epsilon
            )));
        }
        if !(self.kappa_l < self.kappa_u) {
            return Err(Error::domain("config needs κ_l < κ_u"));
        }
        if !(self.c_h > 0.0) || !(self.c_m > 0.0) {
            return Err(Error::domain("config needs c_h > 0 and c_m > 0"));
        }
        if self.grid.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.grid.dim(), self.dim));
        }
        Ok(())
    }

    fn kernel(&self) -> Result<KernelD> {
        KernelD::product_of(legendre_kernel(smoothness_order(self.s)?)?, self.dim)
    }

    fn fallback_density(&self) -> Arc<dyn Density> {
        self.fallback
            .clone()
            .unwrap_or_else(|| Arc::new(UniformDensity::new(self.dim)))
    }

    pub(crate) fn fit_truncated(&self, samples: PointSet) -> Result<TruncatedKde> {
        let h = bandwidth(samples.len(), self.s, self.dim, self.c_h)?;
        let inner = MirroredKde::fit(samples, self.kernel()?, h)?;
        TruncatedKde::new(
            inner,
            self.kappa_l,
            self.kappa_u,
            self.epsilon,
            self.fallback_density(),
        )
    }

    pub(crate) fn frequency_lattice(&self, n: usize) -> Result<FrequencySet> {
        let rule = if self.analytic_m_constant {
            FrequencyRule::AnalyticConstant
        } else {
            FrequencyRule::Scaled { c_m: self.c_m }
        };
        frequency_set_with_rule(n, self.s_prime, self.dim, rule)
    }
}

/// Per-estimate diagnostics: tuning actually used, discarded imaginary mass,
/// and the value of each term that entered the sum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub bandwidth_p: Option<f64>,
    pub bandwidth_q: Option<f64>,
    pub lattice_size: Option<usize>,
    pub imag_residue: f64,
    pub plugin_term: Option<f64>,
    pub linear_terms: Option<[f64; 2]>,
    pub quadratic_terms: Option<[f64; 2]>,
    pub bilinear_term: Option<f64>,
}

/// An estimate with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub diagnostics: Diagnostics,
}

impl Estimate {
    fn checked(value: f64, diagnostics: Diagnostics) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("estimate value {value}")));
        }
        Ok(Estimate { value, diagnostics })
    }
}

/// First-order expansion constant `C₁ = 1 - α - β`.
pub fn c1(alpha: f64, beta: f64) -> f64 {
    1.0 - alpha - beta
}

/// Second-order expansion constant `C₂ = 1 - 3(α+β)/2 + (α+β)²/2`.
pub fn c2(alpha: f64, beta: f64) -> f64 {
    let t = alpha + beta;
    1.0 - 1.5 * t + 0.5 * t * t
}

/// Drop the last point when the count is odd, then split in equal halves:
/// (fitting half, estimation half).
pub(crate) fn split_set(samples: &PointSet) -> (PointSet, PointSet) {
    let n = samples.len() & !1;
    let half = n / 2;
    (samples.take(half), samples.skip(half).take(half))
}

fn validate_inputs(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<()> {
    cfg.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("estimators need both sample sets"));
    }
    if x.dim() != cfg.dim || y.dim() != cfg.dim {
        return Err(Error::DimensionMismatch(x.dim().max(y.dim()), cfg.dim));
    }
    x.validate_unit_cube()?;
    y.validate_unit_cube()?;
    Ok(())
}

/// `∫ p̂^α q̂^β` over the grid, from tabulated KDE fields.
fn plugin_integral(
    p_field: &[f64],
    q_field: &[f64],
    alpha: f64,
    beta: f64,
    grid: &GridSpec,
) -> Result<f64> {
    let vals: Vec<f64> = p_field
        .iter()
        .zip(q_field)
        .map(|(&p, &q)| p.powf(alpha) * q.powf(beta))
        .collect();
    integrate_values(&vals, grid)
}

/// Plug-in estimator: fit on the full samples, integrate on the grid.
pub fn t_plugin(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<Estimate> {
    validate_inputs(x, y, cfg)?;
    let p_hat = cfg.fit_truncated(x.clone())?;
    let q_hat = cfg.fit_truncated(y.clone())?;
    let p_field = p_hat.evaluate_on_grid(&cfg.grid)?;
    let q_field = q_hat.evaluate_on_grid(&cfg.grid)?;
    let value = plugin_integral(&p_field, &q_field, cfg.alpha, cfg.beta, &cfg.grid)?;
    Estimate::checked(
        value,
        Diagnostics {
            bandwidth_p: Some(p_hat.bandwidth_used()),
            bandwidth_q: Some(q_hat.bandwidth_used()),
            plugin_term: Some(value),
            ..Diagnostics::default()
        },
    )
}

/// Mean over `points` of `α_coef · p̂^{ea}(x) q̂^{eb}(x)` given cached KDE
/// evaluations at the points.
fn weighted_power_mean(p_vals: &[f64], q_vals: &[f64], coef: f64, ea: f64, eb: f64) -> f64 {
    let n = p_vals.len() as f64;
    let sum: f64 = p_vals
        .iter()
        .zip(q_vals)
        .map(|(&p, &q)| p.powf(ea) * q.powf(eb))
        .sum();
    coef * (sum / n)
}

fn eval_at(kde: &TruncatedKde, pts: &PointSet) -> Vec<f64> {
    pts.iter().map(|p| kde.evaluate_point(p)).collect()
}

/// First-order corrected estimator with data splitting.
pub fn t_linear(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<Estimate> {
    validate_inputs(x, y, cfg)?;
    if x.len() < 4 || y.len() < 4 {
        return Err(Error::domain(
            "linear estimator needs at least 4 samples per set for data splitting",
        ));
    }
    let (x1, x2) = split_set(x);
    let (y1, y2) = split_set(y);
    let p_hat = cfg.fit_truncated(x1)?;
    let q_hat = cfg.fit_truncated(y1)?;
    let (alpha, beta) = (cfg.alpha, cfg.beta);

    let mut value = 0.0;
    let mut diag = Diagnostics {
        bandwidth_p: Some(p_hat.bandwidth_used()),
        bandwidth_q: Some(q_hat.bandwidth_used()),
        ..Diagnostics::default()
    };

    let c1v = c1(alpha, beta);
    if c1v != 0.0 || cfg.force_plugin_term {
        let p_field = p_hat.evaluate_on_grid(&cfg.grid)?;
        let q_field = q_hat.evaluate_on_grid(&cfg.grid)?;
        let t_pl = plugin_integral(&p_field, &q_field, alpha, beta, &cfg.grid)?;
        value += c1v * t_pl;
        diag.plugin_term = Some(c1v * t_pl);
    }

    let p_on_x2 = eval_at(&p_hat, &x2);
    let q_on_x2 = eval_at(&q_hat, &x2);
    let p_on_y2 = eval_at(&p_hat, &y2);
    let q_on_y2 = eval_at(&q_hat, &y2);

    // θ̂₁p = α · mean p̂^{α-1} q̂^β over the held-out X half,
    // θ̂₁q = β · mean p̂^α q̂^{β-1} over the held-out Y half
    let theta_p = weighted_power_mean(&p_on_x2, &q_on_x2, alpha, alpha - 1.0, beta);
    let theta_q = weighted_power_mean(&p_on_y2, &q_on_y2, beta, alpha, beta - 1.0);
    value += theta_p;
    value += theta_q;
    diag.linear_terms = Some([theta_p, theta_q]);

    Estimate::checked(value, diag)
}

/// Second-order corrected estimator with data splitting.
pub fn t_quadratic(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<Estimate> {
    validate_inputs(x, y, cfg)?;
    if x.len() < 8 || y.len() < 8 {
        return Err(Error::domain(
            "quadratic estimator needs at least 8 samples per set (pair sums over the held-out halves)",
        ));
    }
    let (x1, x2) = split_set(x);
    let (y1, y2) = split_set(y);
    let p_hat = cfg.fit_truncated(x1)?;
    let q_hat = cfg.fit_truncated(y1)?;
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let lattice = cfg.frequency_lattice(x2.len().min(y2.len()))?;

    let mut value = 0.0;
    let mut residue = 0.0f64;
    let mut diag = Diagnostics {
        bandwidth_p: Some(p_hat.bandwidth_used()),
        bandwidth_q: Some(q_hat.bandwidth_used()),
        lattice_size: Some(lattice.len()),
        ..Diagnostics::default()
    };

    // grid fields are shared by the plug-in term and both b-matrices
    let mut fields: Option<(Vec<f64>, Vec<f64>)> = None;
    let ensure_fields = |fields: &mut Option<(Vec<f64>, Vec<f64>)>| -> Result<()> {
        if fields.is_none() {
            *fields = Some((
                p_hat.evaluate_on_grid(&cfg.grid)?,
                q_hat.evaluate_on_grid(&cfg.grid)?,
            ));
        }
        Ok(())
    };

    let c2v = c2(alpha, beta);
    if c2v != 0.0 || cfg.force_plugin_term {
        ensure_fields(&mut fields)?;
        let (pf, qf) = fields.as_ref().unwrap();
        let t_pl = plugin_integral(pf, qf, alpha, beta, &cfg.grid)?;
        value += c2v * t_pl;
        diag.plugin_term = Some(c2v * t_pl);
    }

    let p_on_x2 = eval_at(&p_hat, &x2);
    let q_on_x2 = eval_at(&q_hat, &x2);
    let p_on_y2 = eval_at(&p_hat, &y2);
    let q_on_y2 = eval_at(&q_hat, &y2);

    // θ̂₂₁ terms: coefficients α(2-α-β) and β(2-α-β)
    let lin_coef = 2.0 - alpha - beta;
    let theta21_p = weighted_power_mean(&p_on_x2, &q_on_x2, alpha * lin_coef, alpha - 1.0, beta);
    let theta21_q = weighted_power_mean(&p_on_y2, &q_on_y2, beta * lin_coef, alpha, beta - 1.0);
    value += theta21_p;
    value += theta21_q;
    diag.linear_terms = Some([theta21_p, theta21_q]);

    // θ̂₂₂ quadratic terms: ψ_p = ½α(α-1) p̂^{α-2} q̂^β on the X side,
    // ψ_q = ½β(β-1) p̂^α q̂^{β-2} on the Y side
    let coef_p = 0.5 * alpha * (alpha - 1.0);
    let coef_q = 0.5 * beta * (beta - 1.0);
    let mut quad_terms = [0.0, 0.0];
    if coef_p != 0.0 {
        ensure_fields(&mut fields)?;
        let (pf, qf) = fields.as_ref().unwrap();
        let psi_grid: Vec<f64> = pf
            .iter()
            .zip(qf)
            .map(|(&p, &q)| coef_p * p.powf(alpha - 2.0) * q.powf(beta))
            .collect();
        let b = b_matrix_from_values(&psi_grid, &lattice, &cfg.grid)?;
        let psi_x2: Vec<f64> = p_on_x2
            .iter()
            .zip(&q_on_x2)
            .map(|(&p, &q)| coef_p * p.powf(alpha - 2.0) * q.powf(beta))
            .collect();
        let est = quadratic_from_values(&x2, &psi_x2, &lattice, &b)?;
        value += est.value;
        residue = residue.max(est.imag_residue);
        quad_terms[0] = est.value;
    }
    if coef_q != 0.0 {
        ensure_fields(&mut fields)?;
        let (pf, qf) = fields.as_ref().unwrap();
        let psi_grid: Vec<f64> = pf
            .iter()
            .zip(qf)
            .map(|(&p, &q)| coef_q * p.powf(alpha) * q.powf(beta - 2.0))
            .collect();
        let b = b_matrix_from_values(&psi_grid, &lattice, &cfg.grid)?;
        let psi_y2: Vec<f64> = p_on_y2
            .iter()
            .zip(&q_on_y2)
            .map(|(&p, &q)| coef_q * p.powf(alpha) * q.powf(beta - 2.0))
            .collect();
        let est = quadratic_from_values(&y2, &psi_y2, &lattice, &b)?;
        value += est.value;
        residue = residue.max(est.imag_residue);
        quad_terms[1] = est.value;
    }
    diag.quadratic_terms = Some(quad_terms);

    // bilinear term: ψ = αβ p̂^{α-1} q̂^{β-1}, X coefficients against Y means
    let coef_pq = alpha * beta;
    let mut bilinear = 0.0;
    if coef_pq != 0.0 {
        let psi_y2: Vec<f64> = p_on_y2
            .iter()
            .zip(&q_on_y2)
            .map(|(&p, &q)| coef_pq * p.powf(alpha - 1.0) * q.powf(beta - 1.0))
            .collect();
        let est = bilinear_from_values(&x2, &y2, &psi_y2, &lattice)?;
        value += est.value;
        residue = residue.max(est.imag_residue);
        bilinear = est.value;
    }
    diag.bilinear_term = Some(bilinear);
    diag.imag_residue = residue;

    Estimate::checked(value, diag)
}

/// Dispatch on the configured estimator kind.
pub fn t_estimate(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<Estimate> {
    match cfg.kind {
        EstimatorKind::Plugin => t_plugin(x, y, cfg),
        EstimatorKind::Linear => t_linear(x, y, cfg),
        EstimatorKind::Quadratic => t_quadratic(x, y, cfg),
    }
}

fn with_renyi_exponents(cfg: &EstimatorConfig, alpha: f64) -> EstimatorConfig {
    let mut c = cfg.clone();
    c.alpha = alpha;
    c.beta = 1.0 - alpha;
    c
}

/// Rényi-α divergence: `log(T̂) / (α-1)` with β = 1-α.
///
/// Errors when the inner estimate is not positive rather than returning NaN.
pub fn renyi(x: &PointSet, y: &PointSet, alpha: f64, cfg: &EstimatorConfig) -> Result<Estimate> {
    check_alpha(alpha)?;
    let inner = t_estimate(x, y, &with_renyi_exponents(cfg, alpha))?;
    if inner.value <= 0.0 {
        return Err(Error::NonPositiveEstimate(inner.value));
    }
    Estimate::checked(inner.value.ln() / (alpha - 1.0), inner.diagnostics)
}

/// Tsallis-α divergence: `(T̂ - 1) / (α-1)` with β = 1-α.
pub fn tsallis(x: &PointSet, y: &PointSet, alpha: f64, cfg: &EstimatorConfig) -> Result<Estimate> {
    check_alpha(alpha)?;
    let inner = t_estimate(x, y, &with_renyi_exponents(cfg, alpha))?;
    Estimate::checked((inner.value - 1.0) / (alpha - 1.0), inner.diagnostics)
}

/// Squared-L2 divergence estimator `θ̂_p + θ̂_q - θ̂_{p,q}`.
///
/// Uses the projection estimators directly on the full samples: ψ ≡ 1 for
/// the two quadratic terms (whose b-matrix is the analytic `1[k+k'=0]`, no
/// quadrature) and ψ ≡ 2 for the bilinear cross term. No KDEs, no bandwidth.
pub fn l2_squared(x: &PointSet, y: &PointSet, cfg: &EstimatorConfig) -> Result<Estimate> {
    validate_inputs(x, y, cfg)?;
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::domain("L2 estimator needs at least 2 samples per set"));
    }
    let lattice = cfg.frequency_lattice(x.len().min(y.len()))?;
    let b = crate::functional::BMatrix::for_constant_psi(&lattice, 1.0);

    let ones_x = vec![1.0; x.len()];
    let ones_y = vec![1.0; y.len()];
    let twos_y = vec![2.0; y.len()];
    let theta_p = quadratic_from_values(x, &ones_x, &lattice, &b)?;
    let theta_q = quadratic_from_values(y, &ones_y, &lattice, &b)?;
    let theta_pq = bilinear_from_values(x, y, &twos_y, &lattice)?;

    let value = theta_p.value + theta_q.value - theta_pq.value;
    let residue = theta_p
        .imag_residue
        .max(theta_q.imag_residue)
        .max(theta_pq.imag_residue);
    Estimate::checked(
        value,
        Diagnostics {
            lattice_size: Some(lattice.len()),
            imag_residue: residue,
            quadratic_terms: Some([theta_p.value, theta_q.value]),
            bilinear_term: Some(theta_pq.value),
            ..Diagnostics::default()
        },
    )
}
