//! Monte Carlo convergence experiments: run estimators across a grid of
//! sample sizes, record per-trial errors, emit CSV, fit log-log slopes.
//!
//! Determinism contract: every trial derives its RNG seeds from
//! `(base_seed, n, trial)` through a fixed integer mix, trials are
//! independent work items (run in parallel), and rows are sorted by
//! `(n, trial)` before writing — so the statistical content of the output
//! is byte-reproducible from the config alone. The `wall_ms` column is the
//! one exception: it records measured time and varies run to run.

use crate::density::{sample, true_divergence, true_t, Density, DivergenceKind, TrigDensity, TrigTerm};
use crate::estimators::{l2_squared, renyi, t_estimate, tsallis, EstimatorConfig, EstimatorKind};
use crate::point::PointSet;
use crate::quadrature::GridSpec;
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

// ---------------------------------------------------------------------------
// seeding
// ---------------------------------------------------------------------------

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stable per-trial seed: `base ⊕ mix(n, trial)`.
pub fn trial_seed(base_seed: u64, n: usize, trial: usize) -> u64 {
    base_seed ^ splitmix64(splitmix64(n as u64) ^ (trial as u64))
}

fn stream_seed(trial_seed: u64, stream: u64) -> u64 {
    splitmix64(trial_seed ^ splitmix64(stream))
}

// ---------------------------------------------------------------------------
// experiment configuration
// ---------------------------------------------------------------------------

/// Density family as written in a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    Uniform { dim: usize },
    Trig { dim: usize, terms: Vec<TrigTerm> },
    /// Amplitudes decay as `k^{-(s+0.5)}` over frequencies 1..=num_terms;
    /// phase 0 gives cosines, π/2 sines.
    Smooth {
        dim: usize,
        s: f64,
        amplitude: f64,
        num_terms: u32,
        phase: f64,
    },
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::Uniform { dim } => *dim,
            DensitySpec::Trig { dim, .. } => *dim,
            DensitySpec::Smooth { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Density>> {
        match self {
            DensitySpec::Uniform { dim } => Ok(Arc::new(crate::density::UniformDensity::new(*dim))),
            DensitySpec::Trig { dim, terms } => {
                Ok(Arc::new(TrigDensity::new(*dim, terms.clone())?))
            }
            DensitySpec::Smooth {
                dim,
                s,
                amplitude,
                num_terms,
                phase,
            } => Ok(Arc::new(TrigDensity::smooth_family_with_phase(
                *dim, *s, *amplitude, *num_terms, *phase,
            )?)),
        }
    }
}

/// What the experiment estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExperimentTarget {
    /// `T(p,q) = ∫ p^α q^β` itself.
    Functional { alpha: f64, beta: f64 },
    Renyi { alpha: f64 },
    Tsallis { alpha: f64 },
    L2,
}

/// Full description of one convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub density_p: DensitySpec,
    pub density_q: DensitySpec,
    pub target: ExperimentTarget,
    pub kind: EstimatorKind,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub base_seed: u64,
    /// Assumed smoothness handed to the estimator.
    pub s: f64,
    /// Density bounds; derived from the densities when absent.
    pub kappa_l: Option<f64>,
    pub kappa_u: Option<f64>,
    pub epsilon: Option<f64>,
    pub c_h: f64,
    pub c_m: f64,
    pub s_prime: Option<f64>,
    pub grid_points: Option<usize>,
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn new(
        density_p: DensitySpec,
        density_q: DensitySpec,
        target: ExperimentTarget,
        kind: EstimatorKind,
        n_grid: Vec<usize>,
        trials: usize,
        base_seed: u64,
        s: f64,
    ) -> Self {
        ExperimentConfig {
            density_p,
            density_q,
            target,
            kind,
            n_grid,
            trials,
            base_seed,
            s,
            kappa_l: None,
            kappa_u: None,
            epsilon: None,
            c_h: 1.0,
            c_m: 1.0,
            s_prime: None,
            grid_points: None,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Empty("n_grid must list at least one sample size"));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("n_grid must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(Error::domain("trials must be at least 1"));
        }
        if self.density_p.dim() != self.density_q.dim() {
            return Err(Error::DimensionMismatch(
                self.density_p.dim(),
                self.density_q.dim(),
            ));
        }
        Ok(())
    }

    /// Row label: divergence and backing estimator.
    pub fn label(&self) -> String {
        match self.target {
            ExperimentTarget::Functional { .. } => self.kind.label().to_string(),
            ExperimentTarget::Renyi { .. } => format!("renyi-{}", self.kind.label()),
            ExperimentTarget::Tsallis { .. } => format!("tsallis-{}", self.kind.label()),
            ExperimentTarget::L2 => "l2".to_string(),
        }
    }

    pub fn exponents(&self) -> (f64, f64) {
        match self.target {
            ExperimentTarget::Functional { alpha, beta } => (alpha, beta),
            ExperimentTarget::Renyi { alpha } | ExperimentTarget::Tsallis { alpha } => {
                (alpha, 1.0 - alpha)
            }
            ExperimentTarget::L2 => (1.0, 1.0),
        }
    }

    fn grid(&self) -> Result<GridSpec> {
        let dim = self.density_p.dim();
        match self.grid_points {
            Some(g) => GridSpec::new(dim, g),
            None => GridSpec::default_for_dim(dim),
        }
    }

    /// Estimator tuning derived from this experiment. Density bounds come
    /// from the synthetic truth unless overridden; coincident bounds (e.g.
    /// a uniform pair) are widened so the truncation window stays open.
    pub fn build_estimator_config(&self) -> Result<EstimatorConfig> {
        let p = self.density_p.build()?;
        let q = self.density_q.build()?;
        let mut kl = self
            .kappa_l
            .unwrap_or_else(|| p.lower_bound().min(q.lower_bound()));
        let mut ku = self
            .kappa_u
            .unwrap_or_else(|| p.upper_bound().max(q.upper_bound()));
        if !(kl < ku) {
            kl *= 0.75;
            ku *= 1.25;
        }
        let (alpha, beta) = self.exponents();
        let mut cfg = EstimatorConfig::new(alpha, beta, self.s, self.density_p.dim(), kl, ku)?;
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        cfg.c_h = self.c_h;
        cfg.c_m = self.c_m;
        if let Some(sp) = self.s_prime {
            cfg.s_prime = sp;
        }
        cfg.grid = self.grid()?;
        cfg.kind = self.kind;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Oracle value for this experiment's target.
    pub fn truth(&self) -> Result<f64> {
        let p = self.density_p.build()?;
        let q = self.density_q.build()?;
        let grid = self.grid()?;
        match self.target {
            ExperimentTarget::Functional { alpha, beta } => {
                true_t(p.as_ref(), q.as_ref(), alpha, beta, &grid)
            }
            ExperimentTarget::Renyi { alpha } => {
                true_divergence(p.as_ref(), q.as_ref(), DivergenceKind::Renyi(alpha), &grid)
            }
            ExperimentTarget::Tsallis { alpha } => {
                true_divergence(p.as_ref(), q.as_ref(), DivergenceKind::Tsallis(alpha), &grid)
            }
            ExperimentTarget::L2 => {
                true_divergence(p.as_ref(), q.as_ref(), DivergenceKind::L2, &grid)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// running
// ---------------------------------------------------------------------------

/// One successful trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub trial: usize,
    pub estimator: String,
    pub alpha: f64,
    pub beta: f64,
    pub estimate: f64,
    pub truth: f64,
    pub abs_error: f64,
    pub wall_ms: f64,
}

/// A trial whose estimation failed; recorded, never fatal to the run.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub n: usize,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<TrialFailure>,
    pub truth: f64,
}

fn estimate_once(
    x: &PointSet,
    y: &PointSet,
    target: ExperimentTarget,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let est = match target {
        ExperimentTarget::Functional { .. } => t_estimate(x, y, cfg)?,
        ExperimentTarget::Renyi { alpha } => renyi(x, y, alpha, cfg)?,
        ExperimentTarget::Tsallis { alpha } => tsallis(x, y, alpha, cfg)?,
        ExperimentTarget::L2 => l2_squared(x, y, cfg)?,
    };
    Ok(est.value)
}

/// Run every (n, trial) cell of the experiment. Trials execute in parallel;
/// rows come back sorted by (n, trial) regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let truth = cfg.truth()?;
    let est_cfg = cfg.build_estimator_config()?;
    let p = cfg.density_p.build()?;
    let q = cfg.density_q.build()?;
    let label = cfg.label();
    let (alpha, beta) = cfg.exponents();

    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();

    let results: Vec<std::result::Result<ResultRow, TrialFailure>> = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let seed = trial_seed(cfg.base_seed, n, trial);
            let run = || -> Result<ResultRow> {
                let x = sample(p.as_ref(), n, stream_seed(seed, 1))?;
                let y = sample(q.as_ref(), n, stream_seed(seed, 2))?;
                let start = Instant::now();
                let estimate = estimate_once(&x, &y, cfg.target, &est_cfg)?;
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                Ok(ResultRow {
                    n,
                    trial,
                    estimator: label.clone(),
                    alpha,
                    beta,
                    estimate,
                    truth,
                    abs_error: (estimate - truth).abs(),
                    wall_ms,
                })
            };
            run().map_err(|e| TrialFailure {
                n,
                trial,
                message: e.to_string(),
            })
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    rows.sort_by_key(|r| (r.n, r.trial));
    failures.sort_by_key(|f| (f.n, f.trial));
    Ok(ExperimentOutcome {
        rows,
        failures,
        truth,
    })
}

// ---------------------------------------------------------------------------
// slope fitting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Median,
    Mean,
}

fn aggregate(errors: &mut [f64], how: Aggregator) -> f64 {
    match how {
        Aggregator::Mean => errors.iter().sum::<f64>() / errors.len() as f64,
        Aggregator::Median => {
            errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = errors.len();
            if n % 2 == 1 {
                errors[n / 2]
            } else {
                0.5 * (errors[n / 2 - 1] + errors[n / 2])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sample sizes dropped because their aggregate error was zero.
    pub excluded: Vec<usize>,
}

/// Ordinary least squares of `log(aggregate abs_error)` against `log(n)`.
pub fn fit_loglog_slope(rows: &[ResultRow], aggregator: Aggregator) -> Result<SlopeFit> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_n.entry(r.n).or_default().push(r.abs_error);
    }
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (n, mut errs) in by_n {
        let agg = aggregate(&mut errs, aggregator);
        if agg > 0.0 {
            points.push(((n as f64).ln(), agg.ln()));
        } else {
            excluded.push(n);
        }
    }
    if points.len() < 2 {
        return Err(Error::domain(format!(
            "slope fit needs at least 2 sample sizes with nonzero aggregate error, have {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    Ok(SlopeFit {
        slope,
        intercept,
        excluded,
    })
}

/// Slope fit per estimator label (for the `slopes` subcommand).
pub fn slopes_by_estimator(
    rows: &[ResultRow],
    aggregator: Aggregator,
) -> Vec<(String, Result<SlopeFit>)> {
    let mut groups: BTreeMap<&str, Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.estimator).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(label, rows)| (label.to_string(), fit_loglog_slope(&rows, aggregator)))
        .collect()
}

// ---------------------------------------------------------------------------
// results CSV
// ---------------------------------------------------------------------------

pub const RESULTS_HEADER: &str = "n,trial,estimator,alpha,beta,estimate,truth,abs_error,wall_ms";

pub fn write_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.3}\n",
            r.n, r.trial, r.estimator, r.alpha, r.beta, r.estimate, r.truth, r.abs_error, r.wall_ms
        ));
    }
    out
}

pub fn read_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RESULTS_HEADER => {}
        Some((_, h)) => {
            return Err(Error::Config {
                line: 1,
                field: "header".into(),
                message: format!("expected `{RESULTS_HEADER}`, found `{h}`"),
            })
        }
        None => return Err(Error::Empty("results CSV is empty")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(Error::Config {
                line: i + 1,
                field: "row".into(),
                message: format!("expected 9 fields, found {}", parts.len()),
            });
        }
        let field = |j: usize, name: &str| -> Result<f64> {
            parts[j].parse::<f64>().map_err(|e| Error::Config {
                line: i + 1,
                field: name.into(),
                message: e.to_string(),
            })
        };
        rows.push(ResultRow {
            n: parts[0].parse().map_err(|e: std::num::ParseIntError| Error::Config {
                line: i + 1,
                field: "n".into(),
                message: e.to_string(),
            })?,
            trial: parts[1].parse().map_err(|e: std::num::ParseIntError| Error::Config {
                line: i + 1,
                field: "trial".into(),
                message: e.to_string(),
            })?,
            estimator: parts[2].to_string(),
            alpha: field(3, "alpha")?,
            beta: field(4, "beta")?,
            estimate: field(5, "estimate")?,
            truth: field(6, "truth")?,
            abs_error: field(7, "abs_error")?,
            wall_ms: field(8, "wall_ms")?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// sample-point CSV (one point per line, comma-separated coordinates)
// ---------------------------------------------------------------------------

pub fn read_points_csv(text: &str) -> Result<PointSet> {
    let mut dim = None;
    let mut coords = Vec::new();
    let mut count = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| Error::Config {
                    line: i + 1,
                    field: "coordinate".into(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(vals.len()),
            Some(d) if d != vals.len() => {
                return Err(Error::Config {
                    line: i + 1,
                    field: "point".into(),
                    message: format!("expected {d} coordinates, found {}", vals.len()),
                })
            }
            _ => {}
        }
        coords.extend(vals);
        count += 1;
    }
    let dim = dim.ok_or(Error::Empty("sample file holds no points"))?;
    let pts = PointSet::from_flat(dim, coords)?;
    debug_assert_eq!(pts.len(), count);
    pts.validate_unit_cube()?;
    Ok(pts)
}

pub fn write_points_csv(points: &PointSet) -> String {
    let mut out = String::new();
    for p in points.iter() {
        let strs: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
        out.push_str(&strs.join(","));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// config file: flat key=value text with [section] headers
// ---------------------------------------------------------------------------

struct RawConfig {
    /// (section, key) -> (value, line)
    entries: BTreeMap<(String, String), (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::Config {
                    line: i + 1,
                    field: "section".into(),
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Config {
                line: i + 1,
                field: "line".into(),
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if section.is_empty() {
                return Err(Error::Config {
                    line: i + 1,
                    field: key,
                    message: "key appears before any [section] header".into(),
                });
            }
            entries.insert(
                (section.clone(), key),
                (value.trim().to_string(), i + 1),
            );
        }
        Ok(RawConfig { entries })
    }

    fn get(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn require(&self, section: &str, key: &str) -> Result<&(String, usize)> {
        self.get(section, key).ok_or_else(|| Error::Config {
            line: 0,
            field: format!("{section}.{key}"),
            message: "required field is missing".into(),
        })
    }
}

fn parse_value<T: std::str::FromStr>(raw: &(String, usize), field: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.0.parse::<T>().map_err(|e| Error::Config {
        line: raw.1,
        field: field.into(),
        message: e.to_string(),
    })
}

fn parse_usize_list(raw: &(String, usize), field: &str) -> Result<Vec<usize>> {
    raw.0
        .split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|e| Error::Config {
                line: raw.1,
                field: field.into(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Trig terms written `amp:f1,f2:p1,p2; amp:...` (one frequency and phase
/// per axis).
fn parse_trig_terms(raw: &(String, usize), field: &str, dim: usize) -> Result<Vec<TrigTerm>> {
    let mut terms = Vec::new();
    for chunk in raw.0.split(';') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            continue;
        }
        let parts: Vec<&str> = chunk.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config {
                line: raw.1,
                field: field.into(),
                message: format!("term `{chunk}` is not amp:freqs:phases"),
            });
        }
        let amplitude: f64 = parts[0].trim().parse().map_err(|e: std::num::ParseFloatError| {
            Error::Config {
                line: raw.1,
                field: field.into(),
                message: e.to_string(),
            }
        })?;
        let frequency: Vec<u32> = parts[1]
            .split(',')
            .map(|t| {
                t.trim().parse::<u32>().map_err(|e| Error::Config {
                    line: raw.1,
                    field: field.into(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        let phase: Vec<f64> = parts[2]
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| Error::Config {
                    line: raw.1,
                    field: field.into(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        if frequency.len() != dim || phase.len() != dim {
            return Err(Error::Config {
                line: raw.1,
                field: field.into(),
                message: format!(
                    "term `{chunk}` needs {dim} frequencies and phases for dim {dim}"
                ),
            });
        }
        terms.push(TrigTerm {
            amplitude,
            frequency,
            phase,
        });
    }
    if terms.is_empty() {
        return Err(Error::Config {
            line: raw.1,
            field: field.into(),
            message: "no terms given".into(),
        });
    }
    Ok(terms)
}

fn parse_density(raw: &RawConfig, section: &str) -> Result<DensitySpec> {
    let family = raw.require(section, "family")?;
    let dim: usize = parse_value(raw.require(section, "dim")?, &format!("{section}.dim"))?;
    match family.0.as_str() {
        "uniform" => Ok(DensitySpec::Uniform { dim }),
        "trig" => {
            let terms = parse_trig_terms(
                raw.require(section, "terms")?,
                &format!("{section}.terms"),
                dim,
            )?;
            Ok(DensitySpec::Trig { dim, terms })
        }
        "smooth" => {
            let phase = match raw.get(section, "phase") {
                None => 0.0,
                Some(r) => match r.0.as_str() {
                    "cosine" => 0.0,
                    "sine" => std::f64::consts::FRAC_PI_2,
                    other => {
                        return Err(Error::Config {
                            line: r.1,
                            field: format!("{section}.phase"),
                            message: format!("unknown phase `{other}` (cosine | sine)"),
                        })
                    }
                },
            };
            Ok(DensitySpec::Smooth {
                dim,
                s: parse_value(raw.require(section, "s")?, &format!("{section}.s"))?,
                amplitude: parse_value(
                    raw.require(section, "amplitude")?,
                    &format!("{section}.amplitude"),
                )?,
                num_terms: parse_value(
                    raw.require(section, "num_terms")?,
                    &format!("{section}.num_terms"),
                )?,
                phase,
            })
        }
        other => Err(Error::Config {
            line: family.1,
            field: format!("{section}.family"),
            message: format!("unknown family `{other}` (uniform | trig | smooth)"),
        }),
    }
}

pub fn parse_estimator_kind(text: &str) -> Option<EstimatorKind> {
    match text {
        "plugin" => Some(EstimatorKind::Plugin),
        "linear" => Some(EstimatorKind::Linear),
        "quadratic" => Some(EstimatorKind::Quadratic),
        _ => None,
    }
}

/// Parse an experiment config file.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    parse_experiment_config_with_overrides(text, &[])
}

/// Parse a config file, then apply `section.key = value` overrides on top
/// (the CLI's `--set` flags) before interpretation.
pub fn parse_experiment_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;
    for (path, value) in overrides {
        let (section, key) = path.split_once('.').ok_or_else(|| Error::Config {
            line: 0,
            field: path.clone(),
            message: "override path must be SECTION.KEY".into(),
        })?;
        raw.entries.insert(
            (section.to_string(), key.to_string()),
            (value.clone(), 0),
        );
    }
    interpret_config(&raw)
}

fn interpret_config(raw: &RawConfig) -> Result<ExperimentConfig> {
    let density_p = parse_density(raw, "density_p")?;
    let density_q = parse_density(raw, "density_q")?;

    let target_raw = raw.require("experiment", "target")?;
    let alpha = raw
        .get("experiment", "alpha")
        .map(|r| parse_value::<f64>(r, "experiment.alpha"))
        .transpose()?;
    let beta = raw
        .get("experiment", "beta")
        .map(|r| parse_value::<f64>(r, "experiment.beta"))
        .transpose()?;
    let need_alpha = |line: usize| -> Result<f64> {
        alpha.ok_or(Error::Config {
            line,
            field: "experiment.alpha".into(),
            message: "this target needs alpha".into(),
        })
    };
    let target = match target_raw.0.as_str() {
        "functional" => ExperimentTarget::Functional {
            alpha: need_alpha(target_raw.1)?,
            beta: beta.ok_or(Error::Config {
                line: target_raw.1,
                field: "experiment.beta".into(),
                message: "the functional target needs beta".into(),
            })?,
        },
        "renyi" => ExperimentTarget::Renyi {
            alpha: need_alpha(target_raw.1)?,
        },
        "tsallis" => ExperimentTarget::Tsallis {
            alpha: need_alpha(target_raw.1)?,
        },
        "l2" => ExperimentTarget::L2,
        other => {
            return Err(Error::Config {
                line: target_raw.1,
                field: "experiment.target".into(),
                message: format!("unknown target `{other}` (functional | renyi | tsallis | l2)"),
            })
        }
    };

    let kind_raw = raw.require("experiment", "estimator")?;
    let kind = parse_estimator_kind(&kind_raw.0).ok_or(Error::Config {
        line: kind_raw.1,
        field: "experiment.estimator".into(),
        message: format!(
            "unknown estimator `{}` (plugin | linear | quadratic)",
            kind_raw.0
        ),
    })?;

    let mut cfg = ExperimentConfig::new(
        density_p,
        density_q,
        target,
        kind,
        parse_usize_list(raw.require("experiment", "n_grid")?, "experiment.n_grid")?,
        parse_value(raw.require("experiment", "trials")?, "experiment.trials")?,
        parse_value(raw.require("experiment", "base_seed")?, "experiment.base_seed")?,
        parse_value(raw.require("estimator", "s")?, "estimator.s")?,
    );
    if let Some(r) = raw.get("experiment", "output") {
        cfg.output = Some(r.0.clone());
    }
    if let Some(r) = raw.get("estimator", "kappa_l") {
        cfg.kappa_l = Some(parse_value(r, "estimator.kappa_l")?);
    }
    if let Some(r) = raw.get("estimator", "kappa_u") {
        cfg.kappa_u = Some(parse_value(r, "estimator.kappa_u")?);
    }
    if let Some(r) = raw.get("estimator", "epsilon") {
        cfg.epsilon = Some(parse_value(r, "estimator.epsilon")?);
    }
    if let Some(r) = raw.get("estimator", "c_h") {
        cfg.c_h = parse_value(r, "estimator.c_h")?;
    }
    if let Some(r) = raw.get("estimator", "c_m") {
        cfg.c_m = parse_value(r, "estimator.c_m")?;
    }
    if let Some(r) = raw.get("estimator", "s_prime") {
        cfg.s_prime = Some(parse_value(r, "estimator.s_prime")?);
    }
    if let Some(r) = raw.get("estimator", "grid_points") {
        cfg.grid_points = Some(parse_value(r, "estimator.grid_points")?);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `DIVEST_SEED`, when set, overrides the configured base seed.
pub fn apply_env_seed(cfg: &mut ExperimentConfig) -> Result<()> {
    if let Ok(text) = std::env::var("DIVEST_SEED") {
        cfg.base_seed = text.parse().map_err(|e: std::num::ParseIntError| Error::Config {
            line: 0,
            field: "DIVEST_SEED".into(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}
