//! Command-line interface: estimate divergences from sample files, run
//! convergence experiments from config files, self-check the build, and fit
//! slopes on result CSVs.

use clap::{Parser, Subcommand, ValueEnum};
use divest::harness::{
    apply_env_seed, fit_loglog_slope, parse_estimator_kind, read_points_csv, read_results_csv,
    run_experiment, slopes_by_estimator, write_results_csv, Aggregator,
};
use divest::{Error, EstimatorConfig, EstimatorKind, GridSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "divest",
    about = "Divergence estimation between densities on the unit cube, from samples",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DivergenceArg {
    Renyi,
    Tsallis,
    L2,
    Functional,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Plugin,
    Linear,
    Quadratic,
}

impl From<KindArg> for EstimatorKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Plugin => EstimatorKind::Plugin,
            KindArg::Linear => EstimatorKind::Linear,
            KindArg::Quadratic => EstimatorKind::Quadratic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregatorArg {
    Median,
    Mean,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a divergence (or the raw functional) from two sample files.
    Estimate {
        /// CSV of samples from p: one point per line, d coordinates in [0,1].
        x: PathBuf,
        /// CSV of samples from q, same format.
        y: PathBuf,
        #[arg(long)]
        divergence: DivergenceArg,
        /// Backing estimator (ignored for l2).
        #[arg(long, default_value = "linear")]
        kind: KindArg,
        /// Divergence order (renyi/tsallis/functional).
        #[arg(long)]
        alpha: Option<f64>,
        /// Second exponent (functional only).
        #[arg(long)]
        beta: Option<f64>,
        /// Assumed smoothness of both densities.
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        /// Known lower density bound.
        #[arg(long, default_value_t = 0.25)]
        kappa_l: f64,
        /// Known upper density bound.
        #[arg(long, default_value_t = 2.0)]
        kappa_u: f64,
        /// Truncation margin (default 0.1 κ_l).
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        c_h: f64,
        #[arg(long, default_value_t = 1.0)]
        c_m: f64,
        #[arg(long)]
        s_prime: Option<f64>,
        /// Quadrature resolution per axis (defaults by dimension).
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Run a convergence experiment described by a config file; write CSV.
    Simulate {
        config: PathBuf,
        /// Output CSV path (overrides the config's `output`).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Override any config key, e.g. --set experiment.trials=5
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        base_seed: Option<u64>,
        /// Comma-separated sample sizes.
        #[arg(long)]
        n_grid: Option<String>,
        #[arg(long)]
        estimator: Option<String>,
    },
    /// Run build self-checks: kernel moments, basis orthonormality, and
    /// optimized-vs-reference estimator equivalence.
    Validate,
    /// Fit log-log error slopes per estimator from a results CSV.
    Slopes {
        results: PathBuf,
        #[arg(long, default_value = "median")]
        aggregator: AggregatorArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> divest::Result<ExitCode> {
    match cli.command {
        Command::Estimate {
            x,
            y,
            divergence,
            kind,
            alpha,
            beta,
            s,
            kappa_l,
            kappa_u,
            epsilon,
            c_h,
            c_m,
            s_prime,
            grid_points,
        } => {
            let xs = read_points_csv(&std::fs::read_to_string(&x)?)?;
            let ys = read_points_csv(&std::fs::read_to_string(&y)?)?;
            if xs.dim() != ys.dim() {
                return Err(Error::DimensionMismatch(xs.dim(), ys.dim()));
            }
            let dim = xs.dim();
            let need_alpha = || {
                alpha.ok_or_else(|| Error::Domain("this divergence needs --alpha".into()))
            };
            let (a, b) = match divergence {
                DivergenceArg::Functional => (
                    need_alpha()?,
                    beta.ok_or_else(|| {
                        Error::Domain("--divergence functional needs --beta".into())
                    })?,
                ),
                DivergenceArg::Renyi | DivergenceArg::Tsallis => {
                    let a = need_alpha()?;
                    (a, 1.0 - a)
                }
                DivergenceArg::L2 => (1.0, 1.0),
            };
            let mut cfg = EstimatorConfig::new(a, b, s, dim, kappa_l, kappa_u)?;
            if let Some(e) = epsilon {
                cfg.epsilon = e;
            }
            cfg.c_h = c_h;
            cfg.c_m = c_m;
            if let Some(sp) = s_prime {
                cfg.s_prime = sp;
            }
            if let Some(g) = grid_points {
                cfg.grid = GridSpec::new(dim, g)?;
            }
            cfg.kind = kind.into();
            cfg.validate()?;
            let est = match divergence {
                DivergenceArg::Renyi => divest::renyi(&xs, &ys, a, &cfg)?,
                DivergenceArg::Tsallis => divest::tsallis(&xs, &ys, a, &cfg)?,
                DivergenceArg::L2 => divest::l2_squared(&xs, &ys, &cfg)?,
                DivergenceArg::Functional => divest::t_estimate(&xs, &ys, &cfg)?,
            };
            println!("estimate: {}", est.value);
            print_diagnostics(&est.diagnostics);
            Ok(ExitCode::SUCCESS)
        }

        Command::Simulate {
            config,
            output,
            sets,
            trials,
            base_seed,
            n_grid,
            estimator,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let overrides = parse_set_flags(&sets)?;
            let mut cfg =
                divest::harness::parse_experiment_config_with_overrides(&text, &overrides)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = base_seed {
                cfg.base_seed = s;
            }
            if let Some(grid) = n_grid {
                cfg.n_grid = grid
                    .split(',')
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|e| Error::Config {
                            line: 0,
                            field: "n_grid".into(),
                            message: e.to_string(),
                        })
                    })
                    .collect::<divest::Result<_>>()?;
            }
            if let Some(k) = estimator {
                cfg.kind = parse_estimator_kind(&k).ok_or_else(|| Error::Config {
                    line: 0,
                    field: "estimator".into(),
                    message: format!("unknown estimator `{k}`"),
                })?;
            }
            apply_env_seed(&mut cfg)?;
            cfg.validate()?;

            let outcome = run_experiment(&cfg)?;
            for f in &outcome.failures {
                eprintln!("warning: trial (n={}, trial={}) failed: {}", f.n, f.trial, f.message);
            }
            let path = output
                .or_else(|| cfg.output.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("results.csv"));
            std::fs::write(&path, write_results_csv(&outcome.rows))?;
            println!(
                "{} rows ({} failures) written to {}; truth = {}",
                outcome.rows.len(),
                outcome.failures.len(),
                path.display(),
                outcome.truth
            );
            if cfg.n_grid.len() >= 2 {
                if let Ok(fit) = fit_loglog_slope(&outcome.rows, Aggregator::Median) {
                    println!(
                        "fitted median-error slope: {:.4} (intercept {:.4})",
                        fit.slope, fit.intercept
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Validate => {
            let ok = run_self_checks();
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }

        Command::Slopes {
            results,
            aggregator,
        } => {
            let rows = read_results_csv(&std::fs::read_to_string(&results)?)?;
            let agg = match aggregator {
                AggregatorArg::Median => Aggregator::Median,
                AggregatorArg::Mean => Aggregator::Mean,
            };
            println!("{:<20} {:>10} {:>12}", "estimator", "slope", "intercept");
            for (label, fit) in slopes_by_estimator(&rows, agg) {
                match fit {
                    Ok(f) => {
                        println!("{:<20} {:>10.4} {:>12.4}", label, f.slope, f.intercept);
                        if !f.excluded.is_empty() {
                            eprintln!(
                                "warning: {label}: excluded n with zero aggregate error: {:?}",
                                f.excluded
                            );
                        }
                    }
                    Err(e) => println!("{label:<20} unavailable: {e}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_set_flags(sets: &[String]) -> divest::Result<Vec<(String, String)>> {
    sets.iter()
        .map(|s| {
            let (path, value) = s.split_once('=').ok_or_else(|| Error::Config {
                line: 0,
                field: s.clone(),
                message: "expected SECTION.KEY=VALUE".into(),
            })?;
            if !path.contains('.') {
                return Err(Error::Config {
                    line: 0,
                    field: path.to_string(),
                    message: "expected SECTION.KEY on the left of `=`".into(),
                });
            }
            Ok((path.trim().to_string(), value.trim().to_string()))
        })
        .collect()
}

fn print_diagnostics(d: &divest::estimators::Diagnostics) {
    if let Some(h) = d.bandwidth_p {
        println!("  bandwidth p: {h}");
    }
    if let Some(h) = d.bandwidth_q {
        println!("  bandwidth q: {h}");
    }
    if let Some(m) = d.lattice_size {
        println!("  lattice size: {m}");
    }
    if let Some(t) = d.plugin_term {
        println!("  plug-in term: {t}");
    }
    if let Some([p, q]) = d.linear_terms {
        println!("  linear terms: {p} {q}");
    }
    if let Some([p, q]) = d.quadratic_terms {
        println!("  quadratic terms: {p} {q}");
    }
    if let Some(b) = d.bilinear_term {
        println!("  bilinear term: {b}");
    }
    println!("  imaginary residue: {:e}", d.imag_residue);
}

// ---------------------------------------------------------------------------
// validate subcommand
// ---------------------------------------------------------------------------

fn check(name: &str, result: divest::Result<bool>, all_ok: &mut bool) {
    match result {
        Ok(true) => println!("{name}: pass"),
        Ok(false) => {
            println!("{name}: FAIL");
            *all_ok = false;
        }
        Err(e) => {
            println!("{name}: FAIL ({e})");
            *all_ok = false;
        }
    }
}

fn run_self_checks() -> bool {
    let mut ok = true;
    check("kernel moments (s = 1..4)", check_kernels(), &mut ok);
    check("basis orthonormality (w = 3)", check_orthonormality(), &mut ok);
    check(
        "estimator vs reference equivalence",
        check_oracle_equivalence(),
        &mut ok,
    );
    ok
}

fn check_kernels() -> divest::Result<bool> {
    let grid = GridSpec::new_unguarded(1, 200_000)?;
    for s in [1.0, 2.0, 3.0, 4.0] {
        let order = divest::smoothness_order(s)?;
        let k = divest::legendre_kernel(order)?;
        if (divest::kernels::kernel_moment(&k, 0, &grid)? - 1.0).abs() > 1e-8 {
            return Ok(false);
        }
        for r in 1..=order {
            if divest::kernels::kernel_moment(&k, r, &grid)?.abs() > 1e-8 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn check_orthonormality() -> divest::Result<bool> {
    let m = divest::FrequencySet::with_half_width(1, 3)?;
    let grid = GridSpec::new(1, 512)?;
    for ka in m.iter() {
        for kb in m.iter() {
            let inner = divest::integrate_complex(
                |x| divest::phi(ka, x) * divest::phi(kb, x).conj(),
                &grid,
            )?;
            let expect = if ka == kb { 1.0 } else { 0.0 };
            if (inner - num_complex::Complex64::new(expect, 0.0)).norm() > 1e-8 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn check_oracle_equivalence() -> divest::Result<bool> {
    use divest::reference::{close_rel, naive_t_estimate};
    let d1 = divest::TrigDensity::new(
        1,
        vec![divest::density::TrigTerm::isotropic(1, 0.5, 1, 0.0)],
    )?;
    let d2 = divest::TrigDensity::new(
        1,
        vec![divest::density::TrigTerm::isotropic(1, 0.25, 2, 0.0)],
    )?;
    let exponent_cases = [(0.5, 0.5), (2.0, -0.5), (1.0, 1.0), (0.0, 1.5)];
    for (case, &(alpha, beta)) in exponent_cases.iter().enumerate() {
        let x = divest::sample(&d1, 24, 900 + case as u64)?;
        let y = divest::sample(&d2, 24, 1900 + case as u64)?;
        let mut cfg = EstimatorConfig::new(alpha, beta, 2.0, 1, 0.25, 1.75)?;
        cfg.grid = GridSpec::new(1, 128)?;
        for kind in [
            EstimatorKind::Plugin,
            EstimatorKind::Linear,
            EstimatorKind::Quadratic,
        ] {
            cfg.kind = kind;
            let fast = divest::t_estimate(&x, &y, &cfg)?.value;
            let slow = naive_t_estimate(&x, &y, &cfg)?;
            if !close_rel(fast, slow, 1e-10) {
                eprintln!("  mismatch: α={alpha} β={beta} {kind:?}: {fast} vs {slow}");
                return Ok(false);
            }
        }
        let fast_l2 = divest::l2_squared(&x, &y, &cfg)?.value;
        let slow_l2 = divest::reference::naive_l2_squared(&x, &y, &cfg)?;
        if !close_rel(fast_l2, slow_l2, 1e-10) {
            return Ok(false);
        }
    }
    Ok(true)
}
