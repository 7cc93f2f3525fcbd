//! Command-line interface: run the directional goodness-of-fit and
//! independence tests on CSV data, reproduce the Monte Carlo convergence
//! experiments, and print smoothing-constant tables.
//!
//! Exit codes: 0 on success, 1 on runtime/numerical failure, 2 on usage
//! errors. Every randomized command either takes `--seed` or generates one
//! and prints it; reports always embed the seed, so reruns are exact.

mod io;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dirgof::estimators::Degree;
use dirgof::gof::{DirDirNull, DirLinNull, DirNull, RegressionNull};
use dirgof::kernels::{
    lambda_q, nu_d_sq, nu_d_sq_mc, nu_l_sq, r_k, DirectionalKernel, LinearKernel,
};
use dirgof::models::{
    ConstantRegression, DirDensity, DirDirDensity, DirDirFamily, DirFamily, DirLinFamily,
    LinFamily, VonMisesFisher,
};
use dirgof::quad::{DirDirRule, DirLinRule, LineRule, SphereRule};
use dirgof::resampling::{
    bootstrap_t1, bootstrap_t2, bootstrap_t4, permutation_t3, permutation_t5, wild_bootstrap_t6,
    CalibrationMethod, CalibrationPlan, WildMultipliers,
};
use dirgof::simlab::{
    default_ladder, full_ladder, run_size_power, run_t3_convergence, run_t6_convergence,
    write_size_power_outputs, write_t3_outputs, write_t6_outputs, ConvergenceConfig,
    SizePowerConfig,
};
use dirgof::{RngStream, UnitVector};
use io::{CsvColumns, Report};
use serde::Deserialize;
use std::f64::consts::PI;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "dirgof",
    about = "Smoothing-based goodness-of-fit and independence tests for directional data",
    version
)]
struct Cli {
    /// Worker threads (also settable through DIRGOF_THREADS); defaults to
    /// the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a calibrated test on CSV data.
    #[command(subcommand)]
    Test(TestCommand),
    /// Run a Monte Carlo experiment.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Print smoothing-constant tables for a kernel.
    Constants(ConstantsArgs),
}

#[derive(Args, Clone)]
struct CommonTestArgs {
    /// Input CSV path (header row required).
    #[arg(long)]
    data: PathBuf,
    /// Resampling replicates B.
    #[arg(long = "B", alias = "b", default_value_t = 199)]
    b: usize,
    /// Test level for the verdict line.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Master seed; generated and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Report output path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Subcommand, Clone)]
enum TestCommand {
    /// T1: directional density goodness-of-fit (parametric bootstrap).
    Density {
        #[command(flatten)]
        common: CommonTestArgs,
        /// Sphere dimension q of the data.
        #[arg(long, default_value_t = 1)]
        q: usize,
        /// Read a single `angle` column (radians) instead of x0..xq.
        #[arg(long)]
        angles: bool,
        #[arg(long)]
        h: f64,
        /// Null family: vmf (composite) or uniform (simple).
        #[arg(long, default_value = "vmf")]
        null: String,
        /// Fixed mean direction "c0,c1,..." (switches to a simple vMF null).
        #[arg(long)]
        mu: Option<String>,
        /// Fixed concentration (simple vMF null; requires --mu).
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// T2: directional-linear density goodness-of-fit (parametric bootstrap).
    DirlinDensity {
        #[command(flatten)]
        common: CommonTestArgs,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long)]
        angles: bool,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        g: f64,
    },
    /// T3: directional-linear independence (permutation).
    Indep {
        #[command(flatten)]
        common: CommonTestArgs,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long)]
        angles: bool,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        g: f64,
    },
    /// T4: directional-directional density goodness-of-fit (parametric bootstrap).
    DirdirDensity {
        #[command(flatten)]
        common: CommonTestArgs,
        #[arg(long, default_value_t = 1)]
        q1: usize,
        #[arg(long, default_value_t = 1)]
        q2: usize,
        #[arg(long)]
        h1: f64,
        #[arg(long)]
        h2: f64,
        /// Null family: vmf-vmf (composite) or uniform-uniform (simple).
        #[arg(long, default_value = "vmf-vmf")]
        null: String,
    },
    /// T5: directional-directional independence (permutation).
    DirdirIndep {
        #[command(flatten)]
        common: CommonTestArgs,
        #[arg(long, default_value_t = 1)]
        q1: usize,
        #[arg(long, default_value_t = 1)]
        q2: usize,
        #[arg(long)]
        h1: f64,
        #[arg(long)]
        h2: f64,
    },
    /// T6: regression goodness-of-fit against the constant family (wild bootstrap).
    Regression {
        #[command(flatten)]
        common: CommonTestArgs,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long)]
        angles: bool,
        #[arg(long)]
        h: f64,
        /// Local polynomial degree p (0 or 1).
        #[arg(long, default_value_t = 0)]
        degree: u8,
        /// Fixed constant c (switches to a simple null; requires --sigma2).
        #[arg(long)]
        c: Option<f64>,
        /// Fixed noise variance for the simple null.
        #[arg(long)]
        sigma2: Option<f64>,
        /// Wild multipliers: mammen or rademacher.
        #[arg(long, default_value = "mammen")]
        multipliers: String,
    },
}

#[derive(Args, Clone)]
struct SimCommonArgs {
    /// Sample sizes (comma separated); defaults to the desk-scale ladder.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Monte Carlo replicates per rung.
    #[arg(long = "M", alias = "m", default_value_t = 500)]
    m: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the CSV files.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Use the full ladder up to n = 5 x 10^5 (hours of compute).
    #[arg(long)]
    full: bool,
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Clone)]
enum SimCommand {
    /// Convergence of standardized T3 under independence.
    T3Convergence {
        #[command(flatten)]
        common: SimCommonArgs,
    },
    /// Convergence of standardized T6 under the constant regression null.
    T6Convergence {
        #[command(flatten)]
        common: SimCommonArgs,
        /// Bandwidth rate exponents, e.g. "1/3,1/5".
        #[arg(long, value_delimiter = ',', default_values_t = vec!["1/3".to_string(), "1/5".to_string()])]
        rates: Vec<String>,
    },
    /// Size/power study of a calibrated test.
    SizePower {
        /// JSON config file (see the size-power schema in the README).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct ConstantsArgs {
    /// Kernel label: vonmises, epanechnikov-type, gaussian, or uniform.
    #[arg(long)]
    kernel: String,
    /// Sphere dimension for directional kernels.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Seed for the approximate q > 3 path.
    #[arg(long)]
    seed: Option<u64>,
}

/// Config-file shape for the convergence experiments. Unknown fields are
/// rejected rather than silently dropped.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimFileConfig {
    n_ladder: Option<Vec<usize>>,
    replicates: Option<usize>,
    seed: Option<u64>,
    rates: Option<Vec<String>>,
    full: Option<bool>,
}

fn main() {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("DIRGOF_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} worker threads: {e}");
            std::process::exit(1);
        }
    }
    let result = match cli.command {
        Command::Test(cmd) => cmd_test(cmd),
        Command::Sim(cmd) => cmd_sim(cmd),
        Command::Constants(args) => cmd_constants(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            println!("generated seed: {s}");
            s
        }
    }
}

fn circle_resolution(h: f64) -> usize {
    let needed = (2.6 / (h * h)).ceil() as usize;
    needed.max(512).div_ceil(64) * 64
}

fn line_resolution(g: f64, width: f64) -> usize {
    let needed = (1.5 * width / g).ceil() as usize;
    needed.max(256).div_ceil(64) * 64
}

fn sphere_rule_for(q: usize, h: f64, seed: u64) -> Result<SphereRule> {
    let rule = match q {
        1 => SphereRule::deterministic(1, circle_resolution(h))?,
        2 => SphereRule::deterministic(2, 64)?,
        3 => SphereRule::deterministic(3, 24)?,
        // no deterministic rule beyond q = 3; Monte Carlo nodes, seeded
        _ => SphereRule::monte_carlo(q, 20_000, RngStream::new(seed).fork(u64::MAX - 1))?,
    };
    Ok(rule)
}

/// Truncated line rule covering the responses with a 5(g + sd) pad.
fn line_rule_for(responses: &[f64], g: f64) -> Result<LineRule> {
    let (lo, hi) = responses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &y| {
            (acc.0.min(y), acc.1.max(y))
        });
    let mean = responses.iter().sum::<f64>() / responses.len() as f64;
    let sd = (responses
        .iter()
        .map(|&y| (y - mean) * (y - mean))
        .sum::<f64>()
        / responses.len() as f64)
        .sqrt();
    let pad = 5.0 * (g + sd);
    Ok(LineRule::gauss_legendre(
        lo - pad,
        hi + pad,
        line_resolution(g, hi - lo + 2.0 * pad),
    )?)
}

/// The limit theory for the directional-linear statistics assumes the
/// bandwidths stay linked (h^q/g bounded away from 0 and infinity); a
/// strongly unbalanced pair is worth a warning but never an error.
fn bandwidth_bond_diagnostic(h: f64, q: usize, g: f64) -> Option<String> {
    let ratio = h.powi(q as i32) / g;
    (!(0.1..=10.0).contains(&ratio)).then(|| {
        format!("h^q/g = {ratio:.3} outside [0.1, 10]: the directional and linear bandwidths are strongly unbalanced")
    })
}

fn parse_mu(spec: &str) -> Result<UnitVector> {
    let coords: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse().context("bad --mu coordinate"))
        .collect::<Result<_>>()?;
    Ok(UnitVector::new(coords)?)
}

fn finish(report: Report, out: &PathBuf, diagnostics: &[String]) -> Result<()> {
    for d in diagnostics {
        eprintln!("warning: {d}");
    }
    report.write(out)?;
    println!("{}", report.verdict_line());
    Ok(())
}

fn cmd_test(cmd: TestCommand) -> Result<()> {
    let vm = DirectionalKernel::VonMises;
    let gauss = LinearKernel::Gaussian;
    match cmd {
        TestCommand::Density {
            common,
            q,
            angles,
            h,
            null,
            mu,
            kappa,
        } => {
            let seed = resolve_seed(common.seed);
            let table = CsvColumns::read(&common.data)?;
            let sample = table.directions("x", q, angles)?;
            let null_spec = match (null.as_str(), &mu, kappa) {
                ("uniform", _, _) => DirNull::Fixed(DirDensity::Uniform { q }),
                ("vmf", None, None) => DirNull::Fit(DirFamily::VonMisesFisher),
                ("vmf", Some(mu_spec), Some(kappa)) => DirNull::Fixed(DirDensity::Vmf(
                    VonMisesFisher::new(parse_mu(mu_spec)?, kappa)?,
                )),
                ("vmf", _, _) => bail!("a fixed vMF null needs both --mu and --kappa"),
                (other, _, _) => bail!("unknown null family `{other}`"),
            };
            let rule = sphere_rule_for(sample.q(), h, seed)?;
            let mut diagnostics = Vec::new();
            if let Some(warning) =
                dirgof::estimators::effective_sample_diagnostic(sample.n(), h, sample.q())
            {
                diagnostics.push(warning);
            }
            let plan = CalibrationPlan::new(
                CalibrationMethod::ParametricBootstrap,
                common.b,
                RngStream::new(seed),
            )?;
            let outcome = bootstrap_t1(&sample, h, &vm, &null_spec, &rule, &plan)?;
            let config = serde_json::json!({
                "subcommand": "density", "data": common.data, "q": q, "angles": angles,
                "h": h, "null": null, "mu": mu, "kappa": kappa, "B": common.b,
                "alpha": common.alpha, "seed": seed,
            });
            finish(
                Report::from_outcome(&outcome, common.alpha, config, diagnostics.clone()),
                &common.out,
                &diagnostics,
            )
        }
        TestCommand::DirlinDensity {
            common,
            q,
            angles,
            h,
            g,
        } => {
            let seed = resolve_seed(common.seed);
            let table = CsvColumns::read(&common.data)?;
            let sample = table.dirlin(q, angles)?;
            let rule = DirLinRule::new(
                sphere_rule_for(sample.directions().q(), h, seed)?,
                line_rule_for(sample.responses(), g)?,
            );
            let family = DirLinFamily {
                dir: DirFamily::VonMisesFisher,
                lin: LinFamily::Gaussian,
            };
            let mut diagnostics = Vec::new();
            if let Some(w) = bandwidth_bond_diagnostic(h, sample.directions().q(), g) {
                diagnostics.push(w);
            }
            let plan = CalibrationPlan::new(
                CalibrationMethod::ParametricBootstrap,
                common.b,
                RngStream::new(seed),
            )?;
            let outcome = bootstrap_t2(
                &sample,
                h,
                g,
                &vm,
                &gauss,
                &DirLinNull::Fit(family),
                &rule,
                &plan,
            )?;
            let config = serde_json::json!({
                "subcommand": "dirlin-density", "data": common.data, "q": q,
                "angles": angles, "h": h, "g": g, "B": common.b,
                "alpha": common.alpha, "seed": seed,
            });
            finish(
                Report::from_outcome(&outcome, common.alpha, config, diagnostics.clone()),
                &common.out,
                &diagnostics,
            )
        }
        TestCommand::Indep {
            common,
            q,
            angles,
            h,
            g,
        } => {
            let seed = resolve_seed(common.seed);
            let table = CsvColumns::read(&common.data)?;
            let sample = table.dirlin(q, angles)?;
            let rule = DirLinRule::new(
                sphere_rule_for(sample.directions().q(), h, seed)?,
                line_rule_for(sample.responses(), g)?,
            );
            let mut diagnostics = Vec::new();
            if let Some(w) = bandwidth_bond_diagnostic(h, sample.directions().q(), g) {
                diagnostics.push(w);
            }
            let plan = CalibrationPlan::new(
                CalibrationMethod::Permutation,
                common.b,
                RngStream::new(seed),
            )?;
            let outcome = permutation_t3(&sample, h, g, &vm, &gauss, &rule, &plan)?;
            let config = serde_json::json!({
                "subcommand": "indep", "data": common.data, "q": q, "angles": angles,
                "h": h, "g": g, "B": common.b, "alpha": common.alpha, "seed": seed,
            });
            finish(
                Report::from_outcome(&outcome, common.alpha, config, diagnostics.clone()),
                &common.out,
                &diagnostics,
            )
        }
        TestCommand::DirdirDensity {
            common,
            q1,
            q2,
            h1,
            h2,
            null,
        } => {
            let seed = resolve_seed(common.seed);
            let table = CsvColumns::read(&common.data)?;
            let sample = table.dirdir(q1, q2)?;
            let rule = DirDirRule::new(
                sphere_rule_for(q1, h1, seed)?,
                sphere_rule_for(q2, h2, seed.wrapping_add(1))?,
            );
            let null_spec = match null.as_str() {
                "vmf-vmf" => DirDirNull::Fit(DirDirFamily {
                    first: DirFamily::VonMisesFisher,
                    second: DirFamily::VonMisesFisher,
                }),
                "uniform-uniform" => DirDirNull::Fixed(DirDirDensity {
                    first: DirDensity::Uniform { q: q1 },
                    second: DirDensity::Uniform { q: q2 },
                }),
                other => bail!("unknown null family `{other}`"),
            };
            let plan = CalibrationPlan::new(
                CalibrationMethod::ParametricBootstrap,
                common.b,
                RngStream::new(seed),
            )?;
            let outcome = bootstrap_t4(&sample, h1, h2, &vm, &null_spec, &rule, &plan)?;
            let config = serde_json::json!({
                "subcommand": "dirdir-density", "data": common.data, "q1": q1, "q2": q2,
                "h1": h1, "h2": h2, "null": null, "B": common.b,
                "alpha": common.alpha, "seed": seed,
            });
            finish(
                Report::from_outcome(&outcome, common.alpha, config, vec![]),
                &common.out,
                &[],
            )
        }
        TestCommand::DirdirIndep {
            common,
            q1,
            q2,
            h1,
            h2,
        } => {
            let seed = resolve_seed(common.seed);
            let table = CsvColumns::read(&common.data)?;
            let sample = table.dirdir(q1, q2)?;
            let rule = DirDirRule::new(
                sphere_rule_for(q1, h1, seed)?,
                sphere_rule_for(q2, h2, seed.wrapping_add(1))?,
            );
            let plan = CalibrationPlan::new(
                CalibrationMethod::Permutation,
                common.b,
                RngStream::new(seed),
            )?;
            let outcome = permutation_t5(&sample, h1, h2, &vm, &rule, &plan)?;
            let config = serde_json::json!({
                "subcommand": "dirdir-indep", "data": common.data, "q1": q1, "q2": q2,
                "h1": h1, "h2": h2, "B": common.b, "alpha": common.alpha, "seed": seed,
            });
            finish(
                Report::from_outcome(&outcome, common.alpha, config, vec![]),
                &common.out,
                &[],
            )
        }
        TestCommand::Regression {
            common,
            q,
            angles,
            h,
            degree,
            c,
            sigma2,
            multipliers,
        } => {
            let seed = resolve_seed(common.seed);
            let table = CsvColumns::read(&common.data)?;
            let sample = table.dirlin(q, angles)?;
            let p = match degree {
                0 => Degree::Constant,
                1 => Degree::Linear,
                other => bail!("--degree must be 0 or 1, got {other}"),
            };
            let null_spec = match (c, sigma2) {
                (None, None) => RegressionNull::FitConstant,
                (Some(c), Some(sigma2)) => {
                    RegressionNull::Fixed(ConstantRegression { c, sigma2 })
                }
                _ => bail!("a fixed constant null needs both --c and --sigma2"),
            };
            let mult = match multipliers.as_str() {
                "mammen" => WildMultipliers::Mammen,
                "rademacher" => WildMultipliers::Rademacher,
                other => bail!("unknown multiplier law `{other}`"),
            };
            let rule = sphere_rule_for(sample.directions().q(), h, seed)?;
            let plan = CalibrationPlan::new(
                CalibrationMethod::WildBootstrap,
                common.b,
                RngStream::new(seed),
            )?;
            let outcome = wild_bootstrap_t6(
                &sample,
                h,
                &vm,
                p,
                &null_spec,
                |_| 1.0,
                &rule,
                &plan,
                mult,
            )?;
            let config = serde_json::json!({
                "subcommand": "regression", "data": common.data, "q": q, "angles": angles,
                "h": h, "degree": degree, "c": c, "sigma2": sigma2,
                "multipliers": multipliers, "B": common.b,
                "alpha": common.alpha, "seed": seed,
            });
            finish(
                Report::from_outcome(&outcome, common.alpha, config, vec![]),
                &common.out,
                &[],
            )
        }
    }
}

fn parse_rate(label: &str) -> Result<(String, f64)> {
    let value = if let Some((num, den)) = label.split_once('/') {
        let num: f64 = num.trim().parse().context("bad rate numerator")?;
        let den: f64 = den.trim().parse().context("bad rate denominator")?;
        if den == 0.0 {
            bail!("rate denominator is zero in `{label}`");
        }
        num / den
    } else {
        label.trim().parse().context("bad rate")?
    };
    if !(value > 0.0) {
        bail!("rate `{label}` must be positive");
    }
    Ok((label.trim().to_string(), value))
}

fn load_sim_file(path: &Option<PathBuf>) -> Result<SimFileConfig> {
    match path {
        None => Ok(SimFileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))?;
            Ok(serde_json::from_str(&text)
                .with_context(|| format!("invalid config {}", p.display()))?)
        }
    }
}

fn convergence_config(common: &SimCommonArgs) -> Result<(ConvergenceConfig, SimFileConfig, u64)> {
    let file = load_sim_file(&common.config)?;
    // flags override config-file values
    let full = common.full || file.full.unwrap_or(false);
    let ladder = common
        .n
        .clone()
        .or_else(|| file.n_ladder.clone())
        .unwrap_or_else(|| if full { full_ladder() } else { default_ladder() });
    let replicates = if common.m != 500 {
        common.m
    } else {
        file.replicates.unwrap_or(common.m)
    };
    let seed = resolve_seed(common.seed.or(file.seed));
    Ok((
        ConvergenceConfig {
            n_ladder: ladder,
            replicates,
            seed,
        },
        file,
        seed,
    ))
}

fn cmd_sim(cmd: SimCommand) -> Result<()> {
    match cmd {
        SimCommand::T3Convergence { common } => {
            let (config, _file, seed) = convergence_config(&common)?;
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("t3_convergence_config.json"),
                serde_json::to_string_pretty(&config)? + "\n",
            )?;
            let result = run_t3_convergence(&config)?;
            write_t3_outputs(&result, &common.out)?;
            for rung in &result.rungs {
                println!(
                    "n = {:>8}: KS = {:.4} (p = {:.3e}), SW p = {}",
                    rung.n,
                    rung.report.ks_statistic,
                    rung.report.ks_p,
                    rung.report
                        .sw_p
                        .map(|p| format!("{p:.3e}"))
                        .unwrap_or_else(|| "n/a".into())
                );
            }
            println!(
                "t3-convergence outputs written to {} (seed {seed})",
                common.out.display()
            );
            Ok(())
        }
        SimCommand::T6Convergence { common, rates } => {
            let (config, file, seed) = convergence_config(&common)?;
            let rate_labels = if rates.is_empty() {
                file.rates.unwrap_or_default()
            } else {
                rates
            };
            let parsed: Vec<(String, f64)> = rate_labels
                .iter()
                .map(|r| parse_rate(r))
                .collect::<Result<_>>()?;
            std::fs::create_dir_all(&common.out)?;
            std::fs::write(
                common.out.join("t6_convergence_config.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "n_ladder": config.n_ladder, "replicates": config.replicates,
                    "seed": config.seed, "rates": rate_labels,
                }))? + "\n",
            )?;
            let result = run_t6_convergence(&config, &parsed)?;
            write_t6_outputs(&result, &common.out)?;
            for rung in &result.rungs {
                println!(
                    "n = {:>8}, r = {:>5}: KS = {:.4} (p = {:.3e})",
                    rung.n, rung.rate_label, rung.report.ks_statistic, rung.report.ks_p
                );
            }
            println!(
                "t6-convergence outputs written to {} (seed {seed})",
                common.out.display()
            );
            Ok(())
        }
        SimCommand::SizePower { config, out, seed } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read {}", config.display()))?;
            let mut parsed: SizePowerConfig = serde_json::from_str(&text)
                .with_context(|| format!("invalid config {}", config.display()))?;
            if let Some(seed) = seed {
                parsed.seed = seed;
            }
            std::fs::create_dir_all(&out)?;
            std::fs::write(
                out.join("size_power_config.json"),
                serde_json::to_string_pretty(&parsed)? + "\n",
            )?;
            let result = run_size_power(&parsed)?;
            write_size_power_outputs(&parsed, &result, &out)?;
            for row in &result.rows {
                println!(
                    "alpha = {:.3}: rejection rate {:.4} (se {:.4})",
                    row.alpha, row.rejection_rate, row.standard_error
                );
            }
            println!("size-power outputs written to {}", out.display());
            Ok(())
        }
    }
}

fn cmd_constants(args: ConstantsArgs) -> Result<()> {
    let q = args.q;
    match args.kernel.as_str() {
        "vonmises" | "epanechnikov-type" => {
            let l = match args.kernel.as_str() {
                "vonmises" => DirectionalKernel::VonMises,
                _ => DirectionalKernel::EpanechnikovType,
            };
            let lam = lambda_q(&l, q, false)?;
            let lam2 = lambda_q(&l, q, true)?;
            let ratio = lam2 / (lam * lam);
            println!("kernel = {}, q = {q}", l.label());
            println!("lambda_q(L)          = {lam:.9}");
            println!("lambda_q(L^2)        = {lam2:.9}");
            let ratio_line = match (&l, q) {
                (DirectionalKernel::VonMises, 1) => {
                    let closed = 1.0 / (2.0 * PI.sqrt());
                    format!(
                        "lambda ratio         = {ratio:.9}  (closed form {closed:.9}, delta {:.2e})",
                        (ratio - closed).abs()
                    )
                }
                _ => format!("lambda ratio         = {ratio:.9}"),
            };
            println!("{ratio_line}");
            if q <= 3 {
                let nu = nu_d_sq(&l, q)?;
                match l {
                    DirectionalKernel::VonMises => {
                        let closed = (8.0 * PI).powf(-(q as f64) / 2.0);
                        println!(
                            "nu_d^2               = {nu:.9}  (closed form {closed:.9}, delta {:.2e})",
                            (nu - closed).abs()
                        );
                    }
                    _ => println!("nu_d^2               = {nu:.9}"),
                }
            } else {
                let stream = RngStream::new(resolve_seed(args.seed));
                let (nu, se) = nu_d_sq_mc(&l, q, 2000, stream)?;
                println!(
                    "nu_d^2               = {nu:.6} (approximate: Monte Carlo, se {se:.2e})"
                );
            }
            Ok(())
        }
        "gaussian" | "uniform" => {
            let k = match args.kernel.as_str() {
                "gaussian" => LinearKernel::Gaussian,
                _ => LinearKernel::Uniform,
            };
            let rk = r_k(&k)?;
            let nl = nu_l_sq(&k)?;
            println!("kernel = {}", k.label());
            match k {
                LinearKernel::Gaussian => {
                    let rk_closed = 1.0 / (2.0 * PI.sqrt());
                    let nl_closed = (8.0 * PI).powf(-0.5);
                    println!(
                        "R(K)                 = {rk:.9}  (closed form {rk_closed:.9}, delta {:.2e})",
                        (rk - rk_closed).abs()
                    );
                    println!(
                        "nu_l^2               = {nl:.9}  (closed form {nl_closed:.9}, delta {:.2e})",
                        (nl - nl_closed).abs()
                    );
                }
                _ => {
                    println!("R(K)                 = {rk:.9}");
                    println!("nu_l^2               = {nl:.9}");
                }
            }
            Ok(())
        }
        other => bail!("unknown kernel label `{other}`"),
    }
}
