//! Monte Carlo experiment engine: replicated standardized statistics,
//! normality diagnostics (Kolmogorov-Smirnov, Shapiro-Wilk), QQ data,
//! density-of-statistic summaries, and size/power studies.
//!
//! Two convergence experiments are built in. The first replicates the
//! independence statistic T₃ on circular-linear data from
//! vMF(μ=(0,1), κ=1) × N(0,1) with h_n = g_n = 2n^{-1/3}; the second
//! replicates the regression statistic T₆ on Y = 1 + ε, ε ~ N(0, 1/4),
//! X uniform on the circle, with h_n = n^{-r}/2 for configurable rates r.
//! Standardizing constants are always obtained from the kernels/models
//! modules and cross-checked against their closed forms before any
//! replication starts.
//!
//! Determinism contract: replicate j of rung r draws from
//! `seed.fork(rung).fork(j)`, reductions are ordered by index, and CSV
//! emission uses shortest round-trip float formatting, so identical
//! (config, seed) produce byte-identical outputs for any worker count.

use crate::error::{DirGofError, Result};
use crate::estimators::{Degree, DirLinSample, DirSample};
use crate::gof::{
    t3_asymptotics, t3_statistic, t6_asymptotics, t6_statistic, DirNull, RegressionNull,
};
use crate::kernels::{nu_l_sq, r_k, DirectionalKernel, LinearKernel};
use crate::models::{
    r_functional_dir, r_functional_lin, vmf_sample, DirFamily, LinDensity, VonMisesFisher,
};
use crate::quad::{DirLinRule, LineRule, SphereRule};
use crate::resampling::{
    bootstrap_t1, permutation_t3, wild_bootstrap_t6, CalibrationMethod, CalibrationPlan,
    WildMultipliers,
};
use crate::rng::RngStream;
use crate::special::{bessel_i, std_normal_cdf, std_normal_quantile};
use crate::sphere::{sample_uniform_sphere, UnitVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Bandwidth policy c · n^{-e}, evaluated along the n ladder.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandwidthPolicy {
    pub coefficient: f64,
    pub exponent: f64,
}

impl BandwidthPolicy {
    pub fn eval(&self, n: usize) -> f64 {
        self.coefficient * (n as f64).powf(-self.exponent)
    }

    pub fn describe(&self) -> String {
        format!("{}·n^(-{})", self.coefficient, self.exponent)
    }
}

/// Shared experiment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Sample sizes, one rung per entry.
    pub n_ladder: Vec<usize>,
    /// Monte Carlo replicates per rung (M ≥ 2).
    pub replicates: usize,
    pub seed: u64,
}

impl ConvergenceConfig {
    fn validate(&self, policies: &[BandwidthPolicy]) -> Result<()> {
        if self.replicates < 2 {
            return Err(DirGofError::InvalidConfig {
                field: "replicates".into(),
                reason: format!("M = {} < 2", self.replicates),
            });
        }
        if self.n_ladder.is_empty() || self.n_ladder.iter().any(|&n| n == 0) {
            return Err(DirGofError::InvalidConfig {
                field: "n_ladder".into(),
                reason: "ladder must list positive sample sizes".into(),
            });
        }
        for policy in policies {
            for &n in &self.n_ladder {
                if !(policy.eval(n) > 0.0) {
                    return Err(DirGofError::InvalidConfig {
                        field: "bandwidth policy".into(),
                        reason: format!("{} nonpositive at n={n}", policy.describe()),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Default desk-scale ladder (runs in minutes).
pub fn default_ladder() -> Vec<usize> {
    vec![10, 50, 100, 500, 1000, 5000, 10_000]
}

/// The full ladder n = 5^k × 10^l of the convergence experiments, capped
/// at 5 × 10⁵.
pub fn full_ladder() -> Vec<usize> {
    let mut ladder = Vec::new();
    for l in 1..=5u32 {
        ladder.push(10usize.pow(l));
        if 5 * 10usize.pow(l) <= 500_000 {
            ladder.push(5 * 10usize.pow(l));
        }
    }
    ladder
}

// experiment grids scale with the bandwidth so the rules stay resolved
fn circle_resolution(h: f64) -> usize {
    let needed = (2.6 / (h * h)).ceil() as usize;
    needed.max(512).div_ceil(64) * 64
}

fn line_resolution(g: f64, width: f64) -> usize {
    let needed = (1.5 * width / g).ceil() as usize;
    needed.max(256).div_ceil(64) * 64
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Normality diagnostics of a replicated standardized sample.
#[derive(Debug, Clone, Serialize)]
pub struct NormalityReport {
    pub ks_statistic: f64,
    pub ks_p: f64,
    pub sw_statistic: Option<f64>,
    pub sw_p: Option<f64>,
    pub sample_size: usize,
}

/// One-sample Kolmogorov-Smirnov test against the fixed standard normal:
/// D = sup |F̂ - Φ| and the asymptotic Kolmogorov-series p-value.
pub fn ks_test_std_normal(values: &[f64]) -> Result<(f64, f64)> {
    let m = values.len();
    if m < 2 {
        return Err(DirGofError::UnsupportedSampleSize {
            n: m,
            what: "Kolmogorov-Smirnov test".into(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let mf = m as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = std_normal_cdf(x);
        d = d
            .max((cdf - i as f64 / mf).abs())
            .max(((i as f64 + 1.0) / mf - cdf).abs());
    }
    Ok((d, kolmogorov_upper_tail(mf.sqrt() * d)))
}

/// P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}, summed to 1e-10 convergence
/// (at least 100 terms available).
fn kolmogorov_upper_tail(lambda: f64) -> f64 {
    if lambda <= 1e-10 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for k in 1..=1000 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        total += sign * term;
        sign = -sign;
        if k >= 100 && term < 1e-10 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Shapiro-Wilk W statistic and p-value via Royston's AS R94
/// approximation; supported for 3 ≤ n ≤ 5000.
pub fn shapiro_wilk(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if !(3..=5000).contains(&n) {
        return Err(DirGofError::UnsupportedSampleSize {
            n,
            what: "Shapiro-Wilk test".into(),
        });
    }
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let range = x[n - 1] - x[0];
    if !(range > 0.0) {
        return Err(DirGofError::InvalidConfig {
            field: "values".into(),
            reason: "zero range".into(),
        });
    }
    let nf = n as f64;
    // expected normal order statistics (Blom-type scores)
    let m: Vec<f64> = (1..=n)
        .map(|i| std_normal_quantile((i as f64 - 0.375) / (nf + 0.25)))
        .collect();
    let ssumm2: f64 = m.iter().map(|v| v * v).sum();
    let rsn = 1.0 / nf.sqrt();
    let mut a = vec![0.0; n];
    if n == 3 {
        a[0] = (0.5f64).sqrt();
        a[2] = -a[0];
    } else {
        // Royston's polynomial end corrections
        let a_n = -2.706056 * rsn.powi(5) + 4.434685 * rsn.powi(4) - 2.071190 * rsn.powi(3)
            - 0.147981 * rsn.powi(2)
            + 0.221157 * rsn
            + m[n - 1] / ssumm2.sqrt();
        let phi;
        if n > 5 {
            let a_n1 = -3.582633 * rsn.powi(5) + 5.682633 * rsn.powi(4)
                - 1.752461 * rsn.powi(3)
                - 0.293762 * rsn.powi(2)
                + 0.042981 * rsn
                + m[n - 2] / ssumm2.sqrt();
            phi = (ssumm2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
                / (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
            a[n - 1] = a_n;
            a[n - 2] = a_n1;
            a[0] = -a_n;
            a[1] = -a_n1;
            for i in 2..n - 2 {
                a[i] = m[i] / phi.sqrt();
            }
        } else {
            phi = (ssumm2 - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * a_n * a_n);
            a[n - 1] = a_n;
            a[0] = -a_n;
            for i in 1..n - 1 {
                a[i] = m[i] / phi.sqrt();
            }
        }
    }
    let mean = x.iter().sum::<f64>() / nf;
    let ssq: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let b: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
    let w = ((b * b) / ssq).min(1.0);

    let p = if n == 3 {
        let pw = 6.0 / PI * ((w.sqrt().asin()) - (0.75f64.sqrt().asin()));
        pw.clamp(0.0, 1.0)
    } else if n <= 11 {
        let gamma = 0.459 * nf - 2.273;
        let wt = -(gamma - (1.0 - w).ln()).ln();
        let mu = 0.5440 - 0.39978 * nf + 0.025054 * nf * nf - 0.0006714 * nf * nf * nf;
        let sigma = (1.3822 - 0.77857 * nf + 0.062767 * nf * nf - 0.0020322 * nf * nf * nf).exp();
        1.0 - std_normal_cdf((wt - mu) / sigma)
    } else {
        let u = nf.ln();
        let wt = (1.0 - w).ln();
        let mu = -1.5861 - 0.31082 * u - 0.083751 * u * u + 0.0038915 * u * u * u;
        let sigma = (-0.4803 - 0.082676 * u + 0.0030302 * u * u).exp();
        1.0 - std_normal_cdf((wt - mu) / sigma)
    };
    Ok((w, p))
}

fn normality_report(values: &[f64]) -> Result<NormalityReport> {
    let (ks_statistic, ks_p) = ks_test_std_normal(values)?;
    let (sw_statistic, sw_p) = match shapiro_wilk(values) {
        Ok((w, p)) => (Some(w), Some(p)),
        Err(_) => (None, None),
    };
    Ok(NormalityReport {
        ks_statistic,
        ks_p,
        sw_statistic,
        sw_p,
        sample_size: values.len(),
    })
}

/// Paired quantiles for a QQ plot against the standard normal, at plotting
/// positions (i - 1/2)/M.
#[derive(Debug, Clone, Serialize)]
pub struct QQData {
    pub theoretical: Vec<f64>,
    pub empirical: Vec<f64>,
}

pub fn qq_data(values: &[f64]) -> Result<QQData> {
    let m = values.len();
    if m < 2 {
        return Err(DirGofError::UnsupportedSampleSize {
            n: m,
            what: "QQ data".into(),
        });
    }
    let mut empirical = values.to_vec();
    empirical.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let theoretical = (1..=m)
        .map(|i| std_normal_quantile((i as f64 - 0.5) / m as f64))
        .collect();
    Ok(QQData {
        theoretical,
        empirical,
    })
}

/// Density curve of a replicated statistic (Gaussian kernel, normal
/// reference bandwidth) for external plotting.
pub fn density_curve(values: &[f64], grid_len: usize) -> Vec<(f64, f64)> {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m).sqrt();
    let bw = (1.06 * sd * m.powf(-0.2)).max(1e-12);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bw;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
    (0..grid_len)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (grid_len as f64 - 1.0);
            let dens = values
                .iter()
                .map(|&v| {
                    let z = (x - v) / bw;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                / (m * bw * (2.0 * PI).sqrt());
            (x, dens)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Experiment 1: T3 convergence
// ---------------------------------------------------------------------------

/// Per-rung output of the T₃ convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct T3Rung {
    pub n: usize,
    pub h: f64,
    pub g: f64,
    pub statistics: Vec<f64>,
    pub standardized: Vec<f64>,
    pub report: NormalityReport,
    pub qq: QQData,
    pub density: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct T3ConvergenceResult {
    pub rungs: Vec<T3Rung>,
}

/// Null model of the first experiment: vMF(μ=(0,1), κ=1) × N(0,1).
fn t3_experiment_models() -> (VonMisesFisher, LinDensity) {
    let mu = UnitVector::new(vec![0.0, 1.0]).expect("unit axis");
    (
        VonMisesFisher::new(mu, 1.0).expect("valid concentration"),
        LinDensity::Gaussian { mean: 0.0, sd: 1.0 },
    )
}

/// Replicates T₃ under independence with h_n = g_n = 2n^{-1/3} and emits
/// the standardized sample with normality diagnostics per rung.
pub fn run_t3_convergence(config: &ConvergenceConfig) -> Result<T3ConvergenceResult> {
    let policy = BandwidthPolicy {
        coefficient: 2.0,
        exponent: 1.0 / 3.0,
    };
    config.validate(&[policy])?;
    let l = DirectionalKernel::VonMises;
    let k = LinearKernel::Gaussian;
    let consts = l.constants(1)?;
    let rk = r_k(&k)?;
    let nl = nu_l_sq(&k)?;
    let (dir_model, lin_model) = t3_experiment_models();
    let master = RngStream::new(config.seed);

    let mut rungs = Vec::with_capacity(config.n_ladder.len());
    for (rung_idx, &n) in config.n_ladder.iter().enumerate() {
        let h = policy.eval(n);
        let g = h;
        let rule = DirLinRule::new(
            SphereRule::deterministic(1, circle_resolution(h))?,
            LineRule::gauss_legendre(-12.0, 12.0, line_resolution(g, 24.0))?,
        );
        // standardization constants come from the library's quadrature and
        // must agree with their closed forms before any replication
        let r_fx = r_functional_dir(|x| dir_model.density(x), &rule.sphere);
        let r_fy = r_functional_lin(|y| lin_model.density(y), &rule.line);
        let r_fx_closed = bessel_i(0.0, 2.0) / (2.0 * PI * bessel_i(0.0, 1.0).powi(2));
        let r_fy_closed = 1.0 / (2.0 * PI.sqrt());
        check_standardization("R(f_X)", r_fx, r_fx_closed, 1e-6)?;
        check_standardization("R(f_Y)", r_fy, r_fy_closed, 1e-6)?;
        check_standardization("nu_d^2", consts.nu_d_sq, (8.0 * PI).powf(-0.5), 1e-6)?;
        check_standardization("nu_l^2", nl, (8.0 * PI).powf(-0.5), 1e-6)?;
        check_standardization("R(K)", rk, 1.0 / (2.0 * PI.sqrt()), 1e-8)?;
        check_standardization(
            "lambda ratio",
            consts.bias_ratio(),
            1.0 / (2.0 * PI.sqrt()),
            1e-6,
        )?;
        let asy = t3_asymptotics(n, h, g, 1, &consts, rk, nl, r_fx, r_fy);
        let scale = asy.variance.sqrt();

        let rung_stream = master.fork(rung_idx as u64);
        let statistics: Vec<f64> = (0..config.replicates)
            .into_par_iter()
            .map(|j| {
                let stream = rung_stream.fork(j as u64);
                let dirs = vmf_sample(&dir_model.mu, dir_model.kappa, n, stream.fork(0));
                let ys = lin_model.sample(n, stream.fork(1));
                let sample = DirLinSample::new(
                    DirSample::new(dirs).expect("sampler output"),
                    ys,
                )
                .expect("matched lengths");
                t3_statistic(&sample, h, g, &l, &k, &rule)
            })
            .collect::<Result<Vec<f64>>>()?;
        let standardized: Vec<f64> = statistics
            .iter()
            .map(|&t| asy.rate_factor * (t - asy.center) / scale)
            .collect();
        let report = normality_report(&standardized)?;
        let qq = qq_data(&standardized)?;
        let density = density_curve(&standardized, 256);
        rungs.push(T3Rung {
            n,
            h,
            g,
            statistics,
            standardized,
            report,
            qq,
            density,
        });
    }
    Ok(T3ConvergenceResult { rungs })
}

fn check_standardization(name: &str, got: f64, closed: f64, tol: f64) -> Result<()> {
    if (got - closed).abs() > tol {
        return Err(DirGofError::InvalidConfig {
            field: format!("standardization constant {name}"),
            reason: format!("quadrature {got} vs closed form {closed}"),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiment 2: T6 convergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct T6Rung {
    pub n: usize,
    pub rate_label: String,
    pub rate: f64,
    pub h: f64,
    pub statistics: Vec<f64>,
    pub standardized: Vec<f64>,
    pub report: NormalityReport,
    pub qq: QQData,
}

#[derive(Debug, Clone, Serialize)]
pub struct T6ConvergenceResult {
    pub rungs: Vec<T6Rung>,
}

/// Replicates T₆ on the model Y = 1 + ε, ε ~ N(0, 1/4), X uniform on the
/// circle, under the composite constant null with the local constant fit,
/// for bandwidths h_n = n^{-r}/2 per requested rate. Replicate data are
/// shared across rates (the draw depends only on (rung, replicate)), so
/// rate comparisons are matched.
pub fn run_t6_convergence(
    config: &ConvergenceConfig,
    rates: &[(String, f64)],
) -> Result<T6ConvergenceResult> {
    if rates.is_empty() {
        return Err(DirGofError::InvalidConfig {
            field: "rates".into(),
            reason: "at least one bandwidth rate required".into(),
        });
    }
    let policies: Vec<BandwidthPolicy> = rates
        .iter()
        .map(|&(_, r)| BandwidthPolicy {
            coefficient: 0.5,
            exponent: r,
        })
        .collect();
    config.validate(&policies)?;
    let l = DirectionalKernel::VonMises;
    let consts = l.constants(1)?;
    let sigma = 0.5;
    let master = RngStream::new(config.seed);

    let mut rungs = Vec::new();
    for (rung_idx, &n) in config.n_ladder.iter().enumerate() {
        let rung_stream = master.fork(rung_idx as u64);
        // one dataset per replicate, shared across rates
        let data: Vec<DirLinSample> = (0..config.replicates)
            .into_par_iter()
            .map(|j| {
                let stream = rung_stream.fork(j as u64);
                let dirs = sample_uniform_sphere(1, n, stream.fork(0));
                let mut rng = stream.fork(1).rng();
                let ys: Vec<f64> = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        1.0 + sigma * z
                    })
                    .collect();
                DirLinSample::new(DirSample::new(dirs).expect("sampler output"), ys)
                    .expect("matched lengths")
            })
            .collect();

        for ((label, rate), policy) in rates.iter().zip(&policies) {
            let h = policy.eval(n);
            let rule = SphereRule::deterministic(1, circle_resolution(h))?;
            // σ² ≡ 1/4 of the data-generating process, w ≡ 1
            let int_sigma2_w = rule.integrate(|_| sigma * sigma);
            let r_sigma2_w = rule.integrate(|_| (sigma * sigma) * (sigma * sigma));
            let asy = t6_asymptotics(n, h, 1, &consts, int_sigma2_w, r_sigma2_w)?;
            // the scale must invert (128/π)^{1/4} and the center must be
            // √π/(4nh) for this noise level
            let inv_scale = 1.0 / asy.variance.sqrt();
            check_standardization("(128/pi)^(1/4)", inv_scale, (128.0 / PI).powf(0.25), 1e-10)?;
            check_standardization(
                "T6 center",
                asy.center,
                PI.sqrt() / (4.0 * n as f64 * h),
                1e-10,
            )?;
            let scale = asy.variance.sqrt();

            let statistics: Vec<f64> = data
                .par_iter()
                .map(|sample| {
                    t6_statistic(
                        sample,
                        h,
                        &l,
                        Degree::Constant,
                        &RegressionNull::FitConstant,
                        |_| 1.0,
                        &rule,
                    )
                    .map(|(t, _, _)| t)
                })
                .collect::<Result<Vec<f64>>>()?;
            let standardized: Vec<f64> = statistics
                .iter()
                .map(|&t| asy.rate_factor * (t - asy.center) / scale)
                .collect();
            let report = normality_report(&standardized)?;
            let qq = qq_data(&standardized)?;
            rungs.push(T6Rung {
                n,
                rate_label: label.clone(),
                rate: *rate,
                h,
                statistics,
                standardized,
                report,
                qq,
            });
        }
    }
    Ok(T6ConvergenceResult { rungs })
}

// ---------------------------------------------------------------------------
// Experiment 3: size / power
// ---------------------------------------------------------------------------

/// Data-generating processes for the size/power harness.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataProcess {
    /// X ~ vMF((0,1), κ) and Y ~ N(0,1), independent (null for T₃).
    IndepVmfGauss { kappa: f64 },
    /// X uniform on the circle, Y = sin(angle of X) + N(0, noise_sd²).
    DependentSine { noise_sd: f64 },
    /// Directional-only vMF((0,1), κ) draws (null for T₁).
    VmfDirectional { kappa: f64 },
    /// X uniform on the circle, Y = c + N(0, noise_sd²) (null for T₆).
    RegressionConstant { c: f64, noise_sd: f64 },
}

impl DataProcess {
    fn draw_dirlin(&self, n: usize, stream: RngStream) -> Result<DirLinSample> {
        match self {
            Self::IndepVmfGauss { kappa } => {
                let mu = UnitVector::new(vec![0.0, 1.0])?;
                let dirs = vmf_sample(&mu, *kappa, n, stream.fork(0));
                let ys = LinDensity::Gaussian { mean: 0.0, sd: 1.0 }.sample(n, stream.fork(1));
                DirLinSample::new(DirSample::new(dirs)?, ys)
            }
            Self::DependentSine { noise_sd } => {
                let dirs = sample_uniform_sphere(1, n, stream.fork(0));
                let mut rng = stream.fork(1).rng();
                let ys: Vec<f64> = dirs
                    .iter()
                    .map(|x| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x.angle().sin() + noise_sd * z
                    })
                    .collect();
                DirLinSample::new(DirSample::new(dirs)?, ys)
            }
            Self::RegressionConstant { c, noise_sd } => {
                let dirs = sample_uniform_sphere(1, n, stream.fork(0));
                let mut rng = stream.fork(1).rng();
                let ys: Vec<f64> = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        c + noise_sd * z
                    })
                    .collect();
                DirLinSample::new(DirSample::new(dirs)?, ys)
            }
            Self::VmfDirectional { .. } => Err(DirGofError::InvalidConfig {
                field: "process".into(),
                reason: "directional-only process asked for paired data".into(),
            }),
        }
    }

    fn draw_dir(&self, n: usize, stream: RngStream) -> Result<DirSample> {
        match self {
            Self::VmfDirectional { kappa } => {
                let mu = UnitVector::new(vec![0.0, 1.0])?;
                DirSample::new(vmf_sample(&mu, *kappa, n, stream.fork(0)))
            }
            _ => Err(DirGofError::InvalidConfig {
                field: "process".into(),
                reason: "paired process asked for directional-only data".into(),
            }),
        }
    }
}

/// Which calibrated test the size/power harness runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestSpec {
    /// Composite vMF null, parametric bootstrap.
    T1Bootstrap { h: f64 },
    /// Permutation-calibrated independence test.
    T3Permutation { h: f64, g: f64 },
    /// Wild-bootstrap regression test, composite constant null, p = 0.
    T6Wild { h: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizePowerConfig {
    pub process: DataProcess,
    pub test: TestSpec,
    pub n: usize,
    /// Monte Carlo repetitions M.
    pub repetitions: usize,
    /// Resampling replicates B per repetition.
    pub bootstrap_replicates: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizePowerRow {
    pub alpha: f64,
    pub rejection_rate: f64,
    pub standard_error: f64,
    pub rejections: usize,
    pub repetitions: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizePowerResult {
    pub rows: Vec<SizePowerRow>,
    pub p_values: Vec<f64>,
}

/// M independent calibrated tests; rejection rate (p_resampled ≤ α) at each
/// requested level with its binomial standard error.
pub fn run_size_power(config: &SizePowerConfig) -> Result<SizePowerResult> {
    if config.repetitions < 1 {
        return Err(DirGofError::InvalidConfig {
            field: "repetitions".into(),
            reason: "M must be positive".into(),
        });
    }
    let master = RngStream::new(config.seed);
    let l = DirectionalKernel::VonMises;
    let k = LinearKernel::Gaussian;

    let p_values: Vec<f64> = (0..config.repetitions)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let rep_stream = master.fork(j as u64);
            let data_stream = rep_stream.fork(0);
            let plan_stream = rep_stream.fork(1);
            match config.test {
                TestSpec::T1Bootstrap { h } => {
                    let sample = config.process.draw_dir(config.n, data_stream)?;
                    let rule = SphereRule::deterministic(1, circle_resolution(h))?;
                    let plan = CalibrationPlan::new(
                        CalibrationMethod::ParametricBootstrap,
                        config.bootstrap_replicates,
                        plan_stream,
                    )?;
                    let out = bootstrap_t1(
                        &sample,
                        h,
                        &l,
                        &DirNull::Fit(DirFamily::VonMisesFisher),
                        &rule,
                        &plan,
                    )?;
                    Ok(out.p_resampled)
                }
                TestSpec::T3Permutation { h, g } => {
                    let sample = config.process.draw_dirlin(config.n, data_stream)?;
                    let span = sample
                        .responses()
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &y| {
                            (acc.0.min(y), acc.1.max(y))
                        });
                    let sd = {
                        let mean =
                            sample.responses().iter().sum::<f64>() / sample.n() as f64;
                        (sample
                            .responses()
                            .iter()
                            .map(|&y| (y - mean) * (y - mean))
                            .sum::<f64>()
                            / sample.n() as f64)
                            .sqrt()
                    };
                    let pad = 5.0 * (g + sd);
                    let rule = DirLinRule::new(
                        SphereRule::deterministic(1, circle_resolution(h))?,
                        LineRule::gauss_legendre(
                            span.0 - pad,
                            span.1 + pad,
                            line_resolution(g, span.1 - span.0 + 2.0 * pad),
                        )?,
                    );
                    let plan = CalibrationPlan::new(
                        CalibrationMethod::Permutation,
                        config.bootstrap_replicates,
                        plan_stream,
                    )?;
                    let out = permutation_t3(&sample, h, g, &l, &k, &rule, &plan)?;
                    Ok(out.p_resampled)
                }
                TestSpec::T6Wild { h } => {
                    let sample = config.process.draw_dirlin(config.n, data_stream)?;
                    let rule = SphereRule::deterministic(1, circle_resolution(h))?;
                    let plan = CalibrationPlan::new(
                        CalibrationMethod::WildBootstrap,
                        config.bootstrap_replicates,
                        plan_stream,
                    )?;
                    let out = wild_bootstrap_t6(
                        &sample,
                        h,
                        &l,
                        Degree::Constant,
                        &RegressionNull::FitConstant,
                        |_| 1.0,
                        &rule,
                        &plan,
                        WildMultipliers::Mammen,
                    )?;
                    Ok(out.p_resampled)
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let m = config.repetitions;
    let rows = config
        .alphas
        .iter()
        .map(|&alpha| {
            let rejections = p_values.iter().filter(|&&p| p <= alpha).count();
            let rate = rejections as f64 / m as f64;
            SizePowerRow {
                alpha,
                rejection_rate: rate,
                standard_error: (rate * (1.0 - rate) / m as f64).sqrt(),
                rejections,
                repetitions: m,
            }
        })
        .collect();
    Ok(SizePowerResult {
        rows,
        p_values,
    })
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn sanitize(label: &str) -> String {
    label.replace('/', "over").replace([' ', '.'], "_")
}

/// Writes the T₃ experiment CSVs (replicates, diagnostics, QQ and density
/// files per rung) plus a human-readable summary.
pub fn write_t3_outputs(result: &T3ConvergenceResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let experiment = "t3-convergence";
    let mut replicate_rows = Vec::new();
    let mut diag_rows = Vec::new();
    for rung in &result.rungs {
        for (j, (&t, &s)) in rung
            .statistics
            .iter()
            .zip(&rung.standardized)
            .enumerate()
        {
            replicate_rows.push(vec![
                experiment.to_string(),
                rung.n.to_string(),
                fmt(rung.h),
                fmt(rung.g),
                j.to_string(),
                fmt(t),
                fmt(s),
            ]);
        }
        diag_rows.push(vec![
            experiment.to_string(),
            rung.n.to_string(),
            fmt(rung.report.ks_statistic),
            fmt(rung.report.ks_p),
            rung.report.sw_statistic.map(fmt).unwrap_or_default(),
            rung.report.sw_p.map(fmt).unwrap_or_default(),
        ]);
        let qq_rows: Vec<Vec<String>> = rung
            .qq
            .theoretical
            .iter()
            .zip(&rung.qq.empirical)
            .map(|(&t, &e)| vec![fmt(t), fmt(e)])
            .collect();
        write_csv(
            &dir.join(format!("t3_convergence_qq_n{}.csv", rung.n)),
            &["theoretical_q", "empirical_q"],
            &qq_rows,
        )?;
        let density_rows: Vec<Vec<String>> = rung
            .density
            .iter()
            .map(|&(x, d)| {
                vec![
                    experiment.to_string(),
                    rung.n.to_string(),
                    fmt(x),
                    fmt(d),
                ]
            })
            .collect();
        write_csv(
            &dir.join(format!("t3_convergence_density_n{}.csv", rung.n)),
            &["experiment", "n", "x", "density"],
            &density_rows,
        )?;
    }
    write_csv(
        &dir.join("t3_convergence_replicates.csv"),
        &[
            "experiment",
            "n",
            "h",
            "g_or_rate",
            "replicate",
            "statistic",
            "standardized",
        ],
        &replicate_rows,
    )?;
    write_csv(
        &dir.join("t3_convergence_diagnostics.csv"),
        &["experiment", "n", "ks_stat", "ks_p", "sw_stat", "sw_p"],
        &diag_rows,
    )?;
    let mut summary = String::new();
    summary.push_str("T3 convergence toward the asymptotic normal law\n");
    summary.push_str("null: vMF(mu=(0,1), kappa=1) x N(0,1), h = g = 2 n^(-1/3)\n\n");
    for rung in &result.rungs {
        summary.push_str(&format!(
            "n = {:>8}  h = {:.5}  M = {}  KS = {:.4} (p = {:.3e})  SW p = {}\n",
            rung.n,
            rung.h,
            rung.statistics.len(),
            rung.report.ks_statistic,
            rung.report.ks_p,
            rung.report
                .sw_p
                .map(|p| format!("{p:.3e}"))
                .unwrap_or_else(|| "n/a".into()),
        ));
    }
    let mut file = std::fs::File::create(dir.join("t3_convergence_summary.txt"))?;
    file.write_all(summary.as_bytes())?;
    Ok(())
}

/// Writes the T₆ experiment CSVs and summary; QQ files are emitted per
/// (n, rate) pair.
pub fn write_t6_outputs(result: &T6ConvergenceResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut replicate_rows = Vec::new();
    let mut diag_rows = Vec::new();
    for rung in &result.rungs {
        let experiment = format!("t6-convergence r={}", rung.rate_label);
        for (j, (&t, &s)) in rung
            .statistics
            .iter()
            .zip(&rung.standardized)
            .enumerate()
        {
            replicate_rows.push(vec![
                experiment.clone(),
                rung.n.to_string(),
                fmt(rung.h),
                rung.rate_label.clone(),
                j.to_string(),
                fmt(t),
                fmt(s),
            ]);
        }
        diag_rows.push(vec![
            experiment.clone(),
            rung.n.to_string(),
            fmt(rung.report.ks_statistic),
            fmt(rung.report.ks_p),
            rung.report.sw_statistic.map(fmt).unwrap_or_default(),
            rung.report.sw_p.map(fmt).unwrap_or_default(),
        ]);
        let qq_rows: Vec<Vec<String>> = rung
            .qq
            .theoretical
            .iter()
            .zip(&rung.qq.empirical)
            .map(|(&t, &e)| vec![fmt(t), fmt(e)])
            .collect();
        write_csv(
            &dir.join(format!(
                "t6_convergence_qq_n{}_r{}.csv",
                rung.n,
                sanitize(&rung.rate_label)
            )),
            &["theoretical_q", "empirical_q"],
            &qq_rows,
        )?;
    }
    write_csv(
        &dir.join("t6_convergence_replicates.csv"),
        &[
            "experiment",
            "n",
            "h",
            "g_or_rate",
            "replicate",
            "statistic",
            "standardized",
        ],
        &replicate_rows,
    )?;
    write_csv(
        &dir.join("t6_convergence_diagnostics.csv"),
        &["experiment", "n", "ks_stat", "ks_p", "sw_stat", "sw_p"],
        &diag_rows,
    )?;
    let mut summary = String::new();
    summary.push_str("T6 convergence toward the asymptotic normal law\n");
    summary.push_str("model: Y = 1 + eps, eps ~ N(0, 1/4), X uniform circle; h = n^(-r)/2\n\n");
    for rung in &result.rungs {
        summary.push_str(&format!(
            "n = {:>8}  r = {:>5}  h = {:.5}  KS = {:.4} (p = {:.3e})\n",
            rung.n, rung.rate_label, rung.h, rung.report.ks_statistic, rung.report.ks_p,
        ));
    }
    let mut file = std::fs::File::create(dir.join("t6_convergence_summary.txt"))?;
    file.write_all(summary.as_bytes())?;
    Ok(())
}

/// Writes the size/power rejection table and p-value list.
pub fn write_size_power_outputs(
    config: &SizePowerConfig,
    result: &SizePowerResult,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            vec![
                "size-power".to_string(),
                config.n.to_string(),
                fmt(r.alpha),
                r.rejections.to_string(),
                r.repetitions.to_string(),
                fmt(r.rejection_rate),
                fmt(r.standard_error),
            ]
        })
        .collect();
    write_csv(
        &dir.join("size_power_rates.csv"),
        &[
            "experiment",
            "n",
            "alpha",
            "rejections",
            "repetitions",
            "rate",
            "se",
        ],
        &rows,
    )?;
    let p_rows: Vec<Vec<String>> = result
        .p_values
        .iter()
        .enumerate()
        .map(|(j, &p)| vec![j.to_string(), fmt(p)])
        .collect();
    write_csv(
        &dir.join("size_power_pvalues.csv"),
        &["repetition", "p_resampled"],
        &p_rows,
    )?;
    let mut summary = String::new();
    summary.push_str(&format!(
        "size/power study: {:?} under {:?}, n = {}, M = {}, B = {}\n\n",
        config.test, config.process, config.n, config.repetitions, config.bootstrap_replicates
    ));
    for r in &result.rows {
        summary.push_str(&format!(
            "alpha = {:.3}: rejection rate {:.4} (se {:.4})\n",
            r.alpha, r.rejection_rate, r.standard_error
        ));
    }
    let mut file = std::fs::File::create(dir.join("size_power_summary.txt"))?;
    file.write_all(summary.as_bytes())?;
    Ok(())
}
