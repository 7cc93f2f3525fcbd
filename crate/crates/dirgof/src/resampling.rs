//! Finite-sample calibration of the test statistics: parametric bootstrap
//! for T₁/T₂/T₄, wild bootstrap for T₆, permutation for T₃/T₅.
//!
//! Replicates run in parallel over the replicate index b, each drawing from
//! the forked stream `plan.stream.fork(b)`, so results are byte-identical
//! for any worker count. The resampled p-value uses the finite-B valid
//! convention p = (1 + #{T*_b ≥ T}) / (B + 1).
//!
//! The permutation drivers exploit that permuting the pairing leaves the
//! marginal KDEs unchanged: with column-centered kernel matrices Ã, B̃ and
//! their weighted Gram matrices G, H, the statistic equals
//! n^{-2} Σ_{i,k} G_{ik} H_{π(i)π(k)}, so each permutation costs O(n²)
//! instead of a full grid pass.

use crate::error::{DirGofError, Result};
use crate::estimators::{
    dir_kernel_matrix, kde_dir_batch, lin_kernel_matrix, locpoly_weight_matrix, Bandwidths,
    Degree, DirDirSample, DirLinSample, DirSample,
};
use crate::gof::{
    t1_asymptotics, t1_statistic_with, t2_asymptotics, t2_statistic_with, t3_asymptotics,
    t4_asymptotics, t4_statistic_with, t5_asymptotics, t6_asymptotics, t6_statistic_with,
    DirDirNull, DirLinNull, DirNull, HypothesisMode, OutcomeMeta, RegressionNull, TestOutcome,
};
use crate::kernels::{nu_l_sq, r_k, DirectionalKernel, LinearKernel};
use crate::models::{r_functional_dir, r_functional_lin, DirSmoother, LinSmoother};
use crate::quad::{sum_blocked, DirDirRule, DirLinRule, SphereRule};
use crate::rng::RngStream;
use crate::sphere::UnitVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Resampling mechanism, matched to statistics per the scheme: parametric
/// bootstrap (T₁, T₂, T₄), wild bootstrap (T₆), permutation (T₃, T₅).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMethod {
    ParametricBootstrap,
    WildBootstrap,
    Permutation,
}

/// Wild-bootstrap multiplier law. Mammen's two-point law matches the first
/// three moments of the residual perturbation; Rademacher is available as a
/// configuration switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WildMultipliers {
    Mammen,
    Rademacher,
}

impl WildMultipliers {
    /// One multiplier draw: E[V] = 0, E[V²] = 1.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            // values (1 ∓ √5)/2 with probabilities (√5 ± 1)/(2√5)
            Self::Mammen => {
                let sqrt5 = 5f64.sqrt();
                let p_low = (sqrt5 + 1.0) / (2.0 * sqrt5);
                if rng.random::<f64>() < p_low {
                    (1.0 - sqrt5) / 2.0
                } else {
                    (1.0 + sqrt5) / 2.0
                }
            }
            Self::Rademacher => {
                if rng.random::<f64>() < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// How a statistic is to be calibrated.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationPlan {
    pub method: CalibrationMethod,
    /// Number of resampling replicates B (at least 19).
    pub replicates: usize,
    pub stream: RngStream,
    /// Refit the null parameter on each resample (composite-null mimicry).
    /// Ignored for simple nulls and for permutation calibration.
    pub refit: bool,
}

impl CalibrationPlan {
    pub fn new(method: CalibrationMethod, replicates: usize, stream: RngStream) -> Result<Self> {
        if replicates < 19 {
            return Err(DirGofError::InvalidConfig {
                field: "replicates".into(),
                reason: format!("B = {replicates} < 19"),
            });
        }
        Ok(Self {
            method,
            replicates,
            stream,
            refit: true,
        })
    }

    fn expect_method(&self, wanted: CalibrationMethod, statistic: &str) -> Result<()> {
        if self.method != wanted {
            return Err(DirGofError::InvalidConfig {
                field: "method".into(),
                reason: format!("{statistic} is calibrated by {wanted:?}, plan says {:?}", self.method),
            });
        }
        Ok(())
    }
}

/// A test outcome together with its resampling calibration.
#[derive(Debug, Clone, Serialize)]
pub struct CalibratedOutcome {
    pub base: TestOutcome,
    pub method: CalibrationMethod,
    /// Statistics of the successful replicates, in replicate order.
    pub replicate_statistics: Vec<f64>,
    pub failed_replicates: usize,
    /// (1 + #{T* ≥ T}) / (#successful + 1); never exactly zero.
    pub p_resampled: f64,
    pub seed: u64,
}

/// The p-value convention shared by all drivers.
pub fn resampled_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&t| t >= observed).count();
    (1.0 + exceed as f64) / (replicates.len() as f64 + 1.0)
}

/// Runs `replicate` for b = 0..B in parallel with one retry per failure;
/// aborts when more than 5% of replicates fail.
fn run_replicates<F>(plan: &CalibrationPlan, replicate: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(RngStream) -> Result<f64> + Sync,
{
    let results: Vec<Option<f64>> = (0..plan.replicates)
        .into_par_iter()
        .map(|b| {
            let base = plan.stream.fork(b as u64);
            match replicate(base.fork(0)) {
                Ok(v) => Some(v),
                Err(_) => replicate(base.fork(1)).ok(),
            }
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed * 20 > plan.replicates {
        return Err(DirGofError::ResamplingFailure {
            failed,
            total: plan.replicates,
        });
    }
    Ok((results.into_iter().flatten().collect(), failed))
}

// ---------------------------------------------------------------------------
// Parametric bootstrap
// ---------------------------------------------------------------------------

/// Parametric bootstrap calibration of T₁. Draws size-n samples from the
/// resolved null, refits under composite nulls, and recomputes the
/// statistic with the same bandwidth and rule.
pub fn bootstrap_t1(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    null: &DirNull,
    rule: &SphereRule,
    plan: &CalibrationPlan,
) -> Result<CalibratedOutcome> {
    plan.expect_method(CalibrationMethod::ParametricBootstrap, "T1")?;
    let (model, mode) = null.resolve(sample)?;
    let smoother = DirSmoother::new(rule, l, h)?;
    let observed = t1_statistic_with(sample, h, l, &model, rule, &smoother)?;
    let consts = l.constants(sample.q())?;
    let r_f = r_functional_dir(|x| model.density(x), rule);
    let asy = t1_asymptotics(sample.n(), h, sample.q(), &consts, r_f, 0.05);
    let n = sample.n();
    let refit = plan.refit && mode == HypothesisMode::Composite;

    let (replicates, failed) = run_replicates(plan, |stream| {
        let resample = DirSample::new(model.sample(n, stream))?;
        let boot_model = if refit {
            match null {
                DirNull::Fit(family) => family.fit(&resample)?.model,
                DirNull::Fixed(_) => unreachable!("composite mode implies Fit"),
            }
        } else {
            model.clone()
        };
        t1_statistic_with(&resample, h, l, &boot_model, rule, &smoother)
    })?;

    let meta = OutcomeMeta {
        statistic_name: "T1".into(),
        n,
        bandwidths: Bandwidths::single(h)?,
        dir_kernel: l.label().to_string(),
        lin_kernel: None,
        theta: Some(model.describe()),
        mode,
    };
    let base = TestOutcome::from_parts(
        observed,
        asy.center,
        asy.variance,
        asy.rate_factor,
        "n h^(q/2)",
        meta,
    )?;
    let p_resampled = resampled_p_value(observed, &replicates);
    Ok(CalibratedOutcome {
        base,
        method: plan.method,
        replicate_statistics: replicates,
        failed_replicates: failed,
        p_resampled,
        seed: plan.stream.master_seed(),
    })
}

/// Parametric bootstrap calibration of T₂ (independence-product null).
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_t2(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    l: &DirectionalKernel,
    k: &LinearKernel,
    null: &DirLinNull,
    rule: &DirLinRule,
    plan: &CalibrationPlan,
) -> Result<CalibratedOutcome> {
    plan.expect_method(CalibrationMethod::ParametricBootstrap, "T2")?;
    let (model, mode) = null.resolve(sample)?;
    let dir_smoother = DirSmoother::new(&rule.sphere, l, h)?;
    let lin_smoother = LinSmoother::new(&rule.line, k, g)?;
    let observed =
        t2_statistic_with(sample, h, g, l, k, &model, rule, &dir_smoother, &lin_smoother)?;
    let consts = l.constants(sample.directions().q())?;
    let rk = r_k(k)?;
    let nl = nu_l_sq(k)?;
    let r_f = r_functional_dir(|x| model.dir.density(x), &rule.sphere)
        * r_functional_lin(|y| model.lin.density(y), &rule.line);
    let asy = t2_asymptotics(sample.n(), h, g, sample.directions().q(), &consts, rk, nl, r_f);
    let n = sample.n();
    let refit = plan.refit && mode == HypothesisMode::Composite;

    let (replicates, failed) = run_replicates(plan, |stream| {
        let dirs = DirSample::new(model.dir.sample(n, stream.fork(0)))?;
        let ys = model.lin.sample(n, stream.fork(1));
        let resample = DirLinSample::new(dirs, ys)?;
        let boot_model = if refit {
            match null {
                DirLinNull::Fit(family) => family.fit(&resample)?.model,
                DirLinNull::Fixed(_) => unreachable!("composite mode implies Fit"),
            }
        } else {
            model.clone()
        };
        t2_statistic_with(
            &resample,
            h,
            g,
            l,
            k,
            &boot_model,
            rule,
            &dir_smoother,
            &lin_smoother,
        )
    })?;

    let meta = OutcomeMeta {
        statistic_name: "T2".into(),
        n,
        bandwidths: Bandwidths::pair(h, g)?,
        dir_kernel: l.label().to_string(),
        lin_kernel: Some(k.label().to_string()),
        theta: Some(model.describe()),
        mode,
    };
    let base = TestOutcome::from_parts(
        observed,
        asy.center,
        asy.variance,
        asy.rate_factor,
        "n (h^q g)^(1/2)",
        meta,
    )?;
    let p_resampled = resampled_p_value(observed, &replicates);
    Ok(CalibratedOutcome {
        base,
        method: plan.method,
        replicate_statistics: replicates,
        failed_replicates: failed,
        p_resampled,
        seed: plan.stream.master_seed(),
    })
}

/// Parametric bootstrap calibration of T₄.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_t4(
    sample: &DirDirSample,
    h1: f64,
    h2: f64,
    l: &DirectionalKernel,
    null: &DirDirNull,
    rule: &DirDirRule,
    plan: &CalibrationPlan,
) -> Result<CalibratedOutcome> {
    plan.expect_method(CalibrationMethod::ParametricBootstrap, "T4")?;
    let (model, mode) = null.resolve(sample)?;
    let s1 = DirSmoother::new(&rule.first, l, h1)?;
    let s2 = DirSmoother::new(&rule.second, l, h2)?;
    let observed = t4_statistic_with(sample, h1, h2, l, &model, rule, &s1, &s2)?;
    let consts1 = l.constants(sample.first().q())?;
    let consts2 = l.constants(sample.second().q())?;
    let r_f = r_functional_dir(|x| model.first.density(x), &rule.first)
        * r_functional_dir(|x| model.second.density(x), &rule.second);
    let asy = t4_asymptotics(sample.n(), h1, h2, &consts1, &consts2, r_f, 0.05);
    let n = sample.n();
    let refit = plan.refit && mode == HypothesisMode::Composite;

    let (replicates, failed) = run_replicates(plan, |stream| {
        let first = DirSample::new(model.first.sample(n, stream.fork(0)))?;
        let second = DirSample::new(model.second.sample(n, stream.fork(1)))?;
        let resample = DirDirSample::new(first, second)?;
        let boot_model = if refit {
            match null {
                DirDirNull::Fit(family) => family.fit(&resample)?.model,
                DirDirNull::Fixed(_) => unreachable!("composite mode implies Fit"),
            }
        } else {
            model.clone()
        };
        t4_statistic_with(&resample, h1, h2, l, &boot_model, rule, &s1, &s2)
    })?;

    let meta = OutcomeMeta {
        statistic_name: "T4".into(),
        n,
        bandwidths: Bandwidths::pair(h1, h2)?,
        dir_kernel: l.label().to_string(),
        lin_kernel: None,
        theta: Some(model.describe()),
        mode,
    };
    let base = TestOutcome::from_parts(
        observed,
        asy.center,
        asy.variance,
        asy.rate_factor,
        "n (h1^q1 h2^q2)^(1/2)",
        meta,
    )?;
    let p_resampled = resampled_p_value(observed, &replicates);
    Ok(CalibratedOutcome {
        base,
        method: plan.method,
        replicate_statistics: replicates,
        failed_replicates: failed,
        p_resampled,
        seed: plan.stream.master_seed(),
    })
}

// ---------------------------------------------------------------------------
// Wild bootstrap (T6)
// ---------------------------------------------------------------------------

/// Wild bootstrap calibration of T₆: residuals are perturbed by mean-zero
/// unit-variance multipliers while the directions stay fixed, the null is
/// refitted, and the statistic recomputed with the same bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn wild_bootstrap_t6<W: Fn(&UnitVector) -> f64 + Sync>(
    sample: &DirLinSample,
    h: f64,
    l: &DirectionalKernel,
    p: Degree,
    null: &RegressionNull,
    w: W,
    rule: &SphereRule,
    plan: &CalibrationPlan,
    multipliers: WildMultipliers,
) -> Result<CalibratedOutcome> {
    plan.expect_method(CalibrationMethod::WildBootstrap, "T6")?;
    let (model, mode) = null.resolve(sample);
    let weight_matrix = locpoly_weight_matrix(sample.directions(), h, l, p, rule.nodes())?;
    let kde = kde_dir_batch(sample.directions(), h, l, rule.nodes())?;
    let means: Vec<f64> = sample
        .directions()
        .points()
        .iter()
        .map(|x| model.mean(x))
        .collect();
    let observed = t6_statistic_with(sample.responses(), &means, &weight_matrix, &kde, &w, rule)?;
    let consts = l.constants(sample.directions().q())?;
    let int_sigma2_w = rule.integrate(|x| model.sigma_sq(x) * w(x));
    let r_sigma2_w = r_functional_dir(|x| model.sigma_sq(x) * w(x), rule);
    let asy = t6_asymptotics(sample.n(), h, sample.directions().q(), &consts, int_sigma2_w, r_sigma2_w)?;

    let residuals: Vec<f64> = sample
        .responses()
        .iter()
        .zip(&means)
        .map(|(&y, &m)| y - m)
        .collect();
    let refit = plan.refit && mode == HypothesisMode::Composite;
    let n = sample.n();

    let (replicates, failed) = run_replicates(plan, |stream| {
        let mut rng = stream.rng();
        let ystar: Vec<f64> = means
            .iter()
            .zip(&residuals)
            .map(|(&m, &e)| m + e * multipliers.draw(&mut rng))
            .collect();
        let boot_means: Vec<f64> = if refit {
            let resample = DirLinSample::new(sample.directions().clone(), ystar.clone())?;
            let cstar = crate::models::fit_constant_regression(&resample).model.c;
            vec![cstar; n]
        } else {
            means.clone()
        };
        t6_statistic_with(&ystar, &boot_means, &weight_matrix, &kde, &w, rule)
    })?;

    let meta = OutcomeMeta {
        statistic_name: "T6".into(),
        n: sample.n(),
        bandwidths: Bandwidths::single(h)?,
        dir_kernel: l.label().to_string(),
        lin_kernel: None,
        theta: Some(model.describe()),
        mode,
    };
    let base = TestOutcome::from_parts(
        observed,
        asy.center,
        asy.variance,
        asy.rate_factor,
        "n h^(q/2)",
        meta,
    )?;
    let p_resampled = resampled_p_value(observed, &replicates);
    Ok(CalibratedOutcome {
        base,
        method: plan.method,
        replicate_statistics: replicates,
        failed_replicates: failed,
        p_resampled,
        seed: plan.stream.master_seed(),
    })
}

// ---------------------------------------------------------------------------
// Permutation (T3, T5)
// ---------------------------------------------------------------------------

/// Weighted Gram matrix of the column-centered kernel matrix: entry (i, k)
/// = Σ_j w_j (a_{ij} - ā_j)(a_{kj} - ā_j).
fn centered_gram(matrix: &[f64], n: usize, weights: &[f64]) -> Vec<f64> {
    let cols = weights.len();
    let mut centered = matrix.to_vec();
    for j in 0..cols {
        let mean = (0..n).map(|i| matrix[i * cols + j]).sum::<f64>() / n as f64;
        for i in 0..n {
            centered[i * cols + j] -= mean;
        }
    }
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        let rowi = &centered[i * cols..(i + 1) * cols];
        for kdx in i..n {
            let rowk = &centered[kdx * cols..(kdx + 1) * cols];
            let v = sum_blocked(
                rowi.iter()
                    .zip(rowk)
                    .zip(weights)
                    .map(|((&a, &b), &w)| w * a * b),
            );
            gram[i * n + kdx] = v;
            gram[kdx * n + i] = v;
        }
    }
    gram
}

/// n^{-2} Σ_{i,k} G_{ik} H_{π(i)π(k)} — the permuted statistic.
fn gram_statistic(g: &[f64], h: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let inv_n2 = 1.0 / (n as f64 * n as f64);
    let mut total = 0.0;
    for i in 0..n {
        let gi = &g[i * n..(i + 1) * n];
        let pi = perm[i] * n;
        let mut row = 0.0;
        for (kdx, &gik) in gi.iter().enumerate() {
            row += gik * h[pi + perm[kdx]];
        }
        total += row;
    }
    total * inv_n2
}

/// Permutation calibration of T₃: the second (linear) component is
/// permuted against the first. Permutations are drawn uniformly, identity
/// included. The statistic is evaluated through the Gram identity, which
/// is algebraically exact for the same quadrature rule.
pub fn permutation_t3(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    l: &DirectionalKernel,
    k: &LinearKernel,
    rule: &DirLinRule,
    plan: &CalibrationPlan,
) -> Result<CalibratedOutcome> {
    plan.expect_method(CalibrationMethod::Permutation, "T3")?;
    let n = sample.n();
    let a = dir_kernel_matrix(sample.directions(), h, l, rule.sphere.nodes())?;
    let b = lin_kernel_matrix(sample.responses(), g, k, rule.line.nodes());
    let gram_a = centered_gram(&a, n, rule.sphere.weights());
    let gram_b = centered_gram(&b, n, rule.line.weights());
    let identity: Vec<usize> = (0..n).collect();
    let observed = gram_statistic(&gram_a, &gram_b, &identity);

    // marginal KDE values at the rule nodes, for the plug-in asymptotics
    let j_len = rule.sphere.len();
    let k_len = rule.line.len();
    let dir_marg: Vec<f64> = (0..j_len)
        .map(|j| (0..n).map(|i| a[i * j_len + j]).sum::<f64>() / n as f64)
        .collect();
    let lin_marg: Vec<f64> = (0..k_len)
        .map(|j| (0..n).map(|i| b[i * k_len + j]).sum::<f64>() / n as f64)
        .collect();
    let r_fx = rule.sphere.integrate_values(
        &dir_marg.iter().map(|&v| v * v).collect::<Vec<_>>(),
    );
    let r_fy = rule
        .line
        .nodes()
        .iter()
        .zip(rule.line.weights())
        .enumerate()
        .map(|(j, (_, &w))| w * lin_marg[j] * lin_marg[j])
        .sum::<f64>();

    let consts = l.constants(sample.directions().q())?;
    let rk = r_k(k)?;
    let nl = nu_l_sq(k)?;
    let asy = t3_asymptotics(
        n,
        h,
        g,
        sample.directions().q(),
        &consts,
        rk,
        nl,
        r_fx,
        r_fy,
    );

    let (replicates, failed) = run_replicates(plan, |stream| {
        let mut rng = stream.rng();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        Ok(gram_statistic(&gram_a, &gram_b, &perm))
    })?;

    let meta = OutcomeMeta {
        statistic_name: "T3".into(),
        n,
        bandwidths: Bandwidths::pair(h, g)?,
        dir_kernel: l.label().to_string(),
        lin_kernel: Some(k.label().to_string()),
        theta: None,
        mode: HypothesisMode::Composite,
    };
    let base = TestOutcome::from_parts(
        observed,
        asy.center,
        asy.variance,
        asy.rate_factor,
        "n (h^q g)^(1/2)",
        meta,
    )?;
    let p_resampled = resampled_p_value(observed, &replicates);
    Ok(CalibratedOutcome {
        base,
        method: plan.method,
        replicate_statistics: replicates,
        failed_replicates: failed,
        p_resampled,
        seed: plan.stream.master_seed(),
    })
}

/// Permutation calibration of T₅: the second directional component is
/// permuted against the first.
pub fn permutation_t5(
    sample: &DirDirSample,
    h1: f64,
    h2: f64,
    l: &DirectionalKernel,
    rule: &DirDirRule,
    plan: &CalibrationPlan,
) -> Result<CalibratedOutcome> {
    plan.expect_method(CalibrationMethod::Permutation, "T5")?;
    let n = sample.n();
    let a = dir_kernel_matrix(sample.first(), h1, l, rule.first.nodes())?;
    let b = dir_kernel_matrix(sample.second(), h2, l, rule.second.nodes())?;
    let gram_a = centered_gram(&a, n, rule.first.weights());
    let gram_b = centered_gram(&b, n, rule.second.weights());
    let identity: Vec<usize> = (0..n).collect();
    let observed = gram_statistic(&gram_a, &gram_b, &identity);

    let j_len = rule.first.len();
    let k_len = rule.second.len();
    let m1: Vec<f64> = (0..j_len)
        .map(|j| (0..n).map(|i| a[i * j_len + j]).sum::<f64>() / n as f64)
        .collect();
    let m2: Vec<f64> = (0..k_len)
        .map(|j| (0..n).map(|i| b[i * k_len + j]).sum::<f64>() / n as f64)
        .collect();
    let r_f1 = rule
        .first
        .integrate_values(&m1.iter().map(|&v| v * v).collect::<Vec<_>>());
    let r_f2 = rule
        .second
        .integrate_values(&m2.iter().map(|&v| v * v).collect::<Vec<_>>());

    let consts1 = l.constants(sample.first().q())?;
    let consts2 = l.constants(sample.second().q())?;
    let asy = t5_asymptotics(n, h1, h2, &consts1, &consts2, r_f1, r_f2);

    let (replicates, failed) = run_replicates(plan, |stream| {
        let mut rng = stream.rng();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        Ok(gram_statistic(&gram_a, &gram_b, &perm))
    })?;

    let meta = OutcomeMeta {
        statistic_name: "T5".into(),
        n,
        bandwidths: Bandwidths::pair(h1, h2)?,
        dir_kernel: l.label().to_string(),
        lin_kernel: None,
        theta: None,
        mode: HypothesisMode::Composite,
    };
    let base = TestOutcome::from_parts(
        observed,
        asy.center,
        asy.variance,
        asy.rate_factor,
        "n (h1^q1 h2^q2)^(1/2)",
        meta,
    )?;
    let p_resampled = resampled_p_value(observed, &replicates);
    Ok(CalibratedOutcome {
        base,
        method: plan.method,
        replicate_statistics: replicates,
        failed_replicates: failed,
        p_resampled,
        seed: plan.stream.master_seed(),
    })
}
