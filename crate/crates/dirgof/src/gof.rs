//! The six L²-discrepancy test statistics and their asymptotic calibration.
//!
//! - T₁: directional density goodness-of-fit, ∫(f̂_h - L_h f_θ̂)².
//! - T₂: directional-linear density goodness-of-fit.
//! - T₃: directional-linear independence, ∫∫(f̂_{h,g} - f̂_h f̂_g)².
//! - T₄: directional-directional density goodness-of-fit.
//! - T₅: directional-directional independence.
//! - T₆: regression goodness-of-fit, ∫(m̂_{h,p} - 𝓛_{h,p}m_θ̂)² f̂_h w.
//!
//! Every integral is discretized by the quadrature rule the caller passes
//! in; the kernel-smoothed parametric targets share the same rule, which is
//! what makes the bias cancellation of the limit laws carry over to the
//! discretized statistics. Smoothed targets for the product nulls factor
//! across components (Fubini on an independence product), so the
//! directional and linear smoothing operators are applied marginally.

use crate::error::{DirGofError, Result};
use crate::estimators::{
    kde_dir_batch, kde_dirdir_grid, kde_dirlin_grid, locpoly_weights, Bandwidths, Degree,
    DirDirSample, DirLinSample, DirSample,
};
use crate::kernels::{DirectionalKernel, LinearKernel, SmoothingConstants};
use crate::models::{
    fit_constant_regression, ConstantRegression, DirDensity, DirDirDensity, DirDirFamily,
    DirFamily, DirLinDensity, DirLinFamily, DirSmoother, LinSmoother,
};
use crate::quad::{sum_blocked, DirDirRule, DirLinRule, SphereRule};
use crate::special::{std_normal_cdf, std_normal_quantile};
use crate::sphere::UnitVector;
use serde::Serialize;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// Outcome types
// ---------------------------------------------------------------------------

/// Whether the null parameter was supplied (simple hypothesis) or fitted
/// from the data (composite hypothesis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisMode {
    Simple,
    Composite,
}

/// Metadata recorded with every test outcome.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeMeta {
    pub statistic_name: String,
    pub n: usize,
    pub bandwidths: Bandwidths,
    pub dir_kernel: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lin_kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<serde_json::Value>,
    pub mode: HypothesisMode,
}

/// A computed statistic with its asymptotic normal calibration.
#[derive(Debug, Clone, Serialize)]
pub struct TestOutcome {
    /// The raw statistic value T ≥ 0.
    pub statistic: f64,
    /// Asymptotic centering term.
    pub center: f64,
    /// Standard deviation of the limit law (square root of its variance).
    pub scale: f64,
    /// rate_factor · (statistic - center) / scale.
    pub standardized: f64,
    /// Upper-tail standard normal probability of `standardized`.
    pub p_asymptotic: f64,
    /// The normalizing rate (e.g. n h^{q/2}) evaluated at (n, bandwidths).
    pub rate_factor: f64,
    /// Human-readable description of the rate.
    pub rate_desc: String,
    pub meta: OutcomeMeta,
}

impl TestOutcome {
    pub fn from_parts(
        statistic: f64,
        center: f64,
        variance: f64,
        rate_factor: f64,
        rate_desc: &str,
        meta: OutcomeMeta,
    ) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(DirGofError::DegenerateScale {
                context: format!("limit variance {variance} for {}", meta.statistic_name),
            });
        }
        let scale = variance.sqrt();
        let standardized = rate_factor * (statistic - center) / scale;
        let p_asymptotic = 1.0 - std_normal_cdf(standardized);
        Ok(Self {
            statistic,
            center,
            scale,
            standardized,
            p_asymptotic,
            rate_factor,
            rate_desc: rate_desc.to_string(),
            meta,
        })
    }
}

/// Local Pitman deviation Δ: a mean-zero direction of departure from the
/// null, with the rate exponent describing how fast it shrinks with n.
#[derive(Clone)]
pub struct PitmanDeviation {
    pub eval: Arc<dyn Fn(&UnitVector) -> f64 + Send + Sync>,
    pub rate_exponent: f64,
}

impl std::fmt::Debug for PitmanDeviation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PitmanDeviation(rate_exponent={})", self.rate_exponent)
    }
}

/// R(Δ), the mean shift the deviation induces in the limit laws. Errors if
/// Δ is not mean zero over the rule (tolerance 1e-6).
pub fn pitman_shift(delta: &PitmanDeviation, rule: &SphereRule) -> Result<f64> {
    let integral = rule.integrate(|x| (delta.eval)(x));
    if integral.abs() > 1e-6 {
        return Err(DirGofError::PitmanNotCentered { integral });
    }
    Ok(rule.integrate(|x| {
        let v = (delta.eval)(x);
        v * v
    }))
}

// ---------------------------------------------------------------------------
// Null-hypothesis specifications (simple = fixed θ₀, composite = fitted)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum DirNull {
    Fixed(DirDensity),
    Fit(DirFamily),
}

impl DirNull {
    pub fn resolve(&self, sample: &DirSample) -> Result<(DirDensity, HypothesisMode)> {
        match self {
            Self::Fixed(m) => Ok((m.clone(), HypothesisMode::Simple)),
            Self::Fit(family) => Ok((family.fit(sample)?.model, HypothesisMode::Composite)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DirLinNull {
    Fixed(DirLinDensity),
    Fit(DirLinFamily),
}

impl DirLinNull {
    pub fn resolve(&self, sample: &DirLinSample) -> Result<(DirLinDensity, HypothesisMode)> {
        match self {
            Self::Fixed(m) => Ok((m.clone(), HypothesisMode::Simple)),
            Self::Fit(family) => Ok((family.fit(sample)?.model, HypothesisMode::Composite)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DirDirNull {
    Fixed(DirDirDensity),
    Fit(DirDirFamily),
}

impl DirDirNull {
    pub fn resolve(&self, sample: &DirDirSample) -> Result<(DirDirDensity, HypothesisMode)> {
        match self {
            Self::Fixed(m) => Ok((m.clone(), HypothesisMode::Simple)),
            Self::Fit(family) => Ok((family.fit(sample)?.model, HypothesisMode::Composite)),
        }
    }
}

/// Regression null: the constant family, fixed or fitted.
#[derive(Debug, Clone)]
pub enum RegressionNull {
    Fixed(ConstantRegression),
    FitConstant,
}

impl RegressionNull {
    pub fn resolve(&self, sample: &DirLinSample) -> (ConstantRegression, HypothesisMode) {
        match self {
            Self::Fixed(m) => (*m, HypothesisMode::Simple),
            Self::FitConstant => (
                fit_constant_regression(sample).model,
                HypothesisMode::Composite,
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// T1: directional density goodness-of-fit
// ---------------------------------------------------------------------------

/// T₁ = ∫ (f̂_h(x) - L_h f_θ̂(x))² dx over the rule. Returns the statistic
/// and the resolved null model.
pub fn t1_statistic(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    null: &DirNull,
    rule: &SphereRule,
) -> Result<(f64, DirDensity, HypothesisMode)> {
    let (model, mode) = null.resolve(sample)?;
    if model.q() != sample.q() || rule.q() != sample.q() {
        return Err(DirGofError::DimensionMismatch {
            expected: sample.q(),
            got: model.q(),
        });
    }
    let smoother = DirSmoother::new(rule, l, h)?;
    let stat = t1_statistic_with(sample, h, l, &model, rule, &smoother)?;
    Ok((stat, model, mode))
}

/// T₁ with a precomputed smoothing operator (bootstrap loops reuse it).
pub fn t1_statistic_with(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    model: &DirDensity,
    rule: &SphereRule,
    smoother: &DirSmoother,
) -> Result<f64> {
    let kde = kde_dir_batch(sample, h, l, rule.nodes())?;
    let density: Vec<f64> = rule.nodes().iter().map(|y| model.density(y)).collect();
    let smoothed = smoother.apply(&density);
    let sq: Vec<f64> = kde
        .iter()
        .zip(&smoothed)
        .map(|(&f, &s)| (f - s) * (f - s))
        .collect();
    Ok(rule.integrate_values(&sq))
}

/// Asymptotic calibration of the directional-rate statistics (T₁, T₆).
#[derive(Debug, Clone, Copy)]
pub struct DirAsymptotics {
    pub center: f64,
    pub variance: f64,
    pub rate_factor: f64,
    /// Rejection threshold t_{α;n,q,θ₀} at the requested level (NaN where
    /// the source formulates no explicit threshold).
    pub threshold: f64,
}

/// center = (nh^q)^{-1} λ_q(L²)λ_q(L)^{-2}; variance = 2ν_d²R(f_θ);
/// threshold = center + h^{q/2} ν_d √(2R(f_θ)) z_α; rate n h^{q/2}.
pub fn t1_asymptotics(
    n: usize,
    h: f64,
    q: usize,
    consts: &SmoothingConstants,
    r_f: f64,
    alpha: f64,
) -> DirAsymptotics {
    let nf = n as f64;
    let hq = h.powi(q as i32);
    let center = consts.bias_ratio() / (nf * hq);
    let variance = 2.0 * consts.nu_d_sq * r_f;
    let z_alpha = std_normal_quantile(1.0 - alpha);
    let threshold = center + h.powf(q as f64 / 2.0) * consts.nu_d() * (2.0 * r_f).sqrt() * z_alpha;
    DirAsymptotics {
        center,
        variance,
        rate_factor: nf * h.powf(q as f64 / 2.0),
        threshold,
    }
}

/// Complete T₁ test with asymptotic p-value.
pub fn t1_test(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    null: &DirNull,
    rule: &SphereRule,
    alpha: f64,
) -> Result<(TestOutcome, DirDensity, DirAsymptotics)> {
    let (stat, model, mode) = t1_statistic(sample, h, l, null, rule)?;
    let consts = l.constants(sample.q())?;
    let r_f = crate::models::r_functional_dir(|x| model.density(x), rule);
    let asy = t1_asymptotics(sample.n(), h, sample.q(), &consts, r_f, alpha);
    let meta = OutcomeMeta {
        statistic_name: "T1".into(),
        n: sample.n(),
        bandwidths: Bandwidths::single(h)?,
        dir_kernel: l.label().to_string(),
        lin_kernel: None,
        theta: Some(model.describe()),
        mode,
    };
    let outcome = TestOutcome::from_parts(
        stat,
        asy.center,
        asy.variance,
        asy.rate_factor,
        "n h^(q/2)",
        meta,
    )?;
    Ok((outcome, model, asy))
}

// ---------------------------------------------------------------------------
// T2: directional-linear density goodness-of-fit
// ---------------------------------------------------------------------------

/// T₂ = ∫∫ (f̂_{h,g}(x,y) - LK_{h,g} f_θ̂(x,y))² dx dy over the product
/// rule. The smoothed target of the independence-product null factors into
/// (L_h f_dir)(x) · (K_g f_lin)(y).
#[allow(clippy::too_many_arguments)]
pub fn t2_statistic(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    l: &DirectionalKernel,
    k: &LinearKernel,
    null: &DirLinNull,
    rule: &DirLinRule,
) -> Result<(f64, DirLinDensity, HypothesisMode)> {
    let (model, mode) = null.resolve(sample)?;
    let dir_smoother = DirSmoother::new(&rule.sphere, l, h)?;
    let lin_smoother = LinSmoother::new(&rule.line, k, g)?;
    let stat = t2_statistic_with(sample, h, g, l, k, &model, rule, &dir_smoother, &lin_smoother)?;
    Ok((stat, model, mode))
}

#[allow(clippy::too_many_arguments)]
pub fn t2_statistic_with(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    l: &DirectionalKernel,
    k: &LinearKernel,
    model: &DirLinDensity,
    rule: &DirLinRule,
    dir_smoother: &DirSmoother,
    lin_smoother: &LinSmoother,
) -> Result<f64> {
    let grid = kde_dirlin_grid(sample, h, g, l, k, rule.sphere.nodes(), rule.line.nodes())?;
    let dir_density: Vec<f64> = rule
        .sphere
        .nodes()
        .iter()
        .map(|x| model.dir.density(x))
        .collect();
    let lin_density: Vec<f64> = rule
        .line
        .nodes()
        .iter()
        .map(|&y| model.lin.density(y))
        .collect();
    let sm_dir = dir_smoother.apply(&dir_density);
    let sm_lin = lin_smoother.apply(&lin_density);
    let k_len = rule.line.len();
    let sq: Vec<f64> = grid
        .joint
        .iter()
        .enumerate()
        .map(|(idx, &f)| {
            let target = sm_dir[idx / k_len] * sm_lin[idx % k_len];
            (f - target) * (f - target)
        })
        .collect();
    Ok(rule.integrate_values(&sq))
}

/// Asymptotic calibration of the directional-linear statistics (T₂, T₃).
#[derive(Debug, Clone, Copy)]
pub struct DirLinAsymptotics {
    pub center: f64,
    pub variance: f64,
    pub rate_factor: f64,
}

/// center = (nh^q g)^{-1} λ_q(L²)λ_q(L)^{-2} R(K);
/// variance = 2 ν_d² ν_l² R(f_θ); rate n (h^q g)^{1/2}.
pub fn t2_asymptotics(
    n: usize,
    h: f64,
    g: f64,
    q: usize,
    consts: &SmoothingConstants,
    r_k: f64,
    nu_l_sq: f64,
    r_f: f64,
) -> DirLinAsymptotics {
    let nf = n as f64;
    let hq = h.powi(q as i32);
    DirLinAsymptotics {
        center: consts.bias_ratio() * r_k / (nf * hq * g),
        variance: 2.0 * consts.nu_d_sq * nu_l_sq * r_f,
        rate_factor: nf * (hq * g).sqrt(),
    }
}

// ---------------------------------------------------------------------------
// T3: directional-linear independence
// ---------------------------------------------------------------------------

/// T₃ = ∫∫ (f̂_{h,g}(x,y) - f̂_h(x) f̂_g(y))² dx dy over the product rule.
pub fn t3_statistic(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    l: &DirectionalKernel,
    k: &LinearKernel,
    rule: &DirLinRule,
) -> Result<f64> {
    let grid = kde_dirlin_grid(sample, h, g, l, k, rule.sphere.nodes(), rule.line.nodes())?;
    let k_len = rule.line.len();
    let sq: Vec<f64> = grid
        .joint
        .iter()
        .enumerate()
        .map(|(idx, &f)| {
            let prod = grid.dir_marginal[idx / k_len] * grid.lin_marginal[idx % k_len];
            (f - prod) * (f - prod)
        })
        .collect();
    Ok(rule.integrate_values(&sq))
}

/// Centering A_n and the limit variance of T₃ under independence:
/// A_n = λ_q(L²)λ_q(L)^{-2}R(K)/(nh^q g) - λ_q(L²)λ_q(L)^{-2}R(f_Y)/(nh^q)
///       - R(K)R(f_X)/(ng); variance = 2ν_d²ν_l²R(f_X)R(f_Y).
#[allow(clippy::too_many_arguments)]
pub fn t3_asymptotics(
    n: usize,
    h: f64,
    g: f64,
    q: usize,
    consts: &SmoothingConstants,
    r_k: f64,
    nu_l_sq: f64,
    r_fx: f64,
    r_fy: f64,
) -> DirLinAsymptotics {
    let nf = n as f64;
    let hq = h.powi(q as i32);
    let br = consts.bias_ratio();
    DirLinAsymptotics {
        center: br * r_k / (nf * hq * g) - br * r_fy / (nf * hq) - r_k * r_fx / (nf * g),
        variance: 2.0 * consts.nu_d_sq * nu_l_sq * r_fx * r_fy,
        rate_factor: nf * (hq * g).sqrt(),
    }
}

// ---------------------------------------------------------------------------
// T4: directional-directional density goodness-of-fit
// ---------------------------------------------------------------------------

/// T₄ = ∫∫ (f̂_{h1,h2} - LL_{h1,h2} f_θ̂)² over the product rule; the
/// smoothed product null factors across the two spheres.
pub fn t4_statistic(
    sample: &DirDirSample,
    h1: f64,
    h2: f64,
    l: &DirectionalKernel,
    null: &DirDirNull,
    rule: &DirDirRule,
) -> Result<(f64, DirDirDensity, HypothesisMode)> {
    let (model, mode) = null.resolve(sample)?;
    let s1 = DirSmoother::new(&rule.first, l, h1)?;
    let s2 = DirSmoother::new(&rule.second, l, h2)?;
    let stat = t4_statistic_with(sample, h1, h2, l, &model, rule, &s1, &s2)?;
    Ok((stat, model, mode))
}

#[allow(clippy::too_many_arguments)]
pub fn t4_statistic_with(
    sample: &DirDirSample,
    h1: f64,
    h2: f64,
    l: &DirectionalKernel,
    model: &DirDirDensity,
    rule: &DirDirRule,
    first_smoother: &DirSmoother,
    second_smoother: &DirSmoother,
) -> Result<f64> {
    let grid = kde_dirdir_grid(sample, h1, h2, l, rule.first.nodes(), rule.second.nodes())?;
    let d1: Vec<f64> = rule
        .first
        .nodes()
        .iter()
        .map(|x| model.first.density(x))
        .collect();
    let d2: Vec<f64> = rule
        .second
        .nodes()
        .iter()
        .map(|x| model.second.density(x))
        .collect();
    let sm1 = first_smoother.apply(&d1);
    let sm2 = second_smoother.apply(&d2);
    let k_len = rule.second.len();
    let sq: Vec<f64> = grid
        .joint
        .iter()
        .enumerate()
        .map(|(idx, &f)| {
            let target = sm1[idx / k_len] * sm2[idx % k_len];
            (f - target) * (f - target)
        })
        .collect();
    Ok(rule.integrate_values(&sq))
}

/// Asymptotic calibration of the directional-directional statistics.
#[derive(Debug, Clone, Copy)]
pub struct DirDirAsymptotics {
    pub center: f64,
    pub variance: f64,
    pub rate_factor: f64,
    pub threshold: f64,
}

/// center = (n h1^{q1} h2^{q2})^{-1} Π_j λ_{qj}(L²)λ_{qj}(L)^{-2};
/// variance = 2 ν_{d1}² ν_{d2}² R(f_θ); threshold adds
/// (h1^{q1}h2^{q2})^{1/2} ν_{d1}ν_{d2} √(2R(f_θ)) z_α.
pub fn t4_asymptotics(
    n: usize,
    h1: f64,
    h2: f64,
    consts1: &SmoothingConstants,
    consts2: &SmoothingConstants,
    r_f: f64,
    alpha: f64,
) -> DirDirAsymptotics {
    let nf = n as f64;
    let hq = h1.powi(consts1.q as i32) * h2.powi(consts2.q as i32);
    let center = consts1.bias_ratio() * consts2.bias_ratio() / (nf * hq);
    let variance = 2.0 * consts1.nu_d_sq * consts2.nu_d_sq * r_f;
    let z_alpha = std_normal_quantile(1.0 - alpha);
    let threshold =
        center + hq.sqrt() * consts1.nu_d() * consts2.nu_d() * (2.0 * r_f).sqrt() * z_alpha;
    DirDirAsymptotics {
        center,
        variance,
        rate_factor: nf * hq.sqrt(),
        threshold,
    }
}

// ---------------------------------------------------------------------------
// T5: directional-directional independence
// ---------------------------------------------------------------------------

/// T₅ = ∫∫ (f̂_{h1,h2} - f̂_{h1} f̂_{h2})² over the product rule.
pub fn t5_statistic(
    sample: &DirDirSample,
    h1: f64,
    h2: f64,
    l: &DirectionalKernel,
    rule: &DirDirRule,
) -> Result<f64> {
    let grid = kde_dirdir_grid(sample, h1, h2, l, rule.first.nodes(), rule.second.nodes())?;
    let k_len = rule.second.len();
    let sq: Vec<f64> = grid
        .joint
        .iter()
        .enumerate()
        .map(|(idx, &f)| {
            let prod = grid.first_marginal[idx / k_len] * grid.second_marginal[idx % k_len];
            (f - prod) * (f - prod)
        })
        .collect();
    Ok(rule.integrate_values(&sq))
}

/// Centering B_n and limit variance of T₅ under independence:
/// B_n = Π_j br_j /(n h1^{q1} h2^{q2}) - br_1 R(f_{X2})/(n h1^{q1})
///       - br_2 R(f_{X1})/(n h2^{q2});
/// variance = 2 ν_{d1}² ν_{d2}² R(f_{X1}) R(f_{X2}).
pub fn t5_asymptotics(
    n: usize,
    h1: f64,
    h2: f64,
    consts1: &SmoothingConstants,
    consts2: &SmoothingConstants,
    r_f1: f64,
    r_f2: f64,
) -> DirDirAsymptotics {
    let nf = n as f64;
    let h1q = h1.powi(consts1.q as i32);
    let h2q = h2.powi(consts2.q as i32);
    let br1 = consts1.bias_ratio();
    let br2 = consts2.bias_ratio();
    let center = br1 * br2 / (nf * h1q * h2q) - br1 * r_f2 / (nf * h1q) - br2 * r_f1 / (nf * h2q);
    DirDirAsymptotics {
        center,
        variance: 2.0 * consts1.nu_d_sq * consts2.nu_d_sq * r_f1 * r_f2,
        rate_factor: nf * (h1q * h2q).sqrt(),
        threshold: f64::NAN,
    }
}

// ---------------------------------------------------------------------------
// T6: regression goodness-of-fit
// ---------------------------------------------------------------------------

/// T₆ = ∫ (m̂_{h,p}(x) - 𝓛_{h,p} m_θ̂(x))² f̂_h(x) w(x) dx over the rule.
/// Returns the statistic and resolved regression model.
pub fn t6_statistic<W: Fn(&UnitVector) -> f64>(
    sample: &DirLinSample,
    h: f64,
    l: &DirectionalKernel,
    p: Degree,
    null: &RegressionNull,
    w: W,
    rule: &SphereRule,
) -> Result<(f64, ConstantRegression, HypothesisMode)> {
    let (model, mode) = null.resolve(sample);
    let kde = kde_dir_batch(sample.directions(), h, l, rule.nodes())?;
    let mean_at_sample: Vec<f64> = sample
        .directions()
        .points()
        .iter()
        .map(|xi| model.mean(xi))
        .collect();
    // stream the local weight rows node by node; only the wild bootstrap
    // needs the full J × n matrix held in memory
    let contributions: Result<Vec<f64>> = rule
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let wx = w(x);
            if !(wx >= 0.0) {
                return Err(DirGofError::InvalidConfig {
                    field: "w".into(),
                    reason: format!("weight function negative ({wx}) at a rule node"),
                });
            }
            let row = locpoly_weights(sample.directions(), h, l, p, x)?;
            let m_hat = sum_blocked(
                row.iter()
                    .zip(sample.responses())
                    .map(|(&wi, &yi)| wi * yi),
            );
            let m_smooth = sum_blocked(
                row.iter()
                    .zip(&mean_at_sample)
                    .map(|(&wi, &mi)| wi * mi),
            );
            let d = m_hat - m_smooth;
            Ok(d * d * kde[j] * wx)
        })
        .collect();
    let stat = rule.integrate_values(&contributions?);
    Ok((stat, model, mode))
}

/// T₆ from precomputed local weights (J × n), KDE values at the rule nodes
/// and the null regression function evaluated at the sample points
/// (𝓛_{h,p} m_θ(x) = Σ_i W_i(x) m_θ(X_i)); the wild bootstrap reuses the
/// weights and KDE across replicates.
pub fn t6_statistic_with<W: Fn(&UnitVector) -> f64>(
    responses: &[f64],
    mean_at_sample: &[f64],
    weight_matrix: &[f64],
    kde_at_nodes: &[f64],
    w: &W,
    rule: &SphereRule,
) -> Result<f64> {
    let n = responses.len();
    assert_eq!(mean_at_sample.len(), n);
    let contributions: Result<Vec<f64>> = rule
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let wx = w(x);
            if !(wx >= 0.0) {
                return Err(DirGofError::InvalidConfig {
                    field: "w".into(),
                    reason: format!("weight function negative ({wx}) at a rule node"),
                });
            }
            let row = &weight_matrix[j * n..(j + 1) * n];
            let m_hat = sum_blocked(row.iter().zip(responses).map(|(&wi, &yi)| wi * yi));
            let m_smooth = sum_blocked(
                row.iter()
                    .zip(mean_at_sample)
                    .map(|(&wi, &mi)| wi * mi),
            );
            let d = m_hat - m_smooth;
            Ok(d * d * kde_at_nodes[j] * wx)
        })
        .collect();
    Ok(rule.integrate_values(&contributions?))
}

/// center = (nh^q)^{-1} λ_q(L²)λ_q(L)^{-2} ∫σ²_θ w; variance = 2ν_d²R(σ²_θ w);
/// rate n h^{q/2}. Errors when the weighted noise variance is degenerate.
pub fn t6_asymptotics(
    n: usize,
    h: f64,
    q: usize,
    consts: &SmoothingConstants,
    int_sigma2_w: f64,
    r_sigma2_w: f64,
) -> Result<DirAsymptotics> {
    if !(r_sigma2_w > 0.0) {
        return Err(DirGofError::DegenerateScale {
            context: format!("R(σ²w) = {r_sigma2_w}"),
        });
    }
    let nf = n as f64;
    let hq = h.powi(q as i32);
    Ok(DirAsymptotics {
        center: consts.bias_ratio() * int_sigma2_w / (nf * hq),
        variance: 2.0 * consts.nu_d_sq * r_sigma2_w,
        rate_factor: nf * h.powf(q as f64 / 2.0),
        threshold: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{nu_l_sq, r_k};
    use crate::models::{LinDensity, LinFamily, VonMisesFisher};
    use crate::quad::LineRule;
    use crate::special::bessel_i;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn vm() -> DirectionalKernel {
        DirectionalKernel::VonMises
    }

    fn gauss() -> LinearKernel {
        LinearKernel::Gaussian
    }

    fn circle_rule() -> SphereRule {
        SphereRule::deterministic(1, 512).unwrap()
    }

    // dense-grid brute-force oracle on the circle, independent of the
    // library's quadrature and smoothing paths
    struct CircleOracle {
        angles: Vec<f64>,
        w: f64,
    }

    impl CircleOracle {
        fn new(m: usize) -> Self {
            Self {
                angles: (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect(),
                w: 2.0 * PI / m as f64,
            }
        }

        fn c_h(&self, h: f64) -> f64 {
            let total: f64 = self
                .angles
                .iter()
                .map(|&t| (-(1.0 - t.cos()) / (h * h)).exp())
                .sum();
            1.0 / (total * self.w)
        }

        fn kde(&self, data: &[f64], h: f64, theta: f64) -> f64 {
            let c = self.c_h(h);
            let s: f64 = data
                .iter()
                .map(|&ti| (-(1.0 - (theta - ti).cos()) / (h * h)).exp())
                .sum();
            c * s / data.len() as f64
        }
    }

    #[test]
    fn t1_matches_brute_force_on_a_small_fixture() {
        let angles = [0.4, 2.0, 5.1];
        let sample = DirSample::from_angles(&angles).unwrap();
        let h = 0.5;
        let null = DirNull::Fixed(DirDensity::Uniform { q: 1 });
        let (stat, _, mode) = t1_statistic(&sample, h, &vm(), &null, &circle_rule()).unwrap();
        assert_eq!(mode, HypothesisMode::Simple);
        assert!(stat >= 0.0);

        // oracle: 4096-point trapezoid with its own normalization and its
        // own double-loop smoothing of the uniform density
        let oracle = CircleOracle::new(4096);
        let c = oracle.c_h(h);
        let uniform = 1.0 / (2.0 * PI);
        let mut t = 0.0;
        for &x in &oracle.angles {
            let fhat = oracle.kde(&angles, h, x);
            let mut smooth = 0.0;
            for &y in &oracle.angles {
                smooth += c * (-(1.0 - (x - y).cos()) / (h * h)).exp() * uniform * oracle.w;
            }
            t += (fhat - smooth) * (fhat - smooth) * oracle.w;
        }
        assert_relative_eq!(stat, t, max_relative = 1e-6);
    }

    #[test]
    fn t1_is_invariant_under_joint_rotation() {
        let angles = [0.4, 2.0, 5.1, 1.2];
        let alpha = 0.7531;
        let rotated: Vec<f64> = angles.iter().map(|a| a + alpha).collect();
        let h = 0.4;
        let mu = UnitVector::from_angle(1.0);
        let mu_rot = UnitVector::from_angle(1.0 + alpha);
        let null = DirNull::Fixed(DirDensity::Vmf(VonMisesFisher::new(mu, 1.3).unwrap()));
        let null_rot =
            DirNull::Fixed(DirDensity::Vmf(VonMisesFisher::new(mu_rot, 1.3).unwrap()));
        let s1 = t1_statistic(
            &DirSample::from_angles(&angles).unwrap(),
            h,
            &vm(),
            &null,
            &circle_rule(),
        )
        .unwrap()
        .0;
        let s2 = t1_statistic(
            &DirSample::from_angles(&rotated).unwrap(),
            h,
            &vm(),
            &null_rot,
            &circle_rule(),
        )
        .unwrap()
        .0;
        assert_relative_eq!(s1, s2, max_relative = 1e-10);
    }

    #[test]
    fn t1_asymptotics_formulas() {
        let consts = vm().constants(1).unwrap();
        let asy = t1_asymptotics(1000, 0.2, 1, &consts, 1.0 / (2.0 * PI), 0.05);
        // center = λ(L²)λ(L)^{-2}/(nh) = (2√π)^{-1}/200
        let expected_center = 1.0 / (2.0 * PI.sqrt()) / 200.0;
        assert_relative_eq!(asy.center, expected_center, max_relative = 1e-7);
        assert!((asy.center - 1.41047e-3).abs() < 1e-7);
        // threshold = center + h^{1/2} ν_d √(2R) z_{0.05}
        let z = std_normal_quantile(0.95);
        let expected_threshold =
            expected_center + 0.2f64.sqrt() * consts.nu_d() * (2.0 / (2.0 * PI)).sqrt() * z;
        assert_relative_eq!(asy.threshold, expected_threshold, max_relative = 1e-7);
        // α = 0.5 collapses the threshold onto the center
        let asy50 = t1_asymptotics(1000, 0.2, 1, &consts, 1.0 / (2.0 * PI), 0.5);
        assert_relative_eq!(asy50.threshold, asy50.center, epsilon = 1e-12);
        // rate
        assert_relative_eq!(asy.rate_factor, 1000.0 * 0.2f64.sqrt(), epsilon = 1e-9);
    }

    fn dirlin_rule() -> DirLinRule {
        DirLinRule::new(
            SphereRule::deterministic(1, 512).unwrap(),
            LineRule::gauss_legendre(-8.0, 8.0, 320).unwrap(),
        )
    }

    #[test]
    fn t2_matches_brute_force_on_a_small_fixture() {
        let angles = [0.4, 2.9];
        let ys = [0.2, -0.7];
        let sample =
            DirLinSample::new(DirSample::from_angles(&angles).unwrap(), ys.to_vec()).unwrap();
        let (h, g) = (0.5, 0.4);
        let model = DirLinDensity {
            dir: DirDensity::Vmf(VonMisesFisher::new(UnitVector::from_angle(0.3), 0.8).unwrap()),
            lin: LinDensity::Gaussian { mean: 0.0, sd: 1.0 },
        };
        let (stat, _, mode) = t2_statistic(
            &sample,
            h,
            g,
            &vm(),
            &gauss(),
            &DirLinNull::Fixed(model.clone()),
            &dirlin_rule(),
        )
        .unwrap();
        assert_eq!(mode, HypothesisMode::Simple);
        assert!(stat >= 0.0);

        // oracle: dense trapezoid product grid with double-loop smoothing
        let oracle = CircleOracle::new(1024);
        let c = oracle.c_h(h);
        let ny = 1600;
        let (ylo, yhi) = (-8.0, 8.0);
        let wy = (yhi - ylo) / ny as f64;
        let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
        let mut sm_dir = vec![0.0; oracle.angles.len()];
        for (j, &x) in oracle.angles.iter().enumerate() {
            let mut s = 0.0;
            for &y in &oracle.angles {
                let dens = model.dir.density(&UnitVector::from_angle(y));
                s += c * (-(1.0 - (x - y).cos()) / (h * h)).exp() * dens * oracle.w;
            }
            sm_dir[j] = s;
        }
        let ygrid: Vec<f64> = (0..ny).map(|i| ylo + (i as f64 + 0.5) * wy).collect();
        let mut sm_lin = vec![0.0; ny];
        for (kk, &y) in ygrid.iter().enumerate() {
            let mut s = 0.0;
            for &t in &ygrid {
                s += phi((y - t) / g) / g * model.lin.density(t) * wy;
            }
            sm_lin[kk] = s;
        }
        let mut t = 0.0;
        for (j, &x) in oracle.angles.iter().enumerate() {
            for (kk, &y) in ygrid.iter().enumerate() {
                let mut fhat = 0.0;
                for (idx, &a) in angles.iter().enumerate() {
                    fhat +=
                        c * (-(1.0 - (x - a).cos()) / (h * h)).exp() * phi((y - ys[idx]) / g) / g;
                }
                fhat /= angles.len() as f64;
                let d = fhat - sm_dir[j] * sm_lin[kk];
                t += d * d * oracle.w * wy;
            }
        }
        assert_relative_eq!(stat, t, max_relative = 1e-6);
    }

    #[test]
    fn t2_asymptotics_formulas() {
        let consts = vm().constants(1).unwrap();
        let rk = r_k(&gauss()).unwrap();
        let nl = nu_l_sq(&gauss()).unwrap();
        let asy = t2_asymptotics(1000, 0.2, 0.2, 1, &consts, rk, nl, 0.3);
        // center = (2√π)^{-2} / (1000·0.2·0.2) = 0.0795775/40
        let expected = 1.0 / (4.0 * PI) / 40.0;
        assert_relative_eq!(asy.center, expected, max_relative = 1e-7);
        assert!((asy.center - 1.98944e-3).abs() < 1e-7);
        assert_relative_eq!(
            asy.variance,
            2.0 * (8.0 * PI).powf(-1.0) * 0.3,
            max_relative = 1e-6
        );
        assert_relative_eq!(asy.rate_factor, 1000.0 * 0.04f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn t3_matches_brute_force_and_is_zero_at_n1() {
        // n = 1: the joint KDE factorizes identically; exact zero
        let s1 = DirLinSample::new(DirSample::from_angles(&[1.1]).unwrap(), vec![0.5]).unwrap();
        let stat1 = t3_statistic(&s1, 0.5, 0.4, &vm(), &gauss(), &dirlin_rule()).unwrap();
        assert_eq!(stat1, 0.0);

        let angles = [0.4, 2.9, 4.0];
        let ys = [0.2, -0.7, 1.1];
        let sample =
            DirLinSample::new(DirSample::from_angles(&angles).unwrap(), ys.to_vec()).unwrap();
        let (h, g) = (0.5, 0.4);
        let stat = t3_statistic(&sample, h, g, &vm(), &gauss(), &dirlin_rule()).unwrap();
        assert!(stat >= 0.0);

        let oracle = CircleOracle::new(1024);
        let c = oracle.c_h(h);
        let ny = 1600;
        let (ylo, yhi) = (-8.0, 8.0);
        let wy = (yhi - ylo) / ny as f64;
        let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
        let ygrid: Vec<f64> = (0..ny).map(|i| ylo + (i as f64 + 0.5) * wy).collect();
        let mut t = 0.0;
        for &x in &oracle.angles {
            let fx = oracle.kde(&angles, h, x);
            for &y in &ygrid {
                let mut fhat = 0.0;
                let mut fy = 0.0;
                for (idx, &a) in angles.iter().enumerate() {
                    let ky = phi((y - ys[idx]) / g) / g;
                    fhat += c * (-(1.0 - (x - a).cos()) / (h * h)).exp() * ky;
                    fy += ky;
                }
                fhat /= angles.len() as f64;
                fy /= angles.len() as f64;
                let d = fhat - fx * fy;
                t += d * d * oracle.w * wy;
            }
        }
        assert_relative_eq!(stat, t, max_relative = 1e-6);
    }

    #[test]
    fn t3_asymptotics_match_the_worked_constants() {
        // n=1000, h=g=0.2, q=1, vMF(κ=1) × N(0,1) null
        let consts = vm().constants(1).unwrap();
        let rk = r_k(&gauss()).unwrap();
        let nl = nu_l_sq(&gauss()).unwrap();
        let r_fx = bessel_i(0.0, 2.0) / (2.0 * PI * bessel_i(0.0, 1.0).powi(2));
        let r_fy = 1.0 / (2.0 * PI.sqrt());
        let asy = t3_asymptotics(1000, 0.2, 0.2, 1, &consts, rk, nl, r_fx, r_fy);
        // recompute the three A_n terms from the formula
        let br = 1.0 / (2.0 * PI.sqrt());
        let a_n = br * br / 40.0 - br * r_fy / 200.0 - br * r_fx / 200.0;
        assert_relative_eq!(asy.center, a_n, max_relative = 1e-6);
        assert!((asy.center - 1.2722e-3).abs() < 5e-7, "A_n = {}", asy.center);
        let var = 2.0 / (8.0 * PI) * r_fx * r_fy;
        assert_relative_eq!(asy.variance, var, max_relative = 1e-6);
        assert!((asy.variance - 5.0809e-3).abs() < 5e-7);
        // finiteness smoke check in a bias-dominant configuration
        let wild = t3_asymptotics(1000, 5.0, 0.2, 1, &consts, rk, nl, r_fx, r_fy);
        assert!(wild.center.is_finite());
    }

    fn dirdir_rule() -> DirDirRule {
        DirDirRule::new(
            SphereRule::deterministic(1, 256).unwrap(),
            SphereRule::deterministic(1, 256).unwrap(),
        )
    }

    #[test]
    fn t4_matches_brute_force_on_a_small_fixture() {
        let a1 = [0.4, 2.9];
        let a2 = [1.5, 5.2];
        let sample = DirDirSample::new(
            DirSample::from_angles(&a1).unwrap(),
            DirSample::from_angles(&a2).unwrap(),
        )
        .unwrap();
        let (h1, h2) = (0.5, 0.6);
        let model = DirDirDensity {
            first: DirDensity::Uniform { q: 1 },
            second: DirDensity::Uniform { q: 1 },
        };
        let (stat, _, _) = t4_statistic(
            &sample,
            h1,
            h2,
            &vm(),
            &DirDirNull::Fixed(model),
            &dirdir_rule(),
        )
        .unwrap();
        assert!(stat >= 0.0);

        let oracle = CircleOracle::new(1024);
        let c1 = oracle.c_h(h1);
        let c2 = oracle.c_h(h2);
        let uniform = 1.0 / (2.0 * PI);
        // smoothing the uniform density returns it unchanged (unit-integral
        // kernel), so the target is 1/(2π)²
        let mut t = 0.0;
        for &x1 in &oracle.angles {
            for &x2 in &oracle.angles {
                let mut fhat = 0.0;
                for idx in 0..2 {
                    fhat += c1
                        * (-(1.0 - (x1 - a1[idx]).cos()) / (h1 * h1)).exp()
                        * c2
                        * (-(1.0 - (x2 - a2[idx]).cos()) / (h2 * h2)).exp();
                }
                fhat /= 2.0;
                let d = fhat - uniform * uniform;
                t += d * d * oracle.w * oracle.w;
            }
        }
        assert_relative_eq!(stat, t, max_relative = 1e-6);
    }

    #[test]
    fn t4_asymptotics_reduce_as_expected_for_equal_components() {
        let consts = vm().constants(1).unwrap();
        let asy = t4_asymptotics(1000, 0.2, 0.2, &consts, &consts, 1.0 / (4.0 * PI * PI), 0.05);
        // center = (2√π)^{-2}/(n h1 h2)
        let expected = 1.0 / (4.0 * PI) / (1000.0 * 0.04);
        assert_relative_eq!(asy.center, expected, max_relative = 1e-6);
        assert_relative_eq!(asy.rate_factor, 1000.0 * 0.2, epsilon = 1e-9);
    }

    #[test]
    fn t5_matches_brute_force_and_is_zero_at_n1() {
        let s1 = DirDirSample::new(
            DirSample::from_angles(&[0.3]).unwrap(),
            DirSample::from_angles(&[2.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(
            t5_statistic(&s1, 0.5, 0.5, &vm(), &dirdir_rule()).unwrap(),
            0.0
        );

        let a1 = [0.4, 2.9, 3.8];
        let a2 = [1.5, 5.2, 0.9];
        let sample = DirDirSample::new(
            DirSample::from_angles(&a1).unwrap(),
            DirSample::from_angles(&a2).unwrap(),
        )
        .unwrap();
        let (h1, h2) = (0.5, 0.6);
        let stat = t5_statistic(&sample, h1, h2, &vm(), &dirdir_rule()).unwrap();
        assert!(stat >= 0.0);

        let oracle = CircleOracle::new(1024);
        let c1 = oracle.c_h(h1);
        let c2 = oracle.c_h(h2);
        let mut t = 0.0;
        for &x1 in &oracle.angles {
            let f1 = oracle.kde(&a1, h1, x1);
            for &x2 in &oracle.angles {
                let f2 = oracle.kde(&a2, h2, x2);
                let mut fhat = 0.0;
                for idx in 0..3 {
                    fhat += c1
                        * (-(1.0 - (x1 - a1[idx]).cos()) / (h1 * h1)).exp()
                        * c2
                        * (-(1.0 - (x2 - a2[idx]).cos()) / (h2 * h2)).exp();
                }
                fhat /= 3.0;
                let d = fhat - f1 * f2;
                t += d * d * oracle.w * oracle.w;
            }
        }
        assert_relative_eq!(stat, t, max_relative = 1e-6);
    }

    #[test]
    fn t5_centering_matches_the_worked_uniform_example() {
        // q1 = q2 = 1, n = 1000, h1 = h2 = 0.2, uniform marginals
        let consts = vm().constants(1).unwrap();
        let r = 1.0 / (2.0 * PI);
        let asy = t5_asymptotics(1000, 0.2, 0.2, &consts, &consts, r, r);
        let br = 1.0 / (2.0 * PI.sqrt());
        let expected = br * br / 40.0 - 2.0 * (br * r / 200.0);
        assert_relative_eq!(asy.center, expected, max_relative = 1e-6);
        assert!((asy.center - 1.5404e-3).abs() < 5e-7, "B_n = {}", asy.center);
    }

    #[test]
    fn t6_is_zero_on_constant_data_and_matches_brute_force() {
        // constant data under the fitted constant null: exact zero
        let angles = [0.2, 1.5, 3.3, 5.0];
        let dirs = DirSample::from_angles(&angles).unwrap();
        let sample = DirLinSample::new(dirs.clone(), vec![1.0; 4]).unwrap();
        let (stat, model, mode) = t6_statistic(
            &sample,
            0.5,
            &vm(),
            Degree::Constant,
            &RegressionNull::FitConstant,
            |_| 1.0,
            &circle_rule(),
        )
        .unwrap();
        assert_eq!(stat, 0.0);
        assert_eq!(model.c, 1.0);
        assert_eq!(mode, HypothesisMode::Composite);

        // brute force on noisy responses, p = 0, w ≡ 1
        let ys = [0.7, 1.4, 0.9, 1.8];
        let sample = DirLinSample::new(dirs, ys.to_vec()).unwrap();
        let h = 0.5;
        let (stat, model, _) = t6_statistic(
            &sample,
            h,
            &vm(),
            Degree::Constant,
            &RegressionNull::FitConstant,
            |_| 1.0,
            &circle_rule(),
        )
        .unwrap();
        let oracle = CircleOracle::new(4096);
        let cbar: f64 = ys.iter().sum::<f64>() / 4.0;
        assert_relative_eq!(model.c, cbar, epsilon = 1e-15);
        let mut t = 0.0;
        for &x in &oracle.angles {
            let ell: Vec<f64> = angles
                .iter()
                .map(|&a| (-(1.0 - (x - a).cos()) / (h * h)).exp())
                .collect();
            let tot: f64 = ell.iter().sum();
            let m_hat: f64 = ell.iter().zip(&ys).map(|(e, y)| e * y).sum::<f64>() / tot;
            let m_sm: f64 = ell.iter().map(|e| e * cbar).sum::<f64>() / tot;
            let fhat = oracle.kde(&angles, h, x);
            let d = m_hat - m_sm;
            t += d * d * fhat * oracle.w;
        }
        assert_relative_eq!(stat, t, max_relative = 1e-6);
    }

    #[test]
    fn t6_asymptotics_match_the_worked_regression_setup() {
        // q=1, σ² ≡ 1/4, w ≡ 1: center = √π/(4nh), 1/scale = (128/π)^{1/4}
        let consts = vm().constants(1).unwrap();
        let (n, h) = (1000, 0.05);
        let int_sigma2_w = 0.25 * 2.0 * PI;
        let r_sigma2_w = 0.0625 * 2.0 * PI;
        let asy = t6_asymptotics(n, h, 1, &consts, int_sigma2_w, r_sigma2_w).unwrap();
        let expected_center = PI.sqrt() / (4.0 * n as f64 * h);
        assert_relative_eq!(asy.center, expected_center, max_relative = 1e-7);
        let inv_scale = 1.0 / asy.variance.sqrt();
        assert_relative_eq!(inv_scale, (128.0 / PI).powf(0.25), max_relative = 1e-7);
        assert!((inv_scale - 2.52647).abs() < 1e-5);

        // σ² ≡ 0 must fail with a degenerate-scale error
        assert!(matches!(
            t6_asymptotics(n, h, 1, &consts, 0.0, 0.0),
            Err(DirGofError::DegenerateScale { .. })
        ));
    }

    #[test]
    fn statistics_are_invariant_under_sample_reordering() {
        let angles = [0.4, 2.0, 5.1, 1.2, 3.3];
        let ys = [0.3, -0.1, 0.8, 0.0, 1.4];
        let perm = [4usize, 2, 0, 3, 1];
        let pa: Vec<f64> = perm.iter().map(|&i| angles[i]).collect();
        let py: Vec<f64> = perm.iter().map(|&i| ys[i]).collect();
        let s1 = DirLinSample::new(DirSample::from_angles(&angles).unwrap(), ys.to_vec()).unwrap();
        let s2 = DirLinSample::new(DirSample::from_angles(&pa).unwrap(), py).unwrap();
        let t3a = t3_statistic(&s1, 0.5, 0.4, &vm(), &gauss(), &dirlin_rule()).unwrap();
        let t3b = t3_statistic(&s2, 0.5, 0.4, &vm(), &gauss(), &dirlin_rule()).unwrap();
        assert_relative_eq!(t3a, t3b, max_relative = 1e-12);

        let null = DirNull::Fit(DirFamily::VonMisesFisher);
        let t1a = t1_statistic(
            &DirSample::from_angles(&angles).unwrap(),
            0.5,
            &vm(),
            &null,
            &circle_rule(),
        )
        .unwrap()
        .0;
        let t1b = t1_statistic(
            &DirSample::from_angles(&pa).unwrap(),
            0.5,
            &vm(),
            &null,
            &circle_rule(),
        )
        .unwrap()
        .0;
        assert_relative_eq!(t1a, t1b, max_relative = 1e-12);
    }

    #[test]
    fn outcome_fields_are_mutually_consistent() {
        let angles = [0.4, 2.0, 5.1, 1.2];
        let sample = DirSample::from_angles(&angles).unwrap();
        let (outcome, _, _) = t1_test(
            &sample,
            0.4,
            &vm(),
            &DirNull::Fit(DirFamily::VonMisesFisher),
            &circle_rule(),
            0.05,
        )
        .unwrap();
        let recomputed = outcome.rate_factor * (outcome.statistic - outcome.center) / outcome.scale;
        assert!((recomputed - outcome.standardized).abs() < 1e-12);
        let p = 1.0 - std_normal_cdf(outcome.standardized);
        assert!((p - outcome.p_asymptotic).abs() < 1e-12);
        assert_eq!(outcome.meta.mode, HypothesisMode::Composite);
        assert!(outcome.statistic >= 0.0);
        assert!(outcome.center > 0.0 && outcome.scale > 0.0);
    }

    #[test]
    fn centers_vanish_as_n_grows_with_h_fixed() {
        let consts = vm().constants(1).unwrap();
        let c1 = t1_asymptotics(100, 0.3, 1, &consts, 0.2, 0.05).center;
        let c2 = t1_asymptotics(100_000, 0.3, 1, &consts, 0.2, 0.05).center;
        assert!(c2 < c1 * 1e-2);
        assert!(c1 > 0.0 && c2 > 0.0);
    }

    #[test]
    fn pitman_shift_values() {
        let rule = circle_rule();
        // Δ ≡ 0
        let zero = PitmanDeviation {
            eval: Arc::new(|_| 0.0),
            rate_exponent: 0.5,
        };
        assert_eq!(pitman_shift(&zero, &rule).unwrap(), 0.0);
        // Δ(θ) = cos θ: mean zero, R(Δ) = π
        let cos_dev = PitmanDeviation {
            eval: Arc::new(|x: &UnitVector| x.coords()[0]),
            rate_exponent: 0.5,
        };
        let r = pitman_shift(&cos_dev, &rule).unwrap();
        assert!((r - PI).abs() < 1e-10);
        // homogeneity: a·Δ scales R by a²
        let scaled = PitmanDeviation {
            eval: Arc::new(|x: &UnitVector| 3.0 * x.coords()[0]),
            rate_exponent: 0.5,
        };
        let r9 = pitman_shift(&scaled, &rule).unwrap();
        assert_relative_eq!(r9, 9.0 * r, max_relative = 1e-12);
        // non-centered deviation errors
        let biased = PitmanDeviation {
            eval: Arc::new(|_| 1.0),
            rate_exponent: 0.5,
        };
        assert!(matches!(
            pitman_shift(&biased, &rule),
            Err(DirGofError::PitmanNotCentered { .. })
        ));
    }

    #[test]
    fn composite_gaussian_null_t2_runs() {
        // a smoke test of the composite directional-linear route
        let dirs = crate::sphere::sample_uniform_sphere(1, 40, crate::rng::RngStream::new(77));
        let lin =
            LinDensity::Gaussian { mean: 0.0, sd: 1.0 }.sample(40, crate::rng::RngStream::new(78));
        let sample = DirLinSample::new(DirSample::new(dirs).unwrap(), lin).unwrap();
        let family = DirLinFamily {
            dir: DirFamily::VonMisesFisher,
            lin: LinFamily::Gaussian,
        };
        let (stat, model, mode) = t2_statistic(
            &sample,
            0.4,
            0.4,
            &vm(),
            &gauss(),
            &DirLinNull::Fit(family),
            &dirlin_rule(),
        )
        .unwrap();
        assert!(stat >= 0.0);
        assert_eq!(mode, HypothesisMode::Composite);
        assert!(model.density(&UnitVector::from_angle(0.0), 0.0) > 0.0);
    }
}
