//! Parametric null models: von Mises-Fisher, uniform, Gaussian, and their
//! independence products; maximum-likelihood fitting; the R(·) functional;
//! and the kernel-smoothed parametric targets that the test statistics
//! subtract from the nonparametric estimators.

use crate::error::{DirGofError, Result};
use crate::estimators::{check_bandwidth, locpoly_regress, Degree, DirLinSample, DirSample};
use crate::kernels::{DirectionalKernel, LinearKernel};
use crate::quad::{sum_blocked, LineRule, SphereRule};
use crate::rng::RngStream;
use crate::special::{bessel_i_ratio, bessel_i_scaled};
use crate::sphere::{sample_uniform_sphere, surface_area, tangent_basis, UnitVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use std::f64::consts::PI;

/// Concentration cap for the vMF maximum-likelihood fit.
const KAPPA_CAP: f64 = 1e6;

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult<M> {
    pub model: M,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: u32,
}

// ---------------------------------------------------------------------------
// von Mises-Fisher
// ---------------------------------------------------------------------------

/// von Mises-Fisher density on Ω_q: C_q(κ) e^{κ μ'x}.
#[derive(Debug, Clone)]
pub struct VonMisesFisher {
    pub mu: UnitVector,
    pub kappa: f64,
}

impl VonMisesFisher {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(DirGofError::InvalidConfig {
                field: "kappa".into(),
                reason: format!("concentration must be a nonnegative real, got {kappa}"),
            });
        }
        Ok(Self { mu, kappa })
    }

    pub fn q(&self) -> usize {
        self.mu.q()
    }

    /// ln C_q(κ) with C_q(κ) = κ^{(q-1)/2} ((2π)^{(q+1)/2} I_{(q-1)/2}(κ))^{-1}.
    pub fn ln_normalizer(q: usize, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return -surface_area(q).ln();
        }
        let nu = (q as f64 - 1.0) / 2.0;
        nu * kappa.ln()
            - (q as f64 + 1.0) / 2.0 * (2.0 * PI).ln()
            - (kappa + bessel_i_scaled(nu, kappa).ln())
    }

    pub fn log_density(&self, x: &UnitVector) -> f64 {
        Self::ln_normalizer(self.q(), self.kappa) + self.kappa * self.mu.dot(x)
    }

    pub fn density(&self, x: &UnitVector) -> f64 {
        self.log_density(x).exp()
    }
}

/// i.i.d. von Mises-Fisher draws: Best-Fisher wrapping rejection on the
/// circle, and the tangent-normal decomposition with Wood's rejection
/// envelope for the cosine component on higher-dimensional spheres.
pub fn vmf_sample(mu: &UnitVector, kappa: f64, n: usize, stream: RngStream) -> Vec<UnitVector> {
    let q = mu.q();
    if kappa < 1e-10 {
        return sample_uniform_sphere(q, n, stream);
    }
    let mut rng = stream.rng();
    if q == 1 {
        // Best-Fisher (1979) von Mises sampler
        let mu_angle = mu.angle();
        let a = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let b = (a - (2.0 * a).sqrt()) / (2.0 * kappa);
        let r = (1.0 + b * b) / (2.0 * b);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = kappa * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let u3: f64 = rng.random();
                let sign = if u3 > 0.5 { 1.0 } else { -1.0 };
                out.push(UnitVector::from_angle(mu_angle + sign * f.acos()));
            }
        }
        return out;
    }
    // Wood (1994): ambient dimension d = q+1, envelope parameter m = q
    let m = q as f64;
    let b = (-2.0 * kappa + (4.0 * kappa * kappa + m * m).sqrt()) / m;
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + m * (1.0 - x0 * x0).ln();
    let beta = Beta::new(m / 2.0, m / 2.0).expect("valid Beta parameters");
    let basis = tangent_basis(mu);
    let mut out = Vec::with_capacity(n);
    // dedicated stream for the tangent directions keeps them decoupled from
    // the rejection loop's variable uniform consumption
    let tangents = sample_uniform_sphere(q - 1, n, stream.fork(u64::MAX));
    while out.len() < n {
        let z: f64 = beta.sample(&mut rng);
        let u: f64 = rng.random();
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        if kappa * w + m * (1.0 - x0 * w).ln() - c >= u.ln() {
            let v = &tangents[out.len()];
            let radial = (1.0 - w * w).max(0.0).sqrt();
            let tangent = basis.embed(v.coords());
            let coords: Vec<f64> = mu
                .coords()
                .iter()
                .zip(&tangent)
                .map(|(&mc, &tc)| w * mc + radial * tc)
                .collect();
            out.push(UnitVector::from_unnormalized(coords).expect("vMF draw on the sphere"));
        }
    }
    out
}

/// Maximum-likelihood vMF fit: μ̂ is the resultant direction and κ̂ solves
/// the Bessel-ratio equation A_{q+1}(κ) = R̄ by safeguarded Newton.
pub fn vmf_fit(sample: &DirSample) -> Result<FitResult<VonMisesFisher>> {
    let n = sample.n();
    if n < 2 {
        return Err(DirGofError::UnsupportedSampleSize {
            n,
            what: "vMF fit".into(),
        });
    }
    let q = sample.q();
    let d = q + 1;
    let mut mean = vec![0.0; d];
    for x in sample.points() {
        for (m, &c) in mean.iter_mut().zip(x.coords()) {
            *m += c;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let rbar = mean.iter().map(|c| c * c).sum::<f64>().sqrt();
    if rbar < 1e-12 {
        return Err(DirGofError::FitFailure {
            context: "zero resultant: mean direction undefined".into(),
        });
    }
    let mu = UnitVector::from_unnormalized(mean)?;
    let df = d as f64;
    let ratio = |kappa: f64| bessel_i_ratio(df / 2.0, kappa);

    let (kappa, converged, iterations) = if rbar >= 1.0 - 1e-12 {
        (KAPPA_CAP, false, 0)
    } else {
        // standard starting approximation, then Newton with bisection guard
        let mut kappa = (rbar * (df - rbar * rbar) / (1.0 - rbar * rbar)).min(KAPPA_CAP);
        let mut lo = 0.0f64;
        let mut hi = KAPPA_CAP;
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..100 {
            iterations = it + 1;
            let a = ratio(kappa);
            let resid = a - rbar;
            if resid.abs() < 1e-10 {
                converged = true;
                break;
            }
            if resid > 0.0 {
                hi = kappa;
            } else {
                lo = kappa;
            }
            // A'(κ) = 1 - A² - (d-1) A / κ
            let deriv = 1.0 - a * a - (df - 1.0) * a / kappa;
            let mut next = kappa - resid / deriv;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            kappa = next;
            if kappa >= KAPPA_CAP {
                kappa = KAPPA_CAP;
                break;
            }
        }
        (kappa, converged, iterations)
    };
    let model = VonMisesFisher::new(mu, kappa)?;
    let log_likelihood = n as f64 * (VonMisesFisher::ln_normalizer(q, kappa) + kappa * rbar);
    Ok(FitResult {
        model,
        log_likelihood,
        converged,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Directional / linear model enums and composite families
// ---------------------------------------------------------------------------

/// A parametric density on Ω_q.
#[derive(Debug, Clone)]
pub enum DirDensity {
    Vmf(VonMisesFisher),
    Uniform { q: usize },
}

impl DirDensity {
    pub fn q(&self) -> usize {
        match self {
            Self::Vmf(m) => m.q(),
            Self::Uniform { q } => *q,
        }
    }

    pub fn density(&self, x: &UnitVector) -> f64 {
        match self {
            Self::Vmf(m) => m.density(x),
            Self::Uniform { q } => 1.0 / surface_area(*q),
        }
    }

    pub fn sample(&self, n: usize, stream: RngStream) -> Vec<UnitVector> {
        match self {
            Self::Vmf(m) => vmf_sample(&m.mu, m.kappa, n, stream),
            Self::Uniform { q } => sample_uniform_sphere(*q, n, stream),
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            Self::Vmf(m) => serde_json::json!({
                "family": "vmf", "mu": m.mu.coords(), "kappa": m.kappa,
            }),
            Self::Uniform { q } => serde_json::json!({ "family": "uniform", "q": q }),
        }
    }
}

/// Directional null families with a fitting rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirFamily {
    VonMisesFisher,
    Uniform,
}

impl DirFamily {
    pub fn fit(&self, sample: &DirSample) -> Result<FitResult<DirDensity>> {
        match self {
            Self::VonMisesFisher => {
                let fit = vmf_fit(sample)?;
                Ok(FitResult {
                    model: DirDensity::Vmf(fit.model),
                    log_likelihood: fit.log_likelihood,
                    converged: fit.converged,
                    iterations: fit.iterations,
                })
            }
            Self::Uniform => {
                let q = sample.q();
                Ok(FitResult {
                    model: DirDensity::Uniform { q },
                    log_likelihood: -(sample.n() as f64) * surface_area(q).ln(),
                    converged: true,
                    iterations: 0,
                })
            }
        }
    }
}

/// A parametric density on ℝ.
#[derive(Debug, Clone)]
pub enum LinDensity {
    Gaussian { mean: f64, sd: f64 },
}

impl LinDensity {
    pub fn density(&self, y: f64) -> f64 {
        match self {
            Self::Gaussian { mean, sd } => {
                let z = (y - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
        }
    }

    pub fn sample(&self, n: usize, stream: RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        match self {
            Self::Gaussian { mean, sd } => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + sd * z
                })
                .collect(),
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            Self::Gaussian { mean, sd } => {
                serde_json::json!({ "family": "gaussian", "mean": mean, "sd": sd })
            }
        }
    }
}

/// Linear null families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinFamily {
    Gaussian,
}

impl LinFamily {
    pub fn fit(&self, values: &[f64]) -> Result<FitResult<LinDensity>> {
        let n = values.len();
        if n < 2 {
            return Err(DirGofError::UnsupportedSampleSize {
                n,
                what: "Gaussian fit".into(),
            });
        }
        let mean = sum_blocked(values.iter().copied()) / n as f64;
        let var = sum_blocked(values.iter().map(|&v| (v - mean) * (v - mean))) / n as f64;
        if !(var > 0.0) {
            return Err(DirGofError::FitFailure {
                context: "degenerate response variance".into(),
            });
        }
        let sd = var.sqrt();
        let log_likelihood = -(n as f64) * (sd.ln() + 0.5 * (2.0 * PI).ln() + 0.5);
        Ok(FitResult {
            model: LinDensity::Gaussian { mean, sd },
            log_likelihood,
            converged: true,
            iterations: 0,
        })
    }
}

/// Independence product density on Ω_q × ℝ (the null of the
/// directional-linear tests).
#[derive(Debug, Clone)]
pub struct DirLinDensity {
    pub dir: DirDensity,
    pub lin: LinDensity,
}

impl DirLinDensity {
    pub fn density(&self, x: &UnitVector, y: f64) -> f64 {
        self.dir.density(x) * self.lin.density(y)
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "dir": self.dir.describe(), "lin": self.lin.describe() })
    }
}

/// Product family: fits the marginals separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirLinFamily {
    pub dir: DirFamily,
    pub lin: LinFamily,
}

impl DirLinFamily {
    pub fn fit(&self, sample: &DirLinSample) -> Result<FitResult<DirLinDensity>> {
        let df = self.dir.fit(sample.directions())?;
        let lf = self.lin.fit(sample.responses())?;
        Ok(FitResult {
            model: DirLinDensity {
                dir: df.model,
                lin: lf.model,
            },
            log_likelihood: df.log_likelihood + lf.log_likelihood,
            converged: df.converged && lf.converged,
            iterations: df.iterations.max(lf.iterations),
        })
    }
}

/// Independence product density on Ω_{q1} × Ω_{q2}.
#[derive(Debug, Clone)]
pub struct DirDirDensity {
    pub first: DirDensity,
    pub second: DirDensity,
}

impl DirDirDensity {
    pub fn density(&self, x1: &UnitVector, x2: &UnitVector) -> f64 {
        self.first.density(x1) * self.second.density(x2)
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "first": self.first.describe(), "second": self.second.describe() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirDirFamily {
    pub first: DirFamily,
    pub second: DirFamily,
}

impl DirDirFamily {
    pub fn fit(
        &self,
        sample: &crate::estimators::DirDirSample,
    ) -> Result<FitResult<DirDirDensity>> {
        let f1 = self.first.fit(sample.first())?;
        let f2 = self.second.fit(sample.second())?;
        Ok(FitResult {
            model: DirDirDensity {
                first: f1.model,
                second: f2.model,
            },
            log_likelihood: f1.log_likelihood + f2.log_likelihood,
            converged: f1.converged && f2.converged,
            iterations: f1.iterations.max(f2.iterations),
        })
    }
}

// ---------------------------------------------------------------------------
// Regression models
// ---------------------------------------------------------------------------

/// Constant regression m_θ ≡ c with homoskedastic noise variance σ².
#[derive(Debug, Clone, Copy)]
pub struct ConstantRegression {
    pub c: f64,
    pub sigma2: f64,
}

impl ConstantRegression {
    pub fn mean(&self, _x: &UnitVector) -> f64 {
        self.c
    }

    pub fn sigma_sq(&self, _x: &UnitVector) -> f64 {
        self.sigma2
    }

    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "family": "constant", "c": self.c, "sigma2": self.sigma2 })
    }
}

/// Least-squares (Gaussian MLE) fit of the constant regression family:
/// ĉ is the response mean, σ̂² the mean squared residual.
pub fn fit_constant_regression(sample: &DirLinSample) -> FitResult<ConstantRegression> {
    let n = sample.n() as f64;
    let c = sum_blocked(sample.responses().iter().copied()) / n;
    let sigma2 = sum_blocked(sample.responses().iter().map(|&y| (y - c) * (y - c))) / n;
    let log_likelihood = if sigma2 > 0.0 {
        -0.5 * n * ((2.0 * PI * sigma2).ln() + 1.0)
    } else {
        f64::INFINITY
    };
    FitResult {
        model: ConstantRegression { c, sigma2 },
        log_likelihood,
        converged: true,
        iterations: 0,
    }
}

// ---------------------------------------------------------------------------
// R(·) and kernel smoothing of parametric targets
// ---------------------------------------------------------------------------

/// R(f) = ∫ f² over Ω_q under the supplied rule.
pub fn r_functional_dir<F: Fn(&UnitVector) -> f64>(f: F, rule: &SphereRule) -> f64 {
    rule.integrate(|x| {
        let v = f(x);
        v * v
    })
}

/// R(f) = ∫ f² over a truncated line rule.
pub fn r_functional_lin<F: Fn(f64) -> f64>(f: F, rule: &LineRule) -> f64 {
    rule.integrate(|y| {
        let v = f(y);
        v * v
    })
}

/// Kernel smoothing of a directional density at one point:
/// L_h f(x) = ∫ L_h(x, y) f(y) dy by quadrature over `rule`.
pub fn smooth_dir_density<F: Fn(&UnitVector) -> f64>(
    f: F,
    l: &DirectionalKernel,
    h: f64,
    rule: &SphereRule,
    x: &UnitVector,
) -> Result<f64> {
    check_bandwidth(h, "h")?;
    let c = l.c_hq_cached(h, rule.q())?;
    let inv_h2 = 1.0 / (h * h);
    Ok(rule.integrate(|y| c * l.eval((1.0 - x.dot(y)) * inv_h2) * f(y)))
}

/// Kernel smoothing of a linear density at one point:
/// K_g f(y) = ∫ K((y - t)/g)/g f(t) dt by quadrature over `rule`.
pub fn smooth_lin_density<F: Fn(f64) -> f64>(
    f: F,
    k: &LinearKernel,
    g: f64,
    rule: &LineRule,
    y: f64,
) -> Result<f64> {
    check_bandwidth(g, "g")?;
    let inv_g = 1.0 / g;
    Ok(rule.integrate(|t| k.eval((y - t) * inv_g) * inv_g * f(t)))
}

/// Precomputed smoothing operator mapping density values at the rule nodes
/// to smoothed values at the same nodes. The J × J kernel matrix depends
/// only on (rule, kernel, h), so bootstrap loops build it once and apply it
/// to each refitted null density.
#[derive(Debug, Clone)]
pub struct DirSmoother {
    len: usize,
    /// row-major J × J; entry (j, k) = w_k c_{h,q} L((1 - x_j'y_k)/h²)
    matrix: Vec<f64>,
}

impl DirSmoother {
    pub fn new(rule: &SphereRule, l: &DirectionalKernel, h: f64) -> Result<Self> {
        check_bandwidth(h, "h")?;
        let c = l.c_hq_cached(h, rule.q())?;
        let inv_h2 = 1.0 / (h * h);
        let nodes = rule.nodes();
        let weights = rule.weights();
        let j_len = nodes.len();
        let mut matrix = vec![0.0; j_len * j_len];
        for (j, xj) in nodes.iter().enumerate() {
            let row = &mut matrix[j * j_len..(j + 1) * j_len];
            for (k, yk) in nodes.iter().enumerate() {
                row[k] = weights[k] * c * l.eval((1.0 - xj.dot(yk)) * inv_h2);
            }
        }
        Ok(Self {
            len: j_len,
            matrix,
        })
    }

    /// Smoothed values at all nodes from density values at all nodes.
    pub fn apply(&self, density_at_nodes: &[f64]) -> Vec<f64> {
        assert_eq!(density_at_nodes.len(), self.len);
        (0..self.len)
            .map(|j| {
                let row = &self.matrix[j * self.len..(j + 1) * self.len];
                sum_blocked(row.iter().zip(density_at_nodes).map(|(&m, &f)| m * f))
            })
            .collect()
    }
}

/// Same idea on the line: K × K smoothing matrix over the line rule nodes.
#[derive(Debug, Clone)]
pub struct LinSmoother {
    len: usize,
    matrix: Vec<f64>,
}

impl LinSmoother {
    pub fn new(rule: &LineRule, k: &LinearKernel, g: f64) -> Result<Self> {
        check_bandwidth(g, "g")?;
        let inv_g = 1.0 / g;
        let nodes = rule.nodes();
        let weights = rule.weights();
        let k_len = nodes.len();
        let mut matrix = vec![0.0; k_len * k_len];
        for (j, &yj) in nodes.iter().enumerate() {
            let row = &mut matrix[j * k_len..(j + 1) * k_len];
            for (i, &ti) in nodes.iter().enumerate() {
                row[i] = weights[i] * k.eval((yj - ti) * inv_g) * inv_g;
            }
        }
        Ok(Self {
            len: k_len,
            matrix,
        })
    }

    pub fn apply(&self, density_at_nodes: &[f64]) -> Vec<f64> {
        assert_eq!(density_at_nodes.len(), self.len);
        (0..self.len)
            .map(|j| {
                let row = &self.matrix[j * self.len..(j + 1) * self.len];
                sum_blocked(row.iter().zip(density_at_nodes).map(|(&m, &f)| m * f))
            })
            .collect()
    }
}

/// Kernel smoothing of a directional-linear product density at one point:
/// LK_{h,g} f(x, y). Independence products factor under Fubini, so the
/// directional and linear smoothings are applied marginally (exact for
/// every model this crate fits).
#[allow(clippy::too_many_arguments)]
pub fn smooth_dirlin_density(
    model: &DirLinDensity,
    l: &DirectionalKernel,
    k: &LinearKernel,
    h: f64,
    g: f64,
    dir_rule: &SphereRule,
    lin_rule: &LineRule,
    x: &UnitVector,
    y: f64,
) -> Result<f64> {
    let dir_part = smooth_dir_density(|z| model.dir.density(z), l, h, dir_rule, x)?;
    let lin_part = smooth_lin_density(|t| model.lin.density(t), k, g, lin_rule, y)?;
    Ok(dir_part * lin_part)
}

/// Kernel smoothing of a directional-directional product density:
/// LL_{h1,h2} f(x₁, x₂), factored marginally as above.
#[allow(clippy::too_many_arguments)]
pub fn smooth_dirdir_density(
    model: &DirDirDensity,
    l: &DirectionalKernel,
    h1: f64,
    h2: f64,
    first_rule: &SphereRule,
    second_rule: &SphereRule,
    x1: &UnitVector,
    x2: &UnitVector,
) -> Result<f64> {
    let first = smooth_dir_density(|z| model.first.density(z), l, h1, first_rule, x1)?;
    let second = smooth_dir_density(|z| model.second.density(z), l, h2, second_rule, x2)?;
    Ok(first * second)
}

/// Local-polynomial smoothing of a parametric regression function:
/// 𝓛_{h,p} m(x) = Σ_i W^p_{n,i}(x) m(X_i). Implemented as the local
/// polynomial regression applied to the pseudo-responses m(X_i), so the two
/// agree bitwise.
pub fn smooth_regression<F: Fn(&UnitVector) -> f64>(
    m: F,
    dirs: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    p: Degree,
    x: &UnitVector,
) -> Result<f64> {
    let pseudo: Vec<f64> = dirs.points().iter().map(|xi| m(xi)).collect();
    let sample = DirLinSample::new(dirs.clone(), pseudo)?;
    locpoly_regress(&sample, h, l, p, x)
}
