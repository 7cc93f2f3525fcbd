//! Quadrature over Ω_q, truncated real lines, and their products.
//!
//! Deterministic rules: the circle uses the periodic trapezoid (spectrally
//! accurate), Ω₂ a Gauss-Legendre × trapezoid product in (cos polar,
//! azimuth), Ω₃ a Gauss-Chebyshev(2nd) × Gauss-Legendre × trapezoid
//! product. Higher dimensions fall back to Monte Carlo nodes with equal
//! weights. A 7-15 Gauss-Kronrod adaptive integrator backs the kernel
//! constants, which need endpoint singularities and sharply peaked
//! integrands handled reliably.

use crate::error::{DirGofError, Result};
use crate::rng::RngStream;
use crate::sphere::{sample_uniform_sphere, surface_area, UnitVector};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Block size for deterministic pairwise-block accumulation.
const SUM_BLOCK: usize = 4096;

/// Sum an iterator in fixed index order, accumulating per-block partial
/// sums (blocks of 4096) before combining. Deterministic across runs and
/// thread counts because it never depends on scheduling.
pub fn sum_blocked(values: impl Iterator<Item = f64>) -> f64 {
    let mut total = 0.0f64;
    let mut block = 0.0f64;
    let mut in_block = 0usize;
    for v in values {
        block += v;
        in_block += 1;
        if in_block == SUM_BLOCK {
            total += block;
            block = 0.0;
            in_block = 0;
        }
    }
    total + block
}

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes
// ---------------------------------------------------------------------------

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for k in 0..m {
        // Tricomi-style initial guess
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                // one clean-up pass keeps | P_n | near machine zero
                let mut q0 = 1.0;
                let mut q1 = x;
                for j in 2..=n {
                    let jf = j as f64;
                    let q2 = ((2.0 * jf - 1.0) * x * q1 - (jf - 1.0) * q0) / jf;
                    q0 = q1;
                    q1 = q2;
                }
                dp = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                x -= q1 / dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod integration
// ---------------------------------------------------------------------------

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK values).
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let x = hw * XGK[i];
        let fsum = f(c - x) + f(c + x);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    let value = kronrod * hw;
    if !value.is_finite() {
        return Err(DirGofError::IntegrationFailure {
            context: format!("non-finite integrand on [{a}, {b}]"),
        });
    }
    Ok((value, ((kronrod - gauss) * hw).abs()))
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    seq: usize,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.seq == other.seq
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Adaptive integral of `f` over [a, b], bisecting wherever the embedded
/// Gauss-Kronrod error estimate is largest, until the total estimated
/// error drops below `max(abs_tol, rel_tol · |I|)`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    const MAX_SEGMENTS: usize = 8192;
    let mut heap: BinaryHeap<Segment> = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b)?;
    let mut seq = 0usize;
    heap.push(Segment {
        a,
        b,
        value: v,
        error: e,
        seq,
    });
    let mut total_value = v;
    let mut total_error = e;
    while total_error > abs_tol.max(rel_tol * total_value.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(DirGofError::IntegrationFailure {
                context: format!(
                    "error {total_error:.3e} above tolerance after {MAX_SEGMENTS} segments on [{a}, {b}]"
                ),
            });
        }
        let worst = heap.pop().expect("heap cannot be empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at floating-point resolution; accept its estimate
            total_error -= worst.error;
            let mut acc = worst;
            acc.error = 0.0;
            heap.push(acc);
            seq += 1;
            continue;
        }
        let (vl, el) = gk15(&f, worst.a, mid)?;
        let (vr, er) = gk15(&f, mid, worst.b)?;
        total_value += vl + vr - worst.value;
        total_error += el + er - worst.error;
        seq += 1;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: vl,
            error: el,
            seq,
        });
        seq += 1;
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: vr,
            error: er,
            seq,
        });
    }
    // deterministic final summation, ordered by interval position
    let mut segments: Vec<Segment> = heap.into_vec();
    segments.sort_by(|s, t| s.a.partial_cmp(&t.a).unwrap_or(Ordering::Equal));
    Ok(sum_blocked(segments.iter().map(|s| s.value)))
}

// ---------------------------------------------------------------------------
// Line rules
// ---------------------------------------------------------------------------

/// Quadrature rule on a truncated interval [lo, hi].
#[derive(Debug, Clone)]
pub struct LineRule {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LineRule {
    /// n-point Gauss-Legendre rule mapped onto [lo, hi].
    pub fn gauss_legendre(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(DirGofError::InvalidConfig {
                field: "line range".into(),
                reason: format!("[{lo}, {hi}] is not a finite increasing interval"),
            });
        }
        let (xs, ws) = gauss_legendre(n);
        let c = 0.5 * (lo + hi);
        let hw = 0.5 * (hi - lo);
        Ok(Self {
            lo,
            hi,
            nodes: xs.iter().map(|x| c + hw * x).collect(),
            weights: ws.iter().map(|w| hw * w).collect(),
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        sum_blocked(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * f(x)),
        )
    }
}

// ---------------------------------------------------------------------------
// Sphere rules
// ---------------------------------------------------------------------------

/// Quadrature rule over Ω_q: a list of unit-vector nodes with nonnegative
/// weights summing to ω_q (within the rule's declared tolerance).
#[derive(Debug, Clone)]
pub struct SphereRule {
    q: usize,
    nodes: Vec<UnitVector>,
    weights: Vec<f64>,
    declared_tol: f64,
    /// Set for Monte Carlo rules: all weights equal ω_q / n.
    uniform_weight: bool,
}

impl SphereRule {
    /// Deterministic rule for q ∈ {1, 2, 3}; `resolution` scales the node
    /// count in each angular factor. Larger q must use [`SphereRule::monte_carlo`].
    pub fn deterministic(q: usize, resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(DirGofError::InvalidConfig {
                field: "resolution".into(),
                reason: format!("{resolution} < 8"),
            });
        }
        match q {
            1 => {
                let n = resolution;
                let w = 2.0 * PI / n as f64;
                let nodes = (0..n)
                    .map(|j| UnitVector::from_angle(2.0 * PI * j as f64 / n as f64))
                    .collect();
                Ok(Self {
                    q,
                    nodes,
                    weights: vec![w; n],
                    declared_tol: 1e-12,
                    uniform_weight: false,
                })
            }
            2 => {
                // x = (√(1-t²)cosφ, √(1-t²)sinφ, t); dσ = dt dφ
                let (ts, tw) = gauss_legendre(resolution);
                let n_phi = 2 * resolution;
                let wphi = 2.0 * PI / n_phi as f64;
                let mut nodes = Vec::with_capacity(resolution * n_phi);
                let mut weights = Vec::with_capacity(resolution * n_phi);
                for (t, wt) in ts.iter().zip(&tw) {
                    let s = (1.0 - t * t).max(0.0).sqrt();
                    for j in 0..n_phi {
                        let phi = 2.0 * PI * j as f64 / n_phi as f64;
                        nodes.push(
                            UnitVector::new(vec![s * phi.cos(), s * phi.sin(), *t])
                                .expect("construction on the sphere"),
                        );
                        weights.push(wt * wphi);
                    }
                }
                Ok(Self {
                    q,
                    nodes,
                    weights,
                    declared_tol: 1e-10,
                    uniform_weight: false,
                })
            }
            3 => {
                // x = (sinχ sinϑ cosφ, sinχ sinϑ sinφ, sinχ cosϑ, cosχ);
                // dσ = sin²χ dχ sinϑ dϑ dφ. In u = cosχ the polar factor is
                // the Chebyshev (2nd kind) weight √(1-u²), handled by its
                // classical rule; ϑ uses Gauss-Legendre in cosϑ.
                let n_u = resolution;
                let (vs, vw) = gauss_legendre(resolution);
                let n_phi = 2 * resolution;
                let wphi = 2.0 * PI / n_phi as f64;
                let mut nodes = Vec::with_capacity(n_u * resolution * n_phi);
                let mut weights = Vec::with_capacity(n_u * resolution * n_phi);
                for i in 1..=n_u {
                    let ang = PI * i as f64 / (n_u as f64 + 1.0);
                    let u = ang.cos();
                    let wu = PI / (n_u as f64 + 1.0) * ang.sin() * ang.sin();
                    let sin_chi = (1.0 - u * u).max(0.0).sqrt();
                    for (v, wv) in vs.iter().zip(&vw) {
                        let sin_theta = (1.0 - v * v).max(0.0).sqrt();
                        for j in 0..n_phi {
                            let phi = 2.0 * PI * j as f64 / n_phi as f64;
                            nodes.push(
                                UnitVector::new(vec![
                                    sin_chi * sin_theta * phi.cos(),
                                    sin_chi * sin_theta * phi.sin(),
                                    sin_chi * v,
                                    u,
                                ])
                                .expect("construction on the sphere"),
                            );
                            weights.push(wu * wv * wphi);
                        }
                    }
                }
                Ok(Self {
                    q,
                    nodes,
                    weights,
                    declared_tol: 1e-9,
                    uniform_weight: false,
                })
            }
            _ => Err(DirGofError::UnsupportedSphereDimension { q }),
        }
    }

    /// Monte Carlo rule: `n_nodes` i.i.d. uniform nodes, each weighted
    /// ω_q / n_nodes. Works for any q ≥ 1.
    pub fn monte_carlo(q: usize, n_nodes: usize, stream: RngStream) -> Result<Self> {
        if n_nodes < 100 {
            return Err(DirGofError::InvalidConfig {
                field: "n_nodes".into(),
                reason: format!("{n_nodes} < 100"),
            });
        }
        let omega = surface_area(q);
        let nodes = sample_uniform_sphere(q, n_nodes, stream);
        Ok(Self {
            q,
            nodes,
            weights: vec![omega / n_nodes as f64; n_nodes],
            declared_tol: 3.0 / (n_nodes as f64).sqrt(),
            uniform_weight: true,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[UnitVector] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Tolerance this rule claims for smooth integrands.
    pub fn declared_tol(&self) -> f64 {
        self.declared_tol
    }

    pub fn integrate<F: Fn(&UnitVector) -> f64>(&self, f: F) -> f64 {
        if self.uniform_weight {
            // mean × ω_q keeps Σ weights · 1 exactly equal to ω_q
            let total = sum_blocked(self.nodes.iter().map(|x| f(x)));
            return surface_area(self.q) * (total / self.len() as f64);
        }
        sum_blocked(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(x, &w)| w * f(x)),
        )
    }

    /// Quadrature sum against precomputed node values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        if self.uniform_weight {
            let total = sum_blocked(values.iter().copied());
            return surface_area(self.q) * (total / self.len() as f64);
        }
        sum_blocked(values.iter().zip(&self.weights).map(|(&v, &w)| w * v))
    }
}

// ---------------------------------------------------------------------------
// Product rules
// ---------------------------------------------------------------------------

/// Product rule over Ω_q × ℝ (the line factor truncated).
#[derive(Debug, Clone)]
pub struct DirLinRule {
    pub sphere: SphereRule,
    pub line: LineRule,
}

impl DirLinRule {
    pub fn new(sphere: SphereRule, line: LineRule) -> Self {
        Self { sphere, line }
    }

    pub fn len(&self) -> usize {
        self.sphere.len() * self.line.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn integrate<F: Fn(&UnitVector, f64) -> f64>(&self, f: F) -> f64 {
        sum_blocked(self.sphere.nodes().iter().zip(self.sphere.weights()).map(
            |(x, &wx)| {
                wx * sum_blocked(
                    self.line
                        .nodes()
                        .iter()
                        .zip(self.line.weights())
                        .map(|(&y, &wy)| wy * f(x, y)),
                )
            },
        ))
    }

    /// Quadrature sum against values laid out row-major as
    /// `values[sphere_index * line_len + line_index]`.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        let k = self.line.len();
        sum_blocked(
            self.sphere
                .weights()
                .iter()
                .enumerate()
                .map(|(j, &wx)| {
                    wx * sum_blocked(
                        values[j * k..(j + 1) * k]
                            .iter()
                            .zip(self.line.weights())
                            .map(|(&v, &wy)| wy * v),
                    )
                }),
        )
    }
}

/// Product rule over Ω_{q1} × Ω_{q2}.
#[derive(Debug, Clone)]
pub struct DirDirRule {
    pub first: SphereRule,
    pub second: SphereRule,
}

impl DirDirRule {
    pub fn new(first: SphereRule, second: SphereRule) -> Self {
        Self { first, second }
    }

    pub fn len(&self) -> usize {
        self.first.len() * self.second.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn integrate<F: Fn(&UnitVector, &UnitVector) -> f64>(&self, f: F) -> f64 {
        sum_blocked(self.first.nodes().iter().zip(self.first.weights()).map(
            |(x1, &w1)| {
                w1 * sum_blocked(
                    self.second
                        .nodes()
                        .iter()
                        .zip(self.second.weights())
                        .map(|(x2, &w2)| w2 * f(x1, x2)),
                )
            },
        ))
    }

    /// Quadrature sum against values laid out row-major as
    /// `values[first_index * second_len + second_index]`.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len());
        let k = self.second.len();
        sum_blocked(self.first.weights().iter().enumerate().map(|(j, &w1)| {
            w1 * sum_blocked(
                values[j * k..(j + 1) * k]
                    .iter()
                    .zip(self.second.weights())
                    .map(|(&v, &w2)| w2 * v),
            )
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_i;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (xs, ws) = gauss_legendre(12);
        // degree up to 2n-1 = 23
        for deg in 0..=23usize {
            let num: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = if deg % 2 == 0 {
                2.0 / (deg as f64 + 1.0)
            } else {
                0.0
            };
            assert!((num - exact).abs() < 1e-13, "degree {deg}: {num} vs {exact}");
        }
    }

    #[test]
    fn adaptive_handles_smooth_and_peaked_integrands() {
        let v = integrate_adaptive(|x: f64| x.exp(), 0.0, 1.0, 1e-12, 1e-14).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-12);
        // sharp Gaussian bump
        let s = 1e-3;
        let v = integrate_adaptive(
            |x: f64| (-0.5 * (x / s) * (x / s)).exp(),
            -1.0,
            1.0,
            1e-10,
            1e-14,
        )
        .unwrap();
        assert_relative_eq!(v, s * (2.0 * PI).sqrt(), max_relative = 1e-9);
        // step function: converges by bisection around the jump
        let v = integrate_adaptive(
            |x: f64| if x < 0.3 { 1.0 } else { 0.0 },
            0.0,
            1.0,
            1e-9,
            1e-12,
        )
        .unwrap();
        assert!((v - 0.3).abs() < 1e-9);
    }

    #[test]
    fn adaptive_rejects_non_finite_integrands() {
        assert!(integrate_adaptive(|x: f64| 1.0 / x, -1.0, 1.0, 1e-10, 1e-12).is_err());
    }

    #[test]
    fn circle_rule_weights_and_trig_moments() {
        let rule = SphereRule::deterministic(1, 256).unwrap();
        let total: f64 = rule.weights().iter().sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        // ∫ cos²θ dθ = π
        let rule128 = SphereRule::deterministic(1, 128).unwrap();
        let m = rule128.integrate(|x| x.coords()[0] * x.coords()[0]);
        assert!((m - PI).abs() < 1e-12);
    }

    #[test]
    fn circle_rule_is_spectrally_accurate_on_vmf_integrands() {
        // ∫ e^{κ cos θ} dθ = 2π I₀(κ)
        let rule = SphereRule::deterministic(1, 256).unwrap();
        for &kappa in &[0.5, 2.0, 5.0, 10.0] {
            let v = rule.integrate(|x| (kappa * x.coords()[0]).exp());
            let exact = 2.0 * PI * bessel_i(0.0, kappa);
            assert!((v - exact).abs() < 1e-10 * exact.max(1.0), "κ={kappa}");
        }
    }

    #[test]
    fn sphere2_rule_integrates_constant_and_coordinate_moment() {
        let rule = SphereRule::deterministic(2, 64).unwrap();
        let total = rule.integrate(|_| 1.0);
        assert!((total - surface_area(2)).abs() < 1e-10);
        // ∫ (x'e₃)² dσ = ω₂/3 by symmetry
        let m = rule.integrate(|x| x.coords()[2] * x.coords()[2]);
        assert!((m - surface_area(2) / 3.0).abs() < 1e-8);
    }

    #[test]
    fn sphere3_rule_integrates_constant_and_coordinate_moment() {
        let rule = SphereRule::deterministic(3, 16).unwrap();
        let total = rule.integrate(|_| 1.0);
        assert!((total - surface_area(3)).abs() < 1e-9);
        // by symmetry each squared coordinate integrates to ω₃/4
        let m = rule.integrate(|x| x.coords()[3] * x.coords()[3]);
        assert!((m - surface_area(3) / 4.0).abs() < 1e-8);
    }

    #[test]
    fn deterministic_rule_rejects_large_q_and_small_resolution() {
        assert!(matches!(
            SphereRule::deterministic(4, 64),
            Err(DirGofError::UnsupportedSphereDimension { q: 4 })
        ));
        assert!(SphereRule::deterministic(1, 4).is_err());
    }

    #[test]
    fn monte_carlo_rule_contract() {
        let rule = SphereRule::monte_carlo(4, 100_000, RngStream::new(11)).unwrap();
        // weights sum / constant integral is exact by construction
        let one = rule.integrate(|_| 1.0);
        assert_eq!(one, surface_area(4));
        // determinism
        let again = SphereRule::monte_carlo(4, 1000, RngStream::new(11)).unwrap();
        let again2 = SphereRule::monte_carlo(4, 1000, RngStream::new(11)).unwrap();
        for (a, b) in again.nodes().iter().zip(again2.nodes()) {
            assert_eq!(a.coords(), b.coords());
        }
    }

    #[test]
    fn monte_carlo_moment_matches_deterministic_within_three_se() {
        let n = 100_000;
        let rule = SphereRule::monte_carlo(2, n, RngStream::new(3)).unwrap();
        let m = rule.integrate(|x| x.coords()[2] * x.coords()[2]);
        let exact = surface_area(2) / 3.0;
        // Var(x₃²) for uniform on Ω₂: x₃² ~ Beta-like with E=1/3, E[x₃⁴]=1/5
        let var = (1.0f64 / 5.0 - 1.0 / 9.0) * surface_area(2).powi(2);
        let se = (var / n as f64).sqrt();
        assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact} (se {se})");
    }

    #[test]
    fn monte_carlo_error_halves_when_nodes_quadruple() {
        // n^{-1/2} rate: quadrupling nodes should halve the RMS error
        let f = |x: &UnitVector| (x.coords()[0] + 0.3).powi(2) * (x.coords()[1] - 0.1).exp();
        let exact = SphereRule::deterministic(2, 96).unwrap().integrate(f);
        let reps = 24;
        let rms = |n_nodes: usize, salt: u64| -> f64 {
            let mut acc = 0.0;
            for r in 0..reps {
                let rule =
                    SphereRule::monte_carlo(2, n_nodes, RngStream::new(1000 + salt).fork(r))
                        .unwrap();
                let err = rule.integrate(f) - exact;
                acc += err * err;
            }
            (acc / reps as f64).sqrt()
        };
        let e1 = rms(2000, 0);
        let e2 = rms(8000, 1);
        let ratio = e1 / e2;
        assert!(
            ratio > 1.4 && ratio < 2.9,
            "RMS ratio {ratio} not consistent with n^-1/2"
        );
    }

    #[test]
    fn line_rule_weights_sum_to_length() {
        let rule = LineRule::gauss_legendre(-3.0, 5.0, 64).unwrap();
        let total: f64 = rule.weights().iter().sum();
        assert!((total - 8.0).abs() < 1e-10);
        let v = rule.integrate(|x| x * x);
        assert_relative_eq!(v, (125.0 + 27.0) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn product_rules_have_product_counts_and_factor_weights() {
        let sphere = SphereRule::deterministic(1, 16).unwrap();
        let line = LineRule::gauss_legendre(0.0, 1.0, 8).unwrap();
        let rule = DirLinRule::new(sphere.clone(), line);
        assert_eq!(rule.len(), 16 * 8);
        let v = rule.integrate(|x, y| x.coords()[0] * x.coords()[0] * y);
        assert_relative_eq!(v, PI * 0.5, max_relative = 1e-12);

        let dd = DirDirRule::new(sphere.clone(), sphere);
        assert_eq!(dd.len(), 256);
        let v = dd.integrate(|a, b| a.coords()[0] * a.coords()[0] + b.coords()[1] * b.coords()[1]);
        assert_relative_eq!(v, 2.0 * PI * PI * 2.0, max_relative = 1e-12);
    }
}
