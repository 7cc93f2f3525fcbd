//! Geometry of the unit q-sphere Ω_q ⊂ ℝ^{q+1}.

use crate::error::{DirGofError, Result};
use crate::rng::RngStream;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// How far from 1 an input norm may be before construction refuses to
/// renormalize silently.
const NORM_REPAIR_TOL: f64 = 1e-6;

/// A point on Ω_q, stored in ambient coordinates of length q+1.
///
/// Construction renormalizes inputs whose norm is within 1e-6 of unity and
/// rejects anything further away, so downstream code can rely on
/// ‖x‖ = 1 to machine precision.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Build from ambient coordinates; the norm must already be within
    /// 1e-6 of 1.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(DirGofError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_REPAIR_TOL {
            return Err(DirGofError::NotUnitNorm { norm });
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(Self { coords })
    }

    /// Normalize an arbitrary nonzero vector onto the sphere.
    pub fn from_unnormalized(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(DirGofError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(DirGofError::NotUnitNorm { norm });
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(Self { coords })
    }

    /// Point on the circle Ω₁ at the given angle (radians).
    pub fn from_angle(theta: f64) -> Self {
        Self {
            coords: vec![theta.cos(), theta.sin()],
        }
    }

    /// Canonical axis e_k on Ω_q (k is zero-based, k ≤ q).
    pub fn axis(q: usize, k: usize) -> Self {
        let mut coords = vec![0.0; q + 1];
        coords[k] = 1.0;
        Self { coords }
    }

    /// Sphere dimension q (ambient dimension minus one).
    pub fn q(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Euclidean inner product x'y.
    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Angle of a circle point, in (-π, π]. Panics off Ω₁.
    pub fn angle(&self) -> f64 {
        assert_eq!(self.q(), 1, "angle() is only defined on the circle");
        self.coords[1].atan2(self.coords[0])
    }
}

/// Orthonormal basis B_x of the tangent space at a point x ∈ Ω_q, stored
/// column-wise as a (q+1) × q matrix. Satisfies B_x'B_x = I_q and
/// B_xB_x' = I_{q+1} - xx'.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    base_point: UnitVector,
    /// columns[j] is the j-th basis column, length q+1.
    columns: Vec<Vec<f64>>,
}

impl TangentBasis {
    pub fn base_point(&self) -> &UnitVector {
        &self.base_point
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Tangent coordinates B_x'(v) of an ambient vector v.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Ambient vector B_x t from tangent coordinates t.
    pub fn embed(&self, t: &[f64]) -> Vec<f64> {
        let d = self.base_point.coords().len();
        let mut out = vec![0.0; d];
        for (col, &tj) in self.columns.iter().zip(t) {
            for (o, c) in out.iter_mut().zip(col) {
                *o += c * tj;
            }
        }
        out
    }
}

/// Surface area ω_q = 2π^{(q+1)/2} / Γ((q+1)/2) of Ω_q.
pub fn surface_area(q: usize) -> f64 {
    let a = (q as f64 + 1.0) / 2.0;
    2.0 * PI.powf(a) / ln_gamma(a).exp()
}

/// Deterministic orthonormal tangent basis at x, completed from x by a
/// Householder reflection (the sign choice keeps the reflector away from
/// the numerically unstable x ≈ e₁ case).
pub fn tangent_basis(x: &UnitVector) -> TangentBasis {
    let d = x.coords().len();
    let s = if x.coords()[0] >= 0.0 { 1.0 } else { -1.0 };
    // v = x + s e₁; H = I - 2 vv'/(v'v) sends e₁ to -s x, so the remaining
    // columns of H span the tangent space at x.
    let mut v = x.coords().to_vec();
    v[0] += s;
    let vtv: f64 = v.iter().map(|c| c * c).sum();
    let mut columns = Vec::with_capacity(d - 1);
    for j in 1..d {
        let mut col = vec![0.0; d];
        col[j] = 1.0;
        let factor = 2.0 * v[j] / vtv;
        for (c, vi) in col.iter_mut().zip(&v) {
            *c -= factor * vi;
        }
        columns.push(col);
    }
    TangentBasis {
        base_point: x.clone(),
        columns,
    }
}

/// i.i.d. uniform draws on Ω_q, by normalizing (q+1)-variate standard
/// Gaussians.
pub fn sample_uniform_sphere(q: usize, n: usize, stream: RngStream) -> Vec<UnitVector> {
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let coords: Vec<f64> = (0..=q).map(|_| StandardNormal.sample(&mut rng)).collect();
        // a zero draw has probability ~0; retry keeps the output exact
        if let Ok(x) = UnitVector::from_unnormalized(coords) {
            out.push(x);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_abs(m: &[Vec<f64>]) -> f64 {
        m.iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |a, b| a.max(b.abs()))
    }

    fn basis_residuals(x: &UnitVector) -> (f64, f64) {
        let b = tangent_basis(x);
        let q = x.q();
        let d = q + 1;
        // B'B - I_q
        let mut r1 = vec![vec![0.0; q]; q];
        for i in 0..q {
            for j in 0..q {
                let dot: f64 = b.columns()[i]
                    .iter()
                    .zip(&b.columns()[j])
                    .map(|(a, c)| a * c)
                    .sum();
                r1[i][j] = dot - if i == j { 1.0 } else { 0.0 };
            }
        }
        // BB' - (I - xx')
        let mut r2 = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut dot = 0.0;
                for col in b.columns() {
                    dot += col[i] * col[j];
                }
                let target = if i == j { 1.0 } else { 0.0 } - x.coords()[i] * x.coords()[j];
                r2[i][j] = dot - target;
            }
        }
        (max_abs(&r1), max_abs(&r2))
    }

    #[test]
    fn surface_areas() {
        assert_relative_eq!(surface_area(1), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(surface_area(2), 4.0 * PI, max_relative = 1e-14);
        // ω₃ = 2π² from the formula with Γ(2) = 1
        assert_relative_eq!(surface_area(3), 2.0 * PI * PI, max_relative = 1e-14);
        assert_relative_eq!(surface_area(0), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn construction_repairs_small_norm_errors_only() {
        let x = UnitVector::new(vec![1.0 + 5e-7, 0.0]).unwrap();
        assert_relative_eq!(
            x.coords().iter().map(|c| c * c).sum::<f64>(),
            1.0,
            epsilon = 1e-12
        );
        assert!(UnitVector::new(vec![1.1, 0.0]).is_err());
        assert!(UnitVector::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn tangent_basis_at_canonical_axes() {
        let e3 = UnitVector::axis(2, 2);
        let (r1, r2) = basis_residuals(&e3);
        assert!(r1 < 1e-12 && r2 < 1e-12);
        // columns span {e1, e2}: third ambient coordinate of each column is 0
        let b = tangent_basis(&e3);
        for col in b.columns() {
            assert!(col[2].abs() < 1e-12);
        }

        let e1 = UnitVector::new(vec![1.0, 0.0]).unwrap();
        let b = tangent_basis(&e1);
        assert_eq!(b.columns().len(), 1);
        assert!(b.columns()[0][0].abs() < 1e-12);
        assert_relative_eq!(b.columns()[0][1].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tangent_basis_invariants_on_random_points() {
        let pts = sample_uniform_sphere(2, 64, RngStream::new(99));
        for x in &pts {
            let (r1, r2) = basis_residuals(x);
            assert!(r1 < 1e-10, "B'B residual {r1}");
            assert!(r2 < 1e-10, "BB' residual {r2}");
        }
        // antipodal-ish of e1 exercises the reflector sign branch
        let x = UnitVector::new(vec![-1.0, 1e-9, 0.0]).unwrap();
        let (r1, r2) = basis_residuals(&x);
        assert!(r1 < 1e-10 && r2 < 1e-10);
    }

    #[test]
    fn uniform_sampling_has_unit_norm_and_small_resultant() {
        let n = 100_000;
        let pts = sample_uniform_sphere(1, n, RngStream::new(7));
        for x in pts.iter().take(100) {
            assert_relative_eq!(
                x.coords().iter().map(|c| c * c).sum::<f64>(),
                1.0,
                epsilon = 1e-12
            );
        }
        let mut mean = [0.0f64; 2];
        for x in &pts {
            mean[0] += x.coords()[0];
            mean[1] += x.coords()[1];
        }
        let resultant = (mean[0] * mean[0] + mean[1] * mean[1]).sqrt() / n as f64;
        assert!(resultant < 0.01, "mean resultant length {resultant}");
    }

    #[test]
    fn uniform_sampling_is_reproducible() {
        let a = sample_uniform_sphere(2, 10, RngStream::new(5));
        let b = sample_uniform_sphere(2, 10, RngStream::new(5));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.coords(), y.coords());
        }
    }
}
