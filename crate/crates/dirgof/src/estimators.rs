//! Nonparametric estimators: directional, directional-linear and
//! directional-directional KDEs, and local constant/linear regression with
//! a directional covariate.
//!
//! Summation is always in sample-index order with pairwise-block
//! accumulation, so results are deterministic across runs and worker
//! counts. The `*_matrix` helpers expose the kernel-evaluation matrices
//! that the test statistics and resampling drivers reuse across replicate
//! loops.

use crate::error::{DirGofError, Result};
use crate::kernels::{DirectionalKernel, LinearKernel};
use crate::quad::sum_blocked;
use crate::sphere::{tangent_basis, UnitVector};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Sample of directions on a common Ω_q.
#[derive(Debug, Clone)]
pub struct DirSample {
    points: Vec<UnitVector>,
    q: usize,
}

impl DirSample {
    pub fn new(points: Vec<UnitVector>) -> Result<Self> {
        let q = match points.first() {
            Some(p) => p.q(),
            None => {
                return Err(DirGofError::InvalidConfig {
                    field: "sample".into(),
                    reason: "a directional sample needs at least one point".into(),
                })
            }
        };
        for p in &points {
            if p.q() != q {
                return Err(DirGofError::DimensionMismatch {
                    expected: q,
                    got: p.q(),
                });
            }
        }
        Ok(Self { points, q })
    }

    /// Circle sample from angles in radians.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        Self::new(angles.iter().map(|&a| UnitVector::from_angle(a)).collect())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }
}

/// Paired directional-linear sample on Ω_q × ℝ.
#[derive(Debug, Clone)]
pub struct DirLinSample {
    directions: DirSample,
    responses: Vec<f64>,
}

impl DirLinSample {
    pub fn new(directions: DirSample, responses: Vec<f64>) -> Result<Self> {
        if directions.n() != responses.len() {
            return Err(DirGofError::InvalidConfig {
                field: "responses".into(),
                reason: format!(
                    "{} responses for {} directions",
                    responses.len(),
                    directions.n()
                ),
            });
        }
        Ok(Self {
            directions,
            responses,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn directions(&self) -> &DirSample {
        &self.directions
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }
}

/// Paired directional-directional sample on Ω_{q1} × Ω_{q2}.
#[derive(Debug, Clone)]
pub struct DirDirSample {
    first: DirSample,
    second: DirSample,
}

impl DirDirSample {
    pub fn new(first: DirSample, second: DirSample) -> Result<Self> {
        if first.n() != second.n() {
            return Err(DirGofError::InvalidConfig {
                field: "second".into(),
                reason: format!("lengths differ: {} vs {}", first.n(), second.n()),
            });
        }
        Ok(Self { first, second })
    }

    pub fn n(&self) -> usize {
        self.first.n()
    }

    pub fn first(&self) -> &DirSample {
        &self.first
    }

    pub fn second(&self) -> &DirSample {
        &self.second
    }
}

/// Bandwidth set for the estimators: h for the (first) directional
/// component, optionally g (linear) or h₂ (second directional).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second: Option<f64>,
}

impl Bandwidths {
    pub fn single(h: f64) -> Result<Self> {
        check_bandwidth(h, "h")?;
        Ok(Self { h, second: None })
    }

    pub fn pair(h: f64, second: f64) -> Result<Self> {
        check_bandwidth(h, "h")?;
        check_bandwidth(second, "g")?;
        Ok(Self {
            h,
            second: Some(second),
        })
    }
}

pub(crate) fn check_bandwidth(h: f64, name: &str) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(DirGofError::InvalidConfig {
            field: name.into(),
            reason: format!("bandwidth must be positive and finite, got {h}"),
        });
    }
    Ok(())
}

/// Warns about configurations where the effective local sample size
/// nh^q < 1 makes the smoothers unreliable. Purely advisory.
pub fn effective_sample_diagnostic(n: usize, h: f64, q: usize) -> Option<String> {
    let eff = n as f64 * h.powi(q as i32);
    (eff < 1.0).then(|| {
        format!("nh^q = {eff:.3} < 1: too little local mass for stable smoothing (n={n}, h={h}, q={q})")
    })
}

// ---------------------------------------------------------------------------
// Kernel matrices
// ---------------------------------------------------------------------------

/// Matrix of normalized directional kernel evaluations, row-major n × J:
/// entry (i, j) = c_{h,q}(L) L((1 - x_j'X_i)/h²).
pub fn dir_kernel_matrix(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    points: &[UnitVector],
) -> Result<Vec<f64>> {
    check_bandwidth(h, "h")?;
    for p in points {
        if p.q() != sample.q() {
            return Err(DirGofError::DimensionMismatch {
                expected: sample.q(),
                got: p.q(),
            });
        }
    }
    let c = l.c_hq_cached(h, sample.q())?;
    let inv_h2 = 1.0 / (h * h);
    let cols = points.len();
    let mut out = vec![0.0; sample.n() * cols];
    for (i, xi) in sample.points().iter().enumerate() {
        let row = &mut out[i * cols..(i + 1) * cols];
        for (j, xj) in points.iter().enumerate() {
            row[j] = c * l.eval((1.0 - xj.dot(xi)) * inv_h2);
        }
    }
    Ok(out)
}

/// Matrix of scaled linear kernel evaluations, row-major n × K:
/// entry (i, k) = K((y_k - Y_i)/g) / g.
pub fn lin_kernel_matrix(responses: &[f64], g: f64, k: &LinearKernel, points: &[f64]) -> Vec<f64> {
    let inv_g = 1.0 / g;
    let cols = points.len();
    let mut out = vec![0.0; responses.len() * cols];
    for (i, &yi) in responses.iter().enumerate() {
        let row = &mut out[i * cols..(i + 1) * cols];
        for (j, &yj) in points.iter().enumerate() {
            row[j] = k.eval((yj - yi) * inv_g) * inv_g;
        }
    }
    out
}

/// Joint and marginal directional-linear KDE values over a product grid.
#[derive(Debug, Clone)]
pub struct DirLinGridKde {
    /// f̂_{h,g} over the grid, row-major `[dir_index * lin_len + lin_index]`.
    pub joint: Vec<f64>,
    /// f̂_h at the directional nodes.
    pub dir_marginal: Vec<f64>,
    /// f̂_g at the linear nodes.
    pub lin_marginal: Vec<f64>,
}

/// Evaluate the directional-linear KDE and both marginal KDEs over a
/// product grid in one streamed pass (sample blocks of 1024 keep memory
/// flat for large n).
pub fn kde_dirlin_grid(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    l: &DirectionalKernel,
    k: &LinearKernel,
    dir_nodes: &[UnitVector],
    lin_nodes: &[f64],
) -> Result<DirLinGridKde> {
    let n = sample.n();
    let j_len = dir_nodes.len();
    let k_len = lin_nodes.len();
    let mut joint = vec![0.0; j_len * k_len];
    let mut dir_marginal = vec![0.0; j_len];
    let mut lin_marginal = vec![0.0; k_len];
    const BLOCK: usize = 1024;
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let dirs_block =
            DirSample::new(sample.directions().points()[start..end].to_vec())?;
        let a = dir_kernel_matrix(&dirs_block, h, l, dir_nodes)?;
        let b = lin_kernel_matrix(&sample.responses()[start..end], g, k, lin_nodes);
        for i in 0..(end - start) {
            let arow = &a[i * j_len..(i + 1) * j_len];
            let brow = &b[i * k_len..(i + 1) * k_len];
            for (j, &aij) in arow.iter().enumerate() {
                let out = &mut joint[j * k_len..(j + 1) * k_len];
                for (o, &bik) in out.iter_mut().zip(brow) {
                    *o += aij * bik;
                }
            }
            for (m, &aij) in dir_marginal.iter_mut().zip(arow) {
                *m += aij;
            }
            for (m, &bik) in lin_marginal.iter_mut().zip(brow) {
                *m += bik;
            }
        }
        start = end;
    }
    let inv_n = 1.0 / n as f64;
    for v in joint.iter_mut() {
        *v *= inv_n;
    }
    for v in dir_marginal.iter_mut() {
        *v *= inv_n;
    }
    for v in lin_marginal.iter_mut() {
        *v *= inv_n;
    }
    Ok(DirLinGridKde {
        joint,
        dir_marginal,
        lin_marginal,
    })
}

/// Joint and marginal directional-directional KDE values over a product grid.
#[derive(Debug, Clone)]
pub struct DirDirGridKde {
    /// f̂_{h1,h2} over the grid, row-major `[first_index * second_len + second_index]`.
    pub joint: Vec<f64>,
    pub first_marginal: Vec<f64>,
    pub second_marginal: Vec<f64>,
}

/// Directional-directional analogue of [`kde_dirlin_grid`].
pub fn kde_dirdir_grid(
    sample: &DirDirSample,
    h1: f64,
    h2: f64,
    l: &DirectionalKernel,
    first_nodes: &[UnitVector],
    second_nodes: &[UnitVector],
) -> Result<DirDirGridKde> {
    let n = sample.n();
    let j_len = first_nodes.len();
    let k_len = second_nodes.len();
    let mut joint = vec![0.0; j_len * k_len];
    let mut first_marginal = vec![0.0; j_len];
    let mut second_marginal = vec![0.0; k_len];
    const BLOCK: usize = 1024;
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let first_block = DirSample::new(sample.first().points()[start..end].to_vec())?;
        let second_block = DirSample::new(sample.second().points()[start..end].to_vec())?;
        let a = dir_kernel_matrix(&first_block, h1, l, first_nodes)?;
        let b = dir_kernel_matrix(&second_block, h2, l, second_nodes)?;
        for i in 0..(end - start) {
            let arow = &a[i * j_len..(i + 1) * j_len];
            let brow = &b[i * k_len..(i + 1) * k_len];
            for (j, &aij) in arow.iter().enumerate() {
                let out = &mut joint[j * k_len..(j + 1) * k_len];
                for (o, &bik) in out.iter_mut().zip(brow) {
                    *o += aij * bik;
                }
            }
            for (m, &aij) in first_marginal.iter_mut().zip(arow) {
                *m += aij;
            }
            for (m, &bik) in second_marginal.iter_mut().zip(brow) {
                *m += bik;
            }
        }
        start = end;
    }
    let inv_n = 1.0 / n as f64;
    for v in joint.iter_mut() {
        *v *= inv_n;
    }
    for v in first_marginal.iter_mut() {
        *v *= inv_n;
    }
    for v in second_marginal.iter_mut() {
        *v *= inv_n;
    }
    Ok(DirDirGridKde {
        joint,
        first_marginal,
        second_marginal,
    })
}

// ---------------------------------------------------------------------------
// Kernel density estimators
// ---------------------------------------------------------------------------

/// Directional KDE: f̂_h(x) = (1/n) Σ c_{h,q}(L) L((1 - x'X_i)/h²).
pub fn kde_dir(sample: &DirSample, h: f64, l: &DirectionalKernel, x: &UnitVector) -> Result<f64> {
    if x.q() != sample.q() {
        return Err(DirGofError::DimensionMismatch {
            expected: sample.q(),
            got: x.q(),
        });
    }
    check_bandwidth(h, "h")?;
    let c = l.c_hq_cached(h, sample.q())?;
    let inv_h2 = 1.0 / (h * h);
    let total = sum_blocked(
        sample
            .points()
            .iter()
            .map(|xi| l.eval((1.0 - x.dot(xi)) * inv_h2)),
    );
    Ok(c * total / sample.n() as f64)
}

/// Directional KDE evaluated at many points at once.
pub fn kde_dir_batch(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    points: &[UnitVector],
) -> Result<Vec<f64>> {
    for p in points {
        if p.q() != sample.q() {
            return Err(DirGofError::DimensionMismatch {
                expected: sample.q(),
                got: p.q(),
            });
        }
    }
    check_bandwidth(h, "h")?;
    let c = l.c_hq_cached(h, sample.q())?;
    let inv_h2 = 1.0 / (h * h);
    let inv_n = 1.0 / sample.n() as f64;
    Ok(points
        .iter()
        .map(|x| {
            c * inv_n
                * sum_blocked(
                    sample
                        .points()
                        .iter()
                        .map(|xi| l.eval((1.0 - x.dot(xi)) * inv_h2)),
                )
        })
        .collect())
}

/// Linear (Euclidean) marginal KDE: f̂_g(y) = (1/(ng)) Σ K((y - Y_i)/g).
pub fn kde_lin(responses: &[f64], g: f64, k: &LinearKernel, y: f64) -> Result<f64> {
    check_bandwidth(g, "g")?;
    let inv_g = 1.0 / g;
    let total = sum_blocked(responses.iter().map(|&yi| k.eval((y - yi) * inv_g)));
    Ok(total * inv_g / responses.len() as f64)
}

/// Directional-linear KDE: (1/n) Σ L_h(x, X_i) K((y - Y_i)/g)/g.
pub fn kde_dirlin(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    l: &DirectionalKernel,
    k: &LinearKernel,
    x: &UnitVector,
    y: f64,
) -> Result<f64> {
    if x.q() != sample.directions().q() {
        return Err(DirGofError::DimensionMismatch {
            expected: sample.directions().q(),
            got: x.q(),
        });
    }
    check_bandwidth(h, "h")?;
    check_bandwidth(g, "g")?;
    let c = l.c_hq_cached(h, sample.directions().q())?;
    let inv_h2 = 1.0 / (h * h);
    let inv_g = 1.0 / g;
    let total = sum_blocked(
        sample
            .directions()
            .points()
            .iter()
            .zip(sample.responses())
            .map(|(xi, &yi)| {
                c * l.eval((1.0 - x.dot(xi)) * inv_h2) * (k.eval((y - yi) * inv_g) * inv_g)
            }),
    );
    Ok(total / sample.n() as f64)
}

/// Directional-directional KDE: (1/n) Σ L_{h1}(x₁, X_{1i}) L_{h2}(x₂, X_{2i}).
/// Each factor carries its own (q_j, h_j) normalization.
pub fn kde_dirdir(
    sample: &DirDirSample,
    h1: f64,
    h2: f64,
    l: &DirectionalKernel,
    x1: &UnitVector,
    x2: &UnitVector,
) -> Result<f64> {
    if x1.q() != sample.first().q() {
        return Err(DirGofError::DimensionMismatch {
            expected: sample.first().q(),
            got: x1.q(),
        });
    }
    if x2.q() != sample.second().q() {
        return Err(DirGofError::DimensionMismatch {
            expected: sample.second().q(),
            got: x2.q(),
        });
    }
    check_bandwidth(h1, "h1")?;
    check_bandwidth(h2, "h2")?;
    let c1 = l.c_hq_cached(h1, sample.first().q())?;
    let c2 = l.c_hq_cached(h2, sample.second().q())?;
    let inv_h1 = 1.0 / (h1 * h1);
    let inv_h2 = 1.0 / (h2 * h2);
    let total = sum_blocked(
        sample
            .first()
            .points()
            .iter()
            .zip(sample.second().points())
            .map(|(a, b)| {
                (c1 * l.eval((1.0 - x1.dot(a)) * inv_h1))
                    * (c2 * l.eval((1.0 - x2.dot(b)) * inv_h2))
            }),
    );
    Ok(total / sample.n() as f64)
}

// ---------------------------------------------------------------------------
// Local polynomial regression
// ---------------------------------------------------------------------------

/// Local fit degree: constant (Nadaraya-Watson) or linear in the tangent
/// space at the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degree {
    Constant,
    Linear,
}

impl Degree {
    pub fn p(&self) -> usize {
        match self {
            Degree::Constant => 0,
            Degree::Linear => 1,
        }
    }
}

/// Relative singular-value cutoff below which the local design is declared
/// rank deficient rather than silently pseudo-inverted.
const SV_RATIO_CUTOFF: f64 = 1e-10;

fn point_label(x: &UnitVector) -> String {
    let coords: Vec<String> = x.coords().iter().map(|c| format!("{c:.6}")).collect();
    format!("({})", coords.join(", "))
}

/// Local polynomial weights W^p_{n,i}(x): the fitted-value row of the
/// weighted least squares hat operator at x. Weights sum to one. The
/// kernel normalization constant cancels in the weights, so the raw
/// L((1 - x'X_i)/h²) values are used.
pub fn locpoly_weights(
    dirs: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    p: Degree,
    x: &UnitVector,
) -> Result<Vec<f64>> {
    if x.q() != dirs.q() {
        return Err(DirGofError::DimensionMismatch {
            expected: dirs.q(),
            got: x.q(),
        });
    }
    check_bandwidth(h, "h")?;
    let inv_h2 = 1.0 / (h * h);
    let ell: Vec<f64> = dirs
        .points()
        .iter()
        .map(|xi| l.eval((1.0 - x.dot(xi)) * inv_h2))
        .collect();
    match p {
        Degree::Constant => {
            let total = sum_blocked(ell.iter().copied());
            if !(total > 0.0) || !total.is_finite() {
                return Err(DirGofError::RankDeficient {
                    point: point_label(x),
                });
            }
            Ok(ell.iter().map(|&e| e / total).collect())
        }
        Degree::Linear => {
            let q = dirs.q();
            let d = q + 1;
            let basis = tangent_basis(x);
            // design rows z_i = (1, (X_i - x)'B_x)
            let mut design = Vec::with_capacity(dirs.n());
            for xi in dirs.points() {
                let diff: Vec<f64> = xi
                    .coords()
                    .iter()
                    .zip(x.coords())
                    .map(|(a, b)| a - b)
                    .collect();
                let mut z = Vec::with_capacity(d);
                z.push(1.0);
                z.extend(basis.project(&diff));
                design.push(z);
            }
            // normal matrix M = Σ ell_i z_i z_i'
            let mut m = DMatrix::<f64>::zeros(d, d);
            for (z, &e) in design.iter().zip(&ell) {
                for r in 0..d {
                    for c in 0..d {
                        m[(r, c)] += e * z[r] * z[c];
                    }
                }
            }
            let svd = m.svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smax > 0.0) || !smax.is_finite() || smin < SV_RATIO_CUTOFF * smax {
                return Err(DirGofError::RankDeficient {
                    point: point_label(x),
                });
            }
            let mut e1 = DVector::<f64>::zeros(d);
            e1[0] = 1.0;
            let a = svd
                .solve(&e1, 0.0)
                .map_err(|_| DirGofError::RankDeficient {
                    point: point_label(x),
                })?;
            Ok(design
                .iter()
                .zip(&ell)
                .map(|(z, &e)| e * z.iter().zip(a.iter()).map(|(zi, ai)| zi * ai).sum::<f64>())
                .collect())
        }
    }
}

/// Local polynomial regression estimate m̂_{h,p}(x) = Σ W^p_{n,i}(x) Y_i.
pub fn locpoly_regress(
    sample: &DirLinSample,
    h: f64,
    l: &DirectionalKernel,
    p: Degree,
    x: &UnitVector,
) -> Result<f64> {
    let w = locpoly_weights(sample.directions(), h, l, p, x)?;
    Ok(sum_blocked(
        w.iter().zip(sample.responses()).map(|(&wi, &yi)| wi * yi),
    ))
}

/// Local weights at many evaluation points, row-major J × n. Reused by the
/// regression statistic and the wild bootstrap, which hold the directions
/// fixed across replicates.
pub fn locpoly_weight_matrix(
    dirs: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    p: Degree,
    points: &[UnitVector],
) -> Result<Vec<f64>> {
    let n = dirs.n();
    let mut out = vec![0.0; points.len() * n];
    for (j, x) in points.iter().enumerate() {
        let w = locpoly_weights(dirs, h, l, p, x)?;
        out[j * n..(j + 1) * n].copy_from_slice(&w);
    }
    Ok(out)
}
