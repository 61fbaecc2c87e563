//! Numerical checks of the sufficient conditions for consistency.
//!
//! - [`consistency_matrix`] builds `M_{G,Z}`, the average over `(g, z)` of
//!   `a a*` with `a_j = (1/2pi) int g h_j / ((1 + K_j)(c M - z)^2)` at the
//!   true weights, and [`reduced_min_eigenvalue`] reports the smallest
//!   eigenvalue of `B^T M B` on the sum-zero subspace.
//! - [`spectral_gram`], [`autocov_gram`] and [`ar1_gram`] give the Gram matrix
//!   `(1/2pi) int h h^T` by quadrature, by the autocovariance series and (for
//!   AR(1)) in closed form.
//! - [`vandermonde_condition`] is the 2-norm condition number of `(a_j^k)`.

use faer::{c64, Mat};

use crate::linalg;
use crate::lsd::{FixedPointSystem, Iteration};
use crate::model::{GridPoint, JointSpectralGrid, ProcessFamily};
use crate::spectra::{fourier_frequency, WeightFunction};
use crate::{Error, Result, C64};

/// Orthonormal `J x (J - 1)` basis of `{x : sum x = 0}` (Helmert contrasts).
pub fn sum_zero_basis(j: usize) -> Mat<f64> {
    Mat::from_fn(j, j.saturating_sub(1), |i, k| {
        let k1 = (k + 1) as f64;
        let norm = (k1 * (k1 + 1.0)).sqrt();
        match i.cmp(&(k + 1)) {
            std::cmp::Ordering::Less => 1.0 / norm,
            std::cmp::Ordering::Equal => -k1 / norm,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

/// `M_{G,Z}` at the grid's weights, with the limiting kernel solved to
/// convergence from zero.
pub fn consistency_matrix(
    grid: &JointSpectralGrid,
    gs: &[WeightFunction],
    z: &[C64],
    c: f64,
    nodes: usize,
) -> Result<Mat<c64>> {
    if gs.is_empty() || z.is_empty() {
        return Err(Error::domain("need at least one weight function and one z"));
    }
    let j = grid.len();
    let family = grid.family();
    let h: Vec<Vec<f64>> = grid
        .points()
        .iter()
        .map(|p| {
            (1..=nodes)
                .map(|t| family.h_unchecked(p, fourier_frequency(t, nodes)))
                .collect()
        })
        .collect();
    let iteration = Iteration::Residual {
        tol: 1e-12,
        max_iters: 10_000,
    };
    let mut m = Mat::<c64>::zeros(j, j);
    for g in gs {
        let system = FixedPointSystem::for_grid(grid, g, nodes)?;
        let g_nodes: Vec<f64> = (1..=nodes).map(|t| g.eval(fourier_frequency(t, nodes))).collect();
        for zz in z {
            let sol = system.solve(grid.weights(), *zz, c, None, iteration)?;
            let r2: Vec<C64> = sol
                .m_values
                .iter()
                .map(|mt| {
                    let d = c * *mt - *zz;
                    1.0 / (d * d)
                })
                .collect();
            let a: Vec<C64> = (0..j)
                .map(|jj| {
                    let s: C64 = (0..nodes).map(|t| r2[t] * (g_nodes[t] * h[jj][t])).sum();
                    s / (nodes as f64) / (1.0 + sol.k_values[jj])
                })
                .collect();
            for r in 0..j {
                for s in 0..j {
                    m[(r, s)] += a[r] * a[s].conj();
                }
            }
        }
    }
    let scale = 1.0 / (gs.len() * z.len()) as f64;
    Ok(Mat::from_fn(j, j, |r, s| m[(r, s)] * scale))
}

/// Smallest eigenvalue of `B^T M B` for the Helmert basis `B`.
pub fn reduced_min_eigenvalue(m: &Mat<c64>) -> Result<f64> {
    let j = m.nrows();
    if j < 2 {
        return Err(Error::domain("the sum-zero subspace needs at least two atoms"));
    }
    let b = linalg::to_complex(sum_zero_basis(j).as_ref());
    let reduced = b.transpose() * m * &b;
    // symmetrise away rounding before the Hermitian solver
    let herm = Mat::from_fn(j - 1, j - 1, |r, s| {
        (reduced[(r, s)] + reduced[(s, r)].conj()) * 0.5
    });
    Ok(linalg::hermitian_eigenvalues(herm.as_ref())?[0])
}

/// `(1/2pi) int h h^T dtheta` by the trapezoid rule.
pub fn spectral_gram(family: ProcessFamily, points: &[GridPoint], nodes: usize) -> Result<Mat<f64>> {
    for p in points {
        family.validate(p)?;
    }
    let h: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            (1..=nodes)
                .map(|t| family.h_unchecked(p, fourier_frequency(t, nodes)))
                .collect()
        })
        .collect();
    let j = points.len();
    Ok(Mat::from_fn(j, j, |r, s| {
        h[r].iter().zip(&h[s]).map(|(a, b)| a * b).sum::<f64>() / nodes as f64
    }))
}

/// `gamma_0 gamma_0^T + 2 sum_{l >= 1} gamma_l gamma_l^T`, truncated once
/// every `|gamma_l|` falls below `1e-15` of the largest `gamma_0`.
pub fn autocov_gram(family: ProcessFamily, points: &[GridPoint]) -> Result<Mat<f64>> {
    let j = points.len();
    let mut g = Mat::<f64>::zeros(j, j);
    let g0: Vec<f64> = points
        .iter()
        .map(|p| family.autocov(p, 0))
        .collect::<Result<_>>()?;
    let scale = g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for lag in 0..100_000 {
        let gl: Vec<f64> = if lag == 0 {
            g0.clone()
        } else {
            points
                .iter()
                .map(|p| family.autocov(p, lag))
                .collect::<Result<_>>()?
        };
        let w = if lag == 0 { 1.0 } else { 2.0 };
        for r in 0..j {
            for s in 0..j {
                g[(r, s)] += w * gl[r] * gl[s];
            }
        }
        if lag > 0 && gl.iter().all(|v| v.abs() < 1e-15 * scale) {
            break;
        }
    }
    Ok(g)
}

/// Closed-form AR(1) Gram matrix `D0 ((2 / (1 - a_j a_k)) - 1) D0` with
/// `D0 = diag(sigma_j^2 / (1 - a_j^2))`.
pub fn ar1_gram(points: &[GridPoint]) -> Result<Mat<f64>> {
    for p in points {
        ProcessFamily::Ar(1).validate(p)?;
    }
    let d: Vec<f64> = points
        .iter()
        .map(|p| p.sigma2() / (1.0 - p.params[0] * p.params[0]))
        .collect();
    let j = points.len();
    Ok(Mat::from_fn(j, j, |r, s| {
        let prod = points[r].params[0] * points[s].params[0];
        d[r] * (2.0 / (1.0 - prod) - 1.0) * d[s]
    }))
}

/// Condition number of the square Vandermonde matrix `(a_j^k)`, `k = 0..J-1`.
/// Infinite when singular.
pub fn vandermonde_condition(alphas: &[f64]) -> Result<f64> {
    let j = alphas.len();
    if j == 0 {
        return Err(Error::domain("no nodes"));
    }
    let v = Mat::from_fn(j, j, |r, k| alphas[r].powi(k as i32));
    let s = v
        .singular_values()
        .map_err(|e| Error::Numeric(format!("SVD failed: {e:?}")))?;
    let (max, min) = (s[0], s[j - 1]);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}
