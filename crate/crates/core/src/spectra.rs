//! DFT panels, weighted integrated periodograms and their resolvent traces.
//!
//! With `Y = X~ diag(sqrt(g(theta_t) / n))` the integrated periodogram is
//! `S_g = Y Y*` and the dual matrix is `Y* Y`. One Hermitian eigensolve per
//! `(panel, g)` yields a [`DualSpectrum`], from which the empirical Stieltjes
//! transform and kernel are cheap to evaluate at any `z` and grid point.
//!
//! The eigensolve is done on whichever of `S_g` (`p x p`) and the dual
//! (`n x n`) is smaller. When `p < n` the dual eigenvectors of the nonzero
//! modes are recovered as `Y* u_k / sqrt(mu_k)`, and the null space enters
//! the kernel only through the per-frequency null weight `1 - sum_k |v_tk|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{c64, Mat, MatRef};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::{GridPoint, ProcessFamily};
use crate::synth::PanelData;
use crate::{Error, Result, C64};

/// Relative threshold below which eigenvalues of `S_g` count as zero.
const ZERO_EIG_REL: f64 = 1e-12;

/// Fourier frequency `theta_t = 2 pi t / n` for `t = 1..=n`.
pub fn fourier_frequency(t: usize, n: usize) -> f64 {
    2.0 * PI * t as f64 / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Constant {
        value: f64,
    },
    /// Basis function `index` of a B-spline basis of `degree` on `knots`.
    Bspline {
        knots: Vec<f64>,
        degree: usize,
        index: usize,
    },
    /// Periodic triangle `max(0, 1 - d(theta, center) / delta)`.
    Bump {
        center: f64,
        delta: f64,
    },
}

/// Nonnegative Lipschitz weight `g` on `[0, 2 pi]`: a base shape plus a constant shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub kind: WeightKind,
    pub shift: f64,
    pub lipschitz_bound: f64,
}

impl WeightFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::domain(format!(
                "constant weight must be >= 0, got {value}"
            )));
        }
        Ok(Self {
            kind: WeightKind::Constant { value },
            shift: 0.0,
            lipschitz_bound: 0.0,
        })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let base = match &self.kind {
            WeightKind::Constant { value } => *value,
            WeightKind::Bspline { knots, degree, index } => bspline_basis(knots, *degree, *index, theta),
            WeightKind::Bump { center, delta } => {
                let d = (theta - center).rem_euclid(2.0 * PI);
                let d = d.min(2.0 * PI - d);
                (1.0 - d / delta).max(0.0)
            }
        };
        base + self.shift
    }

    /// `g(theta_t)` at the `n` Fourier frequencies.
    pub fn at_frequencies(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|t| self.eval(fourier_frequency(t, n))).collect()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, WeightKind::Constant { value } if value == 0.0) && self.shift == 0.0
    }

    pub fn label(&self) -> String {
        match &self.kind {
            WeightKind::Constant { value } => format!("const({})", value + self.shift),
            WeightKind::Bspline { index, .. } => format!("bspline{index}"),
            WeightKind::Bump { center, .. } => format!("bump@{center:.4}"),
        }
    }
}

/// Cox-de Boor evaluation of basis function `i`; the right end point belongs
/// to the last non-degenerate span.
pub(crate) fn bspline_basis(knots: &[f64], degree: usize, i: usize, x: f64) -> f64 {
    let last = knots.len() - 1;
    let (lo, hi) = (knots[0], knots[last]);
    if x < lo || x > hi {
        return 0.0;
    }
    // span index s with knots[s] <= x < knots[s + 1]
    let s = if x >= hi {
        (0..last).rev().find(|&s| knots[s] < knots[s + 1]).unwrap_or(0)
    } else {
        (0..last).rev().find(|&s| knots[s] <= x).unwrap_or(0)
    };
    let mut b: Vec<f64> = (0..last).map(|j| f64::from(u8::from(j == s))).collect();
    for d in 1..=degree {
        for j in 0..last - d {
            let left = knots[j + d] - knots[j];
            let right = knots[j + d + 1] - knots[j + 1];
            let mut v = 0.0;
            if left > 0.0 {
                v += (x - knots[j]) / left * b[j];
            }
            if right > 0.0 {
                v += (knots[j + d + 1] - x) / right * b[j + 1];
            }
            b[j] = v;
        }
    }
    b[i]
}

/// Unitary DFT of each row: `X~_{j,t} = n^{-1/2} sum_{s=1}^n X_{j,s} e^{-i s theta_t}`.
pub fn dft_rows(panel: &PanelData) -> Mat<c64> {
    let (p, n) = (panel.p(), panel.n());
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let x = panel.to_complex();
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = Mat::<c64>::zeros(p, n);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for j in 0..p {
        for s in 0..n {
            buf[s] = x[(j, s)];
        }
        fft.process(&mut buf);
        // samples are indexed from 1, so shift by e^{-i theta_t}
        for t in 1..=n {
            let phase = C64::from_polar(scale, -fourier_frequency(t, n));
            out[(j, t - 1)] = buf[t % n] * phase;
        }
    }
    out
}

/// `Y = X~ diag(sqrt(g_t / n))`.
fn weighted_dft(xt: MatRef<'_, c64>, g_vals: &[f64]) -> Mat<c64> {
    let n = xt.ncols();
    let w: Vec<f64> = g_vals.iter().map(|g| (g / n as f64).sqrt()).collect();
    Mat::from_fn(xt.nrows(), n, |j, t| xt[(j, t)] * w[t])
}

/// `S_g = (1/n) X~ W_g^2 X~*`.
pub fn integrated_periodogram(panel: &PanelData, g: &WeightFunction) -> Mat<c64> {
    let xt = dft_rows(panel);
    let y = weighted_dft(xt.as_ref(), &g.at_frequencies(panel.n()));
    &y * y.adjoint()
}

/// Eigenvalues (ascending) of the `n x n` dual matrix `(1/n) W_g X~* X~ W_g`.
pub fn dual_eigenvalues(panel: &PanelData, g: &WeightFunction) -> Result<Vec<f64>> {
    let xt = dft_rows(panel);
    let y = weighted_dft(xt.as_ref(), &g.at_frequencies(panel.n()));
    let dual = y.adjoint() * &y;
    linalg::hermitian_eigenvalues(dual.as_ref())
}

fn require_upper(z: C64) -> Result<()> {
    if !(z.im > 0.0) {
        return Err(Error::domain(format!(
            "z must have positive imaginary part, got {z}"
        )));
    }
    Ok(())
}

/// `(1/n) sum_j 1 / (xi_j - z)` over the given eigenvalues.
pub fn empirical_stieltjes(eigenvalues: &[f64], z: C64) -> Result<C64> {
    require_upper(z)?;
    if eigenvalues.is_empty() {
        return Err(Error::domain("no eigenvalues"));
    }
    let sum: C64 = eigenvalues.iter().map(|x| 1.0 / (*x - z)).sum();
    Ok(sum / eigenvalues.len() as f64)
}

/// Spectral data of the dual matrix for one `(panel, g)`.
///
/// Nonzero modes `mu_k` carry per-frequency weights `|v_tk|^2`; the remaining
/// `n - r` eigenvalues are zero and their eigenvectors contribute
/// `null_weight[t]` at frequency `t`.
#[derive(Clone, Debug)]
pub struct DualSpectrum {
    n: usize,
    modes: Vec<f64>,
    /// `n x r`, entry `(t, k)` is `|v_tk|^2`.
    mode_weights: Mat<f64>,
    null_weight: Vec<f64>,
    g_vals: Arc<Vec<f64>>,
}

impl DualSpectrum {
    pub fn new(panel: &PanelData, g: &WeightFunction) -> Result<Self> {
        Self::from_dft(dft_rows(panel).as_ref(), g)
    }

    /// Builds from an already transformed panel (shared across weight functions).
    pub fn from_dft(xt: MatRef<'_, c64>, g: &WeightFunction) -> Result<Self> {
        let (p, n) = (xt.nrows(), xt.ncols());
        let g_vals = g.at_frequencies(n);
        let y = weighted_dft(xt, &g_vals);
        let (modes, mode_weights) = if p < n {
            let s = &y * y.adjoint();
            let (mu, u) = linalg::hermitian_eigen(s.as_ref())?;
            let mu_max = mu.last().copied().unwrap_or(0.0).max(0.0);
            let thr = ZERO_EIG_REL * mu_max * p.max(n) as f64;
            let keep: Vec<usize> = (0..p).filter(|&k| mu[k] > thr && mu[k] > 0.0).collect();
            let v = y.adjoint() * &u;
            let weights = Mat::from_fn(n, keep.len(), |t, k| {
                let kk = keep[k];
                v[(t, kk)].norm_sqr() / mu[kk]
            });
            (keep.iter().map(|&k| mu[k]).collect::<Vec<_>>(), weights)
        } else {
            let dual = y.adjoint() * &y;
            let (xi, q) = linalg::hermitian_eigen(dual.as_ref())?;
            let weights = Mat::from_fn(n, n, |t, k| q[(t, k)].norm_sqr());
            (xi.into_iter().map(|x| x.max(0.0)).collect(), weights)
        };
        let null_weight = (0..n)
            .map(|t| {
                let used: f64 = (0..modes.len()).map(|k| mode_weights[(t, k)]).sum();
                (1.0 - used).max(0.0)
            })
            .collect();
        Ok(Self {
            n,
            modes,
            mode_weights,
            null_weight,
            g_vals: Arc::new(g_vals),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `g(theta_t)` at the Fourier frequencies.
    pub fn g_values(&self) -> &[f64] {
        &self.g_vals
    }

    /// All `n` dual eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n - self.modes.len()];
        out.extend_from_slice(&self.modes);
        out.sort_by(f64::total_cmp);
        out
    }

    fn zero_count(&self) -> usize {
        self.n - self.modes.len()
    }

    /// Empirical Stieltjes transform. `z` must not be a dual eigenvalue.
    pub(crate) fn stieltjes_any(&self, z: C64) -> C64 {
        let mut sum: C64 = self.modes.iter().map(|m| 1.0 / (*m - z)).sum();
        if self.zero_count() > 0 {
            sum += self.zero_count() as f64 / -z;
        }
        sum / self.n as f64
    }

    pub fn stieltjes(&self, z: C64) -> Result<C64> {
        require_upper(z)?;
        Ok(self.stieltjes_any(z))
    }

    /// Projection of a diagonal `D = diag(d_t)` onto the dual eigenbasis:
    /// `(sum_t |v_tk|^2 d_t)_k` and the null-space total `sum_t w0_t d_t`.
    pub fn kernel_coefficients(&self, d: &[f64]) -> KernelCoefficients {
        let per_mode = (0..self.modes.len())
            .map(|k| (0..self.n).map(|t| self.mode_weights[(t, k)] * d[t]).sum())
            .collect();
        let null = self.null_weight.iter().zip(d).map(|(w, x)| w * x).sum();
        KernelCoefficients { per_mode, null }
    }

    pub(crate) fn kernel_any(&self, coeffs: &KernelCoefficients, z: C64) -> C64 {
        let mut sum: C64 = self
            .modes
            .iter()
            .zip(&coeffs.per_mode)
            .map(|(m, q)| *q / (*m - z))
            .sum();
        if coeffs.null != 0.0 {
            sum += coeffs.null / -z;
        }
        sum / self.n as f64
    }

    pub fn kernel(&self, coeffs: &KernelCoefficients, z: C64) -> Result<C64> {
        require_upper(z)?;
        Ok(self.kernel_any(coeffs, z))
    }

    /// `d_t = g(theta_t) h(lambda, theta_t)` for a grid point.
    pub fn kernel_diagonal(&self, family: ProcessFamily, point: &GridPoint) -> Result<Vec<f64>> {
        family.validate(point)?;
        Ok(self
            .g_vals
            .iter()
            .enumerate()
            .map(|(t, g)| g * family.h_unchecked(point, fourier_frequency(t + 1, self.n)))
            .collect())
    }

    /// Empirical Stieltjes kernel `K^(lambda, z)`.
    pub fn stieltjes_kernel(&self, family: ProcessFamily, point: &GridPoint, z: C64) -> Result<C64> {
        let d = self.kernel_diagonal(family, point)?;
        self.kernel(&self.kernel_coefficients(&d), z)
    }
}

/// Output of [`DualSpectrum::kernel_coefficients`].
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCoefficients {
    pub per_mode: Vec<f64>,
    pub null: f64,
}

/// Empirical Stieltjes kernel for one grid point.
pub fn stieltjes_kernel(
    panel: &PanelData,
    g: &WeightFunction,
    family: ProcessFamily,
    point: &GridPoint,
    z: C64,
) -> Result<C64> {
    require_upper(z)?;
    DualSpectrum::new(panel, g)?.stieltjes_kernel(family, point, z)
}

/// `(1/2n) sum_{t=1}^{n-tau} (Y_t Y_{t+tau}* + Y_{t+tau} Y_t*)`.
pub fn symmetrized_autocov(panel: &PanelData, tau: usize) -> Result<Mat<c64>> {
    let (p, n) = (panel.p(), panel.n());
    if tau >= n {
        return Err(Error::domain(format!("lag {tau} must be below n = {n}")));
    }
    let x = panel.to_complex();
    let lead = x.as_ref().subcols(0, n - tau);
    let lagged = x.as_ref().subcols(tau, n - tau);
    let c = lead * lagged.adjoint();
    let scale = 1.0 / (2.0 * n as f64);
    Ok(Mat::from_fn(p, p, |i, j| (c[(i, j)] + c[(j, i)].conj()) * scale))
}

/// Tables of empirical transforms over weight functions, `z` points and grid points.
#[derive(Clone, Debug)]
pub struct EmpiricalTransforms {
    /// `s_hat[g][z]`.
    pub s_hat: Vec<Vec<C64>>,
    /// `k_hat[g][z][j]`.
    pub k_hat: Vec<Vec<Vec<C64>>>,
    /// Dual eigenvalues per weight function, ascending.
    pub eigenvalues: Vec<Vec<f64>>,
    pub z: Vec<C64>,
    /// Aspect ratio `p / n` of the panel.
    pub aspect: f64,
}

impl EmpiricalTransforms {
    /// Computes all tables for `points` (of `family`) at the `z` values.
    pub fn compute(
        panel: &PanelData,
        gs: &[WeightFunction],
        family: ProcessFamily,
        points: &[GridPoint],
        z: &[C64],
    ) -> Result<Self> {
        for zz in z {
            require_upper(*zz)?;
        }
        let xt = dft_rows(panel);
        let mut s_hat = Vec::with_capacity(gs.len());
        let mut k_hat = Vec::with_capacity(gs.len());
        let mut eigenvalues = Vec::with_capacity(gs.len());
        for g in gs {
            let spec = DualSpectrum::from_dft(xt.as_ref(), g)?;
            let coeffs: Vec<KernelCoefficients> = points
                .iter()
                .map(|pt| Ok(spec.kernel_coefficients(&spec.kernel_diagonal(family, pt)?)))
                .collect::<Result<_>>()?;
            s_hat.push(z.iter().map(|zz| spec.stieltjes_any(*zz)).collect());
            k_hat.push(
                z.iter()
                    .map(|zz| coeffs.iter().map(|c| spec.kernel_any(c, *zz)).collect())
                    .collect(),
            );
            eigenvalues.push(spec.eigenvalues());
        }
        Ok(Self {
            s_hat,
            k_hat,
            eigenvalues,
            z: z.to_vec(),
            aspect: panel.aspect(),
        })
    }
}
