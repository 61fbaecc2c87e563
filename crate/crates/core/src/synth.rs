//! Synthetic panels from the simultaneously diagonalizable model.
//!
//! Coordinates of the latent (eigenbasis) process are independent scalar
//! processes, one per assigned grid point. The observed panel is `U x` for an
//! orthogonal `U` (identity or Haar).

use std::f64::consts::PI;

use faer::{c64, Mat};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{GridPoint, JointSpectralGrid, ProcessFamily};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Stream reserved for the rotation; coordinate `k` uses stream `k + 1`.
const BASIS_STREAM: u64 = 0;

pub const DEFAULT_BURN_IN: usize = 1000;

/// A `p x n` panel, one row per series.
#[derive(Clone, Debug, PartialEq)]
pub enum PanelData {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl PanelData {
    pub fn p(&self) -> usize {
        match self {
            PanelData::Real(m) => m.nrows(),
            PanelData::Complex(m) => m.nrows(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            PanelData::Real(m) => m.ncols(),
            PanelData::Complex(m) => m.ncols(),
        }
    }

    /// Aspect ratio `c = p / n`.
    pub fn aspect(&self) -> f64 {
        self.p() as f64 / self.n() as f64
    }

    pub fn to_complex(&self) -> Mat<c64> {
        match self {
            PanelData::Real(m) => crate::linalg::to_complex(m.as_ref()),
            PanelData::Complex(m) => m.clone(),
        }
    }

    pub fn as_real(&self) -> Option<&Mat<f64>> {
        match self {
            PanelData::Real(m) => Some(m),
            PanelData::Complex(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Identity,
    RandomOrthogonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub grid: JointSpectralGrid,
    pub p: usize,
    pub n: usize,
    pub basis: Basis,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl SimSpec {
    pub fn family(&self) -> ProcessFamily {
        self.grid.family()
    }

    fn check(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::domain(format!(
                "panel dimensions must be positive, got p={} n={}",
                self.p, self.n
            )));
        }
        Ok(())
    }
}

/// Number of coordinates given to each grid point: `floor(p w_j)` plus one
/// for the largest fractional remainders (ties to the lower index).
pub fn assign_counts(weights: &[f64], p: usize) -> Vec<usize> {
    let scaled: Vec<f64> = weights.iter().map(|w| w * p as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().take(p.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// Grid index of each of the `p` coordinates, in grid order.
pub fn assign_points(grid: &JointSpectralGrid, p: usize) -> Vec<usize> {
    assign_counts(grid.weights(), p)
        .into_iter()
        .enumerate()
        .flat_map(|(j, c)| std::iter::repeat_n(j, c))
        .collect()
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// diagonal of `R` made positive).
pub fn random_orthogonal(p: usize, seed: u64) -> Mat<f64> {
    random_orthogonal_with(p, &mut rng::stream(seed, BASIS_STREAM))
}

pub(crate) fn random_orthogonal_with(p: usize, rng: &mut Rng) -> Mat<f64> {
    let mut gauss = Mat::<f64>::zeros(p, p);
    for j in 0..p {
        for i in 0..p {
            gauss[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let qr = gauss.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// One path of length `n` of the scalar process at `point`.
pub fn simulate_scalar(
    family: ProcessFamily,
    point: &GridPoint,
    n: usize,
    burn_in: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    family.validate(point)?;
    let (ar, ma): (&[f64], &[f64]) = match family {
        ProcessFamily::Iid => (&[], &[]),
        ProcessFamily::Ma(_) => (&[], &point.params),
        ProcessFamily::Ar(_) => (&point.params, &[]),
        ProcessFamily::Arma11 => (&point.params[..1], &point.params[1..]),
    };
    let burn = if ar.is_empty() { 0 } else { burn_in };
    let q = ma.len();
    let total = n + burn;
    let z: Vec<f64> = (0..total + q).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = vec![0.0; total];
    for t in 0..total {
        // innovation z[t + q] is the current one; z[t + q - k] lags k
        let mut v = z[t + q];
        for (k, b) in ma.iter().enumerate() {
            v += b * z[t + q - k - 1];
        }
        v *= point.sigma;
        for (k, a) in ar.iter().enumerate() {
            if t > k {
                v += a * x[t - k - 1];
            }
        }
        x[t] = v;
    }
    x.drain(..burn);
    Ok(x)
}

fn rotate<T>(basis: Basis, latent: Mat<T>, p: usize, seed: u64) -> Mat<T>
where
    T: faer::traits::ComplexField + From<f64> + Copy,
{
    match basis {
        Basis::Identity => latent,
        Basis::RandomOrthogonal => {
            let u = random_orthogonal(p, seed);
            let u = Mat::<T>::from_fn(p, p, |i, j| T::from(u[(i, j)]));
            &u * &latent
        }
    }
}

/// Time-domain simulation of `X_t = sum_l A_l Z_{t-l}` with Gaussian innovations.
pub fn simulate_time_domain(spec: &SimSpec) -> Result<PanelData> {
    spec.check()?;
    let family = spec.family();
    let points = spec.grid.points();
    let assignment = assign_points(&spec.grid, spec.p);
    let rows: Vec<Vec<f64>> = assignment
        .par_iter()
        .enumerate()
        .map(|(k, &j)| {
            let mut rng = rng::stream(spec.seed, k as u64 + 1);
            simulate_scalar(family, &points[j], spec.n, spec.burn_in, &mut rng)
        })
        .collect::<Result<_>>()?;
    let latent = Mat::from_fn(spec.p, spec.n, |i, t| rows[i][t]);
    Ok(PanelData::Real(rotate(spec.basis, latent, spec.p, spec.seed)))
}

/// Frequency-domain (circulant) sampler: column `t` is `diag(psi(lambda_k,
/// theta_t)) zeta_t` with `zeta_t` standard complex Gaussian (real and
/// imaginary parts of variance 1/2), `theta_t = 2 pi t / n`, `t = 1..n`.
pub fn simulate_circulant(spec: &SimSpec) -> Result<PanelData> {
    spec.check()?;
    let family = spec.family();
    let points = spec.grid.points();
    for p in points {
        family.validate(p)?;
    }
    let assignment = assign_points(&spec.grid, spec.p);
    let n = spec.n;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let rows: Vec<Vec<c64>> = assignment
        .par_iter()
        .enumerate()
        .map(|(k, &j)| {
            let mut rng = rng::stream(spec.seed, k as u64 + 1);
            (1..=n)
                .map(|t| {
                    let theta = 2.0 * PI * t as f64 / n as f64;
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    family.psi_unchecked(&points[j], theta) * c64::new(re * scale, im * scale)
                })
                .collect()
        })
        .collect();
    let latent = Mat::from_fn(spec.p, n, |i, t| rows[i][t]);
    Ok(PanelData::Complex(rotate(spec.basis, latent, spec.p, spec.seed)))
}
