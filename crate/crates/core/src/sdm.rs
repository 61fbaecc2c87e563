//! Simultaneously diagonalizable spectral-density-matrix estimate.
//!
//! Given fitted weights on a grid, the estimate is
//! `H(theta) = U diag(h(lambda_(j), theta) I_{p_(j)}) U*`, where `U` holds the
//! eigenvectors of `S_{g0}` in decreasing eigenvalue order, atoms are ordered
//! by decreasing `m_j = (1/2pi) int g0 h(lambda_j)`, and `p_(j)` are the
//! rounded multiplicities `p omega_j`. The `j`-th ordered atom is paired with
//! the `j`-th block of eigenvectors.

use faer::{c64, Mat};

use crate::linalg;
use crate::lsd::MIN_THETA_NODES;
use crate::model::{GridPoint, JointSpectralGrid, ProcessFamily};
use crate::spectra::{fourier_frequency, integrated_periodogram, WeightFunction};
use crate::synth::PanelData;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SdmEstimate {
    pub family: ProcessFamily,
    /// `p x p` unitary, columns in decreasing eigenvalue order of `S_{g0}`.
    pub u_hat: Mat<c64>,
    /// Atoms by nonincreasing order key, with positive multiplicities summing to `p`.
    pub ordered_atoms: Vec<(GridPoint, usize)>,
    /// Order key of each entry of `ordered_atoms`.
    pub order_keys: Vec<f64>,
    pub g0: WeightFunction,
}

/// `(1/2pi) int g0(theta) h(lambda, theta) dtheta` by the trapezoid rule.
pub fn order_key(family: ProcessFamily, point: &GridPoint, g0: &WeightFunction, nodes: usize) -> Result<f64> {
    if nodes < MIN_THETA_NODES {
        return Err(Error::domain(format!(
            "need at least {MIN_THETA_NODES} quadrature nodes, got {nodes}"
        )));
    }
    family.validate(point)?;
    let total: f64 = (1..=nodes)
        .map(|t| {
            let theta = fourier_frequency(t, nodes);
            g0.eval(theta) * family.h_unchecked(point, theta)
        })
        .sum();
    Ok(total / nodes as f64)
}

/// Eigenvectors of `S_{g0}` by decreasing eigenvalue, phases fixed so the
/// first non-negligible entry of each column is real positive.
pub fn estimate_basis(panel: &PanelData, g0: &WeightFunction) -> Result<Mat<c64>> {
    let s = integrated_periodogram(panel, g0);
    Ok(linalg::hermitian_eigen_desc(s.as_ref())?.1)
}

/// Nearest-integer rounding of `p w_j`, then corrected to total `p`: missing
/// units go to the largest remainders `p w_j - round(p w_j)`, surplus units
/// come off the smallest; ties go to the lower index.
pub fn round_multiplicities(weights: &[f64], p: usize) -> Result<Vec<usize>> {
    crate::model::check_simplex(weights, "weights")?;
    let scaled: Vec<f64> = weights.iter().map(|w| w * p as f64).collect();
    let mut counts: Vec<i64> = scaled.iter().map(|x| x.round() as i64).collect();
    let remainder = |counts: &[i64], j: usize| scaled[j] - counts[j] as f64;
    let mut diff = p as i64 - counts.iter().sum::<i64>();
    while diff != 0 {
        let candidates = (0..counts.len()).filter(|&j| diff > 0 || counts[j] > 0);
        let pick = if diff > 0 {
            candidates.fold(None, |best: Option<usize>, j| match best {
                Some(b) if remainder(&counts, b) >= remainder(&counts, j) => Some(b),
                _ => Some(j),
            })
        } else {
            candidates.fold(None, |best: Option<usize>, j| match best {
                Some(b) if remainder(&counts, b) <= remainder(&counts, j) => Some(b),
                _ => Some(j),
            })
        };
        let j = pick.expect("a simplex vector has a positive entry");
        counts[j] += diff.signum();
        diff -= diff.signum();
    }
    Ok(counts.into_iter().map(|c| c as usize).collect())
}

/// Builds the estimate from a panel and a fitted grid.
pub fn estimate(
    panel: &PanelData,
    fitted: &JointSpectralGrid,
    g0: &WeightFunction,
    nodes: usize,
) -> Result<SdmEstimate> {
    let family = fitted.family();
    let p = panel.p();
    let mult = round_multiplicities(fitted.weights(), p)?;
    let keys: Vec<f64> = fitted
        .points()
        .iter()
        .map(|pt| order_key(family, pt, g0, nodes))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..fitted.len()).filter(|&j| mult[j] > 0).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    Ok(SdmEstimate {
        family,
        u_hat: estimate_basis(panel, g0)?,
        ordered_atoms: order
            .iter()
            .map(|&j| (fitted.points()[j].clone(), mult[j]))
            .collect(),
        order_keys: order.iter().map(|&j| keys[j]).collect(),
        g0: g0.clone(),
    })
}

impl SdmEstimate {
    pub fn p(&self) -> usize {
        self.u_hat.nrows()
    }

    /// Eigenvalues of `H(theta)` in column order of `u_hat`.
    pub fn eigenvalues_at(&self, theta: f64) -> Vec<f64> {
        self.ordered_atoms
            .iter()
            .flat_map(|(pt, m)| std::iter::repeat_n(self.family.h_unchecked(pt, theta), *m))
            .collect()
    }
}

/// `H(theta) = U diag(h) U*`.
pub fn sdm_at(estimate: &SdmEstimate, theta: f64) -> Mat<c64> {
    let d = estimate.eigenvalues_at(theta);
    let u = &estimate.u_hat;
    let scaled = Mat::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * d[j]);
    scaled * u.adjoint()
}
