//! Limiting fixed-point system for a hypothesised mixture.
//!
//! For weights `omega` on grid points `lambda_j` the system is
//!
//! ```text
//! M(z, theta) = sum_j omega_j g(theta) h(lambda_j, theta) / (1 + K(lambda_j, z))
//! K(lambda, z) = (1/2pi) int g(theta) h(lambda, theta) / (c M(z, theta) - z) dtheta
//! S(z)         = (1/2pi) int 1 / (c M(z, theta) - z) dtheta
//! ```
//!
//! Integrals use the trapezoid rule on `theta_tau = 2 pi tau / T`. Since `h`
//! scales with `sigma^2`, grid points sharing the same `params` share one
//! tabulated shape `g h(params, sigma = 1)`, and `K` only needs evaluating once
//! per shape.

use serde::{Deserialize, Serialize};

use crate::model::{GridPoint, JointSpectralGrid, ProcessFamily};
use crate::spectra::{fourier_frequency, WeightFunction};
use crate::{Error, Result, C64};

pub const DEFAULT_THETA_NODES: usize = 512;
pub const DEFAULT_ITERS: usize = 4;
pub const MIN_THETA_NODES: usize = 128;

/// Guard for `|c M - z|` and `|1 + K|`.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Stopping rule for the fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Iteration {
    /// Exactly this many updates.
    Fixed(usize),
    /// Update until the sup-norm step falls below `tol`, at most `max_iters` times.
    Residual { tol: f64, max_iters: usize },
}

impl Default for Iteration {
    fn default() -> Self {
        Iteration::Fixed(DEFAULT_ITERS)
    }
}

impl Iteration {
    pub fn residual_default() -> Self {
        Iteration::Residual {
            tol: 1e-8,
            max_iters: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsdSolution {
    /// Final `K(lambda_j, z)`, one per grid point.
    pub k_values: Vec<C64>,
    /// `M(z, theta_tau)` at the quadrature nodes, from the final `K`.
    pub m_values: Vec<C64>,
    pub s_value: C64,
    pub iterations_used: usize,
    /// `||K^(i+1) - K^(i)||_inf` after each update.
    pub residuals: Vec<f64>,
    pub theta_nodes: usize,
}

impl LsdSolution {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

/// Tabulated system for fixed atoms and one weight function; weights and `z`
/// vary per call.
#[derive(Clone, Debug)]
pub struct FixedPointSystem {
    nodes: usize,
    /// `g(theta_tau) h(params_s, theta_tau)` at unit scale, per distinct shape.
    shape_gh: Vec<Vec<f64>>,
    shape_of: Vec<usize>,
    sigma2: Vec<f64>,
}

fn upper(z: C64) -> Result<()> {
    if !(z.im > 0.0) {
        return Err(Error::domain(format!(
            "z must have positive imaginary part, got {z}"
        )));
    }
    Ok(())
}

impl FixedPointSystem {
    pub fn new(
        family: ProcessFamily,
        points: &[GridPoint],
        g: &WeightFunction,
        nodes: usize,
    ) -> Result<Self> {
        if nodes < MIN_THETA_NODES {
            return Err(Error::domain(format!(
                "need at least {MIN_THETA_NODES} quadrature nodes, got {nodes}"
            )));
        }
        let g_nodes: Vec<f64> = (1..=nodes).map(|t| g.eval(fourier_frequency(t, nodes))).collect();
        let mut shapes: Vec<&[f64]> = Vec::new();
        let mut shape_gh = Vec::new();
        let mut shape_of = Vec::with_capacity(points.len());
        for p in points {
            family.validate(p)?;
            let s = match shapes.iter().position(|s| *s == p.params.as_slice()) {
                Some(s) => s,
                None => {
                    let unit = GridPoint {
                        params: p.params.clone(),
                        sigma: 1.0,
                    };
                    shape_gh.push(
                        g_nodes
                            .iter()
                            .enumerate()
                            .map(|(t, gv)| gv * family.h_unchecked(&unit, fourier_frequency(t + 1, nodes)))
                            .collect(),
                    );
                    shapes.push(&p.params);
                    shapes.len() - 1
                }
            };
            shape_of.push(s);
        }
        Ok(Self {
            nodes,
            shape_gh,
            shape_of,
            sigma2: points.iter().map(GridPoint::sigma2).collect(),
        })
    }

    pub fn for_grid(grid: &JointSpectralGrid, g: &WeightFunction, nodes: usize) -> Result<Self> {
        Self::new(grid.family(), grid.points(), g, nodes)
    }

    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    pub fn theta_nodes(&self) -> usize {
        self.nodes
    }

    fn check_lengths(&self, weights: &[f64], k: &[C64]) -> Result<()> {
        if weights.len() != self.len() || k.len() != self.len() {
            return Err(Error::domain(format!(
                "expected {} weights and kernel values, got {} and {}",
                self.len(),
                weights.len(),
                k.len()
            )));
        }
        Ok(())
    }

    /// `M(z, theta_tau)` at every node.
    pub fn m_values(&self, weights: &[f64], k: &[C64], z: C64) -> Result<Vec<C64>> {
        self.check_lengths(weights, k)?;
        let mut coef = vec![C64::new(0.0, 0.0); self.shape_gh.len()];
        for j in 0..self.len() {
            if weights[j] == 0.0 {
                continue;
            }
            let denom = 1.0 + k[j];
            if denom.norm() < SINGULAR_TOL {
                return Err(Error::Singular { what: "1 + K", z });
            }
            coef[self.shape_of[j]] += weights[j] * self.sigma2[j] / denom;
        }
        let mut m = vec![C64::new(0.0, 0.0); self.nodes];
        for (c, gh) in coef.iter().zip(&self.shape_gh) {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            for (mt, x) in m.iter_mut().zip(gh) {
                *mt += *c * *x;
            }
        }
        Ok(m)
    }

    /// `1 / (c M - z)` at every node.
    fn resolvent(&self, m: &[C64], z: C64, c: f64) -> Result<Vec<C64>> {
        m.iter()
            .map(|mt| {
                let d = c * *mt - z;
                if d.norm() < SINGULAR_TOL {
                    Err(Error::Singular { what: "c M - z", z })
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect()
    }

    fn k_from_resolvent(&self, r: &[C64]) -> Vec<C64> {
        let inv = 1.0 / self.nodes as f64;
        let shape_k: Vec<C64> = self
            .shape_gh
            .iter()
            .map(|gh| gh.iter().zip(r).map(|(x, rt)| *rt * *x).sum::<C64>() * inv)
            .collect();
        self.shape_of
            .iter()
            .zip(&self.sigma2)
            .map(|(s, s2)| shape_k[*s] * *s2)
            .collect()
    }

    /// One fixed-point update of the kernel table (any `z` off the real axis).
    pub fn k_update_extended(&self, weights: &[f64], k: &[C64], z: C64, c: f64) -> Result<Vec<C64>> {
        let m = self.m_values(weights, k, z)?;
        Ok(self.k_from_resolvent(&self.resolvent(&m, z, c)?))
    }

    pub fn k_update(&self, weights: &[f64], k: &[C64], z: C64, c: f64) -> Result<Vec<C64>> {
        upper(z)?;
        self.k_update_extended(weights, k, z, c)
    }

    fn stieltjes_from_m(&self, m: &[C64], z: C64, c: f64) -> Result<C64> {
        let r = self.resolvent(m, z, c)?;
        Ok(r.iter().sum::<C64>() / self.nodes as f64)
    }

    pub fn model_stieltjes(&self, weights: &[f64], k: &[C64], z: C64, c: f64) -> Result<C64> {
        upper(z)?;
        self.stieltjes_from_m(&self.m_values(weights, k, z)?, z, c)
    }

    /// Iterates from `init` (zeros when `None`) and evaluates `S`. Accepts any
    /// `z` with nonzero imaginary part, so the same formulas can be checked
    /// below the real axis.
    pub fn solve_extended(
        &self,
        weights: &[f64],
        z: C64,
        c: f64,
        init: Option<&[C64]>,
        iteration: Iteration,
    ) -> Result<LsdSolution> {
        if z.im == 0.0 {
            return Err(Error::domain(format!("z must be off the real axis, got {z}")));
        }
        let mut k = match init {
            Some(k) => k.to_vec(),
            None => vec![C64::new(0.0, 0.0); self.len()],
        };
        let (max_iters, tol) = match iteration {
            Iteration::Fixed(i) => (i, None),
            Iteration::Residual { tol, max_iters } => (max_iters, Some(tol)),
        };
        if max_iters == 0 {
            return Err(Error::domain("at least one fixed-point iteration is required"));
        }
        let mut residuals = Vec::with_capacity(max_iters);
        for _ in 0..max_iters {
            let next = self.k_update_extended(weights, &k, z, c)?;
            let step = next
                .iter()
                .zip(&k)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            k = next;
            residuals.push(step);
            if tol.is_some_and(|t| step < t) {
                break;
            }
        }
        if residuals
            .windows(2)
            .skip(1)
            .any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-15)
        {
            log::debug!("non-monotone fixed-point residuals at z = {z}: {residuals:?}");
        }
        let m = self.m_values(weights, &k, z)?;
        let s = self.stieltjes_from_m(&m, z, c)?;
        Ok(LsdSolution {
            k_values: k,
            m_values: m,
            s_value: s,
            iterations_used: residuals.len(),
            residuals,
            theta_nodes: self.nodes,
        })
    }

    pub fn solve(
        &self,
        weights: &[f64],
        z: C64,
        c: f64,
        init: Option<&[C64]>,
        iteration: Iteration,
    ) -> Result<LsdSolution> {
        upper(z)?;
        self.solve_extended(weights, z, c, init, iteration)
    }
}

/// `M(z, theta)` evaluated directly from the closed-form `h`.
pub fn m_from_k(
    grid: &JointSpectralGrid,
    k_values: &[C64],
    g: &WeightFunction,
    z: C64,
    theta: f64,
) -> Result<C64> {
    if k_values.len() != grid.len() {
        return Err(Error::domain("one kernel value per grid point is required"));
    }
    let gv = g.eval(theta);
    let family = grid.family();
    let mut m = C64::new(0.0, 0.0);
    for ((p, w), k) in grid.points().iter().zip(grid.weights()).zip(k_values) {
        let denom = 1.0 + k;
        if denom.norm() < SINGULAR_TOL {
            return Err(Error::Singular { what: "1 + K", z });
        }
        m += *w * gv * family.spectral_h(p, theta)? / denom;
    }
    Ok(m)
}

pub fn k_update(
    grid: &JointSpectralGrid,
    k_values: &[C64],
    g: &WeightFunction,
    z: C64,
    c: f64,
    nodes: usize,
) -> Result<Vec<C64>> {
    FixedPointSystem::for_grid(grid, g, nodes)?.k_update(grid.weights(), k_values, z, c)
}

pub fn model_stieltjes(
    grid: &JointSpectralGrid,
    k_values: &[C64],
    g: &WeightFunction,
    z: C64,
    c: f64,
    nodes: usize,
) -> Result<C64> {
    FixedPointSystem::for_grid(grid, g, nodes)?.model_stieltjes(grid.weights(), k_values, z, c)
}

pub fn solve_fixed_point(
    grid: &JointSpectralGrid,
    g: &WeightFunction,
    z: C64,
    c: f64,
    init: Option<&[C64]>,
    iteration: Iteration,
    nodes: usize,
) -> Result<LsdSolution> {
    FixedPointSystem::for_grid(grid, g, nodes)?.solve(grid.weights(), z, c, init, iteration)
}

/// `Im S(x + i eps) / pi` on a real grid, solving from zero initialisation.
pub fn density(
    grid: &JointSpectralGrid,
    g: &WeightFunction,
    c: f64,
    xs: &[f64],
    eps: f64,
    iteration: Iteration,
    nodes: usize,
) -> Result<Vec<f64>> {
    let system = FixedPointSystem::for_grid(grid, g, nodes)?;
    xs.iter()
        .map(|x| {
            let sol = system.solve(grid.weights(), C64::new(*x, eps), c, None, iteration)?;
            Ok(sol.s_value.im / std::f64::consts::PI)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid(variances: &[f64], weights: &[f64]) -> JointSpectralGrid {
        JointSpectralGrid::product(
            ProcessFamily::Iid,
            vec![variances.to_vec()],
            vec![weights.to_vec()],
        )
        .unwrap()
    }

    #[test]
    fn m_examples() {
        let one = WeightFunction::constant(1.0).unwrap();
        let z = C64::new(0.0, 1.0);
        let m = m_from_k(&iid(&[1.0], &[1.0]), &[C64::new(0.0, 0.0)], &one, z, 0.3).unwrap();
        assert!((m - C64::new(1.0, 0.0)).norm() < 1e-15);
        let zeros = [C64::new(0.0, 0.0); 2];
        let m = m_from_k(&iid(&[1.0, 2.0], &[0.5, 0.5]), &zeros, &one, z, 0.3).unwrap();
        assert!((m - C64::new(1.5, 0.0)).norm() < 1e-14);
        let err = m_from_k(&iid(&[1.0], &[1.0]), &[C64::new(-1.0, 0.0)], &one, z, 0.3);
        assert!(matches!(err, Err(Error::Singular { .. })));
    }

    #[test]
    fn zero_weight_function_gives_minus_inverse_z() {
        let zero = WeightFunction::constant(0.0).unwrap();
        let grid = iid(&[1.0], &[1.0]);
        let z = C64::new(0.7, 0.4);
        let k = k_update(&grid, &[C64::new(0.3, 0.2)], &zero, z, 1.0, 256).unwrap();
        assert_eq!(k[0], C64::new(0.0, 0.0));
        let s = model_stieltjes(&grid, &k, &zero, z, 1.0, 256).unwrap();
        assert!((s + 1.0 / z).norm() < 1e-13);
    }

    #[test]
    fn rejects_bad_inputs() {
        let one = WeightFunction::constant(1.0).unwrap();
        let grid = iid(&[1.0], &[1.0]);
        let zero = [C64::new(0.0, 0.0)];
        assert!(k_update(&grid, &zero, &one, C64::new(1.0, 0.0), 1.0, 256).is_err());
        assert!(k_update(&grid, &zero, &one, C64::new(1.0, 1.0), 1.0, 64).is_err());
        assert!(solve_fixed_point(
            &grid,
            &one,
            C64::new(1.0, 1.0),
            1.0,
            None,
            Iteration::Fixed(0),
            256
        )
        .is_err());
    }

    #[test]
    fn shapes_are_shared_across_sigma() {
        let grid = JointSpectralGrid::product(
            ProcessFamily::Ar(1),
            vec![vec![0.2, 0.5], vec![1.0, 2.0]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let one = WeightFunction::constant(1.0).unwrap();
        let sys = FixedPointSystem::for_grid(&grid, &one, 256).unwrap();
        assert_eq!(sys.shape_gh.len(), 2);
        assert_eq!(sys.shape_of, vec![0, 0, 1, 1]);
    }
}
