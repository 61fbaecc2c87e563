//! Estimation of the joint spectral distribution on a fixed grid.
//!
//! The empirical transforms `S^_g(z)` and kernels `K^_g(lambda_j, z)` are
//! computed once per panel. For candidate weights `omega` the model transform
//! `S_g(z | omega)` is obtained by running the fixed-point iteration from the
//! empirical kernel, and the discrepancy `sum_z sum_g |S^ - S|^kappa` is
//! minimised over the simplex (or a product of simplices) by projected
//! gradient descent with finite-difference gradients and several starts.

pub mod diagnostics;
mod weights;

pub use weights::{bspline_weights, default_z_grid, fold_upper, narrowband_weights, GFamily, DEFAULT_SHIFT};

use rand::Rng as _;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lsd::{FixedPointSystem, Iteration, DEFAULT_THETA_NODES};
use crate::model::{product_weights, GridStructure, JointSpectralGrid, StepCdf};
use crate::rng;
use crate::spectra::{EmpiricalTransforms, WeightFunction};
use crate::synth::PanelData;
use crate::{Error, Result, C64};

/// Step rule of the simplex-constrained descent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Steepest descent along the finite-difference gradient, projected back
    /// onto the simplex, with Armijo backtracking.
    ProjectedGradient,
    /// Majorize-minimize: each step minimises a weighted least-squares model
    /// of the residuals `S^ - S` (finite-difference Jacobian) over the simplex
    /// by an inner projected-gradient solve, then backtracks on the true loss.
    GaussNewton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub method: Method,
    pub max_iters: usize,
    /// Stop once an accepted step lowers the loss by less than `tol` relative.
    pub tol: f64,
    /// First trial step of the gradient method; by default `0.5 / max |gradient|`.
    pub initial_step: Option<f64>,
    /// Random Dirichlet(1) starts in addition to the uniform start.
    pub random_starts: usize,
    pub fd_step: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            method: Method::GaussNewton,
            max_iters: 50,
            tol: 1e-6,
            initial_step: None,
            random_starts: 5,
            fd_step: 1e-5,
            armijo: 1e-4,
            max_backtracks: 30,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Candidate atoms; weights are ignored except for the structure.
    pub grid: JointSpectralGrid,
    pub gs: Vec<WeightFunction>,
    z: Vec<C64>,
    pub kappa: u32,
    pub iteration: Iteration,
    pub theta_nodes: usize,
    pub optimizer: OptimizerSettings,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(grid: JointSpectralGrid, gs: Vec<WeightFunction>) -> Self {
        Self {
            grid,
            gs,
            z: default_z_grid(),
            kappa: 1,
            iteration: Iteration::default(),
            theta_nodes: DEFAULT_THETA_NODES,
            optimizer: OptimizerSettings::default(),
            seed: 0,
        }
    }

    /// Sets the `z` points; those below the real axis are reflected.
    pub fn with_z(mut self, z: &[C64]) -> Result<Self> {
        let folded = fold_upper(z);
        if folded.is_empty() {
            return Err(Error::domain("no usable z points off the real axis"));
        }
        self.z = folded;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: u32) -> Result<Self> {
        if !matches!(kappa, 1 | 2) {
            return Err(Error::domain(format!("kappa must be 1 or 2, got {kappa}")));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn z(&self) -> &[C64] {
        &self.z
    }

    fn validate(&self) -> Result<()> {
        if self.gs.is_empty() {
            return Err(Error::domain("at least one weight function is required"));
        }
        if !matches!(self.kappa, 1 | 2) {
            return Err(Error::domain(format!("kappa must be 1 or 2, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Empirical transforms of `panel` for this configuration.
    pub fn transforms(&self, panel: &PanelData) -> Result<EmpiricalTransforms> {
        self.validate()?;
        EmpiricalTransforms::compute(panel, &self.gs, self.grid.family(), self.grid.points(), &self.z)
    }
}

/// How optimisation coordinates map to full grid weights.
#[derive(Clone, Debug, PartialEq)]
enum Parameterization {
    Full(usize),
    Product(Vec<usize>),
}

impl Parameterization {
    fn of(grid: &JointSpectralGrid) -> Self {
        match (grid.structure(), grid.factor_sizes()) {
            (GridStructure::Product, Some(sizes)) => Parameterization::Product(sizes),
            _ => Parameterization::Full(grid.len()),
        }
    }

    fn blocks(&self) -> Vec<(usize, usize)> {
        match self {
            Parameterization::Full(j) => vec![(0, *j)],
            Parameterization::Product(sizes) => {
                let mut start = 0;
                sizes
                    .iter()
                    .map(|s| {
                        let b = (start, *s);
                        start += s;
                        b
                    })
                    .collect()
            }
        }
    }

    fn dim(&self) -> usize {
        self.blocks().iter().map(|b| b.1).sum()
    }

    fn to_full(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Parameterization::Full(_) => x.to_vec(),
            Parameterization::Product(_) => {
                let factors: Vec<Vec<f64>> =
                    self.blocks().iter().map(|(s, l)| x[*s..s + l].to_vec()).collect();
                product_weights(&factors)
            }
        }
    }

    fn project(&self, x: &mut [f64]) {
        for (s, l) in self.blocks() {
            project_simplex(&mut x[s..s + l]);
        }
    }

    fn uniform(&self) -> Vec<f64> {
        self.blocks()
            .iter()
            .flat_map(|(_, l)| std::iter::repeat_n(1.0 / *l as f64, *l))
            .collect()
    }

    fn dirichlet(&self, rng: &mut rng::Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for (_, l) in self.blocks() {
            let draws: Vec<f64> = (0..l).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = draws.iter().sum();
            out.extend(draws.iter().map(|d| d / total));
        }
        out
    }

    fn is_trivial(&self) -> bool {
        self.blocks().iter().all(|(_, l)| *l == 1)
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let mut u: Vec<f64> = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - tau).max(0.0);
    }
}

/// Discrepancy evaluator with the per-`g` fixed-point tables cached.
pub struct Objective<'a> {
    config: &'a FitConfig,
    transforms: &'a EmpiricalTransforms,
    systems: Vec<FixedPointSystem>,
}

impl<'a> Objective<'a> {
    pub fn new(config: &'a FitConfig, transforms: &'a EmpiricalTransforms) -> Result<Self> {
        config.validate()?;
        let (ng, nz, j) = (config.gs.len(), config.z.len(), config.grid.len());
        let shape_ok = transforms.s_hat.len() == ng
            && transforms.k_hat.len() == ng
            && transforms.s_hat.iter().all(|r| r.len() == nz)
            && transforms
                .k_hat
                .iter()
                .all(|r| r.len() == nz && r.iter().all(|k| k.len() == j))
            && transforms.z == config.z;
        if !shape_ok {
            return Err(Error::domain(
                "empirical transforms do not match the weight functions, z points or grid",
            ));
        }
        let systems = config
            .gs
            .iter()
            .map(|g| FixedPointSystem::for_grid(&config.grid, g, config.theta_nodes))
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            transforms,
            systems,
        })
    }

    /// `S_g(z | omega)` for every `(g, z)`, seeded at the empirical kernel.
    pub fn model_transforms(&self, weights: &[f64]) -> Result<Vec<Vec<C64>>> {
        let nz = self.config.z.len();
        let pairs: Vec<(usize, usize)> = (0..self.systems.len())
            .flat_map(|g| (0..nz).map(move |z| (g, z)))
            .collect();
        let values: Vec<C64> = pairs
            .par_iter()
            .map(|&(g, zi)| {
                let sol = self.systems[g].solve(
                    weights,
                    self.config.z[zi],
                    self.transforms.aspect,
                    Some(&self.transforms.k_hat[g][zi]),
                    self.config.iteration,
                )?;
                Ok(sol.s_value)
            })
            .collect::<Result<_>>()?;
        Ok(values.chunks(nz).map(<[C64]>::to_vec).collect())
    }

    /// Residuals `S^_g(z) - S_g(z | omega)`, flattened `g`-major.
    pub fn residuals(&self, weights: &[f64]) -> Result<Vec<C64>> {
        let model = self.model_transforms(weights)?;
        Ok(self
            .transforms
            .s_hat
            .iter()
            .zip(&model)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y))
            .collect())
    }

    fn loss_of(&self, residuals: &[C64], weights: &[f64]) -> Result<f64> {
        let total: f64 = residuals
            .iter()
            .map(|r| {
                if self.config.kappa == 1 {
                    r.norm()
                } else {
                    r.norm_sqr()
                }
            })
            .sum();
        if !total.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite discrepancy at omega = {weights:?}"
            )));
        }
        Ok(total)
    }

    /// `sum_z sum_g |S^_g(z) - S_g(z | omega)|^kappa` for full weights.
    pub fn value(&self, weights: &[f64]) -> Result<f64> {
        self.loss_of(&self.residuals(weights)?, weights)
    }

    /// `max_{g,z} |S^_g(z) - S_g(z | omega)|`.
    pub fn max_abs_error(&self, weights: &[f64]) -> Result<f64> {
        let model = self.model_transforms(weights)?;
        Ok(self
            .transforms
            .s_hat
            .iter()
            .zip(&model)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max))
    }
}

/// Discrepancy at full weights `omega`.
pub fn discrepancy(config: &FitConfig, transforms: &EmpiricalTransforms, omega: &[f64]) -> Result<f64> {
    crate::model::check_simplex(omega, "omega")
        .map_err(|_| Error::domain("omega must lie on the simplex"))?;
    Objective::new(config, transforms)?.value(omega)
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Candidate grid carrying the estimated weights.
    pub grid: JointSpectralGrid,
    /// Full weights, one per grid point.
    pub omega_hat: Vec<f64>,
    /// Per-factor weights in product mode.
    pub factor_weights: Option<Vec<Vec<f64>>>,
    /// Objective after each accepted iterate of the best start.
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
    /// Final loss of every start (uniform first).
    pub start_losses: Vec<f64>,
    pub transforms: EmpiricalTransforms,
}

struct Run {
    x: Vec<f64>,
    trace: Vec<f64>,
}

fn descend(
    objective: &Objective<'_>,
    param: &Parameterization,
    settings: &OptimizerSettings,
    start: Vec<f64>,
) -> Result<Run> {
    match settings.method {
        Method::ProjectedGradient => descend_gradient(objective, param, settings, start),
        Method::GaussNewton => descend_gauss_newton(objective, param, settings, start),
    }
}

/// Central differences where `x_i - h` stays feasible, forward otherwise.
/// Calls `eval` at `x + h e_i` and, when central, `x - h e_i`.
fn fd_directions(x: &[f64], h: f64) -> Vec<(Vec<f64>, Option<Vec<f64>>)> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            up[i] += h;
            let down = (x[i] >= h).then(|| {
                let mut d = x.to_vec();
                d[i] -= h;
                d
            });
            (up, down)
        })
        .collect()
}

fn descend_gradient(
    objective: &Objective<'_>,
    param: &Parameterization,
    settings: &OptimizerSettings,
    start: Vec<f64>,
) -> Result<Run> {
    let f = |x: &[f64]| objective.value(&param.to_full(x));
    let mut x = start;
    param.project(&mut x);
    let mut fx = f(&x)?;
    let mut trace = vec![fx];
    let mut step = settings.initial_step;
    let h = settings.fd_step;
    for _ in 0..settings.max_iters {
        let grad = fd_directions(&x, h)
            .into_iter()
            .map(|(up, down)| {
                let f_up = f(&up)?;
                Ok(match down {
                    Some(d) => (f_up - f(&d)?) / (2.0 * h),
                    None => (f_up - fx) / h,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax == 0.0 || !gmax.is_finite() {
            break;
        }
        let mut t = step.unwrap_or(0.5 / gmax);
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let mut y: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - t * gi).collect();
            param.project(&mut y);
            let moved = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if moved < 1e-12 {
                break;
            }
            let fy = f(&y)?;
            let decrease: f64 = grad
                .iter()
                .zip(x.iter().zip(&y))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            if fy <= fx - settings.armijo * decrease {
                accepted = Some((y, fy));
                break;
            }
            t *= 0.5;
        }
        let Some((y, fy)) = accepted else { break };
        let rel = (fx - fy) / fx.abs().max(f64::MIN_POSITIVE);
        x = y;
        fx = fy;
        trace.push(fx);
        step = Some(2.0 * t);
        if rel < settings.tol {
            break;
        }
    }
    Ok(Run { x, trace })
}

/// Minimises `(y - x)^T H (y - x) + 2 b^T (y - x)` over the feasible set by
/// accelerated projected gradient.
fn simplex_qp(param: &Parameterization, h: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    // Gershgorin bound on the largest eigenvalue of H
    let lmax = h
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if lmax == 0.0 {
        return x.to_vec();
    }
    let step = 1.0 / (2.0 * lmax);
    let grad = |y: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| 2.0 * ((0..d).map(|j| h[i][j] * (y[j] - x[j])).sum::<f64>() + b[i]))
            .collect()
    };
    let mut y = x.to_vec();
    let mut v = y.clone();
    let mut t = 1.0f64;
    for _ in 0..5000 {
        let g = grad(&v);
        let mut next: Vec<f64> = v.iter().zip(&g).map(|(vi, gi)| vi - step * gi).collect();
        param.project(&mut next);
        let change = next.iter().zip(&y).fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        v = next
            .iter()
            .zip(&y)
            .map(|(a, c)| a + (t - 1.0) / t_next * (a - c))
            .collect();
        y = next;
        t = t_next;
        if change < 1e-13 {
            break;
        }
    }
    y
}

fn descend_gauss_newton(
    objective: &Objective<'_>,
    param: &Parameterization,
    settings: &OptimizerSettings,
    start: Vec<f64>,
) -> Result<Run> {
    let residuals = |x: &[f64]| objective.residuals(&param.to_full(x));
    let h = settings.fd_step;
    let mut x = start;
    param.project(&mut x);
    let mut r = residuals(&x)?;
    let mut fx = objective.loss_of(&r, &x)?;
    let mut trace = vec![fx];
    let d = x.len();
    for _ in 0..settings.max_iters {
        // columns of the Jacobian of the residual vector
        let jac: Vec<Vec<C64>> = fd_directions(&x, h)
            .into_iter()
            .map(|(up, down)| {
                let r_up = residuals(&up)?;
                Ok(match down {
                    Some(dn) => {
                        let r_dn = residuals(&dn)?;
                        r_up.iter().zip(&r_dn).map(|(a, b)| (a - b) / (2.0 * h)).collect()
                    }
                    None => r_up.iter().zip(&r).map(|(a, b)| (a - b) / h).collect(),
                })
            })
            .collect::<Result<_>>()?;
        // |r| <= (|r_lin|^2 / |r| + |r|) / 2 majorizes the L1 loss
        let w: Vec<f64> = match objective.config.kappa {
            1 => {
                let floor = 1e-10 * fx.max(f64::MIN_POSITIVE) / r.len() as f64;
                r.iter().map(|ri| 0.5 / ri.norm().max(floor)).collect()
            }
            _ => vec![1.0; r.len()],
        };
        let mut hess = vec![vec![0.0; d]; d];
        let mut b = vec![0.0; d];
        for a in 0..d {
            for c in a..d {
                let v: f64 = (0..r.len())
                    .map(|i| w[i] * (jac[a][i].conj() * jac[c][i]).re)
                    .sum();
                hess[a][c] = v;
                hess[c][a] = v;
            }
            b[a] = (0..r.len()).map(|i| w[i] * (jac[a][i].conj() * r[i]).re).sum();
        }
        let damping = 1e-8 * (0..d).map(|i| hess[i][i]).sum::<f64>() / d as f64;
        for (i, row) in hess.iter_mut().enumerate() {
            row[i] += damping;
        }
        let target = simplex_qp(param, &hess, &b, &x);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let mut y: Vec<f64> = x.iter().zip(&target).map(|(a, c)| a + t * (c - a)).collect();
            param.project(&mut y);
            let moved = x.iter().zip(&y).fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
            if moved < 1e-12 {
                break;
            }
            let ry = residuals(&y)?;
            let fy = objective.loss_of(&ry, &y)?;
            if fy < fx {
                accepted = Some((y, ry, fy));
                break;
            }
            t *= 0.5;
        }
        let Some((y, ry, fy)) = accepted else { break };
        let rel = (fx - fy) / fx.abs().max(f64::MIN_POSITIVE);
        x = y;
        r = ry;
        fx = fy;
        trace.push(fx);
        if rel < settings.tol {
            break;
        }
    }
    Ok(Run { x, trace })
}

/// Minimises the discrepancy over the simplex (per factor in product mode).
pub fn optimize(config: &FitConfig, transforms: &EmpiricalTransforms) -> Result<FitResult> {
    let objective = Objective::new(config, transforms)?;
    let param = Parameterization::of(&config.grid);
    let mut starts = vec![param.uniform()];
    if !param.is_trivial() {
        for s in 0..config.optimizer.random_starts {
            starts.push(param.dirichlet(&mut rng::stream(config.seed, s as u64)));
        }
    }
    let runs: Vec<Run> = if param.is_trivial() {
        let x = param.uniform();
        let fx = objective.value(&param.to_full(&x))?;
        vec![Run { x, trace: vec![fx] }]
    } else {
        starts
            .into_par_iter()
            .map(|s| descend(&objective, &param, &config.optimizer, s))
            .collect::<Result<_>>()?
    };
    let start_losses: Vec<f64> = runs.iter().map(|r| *r.trace.last().unwrap()).collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| start_losses[a].total_cmp(&start_losses[b]).then(a.cmp(&b)))
        .expect("at least one start");
    let Run { mut x, trace } = runs.into_iter().nth(best).unwrap();
    for (s, l) in param.blocks() {
        let block = &mut x[s..s + l];
        for v in block.iter_mut() {
            if *v < 1e-12 {
                *v = 0.0;
            }
        }
        let total: f64 = block.iter().sum();
        block.iter_mut().for_each(|v| *v /= total);
    }
    let (grid, factor_weights) = match &param {
        Parameterization::Full(_) => (config.grid.with_weights(x.clone())?, None),
        Parameterization::Product(_) => {
            let factors: Vec<Vec<f64>> = param
                .blocks()
                .iter()
                .map(|(s, l)| x[*s..s + l].to_vec())
                .collect();
            (config.grid.with_factor_weights(factors.clone())?, Some(factors))
        }
    };
    Ok(FitResult {
        omega_hat: grid.weights().to_vec(),
        grid,
        factor_weights,
        final_loss: *trace.last().unwrap(),
        loss_trace: trace,
        start_losses,
        transforms: transforms.clone(),
    })
}

/// Computes the transforms of `panel` and fits.
pub fn fit_panel(panel: &PanelData, config: &FitConfig) -> Result<FitResult> {
    let transforms = config.transforms(panel)?;
    optimize(config, &transforms)
}

/// `sqrt(int (F - F^)^2 dx)` for two step CDFs, integrated exactly.
pub fn d_l2(f: &StepCdf, f_hat: &StepCdf) -> f64 {
    let mut xs: Vec<f64> = f.atoms().iter().chain(f_hat.atoms()).map(|a| a.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let (mut a, mut b) = (0.0, 0.0);
    let (mut ia, mut ib) = (0, 0);
    let mut total = 0.0;
    for w in xs.windows(2) {
        while ia < f.atoms().len() && f.atoms()[ia].0 <= w[0] {
            a += f.atoms()[ia].1;
            ia += 1;
        }
        while ib < f_hat.atoms().len() && f_hat.atoms()[ib].0 <= w[0] {
            b += f_hat.atoms()[ib].1;
            ib += 1;
        }
        total += (a - b) * (a - b) * (w[1] - w[0]);
    }
    total.sqrt()
}
