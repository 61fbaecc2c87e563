//! JSON configuration files, one shape per subcommand.

use anyhow::Result;
use hdls_core::fit::{FitConfig, GFamily, OptimizerSettings};
use hdls_core::lsd::{Iteration, DEFAULT_THETA_NODES};
use hdls_core::model::JointSpectralGrid;
use hdls_core::synth::DEFAULT_BURN_IN;
use hdls_core::{Mat, C64};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    /// Replace prices by log returns.
    pub log_returns: bool,
    /// Leading SVD terms removed after centering; 0 leaves the panel as is.
    pub remove_factors: usize,
}

impl Preprocess {
    pub fn apply(&self, panel: Mat<f64>) -> Result<Mat<f64>> {
        let panel = if self.log_returns {
            hdls_core::preprocess::log_returns(&panel)?
        } else {
            panel
        };
        if self.remove_factors > 0 {
            Ok(hdls_core::preprocess::remove_factors(
                &panel,
                self.remove_factors,
            )?)
        } else {
            Ok(panel)
        }
    }
}

fn to_z(points: &[[f64; 2]]) -> Vec<C64> {
    points.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

/// Settings shared by `estimate` and `select`.
#[derive(Clone, Debug, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub gfamily: GFamily,
    pub kappa: u32,
    pub iteration: Iteration,
    pub theta_nodes: usize,
    /// `[re, im]` pairs; the default grid when absent.
    pub z: Option<Vec<[f64; 2]>>,
    pub optimizer: OptimizerSettings,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            gfamily: GFamily::Bspline(8),
            kappa: 1,
            iteration: Iteration::default(),
            theta_nodes: DEFAULT_THETA_NODES,
            z: None,
            optimizer: OptimizerSettings::default(),
        }
    }
}

impl FitSettings {
    pub fn build(&self, grid: JointSpectralGrid, seed: u64) -> Result<FitConfig> {
        let mut config = FitConfig::new(grid, self.gfamily.build()?).with_kappa(self.kappa)?;
        if let Some(z) = &self.z {
            config = config.with_z(&to_z(z))?;
        }
        config.iteration = self.iteration;
        config.theta_nodes = self.theta_nodes;
        config.optimizer = self.optimizer.clone();
        config.seed = seed;
        Ok(config)
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct EstimateConfig {
    /// Candidate atoms; any weights given are ignored.
    pub grid: JointSpectralGrid,
    #[serde(default)]
    pub preprocess: Preprocess,
    #[serde(flatten)]
    pub fit: FitSettings,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityGrid {
    pub from: f64,
    pub to: f64,
    pub count: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-3
}

impl DensityGrid {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.from],
            k => (0..k)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct LsdConfig {
    /// Atoms with the weights to evaluate.
    pub grid: JointSpectralGrid,
    /// Aspect ratio `p / n`.
    pub c: f64,
    #[serde(default = "constant_family")]
    pub gfamily: GFamily,
    pub z: Option<Vec<[f64; 2]>>,
    #[serde(default = "Iteration::residual_default")]
    pub iteration: Iteration,
    #[serde(default = "default_theta_nodes")]
    pub theta_nodes: usize,
    pub density: Option<DensityGrid>,
}

impl LsdConfig {
    pub fn z_points(&self) -> Vec<C64> {
        match &self.z {
            Some(z) => to_z(z),
            None => hdls_core::fit::default_z_grid(),
        }
    }
}

fn constant_family() -> GFamily {
    GFamily::Constant
}

fn default_theta_nodes() -> usize {
    DEFAULT_THETA_NODES
}

fn default_theta_count() -> usize {
    16
}

/// Also accepts the `fit.json` written by `estimate`, whose `grid` carries
/// the fitted weights.
#[derive(Clone, Debug, Deserialize)]
pub struct SdmConfig {
    pub grid: JointSpectralGrid,
    #[serde(default)]
    pub preprocess: Preprocess,
    /// Family and index of the ordering weight function.
    #[serde(default = "constant_family")]
    pub g0_family: GFamily,
    #[serde(default)]
    pub g0_index: usize,
    /// Frequencies at which to write the estimate; `theta_count` Fourier
    /// frequencies `2 pi k / theta_count` when absent.
    pub thetas: Option<Vec<f64>>,
    #[serde(default = "default_theta_count")]
    pub theta_count: usize,
    #[serde(default = "default_theta_nodes")]
    pub theta_nodes: usize,
}

impl SdmConfig {
    pub fn theta_points(&self) -> Vec<f64> {
        match &self.thetas {
            Some(t) => t.clone(),
            None => (0..self.theta_count)
                .map(|k| 2.0 * std::f64::consts::PI * k as f64 / self.theta_count as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub label: Option<String>,
    pub grid: JointSpectralGrid,
}

#[derive(Clone, Debug, Deserialize)]
pub struct SelectConfig {
    pub candidates: Vec<CandidateSpec>,
    #[serde(default)]
    pub preprocess: Preprocess,
    #[serde(flatten)]
    pub fit: FitSettings,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_taus")]
    pub taus: Vec<usize>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_replicates() -> usize {
    hdls_core::modelsel::DEFAULT_REPLICATES
}

fn default_taus() -> Vec<usize> {
    (0..=5).collect()
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default)]
pub struct CorrhistConfig {
    pub preprocess: Preprocess,
}
