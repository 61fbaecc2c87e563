//! Subcommand bodies. Each reads its inputs, runs the core routine and writes
//! results under the output directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hdls_core::fit::fit_panel;
use hdls_core::lsd::FixedPointSystem;
use hdls_core::model::JointSpectralGrid;
use hdls_core::modelsel::{bootstrap_scores, family_label, ranking_table, Candidate, SelectionConfig};
use hdls_core::synth::{simulate_time_domain, PanelData, SimSpec};
use hdls_core::{preprocess, sdm, Mat};
use serde::Serialize;

use crate::config::{CorrhistConfig, EstimateConfig, LsdConfig, SdmConfig, SelectConfig};
use crate::io::{ingest_csv, read_json, write_json, write_panel_csv, write_table};

/// Command-line values that override the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub kappa: Option<u32>,
    pub gfamily: Option<hdls_core::fit::GFamily>,
    pub taus: Option<Vec<usize>>,
}

pub struct Paths {
    pub config: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: PathBuf,
}

impl Paths {
    fn config(&self) -> Result<&Path> {
        self.config
            .as_deref()
            .context("--config is required for this subcommand")
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .context("--input is required for this subcommand")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output.join(name)
    }
}

fn real_panel(panel: PanelData) -> Result<Mat<f64>> {
    match panel {
        PanelData::Real(m) => Ok(m),
        PanelData::Complex(_) => bail!("expected a real panel"),
    }
}

pub fn simulate(paths: &Paths, o: &Overrides) -> Result<()> {
    let mut spec: SimSpec = read_json(paths.config()?)?;
    if let Some(seed) = o.seed {
        spec.seed = seed;
    }
    let panel = real_panel(simulate_time_domain(&spec)?)?;
    write_panel_csv(&paths.out("panel.csv"), &panel)?;
    log::info!("wrote {} x {} panel", panel.nrows(), panel.ncols());
    Ok(())
}

fn marginal_tables(grid: &JointSpectralGrid, dir: &Path) -> Result<()> {
    for (k, name) in grid.factor_names().iter().enumerate() {
        let cdf = grid.marginal(k)?;
        let mut acc = 0.0;
        let rows: Vec<Vec<String>> = cdf
            .atoms()
            .iter()
            .map(|(x, w)| {
                acc += w;
                vec![x.to_string(), w.to_string(), acc.min(1.0).to_string()]
            })
            .collect();
        write_table(
            &dir.join(format!("cdf_{}.csv", name.to_lowercase())),
            &["value", "weight", "cdf"],
            rows,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FitOutput<'a> {
    model: String,
    p: usize,
    n: usize,
    gfamily: String,
    kappa: u32,
    grid: &'a JointSpectralGrid,
    omega_hat: &'a [f64],
    factor_weights: &'a Option<Vec<Vec<f64>>>,
    final_loss: f64,
    loss_trace: &'a [f64],
    start_losses: &'a [f64],
}

pub fn estimate(paths: &Paths, o: &Overrides) -> Result<()> {
    let mut cfg: EstimateConfig = read_json(paths.config()?)?;
    apply_fit_overrides(&mut cfg.fit, o);
    let seed = o.seed.unwrap_or(cfg.seed);
    let panel = cfg.preprocess.apply(ingest_csv(paths.input()?)?)?;
    let fit_config = cfg.fit.build(cfg.grid.clone(), seed)?;
    let (p, n) = (panel.nrows(), panel.ncols());
    let result = fit_panel(&PanelData::Real(panel), &fit_config)?;
    log::info!("final loss {:.6}", result.final_loss);
    write_json(
        &paths.out("fit.json"),
        &FitOutput {
            model: family_label(result.grid.family()),
            p,
            n,
            gfamily: cfg.fit.gfamily.to_string(),
            kappa: cfg.fit.kappa,
            grid: &result.grid,
            omega_hat: &result.omega_hat,
            factor_weights: &result.factor_weights,
            final_loss: result.final_loss,
            loss_trace: &result.loss_trace,
            start_losses: &result.start_losses,
        },
    )?;
    marginal_tables(&result.grid, &paths.output)
}

fn apply_fit_overrides(fit: &mut crate::config::FitSettings, o: &Overrides) {
    if let Some(k) = o.kappa {
        fit.kappa = k;
    }
    if let Some(g) = o.gfamily {
        fit.gfamily = g;
    }
}

pub fn lsd(paths: &Paths, o: &Overrides) -> Result<()> {
    let mut cfg: LsdConfig = read_json(paths.config()?)?;
    if let Some(g) = o.gfamily {
        cfg.gfamily = g;
    }
    let gs = cfg.gfamily.build()?;
    let z = cfg.z_points();
    let mut rows = Vec::new();
    let mut density_rows = Vec::new();
    for (gi, g) in gs.iter().enumerate() {
        let system = FixedPointSystem::for_grid(&cfg.grid, g, cfg.theta_nodes)?;
        for zz in &z {
            let sol = system.solve(cfg.grid.weights(), *zz, cfg.c, None, cfg.iteration)?;
            rows.push(vec![
                gi.to_string(),
                zz.re.to_string(),
                zz.im.to_string(),
                sol.s_value.re.to_string(),
                sol.s_value.im.to_string(),
                sol.iterations_used.to_string(),
                sol.residual().to_string(),
            ]);
        }
        if let Some(d) = &cfg.density {
            let xs = d.points();
            let dens =
                hdls_core::lsd::density(&cfg.grid, g, cfg.c, &xs, d.eps, cfg.iteration, cfg.theta_nodes)?;
            density_rows.extend(
                xs.iter()
                    .zip(dens)
                    .map(|(x, v)| vec![gi.to_string(), x.to_string(), v.to_string()]),
            );
        }
    }
    write_table(
        &paths.out("transforms.csv"),
        &["g", "z_re", "z_im", "s_re", "s_im", "iterations", "residual"],
        rows,
    )?;
    if cfg.density.is_some() {
        write_table(&paths.out("density.csv"), &["g", "x", "density"], density_rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct AtomOutput {
    params: Vec<f64>,
    variance: f64,
    multiplicity: usize,
    order_key: f64,
}

pub fn sdm(paths: &Paths, _o: &Overrides) -> Result<()> {
    let cfg: SdmConfig = read_json(paths.config()?)?;
    let panel = PanelData::Real(cfg.preprocess.apply(ingest_csv(paths.input()?)?)?);
    let gs = cfg.g0_family.build()?;
    let g0 = gs.get(cfg.g0_index).with_context(|| {
        format!(
            "g0_index {} out of range for {} ({} functions)",
            cfg.g0_index,
            cfg.g0_family,
            gs.len()
        )
    })?;
    let est = sdm::estimate(&panel, &cfg.grid, g0, cfg.theta_nodes)?;
    let p = est.p();
    let u = &est.u_hat;
    write_table(
        &paths.out("u_hat.csv"),
        &["row", "col", "re", "im"],
        (0..p).flat_map(|i| {
            (0..p).map(move |j| {
                vec![
                    i.to_string(),
                    j.to_string(),
                    u[(i, j)].re.to_string(),
                    u[(i, j)].im.to_string(),
                ]
            })
        }),
    )?;
    let mut rows = Vec::new();
    for theta in cfg.theta_points() {
        let h = sdm::sdm_at(&est, theta);
        for i in 0..p {
            for j in 0..p {
                rows.push(vec![
                    theta.to_string(),
                    i.to_string(),
                    j.to_string(),
                    h[(i, j)].re.to_string(),
                    h[(i, j)].im.to_string(),
                ]);
            }
        }
    }
    write_table(&paths.out("sdm.csv"), &["theta", "row", "col", "re", "im"], rows)?;
    let atoms: Vec<AtomOutput> = est
        .ordered_atoms
        .iter()
        .zip(&est.order_keys)
        .map(|((pt, m), key)| AtomOutput {
            params: pt.params.clone(),
            variance: pt.sigma2(),
            multiplicity: *m,
            order_key: *key,
        })
        .collect();
    write_json(&paths.out("atoms.json"), &atoms)
}

pub fn select(paths: &Paths, o: &Overrides) -> Result<()> {
    let mut cfg: SelectConfig = read_json(paths.config()?)?;
    apply_fit_overrides(&mut cfg.fit, o);
    if let Some(t) = &o.taus {
        cfg.taus = t.clone();
    }
    let seed = o.seed.unwrap_or(cfg.seed);
    let panel = PanelData::Real(cfg.preprocess.apply(ingest_csv(paths.input()?)?)?);
    let candidates = cfg
        .candidates
        .iter()
        .map(|c| {
            let mut cand = Candidate::new(cfg.fit.build(c.grid.clone(), seed)?);
            if let Some(label) = &c.label {
                cand.label = label.clone();
            }
            Ok(cand)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut selection = SelectionConfig::new(candidates, cfg.taus.clone());
    selection.replicates = cfg.replicates;
    selection.burn_in = cfg.burn_in;
    selection.seed = seed;
    let report = bootstrap_scores(&panel, &selection)?;
    write_json(&paths.out("report.json"), &report)?;
    let table = ranking_table(std::slice::from_ref(&report))?;
    let header: Vec<String> = std::iter::once("ordering".to_string())
        .chain(table.taus.iter().map(|t| format!("lag_{t}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        &paths.out("rankings.csv"),
        &header,
        table.rows.iter().map(|r| {
            std::iter::once(r.ordering.clone())
                .chain(r.percent.iter().map(|v| v.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn corrhist(paths: &Paths, _o: &Overrides) -> Result<()> {
    let cfg: CorrhistConfig = match &paths.config {
        Some(path) => read_json(path)?,
        None => CorrhistConfig::default(),
    };
    let panel = cfg.preprocess.apply(ingest_csv(paths.input()?)?)?;
    write_table(
        &paths.out("correlations.csv"),
        &["correlation"],
        preprocess::pairwise_correlations(&panel)
            .into_iter()
            .map(|c| vec![c.to_string()]),
    )?;
    write_table(
        &paths.out("pve.csv"),
        &["component", "pve"],
        preprocess::pve(&panel)?
            .into_iter()
            .enumerate()
            .map(|(k, v)| vec![(k + 1).to_string(), v.to_string()]),
    )
}
