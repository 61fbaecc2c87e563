//! Bootstrap model selection.
//!
//! Each candidate is fitted to the panel, then `B` Gaussian panels are drawn
//! from the fitted eigenvalue distribution (fresh Haar basis per replicate).
//! The loss of a replicate at lag `tau` is the squared distance between the
//! sorted eigenvalues of its symmetrized autocovariance and those of the
//! original panel. Candidates are ranked by mean loss.

use std::collections::HashMap;

use faer::{c64, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fit::{fit_panel, FitConfig};
use crate::linalg;
use crate::model::{JointSpectralGrid, ProcessFamily};
use crate::rng;
use crate::spectra::symmetrized_autocov;
use crate::synth::{simulate_time_domain, Basis, PanelData, SimSpec, DEFAULT_BURN_IN};
use crate::{Error, Result};

pub const DEFAULT_REPLICATES: usize = 500;

/// Display name used in ranking strings.
pub fn family_label(family: ProcessFamily) -> String {
    match family {
        ProcessFamily::Iid => "IID".into(),
        ProcessFamily::Ma(q) => format!("MA({q})"),
        ProcessFamily::Ar(q) => format!("AR({q})"),
        ProcessFamily::Arma11 => "ARMA(1,1)".into(),
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub label: String,
    pub fit: FitConfig,
}

impl Candidate {
    pub fn new(fit: FitConfig) -> Self {
        Self {
            label: family_label(fit.grid.family()),
            fit,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SelectionConfig {
    pub candidates: Vec<Candidate>,
    pub replicates: usize,
    pub taus: Vec<usize>,
    pub burn_in: usize,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn new(candidates: Vec<Candidate>, taus: Vec<usize>) -> Self {
        Self {
            candidates,
            replicates: DEFAULT_REPLICATES,
            taus,
            burn_in: DEFAULT_BURN_IN,
            seed: 0,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::domain("no candidate models"));
        }
        self.check_run(n)
    }

    fn check_run(&self, n: usize) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::domain("replicate count must be at least 1"));
        }
        if self.taus.is_empty() {
            return Err(Error::domain("no lags given"));
        }
        if let Some(t) = self.taus.iter().find(|&&t| t >= n) {
            return Err(Error::domain(format!("lag {t} must be below n = {n}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateScores {
    pub label: String,
    pub fitted: JointSpectralGrid,
    /// Mean loss per lag.
    pub mean_loss: Vec<f64>,
    /// `losses[tau][b]`.
    pub losses: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionReport {
    pub taus: Vec<usize>,
    pub replicates: usize,
    pub candidates: Vec<CandidateScores>,
    /// Ordering by increasing mean loss, one per lag, e.g. `"IID ≺ AR(1)"`.
    pub rankings: Vec<String>,
}

impl SelectionReport {
    /// Index of the candidate with minimum mean loss at lag position `k`.
    pub fn best(&self, k: usize) -> usize {
        ranking_order(&self.candidates.iter().map(|c| c.mean_loss[k]).collect::<Vec<_>>())[0]
    }
}

/// `||eig(a) - eig(b)||^2` with both spectra sorted in the same order.
pub fn eigenvalue_loss(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<f64> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() || a.nrows() != a.ncols() {
        return Err(Error::domain(format!(
            "need square matrices of equal size, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let ea = linalg::hermitian_eigenvalues(a)?;
    let eb = linalg::hermitian_eigenvalues(b)?;
    Ok(sorted_distance(&ea, &eb))
}

fn sorted_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Candidate indices by increasing value, ties to the lower index.
fn ranking_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

pub fn ranking_string(labels: &[String], mean_losses: &[f64]) -> String {
    ranking_order(mean_losses)
        .iter()
        .map(|&i| labels[i].as_str())
        .collect::<Vec<_>>()
        .join(" ≺ ")
}

/// Fits every candidate to `panel`, then scores the fits.
pub fn bootstrap_scores(panel: &PanelData, config: &SelectionConfig) -> Result<SelectionReport> {
    config.check(panel.n())?;
    let fitted: Vec<(String, JointSpectralGrid)> = config
        .candidates
        .iter()
        .map(|c| {
            log::info!("fitting candidate {}", c.label);
            fit_panel(panel, &c.fit).map(|r| (c.label.clone(), r.grid))
        })
        .collect::<Result<_>>()?;
    score_fitted(panel, &fitted, config)
}

/// Bootstrap scores of already fitted grids; `config.candidates` is ignored.
pub fn score_fitted(
    panel: &PanelData,
    fitted: &[(String, JointSpectralGrid)],
    config: &SelectionConfig,
) -> Result<SelectionReport> {
    if fitted.is_empty() {
        return Err(Error::domain("no candidate models"));
    }
    config.check_run(panel.n())?;
    let (p, n) = (panel.p(), panel.n());
    // the data statistic is shared by all candidates
    let target: Vec<Vec<f64>> = config
        .taus
        .iter()
        .map(|&tau| linalg::hermitian_eigenvalues(symmetrized_autocov(panel, tau)?.as_ref()))
        .collect::<Result<_>>()?;

    let mut candidates = Vec::with_capacity(fitted.len());
    for (c, (label, grid)) in fitted.iter().enumerate() {
        let cseed = rng::child_seed(config.seed, c as u64);
        let per_rep: Vec<Vec<f64>> = (0..config.replicates)
            .into_par_iter()
            .map(|b| {
                let spec = SimSpec {
                    grid: grid.clone(),
                    p,
                    n,
                    basis: Basis::RandomOrthogonal,
                    burn_in: config.burn_in,
                    seed: rng::child_seed(cseed, b as u64),
                };
                let sim = simulate_time_domain(&spec)?;
                config
                    .taus
                    .iter()
                    .zip(&target)
                    .map(|(&tau, t)| {
                        let e = linalg::hermitian_eigenvalues(symmetrized_autocov(&sim, tau)?.as_ref())?;
                        Ok(sorted_distance(&e, t))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let losses: Vec<Vec<f64>> = (0..config.taus.len())
            .map(|k| per_rep.iter().map(|r| r[k]).collect())
            .collect();
        let mean_loss = losses
            .iter()
            .map(|l| l.iter().sum::<f64>() / l.len() as f64)
            .collect();
        candidates.push(CandidateScores {
            label: label.clone(),
            fitted: grid.clone(),
            mean_loss,
            losses,
        });
    }
    let labels: Vec<String> = candidates.iter().map(|c| c.label.clone()).collect();
    let rankings = (0..config.taus.len())
        .map(|k| {
            let means: Vec<f64> = candidates.iter().map(|c| c.mean_loss[k]).collect();
            ranking_string(&labels, &means)
        })
        .collect();
    Ok(SelectionReport {
        taus: config.taus.clone(),
        replicates: config.replicates,
        candidates,
        rankings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub ordering: String,
    /// Percentage of runs per lag.
    pub percent: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub taus: Vec<usize>,
    pub runs: usize,
    pub rows: Vec<RankingRow>,
}

/// Percentage of runs producing each ordering, per lag. Rows appear in order
/// of first occurrence.
pub fn ranking_table(reports: &[SelectionReport]) -> Result<RankingTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::domain("need at least one report"))?;
    if reports.iter().any(|r| r.taus != first.taus) {
        return Err(Error::domain("reports use different lag lists"));
    }
    let mut rows: Vec<RankingRow> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let share = 100.0 / reports.len() as f64;
    for (k, _) in first.taus.iter().enumerate() {
        for r in reports {
            let ordering = &r.rankings[k];
            let i = *index.entry(ordering.clone()).or_insert_with(|| {
                rows.push(RankingRow {
                    ordering: ordering.clone(),
                    percent: vec![0.0; first.taus.len()],
                });
                rows.len() - 1
            });
            rows[i].percent[k] += share;
        }
    }
    Ok(RankingTable {
        taus: first.taus.clone(),
        runs: reports.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    fn diag(d: &[f64]) -> Mat<c64> {
        Mat::from_fn(d.len(), d.len(), |i, j| {
            if i == j {
                c64::new(d[i], 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn loss_examples() {
        let a = diag(&[2.0, 1.0]);
        assert_eq!(eigenvalue_loss(a.as_ref(), a.as_ref()).unwrap(), 0.0);
        assert!(eigenvalue_loss(a.as_ref(), diag(&[1.0, 2.0]).as_ref()).unwrap() < 1e-24);
        let l = eigenvalue_loss(diag(&[3.0, 1.0]).as_ref(), diag(&[1.0, 1.0]).as_ref()).unwrap();
        assert!((l - 4.0).abs() < 1e-12);
        assert!(eigenvalue_loss(a.as_ref(), diag(&[1.0]).as_ref()).is_err());
    }

    #[test]
    fn ranking_strings() {
        let labels: Vec<String> = ["IID", "AR(1)", "ARMA(1,1)"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            ranking_string(&labels, &[3.0, 1.0, 2.0]),
            "AR(1) ≺ ARMA(1,1) ≺ IID"
        );
        assert_eq!(ranking_string(&labels[..1], &[5.0]), "IID");
        // ties keep candidate order
        assert_eq!(ranking_string(&labels[..2], &[1.0, 1.0]), "IID ≺ AR(1)");
    }

    fn report(rankings: &[&str]) -> SelectionReport {
        SelectionReport {
            taus: (0..rankings.len()).collect(),
            replicates: 1,
            candidates: Vec::new(),
            rankings: rankings.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn table_percentages() {
        let t = ranking_table(&[report(&["A ≺ B"])]).unwrap();
        assert_eq!(
            t.rows,
            vec![RankingRow {
                ordering: "A ≺ B".into(),
                percent: vec![100.0]
            }]
        );
        let t = ranking_table(&[
            report(&["A ≺ B", "A ≺ B"]),
            report(&["A ≺ B", "B ≺ A"]),
            report(&["B ≺ A", "B ≺ A"]),
        ])
        .unwrap();
        assert_eq!(t.rows.len(), 2);
        for k in 0..2 {
            let total: f64 = t.rows.iter().map(|r| r.percent[k]).sum();
            assert!((total - 100.0).abs() < 1e-9);
        }
        assert!((t.rows[0].percent[0] - 200.0 / 3.0).abs() < 1e-9);
        assert!(ranking_table(&[]).is_err());
    }
}
