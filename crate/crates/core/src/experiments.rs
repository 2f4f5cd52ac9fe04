//! Replication harnesses: consistency of estimates as the number of
//! neighborhoods grows, and concentration of the edge count.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentSpec;
use crate::error::Result;
use crate::estimator::{mcmle, sample_sd, EstimatorConfig, Status};
use crate::graph::MultilevelGraph;
use crate::model::Model;
use crate::sampler::{derive_seed, simulate_graph, SamplerConfig};

/// Inputs shared by both harnesses.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub directed: bool,
    pub seed: u64,
    /// Simulation settings; `n_draws` and `seed` are ignored.
    pub sampler: SamplerConfig,
    /// Estimation settings; `seed` is replaced per replication.
    pub estimator: EstimatorConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRow {
    pub k: usize,
    pub replication: usize,
    pub coordinate: String,
    pub estimate: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub k: usize,
    pub coordinate: String,
    pub rmse: f64,
    pub bias: f64,
    /// Converged replications the summary is computed from.
    pub used: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyResult {
    pub rows: Vec<ReplicationRow>,
    pub summary: Vec<SummaryRow>,
}

impl ConsistencyResult {
    pub fn rmse(&self, k: usize, coordinate: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.k == k && r.coordinate == coordinate)
            .map(|r| r.rmse)
    }
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn layout(exp: &Experiment, k: usize) -> Result<MultilevelGraph> {
    MultilevelGraph::with_sizes(&exp.spec.sizes.sizes(k)?, exp.directed)
}

fn simulate(exp: &Experiment, model: &Model, layout: &MultilevelGraph, seed: u64) -> Result<MultilevelGraph> {
    let cfg = SamplerConfig {
        n_draws: 1,
        seed,
        record_states: false,
        ..exp.sampler.clone()
    };
    simulate_graph(model, &exp.spec.theta_star, layout, &cfg)
}

/// Simulates `replications` datasets at `theta_star` for every `K` in the
/// grid and estimates each by Monte Carlo maximum likelihood. Failed or
/// unconverged fits are kept in the rows and left out of the summary.
pub fn run_consistency(model: &Model, exp: &Experiment) -> Result<ConsistencyResult> {
    exp.spec.validate()?;
    model.check_domain(&exp.spec.theta_star)?;
    exp.estimator.validate()?;
    let jobs: Vec<(usize, usize)> = exp
        .spec
        .k_grid
        .iter()
        .flat_map(|&k| (0..exp.spec.replications).map(move |r| (k, r)))
        .collect();
    let layouts: Vec<(usize, MultilevelGraph)> = exp
        .spec
        .k_grid
        .iter()
        .map(|&k| layout(exp, k).map(|g| (k, g)))
        .collect::<Result<_>>()?;
    let fits: Vec<(Vec<f64>, String)> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let seed = derive_seed(exp.seed, &[k as u64, r as u64]);
            let lay = &layouts.iter().find(|(kk, _)| *kk == k).expect("layout per K").1;
            let fit = simulate(exp, model, lay, derive_seed(seed, &[0])).and_then(|data| {
                let cfg = EstimatorConfig {
                    seed: derive_seed(seed, &[1]),
                    ..exp.estimator.clone()
                };
                mcmle(&data, model, &cfg)
            });
            match fit {
                Ok(res) => (res.theta.0, res.status.to_string()),
                Err(e) => (vec![f64::NAN; model.dim()], format!("failed: {e}")),
            }
        })
        .collect();

    let mut rows = Vec::new();
    for (&(k, r), (theta, status)) in jobs.iter().zip(&fits) {
        for (name, &v) in model.names().iter().zip(theta) {
            rows.push(ReplicationRow {
                k,
                replication: r,
                coordinate: name.clone(),
                estimate: v,
                status: status.clone(),
            });
        }
    }
    let summary = summarize(&rows, model.names(), &exp.spec.k_grid, &exp.spec.theta_star);
    Ok(ConsistencyResult { rows, summary })
}

/// Per-`K` RMSE and bias against `truth`, from converged rows only.
pub fn summarize(rows: &[ReplicationRow], names: &[String], k_grid: &[usize], truth: &[f64]) -> Vec<SummaryRow> {
    let converged = Status::Converged.to_string();
    let mut out = Vec::new();
    for &k in k_grid {
        for (name, &t) in names.iter().zip(truth) {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.k == k && &r.coordinate == name && r.status == converged)
                .map(|r| r.estimate - t)
                .collect();
            let n = errs.len() as f64;
            out.push(SummaryRow {
                k,
                coordinate: name.clone(),
                rmse: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
                bias: errs.iter().sum::<f64>() / n,
                used: errs.len(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub k: usize,
    pub replication: usize,
    /// Within-neighborhood edges over within-neighborhood dyads.
    pub fraction: f64,
    /// `|f - mean f| / dyads`, centered at the per-`K` sample mean.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationSummary {
    pub k: usize,
    pub dyads: usize,
    pub sd: f64,
    pub min_fraction: f64,
    pub max_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationResult {
    pub rows: Vec<ConcentrationRow>,
    pub summary: Vec<ConcentrationSummary>,
}

/// Simulates `replications` independent graphs at `theta_star` per `K` and
/// records the normalized edge count.
pub fn run_concentration(model: &Model, exp: &Experiment) -> Result<ConcentrationResult> {
    exp.spec.validate()?;
    model.check_domain(&exp.spec.theta_star)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &k in &exp.spec.k_grid {
        let lay = layout(exp, k)?;
        let dyads = lay.dyad_count();
        let fractions: Vec<f64> = (0..exp.spec.replications)
            .into_par_iter()
            .map(|r| {
                let g = simulate(exp, model, &lay, derive_seed(exp.seed, &[k as u64, r as u64]))?;
                Ok(g.edge_count() as f64 / dyads as f64)
            })
            .collect::<Result<_>>()?;
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        for (r, &f) in fractions.iter().enumerate() {
            rows.push(ConcentrationRow {
                k,
                replication: r,
                fraction: f,
                deviation: (f - mean).abs(),
            });
        }
        summary.push(ConcentrationSummary {
            k,
            dyads,
            sd: sample_sd(&fractions),
            min_fraction: fractions.iter().copied().fold(f64::INFINITY, f64::min),
            max_fraction: fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(ConcentrationResult { rows, summary })
}
