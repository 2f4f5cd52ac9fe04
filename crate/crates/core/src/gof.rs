//! Goodness-of-fit: observed summaries against their simulated distribution
//! at a fitted parameter.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultilevelGraph;
use crate::model::Model;
use crate::sampler::{simulate_graphs, SamplerConfig};
use crate::statistics::{compute_stats, gof_summaries, GofSummary};

pub const MIN_REPLICATES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GofConfig {
    pub replicates: usize,
    pub burn_in: Option<u64>,
    pub interval: Option<u64>,
    pub seed: u64,
}

impl Default for GofConfig {
    fn default() -> Self {
        GofConfig {
            replicates: 1000,
            burn_in: None,
            interval: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofRow {
    pub statistic: String,
    pub bin: String,
    pub simulated_mean: f64,
    pub simulated_q05: f64,
    pub simulated_q95: f64,
    pub observed: f64,
}

impl GofRow {
    pub fn covers_observed(&self) -> bool {
        self.simulated_q05 <= self.observed && self.observed <= self.simulated_q95
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub rows: Vec<GofRow>,
    /// `sqrt(sum_i mean_r (esp_ri - esp_obs_i)^2)`.
    pub esp_rmse: f64,
}

impl GofReport {
    pub fn rows_for<'a>(&'a self, statistic: &'a str) -> impl Iterator<Item = &'a GofRow> + 'a {
        self.rows.iter().filter(move |r| r.statistic == statistic)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn row(statistic: &str, bin: String, mut sims: Vec<f64>, observed: f64) -> GofRow {
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    sims.sort_by(f64::total_cmp);
    GofRow {
        statistic: statistic.to_string(),
        bin,
        simulated_mean: mean,
        simulated_q05: quantile(&sims, 0.05),
        simulated_q95: quantile(&sims, 0.95),
        observed,
    }
}

fn padded(v: &[u64], len: usize) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    out.resize(len, 0.0);
    out
}

/// Simulates `config.replicates` graphs at `theta` on the node layout of
/// `observed` and compares geodesic, DSP and ESP distributions and the model
/// statistics with their observed values.
///
/// Every neighborhood runs a single chain whose successive retained states
/// form the replicates.
pub fn gof(model: &Model, theta: &[f64], observed: &MultilevelGraph, config: &GofConfig) -> Result<GofReport> {
    if config.replicates < MIN_REPLICATES {
        return Err(Error::Config(format!(
            "goodness-of-fit needs at least {MIN_REPLICATES} replicates, got {}",
            config.replicates
        )));
    }
    model.check_domain(theta)?;
    model.terms().validate(observed)?;
    let sampler = SamplerConfig {
        burn_in: config.burn_in,
        interval: config.interval,
        n_draws: config.replicates,
        seed: config.seed,
        record_states: false,
    };
    let sims = simulate_graphs(model, theta, observed, &sampler)?;
    let sizes = observed.sizes();
    let obs_summary = gof_summaries(observed);
    let sim_summaries: Vec<GofSummary> = sims.iter().map(gof_summaries).collect();
    let obs_terms = compute_stats(observed, model.terms())?.aggregate(model.terms(), &sizes);
    let sim_terms: Vec<Vec<(String, f64)>> = sims
        .iter()
        .map(|g| compute_stats(g, model.terms()).map(|s| s.aggregate(model.terms(), &sizes)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let n_max = observed.max_size();
    let geo_len = n_max.saturating_sub(1);
    let sp_len = n_max.saturating_sub(2);
    let obs_geo = padded(&obs_summary.geodesic, geo_len);
    let sim_geo: Vec<Vec<f64>> = sim_summaries.iter().map(|s| padded(&s.geodesic, geo_len)).collect();
    for d in 0..geo_len {
        rows.push(row("geodesic", (d + 1).to_string(), sim_geo.iter().map(|v| v[d]).collect(), obs_geo[d]));
    }
    rows.push(row(
        "geodesic",
        "inf".into(),
        sim_summaries.iter().map(|s| s.unreachable as f64).collect(),
        obs_summary.unreachable as f64,
    ));
    let obs_dsp = padded(&obs_summary.dsp, sp_len);
    let sim_dsp: Vec<Vec<f64>> = sim_summaries.iter().map(|s| padded(&s.dsp, sp_len)).collect();
    for i in 0..sp_len {
        rows.push(row("dsp", (i + 1).to_string(), sim_dsp.iter().map(|v| v[i]).collect(), obs_dsp[i]));
    }
    let obs_esp = padded(&obs_summary.esp, sp_len);
    let sim_esp: Vec<Vec<f64>> = sim_summaries.iter().map(|s| padded(&s.esp, sp_len)).collect();
    for i in 0..sp_len {
        rows.push(row("esp", (i + 1).to_string(), sim_esp.iter().map(|v| v[i]).collect(), obs_esp[i]));
    }
    for (c, (label, value)) in obs_terms.iter().enumerate() {
        rows.push(row("term", label.clone(), sim_terms.iter().map(|t| t[c].1).collect(), *value));
    }
    let r = sims.len() as f64;
    let esp_rmse = (0..sp_len)
        .map(|i| sim_esp.iter().map(|v| (v[i] - obs_esp[i]).powi(2)).sum::<f64>() / r)
        .sum::<f64>()
        .sqrt();
    Ok(GofReport { rows, esp_rmse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::{Term, TermSet};

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert!((quantile(&xs, 0.05) - 1.2).abs() < 1e-12);
        assert!((quantile(&xs, 0.95) - 4.8).abs() < 1e-12);
    }

    #[test]
    fn too_few_replicates() {
        let g = MultilevelGraph::with_sizes(&[4], false).unwrap();
        let m = Model::canonical(TermSet::new(vec![Term::Edges])).unwrap();
        let cfg = GofConfig { replicates: 9, ..Default::default() };
        assert!(matches!(gof(&m, &[0.0], &g, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn report_shape_and_bands() {
        let mut g = MultilevelGraph::with_sizes(&[6, 5], false).unwrap();
        g.toggle("0_0", "0_1").unwrap();
        g.toggle("0_1", "0_2").unwrap();
        let m = Model::canonical(TermSet::new(vec![Term::Edges, Term::TransitiveEdges])).unwrap();
        let cfg = GofConfig { replicates: 50, seed: 3, ..Default::default() };
        let rep = gof(&m, &[-1.0, 0.3], &g, &cfg).unwrap();
        assert_eq!(rep.rows_for("geodesic").count(), 6);
        assert_eq!(rep.rows_for("dsp").count(), 4);
        assert_eq!(rep.rows_for("esp").count(), 4);
        assert_eq!(rep.rows_for("term").count(), 2);
        for r in &rep.rows {
            assert!(r.simulated_q05 <= r.simulated_q95);
            assert!(r.simulated_mean >= 0.0);
        }
        let inside = rep.rows.iter().filter(|r| r.simulated_q05 <= r.simulated_mean && r.simulated_mean <= r.simulated_q95).count();
        assert!(inside * 10 >= rep.rows.len() * 8, "{inside} of {}", rep.rows.len());
        assert_eq!(rep, gof(&m, &[-1.0, 0.3], &g, &cfg).unwrap());
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("statistic,bin,simulated_mean,simulated_q05,simulated_q95,observed\n"));
    }
}
