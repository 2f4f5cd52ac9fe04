//! Metropolis edge-toggle sampling, one independent chain per neighborhood.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dyads, Adjacency, MultilevelGraph};
use crate::model::Model;
use crate::statistics::BoundTerms;

/// Burn-in defaults to this many sweeps over the dyads of a neighborhood.
pub const DEFAULT_BURN_IN_SWEEPS: u64 = 20;

/// Fraction of retained draws near the empty or complete graph above which
/// a chain is flagged as degenerate.
pub const DEGENERACY_FRACTION: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Steps discarded before the first draw; `None` = 20 x dyads.
    #[serde(default)]
    pub burn_in: Option<u64>,
    /// Steps between retained draws; `None` = dyads.
    #[serde(default)]
    pub interval: Option<u64>,
    #[serde(default = "default_draws")]
    pub n_draws: usize,
    #[serde(default)]
    pub seed: u64,
    /// Keep the dyad bitmask of every draw (neighborhoods with <= 64 dyads).
    #[serde(default)]
    pub record_states: bool,
}

fn default_draws() -> usize {
    1
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            burn_in: None,
            interval: None,
            n_draws: 1,
            seed: 0,
            record_states: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interval == Some(0) {
            return Err(Error::Config("sampler interval must be >= 1".into()));
        }
        if self.n_draws == 0 {
            return Err(Error::Config("sampler n_draws must be >= 1".into()));
        }
        Ok(())
    }

    pub fn burn_in_for(&self, dyads: usize) -> u64 {
        self.burn_in
            .unwrap_or(DEFAULT_BURN_IN_SWEEPS * dyads as u64)
    }

    pub fn interval_for(&self, dyads: usize) -> u64 {
        self.interval.unwrap_or(dyads as u64).max(1)
    }
}

/// SplitMix64 finalizer used to derive independent seeds from a master seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut z = master;
    for &t in tags {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(t.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Counter-based stream for neighborhood `k`: the same `(seed, k)` always
/// yields the same sequence regardless of scheduling.
pub fn neighborhood_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Retained draws of one neighborhood chain.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborhoodDraws {
    pub dim: usize,
    /// Row-major `n_draws x dim` statistic matrix.
    pub stats: Vec<f64>,
    pub states: Option<Vec<u64>>,
    pub final_state: Adjacency,
    pub acceptance_rate: f64,
    pub degenerate: bool,
}

impl NeighborhoodDraws {
    pub fn n_draws(&self) -> usize {
        self.stats.len().checked_div(self.dim).unwrap_or(self.stats.len())
    }

    pub fn draw(&self, m: usize) -> &[f64] {
        &self.stats[m * self.dim..(m + 1) * self.dim]
    }

    pub fn draws(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_draws()).map(move |m| self.draw(m))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub neighborhoods: Vec<NeighborhoodDraws>,
}

impl SampleBatch {
    pub fn n_draws(&self) -> usize {
        self.neighborhoods.first().map_or(0, NeighborhoodDraws::n_draws)
    }

    pub fn degenerate(&self) -> bool {
        self.neighborhoods.iter().any(|d| d.degenerate)
    }
}

/// Runs a Metropolis chain on `adj` in place. `stats` must hold the exact
/// statistics of `adj` on entry and is kept exact. `on_draw` sees the state
/// after burn-in and after every `interval` further steps.
#[allow(clippy::too_many_arguments)]
pub fn run_chain<R: Rng>(
    adj: &mut Adjacency,
    bound: &BoundTerms,
    eta: &[f64],
    stats: &mut [f64],
    burn_in: u64,
    interval: u64,
    n_draws: usize,
    rng: &mut R,
    mut on_draw: impl FnMut(&Adjacency, &[f64]),
) -> f64 {
    let pairs = dyads(adj.len(), adj.is_directed());
    if pairs.is_empty() {
        for _ in 0..n_draws {
            on_draw(adj, stats);
        }
        return 0.0;
    }
    let mut accepted = 0u64;
    let mut steps = 0u64;
    let mut step = |adj: &mut Adjacency, stats: &mut [f64], rng: &mut R| {
        let (i, j) = pairs[rng.random_range(0..pairs.len())];
        let d = bound.change_dot(adj, i, j, eta);
        let log_ratio = if adj.has(i, j) { -d } else { d };
        if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
            let sign = if adj.has(i, j) { -1.0 } else { 1.0 };
            bound.for_each_change(adj, i, j, |c, v| stats[c] += sign * v);
            adj.toggle(i, j);
            accepted += 1;
        }
        steps += 1;
    };
    for _ in 0..burn_in {
        step(adj, stats, rng);
    }
    for m in 0..n_draws {
        if m > 0 {
            for _ in 0..interval {
                step(adj, stats, rng);
            }
        }
        on_draw(adj, stats);
    }
    if steps == 0 {
        0.0
    } else {
        accepted as f64 / steps as f64
    }
}

/// Samples neighborhood `k` of `graph`, starting from `start`.
pub fn sample_neighborhood(
    model: &Model,
    theta: &[f64],
    graph: &MultilevelGraph,
    k: usize,
    config: &SamplerConfig,
    start: &Adjacency,
) -> Result<NeighborhoodDraws> {
    model.check_domain(theta)?;
    config.validate()?;
    let bound = model.terms().bind(graph, k)?;
    Ok(sample_bound(model, theta, &bound, k, config, start.clone()))
}

pub(crate) fn sample_bound(
    model: &Model,
    theta: &[f64],
    bound: &BoundTerms,
    k: usize,
    config: &SamplerConfig,
    mut adj: Adjacency,
) -> NeighborhoodDraws {
    let n = bound.size();
    let eta = model.eta_unchecked(theta, n);
    let d = adj.dyad_count();
    let dim = bound.dim();
    let mut stats = bound.stats(&adj);
    let mut rng = neighborhood_rng(config.seed, k);
    let mut out = Vec::with_capacity(config.n_draws * dim);
    let record = config.record_states && d <= 64;
    let mut states = record.then(|| Vec::with_capacity(config.n_draws));
    let mut extreme = 0usize;
    let acceptance_rate = run_chain(
        &mut adj,
        bound,
        &eta,
        &mut stats,
        config.burn_in_for(d),
        config.interval_for(d),
        config.n_draws,
        &mut rng,
        |a, s| {
            out.extend_from_slice(s);
            if let Some(st) = states.as_mut() {
                st.push(a.dyad_mask().expect("<= 64 dyads"));
            }
            let e = a.edge_count();
            if d > 0 && (e <= 2 || e + 2 >= d) {
                extreme += 1;
            }
        },
    );
    NeighborhoodDraws {
        dim,
        stats: out,
        states,
        final_state: adj,
        acceptance_rate,
        degenerate: d > 4 && extreme as f64 > DEGENERACY_FRACTION * config.n_draws as f64,
    }
}

/// Where each neighborhood chain starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    Empty,
    /// The current edges of the graph being sampled.
    Observed,
}

/// Samples every neighborhood of `graph` in parallel; results are in neighborhood order.
pub fn sample(
    model: &Model,
    theta: &[f64],
    graph: &MultilevelGraph,
    config: &SamplerConfig,
    start: Start,
) -> Result<SampleBatch> {
    model.check_domain(theta)?;
    config.validate()?;
    let bound = model.terms().bind_all(graph)?;
    let neighborhoods = (0..graph.num_neighborhoods())
        .into_par_iter()
        .map(|k| {
            let nb = graph.neighborhood(k);
            let adj = match start {
                Start::Empty => Adjacency::empty(nb.len(), graph.is_directed()),
                Start::Observed => nb.adjacency.clone(),
            };
            sample_bound(model, theta, &bound[k], k, config, adj)
        })
        .collect();
    Ok(SampleBatch { neighborhoods })
}

/// Draws one graph on the node layout of `layout` (its edges are ignored):
/// every neighborhood chain starts empty and is stopped after burn-in.
pub fn simulate_graph(
    model: &Model,
    theta: &[f64],
    layout: &MultilevelGraph,
    config: &SamplerConfig,
) -> Result<MultilevelGraph> {
    let one = SamplerConfig {
        n_draws: 1,
        record_states: false,
        ..config.clone()
    };
    let batch = sample(model, theta, &layout.cleared(), &one, Start::Empty)?;
    let mut g = layout.cleared();
    for (k, d) in batch.neighborhoods.into_iter().enumerate() {
        g.set_adjacency(k, d.final_state);
    }
    Ok(g)
}

/// `config.n_draws` successive retained graphs from one chain per neighborhood.
pub fn simulate_graphs(
    model: &Model,
    theta: &[f64],
    layout: &MultilevelGraph,
    config: &SamplerConfig,
) -> Result<Vec<MultilevelGraph>> {
    model.check_domain(theta)?;
    config.validate()?;
    let empty = layout.cleared();
    let bound = model.terms().bind_all(&empty)?;
    let per_nb: Vec<Vec<Adjacency>> = (0..empty.num_neighborhoods())
        .into_par_iter()
        .map(|k| {
            let nb = empty.neighborhood(k);
            let mut adj = nb.adjacency.clone();
            let eta = model.eta_unchecked(theta, nb.len());
            let mut stats = bound[k].stats(&adj);
            let d = adj.dyad_count();
            let mut rng = neighborhood_rng(config.seed, k);
            let mut states = Vec::with_capacity(config.n_draws);
            run_chain(
                &mut adj,
                &bound[k],
                &eta,
                &mut stats,
                config.burn_in_for(d),
                config.interval_for(d),
                config.n_draws,
                &mut rng,
                |a, _| states.push(a.clone()),
            );
            states
        })
        .collect();
    Ok((0..config.n_draws)
        .map(|m| {
            let mut g = empty.clone();
            for (k, states) in per_nb.iter().enumerate() {
                g.set_adjacency(k, states[m].clone());
            }
            g
        })
        .collect())
}
