//! Maximum pseudolikelihood starts, Monte Carlo maximum likelihood and
//! parametric bootstrap standard errors.
//!
//! The Monte Carlo loglikelihood ratio relative to a reference `theta_ref`
//! decomposes over neighborhoods:
//!
//! ```text
//! sum_k [ q(x_k) - log mean_m exp q(X_k^(m)) ],   q(x) = <eta_k(theta) - eta_k(theta_ref), s_k(x)>
//! ```
//!
//! with draws `X_k^(m)` from independent per-neighborhood chains at `theta_ref`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dyads, MultilevelGraph};
use crate::model::{log1p_exp, logistic, Model, ParameterVector};
use crate::optim::{damped_solve, maximize, NewtonSettings, Objective};
use crate::oracle::default_start;
use crate::sampler::{derive_seed, sample, SampleBatch, SamplerConfig, Start};
use crate::statistics::{compute_stats, StatisticVector};

/// Coordinates larger than this in absolute value are treated as divergence
/// towards the boundary of the parameter space.
pub const DIVERGENCE_LIMIT: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Retained draws per neighborhood and outer iteration.
    pub draws: usize,
    pub burn_in: Option<u64>,
    pub interval: Option<u64>,
    pub tol_step: f64,
    pub tol_score: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Radius of the ball around the reference parameter that inner Newton
    /// iterates may not leave.
    pub trust_radius: f64,
    /// Outer steps shorter than this multiple of the Monte Carlo standard
    /// error count as converged.
    pub mc_tolerance_factor: f64,
    /// Smallest acceptable effective sample size, as a fraction of draws.
    pub min_ess_fraction: f64,
    /// Consecutive outer iterations with the observed statistic outside the
    /// sampled range before giving up.
    pub hull_patience: usize,
    pub seed: u64,
    /// Starting value; the pseudolikelihood estimate when absent.
    pub start: Option<Vec<f64>>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            draws: 5000,
            burn_in: None,
            interval: None,
            tol_step: 1e-4,
            tol_score: 1e-4,
            max_outer: 30,
            max_inner: 100,
            trust_radius: 0.5,
            mc_tolerance_factor: 3.0,
            min_ess_fraction: 0.05,
            hull_patience: 3,
            seed: 0,
            start: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws < 2 {
            return Err(Error::Config("estimator draws must be >= 2".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Config("iteration limits must be >= 1".into()));
        }
        if [self.trust_radius, self.tol_step, self.tol_score].iter().any(|x| x.is_nan() || *x <= 0.0) {
            return Err(Error::Config("radius and tolerances must be positive".into()));
        }
        if self.interval == Some(0) {
            return Err(Error::Config("estimator interval must be >= 1".into()));
        }
        Ok(())
    }

    fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            burn_in: self.burn_in,
            interval: self.interval,
            n_draws: self.draws,
            seed,
            record_states: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterations,
    BoundarySuspect,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max-iterations",
            Status::BoundarySuspect => "boundary-suspect",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Reference parameter the batch was drawn at.
    pub theta_ref: Vec<f64>,
    /// Maximizer of the Monte Carlo approximation built from that batch.
    pub theta: Vec<f64>,
    pub step_norm: f64,
    pub score_norm: f64,
    pub mc_se_norm: f64,
    pub min_ess: f64,
    pub outside_hull: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta: ParameterVector,
    pub names: Vec<String>,
    pub iterations: usize,
    /// Norm of the Monte Carlo score at `theta`, divided by the number of dyads.
    pub score_norm: f64,
    /// Length of the final inner Newton step.
    pub last_step_norm: f64,
    pub status: Status,
    pub trace: Vec<IterationRecord>,
    /// Monte Carlo standard error of each coordinate.
    pub mc_se: Vec<f64>,
    pub se: Option<Vec<f64>>,
}

/// Pseudolikelihood data: dyads grouped by neighborhood size, change
/// statistic and response.
struct PseudoData {
    groups: Vec<(usize, Vec<f64>, f64, f64)>,
}

impl PseudoData {
    fn new(graph: &MultilevelGraph, model: &Model) -> Result<Self> {
        let bound = model.terms().bind_all(graph)?;
        let mut map: BTreeMap<(usize, Vec<i64>), (f64, f64)> = BTreeMap::new();
        for (k, nb) in graph.neighborhoods().iter().enumerate() {
            let adj = &nb.adjacency;
            for (i, j) in dyads(nb.len(), graph.is_directed()) {
                let delta = bound[k].change(adj, i, j);
                let key = (nb.len(), delta.iter().map(|&x| x as i64).collect());
                let e = map.entry(key).or_insert((0.0, 0.0));
                if adj.has(i, j) {
                    e.0 += 1.0;
                } else {
                    e.1 += 1.0;
                }
            }
        }
        Ok(PseudoData {
            groups: map
                .into_iter()
                .map(|((n, d), (y1, y0))| (n, d.into_iter().map(|x| x as f64).collect(), y1, y0))
                .collect(),
        })
    }

    fn evaluate(&self, model: &Model, theta: &[f64]) -> Objective {
        let q = model.dim();
        let mut cache: BTreeMap<usize, (Vec<f64>, DMatrix<f64>)> = BTreeMap::new();
        let mut value = 0.0;
        let mut gradient = DVector::zeros(q);
        let mut neg_hessian = DMatrix::zeros(q, q);
        for (n, delta, y1, y0) in &self.groups {
            let (eta, jac) = cache.entry(*n).or_insert_with(|| {
                (
                    model.eta_unchecked(theta, *n),
                    model.jacobian_unchecked(theta, *n),
                )
            });
            let z: f64 = eta.iter().zip(delta).map(|(e, d)| e * d).sum();
            value += y1 * (z - log1p_exp(z)) - y0 * log1p_exp(z);
            let p = logistic(z);
            let v = jac.transpose() * DVector::from_column_slice(delta);
            gradient += (y1 - (y1 + y0) * p) * &v;
            neg_hessian += ((y1 + y0) * p * (1.0 - p)) * &v * v.transpose();
        }
        Objective {
            value,
            gradient,
            neg_hessian,
        }
    }
}

/// Maximum pseudolikelihood estimate, fitted by Fisher scoring on the
/// conditional edge logits.
pub fn mple(graph: &MultilevelGraph, model: &Model, start: Option<&[f64]>) -> Result<ParameterVector> {
    let data = PseudoData::new(graph, model)?;
    let edges = graph.edge_count();
    if edges == 0 || edges == graph.dyad_count() {
        return Err(Error::Boundary(format!(
            "{edges} of {} dyads are edges; the edge parameter diverges",
            graph.dyad_count()
        )));
    }
    let theta0 = start.map(<[f64]>::to_vec).unwrap_or_else(|| default_start(model));
    model.check_domain(&theta0)?;
    let settings = NewtonSettings {
        max_iter: 500,
        grad_tol: 1e-8 * graph.dyad_count() as f64,
        step_tol: 1e-9,
        max_step: 2.0,
        ball: None,
    };
    let out = maximize(
        DVector::from_vec(theta0),
        &settings,
        &|t| model.in_domain(t),
        &mut |t| Ok(data.evaluate(model, t)),
    )?;
    let theta = out.theta.as_slice().to_vec();
    if theta.iter().any(|x| x.abs() > DIVERGENCE_LIMIT) || !out.converged {
        return Err(Error::Boundary(format!(
            "pseudolikelihood maximization diverged or stalled at {theta:?}"
        )));
    }
    Ok(ParameterVector(theta))
}

/// Monte Carlo approximation of the loglikelihood around a fixed reference
/// parameter and sample.
pub struct McLikelihood<'a> {
    model: &'a Model,
    sizes: Vec<usize>,
    observed: &'a StatisticVector,
    batch: &'a SampleBatch,
    theta_ref: Vec<f64>,
    eta_ref: BTreeMap<usize, Vec<f64>>,
    min_ess_fraction: f64,
}

/// Per-evaluation summary beyond the objective itself.
#[derive(Clone, Debug)]
pub struct McEvaluation {
    pub objective: Objective,
    /// Fisher-type information `sum_k J_k^T Cov_w(s_k) J_k`.
    pub info: DMatrix<f64>,
    /// `sum_k info_k / ESS_k`: covariance of the score's Monte Carlo error.
    pub mc_score_cov: DMatrix<f64>,
    pub min_ess: f64,
}

impl<'a> McLikelihood<'a> {
    pub fn new(
        model: &'a Model,
        sizes: &[usize],
        theta_ref: &[f64],
        observed: &'a StatisticVector,
        batch: &'a SampleBatch,
    ) -> Result<Self> {
        model.check_domain(theta_ref)?;
        if batch.neighborhoods.len() != sizes.len() || observed.per_neighborhood.len() != sizes.len() {
            return Err(Error::Estimation("batch, statistics and graph disagree on K".into()));
        }
        let mut eta_ref = BTreeMap::new();
        for &n in sizes {
            eta_ref
                .entry(n)
                .or_insert_with(|| model.eta_unchecked(theta_ref, n));
        }
        Ok(McLikelihood {
            model,
            sizes: sizes.to_vec(),
            observed,
            batch,
            theta_ref: theta_ref.to_vec(),
            eta_ref,
            min_ess_fraction: 0.0,
        })
    }

    pub fn with_min_ess_fraction(mut self, f: f64) -> Self {
        self.min_ess_fraction = f;
        self
    }

    pub fn theta_ref(&self) -> &[f64] {
        &self.theta_ref
    }

    fn deta(&self, theta: &[f64], cache: &mut BTreeMap<usize, Vec<f64>>, n: usize) -> Vec<f64> {
        cache
            .entry(n)
            .or_insert_with(|| {
                self.model
                    .eta_unchecked(theta, n)
                    .iter()
                    .zip(&self.eta_ref[&n])
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .clone()
    }

    /// `sum_k [q(x_k) - log mean_m exp q(X_k^(m))]`.
    pub fn loglik_ratio(&self, theta: &[f64]) -> Result<f64> {
        self.model.check_domain(theta)?;
        let mut cache = BTreeMap::new();
        let mut total = 0.0;
        for (k, &n) in self.sizes.iter().enumerate() {
            let de = self.deta(theta, &mut cache, n);
            let draws = &self.batch.neighborhoods[k];
            let q_obs = dot(&de, &self.observed.per_neighborhood[k]);
            let qs: Vec<f64> = draws.draws().map(|s| dot(&de, s)).collect();
            total += q_obs - log_mean_exp(&qs);
        }
        Ok(total)
    }

    /// Value, importance-weighted score, negated Hessian and information.
    pub fn evaluate(&self, theta: &[f64]) -> Result<McEvaluation> {
        self.model.check_domain(theta)?;
        let q = self.model.dim();
        let mut cache = BTreeMap::new();
        let mut jac_cache: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();
        let mut value = 0.0;
        let mut gradient = DVector::zeros(q);
        let mut info = DMatrix::zeros(q, q);
        let mut mc_score_cov = DMatrix::zeros(q, q);
        let mut curvature = DMatrix::zeros(q, q);
        let mut min_ess = f64::INFINITY;
        for (k, &n) in self.sizes.iter().enumerate() {
            let de = self.deta(theta, &mut cache, n);
            let jac = jac_cache
                .entry(n)
                .or_insert_with(|| self.model.jacobian_unchecked(theta, n));
            let draws = &self.batch.neighborhoods[k];
            let m = draws.n_draws();
            let obs = &self.observed.per_neighborhood[k];
            let qs: Vec<f64> = draws.draws().map(|s| dot(&de, s)).collect();
            let lme = log_mean_exp(&qs);
            value += dot(&de, obs) - lme;
            let w = normalized_weights(&qs);
            let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
            min_ess = min_ess.min(ess);
            if ess < self.min_ess_fraction * m as f64 {
                return Err(Error::LowEss {
                    ess,
                    min: self.min_ess_fraction * m as f64,
                });
            }
            let dim = draws.dim;
            let mut mean = vec![0.0; dim];
            for (wm, s) in w.iter().zip(draws.draws()) {
                for (a, x) in mean.iter_mut().zip(s) {
                    *a += wm * x;
                }
            }
            let resid: Vec<f64> = obs.iter().zip(&mean).map(|(o, e)| o - e).collect();
            gradient += jac.transpose() * DVector::from_column_slice(&resid);
            // covariance in parameter space: u_m = J^T (s_m - mean)
            let mut cov_k = DMatrix::zeros(q, q);
            for (wm, s) in w.iter().zip(draws.draws()) {
                let c: Vec<f64> = s.iter().zip(&mean).map(|(x, e)| x - e).collect();
                let u = jac.transpose() * DVector::from_column_slice(&c);
                cov_k += *wm * &u * u.transpose();
            }
            mc_score_cov += &cov_k / ess;
            info += cov_k;
            if self.model.is_curved() {
                curvature += self.model.eta_curvature(theta, n, &resid);
            }
        }
        Ok(McEvaluation {
            objective: Objective {
                value,
                gradient,
                neg_hessian: &info - &curvature,
            },
            info,
            mc_score_cov,
            min_ess,
        })
    }

    /// Score and information at `theta`.
    pub fn score_info(&self, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let e = self.evaluate(theta)?;
        Ok((e.objective.gradient, e.info))
    }

    /// Per-parameter totals `sum_k J_k^T s_k` of the observed graph and of
    /// every draw, with `J_k` taken at the reference parameter.
    fn projected_statistics(&self) -> (DVector<f64>, Vec<DVector<f64>>) {
        let q = self.model.dim();
        let m = self.batch.n_draws();
        let mut obs = DVector::zeros(q);
        let mut draws = vec![DVector::zeros(q); m];
        let mut jac_cache: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();
        for (k, &n) in self.sizes.iter().enumerate() {
            let jt = jac_cache
                .entry(n)
                .or_insert_with(|| self.model.jacobian_unchecked(&self.theta_ref, n).transpose());
            obs += &*jt * DVector::from_column_slice(&self.observed.per_neighborhood[k]);
            for (acc, s) in draws.iter_mut().zip(self.batch.neighborhoods[k].draws()) {
                *acc += &*jt * DVector::from_column_slice(s);
            }
        }
        (obs, draws)
    }

    /// Whether the observed statistic falls strictly outside the sampled
    /// range in any parameter coordinate.
    pub fn outside_hull(&self) -> bool {
        let (obs, draws) = self.projected_statistics();
        (0..self.model.dim()).any(|c| {
            let lo = draws.iter().map(|d| d[c]).fold(f64::INFINITY, f64::min);
            let hi = draws.iter().map(|d| d[c]).fold(f64::NEG_INFINITY, f64::max);
            obs[c] < lo || obs[c] > hi
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(mean(exp(xs)))`, shifted by the maximum.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() / xs.len() as f64).ln()
}

fn normalized_weights(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Monte Carlo loglikelihood ratio of `theta` relative to the reference the
/// batch was drawn at.
pub fn mc_loglik_ratio(
    model: &Model,
    theta: &[f64],
    theta_ref: &[f64],
    sizes: &[usize],
    observed: &StatisticVector,
    batch: &SampleBatch,
) -> Result<f64> {
    McLikelihood::new(model, sizes, theta_ref, observed, batch)?.loglik_ratio(theta)
}

/// Importance-weighted score and information; refuses when the effective
/// sample size of any neighborhood drops below `min_ess_fraction` of the draws.
pub fn mc_score_info(
    model: &Model,
    theta: &[f64],
    theta_ref: &[f64],
    sizes: &[usize],
    observed: &StatisticVector,
    batch: &SampleBatch,
    min_ess_fraction: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    McLikelihood::new(model, sizes, theta_ref, observed, batch)?
        .with_min_ess_fraction(min_ess_fraction)
        .score_info(theta)
}

fn mc_standard_errors(eval: &McEvaluation) -> Vec<f64> {
    let q = eval.info.nrows();
    let Some(inv) = eval.info.clone().try_inverse() else {
        return vec![f64::INFINITY; q];
    };
    let cov = &inv * &eval.mc_score_cov * &inv;
    (0..q).map(|i| cov[(i, i)].max(0.0).sqrt()).collect()
}

/// Monte Carlo maximum likelihood estimation.
///
/// Each outer iteration samples every neighborhood at the current
/// reference parameter (chains start from the observed graph), then runs
/// Newton iterations on the Monte Carlo loglikelihood ratio inside a ball of
/// radius `trust_radius`. The fit is converged once the inner maximum is
/// interior (score per dyad below `tol_score`, final inner step below
/// `tol_step`) and the outer move is within `mc_tolerance_factor` Monte
/// Carlo standard errors (or below `tol_step`).
pub fn mcmle(graph: &MultilevelGraph, model: &Model, config: &EstimatorConfig) -> Result<EstimateResult> {
    config.validate()?;
    model.terms().validate(graph)?;
    let observed = compute_stats(graph, model.terms())?;
    let sizes = graph.sizes();
    let dyad_total = graph.dyad_count().max(1) as f64;
    let mut theta_ref = match &config.start {
        Some(s) => {
            model.check_domain(s)?;
            s.clone()
        }
        None => mple(graph, model, None)?.0,
    };
    let mut trace = Vec::new();
    let mut hull_run = 0;
    for t in 0..config.max_outer {
        let batch = sample(
            model,
            &theta_ref,
            graph,
            &config.sampler(derive_seed(config.seed, &[t as u64])),
            Start::Observed,
        )?;
        let lik = McLikelihood::new(model, &sizes, &theta_ref, &observed, &batch)?
            .with_min_ess_fraction(config.min_ess_fraction);
        let outside = lik.outside_hull();
        hull_run = if outside { hull_run + 1 } else { 0 };

        let settings = NewtonSettings {
            max_iter: config.max_inner,
            grad_tol: config.tol_score * dyad_total,
            step_tol: config.tol_step,
            max_step: config.trust_radius,
            ball: Some((DVector::from_column_slice(&theta_ref), config.trust_radius)),
        };
        let inner = maximize(
            DVector::from_column_slice(&theta_ref),
            &settings,
            &|x| model.in_domain(x),
            &mut |x| lik.evaluate(x).map(|e| e.objective),
        )?;
        let theta_new = inner.theta.as_slice().to_vec();
        let eval = lik.evaluate(&theta_new)?;
        let mc_se = mc_standard_errors(&eval);
        let mc_se_norm = mc_se.iter().map(|x| x * x).sum::<f64>().sqrt();
        let step_norm = theta_new
            .iter()
            .zip(&theta_ref)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let score_norm = eval.objective.gradient.norm() / dyad_total;
        trace.push(IterationRecord {
            iteration: t + 1,
            theta_ref: theta_ref.clone(),
            theta: theta_new.clone(),
            step_norm,
            score_norm,
            mc_se_norm,
            min_ess: eval.min_ess,
            outside_hull: outside,
        });
        let finish = |status: Status, theta: Vec<f64>, trace: Vec<IterationRecord>| EstimateResult {
            theta: ParameterVector(theta),
            names: model.names().to_vec(),
            iterations: t + 1,
            score_norm,
            last_step_norm: inner.last_step,
            status,
            trace,
            mc_se: mc_se.clone(),
            se: None,
        };
        if hull_run >= config.hull_patience
            || theta_new.iter().any(|x| x.abs() > DIVERGENCE_LIMIT)
        {
            return Ok(finish(Status::BoundarySuspect, theta_new, trace));
        }
        let interior = inner.converged
            && score_norm < config.tol_score
            && inner.last_step < config.tol_step;
        let settled = step_norm < config.tol_step.max(config.mc_tolerance_factor * mc_se_norm);
        if interior && settled && !outside {
            return Ok(finish(Status::Converged, theta_new, trace));
        }
        if t + 1 == config.max_outer {
            return Ok(finish(Status::MaxIterations, theta_new, trace));
        }
        theta_ref = theta_new;
    }
    unreachable!("max_outer >= 1")
}

/// Parametric bootstrap output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub se: Vec<f64>,
    /// Estimate of each replicate, `None` when that fit failed.
    pub estimates: Vec<Option<Vec<f64>>>,
    pub failures: usize,
}

/// Largest tolerated fraction of failed replicate fits.
pub const MAX_BOOTSTRAP_FAILURE: f64 = 0.2;

/// Standard errors from `replicates` datasets simulated at `theta_hat` on the
/// node layout of `layout` and re-estimated with `estimator`.
pub fn bootstrap_se(
    model: &Model,
    theta_hat: &[f64],
    layout: &MultilevelGraph,
    replicates: usize,
    simulation: &SamplerConfig,
    estimator: &EstimatorConfig,
    seed: u64,
) -> Result<BootstrapResult> {
    if replicates < 2 {
        return Err(Error::Config(
            "bootstrap needs at least 2 replicates for a standard deviation".into(),
        ));
    }
    model.check_domain(theta_hat)?;
    let estimates: Vec<Option<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let sim_cfg = SamplerConfig {
                seed: derive_seed(seed, &[b as u64, 0]),
                ..simulation.clone()
            };
            let est_cfg = EstimatorConfig {
                seed: derive_seed(seed, &[b as u64, 1]),
                ..estimator.clone()
            };
            let data = crate::sampler::simulate_graph(model, theta_hat, layout, &sim_cfg).ok()?;
            match mcmle(&data, model, &est_cfg) {
                Ok(r) if r.status == Status::Converged => Some(r.theta.0),
                _ => None,
            }
        })
        .collect();
    let ok: Vec<&Vec<f64>> = estimates.iter().flatten().collect();
    let failures = replicates - ok.len();
    if failures as f64 > MAX_BOOTSTRAP_FAILURE * replicates as f64 {
        return Err(Error::Estimation(format!(
            "{failures} of {replicates} bootstrap fits failed"
        )));
    }
    if ok.len() < 2 {
        return Err(Error::Estimation("fewer than 2 successful bootstrap fits".into()));
    }
    let q = model.dim();
    let se = (0..q)
        .map(|c| {
            let xs: Vec<f64> = ok.iter().map(|e| e[c]).collect();
            sample_sd(&xs)
        })
        .collect();
    Ok(BootstrapResult {
        se,
        estimates,
        failures,
    })
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// One Newton step from `theta` using an information matrix; exposed for diagnostics.
pub fn newton_direction(gradient: &DVector<f64>, info: &DMatrix<f64>) -> Option<DVector<f64>> {
    damped_solve(info, gradient)
}
