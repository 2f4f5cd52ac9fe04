//! Exact reference computations by full enumeration of within-neighborhood
//! graphs, plus closed forms for Bernoulli graphs. Used as test oracles.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{dyads, Adjacency, MultilevelGraph};
use crate::model::{logistic, Model, ParameterVector};
use crate::optim::{maximize, NewtonSettings, Objective};
use crate::statistics::{compute_stats, BoundTerms};

/// Maximum number of enumerated states per neighborhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_states: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_states: 1 << 24,
        }
    }
}

impl EnumerationBudget {
    pub fn check(&self, n: usize, directed: bool) -> Result<usize> {
        let d = dyads(n, directed).len();
        let states = 1u128 << d.min(127);
        if d > 64 || states > self.max_states as u128 {
            return Err(Error::Budget {
                states,
                budget: self.max_states,
            });
        }
        Ok(d)
    }
}

/// The distinct statistic vectors of one neighborhood with their multiplicities.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub dim: usize,
    pub support: Vec<Vec<f64>>,
    pub log_counts: Vec<f64>,
}

/// `psi`, mean and covariance of the statistics under natural parameters `eta`.
#[derive(Clone, Debug)]
pub struct Moments {
    pub psi: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Enumeration {
    /// Walks all `2^d` states in Gray-code order, updating statistics with one
    /// change statistic per step.
    pub fn new(bound: &BoundTerms, budget: EnumerationBudget) -> Result<Self> {
        let n = bound.size();
        let directed = bound.is_directed();
        let d = budget.check(n, directed)?;
        let pairs = dyads(n, directed);
        let dim = bound.dim();
        let mut adj = Adjacency::empty(n, directed);
        let mut stats = vec![0i64; dim];
        let mut counts: HashMap<Vec<i64>, u64> = HashMap::new();
        counts.insert(stats.clone(), 1);
        for t in 1u64..(1u64 << d) {
            let (i, j) = pairs[t.trailing_zeros() as usize];
            let sign = if adj.has(i, j) { -1 } else { 1 };
            bound.for_each_change(&adj, i, j, |c, v| stats[c] += sign * v as i64);
            adj.toggle(i, j);
            match counts.get_mut(stats.as_slice()) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(stats.clone(), 1);
                }
            }
        }
        let ordered: BTreeMap<Vec<i64>, u64> = counts.into_iter().collect();
        let (support, log_counts) = ordered
            .into_iter()
            .map(|(s, c)| (s.into_iter().map(|x| x as f64).collect(), (c as f64).ln()))
            .unzip();
        Ok(Enumeration {
            dim,
            support,
            log_counts,
        })
    }

    fn log_weights(&self, eta: &[f64]) -> Vec<f64> {
        self.support
            .iter()
            .zip(&self.log_counts)
            .map(|(s, lc)| lc + s.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn psi(&self, eta: &[f64]) -> f64 {
        log_sum_exp(&self.log_weights(eta))
    }

    pub fn moments(&self, eta: &[f64]) -> Moments {
        let lw = self.log_weights(eta);
        let psi = log_sum_exp(&lw);
        let mut mean = DVector::zeros(self.dim);
        for (s, l) in self.support.iter().zip(&lw) {
            let p = (l - psi).exp();
            for (m, x) in mean.iter_mut().zip(s) {
                *m += p * x;
            }
        }
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        for (s, l) in self.support.iter().zip(&lw) {
            let p = (l - psi).exp();
            let c = DVector::from_iterator(self.dim, s.iter().zip(mean.iter()).map(|(x, m)| x - m));
            cov += p * &c * c.transpose();
        }
        Moments { psi, mean, cov }
    }

    /// Componentwise range of the support.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for s in &self.support {
            for c in 0..self.dim {
                lo[c] = lo[c].min(s[c]);
                hi[c] = hi[c].max(s[c]);
            }
        }
        (lo, hi)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact log-normalizer of neighborhood `k`.
pub fn exact_psi(model: &Model, theta: &[f64], graph: &MultilevelGraph, k: usize) -> Result<f64> {
    exact_psi_with(model, theta, graph, k, EnumerationBudget::default())
}

pub fn exact_psi_with(
    model: &Model,
    theta: &[f64],
    graph: &MultilevelGraph,
    k: usize,
    budget: EnumerationBudget,
) -> Result<f64> {
    let eta = model.eta(theta, graph.neighborhood(k).len())?;
    let bound = model.terms().bind(graph, k)?;
    Ok(Enumeration::new(&bound, budget)?.psi(&eta))
}

/// Exact probability of every state of neighborhood `k`, indexed by dyad
/// bitmask in [`dyads`] order.
pub fn exact_state_probabilities(
    model: &Model,
    theta: &[f64],
    graph: &MultilevelGraph,
    k: usize,
) -> Result<Vec<f64>> {
    let nb = graph.neighborhood(k);
    let eta = model.eta(theta, nb.len())?;
    let bound = model.terms().bind(graph, k)?;
    let directed = graph.is_directed();
    let d = EnumerationBudget { max_states: 1 << 20 }.check(nb.len(), directed)?;
    let pairs = dyads(nb.len(), directed);
    let logp: Vec<f64> = (0u64..(1 << d))
        .map(|mask| {
            let mut adj = Adjacency::empty(nb.len(), directed);
            for (b, &(i, j)) in pairs.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    adj.toggle(i, j);
                }
            }
            bound.stats(&adj).iter().zip(&eta).map(|(s, e)| s * e).sum()
        })
        .collect();
    let psi = log_sum_exp(&logp);
    Ok(logp.into_iter().map(|l| (l - psi).exp()).collect())
}

/// Exact loglikelihood of a whole multilevel graph, with enumeration shared
/// between neighborhoods that bind to identical terms.
pub struct ExactLikelihood<'a> {
    model: &'a Model,
    sizes: Vec<usize>,
    observed: Vec<Vec<f64>>,
    enum_of: Vec<usize>,
    enums: Vec<Enumeration>,
}

impl<'a> ExactLikelihood<'a> {
    pub fn new(model: &'a Model, graph: &MultilevelGraph, budget: EnumerationBudget) -> Result<Self> {
        let observed = compute_stats(graph, model.terms())?.per_neighborhood;
        let mut seen: HashMap<BoundTerms, usize> = HashMap::new();
        let mut enums = Vec::new();
        let mut enum_of = Vec::with_capacity(graph.num_neighborhoods());
        for k in 0..graph.num_neighborhoods() {
            let bound = model.terms().bind(graph, k)?;
            let idx = match seen.get(&bound) {
                Some(&i) => i,
                None => {
                    enums.push(Enumeration::new(&bound, budget)?);
                    seen.insert(bound, enums.len() - 1);
                    enums.len() - 1
                }
            };
            enum_of.push(idx);
        }
        Ok(ExactLikelihood {
            model,
            sizes: graph.sizes(),
            observed,
            enum_of,
            enums,
        })
    }

    /// Loglikelihood, score and negated Hessian at `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<Objective> {
        self.model.check_domain(theta)?;
        let q = self.model.dim();
        let mut value = 0.0;
        let mut gradient = DVector::zeros(q);
        let mut neg_hessian = DMatrix::zeros(q, q);
        for (k, &n) in self.sizes.iter().enumerate() {
            let eta = self.model.eta_unchecked(theta, n);
            let jac = self.model.jacobian_unchecked(theta, n);
            let mom = self.enums[self.enum_of[k]].moments(&eta);
            let s = DVector::from_column_slice(&self.observed[k]);
            value += s.dot(&DVector::from_column_slice(&eta)) - mom.psi;
            let resid = &s - &mom.mean;
            gradient += jac.transpose() * &resid;
            neg_hessian += jac.transpose() * &mom.cov * &jac;
            if self.model.is_curved() {
                neg_hessian -= self.model.eta_curvature(theta, n, resid.as_slice());
            }
        }
        Ok(Objective {
            value,
            gradient,
            neg_hessian,
        })
    }

    /// Screens linear models for an observed sufficient statistic on the
    /// boundary of its range, where no MLE exists.
    fn boundary_screen(&self) -> Result<()> {
        if self.model.is_curved() {
            return Ok(());
        }
        let q = self.model.dim();
        let theta = vec![0.0; q];
        let (mut obs, mut lo, mut hi) = (vec![0.0; q], vec![0.0; q], vec![0.0; q]);
        for (k, &n) in self.sizes.iter().enumerate() {
            let jac = self.model.jacobian_unchecked(&theta, n);
            let e = &self.enums[self.enum_of[k]];
            let t = jac.transpose() * DVector::from_column_slice(&self.observed[k]);
            let mut klo = vec![f64::INFINITY; q];
            let mut khi = vec![f64::NEG_INFINITY; q];
            for s in &e.support {
                let u = jac.transpose() * DVector::from_column_slice(s);
                for c in 0..q {
                    klo[c] = klo[c].min(u[c]);
                    khi[c] = khi[c].max(u[c]);
                }
            }
            for c in 0..q {
                obs[c] += t[c];
                lo[c] += klo[c];
                hi[c] += khi[c];
            }
        }
        for c in 0..q {
            if obs[c] <= lo[c] || obs[c] >= hi[c] {
                return Err(Error::Boundary(format!(
                    "observed `{}` statistic {} at the edge of its range [{}, {}]",
                    self.model.names()[c],
                    obs[c],
                    lo[c],
                    hi[c]
                )));
            }
        }
        Ok(())
    }
}

/// Largest |theta| coordinate accepted as an interior estimate.
const DIVERGENCE_LIMIT: f64 = 50.0;

/// Exact maximum likelihood estimate by Newton iterations on the enumerated likelihood.
pub fn exact_mle(
    graph: &MultilevelGraph,
    model: &Model,
    start: Option<&[f64]>,
) -> Result<ParameterVector> {
    let lik = ExactLikelihood::new(model, graph, EnumerationBudget::default())?;
    lik.boundary_screen()?;
    let theta0 = match start {
        Some(s) => s.to_vec(),
        None => default_start(model),
    };
    model.check_domain(&theta0)?;
    let settings = NewtonSettings {
        max_iter: 500,
        grad_tol: 1e-9,
        step_tol: 1e-9,
        max_step: 1.0,
        ball: None,
    };
    let out = maximize(
        DVector::from_vec(theta0),
        &settings,
        &|t| model.in_domain(t) && t.iter().all(|x| x.abs() < DIVERGENCE_LIMIT),
        &mut |t| lik.evaluate(t),
    )?;
    let theta = out.theta.as_slice().to_vec();
    if !out.converged || out.gradient.norm() > 1e-8 {
        return Err(Error::Boundary(format!(
            "exact likelihood maximization did not converge (|grad| = {:.3e}, theta = {:?})",
            out.gradient.norm(),
            theta
        )));
    }
    Ok(ParameterVector(theta))
}

/// Zeros, except decay coordinates which start at 1.
pub fn default_start(model: &Model) -> Vec<f64> {
    let mut t = vec![0.0; model.dim()];
    for d in model.decay_indices() {
        t[d] = 1.0;
    }
    t
}

/// Expected number of transitive edges of a Bernoulli(`p`) graph on `n`
/// nodes: `p (1 - (1 - p^2)^(n-2)) C(n, 2)`.
pub fn bernoulli_transitive_mean(p: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Config("transitive mean needs n >= 3".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("probability {p} outside [0, 1]")));
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(p * (1.0 - (1.0 - p * p).powi(n as i32 - 2)) * pairs)
}

/// Envelope `[logistic(t1), logistic(t1 + t2 (2n - 3))]` of every full
/// conditional edge probability in the edges + transitive-edges model.
pub fn conditional_bounds(theta1: f64, theta2: f64, n: usize) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::Config("conditional bounds need n >= 3".into()));
    }
    if theta2 < 0.0 {
        return Err(Error::Config("conditional bounds need theta2 >= 0".into()));
    }
    Ok((
        logistic(theta1),
        logistic(theta1 + theta2 * (2 * n - 3) as f64),
    ))
}
