//! Parameter maps `theta -> eta_k(theta)`, unnormalized log densities and
//! full-conditional edge logits.

use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultilevelGraph;
use crate::statistics::{compute_stats, Term, TermSet};

/// Smallest admissible decay of a geometrically weighted term (open bound).
pub const DECAY_MIN: f64 = 0.5 + 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(pub Vec<f64>);

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        ParameterVector(v)
    }
}

/// Closed-open size intervals `[t_0, t_1), [t_1, t_2), ...` on `|A_k|`;
/// bucket 0 holds every size below the first threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBuckets {
    thresholds: Vec<usize>,
}

impl Default for SizeBuckets {
    /// Small (<= 17), medium (18..=24) and large (>= 25) neighborhoods.
    fn default() -> Self {
        SizeBuckets {
            thresholds: vec![18, 25],
        }
    }
}

impl SizeBuckets {
    pub fn new(thresholds: Vec<usize>) -> Result<Self> {
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Model(
                "bucket thresholds must be strictly increasing".into(),
            ));
        }
        Ok(SizeBuckets { thresholds })
    }

    pub fn count(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn bucket(&self, n: usize) -> usize {
        self.thresholds.iter().take_while(|&&t| t <= n).count()
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.thresholds
    }
}

/// How one term's natural coefficients depend on `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TermMap {
    Identity {
        index: usize,
    },
    /// `theta[base] + theta[deviations[bucket(n)]]`; `None` means no deviation.
    SizeBucketDeviation {
        base: usize,
        deviations: Vec<Option<usize>>,
    },
    /// `eta_i = a * b * (1 - (1 - 1/b)^i)` for `i = 1..=n-2`, with scale
    /// `a = theta[scale]` and decay `b = theta[decay] > 1/2`.
    GeometricWeights { scale: usize, decay: usize },
}

/// A term set together with its parameter map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    terms: TermSet,
    maps: Vec<TermMap>,
    buckets: SizeBuckets,
    names: Vec<String>,
}

impl Model {
    pub fn new(
        terms: TermSet,
        maps: Vec<TermMap>,
        buckets: SizeBuckets,
        names: Vec<String>,
    ) -> Result<Self> {
        if terms.len() != maps.len() {
            return Err(Error::Model(format!(
                "{} terms but {} maps",
                terms.len(),
                maps.len()
            )));
        }
        let q = names.len();
        let mut used = vec![false; q];
        let mut mark = |i: usize| -> Result<()> {
            if i >= q {
                return Err(Error::Model(format!("parameter index {i} out of range")));
            }
            used[i] = true;
            Ok(())
        };
        for (term, map) in terms.terms().iter().zip(&maps) {
            match map {
                TermMap::Identity { index } => {
                    if term.is_vector() {
                        return Err(Error::Model(format!(
                            "term `{term}` needs a geometric map"
                        )));
                    }
                    mark(*index)?;
                }
                TermMap::SizeBucketDeviation { base, deviations } => {
                    if term.is_vector() {
                        return Err(Error::Model(format!(
                            "term `{term}` needs a geometric map"
                        )));
                    }
                    if deviations.len() != buckets.count() {
                        return Err(Error::Model(format!(
                            "term `{term}` has {} deviation slots for {} buckets",
                            deviations.len(),
                            buckets.count()
                        )));
                    }
                    mark(*base)?;
                    for d in deviations.iter().flatten() {
                        mark(*d)?;
                    }
                }
                TermMap::GeometricWeights { scale, decay } => {
                    if *term != Term::Esp {
                        return Err(Error::Model(format!(
                            "geometric weights apply to esp, not `{term}`"
                        )));
                    }
                    if scale == decay {
                        return Err(Error::Model("scale and decay must differ".into()));
                    }
                    mark(*scale)?;
                    mark(*decay)?;
                }
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Model(format!("parameter `{}` is unused", names[i])));
        }
        Ok(Model {
            terms,
            maps,
            buckets,
            names,
        })
    }

    /// Canonical model with one free coefficient per scalar term.
    pub fn canonical(terms: TermSet) -> Result<Self> {
        let names = terms.terms().iter().map(|t| t.to_string()).collect();
        let maps = (0..terms.len())
            .map(|index| TermMap::Identity { index })
            .collect();
        Self::new(terms, maps, SizeBuckets::default(), names)
    }

    /// Edges plus GWESP with parameters `(edges, gwesp.scale, gwesp.decay)`.
    pub fn edges_gwesp() -> Self {
        Self::new(
            TermSet::new(vec![Term::Edges, Term::Esp]),
            vec![
                TermMap::Identity { index: 0 },
                TermMap::GeometricWeights { scale: 1, decay: 2 },
            ],
            SizeBuckets::default(),
            vec!["edges".into(), "gwesp.scale".into(), "gwesp.decay".into()],
        )
        .expect("static model is valid")
    }

    pub fn terms(&self) -> &TermSet {
        &self.terms
    }

    pub fn maps(&self) -> &[TermMap] {
        &self.maps
    }

    pub fn buckets(&self) -> &SizeBuckets {
        &self.buckets
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Parameter dimension `q`.
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn is_curved(&self) -> bool {
        self.maps
            .iter()
            .any(|m| matches!(m, TermMap::GeometricWeights { .. }))
    }

    pub fn decay_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.maps.iter().filter_map(|m| match m {
            TermMap::GeometricWeights { decay, .. } => Some(*decay),
            _ => None,
        })
    }

    pub fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().all(|x| x.is_finite())
            && self.decay_indices().all(|d| theta[d] > DECAY_MIN)
    }

    pub fn check_domain(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Domain(format!(
                "expected {} parameters, got {}",
                self.dim(),
                theta.len()
            )));
        }
        if let Some(i) = theta.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("`{}` is not finite", self.names[i])));
        }
        for d in self.decay_indices() {
            if theta[d] <= DECAY_MIN {
                return Err(Error::Domain(format!(
                    "decay `{}` = {} must exceed 1/2",
                    self.names[d], theta[d]
                )));
            }
        }
        Ok(())
    }

    fn linear_coef(&self, map: &TermMap, theta: &[f64], n: usize) -> f64 {
        match map {
            TermMap::Identity { index } => theta[*index],
            TermMap::SizeBucketDeviation { base, deviations } => {
                theta[*base]
                    + deviations[self.buckets.bucket(n)]
                        .map(|d| theta[d])
                        .unwrap_or(0.0)
            }
            TermMap::GeometricWeights { .. } => unreachable!("vector map"),
        }
    }

    /// Natural parameters of a neighborhood with `n` nodes, without the domain check.
    pub(crate) fn eta_unchecked(&self, theta: &[f64], n: usize) -> Vec<f64> {
        let mut eta = Vec::with_capacity(self.terms.dim(n));
        for (term, map) in self.terms.terms().iter().zip(&self.maps) {
            match map {
                TermMap::GeometricWeights { scale, decay } => {
                    let (a, b) = (theta[*scale], theta[*decay]);
                    let r = 1.0 - 1.0 / b;
                    let mut pow = 1.0;
                    for _ in 0..term.width(n) {
                        pow *= r;
                        eta.push(a * b * (1.0 - pow));
                    }
                }
                _ => eta.push(self.linear_coef(map, theta, n)),
            }
        }
        eta
    }

    /// `eta_k(theta)` for a neighborhood with `n` nodes.
    pub fn eta(&self, theta: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_domain(theta)?;
        Ok(self.eta_unchecked(theta, n))
    }

    /// Jacobian of `eta_k` with respect to `theta`: `dim_k x q`.
    pub fn eta_gradient(&self, theta: &[f64], n: usize) -> Result<DMatrix<f64>> {
        self.check_domain(theta)?;
        Ok(self.jacobian_unchecked(theta, n))
    }

    pub(crate) fn jacobian_unchecked(&self, theta: &[f64], n: usize) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.terms.dim(n), self.dim());
        let mut row = 0;
        for (term, map) in self.terms.terms().iter().zip(&self.maps) {
            match map {
                TermMap::Identity { index } => {
                    jac[(row, *index)] = 1.0;
                    row += 1;
                }
                TermMap::SizeBucketDeviation { base, deviations } => {
                    jac[(row, *base)] = 1.0;
                    if let Some(d) = deviations[self.buckets.bucket(n)] {
                        jac[(row, d)] += 1.0;
                    }
                    row += 1;
                }
                TermMap::GeometricWeights { scale, decay } => {
                    let (a, b) = (theta[*scale], theta[*decay]);
                    let r = 1.0 - 1.0 / b;
                    // r^(i-1) and r^i
                    let mut prev = 1.0;
                    for i in 1..=term.width(n) {
                        let cur = prev * r;
                        let d_scale = b * (1.0 - cur);
                        let d_decay = 1.0 - cur - (i as f64 / b) * prev;
                        jac[(row, *scale)] = d_scale;
                        jac[(row, *decay)] = a * d_decay;
                        prev = cur;
                        row += 1;
                    }
                }
            }
        }
        jac
    }

    /// `sum_i w_i * Hessian(eta_{k,i})`, the curvature correction of the
    /// loglikelihood Hessian. Zero for linear maps.
    pub fn eta_curvature(&self, theta: &[f64], n: usize, weights: &[f64]) -> DMatrix<f64> {
        let q = self.dim();
        let mut h = DMatrix::zeros(q, q);
        let mut row = 0;
        for (term, map) in self.terms.terms().iter().zip(&self.maps) {
            match map {
                TermMap::GeometricWeights { scale, decay } => {
                    let (a, b) = (theta[*scale], theta[*decay]);
                    let r = 1.0 - 1.0 / b;
                    let (mut pm2, mut pm1) = (0.0, 1.0);
                    let (mut ab, mut bb) = (0.0, 0.0);
                    for i in 1..=term.width(n) {
                        let cur = pm1 * r;
                        let fi = i as f64;
                        let w = weights[row];
                        ab += w * (1.0 - cur - (fi / b) * pm1);
                        // d^2/db^2 = -a i (i - 1) r^(i-2) / b^3
                        bb += w * (-a * fi * (fi - 1.0) * pm2 / (b * b * b));
                        pm2 = pm1;
                        pm1 = cur;
                        row += 1;
                    }
                    h[(*scale, *decay)] += ab;
                    h[(*decay, *scale)] += ab;
                    h[(*decay, *decay)] += bb;
                }
                _ => row += term.width(n),
            }
        }
        h
    }
}

/// `sum_k <eta_k(theta), s_k(x_k)>`; the log-normalizer is not included.
pub fn log_unnormalized(model: &Model, theta: &[f64], graph: &MultilevelGraph) -> Result<f64> {
    model.check_domain(theta)?;
    let stats = compute_stats(graph, model.terms())?;
    Ok(graph
        .neighborhoods()
        .iter()
        .zip(&stats.per_neighborhood)
        .map(|(nb, s)| {
            model
                .eta_unchecked(theta, nb.len())
                .iter()
                .zip(s)
                .map(|(e, x)| e * x)
                .sum::<f64>()
        })
        .sum())
}

/// Logit of `P(X_ij = 1 | rest)`, i.e. `<eta_k(theta), Delta_ij s_k>`.
pub fn conditional_edge_logit(
    model: &Model,
    theta: &[f64],
    graph: &MultilevelGraph,
    tail: &str,
    head: &str,
) -> Result<f64> {
    model.check_domain(theta)?;
    let (k, i, j) = graph.resolve_dyad(tail, head)?;
    let bound = model.terms().bind(graph, k)?;
    let nb = graph.neighborhood(k);
    let eta = model.eta_unchecked(theta, nb.len());
    Ok(bound.change_dot(&nb.adjacency, i, j, &eta))
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gwesp() -> Model {
        Model::edges_gwesp()
    }

    fn bucket_model() -> Model {
        Model::new(
            TermSet::new(vec![Term::Edges, Term::TransitiveEdges]),
            vec![
                TermMap::SizeBucketDeviation {
                    base: 0,
                    deviations: vec![None, Some(2), Some(4)],
                },
                TermMap::SizeBucketDeviation {
                    base: 1,
                    deviations: vec![None, Some(3), Some(5)],
                },
            ],
            SizeBuckets::default(),
            (1..=6).map(|i| format!("theta{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn geometric_unit_decay_is_flat() {
        let eta = gwesp().eta(&[0.0, 1.0, 1.0], 8).unwrap();
        assert_eq!(eta.len(), 1 + 6);
        assert!(eta[1..].iter().all(|&e| e == 1.0));
    }

    #[test]
    fn geometric_two_two() {
        let eta = gwesp().eta(&[0.0, 2.0, 2.0], 6).unwrap();
        assert_eq!(&eta[1..], &[2.0, 3.0, 3.5, 3.75]);
    }

    #[test]
    fn size_bucket_medium() {
        let m = bucket_model();
        let theta = [-2.0, 0.5, -0.5, 0.1, -0.9, 0.1];
        let eta = m.eta(&theta, 20).unwrap();
        assert!((eta[0] + 2.5).abs() < 1e-12 && (eta[1] - 0.6).abs() < 1e-12);
        assert_eq!(m.eta(&theta, 17).unwrap(), vec![-2.0, 0.5]);
        let large = m.eta(&theta, 25).unwrap();
        assert!((large[0] + 2.9).abs() < 1e-12 && (large[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn buckets_are_closed_open() {
        let b = SizeBuckets::default();
        assert_eq!([17, 18, 24, 25, 33].map(|n| b.bucket(n)), [0, 1, 1, 2, 2]);
        assert!(SizeBuckets::new(vec![5, 5]).is_err());
    }

    #[test]
    fn decay_domain_is_open() {
        let m = gwesp();
        assert!(matches!(m.eta(&[0.0, 1.0, 0.5], 5), Err(Error::Domain(_))));
        assert!(matches!(m.eta(&[0.0, 1.0, 0.5 + 1e-9], 5), Err(Error::Domain(_))));
        assert!(m.eta(&[0.0, 1.0, 0.5 + 1e-6], 5).is_ok());
        assert!(m.eta_gradient(&[0.0, 1.0, 0.2], 5).is_err());
    }

    #[test]
    fn gradient_at_unit_decay() {
        let j = gwesp().eta_gradient(&[0.0, 1.0, 1.0], 6).unwrap();
        assert_eq!(j[(1, 2)], 0.0);
        for i in 2..=4 {
            assert_eq!(j[(i, 2)], 1.0);
        }
    }

    #[test]
    fn identity_gradient_is_selection() {
        let m = Model::canonical(TermSet::new(vec![Term::Edges, Term::TransitiveEdges])).unwrap();
        let j = m.eta_gradient(&[0.3, -0.2], 9).unwrap();
        assert_eq!(j, DMatrix::identity(2, 2));
    }

    #[test]
    fn invalid_models() {
        let t = TermSet::new(vec![Term::Esp]);
        assert!(Model::new(t.clone(), vec![TermMap::Identity { index: 0 }], SizeBuckets::default(), vec!["a".into()]).is_err());
        let t2 = TermSet::new(vec![Term::Edges]);
        assert!(Model::new(t2.clone(), vec![TermMap::Identity { index: 1 }], SizeBuckets::default(), vec!["a".into()]).is_err());
        assert!(Model::new(t2, vec![TermMap::Identity { index: 0 }], SizeBuckets::default(), vec!["a".into(), "b".into()]).is_err());
    }

    #[test]
    fn log_unnormalized_examples() {
        let m = Model::canonical(TermSet::new(vec![Term::Edges])).unwrap();
        let mut g = MultilevelGraph::with_sizes(&[4, 3], false).unwrap();
        assert_eq!(log_unnormalized(&m, &[1.0], &g).unwrap(), 0.0);
        for (a, b) in [("0_0", "0_1"), ("0_1", "0_2"), ("0_2", "0_3")] {
            g.toggle(a, b).unwrap();
        }
        assert_eq!(log_unnormalized(&m, &[1.0], &g).unwrap(), 3.0);
    }

    #[test]
    fn conditional_logits() {
        let m = Model::canonical(TermSet::new(vec![Term::Edges, Term::TransitiveEdges])).unwrap();
        let mut g = MultilevelGraph::with_sizes(&[3], false).unwrap();
        g.toggle("0_0", "0_2").unwrap();
        g.toggle("0_1", "0_2").unwrap();
        assert_eq!(conditional_edge_logit(&m, &[0.7, 0.0], &g, "0_0", "0_1").unwrap(), 0.7);
        assert_eq!(conditional_edge_logit(&m, &[0.0, 1.0], &g, "0_0", "0_1").unwrap(), 3.0);
        assert!(conditional_edge_logit(&m, &[0.0, 1.0], &g, "0_0", "0_0").is_err());
    }

    fn central_diff(m: &Model, theta: &[f64], n: usize, h: f64) -> DMatrix<f64> {
        let d = m.terms().dim(n);
        let mut out = DMatrix::zeros(d, m.dim());
        for c in 0..m.dim() {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[c] += h;
            dn[c] -= h;
            let (eu, ed) = (m.eta(&up, n).unwrap(), m.eta(&dn, n).unwrap());
            for r in 0..d {
                out[(r, c)] = (eu[r] - ed[r]) / (2.0 * h);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(a in -3.0f64..3.0, b in 0.6f64..5.0, e in -2.0f64..2.0, n in 3usize..20) {
            let m = gwesp();
            let theta = [e, a, b];
            let fd = central_diff(&m, &theta, n, 1e-5);
            let an = m.eta_gradient(&theta, n).unwrap();
            prop_assert!((fd - an).amax() < 1e-6);
        }

        #[test]
        fn curvature_matches_jacobian_differences(a in -3.0f64..3.0, b in 0.6f64..5.0, n in 3usize..15, seed in 0u64..1000) {
            let m = gwesp();
            let theta = [0.1, a, b];
            let d = m.terms().dim(n);
            let w: Vec<f64> = (0..d).map(|i| ((seed + i as u64 * 7) % 11) as f64 - 5.0).collect();
            let h = 1e-5;
            let an = m.eta_curvature(&theta, n, &w);
            for c in 0..3 {
                let mut up = theta; up[c] += h;
                let mut dn = theta; dn[c] -= h;
                let gu = m.eta_gradient(&up, n).unwrap().transpose() * nalgebra::DVector::from_column_slice(&w);
                let gd = m.eta_gradient(&dn, n).unwrap().transpose() * nalgebra::DVector::from_column_slice(&w);
                for r in 0..3 {
                    let fd = (gu[r] - gd[r]) / (2.0 * h);
                    prop_assert!((fd - an[(r, c)]).abs() < 1e-4 * (1.0 + an[(r, c)].abs()));
                }
            }
        }

        #[test]
        fn geometric_eta_is_bounded(a in -5.0f64..5.0, b in 0.51f64..10.0, n in 3usize..40) {
            let eta = gwesp().eta(&[0.0, a, b], n).unwrap();
            for e in &eta[1..] {
                prop_assert!(e.abs() <= 2.0 * a.abs() * b + 1e-12);
            }
        }

        #[test]
        fn geometric_eta_monotone(a in 0.0f64..5.0, b in 1.0f64..10.0, n in 3usize..40) {
            let eta = gwesp().eta(&[0.0, a, b], n).unwrap();
            for w in eta[1..].windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }
}
