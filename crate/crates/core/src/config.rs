//! TOML run configuration: the model definition plus settings for the
//! sampler, estimator, goodness-of-fit, bootstrap and experiments.
//!
//! ```toml
//! seed = 7
//! directed = false
//!
//! [model]
//! thresholds = [18, 25]
//!
//! [[model.parameter]]
//! name = "edges"
//! init = -1.0
//!
//! [[model.parameter]]
//! name = "transitive"
//! init = 0.5
//!
//! [[model.term]]
//! kind = "edges"
//! coef = "edges"
//!
//! [[model.term]]
//! kind = "transitive"
//! coef = "transitive"
//! ```
//!
//! Term kinds are `edges`, `mutual`, `nodematch` (with `attribute`),
//! `transitive` and `gwesp` (with `scale` and `decay` instead of `coef`).
//! A scalar term may use `base` and `deviations` (one parameter name per size
//! bucket, `""` for none) instead of `coef`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::gof::GofConfig;
use crate::model::{Model, SizeBuckets, TermMap};
use crate::sampler::SamplerConfig;
use crate::statistics::{Term, TermSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpec {
    pub name: String,
    pub init: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Edges,
    Mutual,
    Nodematch,
    Transitive,
    Gwesp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub kind: TermKind,
    pub attribute: Option<String>,
    pub coef: Option<String>,
    pub base: Option<String>,
    pub deviations: Option<Vec<String>>,
    pub scale: Option<String>,
    pub decay: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub thresholds: Option<Vec<usize>>,
    #[serde(rename = "parameter")]
    pub parameters: Vec<ParameterSpec>,
    #[serde(rename = "term")]
    pub terms: Vec<TermSpec>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        let names: Vec<String> = self.parameters.iter().map(|p| p.name.clone()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Config(format!("parameter `{n}` declared twice")));
            }
        }
        let index = |name: &str| -> Result<usize> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))
        };
        let buckets = match &self.thresholds {
            Some(t) => SizeBuckets::new(t.clone())?,
            None => SizeBuckets::default(),
        };
        let mut terms = Vec::new();
        let mut maps = Vec::new();
        for spec in &self.terms {
            let term = match spec.kind {
                TermKind::Edges => Term::Edges,
                TermKind::Mutual => Term::Mutual,
                TermKind::Transitive => Term::TransitiveEdges,
                TermKind::Gwesp => Term::Esp,
                TermKind::Nodematch => Term::NodeMatch(spec.attribute.clone().ok_or_else(|| {
                    Error::Config("nodematch term needs `attribute`".into())
                })?),
            };
            if spec.kind != TermKind::Nodematch && spec.attribute.is_some() {
                return Err(Error::Config(format!("`attribute` is only valid for nodematch, not `{term}`")));
            }
            let map = match (spec.kind, &spec.coef, &spec.base, &spec.scale, &spec.decay) {
                (TermKind::Gwesp, None, None, Some(s), Some(d)) if spec.deviations.is_none() => {
                    TermMap::GeometricWeights {
                        scale: index(s)?,
                        decay: index(d)?,
                    }
                }
                (TermKind::Gwesp, ..) => {
                    return Err(Error::Config("gwesp term needs exactly `scale` and `decay`".into()))
                }
                (_, Some(c), None, None, None) if spec.deviations.is_none() => {
                    TermMap::Identity { index: index(c)? }
                }
                (_, None, Some(b), None, None) => {
                    let devs = spec.deviations.as_ref().ok_or_else(|| {
                        Error::Config(format!("term `{term}` with `base` needs `deviations`"))
                    })?;
                    TermMap::SizeBucketDeviation {
                        base: index(b)?,
                        deviations: devs
                            .iter()
                            .map(|d| if d.is_empty() { Ok(None) } else { index(d).map(Some) })
                            .collect::<Result<_>>()?,
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "term `{term}` needs either `coef` or `base` with `deviations`"
                    )))
                }
            };
            terms.push(term);
            maps.push(map);
        }
        Model::new(TermSet::new(terms), maps, buckets, names).map_err(|e| match e {
            Error::Model(m) => Error::Config(m),
            e => e,
        })
    }

    /// Declared initial values, `None` unless every parameter has one.
    pub fn init(&self) -> Option<Vec<f64>> {
        self.parameters.iter().map(|p| p.init).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub replicates: usize,
}

/// Neighborhood sizes of an experiment design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum SizeSpec {
    Uniform(usize),
    /// `sizes[i]` gets a `weights[i]` share of the neighborhoods.
    Mixed { sizes: Vec<usize>, weights: Vec<f64> },
}

impl SizeSpec {
    /// Deterministic size list for `k` neighborhoods; mixed designs use
    /// largest-remainder rounding of the shares.
    pub fn sizes(&self, k: usize) -> Result<Vec<usize>> {
        match self {
            SizeSpec::Uniform(n) => Ok(vec![*n; k]),
            SizeSpec::Mixed { sizes, weights } => {
                if sizes.is_empty() || sizes.len() != weights.len() || weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
                    return Err(Error::Config("mixed sizes need matching positive weights".into()));
                }
                let total: f64 = weights.iter().sum();
                let exact: Vec<f64> = weights.iter().map(|w| w / total * k as f64).collect();
                let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
                let mut order: Vec<usize> = (0..sizes.len()).collect();
                order.sort_by(|&a, &b| {
                    let ra = exact[a] - exact[a].floor();
                    let rb = exact[b] - exact[b].floor();
                    rb.total_cmp(&ra).then(a.cmp(&b))
                });
                let missing = k - counts.iter().sum::<usize>();
                for &i in order.iter().take(missing) {
                    counts[i] += 1;
                }
                Ok(sizes
                    .iter()
                    .zip(&counts)
                    .flat_map(|(&n, &c)| std::iter::repeat_n(n, c))
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub theta_star: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub sizes: SizeSpec,
    pub replications: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::Config("k_grid must be nonempty and positive".into()));
        }
        if self.replications < 2 {
            return Err(Error::Config("replications must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub directed: bool,
    /// Parameter used by `simulate`, `gof` and `bootstrap`.
    pub theta: Option<Vec<f64>>,
    pub model: ModelSpec,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub gof: GofConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    pub experiment: Option<ExperimentSpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `theta` if given, else the parameter inits.
    pub fn theta(&self) -> Result<Vec<f64>> {
        self.theta
            .clone()
            .or_else(|| self.model.init())
            .ok_or_else(|| Error::Config("no `theta` and not every parameter has `init`".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
seed = 3
[model]
[[model.parameter]]
name = "edges"
init = -1.0
[[model.parameter]]
name = "transitive"
init = 0.5
[[model.term]]
kind = "edges"
coef = "edges"
[[model.term]]
kind = "transitive"
coef = "transitive"
"#;

    #[test]
    fn basic_model() {
        let c = RunConfig::parse(BASIC).unwrap();
        let m = c.model.build().unwrap();
        assert_eq!(m.names(), ["edges", "transitive"]);
        assert_eq!(c.theta().unwrap(), vec![-1.0, 0.5]);
        assert_eq!(c.estimator, EstimatorConfig::default());
    }

    #[test]
    fn deviations_and_gwesp() {
        let text = r#"
[model]
thresholds = [10, 14]
parameter = [{ name = "e" }, { name = "e.m" }, { name = "e.l" }, { name = "a" }, { name = "b" }]
[[model.term]]
kind = "edges"
base = "e"
deviations = ["", "e.m", "e.l"]
[[model.term]]
kind = "gwesp"
scale = "a"
decay = "b"
"#;
        let c = RunConfig::parse(text).unwrap();
        let m = c.model.build().unwrap();
        assert!(m.is_curved());
        let eta = m.eta(&[-2.0, 0.3, -0.4, 1.0, 1.0], 12).unwrap();
        assert!((eta[0] + 1.7).abs() < 1e-12);
        assert!(c.theta().is_err());
    }

    #[test]
    fn rejects_unknown_parameter_and_keys() {
        let bad = BASIC.replace("coef = \"transitive\"", "coef = \"tri\"");
        assert!(matches!(RunConfig::parse(&bad).unwrap().model.build(), Err(Error::Config(_))));
        let bad = format!("{BASIC}\n[sampler]\nthinning = 3\n");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn mixed_sizes_follow_shares() {
        let s = SizeSpec::Mixed { sizes: vec![8, 12, 16], weights: vec![0.25, 0.5, 0.25] };
        let v = s.sizes(20).unwrap();
        assert_eq!(v.iter().filter(|&&n| n == 8).count(), 5);
        assert_eq!(v.iter().filter(|&&n| n == 12).count(), 10);
        assert_eq!(s.sizes(7).unwrap().len(), 7);
    }
}
