//! Sufficient statistics, change statistics and goodness-of-fit summaries.
//!
//! Shared partners follow one rule throughout: for an undirected dyad
//! `{i, j}` a partner is any `h` adjacent to both; for a directed dyad
//! `(i, j)` it is any `h` on an outgoing two-path `i -> h -> j`. An edge is
//! transitive iff it has at least one shared partner, and the ESP/DSP bins
//! count edges/dyads with exactly `1..=n-2` partners.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ones, Adjacency, MultilevelGraph};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Edges,
    /// Reciprocated pairs; directed graphs only.
    Mutual,
    /// Edges whose endpoints share the value of the named attribute.
    NodeMatch(String),
    TransitiveEdges,
    /// Edgewise shared-partner counts, one bin per `i = 1..=n-2`.
    Esp,
}

impl Term {
    /// Width of this term's statistic block in a neighborhood of `n` nodes.
    pub fn width(&self, n: usize) -> usize {
        match self {
            Term::Esp => n.saturating_sub(2),
            _ => 1,
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, Term::Esp)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Edges => write!(f, "edges"),
            Term::Mutual => write!(f, "mutual"),
            Term::NodeMatch(a) => write!(f, "nodematch.{a}"),
            Term::TransitiveEdges => write!(f, "transitive"),
            Term::Esp => write!(f, "esp"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSet {
    terms: Vec<Term>,
}

impl TermSet {
    pub fn new(terms: Vec<Term>) -> Self {
        TermSet { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Statistic dimension for a neighborhood of `n` nodes.
    pub fn dim(&self, n: usize) -> usize {
        self.terms.iter().map(|t| t.width(n)).sum()
    }

    /// Block offsets of each term for a neighborhood of `n` nodes.
    pub fn offsets(&self, n: usize) -> Vec<usize> {
        let mut off = 0;
        self.terms
            .iter()
            .map(|t| {
                let o = off;
                off += t.width(n);
                o
            })
            .collect()
    }

    /// Coordinate labels for a neighborhood of `n` nodes (`esp.1`, `esp.2`, ...).
    pub fn labels(&self, n: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim(n));
        for t in &self.terms {
            if t.is_vector() {
                out.extend((1..=t.width(n)).map(|i| format!("{t}.{i}")));
            } else {
                out.push(t.to_string());
            }
        }
        out
    }

    pub fn validate(&self, graph: &MultilevelGraph) -> Result<()> {
        for t in &self.terms {
            match t {
                Term::Mutual if !graph.is_directed() => {
                    return Err(Error::TermMismatch(
                        "mutual requires a directed graph".into(),
                    ))
                }
                Term::NodeMatch(attr) => {
                    let a = graph
                        .attribute_names()
                        .iter()
                        .position(|n| n == attr)
                        .ok_or_else(|| {
                            Error::TermMismatch(format!("attribute `{attr}` not present"))
                        })?;
                    for nb in graph.neighborhoods() {
                        if let Some(v) = nb.attributes[a].iter().position(String::is_empty) {
                            return Err(Error::TermMismatch(format!(
                                "attribute `{attr}` missing on node `{}`",
                                nb.nodes[v]
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Binds the term set to neighborhood `k` of `graph`.
    pub fn bind(&self, graph: &MultilevelGraph, k: usize) -> Result<BoundTerms> {
        let nb = graph.neighborhood(k);
        let n = nb.len();
        let mut kinds = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            kinds.push(match t {
                Term::Edges => Kind::Edges,
                Term::Mutual => {
                    if !graph.is_directed() {
                        return Err(Error::TermMismatch(
                            "mutual requires a directed graph".into(),
                        ));
                    }
                    Kind::Mutual
                }
                Term::NodeMatch(attr) => {
                    let a = graph
                        .attribute_names()
                        .iter()
                        .position(|x| x == attr)
                        .ok_or_else(|| {
                            Error::TermMismatch(format!("attribute `{attr}` not present"))
                        })?;
                    let mut codes_of: HashMap<&str, u32> = HashMap::new();
                    let mut codes = Vec::with_capacity(n);
                    for (v, value) in nb.attributes[a].iter().enumerate() {
                        if value.is_empty() {
                            return Err(Error::TermMismatch(format!(
                                "attribute `{attr}` missing on node `{}`",
                                nb.nodes[v]
                            )));
                        }
                        let next = codes_of.len() as u32;
                        codes.push(*codes_of.entry(value.as_str()).or_insert(next));
                    }
                    Kind::Match(codes)
                }
                Term::TransitiveEdges => Kind::Transitive,
                Term::Esp => Kind::Esp,
            });
        }
        Ok(BoundTerms {
            n,
            directed: graph.is_directed(),
            offsets: self.offsets(n),
            dim: self.dim(n),
            kinds,
        })
    }

    pub fn bind_all(&self, graph: &MultilevelGraph) -> Result<Vec<BoundTerms>> {
        (0..graph.num_neighborhoods())
            .map(|k| self.bind(graph, k))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Kind {
    Edges,
    Mutual,
    Match(Vec<u32>),
    Transitive,
    Esp,
}

/// A term set resolved against one neighborhood: block offsets plus
/// categorical codes for attribute-matching terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoundTerms {
    n: usize,
    directed: bool,
    offsets: Vec<usize>,
    dim: usize,
    kinds: Vec<Kind>,
}

impl BoundTerms {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    fn needs_partners(&self) -> bool {
        self.kinds
            .iter()
            .any(|k| matches!(k, Kind::Transitive | Kind::Esp))
    }

    /// Exact statistics of `adj`, written into `out` (length [`dim`](Self::dim)).
    pub fn stats_into(&self, adj: &Adjacency, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        out.iter_mut().for_each(|x| *x = 0.0);
        let partners = self.needs_partners();
        for (i, j) in adj.edges() {
            let sp = if partners { adj.shared_partners(i, j) as usize } else { 0 };
            for (kind, &off) in self.kinds.iter().zip(&self.offsets) {
                match kind {
                    Kind::Edges => out[off] += 1.0,
                    // each reciprocated pair is seen once from its lower tail
                    Kind::Mutual => {
                        if i < j && adj.has(j, i) {
                            out[off] += 1.0
                        }
                    }
                    Kind::Match(codes) => {
                        if codes[i] == codes[j] {
                            out[off] += 1.0
                        }
                    }
                    Kind::Transitive => {
                        if sp > 0 {
                            out[off] += 1.0
                        }
                    }
                    Kind::Esp => {
                        if sp > 0 {
                            out[off + sp - 1] += 1.0
                        }
                    }
                }
            }
        }
    }

    pub fn stats(&self, adj: &Adjacency) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.stats_into(adj, &mut out);
        out
    }

    /// Visits the sparse change statistic `s(x with ij on) - s(x with ij off)`
    /// as `(coordinate, delta)` pairs. The current state of `ij` is irrelevant.
    #[inline]
    pub fn for_each_change(
        &self,
        adj: &Adjacency,
        i: usize,
        j: usize,
        mut emit: impl FnMut(usize, f64),
    ) {
        let present = adj.has(i, j) as u32;
        let partners = self.needs_partners();
        let sp_ij = if partners { adj.shared_partners(i, j) } else { 0 };
        for (kind, &off) in self.kinds.iter().zip(&self.offsets) {
            match kind {
                Kind::Edges => emit(off, 1.0),
                Kind::Mutual => {
                    if adj.has(j, i) {
                        emit(off, 1.0)
                    }
                }
                Kind::Match(codes) => {
                    if codes[i] == codes[j] {
                        emit(off, 1.0)
                    }
                }
                Kind::Transitive => {
                    let mut d = (sp_ij > 0) as u32;
                    self.for_each_affected(adj, i, j, present, |sp_off| {
                        if sp_off == 0 {
                            d += 1;
                        }
                    });
                    if d > 0 {
                        emit(off, d as f64);
                    }
                }
                Kind::Esp => {
                    if sp_ij > 0 {
                        emit(off + sp_ij as usize - 1, 1.0);
                    }
                    self.for_each_affected(adj, i, j, present, |sp_off| {
                        if sp_off > 0 {
                            emit(off + sp_off as usize - 1, -1.0);
                        }
                        emit(off + sp_off as usize, 1.0);
                    });
                }
            }
        }
    }

    /// Visits every edge whose shared-partner count depends on dyad `ij`,
    /// passing its count with `ij` switched off.
    #[inline]
    fn for_each_affected(
        &self,
        adj: &Adjacency,
        i: usize,
        j: usize,
        present: u32,
        mut visit: impl FnMut(u32),
    ) {
        if self.directed {
            // (i, b) with i -> b and j -> b gains partner j
            let (oi, oj) = (adj.out_row(i), adj.out_row(j));
            for (w, (a, b)) in oi.iter().zip(oj).enumerate() {
                let mut common = a & b;
                while common != 0 {
                    let b = w * 64 + common.trailing_zeros() as usize;
                    common &= common - 1;
                    visit(adj.shared_partners(i, b) - present);
                }
            }
            // (a, j) with a -> i and a -> j gains partner i
            let (ii, ij) = (adj.in_row(i), adj.in_row(j));
            for (w, (x, y)) in ii.iter().zip(ij).enumerate() {
                let mut common = x & y;
                while common != 0 {
                    let a = w * 64 + common.trailing_zeros() as usize;
                    common &= common - 1;
                    visit(adj.shared_partners(a, j) - present);
                }
            }
        } else {
            let (ri, rj) = (adj.out_row(i), adj.out_row(j));
            for (w, (x, y)) in ri.iter().zip(rj).enumerate() {
                let mut common = x & y;
                while common != 0 {
                    let h = w * 64 + common.trailing_zeros() as usize;
                    common &= common - 1;
                    visit(adj.shared_partners(i, h) - present);
                    visit(adj.shared_partners(j, h) - present);
                }
            }
        }
    }

    /// Dense change statistic for dyad `ij`.
    pub fn change(&self, adj: &Adjacency, i: usize, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.for_each_change(adj, i, j, |c, v| out[c] += v);
        out
    }

    /// Inner product of `coef` with the change statistic for dyad `ij`.
    #[inline]
    pub fn change_dot(&self, adj: &Adjacency, i: usize, j: usize, coef: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_change(adj, i, j, |c, v| acc += coef[c] * v);
        acc
    }
}

/// Per-neighborhood statistic vectors `s_k(x_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatisticVector {
    pub per_neighborhood: Vec<Vec<f64>>,
}

impl StatisticVector {
    /// Term-wise totals over neighborhoods; vector terms are padded to the
    /// widest neighborhood before summing.
    pub fn aggregate(&self, terms: &TermSet, sizes: &[usize]) -> Vec<(String, f64)> {
        let n_max = sizes.iter().copied().max().unwrap_or(0);
        let labels = terms.labels(n_max);
        let mut total = vec![0.0; labels.len()];
        let wide_offsets = terms.offsets(n_max);
        for (s, &n) in self.per_neighborhood.iter().zip(sizes) {
            let offs = terms.offsets(n);
            for (t, term) in terms.terms().iter().enumerate() {
                for w in 0..term.width(n) {
                    total[wide_offsets[t] + w] += s[offs[t] + w];
                }
            }
        }
        labels.into_iter().zip(total).collect()
    }
}

pub fn compute_stats(graph: &MultilevelGraph, terms: &TermSet) -> Result<StatisticVector> {
    terms.validate(graph)?;
    let per_neighborhood = graph
        .neighborhoods()
        .iter()
        .enumerate()
        .map(|(k, nb)| Ok(terms.bind(graph, k)?.stats(&nb.adjacency)))
        .collect::<Result<_>>()?;
    Ok(StatisticVector { per_neighborhood })
}

/// Change statistic of dyad `(tail, head)`. Only the block of the
/// neighborhood containing the dyad can be nonzero, so just that block is
/// returned together with its neighborhood index.
pub fn change_stat(
    graph: &MultilevelGraph,
    terms: &TermSet,
    tail: &str,
    head: &str,
) -> Result<(usize, Vec<f64>)> {
    let (k, i, j) = graph.resolve_dyad(tail, head)?;
    let bound = terms.bind(graph, k)?;
    Ok((k, bound.change(&graph.neighborhood(k).adjacency, i, j)))
}

/// Structural summaries used for goodness-of-fit, pooled over neighborhoods.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GofSummary {
    /// `geodesic[d - 1]` counts dyads at distance `d`.
    pub geodesic: Vec<u64>,
    pub unreachable: u64,
    /// `dsp[i - 1]` counts dyads with `i` shared partners.
    pub dsp: Vec<u64>,
    /// `esp[i - 1]` counts edges with `i` shared partners.
    pub esp: Vec<u64>,
}

fn add_padded(acc: &mut Vec<u64>, v: &[u64]) {
    if acc.len() < v.len() {
        acc.resize(v.len(), 0);
    }
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

impl GofSummary {
    pub fn merge(&mut self, other: &GofSummary) {
        add_padded(&mut self.geodesic, &other.geodesic);
        self.unreachable += other.unreachable;
        add_padded(&mut self.dsp, &other.dsp);
        add_padded(&mut self.esp, &other.esp);
    }
}

/// Geodesic histogram and DSP/ESP counts of one neighborhood.
pub fn neighborhood_gof(adj: &Adjacency) -> GofSummary {
    let n = adj.len();
    let directed = adj.is_directed();
    let bins = n.saturating_sub(2);
    let mut s = GofSummary {
        geodesic: vec![0; n.saturating_sub(1)],
        unreachable: 0,
        dsp: vec![0; bins],
        esp: vec![0; bins],
    };
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for v in ones(adj.out_row(u)) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (dst, &d) in dist.iter().enumerate() {
            if dst == src || (!directed && dst < src) {
                continue;
            }
            if d == usize::MAX {
                s.unreachable += 1;
            } else {
                s.geodesic[d - 1] += 1;
            }
            let sp = adj.shared_partners(src, dst) as usize;
            if sp > 0 {
                s.dsp[sp - 1] += 1;
                if adj.has(src, dst) {
                    s.esp[sp - 1] += 1;
                }
            }
        }
    }
    s
}

pub fn gof_summaries(graph: &MultilevelGraph) -> GofSummary {
    let mut total = GofSummary::default();
    for nb in graph.neighborhoods() {
        total.merge(&neighborhood_gof(&nb.adjacency));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, directed: bool, edges: &[(usize, usize)]) -> MultilevelGraph {
        let mut g = MultilevelGraph::with_sizes(&[n], directed).unwrap();
        for &(i, j) in edges {
            g.toggle(&format!("0_{i}"), &format!("0_{j}")).unwrap();
        }
        g
    }

    fn und_terms() -> TermSet {
        TermSet::new(vec![Term::Edges, Term::TransitiveEdges, Term::Esp])
    }

    #[test]
    fn triangle_stats() {
        let g = graph(3, false, &[(0, 1), (1, 2), (0, 2)]);
        let s = compute_stats(&g, &und_terms()).unwrap();
        assert_eq!(s.per_neighborhood[0], vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn complete_k4_stats() {
        let g = graph(4, false, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let s = compute_stats(&g, &und_terms()).unwrap();
        assert_eq!(s.per_neighborhood[0], vec![6.0, 6.0, 0.0, 6.0]);
        let gof = gof_summaries(&g);
        assert_eq!(gof.dsp, vec![0, 6]);
        assert_eq!(gof.esp, vec![0, 6]);
    }

    #[test]
    fn empty_graph_is_zero() {
        let g = graph(5, true, &[]);
        let t = TermSet::new(vec![Term::Edges, Term::Mutual, Term::TransitiveEdges, Term::Esp]);
        let s = compute_stats(&g, &t).unwrap();
        assert!(s.per_neighborhood[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn path_closing_change() {
        // path 1-3-2 with 0-based ids 0-2-1
        let g = graph(3, false, &[(0, 2), (2, 1)]);
        let (_, d) = change_stat(&g, &und_terms(), "0_0", "0_1").unwrap();
        assert_eq!(d, vec![1.0, 3.0, 3.0]);
    }

    #[test]
    fn edges_change_is_one() {
        let g = graph(4, false, &[(0, 1), (1, 2)]);
        for (a, b) in [("0_0", "0_1"), ("0_2", "0_3")] {
            let (_, d) = change_stat(&g, &und_terms(), a, b).unwrap();
            assert_eq!(d[0], 1.0);
        }
    }

    #[test]
    fn directed_transitive_uses_outgoing_two_paths() {
        // 0 -> 1 -> 2 and 0 -> 2: only (0, 2) has an outgoing two-path partner
        let g = graph(3, true, &[(0, 1), (1, 2), (0, 2)]);
        let t = TermSet::new(vec![Term::TransitiveEdges, Term::Esp]);
        let s = compute_stats(&g, &t).unwrap();
        assert_eq!(s.per_neighborhood[0], vec![1.0, 1.0]);
        // the reversed two-path 2 -> 1 -> 0 gives nothing to (0, 2)
        let g = graph(3, true, &[(2, 1), (1, 0), (0, 2)]);
        assert_eq!(compute_stats(&g, &t).unwrap().per_neighborhood[0], vec![0.0, 0.0]);
    }

    #[test]
    fn mutual_and_nodematch() {
        let nodes = "node_id,neighborhood_id,sex\na,1,f\nb,1,f\nc,1,m\n";
        let edges = "tail,head\na,b\nb,a\na,c\n";
        let g = MultilevelGraph::load(nodes.as_bytes(), edges.as_bytes(), true).unwrap();
        let t = TermSet::new(vec![Term::Edges, Term::Mutual, Term::NodeMatch("sex".into())]);
        assert_eq!(compute_stats(&g, &t).unwrap().per_neighborhood[0], vec![3.0, 1.0, 2.0]);
        let (_, d) = change_stat(&g, &t, "c", "a").unwrap();
        assert_eq!(d, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn term_mismatch() {
        let g = graph(3, false, &[]);
        assert!(matches!(
            compute_stats(&g, &TermSet::new(vec![Term::Mutual])),
            Err(Error::TermMismatch(_))
        ));
        assert!(matches!(
            compute_stats(&g, &TermSet::new(vec![Term::NodeMatch("x".into())])),
            Err(Error::TermMismatch(_))
        ));
        let nodes = "node_id,neighborhood_id,x\na,1,u\nb,1,\n";
        let g = MultilevelGraph::load(nodes.as_bytes(), "tail,head\n".as_bytes(), false).unwrap();
        assert!(matches!(
            compute_stats(&g, &TermSet::new(vec![Term::NodeMatch("x".into())])),
            Err(Error::TermMismatch(_))
        ));
    }

    #[test]
    fn gof_small_cases() {
        let tri = graph(3, false, &[(0, 1), (1, 2), (0, 2)]);
        let s = gof_summaries(&tri);
        assert_eq!(s.geodesic, vec![3, 0]);
        assert_eq!(s.unreachable, 0);
        let pair = graph(2, false, &[]);
        let s = gof_summaries(&pair);
        assert_eq!(s.geodesic, vec![0]);
        assert_eq!(s.unreachable, 1);
    }

    #[test]
    fn aggregate_pads_esp() {
        let mut g = MultilevelGraph::with_sizes(&[3, 4], false).unwrap();
        for (a, b) in [("0_0", "0_1"), ("0_1", "0_2"), ("0_0", "0_2"), ("1_0", "1_1")] {
            g.toggle(a, b).unwrap();
        }
        let t = und_terms();
        let agg = compute_stats(&g, &t).unwrap().aggregate(&t, &g.sizes());
        let names: Vec<_> = agg.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["edges", "transitive", "esp.1", "esp.2"]);
        let vals: Vec<_> = agg.iter().map(|(_, v)| *v).collect();
        assert_eq!(vals, [4.0, 3.0, 3.0, 0.0]);
    }
}
