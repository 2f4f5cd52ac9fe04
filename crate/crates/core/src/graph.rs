//! Multilevel graphs: a node set partitioned into neighborhoods with binary
//! edges stored only inside each neighborhood.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Dense bitset adjacency for one neighborhood.
///
/// Undirected graphs keep a symmetric `out` matrix; directed graphs also keep
/// the transposed rows in `inc` so that two-path counts are a single AND.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    words: usize,
    directed: bool,
    out: Vec<u64>,
    inc: Vec<u64>,
    edges: usize,
}

impl Adjacency {
    pub fn empty(n: usize, directed: bool) -> Self {
        let words = n.div_ceil(WORD).max(1);
        Adjacency {
            n,
            words,
            directed,
            out: vec![0; n * words],
            inc: if directed { vec![0; n * words] } else { Vec::new() },
            edges: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn dyad_count(&self) -> usize {
        dyad_count(self.n, self.directed)
    }

    #[inline]
    pub fn has(&self, i: usize, j: usize) -> bool {
        self.out[i * self.words + j / WORD] >> (j % WORD) & 1 == 1
    }

    #[inline]
    fn flip_bit(rows: &mut [u64], words: usize, i: usize, j: usize) {
        rows[i * words + j / WORD] ^= 1u64 << (j % WORD);
    }

    /// Flips dyad `(i, j)` and returns its new state.
    #[inline]
    pub fn toggle(&mut self, i: usize, j: usize) -> bool {
        debug_assert!(i != j && i < self.n && j < self.n);
        let w = self.words;
        Self::flip_bit(&mut self.out, w, i, j);
        if self.directed {
            Self::flip_bit(&mut self.inc, w, j, i);
        } else {
            Self::flip_bit(&mut self.out, w, j, i);
        }
        let on = self.has(i, j);
        if on {
            self.edges += 1;
        } else {
            self.edges -= 1;
        }
        on
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        if self.has(i, j) != on {
            self.toggle(i, j);
        }
    }

    /// Out-neighbors of `i` (all neighbors when undirected).
    #[inline]
    pub fn out_row(&self, i: usize) -> &[u64] {
        &self.out[i * self.words..(i + 1) * self.words]
    }

    /// In-neighbors of `j` (all neighbors when undirected).
    #[inline]
    pub fn in_row(&self, j: usize) -> &[u64] {
        if self.directed {
            &self.inc[j * self.words..(j + 1) * self.words]
        } else {
            self.out_row(j)
        }
    }

    /// Number of partners `h` with `i -> h -> j` (undirected: `h` adjacent to both).
    #[inline]
    pub fn shared_partners(&self, i: usize, j: usize) -> u32 {
        and_count(self.out_row(i), self.in_row(j))
    }

    /// Iterates over the stored edges, each undirected edge once with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            ones(self.out_row(i))
                .filter(move |&j| self.directed || i < j)
                .map(move |j| (i, j))
        })
    }

    /// Encodes the dyad states as a bitmask in [`dyads`] order. Needs at most 64 dyads.
    pub fn dyad_mask(&self) -> Option<u64> {
        let pairs = dyads(self.n, self.directed);
        if pairs.len() > 64 {
            return None;
        }
        let mut mask = 0u64;
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if self.has(i, j) {
                mask |= 1 << b;
            }
        }
        Some(mask)
    }
}

#[inline]
pub(crate) fn and_count(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// Iterates over set bit positions.
pub(crate) fn ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(w, &word)| {
        let mut rest = word;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(w * WORD + b)
        })
    })
}

pub fn dyad_count(n: usize, directed: bool) -> usize {
    if n < 2 {
        0
    } else if directed {
        n * (n - 1)
    } else {
        n * (n - 1) / 2
    }
}

/// All dyads of an `n`-node neighborhood: `i < j` when undirected, all
/// ordered pairs `i != j` (row-major) when directed.
pub fn dyads(n: usize, directed: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dyad_count(n, directed));
    for i in 0..n {
        for j in 0..n {
            if i != j && (directed || i < j) {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub id: String,
    pub nodes: Vec<String>,
    /// `attributes[a][v]` is the value of attribute `a` on local node `v`.
    pub attributes: Vec<Vec<String>>,
    pub adjacency: Adjacency,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub neighborhood: usize,
    pub local: usize,
}

/// A validated multilevel graph. Neighborhood and node order are the order
/// of first appearance in the input and are preserved on output.
#[derive(Clone, Debug)]
pub struct MultilevelGraph {
    directed: bool,
    attribute_names: Vec<String>,
    neighborhoods: Vec<Neighborhood>,
    index: HashMap<String, NodeRef>,
}

impl PartialEq for MultilevelGraph {
    fn eq(&self, other: &Self) -> bool {
        self.directed == other.directed
            && self.attribute_names == other.attribute_names
            && self.neighborhoods == other.neighborhoods
    }
}

impl MultilevelGraph {
    /// Builds an edgeless graph from `(neighborhood id, node ids)` blocks.
    pub fn from_partition(
        directed: bool,
        blocks: Vec<(String, Vec<String>)>,
        attribute_names: Vec<String>,
        mut attributes: HashMap<String, Vec<String>>,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        let mut neighborhoods = Vec::with_capacity(blocks.len());
        for (k, (id, nodes)) in blocks.into_iter().enumerate() {
            if nodes.is_empty() {
                return Err(Error::Malformed(format!("neighborhood `{id}` is empty")));
            }
            let mut attrs = vec![Vec::with_capacity(nodes.len()); attribute_names.len()];
            for (local, node) in nodes.iter().enumerate() {
                if index
                    .insert(
                        node.clone(),
                        NodeRef {
                            neighborhood: k,
                            local,
                        },
                    )
                    .is_some()
                {
                    return Err(Error::DuplicateNode(node.clone()));
                }
                let values = attributes.remove(node).unwrap_or_default();
                for (a, col) in attrs.iter_mut().enumerate() {
                    col.push(values.get(a).cloned().unwrap_or_default());
                }
            }
            neighborhoods.push(Neighborhood {
                id,
                adjacency: Adjacency::empty(nodes.len(), directed),
                nodes,
                attributes: attrs,
            });
        }
        Ok(MultilevelGraph {
            directed,
            attribute_names,
            neighborhoods,
            index,
        })
    }

    /// Edgeless graph with neighborhoods of the given sizes; node ids are
    /// `"{k}_{v}"` and neighborhood ids `"{k}"`.
    pub fn with_sizes(sizes: &[usize], directed: bool) -> Result<Self> {
        let blocks = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| (k.to_string(), (0..n).map(|v| format!("{k}_{v}")).collect()))
            .collect();
        Self::from_partition(directed, blocks, Vec::new(), HashMap::new())
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn neighborhoods(&self) -> &[Neighborhood] {
        &self.neighborhoods
    }

    pub fn neighborhood(&self, k: usize) -> &Neighborhood {
        &self.neighborhoods[k]
    }

    pub fn num_neighborhoods(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.neighborhoods.iter().map(Neighborhood::len).collect()
    }

    /// Largest neighborhood size.
    pub fn max_size(&self) -> usize {
        self.neighborhoods.iter().map(Neighborhood::len).max().unwrap_or(0)
    }

    pub fn dyad_count(&self) -> usize {
        self.neighborhoods
            .iter()
            .map(|nb| nb.adjacency.dyad_count())
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        self.neighborhoods
            .iter()
            .map(|nb| nb.adjacency.edge_count())
            .sum()
    }

    pub fn node(&self, id: &str) -> Option<NodeRef> {
        self.index.get(id).copied()
    }

    /// Replaces the adjacency of neighborhood `k`.
    pub fn set_adjacency(&mut self, k: usize, adjacency: Adjacency) {
        let nb = &mut self.neighborhoods[k];
        assert_eq!(nb.len(), adjacency.len());
        assert_eq!(self.directed, adjacency.is_directed());
        nb.adjacency = adjacency;
    }

    /// Same node layout, no edges.
    pub fn cleared(&self) -> Self {
        let mut g = self.clone();
        for nb in &mut g.neighborhoods {
            nb.adjacency = Adjacency::empty(nb.len(), self.directed);
        }
        g
    }

    pub fn same_partition(&self, other: &Self) -> bool {
        self.directed == other.directed
            && self.neighborhoods.len() == other.neighborhoods.len()
            && self
                .neighborhoods
                .iter()
                .zip(&other.neighborhoods)
                .all(|(a, b)| a.id == b.id && a.nodes == b.nodes)
    }

    /// Resolves a dyad given by node ids to `(neighborhood, tail, head)` local indices.
    pub fn resolve_dyad(&self, tail: &str, head: &str) -> Result<(usize, usize, usize)> {
        let t = self
            .node(tail)
            .ok_or_else(|| Error::InvalidDyad(format!("unknown node `{tail}`")))?;
        let h = self
            .node(head)
            .ok_or_else(|| Error::InvalidDyad(format!("unknown node `{head}`")))?;
        if t.neighborhood != h.neighborhood {
            return Err(Error::InvalidDyad(format!(
                "({tail}, {head}) spans two neighborhoods"
            )));
        }
        if t.local == h.local {
            return Err(Error::InvalidDyad(format!("({tail}, {head}) is a self-loop")));
        }
        Ok((t.neighborhood, t.local, h.local))
    }

    pub fn has_edge(&self, tail: &str, head: &str) -> Result<bool> {
        let (k, i, j) = self.resolve_dyad(tail, head)?;
        Ok(self.neighborhoods[k].adjacency.has(i, j))
    }

    /// Flips the state of one within-neighborhood dyad in place.
    pub fn toggle(&mut self, tail: &str, head: &str) -> Result<bool> {
        let (k, i, j) = self.resolve_dyad(tail, head)?;
        Ok(self.neighborhoods[k].adjacency.toggle(i, j))
    }

    /// Loads a graph from a nodes table (`node_id,neighborhood_id[,attr...]`)
    /// and an edges table (`tail,head`).
    pub fn load<R1: Read, R2: Read>(nodes: R1, edges: R2, directed: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(nodes);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "node_id" || &header[1] != "neighborhood_id" {
            return Err(Error::Malformed(
                "nodes header must start with `node_id,neighborhood_id`".into(),
            ));
        }
        let attribute_names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
        let mut order: Vec<(String, Vec<String>)> = Vec::new();
        let mut block_of: HashMap<String, usize> = HashMap::new();
        let mut attributes = HashMap::new();
        for row in rdr.records() {
            let row = row?;
            let node = row[0].to_owned();
            let nb = row[1].to_owned();
            if node.is_empty() || nb.is_empty() {
                return Err(Error::Malformed(format!(
                    "empty node or neighborhood id in row {:?}",
                    row.position().map(|p| p.line())
                )));
            }
            let b = *block_of.entry(nb.clone()).or_insert_with(|| {
                order.push((nb, Vec::new()));
                order.len() - 1
            });
            order[b].1.push(node.clone());
            attributes.insert(node, row.iter().skip(2).map(str::to_owned).collect());
        }
        let mut g = Self::from_partition(directed, order, attribute_names, attributes)?;

        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(edges);
        let header = rdr.headers()?.clone();
        if header.len() != 2 || &header[0] != "tail" || &header[1] != "head" {
            return Err(Error::Malformed("edges header must be `tail,head`".into()));
        }
        for row in rdr.records() {
            let row = row?;
            let (tail, head) = (&row[0], &row[1]);
            let t = g.node(tail).ok_or_else(|| Error::UnknownNode(tail.into()))?;
            let h = g.node(head).ok_or_else(|| Error::UnknownNode(head.into()))?;
            if t.neighborhood != h.neighborhood {
                return Err(Error::CrossNeighborhood {
                    tail: tail.into(),
                    head: head.into(),
                    tail_nb: g.neighborhoods[t.neighborhood].id.clone(),
                    head_nb: g.neighborhoods[h.neighborhood].id.clone(),
                });
            }
            if t.local == h.local {
                return Err(Error::SelfLoop(tail.into()));
            }
            let adj = &mut g.neighborhoods[t.neighborhood].adjacency;
            if adj.has(t.local, h.local) {
                return Err(Error::DuplicateEdge(tail.into(), head.into()));
            }
            adj.toggle(t.local, h.local);
        }
        Ok(g)
    }

    pub fn load_files(
        nodes: impl AsRef<std::path::Path>,
        edges: impl AsRef<std::path::Path>,
        directed: bool,
    ) -> Result<Self> {
        let nodes = std::fs::File::open(nodes)?;
        let edges = std::fs::File::open(edges)?;
        Self::load(nodes, edges, directed)
    }

    pub fn write_nodes<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let mut header = vec!["node_id".to_string(), "neighborhood_id".to_string()];
        header.extend(self.attribute_names.iter().cloned());
        w.write_record(&header)?;
        for nb in &self.neighborhoods {
            for (v, node) in nb.nodes.iter().enumerate() {
                let mut rec = vec![node.as_str(), nb.id.as_str()];
                rec.extend(nb.attributes.iter().map(|col| col[v].as_str()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes edges in neighborhood order; undirected edges as (lower local index, higher).
    pub fn write_edges<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(["tail", "head"])?;
        for nb in &self.neighborhoods {
            for (i, j) in nb.adjacency.edges() {
                w.write_record([&nb.nodes[i], &nb.nodes[j]])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of dyads whose states differ between two graphs on the same partition.
pub fn hamming_distance(a: &MultilevelGraph, b: &MultilevelGraph) -> Result<usize> {
    if !a.same_partition(b) {
        return Err(Error::PartitionMismatch);
    }
    Ok(a.neighborhoods
        .iter()
        .zip(&b.neighborhoods)
        .map(|(x, y)| {
            x.adjacency
                .out
                .iter()
                .zip(&y.adjacency.out)
                .map(|(p, q)| (p ^ q).count_ones() as usize)
                .sum::<usize>()
                / if a.directed { 1 } else { 2 }
        })
        .sum())
}

/// Returns a copy of `graph` with the dyad `(tail, head)` flipped.
pub fn toggle_edge(graph: &MultilevelGraph, tail: &str, head: &str) -> Result<MultilevelGraph> {
    let mut g = graph.clone();
    g.toggle(tail, head)?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(nodes: &str, edges: &str, directed: bool) -> Result<MultilevelGraph> {
        MultilevelGraph::load(nodes.as_bytes(), edges.as_bytes(), directed)
    }

    #[test]
    fn smallest_valid_input() {
        let g = load("node_id,neighborhood_id\n1,A\n2,A\n3,A\n", "tail,head\n1,2\n", false).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.dyad_count(), 3);
        assert_eq!(g.num_neighborhoods(), 1);
    }

    #[test]
    fn load_errors() {
        let nodes = "node_id,neighborhood_id\n1,A\n2,A\n3,A\n4,B\n5,B\n";
        assert!(matches!(
            load(nodes, "tail,head\n1,4\n", false),
            Err(Error::CrossNeighborhood { .. })
        ));
        assert!(matches!(
            load(nodes, "tail,head\n1,9\n", false),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            load(nodes, "tail,head\n1,2\n2,1\n", false),
            Err(Error::DuplicateEdge(..))
        ));
        assert!(load(nodes, "tail,head\n1,2\n2,1\n", true).is_ok());
        assert!(matches!(
            load(nodes, "tail,head\n3,3\n", false),
            Err(Error::SelfLoop(_))
        ));
        assert!(matches!(
            load("node_id,neighborhood_id\n1,A\n1,B\n", "tail,head\n", false),
            Err(Error::DuplicateNode(_))
        ));
    }

    #[test]
    fn undirected_edges_are_canonical() {
        let g = load("node_id,neighborhood_id\nb,A\na,A\n", "tail,head\na,b\n", false).unwrap();
        let mut out = Vec::new();
        g.write_edges(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "tail,head\nb,a\n");
        assert!(g.has_edge("b", "a").unwrap());
    }

    #[test]
    fn hamming_examples() {
        let nodes = "node_id,neighborhood_id\n1,A\n2,A\n3,A\n4,A\n";
        let empty = load(nodes, "tail,head\n", false).unwrap();
        let full = load(nodes, "tail,head\n1,2\n1,3\n1,4\n2,3\n2,4\n3,4\n", false).unwrap();
        assert_eq!(hamming_distance(&empty, &empty).unwrap(), 0);
        assert_eq!(hamming_distance(&empty, &full).unwrap(), 6);
        let mut g = empty.clone();
        for (a, b) in [("1", "2"), ("3", "4"), ("2", "4")] {
            g.toggle(a, b).unwrap();
        }
        assert_eq!(hamming_distance(&empty, &g).unwrap(), 3);
        let other = load("node_id,neighborhood_id\n1,A\n2,A\n3,A\n4,B\n", "tail,head\n", false).unwrap();
        assert!(matches!(
            hamming_distance(&empty, &other),
            Err(Error::PartitionMismatch)
        ));
    }

    #[test]
    fn toggle_examples() {
        let g = MultilevelGraph::with_sizes(&[4, 3], true).unwrap();
        let t = toggle_edge(&g, "0_1", "0_2").unwrap();
        assert_eq!(t.edge_count(), 1);
        assert_eq!(hamming_distance(&g, &t).unwrap(), 1);
        assert_eq!(toggle_edge(&t, "0_1", "0_2").unwrap(), g);
        assert!(matches!(
            toggle_edge(&g, "0_1", "1_2"),
            Err(Error::InvalidDyad(_))
        ));
        assert!(matches!(
            toggle_edge(&g, "0_1", "0_1"),
            Err(Error::InvalidDyad(_))
        ));
    }

    #[test]
    fn dyad_counts() {
        let g = MultilevelGraph::with_sizes(&[3, 5, 1], false).unwrap();
        assert_eq!(g.dyad_count(), 3 + 10);
        let d = MultilevelGraph::with_sizes(&[3, 5], true).unwrap();
        assert_eq!(d.dyad_count(), 6 + 20);
        assert_eq!(dyads(4, false).len(), 6);
    }

    #[test]
    fn wide_neighborhood_bitsets() {
        let mut a = Adjacency::empty(130, false);
        a.toggle(0, 129);
        a.toggle(64, 129);
        a.toggle(0, 64);
        assert_eq!(a.shared_partners(0, 64), 1);
        assert_eq!(a.edges().count(), 3);
        assert_eq!(ones(a.out_row(129)).collect::<Vec<_>>(), vec![0, 64]);
    }
}
