#![allow(dead_code)]

use std::collections::HashMap;

use mlergm::graph::dyads;
use mlergm::{Adjacency, MultilevelGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random graph with one `color` attribute taking values `a`/`b`/`c`.
pub fn random_graph(seed: u64, sizes: &[usize], directed: bool, density: f64) -> MultilevelGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<(String, Vec<String>)> = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| (format!("b{k}"), (0..n).map(|v| format!("v{k}.{v}")).collect()))
        .collect();
    let mut attrs = HashMap::new();
    for (_, nodes) in &blocks {
        for node in nodes {
            let c = ["a", "b", "c"][rng.random_range(0..3)];
            attrs.insert(node.clone(), vec![c.to_string()]);
        }
    }
    let mut g = MultilevelGraph::from_partition(directed, blocks, vec!["color".into()], attrs).unwrap();
    for (k, &n) in sizes.iter().enumerate() {
        let mut adj = Adjacency::empty(n, directed);
        for (i, j) in dyads(n, directed) {
            if rng.random::<f64>() < density {
                adj.set(i, j, true);
            }
        }
        g.set_adjacency(k, adj);
    }
    g
}

/// Statistics recomputed from their definitions with plain loops, in the
/// order edges, mutual, nodematch.color, transitive, esp.1..esp.(n-2).
pub fn naive_stats(g: &MultilevelGraph, k: usize) -> Vec<f64> {
    let nb = g.neighborhood(k);
    let a = &nb.adjacency;
    let n = nb.len();
    let directed = g.is_directed();
    let color = &nb.attributes[0];
    let partners = |i: usize, j: usize| -> usize {
        (0..n)
            .filter(|&h| h != i && h != j)
            .filter(|&h| if directed { a.has(i, h) && a.has(h, j) } else { a.has(i, h) && a.has(j, h) })
            .count()
    };
    let (mut edges, mut mutual, mut matched, mut trans) = (0.0, 0.0, 0.0, 0.0);
    let mut esp = vec![0.0; n.saturating_sub(2)];
    for i in 0..n {
        for j in 0..n {
            if i == j || (!directed && j < i) || !a.has(i, j) {
                continue;
            }
            edges += 1.0;
            if directed && i < j && a.has(j, i) {
                mutual += 1.0;
            }
            if color[i] == color[j] {
                matched += 1.0;
            }
            let sp = partners(i, j);
            if sp > 0 {
                trans += 1.0;
                esp[sp - 1] += 1.0;
            }
        }
    }
    let mut out = vec![edges];
    if directed {
        out.push(mutual);
    }
    out.push(matched);
    out.push(trans);
    out.extend(esp);
    out
}
