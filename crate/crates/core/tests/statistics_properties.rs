mod common;

use common::{naive_stats, random_graph};
use mlergm::graph::dyads;
use mlergm::statistics::{neighborhood_gof, Term, TermSet};
use mlergm::{change_stat, compute_stats, toggle_edge, Adjacency};
use proptest::prelude::*;

fn all_terms(directed: bool) -> TermSet {
    let mut t = vec![Term::Edges];
    if directed {
        t.push(Term::Mutual);
    }
    t.extend([Term::NodeMatch("color".into()), Term::TransitiveEdges, Term::Esp]);
    TermSet::new(t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stats_match_definitions(seed in any::<u64>(), n in 1usize..9, directed in any::<bool>(), density in 0.0f64..1.0) {
        let g = random_graph(seed, &[n, 3], directed, density);
        let s = compute_stats(&g, &all_terms(directed)).unwrap();
        for k in 0..2 {
            prop_assert_eq!(&s.per_neighborhood[k], &naive_stats(&g, k));
        }
    }

    #[test]
    fn change_stat_is_recompute_difference(
        seed in any::<u64>(), n in 2usize..9, directed in any::<bool>(), density in 0.0f64..1.0, pick in any::<prop::sample::Index>()
    ) {
        let g = random_graph(seed, &[3, n], directed, density);
        let terms = all_terms(directed);
        let pairs = dyads(n, directed);
        let (i, j) = pairs[pick.index(pairs.len())];
        let nb = g.neighborhood(1);
        let (tail, head) = (nb.nodes[i].clone(), nb.nodes[j].clone());
        let on = if g.has_edge(&tail, &head).unwrap() { g.clone() } else { toggle_edge(&g, &tail, &head).unwrap() };
        let off = toggle_edge(&on, &tail, &head).unwrap();
        let (k, delta) = change_stat(&g, &terms, &tail, &head).unwrap();
        prop_assert_eq!(k, 1);
        let s_on = &compute_stats(&on, &terms).unwrap().per_neighborhood[1];
        let s_off = &compute_stats(&off, &terms).unwrap().per_neighborhood[1];
        let diff: Vec<f64> = s_on.iter().zip(s_off).map(|(a, b)| a - b).collect();
        prop_assert_eq!(delta[0], 1.0);
        prop_assert_eq!(delta, diff);
    }

    #[test]
    fn relabeling_leaves_statistics_unchanged(seed in any::<u64>(), n in 2usize..9, directed in any::<bool>(), density in 0.0f64..1.0, rot in 0usize..8) {
        let g = random_graph(seed, &[n], directed, density);
        let terms = all_terms(directed);
        let a = &g.neighborhood(0).adjacency;
        let perm: Vec<usize> = (0..n).map(|v| (v * (n - 1) + rot) % n).collect();
        let mut relabeled = g.clone();
        let mut b = Adjacency::empty(n, directed);
        for (i, j) in dyads(n, directed) {
            if a.has(i, j) {
                b.set(perm[i], perm[j], true);
            }
        }
        let mut attrs = g.neighborhood(0).attributes.clone();
        for (v, &p) in perm.iter().enumerate() {
            attrs[0][p] = g.neighborhood(0).attributes[0][v].clone();
        }
        relabeled.set_adjacency(0, b);
        let mut nodes = String::from("node_id,neighborhood_id,color\n");
        for (v, c) in attrs[0].iter().enumerate() {
            nodes.push_str(&format!("v0.{v},b0,{c}\n"));
        }
        let mut edges = Vec::new();
        relabeled.write_edges(&mut edges).unwrap();
        let relabeled = mlergm::MultilevelGraph::load(nodes.as_bytes(), edges.as_slice(), directed).unwrap();
        prop_assert_eq!(compute_stats(&g, &terms).unwrap(), compute_stats(&relabeled, &terms).unwrap());
        prop_assert_eq!(neighborhood_gof(a), neighborhood_gof(&relabeled.neighborhood(0).adjacency));
    }

    #[test]
    fn summary_inequalities(seed in any::<u64>(), n in 1usize..10, directed in any::<bool>(), density in 0.0f64..1.0) {
        let g = random_graph(seed, &[n], directed, density);
        let s = &compute_stats(&g, &TermSet::new(vec![Term::Edges, Term::TransitiveEdges, Term::Esp])).unwrap().per_neighborhood[0];
        let gof = neighborhood_gof(&g.neighborhood(0).adjacency);
        let esp_total: u64 = gof.esp.iter().sum();
        prop_assert_eq!(s[1], esp_total as f64);
        prop_assert!(s[1] <= s[0]);
        for (e, d) in gof.esp.iter().zip(&gof.dsp) {
            prop_assert!(e <= d);
        }
        let dyad_total = mlergm::graph::dyad_count(n, directed) as u64;
        prop_assert!(gof.dsp.iter().sum::<u64>() <= dyad_total);
        prop_assert_eq!(gof.geodesic.iter().sum::<u64>() + gof.unreachable, dyad_total);
        prop_assert_eq!(gof.geodesic.first().copied().unwrap_or(0), g.edge_count() as u64);
    }
}
