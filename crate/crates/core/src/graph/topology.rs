//! Topological predicates on metric graphs: terminal edges, cycle coverings,
//! trees, pendants and cut edges.
//!
//! A graph admits a cycle covering when every edge lies either on a loop of
//! bounded edges or on an unbounded path joining two distinct half-lines.
//! Identifying all points at infinity as one auxiliary vertex turns that
//! definition into a bridge test: an edge lies on such a cycle iff it is not
//! a bridge of the augmented graph.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{EdgeId, HalfLineId, MetricGraph};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TopologyReport {
    pub n_halflines: usize,
    pub core_length: f64,
    pub has_terminal_edge: bool,
    pub admits_cycle_covering: bool,
    pub is_tree: bool,
    pub n_pendants: usize,
    /// Names of bounded edges whose removal disconnects the compact core.
    pub cut_edges: Vec<String>,
}

/// Outcome of the cycle-covering test with a witness either way.
#[derive(Debug, Clone, PartialEq)]
pub enum CycleCovering {
    /// Every edge tagged with the id of the two-edge-connected class of the
    /// augmented graph it belongs to; edges sharing a tag share cycles.
    Covered {
        cycle_class: BTreeMap<String, usize>,
    },
    /// Name of a blocking bridge (a bounded edge or a half-line).
    Blocked { bridge: String },
}

impl CycleCovering {
    pub fn is_covered(&self) -> bool {
        matches!(self, CycleCovering::Covered { .. })
    }
}

/// True iff some bounded edge ends at a vertex of total degree one.
pub fn has_terminal_edge(graph: &MetricGraph) -> bool {
    graph
        .bounded_edges()
        .iter()
        .any(|e| graph.degree(e.v1) == 1 || graph.degree(e.v2) == 1)
}

/// The augmented multigraph: original vertices plus a vertex at infinity
/// adjacent to every half-line attachment. Edge order: bounded edges first,
/// then half-lines.
fn augmented_edges(graph: &MetricGraph) -> (usize, Vec<(usize, usize)>) {
    let infinity = graph.n_vertices();
    let mut edges: Vec<(usize, usize)> = graph
        .bounded_edges()
        .iter()
        .map(|e| (e.v1.0, e.v2.0))
        .collect();
    edges.extend(graph.half_lines().iter().map(|h| (h.vertex.0, infinity)));
    (graph.n_vertices() + 1, edges)
}

fn edge_name(graph: &MetricGraph, idx: usize) -> String {
    let nb = graph.bounded_edges().len();
    if idx < nb {
        graph.edge(EdgeId(idx)).name.clone()
    } else {
        graph.half_line(HalfLineId(idx - nb)).name.clone()
    }
}

pub fn admits_cycle_covering(graph: &MetricGraph) -> CycleCovering {
    let (n, edges) = augmented_edges(graph);
    let bridge_set = bridges(n, &edges);
    if let Some(&first) = bridge_set.first() {
        return CycleCovering::Blocked {
            bridge: edge_name(graph, first),
        };
    }
    // no bridges: label two-edge-connected classes by flood fill
    let class = components_excluding(n, &edges, &bridge_set);
    let mut cycle_class = BTreeMap::new();
    for (idx, &(u, _)) in edges.iter().enumerate() {
        cycle_class.insert(edge_name(graph, idx), class[u]);
    }
    CycleCovering::Covered { cycle_class }
}

pub fn classify_topology(graph: &MetricGraph) -> TopologyReport {
    let nb = graph.bounded_edges().len();
    let is_tree =
        graph.bounded_edges().iter().all(|e| !e.is_loop()) && nb == graph.n_vertices() - 1;

    let n_pendants = graph
        .bounded_edges()
        .iter()
        .filter(|e| graph.degree(e.v1) == 1 || graph.degree(e.v2) == 1)
        .count();

    let core_edges: Vec<(usize, usize)> = graph
        .bounded_edges()
        .iter()
        .map(|e| (e.v1.0, e.v2.0))
        .collect();
    let mut cut_edges: Vec<String> = bridges(graph.n_vertices(), &core_edges)
        .into_iter()
        .map(|i| graph.edge(EdgeId(i)).name.clone())
        .collect();
    cut_edges.sort_unstable();

    TopologyReport {
        n_halflines: graph.n_half_lines(),
        core_length: graph.core_length(),
        has_terminal_edge: has_terminal_edge(graph),
        admits_cycle_covering: admits_cycle_covering(graph).is_covered(),
        is_tree,
        n_pendants,
        cut_edges,
    }
}

/// Bridge edges of a multigraph by low-link DFS. Loops are never bridges and
/// parallel edges shield each other (tree edges are skipped by index, not by
/// parent vertex).
fn bridges(n_vertices: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_vertices];
    for (i, &(u, v)) in edges.iter().enumerate() {
        if u == v {
            continue;
        }
        adj[u].push((v, i));
        adj[v].push((u, i));
    }

    let mut ord = vec![usize::MAX; n_vertices];
    let mut low = vec![usize::MAX; n_vertices];
    let mut result = Vec::new();
    let mut counter = 0usize;

    // iterative DFS to keep the stack shallow on long chains
    for start in 0..n_vertices {
        if ord[start] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
        ord[start] = counter;
        low[start] = counter;
        counter += 1;
        loop {
            let Some(frame) = stack.last_mut() else { break };
            let (u, via) = (frame.0, frame.1);
            if frame.2 < adj[u].len() {
                let (to, edge_idx) = adj[u][frame.2];
                frame.2 += 1;
                if edge_idx == via {
                    continue;
                }
                if ord[to] == usize::MAX {
                    ord[to] = counter;
                    low[to] = counter;
                    counter += 1;
                    stack.push((to, edge_idx, 0));
                } else {
                    low[u] = low[u].min(ord[to]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > ord[parent] {
                        result.push(via);
                    }
                }
            }
        }
    }
    result.sort_unstable();
    result
}

/// Connected-component labels after deleting the listed edges; labels are
/// assigned in vertex index order for determinism.
fn components_excluding(
    n_vertices: usize,
    edges: &[(usize, usize)],
    exclude: &[usize],
) -> Vec<usize> {
    let mut label = vec![usize::MAX; n_vertices];
    let mut next = 0usize;
    for start in 0..n_vertices {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(u) = stack.pop() {
            for (i, &(a, b)) in edges.iter().enumerate() {
                if exclude.binary_search(&i).is_ok() {
                    continue;
                }
                for (x, y) in [(a, b), (b, a)] {
                    if x == u && label[y] == usize::MAX {
                        label[y] = label[x];
                        stack.push(y);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures;
    use crate::graph::GraphBuilder;

    /// Independent oracle: an edge lies on a cycle iff its endpoints remain
    /// connected after removing it (loops trivially do).
    fn on_cycle_oracle(n: usize, edges: &[(usize, usize)], idx: usize) -> bool {
        let (u, v) = edges[idx];
        if u == v {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![u];
        seen[u] = true;
        while let Some(x) = stack.pop() {
            for (i, &(a, b)) in edges.iter().enumerate() {
                if i == idx {
                    continue;
                }
                for (p, q) in [(a, b), (b, a)] {
                    if p == x && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        seen[v]
    }

    fn covering_oracle(graph: &MetricGraph) -> bool {
        let (n, edges) = augmented_edges(graph);
        (0..edges.len()).all(|i| on_cycle_oracle(n, &edges, i))
    }

    #[test]
    fn tadpole_has_no_terminal_edge_and_no_covering() {
        let g = fixtures::tadpole(2.0);
        assert!(!has_terminal_edge(&g));
        match admits_cycle_covering(&g) {
            CycleCovering::Blocked { bridge } => assert_eq!(bridge, "tail"),
            other => panic!("expected blocked, got {other:?}"),
        }
        assert!(!covering_oracle(&g));
    }

    #[test]
    fn segment_with_one_half_line_has_terminal_edge() {
        let g = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .edge("e", "a", "b", 1.0)
            .half_line("h", "a")
            .build()
            .unwrap();
        assert!(has_terminal_edge(&g)); // free end b has degree 1
    }

    #[test]
    fn pendant_on_cycle_with_half_lines_has_terminal_edge() {
        // triangle with two half-lines plus a pendant edge
        let g = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .vertex("c")
            .vertex("d")
            .edge("ab", "a", "b", 1.0)
            .edge("bc", "b", "c", 1.0)
            .edge("ca", "c", "a", 1.0)
            .edge("pendant", "c", "d", 1.0)
            .half_line("h1", "a")
            .half_line("h2", "b")
            .build()
            .unwrap();
        assert!(has_terminal_edge(&g));
        assert!(!admits_cycle_covering(&g).is_covered());
    }

    #[test]
    fn line_through_one_edge_admits_covering() {
        let g = fixtures::fat_line(1.0);
        match admits_cycle_covering(&g) {
            CycleCovering::Covered { cycle_class } => {
                assert_eq!(cycle_class.len(), 3);
                // one cycle through everything
                let tags: Vec<usize> = cycle_class.values().copied().collect();
                assert!(tags.iter().all(|&t| t == tags[0]));
            }
            other => panic!("expected covered, got {other:?}"),
        }
        assert!(covering_oracle(&g));
    }

    #[test]
    fn trees_never_admit_coverings() {
        let g = fixtures::star_with_pendant(1.0);
        assert!(!admits_cycle_covering(&g).is_covered());
        let report = classify_topology(&g);
        assert!(report.is_tree);
        assert_eq!(report.cut_edges, vec!["pendant".to_string()]);
    }

    #[test]
    fn classify_tadpole() {
        let report = classify_topology(&fixtures::tadpole(2.0));
        assert_eq!(report.n_halflines, 1);
        assert!(!report.has_terminal_edge);
        assert!(!report.admits_cycle_covering);
        assert!(!report.is_tree);
        assert_eq!(report.n_pendants, 0);
        assert!((report.core_length - 2.0).abs() < 1e-15);
    }

    #[test]
    fn classify_star_with_pendant() {
        let report = classify_topology(&fixtures::star_with_pendant(1.0));
        assert_eq!(report.n_halflines, 3);
        assert!(report.has_terminal_edge);
        assert!(report.is_tree);
        assert_eq!(report.n_pendants, 1);
    }

    #[test]
    fn signpost_stem_is_a_cut_edge() {
        let report = classify_topology(&fixtures::signpost(2.0, 1.0));
        assert!(report.cut_edges.contains(&"stem".to_string()));
        assert!(!report.has_terminal_edge);
        assert!(!report.admits_cycle_covering);
        assert_eq!(report.n_halflines, 2);
    }

    #[test]
    fn parallel_edges_shield_each_other() {
        let g = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .edge("e1", "a", "b", 1.0)
            .edge("e2", "a", "b", 1.0)
            .half_line("h", "a")
            .build()
            .unwrap();
        // e1 and e2 form a cycle but the lone half-line is a bridge at infinity
        match admits_cycle_covering(&g) {
            CycleCovering::Blocked { bridge } => assert_eq!(bridge, "h"),
            other => panic!("expected blocked, got {other:?}"),
        }
        let report = classify_topology(&g);
        assert!(report.cut_edges.is_empty());
        assert!(!report.is_tree);
    }

    #[test]
    fn bridge_finder_matches_removal_oracle_on_random_multigraphs() {
        let mut rng = crate::linalg::SplitMix64::new(42);
        let mut tested = 0;
        while tested < 200 {
            let nv = 2 + (rng.next_u64() % 4) as usize;
            let ne = 1 + (rng.next_u64() % 6) as usize;
            let edges: Vec<(usize, usize)> = (0..ne)
                .map(|_| {
                    (
                        (rng.next_u64() % nv as u64) as usize,
                        (rng.next_u64() % nv as u64) as usize,
                    )
                })
                .collect();
            let found = bridges(nv, &edges);
            for i in 0..ne {
                let is_bridge = found.binary_search(&i).is_ok();
                assert_eq!(
                    !on_cycle_oracle(nv, &edges, i),
                    is_bridge,
                    "edges={edges:?} i={i}"
                );
            }
            tested += 1;
        }
    }

    #[test]
    fn terminal_edge_implies_no_covering_on_random_graphs() {
        let mut rng = crate::linalg::SplitMix64::new(7);
        let mut built = 0;
        while built < 100 {
            let nv = 1 + (rng.next_u64() % 4) as usize;
            let ne = 1 + (rng.next_u64() % 5) as usize;
            let nh = 1 + (rng.next_u64() % 3) as usize;
            let mut b = GraphBuilder::new();
            for v in 0..nv {
                b = b.vertex(&format!("v{v}"));
            }
            for e in 0..ne {
                let u = (rng.next_u64() % nv as u64) as usize;
                let w = (rng.next_u64() % nv as u64) as usize;
                b = b.edge(&format!("e{e}"), &format!("v{u}"), &format!("v{w}"), 1.0);
            }
            for h in 0..nh {
                let u = (rng.next_u64() % nv as u64) as usize;
                b = b.half_line(&format!("h{h}"), &format!("v{u}"));
            }
            let Ok(g) = b.build() else { continue };
            built += 1;
            let report = classify_topology(&g);
            assert_eq!(report.admits_cycle_covering, covering_oracle(&g));
            if report.has_terminal_edge {
                assert!(!report.admits_cycle_covering);
            }
            if report.is_tree {
                assert_eq!(report.cut_edges.len(), g.bounded_edges().len());
            }
            assert!(report.n_pendants >= usize::from(report.has_terminal_edge));
        }
    }
}
