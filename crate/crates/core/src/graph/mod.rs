//! Metric multigraphs with bounded edges and half-lines.
//!
//! A graph here is a connected multigraph where every bounded edge carries a
//! positive length and half-lines are attached to single vertices. Loops and
//! parallel edges are allowed. Validation enforces connectivity, at least one
//! half-line (noncompactness) and a non-empty compact core of bounded edges.

mod parse;
mod topology;

pub use parse::{parse_graph, serialize_graph};
pub use topology::{
    admits_cycle_covering, classify_topology, has_terminal_edge, CycleCovering, TopologyReport,
};

use crate::error::GraphError;

/// Index of a vertex in `MetricGraph::vertices`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub usize);

/// Index of a bounded edge in `MetricGraph::bounded_edges`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

/// Index of a half-line in `MetricGraph::half_lines`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfLineId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedEdge {
    pub name: String,
    pub v1: VertexId,
    pub v2: VertexId,
    pub length: f64,
}

impl BoundedEdge {
    pub fn is_loop(&self) -> bool {
        self.v1 == self.v2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfLine {
    pub name: String,
    pub vertex: VertexId,
}

/// A metric graph: vertices, bounded edges with lengths, and half-lines.
/// Immutable once built; all topology queries borrow it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<String>,
    bounded_edges: Vec<BoundedEdge>,
    half_lines: Vec<HalfLine>,
}

/// Incremental construction; `build` validates the standing hypotheses.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    vertices: Vec<String>,
    edges: Vec<(String, String, String, f64)>,
    half_lines: Vec<(String, String)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(mut self, name: &str) -> Self {
        self.vertices.push(name.to_string());
        self
    }

    pub fn edge(mut self, name: &str, v1: &str, v2: &str, length: f64) -> Self {
        self.edges
            .push((name.to_string(), v1.to_string(), v2.to_string(), length));
        self
    }

    pub fn half_line(mut self, name: &str, vertex: &str) -> Self {
        self.half_lines.push((name.to_string(), vertex.to_string()));
        self
    }

    pub fn build(self) -> Result<MetricGraph, GraphError> {
        self.assemble(true)
    }

    /// Skips the noncompactness check (no half-line required). Used for
    /// analytic reference problems on compact cores; the solvers themselves
    /// only ever see validated graphs.
    pub fn build_allowing_compact(self) -> Result<MetricGraph, GraphError> {
        self.assemble(false)
    }

    fn assemble(self, require_half_line: bool) -> Result<MetricGraph, GraphError> {
        if self.vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut names: Vec<String> = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            if names.contains(v) {
                return Err(GraphError::DuplicateName(v.clone()));
            }
            names.push(v.clone());
        }
        let lookup = |name: &str| -> Result<VertexId, GraphError> {
            names
                .iter()
                .position(|n| n == name)
                .map(VertexId)
                .ok_or_else(|| GraphError::UnknownVertex {
                    vertex: name.to_string(),
                    line: 0,
                })
        };

        let mut edge_names: Vec<&str> = Vec::new();
        let mut bounded_edges = Vec::with_capacity(self.edges.len());
        for (name, v1, v2, length) in &self.edges {
            if edge_names.contains(&name.as_str()) {
                return Err(GraphError::DuplicateName(name.clone()));
            }
            edge_names.push(name);
            if !length.is_finite() || *length <= 0.0 {
                return Err(GraphError::NonpositiveLength {
                    edge: name.clone(),
                    length: *length,
                });
            }
            bounded_edges.push(BoundedEdge {
                name: name.clone(),
                v1: lookup(v1)?,
                v2: lookup(v2)?,
                length: *length,
            });
        }
        let mut half_lines = Vec::with_capacity(self.half_lines.len());
        for (name, v) in &self.half_lines {
            if edge_names.contains(&name.as_str()) {
                return Err(GraphError::DuplicateName(name.clone()));
            }
            edge_names.push(name);
            half_lines.push(HalfLine {
                name: name.clone(),
                vertex: lookup(v)?,
            });
        }

        let graph = MetricGraph {
            vertices: names,
            bounded_edges,
            half_lines,
        };
        if require_half_line && graph.half_lines.is_empty() {
            return Err(GraphError::ZeroHalfLines);
        }
        if graph.bounded_edges.is_empty() {
            return Err(GraphError::EmptyCompactCore);
        }
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }
}

impl MetricGraph {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertices[v.0]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertices.iter().position(|n| n == name).map(VertexId)
    }

    pub fn bounded_edges(&self) -> &[BoundedEdge] {
        &self.bounded_edges
    }

    pub fn half_lines(&self) -> &[HalfLine] {
        &self.half_lines
    }

    pub fn edge(&self, e: EdgeId) -> &BoundedEdge {
        &self.bounded_edges[e.0]
    }

    pub fn half_line(&self, h: HalfLineId) -> &HalfLine {
        &self.half_lines[h.0]
    }

    pub fn n_half_lines(&self) -> usize {
        self.half_lines.len()
    }

    /// Total length of the compact core, `sum of edge lengths`.
    pub fn core_length(&self) -> f64 {
        self.bounded_edges.iter().map(|e| e.length).sum()
    }

    /// Vertex degree counting bounded edges (loops twice) and half-lines.
    pub fn degree(&self, v: VertexId) -> usize {
        let mut d = 0;
        for e in &self.bounded_edges {
            if e.v1 == v {
                d += 1;
            }
            if e.v2 == v {
                d += 1;
            }
        }
        for h in &self.half_lines {
            if h.vertex == v {
                d += 1;
            }
        }
        d
    }

    fn is_connected(&self) -> bool {
        // half-lines do not join vertices, so connectivity is carried by the
        // bounded edges alone
        let n = self.vertices.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for e in &self.bounded_edges {
                for (a, b) in [(e.v1.0, e.v2.0), (e.v2.0, e.v1.0)] {
                    if a == u && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Shortest-path distances from weighted seed vertices along bounded
    /// edges (half-lines never join vertices). Plain Dijkstra; graphs here
    /// have a handful of vertices.
    pub fn distances_from(&self, seeds: &[(VertexId, f64)]) -> Vec<f64> {
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        for &(v, d0) in seeds {
            dist[v.0] = dist[v.0].min(d0);
        }
        let mut done = vec![false; n];
        loop {
            let mut best: Option<usize> = None;
            for i in 0..n {
                if !done[i] && dist[i].is_finite() && best.map_or(true, |b| dist[i] < dist[b]) {
                    best = Some(i);
                }
            }
            let Some(u) = best else { break };
            done[u] = true;
            for e in &self.bounded_edges {
                for (a, b) in [(e.v1.0, e.v2.0), (e.v2.0, e.v1.0)] {
                    if a == u && dist[u] + e.length < dist[b] {
                        dist[b] = dist[u] + e.length;
                    }
                }
            }
        }
        dist
    }

    /// Stable content hash of the normalized document (FNV-1a).
    pub fn content_hash(&self) -> String {
        let doc = serialize_graph(self);
        let mut h: u64 = 0xcbf29ce484222325;
        for b in doc.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    /// Scale every bounded edge length by `factor` (half-lines are unaffected
    /// since they have no length). Used for homothety experiments.
    pub fn scaled(&self, factor: f64) -> MetricGraph {
        let mut g = self.clone();
        for e in &mut g.bounded_edges {
            e.length *= factor;
        }
        g
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_validates_hypotheses() {
        // three half-lines at one vertex, no bounded edges: empty compact core
        let err = GraphBuilder::new()
            .vertex("c")
            .half_line("h1", "c")
            .half_line("h2", "c")
            .half_line("h3", "c")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::EmptyCompactCore);

        // tadpole is valid
        let g = fixtures::tadpole(2.0);
        assert_eq!(g.n_half_lines(), 1);
        assert!((g.core_length() - 2.0).abs() < 1e-15);

        // two components, each with a half-line: disconnected
        let err = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .vertex("c")
            .vertex("d")
            .edge("e1", "a", "b", 1.0)
            .edge("e2", "c", "d", 1.0)
            .half_line("h1", "a")
            .half_line("h2", "c")
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::Disconnected);

        // compact graph is rejected unless explicitly allowed
        let err = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .edge("e", "a", "b", 1.0)
            .build()
            .unwrap_err();
        assert_eq!(err, GraphError::ZeroHalfLines);
        assert!(GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .edge("e", "a", "b", 1.0)
            .build_allowing_compact()
            .is_ok());
    }

    #[test]
    fn degree_counts_loops_twice() {
        let g = fixtures::tadpole(2.0);
        assert_eq!(g.degree(VertexId(0)), 3); // loop twice + half-line
        let g = fixtures::signpost(2.0, 1.0);
        let a = g.vertex_by_name("a").unwrap();
        let b = g.vertex_by_name("b").unwrap();
        assert_eq!(g.degree(a), 3);
        assert_eq!(g.degree(b), 3);
    }

    #[test]
    fn nonpositive_length_is_rejected() {
        let err = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .edge("e", "a", "b", -1.0)
            .half_line("h", "a")
            .build()
            .unwrap_err();
        assert!(matches!(err, GraphError::NonpositiveLength { .. }));
    }
}
