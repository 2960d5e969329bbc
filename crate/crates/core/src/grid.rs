//! Per-edge uniform grids with shared vertex degrees of freedom.
//!
//! Every bounded edge gets a uniform step that divides its length exactly and
//! never exceeds the requested `h`. Half-lines are truncated to `[0, L_trunc]`
//! with an artificial far endpoint that carries a homogeneous Dirichlet
//! condition (bound states decay exponentially there, so the truncation error
//! is controlled and tested by doubling `L_trunc`).
//!
//! Node ordering is fixed for reproducible outputs: graph vertices sorted by
//! name, then the far endpoints of truncated half-lines sorted by half-line
//! name, then edge-interior nodes edge by edge (bounded edges sorted by name,
//! then half-lines sorted by name, increasing coordinate within each edge).

use crate::error::GridError;
use crate::graph::{EdgeId, HalfLineId, MetricGraph, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphEdgeRef {
    Bounded(EdgeId),
    HalfLine(HalfLineId),
}

#[derive(Debug, Clone)]
pub struct EdgeGrid {
    pub label: String,
    pub edge: GraphEdgeRef,
    /// Actual step, `<= h`, dividing the (truncated) length exactly.
    pub step: f64,
    /// Global node ids, increasing coordinate; `nodes[k]` sits at `k * step`.
    pub nodes: Vec<usize>,
}

impl EdgeGrid {
    pub fn is_core(&self) -> bool {
        matches!(self.edge, GraphEdgeRef::Bounded(_))
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// An element of the discretization: one subinterval of one edge.
#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub node_a: usize,
    pub node_b: usize,
    pub step: f64,
    pub core: bool,
}

#[derive(Debug, Clone)]
pub struct Grid {
    graph: MetricGraph,
    h: f64,
    l_trunc: f64,
    pub edge_grids: Vec<EdgeGrid>,
    n_nodes: usize,
    n_vertex_dofs: usize,
    vertex_node: Vec<usize>,
    free_of_node: Vec<Option<usize>>,
    node_of_free: Vec<usize>,
}

pub fn build_grid(graph: &MetricGraph, h: f64, l_trunc: f64) -> Result<Grid, GridError> {
    if !(h > 0.0) {
        return Err(GridError::NonpositiveStep(h));
    }
    if !(l_trunc > 0.0) {
        return Err(GridError::NonpositiveTruncation(l_trunc));
    }
    if l_trunc < 10.0 * h {
        return Err(GridError::TruncationTooShort {
            l_trunc,
            min: 10.0 * h,
        });
    }
    let subdivisions = |length: f64| -> usize {
        // guard against 4.0000000000000004-style ceil overshoot
        (((length / h) * (1.0 - 1e-12)).ceil() as usize).max(3)
    };
    let mut counts_bounded = Vec::with_capacity(graph.bounded_edges().len());
    for e in graph.bounded_edges() {
        if e.length < 2.0 * h {
            return Err(GridError::EdgeTooShort {
                edge: e.name.clone(),
                length: e.length,
                min: 2.0 * h,
            });
        }
        counts_bounded.push(subdivisions(e.length));
    }
    let counts_half = vec![subdivisions(l_trunc); graph.half_lines().len()];
    Ok(assemble_grid(
        graph,
        h,
        l_trunc,
        &counts_bounded,
        &counts_half,
    ))
}

fn assemble_grid(
    graph: &MetricGraph,
    h: f64,
    l_trunc: f64,
    counts_bounded: &[usize],
    counts_half: &[usize],
) -> Grid {
    let nv = graph.n_vertices();

    // vertex dofs in name order
    let mut vertex_order: Vec<usize> = (0..nv).collect();
    vertex_order.sort_by(|&a, &b| {
        graph
            .vertex_name(VertexId(a))
            .cmp(graph.vertex_name(VertexId(b)))
    });
    let mut vertex_node = vec![0usize; nv];
    for (rank, &v) in vertex_order.iter().enumerate() {
        vertex_node[v] = rank;
    }

    // far endpoints of half-lines, in half-line name order
    let mut half_order: Vec<usize> = (0..graph.half_lines().len()).collect();
    half_order.sort_by(|&a, &b| {
        graph
            .half_line(HalfLineId(a))
            .name
            .cmp(&graph.half_line(HalfLineId(b)).name)
    });
    let mut far_node = vec![0usize; half_order.len()];
    for (rank, &hidx) in half_order.iter().enumerate() {
        far_node[hidx] = nv + rank;
    }
    let n_vertex_dofs = nv + half_order.len();

    // interior nodes edge by edge, bounded edges first, each block name-sorted
    let mut edge_order: Vec<usize> = (0..graph.bounded_edges().len()).collect();
    edge_order.sort_by(|&a, &b| graph.edge(EdgeId(a)).name.cmp(&graph.edge(EdgeId(b)).name));

    let mut next_node = n_vertex_dofs;
    let mut edge_grids = Vec::new();
    for &eidx in &edge_order {
        let e = graph.edge(EdgeId(eidx));
        let n = counts_bounded[eidx];
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(vertex_node[e.v1.0]);
        for _ in 1..n {
            nodes.push(next_node);
            next_node += 1;
        }
        nodes.push(vertex_node[e.v2.0]);
        edge_grids.push(EdgeGrid {
            label: e.name.clone(),
            edge: GraphEdgeRef::Bounded(EdgeId(eidx)),
            step: e.length / n as f64,
            nodes,
        });
    }
    for &hidx in &half_order {
        let hl = graph.half_line(HalfLineId(hidx));
        let n = counts_half[hidx];
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(vertex_node[hl.vertex.0]);
        for _ in 1..n {
            nodes.push(next_node);
            next_node += 1;
        }
        nodes.push(far_node[hidx]);
        edge_grids.push(EdgeGrid {
            label: hl.name.clone(),
            edge: GraphEdgeRef::HalfLine(HalfLineId(hidx)),
            step: l_trunc / n as f64,
            nodes,
        });
    }
    let n_nodes = next_node;

    // far endpoints are Dirichlet-constrained; every other node is free
    let mut free_of_node = vec![None; n_nodes];
    let mut node_of_free = Vec::with_capacity(n_nodes - half_order.len());
    for node in 0..n_nodes {
        let is_far = node >= nv && node < n_vertex_dofs;
        if !is_far {
            free_of_node[node] = Some(node_of_free.len());
            node_of_free.push(node);
        }
    }

    Grid {
        graph: graph.clone(),
        h,
        l_trunc,
        edge_grids,
        n_nodes,
        n_vertex_dofs,
        vertex_node,
        free_of_node,
        node_of_free,
    }
}

impl Grid {
    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn l_trunc(&self) -> f64 {
        self.l_trunc
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Graph vertices plus truncation boundary nodes.
    pub fn n_vertex_dofs(&self) -> usize {
        self.n_vertex_dofs
    }

    pub fn n_free(&self) -> usize {
        self.node_of_free.len()
    }

    pub fn vertex_node(&self, v: VertexId) -> usize {
        self.vertex_node[v.0]
    }

    pub fn is_far(&self, node: usize) -> bool {
        node >= self.graph.n_vertices() && node < self.n_vertex_dofs
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_of_node[node]
    }

    pub fn node_of_free(&self, free: usize) -> usize {
        self.node_of_free[free]
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.edge_grids.iter().flat_map(|eg| {
            let core = eg.is_core();
            let step = eg.step;
            eg.nodes.windows(2).map(move |w| Element {
                node_a: w[0],
                node_b: w[1],
                step,
                core,
            })
        })
    }

    pub fn n_elements(&self) -> usize {
        self.edge_grids.iter().map(|eg| eg.n_elements()).sum()
    }

    /// Sum of all (truncated) edge lengths.
    pub fn total_length(&self) -> f64 {
        self.edge_grids
            .iter()
            .map(|eg| eg.step * eg.n_elements() as f64)
            .sum()
    }

    /// Same graph with every edge count doubled; nodal spaces are nested.
    pub fn refined(&self) -> Grid {
        let mut counts_bounded = vec![0usize; self.graph.bounded_edges().len()];
        let mut counts_half = vec![0usize; self.graph.half_lines().len()];
        for eg in &self.edge_grids {
            match eg.edge {
                GraphEdgeRef::Bounded(EdgeId(i)) => counts_bounded[i] = 2 * eg.n_elements(),
                GraphEdgeRef::HalfLine(HalfLineId(i)) => counts_half[i] = 2 * eg.n_elements(),
            }
        }
        assemble_grid(
            &self.graph,
            self.h / 2.0,
            self.l_trunc,
            &counts_bounded,
            &counts_half,
        )
    }

    /// Contiguous runs of edge-interior free indices. Together with the
    /// graph-vertex dofs (free indices `0..n_vertices`) they partition the
    /// free dofs, and every assembled operator is tridiagonal inside a run.
    pub fn interior_chains(&self) -> Vec<(usize, usize)> {
        let mut chains = Vec::new();
        for eg in &self.edge_grids {
            let interior = &eg.nodes[1..eg.nodes.len() - 1];
            if interior.is_empty() {
                continue;
            }
            let start = self.free_of_node[interior[0]].expect("interior nodes are free");
            debug_assert!(interior
                .iter()
                .enumerate()
                .all(|(k, &n)| self.free_of_node[n] == Some(start + k)));
            chains.push((start, interior.len()));
        }
        chains
    }

    /// Free indices of the graph vertices (the non-chain dofs).
    pub fn vertex_free_indices(&self) -> Vec<usize> {
        (0..self.graph.n_vertices())
            .map(|v| self.free_of_node[self.vertex_node[v]].expect("vertex dofs are free"))
            .collect()
    }

    /// Distance from every node to a set of weighted vertex seeds, measured
    /// along the graph.
    pub fn node_distances(&self, seeds: &[(VertexId, f64)]) -> Vec<f64> {
        let dv = self.graph.distances_from(seeds);
        let mut out = vec![f64::INFINITY; self.n_nodes];
        for eg in &self.edge_grids {
            let len = eg.step * eg.n_elements() as f64;
            match eg.edge {
                GraphEdgeRef::Bounded(eid) => {
                    let e = self.graph.edge(eid);
                    for (k, &node) in eg.nodes.iter().enumerate() {
                        let x = k as f64 * eg.step;
                        let d = (dv[e.v1.0] + x).min(dv[e.v2.0] + (len - x));
                        out[node] = out[node].min(d);
                    }
                }
                GraphEdgeRef::HalfLine(hid) => {
                    let h = self.graph.half_line(hid);
                    for (k, &node) in eg.nodes.iter().enumerate() {
                        let x = k as f64 * eg.step;
                        out[node] = out[node].min(dv[h.vertex.0] + x);
                    }
                }
            }
        }
        out
    }

    /// Distance from every node to the point at coordinate `x0` inside the
    /// given bounded edge.
    pub fn distances_to_edge_point(&self, edge: EdgeId, x0: f64) -> Vec<f64> {
        let e = self.graph.edge(edge);
        let mut d = self.node_distances(&[(e.v1, x0), (e.v2, e.length - x0)]);
        for eg in &self.edge_grids {
            if eg.edge == GraphEdgeRef::Bounded(edge) {
                for (k, &node) in eg.nodes.iter().enumerate() {
                    let x = k as f64 * eg.step;
                    d[node] = d[node].min((x - x0).abs());
                }
            }
        }
        d
    }

    /// P1 prolongation of nodal values to the once-refined grid.
    pub fn prolong(&self, fine: &Grid, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n_nodes);
        let mut out = vec![0.0; fine.n_nodes];
        for (coarse_eg, fine_eg) in self.edge_grids.iter().zip(&fine.edge_grids) {
            debug_assert_eq!(coarse_eg.label, fine_eg.label);
            debug_assert_eq!(2 * coarse_eg.n_elements(), fine_eg.n_elements());
            for (k, &fnode) in fine_eg.nodes.iter().enumerate() {
                let val = if k % 2 == 0 {
                    values[coarse_eg.nodes[k / 2]]
                } else {
                    0.5 * (values[coarse_eg.nodes[k / 2]] + values[coarse_eg.nodes[k / 2 + 1]])
                };
                out[fnode] = val;
            }
        }
        out
    }
}
