//! P1 finite-element operators on a grid: stiffness with optional δ-coupling,
//! mass, and the mass restricted to the compact core.
//!
//! Everything is assembled over the free degrees of freedom; the artificial
//! far endpoints of truncated half-lines are eliminated (homogeneous
//! Dirichlet). Continuity at vertices is automatic since edge endpoints share
//! vertex dofs, and the zero-sum (Kirchhoff) or δ-type derivative condition is
//! the natural condition of the weak form.

use crate::grid::Grid;
use crate::linalg::Csr;

#[derive(Debug, Clone)]
pub struct LaplaceOperators {
    /// `∫ u'v' + α Σ_v u(v)v(v)`, symmetric positive semidefinite for α ≥ 0.
    pub stiffness: Csr,
    /// `∫ uv` over the whole truncated graph, symmetric positive definite.
    pub mass: Csr,
    /// `∫_K uv`, the mass restricted to bounded edges.
    pub core_mass: Csr,
    pub alpha: f64,
}

pub fn assemble_laplacian(grid: &Grid, alpha: f64) -> LaplaceOperators {
    let n = grid.n_free();
    let mut s_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut m_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut mc_trip: Vec<(usize, usize, f64)> = Vec::new();

    for el in grid.elements() {
        let ia = grid.free_index(el.node_a);
        let ib = grid.free_index(el.node_b);
        let h = el.step;
        let k = 1.0 / h;
        let local_s = [[k, -k], [-k, k]];
        let local_m = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        let idx = [ia, ib];
        for r in 0..2 {
            for c in 0..2 {
                if let (Some(i), Some(j)) = (idx[r], idx[c]) {
                    s_trip.push((i, j, local_s[r][c]));
                    m_trip.push((i, j, local_m[r][c]));
                    if el.core {
                        mc_trip.push((i, j, local_m[r][c]));
                    }
                }
            }
        }
    }

    if alpha != 0.0 {
        for v in 0..grid.graph().n_vertices() {
            let node = grid.vertex_node(crate::graph::VertexId(v));
            let i = grid.free_index(node).expect("vertex dofs are free");
            s_trip.push((i, i, alpha));
        }
    }

    LaplaceOperators {
        stiffness: Csr::from_triplets(n, n, s_trip),
        mass: Csr::from_triplets(n, n, m_trip),
        core_mass: Csr::from_triplets(n, n, mc_trip),
        alpha,
    }
}

/// Coordinate text dump, one `row col value` line per stored entry.
pub fn dump_coordinate(matrix: &Csr) -> String {
    let mut out = String::new();
    for (r, c, v) in matrix.triplets() {
        out.push_str(&format!("{r} {c} {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{fixtures, GraphBuilder};
    use crate::grid::build_grid;
    use crate::linalg::{dot, smallest_generalized_eigenvalues};

    #[test]
    fn neumann_segment_eigenvalues_match_separation_of_variables() {
        // single edge of length pi, free ends: Kirchhoff at degree-1 vertices
        // reduces to Neumann, so the pencil eigenvalues are (k pi / l)^2 = k^2
        let g = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .edge("e", "a", "b", std::f64::consts::PI)
            .build_allowing_compact()
            .unwrap();
        let grid = build_grid(&g, 0.02, 30.0).unwrap();
        let ops = assemble_laplacian(&grid, 0.0);
        let eigs =
            smallest_generalized_eigenvalues(&ops.stiffness, &ops.mass, 5, -0.5, 60).unwrap();
        for (k, v) in eigs.iter().enumerate() {
            let expect = (k * k) as f64;
            assert!(
                (v - expect).abs() < 2e-3 * (expect + 1.0),
                "k={k} got {v} expected {expect}"
            );
        }
    }

    #[test]
    fn stiffness_annihilates_constants_where_no_dirichlet_is_seen() {
        let g = fixtures::tadpole(2.0);
        let grid = build_grid(&g, 0.1, 5.0).unwrap();
        let ops = assemble_laplacian(&grid, 0.0);
        let ones = vec![1.0; grid.n_free()];
        let su = ops.stiffness.matvec(&ones);
        // rows of core-interior nodes and the vertex see no far column
        for eg in grid.edge_grids.iter().filter(|eg| eg.is_core()) {
            for &node in &eg.nodes {
                let i = grid.free_index(node).unwrap();
                assert!(su[i].abs() < 1e-12, "row {i}: {}", su[i]);
            }
        }
    }

    #[test]
    fn truncated_half_line_pair_behaves_like_dirichlet_interval() {
        // two truncated half-lines joined through a tiny core segment:
        // approximately an interval of length 2 L + eps with Dirichlet ends
        let eps = 0.1;
        let l_trunc = 5.0;
        let g = fixtures::fat_line(eps);
        let grid = build_grid(&g, 0.05, l_trunc).unwrap();
        let ops = assemble_laplacian(&grid, 0.0);
        let eigs =
            smallest_generalized_eigenvalues(&ops.stiffness, &ops.mass, 3, -0.5, 50).unwrap();
        let total = 2.0 * l_trunc + eps;
        for (k, v) in eigs.iter().enumerate() {
            let expect = (((k + 1) as f64) * std::f64::consts::PI / total).powi(2);
            assert!(
                (v - expect).abs() < 2e-2 * expect,
                "k={k} got {v} expected {expect}"
            );
        }
    }

    #[test]
    fn operators_are_exactly_symmetric() {
        let g = fixtures::signpost(2.0, 1.0);
        let grid = build_grid(&g, 0.05, 5.0).unwrap();
        let ops = assemble_laplacian(&grid, 1.5);
        assert_eq!(ops.stiffness.max_asymmetry(), 0.0);
        assert_eq!(ops.mass.max_asymmetry(), 0.0);
        assert_eq!(ops.core_mass.max_asymmetry(), 0.0);
    }

    #[test]
    fn delta_coupling_adds_alpha_at_vertex_diagonals_only() {
        let g = fixtures::tadpole(2.0);
        let grid = build_grid(&g, 0.1, 5.0).unwrap();
        let s0 = assemble_laplacian(&grid, 0.0).stiffness;
        let alpha = 0.7;
        let s1 = assemble_laplacian(&grid, alpha).stiffness;
        let v = grid
            .free_index(grid.vertex_node(crate::graph::VertexId(0)))
            .unwrap();
        for r in 0..s0.n_rows {
            for (rr, c, val) in s1.triplets().filter(|&(rr, _, _)| rr == r) {
                let expect = s0.get(rr, c) + if rr == v && c == v { alpha } else { 0.0 };
                assert!((val - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_is_positive_semidefinite_and_mass_definite() {
        let g = fixtures::signpost(2.0, 1.0);
        let grid = build_grid(&g, 0.1, 5.0).unwrap();
        let ops = assemble_laplacian(&grid, 0.0);
        let mut rng = crate::linalg::SplitMix64::new(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..grid.n_free()).map(|_| rng.next_f64()).collect();
            assert!(dot(&x, &ops.stiffness.matvec(&x)) >= -1e-12);
            assert!(dot(&x, &ops.mass.matvec(&x)) > 0.0);
        }
    }

    #[test]
    fn mass_of_constant_equals_total_length_on_compact_graph() {
        let g = GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .vertex("c")
            .edge("e1", "a", "b", 1.25)
            .edge("e2", "b", "c", 0.75)
            .build_allowing_compact()
            .unwrap();
        let grid = build_grid(&g, 0.05, 30.0).unwrap();
        let ops = assemble_laplacian(&grid, 0.0);
        let ones = vec![1.0; grid.n_free()];
        let total = dot(&ones, &ops.mass.matvec(&ones));
        assert!((total - 2.0).abs() < 1e-12);
        let core = dot(&ones, &ops.core_mass.matvec(&ones));
        assert!((core - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_refinement_converges_at_second_order() {
        let g = fixtures::tadpole(2.0);
        let grid_h = build_grid(&g, 0.1, 5.0).unwrap();
        let grid_h2 = grid_h.refined();
        let grid_h4 = grid_h2.refined();
        let eig = |grid: &crate::grid::Grid| {
            let ops = assemble_laplacian(grid, 0.0);
            smallest_generalized_eigenvalues(&ops.stiffness, &ops.mass, 5, -0.5, 60).unwrap()
        };
        let e1 = eig(&grid_h);
        let e2 = eig(&grid_h2);
        let e4 = eig(&grid_h4);
        for k in 1..5 {
            let d1 = (e1[k] - e2[k]).abs();
            let d2 = (e2[k] - e4[k]).abs();
            let ratio = d1 / d2;
            assert!(
                (2.5..7.0).contains(&ratio),
                "k={k}: successive eigenvalue differences {d1:.3e}/{d2:.3e} ratio {ratio:.2}"
            );
        }
    }

    #[test]
    fn coordinate_dump_round_trips_entries() {
        let g = fixtures::tadpole(2.0);
        let grid = build_grid(&g, 0.5, 5.0).unwrap();
        let ops = assemble_laplacian(&grid, 0.0);
        let dump = dump_coordinate(&ops.mass);
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), ops.mass.nnz());
        let first: Vec<&str> = lines[0].split_whitespace().collect();
        assert_eq!(first.len(), 3);
    }
}
