//! CSV companions for plotting: fields sampled per edge and spinor
//! components on the staggered grid. Row order follows the fixed edge
//! ordering of the grid, so identical inputs produce identical bytes.

use crate::dirac::Spinor;
use crate::field::Field;
use crate::grid::Grid;

/// `edge,x,value` rows for every node of every edge.
pub fn state_csv(grid: &Grid, u: &Field) -> String {
    let mut out = String::from("edge,x,value\n");
    for eg in &grid.edge_grids {
        for (k, &node) in eg.nodes.iter().enumerate() {
            let x = k as f64 * eg.step;
            out.push_str(&format!("{},{},{}\n", eg.label, x, u.values[node]));
        }
    }
    out
}

/// `edge,x,component,re,im` rows: `phi` at nodes, `chi` at midpoints.
pub fn spinor_csv(grid: &Grid, psi: &Spinor) -> String {
    let mut out = String::from("edge,x,component,re,im\n");
    for eg in &grid.edge_grids {
        for (k, &node) in eg.nodes.iter().enumerate() {
            let x = k as f64 * eg.step;
            let v = psi.phi[node];
            out.push_str(&format!("{},{},phi,{},{}\n", eg.label, x, v.re, v.im));
        }
    }
    let mut chi_idx = 0usize;
    for eg in &grid.edge_grids {
        for k in 0..eg.n_elements() {
            let x = (k as f64 + 0.5) * eg.step;
            let v = psi.chi[chi_idx];
            out.push_str(&format!("{},{},chi,{},{}\n", eg.label, x, v.re, v.im));
            chi_idx += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures;
    use crate::grid::build_grid;

    #[test]
    fn state_csv_rows_cover_all_edge_nodes() {
        let grid = build_grid(&fixtures::tadpole(2.0), 0.5, 5.0).unwrap();
        let u = Field::zeros(&grid);
        let csv = state_csv(&grid, &u);
        let expected_rows: usize = grid.edge_grids.iter().map(|eg| eg.nodes.len()).sum();
        assert_eq!(csv.lines().count(), expected_rows + 1);
    }

    #[test]
    fn spinor_csv_lists_phi_then_chi() {
        let grid = build_grid(&fixtures::tadpole(2.0), 0.5, 5.0).unwrap();
        let psi = Spinor::zeros(&grid, 1.0, 1.0);
        let csv = spinor_csv(&grid, &psi);
        assert!(csv.contains(",phi,"));
        assert!(csv.contains(",chi,"));
    }
}
