//! Estimation of optimal Gagliardo-Nirenberg constants on a metric graph.
//!
//! Three quotients are maximized over the discrete continuity space:
//!
//! * whole-graph:   `||u||_p^p / (||u'||^(p/2-1) ||u||^(p/2+1))`
//! * core-restricted: same with the numerator integrated over the compact
//!   core only (defines the reduced critical mass at p = 6)
//! * sup-norm:      `||u||_inf / (||u'||^(1/2) ||u||^(1/2))`
//!
//! Every reported value is a certified lower bound: it is the quotient of a
//! feasible discrete field (Simpson under-integrates `|u|^p` of a P1 field,
//! so the discrete quotient never exceeds the continuum one). Refining the
//! grid prolongs the maximizer to a nested space, which makes the refinement
//! history nondecreasing.

use serde::Serialize;

use crate::assemble::assemble_laplacian;
use crate::error::SolveError;
use crate::field::Field;
use crate::graph::MetricGraph;
use crate::grid::{build_grid, Grid};
use crate::linalg::{axpy, cg, dot, scale, Csr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GnVariant {
    WholeGraph,
    CoreRestricted,
    SupNorm,
}

#[derive(Debug, Clone, Copy)]
pub struct GnOptions {
    pub h: f64,
    pub l_trunc: f64,
    /// Number of nested grid levels; the requested `h` is the finest.
    pub levels: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GnOptions {
    fn default() -> Self {
        GnOptions {
            h: 0.02,
            l_trunc: 30.0,
            levels: 2,
            tol: 1e-8,
            max_iter: 4000,
        }
    }
}

impl GnOptions {
    /// Single-level estimate used for gating decisions inside other solvers.
    pub fn quick(h: f64, l_trunc: f64) -> Self {
        GnOptions {
            h,
            l_trunc,
            levels: 1,
            tol: 1e-7,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GnEstimate {
    pub constant: f64,
    pub maximizer: Field,
    pub grid: Grid,
    /// (nominal step, constant) per refinement level, coarse to fine.
    pub history: Vec<(f64, f64)>,
    pub variant: GnVariant,
    pub p: f64,
}

/// `mu = sqrt(3 / C)`, the critical mass attached to a GN constant at p = 6.
pub fn critical_mass_from_constant(constant: f64) -> f64 {
    (3.0 / constant).sqrt()
}

struct QuotientSpace {
    grid: Grid,
    stiffness: Csr,
    mass: Csr,
    /// (free index or constrained, free index or constrained, step, core)
    elements: Vec<(Option<usize>, Option<usize>, f64, bool)>,
}

impl QuotientSpace {
    fn build(grid: Grid) -> Self {
        let ops = assemble_laplacian(&grid, 0.0);
        let elements = grid
            .elements()
            .map(|el| {
                (
                    grid.free_index(el.node_a),
                    grid.free_index(el.node_b),
                    el.step,
                    el.core,
                )
            })
            .collect();
        QuotientSpace {
            grid,
            stiffness: ops.stiffness,
            mass: ops.mass,
            elements,
        }
    }

    fn value(u: &[f64], idx: Option<usize>) -> f64 {
        idx.map_or(0.0, |i| u[i])
    }

    fn p_norm_numerator(&self, u: &[f64], p: f64, core_only: bool) -> f64 {
        let mut acc = 0.0;
        for &(ia, ib, h, core) in &self.elements {
            if core_only && !core {
                continue;
            }
            let a = Self::value(u, ia);
            let b = Self::value(u, ib);
            let m = 0.5 * (a + b);
            acc += h / 6.0 * (a.abs().powf(p) + 4.0 * m.abs().powf(p) + b.abs().powf(p));
        }
        acc
    }

    fn p_norm_gradient(&self, u: &[f64], p: f64, core_only: bool) -> Vec<f64> {
        let f = |x: f64| x.abs().powf(p - 2.0) * x;
        let mut out = vec![0.0; u.len()];
        for &(ia, ib, h, core) in &self.elements {
            if core_only && !core {
                continue;
            }
            let a = Self::value(u, ia);
            let b = Self::value(u, ib);
            let m = 0.5 * (a + b);
            let fm = f(m);
            if let Some(i) = ia {
                out[i] += p * h / 6.0 * (f(a) + 2.0 * fm);
            }
            if let Some(i) = ib {
                out[i] += p * h / 6.0 * (f(b) + 2.0 * fm);
            }
        }
        out
    }

    fn quotient(&self, u: &[f64], p: f64, variant: GnVariant) -> f64 {
        let a2 = dot(u, &self.stiffness.matvec(u));
        let b2 = dot(u, &self.mass.matvec(u));
        if a2 <= 0.0 || b2 <= 0.0 {
            return 0.0;
        }
        match variant {
            GnVariant::WholeGraph => {
                self.p_norm_numerator(u, p, false)
                    / (a2.powf(p / 4.0 - 0.5) * b2.powf(p / 4.0 + 0.5))
            }
            GnVariant::CoreRestricted => {
                self.p_norm_numerator(u, p, true)
                    / (a2.powf(p / 4.0 - 0.5) * b2.powf(p / 4.0 + 0.5))
            }
            GnVariant::SupNorm => {
                let sup = u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                sup / (a2.powf(0.25) * b2.powf(0.25))
            }
        }
    }

    /// Ascent on log R for the finite-p variants. The quotient is
    /// 0-homogeneous, so its gradient is automatically tangential.
    fn ascend(
        &self,
        u0: &[f64],
        p: f64,
        core_only: bool,
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>, SolveError> {
        let variant = if core_only {
            GnVariant::CoreRestricted
        } else {
            GnVariant::WholeGraph
        };
        let mut u = u0.to_vec();
        let b2 = dot(&u, &self.mass.matvec(&u));
        scale(&mut u, 1.0 / b2.sqrt());

        let log_quotient = |u: &[f64]| -> f64 {
            let q: f64 = self.quotient(u, p, variant);
            if q > 0.0 {
                q.ln()
            } else {
                f64::NEG_INFINITY
            }
        };
        let gradient = |u: &[f64]| -> Result<Vec<f64>, SolveError> {
            let num = self.p_norm_numerator(u, p, core_only);
            let su = self.stiffness.matvec(u);
            let mu_v = self.mass.matvec(u);
            let a2 = dot(u, &su);
            let b2 = dot(u, &mu_v);
            let mut g = self.p_norm_gradient(u, p, core_only);
            scale(&mut g, 1.0 / num);
            axpy(&mut g, -(p / 2.0 - 1.0) / a2, &su);
            axpy(&mut g, -(p / 2.0 + 1.0) / b2, &mu_v);
            cg(&self.mass, &g, 1e-12, 10 * g.len() + 100)
        };
        let m_dot = |x: &[f64], y: &[f64]| dot(&self.mass.matvec(x), y);

        let mut value = log_quotient(&u);
        if !value.is_finite() {
            return Err(SolveError::InvalidParameter(
                "gn seed has zero quotient".into(),
            ));
        }
        let mut grad = gradient(&u)?;
        let mut tau = 0.1;
        for _ in 0..max_iter {
            let gnorm = m_dot(&grad, &grad).sqrt();
            if gnorm < tol {
                break;
            }
            let mut step = tau;
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial = u.clone();
                axpy(&mut trial, step, &grad);
                let b2 = m_dot(&trial, &trial);
                scale(&mut trial, 1.0 / b2.sqrt());
                let v_trial = log_quotient(&trial);
                if v_trial >= value + 1e-4 * step * gnorm * gnorm {
                    accepted = Some((trial, v_trial));
                    break;
                }
                step *= 0.5;
            }
            let Some((u_next, v_next)) = accepted else {
                break;
            };
            let grad_next = gradient(&u_next)?;
            let mut s = u_next.clone();
            axpy(&mut s, -1.0, &u);
            let mut y = grad_next.clone();
            axpy(&mut y, -1.0, &grad);
            let sy = -m_dot(&s, &y); // ascent: curvature sign flipped
            let ss = m_dot(&s, &s);
            tau = if sy > 1e-30 {
                (ss / sy).clamp(1e-10, 1e4)
            } else {
                (step * 2.0).clamp(1e-10, 1e4)
            };
            u = u_next;
            value = v_next;
            grad = grad_next;
        }
        Ok(u)
    }

    /// Exact alternating maximization for the sup-norm quotient: fix the
    /// argmax node x, then `max_u u(x)^2 / (t ||u'||^2 + ||u||^2 / t)` is the
    /// diagonal Green value of `(t S + M/t)` at x, optimized over t by golden
    /// search.
    fn ascend_sup(&self, u0: &[f64], max_rounds: usize) -> Result<Vec<f64>, SolveError> {
        let mut u = u0.to_vec();
        let mut best = self.quotient(&u, 2.0, GnVariant::SupNorm);
        for _ in 0..max_rounds {
            let (ix, _) = u
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
                .unwrap();
            let green = |t: f64| -> Result<(f64, Vec<f64>), SolveError> {
                let op = Csr::linear_combination(t, &self.stiffness, 1.0 / t, &self.mass);
                let mut e = vec![0.0; u.len()];
                e[ix] = 1.0;
                let w = cg(&op, &e, 1e-12, 10 * u.len() + 100)?;
                Ok((w[ix], w))
            };
            // golden-section on log t
            let (mut lo, mut hi) = ((1e-3f64).ln(), (1e3f64).ln());
            let phi = 0.5 * (5.0f64.sqrt() - 1.0);
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            let mut f1 = green(x1.exp())?.0;
            let mut f2 = green(x2.exp())?.0;
            for _ in 0..50 {
                if f1 < f2 {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = green(x2.exp())?.0;
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = green(x1.exp())?.0;
                }
            }
            let t_star = (0.5 * (lo + hi)).exp();
            let (_, w) = green(t_star)?;
            let q = self.quotient(&w, 2.0, GnVariant::SupNorm);
            if q <= best * (1.0 + 1e-12) {
                break;
            }
            best = q;
            u = w;
        }
        Ok(u)
    }
}

fn seeds_for(space: &QuotientSpace) -> Vec<Vec<f64>> {
    let grid = &space.grid;
    let graph = grid.graph();
    let mut seeds = Vec::new();

    // one bump per vertex
    for v in 0..graph.n_vertices() {
        let d = grid.node_distances(&[(crate::graph::VertexId(v), 0.0)]);
        let field: Vec<f64> = (0..grid.n_free())
            .map(|i| (-2.0 * d[grid.node_of_free(i)]).exp())
            .collect();
        seeds.push(field);
    }

    // two line seeds: sech bumps of different widths centered on the longest
    // core edge
    let longest = graph
        .bounded_edges()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.length.partial_cmp(&b.1.length).unwrap())
        .map(|(i, _)| i)
        .expect("compact core is non-empty");
    let len = graph.bounded_edges()[longest].length;
    let d = grid.distances_to_edge_point(crate::graph::EdgeId(longest), len / 2.0);
    for width in [0.5, 2.0] {
        let field: Vec<f64> = (0..grid.n_free())
            .map(|i| 1.0 / (width * d[grid.node_of_free(i)]).cosh())
            .collect();
        seeds.push(field);
    }
    seeds
}

pub fn gn_constant(
    graph: &MetricGraph,
    p: f64,
    variant: GnVariant,
    opts: &GnOptions,
) -> Result<GnEstimate, SolveError> {
    if variant != GnVariant::SupNorm && !(p > 2.0) {
        return Err(SolveError::InvalidParameter(format!(
            "gn exponent must exceed 2, got {p}"
        )));
    }
    // clamp the coarsest level so the shortest edge still carries a grid
    let min_len = graph
        .bounded_edges()
        .iter()
        .map(|e| e.length)
        .fold(f64::INFINITY, f64::min)
        .min(opts.l_trunc / 5.0);
    let mut levels = opts.levels.max(1);
    while levels > 1 && opts.h * (1 << (levels - 1)) as f64 > min_len / 2.0 {
        levels -= 1;
    }
    let h_coarse = opts.h * (1 << (levels - 1)) as f64;

    let mut space =
        QuotientSpace::build(build_grid(graph, h_coarse, opts.l_trunc).map_err(|e| {
            SolveError::InvalidParameter(format!("gn grid construction failed: {e}"))
        })?);

    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut best_u: Vec<f64> = Vec::new();
    for level in 0..levels {
        let candidates: Vec<Vec<f64>> = if level == 0 {
            seeds_for(&space)
        } else {
            vec![best_u.clone()]
        };
        let mut best_q = f64::NEG_INFINITY;
        let mut winner: Option<Vec<f64>> = None;
        for cand in candidates {
            let u = match variant {
                GnVariant::SupNorm => space.ascend_sup(&cand, 40)?,
                GnVariant::WholeGraph => space.ascend(&cand, p, false, opts.tol, opts.max_iter)?,
                GnVariant::CoreRestricted => {
                    space.ascend(&cand, p, true, opts.tol, opts.max_iter)?
                }
            };
            let q = space.quotient(&u, p, variant);
            if q > best_q {
                best_q = q;
                winner = Some(u);
            }
        }
        let winner = winner.ok_or(SolveError::NonConvergence {
            iterations: 0,
            residual: f64::NAN,
        })?;
        history.push((space.grid.h(), best_q));
        if level + 1 == levels {
            best_u = winner;
            break;
        }
        // prolong the winner onto the refined grid
        let full = Field::from_free(&space.grid, &winner);
        let fine_grid = space.grid.refined();
        let prolonged = space.grid.prolong(&fine_grid, &full.values);
        let fine_space = QuotientSpace::build(fine_grid);
        best_u = Field { values: prolonged }.to_free(&fine_space.grid);
        space = fine_space;
    }

    let constant = space.quotient(&best_u, p, variant);
    let maximizer = Field::from_free(&space.grid, &best_u);
    Ok(GnEstimate {
        constant,
        maximizer,
        grid: space.grid,
        history,
        variant,
        p,
    })
}

/// Recompute the quotient of a stored maximizer; used to certify that every
/// reported constant is attained by the reported field.
pub fn gn_quotient(grid: &Grid, p: f64, variant: GnVariant, u: &Field) -> f64 {
    let space = QuotientSpace::build(grid.clone());
    space.quotient(&u.to_free(grid), p, variant)
}
