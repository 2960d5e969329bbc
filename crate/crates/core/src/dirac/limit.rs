//! Nonrelativistic limit: NLDE bound states along an increasing schedule of
//! relativistic parameters, warm-started stage to stage, compared against the
//! NLSE state with nonlinear coefficient 2m.
//!
//! Frequencies follow `omega = m c^2 + lambda / (2m)`, which is the scaling
//! under which eliminating the lower component from the free dispersion
//! `omega = sqrt(m^2 c^4 + c^2 k^2) ~ m c^2 + k^2 / (2m)` lands exactly on
//! `-u'' - 2m |u|^(p-2) u = lambda u`.

use num_complex::Complex64;

use super::{assemble_dirac, Spinor};
use crate::error::SolveError;
use crate::field::{ComplexField, Field};
use crate::graph::MetricGraph;
use crate::grid::{build_grid, Grid};
use crate::nls::{GridParams, NlsProblem, SolveOptions};

#[derive(Debug, Clone)]
pub struct NonrelLimitOptions {
    pub p: f64,
    pub lambda: f64,
    pub m: f64,
    /// Strictly increasing relativistic parameters.
    pub schedule: Vec<f64>,
    pub grid: GridParams,
    pub solve: SolveOptions,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LimitStage {
    pub c: f64,
    pub omega: f64,
    pub chi_l2: f64,
    pub phi_minus_u_h1: f64,
    pub nlse_residual: f64,
}

#[derive(Debug, Clone)]
pub struct NonrelLimitTable {
    pub stages: Vec<LimitStage>,
    /// Set when a stage failed; earlier stages are still reported.
    pub aborted: Option<String>,
    /// Mass of the limiting NLSE state (diagnostic).
    pub target_mass: f64,
}

impl NonrelLimitTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,omega,chi_l2,phi_minus_u_h1,nlse_residual\n");
        for s in &self.stages {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.c, s.omega, s.chi_l2, s.phi_minus_u_h1, s.nlse_residual
            ));
        }
        out
    }
}

/// Phase-align `phi` to the real target and return the H1 distance of the
/// aligned difference.
fn h1_distance(grid: &Grid, phi: &[Complex64], u: &Field) -> f64 {
    // optimal global phase from the mass inner product
    let mut inner = Complex64::new(0.0, 0.0);
    for el in grid.elements() {
        let ua = u.values[el.node_a];
        let ub = u.values[el.node_b];
        let pa = phi[el.node_a];
        let pb = phi[el.node_b];
        inner += el.step / 6.0 * (2.0 * ua * pa + 2.0 * ub * pb + ua * pb + ub * pa);
    }
    let theta = inner.arg();
    let rot = Complex64::from_polar(1.0, -theta);
    let mut l2 = 0.0;
    let mut kin = 0.0;
    for el in grid.elements() {
        let da = rot * phi[el.node_a] - u.values[el.node_a];
        let db = rot * phi[el.node_b] - u.values[el.node_b];
        l2 +=
            el.step / 6.0 * (2.0 * da.norm_sqr() + 2.0 * db.norm_sqr() + 2.0 * (da.conj() * db).re);
        kin += (db - da).norm_sqr() / el.step;
    }
    (l2 + kin).max(0.0).sqrt()
}

pub fn nonrel_limit(
    graph: &MetricGraph,
    opts: &NonrelLimitOptions,
) -> Result<NonrelLimitTable, SolveError> {
    if !(opts.lambda < 0.0) {
        return Err(SolveError::InvalidParameter(format!(
            "nonrelativistic limit requires lambda < 0, got {}",
            opts.lambda
        )));
    }
    if !(opts.m > 0.0) {
        return Err(SolveError::InvalidParameter(format!(
            "mass must be positive, got {}",
            opts.m
        )));
    }
    if opts.schedule.is_empty() {
        return Err(SolveError::InvalidParameter(
            "empty relativistic-parameter schedule".into(),
        ));
    }
    for w in opts.schedule.windows(2) {
        if !(w[0] < w[1]) {
            return Err(SolveError::InvalidParameter(
                "schedule must be strictly increasing".into(),
            ));
        }
    }
    if !(opts.schedule[0] > 0.0) {
        return Err(SolveError::InvalidParameter(
            "relativistic parameters must be positive".into(),
        ));
    }

    let grid = build_grid(graph, opts.grid.h, opts.grid.l_trunc)
        .map_err(|e| SolveError::InvalidParameter(e.to_string()))?;

    // limiting NLSE state with the 2m coefficient at the same frequency
    let nls =
        NlsProblem::on_grid(graph, grid.clone(), opts.p, 1.0, 0.0).with_core_coeff(2.0 * opts.m);
    let target = nls.fixed_frequency_state(opts.lambda, None, &opts.solve)?;
    let u = target.state;

    let omega_of = |c: f64| opts.m * c * c + opts.lambda / (2.0 * opts.m);

    let mut stages: Vec<LimitStage> = Vec::with_capacity(opts.schedule.len());
    let mut aborted = None;
    let mut carried: Option<Spinor> = None;
    let mut prev: Option<(f64, f64)> = None; // (c, omega)

    for &c in &opts.schedule {
        let omega = omega_of(c);
        let mc2 = opts.m * c * c;
        if !(omega.abs() < mc2) {
            aborted = Some(format!("omega {omega} outside the spectral gap at c = {c}"));
            break;
        }
        let op = assemble_dirac(&grid, opts.m, c)?;
        let seed = match (&carried, prev) {
            (Some(psi), Some((c_prev, omega_prev))) => {
                // keep phi, rescale chi to preserve the lift relation
                let factor = (c / c_prev) * (omega_prev + opts.m * c_prev * c_prev) / (omega + mc2);
                let mut s = psi.clone();
                for v in s.chi.iter_mut() {
                    *v *= factor;
                }
                s.c = c;
                s
            }
            _ => op.lift(&u, omega),
        };
        match op.bound_state(omega, opts.p, Some(&seed), &opts.solve) {
            Ok(report) => {
                let phi = ComplexField {
                    values: report.spinor.phi.clone(),
                };
                let stage = LimitStage {
                    c,
                    omega,
                    chi_l2: op.chi_l2(&report.spinor),
                    phi_minus_u_h1: h1_distance(&grid, &report.spinor.phi, &u),
                    nlse_residual: nls.residual_complex(&phi, opts.lambda)?,
                };
                stages.push(stage);
                carried = Some(report.spinor);
                prev = Some((c, omega));
            }
            Err(e) => {
                aborted = Some(format!("stage c = {c} failed: {e}"));
                break;
            }
        }
    }

    Ok(NonrelLimitTable {
        stages,
        aborted,
        target_mass: target.mass,
    })
}
