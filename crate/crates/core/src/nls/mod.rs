//! Constrained variational solver for the NLS equation with nonlinearity
//! localized on the compact core:
//!
//! ```text
//! -u'' - beta chi_K |u|^(p-2) u = lambda u      on the graph,
//! ||u||_2^2 = mu                               (mass constraint),
//! ```
//!
//! with continuity and delta-type (alpha = 0: Kirchhoff) vertex conditions.
//! Ground states are computed by a normalized gradient flow
//! (Sobolev-preconditioned descent direction, Barzilai-Borwein steps, a
//! monotone line search, exact mass renormalization after every step),
//! then polished by a constrained Newton iteration on the bordered KKT
//! system with exact chain-Schur solves. Seeding is a deterministic
//! multistart: the competitor profile (constant on the core, exponential on
//! the half-lines) plus concentrated bumps, keeping the lowest-energy
//! converged state. All minimization runs over real-valued fields; a
//! complex-capable energy path exists for phase-invariance checks and the
//! Dirac coupling.

mod classify;
mod gn;

pub use classify::{
    best_competitor_energy, classify_critical, classify_subcritical, competitor_energy,
    critical_case, nonexistence_check, subcritical_threshold_constant, CriticalCase,
    CriticalClassification, NonexistenceCertificate, NonexistenceFlags, SubcriticalCertificate,
    SubcriticalVerdict, MU_R, MU_R_PLUS,
};
pub use gn::{
    critical_mass_from_constant, gn_constant, gn_quotient, GnEstimate, GnOptions, GnVariant,
};

use num_complex::Complex64;

use crate::assemble::{assemble_laplacian, LaplaceOperators};
use crate::error::{GridError, SolveError};
use crate::field::{ComplexField, Field};
use crate::graph::MetricGraph;
use crate::grid::{build_grid, GraphEdgeRef, Grid};
use crate::linalg::{axpy, dot, scale, ChainSolver, Csr};

#[derive(Debug, Clone, Copy)]
pub struct GridParams {
    pub h: f64,
    pub l_trunc: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            h: 0.02,
            l_trunc: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 5000,
        }
    }
}

/// Converged state with its energy and multiplier diagnostics.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub state: Field,
    pub energy: f64,
    pub lagrange: f64,
    pub residual: f64,
    pub mass: f64,
    pub iterations: usize,
    pub flow_iterations: usize,
    pub newton_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct NlsProblem {
    graph: MetricGraph,
    grid: Grid,
    ops: LaplaceOperators,
    pub p: f64,
    pub mu: f64,
    pub alpha: f64,
    /// Coefficient in front of the core nonlinearity (1 for the plain
    /// equation, 2m for the nonrelativistic-limit target).
    pub core_coeff: f64,
    core_elements: Vec<(usize, usize, f64)>,
    /// Tridiagonal-chain structure shared by every assembled operator.
    chains: Vec<(usize, usize)>,
    vertex_dofs: Vec<usize>,
    mass_solver: ChainSolver,
    /// Factorization of `M + S`: the Sobolev metric preconditioning the flow.
    h1_solver: Option<ChainSolver>,
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

impl NlsProblem {
    pub fn new(
        graph: &MetricGraph,
        p: f64,
        mu: f64,
        params: GridParams,
        alpha: f64,
    ) -> Result<Self, ProblemError> {
        if !(p > 2.0 && p <= 6.0) {
            return Err(ProblemError::Parameter(format!(
                "exponent p must lie in (2, 6], got {p}"
            )));
        }
        if !(mu > 0.0) {
            return Err(ProblemError::Parameter(format!(
                "mass constraint must be positive, got {mu}"
            )));
        }
        let grid = build_grid(graph, params.h, params.l_trunc)?;
        Ok(Self::on_grid(graph, grid, p, mu, alpha))
    }

    pub(crate) fn on_grid(graph: &MetricGraph, grid: Grid, p: f64, mu: f64, alpha: f64) -> Self {
        let ops = assemble_laplacian(&grid, alpha);
        let core_elements = grid
            .elements()
            .filter(|el| el.core)
            .map(|el| {
                (
                    grid.free_index(el.node_a).expect("core nodes are free"),
                    grid.free_index(el.node_b).expect("core nodes are free"),
                    el.step,
                )
            })
            .collect();
        let chains = grid.interior_chains();
        let vertex_dofs = grid.vertex_free_indices();
        let mass_solver = ChainSolver::new(&ops.mass, &chains, &vertex_dofs)
            .expect("mass matrix is positive definite");
        let h1 = Csr::linear_combination(1.0, &ops.stiffness, 1.0, &ops.mass);
        let h1_solver = ChainSolver::new(&h1, &chains, &vertex_dofs).ok();
        NlsProblem {
            graph: graph.clone(),
            grid,
            ops,
            p,
            mu,
            alpha,
            core_coeff: 1.0,
            core_elements,
            chains,
            vertex_dofs,
            mass_solver,
            h1_solver,
        }
    }

    pub fn with_core_coeff(mut self, beta: f64) -> Self {
        self.core_coeff = beta;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn operators(&self) -> &LaplaceOperators {
        &self.ops
    }

    fn check_len(&self, len: usize) -> Result<(), SolveError> {
        if len != self.grid.n_nodes() {
            return Err(SolveError::GridMismatch {
                expected: self.grid.n_nodes(),
                got: len,
            });
        }
        Ok(())
    }

    /// `int_K |u|^p` by per-element Simpson on the P1 interpolant.
    pub fn core_integral(&self, u: &Field) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        let p = self.p;
        let mut acc = 0.0;
        for el in self.grid.elements().filter(|el| el.core) {
            let a = u.values[el.node_a];
            let b = u.values[el.node_b];
            let m = 0.5 * (a + b);
            acc += el.step / 6.0 * (a.abs().powf(p) + 4.0 * m.abs().powf(p) + b.abs().powf(p));
        }
        Ok(acc)
    }

    fn kinetic_full(&self, u: &Field) -> f64 {
        let mut acc = 0.0;
        for el in self.grid.elements() {
            let d = u.values[el.node_b] - u.values[el.node_a];
            acc += d * d / el.step;
        }
        if self.alpha != 0.0 {
            for v in 0..self.graph.n_vertices() {
                let val = u.values[self.grid.vertex_node(crate::graph::VertexId(v))];
                acc += self.alpha * val * val;
            }
        }
        acc
    }

    fn mass_full(&self, u: &Field) -> f64 {
        let mut acc = 0.0;
        for el in self.grid.elements() {
            let a = u.values[el.node_a];
            let b = u.values[el.node_b];
            acc += el.step / 6.0 * (2.0 * a * a + 2.0 * b * b + 2.0 * a * b);
        }
        acc
    }

    /// `E(u) = 1/2 (||u'||^2 + alpha sum u(v)^2) - (beta/p) int_K |u|^p`.
    pub fn energy(&self, u: &Field) -> Result<f64, SolveError> {
        Ok(0.5 * self.kinetic_full(u) - self.core_coeff / self.p * self.core_integral(u)?)
    }

    pub fn energy_complex(&self, u: &ComplexField) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        let p = self.p;
        let mut kinetic = 0.0;
        let mut core = 0.0;
        for el in self.grid.elements() {
            let a = u.values[el.node_a];
            let b = u.values[el.node_b];
            kinetic += (b - a).norm_sqr() / el.step;
            if el.core {
                let m = 0.5 * (a + b);
                core +=
                    el.step / 6.0 * (a.norm().powf(p) + 4.0 * m.norm().powf(p) + b.norm().powf(p));
            }
        }
        if self.alpha != 0.0 {
            for v in 0..self.graph.n_vertices() {
                let val = u.values[self.grid.vertex_node(crate::graph::VertexId(v))];
                kinetic += self.alpha * val.norm_sqr();
            }
        }
        Ok(0.5 * kinetic - self.core_coeff / p * core)
    }

    /// Discrete mass `||u||_2^2` of the interpolant.
    pub fn mass_of(&self, u: &Field) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        Ok(self.mass_full(u))
    }

    /// `lambda(u) = (||u'||^2 + alpha sum u(v)^2 - beta int_K |u|^p) / mu`.
    pub fn lagrange_multiplier(&self, u: &Field) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        if self.mass_full(u) <= 0.0 {
            return Err(SolveError::ZeroMass);
        }
        Ok((self.kinetic_full(u) - self.core_coeff * self.core_integral(u)?) / self.mu)
    }

    pub fn lagrange_multiplier_complex(&self, u: &ComplexField) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        let p = self.p;
        let mut kinetic = 0.0;
        let mut core = 0.0;
        let mut mass = 0.0;
        for el in self.grid.elements() {
            let a = u.values[el.node_a];
            let b = u.values[el.node_b];
            kinetic += (b - a).norm_sqr() / el.step;
            mass +=
                el.step / 6.0 * (2.0 * a.norm_sqr() + 2.0 * b.norm_sqr() + 2.0 * (a.conj() * b).re);
            if el.core {
                let m = 0.5 * (a + b);
                core +=
                    el.step / 6.0 * (a.norm().powf(p) + 4.0 * m.norm().powf(p) + b.norm().powf(p));
            }
        }
        if self.alpha != 0.0 {
            for v in 0..self.graph.n_vertices() {
                let val = u.values[self.grid.vertex_node(crate::graph::VertexId(v))];
                kinetic += self.alpha * val.norm_sqr();
            }
        }
        if mass <= 0.0 {
            return Err(SolveError::ZeroMass);
        }
        Ok((kinetic - self.core_coeff * core) / self.mu)
    }

    // ---- free-space machinery -------------------------------------------

    fn mass_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.ops.mass.matvec(x), y)
    }

    /// Simpson quadrature of `int_K |u|^p` on free dofs.
    fn core_integral_free(&self, u: &[f64]) -> f64 {
        let p = self.p;
        let mut acc = 0.0;
        for &(ia, ib, h) in &self.core_elements {
            let a = u[ia];
            let b = u[ib];
            let m = 0.5 * (a + b);
            acc += h / 6.0 * (a.abs().powf(p) + 4.0 * m.abs().powf(p) + b.abs().powf(p));
        }
        acc
    }

    /// `beta/p * grad int_K |u|^p`, consistent with `core_integral_free`.
    fn nonlinearity(&self, u: &[f64]) -> Vec<f64> {
        let p = self.p;
        let beta = self.core_coeff;
        let f = |x: f64| x.abs().powf(p - 2.0) * x;
        let mut out = vec![0.0; u.len()];
        for &(ia, ib, h) in &self.core_elements {
            let a = u[ia];
            let b = u[ib];
            let m = 0.5 * (a + b);
            let fm = f(m);
            out[ia] += beta * h / 6.0 * (f(a) + 2.0 * fm);
            out[ib] += beta * h / 6.0 * (f(b) + 2.0 * fm);
        }
        out
    }

    /// Triplets of the symmetric Jacobian of `nonlinearity`.
    fn nonlinearity_jacobian(&self, u: &[f64]) -> Vec<(usize, usize, f64)> {
        let p = self.p;
        let beta = self.core_coeff;
        let g = |x: f64| (p - 1.0) * x.abs().powf(p - 2.0);
        let mut trip = Vec::with_capacity(4 * self.core_elements.len());
        for &(ia, ib, h) in &self.core_elements {
            let a = u[ia];
            let b = u[ib];
            let m = 0.5 * (a + b);
            let gm = g(m);
            trip.push((ia, ia, beta * h / 6.0 * (g(a) + gm)));
            trip.push((ib, ib, beta * h / 6.0 * (g(b) + gm)));
            trip.push((ia, ib, beta * h / 6.0 * gm));
            trip.push((ib, ia, beta * h / 6.0 * gm));
        }
        trip
    }

    fn energy_free(&self, u: &[f64]) -> f64 {
        0.5 * dot(u, &self.ops.stiffness.matvec(u))
            - self.core_coeff / self.p * self.core_integral_free(u)
    }

    fn lagrange_free(&self, u: &[f64]) -> f64 {
        (dot(u, &self.ops.stiffness.matvec(u)) - self.core_coeff * self.core_integral_free(u))
            / self.mu
    }

    /// Weak residual vector `S u - N(u) - lambda M u` on free dofs.
    fn residual_vec(&self, u: &[f64], lambda: f64) -> Vec<f64> {
        let mut r = self.ops.stiffness.matvec(u);
        let nl = self.nonlinearity(u);
        axpy(&mut r, -1.0, &nl);
        let mu_vec = self.ops.mass.matvec(u);
        axpy(&mut r, -lambda, &mu_vec);
        r
    }

    /// Directional derivative `dE(u)[v] = <S u - N(u), v>` of the energy.
    pub fn energy_gradient_pairing(&self, u: &Field, v: &Field) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        self.check_len(v.len())?;
        let uf = u.to_free(&self.grid);
        let vf = v.to_free(&self.grid);
        let mut g = self.ops.stiffness.matvec(&uf);
        let nl = self.nonlinearity(&uf);
        axpy(&mut g, -1.0, &nl);
        Ok(dot(&g, &vf))
    }

    /// Strong-form residual norm `sqrt(r^T M^-1 r)` over non-Dirichlet dofs.
    pub fn residual(&self, u: &Field, lambda: f64) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        let uf = u.to_free(&self.grid);
        self.residual_free(&uf, lambda)
    }

    fn residual_free(&self, u: &[f64], lambda: f64) -> Result<f64, SolveError> {
        let r = self.residual_vec(u, lambda);
        let minv_r = self.mass_solver.solve(&r);
        Ok(dot(&r, &minv_r).max(0.0).sqrt())
    }

    /// Complex-capable strong residual for spinor components: the operator is
    /// applied to real and imaginary parts with the modulus nonlinearity.
    pub fn residual_complex(&self, u: &ComplexField, lambda: f64) -> Result<f64, SolveError> {
        self.check_len(u.len())?;
        let p = self.p;
        let beta = self.core_coeff;
        let re: Vec<f64> = (0..self.grid.n_free())
            .map(|i| u.values[self.grid.node_of_free(i)].re)
            .collect();
        let im: Vec<f64> = (0..self.grid.n_free())
            .map(|i| u.values[self.grid.node_of_free(i)].im)
            .collect();
        let mut r_re = self.ops.stiffness.matvec(&re);
        let mut r_im = self.ops.stiffness.matvec(&im);
        // modulus nonlinearity acting on both components
        for &(ia, ib, h) in &self.core_elements {
            let za = Complex64::new(re[ia], im[ia]);
            let zb = Complex64::new(re[ib], im[ib]);
            let zm = 0.5 * (za + zb);
            let f = |z: Complex64| z * z.norm().powf(p - 2.0);
            let fa = f(za);
            let fb = f(zb);
            let fm = f(zm);
            r_re[ia] -= beta * h / 6.0 * (fa.re + 2.0 * fm.re);
            r_im[ia] -= beta * h / 6.0 * (fa.im + 2.0 * fm.im);
            r_re[ib] -= beta * h / 6.0 * (fb.re + 2.0 * fm.re);
            r_im[ib] -= beta * h / 6.0 * (fb.im + 2.0 * fm.im);
        }
        let m_re = self.ops.mass.matvec(&re);
        let m_im = self.ops.mass.matvec(&im);
        axpy(&mut r_re, -lambda, &m_re);
        axpy(&mut r_im, -lambda, &m_im);
        let minv_re = self.mass_solver.solve(&r_re);
        let minv_im = self.mass_solver.solve(&r_im);
        Ok((dot(&r_re, &minv_re) + dot(&r_im, &minv_im))
            .max(0.0)
            .sqrt())
    }

    /// Default seed: constant on the compact core, `exp(-x)` tails on the
    /// half-lines, mass-normalized by the caller.
    pub fn default_seed(&self) -> Field {
        let mut f = Field::zeros(&self.grid);
        for eg in &self.grid.edge_grids {
            match eg.edge {
                GraphEdgeRef::Bounded(_) => {
                    for &node in &eg.nodes {
                        f.values[node] = 1.0;
                    }
                }
                GraphEdgeRef::HalfLine(_) => {
                    for (k, &node) in eg.nodes.iter().enumerate() {
                        let x = k as f64 * eg.step;
                        if !self.grid.is_far(node) {
                            f.values[node] = (-x).exp();
                        }
                    }
                }
            }
        }
        f
    }

    fn renormalize(&self, u: &mut [f64]) {
        let m = self.mass_dot(u, u);
        scale(u, (self.mu / m).sqrt());
    }

    /// Ground state of prescribed mass by normalized gradient flow with a
    /// Newton polish. In the critical case `p = 6` the flow is refused when
    /// the mass reaches the estimated reduced critical mass (the functional
    /// is unbounded or has a flat zero infimum there).
    pub fn ground_state(
        &self,
        seed: Option<&Field>,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolveError> {
        if (self.p - 6.0).abs() < 1e-12 {
            let est = gn::gn_constant(
                &self.graph,
                6.0,
                GnVariant::CoreRestricted,
                &GnOptions::quick(self.grid.h(), self.grid.l_trunc()),
            )?;
            let mu_k = critical_mass_from_constant(est.constant);
            if self.mu >= 1.01 * mu_k {
                return Err(SolveError::RefusedRegime(format!(
                    "critical exponent with mass {:.6} >= 1.01 * estimated mu_K {:.6}: \
                     energy unbounded or zero-infimum regime",
                    self.mu, mu_k
                )));
            }
        }

        // a gradient flow cannot cross energy barriers, and for p >= 4 the
        // spread and concentrated branches are separated by one; when no
        // explicit seed is given, start from the competitor shape and from
        // concentrated bumps, and keep the lowest-energy converged state
        let candidates: Vec<Vec<f64>> = match seed {
            Some(f) => {
                self.check_len(f.len())?;
                vec![f.to_free(&self.grid)]
            }
            None => self.default_candidates(),
        };
        let mut best: Option<SolverReport> = None;
        let mut last_err = SolveError::ZeroMass;
        for u0 in candidates {
            match self.solve_ladder(u0, opts) {
                Ok(report) => {
                    if best.as_ref().map_or(true, |b| report.energy < b.energy) {
                        best = Some(report);
                    }
                }
                Err(e) => last_err = e,
            }
        }
        best.ok_or(last_err)
    }

    /// Competitor seed plus concentrated sech bumps at every vertex and at
    /// the midpoint of the longest core edge, deterministic order.
    fn default_candidates(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.default_seed().to_free(&self.grid)];
        let longest = self
            .graph
            .bounded_edges()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.length.partial_cmp(&b.1.length).unwrap())
            .map(|(i, _)| i)
            .expect("compact core is non-empty");
        let len = self.graph.bounded_edges()[longest].length;
        let d_mid = self
            .grid
            .distances_to_edge_point(crate::graph::EdgeId(longest), len / 2.0);
        let kappa_mid = (self.mu / 4.0).max(0.25);
        out.push(
            (0..self.grid.n_free())
                .map(|i| 1.0 / (kappa_mid * d_mid[self.grid.node_of_free(i)]).cosh())
                .collect(),
        );
        let kappa_v = (self.mu / 2.0).max(0.5);
        for v in 0..self.graph.n_vertices() {
            let d = self
                .grid
                .node_distances(&[(crate::graph::VertexId(v), 0.0)]);
            out.push(
                (0..self.grid.n_free())
                    .map(|i| 1.0 / (kappa_v * d[self.grid.node_of_free(i)]).cosh())
                    .collect(),
            );
        }
        out
    }

    /// Flow toward the basin, polish by Newton, and tighten the flow target
    /// whenever the polish stalls.
    fn solve_ladder(
        &self,
        mut u: Vec<f64>,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolveError> {
        if self.mass_dot(&u, &u) <= 0.0 {
            return Err(SolveError::ZeroMass);
        }
        self.renormalize(&mut u);

        let mut flow_iterations = 0usize;
        let mut newton_iterations = 0usize;
        let mut switch = opts.tol.max(1e-3);
        let mut residual = f64::INFINITY;
        let mut lambda = 0.0;
        for _ in 0..5 {
            // cap each round so the Newton polish gets its chance early
            let budget = opts.max_iter.saturating_sub(flow_iterations).min(600);
            flow_iterations += self.flow_phase(&mut u, switch, budget)?;
            newton_iterations += self.newton_polish(&mut u, opts)?;
            self.renormalize(&mut u);
            lambda = self.lagrange_free(&u);
            residual = self.residual_free(&u, lambda)?;
            if residual < opts.tol || flow_iterations >= opts.max_iter {
                break;
            }
            switch = (switch / 100.0).max(opts.tol);
        }
        let converged = residual < opts.tol;
        if !converged {
            return Err(SolveError::NonConvergence {
                iterations: flow_iterations + newton_iterations,
                residual,
            });
        }

        // minimizers are real up to a constant phase; fix the sign
        if u.iter().sum::<f64>() < 0.0 {
            scale(&mut u, -1.0);
        }
        let state = Field::from_free(&self.grid, &u);
        Ok(SolverReport {
            energy: self.energy_free(&u),
            lagrange: lambda,
            residual,
            mass: self.mass_dot(&u, &u),
            iterations: flow_iterations + newton_iterations,
            flow_iterations,
            newton_iterations,
            converged,
            state,
        })
    }

    /// Normalized gradient flow: step along the mass-metric gradient,
    /// renormalize, Barzilai-Borwein steps with a monotone backtracking line
    /// search. Runs until the projected gradient drops below `target`.
    fn flow_phase(
        &self,
        u: &mut Vec<f64>,
        target: f64,
        budget: usize,
    ) -> Result<usize, SolveError> {
        // Sobolev-preconditioned direction: (M + S)^-1 (S u - N(u)). The
        // plain mass-metric direction forces steps below the 2/lambda_max
        // stability bound (~h^2), which cannot transport mass across a long
        // core within any reasonable budget; the H1 metric is h-uniform.
        // After the mass renormalization the preconditioned direction is not
        // automatically a descent direction, so the actual slope is checked
        // and the step falls back to the mass-metric gradient if needed.
        let weak_gradient = |u: &[f64]| -> Vec<f64> {
            let mut g = self.ops.stiffness.matvec(u);
            let nl = self.nonlinearity(u);
            axpy(&mut g, -1.0, &nl);
            g
        };
        let tangential = |g: &[f64], u: &[f64]| -> Vec<f64> {
            let c = self.mass_dot(g, u) / self.mu;
            let mut t = g.to_vec();
            axpy(&mut t, -c, u);
            t
        };
        // direction and its descent slope <r, d_tangential>
        let direction = |r: &[f64], u: &[f64]| -> (Vec<f64>, f64) {
            if let Some(solver) = &self.h1_solver {
                let d = tangential(&solver.solve(r), u);
                let slope = dot(r, &d);
                if slope > 0.0 {
                    return (d, slope);
                }
            }
            let d = tangential(&self.mass_solver.solve(r), u);
            let slope = dot(r, &d);
            (d, slope)
        };

        let mut tau = 1.0;
        let mut energy = self.energy_free(u);
        let mut r = weak_gradient(u);
        let mut iterations = 0usize;
        let mut stall = 0usize;

        while iterations < budget {
            let (dir, slope) = direction(&r, u);
            let dir_norm = self.mass_dot(&dir, &dir).sqrt();
            if dir_norm < target || slope <= 0.0 {
                break;
            }
            let mut step = tau;
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial = u.clone();
                axpy(&mut trial, -step, &dir);
                self.renormalize(&mut trial);
                let e_trial = self.energy_free(&trial);
                if e_trial <= energy - 1e-4 * step * slope {
                    accepted = Some((trial, e_trial));
                    break;
                }
                step *= 0.5;
            }
            let Some((u_next, e_next)) = accepted else {
                // descent exhausted at machine-size steps: hand to Newton
                if dir_norm < 1e3 * target {
                    break;
                }
                return Err(SolveError::EnergyIncrease {
                    iteration: iterations,
                });
            };
            let r_next = weak_gradient(&u_next);

            // Barzilai-Borwein step from the accepted move
            let mut s = u_next.clone();
            axpy(&mut s, -1.0, u);
            let (dir_next, _) = direction(&r_next, &u_next);
            let mut y = dir_next.clone();
            axpy(&mut y, -1.0, &dir);
            let ss = self.mass_dot(&s, &s);
            let sy = -self.mass_dot(&s, &y); // moved along -dir
            tau = if sy > 1e-30 && ss.is_finite() {
                (ss / sy).clamp(1e-12, 1e4)
            } else {
                (step * 2.0).clamp(1e-12, 1e4)
            };

            if (energy - e_next).abs() <= 1e-13 * (1.0 + energy.abs()) {
                stall += 1;
                if stall > 50 {
                    *u = u_next;
                    iterations += 1;
                    break;
                }
            } else {
                stall = 0;
            }
            *u = u_next;
            r = r_next;
            energy = e_next;
            iterations += 1;
        }
        Ok(iterations)
    }

    /// Assemble `S - J_N(u) - lambda M` as triplets, optionally with a
    /// Tikhonov term `nu M` stabilizing nearly singular directions.
    fn jacobian_triplets(&self, u: &[f64], lambda: f64, nu: f64) -> Vec<(usize, usize, f64)> {
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in self.ops.stiffness.triplets() {
            trip.push((r, c, v));
        }
        for (r, c, v) in self.nonlinearity_jacobian(u) {
            trip.push((r, c, -v));
        }
        for (r, c, v) in self.ops.mass.triplets() {
            trip.push((r, c, (nu - lambda) * v));
        }
        trip
    }

    /// Newton on the bordered KKT system for (u, lambda) at fixed mass, with
    /// exact chain-Schur solves and a Levenberg fallback when a step is
    /// rejected (the translation mode of line-like graphs is nearly null).
    fn newton_polish(&self, u: &mut Vec<f64>, opts: &SolveOptions) -> Result<usize, SolveError> {
        let n = u.len();
        let mut coupled = self.vertex_dofs.clone();
        coupled.push(n); // the mass-constraint border row
        let mut lambda = self.lagrange_free(u);
        let mut iterations = 0usize;
        let mut nu = 0.0f64;
        for _ in 0..40 {
            let f = self.residual_vec(u, lambda);
            let c = 0.5 * (self.mass_dot(u, u) - self.mu);
            let merit = dot(&f, &f) + c * c;
            let resid = self.residual_free(u, lambda)?;
            if resid < 0.1 * opts.tol && c.abs() < 1e-12 * self.mu.max(1.0) {
                break;
            }
            let mut trip = self.jacobian_triplets(u, lambda, nu);
            let mu_vec = self.ops.mass.matvec(u);
            for i in 0..n {
                trip.push((i, n, -mu_vec[i]));
                trip.push((n, i, -mu_vec[i]));
            }
            let kkt = Csr::from_triplets(n + 1, n + 1, trip);
            let mut rhs = vec![0.0; n + 1];
            for i in 0..n {
                rhs[i] = -f[i];
            }
            rhs[n] = c;
            let delta = match ChainSolver::new(&kkt, &self.chains, &coupled) {
                Ok(solver) => solver.solve(&rhs),
                Err(_) => {
                    // singular factorization: regularize and retry
                    nu = (10.0 * nu).max(1e-10);
                    iterations += 1;
                    continue;
                }
            };

            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..25 {
                let mut u_trial = u.clone();
                axpy(&mut u_trial, step, &delta[..n]);
                let lambda_trial = lambda + step * delta[n];
                let f_trial = self.residual_vec(&u_trial, lambda_trial);
                let c_trial = 0.5 * (self.mass_dot(&u_trial, &u_trial) - self.mu);
                if dot(&f_trial, &f_trial) + c_trial * c_trial
                    <= merit * (1.0 - 1e-4 * step) + 1e-300
                {
                    *u = u_trial;
                    lambda = lambda_trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
            if accepted {
                nu = (nu / 10.0).max(0.0);
                if nu < 1e-14 {
                    nu = 0.0;
                }
            } else {
                if nu >= 1e-2 {
                    break; // stagnation even under strong damping
                }
                nu = (10.0 * nu).max(1e-10);
            }
        }
        Ok(iterations)
    }

    /// Nontrivial solution of `S u - beta N(u) = lambda M u` at fixed
    /// frequency `lambda < 0` by damped Newton from a Nehari-rescaled
    /// competitor seed. The mass is an output here, not a constraint.
    pub fn fixed_frequency_state(
        &self,
        lambda: f64,
        seed: Option<&Field>,
        opts: &SolveOptions,
    ) -> Result<SolverReport, SolveError> {
        if !(lambda < 0.0) {
            return Err(SolveError::InvalidParameter(format!(
                "fixed-frequency solve requires lambda < 0, got {lambda}"
            )));
        }
        let mut u = match seed {
            Some(f) => {
                self.check_len(f.len())?;
                f.to_free(&self.grid)
            }
            None => {
                // sech bump of width 1/kappa centered on the longest core
                // edge: the shape of the line soliton at this frequency
                let kappa = (-lambda).sqrt();
                let longest = self
                    .graph
                    .bounded_edges()
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.length.partial_cmp(&b.1.length).unwrap())
                    .map(|(i, _)| i)
                    .expect("compact core is non-empty");
                let len = self.graph.bounded_edges()[longest].length;
                let d = self
                    .grid
                    .distances_to_edge_point(crate::graph::EdgeId(longest), len / 2.0);
                (0..self.grid.n_free())
                    .map(|i| 1.0 / (kappa * d[self.grid.node_of_free(i)]).cosh())
                    .collect()
            }
        };
        let norm0 = self.mass_dot(&u, &u).sqrt();
        if norm0 <= 0.0 {
            return Err(SolveError::TrivialSolution);
        }

        // rescale onto the Nehari manifold so Newton starts away from zero
        let su = dot(&u, &self.ops.stiffness.matvec(&u));
        let mu_u = self.mass_dot(&u, &u);
        let q = self.core_coeff * self.core_integral_free(&u);
        if q > 0.0 {
            let t = ((su - lambda * mu_u) / q).powf(1.0 / (self.p - 2.0));
            scale(&mut u, t);
        }

        let mut iterations = 0usize;
        let mut converged = false;
        let mut nu = 0.0f64;
        for _ in 0..opts.max_iter.min(200) {
            let resid = self.residual_free(&u, lambda)?;
            if resid < opts.tol {
                converged = true;
                break;
            }
            let f = self.residual_vec(&u, lambda);
            let merit = dot(&f, &f);
            let jac = Csr::from_triplets(u.len(), u.len(), self.jacobian_triplets(&u, lambda, nu));
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let delta = match ChainSolver::new(&jac, &self.chains, &self.vertex_dofs) {
                Ok(solver) => solver.solve(&rhs),
                Err(_) => {
                    nu = (10.0 * nu).max(1e-10);
                    iterations += 1;
                    continue;
                }
            };
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut trial = u.clone();
                axpy(&mut trial, step, &delta);
                let ft = self.residual_vec(&trial, lambda);
                if dot(&ft, &ft) <= merit * (1.0 - 1e-4 * step) + 1e-300 {
                    u = trial;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
            if accepted {
                if nu > 0.0 {
                    nu /= 10.0;
                    if nu < 1e-14 {
                        nu = 0.0;
                    }
                }
            } else {
                if nu >= 1e-2 {
                    break;
                }
                nu = (10.0 * nu).max(1e-10);
            }
        }
        let residual = self.residual_free(&u, lambda)?;
        if !converged && residual >= opts.tol {
            return Err(SolveError::NonConvergence {
                iterations,
                residual,
            });
        }
        if self.mass_dot(&u, &u).sqrt() < 1e-8 * norm0 {
            return Err(SolveError::TrivialSolution);
        }
        if u.iter().sum::<f64>() < 0.0 {
            scale(&mut u, -1.0);
        }
        let state = Field::from_free(&self.grid, &u);
        Ok(SolverReport {
            energy: self.energy_free(&u),
            lagrange: lambda,
            residual,
            mass: self.mass_dot(&u, &u),
            iterations,
            flow_iterations: 0,
            newton_iterations: iterations,
            converged: true,
            state,
        })
    }
}

#[cfg(test)]
mod tests;
