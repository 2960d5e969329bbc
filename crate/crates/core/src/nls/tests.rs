use super::*;
use crate::graph::{fixtures, GraphBuilder};
use crate::linalg::SplitMix64;

fn coarse(h: f64, l: f64) -> GridParams {
    GridParams { h, l_trunc: l }
}

#[test]
fn energy_of_zero_field_is_zero() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.1, 5.0), 0.0).unwrap();
    let u = Field::zeros(prob.grid());
    assert_eq!(prob.energy(&u).unwrap(), 0.0);
    assert_eq!(prob.core_integral(&u).unwrap(), 0.0);
}

#[test]
fn constant_on_core_edge_gives_exact_core_term() {
    // u = 1 on a single core edge of length 2: int_K |u|^4 = 2, so the core
    // energy term is -(1/4) * 2 = -0.5
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.1, 5.0), 0.0).unwrap();
    let mut u = Field::zeros(prob.grid());
    for eg in prob.grid().edge_grids.iter().filter(|eg| eg.is_core()) {
        for &node in &eg.nodes {
            u.values[node] = 1.0;
        }
    }
    let core = prob.core_integral(&u).unwrap();
    assert!((core - 2.0).abs() < 1e-12, "core={core}");
}

#[test]
fn tent_energy_matches_closed_form() {
    // tent of slope +-1 peaking at 1 on an edge of length 2, p = 4:
    // kinetic 1/2 * 2 = 1, core -(1/4) * 2/5 = -0.1, E = 0.9
    let g = GraphBuilder::new()
        .vertex("a")
        .vertex("b")
        .edge("e", "a", "b", 2.0)
        .half_line("h1", "a")
        .half_line("h2", "b")
        .build()
        .unwrap();
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.02, 5.0), 0.0).unwrap();
    let mut u = Field::zeros(prob.grid());
    let eg = prob
        .grid()
        .edge_grids
        .iter()
        .find(|eg| eg.label == "e")
        .unwrap();
    for (k, &node) in eg.nodes.iter().enumerate() {
        let x = k as f64 * eg.step;
        u.values[node] = 1.0 - (x - 1.0).abs();
    }
    let e = prob.energy(&u).unwrap();
    assert!((e - 0.9).abs() < 1e-6, "E={e}");
}

#[test]
fn lagrange_multiplier_formula() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 5.0), 0.0).unwrap();
    let mut u = Field::zeros(prob.grid());
    let mut rng = SplitMix64::new(11);
    for v in u.values.iter_mut() {
        *v = rng.next_f64();
    }
    for node in 0..prob.grid().n_nodes() {
        if prob.grid().is_far(node) {
            u.values[node] = 0.0;
        }
    }
    let kinetic = prob.kinetic_full(&u);
    let core = prob.core_integral(&u).unwrap();
    let lambda = prob.lagrange_multiplier(&u).unwrap();
    assert!((lambda - (kinetic - core) / prob.mu).abs() < 1e-14);
}

#[test]
fn half_line_supported_field_has_nonnegative_multiplier() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 5.0), 0.0).unwrap();
    let mut u = Field::zeros(prob.grid());
    for eg in prob.grid().edge_grids.iter().filter(|eg| !eg.is_core()) {
        for (k, &node) in eg.nodes.iter().enumerate() {
            if !prob.grid().is_far(node) && k > 0 {
                let x = k as f64 * eg.step;
                u.values[node] = x * (-x).exp();
            }
        }
    }
    let lambda = prob.lagrange_multiplier(&u).unwrap();
    assert!(lambda >= 0.0, "lambda={lambda}");
}

#[test]
fn zero_field_mass_is_an_error_for_the_multiplier() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.1, 5.0), 0.0).unwrap();
    let u = Field::zeros(prob.grid());
    assert!(matches!(
        prob.lagrange_multiplier(&u),
        Err(SolveError::ZeroMass)
    ));
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let g = fixtures::signpost(2.0, 1.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.1, 5.0), 0.0).unwrap();
    let n = prob.grid().n_free();
    let mut rng = SplitMix64::new(5);
    let u: Vec<f64> = (0..n).map(|_| 0.5 * rng.next_f64() + 0.1).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();

    // dE(u)[v] = <S u - N(u), v>
    let mut grad = prob.ops.stiffness.matvec(&u);
    let nl = prob.nonlinearity(&u);
    axpy(&mut grad, -1.0, &nl);
    let analytic = dot(&grad, &v);

    let eps = 1e-5;
    let mut up = u.clone();
    axpy(&mut up, eps, &v);
    let mut um = u.clone();
    axpy(&mut um, -eps, &v);
    let numeric = (prob.energy_free(&up) - prob.energy_free(&um)) / (2.0 * eps);
    let rel = (analytic - numeric).abs() / analytic.abs().max(1e-12);
    assert!(
        rel < 1e-6,
        "analytic={analytic} numeric={numeric} rel={rel}"
    );
}

#[test]
fn phase_rotation_leaves_energy_and_multiplier_invariant() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 5.0), 0.0).unwrap();
    let mut u = Field::zeros(prob.grid());
    let mut rng = SplitMix64::new(17);
    for (node, v) in u.values.iter_mut().enumerate() {
        *v = rng.next_f64();
        if prob.grid().is_far(node) {
            *v = 0.0;
        }
    }
    let e0 = prob.energy(&u).unwrap();
    let l0 = prob.lagrange_multiplier(&u).unwrap();
    for theta in [0.3, 1.2, 2.9, -0.7] {
        let rotated = u.rotated(theta);
        let e = prob.energy_complex(&rotated).unwrap();
        let l = prob.lagrange_multiplier_complex(&rotated).unwrap();
        assert!((e - e0).abs() <= 1e-12 * (1.0 + e0.abs()), "theta={theta}");
        assert!((l - l0).abs() <= 1e-12 * (1.0 + l0.abs()), "theta={theta}");
    }
}

#[test]
fn mass_projection_is_exact_to_rounding() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 2.5, coarse(0.05, 5.0), 0.0).unwrap();
    let mut rng = SplitMix64::new(23);
    let mut u: Vec<f64> = (0..prob.grid().n_free()).map(|_| rng.next_f64()).collect();
    prob.renormalize(&mut u);
    let mass = prob.mass_dot(&u, &u);
    assert!((mass - prob.mu).abs() <= 1e-12 * prob.mu);
}

/// Shooting oracle for the line soliton at p = 4: integrate
/// `u'' = -lambda u - u^3` from a symmetric center and bisect the amplitude
/// that separates crossing zero from turning back up. Verifies the closed
/// form `u = sqrt(-2 lambda) sech(sqrt(-lambda) x)` and its mass `4 sqrt(-lambda)`.
fn shoot_profile(lambda: f64, amplitude: f64, x_max: f64, dx: f64) -> Vec<(f64, f64)> {
    let rhs = |u: f64| -lambda * u - u * u * u;
    let mut out = Vec::with_capacity((x_max / dx) as usize + 1);
    let (mut u, mut v, mut x) = (amplitude, 0.0, 0.0);
    out.push((x, u));
    while x < x_max {
        // RK4 on (u, v)
        let (k1u, k1v) = (v, rhs(u));
        let (k2u, k2v) = (v + 0.5 * dx * k1v, rhs(u + 0.5 * dx * k1u));
        let (k3u, k3v) = (v + 0.5 * dx * k2v, rhs(u + 0.5 * dx * k2u));
        let (k4u, k4v) = (v + dx * k3v, rhs(u + dx * k3u));
        u += dx / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += dx / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        x += dx;
        out.push((x, u));
    }
    out
}

fn shoot_amplitude(lambda: f64, x_max: f64, dx: f64) -> f64 {
    let classify = |a: f64| -> i32 {
        let profile = shoot_profile(lambda, a, x_max, dx);
        for w in profile.windows(2) {
            if w[1].1 <= 0.0 {
                return 1; // crossed zero: amplitude too large
            }
            if w[1].1 > w[0].1 + 1e-12 {
                return -1; // turned back up: amplitude too small
            }
        }
        0
    };
    let (mut lo, mut hi) = (1.2, 1.9);
    assert_eq!(classify(lo), -1);
    assert_eq!(classify(hi), 1);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match classify(mid) {
            -1 => lo = mid,
            1 => hi = mid,
            _ => return mid,
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn shooting_confirms_the_soliton_closed_form() {
    let lambda = -1.0;
    let a = shoot_amplitude(lambda, 12.0, 1e-3);
    let expect = (2.0f64).sqrt();
    assert!((a - expect).abs() < 1e-5, "amplitude {a} vs {expect}");

    let profile = shoot_profile(lambda, expect, 8.0, 1e-3);
    let mut worst = 0.0f64;
    let mut mass = 0.0;
    for w in profile.windows(2) {
        let (x, u) = w[1];
        worst = worst.max((u - expect / x.cosh()).abs());
        mass += 0.5 * (w[0].1 * w[0].1 + u * u) * 1e-3;
    }
    assert!(worst < 1e-4, "profile deviation {worst}");
    // total mass of the symmetric soliton = 4 sqrt(-lambda)
    assert!((2.0 * mass - 4.0).abs() < 1e-3, "mass {}", 2.0 * mass);
}

fn core_positions_and_values(report: &SolverReport, prob: &NlsProblem) -> Vec<(f64, f64)> {
    let eg = prob
        .grid()
        .edge_grids
        .iter()
        .find(|eg| eg.is_core())
        .unwrap();
    eg.nodes
        .iter()
        .enumerate()
        .map(|(k, &node)| (k as f64 * eg.step, report.state.values[node]))
        .collect()
}

fn peak_position(samples: &[(f64, f64)]) -> f64 {
    let (k, _) = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .unwrap();
    if k == 0 || k + 1 == samples.len() {
        return samples[k].0;
    }
    // quadratic fit around the maximal node
    let (um, u0, up) = (samples[k - 1].1, samples[k].1, samples[k + 1].1);
    let h = samples[k].0 - samples[k - 1].0;
    samples[k].0 + 0.5 * h * (um - up) / (um - 2.0 * u0 + up)
}

#[test]
fn fat_line_ground_state_matches_the_soliton() {
    // coarse version of the acceptance run
    let g = fixtures::fat_line(40.0);
    let prob = NlsProblem::new(&g, 4.0, 4.0, coarse(0.05, 10.0), 0.0).unwrap();
    let report = prob.ground_state(None, &SolveOptions::default()).unwrap();
    assert!(report.converged);
    assert!((report.mass - 4.0).abs() < 1e-10);
    assert!(
        (report.lagrange + 1.0).abs() < 0.02,
        "lambda={}",
        report.lagrange
    );
    assert!(report.energy < 0.0);

    let samples = core_positions_and_values(&report, &prob);
    let x0 = peak_position(&samples);
    let amp = 2.0f64.sqrt();
    let mut worst = 0.0f64;
    for &(x, u) in &samples {
        worst = worst.max((u - amp / (x - x0).cosh()).abs());
    }
    assert!(worst < 1e-2, "max soliton deviation {worst}");

    // residual of the exact profile at the exact multiplier is O(h^2)
    let mut oracle = Field::zeros(prob.grid());
    let eg = prob.grid().edge_grids.iter().find(|e| e.is_core()).unwrap();
    for (k, &node) in eg.nodes.iter().enumerate() {
        let x = k as f64 * eg.step;
        oracle.values[node] = amp / (x - 20.0).cosh();
    }
    let r = prob.residual(&oracle, -1.0).unwrap();
    assert!(r < 2e-2, "oracle residual {r}");
    let fine = NlsProblem::new(&g, 4.0, 4.0, coarse(0.025, 10.0), 0.0).unwrap();
    let mut oracle_fine = Field::zeros(fine.grid());
    let eg = fine.grid().edge_grids.iter().find(|e| e.is_core()).unwrap();
    for (k, &node) in eg.nodes.iter().enumerate() {
        let x = k as f64 * eg.step;
        oracle_fine.values[node] = amp / (x - 20.0).cosh();
    }
    let r_fine = fine.residual(&oracle_fine, -1.0).unwrap();
    assert!(
        r_fine < r / 2.5,
        "expected O(h^2) residual decay: {r} -> {r_fine}"
    );

    // random fields are nowhere near stationary
    let mut rng = SplitMix64::new(3);
    let mut junk = Field::zeros(prob.grid());
    for (node, v) in junk.values.iter_mut().enumerate() {
        if !prob.grid().is_far(node) {
            *v = rng.next_f64();
        }
    }
    assert!(prob.residual(&junk, -1.0).unwrap() > 1.0);
}

#[test]
fn below_p4_ground_states_exist_for_any_mass() {
    for (graph, mu, label) in [
        (fixtures::tadpole(2.0), 0.7, "tadpole"),
        (fixtures::fat_line(10.0), 1.0, "fat line"),
    ] {
        let prob = NlsProblem::new(&graph, 3.0, mu, coarse(0.05, 8.0), 0.0).unwrap();
        let report = prob.ground_state(None, &SolveOptions::default()).unwrap();
        assert!(report.converged, "{label}");
        assert!(report.energy < 0.0, "{label}: E={}", report.energy);
        assert!(report.lagrange < 0.0, "{label}: lambda={}", report.lagrange);
    }
}

#[test]
fn energy_scales_under_the_homothety_at_p4() {
    // (mu, G) -> (sigma mu, sigma^-1 G) multiplies the minimal energy by
    // sigma^3 at p = 4; grids are scaled to match
    let sigma = 2.0;
    let base = NlsProblem::new(&fixtures::tadpole(2.0), 4.0, 1.0, coarse(0.04, 8.0), 0.0).unwrap();
    let scaled =
        NlsProblem::new(&fixtures::tadpole(1.0), 4.0, sigma, coarse(0.02, 4.0), 0.0).unwrap();
    let e1 = base
        .ground_state(None, &SolveOptions::default())
        .unwrap()
        .energy;
    let e2 = scaled
        .ground_state(None, &SolveOptions::default())
        .unwrap()
        .energy;
    let rel = (e2 - sigma.powi(3) * e1).abs() / (sigma.powi(3) * e1).abs();
    assert!(rel < 1e-3, "e1={e1} e2={e2} rel={rel}");
}

#[test]
fn critical_mass_gate_refuses_large_masses() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 6.0, 2.5, coarse(0.05, 8.0), 0.0).unwrap();
    match prob.ground_state(None, &SolveOptions::default()) {
        Err(SolveError::RefusedRegime(msg)) => assert!(msg.contains("mu_K")),
        other => panic!("expected refusal, got {:?}", other.map(|r| r.energy)),
    }
}

#[test]
fn fixed_frequency_state_recovers_soliton_mass_scaling() {
    let g = fixtures::fat_line(40.0);
    // coefficient 1: mass(lambda=-1) = 4
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 10.0), 0.0).unwrap();
    let rep = prob
        .fixed_frequency_state(-1.0, None, &SolveOptions::default())
        .unwrap();
    assert!(rep.residual < 1e-8);
    assert!((rep.mass - 4.0).abs() < 2e-2, "mass={}", rep.mass);

    // coefficient 2m = 2 halves the squared amplitude: mass = 2
    let prob2 = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 10.0), 0.0)
        .unwrap()
        .with_core_coeff(2.0);
    let rep2 = prob2
        .fixed_frequency_state(-1.0, None, &SolveOptions::default())
        .unwrap();
    assert!((rep2.mass - 2.0).abs() < 1e-2, "mass={}", rep2.mass);

    // lambda >= 0 is rejected
    assert!(matches!(
        prob.fixed_frequency_state(0.5, None, &SolveOptions::default()),
        Err(SolveError::InvalidParameter(_))
    ));
}

#[test]
fn repulsive_delta_coupling_raises_the_ground_energy() {
    let g = fixtures::tadpole(2.0);
    let kirchhoff = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 8.0), 0.0).unwrap();
    let delta = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 8.0), 1.0).unwrap();
    let e0 = kirchhoff
        .ground_state(None, &SolveOptions::default())
        .unwrap()
        .energy;
    let e1 = delta
        .ground_state(None, &SolveOptions::default())
        .unwrap()
        .energy;
    // the delta term adds a nonnegative vertex contribution to the form
    assert!(e1 >= e0, "E_delta = {e1} < E_kirchhoff = {e0}");
}

#[test]
fn default_seed_is_continuous_at_junctions() {
    let g = fixtures::tadpole(2.0);
    let prob = NlsProblem::new(&g, 4.0, 1.0, coarse(0.05, 5.0), 0.0).unwrap();
    let seed = prob.default_seed();
    let vnode = prob.grid().vertex_node(crate::graph::VertexId(0));
    assert_eq!(seed.values[vnode], 1.0);
    let hl = prob
        .grid()
        .edge_grids
        .iter()
        .find(|eg| !eg.is_core())
        .unwrap();
    let first_interior = hl.nodes[1];
    assert!((seed.values[first_interior] - (-hl.step).exp()).abs() < 1e-15);
}
