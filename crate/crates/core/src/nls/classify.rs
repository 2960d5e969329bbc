//! Evaluation of the existence / nonexistence conditions for ground and
//! bound states: subcritical mass-size conditions, the critical-case
//! topological classification, and the explicit competitor energy.

use serde::Serialize;

use super::gn::{critical_mass_from_constant, gn_constant, GnOptions, GnVariant};
use crate::error::SolveError;
use crate::graph::{classify_topology, MetricGraph, TopologyReport};

/// Critical mass of the real line, `pi sqrt(3) / 2`.
pub const MU_R: f64 = 2.7206990463513265;
/// Critical mass of the half-line, `mu_R / 2`.
pub const MU_R_PLUS: f64 = MU_R / 2.0;

/// Threshold constant `c_p` of the subcritical existence condition
/// `mu^((p-2)/(6-p)) |K| > N^(4/(6-p)) c_p`. The formula carries a `0^0`
/// factor at `p = 4`, resolved by its limit value 1, which gives `c_4 = 1/2`.
pub fn subcritical_threshold_constant(p: f64) -> f64 {
    let t = p * (p - 4.0) / 16.0;
    let pow = |base: f64, e: f64| {
        if base == 0.0 && e == 0.0 {
            1.0
        } else {
            base.powf(e)
        }
    };
    let inner = pow(t, 2.0 / (p - 2.0)) + p / 8.0 * pow(t, (4.0 - p) / (p - 2.0));
    inner.powf((p - 2.0) / (6.0 - p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubcriticalVerdict {
    ExistsByThm,
    NotExistsByThm,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubcriticalCertificate {
    pub mu: f64,
    pub p: f64,
    pub n_halflines: usize,
    pub core_length: f64,
    /// `mu^((p-2)/(6-p)) |K|`
    pub lhs: f64,
    pub c_p: f64,
    /// `N^(4/(6-p)) c_p`; existence holds when `lhs` exceeds it strictly.
    pub exists_rhs: f64,
    pub c_graph_p: f64,
    pub c_graph_inf: f64,
    /// `(p/2)^(2/(6-p)) C(G,p)^((4-p)/(6-p)) / C(G,inf)^p`; nonexistence
    /// holds when `lhs` is strictly below it.
    pub nonexists_rhs: f64,
    pub convention: String,
}

fn require_upper_subcritical(p: f64) -> Result<(), SolveError> {
    if !(4.0..6.0).contains(&p) {
        return Err(SolveError::InvalidParameter(format!(
            "classification requires p in [4, 6), got {p}"
        )));
    }
    Ok(())
}

pub fn classify_subcritical(
    graph: &MetricGraph,
    mu: f64,
    p: f64,
    opts: &GnOptions,
) -> Result<(SubcriticalVerdict, SubcriticalCertificate), SolveError> {
    require_upper_subcritical(p)?;
    let report = classify_topology(graph);
    let n = report.n_halflines as f64;
    let lhs = mu.powf((p - 2.0) / (6.0 - p)) * report.core_length;
    let c_p = subcritical_threshold_constant(p);
    let exists_rhs = n.powf(4.0 / (6.0 - p)) * c_p;

    let c_graph_p = gn_constant(graph, p, GnVariant::WholeGraph, opts)?.constant;
    let c_graph_inf = gn_constant(graph, p, GnVariant::SupNorm, opts)?.constant;
    let nonexists_rhs = (p / 2.0).powf(2.0 / (6.0 - p)) * c_graph_p.powf((4.0 - p) / (6.0 - p))
        / c_graph_inf.powf(p);

    let cond_exists = lhs > exists_rhs;
    let cond_not = lhs < nonexists_rhs;
    let verdict = match (cond_exists, cond_not) {
        (true, false) => SubcriticalVerdict::ExistsByThm,
        (false, true) => SubcriticalVerdict::NotExistsByThm,
        _ => SubcriticalVerdict::Inconclusive,
    };
    Ok((
        verdict,
        SubcriticalCertificate {
            mu,
            p,
            n_halflines: report.n_halflines,
            core_length: report.core_length,
            lhs,
            c_p,
            exists_rhs,
            c_graph_p,
            c_graph_inf,
            nonexists_rhs,
            convention: "c_4 = 1/2 (0^0 -> 1 limit convention)".to_string(),
        },
    ))
}

/// The four cases of the critical-exponent classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalCase {
    /// (i) at least one terminal edge: no ground state for any mass.
    TerminalEdge,
    /// (ii) admits a cycle covering: no ground state for any mass.
    CycleCovering,
    /// (iii) one half-line, no terminal edges: ground states exactly for
    /// masses in `[mu_K, mu_R]`, with `mu_R+ < mu_K < sqrt(3)`.
    SingleHalfLine,
    /// (iv) no terminal edges, no cycle covering, at least two half-lines:
    /// ground states for masses in `[mu_K, mu_R]` provided `mu_K != mu_R`.
    MultiHalfLine,
}

pub fn critical_case(report: &TopologyReport) -> CriticalCase {
    if report.has_terminal_edge {
        CriticalCase::TerminalEdge
    } else if report.admits_cycle_covering {
        CriticalCase::CycleCovering
    } else if report.n_halflines == 1 {
        CriticalCase::SingleHalfLine
    } else {
        CriticalCase::MultiHalfLine
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalClassification {
    pub case: CriticalCase,
    pub mu_k: f64,
    pub mu_r: f64,
    pub mu_r_plus: f64,
    /// Predicted mass window for ground states, when it exists.
    pub window: Option<(f64, f64)>,
    pub topology: TopologyReport,
}

pub fn classify_critical(
    graph: &MetricGraph,
    opts: &GnOptions,
) -> Result<CriticalClassification, SolveError> {
    let topology = classify_topology(graph);
    let case = critical_case(&topology);
    let estimate = gn_constant(graph, 6.0, GnVariant::CoreRestricted, opts)?;
    let mu_k = critical_mass_from_constant(estimate.constant);
    let window = match case {
        CriticalCase::TerminalEdge | CriticalCase::CycleCovering => None,
        CriticalCase::SingleHalfLine => Some((mu_k, MU_R)),
        CriticalCase::MultiHalfLine => {
            if (mu_k - MU_R).abs() < 1e-3 * MU_R {
                None // window degenerates when mu_K reaches mu_R
            } else {
                Some((mu_k, MU_R))
            }
        }
    };
    Ok(CriticalClassification {
        case,
        mu_k,
        mu_r: MU_R,
        mu_r_plus: MU_R_PLUS,
        window,
        topology,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceCertificate {
    pub mu: f64,
    pub p: f64,
    pub core_length: f64,
    pub lhs: f64,
    /// `C(G,p)^((4-p)/(6-p)) / C(G,inf)^p`
    pub metric_rhs: f64,
    pub c_graph_p: f64,
    pub c_graph_inf: f64,
    pub is_tree: bool,
    pub n_pendants: usize,
}

/// Flags of the two nonexistence mechanisms for bound states.
#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceFlags {
    /// Metric smallness: no bound states of this mass with `lambda <= 0`.
    pub no_nonpositive_lambda: bool,
    /// Tree with at most one pendant: no bound states with `lambda >= 0`.
    pub no_nonnegative_lambda: bool,
    pub certificate: NonexistenceCertificate,
}

pub fn nonexistence_check(
    graph: &MetricGraph,
    mu: f64,
    p: f64,
    opts: &GnOptions,
) -> Result<NonexistenceFlags, SolveError> {
    require_upper_subcritical(p)?;
    let report = classify_topology(graph);
    let lhs = mu.powf((p - 2.0) / (6.0 - p)) * report.core_length;
    let c_graph_p = gn_constant(graph, p, GnVariant::WholeGraph, opts)?.constant;
    let c_graph_inf = gn_constant(graph, p, GnVariant::SupNorm, opts)?.constant;
    let metric_rhs = c_graph_p.powf((4.0 - p) / (6.0 - p)) / c_graph_inf.powf(p);
    Ok(NonexistenceFlags {
        no_nonpositive_lambda: lhs < metric_rhs,
        no_nonnegative_lambda: report.is_tree && report.n_pendants <= 1,
        certificate: NonexistenceCertificate {
            mu,
            p,
            core_length: report.core_length,
            lhs,
            metric_rhs,
            c_graph_p,
            c_graph_inf,
            is_tree: report.is_tree,
            n_pendants: report.n_pendants,
        },
    })
}

/// Energy of the explicit competitor: amplitude `A` on the compact core and
/// `A exp(-kappa x)` on every half-line, with `A` fixed by the mass. Closed
/// form:
///
/// ```text
/// E(kappa) = A^2 N kappa / 4 - A^p |K| / p,   A^2 = mu / (|K| + N/(2 kappa))
/// ```
pub fn competitor_energy(graph: &MetricGraph, mu: f64, p: f64, kappa: f64) -> f64 {
    assert!(kappa > 0.0, "decay rate must be positive");
    let core = graph.core_length();
    let n = graph.n_half_lines() as f64;
    let a2 = mu / (core + n / (2.0 * kappa));
    a2 * n * kappa / 4.0 - a2.powf(p / 2.0) * core / p
}

/// Scan a log-spaced grid of decay rates and return `(kappa, energy)` at the
/// minimum. A negative value certifies `inf E < 0` without solving.
pub fn best_competitor_energy(graph: &MetricGraph, mu: f64, p: f64) -> (f64, f64) {
    let mut best = (1.0, f64::INFINITY);
    let n = 600;
    for k in 0..n {
        let kappa = 10f64.powf(-3.0 + 5.0 * k as f64 / (n - 1) as f64);
        let e = competitor_energy(graph, mu, p, kappa);
        if e < best.1 {
            best = (kappa, e);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures;

    #[test]
    fn mu_r_constants_match_their_definitions() {
        assert!((MU_R - std::f64::consts::PI * 3.0f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((MU_R_PLUS - MU_R / 2.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_constant_values() {
        // c_4 = 1/2 under the 0^0 -> 1 convention; continuous from above
        assert_eq!(subcritical_threshold_constant(4.0), 0.5);
        assert!((subcritical_threshold_constant(4.0001) - 0.5).abs() < 1e-2);
        // c_5 = [(5/16)^(2/3) + (5/8)(5/16)^(-1/3)]^3
        let c5 = subcritical_threshold_constant(5.0);
        let direct =
            ((5f64 / 16.0).powf(2.0 / 3.0) + 5.0 / 8.0 * (5f64 / 16.0).powf(-1.0 / 3.0)).powi(3);
        assert!((c5 - direct).abs() < 1e-14);
        assert!((c5 - 2.637).abs() < 2e-3, "c5={c5}");
    }

    #[test]
    fn competitor_goes_negative_when_the_mass_size_condition_holds() {
        // p=4, |K|=3, N=2, mu=1: mu |K| = 3 > N^2 c_4 = 2
        let g = fixtures::fat_line(3.0);
        let lhs = 1.0 * 3.0;
        let rhs = 4.0 * subcritical_threshold_constant(4.0);
        assert!(lhs > rhs);
        let (kappa, e) = best_competitor_energy(&g, 1.0, 4.0);
        assert!(e < 0.0, "kappa={kappa} e={e}");
    }

    #[test]
    fn competitor_stays_positive_for_vanishing_mass() {
        let g = fixtures::fat_line(3.0);
        let (_, e) = best_competitor_energy(&g, 1e-4, 4.0);
        assert!(e > 0.0, "e={e}");
        let (_, e) = best_competitor_energy(&g, 1e-4, 5.0);
        assert!(e > 0.0, "e={e}");
    }

    #[test]
    fn critical_cases_of_the_four_archetypes() {
        use crate::graph::classify_topology;
        // (i) terminal edge
        let a = fixtures::star_with_pendant(1.0);
        assert_eq!(
            critical_case(&classify_topology(&a)),
            CriticalCase::TerminalEdge
        );
        // (ii) cycle covering: two parallel edges, half-line at each end
        let b = crate::graph::GraphBuilder::new()
            .vertex("a")
            .vertex("b")
            .edge("e1", "a", "b", 1.0)
            .edge("e2", "a", "b", 1.0)
            .half_line("h1", "a")
            .half_line("h2", "b")
            .build()
            .unwrap();
        assert_eq!(
            critical_case(&classify_topology(&b)),
            CriticalCase::CycleCovering
        );
        // (iii) tadpole
        let c = fixtures::tadpole(2.0);
        assert_eq!(
            critical_case(&classify_topology(&c)),
            CriticalCase::SingleHalfLine
        );
        // (iv) signpost
        let d = fixtures::signpost(2.0, 1.0);
        assert_eq!(
            critical_case(&classify_topology(&d)),
            CriticalCase::MultiHalfLine
        );
    }

    #[test]
    fn signpost_critical_window_sits_between_the_line_constants() {
        let opts = GnOptions {
            h: 0.05,
            l_trunc: 8.0,
            levels: 2,
            tol: 1e-7,
            max_iter: 2000,
        };
        let cls = classify_critical(&fixtures::signpost(2.0, 1.0), &opts).unwrap();
        assert_eq!(cls.case, CriticalCase::MultiHalfLine);
        let (lo, hi) = cls.window.expect("nondegenerate window");
        assert!((lo - cls.mu_k).abs() < 1e-15);
        assert!((hi - MU_R).abs() < 1e-15);
        assert!(
            MU_R_PLUS < cls.mu_k && cls.mu_k <= MU_R + 1e-9,
            "mu_k = {}",
            cls.mu_k
        );
    }

    #[test]
    fn subcritical_verdicts() {
        let opts = GnOptions {
            h: 0.05,
            l_trunc: 6.0,
            levels: 1,
            tol: 1e-6,
            max_iter: 1500,
        };
        // existence: p=4, N=2, |K|=3, mu=1 gives lhs 3 > 2
        let g = fixtures::fat_line(3.0);
        let (verdict, cert) = classify_subcritical(&g, 1.0, 4.0, &opts).unwrap();
        assert_eq!(verdict, SubcriticalVerdict::ExistsByThm);
        assert!((cert.lhs - 3.0).abs() < 1e-12);
        assert!((cert.exists_rhs - 2.0).abs() < 1e-12);
        assert!(cert.convention.contains("c_4"));

        // nonexistence for vanishing mass on the same graph
        let (verdict, cert) = classify_subcritical(&g, 1e-5, 4.0, &opts).unwrap();
        assert_eq!(verdict, SubcriticalVerdict::NotExistsByThm);
        assert!(cert.lhs < cert.nonexists_rhs);

        // between the two strict thresholds: a pendant raises C(G,inf) toward
        // sqrt(2), so the nonexistence bound sits well below mu |K| = 2 while
        // the existence bound N^2 c_4 = 4.5 sits well above
        let (verdict, cert) =
            classify_subcritical(&fixtures::star_with_pendant(1.0), 2.0, 4.0, &opts).unwrap();
        assert!(
            cert.nonexists_rhs < cert.lhs && cert.lhs < cert.exists_rhs,
            "lhs={} bounds=({}, {})",
            cert.lhs,
            cert.nonexists_rhs,
            cert.exists_rhs
        );
        assert_eq!(verdict, SubcriticalVerdict::Inconclusive);
    }

    #[test]
    fn nonexistence_flags() {
        let opts = GnOptions {
            h: 0.05,
            l_trunc: 6.0,
            levels: 1,
            tol: 1e-6,
            max_iter: 1500,
        };
        // tree with one pendant: flag (ii) regardless of mass
        let tree = fixtures::star_with_pendant(1.0);
        let flags = nonexistence_check(&tree, 1.0, 4.0, &opts).unwrap();
        assert!(flags.no_nonnegative_lambda);

        // a loop admits loop-supported stationary candidates: flag (ii) off
        let loopy = fixtures::tadpole(2.0);
        let flags = nonexistence_check(&loopy, 1.0, 4.0, &opts).unwrap();
        assert!(!flags.no_nonnegative_lambda);

        // tiny mass on a small core: flag (i) on
        let small = fixtures::tadpole(0.5);
        let flags = nonexistence_check(&small, 1e-3, 4.0, &opts).unwrap();
        assert!(
            flags.no_nonpositive_lambda,
            "lhs={} rhs={}",
            flags.certificate.lhs, flags.certificate.metric_rhs
        );
    }
}
