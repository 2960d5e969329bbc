//! Output documents. Every document embeds the fully resolved configuration
//! and the graph content hash; field order is fixed, so identical inputs
//! produce byte-identical bytes.

use serde::Serialize;

use gratwave_core::dirac::LimitStage;
use gratwave_core::graph::TopologyReport;
use gratwave_core::nls::{
    CriticalClassification, GnVariant, NonexistenceFlags, SubcriticalCertificate,
    SubcriticalVerdict,
};

use crate::CommonArgs;

#[derive(Serialize)]
pub(crate) struct ResolvedConfig {
    pub command: &'static str,
    pub graph: String,
    pub h: f64,
    pub trunc: f64,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_schedule: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

pub(crate) fn resolved(common: &CommonArgs, command: &'static str) -> ResolvedConfig {
    ResolvedConfig {
        command,
        graph: common.graph.display().to_string(),
        h: common.h,
        trunc: common.trunc,
        tol: common.tol,
        max_iter: common.max_iter,
        p: None,
        mass: None,
        alpha: None,
        m: None,
        c: None,
        c_schedule: None,
        lambda: None,
        omega: None,
    }
}

impl ResolvedConfig {
    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn with_mass_opt(mut self, mass: Option<f64>) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_dirac(mut self, m: f64, c: f64) -> Self {
        self.m = Some(m);
        self.c = Some(c);
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_schedule(mut self, m: f64, schedule: Vec<f64>) -> Self {
        self.m = Some(m);
        self.c_schedule = Some(schedule);
        self
    }
}

#[derive(Serialize)]
pub(crate) struct SubcriticalDoc {
    pub verdict: SubcriticalVerdict,
    pub certificate: SubcriticalCertificate,
}

#[derive(Serialize)]
pub(crate) struct ClassifyDoc {
    pub config: ResolvedConfig,
    pub graph_hash: String,
    pub topology: TopologyReport,
    pub regime: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcritical: Option<SubcriticalDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonexistence: Option<NonexistenceFlags>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical: Option<CriticalClassification>,
}

#[derive(Serialize)]
pub(crate) struct GroundStateDoc {
    pub config: ResolvedConfig,
    pub graph_hash: String,
    pub energy: f64,
    pub lagrange: f64,
    pub residual: f64,
    pub mass: f64,
    pub iterations: usize,
    pub flow_iterations: usize,
    pub newton_iterations: usize,
    pub converged: bool,
}

#[derive(Serialize)]
pub(crate) struct GnDoc {
    pub config: ResolvedConfig,
    pub graph_hash: String,
    pub variant: GnVariant,
    pub constant: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_mass: Option<f64>,
    pub history: Vec<(f64, f64)>,
}

#[derive(Serialize)]
pub(crate) struct BoundStateDoc {
    pub config: ResolvedConfig,
    pub graph_hash: String,
    pub omega: f64,
    pub action: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub chi_l2: f64,
    pub phi_l2: f64,
    pub spectral_gap: f64,
}

#[derive(Serialize)]
pub(crate) struct NonrelLimitDoc {
    pub config: ResolvedConfig,
    pub graph_hash: String,
    pub stages: Vec<LimitStage>,
    pub target_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

#[derive(Serialize)]
pub(crate) struct RearrangeDoc {
    pub config: ResolvedConfig,
    pub graph_hash: String,
    pub total_length: f64,
    pub samples: usize,
}
