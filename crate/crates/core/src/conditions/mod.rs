//! Evaluation of every characterization on a finite chain, with
//! certificates, and the implication graph used to cross-check them.
//!
//! A condition *holds* when its certificate exhibits a rate strictly below
//! [`RATE_THRESHOLD`] (or, for drift and return-time conditions, a valid
//! drift or finite generating function on a small set) and the defining
//! inequality re-verifies on the computed data within [`VERIFY_SLACK`].

mod context;
mod evaluate;
mod fit;
mod graph;
mod id;
pub mod trace;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::drift::{DriftCert, ReturnTimeCert};
use crate::spectral::{ReversibleSpectrum, SpectralReport};

pub use context::{Analysis, Candidate, ProbeMeasure};
pub use evaluate::{cond_measure_tv, cond_pointwise_tv, cond_reversible, cond_spectral, cond_v_uniform, evaluate_all};
pub use fit::{fit_geometric_rate, fit_log_decay, tail_window, RateFit};
pub(crate) use graph::cross_validate_analysis;
pub use graph::{
    check_edges, cross_validate, edges, ConsistencyReport, Edge, EdgeKind, EdgeResult, EdgeStatus, RateCoherence,
};
pub use id::ConditionId;

/// Rates, radii and norms must fall below this value for a condition to hold.
pub const RATE_THRESHOLD: f64 = 1.0 - 1e-6;

/// Slack allowed when re-verifying a certificate's defining inequality.
pub const VERIFY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Fails,
    NotApplicable,
}

/// Evidence attached to a verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `value_n <= c[k] * rho^n` for each tracked sequence `k`.
    GeometricRate {
        rho: f64,
        c: Vec<f64>,
        weight: Option<String>,
        support_end: Option<u64>,
    },
    /// A separate rate for each starting state.
    StateRates {
        rho: Vec<f64>,
        c: Vec<f64>,
    },
    Drift(DriftCert),
    ReturnTime(ReturnTimeCert),
    Spectral {
        weight: String,
        report: SpectralReport,
    },
    /// `||K^m|| = value` in the named norm.
    NormBound {
        weight: String,
        m: u64,
        value: f64,
    },
    ReversibleSpectrum(ReversibleSpectrum),
    /// One certificate per moment order `j`.
    PerJ(BTreeMap<u32, Certificate>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub condition: ConditionId,
    pub label: &'static str,
    pub status: Status,
    pub certificate: Option<Certificate>,
    #[serde(serialize_with = "crate::num::extended_map")]
    pub diagnostics: BTreeMap<String, f64>,
}

impl Verdict {
    pub fn new(condition: ConditionId, holds: bool, certificate: Option<Certificate>) -> Self {
        let status = if holds && certificate.is_some() { Status::Holds } else { Status::Fails };
        Self { condition, label: condition.label(), status, certificate, diagnostics: BTreeMap::new() }
    }

    pub fn not_applicable(condition: ConditionId, reason: &str) -> Self {
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert(format!("not_applicable:{reason}"), 1.0);
        Self { condition, label: condition.label(), status: Status::NotApplicable, certificate: None, diagnostics }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == Status::Fails
    }
}
