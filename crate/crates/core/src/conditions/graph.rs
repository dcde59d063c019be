//! The implication graph between conditions and the consistency check.

use std::collections::BTreeMap;

use serde::Serialize;

use super::context::Analysis;
use super::evaluate::evaluate_all;
use super::{ConditionId, Status, Verdict};
use crate::chain::{ChainSpec, StationaryDist};
use crate::config::RunConfig;
use crate::error::Result;
use crate::spectral::reversible_spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Implies,
    Equivalent,
}

/// An arrow of the implication graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: ConditionId,
    pub to: ConditionId,
    pub kind: EdgeKind,
    /// Only asserted on reversible chains.
    pub reversible_only: bool,
}

const fn e(from: u8, to: u8, kind: EdgeKind, reversible_only: bool) -> Edge {
    Edge { from: ConditionId::n(from), to: ConditionId::n(to), kind, reversible_only }
}

use EdgeKind::{Equivalent as Eq2, Implies as Imp};

const EDGES: [Edge; 38] = [
    e(21, 19, Imp, false),
    e(22, 20, Imp, false),
    e(23, 21, Imp, false),
    e(24, 22, Imp, false),
    e(10, 24, Imp, false),
    e(19, 15, Eq2, false),
    e(20, 16, Eq2, false),
    e(9, 11, Imp, false),
    e(10, 12, Imp, false),
    e(12, 4, Imp, false),
    e(11, 1, Imp, false),
    e(31, 28, Imp, true),
    e(4, 3, Imp, false),
    e(33, 29, Eq2, true),
    e(32, 31, Imp, true),
    e(31, 30, Eq2, true),
    e(33, 32, Eq2, true),
    e(3, 5, Imp, false),
    e(5, 1, Imp, false),
    e(1, 2, Imp, false),
    e(2, 5, Imp, false),
    e(17, 21, Eq2, false),
    e(18, 22, Eq2, false),
    e(25, 23, Eq2, false),
    e(26, 24, Eq2, false),
    e(24, 23, Imp, false),
    e(5, 6, Imp, false),
    e(6, 7, Imp, false),
    e(7, 8, Imp, false),
    e(19, 23, Imp, false),
    e(20, 24, Imp, false),
    e(23, 9, Imp, false),
    e(4, 32, Imp, true),
    e(27, 3, Imp, true),
    e(28, 27, Imp, true),
    e(8, 10, Imp, false),
    e(13, 17, Eq2, false),
    e(14, 18, Eq2, false),
];

/// Every arrow of the implication graph (equivalences listed once).
pub fn edges() -> Vec<Edge> {
    EDGES.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    /// The source fails or the target holds.
    Satisfied,
    /// The source holds and the target fails.
    Violated,
    /// One endpoint was not evaluated or does not apply.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EdgeResult {
    pub from: ConditionId,
    pub to: ConditionId,
    pub status: EdgeStatus,
}

/// Agreement of fitted rates with the reversible eigenvalue oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCoherence {
    /// Second-largest eigenvalue modulus.
    pub oracle: f64,
    pub tolerance: f64,
    /// Named rate estimates.
    pub rates: BTreeMap<String, f64>,
    pub coherent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub verdicts: Vec<Verdict>,
    pub edges: Vec<EdgeResult>,
    pub violated_edges: Vec<EdgeResult>,
    pub rate_coherence: Option<RateCoherence>,
}

impl ConsistencyReport {
    pub fn verdict(&self, id: ConditionId) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.condition == id)
    }

    pub fn is_consistent(&self) -> bool {
        self.violated_edges.is_empty()
    }
}

fn check(from: ConditionId, to: ConditionId, status: &BTreeMap<ConditionId, Status>) -> EdgeResult {
    let s = match (status.get(&from), status.get(&to)) {
        (Some(Status::Holds), Some(Status::Fails)) => EdgeStatus::Violated,
        (Some(Status::NotApplicable), _) | (_, Some(Status::NotApplicable)) | (None, _) | (_, None) => {
            EdgeStatus::NotApplicable
        }
        _ => EdgeStatus::Satisfied,
    };
    EdgeResult { from, to, status: s }
}

/// Checks every directed arrow against a set of verdicts.
pub fn check_edges(verdicts: &[Verdict], reversible: bool) -> Vec<EdgeResult> {
    let status: BTreeMap<ConditionId, Status> = verdicts.iter().map(|v| (v.condition, v.status)).collect();
    let mut out = Vec::new();
    for edge in edges() {
        let directions: &[(ConditionId, ConditionId)] = match edge.kind {
            EdgeKind::Implies => &[(edge.from, edge.to)],
            EdgeKind::Equivalent => &[(edge.from, edge.to), (edge.to, edge.from)],
        };
        for &(a, b) in directions {
            if edge.reversible_only && !reversible {
                out.push(EdgeResult { from: a, to: b, status: EdgeStatus::NotApplicable });
            } else {
                out.push(check(a, b, &status));
            }
        }
    }
    out
}

fn rate_of(verdicts: &[Verdict], n: u8, key: &str) -> Option<f64> {
    verdicts.iter().find(|v| v.condition == ConditionId::n(n)).and_then(|v| v.diagnostics.get(key).copied())
}

fn rate_coherence(a: &Analysis<'_>, verdicts: &[Verdict]) -> Result<Option<RateCoherence>> {
    if !a.reversible {
        return Ok(None);
    }
    let oracle = reversible_spectrum(a.chain, a.pi)?.subdominant_modulus();
    let one = &a.candidates[0];
    let mut rates = BTreeMap::new();
    if let Some(r) = rate_of(verdicts, 1, "rho") {
        rates.insert("pointwise_tv".to_string(), r);
    }
    let v_one = a.fit(&a.trace.v_norm[one.index]).rho;
    if a.config.conditions.contains(ConditionId::n(9)) {
        rates.insert("v_uniform_one".to_string(), v_one);
    }
    if a.config.conditions.contains(ConditionId::n(23)) {
        rates.insert("v_norm_decay_one".to_string(), v_one);
    }
    if a.config.conditions.contains(ConditionId::n(15)) {
        rates.insert("radius_one".to_string(), one.centered.radius);
    }
    let tolerance = a.config.rate_tol;
    let coherent = rates.values().all(|r| (r - oracle).abs() <= tolerance);
    Ok(Some(RateCoherence { oracle, tolerance, rates, coherent }))
}

/// Evaluates every configured condition and checks all arrows of the
/// implication graph, plus rate coherence on reversible chains.
pub fn cross_validate(chain: &ChainSpec, pi: &StationaryDist, config: &RunConfig) -> Result<ConsistencyReport> {
    let a = Analysis::new(chain, pi, config)?;
    cross_validate_analysis(&a)
}

pub(crate) fn cross_validate_analysis(a: &Analysis<'_>) -> Result<ConsistencyReport> {
    let verdicts = evaluate_all(a)?;
    let edges = check_edges(&verdicts, a.reversible);
    let violated_edges = edges.iter().copied().filter(|e| e.status == EdgeStatus::Violated).collect();
    let rate_coherence = rate_coherence(a, &verdicts)?;
    Ok(ConsistencyReport { verdicts, edges, violated_edges, rate_coherence })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_shape() {
        let all = edges();
        assert_eq!(all.len(), 38);
        let reversible = all.iter().filter(|e| e.reversible_only).count();
        assert_eq!(reversible, 8);
        for e in &all {
            let touches = e.from.requires_reversible() || e.to.requires_reversible();
            assert_eq!(touches, e.reversible_only, "{} -> {}", e.from, e.to);
        }
    }

    #[test]
    fn every_condition_is_connected() {
        let all = edges();
        for id in ConditionId::all() {
            assert!(all.iter().any(|e| e.from == id || e.to == id), "{id} is isolated");
        }
    }

    #[test]
    fn violation_requires_holds_then_fails() {
        let v = |n: u8, holds: bool| {
            Verdict::new(ConditionId::n(n), holds, Some(super::super::Certificate::PerJ(BTreeMap::new())))
        };
        let verdicts: Vec<Verdict> = ConditionId::all().map(|c| v(c.number(), true)).collect();
        assert!(check_edges(&verdicts, true).iter().all(|e| e.status == EdgeStatus::Satisfied));
        let mut broken = verdicts.clone();
        broken[0] = v(1, false);
        let res = check_edges(&broken, true);
        let violated: Vec<_> = res.iter().filter(|e| e.status == EdgeStatus::Violated).collect();
        assert!(violated.iter().all(|e| e.to == ConditionId::n(1)));
        assert!(!violated.is_empty());
    }
}
