//! Machine-readable analysis reports and plot-ready decay tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::chain::{structure, ChainSpec, StationaryDist, StructureReport};
use crate::conditions::trace::DecayTrace;
use crate::conditions::{cross_validate_analysis, Analysis, ConsistencyReport, EdgeResult, RateCoherence, Verdict};
use crate::config::RunConfig;
use crate::drift::{default_kappa, default_small_set, find_small_set_order, kappa_star, synthesize_drift};
use crate::error::{Error, Result};
use crate::norms::{l2_measure_norm_of_operator, WeightFunction};
use crate::num::{format12, round_sig};
use crate::spectral::{pi_perp_norm, reversible_spectrum};

/// Version of the report layout.
pub const REPORT_SCHEMA: u32 = 1;

/// Significant digits kept for every non-integer number in a report.
pub const REPORT_DIGITS: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct StationarySection {
    pub states: Vec<String>,
    pub pi: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencySection {
    pub edges: Vec<EdgeResult>,
    pub violations: Vec<EdgeResult>,
    pub rate_coherence: Option<RateCoherence>,
}

/// Full result of analyzing one chain.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub config: RunConfig,
    pub structure: StructureReport,
    pub stationary: StationarySection,
    pub verdicts: Vec<Verdict>,
    pub consistency: ConsistencySection,
    #[serde(serialize_with = "crate::num::extended_map")]
    pub rates: BTreeMap<String, f64>,
}

impl Report {
    pub fn violation_count(&self) -> usize {
        self.consistency.violations.len()
    }

    /// Pretty JSON with sorted keys, numbers rounded to
    /// [`REPORT_DIGITS`] significant digits and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        round_numbers(&mut value);
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        Ok(s)
    }
}

fn round_numbers(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x, REPORT_DIGITS))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn rates(a: &Analysis<'_>) -> Result<BTreeMap<String, f64>> {
    let mut rates = BTreeMap::new();
    let worst_tv = a.trace.tv.iter().map(|seq| a.fit(seq).rho).fold(0.0, f64::max);
    rates.insert("pointwise_tv_rho".into(), worst_tv);
    let one = &a.candidates[0];
    rates.insert("centered_radius_one".into(), one.centered.radius);
    rates.insert("zero_mean_radius_one".into(), one.zero_mean.radius);
    rates.insert("kappa_star".into(), a.kappa_star);
    rates.insert("l2_centered_norm".into(), l2_measure_norm_of_operator(&a.centered_kernel, a.pi)?);
    if a.reversible {
        let spectrum = reversible_spectrum(a.chain, a.pi)?;
        rates.insert("pi_perp_norm".into(), pi_perp_norm(a.chain, a.pi)?);
        rates.insert("spectral_gap".into(), spectrum.gap);
        rates.insert("subdominant_modulus".into(), spectrum.subdominant_modulus());
    }
    Ok(rates)
}

/// Evaluates every configured condition and assembles the report.
pub fn analyze(chain: &ChainSpec, pi: &StationaryDist, config: &RunConfig) -> Result<Report> {
    let a = Analysis::new(chain, pi, config)?;
    let ConsistencyReport { verdicts, edges, violated_edges, rate_coherence } = cross_validate_analysis(&a)?;
    Ok(Report {
        schema: REPORT_SCHEMA,
        config: config.clone(),
        structure: structure(chain),
        stationary: StationarySection {
            states: chain.states().to_vec(),
            pi: pi.as_slice().to_vec(),
            residual: pi.residual(chain),
        },
        verdicts,
        consistency: ConsistencySection { edges, violations: violated_edges, rate_coherence },
        rates: rates(&a)?,
    })
}

/// Weight used for the `vnorm_bound` column: the synthesized drift function
/// when the most likely state is small with a finite return-time exponent,
/// otherwise `V = 1`.
pub fn decay_weight(chain: &ChainSpec, pi: &StationaryDist) -> Result<WeightFunction> {
    let set = default_small_set(pi);
    let small = find_small_set_order(chain, &set)?.is_some_and(|s| s.full_support());
    let k_star = kappa_star(chain, &set)?;
    if small && k_star > 1.0 {
        if let Ok(cert) = synthesize_drift(chain, pi, &set, default_kappa(k_star), &[1]) {
            return Ok(cert.v);
        }
    }
    Ok(WeightFunction::constant(chain.len()))
}

/// CSV table `n,state,tv,vnorm_bound` for `n = 1..=n_max`, where `tv` is
/// `||P^n(x, .) - pi||_TV` and `vnorm_bound` is
/// `V(x) ||P^n - Pi||_{L^inf_V}`, an upper bound on `||P^n(x, .) - pi||_V`.
pub fn decay_table(chain: &ChainSpec, pi: &StationaryDist, n_max: usize) -> Result<String> {
    if n_max == 0 {
        return Err(Error::BadParameters("n_max must be at least 1".into()));
    }
    if !crate::chain::is_irreducible(chain) {
        return Err(Error::NotIrreducible);
    }
    let v = decay_weight(chain, pi)?;
    let trace = DecayTrace::compute(chain, pi, std::slice::from_ref(&v), &[], n_max);
    let mut out = String::from("n,state,tv,vnorm_bound\n");
    for step in 0..n_max {
        let op = trace.v_norm[0][step].exp();
        for (x, label) in chain.states().iter().enumerate() {
            let tv = trace.tv[x][step].exp();
            let bound = v.values()[x] * op;
            let _ = writeln!(out, "{},{},{},{}", step + 1, csv_field(label), format12(tv), format12(bound));
        }
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
