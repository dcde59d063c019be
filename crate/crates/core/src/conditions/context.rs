//! Shared, immutable inputs for evaluating all conditions on one chain.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::trace::{centered_kernel, DecayTrace};
use super::{fit_log_decay, tail_window, RateFit, RATE_THRESHOLD};
use crate::chain::{is_irreducible, is_reversible, ChainSpec, Matrix, StationaryDist};
use crate::config::RunConfig;
use crate::drift::{
    default_kappa, default_small_set, drift_power, find_small_set_order, kappa_star, synthesize_drift, DriftCert,
    SmallSetCert,
};
use crate::error::{Error, Result};
use crate::norms::WeightFunction;
use crate::spectral::{eigenvalue_one_multiplicity, gelfand_radius, GelfandOptions, OperatorNorm, SpectralReport};

/// Number of random probability measures added to the test battery.
pub const RANDOM_MEASURES: usize = 8;

/// Gelfand settings for certificates: squaring never stops early, so the
/// iterates reach `m = 2^40` and `||K^m||^{1/m}` is within rounding of the
/// spectral radius.
pub const CERTIFICATE_GELFAND: GelfandOptions = GelfandOptions { n_max: 1 << 40, tol: 0.0 };

/// A weight function `V` tried by the conditions that quantify over `V`.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: String,
    pub v: WeightFunction,
    /// `[c]` index into [`DecayTrace`] weight-indexed sequences.
    pub index: usize,
    /// Gelfand report of `P - Pi` on `L^inf_V`.
    pub centered: SpectralReport,
    /// Gelfand report of `P` on `L^inf_{V,0}`.
    pub zero_mean: SpectralReport,
}

/// A probability measure used as a starting distribution.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeMeasure {
    pub label: String,
    pub mu: Vec<f64>,
}

/// Everything computed once per chain and read by every evaluator.
#[derive(Debug, Clone)]
pub struct Analysis<'a> {
    pub chain: &'a ChainSpec,
    pub pi: &'a StationaryDist,
    pub config: &'a RunConfig,
    pub reversible: bool,
    pub small_set: Vec<usize>,
    /// Full-support minorization of `small_set`, when one exists.
    pub small: Option<SmallSetCert>,
    pub kappa_star: f64,
    pub kappa: f64,
    /// Drift function synthesized from return times to `small_set`.
    pub drift: Option<DriftCert>,
    pub candidates: Vec<Candidate>,
    /// `j -> indices into candidates` admissible for moment order `j`.
    pub j_candidates: BTreeMap<u32, Vec<usize>>,
    pub measures: Vec<ProbeMeasure>,
    /// Index of `pi_S` in `measures`.
    pub pi_s_index: usize,
    pub trace: DecayTrace,
    pub window: (u64, u64),
    pub eigen_one_multiplicity: usize,
    pub centered_kernel: Matrix,
}

fn random_probability(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

impl<'a> Analysis<'a> {
    /// Standard analysis: candidates `V = 1`, the synthesized drift
    /// function and its Jensen powers `V^(1/j)`.
    pub fn new(chain: &'a ChainSpec, pi: &'a StationaryDist, config: &'a RunConfig) -> Result<Self> {
        Self::build(chain, pi, config, None)
    }

    /// Analysis in which every condition quantified over `V` uses exactly
    /// the given weight functions.
    pub fn with_weights(
        chain: &'a ChainSpec,
        pi: &'a StationaryDist,
        config: &'a RunConfig,
        weights: Vec<(String, WeightFunction)>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::BadParameters("at least one weight function is required".into()));
        }
        if weights.iter().any(|w| w.1.len() != chain.len()) {
            return Err(Error::DimensionMismatch("weight function and chain differ in size".into()));
        }
        Self::build(chain, pi, config, Some(weights))
    }

    fn build(
        chain: &'a ChainSpec,
        pi: &'a StationaryDist,
        config: &'a RunConfig,
        custom: Option<Vec<(String, WeightFunction)>>,
    ) -> Result<Self> {
        config.validate()?;
        if pi.len() != chain.len() {
            return Err(Error::DimensionMismatch("pi and chain differ in size".into()));
        }
        if !is_irreducible(chain) {
            return Err(Error::NotIrreducible);
        }
        let n = chain.len();
        let reversible = is_reversible(chain, pi);
        let small_set = default_small_set(pi);
        let small = find_small_set_order(chain, &small_set)?;
        let kappa_star = kappa_star(chain, &small_set)?;
        let kappa = default_kappa(kappa_star);
        let drift = match &small {
            Some(_) if kappa_star > 1.0 => synthesize_drift(chain, pi, &small_set, kappa, &config.j_set).ok(),
            _ => None,
        };

        let mut j_candidates = BTreeMap::new();
        let weights = match custom {
            Some(weights) => {
                for &j in &config.j_set {
                    j_candidates.insert(j, (0..weights.len()).collect());
                }
                weights
            }
            None => {
                let mut weights = vec![("one".to_string(), WeightFunction::constant(n))];
                for &j in &config.j_set {
                    j_candidates.insert(j, vec![0]);
                }
                if let Some(d) = &drift {
                    weights.push(("drift".to_string(), d.v.clone()));
                    for &j in &config.j_set {
                        if j > 1 {
                            weights.push((format!("drift^(1/{j})"), drift_power(d, j, pi)?.v));
                        }
                        let label = if j == 1 { "drift".to_string() } else { format!("drift^(1/{j})") };
                        let idx = weights.iter().position(|w| w.0 == label).unwrap_or(0);
                        if let Some(list) = j_candidates.get_mut(&j) {
                            if !list.contains(&idx) {
                                list.push(idx);
                            }
                        }
                    }
                }
                weights
            }
        };

        let mut measures: Vec<ProbeMeasure> = (0..n)
            .map(|x| {
                let mut mu = vec![0.0; n];
                mu[x] = 1.0;
                ProbeMeasure { label: format!("delta_{x}"), mu }
            })
            .collect();
        let pi_s_index = measures.len();
        let restricted = pi.restricted(&small_set)?;
        measures.push(ProbeMeasure { label: "pi_S".into(), mu: restricted });
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for k in 0..RANDOM_MEASURES {
            measures.push(ProbeMeasure { label: format!("random_{k}"), mu: random_probability(&mut rng, n) });
        }

        let vs: Vec<WeightFunction> = weights.iter().map(|w| w.1.clone()).collect();
        let mus: Vec<Vec<f64>> = measures.iter().map(|m| m.mu.clone()).collect();
        let trace = DecayTrace::compute(chain, pi, &vs, &mus, config.n_max);

        let centered = centered_kernel(chain, pi);
        let mut candidates = Vec::with_capacity(weights.len());
        for (index, (label, v)) in weights.into_iter().enumerate() {
            let c = gelfand_radius(&centered, OperatorNorm::LinfV(&v), CERTIFICATE_GELFAND)?;
            let z = gelfand_radius(chain.matrix(), OperatorNorm::LinfV0(&v, pi), CERTIFICATE_GELFAND)?;
            candidates.push(Candidate { label, v, index, centered: c, zero_mean: z });
        }

        Ok(Self {
            chain,
            pi,
            config,
            reversible,
            small_set,
            small,
            kappa_star,
            kappa,
            drift,
            candidates,
            j_candidates,
            measures,
            pi_s_index,
            trace,
            window: tail_window(config.n_max),
            eigen_one_multiplicity: eigenvalue_one_multiplicity(chain),
            centered_kernel: centered,
        })
    }

    /// Whether the default small set admits a full-support minorization.
    pub fn strongly_small(&self) -> bool {
        self.small.as_ref().is_some_and(|s| s.full_support())
    }

    /// Candidates admissible for moment order `j`.
    pub fn candidates_for_j(&self, j: u32) -> Vec<&Candidate> {
        self.j_candidates.get(&j).map(|idx| idx.iter().map(|&i| &self.candidates[i]).collect()).unwrap_or_default()
    }

    pub fn fit(&self, seq: &[f64]) -> RateFit {
        fit_log_decay(&DecayTrace::points(seq), self.window).unwrap_or(RateFit {
            rho: f64::INFINITY,
            c: f64::INFINITY,
            support_end: None,
        })
    }

    /// Smallest certified rate `min_m ||K^m||^{1/m}` for `P - Pi` on
    /// `L^inf_V`, with the `m` attaining it.
    pub fn centered_rate(&self, c: &Candidate) -> (u64, f64) {
        best_rate(&self.trace.v_norm[c.index], &c.centered)
    }

    /// Same as [`Self::centered_rate`] for `P` on `L^inf_{V,0}`.
    pub fn zero_mean_rate(&self, c: &Candidate) -> (u64, f64) {
        best_rate(&self.trace.v0_norm[c.index], &c.zero_mean)
    }

    /// Smallest `m` whose norm satisfies `||K^m|| < RATE_THRESHOLD^m`.
    pub fn first_contraction(seq: &[f64], report: &SpectralReport) -> Option<(u64, f64)> {
        let ln_t = RATE_THRESHOLD.ln();
        let from_trace =
            seq.iter().enumerate().find(|(i, &l)| l < (*i as f64 + 1.0) * ln_t).map(|(i, &l)| (i as u64 + 1, l.exp()));
        from_trace.or_else(|| {
            report.gelfand_iterates.iter().find(|&&(_, r)| r < RATE_THRESHOLD).map(|&(m, r)| (m, r.powf(m as f64)))
        })
    }
}

fn best_rate(seq: &[f64], report: &SpectralReport) -> (u64, f64) {
    let (m1, r1) = DecayTrace::best_root(seq);
    let (m2, r2) =
        report
            .gelfand_iterates
            .iter()
            .copied()
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    if r2 < r1 {
        (m2, r2)
    } else {
        (m1, r1)
    }
}
