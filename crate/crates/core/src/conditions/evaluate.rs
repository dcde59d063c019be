//! One evaluator per family of conditions, all reading a shared [`Analysis`].

use std::collections::BTreeMap;

use super::context::{Analysis, Candidate};
use super::trace::DecayTrace;
use super::{Certificate, ConditionId, RateFit, Verdict, RATE_THRESHOLD, VERIFY_SLACK};
use crate::chain::{ChainSpec, StationaryDist};
use crate::config::RunConfig;
use crate::drift::{drift_power, return_time_mgf, verify_drift, DriftCert, DriftOutcome, DRIFT_SLACK};
use crate::error::{Error, Result};
use crate::linalg::ln0;
use crate::norms::{l2_measure_norm_of_operator, lp_norm, SignedMeasure, WeightFunction};
use crate::spectral::{gelfand_radius, pi_perp_norm, reversible_spectrum, OperatorNorm};

const fn id(n: u8) -> ConditionId {
    ConditionId::n(n)
}

/// The envelope `c * rho^n` with the smallest `c` dominating `seq` for a
/// prescribed `rho`.
fn envelope(seq: &[f64], rho: f64) -> RateFit {
    let points = DecayTrace::points(seq);
    let positive: Vec<(u64, f64)> = points.into_iter().filter(|p| p.1 > f64::NEG_INFINITY).collect();
    if positive.is_empty() {
        return RateFit::ZERO;
    }
    if rho > 0.0 {
        let ln_rho = rho.ln();
        let ln_c = positive.iter().map(|&(n, l)| l - n as f64 * ln_rho).fold(f64::NEG_INFINITY, f64::max);
        RateFit { rho, c: ln_c.exp(), support_end: None }
    } else {
        let ln_c = positive.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let end = positive.iter().map(|p| p.0).max();
        RateFit { rho: 0.0, c: ln_c.exp(), support_end: end }
    }
}

/// A shared rate for several sequences: the largest fitted rate, with a
/// constant per sequence.
fn shared_envelope(a: &Analysis<'_>, seqs: &[&[f64]]) -> (Vec<RateFit>, Vec<RateFit>, bool) {
    let fits: Vec<RateFit> = seqs.iter().map(|s| a.fit(s)).collect();
    let rho = fits.iter().map(|f| f.rho).fold(0.0, f64::max);
    let shared: Vec<RateFit> = seqs.iter().map(|s| envelope(s, rho)).collect();
    let verified = seqs.iter().zip(&shared).all(|(s, f)| f.verify_ln(&DecayTrace::points(s), VERIFY_SLACK));
    (fits, shared, verified)
}

fn rate_certificate(shared: &[RateFit], weight: Option<&str>) -> Certificate {
    let rho = shared.iter().map(|f| f.rho).fold(0.0, f64::max);
    Certificate::GeometricRate {
        rho,
        c: shared.iter().map(|f| f.c).collect(),
        weight: weight.map(str::to_string),
        support_end: shared.iter().filter_map(|f| f.support_end).max(),
    }
}

fn shared_rate(shared: &[RateFit]) -> f64 {
    shared.iter().map(|f| f.rho).fold(0.0, f64::max)
}

/// Conditions i and ii from the per-state total-variation decay.
pub(crate) fn pointwise(a: &Analysis<'_>) -> Vec<Verdict> {
    let seqs: Vec<&[f64]> = a.trace.tv.iter().map(Vec::as_slice).collect();
    let (fits, shared, verified) = shared_envelope(a, &seqs);
    let rho = shared_rate(&shared);
    let all_geometric = fits.iter().all(RateFit::geometric);
    let first =
        Verdict::new(id(1), rho < RATE_THRESHOLD && verified, Some(rate_certificate(&shared, None))).with("rho", rho);
    let states =
        Certificate::StateRates { rho: fits.iter().map(|f| f.rho).collect(), c: fits.iter().map(|f| f.c).collect() };
    let ok_states = fits.iter().filter(|f| f.geometric()).count();
    let second =
        Verdict::new(id(2), all_geometric, Some(states)).with("rho", rho).with("geometric_states", ok_states as f64);
    vec![first, second]
}

/// Conditions iii, iv and v from the measure battery.
pub(crate) fn measure_starts(a: &Analysis<'_>) -> Vec<Verdict> {
    let seqs: Vec<&[f64]> = a.trace.measure_tv.iter().map(Vec::as_slice).collect();
    let (fits, shared, verified) = shared_envelope(a, &seqs);
    let rho = shared_rate(&shared);
    let all_geometric = fits.iter().all(RateFit::geometric) && verified;
    let cert = rate_certificate(&shared, None);

    let lp_max = |p: f64| {
        a.measures
            .iter()
            .map(|m| lp_norm(&SignedMeasure(m.mu.clone()), a.pi, p).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    };
    let p0 = a.config.p_set[0];
    let in_lp = |p: f64| lp_max(p).is_finite();
    let third = Verdict::new(id(3), all_geometric && in_lp(p0), Some(cert.clone()))
        .with("rho", rho)
        .with("p", p0)
        .with("max_lp_norm", lp_max(p0))
        .with("measures", a.measures.len() as f64);
    let mut fourth = Verdict::new(id(4), all_geometric && a.config.p_set.iter().all(|&p| in_lp(p)), Some(cert))
        .with("rho", rho)
        .with("measures", a.measures.len() as f64);
    for &p in &a.config.p_set {
        fourth = fourth.with(&format!("max_lp_norm_p{p}"), lp_max(p));
    }

    let pi_s = &a.trace.measure_tv[a.pi_s_index];
    let fit = a.fit(pi_s);
    let small = a.strongly_small();
    let verified = fit.verify_ln(&DecayTrace::points(pi_s), VERIFY_SLACK);
    let fifth = Verdict::new(id(5), small && fit.geometric() && verified, Some(rate_certificate(&[fit], None)))
        .with("rho", fit.rho)
        .with("small_set_found", f64::from(u8::from(small)))
        .with("small_set_order", a.small.as_ref().map_or(f64::NAN, |s| s.m as f64))
        .with("pi_s_mass", a.pi.mass(&a.small_set));
    vec![third, fourth, fifth]
}

fn drift_is_valid(chain: &ChainSpec, cert: &DriftCert) -> bool {
    let scale = cert.v.values().iter().copied().fold(1.0, f64::max);
    cert.lambda < 1.0 && cert.worst_slack(chain) <= DRIFT_SLACK * scale
}

fn drift_reverified(a: &Analysis<'_>, cert: &DriftCert) -> bool {
    match verify_drift(a.chain, a.pi, &cert.v, &cert.states, &[]) {
        Ok(DriftOutcome::Certified(check)) => {
            drift_is_valid(a.chain, cert) && check.lambda <= cert.lambda + DRIFT_SLACK
        }
        _ => false,
    }
}

/// Conditions vi, vii and viii from return times to the default small set.
pub(crate) fn return_and_drift(a: &Analysis<'_>) -> Vec<Verdict> {
    let small = a.strongly_small();
    let base = |n: u8, holds: bool, cert: Option<Certificate>| {
        Verdict::new(id(n), holds, cert)
            .with("small_set_found", f64::from(u8::from(small)))
            .with("kappa_star", a.kappa_star)
            .with("kappa", a.kappa)
    };

    let sixth = match return_time_mgf(a.chain, &a.small_set, a.kappa) {
        Ok(rt) => {
            let sup = rt.sup_return_mgf();
            let holds = small && a.kappa_star > 1.0 && sup.is_finite();
            base(6, holds, Some(Certificate::ReturnTime(rt))).with("sup_return_mgf", sup)
        }
        Err(_) => base(6, false, None),
    };

    let (seventh, eighth) = match (&a.drift, small) {
        (Some(cert), true) => {
            let ok = drift_reverified(a, cert);
            let seventh = base(7, ok, Some(Certificate::Drift(cert.clone())))
                .with("lambda", cert.lambda)
                .with("b", cert.b)
                .with("worst_slack", cert.worst_slack(a.chain));
            let mut family = BTreeMap::new();
            let mut all = ok;
            for &j in &a.config.j_set {
                match drift_power(cert, j, a.pi) {
                    Ok(powered) => {
                        all &= drift_reverified(a, &powered);
                        family.insert(j, Certificate::Drift(powered));
                    }
                    Err(_) => all = false,
                }
            }
            let eighth = base(8, all, Some(Certificate::PerJ(family))).with("lambda", cert.lambda);
            (seventh, eighth)
        }
        _ => (base(7, false, None), base(8, false, None)),
    };
    vec![sixth, seventh, eighth]
}

struct Choice<'c> {
    candidate: &'c Candidate,
    fit: RateFit,
    holds: bool,
}

/// The best `V` among `cands` for V-uniform decay.
fn best_v_uniform<'c>(a: &Analysis<'_>, cands: &[&'c Candidate]) -> Choice<'c> {
    let mut best: Option<Choice<'c>> = None;
    for &c in cands {
        let seq = &a.trace.v_norm[c.index];
        let fit = a.fit(seq);
        let holds = fit.geometric() && fit.verify_ln(&DecayTrace::points(seq), VERIFY_SLACK);
        let better = match &best {
            None => true,
            Some(b) => (holds && !b.holds) || (holds == b.holds && fit.rho < b.fit.rho),
        };
        if better {
            best = Some(Choice { candidate: c, fit, holds });
        }
    }
    best.expect("at least one candidate")
}

/// Whether `sup_{|f|<=V} |mu P^n f - pi f| <= C mu(V) rho^n` on the battery.
fn measure_bound_holds(a: &Analysis<'_>, choice: &Choice<'_>) -> (bool, f64) {
    let vals = choice.candidate.v.values();
    let mut max_mu_v = 0.0f64;
    let mut ok = true;
    for (k, m) in a.measures.iter().enumerate() {
        let mu_v: f64 = m.mu.iter().zip(vals).map(|(p, v)| p * v).sum();
        max_mu_v = max_mu_v.max(mu_v);
        for (n, l) in DecayTrace::points(&a.trace.measure_v[choice.candidate.index][k]) {
            if l > choice.fit.ln_bound(n) + ln0(mu_v) + VERIFY_SLACK {
                ok = false;
            }
        }
    }
    (ok, max_mu_v)
}

fn v_uniform_cert(choice: &Choice<'_>) -> Certificate {
    Certificate::GeometricRate {
        rho: choice.fit.rho,
        c: vec![choice.fit.c],
        weight: Some(choice.candidate.label.clone()),
        support_end: choice.fit.support_end,
    }
}

/// Conditions ix to xii: V-uniform decay from points and from measures.
pub(crate) fn v_uniform(a: &Analysis<'_>) -> Vec<Verdict> {
    let all: Vec<&Candidate> = a.candidates.iter().collect();
    let some = best_v_uniform(a, &all);
    let (bound_ok, max_mu_v) = measure_bound_holds(a, &some);
    let ninth = Verdict::new(id(9), some.holds, Some(v_uniform_cert(&some)))
        .with("rho", some.fit.rho)
        .with("weight_moment_1", some.candidate.v.moment(a.pi, 1));
    let eleventh = Verdict::new(id(11), some.holds && bound_ok, Some(v_uniform_cert(&some)))
        .with("rho", some.fit.rho)
        .with("max_mu_v", max_mu_v);

    let mut tenth_family = BTreeMap::new();
    let mut twelfth_family = BTreeMap::new();
    let mut tenth_ok = true;
    let mut twelfth_ok = true;
    let mut worst_rho = 0.0f64;
    for &j in &a.config.j_set {
        let choice = best_v_uniform(a, &a.candidates_for_j(j));
        let (ok, _) = measure_bound_holds(a, &choice);
        tenth_ok &= choice.holds;
        twelfth_ok &= choice.holds && ok;
        worst_rho = worst_rho.max(choice.fit.rho);
        tenth_family.insert(j, v_uniform_cert(&choice));
        twelfth_family.insert(j, v_uniform_cert(&choice));
    }
    let tenth = Verdict::new(id(10), tenth_ok, Some(Certificate::PerJ(tenth_family))).with("rho", worst_rho);
    let twelfth = Verdict::new(id(12), twelfth_ok, Some(Certificate::PerJ(twelfth_family))).with("rho", worst_rho);
    vec![ninth, tenth, eleventh, twelfth]
}

/// One candidate's results for the seven spectral-type families, in the
/// order: gap, radius of `P - Pi`, radius on `L^inf_{V,0}`, norm of
/// `P^m - Pi`, norm on `L^inf_{V,0}`, decay of `P^n - Pi`, decay on
/// `L^inf_{V,0}`.
struct SpectralParts {
    holds: [bool; 7],
    certs: [Certificate; 7],
    values: [f64; 7],
}

fn spectral_parts(a: &Analysis<'_>, c: &Candidate) -> SpectralParts {
    let (_, centered_rate) = a.centered_rate(c);
    let (_, zero_rate) = a.zero_mean_rate(c);
    let simple = a.eigen_one_multiplicity == 1;
    let centered_seq = &a.trace.v_norm[c.index];
    let zero_seq = &a.trace.v0_norm[c.index];
    let centered_m = Analysis::first_contraction(centered_seq, &c.centered);
    let zero_m = Analysis::first_contraction(zero_seq, &c.zero_mean);
    let centered_fit = a.fit(centered_seq);
    let zero_fit = a.fit(zero_seq);
    let fit_ok = |fit: &RateFit, seq: &[f64]| fit.geometric() && fit.verify_ln(&DecayTrace::points(seq), VERIFY_SLACK);

    let spectral = |report: &crate::spectral::SpectralReport| Certificate::Spectral {
        weight: c.label.clone(),
        report: report.clone(),
    };
    let norm = |found: Option<(u64, f64)>, seq: &[f64]| {
        let (m, value) = found.unwrap_or_else(|| (1, seq.first().map_or(f64::NAN, |l| l.exp())));
        Certificate::NormBound { weight: c.label.clone(), m, value }
    };
    let decay = |fit: &RateFit| Certificate::GeometricRate {
        rho: fit.rho,
        c: vec![fit.c],
        weight: Some(c.label.clone()),
        support_end: fit.support_end,
    };

    let mut centered_report = c.centered.clone();
    centered_report.eigenvalue_one_multiplicity = Some(a.eigen_one_multiplicity);
    SpectralParts {
        holds: [
            simple && centered_rate < RATE_THRESHOLD,
            centered_rate < RATE_THRESHOLD,
            zero_rate < RATE_THRESHOLD,
            centered_m.is_some(),
            zero_m.is_some(),
            fit_ok(&centered_fit, centered_seq),
            fit_ok(&zero_fit, zero_seq),
        ],
        certs: [
            Certificate::Spectral { weight: c.label.clone(), report: centered_report },
            spectral(&c.centered),
            spectral(&c.zero_mean),
            norm(centered_m, centered_seq),
            norm(zero_m, zero_seq),
            decay(&centered_fit),
            decay(&zero_fit),
        ],
        values: [centered_rate, centered_rate, zero_rate, centered_rate, zero_rate, centered_fit.rho, zero_fit.rho],
    }
}

/// Conditions xiii to xxvi.
pub(crate) fn spectral_family(a: &Analysis<'_>) -> Vec<Verdict> {
    let parts: Vec<SpectralParts> = a.candidates.iter().map(|c| spectral_parts(a, c)).collect();
    // (some-j id, all-j id) per family, matching the order in SpectralParts.
    const IDS: [(u8, u8); 7] = [(13, 14), (15, 16), (17, 18), (19, 20), (21, 22), (23, 24), (25, 26)];

    let pick = |family: usize, indices: &[usize]| -> usize {
        indices
            .iter()
            .copied()
            .filter(|&i| parts[i].holds[family])
            .min_by(|&x, &y| parts[x].values[family].total_cmp(&parts[y].values[family]))
            .unwrap_or_else(|| {
                indices
                    .iter()
                    .copied()
                    .min_by(|&x, &y| parts[x].values[family].total_cmp(&parts[y].values[family]))
                    .unwrap_or(0)
            })
    };

    let every: Vec<usize> = (0..a.candidates.len()).collect();
    let mut out = Vec::with_capacity(14);
    for (family, &(some_id, all_id)) in IDS.iter().enumerate() {
        let i = pick(family, &every);
        let cand = &a.candidates[i];
        let mut some = Verdict::new(id(some_id), parts[i].holds[family], Some(parts[i].certs[family].clone()))
            .with("rate", parts[i].values[family])
            .with(
                "radius_estimate",
                if family == 2 || family == 4 || family == 6 { cand.zero_mean.radius } else { cand.centered.radius },
            );
        for &j in &a.config.j_set {
            some = some.with(&format!("pi_v_moment_{j}"), cand.v.moment(a.pi, j));
        }
        if family == 0 {
            some = some.with("eigenvalue_one_multiplicity", a.eigen_one_multiplicity as f64);
        }

        let mut family_certs = BTreeMap::new();
        let mut all_ok = true;
        let mut worst = 0.0f64;
        for &j in &a.config.j_set {
            let idx: Vec<usize> = a.j_candidates.get(&j).cloned().unwrap_or_default();
            if idx.is_empty() {
                all_ok = false;
                continue;
            }
            let k = pick(family, &idx);
            all_ok &= parts[k].holds[family];
            worst = worst.max(parts[k].values[family]);
            family_certs.insert(j, parts[k].certs[family].clone());
        }
        let all = Verdict::new(id(all_id), all_ok, Some(Certificate::PerJ(family_certs))).with("rate", worst);
        out.push(some);
        out.push(all);
    }
    out.sort_by_key(|v| v.condition);
    out
}

/// Conditions xxvii to xxxiii for a reversible chain.
pub(crate) fn reversible_family(a: &Analysis<'_>) -> Result<Vec<Verdict>> {
    let rho = pi_perp_norm(a.chain, a.pi)?;
    let spectrum = reversible_spectrum(a.chain, a.pi)?;
    let l2_norm = l2_measure_norm_of_operator(&a.centered_kernel, a.pi)?;
    let radius = gelfand_radius(&a.centered_kernel, OperatorNorm::L2pi(a.pi), super::context::CERTIFICATE_GELFAND)?;
    let radius_rate = radius.min_iterate();
    let contracting = rho < RATE_THRESHOLD;

    let pi = a.pi.as_slice();
    let mut c_mu = Vec::with_capacity(a.measures.len());
    let mut bound_ok = true;
    let mut worst_ratio = 0.0f64;
    for (k, m) in a.measures.iter().enumerate() {
        let initial: f64 = m.mu.iter().zip(pi).map(|(x, w)| (x - w) * (x - w) / w).sum::<f64>().sqrt();
        let seq = &a.trace.measure_l2[k];
        let env = envelope(seq, rho);
        c_mu.push(env.c);
        for (n, l) in DecayTrace::points(seq) {
            if l == f64::NEG_INFINITY {
                continue;
            }
            let bound = ln0(initial) + n as f64 * ln0(rho);
            worst_ratio = worst_ratio.max((l - bound).exp());
            if l > bound + VERIFY_SLACK {
                bound_ok = false;
            }
        }
    }
    let geometric = |r: f64, c: Vec<f64>| Certificate::GeometricRate { rho: r, c, weight: None, support_end: None };

    let identity_gap = (l2_norm - rho).abs();
    let subdominant = spectrum.subdominant_modulus();
    Ok(vec![
        Verdict::new(id(27), contracting, Some(geometric(rho, c_mu.clone()))).with("rho", rho),
        Verdict::new(id(28), contracting && bound_ok, Some(geometric(rho, vec![1.0])))
            .with("rho", rho)
            .with("worst_bound_ratio", worst_ratio),
        Verdict::new(
            id(29),
            spectrum.top_multiplicity == 1 && subdominant < RATE_THRESHOLD,
            Some(Certificate::ReversibleSpectrum(spectrum.clone())),
        )
        .with("gap", spectrum.gap)
        .with("top_multiplicity", spectrum.top_multiplicity as f64),
        Verdict::new(
            id(30),
            radius_rate < RATE_THRESHOLD,
            Some(Certificate::Spectral { weight: "l2".into(), report: radius.clone() }),
        )
        .with("rate", radius_rate)
        .with("radius_estimate", radius.radius),
        Verdict::new(
            id(31),
            l2_norm < RATE_THRESHOLD,
            Some(Certificate::NormBound { weight: "l2".into(), m: 1, value: l2_norm }),
        )
        .with("norm", l2_norm),
        Verdict::new(
            id(32),
            contracting && identity_gap <= 1e-8,
            Some(Certificate::NormBound { weight: "pi_perp".into(), m: 1, value: rho }),
        )
        .with("norm", rho)
        .with("identity_residual", identity_gap),
        Verdict::new(id(33), subdominant < RATE_THRESHOLD, Some(Certificate::ReversibleSpectrum(spectrum)))
            .with("radius", subdominant),
    ])
}

/// Every condition, in numerical order, restricted to the configured selection.
pub fn evaluate_all(a: &Analysis<'_>) -> Result<Vec<Verdict>> {
    let mut out = Vec::with_capacity(33);
    out.extend(pointwise(a));
    out.extend(measure_starts(a));
    out.extend(return_and_drift(a));
    out.extend(v_uniform(a));
    out.extend(spectral_family(a));
    if a.reversible {
        out.extend(reversible_family(a)?);
    } else {
        out.extend((27..=33).map(|n| Verdict::not_applicable(id(n), "non_reversible")));
    }
    out.sort_by_key(|v| v.condition);
    out.retain(|v| a.config.conditions.contains(v.condition));
    Ok(out)
}

fn config_with_n_max(n_max: usize) -> RunConfig {
    RunConfig { n_max, ..RunConfig::default() }
}

/// Conditions i and ii.
pub fn cond_pointwise_tv(chain: &ChainSpec, pi: &StationaryDist, n_max: usize) -> Result<Vec<Verdict>> {
    let config = config_with_n_max(n_max);
    let a = Analysis::new(chain, pi, &config)?;
    Ok(pointwise(&a))
}

/// Geometric total-variation decay from one starting measure `mu` in
/// `L^p(pi)`, reported as condition iii.
pub fn cond_measure_tv(
    chain: &ChainSpec,
    pi: &StationaryDist,
    mu: &SignedMeasure,
    p: f64,
    n_max: usize,
) -> Result<Verdict> {
    if mu.len() != chain.len() {
        return Err(Error::DimensionMismatch("measure and chain differ in size".into()));
    }
    if mu.0.iter().any(|&m| m < 0.0) || (mu.total_mass() - 1.0).abs() > 1e-12 {
        return Err(Error::NotProbability { mass: mu.total_mass() });
    }
    let norm = lp_norm(mu, pi, p)?;
    if !norm.is_finite() {
        return Err(Error::MeasureNotInLp { p });
    }
    let config = config_with_n_max(n_max);
    config.validate()?;
    let trace = DecayTrace::compute(chain, pi, &[], std::slice::from_ref(&mu.0), n_max);
    let seq = &trace.measure_tv[0];
    let fit = super::fit_log_decay(&DecayTrace::points(seq), super::tail_window(n_max))?;
    let ok = fit.geometric() && fit.verify_ln(&DecayTrace::points(seq), VERIFY_SLACK);
    Ok(Verdict::new(id(3), ok, Some(rate_certificate(&[fit], None)))
        .with("rho", fit.rho)
        .with("p", p)
        .with("lp_norm", norm))
}

/// Conditions ix and xi for one weight function `V`.
pub fn cond_v_uniform(
    chain: &ChainSpec,
    pi: &StationaryDist,
    v: &WeightFunction,
    n_max: usize,
) -> Result<Vec<Verdict>> {
    let config = config_with_n_max(n_max);
    let a = Analysis::with_weights(chain, pi, &config, vec![("V".into(), v.clone())])?;
    let all = v_uniform(&a);
    Ok(all.into_iter().filter(|v| matches!(v.condition.number(), 9 | 11)).collect())
}

/// Conditions xiii to xxvi with `V` the only admissible weight function.
pub fn cond_spectral(
    chain: &ChainSpec,
    pi: &StationaryDist,
    v: &WeightFunction,
    j_set: &[u32],
) -> Result<Vec<Verdict>> {
    let config = RunConfig { j_set: j_set.to_vec(), ..RunConfig::default() };
    let a = Analysis::with_weights(chain, pi, &config, vec![("V".into(), v.clone())])?;
    Ok(spectral_family(&a))
}

/// Conditions xxvii to xxxiii; errors with `NotReversible` on
/// non-reversible chains.
pub fn cond_reversible(chain: &ChainSpec, pi: &StationaryDist, n_max: usize) -> Result<Vec<Verdict>> {
    let config = config_with_n_max(n_max);
    let a = Analysis::new(chain, pi, &config)?;
    reversible_family(&a)
}
