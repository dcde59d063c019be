//! Small sets, return-time generating functions and drift conditions.
//!
//! On a finite irreducible chain a set `S` is certified small when some
//! `m`-step minorization `P^m(x, .) >= nu` for all `x in S` holds with a
//! measure `nu` that charges every state. Such an `m` exists exactly when
//! the chain is aperiodic, and then never exceeds the Wielandt bound
//! `(N-1)^2 + 1`.
//!
//! Return times are handled through the taboo kernel `Q = P|_{S^c}`: the
//! hitting-time generating function `h(y) = E_y[kappa^{sigma_S}]` solves
//! `(I - kappa Q) h = kappa P(., S)` whenever `kappa r(Q) < 1`.

use std::collections::BTreeMap;

use nalgebra::{DVector, Schur};
use serde::Serialize;

use crate::chain::{is_irreducible, kernel_power, ChainSpec, Matrix, StationaryDist};
use crate::error::{Error, Result};
use crate::norms::WeightFunction;
use crate::spectral::{gelfand_radius, GelfandOptions, OperatorNorm};

/// Slack allowed when re-checking `PV <= lambda V + b 1_S`.
pub const DRIFT_SLACK: f64 = 1e-10;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallSetCert {
    pub states: Vec<usize>,
    pub m: u64,
    /// `nu[y] = min_{x in S} P^m[x][y]`.
    pub nu: Vec<f64>,
    pub volume: f64,
}

impl SmallSetCert {
    pub fn is_small(&self) -> bool {
        self.volume > 0.0
    }

    /// Whether the minorizing measure charges every state.
    pub fn full_support(&self) -> bool {
        self.nu.iter().all(|&v| v > 0.0)
    }
}

fn check_set(chain: &ChainSpec, set: &[usize]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(&x) = set.iter().find(|&&x| x >= chain.len()) {
        return Err(Error::StateOutOfRange(x));
    }
    Ok(())
}

fn membership(n: usize, set: &[usize]) -> Vec<bool> {
    let mut inside = vec![false; n];
    for &x in set {
        inside[x] = true;
    }
    inside
}

/// The set `S` with duplicates removed, in increasing order.
fn normalized(set: &[usize]) -> Vec<usize> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// Entrywise minimum of the `m`-step rows indexed by `set`.
pub fn minorization(chain: &ChainSpec, set: &[usize], m: u64) -> Result<SmallSetCert> {
    check_set(chain, set)?;
    let pm = kernel_power(chain, m)?;
    let states = normalized(set);
    let nu: Vec<f64> =
        (0..chain.len()).map(|y| states.iter().map(|&x| pm[(x, y)]).fold(f64::INFINITY, f64::min)).collect();
    let volume = nu.iter().sum();
    Ok(SmallSetCert { states, m, nu, volume })
}

/// Smallest `m <= (N-1)^2 + 1` whose minorization over `set` has full
/// support, searched on the support pattern of `P`.
pub fn find_small_set_order(chain: &ChainSpec, set: &[usize]) -> Result<Option<SmallSetCert>> {
    check_set(chain, set)?;
    let n = chain.len();
    let states = normalized(set);
    let bound = ((n - 1) * (n - 1) + 1) as u64;
    let mut reach: Vec<Vec<bool>> = states.iter().map(|&x| (0..n).map(|y| chain.prob(x, y) > 0.0).collect()).collect();
    for m in 1..=bound {
        let covered = (0..n).all(|y| reach.iter().all(|r| r[y]));
        if covered {
            return minorization(chain, &states, m).map(Some);
        }
        reach =
            reach.iter().map(|r| (0..n).map(|y| (0..n).any(|z| r[z] && chain.prob(z, y) > 0.0)).collect()).collect();
    }
    Ok(None)
}

/// The singleton holding the most stationary mass (lowest index on ties).
pub fn default_small_set(pi: &StationaryDist) -> Vec<usize> {
    let mut best = 0;
    for (x, &p) in pi.as_slice().iter().enumerate() {
        if p > pi.as_slice()[best] {
            best = x;
        }
    }
    vec![best]
}

fn taboo_kernel(chain: &ChainSpec, outside: &[usize]) -> Matrix {
    Matrix::from_fn(outside.len(), outside.len(), |i, j| chain.prob(outside[i], outside[j]))
}

fn complement(n: usize, set: &[usize]) -> Vec<usize> {
    let inside = membership(n, set);
    (0..n).filter(|&x| !inside[x]).collect()
}

/// Perron root of a nonnegative matrix: the largest eigenvalue modulus from
/// a real Schur decomposition, with a Gelfand fallback when the QR sweep
/// does not converge.
pub(crate) fn nonnegative_radius(q: &Matrix) -> f64 {
    let n = q.nrows();
    if n == 0 || is_nilpotent(q) {
        return 0.0;
    }
    if let Some(schur) = Schur::try_new(q.clone(), SCHUR_EPS, SCHUR_MAX_ITER) {
        let radius = schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if radius.is_finite() {
            return radius;
        }
    }
    let one = WeightFunction::constant(n);
    gelfand_radius(q, OperatorNorm::LinfV(&one), GelfandOptions::default()).map(|r| r.radius).unwrap_or(f64::NAN)
}

/// Whether the support graph of `q` is acyclic, i.e. `q^n = 0`.
fn is_nilpotent(q: &Matrix) -> bool {
    let n = q.nrows();
    let mut reach: Vec<bool> = q.iter().map(|&x| x > 0.0).collect();
    for _ in 0..n {
        if !reach.iter().any(|&b| b) {
            return true;
        }
        let mut next = vec![false; n * n];
        for x in 0..n {
            for z in 0..n {
                if reach[x + z * n] {
                    for y in 0..n {
                        if q[(z, y)] > 0.0 {
                            next[x + y * n] = true;
                        }
                    }
                }
            }
        }
        reach = next;
    }
    !reach.iter().any(|&b| b)
}

/// Spectral radius of the taboo kernel on `S^c` (zero when `S` is everything).
pub fn taboo_radius(chain: &ChainSpec, set: &[usize]) -> Result<f64> {
    check_set(chain, set)?;
    let outside = complement(chain.len(), set);
    Ok(nonnegative_radius(&taboo_kernel(chain, &outside)))
}

/// `1 / r(Q)`, infinite when the taboo kernel is nilpotent.
pub fn kappa_star(chain: &ChainSpec, set: &[usize]) -> Result<f64> {
    let r = taboo_radius(chain, set)?;
    Ok(if r > 0.0 { 1.0 / r } else { f64::INFINITY })
}

/// `sqrt(kappa*)` when finite, otherwise 2.
pub fn default_kappa(kappa_star: f64) -> f64 {
    if kappa_star.is_finite() {
        kappa_star.sqrt()
    } else {
        2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnTimeCert {
    pub states: Vec<usize>,
    #[serde(serialize_with = "crate::num::extended")]
    pub kappa_star: f64,
    pub kappa: f64,
    /// `E_x[kappa^{tau_S}]` for `x` in `S`, `E_x[kappa^{sigma_S}]` elsewhere.
    pub mgf: Vec<f64>,
    pub taboo_radius: f64,
}

impl ReturnTimeCert {
    /// `sup_{x in S} E_x[kappa^{tau_S}]`.
    pub fn sup_return_mgf(&self) -> f64 {
        self.states.iter().map(|&x| self.mgf[x]).fold(0.0, f64::max)
    }

    /// The hitting-time generating function `E_x[kappa^{sigma_S}]` (1 on `S`).
    pub fn hitting_mgf(&self) -> Vec<f64> {
        let inside = membership(self.mgf.len(), &self.states);
        self.mgf.iter().enumerate().map(|(x, &m)| if inside[x] { 1.0 } else { m }).collect()
    }
}

pub fn return_time_mgf(chain: &ChainSpec, set: &[usize], kappa: f64) -> Result<ReturnTimeCert> {
    check_set(chain, set)?;
    if !is_irreducible(chain) {
        return Err(Error::NotIrreducible);
    }
    if !kappa.is_finite() || kappa <= 1.0 {
        return Err(Error::BadParameters(format!("kappa must be a finite value above 1, got {kappa}")));
    }
    let n = chain.len();
    let states = normalized(set);
    let inside = membership(n, &states);
    let outside = complement(n, &states);
    let q = taboo_kernel(chain, &outside);
    let taboo_radius = nonnegative_radius(&q);
    let kappa_star = if taboo_radius > 0.0 { 1.0 / taboo_radius } else { f64::INFINITY };
    if kappa >= kappa_star {
        return Err(Error::KappaBeyondRadius { kappa, kappa_star });
    }

    let into_set = |x: usize| -> f64 { states.iter().map(|&s| chain.prob(x, s)).sum() };
    let h = if outside.is_empty() {
        DVector::zeros(0)
    } else {
        let m = outside.len();
        let a = Matrix::identity(m, m) - &q * kappa;
        let rhs = DVector::from_iterator(m, outside.iter().map(|&y| kappa * into_set(y)));
        a.lu().solve(&rhs).ok_or_else(|| Error::Singular("taboo system I - kappa Q is singular".into()))?
    };

    let mut mgf = vec![0.0; n];
    for (i, &y) in outside.iter().enumerate() {
        mgf[y] = h[i];
    }
    for &x in &states {
        let onward: f64 = outside.iter().enumerate().map(|(i, &y)| chain.prob(x, y) * h[i]).sum();
        mgf[x] = kappa * (into_set(x) + onward);
    }
    debug_assert!(inside.iter().filter(|b| **b).count() == states.len());

    Ok(ReturnTimeCert { states, kappa_star, kappa, mgf, taboo_radius })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCert {
    pub v: WeightFunction,
    pub states: Vec<usize>,
    pub lambda: f64,
    pub b: f64,
    /// `j -> pi(V^j)`.
    pub pi_v_moments: BTreeMap<u32, f64>,
    /// Order `m` of the full-support minorization certifying `S` small.
    pub small_set_order: u64,
}

impl DriftCert {
    /// `max_x (PV(x) - lambda V(x) - b 1_S(x))`; nonpositive for a valid certificate.
    pub fn worst_slack(&self, chain: &ChainSpec) -> f64 {
        let pv = chain.apply(self.v.values());
        let inside = membership(chain.len(), &self.states);
        (0..chain.len())
            .map(|x| {
                let bound = self.lambda * self.v.values()[x] + if inside[x] { self.b } else { 0.0 };
                pv[x] - bound
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `b / (1 - lambda)`, an upper bound on `pi(V)`.
    pub fn stationary_bound(&self) -> f64 {
        self.b / (1.0 - self.lambda)
    }
}

fn moments(v: &WeightFunction, pi: &StationaryDist, j_set: &[u32]) -> BTreeMap<u32, f64> {
    j_set.iter().map(|&j| (j, v.moment(pi, j))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DriftOutcome {
    Certified(DriftCert),
    /// `PV(x) / V(x) >= 1` somewhere off `S`.
    Refuted {
        lambda: f64,
        state: usize,
    },
}

/// Checks `PV <= lambda V + b 1_S` with the tightest `lambda` off `S`.
///
/// When `S` is the whole space `lambda` is unconstrained and set to 1/2.
pub fn verify_drift(
    chain: &ChainSpec,
    pi: &StationaryDist,
    v: &WeightFunction,
    set: &[usize],
    j_set: &[u32],
) -> Result<DriftOutcome> {
    let n = chain.len();
    if v.len() != n {
        return Err(Error::DimensionMismatch("weight function and chain differ in size".into()));
    }
    if let Some(&x) = set.iter().find(|&&x| x >= n) {
        return Err(Error::StateOutOfRange(x));
    }
    let states = normalized(set);
    let inside = membership(n, &states);
    let pv = chain.apply(v.values());
    let vals = v.values();

    let mut lambda = f64::NEG_INFINITY;
    let mut worst = 0;
    for x in (0..n).filter(|&x| !inside[x]) {
        let ratio = pv[x] / vals[x];
        if ratio > lambda {
            lambda = ratio;
            worst = x;
        }
    }
    if lambda == f64::NEG_INFINITY {
        lambda = 0.5;
    }
    if lambda >= 1.0 {
        return Ok(DriftOutcome::Refuted { lambda, state: worst });
    }
    let small = find_small_set_order(chain, &states)?.ok_or(Error::SNotSmall)?;
    let b = states.iter().map(|&x| pv[x] - lambda * vals[x]).fold(0.0, f64::max);

    Ok(DriftOutcome::Certified(DriftCert {
        v: v.clone(),
        states,
        lambda,
        b,
        pi_v_moments: moments(v, pi, j_set),
        small_set_order: small.m,
    }))
}

/// Builds `V(x) = E_x[kappa^{sigma_S}]`, which satisfies `PV = V / kappa`
/// off `S` exactly.
pub fn synthesize_drift(
    chain: &ChainSpec,
    pi: &StationaryDist,
    set: &[usize],
    kappa: f64,
    j_set: &[u32],
) -> Result<DriftCert> {
    let rt = return_time_mgf(chain, set, kappa)?;
    let small = find_small_set_order(chain, &rt.states)?.ok_or(Error::SNotSmall)?;
    let v = WeightFunction::new(rt.hitting_mgf())?;
    let lambda = 1.0 / kappa;
    let pv = chain.apply(v.values());
    let b = rt.states.iter().map(|&x| pv[x] - lambda * v.values()[x]).fold(0.0, f64::max);
    Ok(DriftCert { pi_v_moments: moments(&v, pi, j_set), v, states: rt.states, lambda, b, small_set_order: small.m })
}

/// `(V^{1/j}, lambda^{1/j}, b^{1/j})`, valid by Jensen's inequality and
/// subadditivity of `t -> t^{1/j}`.
pub fn drift_power(cert: &DriftCert, j: u32, pi: &StationaryDist) -> Result<DriftCert> {
    if j == 0 {
        return Err(Error::BadParameters("drift power needs j >= 1".into()));
    }
    if j == 1 {
        return Ok(cert.clone());
    }
    let t = 1.0 / j as f64;
    let v = cert.v.powf(t);
    let keys: Vec<u32> = cert.pi_v_moments.keys().copied().collect();
    Ok(DriftCert {
        pi_v_moments: moments(&v, pi, &keys),
        v,
        states: cert.states.clone(),
        lambda: cert.lambda.powf(t),
        b: cert.b.powf(t),
        small_set_order: cert.small_set_order,
    })
}
