//! Finite Markov chains: validation, stationary distribution, and structure.
//!
//! A [`ChainSpec`] owns a row-stochastic matrix `P` over an ordered set of
//! labelled states. Irreducibility is strong connectivity of the support
//! digraph `x -> y iff P[x][y] > 0`; the period is computed with the BFS
//! level method on the communicating class of state 0.

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};

/// Dense real matrix, used for kernels and operators alike.
pub type Matrix = DMatrix<f64>;

/// Default tolerance on `|sum_y P[x][y] - 1|` for input rows.
pub const DEFAULT_ROW_TOL: f64 = 1e-9;

/// Detailed-balance tolerance, relative to the largest flow `pi[x] P[x][y]`.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    states: Vec<String>,
    p: Matrix,
    row_tol: f64,
}

impl ChainSpec {
    /// Validates `p` and renormalizes every row to sum to one.
    pub fn new(p: Matrix, states: Vec<String>, row_tol: f64) -> Result<Self> {
        let n = p.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("chain must have at least one state".into()));
        }
        if p.ncols() != n {
            return Err(Error::DimensionMismatch(format!("transition matrix is {}x{}, expected square", n, p.ncols())));
        }
        if states.len() != n {
            return Err(Error::DimensionMismatch(format!("{} labels for {} states", states.len(), n)));
        }
        if row_tol.is_nan() || row_tol < 0.0 {
            return Err(Error::BadParameters(format!("row tolerance {row_tol} must be nonnegative")));
        }
        let mut seen = HashSet::with_capacity(n);
        for label in &states {
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }

        let mut p = p;
        for row in 0..n {
            let mut sum = 0.0;
            for col in 0..n {
                let value = p[(row, col)];
                if !value.is_finite() {
                    return Err(Error::NonFiniteEntry { row, col });
                }
                if value < 0.0 {
                    return Err(Error::NegativeEntry { row, col, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > row_tol {
                return Err(Error::RowSumOutOfTolerance { row, sum, tol: row_tol });
            }
            if sum != 1.0 {
                for col in 0..n {
                    p[(row, col)] /= sum;
                }
            }
        }
        Ok(Self { states, p, row_tol })
    }

    /// Builds a chain whose states are labelled `0..N`.
    pub fn from_rows(rows: &[Vec<f64>], row_tol: f64) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| i.to_string()).collect();
        validate_chain(rows, labels, row_tol)
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn row_tol(&self) -> f64 {
        self.row_tol
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.p[(x, y)]
    }

    /// `(Pf)(x) = sum_y P[x][y] f[y]`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.len());
        (0..self.len()).map(|x| (0..self.len()).map(|y| self.p[(x, y)] * f[y]).sum()).collect()
    }

    /// `(mu P)(y) = sum_x mu[x] P[x][y]`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        assert_eq!(mu.len(), self.len());
        (0..self.len()).map(|y| (0..self.len()).map(|x| mu[x] * self.p[(x, y)]).sum()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|x| self.p.row(x).iter().copied().collect()).collect()
    }
}

/// Checks a raw nonnegative matrix and wraps it as a [`ChainSpec`].
pub fn validate_chain(raw: &[Vec<f64>], labels: Vec<String>, row_tol: f64) -> Result<ChainSpec> {
    let n = raw.len();
    for (i, row) in raw.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch(format!("row {i} has {} entries, expected {n}", row.len())));
        }
    }
    let p = Matrix::from_fn(n, n, |i, j| raw[i][j]);
    ChainSpec::new(p, labels, row_tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDist {
    pi: Vec<f64>,
}

impl StationaryDist {
    /// Accepts a user-supplied `pi` after checking it is stationary for `chain`.
    pub fn checked(pi: Vec<f64>, chain: &ChainSpec, tol: f64) -> Result<Self> {
        if pi.len() != chain.len() {
            return Err(Error::DimensionMismatch(format!("pi has {} entries for {} states", pi.len(), chain.len())));
        }
        if pi.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::BadStationary("entries must be finite and nonnegative".into()));
        }
        let mass: f64 = pi.iter().sum();
        if (mass - 1.0).abs() > tol {
            return Err(Error::NotProbability { mass });
        }
        let dist = Self { pi };
        let residual = dist.residual(chain);
        if residual > tol {
            return Err(Error::BadStationary(format!("||pi P - pi|| = {residual:e}")));
        }
        Ok(dist)
    }

    #[cfg(test)]
    pub(crate) fn from_vec_unchecked(pi: Vec<f64>) -> Self {
        Self { pi }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `||pi P - pi||_inf`.
    pub fn residual(&self, chain: &ChainSpec) -> f64 {
        chain.push_forward(&self.pi).iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// The rank-one kernel `Pi = 1 (x) pi`.
    pub fn projector(&self) -> Matrix {
        let n = self.pi.len();
        Matrix::from_fn(n, n, |_, y| self.pi[y])
    }

    /// `pi(f)`.
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.pi.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.pi[x]).sum()
    }

    /// `pi_S(A) = pi(S & A) / pi(S)`.
    pub fn restricted(&self, set: &[usize]) -> Result<Vec<f64>> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let mass = self.mass(set);
        if mass <= 0.0 {
            return Err(Error::NotProbability { mass });
        }
        let mut out = vec![0.0; self.pi.len()];
        for &x in set {
            out[x] = self.pi[x] / mass;
        }
        Ok(out)
    }

    pub fn min_mass(&self) -> f64 {
        self.pi.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Solves `(P^T - I) pi = 0` with the last equation replaced by `sum pi = 1`.
pub fn stationary(chain: &ChainSpec) -> Result<StationaryDist> {
    if !is_irreducible(chain) {
        return Err(Error::NotIrreducible);
    }
    let n = chain.len();
    let p = chain.matrix();
    let mut a = p.transpose() - Matrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;

    let lu = a.clone().lu();
    let mut pi = lu.solve(&rhs).ok_or_else(|| Error::Singular("stationary system is singular".into()))?;
    // One step of iterative refinement.
    let r = &rhs - &a * &pi;
    if let Some(delta) = lu.solve(&r) {
        pi += delta;
    }

    let mut pi: Vec<f64> = pi.iter().map(|&v| v.max(0.0)).collect();
    let mass: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= mass;
    }
    Ok(StationaryDist { pi })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    pub irreducible: bool,
    pub period: u32,
    pub aperiodic: bool,
    pub reversible: bool,
    pub num_recurrent_classes: usize,
    /// `max |pi[x] P[x][y] - pi[y] P[y][x]|`, when a unique `pi` exists.
    pub detailed_balance_residual: Option<f64>,
}

fn support_graph(chain: &ChainSpec) -> DiGraph<(), ()> {
    let n = chain.len();
    let mut g = DiGraph::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for x in 0..n {
        for y in 0..n {
            if chain.prob(x, y) > 0.0 {
                g.add_edge(nodes[x], nodes[y], ());
            }
        }
    }
    g
}

fn reachable(chain: &ChainSpec, start: usize, forward: bool) -> Vec<bool> {
    let n = chain.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            let w = if forward { chain.prob(u, v) } else { chain.prob(v, u) };
            if w > 0.0 && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

pub fn is_irreducible(chain: &ChainSpec) -> bool {
    reachable(chain, 0, true).into_iter().all(|b| b) && reachable(chain, 0, false).into_iter().all(|b| b)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of the communicating class of state 0. A class without any
/// internal edge (a transient singleton) is reported with period 1.
fn period_of_state_zero(chain: &ChainSpec) -> u32 {
    let n = chain.len();
    let fwd = reachable(chain, 0, true);
    let bwd = reachable(chain, 0, false);
    let in_class: Vec<bool> = (0..n).map(|x| fwd[x] && bwd[x]).collect();

    let mut level = vec![u64::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if in_class[v] && chain.prob(u, v) > 0.0 && level[v] == u64::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }

    let mut d = 0u64;
    for u in (0..n).filter(|&u| in_class[u]) {
        for v in (0..n).filter(|&v| in_class[v]) {
            if chain.prob(u, v) > 0.0 {
                let diff = (level[u] + 1).abs_diff(level[v]);
                d = gcd(d, diff);
            }
        }
    }
    if d == 0 {
        1
    } else {
        d as u32
    }
}

/// `max_{x,y} |pi[x] P[x][y] - pi[y] P[y][x]|` together with the largest flow.
pub fn detailed_balance_residual(chain: &ChainSpec, pi: &StationaryDist) -> (f64, f64) {
    let n = chain.len();
    let pi = pi.as_slice();
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for x in 0..n {
        for y in 0..n {
            let flow = pi[x] * chain.prob(x, y);
            scale = scale.max(flow);
            if y > x {
                residual = residual.max((flow - pi[y] * chain.prob(y, x)).abs());
            }
        }
    }
    (residual, scale)
}

pub fn is_reversible(chain: &ChainSpec, pi: &StationaryDist) -> bool {
    let (residual, scale) = detailed_balance_residual(chain, pi);
    residual <= REVERSIBILITY_TOL * scale.max(f64::MIN_POSITIVE)
}

pub fn structure(chain: &ChainSpec) -> StructureReport {
    let graph = support_graph(chain);
    let sccs = tarjan_scc(&graph);
    let irreducible = sccs.len() == 1;

    let mut component = vec![0usize; chain.len()];
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[node.index()] = c;
        }
    }
    let num_recurrent_classes = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|u| (0..chain.len()).all(|v| chain.prob(u.index(), v) == 0.0 || component[v] == *c))
        })
        .count();

    let period = period_of_state_zero(chain);
    let (reversible, detailed_balance_residual) = if irreducible {
        match stationary(chain) {
            Ok(pi) => {
                let (residual, _) = detailed_balance_residual(chain, &pi);
                (is_reversible(chain, &pi), Some(residual))
            }
            Err(_) => (false, None),
        }
    } else {
        (false, None)
    };

    StructureReport {
        irreducible,
        period,
        aperiodic: period == 1,
        reversible,
        num_recurrent_classes,
        detailed_balance_residual,
    }
}

/// `M^n` by repeated squaring; `M^0 = I`.
pub fn matrix_power(m: &Matrix, n: u64) -> Matrix {
    let mut result = Matrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// The `n`-step kernel `P^n`.
pub fn kernel_power(chain: &ChainSpec, n: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::BadParameters("kernel power needs n >= 1".into()));
    }
    Ok(matrix_power(chain.matrix(), n))
}
