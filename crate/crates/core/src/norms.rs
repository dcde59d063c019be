//! Norms of measures, functions and kernels on a finite state space.
//!
//! Measures are row vectors (mass per state) and act on kernels from the
//! left; functions are column vectors and are acted on from the right.
//! A norm that is infinite by definition is returned as `f64::INFINITY`.

use serde::Serialize;

use crate::chain::{Matrix, StationaryDist};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

const PROBABILITY_TOL: f64 = 1e-12;

/// A signed measure on the state space, one mass per state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedMeasure(pub Vec<f64>);

impl SignedMeasure {
    pub fn point_mass(n: usize, x: usize) -> Self {
        let mut mu = vec![0.0; n];
        mu[x] = 1.0;
        Self(mu)
    }

    pub fn total_mass(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Jordan decomposition `mu = mu+ - mu-`.
    pub fn jordan(&self) -> (Vec<f64>, Vec<f64>) {
        let pos = self.0.iter().map(|&m| m.max(0.0)).collect();
        let neg = self.0.iter().map(|&m| (-m).max(0.0)).collect();
        (pos, neg)
    }

    /// `d mu / d pi`, undefined (None) where `pi` vanishes but `mu` does not.
    pub fn density(&self, pi: &StationaryDist) -> Option<Vec<f64>> {
        self.0
            .iter()
            .zip(pi.as_slice())
            .map(|(&m, &p)| {
                if p > 0.0 {
                    Some(m / p)
                } else if m == 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            })
            .collect()
    }

    /// `mu(f)`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.0.iter().zip(f).map(|(m, v)| m * v).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_probability(&self) -> Result<()> {
        let mass = self.total_mass();
        if (mass - 1.0).abs() > PROBABILITY_TOL || self.0.iter().any(|&m| m < -PROBABILITY_TOL) {
            return Err(Error::NotProbability { mass });
        }
        Ok(())
    }
}

/// A weight function `V : X -> [1, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightFunction(Vec<f64>);

impl WeightFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (state, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 1.0 {
                return Err(Error::VBelowOne { state, value });
            }
        }
        Ok(Self(values))
    }

    /// `V = 1` everywhere.
    pub fn constant(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `V^t` pointwise; stays `>= 1` for `t > 0`.
    pub fn powf(&self, t: f64) -> Self {
        Self(self.0.iter().map(|v| v.powf(t)).collect())
    }

    /// `pi(V^j)`.
    pub fn moment(&self, pi: &StationaryDist, j: u32) -> f64 {
        pi.expect(&self.0.iter().map(|v| v.powi(j as i32)).collect::<Vec<_>>())
    }
}

/// `||mu1 - mu2||_TV = 1/2 sum_x |mu1[x] - mu2[x]|` for probability vectors.
pub fn tv_distance(mu1: &SignedMeasure, mu2: &SignedMeasure) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(Error::DimensionMismatch("measures on different spaces".into()));
    }
    mu1.check_probability()?;
    mu2.check_probability()?;
    Ok(0.5 * mu1.0.iter().zip(&mu2.0).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `||mu||_{L^p(pi)}` following the three-case definition: total variation
/// mass for `p = 1`, the density norm when `mu << pi`, infinity otherwise.
pub fn lp_norm(mu: &SignedMeasure, pi: &StationaryDist, p: f64) -> Result<f64> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::BadParameters(format!("L^p norm needs finite p >= 1, got {p}")));
    }
    if mu.len() != pi.len() {
        return Err(Error::DimensionMismatch("measure and pi on different spaces".into()));
    }
    let Some(density) = mu.density(pi) else {
        if p == 1.0 {
            return Ok(mu.0.iter().map(|m| m.abs()).sum());
        }
        return Ok(f64::INFINITY);
    };
    if p == 1.0 {
        return Ok(mu.0.iter().map(|m| m.abs()).sum());
    }
    let integral: f64 = density.iter().zip(pi.as_slice()).map(|(g, w)| g.abs().powf(p) * w).sum();
    Ok(integral.powf(1.0 / p))
}

/// `|f|_V = max_x |f(x)| / V(x)`.
pub fn v_norm_fn(f: &[f64], v: &WeightFunction) -> f64 {
    f.iter().zip(v.values()).map(|(a, w)| a.abs() / w).fold(0.0, f64::max)
}

/// `sum_y |k[y]| V[y] / V[x]` for one row.
pub(crate) fn weighted_row_sum(k: &Matrix, x: usize, v: &WeightFunction) -> f64 {
    let vals = v.values();
    (0..k.ncols()).map(|y| k[(x, y)].abs() * vals[y]).sum::<f64>() / vals[x]
}

/// `||K||_{L^inf_V} = max_x V(x)^-1 sum_y |K[x][y]| V(y)`; the supremum over
/// `|f|_V <= 1` is attained at `f = +-V`.
pub fn op_norm_linf_v(k: &Matrix, v: &WeightFunction) -> f64 {
    assert_eq!(k.ncols(), v.len());
    (0..k.nrows()).map(|x| weighted_row_sum(k, x, v)).fold(0.0, f64::max)
}

/// `min_c sum_y |row[y] - c pi[y]| V[y]` by locating the weighted median of
/// the breakpoints `row[y] / pi[y]` with weights `pi[y] V[y]`.
pub(crate) fn zero_mean_row_norm(row: &[f64], pi: &[f64], v: &[f64]) -> f64 {
    let mut constant = 0.0;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(row.len());
    for y in 0..row.len() {
        if pi[y] > 0.0 {
            points.push((row[y] / pi[y], pi[y] * v[y]));
        } else {
            constant += row[y].abs() * v[y];
        }
    }
    if points.is_empty() {
        return constant;
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = points.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    let mut median = points[points.len() - 1].0;
    for &(t, w) in &points {
        acc += w;
        if acc >= 0.5 * total {
            median = t;
            break;
        }
    }
    constant + points.iter().map(|&(t, w)| w * (t - median).abs()).sum::<f64>()
}

/// `||K||_{L^inf_{V,0}}`: the operator norm of `K` on functions with
/// `pi(f) = 0`, evaluated through its LP dual
/// `max_x V(x)^-1 min_c sum_y |K[x][y] - c pi[y]| V[y]`.
pub fn op_norm_linf_v0(k: &Matrix, v: &WeightFunction, pi: &StationaryDist) -> f64 {
    assert_eq!(k.ncols(), v.len());
    assert_eq!(k.ncols(), pi.len());
    let mut row = vec![0.0; k.ncols()];
    let mut best = 0.0f64;
    for x in 0..k.nrows() {
        for (y, r) in row.iter_mut().enumerate() {
            *r = k[(x, y)];
        }
        best = best.max(zero_mean_row_norm(&row, pi.as_slice(), v.values()) / v.values()[x]);
    }
    best
}

/// Matrix of `mu -> mu K` in orthonormal coordinates of `L^2(pi)`:
/// `B = D^{-1/2} K^T D^{1/2}` with `D = diag(pi)`.
pub(crate) fn l2_coordinates(k: &Matrix, pi: &[f64]) -> Matrix {
    let n = k.nrows();
    Matrix::from_fn(n, n, |y, x| k[(x, y)] * (pi[x] / pi[y]).sqrt())
}

/// `||K||_{L^2(pi)} = sup_{||mu|| = 1} ||mu K||`, the largest singular value
/// of `D^{-1/2} K^T D^{1/2}`, via a Jacobi eigensolve of the Gram matrix.
pub fn l2_measure_norm_of_operator(k: &Matrix, pi: &StationaryDist) -> Result<f64> {
    if let Some(state) = pi.as_slice().iter().position(|&p| p <= 0.0) {
        return Err(Error::ZeroStationaryMass { state });
    }
    if k.nrows() != pi.len() || k.ncols() != pi.len() {
        return Err(Error::DimensionMismatch("operator and pi on different spaces".into()));
    }
    let b = l2_coordinates(k, pi.as_slice());
    let gram = b.transpose() * &b;
    let top = symmetric_eigen(&gram, 1e-15).values.first().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}
