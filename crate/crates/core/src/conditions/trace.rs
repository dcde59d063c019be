//! Log-scale decay sequences of `P^n - Pi` for `n = 1..n_max`.
//!
//! The powers are formed as `(P - Pi)^n`, which equals `P^n - Pi` for
//! `n >= 1` but never subtracts two nearly equal quantities, so every
//! tabulated distance keeps full relative precision however small it gets.
//! Each power is stored as `exp(ln_scale) * M` with `max |M| = 1`.

use crate::chain::{ChainSpec, Matrix, StationaryDist};
use crate::linalg::{ln0, rescale};
use crate::norms::{op_norm_linf_v0, WeightFunction};

/// Entries of `P - Pi` below this magnitude are treated as exact zeros.
pub const SNAP_TOL: f64 = 1e-15;

/// Relative size below which `mu (P - Pi)^n` entries count as exact
/// cancellation.
pub const CANCELLATION_TOL: f64 = 64.0 * f64::EPSILON;

/// `P - Pi` with rounding-level entries set to zero.
pub fn centered_kernel(chain: &ChainSpec, pi: &StationaryDist) -> Matrix {
    let mut d = chain.matrix() - pi.projector();
    d.apply(|x| {
        if x.abs() < SNAP_TOL {
            *x = 0.0;
        }
    });
    d
}

/// Every decay quantity the condition evaluators need, as `ln` values
/// indexed by `n - 1`.
#[derive(Debug, Clone)]
pub struct DecayTrace {
    pub n_max: usize,
    /// `[x][n-1]`: `ln ||P^n(x, .) - pi||_TV`.
    pub tv: Vec<Vec<f64>>,
    /// `[c][x][n-1]`: `ln (V_c(x)^-1 sum_y |P^n(x,y) - pi(y)| V_c(y))`.
    pub v_rows: Vec<Vec<Vec<f64>>>,
    /// `[c][n-1]`: `ln ||P^n - Pi||_{L^inf_{V_c}}`.
    pub v_norm: Vec<Vec<f64>>,
    /// `[c][n-1]`: `ln ||P^n||_{L^inf_{V_c,0}}`.
    pub v0_norm: Vec<Vec<f64>>,
    /// `[k][n-1]`: `ln ||mu_k P^n - pi||_TV`.
    pub measure_tv: Vec<Vec<f64>>,
    /// `[c][k][n-1]`: `ln sum_y |mu_k P^n - pi|(y) V_c(y)`.
    pub measure_v: Vec<Vec<Vec<f64>>>,
    /// `[k][n-1]`: `ln ||mu_k P^n - pi||_{L^2(pi)}`.
    pub measure_l2: Vec<Vec<f64>>,
}

impl DecayTrace {
    pub fn compute(
        chain: &ChainSpec,
        pi: &StationaryDist,
        weights: &[WeightFunction],
        measures: &[Vec<f64>],
        n_max: usize,
    ) -> Self {
        let n = chain.len();
        let c = weights.len();
        let k = measures.len();
        let mut trace = Self {
            n_max,
            tv: vec![Vec::with_capacity(n_max); n],
            v_rows: vec![vec![Vec::with_capacity(n_max); n]; c],
            v_norm: vec![Vec::with_capacity(n_max); c],
            v0_norm: vec![Vec::with_capacity(n_max); c],
            measure_tv: vec![Vec::with_capacity(n_max); k],
            measure_v: vec![vec![Vec::with_capacity(n_max); k]; c],
            measure_l2: vec![Vec::with_capacity(n_max); k],
        };
        let d = centered_kernel(chain, pi);
        let mut m = d.clone();
        let mut ln_scale = rescale(&mut m);
        let mut pushed = vec![0.0; n];
        for _ in 1..=n_max {
            trace.record(&m, ln_scale, pi, weights, measures, &mut pushed);
            if ln_scale > f64::NEG_INFINITY {
                m = &m * &d;
                ln_scale += rescale(&mut m);
            }
        }
        trace
    }

    fn record(
        &mut self,
        m: &Matrix,
        ln_scale: f64,
        pi: &StationaryDist,
        weights: &[WeightFunction],
        measures: &[Vec<f64>],
        pushed: &mut [f64],
    ) {
        let n = m.nrows();
        let lift = |x: f64| if ln_scale == f64::NEG_INFINITY { f64::NEG_INFINITY } else { ln_scale + ln0(x) };
        for x in 0..n {
            let l1: f64 = m.row(x).iter().map(|a| a.abs()).sum();
            self.tv[x].push(lift(0.5 * l1));
        }
        for (ci, v) in weights.iter().enumerate() {
            let vals = v.values();
            let mut best = f64::NEG_INFINITY;
            for x in 0..n {
                let s: f64 = (0..n).map(|y| m[(x, y)].abs() * vals[y]).sum::<f64>() / vals[x];
                let l = lift(s);
                best = best.max(l);
                self.v_rows[ci][x].push(l);
            }
            self.v_norm[ci].push(best);
            self.v0_norm[ci].push(lift(op_norm_linf_v0(m, v, pi)));
        }
        let p = pi.as_slice();
        for (ki, mu) in measures.iter().enumerate() {
            for (y, out) in pushed.iter_mut().enumerate() {
                let (sum, magnitude) = (0..n).fold((0.0, 0.0), |(s, a), x| {
                    let t = mu[x] * m[(x, y)];
                    (s + t, a + t.abs())
                });
                *out = if sum.abs() <= CANCELLATION_TOL * magnitude { 0.0 } else { sum };
            }
            let l1: f64 = pushed.iter().map(|a| a.abs()).sum();
            self.measure_tv[ki].push(lift(0.5 * l1));
            let l2: f64 = pushed.iter().zip(p).map(|(a, w)| a * a / w).sum::<f64>().sqrt();
            self.measure_l2[ki].push(lift(l2));
            for (ci, v) in weights.iter().enumerate() {
                let s: f64 = pushed.iter().zip(v.values()).map(|(a, w)| a.abs() * w).sum();
                self.measure_v[ci][ki].push(lift(s));
            }
        }
    }

    /// `(n, ln value)` pairs for a stored sequence.
    pub fn points(seq: &[f64]) -> Vec<(u64, f64)> {
        seq.iter().enumerate().map(|(i, &l)| (i as u64 + 1, l)).collect()
    }

    /// `min_n value_n^{1/n}` over the stored sequence.
    pub fn best_root(seq: &[f64]) -> (u64, f64) {
        seq.iter()
            .enumerate()
            .map(|(i, &l)| (i as u64 + 1, (l / (i + 1) as f64).exp()))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
    }
}
