//! Spectral radii in weighted norms and the reversible `L^2(pi)` spectrum.
//!
//! Radii in `L^inf_V`, `L^inf_{V,0}` and `L^2(pi)` come from the Gelfand
//! formula `r(K) = lim ||K^n||^{1/n}`, evaluated along `n = 2^k` by repeated
//! squaring with max-entry rescaling (scale factors kept in log space). The
//! reported radius is the ratio estimate `(||K^{2n}|| / ||K^n||)^{1/n}`, which
//! is exact for purely geometric norm sequences and, by submultiplicativity,
//! never exceeds any recorded iterate `||K^n||^{1/n}`.
//!
//! For reversible chains the matrix `D^{1/2} P D^{-1/2}` is symmetric and its
//! spectrum is computed with cyclic Jacobi rotations; this path is independent
//! of the Gelfand iteration and serves as its oracle.

use serde::Serialize;

use crate::chain::{detailed_balance_residual, is_reversible, ChainSpec, Matrix, StationaryDist};
use crate::error::{Error, Result};
use crate::linalg::{ln0, numerical_rank, rescale, symmetric_eigen};
use crate::norms::{l2_measure_norm_of_operator, op_norm_linf_v, op_norm_linf_v0, WeightFunction};

/// Relative rank threshold used for the multiplicity of eigenvalue 1.
pub const RANK_TOL: f64 = 1e-10;

const JACOBI_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormSpace {
    LinfV,
    LinfV0,
    L2pi,
    PiPerp,
}

/// The norm in which powers of an operator are measured.
#[derive(Debug, Clone, Copy)]
pub enum OperatorNorm<'a> {
    LinfV(&'a WeightFunction),
    /// Restriction to `{f : pi(f) = 0}`; the operator must leave that subspace invariant.
    LinfV0(&'a WeightFunction, &'a StationaryDist),
    L2pi(&'a StationaryDist),
}

impl OperatorNorm<'_> {
    pub fn space(&self) -> NormSpace {
        match self {
            Self::LinfV(_) => NormSpace::LinfV,
            Self::LinfV0(..) => NormSpace::LinfV0,
            Self::L2pi(_) => NormSpace::L2pi,
        }
    }

    fn evaluate(&self, k: &Matrix) -> Result<f64> {
        match self {
            Self::LinfV(v) => Ok(op_norm_linf_v(k, v)),
            Self::LinfV0(v, pi) => Ok(op_norm_linf_v0(k, v, pi)),
            Self::L2pi(pi) => l2_measure_norm_of_operator(k, pi).map_err(|e| Error::NormEvaluation(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GelfandOptions {
    /// Largest power evaluated; rounded down to a power of two.
    pub n_max: u64,
    /// Convergence threshold on successive radius estimates.
    pub tol: f64,
}

impl Default for GelfandOptions {
    fn default() -> Self {
        Self { n_max: 1 << 20, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub radius: f64,
    pub norm_space: NormSpace,
    /// `(n, ||K^n||^{1/n})` for `n = 1, 2, 4, ...`.
    pub gelfand_iterates: Vec<(u64, f64)>,
    pub converged: bool,
    pub eigenvalue_one_multiplicity: Option<usize>,
}

impl SpectralReport {
    pub fn min_iterate(&self) -> f64 {
        self.gelfand_iterates.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min)
    }
}

/// Spectral radius of `k` in the given norm by the Gelfand formula.
pub fn gelfand_radius(k: &Matrix, norm: OperatorNorm<'_>, opts: GelfandOptions) -> Result<SpectralReport> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch("gelfand_radius needs a square operator".into()));
    }
    if let OperatorNorm::LinfV0(_, pi) | OperatorNorm::L2pi(pi) = norm {
        if let Some(state) = pi.as_slice().iter().position(|&p| p <= 0.0) {
            return Err(Error::NormEvaluation(format!("pi vanishes at state {state}")));
        }
    }

    // On zero-mean functions K agrees with K(I - Pi), which also kills the
    // constants; powers of the deflated operator keep full relative precision.
    let mut m = match norm {
        OperatorNorm::LinfV0(_, pi) => {
            let ones = nalgebra::DVector::from_element(k.ncols(), 1.0);
            let k_one = k * ones;
            let pi_row = nalgebra::RowDVector::from_row_slice(pi.as_slice());
            k - k_one * pi_row
        }
        _ => k.clone(),
    };

    let max_exp = 63 - opts.n_max.max(1).leading_zeros() as u64;
    let mut ln_scale = rescale(&mut m);
    let mut iterates = Vec::new();
    let mut n: u64 = 1;
    let mut prev_ln_norm: Option<f64> = None;
    let mut prev_estimate: Option<f64> = None;
    let mut converged = false;
    let mut radius = f64::NAN;

    for step in 0..=max_exp {
        let ln_norm =
            if ln_scale == f64::NEG_INFINITY { f64::NEG_INFINITY } else { ln_scale + ln0(norm.evaluate(&m)?) };
        if ln_norm == f64::NEG_INFINITY {
            iterates.push((n, 0.0));
            radius = 0.0;
            converged = true;
            break;
        }
        iterates.push((n, (ln_norm / n as f64).exp()));

        if let Some(prev) = prev_ln_norm {
            let half = (n / 2) as f64;
            let estimate = ((ln_norm - prev) / half).exp();
            radius = estimate;
            if let Some(pe) = prev_estimate {
                if (estimate - pe).abs() < opts.tol {
                    converged = true;
                    break;
                }
            }
            prev_estimate = Some(estimate);
        } else {
            radius = iterates[0].1;
        }
        prev_ln_norm = Some(ln_norm);

        if step == max_exp {
            break;
        }
        m = &m * &m;
        let s = rescale(&mut m);
        ln_scale = 2.0 * ln_scale + s;
        n *= 2;
    }

    let floor = iterates.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    Ok(SpectralReport {
        radius: radius.min(floor).max(0.0),
        norm_space: norm.space(),
        gelfand_iterates: iterates,
        converged,
        eigenvalue_one_multiplicity: None,
    })
}

/// Geometric multiplicity of eigenvalue 1: `N - rank(P - I)`.
pub fn eigenvalue_one_multiplicity(chain: &ChainSpec) -> usize {
    let n = chain.len();
    let a = chain.matrix() - Matrix::identity(n, n);
    n - numerical_rank(&a, RANK_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversibleSpectrum {
    /// Real eigenvalues of `P` on `L^2(pi)`, descending.
    pub eigenvalues: Vec<f64>,
    /// `1 - max |lambda|` over all eigenvalues except one copy of the top one.
    pub gap: f64,
    pub top_multiplicity: usize,
}

impl ReversibleSpectrum {
    /// Largest modulus after removing one copy of the top eigenvalue.
    pub fn subdominant_modulus(&self) -> f64 {
        1.0 - self.gap
    }
}

fn check_reversible(chain: &ChainSpec, pi: &StationaryDist) -> Result<()> {
    if pi.len() != chain.len() {
        return Err(Error::DimensionMismatch("pi and chain differ in size".into()));
    }
    if let Some(state) = pi.as_slice().iter().position(|&p| p <= 0.0) {
        return Err(Error::ZeroStationaryMass { state });
    }
    if !is_reversible(chain, pi) {
        let (residual, _) = detailed_balance_residual(chain, pi);
        return Err(Error::NotReversible { residual });
    }
    Ok(())
}

/// `D^{1/2} P D^{-1/2}`, symmetric when detailed balance holds.
fn symmetrized(chain: &ChainSpec, pi: &StationaryDist) -> Matrix {
    let n = chain.len();
    let sq: Vec<f64> = pi.as_slice().iter().map(|p| p.sqrt()).collect();
    Matrix::from_fn(n, n, |x, y| sq[x] / sq[y] * chain.prob(x, y))
}

pub fn reversible_spectrum(chain: &ChainSpec, pi: &StationaryDist) -> Result<ReversibleSpectrum> {
    check_reversible(chain, pi)?;
    let eig = symmetric_eigen(&symmetrized(chain, pi), JACOBI_TOL);
    let eigenvalues = eig.values;
    let rest = eigenvalues[1..].iter().map(|l| l.abs()).fold(0.0, f64::max);
    let top_multiplicity = eigenvalues.iter().filter(|l| (*l - 1.0).abs() <= 1e-10).count();
    Ok(ReversibleSpectrum { gap: 1.0 - rest, eigenvalues, top_multiplicity })
}

/// `||P||_{pi-perp}`: the spectral norm of the symmetrized kernel after
/// deflating the stationary direction `sqrt(pi)`.
pub fn pi_perp_norm(chain: &ChainSpec, pi: &StationaryDist) -> Result<f64> {
    check_reversible(chain, pi)?;
    let n = chain.len();
    let sq: Vec<f64> = pi.as_slice().iter().map(|p| p.sqrt()).collect();
    let a = symmetrized(chain, pi) - Matrix::from_fn(n, n, |x, y| sq[x] * sq[y]);
    let eig = symmetric_eigen(&a, JACOBI_TOL);
    Ok(eig.values.iter().map(|l| l.abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary;
    use approx::assert_abs_diff_eq;

    fn chain(rows: &[Vec<f64>]) -> ChainSpec {
        ChainSpec::from_rows(rows, 1e-12).unwrap()
    }

    fn two_state() -> ChainSpec {
        chain(&[vec![0.7, 0.3], vec![0.2, 0.8]])
    }

    #[test]
    fn zero_operator_has_zero_radius() {
        let one = WeightFunction::constant(3);
        let r = gelfand_radius(&Matrix::zeros(3, 3), OperatorNorm::LinfV(&one), GelfandOptions::default()).unwrap();
        assert_eq!(r.radius, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn two_state_radii() {
        let c = two_state();
        let pi = stationary(&c).unwrap();
        let one = WeightFunction::constant(2);
        let k = c.matrix() - pi.projector();
        let r = gelfand_radius(&k, OperatorNorm::LinfV(&one), GelfandOptions::default()).unwrap();
        assert_abs_diff_eq!(r.radius, 0.5, epsilon = 1e-6);
        assert!(r.converged);
        assert!(r.radius <= r.min_iterate() + 1e-9);

        let r0 = gelfand_radius(c.matrix(), OperatorNorm::LinfV0(&one, &pi), GelfandOptions::default()).unwrap();
        assert_abs_diff_eq!(r0.radius, 0.5, epsilon = 1e-6);

        let r2 = gelfand_radius(&k, OperatorNorm::L2pi(&pi), GelfandOptions::default()).unwrap();
        assert_abs_diff_eq!(r2.radius, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn jordan_block_converges_slowly_but_stays_below_iterates() {
        let k = Matrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]);
        let one = WeightFunction::constant(2);
        let r = gelfand_radius(&k, OperatorNorm::LinfV(&one), GelfandOptions::default()).unwrap();
        assert!((r.radius - 0.5).abs() < 1e-4);
        assert!(r.radius <= r.min_iterate() + 1e-9);
    }

    #[test]
    fn multiplicities() {
        assert_eq!(eigenvalue_one_multiplicity(&two_state()), 1);
        assert_eq!(eigenvalue_one_multiplicity(&chain(&[vec![1.0, 0.0], vec![0.0, 1.0]])), 2);
        let blocks = chain(&[
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.1, 0.9, 0.0, 0.0],
            vec![0.0, 0.0, 0.3, 0.7],
            vec![0.0, 0.0, 0.6, 0.4],
        ]);
        assert_eq!(eigenvalue_one_multiplicity(&blocks), 2);
    }

    #[test]
    fn reversible_examples() {
        let c = two_state();
        let pi = stationary(&c).unwrap();
        let s = reversible_spectrum(&c, &pi).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(s.gap, 0.5, epsilon = 1e-14);
        assert_eq!(s.top_multiplicity, 1);
        assert_abs_diff_eq!(pi_perp_norm(&c, &pi).unwrap(), 0.5, epsilon = 1e-14);

        let flip = chain(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let pi = stationary(&flip).unwrap();
        let s = reversible_spectrum(&flip, &pi).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[1], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.gap, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi_perp_norm(&flip, &pi).unwrap(), 1.0, epsilon = 1e-14);

        let uniform = chain(&vec![vec![0.2; 5]; 5]);
        let pi = stationary(&uniform).unwrap();
        let s = reversible_spectrum(&uniform, &pi).unwrap();
        assert_abs_diff_eq!(s.gap, 1.0, epsilon = 1e-12);
        for l in &s.eigenvalues[1..] {
            assert_abs_diff_eq!(*l, 0.0, epsilon = 1e-12);
        }
        assert!(pi_perp_norm(&uniform, &pi).unwrap() < 1e-12);
    }

    #[test]
    fn non_reversible_is_rejected() {
        let c = chain(&[vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8], vec![0.8, 0.1, 0.1]]);
        let pi = stationary(&c).unwrap();
        assert!(matches!(reversible_spectrum(&c, &pi), Err(Error::NotReversible { .. })));
        assert!(matches!(pi_perp_norm(&c, &pi), Err(Error::NotReversible { .. })));
    }
}
