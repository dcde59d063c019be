//! Generators for reference, random and near-critical test chains.
//!
//! Random recipes draw from `ChaCha8Rng` seeded with the recipe seed, so a
//! recipe always regenerates the same matrix bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{stationary, validate_chain, ChainSpec};
use crate::conditions::trace::DecayTrace;
use crate::conditions::{fit_log_decay, tail_window};
use crate::drift::{default_small_set, kappa_star};
use crate::error::{Error, Result};
use crate::spectral::reversible_spectrum;

/// Row-sum tolerance every generated chain satisfies.
pub const ZOO_ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZooRecipe {
    /// `P = [[1-a, a], [b, 1-b]]`.
    TwoState { a: f64, b: f64 },
    /// Deterministic rotation `x -> x+1 mod n`.
    Cycle { n: usize },
    /// Every row equal to the uniform distribution.
    Uniform { n: usize },
    /// Independent uniformly random rows (flat Dirichlet).
    RandomDense { n: usize, seed: u64 },
    /// Row-normalized random symmetric positive matrix.
    RandomReversible { n: usize, seed: u64 },
    /// Metropolis chain on a `width x width` grid with nearest-neighbour
    /// proposals; random target weights are drawn from `seed` when none
    /// are given.
    MetropolisGrid { width: usize, target_weights: Option<Vec<f64>>, seed: u64 },
    /// Metropolis birth-death chain on `{0..n-1}` targeting
    /// `pi(x) ~ (x+1)^-alpha`.
    TruncatedHeavyTail { n: usize, alpha: f64 },
    /// `epsilon I + (1 - epsilon) P`.
    Lazy { base: Box<ZooRecipe>, epsilon: f64 },
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadParameters(msg.into())
}

fn need_states(n: usize) -> Result<()> {
    if n == 0 {
        return Err(bad("a chain needs at least one state"));
    }
    Ok(())
}

fn unit_exponential(rng: &mut ChaCha8Rng) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

fn normalize_rows(rows: &mut [Vec<f64>]) {
    for row in rows.iter_mut() {
        let total: f64 = row.iter().sum();
        for x in row.iter_mut() {
            *x /= total;
        }
    }
}

fn rows_for(recipe: &ZooRecipe) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let numbered = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    match recipe {
        ZooRecipe::TwoState { a, b } => {
            let valid = |x: f64| x > 0.0 && x <= 1.0;
            if !valid(*a) || !valid(*b) {
                return Err(bad(format!("two-state parameters must lie in (0, 1], got a={a}, b={b}")));
            }
            Ok((vec![vec![1.0 - a, *a], vec![*b, 1.0 - b]], numbered(2)))
        }
        ZooRecipe::Cycle { n } => {
            need_states(*n)?;
            let rows = (0..*n)
                .map(|x| {
                    let mut row = vec![0.0; *n];
                    row[(x + 1) % n] = 1.0;
                    row
                })
                .collect();
            Ok((rows, numbered(*n)))
        }
        ZooRecipe::Uniform { n } => {
            need_states(*n)?;
            Ok((vec![vec![1.0 / *n as f64; *n]; *n], numbered(*n)))
        }
        ZooRecipe::RandomDense { n, seed } => {
            need_states(*n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut rows: Vec<Vec<f64>> =
                (0..*n).map(|_| (0..*n).map(|_| unit_exponential(&mut rng)).collect()).collect();
            normalize_rows(&mut rows);
            Ok((rows, numbered(*n)))
        }
        ZooRecipe::RandomReversible { n, seed } => {
            need_states(*n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut m = vec![vec![0.0; *n]; *n];
            for x in 0..*n {
                for y in x..*n {
                    let w = unit_exponential(&mut rng);
                    m[x][y] = w;
                    m[y][x] = w;
                }
            }
            normalize_rows(&mut m);
            Ok((m, numbered(*n)))
        }
        ZooRecipe::MetropolisGrid { width, target_weights, seed } => {
            need_states(*width)?;
            let n = width * width;
            let weights = match target_weights {
                Some(w) => {
                    if w.len() != n {
                        return Err(bad(format!("expected {n} target weights, got {}", w.len())));
                    }
                    if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                        return Err(bad("target weights must be positive and finite"));
                    }
                    w.clone()
                }
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    (0..n).map(|_| 0.1 + rng.random::<f64>()).collect()
                }
            };
            let mut rows = vec![vec![0.0; n]; n];
            for r in 0..*width {
                for c in 0..*width {
                    let x = r * width + c;
                    let neighbours = [
                        (r.checked_sub(1), Some(c)),
                        (Some(r + 1).filter(|&v| v < *width), Some(c)),
                        (Some(r), c.checked_sub(1)),
                        (Some(r), Some(c + 1).filter(|&v| v < *width)),
                    ];
                    let mut moved = 0.0;
                    for nb in neighbours {
                        if let (Some(rr), Some(cc)) = nb {
                            let y = rr * width + cc;
                            let p = 0.25 * (weights[y] / weights[x]).min(1.0);
                            rows[x][y] += p;
                            moved += p;
                        }
                    }
                    rows[x][x] += 1.0 - moved;
                }
            }
            let labels = (0..n).map(|x| format!("{}_{}", x / width, x % width)).collect();
            Ok((rows, labels))
        }
        ZooRecipe::TruncatedHeavyTail { n, alpha } => {
            need_states(*n)?;
            if !alpha.is_finite() || *alpha <= 1.0 {
                return Err(bad(format!("alpha must exceed 1, got {alpha}")));
            }
            let mut rows = vec![vec![0.0; *n]; *n];
            for x in 0..*n {
                let mut moved = 0.0;
                if x + 1 < *n {
                    let up = 0.5 * ((x as f64 + 1.0) / (x as f64 + 2.0)).powf(*alpha);
                    rows[x][x + 1] = up;
                    moved += up;
                }
                if x > 0 {
                    rows[x][x - 1] = 0.5;
                    moved += 0.5;
                }
                rows[x][x] = 1.0 - moved;
            }
            Ok((rows, numbered(*n)))
        }
        ZooRecipe::Lazy { base, epsilon } => {
            if !(*epsilon > 0.0 && *epsilon < 1.0) {
                return Err(bad(format!("laziness must lie in (0, 1), got {epsilon}")));
            }
            let (mut rows, labels) = rows_for(base)?;
            for (x, row) in rows.iter_mut().enumerate() {
                for v in row.iter_mut() {
                    *v *= 1.0 - epsilon;
                }
                row[x] += epsilon;
            }
            Ok((rows, labels))
        }
    }
}

/// Builds the chain described by `recipe`.
pub fn generate(recipe: &ZooRecipe) -> Result<ChainSpec> {
    let (rows, labels) = rows_for(recipe)?;
    validate_chain(&rows, labels, ZOO_ROW_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegradationRow {
    pub size: usize,
    /// Reversible spectral gap `1 - max |lambda_k|`, `k >= 2`.
    pub gap: f64,
    /// `kappa*` for the default small set.
    #[serde(serialize_with = "crate::num::extended")]
    pub kappa_star: f64,
    /// Pointwise total-variation rate fitted over the tail window.
    pub fitted_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegradationStudy {
    pub rows: Vec<DegradationRow>,
    /// Gap strictly decreasing in size (within `slack`).
    pub gap_decreasing: bool,
    /// `kappa* - 1` strictly decreasing in size (within `slack`).
    pub kappa_decreasing: bool,
}

/// Gap, `kappa*` and fitted rate of a one-parameter family across sizes.
pub fn degradation_study<F>(family: F, sizes: &[usize], n_max: usize, slack: f64) -> Result<DegradationStudy>
where
    F: Fn(usize) -> ZooRecipe,
{
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in &sizes {
        let chain = generate(&family(size))?;
        let pi = stationary(&chain)?;
        let gap = reversible_spectrum(&chain, &pi)?.gap;
        let kappa_star = kappa_star(&chain, &default_small_set(&pi))?;
        let trace = DecayTrace::compute(&chain, &pi, &[], &[], n_max);
        let window = tail_window(n_max);
        let mut fitted_rho = 0.0f64;
        for seq in &trace.tv {
            fitted_rho = fitted_rho.max(fit_log_decay(&DecayTrace::points(seq), window)?.rho);
        }
        rows.push(DegradationRow { size, gap, kappa_star, fitted_rho });
    }
    let strictly = |f: &dyn Fn(&DegradationRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]) - slack);
    let gap_decreasing = strictly(&|r| r.gap);
    let kappa_decreasing = strictly(&|r| r.kappa_star - 1.0);
    Ok(DegradationStudy { rows, gap_decreasing, kappa_decreasing })
}
