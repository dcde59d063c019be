//! End-to-end acceptance checks, one test per criterion. Each test prints a
//! single `PASS`/`FAIL` line before asserting.

use std::time::{Duration, Instant};

use geoerg::chain::{is_reversible, kernel_power, ChainSpec, StationaryDist};
use geoerg::conditions::{cond_pointwise_tv, Analysis, Certificate, ConditionId, Status};
use geoerg::drift::{default_small_set, kappa_star, return_time_mgf, synthesize_drift, taboo_radius};
use geoerg::norms::{l2_measure_norm_of_operator, lp_norm, op_norm_linf_v0, tv_distance};
use geoerg::report::analyze;
use geoerg::spectral::{gelfand_radius, pi_perp_norm, GelfandOptions, OperatorNorm};
use geoerg::zoo::degradation_study;
use geoerg::{cross_validate, generate, stationary, Error, RunConfig, SignedMeasure, WeightFunction, ZooRecipe};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn verdict_line(criterion: u32, name: &str, ok: bool, elapsed: Duration, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {criterion} [{name}] in {:.3}s: {detail}", elapsed.as_secs_f64());
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

/// Accumulates named checks and summarizes the first few failures.
#[derive(Default)]
struct Checks {
    total: usize,
    failures: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, || format!("{label}: got {got}, want {want} +- {tol}"));
    }

    fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn summary(&self) -> String {
        if self.ok() {
            format!("{} checks", self.total)
        } else {
            let head: Vec<&str> = self.failures.iter().take(5).map(String::as_str).collect();
            format!("{} of {} checks failed; first: {}", self.failures.len(), self.total, head.join("; "))
        }
    }
}

fn with_pi(chain: ChainSpec) -> (ChainSpec, StationaryDist) {
    let pi = stationary(&chain).expect("irreducible test chain");
    (chain, pi)
}

fn reference() -> (ChainSpec, StationaryDist) {
    with_pi(generate(&ZooRecipe::TwoState { a: 0.3, b: 0.2 }).unwrap())
}

/// Sparse aperiodic chain: a random-weight ring with occasional chords and
/// a random holding probability.
fn sparse_ring(n: usize, seed: u64) -> ChainSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hold = rng.random_range(0.05..0.5);
    let mut rows = vec![vec![0.0; n]; n];
    for (x, row) in rows.iter_mut().enumerate() {
        row[(x + 1) % n] += rng.random_range(0.1..1.0);
        if rng.random::<f64>() < 0.3 {
            row[rng.random_range(0..n)] += rng.random_range(0.1..1.0);
        }
        let total: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p *= (1.0 - hold) / total;
        }
        row[x] += hold;
    }
    ChainSpec::from_rows(&rows, 1e-9).unwrap()
}

/// Second-largest eigenvalue modulus of a reversible kernel, computed from
/// the symmetrized matrix with nalgebra's eigensolver.
fn eigen_oracle(chain: &ChainSpec, pi: &StationaryDist) -> f64 {
    let n = chain.len();
    let s: Vec<f64> = pi.as_slice().iter().map(|p| p.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |x, y| 0.5 * (s[x] / s[y] * chain.prob(x, y) + s[y] / s[x] * chain.prob(y, x)));
    let mut moduli: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().map(|l| l.abs()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli.get(1).copied().unwrap_or(0.0)
}

#[test]
fn criterion_1_two_state_oracle() {
    let start = Instant::now();
    let (chain, pi) = reference();
    let mut c = Checks::default();
    c.close("pi[0]", pi.as_slice()[0], 0.4, 1e-12);
    c.close("pi[1]", pi.as_slice()[1], 0.6, 1e-12);
    c.close("pi_perp_norm", pi_perp_norm(&chain, &pi).unwrap(), 0.5, 1e-12);

    let centered = chain.matrix() - pi.projector();
    let one = WeightFunction::constant(2);
    let radius = gelfand_radius(&centered, OperatorNorm::LinfV(&one), GelfandOptions::default()).unwrap();
    c.close("gelfand radius", radius.radius, 0.5, 1e-6);

    let verdicts = cond_pointwise_tv(&chain, &pi, 256).unwrap();
    match &verdicts[0].certificate {
        Some(Certificate::GeometricRate { rho, c: consts, .. }) => {
            c.close("fitted rho", *rho, 0.5, 1e-6);
            c.close("fitted C_0", consts[0], 0.6, 1e-6);
        }
        other => c.check(false, || format!("unexpected certificate {other:?}")),
    }
    c.close("||P|| on L^inf_{1,0}", op_norm_linf_v0(chain.matrix(), &one, &pi), 0.5, 1e-12);
    c.close("kappa*", kappa_star(&chain, &[0]).unwrap(), 1.25, 1e-9);
    c.close("E_0[1.1^tau]", return_time_mgf(&chain, &[0], 1.1).unwrap().mgf[0], 1.375, 1e-9);
    let drift = synthesize_drift(&chain, &pi, &[0], 1.1, &[1]).unwrap();
    c.close("drift lambda", drift.lambda, 1.0 / 1.1, 1e-12);
    c.close("drift b", drift.b, 0.375 / 1.1, 1e-9);

    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(1), || format!("runtime {elapsed:?}"));
    verdict_line(1, "two-state oracle", c.ok(), elapsed, &c.summary());
}

#[test]
fn criterion_2_lemma_suite() {
    let start = Instant::now();
    let mut c = Checks::default();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=25);
        let recipe =
            if seed % 2 == 0 { ZooRecipe::RandomDense { n, seed } } else { ZooRecipe::RandomReversible { n, seed } };
        let (chain, pi) = with_pi(generate(&recipe).unwrap());
        let p = pi.as_slice();
        for _ in 0..50 {
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mu_m = SignedMeasure(mu.clone());
            let l1: f64 = mu.iter().map(|x| x.abs()).sum();
            let lp1 = lp_norm(&mu_m, &pi, 1.0).unwrap();
            let lp2 = lp_norm(&mu_m, &pi, 2.0).unwrap();
            let lp4 = lp_norm(&mu_m, &pi, 4.0).unwrap();
            c.close("L1 is total mass of |mu|", lp1, l1, 1e-12);
            c.check(lp1 <= lp2 + 1e-10, || format!("L1 {lp1} > L2 {lp2}"));
            c.check(lp1 <= 1.0 + lp2 * lp2 + 1e-10, || format!("||mu||_1 {lp1} > 1 + ||mu||_2^2"));
            c.check(lp2 * lp2 <= 1.0 + lp4.powi(4) + 1e-10, || format!("||mu||_2^2 {lp2} > 1 + ||mu||_4^4"));

            let mass: f64 = mu.iter().sum();
            let centered = SignedMeasure(mu.iter().zip(p).map(|(m, q)| m - mass * q).collect());
            let lhs = lp_norm(&centered, &pi, 2.0).unwrap().powi(2);
            c.close("centered L2 identity", lhs, lp2 * lp2 - mass * mass, 1e-10 * (1.0 + lp2 * lp2));

            let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            let a: Vec<f64> = a.iter().map(|x| x / sa).collect();
            let b: Vec<f64> = b.iter().map(|x| x / sb).collect();
            let tv = tv_distance(&SignedMeasure(a.clone()), &SignedMeasure(b.clone())).unwrap();
            let diff = SignedMeasure(a.iter().zip(&b).map(|(x, y)| x - y).collect());
            c.close("TV = L1 / 2", tv, 0.5 * lp_norm(&diff, &pi, 1.0).unwrap(), 1e-12);

            if is_reversible(&chain, &pi) {
                let pushed = chain.push_forward(&mu);
                let f: Vec<f64> = mu.iter().zip(p).map(|(m, q)| m / q).collect();
                let pf = chain.apply(&f);
                for y in 0..n {
                    c.close("density propagation", pushed[y] / p[y], pf[y], 1e-10 * (1.0 + pf[y].abs()));
                }
            }
        }
        if is_reversible(&chain, &pi) {
            for steps in 1..=5 {
                let pn = kernel_power(&chain, steps).unwrap();
                for x in 0..n {
                    for y in 0..n {
                        c.close("n-step detailed balance", p[x] * pn[(x, y)], p[y] * pn[(y, x)], 1e-10);
                    }
                }
            }
            let centered = chain.matrix() - pi.projector();
            let l2 = l2_measure_norm_of_operator(&centered, &pi).unwrap();
            c.close("L2 operator norm of P - Pi", l2, pi_perp_norm(&chain, &pi).unwrap(), 1e-8);
        }
    }
    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(30), || format!("runtime {elapsed:?}"));
    verdict_line(2, "lemma suite", c.ok(), elapsed, &c.summary());
}

#[test]
fn criterion_3_implication_graph_soundness() {
    let start = Instant::now();
    let config = RunConfig::default();
    let outcomes: Vec<(bool, Option<String>)> = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + k);
            let n = rng.random_range(2..=25);
            let (chain, reversible_recipe) = match k % 4 {
                0 => (generate(&ZooRecipe::RandomDense { n, seed: k }).unwrap(), false),
                1 => (generate(&ZooRecipe::RandomReversible { n, seed: k }).unwrap(), true),
                2 => {
                    let width = 2 + (k as usize / 4) % 4;
                    let recipe = ZooRecipe::MetropolisGrid { width, target_weights: None, seed: k };
                    (generate(&recipe).unwrap(), true)
                }
                _ => (sparse_ring(n, k), false),
            };
            let (chain, pi) = with_pi(chain);
            let report = cross_validate(&chain, &pi, &config).unwrap();
            let problem = (!report.violated_edges.is_empty()).then(|| {
                let edges: Vec<String> =
                    report.violated_edges.iter().map(|e| format!("{}->{}", e.from, e.to)).collect();
                format!("chain {k} (N={}): {}", chain.len(), edges.join(","))
            });
            (reversible_recipe && is_reversible(&chain, &pi), problem)
        })
        .collect();
    let reversible = outcomes.iter().filter(|o| o.0).count();
    let mut c = Checks::default();
    c.check(reversible >= 300, || format!("only {reversible} reversible chains"));
    for (_, problem) in &outcomes {
        c.check(problem.is_none(), || problem.clone().unwrap_or_default());
    }
    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(300), || format!("runtime {elapsed:?}"));
    let detail = format!("1000 chains, {reversible} reversible; {}", c.summary());
    verdict_line(3, "implication-graph soundness", c.ok(), elapsed, &detail);
}

#[test]
fn criterion_4_rate_coherence() {
    let start = Instant::now();
    let config = RunConfig::default();
    let mut c = Checks::default();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + seed);
        let n = rng.random_range(2..=25);
        let (chain, pi) = with_pi(generate(&ZooRecipe::RandomReversible { n, seed }).unwrap());
        let oracle = eigen_oracle(&chain, &pi);
        let a = Analysis::new(&chain, &pi, &config).unwrap();
        let tv_rho = a.trace.tv.iter().map(|seq| a.fit(seq).rho).fold(0.0, f64::max);
        let one = &a.candidates[0];
        let v_one = a.fit(&a.trace.v_norm[one.index]).rho;
        let radius = one.centered.radius;
        for (name, rate) in [("i", tv_rho), ("ix", v_one), ("xxiii", v_one), ("xv", radius)] {
            c.close(&format!("chain {seed} ({name})"), rate, oracle, 1e-3);
        }
    }
    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(120), || format!("runtime {elapsed:?}"));
    verdict_line(4, "rate coherence", c.ok(), elapsed, &c.summary());
}

#[test]
fn criterion_5_refutation_correctness() {
    let start = Instant::now();
    let config = RunConfig::default();
    let mut c = Checks::default();
    for n in [2usize, 3] {
        let (chain, pi) = with_pi(generate(&ZooRecipe::Cycle { n }).unwrap());
        let report = cross_validate(&chain, &pi, &config).unwrap();
        for v in &report.verdicts {
            let applicable = !v.condition.requires_reversible() || is_reversible(&chain, &pi);
            let want = if applicable { Status::Fails } else { Status::NotApplicable };
            c.check(v.status == want, || format!("cycle({n}) {}: {:?}", v.condition, v.status));
            for key in ["rho", "rate"] {
                if let Some(&r) = v.diagnostics.get(key) {
                    c.check(r >= 1.0 - 1e-6, || format!("cycle({n}) {} {key} = {r}", v.condition));
                }
            }
        }
        c.check(report.violated_edges.is_empty(), || format!("cycle({n}) violations {:?}", report.violated_edges));

        let a = Analysis::new(&chain, &pi, &config).unwrap();
        for cand in &a.candidates {
            c.check(cand.centered.radius >= 1.0 - 1e-9, || format!("cycle({n}) radius {}", cand.centered.radius));
            c.check(cand.zero_mean.radius >= 1.0 - 1e-9, || format!("cycle({n}) V0 radius {}", cand.zero_mean.radius));
        }
        for id in [1, 2] {
            let rates = match &report.verdict(ConditionId::new(id).unwrap()).unwrap().certificate {
                Some(Certificate::GeometricRate { rho, .. }) => vec![*rho],
                Some(Certificate::StateRates { rho, .. }) => rho.clone(),
                other => {
                    c.check(false, || format!("cycle({n}) condition {id} certificate {other:?}"));
                    Vec::new()
                }
            };
            c.check(rates.iter().all(|&r| r >= 1.0 - 1e-6), || format!("cycle({n}) fitted rates {rates:?}"));
        }
        // Every return to a state of the rotation takes exactly n steps.
        let set = default_small_set(&pi);
        c.check(taboo_radius(&chain, &set).unwrap() == 0.0, || format!("cycle({n}) taboo radius"));
        c.check(kappa_star(&chain, &set).unwrap().is_infinite(), || format!("cycle({n}) kappa*"));
        let mgf = return_time_mgf(&chain, &set, 1.5).unwrap();
        c.close(&format!("cycle({n}) E[1.5^tau]"), mgf.sup_return_mgf(), 1.5f64.powi(n as i32), 1e-12);
        c.check(!a.strongly_small(), || format!("cycle({n}) small set has full support"));
    }

    let identity = ChainSpec::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1e-12).unwrap();
    let uniform = StationaryDist::checked(vec![0.5, 0.5], &identity, 1e-12).unwrap();
    let refused = |r: Result<(), Error>| matches!(r, Err(Error::NotIrreducible));
    c.check(refused(stationary(&identity).map(|_| ())), || "stationary accepted P = I".into());
    c.check(refused(cross_validate(&identity, &uniform, &config).map(|_| ())), || {
        "cross_validate accepted P = I".into()
    });
    c.check(refused(cond_pointwise_tv(&identity, &uniform, 64).map(|_| ())), || "pointwise accepted P = I".into());
    c.check(refused(return_time_mgf(&identity, &[0], 1.1).map(|_| ())), || "return_time_mgf accepted P = I".into());
    c.check(refused(synthesize_drift(&identity, &uniform, &[0], 1.1, &[1]).map(|_| ())), || {
        "synthesize_drift accepted P = I".into()
    });

    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(1), || format!("runtime {elapsed:?}"));
    verdict_line(5, "refutation correctness", c.ok(), elapsed, &c.summary());
}

/// Brute-force return-time sum from `x`.
struct Truncated {
    /// `sum_{n <= horizon} kappa^n P_x(tau_S = n)`.
    sum: f64,
    /// `kappa^horizon P_x(tau_S > horizon)`, the weighted mass still out.
    outstanding: f64,
}

/// Sums up to `horizon` terms, stopping once the weighted outstanding mass
/// drops below `stop_below`.
fn brute_force_mgf(
    chain: &ChainSpec,
    set: &[usize],
    x: usize,
    kappa: f64,
    horizon: usize,
    stop_below: f64,
) -> Truncated {
    let n = chain.len();
    let inside: Vec<bool> = (0..n).map(|y| set.contains(&y)).collect();
    let mut alive: Vec<f64> = (0..n).map(|y| if y == x { 1.0 } else { 0.0 }).collect();
    let mut sum = 0.0;
    let mut weight = 1.0;
    for _ in 1..=horizon {
        weight *= kappa;
        let mut next = vec![0.0; n];
        for (z, &mass) in alive.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for y in 0..n {
                let p = mass * chain.prob(z, y);
                if inside[y] {
                    sum += weight * p;
                } else {
                    next[y] += p;
                }
            }
        }
        alive = next;
        if weight * alive.iter().sum::<f64>() < stop_below {
            break;
        }
    }
    Truncated { sum, outstanding: weight * alive.iter().sum::<f64>() }
}

/// Every seeded zoo chain with at most six states.
fn small_seeded_chains() -> Vec<(String, ChainSpec)> {
    let mut out = Vec::new();
    for seed in 0..100u64 {
        for n in 2..=6 {
            let dense = ZooRecipe::RandomDense { n, seed };
            let reversible = ZooRecipe::RandomReversible { n, seed };
            out.push((format!("{dense:?}"), generate(&dense).unwrap()));
            out.push((format!("{reversible:?}"), generate(&reversible).unwrap()));
        }
        let grid = ZooRecipe::MetropolisGrid { width: 2, target_weights: None, seed };
        out.push((format!("{grid:?}"), generate(&grid).unwrap()));
    }
    out
}

/// Cap on the number of terms summed for slowly returning chains.
const LONG_HORIZON: usize = 200_000;

#[test]
fn criterion_6_return_time_brute_force() {
    let start = Instant::now();
    let mut c = Checks::default();
    let chains = small_seeded_chains();
    let mut at_200 = 0;
    let mut extended = 0;
    for (name, chain) in &chains {
        let (chain, pi) = with_pi(chain.clone());
        let set = default_small_set(&pi);
        let kappa = kappa_star(&chain, &set).unwrap().sqrt();
        let cert = return_time_mgf(&chain, &set, kappa).unwrap();
        for x in 0..chain.len() {
            let short = brute_force_mgf(&chain, &set, x, kappa, 200, 0.0);
            if short.outstanding <= 1e-9 {
                at_200 += 1;
                c.close(&format!("{name} state {x}, 200 terms"), cert.mgf[x], short.sum, 1e-6);
            } else {
                extended += 1;
                let long = brute_force_mgf(&chain, &set, x, kappa, LONG_HORIZON, 1e-15);
                c.check(long.outstanding <= 1e-9, || format!("{name} state {x}: tail {}", long.outstanding));
                c.close(&format!("{name} state {x}, long horizon"), cert.mgf[x], long.sum, 1e-6);
            }
        }
    }
    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(30), || format!("runtime {elapsed:?}"));
    let detail = format!(
        "{} chains; {at_200} start states matched with 200 terms, {extended} slow-returning ones with a longer horizon; {}",
        chains.len(),
        c.summary()
    );
    verdict_line(6, "return-time brute force", c.ok(), elapsed, &detail);
}

#[test]
fn criterion_7_degradation_study() {
    let start = Instant::now();
    let study =
        degradation_study(|n| ZooRecipe::TruncatedHeavyTail { n, alpha: 2.5 }, &[10, 20, 40, 80], 256, 1e-9).unwrap();
    let mut c = Checks::default();
    c.check(study.gap_decreasing, || format!("gaps {:?}", study.rows.iter().map(|r| r.gap).collect::<Vec<_>>()));
    c.check(study.kappa_decreasing, || {
        format!("kappa* {:?}", study.rows.iter().map(|r| r.kappa_star).collect::<Vec<_>>())
    });
    for w in study.rows.windows(2) {
        c.check(w[1].gap < w[0].gap - 1e-9, || format!("gap {} -> {}", w[0].size, w[1].size));
        c.check(w[1].kappa_star - 1.0 < w[0].kappa_star - 1.0 - 1e-9, || {
            format!("kappa* {} -> {}", w[0].size, w[1].size)
        });
    }
    let elapsed = start.elapsed();
    c.check(elapsed < Duration::from_secs(60), || format!("runtime {elapsed:?}"));
    let rows: Vec<String> = study
        .rows
        .iter()
        .map(|r| format!("N={} gap={:.3e} kappa*-1={:.3e}", r.size, r.gap, r.kappa_star - 1.0))
        .collect();
    verdict_line(7, "degradation study", c.ok(), elapsed, &format!("{}; {}", rows.join(", "), c.summary()));
}

#[test]
fn criterion_8_determinism() {
    let start = Instant::now();
    let config = RunConfig::default();
    let render = || {
        let (chain, pi) = reference();
        analyze(&chain, &pi, &config).unwrap().to_json().unwrap()
    };
    let first = render();
    let second = render();
    let mut c = Checks::default();
    c.check(first.as_bytes() == second.as_bytes(), || "reports differ".into());
    c.check(!first.is_empty(), || "empty report".into());
    let elapsed = start.elapsed();
    verdict_line(8, "determinism", c.ok(), elapsed, &format!("{} bytes; {}", first.len(), c.summary()));
}
