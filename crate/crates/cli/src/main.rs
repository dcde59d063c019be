//! `geoerg`: analyze finite Markov chains for geometric ergodicity.
//!
//! Exit status is 0 on success, 2 when an analysis finds a violated
//! implication between conditions, and 1 on any input or I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use geoerg::config::ConditionSelection;
use geoerg::io::{chain_to_json, load_chain, write_atomic};
use geoerg::report::{analyze, decay_table};
use geoerg::{cross_validate, generate, stationary, RunConfig, ZooRecipe};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "geoerg", version, about = "Certify or refute geometric ergodicity of finite Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate every condition on a chain and write a JSON report.
    Analyze {
        /// Chain file (`.json` or `.csv`).
        chain: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Report path; the report goes to standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate total-variation decay and its weighted bound per state.
    Decay {
        chain: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV path; the table goes to standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a chain from a built-in recipe.
    Zoo(ZooArgs),
    /// Check the implication graph on one chain or on many random chains.
    Crossval {
        /// Chain file; required unless `--random` is given.
        chain: Option<PathBuf>,
        /// Number of seeded random chains to check instead of a file.
        #[arg(long, conflicts_with = "chain")]
        random: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Summary path; the summary goes to standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML file with run settings; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    j_set: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    p_set: Option<Vec<f64>>,
    #[arg(long)]
    rate_tol: Option<f64>,
    /// `all`, or a comma-separated list of roman numerals or labels.
    #[arg(long)]
    conditions: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(n) = self.n_max {
            config.n_max = n;
        }
        if let Some(j) = &self.j_set {
            config.j_set = j.clone();
        }
        if let Some(p) = &self.p_set {
            config.p_set = p.clone();
        }
        if let Some(t) = self.rate_tol {
            config.rate_tol = t;
        }
        if let Some(c) = &self.conditions {
            config.conditions = c.parse::<ConditionSelection>()?;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct ZooArgs {
    #[command(subcommand)]
    recipe: RecipeCommand,
    /// Output chain file; the chain goes to standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized recipes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Mix the generated kernel with the identity: `eps I + (1 - eps) P`.
    #[arg(long, global = true)]
    lazy: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum RecipeCommand {
    /// `[[1-a, a], [b, 1-b]]`.
    TwoState {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
    /// Deterministic rotation on `n` states.
    Cycle {
        #[arg(long)]
        n: usize,
    },
    /// Every row uniform.
    Uniform {
        #[arg(long)]
        n: usize,
    },
    /// Random dense rows.
    RandomDense {
        #[arg(long)]
        n: usize,
    },
    /// Random chain satisfying detailed balance.
    RandomReversible {
        #[arg(long)]
        n: usize,
    },
    /// Metropolis chain on a square grid.
    Metropolis {
        #[arg(long)]
        width: usize,
        /// Unnormalized target weights in row-major order.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Birth-death chain targeting a truncated power law.
    HeavyTail {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
    },
}

impl ZooArgs {
    fn recipe(&self) -> ZooRecipe {
        let seed = self.seed;
        let base = match &self.recipe {
            RecipeCommand::TwoState { a, b } => ZooRecipe::TwoState { a: *a, b: *b },
            RecipeCommand::Cycle { n } => ZooRecipe::Cycle { n: *n },
            RecipeCommand::Uniform { n } => ZooRecipe::Uniform { n: *n },
            RecipeCommand::RandomDense { n } => ZooRecipe::RandomDense { n: *n, seed },
            RecipeCommand::RandomReversible { n } => ZooRecipe::RandomReversible { n: *n, seed },
            RecipeCommand::Metropolis { width, weights } => {
                ZooRecipe::MetropolisGrid { width: *width, target_weights: weights.clone(), seed }
            }
            RecipeCommand::HeavyTail { n, alpha } => ZooRecipe::TruncatedHeavyTail { n: *n, alpha: *alpha },
        };
        match self.lazy {
            Some(epsilon) => ZooRecipe::Lazy { base: Box::new(base), epsilon },
            None => base,
        }
    }
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, contents.as_bytes()).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<geoerg::io::LoadedChain> {
    load_chain(path).with_context(|| format!("loading {}", path.display()))
}

fn run_analyze(chain: &Path, config: &ConfigArgs, out: Option<&Path>) -> Result<ExitCode> {
    let config = config.resolve()?;
    config.validate()?;
    let loaded = load(chain)?;
    let pi = loaded.stationary()?;
    let report = analyze(&loaded.chain, &pi, &config)?;
    emit(out, &report.to_json()?)?;
    let violations = report.violation_count();
    if violations > 0 {
        eprintln!("{violations} implication(s) violated");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_decay(chain: &Path, config: &ConfigArgs, out: Option<&Path>) -> Result<ExitCode> {
    let config = config.resolve()?;
    if config.n_max == 0 {
        bail!("--n-max must be at least 1");
    }
    let loaded = load(chain)?;
    let pi = loaded.stationary()?;
    emit(out, &decay_table(&loaded.chain, &pi, config.n_max)?)?;
    Ok(ExitCode::SUCCESS)
}

fn run_zoo(args: &ZooArgs) -> Result<ExitCode> {
    let chain = generate(&args.recipe())?;
    emit(args.out.as_deref(), &chain_to_json(&chain)?)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CrossvalEntry {
    name: String,
    states: usize,
    reversible: bool,
    violations: Vec<String>,
    rates_coherent: Option<bool>,
}

#[derive(Serialize)]
struct CrossvalSummary {
    chains: usize,
    violated_chains: usize,
    entries: Vec<CrossvalEntry>,
}

fn random_recipe(index: usize, seed: u64) -> ZooRecipe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    let n = rng.random_range(2..=25);
    let chain_seed = rng.random();
    if index.is_multiple_of(2) {
        ZooRecipe::RandomDense { n, seed: chain_seed }
    } else {
        ZooRecipe::RandomReversible { n, seed: chain_seed }
    }
}

fn run_crossval(
    chain: Option<&Path>,
    random: Option<usize>,
    config: &ConfigArgs,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let config = config.resolve()?;
    config.validate()?;
    let mut chains = Vec::new();
    match (chain, random) {
        (Some(path), _) => {
            let loaded = load(path)?;
            let pi = loaded.stationary()?;
            chains.push((path.display().to_string(), loaded.chain, pi));
        }
        (None, Some(count)) => {
            for i in 0..count {
                let chain = generate(&random_recipe(i, config.seed))?;
                let pi = stationary(&chain)?;
                chains.push((format!("random_{i}"), chain, pi));
            }
        }
        (None, None) => bail!("give a chain file or --random COUNT"),
    }
    let mut entries = Vec::with_capacity(chains.len());
    for (name, chain, pi) in &chains {
        let report = cross_validate(chain, pi, &config)?;
        entries.push(CrossvalEntry {
            name: name.clone(),
            states: chain.len(),
            reversible: report.rate_coherence.is_some(),
            violations: report.violated_edges.iter().map(|e| format!("{} -> {}", e.from, e.to)).collect(),
            rates_coherent: report.rate_coherence.as_ref().map(|c| c.coherent),
        });
    }
    let violated_chains = entries.iter().filter(|e| !e.violations.is_empty()).count();
    let summary = CrossvalSummary { chains: entries.len(), violated_chains, entries };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    emit(out, &text)?;
    if violated_chains > 0 {
        eprintln!("{violated_chains} chain(s) with violated implications");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Analyze { chain, config, out } => run_analyze(chain, config, out.as_deref()),
        Command::Decay { chain, config, out } => run_decay(chain, config, out.as_deref()),
        Command::Zoo(args) => run_zoo(args),
        Command::Crossval { chain, random, config, out } => {
            run_crossval(chain.as_deref(), *random, config, out.as_deref())
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
