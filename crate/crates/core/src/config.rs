//! Run configuration shared by the library drivers and the command line.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::conditions::ConditionId;
use crate::error::{Error, Result};

/// Which conditions a run evaluates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ConditionSelection {
    #[default]
    All,
    Only(BTreeSet<ConditionId>),
}

impl ConditionSelection {
    pub fn contains(&self, id: ConditionId) -> bool {
        match self {
            Self::All => true,
            Self::Only(set) => set.contains(&id),
        }
    }
}

impl FromStr for ConditionSelection {
    type Err = Error;

    /// `"all"` or a comma-separated list of roman numerals or labels.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::All);
        }
        let set =
            s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<BTreeSet<ConditionId>>>()?;
        if set.is_empty() {
            return Err(Error::BadParameters("empty condition list".into()));
        }
        Ok(Self::Only(set))
    }
}

impl fmt::Display for ConditionSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::All => f.write_str("all"),
            Self::Only(set) => {
                let names: Vec<&str> = set.iter().map(|c| c.roman()).collect();
                f.write_str(&names.join(","))
            }
        }
    }
}

impl Serialize for ConditionSelection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConditionSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Number of steps tabulated for every decay sequence.
    pub n_max: usize,
    /// Moment orders used by the conditions quantified over all `j`.
    pub j_set: Vec<u32>,
    /// Exponents used by the conditions quantified over `L^p(pi)`.
    pub p_set: Vec<f64>,
    /// Agreement required between fitted rates and the eigenvalue oracle.
    pub rate_tol: f64,
    pub conditions: ConditionSelection,
    /// Seed for the random probability measures in the test battery.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_max: 256,
            j_set: vec![1, 2, 3, 5],
            p_set: vec![1.5, 2.0, 4.0],
            rate_tol: 1e-3,
            conditions: ConditionSelection::All,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 8 {
            return Err(Error::BadParameters(format!("n_max must be at least 8, got {}", self.n_max)));
        }
        if self.j_set.is_empty() || self.j_set.contains(&0) {
            return Err(Error::BadParameters("j_set must be a nonempty list of positive integers".into()));
        }
        if self.p_set.is_empty() || self.p_set.iter().any(|&p| !p.is_finite() || p <= 1.0) {
            return Err(Error::BadParameters("p_set must be a nonempty list of finite values above 1".into()));
        }
        if !self.rate_tol.is_finite() || self.rate_tol <= 0.0 {
            return Err(Error::BadParameters("rate_tol must be positive".into()));
        }
        Ok(())
    }
}
