//! Certify or refute geometric ergodicity of finite-state Markov chains.
//!
//! A chain is checked against a family of thirty-three equivalent
//! characterizations of geometric ergodicity, grouped by the norm or
//! mechanism they use: total-variation decay, drift and small sets,
//! return-time generating functions, weighted-supremum operator norms,
//! spectral radii, and (for reversible chains) `L^2(pi)` spectral bounds.
//! Each characterization yields a [`conditions::Verdict`] backed by a
//! re-checkable certificate, and the implication graph between them is used
//! as a consistency check on the numerics.

#![allow(clippy::needless_range_loop)]

pub mod chain;
pub mod conditions;
pub mod config;
pub mod drift;
pub mod error;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod num;
pub mod report;
pub mod spectral;
pub mod zoo;

pub use chain::{stationary, structure, ChainSpec, Matrix, StationaryDist, StructureReport};
pub use conditions::{cross_validate, ConditionId, ConsistencyReport, Verdict};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use norms::{SignedMeasure, WeightFunction};
pub use zoo::{generate, ZooRecipe};
