//! Chain files: JSON `{"states", "P", "pi"?}` or a bare CSV matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{stationary, validate_chain, ChainSpec, StationaryDist, DEFAULT_ROW_TOL};
use crate::error::{Error, Result};

/// Tolerance for a stationary distribution supplied in a chain file.
pub const SUPPLIED_PI_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub states: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<f64>>,
}

impl ChainFile {
    pub fn from_chain(chain: &ChainSpec) -> Self {
        Self { states: chain.states().to_vec(), p: chain.rows(), pi: None }
    }
}

/// A chain together with the stationary distribution it was loaded with,
/// if the file supplied one.
#[derive(Debug, Clone)]
pub struct LoadedChain {
    pub chain: ChainSpec,
    pub supplied_pi: Option<StationaryDist>,
}

impl LoadedChain {
    /// The supplied distribution, or the solved one.
    pub fn stationary(&self) -> Result<StationaryDist> {
        match &self.supplied_pi {
            Some(pi) => Ok(pi.clone()),
            None => stationary(&self.chain),
        }
    }
}

pub fn parse_chain_json(text: &str) -> Result<LoadedChain> {
    let file: ChainFile = serde_json::from_str(text)?;
    let chain = validate_chain(&file.p, file.states, DEFAULT_ROW_TOL)?;
    let supplied_pi = file.pi.map(|pi| StationaryDist::checked(pi, &chain, SUPPLIED_PI_TOL)).transpose()?;
    Ok(LoadedChain { chain, supplied_pi })
}

pub fn parse_chain_csv(text: &str) -> Result<LoadedChain> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}: `{}` is not a number", i + 1, t.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty matrix".into()));
    }
    let labels = (0..rows.len()).map(|i| i.to_string()).collect();
    let chain = validate_chain(&rows, labels, DEFAULT_ROW_TOL)?;
    Ok(LoadedChain { chain, supplied_pi: None })
}

/// Loads a chain, choosing the format from the extension (`.csv` is CSV,
/// anything else JSON).
pub fn load_chain(path: &Path) -> Result<LoadedChain> {
    let text = fs::read_to_string(path)?;
    let is_csv = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_chain_csv(&text)
    } else {
        parse_chain_json(&text)
    }
}

/// Pretty-printed chain JSON with a trailing newline.
pub fn chain_to_json(chain: &ChainSpec) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&ChainFile::from_chain(chain))?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to a sibling temporary file, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Format(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{"states":["a","b"],"P":[[0.7,0.3],[0.2,0.8]]}"#;
        let loaded = parse_chain_json(text).unwrap();
        assert_eq!(loaded.chain.states(), &["a".to_string(), "b".to_string()]);
        let again = parse_chain_json(&chain_to_json(&loaded.chain).unwrap()).unwrap();
        assert_eq!(again.chain, loaded.chain);
    }

    #[test]
    fn supplied_pi_is_checked() {
        let good = r#"{"states":["0","1"],"P":[[0.7,0.3],[0.2,0.8]],"pi":[0.4,0.6]}"#;
        assert!(parse_chain_json(good).unwrap().supplied_pi.is_some());
        let bad = r#"{"states":["0","1"],"P":[[0.7,0.3],[0.2,0.8]],"pi":[0.5,0.5]}"#;
        assert!(matches!(parse_chain_json(bad), Err(Error::BadStationary(_))));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_chain_json("{not json"), Err(Error::Json(_))));
        assert!(matches!(parse_chain_json(r#"{"states":["0","0"],"P":[[1,0],[0,1]]}"#), Err(Error::DuplicateLabel(_))));
        assert!(matches!(parse_chain_csv("0.5,x\n"), Err(Error::Format(_))));
        assert!(matches!(parse_chain_csv(""), Err(Error::Format(_))));
    }

    #[test]
    fn csv_matrix() {
        let loaded = parse_chain_csv("0.7, 0.3\n0.2, 0.8\n").unwrap();
        assert_eq!(loaded.chain.len(), 2);
        assert_eq!(loaded.chain.states()[1], "1");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
