//! Ensemble CSV files and JSON sidecars.
//!
//! CSV columns are `replica_id,t,value`, one row per replica and grid time,
//! with values written to 17 significant digits.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::ReplicaEnsemble;

pub const CSV_HEADER: &str = "replica_id,t,value";

/// Library version recorded in every metadata file.
pub const VERSION: &str = concat!("hpl ", env!("CARGO_PKG_VERSION"));

pub fn write_ensemble_csv(path: &Path, ens: &ReplicaEnsemble) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for (id, row) in ens.replica_ids.iter().zip(&ens.rows) {
        for (t, v) in ens.t_grid.iter().zip(row) {
            writeln!(w, "{id},{t},{v:.16e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_ensemble_csv`]. Replicas keep their order
/// of first appearance and must all carry the same grid.
pub fn read_ensemble_csv(path: &Path) -> Result<ReplicaEnsemble> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CSV_HEADER {
        return Err(Error::Format(format!("{}: expected header `{CSV_HEADER}`", path.display())));
    }
    let mut ids: Vec<u64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut grids: Vec<Vec<f64>> = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("{}: malformed line {}", path.display(), n + 2));
        let mut fields = line.split(',');
        let (Some(id), Some(t), Some(v), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
            return Err(bad());
        };
        let id: u64 = id.trim().parse().map_err(|_| bad())?;
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        if ids.last() != Some(&id) {
            if ids.contains(&id) {
                return Err(Error::Format(format!("{}: rows of replica {id} are not contiguous", path.display())));
            }
            ids.push(id);
            rows.push(Vec::new());
            grids.push(Vec::new());
        }
        rows.last_mut().expect("pushed above").push(v);
        grids.last_mut().expect("pushed above").push(t);
    }
    let Some(t_grid) = grids.first().cloned() else {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    };
    if grids.iter().any(|g| *g != t_grid) {
        return Err(Error::Format(format!("{}: replicas disagree on the time grid", path.display())));
    }
    ReplicaEnsemble::with_ids(t_grid, ids, rows)
}

/// Sidecar describing how an output was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub replicas: usize,
    /// The full validated configuration.
    pub config: serde_json::Value,
    /// Derived quantities such as the sampling window.
    #[serde(default)]
    pub derived: serde_json::Map<String, serde_json::Value>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let ens = ReplicaEnsemble::with_ids(
            vec![0.25, 0.5, 1.0],
            vec![3, 7],
            vec![vec![0.1, -1.0 / 3.0, 1e-300], vec![f64::MAX, 0.0, -2.5e17]],
        )
        .unwrap();
        write_ensemble_csv(&path, &ens).unwrap();
        assert_eq!(read_ensemble_csv(&path).unwrap(), ens);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert_eq!(text.lines().nth(1).unwrap(), "3,0.25,1.0000000000000001e-1");
    }

    #[test]
    fn malformed_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "replica_id,t,value\n0,0.5,1.0\n0,1.0\n").unwrap();
        assert!(matches!(read_ensemble_csv(&path), Err(Error::Format(_))));
        fs::write(&path, "replica_id,t,value\n0,0.5,1\n1,0.5,1\n0,1,1\n").unwrap();
        assert!(read_ensemble_csv(&path).is_err());
        fs::write(&path, "id,t,value\n").unwrap();
        assert!(read_ensemble_csv(&path).is_err());
        assert!(matches!(read_ensemble_csv(&dir.path().join("missing.csv")), Err(Error::Io(_))));
    }

    #[test]
    fn metadata_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let meta = RunMetadata {
            version: VERSION.into(),
            command: "simulate".into(),
            seed: 42,
            replicas: 10,
            config: serde_json::json!({"kind": "fbm", "hurst": 0.7}),
            derived: Default::default(),
        };
        write_json(&path, &meta).unwrap();
        assert_eq!(read_json::<RunMetadata>(&path).unwrap(), meta);
    }
}
