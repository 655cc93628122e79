//! Output files, all written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use afm_core::analysis::Trajectory;
use afm_core::problems::Dataset;
use afm_core::Vector;
use serde::Serialize;

use crate::error::{CliError, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// One snapshot per line.
pub fn trajectory_jsonl(traj: &Trajectory) -> String {
    let mut out = String::new();
    for s in traj.snapshots() {
        out.push_str(&serde_json::to_string(s).expect("snapshots serialize"));
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_atomic(path, trajectory_jsonl(traj).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

/// Reads a headerless CSV of `features..., label` rows. Labels must be
/// nonnegative integers.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::config(format!("{}: {other:?}", path.display())),
        })?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let bad =
            |what: &str| CliError::config(format!("{} row {}: {what}", path.display(), line + 1));
        let record = record.map_err(|e| bad(&e.to_string()))?;
        if record.len() < 2 {
            return Err(bad("need at least one feature and a label"));
        }
        let values: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| bad(&format!("`{f}` is not a number")))
            })
            .collect::<Result<_>>()?;
        let (label, row) = values.split_last().expect("at least two fields");
        if !(*label >= 0.0) || label.fract() != 0.0 {
            return Err(bad("label must be a nonnegative integer"));
        }
        features.push(Vector::from(row.to_vec()));
        labels.push(*label as usize);
    }
    Ok(Dataset::new(features, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn dataset_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "0.5, 1.0, 0\n-1.5, 2.0, 1\n").unwrap();
        let d = load_dataset(&path).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels(), [0, 1]);
        fs::write(&path, "0.5,1.0,0.5\n").unwrap();
        assert_eq!(load_dataset(&path).unwrap_err().exit_code(), 2);
        assert_eq!(
            load_dataset(&dir.path().join("missing.csv"))
                .unwrap_err()
                .exit_code(),
            3
        );
    }
}
