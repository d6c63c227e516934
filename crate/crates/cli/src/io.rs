use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects the files a command writes so the manifest can list them.
pub struct OutDir {
    root: PathBuf,
    artifacts: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    fn claim(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.claim(name);
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.claim(name);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    /// Header row followed by `rows`; every field is written verbatim.
    pub fn write_csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.claim(name);
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.write_record(header)
            .map_err(|e| CliError::Io(e.to_string()))?;
        for row in rows {
            w.write_record(&row)
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))
}

/// Filter given as a JSON array of numbers.
pub fn read_filter(path: &Path) -> Result<Vec<f64>, CliError> {
    serde_json::from_str(&read_input(path)?).map_err(|e| {
        CliError::Usage(format!(
            "{}: expected a JSON array of numbers: {e}",
            path.display()
        ))
    })
}

/// Dataset CSV with columns `label, x0, x1, ...`.
pub fn read_dataset(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let (mut points, mut labels) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("{} row {}: {e}", path.display(), i + 2)))?;
        let (label, x) = vals.split_first().ok_or_else(|| {
            CliError::Usage(format!("{} row {}: empty record", path.display(), i + 2))
        })?;
        labels.push(*label);
        points.push(x.to_vec());
    }
    Ok((points, labels))
}

pub fn dataset_rows(points: &[Vec<f64>], labels: &[f64]) -> (Vec<String>, Vec<Vec<String>>) {
    let dim = points.first().map_or(0, Vec::len);
    let header = std::iter::once("label".to_string())
        .chain((0..dim).map(|i| format!("x{i}")))
        .collect();
    let rows = points
        .iter()
        .zip(labels)
        .map(|(x, y)| {
            std::iter::once(fmt_f64(*y))
                .chain(x.iter().map(|v| fmt_f64(*v)))
                .collect()
        })
        .collect();
    (header, rows)
}
