use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "completed.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Diverged,
    Timeout,
}

/// One (experiment, split, p, model, K, run) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub split: String,
    pub p: f64,
    pub model: String,
    pub rank: usize,
    pub run: usize,
    /// Selected configuration, e.g. `ComplEx` or `TransE-L1`.
    pub selected: Option<String>,
    pub lambda: Option<f64>,
    pub valid_ap: Option<f64>,
    pub test_ap: Option<f64>,
    pub oracle_ap: Option<f64>,
    pub seconds: f64,
    pub seed: u64,
    pub status: CellStatus,
}

impl ResultRow {
    pub fn key(&self) -> String {
        cell_key(&self.experiment, &self.split, self.p, &self.model, self.rank, self.run)
    }
}

pub fn cell_key(experiment: &str, split: &str, p: f64, model: &str, rank: usize, run: usize) -> String {
    format!("{experiment}|{split}|{p}|{model}|{rank}|{run}")
}

pub fn read_manifest(dir: &Path) -> Result<HashSet<String>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(HashSet::new());
    }
    let mut keys = HashSet::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            keys.insert(line.trim().to_owned());
        }
    }
    Ok(keys)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line: 0, message: format!("{other:?}") },
    }
}

/// Appends rows to the results file, then their keys to the manifest, so a
/// key in the manifest always has its row on disk.
pub struct ResultWriter {
    results: csv::Writer<File>,
    manifest: File,
}

impl ResultWriter {
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(RESULTS_FILE);
        let fresh = !path.exists() || std::fs::metadata(&path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let results = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        let manifest = OpenOptions::new().create(true).append(true).open(dir.join(MANIFEST_FILE))?;
        Ok(ResultWriter { results, manifest })
    }

    pub fn append(&mut self, rows: &[ResultRow]) -> Result<()> {
        for r in rows {
            self.results.serialize(r).map_err(csv_err)?;
        }
        self.results.flush()?;
        for r in rows {
            writeln!(self.manifest, "{}", r.key())?;
        }
        self.manifest.flush()?;
        Ok(())
    }
}
