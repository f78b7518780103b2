//! CSV/JSON output and result bundles.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a value
//! always prints the same way and rereading a file recovers it exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continuation::{Branch, ScalingRow};
use crate::difm::{FiringEvent, LevelSample, NetworkState, NetworkTrajectory};
use crate::error::{Error, Result};
use crate::params::Config;
use crate::stability::StabilityReport;
use crate::wave::ProfileSample;

/// A rectangular table of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Formats a float; non-finite values become empty cells.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// Reads a CSV with a header row into a [`Table`].
pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(Table { header, rows })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn events_table(events: &[FiringEvent], positions: &[f64]) -> Table {
    let mut t = Table::new(&["t", "neuron", "x", "ordinal"]);
    for e in events {
        t.push(vec![num(e.time), e.neuron.to_string(), num(positions[e.neuron]), e.ordinal.to_string()]);
    }
    t
}

pub fn levelset_table(samples: &[LevelSample]) -> Table {
    let mut t = Table::new(&["t", "z"]);
    for s in samples {
        t.push(vec![num(s.t), opt(s.z)]);
    }
    t
}

/// Long format: one row per neuron and snapshot.
pub fn snapshots_table(snapshots: &[NetworkState], positions: &[f64]) -> Table {
    let mut t = Table::new(&["t", "x", "v", "s"]);
    for snap in snapshots {
        for (i, x) in positions.iter().enumerate() {
            t.push(vec![num(snap.t), num(*x), num(snap.v[i]), num(snap.s[i])]);
        }
    }
    t
}

pub fn trajectory_positions(traj: &NetworkTrajectory) -> Vec<f64> {
    (0..traj.n).map(|i| traj.position(i)).collect()
}

pub fn profile_table(samples: &[ProfileSample]) -> Table {
    let mut t = Table::new(&["xi", "nu", "sigma"]);
    for s in samples {
        t.push(vec![num(s.xi), num(s.nu), num(s.sigma)]);
    }
    t
}

pub fn roots_table(report: &StabilityReport) -> Table {
    let mut t = Table::new(&["re", "im", "residual"]);
    for r in &report.roots {
        t.push(vec![num(r.lambda.re), num(r.lambda.im), num(r.residual)]);
    }
    t
}

/// One row per branch point: `β, c, T_1..T_m`, validation and stability summary.
pub fn branch_table(branch: &Branch) -> Table {
    let m = branch.m;
    let mut header: Vec<String> = vec!["beta".into(), "c".into()];
    header.extend((1..=m).map(|j| format!("T{j}")));
    header.extend(["validated", "leading_re", "leading_im", "unstable_roots"].map(String::from));
    let mut t = Table { header, rows: Vec::new() };
    for p in &branch.points {
        let mut row = vec![num(p.beta), num(p.wave.c)];
        row.extend(p.wave.t.iter().map(|x| num(*x)));
        row.push(p.validated.to_string());
        match &p.stability {
            Some(s) => {
                let lead = s.leading.as_ref().map(|r| r.lambda);
                row.push(opt(lead.map(|z| z.re)));
                row.push(opt(lead.map(|z| z.im)));
                row.push(crate::continuation::unstable_count(s).to_string());
            }
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        t.rows.push(row);
    }
    t
}

pub fn scaling_table(rows: &[ScalingRow]) -> Table {
    let mut t = Table::new(&["m", "beta_g", "c", "T_m", "width", "T_G"]);
    for r in rows {
        t.push(vec![r.m.to_string(), num(r.beta_g), num(r.c), num(r.t_m), num(r.width), num(r.t_g)]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub package: String,
    pub version: String,
    pub created_unix: u64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory that records every file written into it.
#[derive(Debug)]
pub struct Bundle {
    dir: PathBuf,
    files: Vec<String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.record(name);
        table.write(&path)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.record(name);
        write_json(&path, value)
    }

    pub fn config(&mut self, config: &Config) -> Result<()> {
        let path = self.record("config.toml");
        fs::write(path, config.to_toml_string())?;
        Ok(())
    }

    /// Writes `manifest.json` with checksums of every recorded file.
    pub fn finish(self, experiment: &str) -> Result<Manifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let bytes = fs::read(self.dir.join(name))?;
            files.push(FileEntry { path: name.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        }
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let manifest = Manifest {
            experiment: experiment.to_string(),
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix,
            files,
        };
        write_json(&self.dir.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_through_text() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn table_bytes_are_stable() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.5), "x,y".into()]);
        assert_eq!(t.to_bytes().unwrap(), b"a,b\n0.5,\"x,y\"\n");
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
