//! Long-format CSV series and the JSON run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{LedgerEntry, MassLedger, NetworkRun, PipeSeries};
use crate::network::Network;
use crate::pipe::Side;

pub const CSV_HEADER: [&str; 5] = ["t", "entity", "id", "field", "value"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `t,entity,id,field,value` rows, flushed at the end of every sample so a
/// partial run leaves readable output.
pub struct SeriesWriter {
    path: PathBuf,
    out: csv::Writer<BufWriter<File>>,
}

impl SeriesWriter {
    /// Creates the file and writes the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut out = csv::Writer::from_writer(BufWriter::new(file));
        out.write_record(CSV_HEADER).map_err(|e| csv_err(&path, e))?;
        let mut w = SeriesWriter { path, out };
        w.flush()?;
        Ok(w)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn row(&mut self, t: f64, entity: &str, id: &str, field: &str, value: f64) -> Result<()> {
        self.out
            .write_record([t.to_string().as_str(), entity, id, field, value.to_string().as_str()])
            .map_err(|e| csv_err(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(io_err(&self.path))
    }

    fn ledger_rows(&mut self, e: &LedgerEntry) -> Result<()> {
        self.row(e.t, "system", "network", "mass", e.mass)?;
        self.row(e.t, "system", "network", "throughput", e.throughput)?;
        self.row(e.t, "system", "network", "discrepancy", e.discrepancy)
    }

    /// Node pressures and withdrawals, pipe end flows and the ledger row.
    pub fn network_sample(&mut self, t: f64, net: &Network, ledger: &LedgerEntry) -> Result<()> {
        for (k, node) in net.nodes.iter().enumerate() {
            self.row(t, "node", &node.id, "pressure", net.node_pressure[k])?;
            self.row(t, "node", &node.id, "outflow", net.node_outflow[k])?;
        }
        for pipe in &net.pipes {
            self.row(t, "pipe", &pipe.label, "flow_in", pipe.end_mass_flow(Side::Left))?;
            self.row(t, "pipe", &pipe.label, "flow_out", pipe.end_mass_flow(Side::Right))?;
        }
        self.ledger_rows(ledger)?;
        self.flush()
    }

    /// A finished network run, row for row as [`network_sample`](Self::network_sample) writes it.
    pub fn network_run(&mut self, run: &NetworkRun) -> Result<()> {
        let s = &run.series;
        for (k, &t) in s.t.iter().enumerate() {
            for (n, id) in s.node_ids.iter().enumerate() {
                self.row(t, "node", id, "pressure", s.node_pressure[k][n])?;
                self.row(t, "node", id, "outflow", s.node_outflow[k][n])?;
            }
            for (p, id) in s.pipe_ids.iter().enumerate() {
                self.row(t, "pipe", id, "flow_in", s.inlet_flow[k][p])?;
                self.row(t, "pipe", id, "flow_out", s.outlet_flow[k][p])?;
            }
            self.ledger_rows(&run.ledger.entries[k])?;
            self.flush()?;
        }
        Ok(())
    }

    /// Boundary series of a single-pipe run.
    pub fn pipe_series(&mut self, s: &PipeSeries) -> Result<()> {
        for (k, &t) in s.t.iter().enumerate() {
            for (id, end) in [("left", &s.left), ("right", &s.right)] {
                self.row(t, "pipe_end", id, "pressure", end.p[k])?;
                self.row(t, "pipe_end", id, "density", end.rho[k])?;
                self.row(t, "pipe_end", id, "flux", end.phi[k])?;
                self.row(t, "pipe_end", id, "velocity", end.v[k])?;
            }
            self.ledger_rows(&s.ledger.entries[k])?;
            self.flush()?;
        }
        Ok(())
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Run metadata written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config_sha: String,
    pub steps: u64,
    pub max_ledger_discrepancy_kg: f64,
    pub wall_seconds: f64,
    /// Scenario-specific results (rates, checks, ...).
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunSummary {
    pub fn new(config_sha: String, steps: u64, ledger: Option<&MassLedger>, wall_seconds: f64) -> Self {
        RunSummary {
            config_sha,
            steps,
            max_ledger_discrepancy_kg: ledger.map_or(0.0, MassLedger::max_abs_discrepancy),
            wall_seconds,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.extra.insert(key.to_string(), v);
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.write_all(b"\n").map_err(io_err(path))
}

/// Hex SHA-256 of the bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct CsvRow {
    pub t: f64,
    pub entity: String,
    pub id: String,
    pub field: String,
    pub value: f64,
}

/// Reads a series file back.
pub fn read_series(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| csv_err(path, e))).collect()
}
