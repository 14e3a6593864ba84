//! On-disk formats: prototype sets and manifests as JSON, activations and
//! trajectories as CSV.
//!
//! Floats are written in their shortest round-trip representation, so
//! reading back a file reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use music_core::music::Trajectory;
use music_core::{Lattice, PrototypeSet, Topology};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// JSON layout of a trained map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrototypeFile {
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    #[serde(rename = "D")]
    pub dim: usize,
    /// One prototype per unit, row-major over the lattice.
    pub weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Option<u32>>>,
}

impl PrototypeFile {
    pub fn new(protos: &PrototypeSet, labels: Option<Vec<Option<u32>>>) -> Self {
        let lattice = protos.lattice();
        Self {
            rows: lattice.rows(),
            cols: lattice.cols(),
            topology: lattice.topology(),
            dim: protos.dim(),
            weights: protos.to_rows(),
            labels,
        }
    }

    pub fn to_set(&self) -> Result<PrototypeSet> {
        let lattice = Lattice::new(self.rows, self.cols, self.topology)?;
        if let Some(labels) = &self.labels {
            if labels.len() != lattice.len() {
                return Err(LabError::malformed(
                    "prototype file",
                    format!("{} labels for {} units", labels.len(), lattice.len()),
                ));
            }
        }
        let protos = PrototypeSet::from_rows(lattice, &self.weights)?;
        if protos.dim() != self.dim {
            return Err(LabError::malformed(
                "prototype file",
                format!(
                    "declared D={} but rows have length {}",
                    self.dim,
                    protos.dim()
                ),
            ));
        }
        Ok(protos)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| LabError::io(path, e))?;
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| LabError::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn parse_f64(field: &str, what: &'static str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| LabError::malformed(what, format!("not a number: {field:?}")))
}

fn parse_usize(field: &str, what: &'static str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| LabError::malformed(what, format!("not an index: {field:?}")))
}

/// Serializes flat records, one row each, under a header taken from the
/// field names.
pub fn write_records<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `write`.
pub fn write_file(path: &Path, write: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| LabError::io(path, e))?;
    write(BufWriter::new(file))
}

pub fn open_file(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| LabError::io(path, e))?,
    ))
}

/// Numeric rows under a `{prefix}0,{prefix}1,...` header.
pub fn write_columns<W: Write>(w: W, prefix: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = rows.first().map_or(0, Vec::len);
    out.write_record((0..n).map(|j| format!("{prefix}{j}")))?;
    for row in rows {
        out.write_record(row.iter().map(f64::to_string))?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One activation vector per row under an `a0,a1,...` header.
pub fn write_activations<W: Write>(w: W, rows: &[Vec<f64>]) -> Result<()> {
    write_columns(w, "a", rows)
}

pub fn read_activations<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(
            record
                .iter()
                .map(|f| parse_f64(f, "activation CSV"))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(rows)
}

/// Trajectory CSV: one row per state with columns
/// `step, z0..z{D-1}, bmu, dz_norm, selected_targets`.
///
/// `dz_norm` and `selected_targets` describe the step that led into the
/// state, so they are `0` and empty on the first row. Targets are joined
/// with `;`.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dim = traj.states[0].len();
    let mut header = vec!["step".to_string()];
    header.extend((0..dim).map(|k| format!("z{k}")));
    header.extend(["bmu", "dz_norm", "selected_targets"].map(String::from));
    out.write_record(&header)?;
    for (t, (z, bmu)) in traj.states.iter().zip(&traj.bmus).enumerate() {
        let (dz_norm, targets) = match t.checked_sub(1).map(|i| &traj.steps[i]) {
            Some(step) => (
                step.norm(),
                step.selected_targets
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
            None => (0.0, String::new()),
        };
        let mut record = vec![t.to_string()];
        record.extend(z.iter().map(f64::to_string));
        record.push(bmu.to_string());
        record.push(dz_norm.to_string());
        record.push(targets);
        out.write_record(&record)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Columns of a trajectory CSV, enough to recompute every metric.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryTable {
    pub states: Vec<Vec<f64>>,
    pub bmus: Vec<usize>,
    pub dz_norms: Vec<f64>,
    pub selected_targets: Vec<Vec<usize>>,
}

pub fn read_trajectory<R: Read>(r: R) -> Result<TrajectoryTable> {
    const WHAT: &str = "trajectory CSV";
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() < 4 || &header[0] != "step" || &header[header.len() - 3] != "bmu" {
        return Err(LabError::malformed(WHAT, "unexpected header"));
    }
    let dim = header.len() - 4;
    let mut table = TrajectoryTable::default();
    for (t, record) in rdr.records().enumerate() {
        let record = record?;
        if parse_usize(&record[0], WHAT)? != t {
            return Err(LabError::malformed(
                WHAT,
                format!("row {t} is out of order"),
            ));
        }
        table.states.push(
            (1..=dim)
                .map(|k| parse_f64(&record[k], WHAT))
                .collect::<Result<_>>()?,
        );
        table.bmus.push(parse_usize(&record[dim + 1], WHAT)?);
        table.dz_norms.push(parse_f64(&record[dim + 2], WHAT)?);
        let targets = &record[dim + 3];
        table.selected_targets.push(if targets.is_empty() {
            Vec::new()
        } else {
            targets
                .split(';')
                .map(|s| parse_usize(s, WHAT))
                .collect::<Result<_>>()?
        });
    }
    if table.states.is_empty() {
        return Err(LabError::malformed(WHAT, "no rows"));
    }
    Ok(table)
}

/// Provenance written next to every experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config)?,
        })
    }
}
