//! JSON-lines dataset files.
//!
//! Line 1 is a header `{"format_version":1,"n":..,"labeled":..,"meta":{..}}`; each
//! following line is one instance `{"k","gains","noise_power","p_max","label"}`
//! with `gains` row-major and `label` omitted for unlabelled data.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rrm_core::netgen::DatasetMeta;
use rrm_core::{Dataset, NetworkInstance};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub const DATASET_FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u64,
    n: usize,
    labeled: bool,
    meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    k: usize,
    gains: Vec<f64>,
    noise_power: f64,
    p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Vec<f64>>,
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> std::io::Result<()> {
    let header = Header { format_version: DATASET_FORMAT_VERSION, n: dataset.len(), labeled: dataset.is_labeled(), meta: dataset.meta.clone() };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for (i, inst) in dataset.instances.iter().enumerate() {
        let rec = Record {
            k: inst.k,
            gains: inst.gains.clone(),
            noise_power: inst.noise_power,
            p_max: inst.p_max,
            label: dataset.labels.as_ref().map(|l| l[i].clone()),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    write_dataset(dataset, BufWriter::new(file)).map_err(|e| LabError::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| LabError::io(path, e))?;
    read_dataset(BufReader::new(file), path)
}

/// Parses a whole file; any error discards what was read so far.
pub fn read_dataset<R: BufRead>(r: R, path: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| LabError::Parse { path: path.to_path_buf(), line, message };
    let mut lines = r.lines();
    let first = match lines.next() {
        Some(l) => l.map_err(|e| LabError::io(path, e))?,
        None => return Err(parse_err(1, "missing header line".into())),
    };
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
    match raw.get("format_version").and_then(|v| v.as_u64()) {
        Some(DATASET_FORMAT_VERSION) => {}
        Some(found) => {
            return Err(LabError::Version { path: path.to_path_buf(), found, expected: DATASET_FORMAT_VERSION })
        }
        None => return Err(parse_err(1, "header has no format_version".into())),
    }
    let header: Header = serde_json::from_value(raw).map_err(|e| parse_err(1, e.to_string()))?;

    let mut instances = Vec::with_capacity(header.n);
    let mut labels = Vec::with_capacity(header.n);
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line.map_err(|e| LabError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        if rec.label.is_some() != header.labeled {
            return Err(parse_err(lineno, format!("header says labeled = {} but this record disagrees", header.labeled)));
        }
        let inst = NetworkInstance::new(rec.k, rec.gains, rec.noise_power, rec.p_max)
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        instances.push(inst);
        if let Some(l) = rec.label {
            labels.push(l);
        }
    }
    if instances.len() != header.n {
        return Err(parse_err(
            instances.len() + 2,
            format!("expected {} records, found {} (truncated file?)", header.n, instances.len()),
        ));
    }
    let labels = header.labeled.then_some(labels);
    Dataset::new(instances, labels, header.meta).map_err(|e| parse_err(1, e.to_string()))
}
