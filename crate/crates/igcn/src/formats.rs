//! CSV readers and writers for features, labels, edge lists and splits.
//!
//! Every table has a header row. Node-indexed tables start with a `node_id`
//! column holding each index in `0..m` exactly once (in any order). Reals are
//! written with Rust's shortest round-trip formatting so a write/read cycle
//! is lossless.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use igcn_core::{DenseMatrix, SparseAdjacency, SplitMask};

use crate::error::{csv_err, format_err, io_err, Result};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn parse<T: std::str::FromStr>(path: &Path, line: u64, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| format_err(path, format!("line {line}: cannot parse {field:?}")))
}

/// Places `(node_id, row)` records into a dense node-indexed vector.
fn by_node<T>(path: &Path, records: Vec<(usize, T)>) -> Result<Vec<T>> {
    let m = records.len();
    let mut slots: Vec<Option<T>> = (0..m).map(|_| None).collect();
    for (id, row) in records {
        if id >= m {
            return Err(format_err(path, format!("node_id {id} outside 0..{m}")));
        }
        if slots[id].replace(row).is_some() {
            return Err(format_err(path, format!("node_id {id} repeated")));
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("every id filled")).collect())
}

pub fn read_features(path: &Path) -> Result<DenseMatrix> {
    let mut rdr = reader(path)?;
    let cols = rdr.headers().map_err(csv_err(path))?.len().saturating_sub(1);
    if cols == 0 {
        return Err(format_err(path, "need node_id plus at least one feature column"));
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i as u64 + 2;
        let id = parse(path, line, &rec[0])?;
        let row = rec
            .iter()
            .skip(1)
            .map(|f| parse::<f64>(path, line, f))
            .collect::<Result<Vec<_>>>()?;
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(format_err(path, format!("line {line}: non-finite value {v}")));
        }
        records.push((id, row));
    }
    let rows = by_node(path, records)?;
    let m = rows.len();
    Ok(DenseMatrix::from_vec(m, cols, rows.concat())?)
}

pub fn write_features(path: &Path, x: &DenseMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["node_id".to_string()];
    header.extend((0..x.cols()).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for r in 0..x.rows() {
        let mut rec = vec![r.to_string()];
        rec.extend(x.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut rdr = reader(path)?;
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i as u64 + 2;
        if rec.len() != 2 {
            return Err(format_err(path, format!("line {line}: expected node_id,label")));
        }
        records.push((parse(path, line, &rec[0])?, parse(path, line, &rec[1])?));
    }
    by_node(path, records)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["node_id", "label"]).map_err(csv_err(path))?;
    for (j, l) in labels.iter().enumerate() {
        w.write_record([j.to_string(), l.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads `src,dst,weight` rows as an undirected graph over `num_nodes`
/// nodes: both orientations are stored, repeated pairs keep the largest
/// weight and self loops are dropped (they are added back uniformly later).
pub fn read_edges(path: &Path, num_nodes: usize) -> Result<SparseAdjacency> {
    let mut rdr = reader(path)?;
    let mut edges = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i as u64 + 2;
        if rec.len() != 3 {
            return Err(format_err(path, format!("line {line}: expected src,dst,weight")));
        }
        let a: usize = parse(path, line, &rec[0])?;
        let b: usize = parse(path, line, &rec[1])?;
        let w: f64 = parse(path, line, &rec[2])?;
        if a != b {
            edges.push((a, b, w));
        }
    }
    SparseAdjacency::from_undirected_edges(num_nodes, edges)
        .map_err(|e| format_err(path, e.to_string()))
}

/// Writes each undirected edge once, as `src < dst`.
pub fn write_edges(path: &Path, adj: &SparseAdjacency) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["src", "dst", "weight"]).map_err(csv_err(path))?;
    for (a, b, v) in adj.upper_edges() {
        w.write_record([a.to_string(), b.to_string(), v.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads `node_id,split` with split one of `train`, `val`, `test`. Nodes not
/// listed belong to no split.
pub fn read_split(path: &Path, num_nodes: usize) -> Result<SplitMask> {
    let mut rdr = reader(path)?;
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i as u64 + 2;
        if rec.len() != 2 {
            return Err(format_err(path, format!("line {line}: expected node_id,split")));
        }
        let id: usize = parse(path, line, &rec[0])?;
        match &rec[1] {
            "train" => train.push(id),
            "val" => val.push(id),
            "test" => test.push(id),
            other => return Err(format_err(path, format!("line {line}: unknown split {other:?}"))),
        }
    }
    SplitMask::new(train, val, test, num_nodes).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_split(path: &Path, masks: &SplitMask) -> Result<()> {
    let mut rows: Vec<(usize, &str)> = masks
        .train
        .iter()
        .map(|&j| (j, "train"))
        .chain(masks.val.iter().map(|&j| (j, "val")))
        .chain(masks.test.iter().map(|&j| (j, "test")))
        .collect();
    rows.sort_unstable();
    let mut w = writer(path)?;
    w.write_record(["node_id", "split"]).map_err(csv_err(path))?;
    for (j, s) in rows {
        w.write_record([j.to_string().as_str(), s])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes a headered CSV of preformatted string cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
