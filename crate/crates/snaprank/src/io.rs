//! On-disk formats: tab-separated edge lists, attribute CSV, and the
//! line-delimited JSON snapshot manifest.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph, GraphError, Snapshot};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

type Result<T> = std::result::Result<T, IoError>;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a tab-separated edge list: `src<TAB>dst<TAB>weight[<TAB>timestamp]`.
/// Blank lines and lines starting with `#` are skipped; the timestamp
/// column is optional per row.
pub fn read_edge_list(path: &Path) -> Result<Vec<Edge>> {
    let file = std::fs::File::open(path)?;
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let src: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad src: {e}")))?;
        let dst: usize = fields[1]
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad dst: {e}")))?;
        let weight: f64 = fields[2]
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad weight: {e}")))?;
        if !weight.is_finite() || weight <= 0.0 {
            return Err(parse_err(path, lineno, format!("weight {weight} must be positive")));
        }
        let timestamp: Option<i64> = if fields.len() == 4 {
            Some(
                fields[3]
                    .parse()
                    .map_err(|e| parse_err(path, lineno, format!("bad timestamp: {e}")))?,
            )
        } else {
            None
        };
        edges.push(Edge { src, dst, weight, timestamp });
    }
    Ok(edges)
}

pub fn write_edge_list(path: &Path, edges: &[Edge]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "# src\tdst\tweight\ttimestamp")?;
    for e in edges {
        match e.timestamp {
            Some(t) => writeln!(out, "{}\t{}\t{}\t{}", e.src, e.dst, e.weight, t)?,
            None => writeln!(out, "{}\t{}\t{}", e.src, e.dst, e.weight)?,
        }
    }
    Ok(())
}

/// Reads a comma-separated attribute matrix, one row per vertex in vertex-id
/// order. `has_header` skips the first line.
pub fn read_attributes(path: &Path, has_header: bool) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if has_header && i == 0 {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(path, lineno, format!("bad attribute: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, "attribute must be finite"));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_attributes(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// One manifest record. `label` is absent for unlabeled pools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub vertex_ids: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<bool>,
}

/// Reads a line-delimited JSON snapshot manifest and materializes each
/// entry against the given graph.
pub fn read_manifest(path: &Path, graph: &Graph) -> Result<Vec<Snapshot>> {
    let file = std::fs::File::open(path)?;
    let mut snapshots = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, lineno, format!("bad manifest record: {e}")))?;
        let mut snap = graph.induced_snapshot(entry.id, entry.vertex_ids)?;
        snap.label = entry.label;
        snapshots.push(snap);
    }
    Ok(snapshots)
}

pub fn write_manifest(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut out = std::fs::File::create(path)?;
    for s in snapshots {
        let entry = ManifestEntry {
            id: s.id.clone(),
            vertex_ids: s.vertices().to_vec(),
            label: s.label,
        };
        writeln!(out, "{}", serde_json::to_string(&entry).expect("serializable"))?;
    }
    Ok(())
}

/// Provenance sidecar for forged corpora: snapshot id → human-readable
/// origin tag.
pub fn write_provenance(path: &Path, entries: &HashMap<String, String>) -> Result<()> {
    let mut sorted: Vec<(&String, &String)> = entries.iter().collect();
    sorted.sort();
    let mut out = std::fs::File::create(path)?;
    for (id, origin) in sorted {
        writeln!(
            out,
            "{}",
            serde_json::to_string(&serde_json::json!({ "id": id, "origin": origin }))
                .expect("serializable")
        )?;
    }
    Ok(())
}
