//! Labeled records and the CSV formats shared across the pipeline:
//! labels, score tables, activity groups and external benchmark scores.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{NodeId, PartitionedGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LabelRecord {
    pub raw_id: String,
    pub label: u8,
    pub split: Split,
    /// Month tag, e.g. "201703".
    pub period: String,
}

/// Labeled nodes with binary default labels and disjoint train/test
/// periods.
#[derive(Clone, Debug, Default)]
pub struct LabeledSet {
    pub records: Vec<LabelRecord>,
}

impl LabeledSet {
    /// Reads `raw_node_id,label,split,period` CSV with a header row.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<LabeledSet> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row?;
            if row.len() < 4 {
                return Err(Error::Format {
                    path: path.as_ref().display().to_string(),
                    reason: format!("expected 4 columns, got {}", row.len()),
                });
            }
            let label: u8 = row[1].parse().map_err(|_| Error::Format {
                path: path.as_ref().display().to_string(),
                reason: format!("bad label {:?}", &row[1]),
            })?;
            if label > 1 {
                return Err(Error::Format {
                    path: path.as_ref().display().to_string(),
                    reason: format!("label must be 0 or 1, got {label}"),
                });
            }
            records.push(LabelRecord {
                raw_id: row[0].to_string(),
                label,
                split: row[2].parse()?,
                period: row[3].to_string(),
            });
        }
        if records.is_empty() {
            return Err(Error::EmptyInput("labels csv has no records".into()));
        }
        Ok(LabeledSet { records })
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["raw_node_id", "label", "split", "period"])?;
        for r in &self.records {
            w.write_record([
                r.raw_id.as_str(),
                if r.label == 1 { "1" } else { "0" },
                &r.split.to_string(),
                r.period.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Resolves records against a graph, dropping (and counting) labeled
    /// ids the graph has never seen.
    pub fn resolve(&self, g: &PartitionedGraph) -> (Vec<(NodeId, &LabelRecord)>, usize) {
        let mut resolved = Vec::with_capacity(self.records.len());
        let mut missing = 0;
        for r in &self.records {
            match g.dense_id(&r.raw_id) {
                Some(v) => resolved.push((v, r)),
                None => missing += 1,
            }
        }
        (resolved, missing)
    }

    pub fn split_counts(&self, split: Split) -> (usize, usize) {
        let mut pos = 0;
        let mut neg = 0;
        for r in self.records.iter().filter(|r| r.split == split) {
            if r.label == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        (pos, neg)
    }
}

/// Reads a two-column `raw_node_id,<value>` CSV (scores, bench scores)
/// with a header row.
pub fn read_score_csv<P: AsRef<Path>>(path: P) -> Result<HashMap<String, f64>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut out = HashMap::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::Format {
                path: path.as_ref().display().to_string(),
                reason: "expected 2 columns".into(),
            });
        }
        let score: f64 = row[1].parse().map_err(|_| Error::Format {
            path: path.as_ref().display().to_string(),
            reason: format!("bad score {:?}", &row[1]),
        })?;
        if !score.is_finite() {
            return Err(Error::NonFinite("score csv"));
        }
        out.insert(row[0].to_string(), score);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no records",
            path.as_ref().display()
        )));
    }
    Ok(out)
}

/// Writes a `raw_node_id,y_hat` CSV sorted by id for stable output.
pub fn write_score_csv<P: AsRef<Path>>(
    path: P,
    header: &str,
    scores: impl IntoIterator<Item = (String, f64)>,
) -> Result<()> {
    let mut rows: Vec<(String, f64)> = scores.into_iter().collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["raw_node_id", header])?;
    for (id, s) in rows {
        w.write_record([id.as_str(), &format!("{s:.9}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `raw_node_id,group` CSV with a header row.
pub fn read_group_csv<P: AsRef<Path>>(path: P) -> Result<HashMap<String, String>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let mut out = HashMap::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::Format {
                path: path.as_ref().display().to_string(),
                reason: "expected 2 columns".into(),
            });
        }
        out.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(out)
}

pub fn write_group_csv<P: AsRef<Path>>(
    path: P,
    groups: impl IntoIterator<Item = (String, String)>,
) -> Result<()> {
    let mut rows: Vec<(String, String)> = groups.into_iter().collect();
    rows.sort();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["raw_node_id", "group"])?;
    for (id, grp) in rows {
        w.write_record([id.as_str(), grp.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
