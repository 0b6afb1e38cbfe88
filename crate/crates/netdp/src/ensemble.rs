//! The ensemble stage: concatenate each labeled node's unsupervised
//! embedding with its supervised score into a (d+1)-dimensional feature
//! row, boost trees over the train split, and blend the resulting score
//! with an external benchmark score by a weight picked on train KS.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::binio::*;
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{ks_statistic, ScoredSet};
use crate::graph::NodeId;
use crate::labels::{LabelRecord, Split};
use crate::mart::Forest;

/// Tolerated fraction of labeled nodes missing an embedding or score.
pub const MAX_DROP_RATE: f64 = 0.05;

/// One training/scoring row: the (d+1)-vector `[embedding, sup score]`.
#[derive(Clone, Debug)]
pub struct FeatureRow {
    pub node: NodeId,
    pub x: Vec<f64>,
    pub y: u8,
    pub split: Split,
    pub period: String,
}

pub struct FeatureBuild {
    pub rows: Vec<FeatureRow>,
    pub dropped: usize,
}

/// Joins embeddings and supervised scores per labeled node. Nodes missing
/// either side are dropped and counted; a drop rate above
/// [`MAX_DROP_RATE`] aborts.
pub fn build_features(
    emb: &EmbeddingTable,
    sup_scores: &HashMap<NodeId, f64>,
    labels: &[(NodeId, &LabelRecord)],
) -> Result<FeatureBuild> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("no labeled rows to build features from".into()));
    }
    let mut rows = Vec::with_capacity(labels.len());
    let mut dropped = 0usize;
    for &(node, record) in labels {
        let in_table = node.index() < emb.len();
        let score = sup_scores.get(&node);
        let (true, Some(&score)) = (in_table, score) else {
            dropped += 1;
            continue;
        };
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidConfig(format!(
                "supervised score {score} for node {node} outside (0,1)"
            )));
        }
        let mut x = emb.row(node).to_vec();
        x.push(score);
        rows.push(FeatureRow {
            node,
            x,
            y: record.label,
            split: record.split,
            period: record.period.clone(),
        });
    }
    if dropped as f64 > MAX_DROP_RATE * labels.len() as f64 {
        return Err(Error::DropRateExceeded {
            dropped,
            total: labels.len(),
            max_rate: MAX_DROP_RATE,
            reason: "labeled nodes missing embedding or supervised score".into(),
        });
    }
    Ok(FeatureBuild { rows, dropped })
}

/// Transposes rows into the column-major layout tree training expects.
pub fn feature_columns(rows: &[FeatureRow]) -> (Vec<Vec<f64>>, Vec<u8>) {
    let width = rows.first().map_or(0, |r| r.x.len());
    let mut columns = vec![Vec::with_capacity(rows.len()); width];
    let mut labels = Vec::with_capacity(rows.len());
    for row in rows {
        for (c, &v) in columns.iter_mut().zip(&row.x) {
            c.push(v);
        }
        labels.push(row.y);
    }
    (columns, labels)
}

/// `w * model_score + (1 - w) * bench_score`.
pub fn blend(netdp_score: f64, bench_score: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidConfig(format!("blend weight {w} outside [0,1]")));
    }
    if !(0.0..=1.0).contains(&netdp_score) || !(0.0..=1.0).contains(&bench_score) {
        return Err(Error::InvalidConfig("blend inputs must be probabilities".into()));
    }
    Ok(w * netdp_score + (1.0 - w) * bench_score)
}

/// Grid step of the blend-weight search: {0, 0.05, ..., 1.0}.
pub const BLEND_GRID_STEPS: usize = 20;

/// Picks the grid weight maximizing KS over (model, bench, label) rows;
/// the first of tied weights wins. Returns (weight, ks at that weight).
pub fn select_blend_weight(rows: &[(f64, f64, u8)]) -> Result<(f64, f64)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no rows for blend weight search".into()));
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for step in 0..=BLEND_GRID_STEPS {
        let w = step as f64 / BLEND_GRID_STEPS as f64;
        let blended: Vec<(f64, u8)> = rows
            .iter()
            .map(|&(m, b, y)| Ok((blend(m, b, w)?, y)))
            .collect::<Result<_>>()?;
        let ks = ks_statistic(&ScoredSet::new(blended))?;
        if ks > best.1 {
            best = (w, ks);
        }
    }
    Ok(best)
}

/// A trained ensemble: the forest plus the blend weight picked on the
/// train split (absent when no benchmark was supplied).
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    pub forest: Forest,
    pub blend_weight: Option<f64>,
}

const MAGIC: &[u8; 4] = b"NDPB";
const VERSION: u32 = 1;

impl EnsembleModel {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, MAGIC, VERSION)?;
        match self.blend_weight {
            Some(weight) => {
                write_u8(&mut w, 1)?;
                write_f64(&mut w, weight)?;
            }
            None => {
                write_u8(&mut w, 0)?;
                write_f64(&mut w, 0.0)?;
            }
        }
        self.forest.write(&mut w)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<EnsembleModel> {
        let path_str = path.as_ref().display().to_string();
        let mut r = BufReader::new(File::open(path.as_ref())?);
        expect_header(&mut r, MAGIC, VERSION, &path_str)?;
        let has_weight = read_u8(&mut r)? == 1;
        let weight = read_f64(&mut r)?;
        let forest = Forest::read(&mut r, &path_str)?;
        Ok(EnsembleModel {
            forest,
            blend_weight: has_weight.then_some(weight),
        })
    }
}
