//! Edge-list ingestion: parse, remap to dense ids, clean, partition.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::util::{rng_from, shard_of, STREAM_DEGREE_CAP};

use super::{IngestStats, NodeId, PartitionedGraph, Shard};

#[derive(Clone, Debug)]
pub struct IngestConfig {
    pub num_shards: usize,
    /// Exponent of the unigram negative-sampling distribution; 0 = uniform.
    pub alpha: f64,
    /// Adjacency lists longer than this keep a uniform random subset.
    pub max_degree: u32,
    /// Malformed-line tolerance before the whole run fails.
    pub max_skip_rate: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            num_shards: 1,
            alpha: 0.75,
            max_degree: 1000,
            max_skip_rate: 0.01,
        }
    }
}

/// Reads `src<TAB>dst[<TAB>weight]` lines into a sharded store. Lines
/// starting with `#` are ignored; the weight column is accepted and
/// dropped. Self-loops and duplicate edges are removed.
pub fn ingest_edges<R: BufRead>(reader: R, cfg: &IngestConfig) -> Result<PartitionedGraph> {
    if cfg.num_shards == 0 {
        return Err(Error::InvalidConfig("num_shards must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&cfg.max_skip_rate) {
        return Err(Error::InvalidConfig("max_skip_rate must be in [0,1]".into()));
    }

    let mut raw_ids: Vec<String> = Vec::new();
    let mut dense: HashMap<String, u64> = HashMap::new();
    let intern = |raw: &str, raw_ids: &mut Vec<String>, dense: &mut HashMap<String, u64>| {
        if let Some(&id) = dense.get(raw) {
            id
        } else {
            let id = raw_ids.len() as u64;
            raw_ids.push(raw.to_string());
            dense.insert(raw.to_string(), id);
            id
        }
    };

    let mut stats = IngestStats::default();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    let mut adjacency: Vec<Vec<u64>> = Vec::new();
    let mut data_lines = 0u64;

    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        data_lines += 1;
        let mut fields = line.split('\t');
        let (src, dst, weight) = (fields.next(), fields.next(), fields.next());
        let valid = match (src, dst, weight, fields.next()) {
            (Some(s), Some(d), w, None) if !s.is_empty() && !d.is_empty() => {
                // optional weight column must at least be numeric
                w.is_none_or(|w| w.parse::<f64>().is_ok()).then_some((s, d))
            }
            _ => None,
        };
        let Some((src, dst)) = valid else {
            stats.skipped_lines += 1;
            continue;
        };
        let s = intern(src, &mut raw_ids, &mut dense);
        let d = intern(dst, &mut raw_ids, &mut dense);
        if s == d {
            stats.dropped_self_loops += 1;
            continue;
        }
        if !seen.insert((s, d)) {
            stats.dropped_duplicates += 1;
            continue;
        }
        if adjacency.len() <= s as usize {
            adjacency.resize(s as usize + 1, Vec::new());
        }
        adjacency[s as usize].push(d);
        stats.edges_kept += 1;
    }

    if data_lines == 0 {
        return Err(Error::EmptyInput("edge list has no data lines".into()));
    }
    if stats.skipped_lines as f64 > cfg.max_skip_rate * data_lines as f64 {
        return Err(Error::SkipRateExceeded {
            skipped: stats.skipped_lines,
            total: data_lines,
            max_rate: cfg.max_skip_rate,
        });
    }
    if stats.edges_kept == 0 {
        return Err(Error::EmptyInput("no usable edges after cleanup".into()));
    }

    let n = raw_ids.len();
    adjacency.resize(n, Vec::new());

    let mut degrees = vec![0u32; n];
    let mut shards: Vec<Shard> = (0..cfg.num_shards).map(|_| BTreeMap::new()).collect();
    for (v, mut nbrs) in adjacency.into_iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        nbrs.sort_unstable();
        if nbrs.len() > cfg.max_degree as usize {
            // Uniform subset, seeded per node so re-ingestion is byte-identical.
            let mut rng = rng_from(&[STREAM_DEGREE_CAP, v as u64]);
            let picked = rand::seq::index::sample(&mut rng, nbrs.len(), cfg.max_degree as usize);
            let mut kept: Vec<u64> = picked.into_iter().map(|i| nbrs[i]).collect();
            kept.sort_unstable();
            nbrs = kept;
            stats.capped_nodes += 1;
        }
        degrees[v] = nbrs.len() as u32;
        let node = NodeId(v as u64);
        let list = nbrs.into_iter().map(NodeId).collect();
        shards[shard_of(node.0, cfg.num_shards)].insert(node, list);
    }

    Ok(PartitionedGraph::new(
        cfg.num_shards,
        shards,
        degrees,
        raw_ids,
        cfg.alpha,
        cfg.max_degree,
        stats,
    ))
}

pub fn ingest_edges_path<P: AsRef<Path>>(path: P, cfg: &IngestConfig) -> Result<PartitionedGraph> {
    let file = File::open(path.as_ref())?;
    ingest_edges(BufReader::new(file), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn ingest(text: &str, cfg: &IngestConfig) -> Result<PartitionedGraph> {
        ingest_edges(Cursor::new(text.as_bytes()), cfg)
    }

    #[test]
    fn empty_input_is_an_error() {
        let cfg = IngestConfig::default();
        assert!(matches!(ingest("", &cfg), Err(Error::EmptyInput(_))));
        assert!(matches!(
            ingest("# only a comment\n\n", &cfg),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn malformed_lines_are_counted_and_bounded() {
        let cfg = IngestConfig {
            max_skip_rate: 0.5,
            ..IngestConfig::default()
        };
        let g = ingest("A\tB\nbroken line no tab\nB\tC\nx\t\nC\tA\n", &cfg).unwrap();
        assert_eq!(g.stats().skipped_lines, 2);
        assert_eq!(g.stats().edges_kept, 3);

        let strict = IngestConfig {
            max_skip_rate: 0.01,
            ..IngestConfig::default()
        };
        assert!(matches!(
            ingest("A\tB\nbroken\n", &strict),
            Err(Error::SkipRateExceeded { .. })
        ));
    }

    #[test]
    fn weight_column_accepted_and_ignored() {
        let cfg = IngestConfig::default();
        let g = ingest("A\tB\t2.5\nB\tC\t0.1\n", &cfg).unwrap();
        assert_eq!(g.stats().edges_kept, 2);
        // non-numeric weight is malformed
        let r = ingest("A\tB\tlots\n", &cfg);
        assert!(matches!(r, Err(Error::SkipRateExceeded { .. })));
    }

    #[test]
    fn comments_are_ignored() {
        let cfg = IngestConfig::default();
        let g = ingest("# header\nA\tB\n# mid\nB\tC\n", &cfg).unwrap();
        assert_eq!(g.stats().edges_kept, 2);
        assert_eq!(g.stats().skipped_lines, 0);
    }

    #[test]
    fn degree_cap_keeps_uniform_subset() {
        let mut text = String::new();
        for i in 0..50 {
            text.push_str(&format!("hub\tn{i}\n"));
        }
        let cfg = IngestConfig {
            max_degree: 10,
            ..IngestConfig::default()
        };
        let g = ingest(&text, &cfg).unwrap();
        let hub = g.dense_id("hub").unwrap();
        assert_eq!(g.out_degree(hub), 10);
        assert_eq!(g.stats().capped_nodes, 1);
        // capped list is still sorted and duplicate-free
        let nbrs = g.neighbors(hub);
        assert!(nbrs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn remap_is_first_seen_order() {
        let cfg = IngestConfig::default();
        let g = ingest("zed\talpha\nalpha\tmid\n", &cfg).unwrap();
        assert_eq!(g.raw_id(NodeId(0)), "zed");
        assert_eq!(g.raw_id(NodeId(1)), "alpha");
        assert_eq!(g.raw_id(NodeId(2)), "mid");
        assert_eq!(g.dense_id("mid"), Some(NodeId(2)));
        assert_eq!(g.dense_id("missing"), None);
    }
}
