//! Sharded adjacency-list graph store.
//!
//! Edge lists are ingested once into dense node ids, partitioned across
//! in-process shards by a deterministic hash, and then served read-only:
//! neighbor lookup, uniform neighbor sampling and unigram^alpha negative
//! sampling. Each lookup touches exactly one shard.

mod ingest;
mod io;

pub use ingest::{ingest_edges, ingest_edges_path, IngestConfig};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::util::shard_of;

/// Dense node index in `[0, n)`, assigned at ingestion.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NodeId(pub u64);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

type Shard = BTreeMap<NodeId, Vec<NodeId>>;

/// Counters accumulated while cleaning the raw edge stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub edges_kept: u64,
    pub skipped_lines: u64,
    pub dropped_self_loops: u64,
    pub dropped_duplicates: u64,
    pub capped_nodes: u64,
}

/// Adjacency lists sharded by `hash(node) % num_shards`, plus the degree
/// table and the cumulative negative-sampling distribution.
pub struct PartitionedGraph {
    num_shards: usize,
    shards: Vec<Shard>,
    /// Out-degree per dense node id (after dedup and capping).
    degrees: Vec<u32>,
    /// Cumulative unigram^alpha probabilities over all nodes; last entry is 1.
    neg_cdf: Vec<f64>,
    /// Dense id -> raw id.
    raw_ids: Vec<String>,
    /// Raw id -> dense id.
    dense_ids: HashMap<String, NodeId>,
    alpha: f64,
    max_degree: u32,
    stats: IngestStats,
    shard_reads: Vec<AtomicU64>,
}

impl PartitionedGraph {
    fn new(
        num_shards: usize,
        shards: Vec<Shard>,
        degrees: Vec<u32>,
        raw_ids: Vec<String>,
        alpha: f64,
        max_degree: u32,
        stats: IngestStats,
    ) -> Self {
        let neg_cdf = build_neg_cdf(&degrees, alpha);
        let dense_ids = raw_ids
            .iter()
            .enumerate()
            .map(|(i, raw)| (raw.clone(), NodeId(i as u64)))
            .collect();
        let shard_reads = (0..num_shards).map(|_| AtomicU64::new(0)).collect();
        PartitionedGraph {
            num_shards,
            shards,
            degrees,
            neg_cdf,
            raw_ids,
            dense_ids,
            alpha,
            max_degree,
            stats,
            shard_reads,
        }
    }

    /// Number of ingested nodes.
    pub fn num_nodes(&self) -> usize {
        self.raw_ids.len()
    }

    pub fn num_shards(&self) -> usize {
        self.num_shards
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn raw_id(&self, v: NodeId) -> &str {
        &self.raw_ids[v.index()]
    }

    pub fn dense_id(&self, raw: &str) -> Option<NodeId> {
        self.dense_ids.get(raw).copied()
    }

    pub fn out_degree(&self, v: NodeId) -> u32 {
        self.degrees.get(v.index()).copied().unwrap_or(0)
    }

    /// All node ids, including sinks.
    pub fn all_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.raw_ids.len() as u64).map(NodeId)
    }

    /// Nodes with at least one out-neighbor, ascending.
    pub fn nodes_with_neighbors(&self) -> Vec<NodeId> {
        self.all_nodes()
            .filter(|&v| self.out_degree(v) > 0)
            .collect()
    }

    /// Full out-neighbor list of `v`; empty for sinks. Reads one shard.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        let s = shard_of(v.0, self.num_shards);
        self.shard_reads[s].fetch_add(1, Ordering::Relaxed);
        self.shards[s].get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `min(s, degree)` neighbors drawn uniformly without replacement.
    pub fn sample_neighbors<R: Rng>(&self, v: NodeId, s: usize, rng: &mut R) -> Result<Vec<NodeId>> {
        let nbrs = self.neighbors(v);
        if nbrs.is_empty() {
            return Err(Error::NoNeighbors(v.0));
        }
        if s >= nbrs.len() {
            return Ok(nbrs.to_vec());
        }
        let picked = rand::seq::index::sample(rng, nbrs.len(), s);
        Ok(picked.into_iter().map(|i| nbrs[i]).collect())
    }

    /// `count` nodes drawn i.i.d. from the unigram^alpha distribution
    /// over out-degrees.
    pub fn sample_negative<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<NodeId> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let idx = self.neg_cdf.partition_point(|&c| c < u);
                NodeId(idx.min(self.neg_cdf.len() - 1) as u64)
            })
            .collect()
    }

    /// Cumulative negative-sampling distribution (testing hook).
    pub fn neg_cdf(&self) -> &[f64] {
        &self.neg_cdf
    }

    /// Per-shard read counters (testing hook for lookup locality).
    pub fn shard_read_counts(&self) -> Vec<u64> {
        self.shard_reads
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .collect()
    }

    /// Which shard holds `v`.
    pub fn shard_index(&self, v: NodeId) -> usize {
        shard_of(v.0, self.num_shards)
    }

    /// Iterate every stored adjacency list (testing / reporting hook).
    pub fn iter_adjacency(&self) -> impl Iterator<Item = (NodeId, &[NodeId])> + '_ {
        self.shards
            .iter()
            .flat_map(|s| s.iter().map(|(v, ns)| (*v, ns.as_slice())))
    }
}

fn build_neg_cdf(degrees: &[u32], alpha: f64) -> Vec<f64> {
    let weights: Vec<f64> = degrees.iter().map(|&d| (d as f64).powf(alpha)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut cdf = Vec::with_capacity(weights.len());
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    cdf
}
