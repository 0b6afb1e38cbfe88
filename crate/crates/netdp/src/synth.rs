//! Synthetic benchmark generator: a directed stochastic block model with
//! planted risk homophily, activity groups with distinct degree scales,
//! and an external benchmark score column.
//!
//! Labels come in two passes: a base default rate per block, then a
//! sequential sweep where each labeled node's odds are multiplied by
//! `boost` per already-labeled defaulted out-neighbor. That plants the
//! monotone default-rate lift over default-neighbor counts. Benchmark
//! scores are a noisy function of the block's risk, except for new users
//! whose benchmark degrades to pure noise (the cold-start group).
//! Everything is a pure function of the seed.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::labels::{LabelRecord, LabeledSet, Split};
use crate::util::{rng_from, STREAM_SYNTH};

pub const GROUP_NAMES: [&str; 3] = ["active", "inactive", "new"];

/// Months covered by the label table; the first five are the train split.
pub const TRAIN_MONTHS: [&str; 5] = ["201703", "201704", "201705", "201706", "201707"];
pub const TEST_MONTHS: [&str; 4] = ["201708", "201709", "201710", "201711"];

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub num_blocks: usize,
    /// Within-block directed edge probability.
    pub p_in: f64,
    /// Cross-block directed edge probability.
    pub p_out: f64,
    /// Base default probability per block; defaults to a ramp when empty.
    pub block_default_rates: Vec<f64>,
    /// Odds multiplier per already-labeled defaulted out-neighbor (1 = off).
    pub neighbor_boost: f64,
    /// Fraction of nodes that carry a label.
    pub labeled_fraction: f64,
    /// Fractions of the {active, inactive, new} groups.
    pub group_fractions: [f64; 3],
    /// Relative degree scale of the {active, inactive, new} groups.
    pub degree_multipliers: [f64; 3],
    /// Standard deviation of the benchmark-score noise.
    pub bench_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_nodes: 50_000,
            num_blocks: 4,
            p_in: 0.002,
            p_out: 0.0001,
            block_default_rates: Vec::new(),
            neighbor_boost: 2.0,
            labeled_fraction: 0.5,
            group_fractions: [0.6, 0.25, 0.15],
            degree_multipliers: [1.5, 0.85, 0.85],
            bench_noise: 1.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn rates(&self) -> Vec<f64> {
        if !self.block_default_rates.is_empty() {
            return self.block_default_rates.clone();
        }
        // ramp from low to high base risk across blocks; the neighbor
        // boost lifts realized rates toward the ~10% regime
        let b = self.num_blocks as f64;
        (0..self.num_blocks)
            .map(|i| 0.02 + 0.07 * i as f64 / (b - 1.0).max(1.0))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.num_nodes < 2 || self.num_blocks == 0 || self.num_blocks > self.num_nodes {
            return Err(Error::InvalidConfig("need >= 2 nodes and 1 <= blocks <= nodes".into()));
        }
        for &p in &[self.p_in, self.p_out] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig("edge probabilities must be in [0,1]".into()));
            }
        }
        if self.p_in == 0.0 && self.p_out == 0.0 {
            return Err(Error::InvalidConfig("graph would have no edges".into()));
        }
        let rates = self.rates();
        if rates.len() != self.num_blocks {
            return Err(Error::InvalidConfig(format!(
                "{} block rates for {} blocks",
                rates.len(),
                self.num_blocks
            )));
        }
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidConfig("block default rates must be in [0,1]".into()));
        }
        if rates.iter().all(|&r| r == 0.0) || rates.iter().all(|&r| r == 1.0) {
            return Err(Error::InvalidConfig(
                "block default rates imply a single label class".into(),
            ));
        }
        if self.neighbor_boost.is_nan() || self.neighbor_boost <= 0.0 {
            return Err(Error::InvalidConfig("neighbor boost must be > 0".into()));
        }
        if self.labeled_fraction.is_nan()
            || self.labeled_fraction <= 0.0
            || self.labeled_fraction > 1.0
        {
            return Err(Error::InvalidConfig("labeled fraction must be in (0,1]".into()));
        }
        if self.group_fractions.iter().any(|&f| f <= 0.0) {
            return Err(Error::InvalidConfig("every group fraction must be > 0".into()));
        }
        let total: f64 = self.group_fractions.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig("group fractions must sum to 1".into()));
        }
        if self.degree_multipliers.iter().any(|&m| m <= 0.0) {
            return Err(Error::InvalidConfig("degree multipliers must be > 0".into()));
        }
        if self.bench_noise < 0.0 {
            return Err(Error::InvalidConfig("bench noise must be >= 0".into()));
        }
        Ok(())
    }
}

pub struct SynthData {
    pub edges: Vec<(u32, u32)>,
    pub labels: LabeledSet,
    /// Group per node, all nodes.
    pub groups: Vec<(String, String)>,
    /// Benchmark score per labeled node.
    pub bench: Vec<(String, f64)>,
    /// Block per node (testing hook).
    pub blocks: Vec<u16>,
}

pub fn block_of(node: usize, num_nodes: usize, num_blocks: usize) -> usize {
    node * num_blocks / num_nodes
}

/// Log-odds separation between adjacent blocks in the benchmark signal.
const BENCH_SLOPE: f64 = 1.6;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Draws all four artifacts. Deterministic: each stage derives its own
/// RNG stream from the seed, so outputs are byte-stable across runs.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let n = cfg.num_nodes;
    let rates = cfg.rates();

    // group assignment
    let mut rng = rng_from(&[cfg.seed, STREAM_SYNTH, 1]);
    let mut group_idx = vec![0u8; n];
    for g in &mut group_idx {
        let u: f64 = rng.random();
        *g = if u < cfg.group_fractions[0] {
            0
        } else if u < cfg.group_fractions[0] + cfg.group_fractions[1] {
            1
        } else {
            2
        };
    }
    for wanted in 0..3u8 {
        if !group_idx.contains(&wanted) {
            return Err(Error::InvalidConfig(format!(
                "group {:?} came out empty; raise its fraction or the node count",
                GROUP_NAMES[wanted as usize]
            )));
        }
    }

    let blocks: Vec<u16> = (0..n).map(|v| block_of(v, n, cfg.num_blocks) as u16).collect();
    let block_bounds: Vec<(usize, usize)> = (0..cfg.num_blocks)
        .map(|b| {
            let start = (b * n).div_ceil(cfg.num_blocks);
            let end = ((b + 1) * n).div_ceil(cfg.num_blocks);
            (start, end)
        })
        .collect();

    // edges: skip-sampling at the max rate, thinned by degree multipliers
    let m_max = cfg
        .degree_multipliers
        .iter()
        .cloned()
        .fold(f64::MIN, f64::max);
    let mult = |v: usize| cfg.degree_multipliers[group_idx[v] as usize];
    let mut rng = rng_from(&[cfg.seed, STREAM_SYNTH, 2]);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for (a, &(a_start, a_end)) in block_bounds.iter().enumerate() {
        for (b, &(b_start, b_end)) in block_bounds.iter().enumerate() {
            let p = if a == b { cfg.p_in } else { cfg.p_out };
            if p == 0.0 {
                continue;
            }
            let p_cap = (p * m_max * m_max).min(1.0);
            let na = a_end - a_start;
            let nb = b_end - b_start;
            let total = (na as u64) * (nb as u64);
            let mut t: u64 = 0;
            while t < total {
                // geometric gap to the next candidate pair
                if p_cap < 1.0 {
                    let u: f64 = rng.random();
                    t += ((1.0 - u).ln() / (1.0 - p_cap).ln()).floor() as u64;
                    if t >= total {
                        break;
                    }
                }
                let i = a_start + (t / nb as u64) as usize;
                let j = b_start + (t % nb as u64) as usize;
                t += 1;
                if i == j {
                    continue;
                }
                let accept = mult(i) * mult(j) / (m_max * m_max);
                if accept >= 1.0 || rng.random::<f64>() < accept {
                    edges.push((i as u32, j as u32));
                }
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::InvalidConfig("generated graph has no edges".into()));
    }

    // out-adjacency for the boost pass
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(i, j) in &edges {
        adjacency[i as usize].push(j);
    }

    // which nodes carry labels, and their month tags
    let mut rng = rng_from(&[cfg.seed, STREAM_SYNTH, 3]);
    let labeled: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < cfg.labeled_fraction).collect();
    let mut rng = rng_from(&[cfg.seed, STREAM_SYNTH, 4]);
    let all_months: Vec<&str> = TRAIN_MONTHS.iter().chain(TEST_MONTHS.iter()).copied().collect();
    let months: Vec<&str> = (0..n)
        .map(|_| all_months[rng.random_range(0..all_months.len())])
        .collect();

    // two-pass labels: base rate by block, odds boosted per
    // already-labeled defaulted out-neighbor
    let mut rng = rng_from(&[cfg.seed, STREAM_SYNTH, 5]);
    let mut label: Vec<Option<u8>> = vec![None; n];
    for v in 0..n {
        if !labeled[v] {
            continue;
        }
        let defaulted_neighbors = adjacency[v]
            .iter()
            .filter(|&&j| label[j as usize] == Some(1))
            .count() as i32;
        let rate = rates[blocks[v] as usize].clamp(1e-9, 1.0 - 1e-9);
        // boosted odds in log space; saturates instead of overflowing
        let z = logit(rate) + defaulted_neighbors as f64 * cfg.neighbor_boost.ln();
        let p = crate::math::sigmoid(z);
        label[v] = Some(u8::from(rng.random::<f64>() < p));
    }

    let mut records = Vec::new();
    for v in 0..n {
        if let Some(y) = label[v] {
            let period = months[v].to_string();
            let split = if TRAIN_MONTHS.contains(&months[v]) {
                Split::Train
            } else {
                Split::Test
            };
            records.push(LabelRecord {
                raw_id: v.to_string(),
                label: y,
                split,
                period,
            });
        }
    }
    let labels = LabeledSet { records };
    for split in [Split::Train, Split::Test] {
        let (pos, neg) = labels.split_counts(split);
        if pos == 0 || neg == 0 {
            return Err(Error::InvalidConfig(format!(
                "{split} split came out single-class ({pos} positive, {neg} negative)"
            )));
        }
    }

    // bench scores: block risk plus noise, pure noise for new users
    let mut rng = rng_from(&[cfg.seed, STREAM_SYNTH, 6]);
    let normal = StandardNormal;
    let mut bench = Vec::new();
    for v in 0..n {
        if label[v].is_none() {
            continue;
        }
        let eps: f64 = normal.sample(&mut rng);
        let centered = blocks[v] as f64 - (cfg.num_blocks as f64 - 1.0) / 2.0;
        let z = if group_idx[v] == 2 {
            cfg.bench_noise * eps
        } else {
            BENCH_SLOPE * centered + cfg.bench_noise * eps
        };
        bench.push((v.to_string(), crate::math::sigmoid(z)));
    }

    let groups = (0..n)
        .map(|v| (v.to_string(), GROUP_NAMES[group_idx[v] as usize].to_string()))
        .collect();

    Ok(SynthData {
        edges,
        labels,
        groups,
        bench,
        blocks,
    })
}

pub struct SynthPaths {
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub groups: PathBuf,
    pub bench: PathBuf,
}

/// Writes `edges.tsv`, `labels.csv`, `groups.csv` and `bench.csv` into
/// `dir`. Same data, same bytes.
pub fn write_to_dir<P: AsRef<Path>>(data: &SynthData, dir: P) -> Result<SynthPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let paths = SynthPaths {
        edges: dir.join("edges.tsv"),
        labels: dir.join("labels.csv"),
        groups: dir.join("groups.csv"),
        bench: dir.join("bench.csv"),
    };

    let mut w = BufWriter::new(fs::File::create(&paths.edges)?);
    writeln!(w, "# src\tdst")?;
    for &(i, j) in &data.edges {
        writeln!(w, "{i}\t{j}")?;
    }
    w.flush()?;

    data.labels.write_csv(&paths.labels)?;
    crate::labels::write_group_csv(&paths.groups, data.groups.iter().cloned())?;
    crate::labels::write_score_csv(&paths.bench, "score", data.bench.iter().cloned())?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            num_nodes: 3000,
            num_blocks: 3,
            p_in: 0.01,
            p_out: 0.001,
            neighbor_boost: 1.0,
            seed: 11,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_files() {
        let cfg = small_cfg();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_to_dir(&generate(&cfg).unwrap(), d1.path()).unwrap();
        write_to_dir(&generate(&cfg).unwrap(), d2.path()).unwrap();
        for name in ["edges.tsv", "labels.csv", "groups.csv", "bench.csv"] {
            let a = fs::read(d1.path().join(name)).unwrap();
            let b = fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate(&small_cfg()).unwrap();
        let b = generate(&SynthConfig {
            seed: 12,
            ..small_cfg()
        })
        .unwrap();
        assert_ne!(a.edges, b.edges);
    }

    #[test]
    fn edge_density_matches_block_probabilities() {
        // uniform multipliers so the thinning step is a no-op
        let cfg = SynthConfig {
            degree_multipliers: [1.0, 1.0, 1.0],
            num_nodes: 4000,
            num_blocks: 2,
            p_in: 0.01,
            p_out: 0.002,
            neighbor_boost: 1.0,
            seed: 13,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let mut pair_counts: HashMap<(u16, u16), u64> = HashMap::new();
        for &(i, j) in &data.edges {
            let key = (data.blocks[i as usize], data.blocks[j as usize]);
            *pair_counts.entry(key).or_default() += 1;
        }
        let half = cfg.num_nodes as f64 / 2.0;
        for (pair, &count) in &pair_counts {
            let trials = if pair.0 == pair.1 {
                half * (half - 1.0)
            } else {
                half * half
            };
            let p = if pair.0 == pair.1 { cfg.p_in } else { cfg.p_out };
            let mean = trials * p;
            let sigma = (trials * p * (1.0 - p)).sqrt();
            assert!(
                (count as f64 - mean).abs() <= 3.0 * sigma,
                "block pair {pair:?}: {count} edges vs {mean:.0} +- {:.0}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn block_default_rates_match_when_boost_is_off() {
        let cfg = SynthConfig {
            num_nodes: 12_000,
            ..small_cfg()
        };
        let data = generate(&cfg).unwrap();
        let rates = cfg.rates();
        let mut pos = [0u64; 3];
        let mut tot = [0u64; 3];
        for r in &data.labels.records {
            let v: usize = r.raw_id.parse().unwrap();
            let b = data.blocks[v] as usize;
            tot[b] += 1;
            pos[b] += r.label as u64;
        }
        for b in 0..3 {
            let n = tot[b] as f64;
            let mean = n * rates[b];
            let sigma = (n * rates[b] * (1.0 - rates[b])).sqrt();
            assert!(
                (pos[b] as f64 - mean).abs() <= 3.0 * sigma,
                "block {b}: {} defaults vs {mean:.0} +- {:.0}",
                pos[b],
                3.0 * sigma
            );
        }
    }

    #[test]
    fn group_mean_degrees_are_ordered() {
        let data = generate(&SynthConfig {
            num_nodes: 6000,
            p_in: 0.01,
            seed: 17,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut deg: HashMap<&str, (u64, u64)> = HashMap::new();
        let group_by_id: HashMap<usize, &str> = data
            .groups
            .iter()
            .map(|(id, g)| (id.parse().unwrap(), g.as_str()))
            .collect();
        let mut out_deg = vec![0u64; 6000];
        for &(i, _) in &data.edges {
            out_deg[i as usize] += 1;
        }
        for (v, d) in out_deg.iter().enumerate() {
            let e = deg.entry(group_by_id[&v]).or_default();
            e.0 += d;
            e.1 += 1;
        }
        let mean = |g: &str| {
            let (d, n) = deg[g];
            d as f64 / n as f64
        };
        let (active, inactive, new) = (mean("active"), mean("inactive"), mean("new"));
        assert!(
            active > inactive * 1.2 && active > new * 1.2,
            "active={active:.1} inactive={inactive:.1} new={new:.1}"
        );
        assert!((inactive - new).abs() / inactive < 0.25);
    }

    #[test]
    fn boost_plants_monotone_lift() {
        use crate::eval::default_rate_lift;
        use crate::graph::{ingest_edges, IngestConfig};
        let cfg = SynthConfig {
            num_nodes: 30_000,
            num_blocks: 2,
            p_in: 0.0012,
            p_out: 0.0002,
            labeled_fraction: 0.6,
            neighbor_boost: 2.0,
            seed: 19,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let mut text = String::new();
        for &(i, j) in &data.edges {
            text.push_str(&format!("{i}\t{j}\n"));
        }
        let g = ingest_edges(
            std::io::Cursor::new(text.into_bytes()),
            &IngestConfig {
                num_shards: 2,
                ..IngestConfig::default()
            },
        )
        .unwrap();
        let labels: Vec<_> = data
            .labels
            .records
            .iter()
            .filter_map(|r| g.dense_id(&r.raw_id).map(|v| (v, r.label)))
            .collect();
        let report = default_rate_lift(&g, &labels, 4).unwrap();
        let rates: Vec<f64> = report.buckets.iter().map(|b| b.default_rate).collect();
        for w in rates.windows(2) {
            assert!(w[1] > w[0], "lift not monotone: {rates:?}");
        }
    }

    #[test]
    fn flat_graph_without_boost_has_flat_lift() {
        use crate::eval::default_rate_lift;
        use crate::graph::{ingest_edges, IngestConfig};
        let cfg = SynthConfig {
            num_nodes: 15_000,
            num_blocks: 1,
            p_in: 0.001,
            p_out: 0.0,
            neighbor_boost: 1.0,
            block_default_rates: vec![0.15],
            seed: 23,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let mut text = String::new();
        for &(i, j) in &data.edges {
            text.push_str(&format!("{i}\t{j}\n"));
        }
        let g = ingest_edges(
            std::io::Cursor::new(text.into_bytes()),
            &IngestConfig::default(),
        )
        .unwrap();
        let labels: Vec<_> = data
            .labels
            .records
            .iter()
            .filter_map(|r| g.dense_id(&r.raw_id).map(|v| (v, r.label)))
            .collect();
        let report = default_rate_lift(&g, &labels, 3).unwrap();
        for b in report.buckets.iter().filter(|b| b.nodes > 300) {
            assert!(
                b.lift_pct.abs() < 25.0,
                "bucket {}: lift {:.1}% over {} nodes",
                b.bucket,
                b.lift_pct,
                b.nodes
            );
        }
    }

    #[test]
    fn new_user_bench_is_uninformative() {
        use crate::eval::{ks_statistic, ScoredSet};
        let data = generate(&SynthConfig {
            num_nodes: 20_000,
            seed: 29,
            ..SynthConfig::default()
        })
        .unwrap();
        let group_by_id: HashMap<&str, &str> = data
            .groups
            .iter()
            .map(|(id, g)| (id.as_str(), g.as_str()))
            .collect();
        let label_by_id: HashMap<&str, u8> = data
            .labels
            .records
            .iter()
            .map(|r| (r.raw_id.as_str(), r.label))
            .collect();
        let mut new_pairs = Vec::new();
        let mut active_pairs = Vec::new();
        for (id, score) in &data.bench {
            let y = label_by_id[id.as_str()];
            match group_by_id[id.as_str()] {
                "new" => new_pairs.push((*score, y)),
                "active" => active_pairs.push((*score, y)),
                _ => {}
            }
        }
        let ks_new = ks_statistic(&ScoredSet::new(new_pairs)).unwrap();
        let ks_active = ks_statistic(&ScoredSet::new(active_pairs)).unwrap();
        assert!(ks_active > 0.2, "active bench ks={ks_active}");
        assert!(ks_new < 0.15, "new-user bench ks={ks_new}");
        assert!(ks_active > ks_new + 0.1);
    }

    #[test]
    fn invalid_configs_error_before_generation() {
        assert!(generate(&SynthConfig {
            p_in: 0.0,
            p_out: 0.0,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            block_default_rates: vec![0.0, 0.0, 0.0, 0.0],
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            group_fractions: [0.9, 0.05, 0.05],
            num_nodes: 20,
            num_blocks: 2,
            p_in: 0.5,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            labeled_fraction: 0.0,
            ..SynthConfig::default()
        })
        .is_err());
    }
}
