//! Evaluation: two-sample Kolmogorov-Smirnov statistic over score/label
//! pairs, default-rate lift by default-neighbor count, and per-group
//! degree statistics.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{NodeId, PartitionedGraph};

/// Scored binary outcomes; both classes must be present for KS.
#[derive(Clone, Debug, Default)]
pub struct ScoredSet {
    pub pairs: Vec<(f64, u8)>,
}

impl ScoredSet {
    pub fn new(pairs: Vec<(f64, u8)>) -> ScoredSet {
        ScoredSet { pairs }
    }
}

/// Maximum gap between the positive and negative score ECDFs, evaluated
/// between distinct score values after one sort.
pub fn ks_statistic(set: &ScoredSet) -> Result<f64> {
    let total_pos = set.pairs.iter().filter(|&&(_, y)| y == 1).count();
    let total_neg = set.pairs.len() - total_pos;
    if total_pos == 0 || total_neg == 0 {
        return Err(Error::SingleClass {
            context: "ks statistic".into(),
        });
    }
    if set.pairs.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::NonFinite("ks scores"));
    }
    let mut sorted: Vec<(f64, u8)> = set.pairs.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut ks: f64 = 0.0;
    let mut cum_pos = 0usize;
    let mut cum_neg = 0usize;
    let mut i = 0usize;
    while i < sorted.len() {
        let v = sorted[i].0;
        // consume the whole run of ties before evaluating the gap
        while i < sorted.len() && sorted[i].0 == v {
            if sorted[i].1 == 1 {
                cum_pos += 1;
            } else {
                cum_neg += 1;
            }
            i += 1;
        }
        let gap = (cum_pos as f64 / total_pos as f64 - cum_neg as f64 / total_neg as f64).abs();
        ks = ks.max(gap);
    }
    Ok(ks)
}

/// One lift bucket: nodes with exactly `bucket` labeled-default neighbors
/// (the last bucket counts `>= max_bucket`).
#[derive(Clone, Debug, PartialEq)]
pub struct LiftBucket {
    pub bucket: usize,
    pub nodes: usize,
    pub default_rate: f64,
    /// Percent lift of this bucket's rate over bucket 0.
    pub lift_pct: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LiftReport {
    pub buckets: Vec<LiftBucket>,
}

/// Groups labeled nodes by how many of their out-neighbors are labeled
/// defaulters and reports each group's default rate as a lift over the
/// zero-neighbor group.
pub fn default_rate_lift(
    g: &PartitionedGraph,
    labels: &[(NodeId, u8)],
    max_bucket: usize,
) -> Result<LiftReport> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("no labels for lift report".into()));
    }
    let label_of: HashMap<NodeId, u8> = labels.iter().copied().collect();
    let mut counts = vec![0usize; max_bucket + 1];
    let mut defaults = vec![0usize; max_bucket + 1];
    for &(v, y) in labels {
        let default_neighbors = g
            .neighbors(v)
            .iter()
            .filter(|j| label_of.get(j) == Some(&1))
            .count();
        let bucket = default_neighbors.min(max_bucket);
        counts[bucket] += 1;
        defaults[bucket] += usize::from(y == 1);
    }
    if counts[0] == 0 || defaults[0] == 0 {
        return Err(Error::EmptyInput(
            "zero-default-neighbor bucket is empty; lift undefined".into(),
        ));
    }
    let rate0 = defaults[0] as f64 / counts[0] as f64;
    let buckets = counts
        .iter()
        .zip(&defaults)
        .enumerate()
        .filter(|&(_, (&n, _))| n > 0)
        .map(|(bucket, (&n, &d))| {
            let rate = d as f64 / n as f64;
            LiftBucket {
                bucket,
                nodes: n,
                default_rate: rate,
                lift_pct: (rate / rate0 - 1.0) * 100.0,
            }
        })
        .collect();
    Ok(LiftReport { buckets })
}

/// Mean out-degree per group, with group sizes; empty groups are omitted.
pub fn group_neighbor_stats(
    g: &PartitionedGraph,
    groups: &[(NodeId, String)],
) -> Vec<(String, f64, usize)> {
    let mut acc: HashMap<&str, (u64, usize)> = HashMap::new();
    for (v, group) in groups {
        let entry = acc.entry(group.as_str()).or_insert((0, 0));
        entry.0 += g.out_degree(*v) as u64;
        entry.1 += 1;
    }
    let mut out: Vec<(String, f64, usize)> = acc
        .into_iter()
        .map(|(group, (deg, n))| (group.to_string(), deg as f64 / n as f64, n))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// One evaluated slice of the data: its name, KS and class counts.
#[derive(Clone, Debug)]
pub struct EvalRow {
    pub scope: String,
    pub ks: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
}

/// A joined score/label row ready for evaluation.
#[derive(Clone, Debug)]
pub struct EvalRecord {
    pub score: f64,
    pub label: u8,
    pub split: crate::labels::Split,
    pub period: String,
    pub group: Option<String>,
}

/// KS per split, optionally per test period, and per group when groups
/// are attached (periods and groups are sliced within the test split).
/// Slices with one class report `ks: None` instead of failing the report.
pub fn evaluate(records: &[EvalRecord], per_period: bool) -> Vec<EvalRow> {
    use crate::labels::Split;
    let mut rows = Vec::new();
    let mut eval_slice = |scope: String, subset: Vec<(f64, u8)>| {
        if subset.is_empty() {
            return;
        }
        let positives = subset.iter().filter(|&&(_, y)| y == 1).count();
        let negatives = subset.len() - positives;
        let ks = ks_statistic(&ScoredSet::new(subset)).ok();
        rows.push(EvalRow {
            scope,
            ks,
            positives,
            negatives,
        });
    };

    for split in [Split::Train, Split::Test] {
        let subset: Vec<(f64, u8)> = records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| (r.score, r.label))
            .collect();
        eval_slice(split.to_string(), subset);
    }
    if per_period {
        let mut periods: Vec<String> = records
            .iter()
            .filter(|r| r.split == Split::Test)
            .map(|r| r.period.clone())
            .collect();
        periods.sort();
        periods.dedup();
        for period in periods {
            let subset: Vec<(f64, u8)> = records
                .iter()
                .filter(|r| r.split == Split::Test && r.period == period)
                .map(|r| (r.score, r.label))
                .collect();
            eval_slice(format!("test/{period}"), subset);
        }
    }
    let mut groups: Vec<String> = records.iter().filter_map(|r| r.group.clone()).collect();
    groups.sort();
    groups.dedup();
    for group in groups {
        let subset: Vec<(f64, u8)> = records
            .iter()
            .filter(|r| r.split == Split::Test && r.group.as_deref() == Some(&group))
            .map(|r| (r.score, r.label))
            .collect();
        eval_slice(format!("test/group/{group}"), subset);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ingest_edges, IngestConfig};
    use crate::util::rng_from;
    use rand::Rng;
    use std::io::Cursor;

    /// O(n²) oracle: evaluate the ECDF gap at every distinct score.
    fn ks_brute_force(pairs: &[(f64, u8)]) -> f64 {
        let total_pos = pairs.iter().filter(|&&(_, y)| y == 1).count();
        let total_neg = pairs.len() - total_pos;
        let mut thresholds: Vec<f64> = pairs.iter().map(|&(s, _)| s).collect();
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        thresholds.dedup();
        let mut ks: f64 = 0.0;
        for &t in &thresholds {
            let pos = pairs.iter().filter(|&&(s, y)| y == 1 && s <= t).count();
            let neg = pairs.iter().filter(|&&(s, y)| y == 0 && s <= t).count();
            ks = ks.max((pos as f64 / total_pos as f64 - neg as f64 / total_neg as f64).abs());
        }
        ks
    }

    #[test]
    fn ks_perfect_separation_is_one() {
        let set = ScoredSet::new(vec![(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]);
        assert_eq!(ks_statistic(&set).unwrap(), 1.0);
    }

    #[test]
    fn ks_identical_scores_is_zero() {
        let set = ScoredSet::new(vec![(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)]);
        assert_eq!(ks_statistic(&set).unwrap(), 0.0);
    }

    #[test]
    fn ks_interleaved_example() {
        let set = ScoredSet::new(vec![(0.1, 0), (0.4, 1), (0.35, 0), (0.8, 1)]);
        assert_eq!(ks_statistic(&set).unwrap(), 1.0);
    }

    #[test]
    fn ks_single_class_is_an_error() {
        let set = ScoredSet::new(vec![(0.1, 1), (0.4, 1)]);
        assert!(matches!(ks_statistic(&set), Err(Error::SingleClass { .. })));
    }

    #[test]
    fn ks_matches_brute_force_on_random_instances() {
        let mut rng = rng_from(&[51]);
        for trial in 0..200 {
            let n = rng.random_range(2..=500);
            let mut pairs: Vec<(f64, u8)> = (0..n)
                .map(|_| {
                    // quantized scores force plenty of ties
                    let s = (rng.random::<f64>() * 20.0).round() / 20.0;
                    (s, u8::from(rng.random::<f64>() < 0.4))
                })
                .collect();
            // ensure both classes
            pairs[0].1 = 1;
            if n > 1 {
                pairs[1].1 = 0;
            } else {
                pairs.push((0.3, 0));
            }
            let fast = ks_statistic(&ScoredSet::new(pairs.clone())).unwrap();
            let brute = ks_brute_force(&pairs);
            assert_eq!(fast, brute, "trial {trial}");
        }
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let mut rng = rng_from(&[52]);
        let pairs: Vec<(f64, u8)> = (0..300)
            .map(|_| {
                (
                    rng.random::<f64>() * 4.0 - 2.0,
                    u8::from(rng.random::<f64>() < 0.5),
                )
            })
            .collect();
        let base = ks_statistic(&ScoredSet::new(pairs.clone())).unwrap();
        let transformed: Vec<(f64, u8)> = pairs.iter().map(|&(s, y)| (s * s * s + s, y)).collect();
        let after = ks_statistic(&ScoredSet::new(transformed)).unwrap();
        assert_eq!(base, after);
    }

    #[test]
    fn ks_symmetric_under_label_swap_with_negated_scores() {
        let mut rng = rng_from(&[53]);
        let pairs: Vec<(f64, u8)> = (0..200)
            .map(|_| (rng.random::<f64>(), u8::from(rng.random::<f64>() < 0.3)))
            .collect();
        let base = ks_statistic(&ScoredSet::new(pairs.clone())).unwrap();
        let flipped: Vec<(f64, u8)> = pairs.iter().map(|&(s, y)| (-s, 1 - y)).collect();
        let after = ks_statistic(&ScoredSet::new(flipped)).unwrap();
        assert!((base - after).abs() < 1e-15);
    }

    fn lift_fixture() -> (PartitionedGraph, Vec<(NodeId, u8)>) {
        // hand-built: h1 sees 3 defaulted neighbors, h2 sees 2
        let edges = "\
h1\td1\nh1\td2\nh1\td3\n\
h2\td1\nh2\td2\n\
c1\tn1\nc1\tn2\n\
c2\tn1\n";
        let cfg = IngestConfig {
            num_shards: 2,
            ..IngestConfig::default()
        };
        let g = ingest_edges(Cursor::new(edges.as_bytes()), &cfg).unwrap();
        let mut labels = Vec::new();
        for (raw, y) in [
            ("h1", 1u8),
            ("h2", 1),
            ("d1", 1),
            ("d2", 1),
            ("d3", 1),
            ("c1", 0),
            ("c2", 0),
            ("n1", 0),
            ("n2", 0),
        ] {
            labels.push((g.dense_id(raw).unwrap(), y));
        }
        (g, labels)
    }

    #[test]
    fn lift_reproduces_hand_counts() {
        let (g, labels) = lift_fixture();
        let report = default_rate_lift(&g, &labels, 3).unwrap();
        // default-neighbor counts: h1 -> 3, h2 -> 2, everything else 0
        let by_bucket: HashMap<usize, &LiftBucket> =
            report.buckets.iter().map(|b| (b.bucket, b)).collect();
        let b0 = by_bucket[&0];
        assert_eq!(b0.nodes, 7);
        assert!((b0.default_rate - 3.0 / 7.0).abs() < 1e-12);
        assert_eq!(b0.lift_pct, 0.0);
        let b2 = by_bucket[&2];
        assert_eq!(b2.nodes, 1);
        assert_eq!(b2.default_rate, 1.0);
        let expected_lift = (1.0 / (3.0 / 7.0) - 1.0) * 100.0;
        assert!((b2.lift_pct - expected_lift).abs() < 1e-9);
        let b3 = by_bucket[&3];
        assert_eq!(b3.nodes, 1);
        assert_eq!(b3.default_rate, 1.0);
        assert!(!by_bucket.contains_key(&1));
    }

    #[test]
    fn lift_structure_free_labels_are_flat() {
        let mut edges = String::new();
        let mut rng = rng_from(&[54]);
        for _ in 0..900 {
            let a = rng.random_range(0..300u64);
            let b = rng.random_range(0..300u64);
            if a != b {
                edges.push_str(&format!("{a}\t{b}\n"));
            }
        }
        let cfg = IngestConfig {
            num_shards: 2,
            ..IngestConfig::default()
        };
        let g = ingest_edges(Cursor::new(edges.into_bytes()), &cfg).unwrap();
        // labels independent of structure
        let labels: Vec<(NodeId, u8)> = g
            .all_nodes()
            .map(|v| (v, (g.raw_id(v).parse::<u64>().unwrap() % 3 == 0) as u8))
            .collect();
        let report = default_rate_lift(&g, &labels, 4).unwrap();
        for b in &report.buckets {
            if b.nodes >= 20 {
                assert!(
                    b.lift_pct.abs() < 40.0,
                    "bucket {} lift {} with {} nodes",
                    b.bucket,
                    b.lift_pct,
                    b.nodes
                );
            }
        }
    }

    #[test]
    fn lift_empty_zero_bucket_is_an_error() {
        // every labeled node has a defaulted neighbor
        let edges = "a\tb\nb\ta\n";
        let cfg = IngestConfig::default();
        let g = ingest_edges(Cursor::new(edges.as_bytes()), &cfg).unwrap();
        let labels: Vec<(NodeId, u8)> = g.all_nodes().map(|v| (v, 1)).collect();
        assert!(default_rate_lift(&g, &labels, 3).is_err());
    }

    #[test]
    fn group_stats_hand_example() {
        // planted degrees {2,2} and {6,6}
        let mut edges = String::new();
        for i in 0..2 {
            for j in 0..2 {
                edges.push_str(&format!("a{i}\tt{i}_{j}\n"));
            }
        }
        for i in 0..2 {
            for j in 0..6 {
                edges.push_str(&format!("b{i}\tu{i}_{j}\n"));
            }
        }
        let cfg = IngestConfig {
            num_shards: 1,
            ..IngestConfig::default()
        };
        let g = ingest_edges(Cursor::new(edges.into_bytes()), &cfg).unwrap();
        let groups: Vec<(NodeId, String)> = vec![
            (g.dense_id("a0").unwrap(), "low".into()),
            (g.dense_id("a1").unwrap(), "low".into()),
            (g.dense_id("b0").unwrap(), "high".into()),
            (g.dense_id("b1").unwrap(), "high".into()),
        ];
        let stats = group_neighbor_stats(&g, &groups);
        let by_name: HashMap<&str, f64> = stats.iter().map(|(n, m, _)| (n.as_str(), *m)).collect();
        assert_eq!(by_name["low"], 2.0);
        assert_eq!(by_name["high"], 6.0);
    }

    #[test]
    fn group_stats_single_group_equals_global_mean() {
        let (g, _) = lift_fixture();
        let groups: Vec<(NodeId, String)> = g.all_nodes().map(|v| (v, "all".to_string())).collect();
        let stats = group_neighbor_stats(&g, &groups);
        assert_eq!(stats.len(), 1);
        let global =
            g.all_nodes().map(|v| g.out_degree(v) as f64).sum::<f64>() / g.num_nodes() as f64;
        assert!((stats[0].1 - global).abs() < 1e-12);
    }

    #[test]
    fn evaluate_slices_by_split_period_and_group() {
        use crate::labels::Split;
        let mut records = Vec::new();
        for i in 0..40 {
            let label = u8::from(i % 2 == 0);
            let split = if i < 20 { Split::Train } else { Split::Test };
            records.push(EvalRecord {
                score: if label == 1 { 0.8 } else { 0.2 },
                label,
                split,
                period: if i % 4 < 2 { "201708" } else { "201709" }.into(),
                group: Some(if i % 2 == 0 { "active" } else { "new" }.into()),
            });
        }
        let rows = evaluate(&records, true);
        let scopes: Vec<&str> = rows.iter().map(|r| r.scope.as_str()).collect();
        assert!(scopes.contains(&"train"));
        assert!(scopes.contains(&"test"));
        assert!(scopes.contains(&"test/201708"));
        assert!(scopes.contains(&"test/group/active"));
        // perfectly separated scores
        let test_row = rows.iter().find(|r| r.scope == "test").unwrap();
        assert_eq!(test_row.ks, Some(1.0));
        // single-class group slices degrade to None rather than erroring
        let active = rows.iter().find(|r| r.scope == "test/group/active").unwrap();
        assert_eq!(active.ks, None);
    }
}
