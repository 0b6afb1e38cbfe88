//! End-to-end orchestration: synthetic data (optional) -> ingest ->
//! unsupervised embeddings -> supervised scores -> features -> boosted
//! ensemble -> blend -> evaluation report. Every stage leaves its
//! artifact in the output directory and failures carry the stage name.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::embedding::EmbeddingTable;
use crate::ensemble::{
    blend, build_features, feature_columns, select_blend_weight, EnsembleModel, FeatureRow,
};
use crate::error::{Error, Result};
use crate::eval::{
    default_rate_lift, evaluate, group_neighbor_stats, EvalRecord, EvalRow, LiftReport,
};
use crate::graph::{ingest_edges_path, IngestConfig, NodeId};
use crate::labels::{read_group_csv, read_score_csv, write_score_csv, LabeledSet, Split};
use crate::mart::{train_mart, MartConfig};
use crate::sup::{init_sup_stores, train_sup, SupConfig};
use crate::synth::{generate, write_to_dir, SynthConfig};
use crate::unsup::{init_embedding_store, train_unsup, UnsupConfig};

/// Full-pipeline configuration: global seed and workers, the per-stage
/// configs, and either a synthetic-data block or paths to real inputs.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    /// Generate inputs with the synth block instead of reading files.
    pub synth_enabled: bool,
    pub synth: SynthConfig,
    pub edges: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub bench: Option<PathBuf>,
    pub ingest: IngestConfig,
    pub unsup: UnsupConfig,
    pub sup: SupConfig,
    /// Initialize supervised base vectors from the trained embedding
    /// table (requires sup.k == unsup.dim).
    pub sup_warm_start: bool,
    pub mart: MartConfig,
    pub max_bucket: usize,
    pub per_period: bool,
    pub verbose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            workers: 4,
            synth_enabled: true,
            synth: SynthConfig::default(),
            edges: None,
            labels: None,
            groups: None,
            bench: None,
            ingest: IngestConfig {
                num_shards: 4,
                ..IngestConfig::default()
            },
            // the full-pipeline defaults are sized for the synthetic
            // benchmark, not the per-subcommand defaults
            unsup: UnsupConfig {
                dim: 32,
                neighbors_per_node: 20,
                learning_rate: 0.15,
                epochs: 20,
                lr_decay: true,
                ..UnsupConfig::default()
            },
            sup: SupConfig {
                k: 32,
                epochs: 30,
                learning_rate: 1.0,
                ..SupConfig::default()
            },
            sup_warm_start: true,
            mart: MartConfig {
                num_trees: 100,
                max_depth: 3,
                min_leaf: 100,
                ..MartConfig::default()
            },
            max_bucket: 5,
            per_period: true,
            verbose: false,
        }
    }
}

impl RunConfig {
    /// Propagates the global seed/workers/verbosity into each stage
    /// config. Called once before a run.
    pub fn harmonize(&mut self) {
        self.synth.seed = self.seed;
        self.unsup.seed = self.seed;
        self.unsup.workers = self.workers;
        self.unsup.verbose = self.verbose;
        self.sup.seed = self.seed;
        self.sup.workers = self.workers;
        self.sup.verbose = self.verbose;
        self.mart.verbose = self.verbose;
    }

    /// The manifest is the whole effective config as `key = value` lines;
    /// feeding it back through [`RunConfig::from_key_values`] reproduces
    /// the run.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("seed", self.seed.to_string());
        kv("workers", self.workers.to_string());
        kv("verbose", self.verbose.to_string());
        kv("synth.enabled", self.synth_enabled.to_string());
        kv("synth.nodes", self.synth.num_nodes.to_string());
        kv("synth.blocks", self.synth.num_blocks.to_string());
        kv("synth.p_in", self.synth.p_in.to_string());
        kv("synth.p_out", self.synth.p_out.to_string());
        kv(
            "synth.block_default_rates",
            if self.synth.block_default_rates.is_empty() {
                "auto".to_string()
            } else {
                self.synth
                    .block_default_rates
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            },
        );
        kv("synth.boost", self.synth.neighbor_boost.to_string());
        kv("synth.labeled_fraction", self.synth.labeled_fraction.to_string());
        kv(
            "synth.group_fractions",
            self.synth
                .group_fractions
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            "synth.degree_multipliers",
            self.synth
                .degree_multipliers
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("synth.bench_noise", self.synth.bench_noise.to_string());
        for (key, path) in [
            ("input.edges", &self.edges),
            ("input.labels", &self.labels),
            ("input.groups", &self.groups),
            ("input.bench", &self.bench),
        ] {
            if let Some(p) = path {
                kv(key, p.display().to_string());
            }
        }
        kv("ingest.shards", self.ingest.num_shards.to_string());
        kv("ingest.alpha", self.ingest.alpha.to_string());
        kv("ingest.max_degree", self.ingest.max_degree.to_string());
        kv("ingest.max_skip_rate", self.ingest.max_skip_rate.to_string());
        kv("unsup.dim", self.unsup.dim.to_string());
        kv("unsup.neighbors", self.unsup.neighbors_per_node.to_string());
        kv("unsup.negatives", self.unsup.negatives.to_string());
        kv("unsup.lr", self.unsup.learning_rate.to_string());
        kv("unsup.epochs", self.unsup.epochs.to_string());
        kv("unsup.batch_size", self.unsup.batch_size.to_string());
        kv("unsup.lr_decay", self.unsup.lr_decay.to_string());
        kv("sup.k", self.sup.k.to_string());
        kv("sup.steps", self.sup.steps.to_string());
        kv("sup.epochs", self.sup.epochs.to_string());
        kv("sup.lr", self.sup.learning_rate.to_string());
        kv("sup.lambda", self.sup.lambda.to_string());
        kv("sup.fanout", self.sup.fanout.to_string());
        kv("sup.batch_size", self.sup.batch_size.to_string());
        if let Some(scale) = self.sup.init_scale {
            kv("sup.init_scale", scale.to_string());
        }
        kv("sup.warm_start", self.sup_warm_start.to_string());
        kv("mart.trees", self.mart.num_trees.to_string());
        kv("mart.depth", self.mart.max_depth.to_string());
        kv("mart.shrinkage", self.mart.shrinkage.to_string());
        kv("mart.min_leaf", self.mart.min_leaf.to_string());
        kv("eval.max_bucket", self.max_bucket.to_string());
        kv("eval.per_period", self.per_period.to_string());
        out
    }

    /// Parses `key = value` lines (`#` starts a comment) over defaults.
    pub fn from_key_values(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "config line {} has no '=': {raw:?}",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::InvalidConfig(format!("bad value {value:?} for {key}"))
            })
        }
        fn parse_list(key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
            let items: Vec<f64> = value
                .split(',')
                .map(|s| parse(key, s.trim()))
                .collect::<Result<_>>()?;
            if items.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "{key} needs {n} comma-separated values"
                )));
            }
            Ok(items)
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "verbose" => self.verbose = parse(key, value)?,
            "synth.enabled" => self.synth_enabled = parse(key, value)?,
            "synth.nodes" => self.synth.num_nodes = parse(key, value)?,
            "synth.blocks" => self.synth.num_blocks = parse(key, value)?,
            "synth.p_in" => self.synth.p_in = parse(key, value)?,
            "synth.p_out" => self.synth.p_out = parse(key, value)?,
            "synth.block_default_rates" => {
                self.synth.block_default_rates = if value == "auto" {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| parse(key, s.trim()))
                        .collect::<Result<_>>()?
                };
            }
            "synth.boost" => self.synth.neighbor_boost = parse(key, value)?,
            "synth.labeled_fraction" => self.synth.labeled_fraction = parse(key, value)?,
            "synth.group_fractions" => {
                let v = parse_list(key, value, 3)?;
                self.synth.group_fractions = [v[0], v[1], v[2]];
            }
            "synth.degree_multipliers" => {
                let v = parse_list(key, value, 3)?;
                self.synth.degree_multipliers = [v[0], v[1], v[2]];
            }
            "synth.bench_noise" => self.synth.bench_noise = parse(key, value)?,
            "input.edges" => self.edges = Some(PathBuf::from(value)),
            "input.labels" => self.labels = Some(PathBuf::from(value)),
            "input.groups" => self.groups = Some(PathBuf::from(value)),
            "input.bench" => self.bench = Some(PathBuf::from(value)),
            "ingest.shards" => self.ingest.num_shards = parse(key, value)?,
            "ingest.alpha" => self.ingest.alpha = parse(key, value)?,
            "ingest.max_degree" => self.ingest.max_degree = parse(key, value)?,
            "ingest.max_skip_rate" => self.ingest.max_skip_rate = parse(key, value)?,
            "unsup.dim" => self.unsup.dim = parse(key, value)?,
            "unsup.neighbors" => self.unsup.neighbors_per_node = parse(key, value)?,
            "unsup.negatives" => self.unsup.negatives = parse(key, value)?,
            "unsup.lr" => self.unsup.learning_rate = parse(key, value)?,
            "unsup.epochs" => self.unsup.epochs = parse(key, value)?,
            "unsup.batch_size" => self.unsup.batch_size = parse(key, value)?,
            "unsup.lr_decay" => self.unsup.lr_decay = parse(key, value)?,
            "sup.k" => self.sup.k = parse(key, value)?,
            "sup.steps" => self.sup.steps = parse(key, value)?,
            "sup.epochs" => self.sup.epochs = parse(key, value)?,
            "sup.lr" => self.sup.learning_rate = parse(key, value)?,
            "sup.lambda" => self.sup.lambda = parse(key, value)?,
            "sup.fanout" => self.sup.fanout = parse(key, value)?,
            "sup.batch_size" => self.sup.batch_size = parse(key, value)?,
            "sup.init_scale" => self.sup.init_scale = Some(parse(key, value)?),
            "sup.warm_start" => self.sup_warm_start = parse(key, value)?,
            "mart.trees" => self.mart.num_trees = parse(key, value)?,
            "mart.depth" => self.mart.max_depth = parse(key, value)?,
            "mart.shrinkage" => self.mart.shrinkage = parse(key, value)?,
            "mart.min_leaf" => self.mart.min_leaf = parse(key, value)?,
            "eval.max_bucket" => self.max_bucket = parse(key, value)?,
            "eval.per_period" => self.per_period = parse(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!("unknown config key {other:?}")))
            }
        }
        Ok(())
    }
}

/// KS rows per method plus the structural reports.
#[derive(Debug)]
pub struct PipelineReport {
    /// (method, eval rows); methods are "netdp", "bench", "netdp+bench".
    pub methods: Vec<(String, Vec<EvalRow>)>,
    pub blend_weight: Option<f64>,
    pub lift: LiftReport,
    pub group_degrees: Vec<(String, f64, usize)>,
    pub out_dir: PathBuf,
}

impl PipelineReport {
    pub fn ks_of(&self, method: &str, scope: &str) -> Option<f64> {
        self.methods
            .iter()
            .find(|(m, _)| m == method)?
            .1
            .iter()
            .find(|r| r.scope == scope)?
            .ks
    }

    /// The text report printed at the end of a run.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if let Some(w) = self.blend_weight {
            writeln!(out, "blend weight (train ks grid): {w:.2}").unwrap();
        }
        writeln!(out, "{:<14} {:<22} {:>8} {:>8} {:>8}", "method", "scope", "ks", "pos", "neg")
            .unwrap();
        for (method, rows) in &self.methods {
            for row in rows {
                let ks = row
                    .ks
                    .map(|k| format!("{k:.4}"))
                    .unwrap_or_else(|| "-".to_string());
                writeln!(
                    out,
                    "{:<14} {:<22} {:>8} {:>8} {:>8}",
                    method, row.scope, ks, row.positives, row.negatives
                )
                .unwrap();
            }
        }
        if !self.lift.buckets.is_empty() {
            writeln!(out, "\ndefault-rate lift by defaulted-neighbor count:").unwrap();
            for b in &self.lift.buckets {
                writeln!(
                    out,
                    "  bucket {:>2}: nodes {:>7} rate {:.4} lift {:+.1}%",
                    b.bucket, b.nodes, b.default_rate, b.lift_pct
                )
                .unwrap();
            }
        }
        if !self.group_degrees.is_empty() {
            writeln!(out, "\nmean out-degree by group:").unwrap();
            for (group, mean, n) in &self.group_degrees {
                writeln!(out, "  {group:<10} {mean:>8.2}  ({n} nodes)").unwrap();
            }
        }
        out
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "scope", "ks", "positives", "negatives"])?;
        for (method, rows) in &self.methods {
            for row in rows {
                w.write_record([
                    method.as_str(),
                    row.scope.as_str(),
                    &row.ks.map(|k| format!("{k:.6}")).unwrap_or_default(),
                    &row.positives.to_string(),
                    &row.negatives.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_lift_csv(report: &LiftReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bucket", "nodes", "default_rate", "lift_pct"])?;
    for b in &report.buckets {
        w.write_record([
            b.bucket.to_string(),
            b.nodes.to_string(),
            format!("{:.6}", b.default_rate),
            format!("{:.4}", b.lift_pct),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scores every raw id present in both the embedding table and the
/// supervised score table.
pub fn predict_scores(
    model: &EnsembleModel,
    emb: &EmbeddingTable,
    raw_ids: &[String],
    sup_scores: &HashMap<String, f64>,
) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (dense, raw) in raw_ids.iter().enumerate() {
        let Some(&sup) = sup_scores.get(raw) else {
            continue;
        };
        let mut x = emb.row(NodeId(dense as u64)).to_vec();
        x.push(sup);
        out.push((raw.clone(), model.forest.predict(&x)));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Runs the whole pipeline into `out_dir`. See the module docs for the
/// stage list; every artifact lands under `out_dir`.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path) -> Result<PipelineReport> {
    let mut cfg = cfg.clone();
    cfg.harmonize();
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("manifest"), cfg.to_manifest())?;

    // stage: inputs (synthetic or provided)
    let (edges_path, labels_path, groups_path, bench_path) = if cfg.synth_enabled {
        let data = generate(&cfg.synth).map_err(|e| e.in_stage("gen-synth"))?;
        let paths =
            write_to_dir(&data, out_dir.join("data")).map_err(|e| e.in_stage("gen-synth"))?;
        if cfg.verbose {
            println!(
                "[gen-synth] nodes={} edges={} labeled={}",
                cfg.synth.num_nodes,
                data.edges.len(),
                data.labels.records.len()
            );
        }
        (paths.edges, paths.labels, Some(paths.groups), Some(paths.bench))
    } else {
        let edges = cfg
            .edges
            .clone()
            .ok_or_else(|| Error::MissingInput("input.edges".into()).in_stage("inputs"))?;
        let labels = cfg
            .labels
            .clone()
            .ok_or_else(|| Error::MissingInput("input.labels".into()).in_stage("inputs"))?;
        (edges, labels, cfg.groups.clone(), cfg.bench.clone())
    };

    // stage: ingest
    let graph = ingest_edges_path(&edges_path, &cfg.ingest).map_err(|e| e.in_stage("ingest"))?;
    graph
        .save(out_dir.join("graph"))
        .map_err(|e| e.in_stage("ingest"))?;
    if cfg.verbose {
        let s = graph.stats();
        println!(
            "[ingest] nodes={} edges={} skipped={} self_loops={} duplicates={}",
            graph.num_nodes(),
            s.edges_kept,
            s.skipped_lines,
            s.dropped_self_loops,
            s.dropped_duplicates
        );
    }
    let labels = LabeledSet::read_csv(&labels_path).map_err(|e| e.in_stage("ingest"))?;

    // stage: train-unsup
    let emb = {
        let store = init_embedding_store(graph.num_nodes(), &cfg.unsup, graph.num_shards())
            .map_err(|e| e.in_stage("train-unsup"))?;
        let out = train_unsup(&graph, &store, &cfg.unsup).map_err(|e| e.in_stage("train-unsup"))?;
        out.table
    };
    let raw_ids: Vec<String> = graph.all_nodes().map(|v| graph.raw_id(v).to_string()).collect();
    emb.save(out_dir.join("embeddings.bin"), &raw_ids)
        .map_err(|e| e.in_stage("train-unsup"))?;

    // stage: train-sup
    let sup_out = {
        let warm = cfg.sup_warm_start.then_some(&emb);
        let stores = init_sup_stores(graph.num_nodes(), &cfg.sup, graph.num_shards(), warm)
            .map_err(|e| e.in_stage("train-sup"))?;
        train_sup(&graph, &labels, &stores, &cfg.sup).map_err(|e| e.in_stage("train-sup"))?
    };
    let sup_by_node: HashMap<NodeId, f64> = sup_out.scores.iter().copied().collect();
    write_score_csv(
        out_dir.join("sup_scores.csv"),
        "y_hat",
        sup_out
            .scores
            .iter()
            .map(|&(v, p)| (graph.raw_id(v).to_string(), p)),
    )
    .map_err(|e| e.in_stage("train-sup"))?;

    // stage: build-features
    let (resolved, _missing) = labels.resolve(&graph);
    let built = build_features(&emb, &sup_by_node, &resolved)
        .map_err(|e| e.in_stage("build-features"))?;
    if cfg.verbose {
        println!(
            "[build-features] rows={} dropped={}",
            built.rows.len(),
            built.dropped
        );
    }

    // stage: train-mart
    let train_rows: Vec<&FeatureRow> = built
        .rows
        .iter()
        .filter(|r| r.split == Split::Train)
        .collect();
    let train_owned: Vec<FeatureRow> = train_rows.iter().map(|r| (*r).clone()).collect();
    let (columns, train_labels) = feature_columns(&train_owned);
    let mart_out =
        train_mart(&columns, &train_labels, &cfg.mart).map_err(|e| e.in_stage("train-mart"))?;

    let bench_by_raw: Option<HashMap<String, f64>> = match &bench_path {
        Some(p) => Some(read_score_csv(p).map_err(|e| e.in_stage("train-mart"))?),
        None => None,
    };
    let bench_of = |node: NodeId| -> Option<f64> {
        bench_by_raw
            .as_ref()
            .and_then(|m| m.get(graph.raw_id(node)).copied())
    };

    let blend_weight = if bench_by_raw.is_some() {
        let rows: Vec<(f64, f64, u8)> = train_owned
            .iter()
            .filter_map(|r| {
                bench_of(r.node).map(|b| (mart_out.forest.predict(&r.x), b, r.y))
            })
            .collect();
        if rows.is_empty() {
            None
        } else {
            let (w, ks) = select_blend_weight(&rows).map_err(|e| e.in_stage("train-mart"))?;
            if cfg.verbose {
                println!("[train-mart] blend_weight={w:.2} train_ks={ks:.4}");
            }
            Some(w)
        }
    } else {
        None
    };
    let model = EnsembleModel {
        forest: mart_out.forest,
        blend_weight,
    };
    model
        .save(out_dir.join("model.bin"))
        .map_err(|e| e.in_stage("train-mart"))?;

    // stage: predict
    let mut netdp_by_node: HashMap<NodeId, f64> = HashMap::new();
    for row in &built.rows {
        netdp_by_node
            .entry(row.node)
            .or_insert_with(|| model.forest.predict(&row.x));
    }
    write_score_csv(
        out_dir.join("netdp_scores.csv"),
        "y_hat",
        netdp_by_node
            .iter()
            .map(|(&v, &p)| (graph.raw_id(v).to_string(), p)),
    )
    .map_err(|e| e.in_stage("predict"))?;

    // stage: evaluate
    let groups_by_raw: Option<HashMap<String, String>> = match &groups_path {
        Some(p) => Some(read_group_csv(p).map_err(|e| e.in_stage("evaluate"))?),
        None => None,
    };
    let group_of = |node: NodeId| -> Option<String> {
        groups_by_raw
            .as_ref()
            .and_then(|m| m.get(graph.raw_id(node)).cloned())
    };

    let make_records = |score_of: &dyn Fn(&FeatureRow) -> Option<f64>| -> Vec<EvalRecord> {
        built
            .rows
            .iter()
            .filter_map(|r| {
                score_of(r).map(|score| EvalRecord {
                    score,
                    label: r.y,
                    split: r.split,
                    period: r.period.clone(),
                    group: group_of(r.node),
                })
            })
            .collect()
    };

    let mut methods = Vec::new();
    let netdp_records = make_records(&|r| netdp_by_node.get(&r.node).copied());
    methods.push(("netdp".to_string(), evaluate(&netdp_records, cfg.per_period)));
    if bench_by_raw.is_some() {
        let bench_records = make_records(&|r| bench_of(r.node));
        methods.push(("bench".to_string(), evaluate(&bench_records, cfg.per_period)));
        if let Some(w) = blend_weight {
            let blend_records = make_records(&|r| {
                let m = netdp_by_node.get(&r.node).copied()?;
                let b = bench_of(r.node)?;
                blend(m, b, w).ok()
            });
            let blended_rows = evaluate(&blend_records, cfg.per_period);
            write_score_csv(
                out_dir.join("blended_scores.csv"),
                "y_hat",
                blend_records
                    .iter()
                    .zip(built.rows.iter())
                    .map(|(rec, row)| (graph.raw_id(row.node).to_string(), rec.score)),
            )
            .map_err(|e| e.in_stage("evaluate"))?;
            methods.push(("netdp+bench".to_string(), blended_rows));
        }
    }

    let label_pairs: Vec<(NodeId, u8)> = resolved.iter().map(|&(v, r)| (v, r.label)).collect();
    let lift = default_rate_lift(&graph, &label_pairs, cfg.max_bucket)
        .map_err(|e| e.in_stage("evaluate"))?;
    write_lift_csv(&lift, &out_dir.join("lift.csv")).map_err(|e| e.in_stage("evaluate"))?;

    let group_degrees = match &groups_by_raw {
        Some(m) => {
            let pairs: Vec<(NodeId, String)> = graph
                .all_nodes()
                .filter_map(|v| m.get(graph.raw_id(v)).map(|g| (v, g.clone())))
                .collect();
            group_neighbor_stats(&graph, &pairs)
        }
        None => Vec::new(),
    };

    let report = PipelineReport {
        methods,
        blend_weight,
        lift,
        group_degrees,
        out_dir: out_dir.to_path_buf(),
    };
    report
        .write_csv(&out_dir.join("report.csv"))
        .map_err(|e| e.in_stage("evaluate"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_parser() {
        let mut cfg = RunConfig::default();
        cfg.seed = 123;
        cfg.workers = 2;
        cfg.synth.num_nodes = 4321;
        cfg.synth.block_default_rates = vec![0.05, 0.2];
        cfg.unsup.dim = 16;
        cfg.sup.init_scale = Some(0.25);
        cfg.mart.num_trees = 31;
        let text = cfg.to_manifest();
        let parsed = RunConfig::from_key_values(&text).unwrap();
        assert_eq!(parsed.to_manifest(), text);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(RunConfig::from_key_values("nope = 1\n").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.set("synth.bogus", "1").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = RunConfig::from_key_values("# comment\n\nseed = 99\n").unwrap();
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn missing_inputs_fail_with_stage_tag() {
        let cfg = RunConfig {
            synth_enabled: false,
            ..RunConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let err = run_pipeline(&cfg, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "inputs", .. }), "{err}");
    }
}
