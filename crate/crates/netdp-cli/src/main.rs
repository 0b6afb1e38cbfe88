//! `netdp` command line: graph ingestion, both trainers, the tree
//! ensemble, scoring, evaluation, the synthetic benchmark generator, and
//! the full pipeline runner.

use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use netdp::embedding::EmbeddingTable;
use netdp::ensemble::{
    build_features, feature_columns, select_blend_weight, EnsembleModel, FeatureRow,
};
use netdp::eval::{default_rate_lift, evaluate, EvalRecord, EvalRow};
use netdp::graph::{ingest_edges_path, IngestConfig, PartitionedGraph};
use netdp::labels::{
    read_group_csv, read_score_csv, write_score_csv, LabeledSet, Split,
};
use netdp::mart::{train_mart, MartConfig};
use netdp::pipeline::{predict_scores, run_pipeline, write_lift_csv, RunConfig};
use netdp::sup::{init_sup_stores, train_sup, SupConfig};
use netdp::synth::{generate, write_to_dir, SynthConfig};
use netdp::unsup::{init_embedding_store, train_unsup, NegativeTerm, UnsupConfig};

#[derive(Parser)]
#[command(name = "netdp", version, about = "Network-based default prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark graph with labels, groups and bench scores
    GenSynth(GenSynthArgs),
    /// Ingest an edge list into a sharded graph store
    Ingest(IngestArgs),
    /// Learn unsupervised node embeddings
    TrainUnsup(TrainUnsupArgs),
    /// Learn the supervised neighbor-aggregation scorer
    TrainSup(TrainSupArgs),
    /// Train the boosted-tree ensemble over embeddings and scores
    TrainEnsemble(TrainEnsembleArgs),
    /// Score nodes with a trained ensemble model
    Predict(PredictArgs),
    /// Report KS statistics for a score table
    Evaluate(EvaluateArgs),
    /// Report default-rate lift by defaulted-neighbor count
    Lift(LiftArgs),
    /// Run the full pipeline end to end
    Run(RunArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 50_000)]
    nodes: usize,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 0.002)]
    p_in: f64,
    #[arg(long, default_value_t = 0.0001)]
    p_out: f64,
    /// Odds multiplier per already-labeled defaulted neighbor
    #[arg(long, default_value_t = 2.0)]
    boost: f64,
    #[arg(long, default_value_t = 0.5)]
    labeled_frac: f64,
    /// Comma-separated per-block base default rates (defaults to a ramp)
    #[arg(long)]
    rates: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    bench_noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    shards: usize,
    /// Negative-sampling exponent over out-degrees (0 = uniform)
    #[arg(long, default_value_t = 0.75)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    max_degree: u32,
    /// Tolerated fraction of malformed lines
    #[arg(long, default_value_t = 0.01)]
    max_skip_rate: f64,
}

#[derive(Args)]
struct TrainUnsupArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Negative samples per positive pair
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Neighbors sampled per node per epoch
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    /// Uniform init half-width (default 0.5/dim)
    #[arg(long)]
    init_scale: Option<f64>,
    /// Decay the learning rate linearly over the run
    #[arg(long, default_value_t = false)]
    lr_decay: bool,
    /// Flip the negative-sample term so negatives are pulled toward the
    /// target (diagnostic objective; expect degenerate embeddings)
    #[arg(long, default_value_t = false)]
    attract_negatives: bool,
    /// Stop after this many epochs without probe-loss improvement
    #[arg(long)]
    early_stop_patience: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct TrainSupArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Output CSV of per-node scores
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    steps: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    lambda: f64,
    /// Neighbor cap per node per aggregation step
    #[arg(long, default_value_t = 25)]
    fanout: usize,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    /// Uniform init half-width (default 0.5/k)
    #[arg(long)]
    init_scale: Option<f64>,
    /// Initialize base vectors from an embedding table (needs dim == k)
    #[arg(long)]
    warm_start: Option<PathBuf>,
    /// Also write the aggregated representation table here
    #[arg(long)]
    emit_repr: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct TrainEnsembleArgs {
    /// Embedding table from train-unsup
    #[arg(long, required_unless_present = "features")]
    emb: Option<PathBuf>,
    /// Supervised score CSV from train-sup
    #[arg(long, required_unless_present = "features")]
    sup: Option<PathBuf>,
    /// Prebuilt feature CSV (raw_node_id,x0..xN) replacing --emb/--sup
    #[arg(long, conflicts_with_all = ["emb", "sup"])]
    features: Option<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    /// External benchmark scores; enables blend-weight selection
    #[arg(long)]
    bench: Option<PathBuf>,
    /// Append the supervised representation table (from --emit-repr) to
    /// the feature rows
    #[arg(long)]
    include_sup_emb: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 0.1)]
    shrinkage: f64,
    #[arg(long, default_value_t = 20)]
    min_leaf: usize,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    /// Supervised score CSV
    #[arg(long)]
    sup: PathBuf,
    /// Representation table, for models trained with --include-sup-emb
    #[arg(long)]
    include_sup_emb: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Break the test split out by period
    #[arg(long, default_value_t = false)]
    per_period: bool,
    /// Also write the report as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LiftArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 5)]
    max_bucket: usize,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// key = value config file (a previous run's manifest works)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set unsup.epochs=20
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = true)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenSynth(args) => gen_synth(args),
        Command::Ingest(args) => ingest(args),
        Command::TrainUnsup(args) => train_unsup_cmd(args),
        Command::TrainSup(args) => train_sup_cmd(args),
        Command::TrainEnsemble(args) => train_ensemble(args),
        Command::Predict(args) => predict(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::Lift(args) => lift(args),
        Command::Run(args) => run(args),
    }
}

fn gen_synth(args: GenSynthArgs) -> Result<()> {
    let rates = match &args.rates {
        Some(text) => text
            .split(',')
            .map(|s| s.trim().parse::<f64>().context("bad --rates value"))
            .collect::<Result<Vec<f64>>>()?,
        None => Vec::new(),
    };
    let cfg = SynthConfig {
        num_nodes: args.nodes,
        num_blocks: args.blocks,
        p_in: args.p_in,
        p_out: args.p_out,
        block_default_rates: rates,
        neighbor_boost: args.boost,
        labeled_fraction: args.labeled_frac,
        bench_noise: args.bench_noise,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).context("generating synthetic data")?;
    let paths = write_to_dir(&data, &args.out)?;
    println!(
        "wrote {} edges, {} labels to {}",
        data.edges.len(),
        data.labels.records.len(),
        args.out.display()
    );
    println!(
        "  {}\n  {}\n  {}\n  {}",
        paths.edges.display(),
        paths.labels.display(),
        paths.groups.display(),
        paths.bench.display()
    );
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let cfg = IngestConfig {
        num_shards: args.shards,
        alpha: args.alpha,
        max_degree: args.max_degree,
        max_skip_rate: args.max_skip_rate,
    };
    let graph = ingest_edges_path(&args.edges, &cfg)
        .with_context(|| format!("ingesting {}", args.edges.display()))?;
    graph.save(&args.out)?;
    let stats = graph.stats();
    println!(
        "ingested {} nodes, {} edges into {} shards at {}",
        graph.num_nodes(),
        stats.edges_kept,
        graph.num_shards(),
        args.out.display()
    );
    println!(
        "  skipped lines: {}, self-loops dropped: {}, duplicates dropped: {}, capped nodes: {}",
        stats.skipped_lines, stats.dropped_self_loops, stats.dropped_duplicates, stats.capped_nodes
    );
    Ok(())
}

fn train_unsup_cmd(args: TrainUnsupArgs) -> Result<()> {
    let graph = PartitionedGraph::load(&args.graph)
        .with_context(|| format!("loading graph from {}", args.graph.display()))?;
    let cfg = UnsupConfig {
        dim: args.dim,
        neighbors_per_node: args.neighbors,
        negatives: args.negatives,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        init_scale: args.init_scale,
        seed: args.seed,
        workers: args.workers,
        lr_decay: args.lr_decay,
        negative_term: if args.attract_negatives {
            NegativeTerm::Attract
        } else {
            NegativeTerm::Repel
        },
        early_stop_patience: args.early_stop_patience,
        verbose: true,
        ..UnsupConfig::default()
    };
    let store = init_embedding_store(graph.num_nodes(), &cfg, graph.num_shards())?;
    let out = train_unsup(&graph, &store, &cfg)?;
    let raw_ids: Vec<String> = graph
        .all_nodes()
        .map(|v| graph.raw_id(v).to_string())
        .collect();
    out.table.save(&args.out, &raw_ids)?;
    println!(
        "trained {} x {} embeddings over {} epochs; final probe loss {:.6}",
        graph.num_nodes(),
        args.dim,
        out.epochs_run,
        out.probe_losses.last().unwrap()
    );
    println!("wrote {} (+ .idx)", args.out.display());
    Ok(())
}

fn train_sup_cmd(args: TrainSupArgs) -> Result<()> {
    let graph = PartitionedGraph::load(&args.graph)?;
    let labels = LabeledSet::read_csv(&args.labels)?;
    let cfg = SupConfig {
        k: args.k,
        steps: args.steps,
        epochs: args.epochs,
        learning_rate: args.lr,
        lambda: args.lambda,
        fanout: args.fanout,
        batch_size: args.batch_size,
        init_scale: args.init_scale,
        seed: args.seed,
        workers: args.workers,
        verbose: true,
    };
    let warm_table = match &args.warm_start {
        Some(path) => Some(EmbeddingTable::load(path)?.0),
        None => None,
    };
    let stores = init_sup_stores(
        graph.num_nodes(),
        &cfg,
        graph.num_shards(),
        warm_table.as_ref(),
    )?;
    let out = train_sup(&graph, &labels, &stores, &cfg)?;
    write_score_csv(
        &args.out,
        "y_hat",
        out.scores
            .iter()
            .map(|&(v, p)| (graph.raw_id(v).to_string(), p)),
    )?;
    if let Some(repr_path) = &args.emit_repr {
        let raw_ids: Vec<String> = graph
            .all_nodes()
            .map(|v| graph.raw_id(v).to_string())
            .collect();
        out.representations.save(repr_path, &raw_ids)?;
        println!("wrote representations to {}", repr_path.display());
    }
    println!(
        "scored {} labeled nodes (probe ce {:.4} -> {:.4}, {} isolated fallbacks, {} unresolved ids)",
        out.scores.len(),
        out.probe_losses.first().unwrap(),
        out.probe_losses.last().unwrap(),
        out.isolated_fallbacks,
        out.unresolved_labels
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Feature rows from a prebuilt CSV: `raw_node_id,x0,...,xN` with header.
fn read_feature_csv(
    path: &PathBuf,
    labels: &LabeledSet,
) -> Result<Vec<FeatureRow>> {
    let by_id: HashMap<&str, &netdp::labels::LabelRecord> = labels
        .records
        .iter()
        .map(|r| (r.raw_id.as_str(), r))
        .collect();
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            bail!("feature csv row {} has fewer than 2 columns", i + 2);
        }
        let Some(label) = by_id.get(&record[0]) else {
            continue;
        };
        let x: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().context("bad feature value"))
            .collect::<Result<_>>()?;
        rows.push(FeatureRow {
            node: netdp::graph::NodeId(i as u64),
            x,
            y: label.label,
            split: label.split,
            period: label.period.clone(),
        });
    }
    if rows.is_empty() {
        bail!("no feature rows matched the label table");
    }
    Ok(rows)
}

fn train_ensemble(args: TrainEnsembleArgs) -> Result<()> {
    let labels = LabeledSet::read_csv(&args.labels)?;

    let (rows, raw_of_node): (Vec<FeatureRow>, HashMap<netdp::graph::NodeId, String>) =
        if let Some(features) = &args.features {
            let rows = read_feature_csv(features, &labels)?;
            (rows, HashMap::new())
        } else {
            let (emb, raw_ids) = EmbeddingTable::load(args.emb.as_ref().unwrap())?;
            let sup_by_raw = read_score_csv(args.sup.as_ref().unwrap())?;
            let index: HashMap<&str, netdp::graph::NodeId> = raw_ids
                .iter()
                .enumerate()
                .map(|(i, raw)| (raw.as_str(), netdp::graph::NodeId(i as u64)))
                .collect();
            let mut resolved = Vec::new();
            for record in &labels.records {
                if let Some(&node) = index.get(record.raw_id.as_str()) {
                    resolved.push((node, record));
                }
            }
            let sup_by_node: HashMap<netdp::graph::NodeId, f64> = resolved
                .iter()
                .filter_map(|(node, r)| sup_by_raw.get(&r.raw_id).map(|&s| (*node, s)))
                .collect();
            let mut built = build_features(&emb, &sup_by_node, &resolved)?;
            println!("built {} feature rows ({} dropped)", built.rows.len(), built.dropped);
            if let Some(repr_path) = &args.include_sup_emb {
                let (repr, repr_ids) = EmbeddingTable::load(repr_path)?;
                if repr_ids != raw_ids {
                    bail!("representation table ids differ from the embedding table ids");
                }
                // keep the supervised score as the last column
                for row in &mut built.rows {
                    let score = row.x.pop().unwrap();
                    row.x.extend_from_slice(repr.row(row.node));
                    row.x.push(score);
                }
                println!("appended {}-dim supervised representations", repr.dim());
            }
            let raw_of_node = raw_ids
                .into_iter()
                .enumerate()
                .map(|(i, raw)| (netdp::graph::NodeId(i as u64), raw))
                .collect();
            (built.rows, raw_of_node)
        };

    let train_rows: Vec<FeatureRow> = rows
        .iter()
        .filter(|r| r.split == Split::Train)
        .cloned()
        .collect();
    if train_rows.is_empty() {
        bail!("no train-split rows");
    }
    let (columns, train_labels) = feature_columns(&train_rows);
    let cfg = MartConfig {
        num_trees: args.trees,
        max_depth: args.depth,
        shrinkage: args.shrinkage,
        min_leaf: args.min_leaf,
        verbose: true,
    };
    let out = train_mart(&columns, &train_labels, &cfg)?;
    println!(
        "trained {} trees; train logistic loss {:.4} -> {:.4}",
        args.trees,
        out.loss_curve.first().unwrap(),
        out.loss_curve.last().unwrap()
    );

    let blend_weight = match &args.bench {
        Some(bench_path) => {
            let bench = read_score_csv(bench_path)?;
            let triples: Vec<(f64, f64, u8)> = train_rows
                .iter()
                .filter_map(|r| {
                    let raw = raw_of_node.get(&r.node)?;
                    let b = bench.get(raw)?;
                    Some((out.forest.predict(&r.x), *b, r.y))
                })
                .collect();
            if triples.is_empty() {
                println!("no bench scores matched train rows; skipping blend weight");
                None
            } else {
                let (w, ks) = select_blend_weight(&triples)?;
                println!("blend weight {w:.2} (train ks {ks:.4})");
                Some(w)
            }
        }
        None => None,
    };

    EnsembleModel {
        forest: out.forest,
        blend_weight,
    }
    .save(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let model = EnsembleModel::load(&args.model)?;
    let (mut emb, raw_ids) = EmbeddingTable::load(&args.emb)?;
    if let Some(repr_path) = &args.include_sup_emb {
        let (repr, repr_ids) = EmbeddingTable::load(repr_path)?;
        if repr_ids != raw_ids {
            bail!("representation table ids differ from the embedding table ids");
        }
        // widen each embedding row in place; the sup score still lands last
        let dim = emb.dim() + repr.dim();
        let rows: Vec<Vec<f64>> = (0..raw_ids.len())
            .map(|i| {
                let v = netdp::graph::NodeId(i as u64);
                let mut row = emb.row(v).to_vec();
                row.extend_from_slice(repr.row(v));
                row
            })
            .collect();
        emb = EmbeddingTable::from_rows(dim, rows)?;
    }
    let sup = read_score_csv(&args.sup)?;
    let scores = predict_scores(&model, &emb, &raw_ids, &sup);
    if scores.is_empty() {
        bail!("no node appears in both the embedding table and the score csv");
    }
    let n = scores.len();
    write_score_csv(&args.out, "y_hat", scores)?;
    println!("scored {} nodes -> {}", n, args.out.display());
    Ok(())
}

fn render_eval_rows(rows: &[EvalRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<22} {:>8} {:>8} {:>8}\n",
        "scope", "ks", "pos", "neg"
    ));
    for row in rows {
        let ks = row
            .ks
            .map(|k| format!("{k:.4}"))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<22} {:>8} {:>8} {:>8}\n",
            row.scope, ks, row.positives, row.negatives
        ));
    }
    out
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let scores = read_score_csv(&args.scores)?;
    let labels = LabeledSet::read_csv(&args.labels)?;
    let groups = match &args.groups {
        Some(path) => Some(read_group_csv(path)?),
        None => None,
    };
    let mut matched = 0usize;
    let records: Vec<EvalRecord> = labels
        .records
        .iter()
        .filter_map(|r| {
            let score = *scores.get(&r.raw_id)?;
            matched += 1;
            Some(EvalRecord {
                score,
                label: r.label,
                split: r.split,
                period: r.period.clone(),
                group: groups.as_ref().and_then(|g| g.get(&r.raw_id).cloned()),
            })
        })
        .collect();
    if records.is_empty() {
        bail!("no label row has a score");
    }
    let rows = evaluate(&records, args.per_period);
    print!("{}", render_eval_rows(&rows));
    if let Some(out) = &args.out {
        let mut w = csv::Writer::from_path(out)?;
        w.write_record(["scope", "ks", "positives", "negatives"])?;
        for row in &rows {
            w.write_record([
                row.scope.as_str(),
                &row.ks.map(|k| format!("{k:.6}")).unwrap_or_default(),
                &row.positives.to_string(),
                &row.negatives.to_string(),
            ])?;
        }
        w.flush()?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn lift(args: LiftArgs) -> Result<()> {
    let graph = PartitionedGraph::load(&args.graph)?;
    let labels = LabeledSet::read_csv(&args.labels)?;
    let (resolved, missing) = labels.resolve(&graph);
    if missing > 0 {
        eprintln!("note: {missing} labeled ids not present in the graph");
    }
    let pairs: Vec<(netdp::graph::NodeId, u8)> =
        resolved.iter().map(|&(v, r)| (v, r.label)).collect();
    let report = default_rate_lift(&graph, &pairs, args.max_bucket)?;
    match &args.out {
        Some(path) => {
            write_lift_csv(&report, path)?;
            println!("wrote {}", path.display());
        }
        None => {
            let mut w = BufWriter::new(std::io::stdout());
            writeln!(w, "bucket,nodes,default_rate,lift_pct")?;
            for b in &report.buckets {
                writeln!(
                    w,
                    "{},{},{:.6},{:.4}",
                    b.bucket, b.nodes, b.default_rate, b.lift_pct
                )?;
            }
        }
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::from_key_values(&text)?
        }
        None => RunConfig::default(),
    };
    for setting in &args.sets {
        let Some((key, value)) = setting.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {setting:?}");
        };
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    cfg.verbose = args.verbose;

    let report = run_pipeline(&cfg, &args.out)?;
    println!("{}", report.render_text());
    println!("artifacts in {}", args.out.display());
    Ok(())
}
