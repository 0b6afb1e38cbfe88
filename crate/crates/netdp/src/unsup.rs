//! Unsupervised first-order network embeddings.
//!
//! Every node carries one d-dimensional vector used in both target and
//! context roles. Observed (node, neighbor) pairs are pulled together and
//! sampled negatives pushed apart under a sigmoid contrastive objective,
//! optimized with mini-batch SGD by workers sharing a parameter store:
//! shuffle the worker's node set, pull the touched vectors, apply the
//! batch gradient locally, push the values back, and synchronize at every
//! epoch boundary.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use rand::Rng;

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{NodeId, PartitionedGraph};
use crate::math::{axpy, dot, sigmoid, softplus};
use crate::store::{assign_workers, ParamStore, UpdateMode};
use crate::util::{rng_from, STREAM_INIT, STREAM_PROBE};

/// Sign convention for the sampled-negative term of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NegativeTerm {
    /// Negatives are pushed away from the target (the useful objective).
    #[default]
    Repel,
    /// Negatives are pulled toward the target like positives. Degenerate
    /// on purpose; kept as a diagnostic mode and excluded from evaluation.
    Attract,
}

#[derive(Clone, Debug)]
pub struct UnsupConfig {
    pub dim: usize,
    /// Neighbors sampled per node per epoch (s).
    pub neighbors_per_node: usize,
    /// Negatives sampled per positive pair (K).
    pub negatives: usize,
    pub learning_rate: f64,
    /// Maximum epochs (m).
    pub epochs: usize,
    pub batch_size: usize,
    /// Uniform init half-width; defaults to 0.5/dim when `None`.
    pub init_scale: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    /// Linear learning-rate decay toward ~0 over the run.
    pub lr_decay: bool,
    pub negative_term: NegativeTerm,
    /// Stop after this many epochs without probe-loss improvement.
    pub early_stop_patience: Option<usize>,
    /// Size of the fixed probe set used for per-epoch loss logging.
    pub probe_pairs: usize,
    pub verbose: bool,
}

impl Default for UnsupConfig {
    fn default() -> Self {
        UnsupConfig {
            dim: 64,
            neighbors_per_node: 5,
            negatives: 5,
            learning_rate: 0.025,
            epochs: 10,
            batch_size: 512,
            init_scale: None,
            seed: 7,
            workers: 1,
            lr_decay: false,
            negative_term: NegativeTerm::Repel,
            early_stop_patience: None,
            probe_pairs: 1024,
            verbose: false,
        }
    }
}

impl UnsupConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0
            || self.neighbors_per_node == 0
            || self.negatives == 0
            || self.batch_size == 0
            || self.workers == 0
        {
            return Err(Error::InvalidConfig(
                "dim, neighbors, negatives, batch_size and workers must be positive".into(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        Ok(())
    }

    fn init_scale(&self) -> f64 {
        self.init_scale.unwrap_or(0.5 / self.dim as f64)
    }
}

fn check_vectors(u_i: &[f64], u_j: &[f64], negs: &[&[f64]]) -> Result<()> {
    if negs.is_empty() {
        return Err(Error::InvalidConfig("at least one negative required".into()));
    }
    let d = u_i.len();
    for v in std::iter::once(u_j).chain(negs.iter().copied()) {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    let finite = u_i.iter().all(|x| x.is_finite())
        && u_j.iter().all(|x| x.is_finite())
        && negs.iter().all(|v| v.iter().all(|x| x.is_finite()));
    if !finite {
        return Err(Error::NonFinite("pair loss input"));
    }
    Ok(())
}

/// Contrastive loss of one (target, context) pair against its negatives:
/// `-ln σ(u_i·u_j) - Σ_k ln σ(-u_i·u_k)`. Strictly positive for finite
/// inputs.
pub fn pair_loss(u_i: &[f64], u_j: &[f64], negs: &[&[f64]]) -> Result<f64> {
    pair_loss_in_mode(NegativeTerm::Repel, u_i, u_j, negs)
}

pub fn pair_loss_in_mode(
    mode: NegativeTerm,
    u_i: &[f64],
    u_j: &[f64],
    negs: &[&[f64]],
) -> Result<f64> {
    check_vectors(u_i, u_j, negs)?;
    let mut loss = softplus(-dot(u_i, u_j));
    for &u_k in negs {
        let d = dot(u_i, u_k);
        loss += match mode {
            NegativeTerm::Repel => softplus(d),
            NegativeTerm::Attract => softplus(-d),
        };
    }
    Ok(loss)
}

/// Gradients with respect to the target, the context, and each negative.
pub type PairGradients = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

/// Analytic gradients of [`pair_loss`] with respect to the target, the
/// context and each negative.
pub fn pair_grad(u_i: &[f64], u_j: &[f64], negs: &[&[f64]]) -> Result<PairGradients> {
    pair_grad_in_mode(NegativeTerm::Repel, u_i, u_j, negs)
}

pub fn pair_grad_in_mode(
    mode: NegativeTerm,
    u_i: &[f64],
    u_j: &[f64],
    negs: &[&[f64]],
) -> Result<PairGradients> {
    check_vectors(u_i, u_j, negs)?;
    let d = u_i.len();
    // d/dx [-ln σ(x)] = -(1-σ(x)) = -σ(-x)
    let pos_coeff = -sigmoid(-dot(u_i, u_j));
    let mut grad_i = vec![0.0; d];
    axpy(&mut grad_i, pos_coeff, u_j);
    let mut grad_j = vec![0.0; d];
    axpy(&mut grad_j, pos_coeff, u_i);

    let mut grad_negs = Vec::with_capacity(negs.len());
    for &u_k in negs {
        let s = dot(u_i, u_k);
        let neg_coeff = match mode {
            NegativeTerm::Repel => sigmoid(s),
            NegativeTerm::Attract => -sigmoid(-s),
        };
        axpy(&mut grad_i, neg_coeff, u_k);
        let mut g_k = vec![0.0; d];
        axpy(&mut g_k, neg_coeff, u_i);
        grad_negs.push(g_k);
    }
    Ok((grad_i, grad_j, grad_negs))
}

/// Builds the embedding store with one key per node, initialized uniform
/// in [-scale, scale]. Row init depends only on (seed, node), so the
/// initial table is identical for any worker or shard count.
pub fn init_embedding_store(
    num_nodes: usize,
    cfg: &UnsupConfig,
    store_shards: usize,
) -> Result<ParamStore> {
    cfg.validate()?;
    let scale = cfg.init_scale();
    let rows = (0..num_nodes as u64).map(|v| {
        let mut rng = rng_from(&[cfg.seed, STREAM_INIT, v]);
        let row: Vec<f64> = (0..cfg.dim)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect();
        (v, row)
    });
    ParamStore::new(store_shards, UpdateMode::Overwrite, cfg.workers, rows)
}

/// A frozen (target, context, negatives) triple used for loss probes.
struct ProbePair {
    target: NodeId,
    context: NodeId,
    negs: Vec<NodeId>,
}

fn build_probe(g: &PartitionedGraph, cfg: &UnsupConfig) -> Vec<ProbePair> {
    let mut rng = rng_from(&[cfg.seed, STREAM_PROBE]);
    let active = g.nodes_with_neighbors();
    let count = cfg.probe_pairs.min(active.len().max(1) * 4);
    let mut probe = Vec::with_capacity(count);
    for _ in 0..count {
        let v = active[rng.random_range(0..active.len())];
        let nbrs = g.neighbors(v);
        let j = nbrs[rng.random_range(0..nbrs.len())];
        let negs = g.sample_negative(cfg.negatives, &mut rng);
        probe.push(ProbePair {
            target: v,
            context: j,
            negs,
        });
    }
    probe
}

fn probe_loss(store: &ParamStore, probe: &[ProbePair], mode: NegativeTerm) -> Result<f64> {
    let mut total = 0.0;
    for p in probe {
        let u_i = store.pull_one(p.target.0)?;
        let u_j = store.pull_one(p.context.0)?;
        let neg_rows: Vec<Vec<f64>> = p
            .negs
            .iter()
            .map(|k| store.pull_one(k.0))
            .collect::<Result<_>>()?;
        let neg_refs: Vec<&[f64]> = neg_rows.iter().map(Vec::as_slice).collect();
        total += pair_loss_in_mode(mode, &u_i, &u_j, &neg_refs)?;
    }
    Ok(total / probe.len().max(1) as f64)
}

#[derive(Debug)]
pub struct UnsupOutcome {
    pub table: EmbeddingTable,
    /// Mean probe loss at initialization and after each completed epoch.
    pub probe_losses: Vec<f64>,
    pub epochs_run: usize,
}

struct Coordination {
    stop: AtomicBool,
    error: Mutex<Option<Error>>,
    probe_losses: Mutex<Vec<f64>>,
    best: Mutex<(f64, usize)>, // (best probe loss, epochs since improvement)
}

impl Coordination {
    fn fail(&self, e: Error) {
        let mut slot = self.error.lock().unwrap();
        if slot.is_none() {
            *slot = Some(e);
        }
        self.stop.store(true, Ordering::SeqCst);
    }
}

/// Trains the embedding table for `cfg.epochs` epochs of asynchronous
/// multi-worker mini-batch SGD and returns the final table together with
/// the per-epoch probe-loss trace.
pub fn train_unsup(
    g: &PartitionedGraph,
    store: &ParamStore,
    cfg: &UnsupConfig,
) -> Result<UnsupOutcome> {
    cfg.validate()?;
    if store.workers() != cfg.workers {
        return Err(Error::InvalidConfig(format!(
            "store registered {} workers, config says {}",
            store.workers(),
            cfg.workers
        )));
    }
    let probe = build_probe(g, cfg);
    let init_loss = probe_loss(store, &probe, cfg.negative_term)?;
    if cfg.verbose {
        println!("[train-unsup] epoch=0 probe_loss={init_loss:.6}");
    }

    let coord = Coordination {
        stop: AtomicBool::new(false),
        error: Mutex::new(None),
        probe_losses: Mutex::new(vec![init_loss]),
        best: Mutex::new((init_loss, 0)),
    };

    if cfg.epochs > 0 {
        let handles = assign_workers(&g.nodes_with_neighbors(), cfg.workers, cfg.seed);
        std::thread::scope(|scope| {
            for handle in &handles {
                let coord = &coord;
                let probe = &probe;
                scope.spawn(move || {
                    worker_loop(g, store, cfg, handle, probe, coord);
                });
            }
        });
    }

    if let Some(e) = coord.error.into_inner().unwrap() {
        return Err(e);
    }
    let probe_losses = coord.probe_losses.into_inner().unwrap();
    let epochs_run = probe_losses.len() - 1;

    let n = g.num_nodes();
    let mut table = EmbeddingTable::zeros(n, cfg.dim);
    for v in g.all_nodes() {
        table.row_mut(v).copy_from_slice(&store.pull_one(v.0)?);
    }
    Ok(UnsupOutcome {
        table,
        probe_losses,
        epochs_run,
    })
}

fn worker_loop(
    g: &PartitionedGraph,
    store: &ParamStore,
    cfg: &UnsupConfig,
    handle: &crate::store::WorkerHandle,
    probe: &[ProbePair],
    coord: &Coordination,
) {
    let leader = handle.worker_id() == 0;
    let batches_per_epoch = handle.nodes().len().div_ceil(cfg.batch_size).max(1);
    let total_steps = (batches_per_epoch * cfg.epochs) as f64;
    let mut step = 0usize;

    for epoch in 0..cfg.epochs as u64 {
        if !coord.stop.load(Ordering::SeqCst) {
            let mut rng = handle.epoch_rng(epoch);
            let nodes = handle.shuffled_nodes(epoch);
            for batch in nodes.chunks(cfg.batch_size) {
                let lr = if cfg.lr_decay {
                    cfg.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4)
                } else {
                    cfg.learning_rate
                };
                step += 1;
                if let Err(e) = run_batch(g, store, cfg, batch, lr, &mut rng) {
                    coord.fail(e);
                    break;
                }
            }
        }
        if let Err(e) = store.barrier(2 * epoch) {
            coord.fail(e);
            return;
        }
        if leader && !coord.stop.load(Ordering::SeqCst) {
            match probe_loss(store, probe, cfg.negative_term) {
                Ok(loss) => {
                    if cfg.verbose {
                        println!("[train-unsup] epoch={} probe_loss={loss:.6}", epoch + 1);
                    }
                    coord.probe_losses.lock().unwrap().push(loss);
                    if !loss.is_finite() {
                        coord.fail(Error::Diverged(format!(
                            "unsupervised probe loss became {loss} at epoch {}",
                            epoch + 1
                        )));
                    } else if let Some(patience) = cfg.early_stop_patience {
                        // improvements below this delta count as a plateau
                        let mut best = coord.best.lock().unwrap();
                        if loss < best.0 - 1e-6 {
                            *best = (loss, 0);
                        } else {
                            best.1 += 1;
                            if best.1 >= patience {
                                coord.stop.store(true, Ordering::SeqCst);
                            }
                        }
                    }
                }
                Err(e) => coord.fail(e),
            }
        }
        if let Err(e) = store.barrier(2 * epoch + 1) {
            coord.fail(e);
            return;
        }
        if coord.stop.load(Ordering::SeqCst) {
            return;
        }
    }
}

fn run_batch<R: Rng>(
    g: &PartitionedGraph,
    store: &ParamStore,
    cfg: &UnsupConfig,
    batch: &[NodeId],
    lr: f64,
    rng: &mut R,
) -> Result<()> {
    let mut tasks: Vec<(NodeId, NodeId, Vec<NodeId>)> = Vec::new();
    for &v in batch {
        let nbrs = match g.sample_neighbors(v, cfg.neighbors_per_node, rng) {
            Ok(nbrs) => nbrs,
            Err(Error::NoNeighbors(_)) => continue,
            Err(e) => return Err(e),
        };
        for j in nbrs {
            tasks.push((v, j, g.sample_negative(cfg.negatives, rng)));
        }
    }
    if tasks.is_empty() {
        return Ok(());
    }

    let mut key_set = BTreeSet::new();
    for (v, j, negs) in &tasks {
        key_set.insert(v.0);
        key_set.insert(j.0);
        key_set.extend(negs.iter().map(|k| k.0));
    }
    let keys: Vec<u64> = key_set.into_iter().collect();
    let pulled = store.pull(&keys)?;
    let mut local: HashMap<u64, Vec<f64>> = keys.iter().copied().zip(pulled).collect();

    // SGD step per pair against the latest local values; updating
    // sequentially keeps hot keys (frequent negatives) stable where a
    // whole-batch gradient at one point would overshoot them.
    let mut target_old = vec![0.0; cfg.dim];
    let mut target_step = vec![0.0; cfg.dim];
    let mut coeffs: Vec<f64> = Vec::with_capacity(cfg.negatives + 1);
    for (v, j, negs) in &tasks {
        target_old.copy_from_slice(&local[&v.0]);
        target_step.fill(0.0);
        coeffs.clear();
        let pos_coeff = -sigmoid(-dot(&target_old, &local[&j.0]));
        coeffs.push(pos_coeff);
        axpy(&mut target_step, pos_coeff, &local[&j.0]);
        for k in negs {
            let u_k = &local[&k.0];
            let c = match cfg.negative_term {
                NegativeTerm::Repel => sigmoid(dot(&target_old, u_k)),
                NegativeTerm::Attract => -sigmoid(-dot(&target_old, u_k)),
            };
            coeffs.push(c);
            axpy(&mut target_step, c, u_k);
        }
        // contexts and negatives move along the pre-step target vector
        axpy(local.get_mut(&j.0).unwrap(), -lr * coeffs[0], &target_old);
        for (c, k) in coeffs[1..].iter().zip(negs) {
            axpy(local.get_mut(&k.0).unwrap(), -lr * c, &target_old);
        }
        axpy(local.get_mut(&v.0).unwrap(), -lr, &target_step);
    }
    store.push(&local.into_iter().collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ingest_edges, IngestConfig};
    use std::io::Cursor;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn pair_loss_all_zero_vectors() {
        let z = vec![0.0; 4];
        let negs: Vec<&[f64]> = (0..5).map(|_| z.as_slice()).collect();
        let loss = pair_loss(&z, &z, &negs).unwrap();
        assert!((loss - 6.0 * LN2).abs() < 1e-12, "loss={loss}");
    }

    #[test]
    fn pair_loss_saturates_to_zero() {
        let u_i = vec![40.0, 0.0];
        let u_j = vec![40.0, 0.0];
        let n = vec![-40.0, 0.0];
        let negs: Vec<&[f64]> = vec![&n];
        let loss = pair_loss(&u_i, &u_j, &negs).unwrap();
        assert!((0.0..1e-12).contains(&loss), "loss={loss}");
    }

    #[test]
    fn pair_loss_scalar_example() {
        let u_i = vec![1.0, 0.0];
        let u_j = vec![1.0, 0.0];
        let n = vec![0.0, 1.0];
        let negs: Vec<&[f64]> = vec![&n];
        let loss = pair_loss(&u_i, &u_j, &negs).unwrap();
        let expected = -sigmoid(1.0).ln() - sigmoid(0.0).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 1.006_408_868_078_17).abs() < 1e-9, "loss={loss}");
    }

    #[test]
    fn pair_grad_zero_vectors_zero_gradients() {
        let z = vec![0.0; 3];
        let negs: Vec<&[f64]> = vec![&z, &z];
        let (g_i, g_j, g_n) = pair_grad(&z, &z, &negs).unwrap();
        assert!(g_i.iter().all(|&x| x == 0.0));
        assert!(g_j.iter().all(|&x| x == 0.0));
        assert!(g_n.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn pair_grad_scalar_example() {
        let u_i = vec![1.0, 0.0];
        let u_j = vec![1.0, 0.0];
        let n = vec![0.0, 1.0];
        let negs: Vec<&[f64]> = vec![&n];
        let (g_i, g_j, g_n) = pair_grad(&u_i, &u_j, &negs).unwrap();
        assert!((g_i[0] - (-0.268_941_421_369_995_1)).abs() < 1e-12);
        assert!((g_i[1] - 0.5).abs() < 1e-12);
        assert!((g_j[0] - (-0.268_941_421_369_995_1)).abs() < 1e-12);
        assert!((g_j[1] - 0.0).abs() < 1e-12);
        assert!((g_n[0][0] - 0.5).abs() < 1e-12);
        assert!((g_n[0][1] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn pair_grad_matches_finite_differences() {
        let mut rng = rng_from(&[21]);
        for _ in 0..20 {
            let d = rng.random_range(2..=8);
            let k = rng.random_range(1..=5);
            let rand_vec = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
            };
            let u_i = rand_vec(&mut rng);
            let u_j = rand_vec(&mut rng);
            let negs: Vec<Vec<f64>> = (0..k).map(|_| rand_vec(&mut rng)).collect();
            let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            let (g_i, g_j, g_n) = pair_grad(&u_i, &u_j, &neg_refs).unwrap();

            let h = 1e-5;
            let fd = |plus: f64, minus: f64| (plus - minus) / (2.0 * h);
            let check = |analytic: f64, numeric: f64| {
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic - numeric).abs() / denom <= 1e-4,
                    "analytic={analytic} numeric={numeric}"
                );
            };
            for t in 0..d {
                let mut up = u_i.clone();
                let mut dn = u_i.clone();
                up[t] += h;
                dn[t] -= h;
                check(
                    g_i[t],
                    fd(
                        pair_loss(&up, &u_j, &neg_refs).unwrap(),
                        pair_loss(&dn, &u_j, &neg_refs).unwrap(),
                    ),
                );

                let mut up = u_j.clone();
                let mut dn = u_j.clone();
                up[t] += h;
                dn[t] -= h;
                check(
                    g_j[t],
                    fd(
                        pair_loss(&u_i, &up, &neg_refs).unwrap(),
                        pair_loss(&u_i, &dn, &neg_refs).unwrap(),
                    ),
                );

                for (ki, neg) in negs.iter().enumerate() {
                    let mut up = neg.clone();
                    let mut dn = neg.clone();
                    up[t] += h;
                    dn[t] -= h;
                    let mut refs_up = neg_refs.clone();
                    let mut refs_dn = neg_refs.clone();
                    refs_up[ki] = &up;
                    refs_dn[ki] = &dn;
                    check(
                        g_n[ki][t],
                        fd(
                            pair_loss(&u_i, &u_j, &refs_up).unwrap(),
                            pair_loss(&u_i, &u_j, &refs_dn).unwrap(),
                        ),
                    );
                }
            }
        }
    }

    #[test]
    fn pair_loss_input_validation() {
        let a = vec![0.0; 2];
        let b = vec![0.0; 3];
        let negs_ok: Vec<&[f64]> = vec![&a];
        assert!(matches!(
            pair_loss(&a, &b, &negs_ok),
            Err(Error::DimensionMismatch { .. })
        ));
        let nan = vec![f64::NAN, 0.0];
        assert!(matches!(
            pair_loss(&nan, &a, &negs_ok),
            Err(Error::NonFinite(_))
        ));
        let no_negs: Vec<&[f64]> = vec![];
        assert!(pair_loss(&a, &a, &no_negs).is_err());
    }

    #[test]
    fn attract_mode_flips_the_negative_gradient() {
        let u_i = vec![0.3, -0.2];
        let u_j = vec![0.1, 0.4];
        let n = vec![0.2, 0.2];
        let negs: Vec<&[f64]> = vec![&n];
        let (_, _, g_repel) = pair_grad_in_mode(NegativeTerm::Repel, &u_i, &u_j, &negs).unwrap();
        let (_, _, g_attr) = pair_grad_in_mode(NegativeTerm::Attract, &u_i, &u_j, &negs).unwrap();
        assert!(g_repel[0][0] > 0.0 && g_attr[0][0] < 0.0);
    }

    fn clique_pair_graph() -> PartitionedGraph {
        // two disjoint 10-node cliques, directed both ways
        let mut text = String::new();
        for base in [0, 10] {
            for i in 0..10 {
                for j in 0..10 {
                    if i != j {
                        text.push_str(&format!("{}\t{}\n", base + i, base + j));
                    }
                }
            }
        }
        let cfg = IngestConfig {
            num_shards: 2,
            ..IngestConfig::default()
        };
        ingest_edges(Cursor::new(text.into_bytes()), &cfg).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let g = clique_pair_graph();
        let cfg = UnsupConfig {
            dim: 8,
            epochs: 0,
            seed: 3,
            ..UnsupConfig::default()
        };
        let store = init_embedding_store(g.num_nodes(), &cfg, 2).unwrap();
        let init: Vec<Vec<f64>> = g.all_nodes().map(|v| store.pull_one(v.0).unwrap()).collect();
        let out = train_unsup(&g, &store, &cfg).unwrap();
        assert_eq!(out.epochs_run, 0);
        assert_eq!(out.probe_losses.len(), 1);
        for (v, row) in g.all_nodes().zip(&init) {
            assert_eq!(out.table.row(v), row.as_slice());
        }
    }

    #[test]
    fn single_worker_training_is_deterministic() {
        let g = clique_pair_graph();
        let cfg = UnsupConfig {
            dim: 8,
            epochs: 3,
            seed: 11,
            ..UnsupConfig::default()
        };
        let run = || {
            let store = init_embedding_store(g.num_nodes(), &cfg, 2).unwrap();
            train_unsup(&g, &store, &cfg).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.table, b.table);
        assert_eq!(a.probe_losses, b.probe_losses);
    }

    #[test]
    fn cliques_separate_after_training() {
        let g = clique_pair_graph();
        let cfg = UnsupConfig {
            dim: 8,
            epochs: 20,
            learning_rate: 0.05,
            neighbors_per_node: 5,
            negatives: 5,
            batch_size: 8,
            seed: 5,
            ..UnsupConfig::default()
        };
        let store = init_embedding_store(g.num_nodes(), &cfg, 2).unwrap();
        let out = train_unsup(&g, &store, &cfg).unwrap();

        let cosine = |a: &[f64], b: &[f64]| {
            let na = dot(a, a).sqrt();
            let nb = dot(b, b).sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                dot(a, b) / (na * nb)
            }
        };
        let clique_of = |v: NodeId| g.raw_id(v).parse::<usize>().unwrap() / 10;
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        let nodes: Vec<NodeId> = g.all_nodes().collect();
        for (ai, &a) in nodes.iter().enumerate() {
            for &b in &nodes[ai + 1..] {
                let c = cosine(out.table.row(a), out.table.row(b));
                if clique_of(a) == clique_of(b) {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let (mi, me) = (mean(&intra), mean(&inter));
        assert!(
            mi - me > 0.2,
            "intra-clique cosine {mi:.3} not separated from inter {me:.3}"
        );
        // probe loss must have improved over initialization
        assert!(out.probe_losses.last().unwrap() < &out.probe_losses[0]);
    }

    #[test]
    fn divergence_aborts_with_diagnostic() {
        let g = clique_pair_graph();
        let cfg = UnsupConfig {
            dim: 8,
            epochs: 30,
            learning_rate: 500.0,
            seed: 2,
            ..UnsupConfig::default()
        };
        let store = init_embedding_store(g.num_nodes(), &cfg, 2).unwrap();
        let err = train_unsup(&g, &store, &cfg).unwrap_err();
        assert!(
            matches!(err, Error::Diverged(_) | Error::NonFinite(_)),
            "unexpected error: {err}"
        );
    }

    #[test]
    fn early_stop_patience_halts_on_plateau() {
        let g = clique_pair_graph();
        let cfg = UnsupConfig {
            dim: 8,
            epochs: 50,
            learning_rate: 1e-9,
            early_stop_patience: Some(2),
            seed: 2,
            ..UnsupConfig::default()
        };
        let store = init_embedding_store(g.num_nodes(), &cfg, 2).unwrap();
        let out = train_unsup(&g, &store, &cfg).unwrap();
        assert!(out.epochs_run < 50, "plateau should stop early, ran {}", out.epochs_run);
    }

    #[test]
    fn multi_worker_matches_single_worker_loss() {
        let g = clique_pair_graph();
        let base = UnsupConfig {
            dim: 8,
            epochs: 12,
            learning_rate: 0.05,
            batch_size: 8,
            seed: 17,
            ..UnsupConfig::default()
        };
        let run = |workers: usize| {
            let cfg = UnsupConfig { workers, ..base.clone() };
            let store = init_embedding_store(g.num_nodes(), &cfg, 2).unwrap();
            let out = train_unsup(&g, &store, &cfg).unwrap();
            *out.probe_losses.last().unwrap()
        };
        let single = run(1);
        let multi = run(4);
        let rel = (single - multi).abs() / single.abs();
        assert!(rel < 0.05, "single={single} multi={multi} rel={rel}");
    }
}
