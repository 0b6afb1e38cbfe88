//! Supervised local-structure representations and default scores.
//!
//! Each labeled node is represented by repeatedly aggregating its
//! neighbors: one step maps a node to an elementwise sigmoid of W1 times
//! the mean of its neighbors' previous vectors, starting from trainable
//! per-node base vectors. A prediction head squashes w2·u into a default
//! probability, trained with L2-regularized cross entropy. The trainer
//! follows the same pull/compute/push/barrier cycle as the unsupervised
//! one; base vectors live in an overwrite-mode store, the shared W1/w2 in
//! an add-mode store so concurrent updates accumulate instead of
//! clobbering each other.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use rand::Rng;

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{NodeId, PartitionedGraph};
use crate::labels::{LabeledSet, Split};
use crate::math::{axpy, dot, sigmoid, squared_norm};
use crate::store::{assign_workers, ParamStore, UpdateMode};
use crate::util::{rng_from, STREAM_INFER, STREAM_INIT, STREAM_PROBE};

/// Prediction clamp; keeps log terms finite.
pub const PRED_EPSILON: f64 = 1e-7;

/// Key of the aggregation matrix in the shared store.
pub const KEY_W1: u64 = 0;
/// Key of the prediction vector in the shared store.
pub const KEY_W2: u64 = 1;

#[derive(Clone, Debug)]
pub struct SupConfig {
    /// Representation width k.
    pub k: usize,
    /// Number of aggregation applications.
    pub steps: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    /// Neighbors sampled per node per step during training.
    pub fanout: usize,
    pub batch_size: usize,
    /// Uniform init half-width; defaults to 0.5/k when `None`.
    pub init_scale: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    pub verbose: bool,
}

impl Default for SupConfig {
    fn default() -> Self {
        SupConfig {
            k: 32,
            steps: 2,
            epochs: 10,
            learning_rate: 0.01,
            lambda: 1e-5,
            fanout: 25,
            batch_size: 512,
            init_scale: None,
            seed: 7,
            workers: 1,
            verbose: false,
        }
    }
}

impl SupConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0
            || self.steps == 0
            || self.fanout == 0
            || self.batch_size == 0
            || self.workers == 0
        {
            return Err(Error::InvalidConfig(
                "k, steps, fanout, batch_size and workers must be positive".into(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(
                "learning_rate must be > 0 and lambda >= 0".into(),
            ));
        }
        Ok(())
    }

    fn init_scale(&self) -> f64 {
        self.init_scale.unwrap_or(0.5 / self.k as f64)
    }
}

/// Trained supervised parameters: per-node base vectors, the k-by-k
/// aggregation matrix (row major) and the prediction vector.
#[derive(Clone, Debug)]
pub struct SupervisedParams {
    pub base: EmbeddingTable,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub steps: usize,
    pub lambda: f64,
}

impl SupervisedParams {
    pub fn k(&self) -> usize {
        self.w2.len()
    }

    fn check(&self) -> Result<()> {
        let k = self.w2.len();
        if self.w1.len() != k * k || self.base.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.base.dim(),
            });
        }
        Ok(())
    }
}

fn matvec(k: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for r in 0..k {
        out[r] = dot(&m[r * k..(r + 1) * k], x);
    }
}

/// out += M^T x
fn matvec_t_add(k: usize, m: &[f64], x: &[f64], out: &mut [f64]) {
    for r in 0..k {
        let row = &m[r * k..(r + 1) * k];
        let xr = x[r];
        for c in 0..k {
            out[c] += row[c] * xr;
        }
    }
}

/// One aggregation step for `v` against a full table of previous-step
/// vectors: sigmoid of W1 times the neighbor mean. Isolated nodes fall
/// back to their own previous vector.
pub fn aggregate_step(
    v: NodeId,
    prev: &EmbeddingTable,
    w1: &[f64],
    g: &PartitionedGraph,
) -> Result<Vec<f64>> {
    let k = prev.dim();
    if w1.len() != k * k {
        return Err(Error::DimensionMismatch {
            expected: k * k,
            got: w1.len(),
        });
    }
    let nbrs = g.neighbors(v);
    let mut mean = vec![0.0; k];
    if nbrs.is_empty() {
        mean.copy_from_slice(prev.row(v));
    } else {
        for &j in nbrs {
            axpy(&mut mean, 1.0, prev.row(j));
        }
        for m in &mut mean {
            *m /= nbrs.len() as f64;
        }
    }
    let mut out = vec![0.0; k];
    matvec(k, w1, &mean, &mut out);
    for o in &mut out {
        *o = sigmoid(*o);
    }
    Ok(out)
}

/// σ(w2·u), strictly inside (0, 1).
pub fn predict_default(u: &[f64], w2: &[f64]) -> Result<f64> {
    if u.len() != w2.len() {
        return Err(Error::DimensionMismatch {
            expected: w2.len(),
            got: u.len(),
        });
    }
    Ok(sigmoid(dot(w2, u)).clamp(PRED_EPSILON, 1.0 - PRED_EPSILON))
}

/// Summed cross entropy with clamping; returns (loss, clamp count).
pub fn cross_entropy(preds: &[f64], labels: &[u8]) -> Result<(f64, usize)> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    let mut total = 0.0;
    let mut clamped = 0;
    for (&p, &y) in preds.iter().zip(labels) {
        let p = if p <= PRED_EPSILON || p >= 1.0 - PRED_EPSILON {
            clamped += 1;
            p.clamp(PRED_EPSILON, 1.0 - PRED_EPSILON)
        } else {
            p
        };
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok((total, clamped))
}

/// Full objective: summed cross entropy plus
/// `lambda * (|base|^2 + |W1|^2 + |w2|^2)`.
pub fn sup_loss(preds: &[f64], labels: &[u8], params: &SupervisedParams) -> Result<f64> {
    params.check()?;
    let (ce, _) = cross_entropy(preds, labels)?;
    let mut reg = squared_norm(&params.w1) + squared_norm(&params.w2);
    for v in 0..params.base.len() as u64 {
        reg += squared_norm(params.base.row(NodeId(v)));
    }
    Ok(ce + params.lambda * reg)
}

/// The receptive field of one batch: per level the deduplicated node
/// list, and per node the indices of its aggregation sources one level
/// down. Isolated nodes use themselves as the single source.
struct BatchPlan {
    steps: usize,
    /// `level_nodes[t]` for t in 0..=steps, ascending node ids.
    level_nodes: Vec<Vec<NodeId>>,
    /// `sources[t-1][i]`: indices into `level_nodes[t-1]` feeding node i
    /// of `level_nodes[t]`.
    sources: Vec<Vec<Vec<u32>>>,
    isolated_fallbacks: u64,
}

impl BatchPlan {
    /// `rng == None` takes full neighborhoods (the deterministic oracle
    /// path); otherwise neighborhoods above `fanout` are sampled down.
    fn build<R: Rng>(
        g: &PartitionedGraph,
        targets: &[NodeId],
        steps: usize,
        fanout: usize,
        mut rng: Option<&mut R>,
    ) -> Result<BatchPlan> {
        let mut level_nodes = vec![Vec::new(); steps + 1];
        let mut sources = vec![Vec::new(); steps];
        let mut top: Vec<NodeId> = targets.to_vec();
        top.sort_unstable();
        top.dedup();
        level_nodes[steps] = top;
        let mut isolated = 0u64;

        for t in (1..=steps).rev() {
            let mut child_lists: Vec<Vec<NodeId>> = Vec::with_capacity(level_nodes[t].len());
            let mut child_set: HashSet<NodeId> = HashSet::new();
            for &v in &level_nodes[t] {
                let nbrs = g.neighbors(v);
                let picked: Vec<NodeId> = if nbrs.is_empty() {
                    isolated += 1;
                    vec![v]
                } else if nbrs.len() <= fanout {
                    nbrs.to_vec()
                } else {
                    match rng.as_deref_mut() {
                        Some(r) => g.sample_neighbors(v, fanout, r)?,
                        None => nbrs.to_vec(),
                    }
                };
                child_set.extend(picked.iter().copied());
                child_lists.push(picked);
            }
            let mut children: Vec<NodeId> = child_set.into_iter().collect();
            children.sort_unstable();
            let index: HashMap<NodeId, u32> = children
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, i as u32))
                .collect();
            sources[t - 1] = child_lists
                .into_iter()
                .map(|list| list.into_iter().map(|v| index[&v]).collect())
                .collect();
            level_nodes[t - 1] = children;
        }
        Ok(BatchPlan {
            steps,
            level_nodes,
            sources,
            isolated_fallbacks: isolated,
        })
    }

    fn base_nodes(&self) -> &[NodeId] {
        &self.level_nodes[0]
    }

    fn targets(&self) -> &[NodeId] {
        &self.level_nodes[self.steps]
    }
}

/// Forward activations of one batch plan.
struct ForwardState {
    /// `h[t]`: flattened k-vectors aligned with `level_nodes[t]`.
    h: Vec<Vec<f64>>,
    /// Neighbor means feeding each level-t node (t >= 1).
    means: Vec<Vec<f64>>,
    /// Clamped sigmoid score per target, aligned with `plan.targets()`.
    preds: Vec<f64>,
}

fn forward(plan: &BatchPlan, k: usize, base: &[f64], w1: &[f64], w2: &[f64]) -> ForwardState {
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(plan.steps + 1);
    h.push(base.to_vec());
    let mut means = Vec::with_capacity(plan.steps);
    for t in 1..=plan.steps {
        let nodes = plan.level_nodes[t].len();
        let mut mean_buf = vec![0.0; nodes * k];
        let mut h_t = vec![0.0; nodes * k];
        for i in 0..nodes {
            let srcs = &plan.sources[t - 1][i];
            let mean = &mut mean_buf[i * k..(i + 1) * k];
            for &s in srcs {
                let s = s as usize;
                axpy(mean, 1.0, &h[t - 1][s * k..(s + 1) * k]);
            }
            let inv = 1.0 / srcs.len() as f64;
            for m in mean.iter_mut() {
                *m *= inv;
            }
            let out = &mut h_t[i * k..(i + 1) * k];
            matvec(k, w1, mean, out);
            for o in out.iter_mut() {
                *o = sigmoid(*o);
            }
        }
        means.push(mean_buf);
        h.push(h_t);
    }
    let top = plan.steps;
    let preds = (0..plan.level_nodes[top].len())
        .map(|i| sigmoid(dot(w2, &h[top][i * k..(i + 1) * k])).clamp(PRED_EPSILON, 1.0 - PRED_EPSILON))
        .collect();
    ForwardState { h, means, preds }
}

/// Cross-entropy value and gradients of one batch.
struct BatchGrads {
    /// Aligned with `plan.base_nodes()`, flattened.
    d_base: Vec<f64>,
    d_w1: Vec<f64>,
    d_w2: Vec<f64>,
    ce: f64,
    clamps: usize,
}

/// Reverse pass through the aggregation stack. `examples` pairs target
/// indices (into `plan.targets()`) with labels; a node labeled by
/// several records simply contributes once per record.
fn backward(
    plan: &BatchPlan,
    k: usize,
    state: &ForwardState,
    w1: &[f64],
    w2: &[f64],
    examples: &[(usize, u8)],
) -> BatchGrads {
    let top = plan.steps;
    let mut d_h: Vec<Vec<f64>> = plan
        .level_nodes
        .iter()
        .map(|nodes| vec![0.0; nodes.len() * k])
        .collect();
    let mut d_w1 = vec![0.0; k * k];
    let mut d_w2 = vec![0.0; k];
    let mut ce = 0.0;
    let mut clamps = 0;

    for &(ti, y) in examples {
        let p = state.preds[ti];
        if p <= PRED_EPSILON || p >= 1.0 - PRED_EPSILON {
            clamps += 1;
        }
        ce -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
        let dz = p - y as f64;
        axpy(&mut d_w2, dz, &state.h[top][ti * k..(ti + 1) * k]);
        axpy(&mut d_h[top][ti * k..(ti + 1) * k], dz, w2);
    }

    let mut da = vec![0.0; k];
    for t in (1..=top).rev() {
        for i in 0..plan.level_nodes[t].len() {
            let g_out = &d_h[t][i * k..(i + 1) * k];
            if g_out.iter().all(|&x| x == 0.0) {
                continue;
            }
            let h_t = &state.h[t][i * k..(i + 1) * k];
            for c in 0..k {
                da[c] = g_out[c] * h_t[c] * (1.0 - h_t[c]);
            }
            let mean = &state.means[t - 1][i * k..(i + 1) * k];
            for r in 0..k {
                axpy(&mut d_w1[r * k..(r + 1) * k], da[r], mean);
            }
            let mut dm = vec![0.0; k];
            matvec_t_add(k, w1, &da, &mut dm);
            let srcs = &plan.sources[t - 1][i];
            let inv = 1.0 / srcs.len() as f64;
            // borrow dance: d_h[t] is read, d_h[t-1] written
            let (lower, upper) = d_h.split_at_mut(t);
            let _ = upper;
            for &s in srcs {
                let s = s as usize;
                axpy(&mut lower[t - 1][s * k..(s + 1) * k], inv, &dm);
            }
        }
    }

    BatchGrads {
        d_base: std::mem::take(&mut d_h[0]),
        d_w1,
        d_w2,
        ce,
        clamps,
    }
}

/// Exact value and gradient of [`sup_loss`] over the given examples with
/// full neighborhoods. The gradient covers every base row (regularization
/// reaches rows outside the receptive field too), W1 and w2.
pub fn full_loss_and_grad(
    g: &PartitionedGraph,
    params: &SupervisedParams,
    examples: &[(NodeId, u8)],
) -> Result<(f64, EmbeddingTable, Vec<f64>, Vec<f64>)> {
    params.check()?;
    let k = params.k();
    let targets: Vec<NodeId> = examples.iter().map(|&(v, _)| v).collect();
    let plan = BatchPlan::build::<rand_chacha::ChaCha8Rng>(g, &targets, params.steps, usize::MAX, None)?;
    let base_flat = gather_rows(&params.base, plan.base_nodes());
    let state = forward(&plan, k, &base_flat, &params.w1, &params.w2);

    let target_index: HashMap<NodeId, usize> = plan
        .targets()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let idx_examples: Vec<(usize, u8)> = examples
        .iter()
        .map(|&(v, y)| (target_index[&v], y))
        .collect();
    let grads = backward(&plan, k, &state, &params.w1, &params.w2, &idx_examples);

    let n = params.base.len();
    let mut d_base = EmbeddingTable::zeros(n, k);
    for (i, &v) in plan.base_nodes().iter().enumerate() {
        d_base.row_mut(v).copy_from_slice(&grads.d_base[i * k..(i + 1) * k]);
    }
    let lam2 = 2.0 * params.lambda;
    for v in 0..n as u64 {
        let v = NodeId(v);
        let row = params.base.row(v).to_vec();
        axpy(d_base.row_mut(v), lam2, &row);
    }
    let mut d_w1 = grads.d_w1;
    axpy(&mut d_w1, lam2, &params.w1);
    let mut d_w2 = grads.d_w2;
    axpy(&mut d_w2, lam2, &params.w2);

    let mut reg = squared_norm(&params.w1) + squared_norm(&params.w2);
    for v in 0..n as u64 {
        reg += squared_norm(params.base.row(NodeId(v)));
    }
    Ok((grads.ce + params.lambda * reg, d_base, d_w1, d_w2))
}

fn gather_rows(table: &EmbeddingTable, nodes: &[NodeId]) -> Vec<f64> {
    let k = table.dim();
    let mut out = Vec::with_capacity(nodes.len() * k);
    for &v in nodes {
        out.extend_from_slice(table.row(v));
    }
    out
}

/// Parameter stores backing supervised training: per-node base vectors in
/// overwrite mode, the shared W1/w2 pair in add mode.
pub struct SupStores {
    pub base: ParamStore,
    pub shared: ParamStore,
}

/// Builds both stores. Base rows initialize uniform in [-scale, scale]
/// per node (or copy the warm-start table); W1 and w2 initialize from the
/// same distribution unless `zero_head` asks for a zeroed prediction head.
pub fn init_sup_stores(
    num_nodes: usize,
    cfg: &SupConfig,
    store_shards: usize,
    warm_start: Option<&EmbeddingTable>,
) -> Result<SupStores> {
    cfg.validate()?;
    if let Some(t) = warm_start {
        if t.dim() != cfg.k || t.len() != num_nodes {
            return Err(Error::InvalidConfig(format!(
                "warm-start table is {}x{}, expected {}x{}",
                t.len(),
                t.dim(),
                num_nodes,
                cfg.k
            )));
        }
    }
    let scale = cfg.init_scale();
    let k = cfg.k;
    let seed = cfg.seed;
    let rows = (0..num_nodes as u64).map(|v| {
        let row = match warm_start {
            Some(t) => t.row(NodeId(v)).to_vec(),
            None => {
                let mut rng = rng_from(&[seed, STREAM_INIT, 11, v]);
                (0..k).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect()
            }
        };
        (v, row)
    });
    let base = ParamStore::new(store_shards, UpdateMode::Overwrite, cfg.workers, rows)?;

    // The shared weights use a fan-in-scaled width; the tiny base-table
    // scale would leave the first epochs stuck near the symmetric point.
    let mut rng = rng_from(&[seed, STREAM_INIT, 12]);
    let w_scale = (3.0 / k as f64).sqrt();
    let w1: Vec<f64> = (0..k * k)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * w_scale)
        .collect();
    let w2: Vec<f64> = (0..k)
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * w_scale)
        .collect();
    let shared = ParamStore::new(
        store_shards.min(2),
        UpdateMode::Add,
        cfg.workers,
        vec![(KEY_W1, w1), (KEY_W2, w2)],
    )?;
    Ok(SupStores { base, shared })
}

pub struct SupOutcome {
    pub params: SupervisedParams,
    /// Score per labeled node (train and test), by dense id.
    pub scores: Vec<(NodeId, f64)>,
    /// Aggregated per-node representations u^s after `steps` applications.
    pub representations: EmbeddingTable,
    /// Mean train cross entropy at initialization and after each epoch.
    pub probe_losses: Vec<f64>,
    pub isolated_fallbacks: u64,
    /// Predictions clamped away from exactly 0 or 1 during training.
    pub clamped_preds: u64,
    /// Labeled ids absent from the graph, dropped before training.
    pub unresolved_labels: usize,
}

struct Coordination {
    stop: AtomicBool,
    error: Mutex<Option<Error>>,
    probe_losses: Mutex<Vec<f64>>,
    isolated: AtomicU64,
    clamped: AtomicU64,
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

/// Trains base vectors, W1 and w2 by multi-worker mini-batch SGD over the
/// labeled train split, then scores every resolved labeled node.
pub fn train_sup(
    g: &PartitionedGraph,
    labels: &LabeledSet,
    stores: &SupStores,
    cfg: &SupConfig,
) -> Result<SupOutcome> {
    cfg.validate()?;
    if stores.base.workers() != cfg.workers || stores.shared.workers() != cfg.workers {
        return Err(Error::InvalidConfig(
            "stores registered a different worker count than the config".into(),
        ));
    }
    let (resolved, unresolved) = labels.resolve(g);
    if resolved.is_empty() {
        return Err(Error::EmptyInput("no labeled node resolves against the graph".into()));
    }
    let train: Vec<(NodeId, u8)> = resolved
        .iter()
        .filter(|(_, r)| r.split == Split::Train)
        .map(|(v, r)| (*v, r.label))
        .collect();
    let has_pos = train.iter().any(|&(_, y)| y == 1);
    let has_neg = train.iter().any(|&(_, y)| y == 0);
    if !has_pos || !has_neg {
        return Err(Error::SingleClass {
            context: "supervised training labels".into(),
        });
    }

    // Fixed probe subset of train examples for per-epoch loss logging.
    let probe: Vec<(NodeId, u8)> = {
        let mut rng = rng_from(&[cfg.seed, STREAM_PROBE, 21]);
        let mut idx: Vec<usize> = (0..train.len()).collect();
        if idx.len() > 2048 {
            idx = rand::seq::index::sample(&mut rng, train.len(), 2048).into_vec();
        }
        idx.into_iter().map(|i| train[i]).collect()
    };

    let init_loss = probe_ce(g, stores, cfg, &probe)?;
    if cfg.verbose {
        println!("[train-sup] epoch=0 probe_ce={init_loss:.6}");
    }
    let coord = Coordination {
        stop: AtomicBool::new(false),
        error: Mutex::new(None),
        probe_losses: Mutex::new(vec![init_loss]),
        isolated: AtomicU64::new(0),
        clamped: AtomicU64::new(0),
    };

    if cfg.epochs > 0 {
        // Workers own labeled nodes; a node carrying several records shows
        // up once per epoch and contributes all of them in that batch.
        let node_list: Vec<NodeId> = {
            let mut nodes: Vec<NodeId> = train.iter().map(|&(v, _)| v).collect();
            nodes.sort_unstable();
            nodes.dedup();
            nodes
        };
        let handles = assign_workers(&node_list, cfg.workers, cfg.seed);
        let by_node: HashMap<NodeId, Vec<u8>> = {
            let mut m: HashMap<NodeId, Vec<u8>> = HashMap::new();
            for &(v, y) in &train {
                m.entry(v).or_default().push(y);
            }
            m
        };
        let total_train = train.len();
        std::thread::scope(|scope| {
            for handle in &handles {
                let coord = &coord;
                let by_node = &by_node;
                let probe = &probe;
                scope.spawn(move || {
                    sup_worker_loop(g, stores, cfg, handle, by_node, total_train, probe, coord);
                });
            }
        });
    }

    if let Some(e) = coord.error.into_inner().unwrap() {
        return Err(e);
    }

    let params = pull_params(g.num_nodes(), stores, cfg)?;
    let score_nodes: Vec<NodeId> = {
        let mut set: Vec<NodeId> = resolved.iter().map(|&(v, _)| v).collect();
        set.sort_unstable();
        set.dedup();
        set
    };
    let inferred = infer_scores(g, &params, &score_nodes, cfg)?;
    Ok(SupOutcome {
        params,
        scores: inferred.scores,
        representations: inferred.representations,
        probe_losses: coord.probe_losses.into_inner().unwrap(),
        isolated_fallbacks: coord.isolated.into_inner() + inferred.isolated_fallbacks,
        clamped_preds: coord.clamped.into_inner(),
        unresolved_labels: unresolved,
    })
}

fn pull_params(n: usize, stores: &SupStores, cfg: &SupConfig) -> Result<SupervisedParams> {
    let mut base = EmbeddingTable::zeros(n, cfg.k);
    for v in 0..n as u64 {
        base.row_mut(NodeId(v)).copy_from_slice(&stores.base.pull_one(v)?);
    }
    Ok(SupervisedParams {
        base,
        w1: stores.shared.pull_one(KEY_W1)?,
        w2: stores.shared.pull_one(KEY_W2)?,
        steps: cfg.steps,
        lambda: cfg.lambda,
    })
}

fn probe_ce(
    g: &PartitionedGraph,
    stores: &SupStores,
    cfg: &SupConfig,
    probe: &[(NodeId, u8)],
) -> Result<f64> {
    let targets: Vec<NodeId> = probe.iter().map(|&(v, _)| v).collect();
    // Deterministic capped neighborhoods keep probe cost bounded on hubs.
    let mut rng = rng_from(&[cfg.seed, STREAM_PROBE, 22]);
    let plan = BatchPlan::build(g, &targets, cfg.steps, cfg.fanout, Some(&mut rng))?;
    let base_keys: Vec<u64> = plan.base_nodes().iter().map(|v| v.0).collect();
    let pulled = stores.base.pull(&base_keys)?;
    let base_flat: Vec<f64> = pulled.into_iter().flatten().collect();
    let w1 = stores.shared.pull_one(KEY_W1)?;
    let w2 = stores.shared.pull_one(KEY_W2)?;
    let state = forward(&plan, cfg.k, &base_flat, &w1, &w2);
    let target_index: HashMap<NodeId, usize> = plan
        .targets()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let mut total = 0.0;
    for &(v, y) in probe {
        let p = state.preds[target_index[&v]];
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / probe.len().max(1) as f64)
}

#[allow(clippy::too_many_arguments)]
fn sup_worker_loop(
    g: &PartitionedGraph,
    stores: &SupStores,
    cfg: &SupConfig,
    handle: &crate::store::WorkerHandle,
    by_node: &HashMap<NodeId, Vec<u8>>,
    total_train: usize,
    probe: &[(NodeId, u8)],
    coord: &Coordination,
) {
    let leader = handle.worker_id() == 0;
    for epoch in 0..cfg.epochs as u64 {
        if !coord.stop.load(Ordering::SeqCst) {
            let mut rng = handle.epoch_rng(epoch);
            let nodes = handle.shuffled_nodes(epoch);
            for batch in nodes.chunks(cfg.batch_size) {
                match run_sup_batch(g, stores, cfg, batch, by_node, total_train, &mut rng) {
                    Ok((isolated, clamped)) => {
                        coord.isolated.fetch_add(isolated, Ordering::Relaxed);
                        coord.clamped.fetch_add(clamped, Ordering::Relaxed);
                    }
                    Err(e) => {
                        coord.fail(e);
                        break;
                    }
                }
            }
        }
        if let Err(e) = stores.base.barrier(2 * epoch) {
            coord.fail(e);
            return;
        }
        if leader && !coord.stop.load(Ordering::SeqCst) {
            match probe_ce(g, stores, cfg, probe) {
                Ok(loss) => {
                    if cfg.verbose {
                        println!("[train-sup] epoch={} probe_ce={loss:.6}", epoch + 1);
                    }
                    coord.probe_losses.lock().unwrap().push(loss);
                    if !loss.is_finite() {
                        coord.fail(Error::Diverged(format!(
                            "supervised probe loss became {loss} at epoch {}",
                            epoch + 1
                        )));
                    }
                }
                Err(e) => coord.fail(e),
            }
        }
        if let Err(e) = stores.base.barrier(2 * epoch + 1) {
            coord.fail(e);
            return;
        }
        if coord.stop.load(Ordering::SeqCst) {
            return;
        }
    }
}

fn run_sup_batch<R: Rng>(
    g: &PartitionedGraph,
    stores: &SupStores,
    cfg: &SupConfig,
    batch: &[NodeId],
    by_node: &HashMap<NodeId, Vec<u8>>,
    total_train: usize,
    rng: &mut R,
) -> Result<(u64, u64)> {
    let plan = BatchPlan::build(g, batch, cfg.steps, cfg.fanout, Some(rng))?;
    let k = cfg.k;
    let base_keys: Vec<u64> = plan.base_nodes().iter().map(|v| v.0).collect();
    let pulled = stores.base.pull(&base_keys)?;
    let base_flat: Vec<f64> = pulled.into_iter().flatten().collect();
    let w1 = stores.shared.pull_one(KEY_W1)?;
    let w2 = stores.shared.pull_one(KEY_W2)?;

    let state = forward(&plan, k, &base_flat, &w1, &w2);

    let mut examples: Vec<(usize, u8)> = Vec::new();
    for (i, v) in plan.targets().iter().enumerate() {
        for &y in by_node.get(v).map(Vec::as_slice).unwrap_or(&[]) {
            examples.push((i, y));
        }
    }
    let n_examples = examples.len();
    if n_examples == 0 {
        return Ok((plan.isolated_fallbacks, 0));
    }
    let grads = backward(&plan, k, &state, &w1, &w2, &examples);

    // Mean-normalized step with regularization folded in at 2λ/N so one
    // epoch applies the full penalty once.
    let inv = 1.0 / n_examples as f64;
    let reg_coeff = 2.0 * cfg.lambda / total_train as f64;
    let lr = cfg.learning_rate;

    let mut base_updates = Vec::with_capacity(plan.base_nodes().len());
    for (i, &v) in plan.base_nodes().iter().enumerate() {
        let mut row = base_flat[i * k..(i + 1) * k].to_vec();
        let g_row = &grads.d_base[i * k..(i + 1) * k];
        for (c, (r, gr)) in row.iter_mut().zip(g_row).enumerate() {
            let _ = c;
            *r -= lr * (gr * inv + reg_coeff * *r);
        }
        base_updates.push((v.0, row));
    }
    stores.base.push(&base_updates)?;

    let mut d_w1_step = vec![0.0; k * k];
    for (t, (gw, w)) in d_w1_step.iter_mut().zip(grads.d_w1.iter().zip(&w1)) {
        *t = -lr * (gw * inv + reg_coeff * w);
    }
    let mut d_w2_step = vec![0.0; k];
    for (t, (gw, w)) in d_w2_step.iter_mut().zip(grads.d_w2.iter().zip(&w2)) {
        *t = -lr * (gw * inv + reg_coeff * w);
    }
    stores.shared.push(&[(KEY_W1, d_w1_step), (KEY_W2, d_w2_step)])?;
    Ok((plan.isolated_fallbacks, grads.clamps as u64))
}

pub struct InferOutcome {
    pub scores: Vec<(NodeId, f64)>,
    /// Final-step representation for every graph node.
    pub representations: EmbeddingTable,
    pub isolated_fallbacks: u64,
}

/// Scores nodes with the trained parameters by running the aggregation
/// over the whole graph level by level. Neighborhoods above the fanout
/// cap are sampled with a per-node seeded RNG, so inference is
/// deterministic.
pub fn infer_scores(
    g: &PartitionedGraph,
    params: &SupervisedParams,
    nodes: &[NodeId],
    cfg: &SupConfig,
) -> Result<InferOutcome> {
    params.check()?;
    let k = params.k();
    let n = g.num_nodes();
    let mut isolated = 0u64;
    let mut prev: Vec<f64> = (0..n as u64).flat_map(|v| params.base.row(NodeId(v)).to_vec()).collect();
    let mut next = vec![0.0; n * k];
    let mut mean = vec![0.0; k];
    for _t in 0..params.steps {
        for v in 0..n {
            let node = NodeId(v as u64);
            let nbrs = g.neighbors(node);
            mean.fill(0.0);
            if nbrs.is_empty() {
                isolated += 1;
                mean.copy_from_slice(&prev[v * k..(v + 1) * k]);
            } else if nbrs.len() <= cfg.fanout {
                for &j in nbrs {
                    axpy(&mut mean, 1.0, &prev[j.index() * k..(j.index() + 1) * k]);
                }
                for m in &mut mean {
                    *m /= nbrs.len() as f64;
                }
            } else {
                let mut rng = rng_from(&[cfg.seed, STREAM_INFER, v as u64]);
                let picked = g.sample_neighbors(node, cfg.fanout, &mut rng)?;
                for &j in &picked {
                    axpy(&mut mean, 1.0, &prev[j.index() * k..(j.index() + 1) * k]);
                }
                for m in &mut mean {
                    *m /= picked.len() as f64;
                }
            }
            let out = &mut next[v * k..(v + 1) * k];
            matvec(k, &params.w1, &mean, out);
            for o in out.iter_mut() {
                *o = sigmoid(*o);
            }
        }
        std::mem::swap(&mut prev, &mut next);
    }
    let scores = nodes
        .iter()
        .map(|&v| {
            let u = &prev[v.index() * k..(v.index() + 1) * k];
            predict_default(u, &params.w2).map(|p| (v, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let representations = EmbeddingTable::from_rows(
        k,
        (0..n).map(|v| prev[v * k..(v + 1) * k].to_vec()).collect(),
    )?;
    Ok(InferOutcome {
        scores,
        representations,
        isolated_fallbacks: isolated,
    })
}
