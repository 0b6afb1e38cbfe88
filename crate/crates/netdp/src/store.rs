//! In-process sharded parameter store with pull/push/barrier semantics.
//!
//! Keys are owned by shards through the same hash used for graph
//! partitioning. Within an epoch, workers pull point-in-time copies and
//! push updates asynchronously; pushes are atomic per key (a pulled
//! vector is never a mix of two writes). A barrier is the only
//! cross-worker synchronization point and bumps the store version once
//! per rendezvous.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::util::{rng_from, shard_of, worker_of, STREAM_WORKER};

/// What a push does to the stored vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    /// The pushed value replaces the stored one (last write wins).
    Overwrite,
    /// The pushed value is accumulated onto the stored one.
    Add,
}

struct BarrierState {
    arrived: usize,
    generation: u64,
    /// Epoch label of the currently open rendezvous, if any.
    open_epoch: Option<u64>,
}

pub struct ParamStore {
    shards: Vec<HashMap<u64, Mutex<Vec<f64>>>>,
    num_shards: usize,
    mode: UpdateMode,
    version: AtomicU64,
    workers: usize,
    barrier: Mutex<BarrierState>,
    barrier_cv: Condvar,
    barrier_timeout: Duration,
}

impl ParamStore {
    /// Builds a store owning the given key/vector pairs. The key set is
    /// fixed afterwards; `workers` is the number of parties every
    /// barrier waits for.
    pub fn new(
        num_shards: usize,
        mode: UpdateMode,
        workers: usize,
        entries: impl IntoIterator<Item = (u64, Vec<f64>)>,
    ) -> Result<ParamStore> {
        if num_shards == 0 || workers == 0 {
            return Err(Error::InvalidConfig(
                "param store needs >= 1 shard and >= 1 worker".into(),
            ));
        }
        let mut shards: Vec<HashMap<u64, Mutex<Vec<f64>>>> =
            (0..num_shards).map(|_| HashMap::new()).collect();
        for (key, vec) in entries {
            if vec.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("param store initialization"));
            }
            shards[shard_of(key, num_shards)].insert(key, Mutex::new(vec));
        }
        Ok(ParamStore {
            shards,
            num_shards,
            mode,
            version: AtomicU64::new(0),
            workers,
            barrier: Mutex::new(BarrierState {
                arrived: 0,
                generation: 0,
                open_epoch: None,
            }),
            barrier_cv: Condvar::new(),
            barrier_timeout: Duration::from_secs(60),
        })
    }

    pub fn with_barrier_timeout(mut self, timeout: Duration) -> ParamStore {
        self.barrier_timeout = timeout;
        self
    }

    pub fn update_mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn num_shards(&self) -> usize {
        self.num_shards
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Epoch counter; bumped once per completed barrier.
    pub fn version(&self) -> u64 {
        self.version.load(Ordering::SeqCst)
    }

    fn slot(&self, key: u64) -> Result<&Mutex<Vec<f64>>> {
        self.shards[shard_of(key, self.num_shards)]
            .get(&key)
            .ok_or(Error::UnknownKey(key))
    }

    /// Point-in-time copies of the requested vectors. Concurrent pushes
    /// may land between two keys of the same pull; each single vector is
    /// consistent.
    pub fn pull(&self, keys: &[u64]) -> Result<Vec<Vec<f64>>> {
        keys.iter()
            .map(|&k| Ok(self.slot(k)?.lock().unwrap().clone()))
            .collect()
    }

    pub fn pull_one(&self, key: u64) -> Result<Vec<f64>> {
        Ok(self.slot(key)?.lock().unwrap().clone())
    }

    /// Applies updates per the store mode. All updates are validated
    /// before any is applied; a non-finite vector rejects the whole push.
    pub fn push(&self, updates: &[(u64, Vec<f64>)]) -> Result<()> {
        for (key, vec) in updates {
            let slot = self.slot(*key)?;
            if vec.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("push"));
            }
            let expected = slot.lock().unwrap().len();
            if vec.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: vec.len(),
                });
            }
        }
        for (key, vec) in updates {
            let slot = self.slot(*key)?;
            let mut stored = slot.lock().unwrap();
            match self.mode {
                UpdateMode::Overwrite => stored.copy_from_slice(vec),
                UpdateMode::Add => {
                    for (s, d) in stored.iter_mut().zip(vec) {
                        *s += d;
                    }
                }
            }
        }
        Ok(())
    }

    /// Rendezvous of all registered workers. Returns once every worker
    /// has arrived with the same `epoch` label; the store version is
    /// incremented exactly once per rendezvous. Writes made before the
    /// barrier are visible to every worker after it.
    pub fn barrier(&self, epoch: u64) -> Result<()> {
        let mut state = self.barrier.lock().unwrap();
        match state.open_epoch {
            Some(open) if open != epoch => {
                return Err(Error::BarrierEpochMismatch {
                    expected: open,
                    got: epoch,
                })
            }
            None => state.open_epoch = Some(epoch),
            _ => {}
        }
        state.arrived += 1;
        if state.arrived == self.workers {
            state.arrived = 0;
            state.open_epoch = None;
            state.generation += 1;
            self.version.fetch_add(1, Ordering::SeqCst);
            self.barrier_cv.notify_all();
            return Ok(());
        }
        let my_generation = state.generation;
        let deadline = Instant::now() + self.barrier_timeout;
        while state.generation == my_generation {
            let now = Instant::now();
            if now >= deadline {
                // Give up: a worker died or stalled past the deadline.
                state.arrived = state.arrived.saturating_sub(1);
                if state.arrived == 0 {
                    state.open_epoch = None;
                }
                return Err(Error::BarrierTimeout {
                    epoch,
                    waited_ms: self.barrier_timeout.as_millis() as u64,
                });
            }
            let (s, _timed_out) = self
                .barrier_cv
                .wait_timeout(state, deadline - now)
                .unwrap();
            state = s;
        }
        Ok(())
    }

    /// All keys, ascending (testing / snapshot hook).
    pub fn keys(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self
            .shards
            .iter()
            .flat_map(|s| s.keys().copied())
            .collect();
        keys.sort_unstable();
        keys
    }

    /// Copy of the entire table in ascending key order.
    pub fn snapshot(&self) -> Vec<(u64, Vec<f64>)> {
        self.keys()
            .into_iter()
            .map(|k| (k, self.pull_one(k).unwrap()))
            .collect()
    }
}

/// A worker's slice of the node set plus its seeded shuffle schedule.
pub struct WorkerHandle {
    worker_id: usize,
    nodes: Vec<NodeId>,
    seed: u64,
}

impl WorkerHandle {
    pub fn worker_id(&self) -> usize {
        self.worker_id
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// RNG for one epoch of this worker; derivation covers every draw
    /// the worker makes (shuffle, neighbor and negative sampling).
    pub fn epoch_rng(&self, epoch: u64) -> rand_chacha::ChaCha8Rng {
        rng_from(&[self.seed, STREAM_WORKER, self.worker_id as u64, epoch])
    }

    /// The worker's node set, shuffled for the given epoch.
    pub fn shuffled_nodes(&self, epoch: u64) -> Vec<NodeId> {
        use rand::seq::SliceRandom;
        let mut rng = self.epoch_rng(epoch);
        let mut nodes = self.nodes.clone();
        nodes.shuffle(&mut rng);
        nodes
    }
}

/// Partitions nodes over workers by hash; the subsets are disjoint and
/// cover the input.
pub fn assign_workers(nodes: &[NodeId], num_workers: usize, seed: u64) -> Vec<WorkerHandle> {
    let mut sets: Vec<Vec<NodeId>> = (0..num_workers).map(|_| Vec::new()).collect();
    for &v in nodes {
        sets[worker_of(v.0, num_workers)].push(v);
    }
    sets.into_iter()
        .enumerate()
        .map(|(worker_id, nodes)| WorkerHandle {
            worker_id,
            nodes,
            seed,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;
    use std::thread;

    fn scalar_store(mode: UpdateMode, workers: usize, init: f64) -> ParamStore {
        ParamStore::new(2, mode, workers, vec![(0u64, vec![init])]).unwrap()
    }

    #[test]
    fn pull_before_any_push_returns_initialization() {
        let store = ParamStore::new(
            4,
            UpdateMode::Overwrite,
            1,
            (0..10u64).map(|k| (k, vec![k as f64; 3])),
        )
        .unwrap();
        for k in 0..10u64 {
            assert_eq!(store.pull_one(k).unwrap(), vec![k as f64; 3]);
        }
    }

    #[test]
    fn overwrite_mode_last_write_wins() {
        let store = scalar_store(UpdateMode::Overwrite, 1, 0.0);
        store.push(&[(0, vec![1.0])]).unwrap();
        store.push(&[(0, vec![2.0])]).unwrap();
        assert_eq!(store.pull_one(0).unwrap(), vec![2.0]);
    }

    #[test]
    fn add_mode_accumulates() {
        let store = scalar_store(UpdateMode::Add, 1, 10.0);
        store.push(&[(0, vec![0.5])]).unwrap();
        store.push(&[(0, vec![0.5])]).unwrap();
        assert_eq!(store.pull_one(0).unwrap(), vec![11.0]);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let store = scalar_store(UpdateMode::Overwrite, 1, 0.0);
        assert!(matches!(store.pull(&[99]), Err(Error::UnknownKey(99))));
        assert!(matches!(
            store.push(&[(99, vec![1.0])]),
            Err(Error::UnknownKey(99))
        ));
    }

    #[test]
    fn non_finite_push_rejected() {
        let store = scalar_store(UpdateMode::Overwrite, 1, 3.0);
        assert!(store.push(&[(0, vec![f64::NAN])]).is_err());
        assert_eq!(store.pull_one(0).unwrap(), vec![3.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let store = scalar_store(UpdateMode::Overwrite, 1, 0.0);
        assert!(matches!(
            store.push(&[(0, vec![1.0, 2.0])]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn concurrent_pushes_to_distinct_keys_union() {
        let store = ParamStore::new(
            4,
            UpdateMode::Overwrite,
            4,
            (0..64u64).map(|k| (k, vec![0.0])),
        )
        .unwrap();
        thread::scope(|s| {
            for w in 0..4u64 {
                let store = &store;
                s.spawn(move || {
                    for k in (0..64u64).filter(|k| k % 4 == w) {
                        store.push(&[(k, vec![(k + 1) as f64])]).unwrap();
                    }
                    store.barrier(0).unwrap();
                });
            }
        });
        for k in 0..64u64 {
            assert_eq!(store.pull_one(k).unwrap(), vec![(k + 1) as f64]);
        }
    }

    #[test]
    fn add_mode_conserves_increments_exactly() {
        let store = scalar_store(UpdateMode::Add, 8, 5.0);
        thread::scope(|s| {
            for _ in 0..8 {
                let store = &store;
                s.spawn(move || {
                    for _ in 0..1000 {
                        store.push(&[(0, vec![1.0])]).unwrap();
                    }
                });
            }
        });
        assert_eq!(store.pull_one(0).unwrap(), vec![5.0 + 8000.0]);
    }

    #[test]
    fn pulled_vectors_are_never_torn() {
        // Each writer pushes constant-valued sentinel vectors; a reader
        // must never observe a vector mixing two sentinels.
        let dim = 64;
        let store = ParamStore::new(2, UpdateMode::Overwrite, 8, vec![(0u64, vec![0.0; dim])])
            .unwrap();
        let stop = std::sync::atomic::AtomicBool::new(false);
        thread::scope(|s| {
            for w in 0..8usize {
                let store = &store;
                let stop = &stop;
                s.spawn(move || {
                    let mut i = 0u64;
                    while !stop.load(Ordering::Relaxed) {
                        let sentinel = (w as f64 + 1.0) * 1000.0 + (i % 7) as f64;
                        store.push(&[(0, vec![sentinel; dim])]).unwrap();
                        i += 1;
                    }
                });
            }
            let store = &store;
            for _ in 0..20_000 {
                let v = store.pull_one(0).unwrap();
                let first = v[0];
                assert!(v.iter().all(|&x| x == first), "torn vector observed: {v:?}");
            }
            stop.store(true, Ordering::Relaxed);
        });
    }

    #[test]
    fn barrier_single_worker_returns_immediately() {
        let store = scalar_store(UpdateMode::Overwrite, 1, 0.0);
        assert_eq!(store.version(), 0);
        store.barrier(0).unwrap();
        assert_eq!(store.version(), 1);
    }

    #[test]
    fn barrier_waits_for_all_workers() {
        let store = scalar_store(UpdateMode::Overwrite, 4, 0.0);
        let released = AtomicUsize::new(0);
        thread::scope(|s| {
            for w in 0..4u64 {
                let store = &store;
                let released = &released;
                s.spawn(move || {
                    thread::sleep(Duration::from_millis(20 * w));
                    store.barrier(7).unwrap();
                    released.fetch_add(1, Ordering::SeqCst);
                });
            }
        });
        assert_eq!(released.load(Ordering::SeqCst), 4);
        assert_eq!(store.version(), 1);
    }

    #[test]
    fn barrier_epoch_mismatch_detected() {
        let store = scalar_store(UpdateMode::Overwrite, 2, 0.0);
        let r = thread::scope(|s| {
            let a = s.spawn(|| store.barrier(1));
            // make sure the first arrival opened the rendezvous
            thread::sleep(Duration::from_millis(50));
            let b = store.barrier(2);
            // unblock the first worker
            if b.is_err() {
                let _ = store.barrier(1);
            }
            (a.join().unwrap(), b)
        });
        assert!(r.0.is_ok());
        assert!(matches!(r.1, Err(Error::BarrierEpochMismatch { .. })));
    }

    #[test]
    fn barrier_times_out_when_a_worker_is_missing() {
        let store =
            scalar_store(UpdateMode::Overwrite, 2, 0.0).with_barrier_timeout(Duration::from_millis(80));
        let t0 = Instant::now();
        let r = store.barrier(0);
        assert!(matches!(r, Err(Error::BarrierTimeout { .. })));
        assert!(t0.elapsed() >= Duration::from_millis(80));
    }

    #[test]
    fn post_barrier_snapshots_agree_across_workers() {
        let store = ParamStore::new(
            4,
            UpdateMode::Overwrite,
            4,
            (0..32u64).map(|k| (k, vec![0.0; 4])),
        )
        .unwrap();
        let snapshots: Mutex<Vec<Vec<(u64, Vec<f64>)>>> = Mutex::new(Vec::new());
        thread::scope(|s| {
            for w in 0..4usize {
                let store = &store;
                let snapshots = &snapshots;
                s.spawn(move || {
                    let mut rng = rng_from(&[w as u64]);
                    for epoch in 0..3u64 {
                        for k in (0..32u64).filter(|k| worker_of(*k, 4) == w) {
                            let val: f64 = rand::Rng::random(&mut rng);
                            store.push(&[(k, vec![val + epoch as f64; 4])]).unwrap();
                        }
                        store.barrier(2 * epoch).unwrap();
                        snapshots.lock().unwrap().push(store.snapshot());
                        store.barrier(2 * epoch + 1).unwrap();
                    }
                });
            }
        });
        let snaps = snapshots.into_inner().unwrap();
        assert_eq!(snaps.len(), 12);
        // Within each epoch all four snapshots must be identical.
        for chunk in snaps.chunks(4) {
            for other in &chunk[1..] {
                assert_eq!(&chunk[0], other);
            }
        }
    }

    #[test]
    fn worker_assignment_partitions_nodes() {
        let nodes: Vec<NodeId> = (0..1000u64).map(NodeId).collect();
        let handles = assign_workers(&nodes, 4, 7);
        let total: usize = handles.iter().map(|h| h.nodes().len()).sum();
        assert_eq!(total, nodes.len());
        let mut seen = std::collections::HashSet::new();
        for h in &handles {
            for &v in h.nodes() {
                assert!(seen.insert(v), "node {v} assigned twice");
            }
        }
    }

    #[test]
    fn per_epoch_shuffle_is_deterministic_and_varies_by_epoch() {
        let nodes: Vec<NodeId> = (0..100u64).map(NodeId).collect();
        let handles = assign_workers(&nodes, 1, 13);
        let a = handles[0].shuffled_nodes(0);
        let b = handles[0].shuffled_nodes(0);
        let c = handles[0].shuffled_nodes(1);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
