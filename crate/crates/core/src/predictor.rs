//! Predictor table: maps ray hash keys to the BVH nodes previous similar
//! rays ended up in, and evaluates those predictions for new rays.

use std::collections::HashMap;
use std::fmt::Write as _;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{Bvh, NodeId, TraversalCounters};
use crate::geom::{HitRecord, Ray, RayKind};
use crate::hash::{hash_ray, HashConfig, HashError, PredictorKey};

/// Entry cap protecting desk machines; override through the CLI.
pub const DEFAULT_CAPACITY: usize = 1 << 26;

/// Modeled bytes per entry: 6-byte key plus bookkeeping, rounded up.
pub const ENTRY_BYTES: u64 = 16;
/// Modeled bytes per stored node reference.
pub const NODE_REF_BYTES: u64 = 4;

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("predictor table reached its capacity of {0} entries")]
    CapacityExceeded(usize),
    #[error("{ray:?} ray offered to a {table:?} table")]
    KindMismatch { table: RayKind, ray: RayKind },
    #[error("node {0} is not part of the bound BVH")]
    InvalidNode(NodeId),
    #[error(transparent)]
    Hash(#[from] HashError),
}

/// Insertion-ordered, duplicate-free node set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictorEntry {
    nodes: IndexSet<NodeId>,
}

impl PredictorEntry {
    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    TruePositive,
    FalsePositive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionOutcome {
    pub key: PredictorKey,
    pub class: Prediction,
    pub hit: Option<HitRecord>,
    /// Work spent evaluating the predicted nodes.
    pub overhead: TraversalCounters,
    pub nodes_scanned: usize,
    /// Filled in by [`PredictionOutcome::account`] once the baseline cost is known.
    pub skipped_box_tests: u64,
}

impl PredictionOutcome {
    /// Records the box tests a true positive avoided relative to a full
    /// traversal that cost `baseline_box_tests`.
    pub fn account(&mut self, baseline_box_tests: u64) {
        self.skipped_box_tests = match self.class {
            Prediction::TruePositive => baseline_box_tests.saturating_sub(self.overhead.box_tests),
            _ => 0,
        };
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub entry_bytes: u64,
    pub node_ref_bytes: u64,
    pub total_bytes: u64,
}

#[derive(Clone, Debug)]
pub struct PredictorTable {
    entries: HashMap<PredictorKey, PredictorEntry>,
    cfg: HashConfig,
    go_up_level: u32,
    kind: RayKind,
    capacity: usize,
    stored_nodes: usize,
}

impl PredictorTable {
    pub fn new(kind: RayKind, cfg: HashConfig, go_up_level: u32) -> PredictorTable {
        PredictorTable {
            entries: HashMap::new(),
            cfg,
            go_up_level,
            kind,
            capacity: DEFAULT_CAPACITY,
            stored_nodes: 0,
        }
    }

    pub fn with_capacity_limit(mut self, capacity: usize) -> PredictorTable {
        self.capacity = capacity;
        self
    }

    pub fn kind(&self) -> RayKind {
        self.kind
    }

    pub fn hash_config(&self) -> HashConfig {
        self.cfg
    }

    pub fn go_up_level(&self) -> u32 {
        self.go_up_level
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn stored_node_count(&self) -> usize {
        self.stored_nodes
    }

    pub fn entries(&self) -> impl Iterator<Item = (PredictorKey, &PredictorEntry)> {
        self.entries.iter().map(|(k, e)| (*k, e))
    }

    pub fn key_for(&self, ray: &Ray) -> Result<PredictorKey, HashError> {
        hash_ray(ray, self.cfg)
    }

    pub fn lookup(&self, key: PredictorKey) -> Option<&PredictorEntry> {
        self.entries.get(&key)
    }

    /// Set insertion of an already ancestor-mapped node; returns whether the
    /// entry grew.
    pub fn record(&mut self, key: PredictorKey, node: NodeId) -> Result<bool, PredictorError> {
        let at_capacity = self.entries.len() >= self.capacity;
        let entry = match self.entries.get_mut(&key) {
            Some(e) => e,
            None if at_capacity => return Err(PredictorError::CapacityExceeded(self.capacity)),
            None => self.entries.entry(key).or_default(),
        };
        let inserted = entry.nodes.insert(node);
        if inserted {
            self.stored_nodes += 1;
        }
        Ok(inserted)
    }

    /// Evaluates the prediction for `ray` without touching the table.
    ///
    /// Hit-any tables stop at the first predicted node that yields a hit.
    /// Closest-hit tables scan every stored node in insertion order and keep
    /// the minimal-t hit.
    pub fn predict(&self, bvh: &Bvh, ray: &Ray) -> Result<PredictionOutcome, PredictorError> {
        if ray.kind != self.kind {
            return Err(PredictorError::KindMismatch { table: self.kind, ray: ray.kind });
        }
        let key = self.key_for(ray)?;
        let mut outcome = PredictionOutcome {
            key,
            class: Prediction::Negative,
            hit: None,
            overhead: TraversalCounters::default(),
            nodes_scanned: 0,
            skipped_box_tests: 0,
        };
        let Some(entry) = self.lookup(key) else {
            return Ok(outcome);
        };

        let mut best: Option<HitRecord> = None;
        for node in entry.nodes() {
            outcome.nodes_scanned += 1;
            match self.kind {
                RayKind::HitAny => {
                    best = bvh.intersect_any_from_node(node, ray, &mut outcome.overhead);
                    if best.is_some() {
                        break;
                    }
                }
                RayKind::ClosestHit => {
                    let clipped = best.map_or(*ray, |b| ray.with_t_max(b.t));
                    if let Some(hit) = bvh.intersect_from_node(node, &clipped, &mut outcome.overhead) {
                        if best.is_none_or(|b| hit.t < b.t) {
                            best = Some(hit);
                        }
                    }
                }
            }
        }
        outcome.hit = best;
        outcome.class =
            if best.is_some() { Prediction::TruePositive } else { Prediction::FalsePositive };
        Ok(outcome)
    }

    /// Trains on the hit produced by a full traversal of a ray hashing to `key`.
    pub fn train_from_traversal(
        &mut self,
        bvh: &Bvh,
        key: PredictorKey,
        hit: &HitRecord,
    ) -> Result<bool, PredictorError> {
        let leaf = NodeId(hit.leaf_node);
        if !bvh.is_valid_node(leaf) {
            return Err(PredictorError::InvalidNode(leaf));
        }
        self.record(key, bvh.ancestor_at(leaf, self.go_up_level))
    }

    pub fn memory_estimate(&self) -> MemoryEstimate {
        let entry_bytes = self.entries.len() as u64 * ENTRY_BYTES;
        let node_ref_bytes = self.stored_nodes as u64 * NODE_REF_BYTES;
        MemoryEstimate { entry_bytes, node_ref_bytes, total_bytes: entry_bytes + node_ref_bytes }
    }

    /// Debug dump: one `key_hex -> [node,...]` line per entry, sorted by key.
    pub fn dump(&self) -> String {
        let mut keys: Vec<_> = self.entries.keys().copied().collect();
        keys.sort_unstable();
        let mut out = String::new();
        for key in keys {
            let nodes: Vec<String> = self.entries[&key].nodes().map(|n| n.to_string()).collect();
            let _ = writeln!(out, "{key} -> [{}]", nodes.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvh::build_bvh;
    use crate::bvh::tests::eight_separated;
    use crate::geom::{ray_triangle_intersect, Vec3};

    fn cfg() -> HashConfig {
        HashConfig::new(6).unwrap()
    }

    fn key(v: u64) -> PredictorKey {
        PredictorKey::from_raw(v).unwrap()
    }

    fn ray_at(x: f32, kind: RayKind) -> Ray {
        Ray::new(Vec3::new(x, 0.0, -5.0), Vec3::new(0., 0., 1.), 0.0, 100.0, kind).unwrap()
    }

    #[test]
    fn lookup_and_record() {
        let mut t = PredictorTable::new(RayKind::ClosestHit, cfg(), 0);
        assert!(t.lookup(key(42)).is_none());
        assert!(t.record(key(42), NodeId(3)).unwrap());
        assert_eq!(t.entry_count(), 1);
        assert!(t.lookup(key(42)).unwrap().contains(NodeId(3)));
        assert!(!t.record(key(42), NodeId(3)).unwrap());
        assert_eq!(t.lookup(key(42)).unwrap().len(), 1);
        assert!(t.record(key(42), NodeId(5)).unwrap());
        assert_eq!(t.lookup(key(42)).unwrap().nodes().collect::<Vec<_>>(), [NodeId(3), NodeId(5)]);
        assert_eq!(t.entry_count(), 1);
        assert_eq!(t.stored_node_count(), 2);
    }

    #[test]
    fn capacity_cap_aborts() {
        let mut t = PredictorTable::new(RayKind::HitAny, cfg(), 0).with_capacity_limit(2);
        t.record(key(1), NodeId(0)).unwrap();
        t.record(key(2), NodeId(0)).unwrap();
        // Existing keys still accept nodes.
        assert!(t.record(key(2), NodeId(1)).unwrap());
        assert_eq!(t.record(key(3), NodeId(0)), Err(PredictorError::CapacityExceeded(2)));
    }

    #[test]
    fn memory_model() {
        let mut t = PredictorTable::new(RayKind::ClosestHit, cfg(), 0);
        assert_eq!(t.memory_estimate().total_bytes, 0);
        t.record(key(7), NodeId(1)).unwrap();
        assert_eq!(
            t.memory_estimate(),
            MemoryEstimate { entry_bytes: 16, node_ref_bytes: 4, total_bytes: 20 }
        );
        // 10^6 entries and 1.5 * 10^6 node references: 16e6 + 6e6 bytes.
        let big = MemoryEstimate {
            entry_bytes: 1_000_000 * ENTRY_BYTES,
            node_ref_bytes: 1_500_000 * NODE_REF_BYTES,
            total_bytes: 1_000_000 * ENTRY_BYTES + 1_500_000 * NODE_REF_BYTES,
        };
        assert_eq!(big.total_bytes, 22_000_000);
    }

    #[test]
    fn negative_on_empty_table() {
        let bvh = build_bvh(eight_separated(), 1).unwrap();
        let t = PredictorTable::new(RayKind::ClosestHit, cfg(), 0);
        let out = t.predict(&bvh, &ray_at(0.0, RayKind::ClosestHit)).unwrap();
        assert_eq!(out.class, Prediction::Negative);
        assert_eq!(out.overhead.tri_tests, 0);
        assert!(out.hit.is_none());
    }

    #[test]
    fn kind_mismatch_rejected() {
        let bvh = build_bvh(eight_separated(), 1).unwrap();
        let t = PredictorTable::new(RayKind::HitAny, cfg(), 0);
        assert!(matches!(
            t.predict(&bvh, &ray_at(0.0, RayKind::ClosestHit)),
            Err(PredictorError::KindMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_ray_is_true_positive() {
        let bvh = build_bvh(eight_separated(), 1).unwrap();
        let mut t = PredictorTable::new(RayKind::ClosestHit, cfg(), 0);
        let ray = ray_at(30.0, RayKind::ClosestHit);

        let mut baseline = TraversalCounters::default();
        let hit = bvh.intersect_closest(&ray, &mut baseline).unwrap();
        let first = t.predict(&bvh, &ray).unwrap();
        assert_eq!(first.class, Prediction::Negative);
        assert!(t.train_from_traversal(&bvh, first.key, &hit).unwrap());

        let mut second = t.predict(&bvh, &ray).unwrap();
        second.account(baseline.box_tests);
        assert_eq!(second.class, Prediction::TruePositive);
        assert_eq!(second.hit, Some(hit));
        assert!(second.skipped_box_tests > 0);
        assert_eq!(second.skipped_box_tests, baseline.box_tests - second.overhead.box_tests);
        let tri = bvh.triangles().iter().find(|t| t.id == hit.triangle_id).unwrap();
        assert!(ray_triangle_intersect(&ray, tri).is_some());
    }

    #[test]
    fn wrong_leaf_is_false_positive() {
        let bvh = build_bvh(eight_separated(), 1).unwrap();
        let mut t = PredictorTable::new(RayKind::ClosestHit, cfg(), 0);
        let ray = ray_at(30.0, RayKind::ClosestHit);
        let mut c = TraversalCounters::default();
        let hit = bvh.intersect_closest(&ray, &mut c).unwrap();
        let wrong = bvh.leaves().find(|&l| l.0 != hit.leaf_node).unwrap();
        let key = t.key_for(&ray).unwrap();
        t.record(key, wrong).unwrap();

        let mut out = t.predict(&bvh, &ray).unwrap();
        out.account(c.box_tests);
        assert_eq!(out.class, Prediction::FalsePositive);
        assert_eq!(out.skipped_box_tests, 0);
        assert!(out.overhead.tri_tests > 0);
        // Fallback from the root recovers the baseline answer.
        let mut again = TraversalCounters::default();
        assert_eq!(bvh.intersect_closest(&ray, &mut again), Some(hit));
    }

    #[test]
    fn go_up_level_merges_siblings() {
        let bvh = build_bvh(eight_separated(), 1).unwrap();
        let shared = key(0xabc);
        let mut level0 = PredictorTable::new(RayKind::ClosestHit, cfg(), 0);
        let mut level1 = PredictorTable::new(RayKind::ClosestHit, cfg(), 1);
        // Leaves holding x = 0 and x = 10 are siblings in the balanced tree.
        for x in [0.0, 10.0] {
            let mut c = TraversalCounters::default();
            let hit = bvh.intersect_closest(&ray_at(x, RayKind::ClosestHit), &mut c).unwrap();
            level0.train_from_traversal(&bvh, shared, &hit).unwrap();
            level1.train_from_traversal(&bvh, shared, &hit).unwrap();
        }
        assert_eq!(level0.lookup(shared).unwrap().len(), 2);
        assert_eq!(level1.lookup(shared).unwrap().len(), 1);
        let parent = level1.lookup(shared).unwrap().nodes().next().unwrap();
        assert!(!bvh.node(parent).is_leaf());
    }

    #[test]
    fn hit_any_stops_at_first_hit() {
        let bvh = build_bvh(eight_separated(), 1).unwrap();
        let mut t = PredictorTable::new(RayKind::HitAny, cfg(), 0);
        let ray = ray_at(30.0, RayKind::HitAny);
        let mut c = TraversalCounters::default();
        let hit = bvh.intersect_any(&ray, &mut c).unwrap();
        let key = t.key_for(&ray).unwrap();
        t.train_from_traversal(&bvh, key, &hit).unwrap();
        let other = bvh.leaves().find(|&l| l.0 != hit.leaf_node).unwrap();
        t.record(key, other).unwrap();
        let out = t.predict(&bvh, &ray).unwrap();
        assert_eq!(out.class, Prediction::TruePositive);
        assert_eq!(out.nodes_scanned, 1);
    }

    #[test]
    fn dump_is_sorted() {
        let mut t = PredictorTable::new(RayKind::ClosestHit, cfg(), 0);
        t.record(key(0x20), NodeId(4)).unwrap();
        t.record(key(0x10), NodeId(2)).unwrap();
        t.record(key(0x10), NodeId(9)).unwrap();
        assert_eq!(t.dump(), "000000000010 -> [2,9]\n000000000020 -> [4]\n");
    }
}
