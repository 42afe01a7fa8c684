mod common;

use std::collections::{BTreeSet, HashMap};

use common::{random_rays, random_soup};
use hrpp::geom::ray_triangle_intersect;
use hrpp::metrics::RayKindStats;
use hrpp::predictor::PredictorError;
use hrpp::{
    build_bvh, Bvh, HashConfig, NodeId, Prediction, PredictorKey, PredictorTable, Ray, RayKind,
    TraversalCounters,
};
use proptest::prelude::*;

fn full(bvh: &Bvh, ray: &Ray) -> Option<hrpp::HitRecord> {
    let mut c = TraversalCounters::default();
    match ray.kind {
        RayKind::HitAny => bvh.intersect_any(ray, &mut c),
        RayKind::ClosestHit => bvh.intersect_closest(ray, &mut c),
    }
}

/// Trains on every hit, regardless of what the table would have predicted.
fn train_all(bvh: &Bvh, rays: &[Ray], kind: RayKind, p: u8, go_up: u32) -> PredictorTable {
    let mut table = PredictorTable::new(kind, HashConfig::new(p).unwrap(), go_up);
    for ray in rays {
        if let Some(hit) = full(bvh, ray) {
            let key = table.key_for(ray).unwrap();
            table.train_from_traversal(bvh, key, &hit).unwrap();
        }
    }
    table
}

fn node_sets(table: &PredictorTable) -> HashMap<PredictorKey, BTreeSet<NodeId>> {
    table.entries().map(|(k, e)| (k, e.nodes().collect())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Limit-mode style loop: classification closes, entries never repeat a
    /// node, and every accepted hit is a real intersection.
    #[test]
    fn classification_closure(
        seed in any::<u64>(),
        p in 1u8..=7,
        go_up in 0u32..3,
        hit_any in any::<bool>(),
    ) {
        let kind = if hit_any { RayKind::HitAny } else { RayKind::ClosestHit };
        let bvh = build_bvh(random_soup(seed, 96), 2).unwrap();
        let rays = random_rays(seed ^ 0x5eed, 600, kind);
        let mut table = PredictorTable::new(kind, HashConfig::new(p).unwrap(), go_up);
        let mut stats = RayKindStats::default();
        for ray in &rays {
            let mut outcome = table.predict(&bvh, ray).unwrap();
            let mut c = TraversalCounters::default();
            let oracle = match kind {
                RayKind::HitAny => bvh.intersect_any(ray, &mut c),
                RayKind::ClosestHit => bvh.intersect_closest(ray, &mut c),
            };
            outcome.account(c.box_tests);
            stats.record_outcome(&outcome);
            if outcome.class == Prediction::TruePositive {
                let h = outcome.hit.unwrap();
                let tri = &bvh.triangles().iter().find(|t| t.id == h.triangle_id).unwrap();
                let again = ray_triangle_intersect(ray, tri).expect("TP hit must re-validate");
                prop_assert_eq!(again.t, h.t);
                prop_assert!(h.t >= ray.t_min && h.t <= ray.t_max);
                prop_assert!(oracle.is_some());
                if kind == RayKind::ClosestHit {
                    prop_assert!(oracle.unwrap().t <= h.t);
                }
            } else {
                prop_assert_eq!(outcome.skipped_box_tests, 0);
                if let Some(h) = oracle {
                    table.train_from_traversal(&bvh, outcome.key, &h).unwrap();
                }
            }
        }
        prop_assert_eq!(stats.consulted, rays.len() as u64);
        prop_assert_eq!(stats.tp + stats.fp + stats.neg, stats.consulted);
        prop_assert!(stats.skipped_box_tests <= c_total(&bvh, &rays));
        for (_, entry) in table.entries() {
            let nodes: Vec<_> = entry.nodes().collect();
            let unique: BTreeSet<_> = nodes.iter().copied().collect();
            prop_assert_eq!(unique.len(), nodes.len());
            prop_assert!(nodes.iter().all(|n| bvh.is_valid_node(*n)));
        }
    }

    #[test]
    fn raising_go_up_never_stores_more(seed in any::<u64>(), p in 2u8..=7) {
        let bvh = build_bvh(random_soup(seed, 128), 2).unwrap();
        let rays = random_rays(seed.wrapping_add(1), 800, RayKind::ClosestHit);
        let mut previous = usize::MAX;
        for g in 0..4 {
            let t = train_all(&bvh, &rays, RayKind::ClosestHit, p, g);
            prop_assert!(t.stored_node_count() <= previous);
            previous = t.stored_node_count();
        }
    }

    #[test]
    fn coarse_entries_are_unions_of_refinements(seed in any::<u64>(), p in 2u8..=7) {
        let bvh = build_bvh(random_soup(seed, 128), 2).unwrap();
        let rays = random_rays(seed.wrapping_add(2), 800, RayKind::ClosestHit);
        let fine_cfg = HashConfig::new(p).unwrap();
        let coarse = node_sets(&train_all(&bvh, &rays, RayKind::ClosestHit, p - 1, 0));
        let fine = node_sets(&train_all(&bvh, &rays, RayKind::ClosestHit, p, 0));
        let mut merged: HashMap<PredictorKey, BTreeSet<NodeId>> = HashMap::new();
        for (k, nodes) in fine {
            merged.entry(k.coarsen(fine_cfg).unwrap()).or_default().extend(nodes);
        }
        prop_assert_eq!(merged, coarse);
    }
}

fn c_total(bvh: &Bvh, rays: &[Ray]) -> u64 {
    let mut c = TraversalCounters::default();
    for r in rays {
        match r.kind {
            RayKind::HitAny => bvh.intersect_any(r, &mut c),
            RayKind::ClosestHit => bvh.intersect_closest(r, &mut c),
        };
    }
    c.box_tests
}

#[test]
fn duplicate_records_are_ignored() {
    let bvh = build_bvh(random_soup(3, 32), 1).unwrap();
    let mut t = PredictorTable::new(RayKind::HitAny, HashConfig::default(), 0);
    let key = PredictorKey::from_raw(0xabc).unwrap();
    let leaf = bvh.leaves().next().unwrap();
    assert!(t.record(key, leaf).unwrap());
    assert!(!t.record(key, leaf).unwrap());
    assert_eq!(t.stored_node_count(), 1);
}

#[test]
fn capacity_limit_rejects_new_keys_only() {
    let bvh = build_bvh(random_soup(4, 32), 1).unwrap();
    let mut leaves = bvh.leaves();
    let (a, b) = (leaves.next().unwrap(), leaves.next().unwrap());
    let mut t = PredictorTable::new(RayKind::ClosestHit, HashConfig::default(), 0).with_capacity_limit(1);
    t.record(PredictorKey::from_raw(1).unwrap(), a).unwrap();
    t.record(PredictorKey::from_raw(1).unwrap(), b).unwrap();
    assert!(matches!(
        t.record(PredictorKey::from_raw(2).unwrap(), a),
        Err(PredictorError::CapacityExceeded(1))
    ));
    assert_eq!(t.entry_count(), 1);
}

#[test]
fn predict_rejects_wrong_ray_kind() {
    let bvh = build_bvh(random_soup(5, 8), 1).unwrap();
    let t = PredictorTable::new(RayKind::HitAny, HashConfig::default(), 0);
    let ray = random_rays(6, 1, RayKind::ClosestHit)[0];
    assert!(matches!(t.predict(&bvh, &ray), Err(PredictorError::KindMismatch { .. })));
}
