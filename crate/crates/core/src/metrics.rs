//! Aggregation of traversal and prediction counters into report quantities.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::TraversalCounters;
use crate::predictor::{MemoryEstimate, Prediction, PredictionOutcome, PredictorTable};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no baseline box tests recorded")]
    NoBaseline,
}

/// Per ray population tallies. A mergeable monoid: `Default` is the identity
/// and `+=` is associative and commutative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RayKindStats {
    pub rays: u64,
    /// Rays that consulted a predictor (tp + fp + neg).
    pub consulted: u64,
    pub tp: u64,
    pub fp: u64,
    pub neg: u64,
    pub hits: u64,
    /// Box tests of full traversals from the root (the oracle cost).
    pub baseline_box_tests: u64,
    pub baseline_tri_tests: u64,
    pub overhead_box_tests: u64,
    pub overhead_tri_tests: u64,
    /// Exact skipped box tests (limit mode).
    pub skipped_box_tests: u64,
    /// Lower-bound skipped box tests from leaf depth (live mode).
    pub estimated_skipped_box_tests: u64,
    /// Closest-hit true positives whose hit differs from the oracle.
    pub wrong_closest: u64,
}

impl AddAssign for RayKindStats {
    fn add_assign(&mut self, o: RayKindStats) {
        self.rays += o.rays;
        self.consulted += o.consulted;
        self.tp += o.tp;
        self.fp += o.fp;
        self.neg += o.neg;
        self.hits += o.hits;
        self.baseline_box_tests += o.baseline_box_tests;
        self.baseline_tri_tests += o.baseline_tri_tests;
        self.overhead_box_tests += o.overhead_box_tests;
        self.overhead_tri_tests += o.overhead_tri_tests;
        self.skipped_box_tests += o.skipped_box_tests;
        self.estimated_skipped_box_tests += o.estimated_skipped_box_tests;
        self.wrong_closest += o.wrong_closest;
    }
}

impl RayKindStats {
    pub fn record_baseline(&mut self, counters: &TraversalCounters) {
        self.baseline_box_tests += counters.box_tests;
        self.baseline_tri_tests += counters.tri_tests;
    }

    pub fn record_outcome(&mut self, outcome: &PredictionOutcome) {
        self.consulted += 1;
        match outcome.class {
            Prediction::TruePositive => self.tp += 1,
            Prediction::FalsePositive => self.fp += 1,
            Prediction::Negative => self.neg += 1,
        }
        self.overhead_box_tests += outcome.overhead.box_tests;
        self.overhead_tri_tests += outcome.overhead.tri_tests;
        self.skipped_box_tests += outcome.skipped_box_tests;
    }

    pub fn merge(mut self, o: RayKindStats) -> RayKindStats {
        self += o;
        self
    }
}

/// Gross skipped box tests over baseline box tests, in percent.
pub fn savings_percent(stats: &RayKindStats) -> Result<f64, MetricsError> {
    ratio_percent(stats.skipped_box_tests, stats.baseline_box_tests)
}

/// Skipped minus prediction overhead box tests, over baseline.
pub fn net_savings_percent(stats: &RayKindStats) -> Result<f64, MetricsError> {
    if stats.baseline_box_tests == 0 {
        return Err(MetricsError::NoBaseline);
    }
    let net = stats.skipped_box_tests as f64 - stats.overhead_box_tests as f64;
    Ok(100.0 * net / stats.baseline_box_tests as f64)
}

pub fn estimated_savings_percent(stats: &RayKindStats) -> Result<f64, MetricsError> {
    ratio_percent(stats.estimated_skipped_box_tests, stats.baseline_box_tests)
}

/// Share of predictor-consulted rays whose traversal was skipped outright.
pub fn rays_skipped_percent(stats: &RayKindStats) -> f64 {
    if stats.consulted == 0 {
        0.0
    } else {
        100.0 * stats.tp as f64 / stats.consulted as f64
    }
}

/// wrong_closest / tp; zero when there are no true positives.
pub fn wrong_closest_rate(stats: &RayKindStats) -> f64 {
    if stats.tp == 0 {
        0.0
    } else {
        stats.wrong_closest as f64 / stats.tp as f64
    }
}

fn ratio_percent(num: u64, den: u64) -> Result<f64, MetricsError> {
    if den == 0 {
        return Err(MetricsError::NoBaseline);
    }
    Ok(100.0 * num as f64 / den as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub entries: u64,
    pub stored_nodes: u64,
    pub avg_nodes_per_entry: f64,
    pub max_nodes_per_entry: u64,
    pub memory: MemoryEstimate,
}

pub fn table_stats(table: &PredictorTable) -> TableStats {
    let entries = table.entry_count() as u64;
    let stored_nodes = table.stored_node_count() as u64;
    let max_nodes_per_entry = table.entries().map(|(_, e)| e.len() as u64).max().unwrap_or(0);
    TableStats {
        entries,
        stored_nodes,
        avg_nodes_per_entry: if entries > 0 { stored_nodes as f64 / entries as f64 } else { 0.0 },
        max_nodes_per_entry,
        memory: table.memory_estimate(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvh::NodeId;
    use crate::geom::RayKind;
    use crate::hash::{HashConfig, PredictorKey};
    use proptest::prelude::*;

    #[test]
    fn savings_bounds() {
        let mut s = RayKindStats { baseline_box_tests: 14, ..Default::default() };
        assert_eq!(savings_percent(&s).unwrap(), 0.0);
        s.skipped_box_tests = 14;
        assert_eq!(savings_percent(&s).unwrap(), 100.0);
        // Duplicate pair on the 8-leaf tree: 7 box tests per full traversal,
        // the second ray enters its leaf directly.
        s.skipped_box_tests = 7;
        assert_eq!(savings_percent(&s).unwrap(), 50.0);
        assert_eq!(
            savings_percent(&RayKindStats::default()),
            Err(MetricsError::NoBaseline)
        );
    }

    #[test]
    fn net_subtracts_overhead() {
        let s = RayKindStats {
            baseline_box_tests: 100,
            skipped_box_tests: 40,
            overhead_box_tests: 10,
            ..Default::default()
        };
        assert_eq!(net_savings_percent(&s).unwrap(), 30.0);
    }

    #[test]
    fn table_stats_counts() {
        let cfg = HashConfig::new(6).unwrap();
        let mut t = PredictorTable::new(RayKind::ClosestHit, cfg, 0);
        assert_eq!(table_stats(&t), TableStats::default());
        let k = |v| PredictorKey::from_raw(v).unwrap();
        t.record(k(1), NodeId(1)).unwrap();
        for n in 0..3 {
            t.record(k(2), NodeId(n)).unwrap();
        }
        let s = table_stats(&t);
        assert_eq!(s.entries, 2);
        assert_eq!(s.stored_nodes, 4);
        assert_eq!(s.avg_nodes_per_entry, 2.0);
        assert_eq!(s.max_nodes_per_entry, 3);
        assert_eq!(s.memory.total_bytes, 2 * 16 + 4 * 4);
    }

    fn stats() -> impl Strategy<Value = RayKindStats> {
        prop::array::uniform13(0u64..1_000_000).prop_map(|a| RayKindStats {
            rays: a[0],
            consulted: a[1],
            tp: a[2],
            fp: a[3],
            neg: a[4],
            hits: a[5],
            baseline_box_tests: a[6],
            baseline_tri_tests: a[7],
            overhead_box_tests: a[8],
            overhead_tri_tests: a[9],
            skipped_box_tests: a[10],
            estimated_skipped_box_tests: a[11],
            wrong_closest: a[12],
        })
    }

    proptest! {
        #[test]
        fn merge_is_a_commutative_monoid(a in stats(), b in stats(), c in stats()) {
            prop_assert_eq!(a.merge(b), b.merge(a));
            prop_assert_eq!(a.merge(b).merge(c), a.merge(b.merge(c)));
            prop_assert_eq!(a.merge(RayKindStats::default()), a);
        }
    }
}
