//! Binary BVH with parent links and instrumented traversal.
//!
//! Every traversal entry point takes caller-owned [`TraversalCounters`].
//! A node's box is tested when the node is popped from the traversal stack,
//! so `box_tests` counts one test per node considered. Traversal that starts
//! at a predicted node enters that node unconditionally.

use std::fmt;
use std::ops::AddAssign;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    filter_degenerate, ray_aabb_intersect, ray_triangle_intersect, Aabb, HitRecord, Ray, Triangle,
};

pub const SAH_BINS: usize = 16;
pub const DEFAULT_MAX_LEAF_SIZE: usize = 4;

/// Slack allowed when checking child-in-parent bounds.
pub const BOUNDS_EPSILON: f32 = 1e-5;

const TRAVERSAL_COST: f32 = 1.0;
const INTERSECT_COST: f32 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum BvhError {
    #[error("scene has no valid triangles")]
    EmptyScene,
    #[error("max leaf size must be at least 1")]
    BadLeafSize,
    #[error("scene exceeds the 2^31 node limit")]
    TooLarge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Interior { left: NodeId, right: NodeId, axis: u8 },
    Leaf { first_prim: u32, prim_count: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BvhNode {
    pub bounds: Aabb,
    pub parent: Option<NodeId>,
    pub kind: NodeKind,
    pub depth: u32,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalCounters {
    pub box_tests: u64,
    pub tri_tests: u64,
    pub nodes_visited: u64,
}

impl AddAssign for TraversalCounters {
    fn add_assign(&mut self, o: TraversalCounters) {
        self.box_tests += o.box_tests;
        self.tri_tests += o.tri_tests;
        self.nodes_visited += o.nodes_visited;
    }
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    /// Triangles in leaf order; leaves index into this.
    triangles: Vec<Triangle>,
    max_depth: u32,
    max_leaf_size: usize,
    oversized_leaves: usize,
}

#[derive(Clone, Copy)]
struct PrimRef {
    bounds: Aabb,
    centroid: crate::geom::Vec3,
    index: u32,
}

#[derive(Clone, Copy)]
struct Bin {
    bounds: Aabb,
    count: usize,
}

impl Default for Bin {
    fn default() -> Self {
        Bin { bounds: Aabb::EMPTY, count: 0 }
    }
}

struct Builder {
    prims: Vec<PrimRef>,
    nodes: Vec<BvhNode>,
    max_leaf_size: usize,
    oversized_leaves: usize,
}

impl Builder {
    fn push(&mut self, node: BvhNode) -> Result<NodeId, BvhError> {
        let id = u32::try_from(self.nodes.len())
            .ok()
            .filter(|&i| i < 1 << 31)
            .ok_or(BvhError::TooLarge)?;
        self.nodes.push(node);
        Ok(NodeId(id))
    }

    fn make_leaf(&mut self, node: NodeId, start: usize, end: usize) {
        self.nodes[node.index()].kind =
            NodeKind::Leaf { first_prim: start as u32, prim_count: (end - start) as u32 };
    }

    fn build(&mut self, node: NodeId, start: usize, end: usize, depth: u32) -> Result<(), BvhError> {
        let range = &self.prims[start..end];
        let bounds = range.iter().fold(Aabb::EMPTY, |b, p| b.union(&p.bounds));
        self.nodes[node.index()].bounds = bounds;
        let count = end - start;
        if count <= self.max_leaf_size {
            self.make_leaf(node, start, end);
            return Ok(());
        }

        let centroid_bounds =
            range.iter().fold(Aabb::EMPTY, |mut b, p| {
                b.grow(p.centroid);
                b
            });
        let axis = centroid_bounds.largest_axis();
        if centroid_bounds.extent()[axis] <= 0.0 {
            warn!(
                "{count} primitives share one centroid; emitting oversized leaf (max {})",
                self.max_leaf_size
            );
            self.oversized_leaves += 1;
            self.make_leaf(node, start, end);
            return Ok(());
        }

        let (axis, mid) = match self.sah_split(start, end, &bounds, &centroid_bounds) {
            Some(split) => split,
            None => (axis, self.median_split(start, end, axis)),
        };

        let left = self.push(BvhNode {
            bounds: Aabb::EMPTY,
            parent: Some(node),
            kind: NodeKind::Leaf { first_prim: 0, prim_count: 0 },
            depth: depth + 1,
        })?;
        let right = self.push(BvhNode {
            bounds: Aabb::EMPTY,
            parent: Some(node),
            kind: NodeKind::Leaf { first_prim: 0, prim_count: 0 },
            depth: depth + 1,
        })?;
        self.nodes[node.index()].kind = NodeKind::Interior { left, right, axis: axis as u8 };
        self.build(left, start, mid, depth + 1)?;
        self.build(right, mid, end, depth + 1)
    }

    /// Binned SAH over all axes with nonzero centroid extent. Returns the
    /// partition point only when the best split beats the leaf cost.
    fn sah_split(
        &mut self,
        start: usize,
        end: usize,
        bounds: &Aabb,
        centroid_bounds: &Aabb,
    ) -> Option<(usize, usize)> {
        let count = end - start;
        let parent_area = bounds.surface_area();
        let mut best: Option<(f32, usize, usize)> = None;

        for axis in 0..3 {
            let lo = centroid_bounds.min[axis];
            let extent = centroid_bounds.extent()[axis];
            if extent <= 0.0 {
                continue;
            }
            let scale = SAH_BINS as f32 / extent;
            let bin_of = |c: f32| (((c - lo) * scale) as usize).min(SAH_BINS - 1);

            let mut bins = [Bin::default(); SAH_BINS];
            for p in &self.prims[start..end] {
                let b = &mut bins[bin_of(p.centroid[axis])];
                b.count += 1;
                b.bounds = b.bounds.union(&p.bounds);
            }

            let mut right_area = [0.0f32; SAH_BINS];
            let mut right_count = [0usize; SAH_BINS];
            let mut acc = Bin::default();
            for i in (1..SAH_BINS).rev() {
                acc.count += bins[i].count;
                acc.bounds = acc.bounds.union(&bins[i].bounds);
                right_area[i] = acc.bounds.surface_area();
                right_count[i] = acc.count;
            }
            let mut left = Bin::default();
            for split in 1..SAH_BINS {
                left.count += bins[split - 1].count;
                left.bounds = left.bounds.union(&bins[split - 1].bounds);
                if left.count == 0 || right_count[split] == 0 {
                    continue;
                }
                let cost = left.bounds.surface_area() * left.count as f32
                    + right_area[split] * right_count[split] as f32;
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, axis, split));
                }
            }
        }

        let (cost, axis, split) = best?;
        let leaf_cost = INTERSECT_COST * count as f32;
        let split_cost = if parent_area > 0.0 {
            TRAVERSAL_COST + INTERSECT_COST * cost / parent_area
        } else {
            f32::INFINITY
        };
        if split_cost >= leaf_cost {
            return None;
        }

        let lo = centroid_bounds.min[axis];
        let scale = SAH_BINS as f32 / centroid_bounds.extent()[axis];
        let mid = partition(&mut self.prims[start..end], |p| {
            ((((p.centroid[axis] - lo) * scale) as usize).min(SAH_BINS - 1)) < split
        });
        Some((axis, start + mid))
    }

    fn median_split(&mut self, start: usize, end: usize, axis: usize) -> usize {
        let mid = (end - start) / 2;
        self.prims[start..end].select_nth_unstable_by(mid, |a, b| {
            a.centroid[axis].total_cmp(&b.centroid[axis]).then(a.index.cmp(&b.index))
        });
        start + mid
    }
}

/// Stable in-place partition; returns the count of elements satisfying `pred`.
fn partition<T: Copy>(items: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let (yes, no): (Vec<T>, Vec<T>) = items.iter().partition(|p| pred(p));
    let n = yes.len();
    for (slot, item) in items.iter_mut().zip(yes.into_iter().chain(no)) {
        *slot = item;
    }
    n
}

/// Builds a BVH. Degenerate triangles are filtered first.
pub fn build_bvh(triangles: Vec<Triangle>, max_leaf_size: usize) -> Result<Bvh, BvhError> {
    if max_leaf_size == 0 {
        return Err(BvhError::BadLeafSize);
    }
    let (triangles, dropped) = filter_degenerate(triangles);
    if dropped > 0 {
        debug!("dropped {dropped} degenerate triangles before BVH build");
    }
    if triangles.is_empty() {
        return Err(BvhError::EmptyScene);
    }
    let prims = triangles
        .iter()
        .enumerate()
        .map(|(i, t)| PrimRef { bounds: t.bounds(), centroid: t.centroid(), index: i as u32 })
        .collect::<Vec<_>>();
    let n = prims.len();
    let mut builder = Builder {
        prims,
        nodes: Vec::with_capacity(2 * n),
        max_leaf_size,
        oversized_leaves: 0,
    };
    let root = builder.push(BvhNode {
        bounds: Aabb::EMPTY,
        parent: None,
        kind: NodeKind::Leaf { first_prim: 0, prim_count: 0 },
        depth: 0,
    })?;
    builder.build(root, 0, n, 0)?;

    let ordered = builder.prims.iter().map(|p| triangles[p.index as usize]).collect();
    let max_depth = builder.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.depth).max().unwrap_or(0);
    Ok(Bvh {
        nodes: builder.nodes,
        triangles: ordered,
        max_depth,
        max_leaf_size,
        oversized_leaves: builder.oversized_leaves,
    })
}

impl Bvh {
    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &BvhNode {
        &self.nodes[id.index()]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_valid_node(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Triangle ids in leaf order.
    pub fn prim_order(&self) -> Vec<u32> {
        self.triangles.iter().map(|t| t.id).collect()
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn max_leaf_size(&self) -> usize {
        self.max_leaf_size
    }

    pub fn oversized_leaves(&self) -> usize {
        self.oversized_leaves
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_leaf()).map(|(i, _)| NodeId(i as u32))
    }

    pub fn leaf_triangles(&self, id: NodeId) -> &[Triangle] {
        match self.node(id).kind {
            NodeKind::Leaf { first_prim, prim_count } => {
                &self.triangles[first_prim as usize..(first_prim + prim_count) as usize]
            }
            NodeKind::Interior { .. } => &[],
        }
    }

    /// Follows `go_up_level` parent links from `leaf`, stopping at the root.
    pub fn ancestor_at(&self, leaf: NodeId, go_up_level: u32) -> NodeId {
        let mut node = leaf;
        for _ in 0..go_up_level {
            match self.node(node).parent {
                Some(p) => node = p,
                None => break,
            }
        }
        node
    }

    pub fn intersect_closest(&self, ray: &Ray, counters: &mut TraversalCounters) -> Option<HitRecord> {
        self.traverse(NodeId::ROOT, true, ray, false, counters)
    }

    pub fn intersect_any(&self, ray: &Ray, counters: &mut TraversalCounters) -> Option<HitRecord> {
        self.traverse(NodeId::ROOT, true, ray, true, counters)
    }

    /// Closest-hit traversal of the subtree under `start`, entering `start`
    /// without testing its box.
    pub fn intersect_from_node(
        &self,
        start: NodeId,
        ray: &Ray,
        counters: &mut TraversalCounters,
    ) -> Option<HitRecord> {
        self.traverse(start, false, ray, false, counters)
    }

    /// Hit-any variant of [`Bvh::intersect_from_node`].
    pub fn intersect_any_from_node(
        &self,
        start: NodeId,
        ray: &Ray,
        counters: &mut TraversalCounters,
    ) -> Option<HitRecord> {
        self.traverse(start, false, ray, true, counters)
    }

    fn traverse(
        &self,
        start: NodeId,
        test_start_box: bool,
        ray: &Ray,
        any_hit: bool,
        counters: &mut TraversalCounters,
    ) -> Option<HitRecord> {
        let mut best: Option<HitRecord> = None;
        let mut t_max = ray.t_max;
        let mut stack: Vec<(NodeId, bool)> = Vec::with_capacity(64);
        stack.push((start, test_start_box));

        while let Some((id, test_box)) = stack.pop() {
            let node = &self.nodes[id.index()];
            if test_box {
                counters.box_tests += 1;
                if ray_aabb_intersect(&ray.with_t_max(t_max), &node.bounds).is_none() {
                    continue;
                }
            }
            counters.nodes_visited += 1;
            match node.kind {
                NodeKind::Leaf { first_prim, prim_count } => {
                    let clipped = ray.with_t_max(t_max);
                    for tri in &self.triangles[first_prim as usize..(first_prim + prim_count) as usize]
                    {
                        counters.tri_tests += 1;
                        if let Some(mut hit) = ray_triangle_intersect(&clipped, tri) {
                            if best.is_some_and(|b| hit.t >= b.t) {
                                continue;
                            }
                            hit.leaf_node = id.0;
                            if any_hit {
                                return Some(hit);
                            }
                            t_max = hit.t;
                            best = Some(hit);
                        }
                    }
                }
                NodeKind::Interior { left, right, axis } => {
                    // Near child popped first; zero direction picks left.
                    let (near, far) =
                        if ray.direction[axis as usize] < 0.0 { (right, left) } else { (left, right) };
                    stack.push((far, true));
                    stack.push((near, true));
                }
            }
        }
        best
    }

    /// Checks structural invariants; returns a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![NodeId::ROOT];
        let mut prims_seen = 0usize;
        if self.nodes[0].parent.is_some() {
            return Err("root has a parent".into());
        }
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id.index()], true) {
                return Err(format!("node {id} reached twice"));
            }
            let node = self.node(id);
            match node.kind {
                NodeKind::Interior { left, right, .. } => {
                    for child in [left, right] {
                        let c = self.node(child);
                        if c.parent != Some(id) {
                            return Err(format!("parent link of {child} is not {id}"));
                        }
                        if c.depth != node.depth + 1 {
                            return Err(format!("depth of {child} inconsistent"));
                        }
                        if !node.bounds.contains_box(&c.bounds, BOUNDS_EPSILON) {
                            return Err(format!("bounds of {child} escape parent {id}"));
                        }
                        stack.push(child);
                    }
                }
                NodeKind::Leaf { prim_count, .. } => {
                    if prim_count == 0 {
                        return Err(format!("leaf {id} is empty"));
                    }
                    let tris = self.leaf_triangles(id);
                    let coincident = tris.iter().all(|t| t.centroid() == tris[0].centroid());
                    if prim_count as usize > self.max_leaf_size && !coincident {
                        return Err(format!("leaf {id} holds {prim_count} primitives"));
                    }
                    for t in self.leaf_triangles(id) {
                        if !node.bounds.contains_box(&t.bounds(), BOUNDS_EPSILON) {
                            return Err(format!("triangle {} escapes leaf {id}", t.id));
                        }
                    }
                    prims_seen += prim_count as usize;
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("node {i} unreachable"));
        }
        if prims_seen != self.triangles.len() {
            return Err("leaves do not cover every primitive exactly once".into());
        }
        let deepest = self.leaves().map(|l| self.node(l).depth).max().unwrap_or(0);
        if deepest != self.max_depth {
            return Err("max_depth mismatch".into());
        }
        Ok(())
    }
}
