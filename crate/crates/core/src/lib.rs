//! Hash-based ray path prediction workbench.
//!
//! Renders small scenes through an instrumented BVH and measures how many
//! ray-box tests a hash-indexed predictor table lets rays skip by jumping
//! straight to nodes that earlier, similar rays ended up in.

pub mod bvh;
pub mod geom;
pub mod hash;
pub mod metrics;
pub mod predictor;
pub mod scene;
pub mod sweep;
pub mod tracer;

pub use bvh::{build_bvh, Bvh, NodeId, TraversalCounters};
pub use geom::{HitRecord, Ray, RayKind, Triangle, Vec3};
pub use hash::{hash_ray, HashConfig, PredictorKey};
pub use predictor::{Prediction, PredictionOutcome, PredictorTable};
pub use scene::Scene;
pub use tracer::{render, Mode, PredictorTables, RenderConfig, RenderOutput, Sampling};
