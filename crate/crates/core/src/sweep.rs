//! Single-configuration runs and parameter sweeps with CSV/JSON reports.
//!
//! A report holds one row per (scene, mode, precision, go_up_level, spp,
//! ray_kind). Column order is fixed by [`ReportRow`].

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::Bvh;
use crate::hash::{HashConfig, MAX_PRECISION, MIN_PRECISION};
use crate::metrics::{
    estimated_savings_percent, net_savings_percent, rays_skipped_percent, savings_percent,
    table_stats, wrong_closest_rate, RayKindStats, TableStats,
};
use crate::predictor::DEFAULT_CAPACITY;
use crate::scene::Scene;
use crate::tracer::{render, Mode, PredictorTables, RenderConfig, RenderError, RenderOutput};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("{axis:?} value {value} out of range")]
    OutOfRange { axis: SweepAxis, value: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Precision,
    GoUpLevel,
    Spp,
}

/// Everything that identifies one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub hash: HashConfig,
    pub go_up_level: u32,
    pub render: RenderConfig,
    pub table_capacity: usize,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            hash: HashConfig::default(),
            go_up_level: 0,
            render: RenderConfig::default(),
            table_capacity: DEFAULT_CAPACITY,
        }
    }
}

impl RunParams {
    pub fn with_axis(&self, axis: SweepAxis, value: u32) -> Result<RunParams, SweepError> {
        let mut p = self.clone();
        match axis {
            SweepAxis::Precision => {
                p.hash = u8::try_from(value)
                    .ok()
                    .and_then(|v| HashConfig::new(v).ok())
                    .ok_or(SweepError::OutOfRange { axis, value })?;
            }
            SweepAxis::GoUpLevel => p.go_up_level = value,
            SweepAxis::Spp => {
                if value == 0 {
                    return Err(SweepError::OutOfRange { axis, value });
                }
                p.render.spp = value;
            }
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub scene_name: String,
    pub axis: SweepAxis,
    pub values: Vec<u32>,
    pub fixed: RunParams,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::NoValues);
        }
        for &v in &self.values {
            let ok = match self.axis {
                SweepAxis::Precision => (MIN_PRECISION as u32..=MAX_PRECISION as u32).contains(&v),
                SweepAxis::GoUpLevel => true,
                SweepAxis::Spp => v >= 1,
            };
            if !ok {
                return Err(SweepError::OutOfRange { axis: self.axis, value: v });
            }
        }
        Ok(())
    }
}

/// Result of one configuration.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub params: RunParams,
    pub output: RenderOutput,
    pub closest_table: TableStats,
    pub hit_any_table: TableStats,
    pub tables: PredictorTables,
}

/// Renders one configuration with fresh predictor tables.
pub fn run_config(scene: &Scene, bvh: &Bvh, params: &RunParams) -> Result<RunResult, RenderError> {
    let mut tables =
        PredictorTables::new(params.hash, params.go_up_level).with_capacity_limit(params.table_capacity);
    let output = render(scene, bvh, &mut tables, &params.render)?;
    Ok(RunResult {
        params: params.clone(),
        closest_table: table_stats(&tables.closest),
        hit_any_table: table_stats(&tables.hit_any),
        output,
        tables,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scene: String,
    pub mode: Mode,
    pub precision: u8,
    pub go_up_level: u32,
    pub spp: u32,
    pub ray_kind: String,
    pub status: String,
    pub rays: u64,
    pub consulted: u64,
    pub tp: u64,
    pub fp: u64,
    pub neg: u64,
    pub baseline_box_tests: u64,
    pub overhead_box_tests: u64,
    pub overhead_tri_tests: u64,
    pub skipped_box_tests: u64,
    pub estimated_skipped_box_tests: u64,
    pub savings_pct: Option<f64>,
    pub net_savings_pct: Option<f64>,
    pub estimated_savings_pct: Option<f64>,
    pub rays_skipped_pct: f64,
    pub wrong_closest: u64,
    pub wrong_closest_rate: Option<f64>,
    pub entries: u64,
    pub stored_nodes: u64,
    pub avg_nodes_per_entry: f64,
    pub max_nodes_per_entry: u64,
    pub table_bytes: u64,
}

pub const RAY_KINDS: [&str; 3] = ["primary", "shadow", "reflection"];

impl ReportRow {
    fn new(scene: &str, params: &RunParams, kind: &str, status: String) -> ReportRow {
        ReportRow {
            scene: scene.into(),
            mode: params.render.mode,
            precision: params.hash.precision_bits(),
            go_up_level: params.go_up_level,
            spp: params.render.spp,
            ray_kind: kind.into(),
            status,
            rays: 0,
            consulted: 0,
            tp: 0,
            fp: 0,
            neg: 0,
            baseline_box_tests: 0,
            overhead_box_tests: 0,
            overhead_tri_tests: 0,
            skipped_box_tests: 0,
            estimated_skipped_box_tests: 0,
            savings_pct: None,
            net_savings_pct: None,
            estimated_savings_pct: None,
            rays_skipped_pct: 0.0,
            wrong_closest: 0,
            wrong_closest_rate: None,
            entries: 0,
            stored_nodes: 0,
            avg_nodes_per_entry: 0.0,
            max_nodes_per_entry: 0,
            table_bytes: 0,
        }
    }

    fn from_stats(scene: &str, params: &RunParams, kind: &str, s: &RayKindStats, table: &TableStats) -> ReportRow {
        let mut row = ReportRow::new(scene, params, kind, "ok".into());
        let exact = params.render.mode == Mode::Limit;
        let live = params.render.mode == Mode::Live;
        row.rays = s.rays;
        row.consulted = s.consulted;
        row.tp = s.tp;
        row.fp = s.fp;
        row.neg = s.neg;
        row.baseline_box_tests = s.baseline_box_tests;
        row.overhead_box_tests = s.overhead_box_tests;
        row.overhead_tri_tests = s.overhead_tri_tests;
        row.skipped_box_tests = s.skipped_box_tests;
        row.estimated_skipped_box_tests = s.estimated_skipped_box_tests;
        row.savings_pct = savings_percent(s).ok().filter(|_| exact);
        row.net_savings_pct = net_savings_percent(s).ok().filter(|_| exact);
        row.estimated_savings_pct = estimated_savings_percent(s).ok().filter(|_| live);
        row.rays_skipped_pct = rays_skipped_percent(s);
        row.wrong_closest = s.wrong_closest;
        row.wrong_closest_rate = (exact && kind != "shadow").then(|| wrong_closest_rate(s));
        row.entries = table.entries;
        row.stored_nodes = table.stored_nodes;
        row.avg_nodes_per_entry = table.avg_nodes_per_entry;
        row.max_nodes_per_entry = table.max_nodes_per_entry;
        row.table_bytes = table.memory.total_bytes;
        row
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One row per ray population. Shadow rows carry hit-any table stats, the
/// others the closest-hit table.
pub fn report_rows(scene: &str, run: &RunResult) -> Vec<ReportRow> {
    let s = &run.output.stats;
    let empty = TableStats::default();
    let (closest, any) = if run.params.render.mode == Mode::Baseline {
        (&empty, &empty)
    } else {
        (&run.closest_table, &run.hit_any_table)
    };
    vec![
        ReportRow::from_stats(scene, &run.params, RAY_KINDS[0], &s.primary, closest),
        ReportRow::from_stats(scene, &run.params, RAY_KINDS[1], &s.shadow, any),
        ReportRow::from_stats(scene, &run.params, RAY_KINDS[2], &s.reflection, closest),
    ]
}

pub fn failed_rows(scene: &str, params: &RunParams, err: &dyn std::fmt::Display) -> Vec<ReportRow> {
    RAY_KINDS.iter().map(|k| ReportRow::new(scene, params, k, format!("failed: {err}"))).collect()
}

/// Runs every value of the sweep axis sequentially over a shared scene and
/// BVH. A failing run yields rows marked failed and the sweep continues.
pub fn run_sweep(scene: &Scene, bvh: &Bvh, spec: &SweepSpec) -> Result<Vec<ReportRow>, SweepError> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &value in &spec.values {
        let params = spec.fixed.with_axis(spec.axis, value)?;
        match run_config(scene, bvh, &params) {
            Ok(run) => rows.extend(report_rows(&spec.scene_name, &run)),
            Err(e) => {
                log::error!("{:?}={value} failed: {e}", spec.axis);
                rows.extend(failed_rows(&spec.scene_name, &params, &e));
            }
        }
    }
    Ok(rows)
}

/// CSV with a header row. `timestamp`, when given, is written first as a
/// `#` comment line.
pub fn write_csv<W: Write>(rows: &[ReportRow], mut w: W, timestamp: Option<&str>) -> Result<(), SweepError> {
    if let Some(ts) = timestamp {
        writeln!(w, "# generated {ts}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[ReportRow], w: W) -> Result<(), SweepError> {
    serde_json::to_writer_pretty(w, rows).map_err(io::Error::from)?;
    Ok(())
}
