//! Whitted-style renderer producing the three ray populations the predictor
//! is studied on: coherent primary rays, hit-any shadow rays and
//! closest-hit mirror reflection rays.
//!
//! In [`Mode::Limit`] every ray runs both the prediction and the full
//! traversal; shading always uses the full traversal, so the image is
//! bit-identical to [`Mode::Baseline`]. In [`Mode::Live`] a true positive
//! replaces the traversal.

use std::f32::consts::PI;
use std::io::{self, Write};

use parking_lot::RwLock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{Bvh, NodeId, TraversalCounters};
use crate::geom::{GeomError, HitRecord, Ray, RayKind, Vec3};
use crate::hash::HashConfig;
use crate::metrics::RayKindStats;
use crate::predictor::{Prediction, PredictorError, PredictorTable};
use crate::scene::Scene;

/// Offset along the geometric normal for secondary ray origins.
pub const SECONDARY_OFFSET: f32 = 1e-4;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("invalid render config: {0}")]
    Config(String),
    #[error("predictor tables do not match the render: {0}")]
    Tables(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Degrees.
    pub vertical_fov: f32,
    /// `[width, height]` in pixels.
    pub resolution: [u32; 2],
}

impl Camera {
    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.vertical_fov > 0.0 && self.vertical_fov < 180.0) {
            return Err(RenderError::Camera(format!("fov {} outside (0, 180)", self.vertical_fov)));
        }
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(RenderError::Camera("resolution must be at least 1x1".into()));
        }
        let forward = self.look_at - self.position;
        // Written as `> 0` so NaN lengths fail too.
        let positive = |v: f32| v > 0.0;
        if !positive(forward.length()) || !positive(forward.cross(self.up).length()) {
            return Err(RenderError::Camera("degenerate view basis".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.resolution[0]
    }

    pub fn height(&self) -> u32 {
        self.resolution[1]
    }

    fn basis(&self) -> CameraBasis {
        let forward = (self.look_at - self.position).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        let tan_half = (self.vertical_fov.to_radians() * 0.5).tan();
        let aspect = self.width() as f32 / self.height() as f32;
        CameraBasis { origin: self.position, forward, right: right * (tan_half * aspect), up: up * tan_half }
    }
}

struct CameraBasis {
    origin: Vec3,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
}

impl CameraBasis {
    /// `x`, `y` are continuous image coordinates, y down.
    fn ray(&self, x: f32, y: f32, width: u32, height: u32) -> Result<Ray, GeomError> {
        let ndc_x = 2.0 * x / width as f32 - 1.0;
        let ndc_y = 1.0 - 2.0 * y / height as f32;
        let dir = (self.forward + self.right * ndc_x + self.up * ndc_y).normalized();
        Ray::new(self.origin, dir, 0.0, f32::INFINITY, RayKind::ClosestHit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointLight {
    pub position: Vec3,
    pub intensity: [f32; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    Limit,
    Live,
}

/// Where samples land inside a pixel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Seeded jitter inside each stratum.
    Jittered,
    /// Stratum centers, no randomness.
    StratumCenter,
    /// Every sample through the pixel center (duplicate rays).
    PixelCenter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub spp: u32,
    pub max_reflection_depth: u32,
    pub mode: Mode,
    pub rng_seed: u64,
    pub sampling: Sampling,
    /// 1 = deterministic single worker.
    pub threads: usize,
    /// In live mode, let closest-hit rays use predictions too. When false only
    /// hit-any rays short-circuit.
    pub live_closest_hit: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            spp: 8,
            max_reflection_depth: 2,
            mode: Mode::Baseline,
            rng_seed: 0,
            sampling: Sampling::Jittered,
            threads: 1,
            live_closest_hit: true,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.spp == 0 {
            return Err(RenderError::Config("spp must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(RenderError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimarySample {
    pub pixel: u32,
    pub sample: u32,
    pub ray: Ray,
}

/// `(columns, rows)` of the stratum grid for `spp` samples.
fn strata(spp: u32) -> (u32, u32) {
    let cols = (1..=spp).filter(|d| spp.is_multiple_of(*d) && d * d <= spp).max().unwrap_or(1);
    (cols, spp / cols)
}

/// Counter-based sample offsets: the stream is the pixel, the word position
/// the sample, so any schedule reproduces the same rays.
fn sample_offset(cfg: &RenderConfig, pixel: u32, sample: u32) -> (f32, f32) {
    let (cols, rows) = strata(cfg.spp);
    let (sx, sy) = ((sample % cols) as f32, (sample / cols) as f32);
    match cfg.sampling {
        Sampling::PixelCenter => (0.5, 0.5),
        Sampling::StratumCenter => ((sx + 0.5) / cols as f32, (sy + 0.5) / rows as f32),
        Sampling::Jittered => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(pixel as u64);
            rng.set_word_pos(sample as u128 * 2);
            let (jx, jy): (f32, f32) = (rng.random(), rng.random());
            ((sx + jx) / cols as f32, (sy + jy) / rows as f32)
        }
    }
}

fn pixel_samples<'a>(
    basis: &'a CameraBasis,
    camera: &Camera,
    cfg: &'a RenderConfig,
    pixel: u32,
) -> impl Iterator<Item = Result<PrimarySample, GeomError>> + 'a {
    let (w, h) = (camera.width(), camera.height());
    let (px, py) = (pixel % w, pixel / w);
    (0..cfg.spp).map(move |sample| {
        let (fx, fy) = sample_offset(cfg, pixel, sample);
        let ray = basis.ray(px as f32 + fx, py as f32 + fy, w, h)?;
        Ok(PrimarySample { pixel, sample, ray })
    })
}

/// Row-major pixels, sample-minor.
pub fn generate_primary_rays(
    camera: &Camera,
    cfg: &RenderConfig,
) -> Result<Vec<PrimarySample>, RenderError> {
    camera.validate()?;
    cfg.validate()?;
    let basis = camera.basis();
    let pixels = camera.width() * camera.height();
    let mut out = Vec::with_capacity((pixels * cfg.spp) as usize);
    for pixel in 0..pixels {
        for s in pixel_samples(&basis, camera, cfg, pixel) {
            out.push(s?);
        }
    }
    Ok(out)
}

/// The two predictors of a render: one per ray semantics.
#[derive(Clone, Debug)]
pub struct PredictorTables {
    pub hit_any: PredictorTable,
    pub closest: PredictorTable,
}

impl PredictorTables {
    pub fn new(cfg: HashConfig, go_up_level: u32) -> PredictorTables {
        PredictorTables {
            hit_any: PredictorTable::new(RayKind::HitAny, cfg, go_up_level),
            closest: PredictorTable::new(RayKind::ClosestHit, cfg, go_up_level),
        }
    }

    pub fn with_capacity_limit(self, capacity: usize) -> PredictorTables {
        PredictorTables {
            hit_any: self.hit_any.with_capacity_limit(capacity),
            closest: self.closest.with_capacity_limit(capacity),
        }
    }

    fn table(&self, kind: RayKind) -> &PredictorTable {
        match kind {
            RayKind::HitAny => &self.hit_any,
            RayKind::ClosestHit => &self.closest,
        }
    }

    fn table_mut(&mut self, kind: RayKind) -> &mut PredictorTable {
        match kind {
            RayKind::HitAny => &mut self.hit_any,
            RayKind::ClosestHit => &mut self.closest,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderStats {
    pub primary: RayKindStats,
    pub shadow: RayKindStats,
    pub reflection: RayKindStats,
}

impl std::ops::AddAssign for RenderStats {
    fn add_assign(&mut self, o: RenderStats) {
        self.primary += o.primary;
        self.shadow += o.shadow;
        self.reflection += o.reflection;
    }
}

#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    /// Linear RGB, row-major.
    pub image: Vec<[f32; 3]>,
    pub stats: RenderStats,
    /// One entry per shadow ray in issue order; true = occluded.
    pub occlusion: Vec<bool>,
}

impl RenderOutput {
    /// 8-bit sRGB-ish encoding with gamma 2.2.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.image
            .iter()
            .flat_map(|px| px.map(|c| (c.clamp(0.0, 1.0).powf(1.0 / 2.2) * 255.0 + 0.5) as u8))
            .collect()
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.to_rgb8())?;
        w.flush()
    }
}

#[derive(Clone, Copy)]
enum Population {
    Primary,
    Shadow,
    Reflection,
}

struct RowState {
    stats: RenderStats,
    occlusion: Vec<bool>,
}

impl RowState {
    fn stats_mut(&mut self, pop: Population) -> &mut RayKindStats {
        match pop {
            Population::Primary => &mut self.stats.primary,
            Population::Shadow => &mut self.stats.shadow,
            Population::Reflection => &mut self.stats.reflection,
        }
    }
}

struct Renderer<'a> {
    scene: &'a Scene,
    bvh: &'a Bvh,
    tables: &'a RwLock<PredictorTables>,
    cfg: &'a RenderConfig,
}

impl Renderer<'_> {
    fn full_traversal(&self, ray: &Ray, counters: &mut TraversalCounters) -> Option<HitRecord> {
        match ray.kind {
            RayKind::HitAny => self.bvh.intersect_any(ray, counters),
            RayKind::ClosestHit => self.bvh.intersect_closest(ray, counters),
        }
    }

    fn uses_predictor(&self, kind: RayKind) -> bool {
        match self.cfg.mode {
            Mode::Baseline => false,
            Mode::Limit => true,
            Mode::Live => kind == RayKind::HitAny || self.cfg.live_closest_hit,
        }
    }

    fn train(&self, kind: RayKind, key: crate::hash::PredictorKey, hit: &HitRecord) -> Result<(), RenderError> {
        self.tables.write().table_mut(kind).train_from_traversal(self.bvh, key, hit)?;
        Ok(())
    }

    /// Runs one ray through the configured mode and returns the hit used for shading.
    fn query(&self, ray: &Ray, pop: Population, row: &mut RowState) -> Result<Option<HitRecord>, RenderError> {
        let stats = row.stats_mut(pop);
        stats.rays += 1;

        if !self.uses_predictor(ray.kind) {
            let mut c = TraversalCounters::default();
            let hit = self.full_traversal(ray, &mut c);
            stats.record_baseline(&c);
            stats.hits += hit.is_some() as u64;
            return Ok(hit);
        }

        let mut outcome = self.tables.read().table(ray.kind).predict(self.bvh, ray)?;
        match self.cfg.mode {
            Mode::Limit => {
                let mut c = TraversalCounters::default();
                let hit = self.full_traversal(ray, &mut c);
                outcome.account(c.box_tests);
                stats.record_baseline(&c);
                stats.record_outcome(&outcome);
                stats.hits += hit.is_some() as u64;
                if outcome.class == Prediction::TruePositive {
                    if ray.kind == RayKind::ClosestHit {
                        let predicted = outcome.hit.expect("true positive carries a hit");
                        let oracle = hit.expect("a genuine predicted hit implies an oracle hit");
                        if predicted.triangle_id != oracle.triangle_id || predicted.t != oracle.t {
                            stats.wrong_closest += 1;
                        }
                    }
                } else if let Some(h) = &hit {
                    self.train(ray.kind, outcome.key, h)?;
                }
                Ok(hit)
            }
            Mode::Live => {
                if outcome.class == Prediction::TruePositive {
                    let hit = outcome.hit.expect("true positive carries a hit");
                    // Any full traversal tests at least the root-to-leaf path.
                    let path = self.bvh.node(NodeId(hit.leaf_node)).depth as u64 + 1;
                    stats.baseline_box_tests += path;
                    stats.estimated_skipped_box_tests += path.saturating_sub(outcome.overhead.box_tests);
                    stats.record_outcome(&outcome);
                    stats.hits += 1;
                    return Ok(Some(hit));
                }
                let mut c = TraversalCounters::default();
                let hit = self.full_traversal(ray, &mut c);
                stats.record_baseline(&c);
                stats.record_outcome(&outcome);
                stats.hits += hit.is_some() as u64;
                if let Some(h) = &hit {
                    self.train(ray.kind, outcome.key, h)?;
                }
                Ok(hit)
            }
            Mode::Baseline => unreachable!("baseline never consults the predictor"),
        }
    }

    fn shade(&self, ray: &Ray, depth: u32, row: &mut RowState) -> Result<[f32; 3], RenderError> {
        let pop = if depth == 0 { Population::Primary } else { Population::Reflection };
        let Some(hit) = self.query(ray, pop, row)? else {
            return Ok(self.scene.background);
        };
        let tri = self.scene.triangle(hit.triangle_id);
        let material = self.scene.material_of(hit.triangle_id);
        let point = ray.at(hit.t);
        let mut normal = tri.normal().normalized();
        if normal.dot(ray.direction) > 0.0 {
            normal = -normal;
        }
        let origin = point + normal * SECONDARY_OFFSET;

        if material.reflective {
            if depth >= self.cfg.max_reflection_depth {
                return Ok([0.0; 3]);
            }
            let d = ray.direction;
            let reflected = (d - normal * (2.0 * d.dot(normal))).normalized();
            let refl = Ray::new(origin, reflected, 0.0, f32::INFINITY, RayKind::ClosestHit)?;
            let incoming = self.shade(&refl, depth + 1, row)?;
            return Ok(std::array::from_fn(|i| material.albedo[i] * incoming[i]));
        }

        let mut color = [0.0f32; 3];
        for light in &self.scene.lights {
            let to_light = light.position - origin;
            let dist = to_light.length();
            let dir = to_light * (1.0 / dist);
            let t_max = (dist - SECONDARY_OFFSET).max(f32::MIN_POSITIVE);
            let shadow = Ray::new(origin, dir, 0.0, t_max, RayKind::HitAny)?;
            let occluded = self.query(&shadow, Population::Shadow, row)?.is_some();
            row.occlusion.push(occluded);
            if occluded {
                continue;
            }
            let cos = normal.dot(dir).max(0.0);
            let falloff = cos / (dist * dist);
            for ((c, a), l) in color.iter_mut().zip(material.albedo).zip(light.intensity) {
                *c += a / PI * l * falloff;
            }
        }
        Ok(color)
    }

    fn render_row(&self, basis: &CameraBasis, y: u32) -> Result<(Vec<[f32; 3]>, RowState), RenderError> {
        let camera = &self.scene.camera;
        let w = camera.width();
        let mut row = RowState { stats: RenderStats::default(), occlusion: Vec::new() };
        let mut pixels = Vec::with_capacity(w as usize);
        let inv_spp = 1.0 / self.cfg.spp as f32;
        for x in 0..w {
            let pixel = y * w + x;
            let mut sum = [0.0f32; 3];
            for sample in pixel_samples(basis, camera, self.cfg, pixel) {
                let c = self.shade(&sample?.ray, 0, &mut row)?;
                for i in 0..3 {
                    sum[i] += c[i];
                }
            }
            pixels.push(sum.map(|v| v * inv_spp));
        }
        Ok((pixels, row))
    }
}

/// Renders `scene`. Predictor tables are consulted and trained in place;
/// they persist across all samples of the frame.
pub fn render(
    scene: &Scene,
    bvh: &Bvh,
    tables: &mut PredictorTables,
    cfg: &RenderConfig,
) -> Result<RenderOutput, RenderError> {
    scene.camera.validate()?;
    cfg.validate()?;
    if tables.hit_any.kind() != RayKind::HitAny || tables.closest.kind() != RayKind::ClosestHit {
        return Err(RenderError::Tables("table kinds swapped".into()));
    }
    let (w, h) = (scene.camera.width(), scene.camera.height());
    let basis = scene.camera.basis();
    let shared = RwLock::new(std::mem::replace(tables, PredictorTables::new(HashConfig::default(), 0)));
    let renderer = Renderer { scene, bvh, tables: &shared, cfg };

    let rows: Vec<Result<_, RenderError>> = if cfg.threads == 1 {
        (0..h).map(|y| renderer.render_row(&basis, y)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| RenderError::Config(e.to_string()))?;
        pool.install(|| (0..h).into_par_iter().map(|y| renderer.render_row(&basis, y)).collect())
    };
    *tables = shared.into_inner();

    let mut out = RenderOutput {
        width: w,
        height: h,
        image: Vec::with_capacity((w * h) as usize),
        stats: RenderStats::default(),
        occlusion: Vec::new(),
    };
    for row in rows {
        let (pixels, state) = row?;
        out.image.extend(pixels);
        out.stats += state.stats;
        out.occlusion.extend(state.occlusion);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvh::build_bvh;
    use crate::geom::Triangle;
    use crate::scene::Material;

    fn camera(w: u32, h: u32) -> Camera {
        Camera {
            position: Vec3::new(0.0, 0.0, -5.0),
            look_at: Vec3::ZERO,
            up: Vec3::new(0.0, 1.0, 0.0),
            vertical_fov: 40.0,
            resolution: [w, h],
        }
    }

    fn one_triangle_scene(w: u32, h: u32) -> Scene {
        let tri = Triangle::new(
            Vec3::new(-2.0, -2.0, 0.0),
            Vec3::new(2.0, -2.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            0,
        );
        Scene::from_parts(
            vec![tri],
            vec![Material { albedo: [0.5, 0.25, 1.0], reflective: false }],
            vec![0],
            camera(w, h),
            vec![PointLight { position: Vec3::new(0.0, 3.0, -4.0), intensity: [10.0, 10.0, 10.0] }],
            [0.1, 0.2, 0.3],
        )
    }

    #[test]
    fn single_center_ray() {
        let cfg = RenderConfig { spp: 1, sampling: Sampling::StratumCenter, ..Default::default() };
        let rays = generate_primary_rays(&camera(1, 1), &cfg).unwrap();
        assert_eq!(rays.len(), 1);
        assert_eq!(rays[0].ray.origin, Vec3::new(0.0, 0.0, -5.0));
        let d = rays[0].ray.direction;
        assert!(d.x.abs() < 1e-7 && d.y.abs() < 1e-7 && (d.z - 1.0).abs() < 1e-7);
    }

    #[test]
    fn primary_rays_are_unit_and_deterministic() {
        let cfg = RenderConfig { spp: 4, rng_seed: 99, ..Default::default() };
        let a = generate_primary_rays(&camera(2, 2), &cfg).unwrap();
        assert_eq!(a.len(), 16);
        for s in &a {
            assert!((s.ray.direction.length() - 1.0).abs() < 1e-4);
        }
        let b = generate_primary_rays(&camera(2, 2), &cfg).unwrap();
        assert_eq!(a, b);
        let other = generate_primary_rays(&camera(2, 2), &RenderConfig { rng_seed: 100, ..cfg }).unwrap();
        assert_ne!(a, other);
        // Row-major pixels, sample-minor.
        let order: Vec<(u32, u32)> = a.iter().map(|s| (s.pixel, s.sample)).collect();
        let expected: Vec<(u32, u32)> = (0..4).flat_map(|p| (0..4).map(move |s| (p, s))).collect();
        assert_eq!(order, expected);
    }

    #[test]
    fn strata_shapes() {
        assert_eq!(strata(1), (1, 1));
        assert_eq!(strata(2), (1, 2));
        assert_eq!(strata(4), (2, 2));
        assert_eq!(strata(8), (2, 4));
    }

    #[test]
    fn lambert_pixel_matches_hand_computation() {
        let scene = one_triangle_scene(1, 1);
        let bvh = build_bvh(scene.triangles.clone(), 4).unwrap();
        let cfg = RenderConfig { spp: 1, sampling: Sampling::PixelCenter, ..Default::default() };
        let mut tables = PredictorTables::new(HashConfig::default(), 0);
        let out = render(&scene, &bvh, &mut tables, &cfg).unwrap();

        // Hit at the origin, normal flipped to (0,0,-1). Shadow origin sits at
        // (0,0,-1e-4); light at (0,3,-4).
        let origin = [0.0f64, 0.0, -1e-4];
        let to_light = [0.0 - origin[0], 3.0 - origin[1], -4.0 - origin[2]];
        let d2 = to_light.iter().map(|v| v * v).sum::<f64>();
        let cos = -to_light[2] / d2.sqrt();
        let scale = 10.0 * cos / d2 / std::f64::consts::PI;
        let expected = [0.5 * scale, 0.25 * scale, 1.0 * scale];
        for (got, want) in out.image[0].iter().zip(expected) {
            assert!((*got as f64 - want).abs() < 1e-6, "{:?}", out.image[0]);
        }
        assert_eq!(out.occlusion, vec![false]);
        assert_eq!(out.stats.primary.rays, 1);
        assert_eq!(out.stats.shadow.rays, 1);
    }

    #[test]
    fn ray_conservation() {
        let scene = one_triangle_scene(6, 5);
        let bvh = build_bvh(scene.triangles.clone(), 4).unwrap();
        let cfg = RenderConfig { spp: 3, ..Default::default() };
        let mut tables = PredictorTables::new(HashConfig::default(), 0);
        let out = render(&scene, &bvh, &mut tables, &cfg).unwrap();
        assert_eq!(out.stats.primary.rays, 6 * 5 * 3);
        assert_eq!(out.stats.shadow.rays, out.stats.primary.hits * scene.lights.len() as u64);
        assert_eq!(out.stats.reflection.rays, 0);
        assert_eq!(out.image.len(), 30);
        assert_eq!(out.stats.primary.consulted, 0);
    }

    #[test]
    fn ppm_header() {
        let out = RenderOutput {
            width: 2,
            height: 1,
            image: vec![[1.0, 0.0, 0.5], [2.0, -1.0, 0.0]],
            stats: RenderStats::default(),
            occlusion: vec![],
        };
        let mut buf = Vec::new();
        out.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&buf[11..], &[255, 0, 186, 255, 0, 0]);
    }

    #[test]
    fn rejects_bad_config() {
        let scene = one_triangle_scene(1, 1);
        let bvh = build_bvh(scene.triangles.clone(), 4).unwrap();
        let mut tables = PredictorTables::new(HashConfig::default(), 0);
        let cfg = RenderConfig { spp: 0, ..Default::default() };
        assert!(matches!(render(&scene, &bvh, &mut tables, &cfg), Err(RenderError::Config(_))));
        let mut bad = scene.clone();
        bad.camera.vertical_fov = 180.0;
        assert!(matches!(
            render(&bad, &bvh, &mut tables, &RenderConfig::default()),
            Err(RenderError::Camera(_))
        ));
    }
}
