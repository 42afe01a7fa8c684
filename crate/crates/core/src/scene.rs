//! Scene ingestion: JSON scene configs, the Wavefront OBJ `v`/`f` subset and
//! procedural generators.
//!
//! Generator triangle counts:
//! - `grid` with `n`: `2 n^2`
//! - `spheres` with `count` c and `tessellation` s: `c^2 * 2 s (s - 1)`
//! - `menger` with `level` l: `12 * 20^l`

use std::collections::HashMap;
use std::f32::consts::PI;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{filter_degenerate, Triangle, Vec3};
use crate::tracer::{Camera, PointLight};

pub const SCENE_VERSION: u32 = 1;
pub const MAX_MENGER_LEVEL: u32 = 3;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face index {index} out of range ({vertices} vertices)")]
    IndexOutOfRange { line: usize, index: i64, vertices: usize },
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("bad parameters for generator `{name}`: {message}")]
    BadParams { name: String, message: String },
    #[error("scene config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scene version {0} (expected {SCENE_VERSION})")]
    UnsupportedVersion(u32),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

impl SceneError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, SceneError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound)
    }
}

/// Row-major affine transform applied to points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transform(pub [[f32; 4]; 4]);

impl Default for Transform {
    fn default() -> Self {
        Transform::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]);

    pub fn translation(by: Vec3) -> Transform {
        let mut m = Transform::IDENTITY;
        m.0[0][3] = by.x;
        m.0[1][3] = by.y;
        m.0[2][3] = by.z;
        m
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let m = &self.0;
        let row = |r: &[f32; 4]| r[0] * p.x + r[1] * p.y + r[2] * p.z + r[3];
        Vec3::new(row(&m[0]), row(&m[1]), row(&m[2]))
    }

    pub fn is_invertible_affine(&self) -> bool {
        let m = &self.0;
        if m[3] != [0.0, 0.0, 0.0, 1.0] || m.iter().flatten().any(|v| !v.is_finite()) {
            return false;
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        det != 0.0
    }

    pub fn apply_triangle(&self, t: &Triangle) -> Triangle {
        Triangle::new(self.apply(t.v0), self.apply(t.v1), self.apply(t.v2), t.id)
    }
}

fn default_albedo() -> [f32; 3] {
    [0.8, 0.8, 0.8]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDescription {
    /// An `.obj` path (relative to the scene file) or a generator name.
    pub source: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default)]
    pub reflective: bool,
    #[serde(default = "default_albedo")]
    pub albedo: [f32; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub version: u32,
    pub camera: Camera,
    pub lights: Vec<PointLight>,
    #[serde(default)]
    pub background: [f32; 3],
    pub meshes: Vec<MeshDescription>,
}

impl SceneDescription {
    pub fn from_json(text: &str) -> Result<SceneDescription, SceneError> {
        let desc: SceneDescription = serde_json::from_str(text)?;
        if desc.version != SCENE_VERSION {
            return Err(SceneError::UnsupportedVersion(desc.version));
        }
        if desc.meshes.is_empty() {
            return Err(SceneError::Invalid("at least one mesh is required".into()));
        }
        if desc.lights.is_empty() {
            return Err(SceneError::Invalid("at least one light is required".into()));
        }
        if let Some(l) = desc.lights.iter().find(|l| l.intensity.iter().any(|&i| i.is_nan() || i < 0.0)) {
            return Err(SceneError::Invalid(format!("negative light intensity {:?}", l.intensity)));
        }
        for (i, m) in desc.meshes.iter().enumerate() {
            if !m.transform.is_invertible_affine() {
                return Err(SceneError::Invalid(format!("mesh {i} transform is not invertible")));
            }
        }
        Ok(desc)
    }

    pub fn load(path: &Path) -> Result<SceneDescription, SceneError> {
        let text = fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.into(), source })?;
        SceneDescription::from_json(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: [f32; 3],
    pub reflective: bool,
}

/// A renderable scene. Triangle ids are dense: `triangles[i].id == i`.
#[derive(Clone, Debug)]
pub struct Scene {
    pub triangles: Vec<Triangle>,
    pub materials: Vec<Material>,
    pub triangle_material: Vec<u32>,
    pub camera: Camera,
    pub lights: Vec<PointLight>,
    pub background: [f32; 3],
}

impl Scene {
    /// Assembles a scene, renumbering triangle ids densely in input order.
    pub fn from_parts(
        mut triangles: Vec<Triangle>,
        materials: Vec<Material>,
        triangle_material: Vec<u32>,
        camera: Camera,
        lights: Vec<PointLight>,
        background: [f32; 3],
    ) -> Scene {
        assert_eq!(triangles.len(), triangle_material.len());
        for (i, t) in triangles.iter_mut().enumerate() {
            t.id = i as u32;
        }
        Scene { triangles, materials, triangle_material, camera, lights, background }
    }

    pub fn from_description(desc: &SceneDescription, base_dir: &Path) -> Result<Scene, SceneError> {
        let mut triangles = Vec::new();
        let mut triangle_material = Vec::new();
        let mut materials = Vec::new();
        let mut dropped = 0;
        for mesh in &desc.meshes {
            let raw = if mesh.source.ends_with(".obj") {
                load_obj(&base_dir.join(&mesh.source))?
            } else {
                generate_scene(&mesh.source, &mesh.params)?
            };
            let placed = raw.iter().map(|t| mesh.transform.apply_triangle(t)).collect();
            let (kept, d) = filter_degenerate(placed);
            dropped += d;
            let material = materials.len() as u32;
            materials.push(Material { albedo: mesh.albedo, reflective: mesh.reflective });
            triangle_material.extend(std::iter::repeat_n(material, kept.len()));
            triangles.extend(kept);
        }
        if dropped > 0 {
            info!("dropped {dropped} degenerate triangles during ingestion");
        }
        if triangles.is_empty() {
            return Err(SceneError::Invalid("scene has no valid triangles".into()));
        }
        Ok(Scene::from_parts(
            triangles,
            materials,
            triangle_material,
            desc.camera.clone(),
            desc.lights.clone(),
            desc.background,
        ))
    }

    /// Loads a JSON scene config and everything it references.
    pub fn load(path: &Path) -> Result<Scene, SceneError> {
        let desc = SceneDescription::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scene::from_description(&desc, base)
    }

    pub fn triangle(&self, id: u32) -> &Triangle {
        &self.triangles[id as usize]
    }

    pub fn material_of(&self, id: u32) -> &Material {
        &self.materials[self.triangle_material[id as usize] as usize]
    }
}

fn parse_vertex(fields: &[&str], line: usize) -> Result<Vec3, SceneError> {
    if fields.len() < 3 {
        return Err(SceneError::Parse { line, message: "vertex needs three coordinates".into() });
    }
    let mut c = [0.0f32; 3];
    for (slot, f) in c.iter_mut().zip(fields) {
        *slot = f
            .parse()
            .map_err(|_| SceneError::Parse { line, message: format!("bad coordinate `{f}`") })?;
    }
    Ok(c.into())
}

fn resolve_index(token: &str, vertices: usize, line: usize) -> Result<usize, SceneError> {
    let head = token.split('/').next().unwrap_or("");
    let index: i64 = head
        .parse()
        .map_err(|_| SceneError::Parse { line, message: format!("bad face index `{token}`") })?;
    let resolved = match index {
        i if i > 0 => i - 1,
        i if i < 0 => vertices as i64 + i,
        _ => -1,
    };
    if resolved < 0 || resolved >= vertices as i64 {
        return Err(SceneError::IndexOutOfRange { line, index, vertices });
    }
    Ok(resolved as usize)
}

/// Parses the `v`/`f` subset of OBJ. Polygons are fan triangulated; normals,
/// texture coordinates and every other record are skipped.
pub fn parse_obj<R: BufRead>(reader: R) -> Result<Vec<Triangle>, SceneError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles = Vec::new();
    let mut skipped: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| SceneError::Parse { line: line_no, message: e.to_string() })?;
        let line = line.split('#').next().unwrap_or("");
        let mut fields = line.split_whitespace();
        let Some(keyword) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        match keyword {
            "v" => vertices.push(parse_vertex(&rest, line_no)?),
            "f" => {
                if rest.len() < 3 {
                    return Err(SceneError::Parse {
                        line: line_no,
                        message: "face needs at least three vertices".into(),
                    });
                }
                let idx = rest
                    .iter()
                    .map(|t| resolve_index(t, vertices.len(), line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                for k in 1..idx.len() - 1 {
                    let id = triangles.len() as u32;
                    triangles.push(Triangle::new(vertices[idx[0]], vertices[idx[k]], vertices[idx[k + 1]], id));
                }
            }
            // Grouping and smoothing carry no geometry.
            "o" | "g" | "s" => {}
            other => *skipped.entry(other.to_string()).or_default() += 1,
        }
    }
    if !skipped.is_empty() {
        let mut kinds: Vec<_> = skipped.into_iter().collect();
        kinds.sort();
        warn!("skipped unsupported OBJ records: {kinds:?}");
    }
    Ok(triangles)
}

pub fn load_obj(path: &Path) -> Result<Vec<Triangle>, SceneError> {
    let file = fs::File::open(path).map_err(|source| SceneError::Io { path: path.into(), source })?;
    parse_obj(BufReader::new(file))
}

/// Writes triangles as unshared `v`/`f` records. Coordinates use Rust's
/// shortest round-trip float formatting, so reloading is lossless.
pub fn write_obj<W: Write>(triangles: &[Triangle], mut w: W) -> io::Result<()> {
    for (i, t) in triangles.iter().enumerate() {
        for v in [t.v0, t.v1, t.v2] {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        let base = 3 * i + 1;
        writeln!(w, "f {} {} {}", base, base + 1, base + 2)?;
    }
    w.flush()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridParams {
    n: u32,
    #[serde(default = "GridParams::default_size")]
    size: f32,
}

impl GridParams {
    fn default_size() -> f32 {
        2.0
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereParams {
    /// Spheres per side of the square arrangement.
    count: u32,
    tessellation: u32,
    #[serde(default = "SphereParams::default_radius")]
    radius: f32,
    #[serde(default = "SphereParams::default_spacing")]
    spacing: f32,
}

impl SphereParams {
    fn default_radius() -> f32 {
        0.4
    }
    fn default_spacing() -> f32 {
        1.0
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MengerParams {
    level: u32,
    #[serde(default = "MengerParams::default_size")]
    size: f32,
}

impl MengerParams {
    fn default_size() -> f32 {
        2.0
    }
}

fn params<T: serde::de::DeserializeOwned>(name: &str, value: &serde_json::Value) -> Result<T, SceneError> {
    let value = if value.is_null() { serde_json::json!({}) } else { value.clone() };
    serde_json::from_value(value)
        .map_err(|e| SceneError::BadParams { name: name.into(), message: e.to_string() })
}

fn bad(name: &str, message: &str) -> SceneError {
    SceneError::BadParams { name: name.into(), message: message.into() }
}

/// Procedural geometry by generator name: `grid`, `spheres` or `menger`.
pub fn generate_scene(name: &str, params_json: &serde_json::Value) -> Result<Vec<Triangle>, SceneError> {
    let tris = match name {
        "grid" => {
            let p: GridParams = params(name, params_json)?;
            if p.n == 0 {
                return Err(bad(name, "n must be at least 1"));
            }
            grid(p.n, p.size)
        }
        "spheres" => {
            let p: SphereParams = params(name, params_json)?;
            if p.count == 0 || p.tessellation < 3 {
                return Err(bad(name, "need count >= 1 and tessellation >= 3"));
            }
            spheres(&p)
        }
        "menger" => {
            let p: MengerParams = params(name, params_json)?;
            if p.level > MAX_MENGER_LEVEL {
                return Err(bad(name, "level must be at most 3"));
            }
            menger(p.level, p.size)
        }
        other => return Err(SceneError::UnknownGenerator(other.into())),
    };
    Ok(tris.into_iter().enumerate().map(|(i, t)| Triangle { id: i as u32, ..t }).collect())
}

/// `n x n` quads in the y = 0 plane, centered, facing +y.
fn grid(n: u32, size: f32) -> Vec<Triangle> {
    let step = size / n as f32;
    let half = size * 0.5;
    let at = |i: u32, j: u32| Vec3::new(-half + i as f32 * step, 0.0, -half + j as f32 * step);
    let mut out = Vec::with_capacity(2 * (n * n) as usize);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            out.push(Triangle::new(a, c, b, 0));
            out.push(Triangle::new(a, d, c, 0));
        }
    }
    out
}

/// UV sphere with `s` slices and `s` stacks; the caps are triangle fans.
fn uv_sphere(center: Vec3, radius: f32, s: u32, out: &mut Vec<Triangle>) {
    let point = |stack: u32, slice: u32| {
        let theta = PI * stack as f32 / s as f32;
        let phi = 2.0 * PI * (slice % s) as f32 / s as f32;
        center + Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin()) * radius
    };
    let top = center + Vec3::new(0.0, radius, 0.0);
    let bottom = center - Vec3::new(0.0, radius, 0.0);
    for slice in 0..s {
        out.push(Triangle::new(top, point(1, slice + 1), point(1, slice), 0));
        out.push(Triangle::new(bottom, point(s - 1, slice), point(s - 1, slice + 1), 0));
        for stack in 1..s - 1 {
            let (a, b) = (point(stack, slice), point(stack, slice + 1));
            let (c, d) = (point(stack + 1, slice + 1), point(stack + 1, slice));
            out.push(Triangle::new(a, b, c, 0));
            out.push(Triangle::new(a, c, d, 0));
        }
    }
}

fn spheres(p: &SphereParams) -> Vec<Triangle> {
    let mut out = Vec::new();
    let offset = (p.count as f32 - 1.0) * 0.5;
    for j in 0..p.count {
        for i in 0..p.count {
            let center = Vec3::new(
                (i as f32 - offset) * p.spacing,
                p.radius,
                (j as f32 - offset) * p.spacing,
            );
            uv_sphere(center, p.radius, p.tessellation, &mut out);
        }
    }
    out
}

fn cube(min: Vec3, max: Vec3, out: &mut Vec<Triangle>) {
    let c = |x: bool, y: bool, z: bool| {
        Vec3::new(if x { max.x } else { min.x }, if y { max.y } else { min.y }, if z { max.z } else { min.z })
    };
    // Each face as a counter-clockwise quad seen from outside.
    let faces = [
        [c(false, false, false), c(false, true, false), c(true, true, false), c(true, false, false)],
        [c(false, false, true), c(true, false, true), c(true, true, true), c(false, true, true)],
        [c(false, false, false), c(false, false, true), c(false, true, true), c(false, true, false)],
        [c(true, false, false), c(true, true, false), c(true, true, true), c(true, false, true)],
        [c(false, false, false), c(true, false, false), c(true, false, true), c(false, false, true)],
        [c(false, true, false), c(false, true, true), c(true, true, true), c(true, true, false)],
    ];
    for [a, b, cc, d] in faces {
        out.push(Triangle::new(a, b, cc, 0));
        out.push(Triangle::new(a, cc, d, 0));
    }
}

fn menger_cubes(min: Vec3, size: f32, level: u32, out: &mut Vec<Triangle>) {
    if level == 0 {
        cube(min, min + Vec3::splat(size), out);
        return;
    }
    let step = size / 3.0;
    for x in 0..3u32 {
        for y in 0..3u32 {
            for z in 0..3u32 {
                let middles = [x, y, z].iter().filter(|&&v| v == 1).count();
                if middles >= 2 {
                    continue;
                }
                let sub = min + Vec3::new(x as f32, y as f32, z as f32) * step;
                menger_cubes(sub, step, level - 1, out);
            }
        }
    }
}

/// Menger sponge centered at the origin, `20^level` cubes.
fn menger(level: u32, size: f32) -> Vec<Triangle> {
    let mut out = Vec::with_capacity(12 * 20usize.pow(level));
    menger_cubes(Vec3::splat(-size * 0.5), size, level, &mut out);
    out
}
