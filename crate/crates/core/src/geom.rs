//! Vector, ray, box and triangle primitives with the two intersection
//! predicates every traversal path shares.

use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Triangles whose area is at or below this are dropped at ingestion.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Minimum |determinant| for the Möller–Trumbore test to accept a hit.
pub const DETERMINANT_EPSILON: f64 = 1e-9;

/// Tolerance on |direction| = 1.
pub const UNIT_TOLERANCE: f32 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("non-finite ray component in {0}")]
    NonFinite(&'static str),
    #[error("ray direction is not unit length (|d| = {0})")]
    NotNormalized(f32),
    #[error("invalid ray extent [{0}, {1}]")]
    BadExtent(f32, f32),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f32; 3]", into = "[f32; 3]")]
pub struct Vec3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl From<[f32; 3]> for Vec3 {
    fn from(v: [f32; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f32; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn splat(v: f32) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn dot(self, o: Vec3) -> f32 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f32 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.length())
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f32; 3] {
        self.into()
    }

    fn to_f64(self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }
}

impl Index<usize> for Vec3 {
    type Output = f32;

    fn index(&self, axis: usize) -> &f32 {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f32> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f32) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Which traversal semantics a ray needs. Shadow rays are `HitAny`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayKind {
    HitAny,
    ClosestHit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_min: f32,
    pub t_max: f32,
    pub kind: RayKind,
    inv_dir: Vec3,
}

impl Ray {
    /// Validates finiteness, unit direction and extent.
    pub fn new(
        origin: Vec3,
        direction: Vec3,
        t_min: f32,
        t_max: f32,
        kind: RayKind,
    ) -> Result<Ray, GeomError> {
        if !origin.is_finite() {
            return Err(GeomError::NonFinite("origin"));
        }
        if !direction.is_finite() {
            return Err(GeomError::NonFinite("direction"));
        }
        let len = direction.length();
        if (len - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeomError::NotNormalized(len));
        }
        if t_min.is_nan() || t_max.is_nan() || t_min < 0.0 || t_max <= t_min {
            return Err(GeomError::BadExtent(t_min, t_max));
        }
        Ok(Ray::new_unchecked(origin, direction, t_min, t_max, kind))
    }

    /// Builds a ray without validation. Used for hash unit tests that feed
    /// raw, unnormalized directions.
    pub fn new_unchecked(
        origin: Vec3,
        direction: Vec3,
        t_min: f32,
        t_max: f32,
        kind: RayKind,
    ) -> Ray {
        let inv_dir = Vec3::new(1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z);
        Ray { origin, direction, t_min, t_max, kind, inv_dir }
    }

    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.direction * t
    }

    pub fn inv_dir(&self) -> Vec3 {
        self.inv_dir
    }

    pub fn with_t_max(&self, t_max: f32) -> Ray {
        Ray { t_max, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Inverted sentinel; the union identity. Only meaningful inside the builder.
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::splat(f32::INFINITY),
        max: Vec3::splat(f32::NEG_INFINITY),
    };

    pub fn new(min: Vec3, max: Vec3) -> Aabb {
        Aabb { min, max }
    }

    pub fn from_point(p: Vec3) -> Aabb {
        Aabb { min: p, max: p }
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn centroid(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn largest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    pub fn surface_area(&self) -> f32 {
        if self.is_empty() {
            return 0.0;
        }
        let e = self.extent();
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    /// Componentwise containment with a per-axis slack.
    pub fn contains_box(&self, inner: &Aabb, eps: f32) -> bool {
        (0..3).all(|a| inner.min[a] >= self.min[a] - eps && inner.max[a] <= self.max[a] + eps)
    }

    pub fn translated(&self, by: Vec3) -> Aabb {
        Aabb { min: self.min + by, max: self.max + by }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub v0: Vec3,
    pub v1: Vec3,
    pub v2: Vec3,
    pub id: u32,
}

impl Triangle {
    pub fn new(v0: Vec3, v1: Vec3, v2: Vec3, id: u32) -> Triangle {
        Triangle { v0, v1, v2, id }
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::from_point(self.v0);
        b.grow(self.v1);
        b.grow(self.v2);
        b
    }

    pub fn centroid(&self) -> Vec3 {
        (self.v0 + self.v1 + self.v2) * (1.0 / 3.0)
    }

    pub fn area(&self) -> f64 {
        let [e1, e2] = [sub64(self.v1, self.v0), sub64(self.v2, self.v0)];
        let c = cross64(e1, e2);
        0.5 * dot64(c, c).sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() <= DEGENERATE_AREA
    }

    /// Unnormalized winding-order normal.
    pub fn normal(&self) -> Vec3 {
        (self.v1 - self.v0).cross(self.v2 - self.v0)
    }
}

/// Drops degenerate triangles, returning the survivors and the dropped count.
pub fn filter_degenerate(tris: Vec<Triangle>) -> (Vec<Triangle>, usize) {
    let before = tris.len();
    let kept: Vec<Triangle> = tris.into_iter().filter(|t| !t.is_degenerate()).collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// Result of a single ray/triangle test; `leaf_node` is filled in by the BVH.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitRecord {
    pub t: f32,
    pub triangle_id: u32,
    pub leaf_node: u32,
    pub u: f32,
    pub v: f32,
}

/// Leaf slot used for hits produced outside of any BVH.
pub const NO_NODE: u32 = u32::MAX;

/// Machine epsilon bound used to pad the slab exit distance.
const fn gamma(n: f32) -> f32 {
    let eps = f32::EPSILON * 0.5;
    (n * eps) / (1.0 - n * eps)
}

const SLAB_EXIT_PAD: f32 = 1.0 + 2.0 * gamma(3.0);

/// Slab test. Returns the clipped `(t_enter, t_exit)` interval on a hit.
///
/// Axis-parallel rays produce infinite reciprocals. A ray lying exactly in a
/// slab plane yields a `0 * inf` NaN, which `f32::max`/`f32::min` discard,
/// so it counts as inside that slab. Boundary ties are hits.
pub fn ray_aabb_intersect(ray: &Ray, b: &Aabb) -> Option<(f32, f32)> {
    let inv = ray.inv_dir;
    let mut t_enter = ray.t_min;
    let mut t_exit = ray.t_max;
    for a in 0..3 {
        let t0 = (b.min[a] - ray.origin[a]) * inv[a];
        let t1 = (b.max[a] - ray.origin[a]) * inv[a];
        let (near, far) = if inv[a].is_sign_negative() { (t1, t0) } else { (t0, t1) };
        t_enter = t_enter.max(near);
        t_exit = t_exit.min(far * SLAB_EXIT_PAD);
    }
    (t_enter <= t_exit).then_some((t_enter, t_exit))
}

fn sub64(a: Vec3, b: Vec3) -> [f64; 3] {
    let (a, b) = (a.to_f64(), b.to_f64());
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross64(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot64(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Edge ownership for hits exactly on an edge. The edge `from -> to` is
/// owned when its direction, flipped by the facing sign, is lexicographically
/// positive. Two consistently wound triangles traverse a shared edge in
/// opposite directions, so exactly one of them owns it.
fn owns_edge(from: Vec3, to: Vec3, facing: f64) -> bool {
    let e = sub64(to, from);
    for c in e {
        let c = c * facing;
        if c != 0.0 {
            return c > 0.0;
        }
    }
    false
}

/// Möller–Trumbore in double precision.
///
/// Interior hits need |det| > 1e-9. A hit landing exactly on an edge
/// (barycentric numerator == 0) is reported only by the triangle that owns
/// that edge, see [`owns_edge`].
pub fn ray_triangle_intersect(ray: &Ray, tri: &Triangle) -> Option<HitRecord> {
    let e1 = sub64(tri.v1, tri.v0);
    let e2 = sub64(tri.v2, tri.v0);
    let d = ray.direction.to_f64();
    let p = cross64(d, e2);
    let det = dot64(e1, p);
    if det.abs() <= DETERMINANT_EPSILON {
        return None;
    }
    let facing = det.signum();
    let det = det.abs();
    let s = sub64(ray.origin, tri.v0);
    let u_num = dot64(s, p) * facing;
    let q = cross64(s, e1);
    let v_num = dot64(d, q) * facing;
    let w_num = det - u_num - v_num;

    if u_num < 0.0 || v_num < 0.0 || w_num < 0.0 {
        return None;
    }
    // u weighs v1, so u == 0 lies on edge v2 -> v0; v == 0 on v0 -> v1;
    // w == 0 on v1 -> v2.
    if u_num == 0.0 && !owns_edge(tri.v2, tri.v0, facing) {
        return None;
    }
    if v_num == 0.0 && !owns_edge(tri.v0, tri.v1, facing) {
        return None;
    }
    if w_num == 0.0 && !owns_edge(tri.v1, tri.v2, facing) {
        return None;
    }

    let t = dot64(e2, q) * facing / det;
    if !(t >= ray.t_min as f64 && t <= ray.t_max as f64) {
        return None;
    }
    let t = t as f32;
    if t < ray.t_min || t > ray.t_max {
        return None;
    }
    Some(HitRecord {
        t,
        triangle_id: tri.id,
        leaf_node: NO_NODE,
        u: (u_num / det) as f32,
        v: (v_num / det) as f32,
    })
}
