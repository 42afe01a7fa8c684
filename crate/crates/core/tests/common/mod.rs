#![allow(dead_code)]

use std::path::PathBuf;

use hrpp::{build_bvh, Bvh, Ray, RayKind, Scene, Triangle, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BUNDLED: [&str; 3] = ["spheres", "menger2", "torus_mirror"];

pub fn scene_path(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenes")).join(format!("{name}.json"))
}

pub fn load_bundled(name: &str, resolution: u32) -> (Scene, Bvh) {
    let mut scene = Scene::load(&scene_path(name)).unwrap();
    scene.camera.resolution = [resolution, resolution];
    let bvh = build_bvh(scene.triangles.clone(), 4).unwrap();
    (scene, bvh)
}

fn point(rng: &mut ChaCha8Rng, lo: f32, hi: f32) -> Vec3 {
    Vec3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

/// Small random triangles scattered through a cube of side 10.
pub fn random_soup(seed: u64, count: usize) -> Vec<Triangle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tris = Vec::with_capacity(count);
    while tris.len() < count {
        let c = point(&mut rng, -5.0, 5.0);
        let t = Triangle::new(
            c + point(&mut rng, -1.0, 1.0),
            c + point(&mut rng, -1.0, 1.0),
            c + point(&mut rng, -1.0, 1.0),
            tris.len() as u32,
        );
        if !t.is_degenerate() {
            tris.push(t);
        }
    }
    tris
}

pub fn unit_dir(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = point(rng, -1.0, 1.0);
        let l = v.length();
        if l > 1e-3 && l <= 1.0 {
            return v * (1.0 / l);
        }
    }
}

/// Rays from a shell around the soup aimed roughly at its interior.
pub fn random_rays(seed: u64, count: usize, kind: RayKind) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let origin = point(&mut rng, -8.0, 8.0);
            let target = point(&mut rng, -4.0, 4.0);
            let d = target - origin;
            let dir = if d.length() > 1e-3 { d.normalized() } else { unit_dir(&mut rng) };
            Ray::new(origin, dir, 0.0, f32::INFINITY, kind).unwrap()
        })
        .collect()
}
