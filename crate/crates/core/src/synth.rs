//! Deterministic synthetic scans from a spinning multi-ring range sensor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::voxel::PointCloud;

pub const SENSOR_HEIGHT: f64 = 1.73;
pub const MAX_RANGE: f64 = 80.0;
pub const MIN_ELEVATION_DEG: f64 = -25.0;
pub const MAX_ELEVATION_DEG: f64 = 3.0;

const BOXES: usize = 24;
const SPHERE_RADIUS: f64 = 40.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scene {
    /// Flat ground.
    Plane,
    /// Ground with randomly placed upright boxes.
    #[default]
    PlaneWithBoxes,
    /// Inside of a sphere centered on the sensor.
    Sphere,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub seed: u64,
    pub rings: usize,
    pub points_per_ring: usize,
    pub scene: Scene,
    /// Standard deviation of the range noise in meters.
    pub noise_sigma: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rings: 64,
            points_per_ring: 1024,
            scene: Scene::PlaneWithBoxes,
            noise_sigma: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    /// Entry distance of a ray from `o` along `d`, slab method.
    fn hit(&self, o: &[f64; 3], d: &[f64; 3]) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if d[i] == 0.0 {
                if o[i] < self.lo[i] || o[i] > self.hi[i] {
                    return None;
                }
                continue;
            }
            let a = (self.lo[i] - o[i]) / d[i];
            let b = (self.hi[i] - o[i]) / d[i];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

fn random_boxes(rng: &mut ChaCha8Rng) -> Vec<Aabb> {
    (0..BOXES)
        .map(|_| {
            let r = rng.gen_range(10.0..70.0);
            let az = rng.gen_range(0.0..2.0 * PI);
            let (w, l, h) = (
                rng.gen_range(1.0..4.0),
                rng.gen_range(1.0..6.0),
                rng.gen_range(3.0..10.0),
            );
            let (cx, cy) = (r * az.cos(), r * az.sin());
            Aabb {
                lo: [cx - w / 2.0, cy - l / 2.0, 0.0],
                hi: [cx + w / 2.0, cy + l / 2.0, h],
            }
        })
        .collect()
}

/// Elevation of ring `i` in radians; a single ring looks down the most.
fn elevation(i: usize, rings: usize) -> f64 {
    let t = if rings > 1 {
        i as f64 / (rings - 1) as f64
    } else {
        0.0
    };
    (MIN_ELEVATION_DEG + t * (MAX_ELEVATION_DEG - MIN_ELEVATION_DEG)).to_radians()
}

/// Sensor sits at `(0, 0, 1.73)` above ground `z = 0`. Every ring sweeps
/// `points_per_ring` evenly spaced azimuths; rays that hit nothing within
/// 80 m produce no point.
pub fn gen_scan(config: &ScanConfig) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let boxes = match config.scene {
        Scene::PlaneWithBoxes => random_boxes(&mut rng),
        _ => Vec::new(),
    };
    let noise = Normal::new(0.0, config.noise_sigma.max(0.0)).expect("finite sigma");
    let origin = [0.0, 0.0, SENSOR_HEIGHT];
    let mut points = Vec::with_capacity(config.rings * config.points_per_ring);
    for ring in 0..config.rings {
        let el = elevation(ring, config.rings);
        let (sin_el, cos_el) = el.sin_cos();
        for k in 0..config.points_per_ring {
            let az = 2.0 * PI * k as f64 / config.points_per_ring as f64;
            let (sin_az, cos_az) = az.sin_cos();
            let d = [cos_el * cos_az, cos_el * sin_az, sin_el];
            let range = match config.scene {
                Scene::Sphere => Some(SPHERE_RADIUS),
                _ => {
                    let ground = (sin_el < 0.0).then(|| -SENSOR_HEIGHT / sin_el);
                    boxes
                        .iter()
                        .filter_map(|b| b.hit(&origin, &d))
                        .chain(ground)
                        .min_by(f64::total_cmp)
                }
            };
            let Some(r) = range.filter(|&r| r <= MAX_RANGE) else {
                continue;
            };
            let r = if config.noise_sigma > 0.0 {
                r + noise.sample(&mut rng)
            } else {
                r
            };
            points.push([
                origin[0] + r * d[0],
                origin[1] + r * d[1],
                origin[2] + r * d[2],
            ]);
        }
    }
    PointCloud::new(points)
}
