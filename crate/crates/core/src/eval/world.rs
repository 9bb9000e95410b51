use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{OverheadMap, Pose};

/// Background intensities stay inside this band so that landmark colors
/// (near 0 or near 255) differ from any background pixel by at least 72.
const BACKGROUND_RANGE: (f64, f64) = (80.0, 176.0);
const LANDMARK_LEVELS: [u8; 2] = [8, 247];
/// Wavelength of the coarsest noise octave, in meters.
const BASE_WAVELENGTH_M: f64 = 240.0;

/// Recipe for a seeded synthetic overhead world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorldSpec {
    pub extent_m: (f64, f64),
    pub gsd: f64,
    pub landmark_count: usize,
    pub texture_octaves: usize,
    pub seed: u64,
}

impl Default for SyntheticWorldSpec {
    fn default() -> Self {
        Self {
            extent_m: (1000.0, 500.0),
            gsd: 1.0,
            landmark_count: 10,
            texture_octaves: 5,
            seed: 7,
        }
    }
}

/// A landmark polygon placed in the world, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub center: (f64, f64),
    pub vertices: Vec<(f64, f64)>,
    pub color: [u8; 3],
}

/// Generates the raster for `spec`: multi-octave value noise per channel plus
/// `landmark_count` high-contrast convex polygons.
pub fn generate_world(spec: &SyntheticWorldSpec) -> Result<OverheadMap> {
    Ok(generate_world_with_landmarks(spec)?.0)
}

pub fn generate_world_with_landmarks(
    spec: &SyntheticWorldSpec,
) -> Result<(OverheadMap, Vec<Landmark>)> {
    let (m1, m2) = spec.extent_m;
    if !(m1 > 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "extent must be positive, got {m1} x {m2}"
        )));
    }
    if !(spec.gsd > 0.0 && spec.gsd.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "gsd must be > 0, got {}",
            spec.gsd
        )));
    }
    let width = (m1 / spec.gsd).round().max(1.0) as usize;
    let height = (m2 / spec.gsd).round().max(1.0) as usize;
    if width.saturating_mul(height) > 50_000_000 {
        return Err(Error::InvalidInput(format!(
            "raster of {width}x{height} pixels is too large"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let octaves = spec.texture_octaves.max(1);
    let mut field = vec![0.0f64; width * height * 3];
    for c in 0..3 {
        let mut amplitude = 1.0;
        for o in 0..octaves {
            let wavelength = BASE_WAVELENGTH_M / (1u64 << o) as f64;
            let noise = ValueNoise::new(&mut rng, m1, m2, wavelength);
            for r in 0..height {
                let y = r as f64 * spec.gsd;
                for col in 0..width {
                    field[(r * width + col) * 3 + c] +=
                        amplitude * noise.at(col as f64 * spec.gsd, y);
                }
            }
            amplitude *= 0.55;
        }
    }
    let mut raster = vec![0u8; width * height * 3];
    for c in 0..3 {
        let (lo, hi) = field
            .iter()
            .skip(c)
            .step_by(3)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = (hi - lo).max(1e-12);
        for (px, v) in raster.iter_mut().zip(&field).skip(c).step_by(3) {
            let t = (v - lo) / span;
            *px =
                (BACKGROUND_RANGE.0 + t * (BACKGROUND_RANGE.1 - BACKGROUND_RANGE.0)).round() as u8;
        }
    }

    let mut landmarks = Vec::with_capacity(spec.landmark_count);
    for _ in 0..spec.landmark_count {
        let radius = rng.random_range(15.0..40.0f64).min(0.25 * m1.min(m2));
        let margin = radius.min(0.5 * m1.min(m2));
        let cx = rng.random_range(margin..=(m1 - margin).max(margin));
        let cy = rng.random_range(margin..=(m2 - margin).max(margin));
        let sides = rng.random_range(5..=8usize);
        let mut angles: Vec<f64> = (0..sides)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        let vertices: Vec<(f64, f64)> = angles
            .iter()
            .map(|a| {
                let r = radius * rng.random_range(0.75..1.0);
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect();
        let mut color = [0u8; 3];
        for ch in &mut color {
            *ch = LANDMARK_LEVELS[rng.random_range(0..2usize)];
        }
        paint_polygon(&mut raster, width, height, spec.gsd, &vertices, color);
        landmarks.push(Landmark {
            center: (cx, cy),
            vertices,
            color,
        });
    }

    Ok((
        OverheadMap::new(width, height, spec.gsd, (0.0, 0.0), raster)?,
        landmarks,
    ))
}

struct ValueNoise {
    nx: usize,
    ny: usize,
    wavelength: f64,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, m1: f64, m2: f64, wavelength: f64) -> Self {
        let nx = (m1 / wavelength).ceil() as usize + 2;
        let ny = (m2 / wavelength).ceil() as usize + 2;
        let values = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
        Self {
            nx,
            ny,
            wavelength,
            values,
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let u = x / self.wavelength;
        let v = y / self.wavelength;
        let i = (u.floor() as usize).min(self.nx - 2);
        let j = (v.floor() as usize).min(self.ny - 2);
        let s = smooth(u - i as f64);
        let t = smooth(v - j as f64);
        let g = |a: usize, b: usize| self.values[b * self.nx + a];
        let top = g(i, j) * (1.0 - s) + g(i + 1, j) * s;
        let bottom = g(i, j + 1) * (1.0 - s) + g(i + 1, j + 1) * s;
        top * (1.0 - t) + bottom * t
    }
}

/// `n` seeded poses uniform over the map at `altitude`, yaw uniform in
/// `[-pi, pi)`.
pub fn sample_poses(map: &OverheadMap, n: usize, altitude: f64, seed: u64) -> Vec<Pose> {
    let (x0, y0, x1, y1) = map.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Pose::new(
                rng.random_range(x0..x1),
                rng.random_range(y0..y1),
                altitude,
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            )
        })
        .collect()
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn paint_polygon(
    raster: &mut [u8],
    width: usize,
    height: usize,
    gsd: f64,
    vertices: &[(f64, f64)],
    color: [u8; 3],
) {
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in vertices {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let c0 = ((x0 / gsd).floor().max(0.0)) as usize;
    let r0 = ((y0 / gsd).floor().max(0.0)) as usize;
    let c1 = ((x1 / gsd).ceil() as usize).min(width.saturating_sub(1));
    let r1 = ((y1 / gsd).ceil() as usize).min(height.saturating_sub(1));
    for r in r0..=r1 {
        for c in c0..=c1 {
            if point_in_polygon(c as f64 * gsd, r as f64 * gsd, vertices) {
                let i = (r * width + c) * 3;
                raster[i..i + 3].copy_from_slice(&color);
            }
        }
    }
}

/// Even-odd ray crossing test.
pub(crate) fn point_in_polygon(x: f64, y: f64, vertices: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, landmarks: usize) -> SyntheticWorldSpec {
        SyntheticWorldSpec {
            extent_m: (300.0, 200.0),
            gsd: 1.0,
            landmark_count: landmarks,
            texture_octaves: 4,
            seed,
        }
    }

    #[test]
    fn same_seed_same_raster() {
        let a = generate_world(&small(3, 4)).unwrap();
        let b = generate_world(&small(3, 4)).unwrap();
        assert_eq!(a, b);
        let c = generate_world(&small(4, 4)).unwrap();
        assert_ne!(a.raster(), c.raster());
    }

    #[test]
    fn zero_landmarks_is_texture_only() {
        let m = generate_world(&small(5, 0)).unwrap();
        assert!(m.raster().iter().all(|&v| (80..=176).contains(&v)));
    }

    #[test]
    fn landmarks_stand_out_from_background() {
        let (map, landmarks) = generate_world_with_landmarks(&small(9, 6)).unwrap();
        assert_eq!(landmarks.len(), 6);
        let mut landmark_px = 0;
        let mut min_gap = u8::MAX;
        // histogram: landmark pixels sit at the extremes, background in the middle band
        let background_max = map
            .raster()
            .iter()
            .copied()
            .filter(|v| (64..=192).contains(v))
            .max()
            .unwrap();
        let background_min = map
            .raster()
            .iter()
            .copied()
            .filter(|v| (64..=192).contains(v))
            .min()
            .unwrap();
        for px in map.raster().chunks_exact(3) {
            if px.iter().all(|v| LANDMARK_LEVELS.contains(v)) {
                landmark_px += 1;
                for &v in px {
                    let gap = if v < 128 {
                        background_min - v
                    } else {
                        v - background_max
                    };
                    min_gap = min_gap.min(gap);
                }
            }
        }
        assert!(landmark_px > 500);
        assert!(min_gap >= 64, "gap {min_gap}");
    }

    #[test]
    fn rejects_bad_extent() {
        let mut s = small(1, 0);
        s.extent_m = (-1.0, 10.0);
        assert!(generate_world(&s).is_err());
        s.extent_m = (10.0, 10.0);
        s.gsd = 0.0;
        assert!(generate_world(&s).is_err());
    }

    #[test]
    fn polygon_test() {
        let square = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        assert!(point_in_polygon(1.0, 1.0, &square));
        assert!(!point_in_polygon(3.0, 1.0, &square));
    }
}
