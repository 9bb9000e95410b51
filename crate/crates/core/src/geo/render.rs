use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::OverheadMap;
use crate::error::{Error, Result};
use crate::sphere::{colatitude, longitude, Rotation3, SphericalImage};

/// Value of samples that see no ground: at or above the horizon, cropped, or
/// off the raster.
pub const FILL_VALUE: f64 = 0.5;

/// Camera pose over the map. `altitude` is the height above the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub altitude: f64,
    pub yaw: f64,
    #[serde(default)]
    pub pitch: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, altitude: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            altitude,
            yaw,
            pitch: 0.0,
        }
    }

    pub fn with_pitch(mut self, pitch: f64) -> Self {
        self.pitch = pitch;
        self
    }

    pub fn at_altitude(mut self, altitude: f64) -> Self {
        self.altitude = altitude;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.altitude.is_finite() && self.altitude > 0.0) {
            return Err(Error::InvalidInput(format!(
                "altitude must be > 0, got {}",
                self.altitude
            )));
        }
        if ![self.x, self.y, self.yaw, self.pitch]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidInput("pose must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderMode {
    /// Equiangular sphere centered on the camera; row 0 looks straight down.
    Spherical,
    /// Square ground crop of side `2 * altitude`, aligned with the camera yaw.
    PinholeNadir,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub mode: RenderMode,
    /// Side of the output grid in samples (`2B` for spherical renders).
    pub output_size: usize,
    pub sky_crop: bool,
    /// Width of the band next to the horizon that is filled when `sky_crop`
    /// is set, in degrees. 45 keeps only the 45-degree cone under the camera.
    pub crop_deg: f64,
}

impl RenderSpec {
    pub fn spherical(band_limit: usize) -> Self {
        Self {
            mode: RenderMode::Spherical,
            output_size: 2 * band_limit,
            sky_crop: false,
            crop_deg: 10.0,
        }
    }

    pub fn pinhole(output_size: usize) -> Self {
        Self {
            mode: RenderMode::PinholeNadir,
            output_size,
            sky_crop: false,
            crop_deg: 10.0,
        }
    }

    pub fn with_sky_crop(mut self, crop_deg: f64) -> Self {
        self.sky_crop = true;
        self.crop_deg = crop_deg;
        self
    }

    pub fn band_limit(&self) -> usize {
        self.output_size / 2
    }

    /// Largest off-nadir angle that is ray-cast.
    pub fn max_off_nadir(&self) -> f64 {
        if self.sky_crop {
            FRAC_PI_2 - self.crop_deg.to_radians()
        } else {
            FRAC_PI_2
        }
    }

    fn validate(&self) -> Result<()> {
        if self.output_size == 0 || self.output_size % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "output size must be even and positive, got {}",
                self.output_size
            )));
        }
        if self.sky_crop && !(0.0..90.0).contains(&self.crop_deg) {
            return Err(Error::InvalidInput(format!(
                "crop angle must be in [0, 90), got {}",
                self.crop_deg
            )));
        }
        Ok(())
    }
}

/// A rendered view. Pinhole renders reuse the square grid container with
/// `band_limit = output_size / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub image: SphericalImage,
    /// Some ground samples fell outside the raster and were filled.
    pub truncated: bool,
}

/// Ground radius of the 45-degree cone under the camera, `H tan 45 = H`.
pub fn footprint_radius(pose: &Pose) -> f64 {
    pose.altitude
}

/// Horizontal ground offset of the ray leaving the camera at `off_nadir`
/// from straight down and camera azimuth `azimuth`, or `None` if the ray
/// does not hit the ground.
///
/// Camera azimuth `a` looks along world azimuth `a - yaw`, so a yaw of `α`
/// shifts the rendered sphere by `+α` in longitude.
pub fn ground_offset(pose: &Pose, off_nadir: f64, azimuth: f64) -> Option<(f64, f64)> {
    let (st, ct) = off_nadir.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    let cam = [st * cp, st * sp, -ct];
    let d = Rotation3::about_y(pose.pitch)
        .then(&Rotation3::about_z(-pose.yaw))
        .apply(cam);
    if d[2] >= -1e-12 {
        return None;
    }
    let t = pose.altitude / -d[2];
    Some((t * d[0], t * d[1]))
}

/// Renders the view from `pose` with the flat-ground ray caster.
pub fn render_view(map: &OverheadMap, pose: &Pose, spec: &RenderSpec) -> Result<RenderedView> {
    pose.validate()?;
    spec.validate()?;
    match spec.mode {
        RenderMode::Spherical => render_spherical(map, pose, spec),
        RenderMode::PinholeNadir => render_pinhole(map, pose, spec),
    }
}

struct Accumulator<'a> {
    map: &'a OverheadMap,
    rel: (f64, f64),
    data: Vec<f64>,
    hits: usize,
    misses: usize,
}

impl<'a> Accumulator<'a> {
    fn new(map: &'a OverheadMap, pose: &Pose, samples: usize) -> Self {
        Self {
            map,
            rel: (pose.x - map.origin().0, pose.y - map.origin().1),
            data: Vec::with_capacity(samples * 3),
            hits: 0,
            misses: 0,
        }
    }

    #[inline]
    fn ground(&mut self, dx: f64, dy: f64) {
        let gsd = self.map.gsd();
        match self
            .map
            .sample_pixel((self.rel.0 + dx) / gsd, (self.rel.1 + dy) / gsd)
        {
            Some(rgb) => {
                self.hits += 1;
                self.data.extend_from_slice(&rgb);
            }
            None => {
                self.misses += 1;
                self.fill();
            }
        }
    }

    #[inline]
    fn fill(&mut self) {
        self.data.extend_from_slice(&[FILL_VALUE; 3]);
    }

    fn finish(self, band_limit: usize) -> Result<RenderedView> {
        if self.hits == 0 {
            return Err(Error::OutOfBounds(
                "view footprint lies entirely outside the raster".into(),
            ));
        }
        Ok(RenderedView {
            image: SphericalImage::new(band_limit, 3, self.data)?,
            truncated: self.misses > 0,
        })
    }
}

fn render_spherical(map: &OverheadMap, pose: &Pose, spec: &RenderSpec) -> Result<RenderedView> {
    let b = spec.band_limit();
    let n = spec.output_size;
    let limit = spec.max_off_nadir();
    let mut acc = Accumulator::new(map, pose, n * n);
    let trig: Vec<(f64, f64)> = (0..n)
        .map(|k| (longitude(b, k) - pose.yaw).sin_cos())
        .collect();
    for j in 0..n {
        let theta = colatitude(b, j);
        if theta >= limit {
            for _ in 0..n {
                acc.fill();
            }
            continue;
        }
        if pose.pitch == 0.0 {
            let reach = pose.altitude * theta.tan();
            for &(s, c) in &trig {
                acc.ground(reach * c, reach * s);
            }
        } else {
            for k in 0..n {
                match ground_offset(pose, theta, longitude(b, k)) {
                    Some((dx, dy)) => acc.ground(dx, dy),
                    None => acc.fill(),
                }
            }
        }
    }
    acc.finish(b)
}

fn render_pinhole(map: &OverheadMap, pose: &Pose, spec: &RenderSpec) -> Result<RenderedView> {
    let n = spec.output_size;
    let side = 2.0 * pose.altitude;
    let (s, c) = (-pose.yaw).sin_cos();
    let mut acc = Accumulator::new(map, pose, n * n);
    for row in 0..n {
        let b = ((row as f64 + 0.5) / n as f64 - 0.5) * side;
        for col in 0..n {
            let a = ((col as f64 + 0.5) / n as f64 - 0.5) * side;
            acc.ground(c * a - s * b, s * a + c * b);
        }
    }
    acc.finish(n / 2)
}
