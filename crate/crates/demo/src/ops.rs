//! Plain-Rust operations behind the browser bindings, callable natively.

use sphereloc::descriptor::{similarity, DescriptorConfig};
use sphereloc::eval::{generate_world, SyntheticWorldSpec};
use sphereloc::geo::{OverheadMap, Pose};
use sphereloc::localize::ViewEncoder;
use sphereloc::orientation::estimate_yaw;
use sphereloc::sphere::SphericalImage;
use sphereloc::{Error, Result};

/// Small grids keep the page responsive.
pub const DEMO_BAND_LIMIT: usize = 16;

pub struct Scene {
    pub map: OverheadMap,
    pub encoder: ViewEncoder,
}

impl Scene {
    pub fn new(seed: u64, landmarks: usize) -> Result<Self> {
        let map = generate_world(&SyntheticWorldSpec {
            extent_m: (400.0, 300.0),
            landmark_count: landmarks,
            seed,
            ..Default::default()
        })?;
        let encoder = ViewEncoder::spherical(DEMO_BAND_LIMIT, &DescriptorConfig::default())?;
        Ok(Self { map, encoder })
    }

    pub fn map_rgba(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.map.width() * self.map.height() * 4);
        for px in self.map.raster().chunks_exact(3) {
            out.extend_from_slice(&[px[0], px[1], px[2], 255]);
        }
        out
    }

    fn view(&self, x: f64, y: f64, altitude: f64, yaw: f64) -> Result<SphericalImage> {
        Ok(self
            .encoder
            .render(&self.map, &Pose::new(x, y, altitude, yaw))?
            .image)
    }

    /// Spherical views at each altitude, concatenated as `2B x 2B` RGBA tiles.
    pub fn render_altitudes(&self, x: f64, y: f64, yaw: f64, altitudes: &[f64]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &h in altitudes {
            let img = self.view(x, y, h, yaw)?;
            for px in img.data().chunks_exact(3) {
                for v in px {
                    out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
                }
                out.push(255);
            }
        }
        Ok(out)
    }

    /// `(estimated yaw in degrees, confidence)` of the view at `yaw_deg`
    /// against the yaw-0 view of the same place.
    pub fn orient(&self, x: f64, y: f64, altitude: f64, yaw_deg: f64) -> Result<(f64, f64)> {
        let query = self.view(x, y, altitude, yaw_deg.to_radians())?;
        let reference = self.view(x, y, altitude, 0.0)?;
        let e = estimate_yaw(&query, &reference)?;
        Ok((e.yaw.to_degrees(), e.confidence))
    }

    /// Similarity of the query view to yaw-0 views on a `step`-meter grid,
    /// row-major with `(cols, rows)`. Cells without a usable view score 0.
    pub fn heatmap(
        &self,
        x: f64,
        y: f64,
        yaw: f64,
        altitude: f64,
        step: f64,
    ) -> Result<(usize, usize, Vec<f64>)> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "grid step must be > 0, got {step}"
            )));
        }
        let query = self.encoder.encode(&self.view(x, y, altitude, yaw)?)?;
        let (x0, y0, x1, y1) = self.map.bounds();
        let cols = ((x1 - x0) / step).floor().max(1.0) as usize;
        let rows = ((y1 - y0) / step).floor().max(1.0) as usize;
        let mut values = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                let (cx, cy) = (x0 + (c as f64 + 0.5) * step, y0 + (r as f64 + 0.5) * step);
                let s = match self.encoder.encode_at(&self.map, cx, cy, altitude) {
                    Ok(d) => similarity(&query, &d)?,
                    Err(Error::Degenerate(_)) | Err(Error::OutOfBounds(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                values.push(s);
            }
        }
        Ok((cols, rows, values))
    }
}
