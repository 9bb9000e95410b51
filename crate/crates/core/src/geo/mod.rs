//! Georeferenced overhead rasters and view rendering.
//!
//! World coordinates are meters. Pixel `(col, row)` of the raster has its
//! center at `origin + (col, row) * gsd`, so world `y` grows with the row
//! index. The ground is the flat plane `z = 0`.

mod io;
mod render;

pub use io::{load_map, read_ppm, save_map, view_from_ppm, view_to_ppm, write_ppm, Sidecar};
pub use render::{
    footprint_radius, ground_offset, render_view, Pose, RenderMode, RenderSpec, RenderedView,
    FILL_VALUE,
};

use crate::error::{Error, Result};

/// An 8-bit RGB overhead raster with its ground sampling distance and origin.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadMap {
    width: usize,
    height: usize,
    gsd: f64,
    origin: (f64, f64),
    raster: Vec<u8>,
}

impl OverheadMap {
    pub fn new(
        width: usize,
        height: usize,
        gsd: f64,
        origin: (f64, f64),
        raster: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("raster must be non-empty".into()));
        }
        if !(gsd.is_finite() && gsd > 0.0) {
            return Err(Error::format(
                "gsd_m_per_px",
                format!("must be > 0, got {gsd}"),
            ));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::InvalidInput("origin must be finite".into()));
        }
        if raster.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "RGB raster of {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                raster.len()
            )));
        }
        Ok(Self {
            width,
            height,
            gsd,
            origin,
            raster,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gsd(&self) -> f64 {
        self.gsd
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn raster(&self) -> &[u8] {
        &self.raster
    }

    /// Ground extent `(M1, M2)` in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.gsd, self.height as f64 * self.gsd)
    }

    /// World bounds `(min_x, min_y, max_x, max_y)` of the area the raster covers.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (m1, m2) = self.extent();
        let x0 = self.origin.0 - 0.5 * self.gsd;
        let y0 = self.origin.1 - 0.5 * self.gsd;
        (x0, y0, x0 + m1, y0 + m2)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.bounds();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    #[inline]
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.raster[i], self.raster[i + 1], self.raster[i + 2]]
    }

    /// Returns a copy georeferenced at `origin`.
    pub fn with_origin(&self, origin: (f64, f64)) -> Self {
        Self {
            origin,
            ..self.clone()
        }
    }

    /// Sub-raster of `width x height` pixels starting at `(col, row)`,
    /// georeferenced in place.
    pub fn crop(&self, col: usize, row: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || col + width > self.width || row + height > self.height {
            return Err(Error::OutOfBounds(format!(
                "crop {width}x{height}+{col}+{row} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut raster = Vec::with_capacity(width * height * 3);
        for r in row..row + height {
            let start = (r * self.width + col) * 3;
            raster.extend_from_slice(&self.raster[start..start + width * 3]);
        }
        Self::new(
            width,
            height,
            self.gsd,
            (
                self.origin.0 + col as f64 * self.gsd,
                self.origin.1 + row as f64 * self.gsd,
            ),
            raster,
        )
    }

    /// Bilinear sample at continuous pixel coordinates, scaled to `[0, 1]`.
    /// `None` outside the pixel-center hull.
    #[inline]
    pub(crate) fn sample_pixel(&self, u: f64, v: f64) -> Option<[f64; 3]> {
        let max_u = (self.width - 1) as f64;
        let max_v = (self.height - 1) as f64;
        if !(u >= 0.0 && v >= 0.0 && u <= max_u && v <= max_v) {
            return None;
        }
        let c0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let r0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let c1 = (c0 + 1).min(self.width - 1);
        let r1 = (r0 + 1).min(self.height - 1);
        let fu = u - c0 as f64;
        let fv = v - r0 as f64;
        let (p00, p01, p10, p11) = (
            self.pixel(c0, r0),
            self.pixel(c1, r0),
            self.pixel(c0, r1),
            self.pixel(c1, r1),
        );
        let mut out = [0.0; 3];
        for (ch, o) in out.iter_mut().enumerate() {
            let top = p00[ch] as f64 * (1.0 - fu) + p01[ch] as f64 * fu;
            let bottom = p10[ch] as f64 * (1.0 - fu) + p11[ch] as f64 * fu;
            *o = (top * (1.0 - fv) + bottom * fv) / 255.0;
        }
        Some(out)
    }

    /// Bilinear sample at world coordinates, scaled to `[0, 1]`.
    pub fn sample(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        self.sample_pixel(
            (x - self.origin.0) / self.gsd,
            (y - self.origin.1) / self.gsd,
        )
    }
}
