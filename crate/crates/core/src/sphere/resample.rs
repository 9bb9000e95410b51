use std::f64::consts::{PI, TAU};

use super::SphericalImage;
use crate::error::Result;

/// Proper rotation of R^3 as a row-major matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(pub [[f64; 3]; 3]);

impl Rotation3 {
    pub const IDENTITY: Self = Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn about_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn then(&self, next: &Rotation3) -> Rotation3 {
        let (a, b) = (&next.0, &self.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Rotation3(out)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn transpose(&self) -> Rotation3 {
        let m = &self.0;
        Rotation3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }
}

/// Rotates an image on the grid by bilinear resampling: `g(d) = f(R^T d)`.
///
/// Approximate; z-rotations are exact only through [`super::rotate_z`].
pub fn resample_rotated(image: &SphericalImage, rot: &Rotation3) -> Result<SphericalImage> {
    let b = image.band_limit();
    let n = 2 * b;
    let inv = rot.transpose();
    let channels = image.channels();
    let mut data = Vec::with_capacity(n * n * channels);
    for j in 0..n {
        let theta = super::colatitude(b, j);
        let (st, ct) = theta.sin_cos();
        for k in 0..n {
            let (sp, cp) = super::longitude(b, k).sin_cos();
            let d = inv.apply([st * cp, st * sp, ct]);
            let src_theta = d[2].clamp(-1.0, 1.0).acos();
            let src_phi = d[1].atan2(d[0]).rem_euclid(TAU);
            // continuous grid coordinates
            let row = (src_theta * n as f64 / PI - 0.5).clamp(0.0, (n - 1) as f64);
            let col = src_phi * n as f64 / TAU;
            let r0 = row.floor() as usize;
            let r1 = (r0 + 1).min(n - 1);
            let fr = row - r0 as f64;
            let c0f = col.floor();
            let fc = col - c0f;
            let c0 = (c0f as usize) % n;
            let c1 = (c0 + 1) % n;
            for c in 0..channels {
                let top = image.get(r0, c0, c) * (1.0 - fc) + image.get(r0, c1, c) * fc;
                let bottom = image.get(r1, c0, c) * (1.0 - fc) + image.get(r1, c1, c) * fc;
                data.push(top * (1.0 - fr) + bottom * fr);
            }
        }
    }
    SphericalImage::new(b, channels, data)
}
