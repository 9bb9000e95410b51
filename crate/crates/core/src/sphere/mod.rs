//! Spherical signals on an equiangular grid and their harmonic-domain
//! representation.
//!
//! Images are sampled on a `2B x 2B` Driscoll-Healy grid: row `j` sits at
//! colatitude `pi (2j + 1) / 4B`, column `k` at longitude `2 pi k / 2B`.
//! Spherical harmonics are orthonormal with the Condon-Shortley phase, so a
//! real image satisfies `f(l, -m) = (-1)^m conj(f(l, m))`.

mod correlate;
mod resample;
mod transform;

pub use correlate::wrap_pi;
pub use correlate::{rotate_z, yaw_convolve, CorrelationProfile, RotationZ};
pub use resample::{resample_rotated, Rotation3};
pub use transform::{plan, sh_forward, sh_inverse, ShtPlan};

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest band limit accepted by the transforms.
pub const MAX_BAND_LIMIT: usize = 128;

/// Multi-channel samples of a sphere on the equiangular `2B x 2B` grid.
///
/// Storage is row-major `(colatitude, longitude, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalImage {
    band_limit: usize,
    channels: usize,
    data: Vec<f64>,
}

impl SphericalImage {
    pub fn new(band_limit: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_band_limit(band_limit)?;
        if channels == 0 {
            return Err(Error::InvalidInput("channels must be >= 1".into()));
        }
        let n = 2 * band_limit;
        if data.len() != n * n * channels {
            return Err(Error::Shape(format!(
                "expected {} samples for B={band_limit}, channels={channels}, got {}",
                n * n * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            band_limit,
            channels,
            data,
        })
    }

    pub fn zeros(band_limit: usize, channels: usize) -> Result<Self> {
        let n = 2 * band_limit;
        Self::new(band_limit, channels, vec![0.0; n * n * channels])
    }

    /// Builds an image by evaluating `f(colatitude, longitude, channel)` at
    /// every grid node.
    pub fn from_fn<F>(band_limit: usize, channels: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64, usize) -> f64,
    {
        let n = 2 * band_limit;
        let mut data = Vec::with_capacity(n * n * channels);
        for j in 0..n {
            let theta = colatitude(band_limit, j);
            for k in 0..n {
                let phi = longitude(band_limit, k);
                for c in 0..channels {
                    data.push(f(theta, phi, c));
                }
            }
        }
        Self::new(band_limit, channels, data)
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn width(&self) -> usize {
        2 * self.band_limit
    }

    pub fn height(&self) -> usize {
        2 * self.band_limit
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width() + col) * self.channels + channel]
    }

    /// Extracts a single channel as a one-channel image.
    pub fn channel(&self, channel: usize) -> SphericalImage {
        let data = self
            .data
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect();
        SphericalImage {
            band_limit: self.band_limit,
            channels: 1,
            data,
        }
    }

    /// Mean of the samples over the grid (unweighted), per channel.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += v;
            }
        }
        let n = (self.data.len() / self.channels) as f64;
        sums.into_iter().map(|s| s / n).collect()
    }

    /// True when every channel is constant over the grid.
    pub fn is_constant(&self) -> bool {
        let first = &self.data[..self.channels];
        self.data
            .chunks_exact(self.channels)
            .all(|px| px.iter().zip(first).all(|(a, b)| (a - b).abs() <= 1e-12))
    }

    /// Quadrature-weighted inner product over the sphere, summed over channels.
    pub fn inner_product(&self, other: &SphericalImage) -> Result<f64> {
        if self.band_limit != other.band_limit || self.channels != other.channels {
            return Err(Error::Shape("inner product of mismatched images".into()));
        }
        let p = plan(self.band_limit)?;
        let n = self.width();
        let mut acc = 0.0;
        for j in 0..n {
            let row = j * n * self.channels..(j + 1) * n * self.channels;
            let s: f64 = self.data[row.clone()]
                .iter()
                .zip(&other.data[row])
                .map(|(a, b)| a * b)
                .sum();
            acc += p.area_weight(j) * s;
        }
        Ok(acc)
    }
}

/// Harmonic coefficients `f(l, m)` for `0 <= l < B`, `-l <= m <= l`, per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SHSpectrum {
    band_limit: usize,
    channels: usize,
    coeffs: Vec<Complex64>,
}

impl SHSpectrum {
    pub fn new(band_limit: usize, channels: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_band_limit(band_limit)?;
        if channels == 0 {
            return Err(Error::InvalidInput("channels must be >= 1".into()));
        }
        if coeffs.len() != band_limit * band_limit * channels {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                band_limit * band_limit * channels,
                coeffs.len()
            )));
        }
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self {
            band_limit,
            channels,
            coeffs,
        })
    }

    pub fn zeros(band_limit: usize, channels: usize) -> Result<Self> {
        Self::new(
            band_limit,
            channels,
            vec![Complex64::new(0.0, 0.0); band_limit * band_limit * channels],
        )
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, channel: usize, l: usize, m: i64) -> Complex64 {
        self.coeffs[lm_offset(self.band_limit, channel, l, m)]
    }

    pub fn set(&mut self, channel: usize, l: usize, m: i64, value: Complex64) {
        let i = lm_offset(self.band_limit, channel, l, m);
        self.coeffs[i] = value;
    }

    /// Per-degree energies `sum_m |f(l, m)|^2` for one channel.
    pub fn degree_energies(&self, channel: usize) -> Vec<f64> {
        (0..self.band_limit)
            .map(|l| {
                let start = lm_offset(self.band_limit, channel, l, -(l as i64));
                self.coeffs[start..=start + 2 * l]
                    .iter()
                    .map(|c| c.norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// Total energy `sum |f(l, m)|^2` over every channel.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }
}

#[inline]
pub(crate) fn lm_offset(band_limit: usize, channel: usize, l: usize, m: i64) -> usize {
    let base = (channel * band_limit * band_limit + l * l + l) as i64;
    (base + m) as usize
}

/// Colatitude of grid row `j`.
#[inline]
pub fn colatitude(band_limit: usize, row: usize) -> f64 {
    PI * (2 * row + 1) as f64 / (4 * band_limit) as f64
}

/// Longitude of grid column `k`.
#[inline]
pub fn longitude(band_limit: usize, col: usize) -> f64 {
    2.0 * PI * col as f64 / (2 * band_limit) as f64
}

fn check_band_limit(band_limit: usize) -> Result<()> {
    if band_limit == 0 || band_limit > MAX_BAND_LIMIT {
        return Err(Error::InvalidInput(format!(
            "band limit must be in 1..={MAX_BAND_LIMIT}, got {band_limit}"
        )));
    }
    Ok(())
}
