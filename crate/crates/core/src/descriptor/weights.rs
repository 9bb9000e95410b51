//! Fixed weights of the sconv-vlad backend and their file format.
//!
//! Weight file layout (all little-endian):
//!
//! | offset | type    | content                                   |
//! |--------|---------|-------------------------------------------|
//! | 0      | [u8; 4] | magic `SLWF`                              |
//! | 4      | u32     | version (1)                               |
//! | 8      | u32     | layer count L                             |
//! | 12     | u32     | cluster count K                           |
//! | 16     | f32[]   | gains, layer by layer, `[out][in][degree]`|
//! | ...    | f32[]   | VLAD centers, `[K][F]`                    |
//!
//! Layer 0 maps the image channels to F outputs, later layers map F to F.
//! F (kernels per layer) and the band limit come from the config and the
//! image; a payload whose length disagrees with them is rejected.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::DescriptorConfig;
use crate::error::{Error, Result};
use crate::sphere::{plan, SHSpectrum, SphericalImage};

pub const WEIGHT_FILE_MAGIC: [u8; 4] = *b"SLWF";
pub const WEIGHT_FILE_VERSION: u32 = 1;

/// Softmax sharpness of the VLAD soft assignment.
const ASSIGN_BETA: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SconvWeights {
    band_limit: usize,
    input_channels: usize,
    kernels: usize,
    /// Per layer, `[out][in][degree]` flattened.
    gains: Vec<Vec<f64>>,
    /// `[K][F]`, rows unit-norm.
    centers: Vec<f64>,
}

impl SconvWeights {
    /// Seeded gains `N(0, 1/in)` and centers drawn uniformly on the unit
    /// sphere of feature space.
    pub fn seeded(cfg: &DescriptorConfig, band_limit: usize, input_channels: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.weight_seed);
        let f = cfg.kernels_per_layer;
        let mut gains = Vec::with_capacity(cfg.num_layers);
        for layer in 0..cfg.num_layers {
            let inputs = if layer == 0 { input_channels } else { f };
            let scale = 1.0 / (inputs as f64).sqrt();
            gains.push(
                (0..f * inputs * band_limit)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                    .collect::<Vec<f64>>(),
            );
        }
        let mut centers = Vec::with_capacity(cfg.vlad_clusters * f);
        for _ in 0..cfg.vlad_clusters {
            let row: Vec<f64> = (0..f)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            centers.extend(row.iter().map(|v| v / norm));
        }
        Self {
            band_limit,
            input_channels,
            kernels: f,
            gains,
            centers,
        }
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn num_layers(&self) -> usize {
        self.gains.len()
    }

    pub fn clusters(&self) -> usize {
        self.centers.len() / self.kernels
    }

    pub(crate) fn check(&self, cfg: &DescriptorConfig) -> Result<()> {
        if self.num_layers() != cfg.num_layers
            || self.clusters() != cfg.vlad_clusters
            || self.kernels != cfg.kernels_per_layer
        {
            return Err(Error::Config(format!(
                "weights have {} layers, {} clusters, {} kernels; config asks for {}, {}, {}",
                self.num_layers(),
                self.clusters(),
                self.kernels,
                cfg.num_layers,
                cfg.vlad_clusters,
                cfg.kernels_per_layer
            )));
        }
        Ok(())
    }

    fn expected_floats(
        layers: usize,
        clusters: usize,
        f: usize,
        b: usize,
        channels: usize,
    ) -> usize {
        let first = f * channels * b;
        let rest = layers.saturating_sub(1) * f * f * b;
        first + rest + clusters * f
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&WEIGHT_FILE_MAGIC);
        out.extend_from_slice(&WEIGHT_FILE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_layers() as u32).to_le_bytes());
        out.extend_from_slice(&(self.clusters() as u32).to_le_bytes());
        for v in self.gains.iter().flatten().chain(&self.centers) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    /// Parses a weight file for a config and input shape.
    pub fn from_bytes(
        bytes: &[u8],
        cfg: &DescriptorConfig,
        band_limit: usize,
        input_channels: usize,
    ) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Config("weight file shorter than its header".into()));
        }
        if bytes[..4] != WEIGHT_FILE_MAGIC {
            return Err(Error::Config("weight file has a bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        if word(4) != WEIGHT_FILE_VERSION as usize {
            return Err(Error::Config(format!(
                "unsupported weight file version {}",
                word(4)
            )));
        }
        let (layers, clusters) = (word(8), word(12));
        if layers != cfg.num_layers || clusters != cfg.vlad_clusters {
            return Err(Error::Config(format!(
                "weight file has {layers} layers and K={clusters}; config asks for {} and {}",
                cfg.num_layers, cfg.vlad_clusters
            )));
        }
        let f = cfg.kernels_per_layer;
        let expected = Self::expected_floats(layers, clusters, f, band_limit, input_channels);
        let payload = &bytes[16..];
        if payload.len() != expected * 4 {
            return Err(Error::Config(format!(
                "weight payload holds {} bytes, expected {} for B={band_limit}, {input_channels} channels, F={f}",
                payload.len(),
                expected * 4
            )));
        }
        let mut floats = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let mut gains = Vec::with_capacity(layers);
        for layer in 0..layers {
            let inputs = if layer == 0 { input_channels } else { f };
            gains.push(
                floats
                    .by_ref()
                    .take(f * inputs * band_limit)
                    .collect::<Vec<_>>(),
            );
        }
        let mut centers: Vec<f64> = floats.collect();
        if centers
            .iter()
            .chain(gains.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config(
                "weight file contains non-finite values".into(),
            ));
        }
        for row in centers.chunks_exact_mut(f) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Config(
                    "weight file contains a zero VLAD center".into(),
                ));
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(Self {
            band_limit,
            input_channels,
            kernels: f,
            gains,
            centers,
        })
    }

    pub fn load(
        path: &Path,
        cfg: &DescriptorConfig,
        band_limit: usize,
        input_channels: usize,
    ) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, cfg, band_limit, input_channels)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Zonal filtering: every output degree-ℓ block is a gain-weighted sum of
    /// the input degree-ℓ blocks, which commutes with any rotation.
    fn filter(&self, layer: usize, input: &SHSpectrum) -> Result<SHSpectrum> {
        let b = self.band_limit;
        let inputs = input.channels();
        let gains = &self.gains[layer];
        let mut out = SHSpectrum::zeros(b, self.kernels)?;
        let src = input.coeffs();
        let dst = out.coeffs_mut();
        let block = b * b;
        for o in 0..self.kernels {
            for c in 0..inputs {
                let g = &gains[(o * inputs + c) * b..(o * inputs + c + 1) * b];
                for (l, &gain) in g.iter().enumerate() {
                    let range = l * l..(l + 1) * (l + 1);
                    let s = &src[c * block + range.start..c * block + range.end];
                    let d = &mut dst[o * block + range.start..o * block + range.end];
                    for (d, s) in d.iter_mut().zip(s) {
                        *d += *s * gain;
                    }
                }
            }
        }
        Ok(out)
    }

    fn magnitude(image: SphericalImage) -> Result<SphericalImage> {
        let (b, ch) = (image.band_limit(), image.channels());
        let data = image.into_data().into_iter().map(f64::abs).collect();
        SphericalImage::new(b, ch, data)
    }

    /// Output of the first stage, in the harmonic domain.
    pub(crate) fn first_layer(&self, spectrum: &SHSpectrum) -> Result<SHSpectrum> {
        let p = plan(self.band_limit)?;
        p.forward(&Self::magnitude(p.inverse(&self.filter(0, spectrum)?)?)?)
    }

    /// Local feature maps after the last stage, on the grid.
    pub(crate) fn feature_maps(&self, spectrum: &SHSpectrum) -> Result<SphericalImage> {
        let p = plan(self.band_limit)?;
        let mut current = spectrum.clone();
        let mut maps = None;
        for layer in 0..self.num_layers() {
            let grid = Self::magnitude(p.inverse(&self.filter(layer, &current)?)?)?;
            if layer + 1 < self.num_layers() {
                current = p.forward(&grid)?;
            }
            maps = Some(grid);
        }
        Ok(maps.expect("at least one layer"))
    }

    /// Area-weighted soft-assignment VLAD of the per-sample feature vectors.
    ///
    /// Features are non-negative after the magnitude stages and cluster
    /// around one shared direction, so they are first centered on their
    /// area-weighted mean (itself rotation-invariant); otherwise that common
    /// offset dominates every residual and all places look alike.
    pub(crate) fn vlad(&self, maps: &SphericalImage) -> Result<Vec<f64>> {
        let p = plan(self.band_limit)?;
        let f = self.kernels;
        let k = self.clusters();
        let n = maps.width();
        let data = maps.data();
        let mut mean = vec![0.0; f];
        let mut total = 0.0;
        for row in 0..n {
            let w = p.area_weight(row);
            for col in 0..n {
                let base = (row * n + col) * f;
                for (m, v) in mean.iter_mut().zip(&data[base..base + f]) {
                    *m += w * v;
                }
                total += w;
            }
        }
        mean.iter_mut().for_each(|m| *m /= total);
        let mut v = vec![0.0; k * f];
        let mut x = vec![0.0; f];
        let mut logits = vec![0.0; k];
        for row in 0..n {
            let w = p.area_weight(row);
            for col in 0..n {
                let base = (row * n + col) * f;
                for ((x, v), m) in x.iter_mut().zip(&data[base..base + f]).zip(&mean) {
                    *x = v - m;
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= 1e-12 {
                    continue;
                }
                x.iter_mut().for_each(|v| *v /= norm);
                for (ci, logit) in logits.iter_mut().enumerate() {
                    let c = &self.centers[ci * f..(ci + 1) * f];
                    *logit = ASSIGN_BETA * c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                }
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
                for ci in 0..k {
                    let a = w * (logits[ci] - top).exp() / z;
                    let c = &self.centers[ci * f..(ci + 1) * f];
                    for d in 0..f {
                        v[ci * f + d] += a * (x[d] - c[d]);
                    }
                }
            }
        }
        Ok(v)
    }
}
