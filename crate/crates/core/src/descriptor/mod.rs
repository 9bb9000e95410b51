//! Yaw-invariant global place descriptors computed from spherical views.
//!
//! Two backends share one output type:
//!
//! * `power-spectrum`: per-degree harmonic energies of every channel. Exactly
//!   invariant to any rotation about the polar axis.
//! * `sconv-vlad`: a cascade of zonal (per-degree gain) spherical filters with
//!   a magnitude nonlinearity, whose local feature vectors are aggregated by
//!   soft-assignment VLAD. Zonal filters commute with rotations, so the
//!   feature maps rotate with the input and the aggregate is invariant.

mod weights;

pub use weights::{SconvWeights, WEIGHT_FILE_MAGIC, WEIGHT_FILE_VERSION};

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{plan, sh_forward, SHSpectrum, SphericalImage};

/// Upper bound on the sconv-vlad descriptor length.
pub const MAX_DESCRIPTOR_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    PowerSpectrum,
    SconvVlad,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power-spectrum" => Ok(Backend::PowerSpectrum),
            "sconv-vlad" => Ok(Backend::SconvVlad),
            other => Err(Error::Config(format!("unknown backend `{other}`"))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::PowerSpectrum => "power-spectrum",
            Backend::SconvVlad => "sconv-vlad",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub backend: Backend,
    pub num_layers: usize,
    pub kernels_per_layer: usize,
    pub vlad_clusters: usize,
    pub weight_seed: u64,
    pub weight_file: Option<PathBuf>,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            backend: Backend::PowerSpectrum,
            num_layers: 4,
            kernels_per_layer: 16,
            vlad_clusters: 32,
            weight_seed: 0,
            weight_file: None,
        }
    }
}

impl DescriptorConfig {
    pub fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be >= 1".into()));
        }
        if self.vlad_clusters < 2 {
            return Err(Error::Config("vlad_clusters must be >= 2".into()));
        }
        if self.kernels_per_layer == 0 {
            return Err(Error::Config("kernels_per_layer must be >= 1".into()));
        }
        if self.backend == Backend::SconvVlad
            && self.vlad_clusters * self.kernels_per_layer > MAX_DESCRIPTOR_DIM
        {
            return Err(Error::Config(format!(
                "descriptor dimension {} exceeds {MAX_DESCRIPTOR_DIM}",
                self.vlad_clusters * self.kernels_per_layer
            )));
        }
        Ok(())
    }
}

/// Unit-norm global descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceDescriptor {
    values: Vec<f64>,
    backend: Backend,
    band_limit: usize,
}

impl PlaceDescriptor {
    /// Normalizes `values`; a zero vector is rejected.
    pub fn from_raw(values: Vec<f64>, backend: Backend, band_limit: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite descriptor entry".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= f64::MIN_POSITIVE {
            return Err(Error::Degenerate("descriptor has zero norm".into()));
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
            backend,
            band_limit,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Cosine similarity of two descriptors (their dot product).
pub fn similarity(a: &PlaceDescriptor, b: &PlaceDescriptor) -> Result<f64> {
    if a.dim() != b.dim() || a.backend != b.backend {
        return Err(Error::Shape(format!(
            "cannot compare {} descriptor of dim {} with {} descriptor of dim {}",
            a.backend,
            a.dim(),
            b.backend,
            b.dim()
        )));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Descriptor extractor with its weights resolved for one input shape.
#[derive(Debug, Clone)]
pub struct Extractor {
    cfg: DescriptorConfig,
    band_limit: usize,
    channels: usize,
    weights: Option<Arc<SconvWeights>>,
}

impl Extractor {
    pub fn new(cfg: &DescriptorConfig, band_limit: usize, channels: usize) -> Result<Self> {
        cfg.validate()?;
        plan(band_limit)?;
        let weights = match cfg.backend {
            Backend::PowerSpectrum => None,
            Backend::SconvVlad => Some(Arc::new(match &cfg.weight_file {
                Some(path) => SconvWeights::load(path, cfg, band_limit, channels)?,
                None => SconvWeights::seeded(cfg, band_limit, channels),
            })),
        };
        Ok(Self {
            cfg: cfg.clone(),
            band_limit,
            channels,
            weights,
        })
    }

    /// Extractor with explicit sconv-vlad weights.
    pub fn with_weights(cfg: &DescriptorConfig, weights: SconvWeights) -> Result<Self> {
        cfg.validate()?;
        weights.check(cfg)?;
        Ok(Self {
            cfg: DescriptorConfig {
                backend: Backend::SconvVlad,
                ..cfg.clone()
            },
            band_limit: weights.band_limit(),
            channels: weights.input_channels(),
            weights: Some(Arc::new(weights)),
        })
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.cfg
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn dim(&self) -> usize {
        match self.cfg.backend {
            Backend::PowerSpectrum => self.band_limit * self.channels,
            Backend::SconvVlad => self.cfg.vlad_clusters * self.cfg.kernels_per_layer,
        }
    }

    fn check_image(&self, image: &SphericalImage) -> Result<()> {
        if image.band_limit() != self.band_limit || image.channels() != self.channels {
            return Err(Error::Shape(format!(
                "extractor expects B={} with {} channels, image has B={} with {}",
                self.band_limit,
                self.channels,
                image.band_limit(),
                image.channels()
            )));
        }
        Ok(())
    }

    pub fn extract(&self, image: &SphericalImage) -> Result<PlaceDescriptor> {
        self.check_image(image)?;
        let spectrum = sh_forward(image)?;
        self.extract_from_spectrum(&spectrum)
    }

    pub fn extract_from_spectrum(&self, spectrum: &SHSpectrum) -> Result<PlaceDescriptor> {
        if spectrum.band_limit() != self.band_limit || spectrum.channels() != self.channels {
            return Err(Error::Shape("spectrum does not match the extractor".into()));
        }
        match &self.weights {
            None => {
                let values = (0..spectrum.channels())
                    .flat_map(|c| spectrum.degree_energies(c))
                    .collect();
                PlaceDescriptor::from_raw(values, Backend::PowerSpectrum, self.band_limit)
            }
            Some(w) => {
                let features = w.feature_maps(spectrum)?;
                let values = w.vlad(&features)?;
                PlaceDescriptor::from_raw(values, Backend::SconvVlad, self.band_limit)
            }
        }
    }

    /// Spectrum of the first filtering stage (after the magnitude), used for
    /// yaw correlation on features. `None` for the power-spectrum backend.
    pub fn first_layer_spectrum(&self, image: &SphericalImage) -> Result<Option<SHSpectrum>> {
        self.check_image(image)?;
        match &self.weights {
            None => Ok(None),
            Some(w) => Ok(Some(w.first_layer(&sh_forward(image)?)?)),
        }
    }
}

/// One-shot extraction; builds the extractor for the image shape each call.
pub fn extract_descriptor(
    image: &SphericalImage,
    cfg: &DescriptorConfig,
) -> Result<PlaceDescriptor> {
    Extractor::new(cfg, image.band_limit(), image.channels())?.extract(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{rotate_z, sh_inverse, RotationZ};

    fn scene(b: usize, seed: f64) -> SphericalImage {
        SphericalImage::from_fn(b, 3, |t, p, c| {
            let c = c as f64;
            0.5 + 0.2 * (3.0 * p + seed + c).cos() * t.sin()
                + 0.15 * ((5.0 + c) * t + seed * 2.0).sin() * (2.0 * p - c).cos()
                + 0.1 * (7.0 * p + seed * c).sin() * (2.0 * t).sin()
        })
        .unwrap()
    }

    #[test]
    fn similarity_basics() {
        let a = PlaceDescriptor::from_raw(vec![1.0, 0.0], Backend::PowerSpectrum, 1).unwrap();
        let b = PlaceDescriptor::from_raw(vec![0.0, 3.0], Backend::PowerSpectrum, 1).unwrap();
        let c = PlaceDescriptor::from_raw(vec![1.0, 2.0], Backend::PowerSpectrum, 1).unwrap();
        assert_eq!(similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(similarity(&a, &b).unwrap(), 0.0);
        assert_eq!(similarity(&a, &c).unwrap(), similarity(&c, &a).unwrap());
        let d = PlaceDescriptor::from_raw(vec![1.0, 2.0, 3.0], Backend::PowerSpectrum, 1).unwrap();
        assert!(matches!(similarity(&a, &d), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_image_is_rejected() {
        let zero = SphericalImage::zeros(8, 3).unwrap();
        for backend in [Backend::PowerSpectrum, Backend::SconvVlad] {
            let cfg = DescriptorConfig {
                kernels_per_layer: 4,
                vlad_clusters: 4,
                ..DescriptorConfig::with_backend(backend)
            };
            assert!(matches!(
                extract_descriptor(&zero, &cfg),
                Err(Error::Degenerate(_))
            ));
        }
    }

    #[test]
    fn power_spectrum_is_exactly_yaw_invariant_on_grid() {
        let b = 12;
        let img = scene(b, 0.4);
        let spec = sh_forward(&img).unwrap();
        let ex = Extractor::new(&DescriptorConfig::default(), b, 3).unwrap();
        let d0 = ex.extract_from_spectrum(&spec).unwrap();
        assert_eq!(d0.dim(), b * 3);
        for k in 0..2 * b as i64 {
            let rotated = sh_inverse(&rotate_z(&spec, RotationZ::grid_step(b, k))).unwrap();
            let d = ex.extract(&rotated).unwrap();
            assert!((similarity(&d0, &d).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sconv_vlad_is_yaw_invariant_on_grid() {
        let b = 12;
        let img = scene(b, 1.3);
        let cfg = DescriptorConfig {
            kernels_per_layer: 8,
            vlad_clusters: 8,
            ..DescriptorConfig::with_backend(Backend::SconvVlad)
        };
        let ex = Extractor::new(&cfg, b, 3).unwrap();
        let d0 = ex.extract(&img).unwrap();
        assert_eq!(d0.dim(), 64);
        let n = 2 * b;
        for k in [1usize, 5, 12] {
            // exact column shift of the grid
            let mut data = Vec::with_capacity(img.data().len());
            for j in 0..n {
                for col in 0..n {
                    for c in 0..3 {
                        data.push(img.get(j, (col + n - k) % n, c));
                    }
                }
            }
            let shifted = SphericalImage::new(b, 3, data).unwrap();
            let d = ex.extract(&shifted).unwrap();
            assert!(similarity(&d0, &d).unwrap() > 0.999_999);
        }
    }

    #[test]
    fn seeded_weights_are_deterministic() {
        let cfg = DescriptorConfig {
            kernels_per_layer: 4,
            vlad_clusters: 6,
            weight_seed: 11,
            ..DescriptorConfig::with_backend(Backend::SconvVlad)
        };
        let img = scene(8, 0.9);
        let a = extract_descriptor(&img, &cfg).unwrap();
        let b = extract_descriptor(&img, &cfg).unwrap();
        assert_eq!(a, b);
        let other = extract_descriptor(
            &img,
            &DescriptorConfig {
                weight_seed: 12,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn config_validation() {
        let mut cfg = DescriptorConfig::default();
        cfg.num_layers = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = DescriptorConfig::default();
        cfg.vlad_clusters = 1;
        assert!(cfg.validate().is_err());
        let cfg = DescriptorConfig {
            backend: Backend::SconvVlad,
            kernels_per_layer: 128,
            vlad_clusters: 64,
            ..DescriptorConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!("sconv-vlad".parse::<Backend>().unwrap(), Backend::SconvVlad);
        assert!("netvlad".parse::<Backend>().is_err());
    }
}
