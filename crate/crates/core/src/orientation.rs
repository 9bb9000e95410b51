//! Relative yaw between two views by harmonic-domain correlation.

use serde::Serialize;

use crate::descriptor::Extractor;
use crate::error::{Error, Result};
use crate::sphere::wrap_pi;
use crate::sphere::{sh_forward, yaw_convolve, CorrelationProfile, SHSpectrum, SphericalImage};

/// Which signal is correlated.
#[derive(Debug, Clone, Default)]
pub enum YawSource {
    /// Raw intensities.
    #[default]
    Raw,
    /// First-stage feature maps of a sconv-vlad extractor (falls back to raw
    /// intensities for the power-spectrum backend).
    Features(Extractor),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YawEstimate {
    /// Rotation taking the reference into the query, in `(-pi, pi]`.
    pub yaw: f64,
    /// Peak over the L2 norm of the profile, in `[0, 1]`.
    pub confidence: f64,
    #[serde(skip)]
    pub profile: CorrelationProfile,
}

/// Yaw `a` such that `query ~ rotate_z(reference, a)`, from the peak of the
/// yaw correlation with parabolic sub-grid refinement.
pub fn estimate_yaw(query: &SphericalImage, reference: &SphericalImage) -> Result<YawEstimate> {
    estimate_yaw_with(query, reference, &YawSource::Raw)
}

pub fn estimate_yaw_with(
    query: &SphericalImage,
    reference: &SphericalImage,
    source: &YawSource,
) -> Result<YawEstimate> {
    if query.band_limit() != reference.band_limit() || query.channels() != reference.channels() {
        return Err(Error::Shape(format!(
            "cannot orient B={}/C={} against B={}/C={}",
            query.band_limit(),
            query.channels(),
            reference.band_limit(),
            reference.channels()
        )));
    }
    for (name, img) in [("query", query), ("reference", reference)] {
        if img.is_constant() {
            return Err(Error::Degenerate(format!("{name} view is constant")));
        }
    }
    let spectra = |img: &SphericalImage| -> Result<SHSpectrum> {
        match source {
            YawSource::Features(ex) => match ex.first_layer_spectrum(img)? {
                Some(s) => Ok(s),
                None => sh_forward(img),
            },
            YawSource::Raw => sh_forward(img),
        }
    };
    let (mut q, mut r) = (spectra(query)?, spectra(reference)?);
    zero_zonal(&mut q);
    zero_zonal(&mut r);
    if q.energy() <= 1e-20 || r.energy() <= 1e-20 {
        return Err(Error::Degenerate(
            "view is rotationally symmetric; yaw is undefined".into(),
        ));
    }
    let profile = yaw_convolve(&q, &r)?;
    let norm = profile.l2_norm();
    let confidence = if norm > 0.0 {
        (profile.peak_value() / norm).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(YawEstimate {
        yaw: wrap_pi(profile.refined_peak_yaw()),
        confidence,
        profile,
    })
}

/// Drops the `m = 0` terms, which do not depend on yaw and only add a
/// constant offset to the profile.
fn zero_zonal(spectrum: &mut SHSpectrum) {
    let zero = rustfft::num_complex::Complex64::new(0.0, 0.0);
    for c in 0..spectrum.channels() {
        for l in 0..spectrum.band_limit() {
            spectrum.set(c, l, 0, zero);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{Backend, DescriptorConfig};
    use crate::sphere::{rotate_z, sh_inverse, RotationZ};
    use std::f64::consts::PI;

    fn scene(b: usize) -> SphericalImage {
        SphericalImage::from_fn(b, 3, |t, p, c| {
            let c = c as f64;
            0.5 + 0.2 * (p + c).cos() * t.sin()
                + 0.1 * (3.0 * p - c).sin() * (2.0 * t).sin()
                + 0.05 * (5.0 * p + 1.0).cos() * t.sin().powi(5)
        })
        .unwrap()
    }

    fn rotated(img: &SphericalImage, yaw: f64) -> SphericalImage {
        sh_inverse(&rotate_z(&sh_forward(img).unwrap(), RotationZ::new(yaw))).unwrap()
    }

    #[test]
    fn identity_gives_zero() {
        let img = scene(16);
        let est = estimate_yaw(&img, &img).unwrap();
        assert!(est.yaw.abs() < 1e-9);
        assert!(est.confidence > 0.0 && est.confidence <= 1.0);
    }

    #[test]
    fn recovers_off_grid_yaw_within_half_step() {
        let b = 16;
        let img = scene(b);
        let half = PI / (2 * b) as f64;
        for yaw in [0.3, -1.0, 2.9, PI / 4.0] {
            let est = estimate_yaw(&rotated(&img, yaw), &img).unwrap();
            assert!(wrap_pi(est.yaw - yaw).abs() <= half, "{yaw} -> {}", est.yaw);
        }
    }

    #[test]
    fn antisymmetric_and_composes() {
        let b = 16;
        let img = scene(b);
        let step = PI / b as f64;
        let a = rotated(&img, 0.7);
        let ab = rotated(&a, 1.9);
        let fwd = estimate_yaw(&a, &img).unwrap().yaw;
        let back = estimate_yaw(&img, &a).unwrap().yaw;
        assert!(wrap_pi(fwd + back).abs() <= step);
        assert!(wrap_pi(estimate_yaw(&ab, &img).unwrap().yaw - 2.6).abs() <= step);
    }

    #[test]
    fn degenerate_inputs() {
        let flat = SphericalImage::from_fn(8, 3, |_, _, _| 0.3).unwrap();
        let img = scene(8);
        assert!(matches!(
            estimate_yaw(&flat, &img),
            Err(Error::Degenerate(_))
        ));
        let zonal = SphericalImage::from_fn(8, 3, |t, _, _| t.cos()).unwrap();
        assert!(matches!(
            estimate_yaw(&zonal, &img),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            estimate_yaw(&scene(4), &img),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn feature_correlation_recovers_grid_yaw() {
        let b = 16;
        let img = scene(b);
        let cfg = DescriptorConfig {
            kernels_per_layer: 4,
            vlad_clusters: 4,
            ..DescriptorConfig::with_backend(Backend::SconvVlad)
        };
        let src = YawSource::Features(Extractor::new(&cfg, b, 3).unwrap());
        let yaw = RotationZ::grid_step(b, 5).yaw();
        let est = estimate_yaw_with(&rotated(&img, yaw), &img, &src).unwrap();
        assert!(wrap_pi(est.yaw - yaw).abs() < 1e-6);
    }
}
