//! Training objectives as plain functions, for unit checks and for external
//! trainers. Nothing here computes gradients.

use serde::{Deserialize, Serialize};

use crate::descriptor::PlaceDescriptor;
use crate::error::{Error, Result};
use crate::sphere::SphericalImage;

/// Clamp applied to discriminator probabilities before taking logs.
pub const GAN_EPS: f64 = 1e-7;

/// Geometric and condition features of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub z_g: Vec<f64>,
    pub z_c: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrthVariant {
    /// `1 - cos`: zero for parallel features.
    #[default]
    OneMinusCos,
    /// `|cos|`: zero for orthogonal features.
    AbsCos,
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "feature lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::Degenerate(
            "orthogonality needs non-zero finite features".into(),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - z_g . z_c / (|z_g| |z_c|)`, in `[0, 2]`.
pub fn orth_loss(pair: &FeaturePair) -> Result<f64> {
    orth_loss_with(pair, OrthVariant::OneMinusCos)
}

pub fn orth_loss_with(pair: &FeaturePair, variant: OrthVariant) -> Result<f64> {
    let c = cosine(&pair.z_g, &pair.z_c)?;
    Ok(match variant {
        OrthVariant::OneMinusCos => 1.0 - c,
        OrthVariant::AbsCos => c.abs(),
    })
}

/// Discriminator outputs for real and generated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanBatch {
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
}

/// `mean(log d_real) + mean(log(1 - d_fake))`, probabilities clamped to
/// `[eps, 1 - eps]`.
pub fn gan_loss(batch: &GanBatch) -> Result<f64> {
    if batch.d_real.is_empty() || batch.d_fake.is_empty() {
        return Err(Error::InvalidInput("GAN batch must be non-empty".into()));
    }
    if batch
        .d_real
        .iter()
        .chain(&batch.d_fake)
        .any(|p| !p.is_finite())
    {
        return Err(Error::InvalidInput(
            "non-finite discriminator output".into(),
        ));
    }
    let clamp = |p: f64| p.clamp(GAN_EPS, 1.0 - GAN_EPS);
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| {
        v.iter().map(|&p| f(clamp(p))).sum::<f64>() / v.len() as f64
    };
    Ok(mean(&batch.d_real, &|p| p.ln()) + mean(&batch.d_fake, &|p| (1.0 - p).ln()))
}

/// Mean absolute per-sample difference.
pub fn recon_loss(x: &SphericalImage, x_hat: &SphericalImage) -> Result<f64> {
    if x.band_limit() != x_hat.band_limit() || x.channels() != x_hat.channels() {
        return Err(Error::Shape(format!(
            "reconstruction of B={}/C={} against B={}/C={}",
            x.band_limit(),
            x.channels(),
            x_hat.band_limit(),
            x_hat.channels()
        )));
    }
    let n = x.data().len() as f64;
    Ok(x.data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n)
}

pub fn cdtm_loss(gan: f64, orth: f64, recon: f64) -> f64 {
    gan + orth + recon
}

pub fn pem_loss(lv: f64, ls: f64, lc: f64) -> f64 {
    lv + ls + lc
}

/// Margins of the pose-embedding triplet terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            lambda3: 1.0,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda1, self.lambda2, self.lambda3]
            .iter()
            .all(|l| l.is_finite() && *l >= 0.0)
        {
            Ok(())
        } else {
            Err(Error::Config("loss margins must be finite and >= 0".into()))
        }
    }
}

/// Anchor, its rotated copies, positives and negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletTuple {
    pub anchor: PlaceDescriptor,
    pub rotated: Vec<PlaceDescriptor>,
    pub positives: Vec<PlaceDescriptor>,
    pub negatives: Vec<PlaceDescriptor>,
}

/// Distance between descriptors used by the triplet terms.
pub trait Metric {
    fn distance(&self, a: &PlaceDescriptor, b: &PlaceDescriptor) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    fn distance(&self, a: &PlaceDescriptor, b: &PlaceDescriptor) -> Result<f64> {
        if a.dim() != b.dim() {
            return Err(Error::Shape(format!(
                "descriptor dims differ: {} vs {}",
                a.dim(),
                b.dim()
            )));
        }
        Ok(a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    }
}

impl<F> Metric for F
where
    F: Fn(&PlaceDescriptor, &PlaceDescriptor) -> f64,
{
    fn distance(&self, a: &PlaceDescriptor, b: &PlaceDescriptor) -> Result<f64> {
        Ok(self(a, b))
    }
}

/// Hardest-pair hinge `max_{i,j} [margin + d(a, p_i) - d(a, n_j)]_+`.
fn hardest_hinge(
    anchor: &PlaceDescriptor,
    positives: &[PlaceDescriptor],
    negatives: &[PlaceDescriptor],
    margin: f64,
    d: &dyn Metric,
) -> Result<f64> {
    let mut worst_pos = f64::NEG_INFINITY;
    for p in positives {
        worst_pos = worst_pos.max(d.distance(anchor, p)?);
    }
    let mut nearest_neg = f64::INFINITY;
    for n in negatives {
        nearest_neg = nearest_neg.min(d.distance(anchor, n)?);
    }
    Ok((margin + worst_pos - nearest_neg).max(0.0))
}

fn check_tuple(t: &TripletTuple) -> Result<()> {
    if t.positives.is_empty() || t.negatives.is_empty() {
        return Err(Error::InvalidInput(
            "triplet tuple needs positives and negatives".into(),
        ));
    }
    Ok(())
}

/// Anchor hinge with margin `lambda1` plus the hardest hinge over rotated
/// copies with margin `lambda2` (absent when there are no rotated copies).
pub fn individual_loss(t: &TripletTuple, p: &LossParams, d: &dyn Metric) -> Result<f64> {
    check_tuple(t)?;
    p.validate()?;
    let anchor = hardest_hinge(&t.anchor, &t.positives, &t.negatives, p.lambda1, d)?;
    let mut rotated = 0.0f64;
    for r in &t.rotated {
        rotated = rotated.max(hardest_hinge(r, &t.positives, &t.negatives, p.lambda2, d)?);
    }
    Ok(anchor + rotated)
}

/// Hardest hinge with margin `lambda3` between an anchor from one domain and
/// positives/negatives from the other.
pub fn cross_domain_loss(t: &TripletTuple, p: &LossParams, d: &dyn Metric) -> Result<f64> {
    check_tuple(t)?;
    p.validate()?;
    hardest_hinge(&t.anchor, &t.positives, &t.negatives, p.lambda3, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::Backend;

    fn pair(a: &[f64], b: &[f64]) -> FeaturePair {
        FeaturePair {
            z_g: a.to_vec(),
            z_c: b.to_vec(),
        }
    }

    fn desc(v: &[f64]) -> PlaceDescriptor {
        PlaceDescriptor::from_raw(v.to_vec(), Backend::PowerSpectrum, 1).unwrap()
    }

    #[test]
    fn orth_examples() {
        assert!(orth_loss(&pair(&[1.0, 2.0], &[1.0, 2.0])).unwrap().abs() < 1e-15);
        assert!((orth_loss(&pair(&[1.0, 0.0], &[0.0, 3.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((orth_loss(&pair(&[1.0, 2.0], &[-2.0, -4.0])).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            orth_loss(&pair(&[0.0, 0.0], &[1.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
        let abs = |a: &[f64], b: &[f64]| orth_loss_with(&pair(a, b), OrthVariant::AbsCos).unwrap();
        assert_eq!(abs(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((abs(&[1.0, 0.0], &[-1.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gan_examples() {
        let half = GanBatch {
            d_real: vec![0.5; 3],
            d_fake: vec![0.5; 3],
        };
        assert!((gan_loss(&half).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-12);
        let perfect = GanBatch {
            d_real: vec![1.0; 2],
            d_fake: vec![0.0; 2],
        };
        assert!(gan_loss(&perfect).unwrap().abs() < 1e-6);
        assert!(gan_loss(&GanBatch {
            d_real: vec![],
            d_fake: vec![0.5]
        })
        .is_err());
    }

    #[test]
    fn sums() {
        assert_eq!(cdtm_loss(0.0, 0.0, 0.0), 0.0);
        assert!((cdtm_loss(-1.0, 0.5, 0.2) + 0.3).abs() < 1e-12);
        assert!((pem_loss(0.2, 0.5, -1.0) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn triplet_hinges() {
        // points on a line: distances equal coordinate differences
        let at = |x: f64| desc(&[1.0, x]);
        let d = |a: &PlaceDescriptor, b: &PlaceDescriptor| {
            (a.values()[1] / a.values()[0] - b.values()[1] / b.values()[0]).abs()
        };
        let t = |pos: f64, neg: f64| TripletTuple {
            anchor: at(0.0),
            rotated: vec![],
            positives: vec![at(pos)],
            negatives: vec![at(neg)],
        };
        let p = LossParams::default();
        assert_eq!(individual_loss(&t(0.2, 0.9), &p, &d).unwrap(), 0.0);
        assert!((individual_loss(&t(0.5, 0.6), &p, &d).unwrap() - 0.4).abs() < 1e-12);
        assert!((cross_domain_loss(&t(1.0, 1.2), &p, &d).unwrap() - 0.8).abs() < 1e-12);
    }
}
