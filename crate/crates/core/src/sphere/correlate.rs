use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{lm_offset, SHSpectrum};
use crate::error::{Error, Result};

/// Rotation about the vertical (polar) axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationZ {
    yaw: f64,
}

impl RotationZ {
    pub fn new(yaw: f64) -> Self {
        let mut yaw = yaw.rem_euclid(TAU);
        if yaw >= TAU {
            yaw = 0.0;
        }
        Self { yaw }
    }

    /// Rotation by `k` longitude steps of a `2B` grid.
    pub fn grid_step(band_limit: usize, k: i64) -> Self {
        Self::new(TAU * k as f64 / (2 * band_limit) as f64)
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }
}

/// Rotates a spectrum about the polar axis: `f(l, m) <- exp(-i m yaw) f(l, m)`.
///
/// On the grid this shifts content towards increasing longitude by `yaw`.
pub fn rotate_z(spectrum: &SHSpectrum, rot: RotationZ) -> SHSpectrum {
    let b = spectrum.band_limit();
    let mut out = spectrum.clone();
    let coeffs = out.coeffs_mut();
    for c in 0..spectrum.channels() {
        for l in 0..b {
            for m in -(l as i64)..=l as i64 {
                if m == 0 {
                    continue;
                }
                let phase = Complex64::from_polar(1.0, -(m as f64) * rot.yaw());
                coeffs[lm_offset(b, c, l, m)] *= phase;
            }
        }
    }
    out
}

/// Correlation sampled over the `2B` grid yaws.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    values: Vec<f64>,
    peak_index: usize,
    peak_value: f64,
}

impl CorrelationProfile {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty correlation profile".into()));
        }
        let (peak_index, peak_value) =
            values
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                });
        Ok(Self {
            values,
            peak_index,
            peak_value,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn peak_index(&self) -> usize {
        self.peak_index
    }

    pub fn peak_value(&self) -> f64 {
        self.peak_value
    }

    /// Angular spacing of the samples.
    pub fn step(&self) -> f64 {
        TAU / self.values.len() as f64
    }

    /// Yaw of the peak sample, in `[0, 2 pi)`.
    pub fn peak_yaw(&self) -> f64 {
        self.peak_index as f64 * self.step()
    }

    /// Peak yaw refined by a parabola through the peak and its two neighbours,
    /// in `[0, 2 pi)`.
    pub fn refined_peak_yaw(&self) -> f64 {
        let n = self.values.len();
        if n < 3 {
            return self.peak_yaw();
        }
        let k = self.peak_index;
        let left = self.values[(k + n - 1) % n];
        let mid = self.values[k];
        let right = self.values[(k + 1) % n];
        let denom = left - 2.0 * mid + right;
        let offset = if denom < 0.0 {
            (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        ((k as f64 + offset) * self.step()).rem_euclid(TAU)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Yaw correlation `C(a_k) = Re sum f(l, m) conj(h(l, m)) exp(i m a_k)` for
/// `a_k = 2 pi k / 2B`, summed over channels.
///
/// `C(a)` is the inner product of `f` with `h` rotated by `a`, so if
/// `f = rotate_z(h, a_k)` the profile peaks at index `k`.
pub fn yaw_convolve(f: &SHSpectrum, h: &SHSpectrum) -> Result<CorrelationProfile> {
    if f.band_limit() != h.band_limit() || f.channels() != h.channels() {
        return Err(Error::Shape(format!(
            "yaw correlation of B={}/C={} with B={}/C={}",
            f.band_limit(),
            f.channels(),
            h.band_limit(),
            h.channels()
        )));
    }
    let b = f.band_limit();
    let n = 2 * b;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let (fc, hc) = (f.coeffs(), h.coeffs());
    for c in 0..f.channels() {
        for l in 0..b {
            for m in -(l as i64)..=l as i64 {
                let i = lm_offset(b, c, l, m);
                spectrum[m.rem_euclid(n as i64) as usize] += fc[i] * hc[i].conj();
            }
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    CorrelationProfile::from_values(spectrum.into_iter().map(|v| v.re).collect())
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_pi(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(TAU) - PI;
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sh_forward, SphericalImage};

    fn textured(b: usize) -> SHSpectrum {
        let img = SphericalImage::from_fn(b, 1, |t, p, _| {
            (3.0 * p).cos() * t.sin().powi(3) + 0.4 * (p + 0.3).sin() * t.sin() * t.cos()
        })
        .unwrap();
        sh_forward(&img).unwrap()
    }

    #[test]
    fn yaw_normalization() {
        assert_eq!(RotationZ::new(TAU).yaw(), 0.0);
        assert!((RotationZ::new(-PI / 2.0).yaw() - 1.5 * PI).abs() < 1e-15);
        assert!((RotationZ::grid_step(4, 2).yaw() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_full_turn_are_identity() {
        let s = textured(8);
        assert_eq!(rotate_z(&s, RotationZ::new(0.0)), s);
        let full = rotate_z(&s, RotationZ::new(TAU));
        for (a, b) in full.coeffs().iter().zip(s.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_phase_on_y11() {
        let mut s = SHSpectrum::zeros(4, 1).unwrap();
        s.set(0, 1, 1, Complex64::new(0.7, -0.2));
        let r = rotate_z(&s, RotationZ::new(PI / 2.0));
        let expected = Complex64::new(0.7, -0.2) * Complex64::from_polar(1.0, -PI / 2.0);
        assert!((r.get(0, 1, 1) - expected).norm() < 1e-15);
    }

    #[test]
    fn self_correlation_peaks_at_zero_with_parseval_value() {
        let s = textured(8);
        let prof = yaw_convolve(&s, &s).unwrap();
        assert_eq!(prof.peak_index(), 0);
        assert!((prof.peak_value() - s.energy()).abs() < 1e-10);
        assert_eq!(prof.values().len(), 16);
    }

    #[test]
    fn disjoint_support_correlates_to_zero() {
        let mut f = SHSpectrum::zeros(6, 1).unwrap();
        let mut h = SHSpectrum::zeros(6, 1).unwrap();
        f.set(0, 2, 1, Complex64::new(1.0, 0.5));
        f.set(0, 2, -1, Complex64::new(-1.0, 0.5));
        h.set(0, 3, 2, Complex64::new(0.3, 0.1));
        h.set(0, 3, -2, Complex64::new(0.3, -0.1));
        let prof = yaw_convolve(&f, &h).unwrap();
        assert!(prof.values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn mismatched_shapes() {
        let a = SHSpectrum::zeros(4, 1).unwrap();
        let b = SHSpectrum::zeros(5, 1).unwrap();
        let c = SHSpectrum::zeros(4, 2).unwrap();
        assert!(matches!(yaw_convolve(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(yaw_convolve(&a, &c), Err(Error::Shape(_))));
    }

    #[test]
    fn parabolic_refinement() {
        // samples of cos(x - 0.3 step) around the peak
        let n = 16;
        let step = TAU / n as f64;
        let values: Vec<f64> = (0..n)
            .map(|k| (k as f64 * step - 5.3 * step).cos())
            .collect();
        let prof = CorrelationProfile::from_values(values).unwrap();
        assert_eq!(prof.peak_index(), 5);
        let refined = prof.refined_peak_yaw();
        assert!((refined - 5.3 * step).abs() < 0.05 * step);
    }

    #[test]
    fn wrap_pi_range() {
        assert!((wrap_pi(PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(1.5 * PI) + 0.5 * PI).abs() < 1e-15);
        assert_eq!(wrap_pi(0.0), 0.0);
    }
}
