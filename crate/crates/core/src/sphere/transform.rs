use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{colatitude, lm_offset, SHSpectrum, SphericalImage};
use crate::error::{Error, Result};

/// Precomputed tables for the forward and inverse transform at one band limit.
pub struct ShtPlan {
    band_limit: usize,
    /// Quadrature weight of one grid node in row `j` (solid angle).
    area: Vec<f64>,
    /// Normalized associated Legendre values, `[row][l (l + 1) / 2 + m]`, `m >= 0`.
    legendre: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ShtPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShtPlan")
            .field("band_limit", &self.band_limit)
            .finish()
    }
}

impl ShtPlan {
    pub fn new(band_limit: usize) -> Result<Self> {
        super::check_band_limit(band_limit)?;
        let b = band_limit;
        let n = 2 * b;
        let tri = b * (b + 1) / 2;

        let mut area = Vec::with_capacity(n);
        let mut legendre = vec![0.0; n * tri];
        for j in 0..n {
            let theta = colatitude(b, j);
            area.push(driscoll_healy_weight(b, theta) * PI / b as f64);
            normalized_legendre(b, theta, &mut legendre[j * tri..(j + 1) * tri]);
        }

        let mut planner = FftPlanner::new();
        Ok(Self {
            band_limit,
            area,
            legendre,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        })
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    /// Solid-angle weight of a single node in grid row `row`.
    #[inline]
    pub fn area_weight(&self, row: usize) -> f64 {
        self.area[row]
    }

    #[inline]
    fn legendre_row(&self, row: usize) -> &[f64] {
        let tri = self.band_limit * (self.band_limit + 1) / 2;
        &self.legendre[row * tri..(row + 1) * tri]
    }

    pub fn forward(&self, image: &SphericalImage) -> Result<SHSpectrum> {
        if image.band_limit() != self.band_limit {
            return Err(Error::Shape(format!(
                "plan is for B={}, image has B={}",
                self.band_limit,
                image.band_limit()
            )));
        }
        let b = self.band_limit;
        let n = 2 * b;
        let channels = image.channels();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); b * b * channels];
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];

        for c in 0..channels {
            for j in 0..n {
                for (k, slot) in row.iter_mut().enumerate() {
                    *slot = Complex64::new(image.get(j, k, c), 0.0);
                }
                self.fft.process_with_scratch(&mut row, &mut scratch);
                let q = self.area[j];
                let leg = self.legendre_row(j);
                for m in 0..b {
                    let pos = row[m] * q;
                    let neg = row[(n - m) % n] * if m % 2 == 0 { q } else { -q };
                    for l in m..b {
                        let p = leg[l * (l + 1) / 2 + m];
                        coeffs[lm_offset(b, c, l, m as i64)] += pos * p;
                        if m > 0 {
                            coeffs[lm_offset(b, c, l, -(m as i64))] += neg * p;
                        }
                    }
                }
            }
        }
        SHSpectrum::new(b, channels, coeffs)
    }

    pub fn inverse(&self, spectrum: &SHSpectrum) -> Result<SphericalImage> {
        if spectrum.band_limit() != self.band_limit {
            return Err(Error::Shape(format!(
                "plan is for B={}, spectrum has B={}",
                self.band_limit,
                spectrum.band_limit()
            )));
        }
        let b = self.band_limit;
        let n = 2 * b;
        let channels = spectrum.channels();
        let coeffs = spectrum.coeffs();
        let mut data = vec![0.0; n * n * channels];
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.ifft.get_inplace_scratch_len()];

        for c in 0..channels {
            for j in 0..n {
                row.fill(Complex64::new(0.0, 0.0));
                let leg = self.legendre_row(j);
                for m in 0..b {
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    for l in m..b {
                        let p = leg[l * (l + 1) / 2 + m];
                        row[m] += coeffs[lm_offset(b, c, l, m as i64)] * p;
                        if m > 0 {
                            row[n - m] += coeffs[lm_offset(b, c, l, -(m as i64))] * (p * sign);
                        }
                    }
                }
                self.ifft.process_with_scratch(&mut row, &mut scratch);
                for (k, v) in row.iter().enumerate() {
                    data[(j * n + k) * channels + c] = v.re;
                }
            }
        }
        SphericalImage::new(b, channels, data)
    }
}

/// Driscoll-Healy quadrature weight for colatitude `theta` on a `2B` grid.
fn driscoll_healy_weight(band_limit: usize, theta: f64) -> f64 {
    let s: f64 = (0..band_limit)
        .map(|k| {
            let odd = (2 * k + 1) as f64;
            (odd * theta).sin() / odd
        })
        .sum();
    2.0 / band_limit as f64 * theta.sin() * s
}

/// Fills `out[l (l + 1) / 2 + m]` with `N_lm P_lm(cos theta)` for `0 <= m <= l < B`,
/// Condon-Shortley phase included.
fn normalized_legendre(band_limit: usize, theta: f64, out: &mut [f64]) {
    let x = theta.cos();
    let s = theta.sin();
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..band_limit {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        out[idx(m, m)] = pmm;
        if m + 1 < band_limit {
            out[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in m + 2..band_limit {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            out[idx(l, m)] = a * (x * out[idx(l - 1, m)] - b * out[idx(l - 2, m)]);
        }
    }
}

/// Shared plan for `band_limit`, built on first use.
pub fn plan(band_limit: usize) -> Result<Arc<ShtPlan>> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<ShtPlan>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = plans.lock().expect("plan cache poisoned").get(&band_limit) {
        return Ok(p.clone());
    }
    let built = Arc::new(ShtPlan::new(band_limit)?);
    let mut guard = plans.lock().expect("plan cache poisoned");
    Ok(guard.entry(band_limit).or_insert(built).clone())
}

/// Forward spherical-harmonic transform with equiangular quadrature.
pub fn sh_forward(image: &SphericalImage) -> Result<SHSpectrum> {
    plan(image.band_limit())?.forward(image)
}

/// Inverse transform; the real part of the synthesis is returned.
pub fn sh_inverse(spectrum: &SHSpectrum) -> Result<SphericalImage> {
    plan(spectrum.band_limit())?.inverse(spectrum)
}
