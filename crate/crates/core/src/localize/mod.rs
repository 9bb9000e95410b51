//! Global re-localization over an overhead map: a particle filter that starts
//! from a coarse lattice at a high virtual altitude and descends level by
//! level, plus the brute-force lattice search it is measured against.

mod encoder;

pub use encoder::{ViewEncoder, LOCALIZE_BAND_LIMIT};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::descriptor::{similarity, PlaceDescriptor};
use crate::error::{Error, Result};
use crate::geo::{OverheadMap, Pose};
use crate::orientation::estimate_yaw;
use crate::sphere::SphericalImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    /// Coarsest altitude is `alpha * base_altitude`.
    pub alpha: f64,
    /// Number of altitude levels.
    pub l_max: usize,
    /// Finest altitude H1, meters.
    pub base_altitude: f64,
    /// Lattice overlap ratio; cell spacing is `H (1 - r_olp)`.
    pub r_olp: f64,
    /// Fraction of the initial count kept per descent.
    pub keep_fraction: f64,
    /// Fraction of lowest-weight particles dropped before resampling.
    pub cull_fraction: f64,
    /// Convergence when `N_eff / N` reaches this value.
    pub neff_threshold: f64,
    pub max_iters_per_level: usize,
    pub particle_cap: usize,
    /// Weights are `max(0, s)^weight_exponent`; 1 is the plain clamped cosine.
    pub weight_exponent: f64,
    /// A run whose best finest-level similarity stays below this is flagged
    /// as diverged even when its particles have collapsed.
    pub min_similarity: f64,
    /// Success radius around ground truth, meters.
    pub success_threshold_m: f64,
    pub seed: u64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            l_max: 5,
            base_altitude: 40.0,
            r_olp: 0.5,
            keep_fraction: 0.8,
            cull_fraction: 0.2,
            neff_threshold: 0.05,
            max_iters_per_level: 1,
            particle_cap: 1_000_000,
            weight_exponent: 400.0,
            min_similarity: 0.99,
            success_threshold_m: 20.0,
            seed: 0,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be > 1, got {}", self.alpha));
        }
        if self.l_max == 0 {
            return bad("l_max must be >= 1".into());
        }
        if !(self.base_altitude > 0.0 && self.base_altitude.is_finite()) {
            return bad(format!(
                "base altitude must be > 0, got {}",
                self.base_altitude
            ));
        }
        if !(0.0..1.0).contains(&self.r_olp) {
            return bad(format!("r_olp must be in [0, 1), got {}", self.r_olp));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return bad(format!(
                "keep fraction must be in (0, 1], got {}",
                self.keep_fraction
            ));
        }
        if !(0.10..=0.30).contains(&self.cull_fraction) {
            return bad(format!(
                "cull fraction must be in [0.10, 0.30], got {}",
                self.cull_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.neff_threshold) {
            return bad(format!(
                "neff threshold must be in [0, 1], got {}",
                self.neff_threshold
            ));
        }
        if self.max_iters_per_level == 0 {
            return bad("max_iters_per_level must be >= 1".into());
        }
        if !(self.weight_exponent > 0.0 && self.weight_exponent.is_finite()) {
            return bad(format!(
                "weight exponent must be > 0, got {}",
                self.weight_exponent
            ));
        }
        if !(-1.0..=1.0).contains(&self.min_similarity) {
            return bad(format!(
                "min similarity must be in [-1, 1], got {}",
                self.min_similarity
            ));
        }
        if !(self.success_threshold_m > 0.0) {
            return bad("success threshold must be > 0".into());
        }
        Ok(())
    }

    /// Altitude of `level`, 0 being the coarsest. Levels are geometric from
    /// `alpha * H1` down to `H1`; a single level sits at `alpha * H1`.
    pub fn altitude(&self, level: usize) -> f64 {
        let top = self.alpha * self.base_altitude;
        if self.l_max == 1 {
            return top;
        }
        let t = level as f64 / (self.l_max - 1) as f64;
        top * self.alpha.powf(-t)
    }

    pub fn altitudes(&self) -> Vec<f64> {
        (0..self.l_max).map(|l| self.altitude(l)).collect()
    }

    /// Particle count after `descents` level descents.
    pub fn particle_count(&self, initial: usize, descents: usize) -> usize {
        let n = (initial as f64 * self.keep_fraction.powi(descents as i32) - 1e-9).ceil();
        (n as usize).max(1)
    }
}

/// Lattice cell count `ceil(M1 M2 / (H (1 - r_olp))^2)`.
pub fn lattice_count(extent: (f64, f64), altitude: f64, r_olp: f64) -> usize {
    let s = altitude * (1.0 - r_olp);
    let n = extent.0 * extent.1 / (s * s);
    // guard against 78.00000000001-style round-up
    (n - 1e-9 * n.max(1.0)).ceil().max(1.0) as usize
}

/// Spacing-`H(1 - r_olp)` lattice over the map: `ceil(M/s)` evenly spread
/// cell centers per axis, thinned evenly to exactly [`lattice_count`] points.
pub fn lattice_points(map: &OverheadMap, altitude: f64, r_olp: f64) -> Vec<(f64, f64)> {
    let (m1, m2) = map.extent();
    let (x0, y0, _, _) = map.bounds();
    let s = altitude * (1.0 - r_olp);
    let nx = ((m1 / s) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((m2 / s) - 1e-9).ceil().max(1.0) as usize;
    let total = nx * ny;
    let want = lattice_count((m1, m2), altitude, r_olp).min(total);
    (0..want)
        .map(|i| {
            let cell = i * total / want;
            let (cx, cy) = (cell % nx, cell / nx);
            (
                x0 + (cx as f64 + 0.5) * m1 / nx as f64,
                y0 + (cy as f64 + 0.5) * m2 / ny as f64,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub normalized: bool,
    pub rng_seed: u64,
    /// Count at the coarsest level, the base of the keep-fraction schedule.
    pub initial_count: usize,
    /// Set when a weighing step produced all-zero weights and was reseeded.
    pub reseeded: bool,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Weighted mean position.
    pub fn mean(&self) -> (f64, f64) {
        let total = self.weight_sum();
        if total <= 0.0 {
            let n = self.len() as f64;
            let (sx, sy) = self
                .particles
                .iter()
                .fold((0.0, 0.0), |a, p| (a.0 + p.x, a.1 + p.y));
            return (sx / n, sy / n);
        }
        let (sx, sy) = self.particles.iter().fold((0.0, 0.0), |a, p| {
            (a.0 + p.weight * p.x, a.1 + p.weight * p.y)
        });
        (sx / total, sy / total)
    }

    /// Index of the heaviest particle (first on ties).
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.particles.iter().enumerate() {
            if p.weight > self.particles[best].weight {
                best = i;
            }
        }
        best
    }

    fn normalize(&mut self) {
        let total = self.weight_sum();
        let n = self.len() as f64;
        for p in &mut self.particles {
            p.weight = if total > 0.0 {
                p.weight / total
            } else {
                1.0 / n
            };
        }
        self.normalized = true;
    }
}

/// Uniform-weight particles on the coarsest-level lattice.
pub fn init_particles(map: &OverheadMap, cfg: &HierarchyConfig) -> Result<ParticleSet> {
    cfg.validate()?;
    let altitude = cfg.altitude(0);
    let count = lattice_count(map.extent(), altitude, cfg.r_olp);
    if count > cfg.particle_cap {
        return Err(Error::Config(format!(
            "{count} initial particles exceed the cap of {}",
            cfg.particle_cap
        )));
    }
    let points = lattice_points(map, altitude, cfg.r_olp);
    let w = 1.0 / points.len() as f64;
    Ok(ParticleSet {
        particles: points
            .into_iter()
            .map(|(x, y)| Particle {
                x,
                y,
                weight: w,
                level: 0,
            })
            .collect(),
        normalized: true,
        rng_seed: cfg.seed,
        initial_count: count,
        reseeded: false,
    })
}

/// Similarity of each particle's view to the query, in particle order.
/// A view whose descriptor is degenerate scores 0.
pub fn particle_similarities(
    ps: &ParticleSet,
    query: &PlaceDescriptor,
    map: &OverheadMap,
    encoder: &ViewEncoder,
    altitude: f64,
) -> Result<Vec<f64>> {
    let score = |p: &Particle| -> Result<f64> {
        match encoder.encode_at(map, p.x, p.y, altitude) {
            Ok(d) => similarity(query, &d),
            Err(Error::Degenerate(_)) | Err(Error::OutOfBounds(_)) => Ok(0.0),
            Err(e) => Err(e),
        }
    };
    #[cfg(not(target_arch = "wasm32"))]
    {
        use rayon::prelude::*;
        ps.particles.par_iter().map(score).collect()
    }
    #[cfg(target_arch = "wasm32")]
    {
        ps.particles.iter().map(score).collect()
    }
}

/// Converts similarities into normalized weights `max(0, s)^k`. All-zero
/// weights are replaced by uniform ones and the set is flagged as reseeded.
pub fn apply_similarities(
    ps: &ParticleSet,
    sims: &[f64],
    cfg: &HierarchyConfig,
) -> Result<ParticleSet> {
    if sims.len() != ps.len() {
        return Err(Error::Shape(format!(
            "{} similarities for {} particles",
            sims.len(),
            ps.len()
        )));
    }
    let mut out = ps.clone();
    for (p, &s) in out.particles.iter_mut().zip(sims) {
        p.weight = s.max(0.0).powf(cfg.weight_exponent);
    }
    // fixed-order summation keeps normalization independent of scheduling
    if out.weight_sum() <= 0.0 {
        out.reseeded = true;
    }
    out.normalize();
    Ok(out)
}

/// Weighs every particle by the similarity of its rendered view at `level`
/// to the query descriptor.
pub fn weigh_particles(
    ps: &ParticleSet,
    query: &PlaceDescriptor,
    map: &OverheadMap,
    encoder: &ViewEncoder,
    cfg: &HierarchyConfig,
    level: usize,
) -> Result<ParticleSet> {
    let sims = particle_similarities(ps, query, map, encoder, cfg.altitude(level))?;
    apply_similarities(ps, &sims, cfg)
}

/// `1 / sum(w^2)` of a normalized set.
pub fn effective_sample_size(ps: &ParticleSet) -> Result<f64> {
    let total = ps.weight_sum();
    if !ps.normalized || ps.is_empty() || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "effective sample size needs normalized weights (sum {total})"
        )));
    }
    Ok(1.0
        / ps.particles
            .iter()
            .map(|p| p.weight * p.weight)
            .sum::<f64>())
}

fn level_rng(seed: u64, level: usize, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((level as u64) << 32) | iteration as u64);
    rng
}

/// Systematic resampling of `source` (weights need not be normalized) into
/// `count` unit-weight draws, then Gaussian jitter clamped to the map.
fn resample(
    source: &[Particle],
    count: usize,
    sigma: f64,
    level: usize,
    map: &OverheadMap,
    rng: &mut ChaCha8Rng,
) -> Vec<Particle> {
    let total: f64 = source.iter().map(|p| p.weight).sum();
    let uniform = total <= 0.0;
    let weight = |p: &Particle| if uniform { 1.0 } else { p.weight / total };
    let step = 1.0 / count as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cumulative = weight(&source[0]);
    let mut i = 0;
    let jitter = Normal::new(0.0, sigma).expect("finite jitter");
    let (x0, y0, x1, y1) = map.bounds();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        while u > cumulative && i + 1 < source.len() {
            i += 1;
            cumulative += weight(&source[i]);
        }
        let p = source[i];
        out.push(Particle {
            x: (p.x + jitter.sample(rng)).clamp(x0, x1),
            y: (p.y + jitter.sample(rng)).clamp(y0, y1),
            weight: 1.0 / count as f64,
            level,
        });
        u += step;
    }
    out
}

/// Drops the lowest-weight `cull_fraction`, systematic-resamples the
/// survivors to the next level's count, and jitters them with
/// `sigma = altitude / 4` of the new level.
pub fn resample_and_descend(
    ps: &ParticleSet,
    map: &OverheadMap,
    cfg: &HierarchyConfig,
    level: usize,
) -> Result<ParticleSet> {
    if level + 1 >= cfg.l_max {
        return Err(Error::InvalidInput(format!(
            "cannot descend below the finest level {}",
            cfg.l_max - 1
        )));
    }
    if ps.is_empty() {
        return Err(Error::InvalidInput("empty particle set".into()));
    }
    let survivors = cull(&ps.particles, cfg.cull_fraction);
    let next = level + 1;
    let count = cfg.particle_count(ps.initial_count, next);
    let mut rng = level_rng(ps.rng_seed, next, 0);
    let particles = resample(
        &survivors,
        count,
        cfg.altitude(next) / 4.0,
        next,
        map,
        &mut rng,
    );
    Ok(ParticleSet {
        particles,
        normalized: true,
        rng_seed: ps.rng_seed,
        initial_count: ps.initial_count,
        reseeded: false,
    })
}

/// Keeps the highest-weight `1 - fraction` of particles, preserving order.
fn cull(particles: &[Particle], fraction: f64) -> Vec<Particle> {
    let n = particles.len();
    let drop = ((n as f64 * fraction) + 1e-9).floor() as usize;
    let drop = drop.min(n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        particles[a]
            .weight
            .total_cmp(&particles[b].weight)
            .then(a.cmp(&b))
    });
    let mut keep = vec![true; n];
    for &i in &order[..drop] {
        keep[i] = false;
    }
    particles
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}

/// One weighing step in the run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub level: usize,
    pub iteration: usize,
    pub altitude: f64,
    /// `(x, y, weight)` after weighing.
    pub particles: Vec<(f64, f64, f64)>,
    pub n_eff: f64,
    /// Cumulative descriptor evaluations.
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub estimate: (f64, f64),
    /// Query yaw relative to the best match's yaw-0 view.
    pub yaw: f64,
    pub yaw_confidence: f64,
    /// Highest query similarity seen at the finest level.
    pub best_similarity: f64,
    pub n_descriptor_evals: usize,
    /// Within the success radius of the ground truth and not diverged;
    /// false without ground truth.
    pub success: bool,
    pub error_m: Option<f64>,
    pub diverged: bool,
    /// Lattice spacing at the finest altitude, meters.
    pub cell_size: f64,
    pub trace: Vec<TraceRecord>,
}

impl LocalizationResult {
    /// Writes the trace as JSON lines, one record per weighing step.
    pub fn write_trace_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.trace {
            serde_json::to_writer(&mut out, r)
                .map_err(|e| Error::InvalidInput(format!("trace serialization: {e}")))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Query renders at each level altitude, coarsest first, plus optional ground
/// truth for scoring.
#[derive(Debug, Clone)]
pub struct LocalizationQuery {
    pub views: Vec<SphericalImage>,
    pub ground_truth: Option<(f64, f64)>,
}

impl LocalizationQuery {
    /// Renders the query views of `pose` at every altitude of `cfg`. The
    /// pose altitude is ignored.
    pub fn render(
        map: &OverheadMap,
        pose: &Pose,
        encoder: &ViewEncoder,
        cfg: &HierarchyConfig,
    ) -> Result<Self> {
        let views = cfg
            .altitudes()
            .into_iter()
            .map(|h| Ok(encoder.render(map, &pose.at_altitude(h))?.image))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            views,
            ground_truth: Some((pose.x, pose.y)),
        })
    }
}

fn score(estimate: (f64, f64), truth: Option<(f64, f64)>, threshold: f64) -> (bool, Option<f64>) {
    match truth {
        Some((x, y)) => {
            let d = (estimate.0 - x).hypot(estimate.1 - y);
            (d <= threshold, Some(d))
        }
        None => (false, None),
    }
}

/// Yaw of `query` against the yaw-0 render at `(x, y)`; zero confidence when
/// either view is degenerate.
fn orient(
    map: &OverheadMap,
    encoder: &ViewEncoder,
    query: &SphericalImage,
    at: (f64, f64),
    altitude: f64,
) -> Result<(f64, f64)> {
    let reference = encoder
        .render(map, &Pose::new(at.0, at.1, altitude, 0.0))?
        .image;
    match estimate_yaw(query, &reference) {
        Ok(e) => Ok((e.yaw, e.confidence)),
        Err(Error::Degenerate(_)) => Ok((0.0, 0.0)),
        Err(e) => Err(e),
    }
}

/// Coarse-to-fine particle-filter localization.
pub fn localize_hierarchical(
    map: &OverheadMap,
    query: &LocalizationQuery,
    encoder: &ViewEncoder,
    cfg: &HierarchyConfig,
) -> Result<LocalizationResult> {
    cfg.validate()?;
    if query.views.len() != cfg.l_max {
        return Err(Error::InvalidInput(format!(
            "{} query views for {} levels",
            query.views.len(),
            cfg.l_max
        )));
    }
    let descriptors = query
        .views
        .iter()
        .map(|v| encoder.encode(v))
        .collect::<Result<Vec<_>>>()?;
    let mut ps = init_particles(map, cfg)?;
    let mut evals = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut reseeded = false;
    let mut best_similarity = f64::NEG_INFINITY;
    let mut best_at = (0.0, 0.0);
    for level in 0..cfg.l_max {
        let altitude = cfg.altitude(level);
        let finest = level + 1 == cfg.l_max;
        for iteration in 0..cfg.max_iters_per_level {
            let sims = particle_similarities(&ps, &descriptors[level], map, encoder, altitude)?;
            evals += sims.len();
            ps = apply_similarities(&ps, &sims, cfg)?;
            let n_eff = effective_sample_size(&ps)?;
            trace.push(TraceRecord {
                level,
                iteration,
                altitude,
                particles: ps.particles.iter().map(|p| (p.x, p.y, p.weight)).collect(),
                n_eff,
                evals,
            });
            let level_converged = n_eff >= cfg.neff_threshold * ps.len() as f64 && !ps.reseeded;
            if finest {
                converged |= level_converged;
                reseeded |= ps.reseeded;
                for (p, &s) in ps.particles.iter().zip(&sims) {
                    if s > best_similarity {
                        best_similarity = s;
                        best_at = (p.x, p.y);
                    }
                }
            }
            if level_converged || iteration + 1 == cfg.max_iters_per_level {
                break;
            }
            // not converged: redraw around the current weights at this level
            let mut rng = level_rng(ps.rng_seed, level, iteration + 1);
            let n = ps.len();
            ps.particles = resample(&ps.particles, n, altitude / 4.0, level, map, &mut rng);
        }
        if !finest {
            ps = resample_and_descend(&ps, map, cfg, level)?;
        }
    }
    let estimate = ps.mean();
    let finest_altitude = cfg.altitude(cfg.l_max - 1);
    let (yaw, yaw_confidence) = orient(
        map,
        encoder,
        &query.views[cfg.l_max - 1],
        best_at,
        finest_altitude,
    )?;
    let (within, error_m) = score(estimate, query.ground_truth, cfg.success_threshold_m);
    let diverged = !converged || reseeded || best_similarity < cfg.min_similarity;
    Ok(LocalizationResult {
        estimate,
        yaw,
        yaw_confidence,
        best_similarity,
        n_descriptor_evals: evals,
        success: within && !diverged,
        error_m,
        diverged,
        cell_size: finest_altitude * (1.0 - cfg.r_olp),
        trace,
    })
}

/// Precomputed lattice descriptors at one altitude, reusable across queries.
#[derive(Debug, Clone)]
pub struct BruteForceIndex {
    altitude: f64,
    r_olp: f64,
    points: Vec<(f64, f64)>,
    descriptors: Vec<Option<PlaceDescriptor>>,
}

impl BruteForceIndex {
    pub fn build(
        map: &OverheadMap,
        encoder: &ViewEncoder,
        altitude: f64,
        r_olp: f64,
        cap: usize,
    ) -> Result<Self> {
        let count = lattice_count(map.extent(), altitude, r_olp);
        if count > cap {
            return Err(Error::Config(format!(
                "{count} lattice cells exceed the cap of {cap}"
            )));
        }
        let points = lattice_points(map, altitude, r_olp);
        let describe = |&(x, y): &(f64, f64)| -> Result<Option<PlaceDescriptor>> {
            match encoder.encode_at(map, x, y, altitude) {
                Ok(d) => Ok(Some(d)),
                Err(Error::Degenerate(_)) | Err(Error::OutOfBounds(_)) => Ok(None),
                Err(e) => Err(e),
            }
        };
        #[cfg(not(target_arch = "wasm32"))]
        let descriptors = {
            use rayon::prelude::*;
            points
                .par_iter()
                .map(describe)
                .collect::<Result<Vec<_>>>()?
        };
        #[cfg(target_arch = "wasm32")]
        let descriptors = points.iter().map(describe).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            altitude,
            r_olp,
            points,
            descriptors,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    pub fn cell_size(&self) -> f64 {
        self.altitude * (1.0 - self.r_olp)
    }

    /// Similarity of `query` to every cell, in lattice order.
    pub fn similarities(&self, query: &PlaceDescriptor) -> Result<Vec<f64>> {
        self.descriptors
            .iter()
            .map(|d| match d {
                Some(d) => similarity(query, d),
                None => Ok(0.0),
            })
            .collect()
    }

    /// Argmax-similarity cell for the query view.
    pub fn query(
        &self,
        map: &OverheadMap,
        encoder: &ViewEncoder,
        view: &SphericalImage,
        ground_truth: Option<(f64, f64)>,
        success_threshold_m: f64,
    ) -> Result<LocalizationResult> {
        let sims = self.similarities(&encoder.encode(view)?)?;
        let mut best = 0;
        for (i, s) in sims.iter().enumerate() {
            if *s > sims[best] {
                best = i;
            }
        }
        let estimate = self.points[best];
        let (yaw, yaw_confidence) = orient(map, encoder, view, estimate, self.altitude)?;
        let (success, error_m) = score(estimate, ground_truth, success_threshold_m);
        Ok(LocalizationResult {
            estimate,
            yaw,
            yaw_confidence,
            best_similarity: sims[best],
            n_descriptor_evals: sims.len(),
            success,
            error_m,
            diverged: false,
            cell_size: self.cell_size(),
            trace: Vec::new(),
        })
    }
}

/// Evaluates every lattice cell at `altitude` and returns the best one.
pub fn localize_bruteforce(
    map: &OverheadMap,
    view: &SphericalImage,
    ground_truth: Option<(f64, f64)>,
    altitude: f64,
    encoder: &ViewEncoder,
    cfg: &HierarchyConfig,
) -> Result<LocalizationResult> {
    cfg.validate()?;
    BruteForceIndex::build(map, encoder, altitude, cfg.r_olp, cfg.particle_cap)?.query(
        map,
        encoder,
        view,
        ground_truth,
        cfg.success_threshold_m,
    )
}

/// Brute-force over hierarchical evaluation count implied by the level
/// schedule: `alpha^2 / sum_{i < l_max} keep^i` (keep = 0.8 by default).
pub fn predicted_speedup(cfg: &HierarchyConfig) -> f64 {
    let series: f64 = (0..cfg.l_max)
        .map(|i| cfg.keep_fraction.powi(i as i32))
        .sum();
    cfg.alpha * cfg.alpha / series
}

/// Lattice cell `(column, row)` holding `p` for the spacing-`H(1 - r_olp)`
/// lattice of [`lattice_points`].
pub fn lattice_cell(map: &OverheadMap, altitude: f64, r_olp: f64, p: (f64, f64)) -> (i64, i64) {
    let (m1, m2) = map.extent();
    let (x0, y0, _, _) = map.bounds();
    let s = altitude * (1.0 - r_olp);
    let nx = ((m1 / s) - 1e-9).ceil().max(1.0);
    let ny = ((m2 / s) - 1e-9).ceil().max(1.0);
    (
        ((p.0 - x0) / (m1 / nx)).floor() as i64,
        ((p.1 - y0) / (m2 / ny)).floor() as i64,
    )
}

/// True when `a` and `b` fall in the same or in adjacent lattice cells.
pub fn within_one_cell(
    map: &OverheadMap,
    altitude: f64,
    r_olp: f64,
    a: (f64, f64),
    b: (f64, f64),
) -> bool {
    let (ca, cb) = (
        lattice_cell(map, altitude, r_olp, a),
        lattice_cell(map, altitude, r_olp, b),
    );
    (ca.0 - cb.0).abs() <= 1 && (ca.1 - cb.1).abs() <= 1
}
