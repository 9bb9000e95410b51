use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{csv_error, QueryRecord};
use crate::error::{Error, Result};
use crate::geo::{OverheadMap, Pose};
use crate::localize::{
    lattice_points, localize_hierarchical, BruteForceIndex, HierarchyConfig, LocalizationQuery,
    LocalizationResult, ViewEncoder,
};
use crate::sphere::wrap_pi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BruteForce,
    Hierarchical,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::BruteForce => "brute-force",
            Method::Hierarchical => "hierarchical",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub hierarchy: HierarchyConfig,
    /// A localization counts at level `a` when it lands within the success
    /// radius and its best similarity is at least `a`.
    pub acc_thresholds: Vec<f64>,
    pub methods: Vec<Method>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            hierarchy: HierarchyConfig::default(),
            acc_thresholds: vec![0.9, 0.8, 0.7],
            methods: vec![Method::BruteForce, Method::Hierarchical],
        }
    }
}

/// Per-query localization outcome of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: usize,
    pub truth: Pose,
    pub estimate: (f64, f64),
    /// Nearest finest-level lattice cell to the estimate.
    pub cell_id: usize,
    pub best_similarity: f64,
    pub success: bool,
    pub diverged: bool,
    pub error_m: f64,
    pub yaw_err_rad: f64,
    pub evals: usize,
    pub time_s: f64,
}

impl QueryOutcome {
    pub fn success_at(&self, acc: f64) -> bool {
        self.success && self.best_similarity >= acc
    }

    pub fn record(&self) -> QueryRecord {
        QueryRecord {
            query_id: self.query_id,
            best_match_id: self.cell_id,
            similarity: self.best_similarity,
            dist_m: self.error_m,
            yaw_err_rad: self.yaw_err_rad,
        }
    }
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub acc_threshold: f64,
    pub success_rate: f64,
    pub mean_time_s: f64,
    pub mean_evals: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub outcomes: Vec<(Method, Vec<QueryOutcome>)>,
}

impl BenchmarkReport {
    pub fn outcomes(&self, method: Method) -> Option<&[QueryOutcome]> {
        self.outcomes
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, o)| o.as_slice())
    }

    pub fn row(&self, method: Method, acc: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.acc_threshold == acc)
    }

    pub fn records(&self, method: Method) -> Vec<QueryRecord> {
        self.outcomes(method)
            .map(|o| o.iter().map(QueryOutcome::record).collect())
            .unwrap_or_default()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("report serialization: {e}")))
    }
}

fn nearest(points: &[(f64, f64)], p: (f64, f64)) -> usize {
    let d = |q: &(f64, f64)| (q.0 - p.0).hypot(q.1 - p.1);
    (0..points.len())
        .min_by(|&a, &b| d(&points[a]).total_cmp(&d(&points[b])))
        .unwrap_or(0)
}

fn outcome(
    query_id: usize,
    truth: &Pose,
    r: &LocalizationResult,
    cells: &[(f64, f64)],
    time_s: f64,
) -> QueryOutcome {
    QueryOutcome {
        query_id,
        truth: *truth,
        estimate: r.estimate,
        cell_id: nearest(cells, r.estimate),
        best_similarity: r.best_similarity,
        success: r.success,
        diverged: r.diverged,
        error_m: r.error_m.unwrap_or(f64::NAN),
        yaw_err_rad: wrap_pi(r.yaw - truth.yaw).abs(),
        evals: r.n_descriptor_evals,
        time_s,
    }
}

/// Runs each method over the query poses. Brute force searches the lattice
/// at the finest altitude; building its descriptor index is charged evenly to
/// the queries. Queries run one after another so that timings are not
/// contended.
pub fn run_benchmark(
    map: &OverheadMap,
    queries: &[Pose],
    encoder: &ViewEncoder,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkReport> {
    let h = &cfg.hierarchy;
    h.validate()?;
    if queries.is_empty() {
        return Err(Error::InvalidInput(
            "benchmark needs at least one query".into(),
        ));
    }
    if cfg.acc_thresholds.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config("acceptance thresholds must be finite".into()));
    }
    let finest = h.altitude(h.l_max - 1);
    let cells = lattice_points(map, finest, h.r_olp);
    let rendered = queries
        .iter()
        .map(|p| LocalizationQuery::render(map, p, encoder, h))
        .collect::<Result<Vec<_>>>()?;

    let mut outcomes = Vec::new();
    for &method in &cfg.methods {
        let mut out = Vec::with_capacity(queries.len());
        match method {
            Method::BruteForce => {
                let start = Instant::now();
                let index = BruteForceIndex::build(map, encoder, finest, h.r_olp, h.particle_cap)?;
                let build_share = start.elapsed().as_secs_f64() / queries.len() as f64;
                for (i, (pose, q)) in queries.iter().zip(&rendered).enumerate() {
                    let t = Instant::now();
                    let view = &q.views[h.l_max - 1];
                    let r =
                        index.query(map, encoder, view, q.ground_truth, h.success_threshold_m)?;
                    out.push(outcome(
                        i,
                        pose,
                        &r,
                        &cells,
                        build_share + t.elapsed().as_secs_f64(),
                    ));
                }
            }
            Method::Hierarchical => {
                for (i, (pose, q)) in queries.iter().zip(&rendered).enumerate() {
                    let t = Instant::now();
                    let r = localize_hierarchical(map, q, encoder, h)?;
                    out.push(outcome(i, pose, &r, &cells, t.elapsed().as_secs_f64()));
                }
            }
        }
        outcomes.push((method, out));
    }

    let mut rows = Vec::new();
    for (method, out) in &outcomes {
        let n = out.len() as f64;
        let mean_time_s = out.iter().map(|o| o.time_s).sum::<f64>() / n;
        let mean_evals = out.iter().map(|o| o.evals as f64).sum::<f64>() / n;
        for &acc in &cfg.acc_thresholds {
            rows.push(ReportRow {
                method: *method,
                acc_threshold: acc,
                success_rate: out.iter().filter(|o| o.success_at(acc)).count() as f64 / n,
                mean_time_s,
                mean_evals,
            });
        }
    }
    Ok(BenchmarkReport { rows, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::DescriptorConfig;
    use crate::eval::{generate_world, SyntheticWorldSpec};

    #[test]
    fn small_benchmark_schema_and_monotonicity() {
        let map = generate_world(&SyntheticWorldSpec {
            extent_m: (300.0, 200.0),
            landmark_count: 6,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let enc = ViewEncoder::spherical(16, &DescriptorConfig::default()).unwrap();
        let cfg = BenchmarkConfig {
            hierarchy: HierarchyConfig {
                base_altitude: 20.0,
                l_max: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let poses = [
            Pose::new(120.0, 90.0, 0.0, 0.4),
            Pose::new(210.0, 60.0, 0.0, -1.0),
        ];
        let rep = run_benchmark(&map, &poses, &enc, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 6);
        let mut csv = Vec::new();
        rep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("method,acc_threshold,success_rate,mean_time_s,mean_evals\n"));
        assert!(text.contains("\nbrute-force,0.9,"));
        for m in [Method::BruteForce, Method::Hierarchical] {
            let lo = rep.row(m, 0.7).unwrap().success_rate;
            assert!(lo >= rep.row(m, 0.9).unwrap().success_rate);
            assert_eq!(rep.records(m).len(), 2);
        }
        assert!(
            rep.row(Method::Hierarchical, 0.9).unwrap().mean_evals
                < rep.row(Method::BruteForce, 0.9).unwrap().mean_evals
        );
        assert!(rep.to_json().unwrap().contains("\"hierarchical\""));
    }
}
