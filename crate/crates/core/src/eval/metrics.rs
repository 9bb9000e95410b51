use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::descriptor::{similarity, PlaceDescriptor};
use crate::error::{Error, Result};
use crate::geo::Pose;
use crate::localize::ViewEncoder;
use crate::orientation::estimate_yaw;
use crate::sphere::{wrap_pi, SphericalImage};

#[derive(Debug, Clone)]
pub struct QueryItem {
    pub view: SphericalImage,
    pub pose: Pose,
}

/// A database entry. The view is only needed for yaw errors.
#[derive(Debug, Clone)]
pub struct ReferenceItem {
    pub descriptor: PlaceDescriptor,
    pub pose: Pose,
    pub view: Option<SphericalImage>,
}

#[derive(Debug, Clone)]
pub struct QuerySet {
    pub queries: Vec<QueryItem>,
    pub references: Vec<ReferenceItem>,
    /// A reference is a true match when its pose lies within this distance
    /// of the query's ground truth.
    pub threshold_m: f64,
}

impl QuerySet {
    pub fn validate(&self) -> Result<()> {
        if self.queries.is_empty() || self.references.is_empty() {
            return Err(Error::InvalidInput(
                "query set needs queries and references".into(),
            ));
        }
        if !(self.threshold_m > 0.0 && self.threshold_m.is_finite()) {
            return Err(Error::Config(format!(
                "match threshold must be positive, got {}",
                self.threshold_m
            )));
        }
        Ok(())
    }

    /// Encodes every query and scores it against every reference.
    pub fn score(&self, encoder: &ViewEncoder) -> Result<ScoreMatrix> {
        self.validate()?;
        let encode = |q: &QueryItem| -> Result<Vec<f64>> {
            let d = encoder.encode(&q.view)?;
            self.references
                .iter()
                .map(|r| similarity(&d, &r.descriptor))
                .collect()
        };
        #[cfg(not(target_arch = "wasm32"))]
        let similarities = {
            use rayon::prelude::*;
            self.queries
                .par_iter()
                .map(encode)
                .collect::<Result<Vec<_>>>()?
        };
        #[cfg(target_arch = "wasm32")]
        let similarities = self
            .queries
            .iter()
            .map(encode)
            .collect::<Result<Vec<_>>>()?;
        let distances_m = self
            .queries
            .iter()
            .map(|q| {
                self.references
                    .iter()
                    .map(|r| (q.pose.x - r.pose.x).hypot(q.pose.y - r.pose.y))
                    .collect()
            })
            .collect();
        ScoreMatrix::new(similarities, distances_m, self.threshold_m)
    }

    /// Top-1 record per query; the yaw error is NaN when the matched
    /// reference carries no view or either view is degenerate.
    pub fn records(&self, scores: &ScoreMatrix) -> Result<Vec<QueryRecord>> {
        let mut out = scores.records();
        for rec in &mut out {
            let q = &self.queries[rec.query_id];
            let r = &self.references[rec.best_match_id];
            if let Some(view) = &r.view {
                rec.yaw_err_rad = match estimate_yaw(&q.view, view) {
                    Ok(e) => wrap_pi(e.yaw - (q.pose.yaw - r.pose.yaw)).abs(),
                    Err(Error::Degenerate(_)) => f64::NAN,
                    Err(e) => return Err(e),
                };
            }
        }
        Ok(out)
    }
}

/// Query-by-reference similarities and ground distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    similarities: Vec<Vec<f64>>,
    distances_m: Vec<Vec<f64>>,
    threshold_m: f64,
}

impl ScoreMatrix {
    pub fn new(
        similarities: Vec<Vec<f64>>,
        distances_m: Vec<Vec<f64>>,
        threshold_m: f64,
    ) -> Result<Self> {
        let refs = similarities.first().map_or(0, Vec::len);
        if similarities.is_empty() || refs == 0 {
            return Err(Error::InvalidInput("empty score matrix".into()));
        }
        if distances_m.len() != similarities.len()
            || similarities
                .iter()
                .chain(&distances_m)
                .any(|row| row.len() != refs)
        {
            return Err(Error::Shape(
                "similarity and distance matrices must share one rectangular shape".into(),
            ));
        }
        if similarities.iter().flatten().any(|s| s.is_nan()) {
            return Err(Error::InvalidInput("NaN similarity".into()));
        }
        Ok(Self {
            similarities,
            distances_m,
            threshold_m,
        })
    }

    pub fn num_queries(&self) -> usize {
        self.similarities.len()
    }

    pub fn num_references(&self) -> usize {
        self.similarities[0].len()
    }

    /// Row `q` holds query `q` against every reference.
    pub fn similarities(&self) -> &[Vec<f64>] {
        &self.similarities
    }

    /// Reference indices of query `q`, most similar first; ties keep index
    /// order.
    pub fn ranking(&self, q: usize) -> Vec<usize> {
        let row = &self.similarities[q];
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx
    }

    pub fn records(&self) -> Vec<QueryRecord> {
        (0..self.num_queries())
            .map(|q| {
                let best = self.ranking(q)[0];
                QueryRecord {
                    query_id: q,
                    best_match_id: best,
                    similarity: self.similarities[q][best],
                    dist_m: self.distances_m[q][best],
                    yaw_err_rad: f64::NAN,
                }
            })
            .collect()
    }

    /// Fraction of queries with a true match among their `n` most similar
    /// references.
    pub fn recall_at_n(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidInput("recall@N needs N >= 1".into()));
        }
        let hits = (0..self.num_queries())
            .filter(|&q| {
                self.ranking(q)
                    .into_iter()
                    .take(n)
                    .any(|r| self.distances_m[q][r] <= self.threshold_m)
            })
            .count();
        Ok(hits as f64 / self.num_queries() as f64)
    }

    pub fn roc_curve(&self, thresholds: &[f64]) -> Result<Vec<RocPoint>> {
        roc_curve(&self.records(), self.threshold_m, thresholds)
    }
}

pub fn recall_at_n(qs: &QuerySet, encoder: &ViewEncoder, n: usize) -> Result<f64> {
    qs.score(encoder)?.recall_at_n(n)
}

/// One top-1 retrieval or localization outcome, as dumped per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: usize,
    pub best_match_id: usize,
    pub similarity: f64,
    pub dist_m: f64,
    pub yaw_err_rad: f64,
}

impl QueryRecord {
    pub fn is_correct(&self, threshold_m: f64) -> bool {
        self.dist_m <= threshold_m
    }
}

pub fn write_records_csv(records: &[QueryRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(input: impl Read) -> Result<Vec<QueryRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::format("csv", format!("{kind:?}")),
    }
}

/// Top-1 recall straight from per-query records.
pub fn recall_at_1(records: &[QueryRecord], threshold_m: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no query records".into()));
    }
    let hits = records.iter().filter(|r| r.is_correct(threshold_m)).count();
    Ok(hits as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Accepting a top-1 match when its similarity reaches the threshold; a
/// positive is a match within `threshold_m`. Rates with an empty class are 0.
pub fn roc_curve(
    records: &[QueryRecord],
    threshold_m: f64,
    thresholds: &[f64],
) -> Result<Vec<RocPoint>> {
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidInput(
            "ROC thresholds must be sorted ascending".into(),
        ));
    }
    let positives = records.iter().filter(|r| r.is_correct(threshold_m)).count();
    let negatives = records.len() - positives;
    let rate = |k: usize, of: usize| if of == 0 { 0.0 } else { k as f64 / of as f64 };
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0, 0);
            for r in records.iter().filter(|r| r.similarity >= t) {
                if r.is_correct(threshold_m) {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
            RocPoint {
                threshold: t,
                fpr: rate(fp, negatives),
                tpr: rate(tp, positives),
            }
        })
        .collect())
}

/// Trapezoidal area under the curve, closed with the (0,0) and (1,1)
/// corners.
pub fn auc(curve: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}
