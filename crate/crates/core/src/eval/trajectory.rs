use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{csv_error, QueryItem, QuerySet, ReferenceItem};
use crate::error::{Error, Result};
use crate::geo::{OverheadMap, Pose};
use crate::localize::{lattice_points, ViewEncoder};
use crate::sphere::wrap_pi;

/// One CSV row: `timestamp,x,y,altitude,yaw` (seconds, meters, radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub altitude: f64,
    pub yaw: f64,
}

impl TrajectoryRow {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.altitude, self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryFile {
    pub fn new(rows: Vec<TrajectoryRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::format("rows", "trajectory is empty"));
        }
        for (i, r) in rows.iter().enumerate() {
            if ![r.timestamp, r.x, r.y, r.altitude, r.yaw]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::format(format!("row {}", i + 1), "non-finite value"));
            }
        }
        if let Some(i) = rows
            .windows(2)
            .position(|w| !(w[1].timestamp > w[0].timestamp))
        {
            return Err(Error::format(
                "timestamp",
                format!("not strictly increasing at row {}", i + 2),
            ));
        }
        Ok(Self { rows })
    }

    pub fn from_reader(input: impl Read) -> Result<Self> {
        let rows = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input)
            .deserialize()
            .map(|r| r.map_err(csv_error))
            .collect::<Result<Vec<TrajectoryRow>>>()?;
        Self::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    /// Poses sampled every `1 / rate_hz` seconds from the first timestamp
    /// through the last, linear in position and altitude and along the
    /// shorter arc in yaw.
    pub fn resample(&self, rate_hz: f64) -> Result<Vec<(f64, Pose)>> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {rate_hz}"
            )));
        }
        let t0 = self.rows[0].timestamp;
        let t1 = self.rows[self.rows.len() - 1].timestamp;
        // tolerate accumulated rounding in the span so t1 itself is kept
        let n = ((t1 - t0) * rate_hz + 1e-9).floor() as usize + 1;
        let mut seg = 0;
        Ok((0..n)
            .map(|k| {
                let t = t0 + k as f64 / rate_hz;
                while seg + 2 < self.rows.len() && self.rows[seg + 1].timestamp <= t {
                    seg += 1;
                }
                let (a, b) = (
                    &self.rows[seg],
                    &self.rows[(seg + 1).min(self.rows.len() - 1)],
                );
                let u = if b.timestamp > a.timestamp {
                    ((t - a.timestamp) / (b.timestamp - a.timestamp)).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let lerp = |p: f64, q: f64| p + u * (q - p);
                let yaw = wrap_pi(a.yaw + u * wrap_pi(b.yaw - a.yaw));
                (
                    t,
                    Pose::new(
                        lerp(a.x, b.x),
                        lerp(a.y, b.y),
                        lerp(a.altitude, b.altitude),
                        yaw,
                    ),
                )
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub rate_hz: f64,
    /// References are yaw-0 renders on the localization lattice at this
    /// altitude.
    pub reference_altitude: f64,
    pub r_olp: f64,
    pub threshold_m: f64,
    /// Keep reference views so per-query yaw errors can be computed.
    pub keep_reference_views: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            rate_hz: 1.0,
            reference_altitude: 40.0,
            r_olp: 0.5,
            threshold_m: 20.0,
            keep_reference_views: false,
        }
    }
}

/// Query views along a trajectory against a lattice reference database.
pub fn ingest_trajectory(
    path: impl AsRef<Path>,
    map: &OverheadMap,
    encoder: &ViewEncoder,
    opts: &IngestOptions,
) -> Result<QuerySet> {
    query_set_from_trajectory(&TrajectoryFile::load(path)?, map, encoder, opts)
}

pub fn query_set_from_trajectory(
    traj: &TrajectoryFile,
    map: &OverheadMap,
    encoder: &ViewEncoder,
    opts: &IngestOptions,
) -> Result<QuerySet> {
    let poses = traj.resample(opts.rate_hz)?;
    if let Some((t, p)) = poses.iter().find(|(_, p)| !map.contains(p.x, p.y)) {
        return Err(Error::OutOfBounds(format!(
            "trajectory leaves the map at t={t}: ({}, {})",
            p.x, p.y
        )));
    }
    let queries = poses
        .iter()
        .map(|(_, p)| {
            Ok(QueryItem {
                view: encoder.render(map, p)?.image,
                pose: *p,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut references = Vec::new();
    for (x, y) in lattice_points(map, opts.reference_altitude, opts.r_olp) {
        let pose = Pose::new(x, y, opts.reference_altitude, 0.0);
        let view = encoder.render(map, &pose)?.image;
        match encoder.encode(&view) {
            Ok(descriptor) => references.push(ReferenceItem {
                descriptor,
                pose,
                view: opts.keep_reference_views.then_some(view),
            }),
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let qs = QuerySet {
        queries,
        references,
        threshold_m: opts.threshold_m,
    };
    qs.validate()?;
    Ok(qs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn parse(text: &str) -> Result<TrajectoryFile> {
        TrajectoryFile::from_reader(text.as_bytes())
    }

    #[test]
    fn two_rows_ten_seconds_give_eleven_poses() {
        let t = parse("timestamp,x,y,altitude,yaw\n0,0,0,40,0\n10,100,50,60,1\n").unwrap();
        let poses = t.resample(1.0).unwrap();
        assert_eq!(poses.len(), 11);
        let (tm, mid) = poses[5];
        assert_eq!(tm, 5.0);
        assert_eq!(
            (mid.x, mid.y, mid.altitude, mid.yaw),
            (50.0, 25.0, 50.0, 0.5)
        );
        assert_eq!(poses[10].1.x, 100.0);
    }

    #[test]
    fn yaw_interpolates_across_the_seam() {
        let t = parse("timestamp,x,y,altitude,yaw\n0,0,0,40,3.0\n2,0,0,40,-3.0\n").unwrap();
        let mid = t.resample(1.0).unwrap()[1].1.yaw;
        // shorter arc through +-pi, not through 0
        let expected = wrap_pi(3.0 + (2.0 * PI - 6.0) / 2.0);
        assert!((mid - expected).abs() < 1e-12);
        assert!(mid.abs() > 3.0);
    }

    #[test]
    fn multi_segment_and_rate() {
        let t =
            parse("timestamp,x,y,altitude,yaw\n0,0,0,40,0\n1,10,0,40,0\n3,10,20,40,0\n").unwrap();
        let poses = t.resample(2.0).unwrap();
        assert_eq!(poses.len(), 7);
        assert_eq!((poses[1].1.x, poses[1].1.y), (5.0, 0.0));
        assert_eq!((poses[4].1.x, poses[4].1.y), (10.0, 10.0));
    }

    #[test]
    fn bad_files_are_format_errors() {
        for text in [
            "timestamp,x,y,altitude,yaw\n0,0,0,40,0\n0,1,0,40,0\n",
            "timestamp,x,y,altitude,yaw\n5,0,0,40,0\n1,1,0,40,0\n",
            "timestamp,x,y,altitude,yaw\n0,zero,0,40,0\n",
            "timestamp,x,y,altitude,yaw\n",
        ] {
            assert!(matches!(parse(text), Err(Error::Format { .. })), "{text}");
        }
    }
}
