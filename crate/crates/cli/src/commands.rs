use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sphereloc::descriptor::Extractor;
use sphereloc::eval::{
    auc, generate_world, query_set_from_trajectory, run_benchmark, sample_poses, write_records_csv,
    BenchmarkConfig, IngestOptions, Method, SyntheticWorldSpec, TrajectoryFile,
};
use sphereloc::geo::{
    load_map, save_map, view_from_ppm, view_to_ppm, OverheadMap, Pose, RenderSpec,
};
use sphereloc::localize::{
    localize_hierarchical, BruteForceIndex, HierarchyConfig, LocalizationQuery, LocalizationResult,
    ViewEncoder,
};
use sphereloc::orientation::{estimate_yaw_with, YawSource};
use sphereloc::{Error, Result};

use crate::args::*;

fn load(m: &MapArgs) -> Result<OverheadMap> {
    load_map(&m.map, &m.sidecar)
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| io_context(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| io_context(path, e))?,
    ))
}

/// Writes `text` to `out`, or stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticWorldSpec {
        extent_m: a.extent,
        gsd: a.gsd,
        landmark_count: a.landmarks,
        texture_octaves: a.octaves,
        seed: a.seed,
    };
    let map = generate_world(&spec)?;
    let sidecar = a
        .sidecar
        .clone()
        .unwrap_or_else(|| a.out.with_extension("json"));
    save_map(
        &map,
        &a.out,
        &sidecar,
        &format!("synthetic world, seed {}", a.seed),
    )?;
    emit(
        None,
        &to_json(&json!({
            "raster": a.out,
            "sidecar": sidecar,
            "width_px": map.width(),
            "height_px": map.height(),
            "gsd_m_per_px": map.gsd(),
        })),
    )
}

pub fn render(a: &RenderArgs) -> Result<()> {
    let map = load(&a.map)?;
    if !map.contains(a.pose.x, a.pose.y) {
        return Err(Error::OutOfBounds(format!(
            "pose ({}, {}) lies outside the map",
            a.pose.x, a.pose.y
        )));
    }
    let spec = match a.mode {
        ModeArg::Spherical => {
            let s = RenderSpec::spherical(a.band_limit);
            match a.crop_deg {
                Some(c) => s.with_sky_crop(c),
                None => s,
            }
        }
        ModeArg::Pinhole => RenderSpec::pinhole(2 * a.band_limit),
    };
    let view = sphereloc::geo::render_view(&map, &a.pose, &spec)?;
    write_file(&a.out, &view_to_ppm(&view.image)?)?;
    emit(
        None,
        &to_json(&json!({
            "out": a.out,
            "size_px": view.image.width(),
            "truncated": view.truncated,
        })),
    )
}

pub fn orient(a: &OrientArgs) -> Result<()> {
    let read = |p: &PathBuf| fs::read(p).map_err(|e| io_context(p, e));
    let query = view_from_ppm(&read(&a.query)?)?;
    let reference = view_from_ppm(&read(&a.reference)?)?;
    let source = match a.backend {
        BackendArg::PowerSpectrum => YawSource::Raw,
        BackendArg::SconvVlad => {
            let cfg = DescriptorArgs {
                band_limit: query.band_limit(),
                backend: a.backend,
                weight_seed: a.weight_seed,
            }
            .config();
            YawSource::Features(Extractor::new(&cfg, query.band_limit(), query.channels())?)
        }
    };
    let est = estimate_yaw_with(&query, &reference, &source)?;
    emit(
        a.out.as_deref(),
        &to_json(&json!({
            "yaw_deg": est.yaw.to_degrees(),
            "confidence": est.confidence,
        })),
    )
}

fn result_json(
    method: MethodArg,
    truth: &Pose,
    r: &LocalizationResult,
    timestamp: Option<f64>,
) -> Value {
    let mut v = json!({
        "method": match method { MethodArg::Hier => "hier", MethodArg::Brute => "brute" },
        "truth": { "x": truth.x, "y": truth.y, "yaw": truth.yaw },
        "estimate": { "x": r.estimate.0, "y": r.estimate.1 },
        "yaw": r.yaw,
        "yaw_deg": r.yaw.to_degrees(),
        "yaw_confidence": r.yaw_confidence,
        "best_similarity": r.best_similarity,
        "n_descriptor_evals": r.n_descriptor_evals,
        "success": r.success,
        "diverged": r.diverged,
        "error_m": r.error_m,
        "cell_size": r.cell_size,
    });
    if let Some(t) = timestamp {
        v["timestamp"] = json!(t);
    }
    v
}

pub fn localize(a: &LocalizeArgs) -> Result<()> {
    let map = load(&a.map)?;
    let query_map = match (&a.query_map, &a.query_sidecar) {
        (Some(m), Some(s)) => Some(load_map(m, s)?),
        _ => None,
    };
    let source = query_map.as_ref().unwrap_or(&map);
    let cfg = a.hierarchy.config();
    cfg.validate()?;
    let encoder = ViewEncoder::spherical(a.descriptor.band_limit, &a.descriptor.config())?;

    let queries: Vec<(Option<f64>, Pose)> = match (&a.pose, &a.trajectory) {
        (Some(p), _) => vec![(None, *p)],
        (None, Some(path)) => TrajectoryFile::load(path)?
            .resample(a.rate)?
            .into_iter()
            .map(|(t, p)| (Some(t), p))
            .collect(),
        (None, None) => unreachable!("clap requires --pose or --trajectory"),
    };
    for (_, p) in &queries {
        if !source.contains(p.x, p.y) {
            return Err(Error::OutOfBounds(format!(
                "query pose ({}, {}) lies outside the map",
                p.x, p.y
            )));
        }
    }

    let index = match a.method {
        MethodArg::Brute => {
            let finest = cfg.altitude(cfg.l_max - 1);
            Some(BruteForceIndex::build(
                &map,
                &encoder,
                finest,
                cfg.r_olp,
                cfg.particle_cap,
            )?)
        }
        MethodArg::Hier => None,
    };
    let mut results = Vec::with_capacity(queries.len());
    let mut trace = a.trace.as_deref().map(create).transpose()?;
    for (id, (t, pose)) in queries.iter().enumerate() {
        let q = LocalizationQuery::render(source, pose, &encoder, &cfg)?;
        let r = match &index {
            Some(ix) => ix.query(
                &map,
                &encoder,
                &q.views[cfg.l_max - 1],
                q.ground_truth,
                cfg.success_threshold_m,
            )?,
            None => localize_hierarchical(&map, &q, &encoder, &cfg)?,
        };
        if let Some(w) = trace.as_mut() {
            write_trace(w, id, &r)?;
        }
        results.push(result_json(a.method, pose, &r, *t));
    }
    if let Some(mut w) = trace {
        w.flush()?;
    }
    let body = match (a.pose.is_some(), results.len()) {
        (true, 1) => results.pop().expect("one result"),
        _ => Value::Array(results),
    };
    emit(a.out.as_deref(), &to_json(&body))
}

fn write_trace(w: &mut impl Write, query_id: usize, r: &LocalizationResult) -> Result<()> {
    for rec in &r.trace {
        let mut v = serde_json::to_value(rec).expect("trace record serializes");
        v["query_id"] = json!(query_id);
        serde_json::to_writer(&mut *w, &v)
            .map_err(|e| Error::InvalidInput(format!("trace serialization: {e}")))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let map = load(&a.map)?;
    let hierarchy: HierarchyConfig = a.hierarchy.config();
    hierarchy.validate()?;
    let encoder = ViewEncoder::spherical(a.descriptor.band_limit, &a.descriptor.config())?;
    let mut poses = match &a.trajectory {
        Some(path) => TrajectoryFile::load(path)?
            .resample(a.rate)?
            .into_iter()
            .map(|(_, p)| p)
            .collect(),
        None => sample_poses(&map, a.queries, hierarchy.base_altitude, a.query_seed),
    };
    for p in &mut poses {
        p.yaw += a.yaw_offset;
    }
    let mut methods: Vec<Method> = a
        .methods
        .iter()
        .map(|m| match m {
            MethodArg::Brute => Method::BruteForce,
            MethodArg::Hier => Method::Hierarchical,
        })
        .collect();
    methods.dedup();
    let cfg = BenchmarkConfig {
        hierarchy,
        acc_thresholds: a.acc.clone(),
        methods: methods.clone(),
    };
    let report = run_benchmark(&map, &poses, &encoder, &cfg)?;

    if let Some(dir) = &a.records_dir {
        fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
        for m in &methods {
            let path = dir.join(format!("{m}.csv"));
            let mut w = create(&path)?;
            write_records_csv(&report.records(*m), &mut w)?;
            w.flush()?;
        }
    }
    let text = match a.format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
        Format::Json => report.to_json()? + "\n",
    };
    emit(a.out.as_deref(), &text)
}

pub fn retrieval(a: &RetrievalArgs) -> Result<()> {
    let map = load(&a.map)?;
    let encoder = ViewEncoder::spherical(a.descriptor.band_limit, &a.descriptor.config())?;
    let opts = IngestOptions {
        rate_hz: a.rate,
        reference_altitude: a.altitude,
        r_olp: a.r_olp,
        threshold_m: a.threshold,
        keep_reference_views: true,
    };
    let qs =
        query_set_from_trajectory(&TrajectoryFile::load(&a.trajectory)?, &map, &encoder, &opts)?;
    let scores = qs.score(&encoder)?;
    fs::create_dir_all(&a.out).map_err(|e| io_context(&a.out, e))?;

    let records = qs.records(&scores)?;
    let mut w = create(&a.out.join("records.csv"))?;
    write_records_csv(&records, &mut w)?;
    w.flush()?;

    let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(create(&a.out.join("recall.csv"))?);
    w.write_record(["n", "recall"]).map_err(csv_err)?;
    let max_n = a.max_n.clamp(1, scores.num_references());
    let mut recall = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let r = scores.recall_at_n(n)?;
        w.write_record([n.to_string(), r.to_string()])
            .map_err(csv_err)?;
        recall.push(r);
    }
    w.flush()?;

    let thresholds: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
    let roc = scores.roc_curve(&thresholds)?;
    let mut w = csv::Writer::from_writer(create(&a.out.join("roc.csv"))?);
    for p in &roc {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(&a.out.join("similarity.csv"))?);
    for row in scores.similarities() {
        w.write_record(row.iter().map(f64::to_string))
            .map_err(csv_err)?;
    }
    w.flush()?;

    emit(
        None,
        &to_json(&json!({
            "queries": scores.num_queries(),
            "references": scores.num_references(),
            "recall_at_1": recall[0],
            "auc": auc(&roc),
            "out": a.out,
        })),
    )
}
