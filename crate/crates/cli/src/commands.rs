use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde_json::{json, Value};

use eyecontact::headpose::{default_intrinsics, FaceModel3D, LandmarkIndexMap};
use eyecontact::metrics::{
    aggregate_reports, attention_report, build_timeline, cross_dataset_eval, evaluate_predictions,
    loocv_by_participant, ConfusionMatrix, EvalReport, LoocvReport,
};
use eyecontact::normalize::{head_frame, normalization_transform, warp_image, Image};
use eyecontact::pipeline;
use eyecontact::records::{read_dataset, read_dataset_lenient, read_predictions, write_dataset, write_predictions, LabelSource};
use eyecontact::synth::{self, SynthConfig};
use eyecontact::{Error, FrameRecord, ModelArtifact, PipelineConfig};

use crate::{Common, LabelingFlags, LabelsArg, Protocol, EXIT_FAILURE, EXIT_INPUT};

pub enum Outcome {
    Complete,
    /// Finished with this many frames left unprocessed.
    Partial(usize),
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Schema { .. }
                | Error::Session { .. }
                | Error::Dataset(_)
                | Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::UnsupportedVersion(_)
                | Error::Config(_)
                | Error::Io(_)
                | Error::Json(_) => EXIT_INPUT,
                _ => EXIT_FAILURE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<InputError>().is_some() {
            return EXIT_INPUT;
        }
    }
    EXIT_FAILURE
}

#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(InputError(msg.into()))
}

fn setup_workers(common: &Common) -> Result<()> {
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(input_err("--workers must be at least 1"));
        }
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn out_path(common: &Common) -> Result<&Path> {
    common.out.as_deref().ok_or_else(|| input_err("--out is required"))
}

fn pipeline_config(common: &Common, labeling: Option<&LabelingFlags>) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(f) = labeling {
        if let Some(m) = f.min_pts {
            cfg.optics.min_pts = Some(m);
        }
        if let Some(x) = f.xi {
            cfg.optics.xi = x;
        }
        if let Some(c) = f.confidence {
            cfg.confidence_threshold = c;
        }
        cfg.validate()?;
    }
    Ok(cfg)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// JSONL outputs carry their effective configuration in `<out>.config.json`.
fn write_provenance(out: &Path, command: &str, config: Value) -> Result<()> {
    write_json(&sidecar(out), &json!({ "command": command, "config": config }))
}

fn load_dataset(path: &Path) -> Result<Vec<FrameRecord>> {
    read_dataset(path).with_context(|| format!("reading {}", path.display()))
}

pub fn synth(common: &Common, truth: Option<&Path>) -> Result<Outcome> {
    setup_workers(common)?;
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("config {}", p.display()))?;
            SynthConfig::from_json(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = out_path(common)?;
    let ds = synth::generate(&cfg)?;
    write_dataset(out, &ds.records)?;
    write_provenance(out, "synth", serde_json::to_value(&cfg)?)?;
    if let Some(t) = truth {
        let mut f = std::io::BufWriter::new(fs::File::create(t)?);
        for row in &ds.truth {
            serde_json::to_writer(&mut f, row)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    println!("frames={} sessions={}", ds.records.len(), cfg.participants * cfg.sessions_per_participant);
    Ok(Outcome::Complete)
}

pub fn pose(common: &Common, input: &Path, face_model: Option<&Path>) -> Result<Outcome> {
    setup_workers(common)?;
    let cfg = pipeline_config(common, None)?;
    let out = out_path(common)?;
    let model = match face_model {
        Some(p) => FaceModel3D::load(p).with_context(|| format!("face model {}", p.display()))?,
        None => FaceModel3D::canonical(),
    };
    let (records, rejected) =
        read_dataset_lenient(input).with_context(|| format!("reading {}", input.display()))?;
    for e in &rejected {
        log::warn!("skipped record: {e}");
    }
    let res = pipeline::annotate_poses(&records, &cfg, &model);
    write_dataset(out, &res.records)?;
    write_provenance(out, "pose", serde_json::to_value(&cfg)?)?;
    let faces = records.iter().filter(|r| r.face_detected).count();
    println!(
        "frames={} faces={} pose_failures={} rejected_records={}",
        records.len(),
        faces,
        res.failures,
        rejected.len()
    );
    let failed = res.failures + rejected.len();
    Ok(if failed > 0 {
        Outcome::Partial(failed)
    } else {
        Outcome::Complete
    })
}

fn label_source(l: LabelsArg) -> LabelSource {
    match l {
        LabelsArg::Cluster => LabelSource::Cluster,
        LabelsArg::GroundTruth => LabelSource::GroundTruth,
    }
}

pub fn train(common: &Common, labeling: &LabelingFlags, input: &Path, labels: LabelsArg) -> Result<Outcome> {
    setup_workers(common)?;
    let cfg = pipeline_config(common, Some(labeling))?;
    let out = out_path(common)?;
    let records = load_dataset(input)?;
    let artifact = pipeline::train(&records, &cfg, label_source(labels))?;
    artifact.save(out)?;
    println!(
        "features={} components={} explained={:.4}",
        artifact.pca.input_dim(),
        artifact.pca.output_dim(),
        artifact.pca.explained_ratio()
    );
    Ok(Outcome::Complete)
}

pub fn predict(common: &Common, input: &Path, model: &Path) -> Result<Outcome> {
    setup_workers(common)?;
    let out = out_path(common)?;
    let artifact = ModelArtifact::load(model).with_context(|| format!("model {}", model.display()))?;
    let records = load_dataset(input)?;
    let preds = pipeline::predict(&artifact, &records)?;
    write_predictions(out, &preds)?;
    write_provenance(out, "predict", serde_json::to_value(&artifact.config)?)?;
    let positive = preds.iter().filter(|p| p.prediction.is_positive()).count();
    println!("frames={} contact={}", preds.len(), positive);
    Ok(Outcome::Complete)
}

fn confusion_table(cm: &ConfusionMatrix) -> String {
    format!(
        "             pred contact  pred no_contact\ncontact      {:>12}  {:>15}\nno_contact   {:>12}  {:>15}",
        cm.tp, cm.fn_, cm.fp, cm.tn
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn print_eval(r: &EvalReport) {
    println!("mcc={:.4} tnr={}", r.mcc, fmt_opt(r.tnr));
    println!("{}", confusion_table(&r.confusion));
    for (tag, s) in &r.per_illumination {
        println!("illumination {tag:<12} mcc={:.4} tnr={} n={}", s.mcc, fmt_opt(s.tnr), s.confusion.total());
    }
}

fn print_loocv(r: &LoocvReport) {
    println!("{:<12} {:>6} {:>6} {:>8} {:>8}", "participant", "train", "test", "mcc", "tnr");
    for f in &r.folds {
        match &f.failed {
            Some(e) => println!("{:<12} {:>6} {:>6} failed: {e}", f.participant, f.train_size, f.test_size),
            None => println!(
                "{:<12} {:>6} {:>6} {:>8.4} {:>8}",
                f.participant,
                f.train_size,
                f.test_size,
                f.mcc,
                fmt_opt(f.tnr)
            ),
        }
    }
    println!("mean mcc={:.4} std={:.4} pooled tnr={}", r.mcc, r.mcc_std, fmt_opt(r.tnr));
}

fn required<'a>(p: Option<&'a Path>, flag: &str) -> Result<&'a Path> {
    p.ok_or_else(|| input_err(format!("{flag} is required for this protocol")))
}

pub fn eval(
    common: &Common,
    labeling: &LabelingFlags,
    protocol: Protocol,
    input: Option<&Path>,
    train: Option<&Path>,
    test: Option<&Path>,
    labels: LabelsArg,
) -> Result<Outcome> {
    setup_workers(common)?;
    let cfg = pipeline_config(common, Some(labeling))?;
    let source = label_source(labels);
    let (mut doc, partial) = match protocol {
        Protocol::Holdout => {
            let p = required(input, "--input")?;
            let preds = read_predictions(p).with_context(|| format!("reading {}", p.display()))?;
            let r = evaluate_predictions(&preds)?;
            print_eval(&r);
            (json!({ "protocol": "holdout", "mcc": r.mcc, "tnr": r.tnr, "confusion": r.confusion,
                     "per_illumination": r.per_illumination }), 0)
        }
        Protocol::Loocv => {
            let records = load_dataset(required(input, "--input")?)?;
            let r = loocv_by_participant(
                &records,
                |tr| pipeline::train(tr, &cfg, source),
                |m, rec| Ok(pipeline::predict_record(m, rec)?.prediction),
            )?;
            print_loocv(&r);
            let failed = r.folds.iter().filter(|f| f.failed.is_some()).count();
            (json!({ "protocol": "loocv", "mcc": r.mcc, "mcc_std": r.mcc_std, "tnr": r.tnr,
                     "confusion": r.confusion, "folds": r.folds }), failed)
        }
        Protocol::CrossDataset => {
            let tr = load_dataset(required(train, "--train")?)?;
            let te = load_dataset(required(test, "--test")?)?;
            let r = cross_dataset_eval(
                &tr,
                &te,
                |d| pipeline::train(d, &cfg, source),
                |m, rec| Ok(pipeline::predict_record(m, rec)?.prediction),
            )?;
            print_eval(&r);
            (json!({ "protocol": "cross_dataset", "mcc": r.mcc, "tnr": r.tnr, "confusion": r.confusion,
                     "per_illumination": r.per_illumination }), 0)
        }
    };
    doc["labels"] = json!(source);
    doc["config"] = serde_json::to_value(&cfg)?;
    if let Some(out) = &common.out {
        write_json(out, &doc)?;
    }
    Ok(if partial > 0 {
        Outcome::Partial(partial)
    } else {
        Outcome::Complete
    })
}

pub fn metrics(common: &Common, input: &Path) -> Result<Outcome> {
    setup_workers(common)?;
    let cfg = pipeline_config(common, None)?;
    let preds = read_predictions(input).with_context(|| format!("reading {}", input.display()))?;
    let timelines = build_timeline(&preds, cfg.max_frame_span, cfg.max_gap)?;
    let reports: Vec<_> = timelines.iter().map(|t| attention_report(t, cfg.glance_max)).collect();
    let agg = aggregate_reports(&reports, cfg.glance_max);
    println!(
        "{:<16} {:>7} {:>7} {:>7} {:>10} {:>10} {:>12}",
        "session", "glances", "e->d", "d->e", "device s", "env s", "primary"
    );
    for r in reports.iter().chain(std::iter::once(&agg)) {
        println!(
            "{:<16} {:>7} {:>7} {:>7} {:>10.2} {:>10.2} {:>12}",
            r.session_id.as_deref().unwrap_or("all"),
            r.glances,
            r.shifts_env_to_dev,
            r.shifts_dev_to_env,
            r.device.total,
            r.environment.total,
            serde_json::to_value(r.primary_focus)?.as_str().unwrap_or_default()
        );
    }
    let doc = json!({
        "attention_reports": reports,
        "aggregate": agg,
        "timelines": timelines,
        "config": serde_json::to_value(&cfg)?,
    });
    if let Some(out) = &common.out {
        write_json(out, &doc)?;
    }
    Ok(Outcome::Complete)
}

pub fn warp(common: &Common, input: &Path, index: usize, image: &Path) -> Result<Outcome> {
    let cfg = pipeline_config(common, None)?;
    let out = out_path(common)?;
    let records = load_dataset(input)?;
    let rec = records
        .get(index)
        .ok_or_else(|| input_err(format!("frame index {index} out of range ({} frames)", records.len())))?;
    let pose = rec
        .pose
        .as_ref()
        .ok_or_else(|| input_err(format!("frame {index} has no pose; run `pose` first")))?;

    let img = image::open(image).with_context(|| format!("reading {}", image.display()))?;
    let (w, h) = (img.width(), img.height());
    if (w, h) != (rec.image_w, rec.image_h) {
        return Err(input_err(format!(
            "image is {w}x{h} but the frame was recorded at {}x{}",
            rec.image_w, rec.image_h
        )));
    }
    let rgb = img.to_rgb8();
    let src = Image::new(w, h, 3, rgb.into_raw())?;

    let frame = head_frame(&pose.head_pose(), &FaceModel3D::canonical(), &LandmarkIndexMap::default())?;
    let k = default_intrinsics(rec.image_w, rec.image_h)?;
    let norm = normalization_transform(&frame, &k, &cfg.normalization, None)?;
    let n = &cfg.normalization;
    let warped = warp_image(&src, &norm.warp, n.out_width, n.out_height)?;
    let buf = image::RgbImage::from_raw(warped.width, warped.height, warped.data)
        .ok_or_else(|| anyhow!("warped buffer has the wrong size"))?;
    buf.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}x{} normalized image", n.out_width, n.out_height);
    Ok(Outcome::Complete)
}

