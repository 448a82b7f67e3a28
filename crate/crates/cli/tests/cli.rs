use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eyecontact"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn eyecontact")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Small synthetic dataset with poses, in a fresh directory.
fn posed(frames: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"participants": 2, "frames_per_session": {frames}, "seed": 9}}"#);
    std::fs::write(dir.path().join("synth.json"), cfg).unwrap();
    let o = run(dir.path(), &["synth", "--config", "synth.json", "--out", "data.jsonl"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(dir.path(), &["pose", "data.jsonl", "--out", "posed.jsonl"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["pose", "nothere.jsonl", "--out", "p.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("p.jsonl").exists());
}

#[test]
fn missing_out_flag_is_an_input_error() {
    let dir = posed(20);
    let o = run(dir.path(), &["pose", "data.jsonl"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"participantz": 1}"#).unwrap();
    let o = run(dir.path(), &["synth", "--config", "bad.json", "--out", "d.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("participantz"));

    std::fs::write(dir.path().join("pipe.json"), r#"{"no_such_option": true}"#).unwrap();
    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let o = run(dir.path(), &["pose", "empty.jsonl", "--config", "pipe.json", "--out", "p.jsonl"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn corrupt_record_gives_partial_result() {
    let dir = posed(30);
    let text = std::fs::read_to_string(dir.path().join("data.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let total = lines.len();
    lines.insert(5, "{\"session_id\": \"broken\"");
    std::fs::write(dir.path().join("bad.jsonl"), lines.join("\n") + "\n").unwrap();

    let o = run(dir.path(), &["pose", "bad.jsonl", "--out", "out.jsonl"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(dir.path().join("out.jsonl")).unwrap();
    assert_eq!(written.lines().count(), total);
    assert!(dir.path().join("out.jsonl.config.json").exists());
}

#[test]
fn single_class_ground_truth_fails_the_stage() {
    let dir = posed(30);
    let text = std::fs::read_to_string(dir.path().join("posed.jsonl")).unwrap();
    let text = text.replace("\"label\":\"no_contact\"", "\"label\":\"contact\"");
    std::fs::write(dir.path().join("one.jsonl"), text).unwrap();
    let o = run(dir.path(), &["train", "one.jsonl", "--labels", "ground-truth", "--out", "m.json"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn empty_dataset_predicts_nothing() {
    let dir = posed(150);
    let o = run(dir.path(), &["train", "posed.jsonl", "--labels", "ground-truth", "--out", "m.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let o = run(dir.path(), &["predict", "empty.jsonl", "--model", "m.json", "--out", "p.jsonl"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("p.jsonl")).unwrap(), "");
}

#[test]
fn warp_writes_normalized_png() {
    let dir = posed(20);
    let img = image::RgbImage::from_fn(640, 480, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, 128]));
    img.save(dir.path().join("frame.png")).unwrap();
    let o = run(dir.path(), &["warp", "posed.jsonl", "--index", "0", "--image", "frame.png", "--out", "n.png"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = image::open(dir.path().join("n.png")).unwrap();
    let cfg = eyecontact::NormParams::default();
    assert_eq!((out.width(), out.height()), (cfg.out_width, cfg.out_height));

    let small = image::RgbImage::new(32, 32);
    small.save(dir.path().join("small.png")).unwrap();
    let o = run(dir.path(), &["warp", "posed.jsonl", "--index", "0", "--image", "small.png", "--out", "m.png"]);
    assert_eq!(code(&o), 2);
}
