//! Synthetic sessions with known ground truth.
//!
//! Each frame draws a focus (device or environment) from a two-state Markov
//! chain, a gaze target on the camera plane, and a head pose that follows the
//! target with lag. Landmarks are projections of the face model, gaze angles
//! are expressed in the normalized space of the true pose, and features come
//! from two class-conditional Gaussians.

use nalgebra::{Matrix3, Point2, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gaze::{gaze_origin, vector_to_angles, GazeAngles};
use crate::headpose::{default_intrinsics, CameraIntrinsics, FaceModel3D, HeadPose, LandmarkIndexMap};
use crate::normalize::{head_frame, normalization_transform, NormParams};
use crate::records::{FrameRecord, Label};
use crate::{Error, Result};

/// Isotropic 2D Gaussian on the camera plane, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneTarget {
    pub mean: [f64; 2],
    pub std: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub participants: usize,
    pub sessions_per_participant: usize,
    pub frames_per_session: usize,
    /// Seconds between frames.
    pub frame_interval: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub device_target: PlaneTarget,
    pub environment_targets: Vec<PlaneTarget>,
    /// Per-frame probability of leaving the device.
    pub p_device_to_environment: f64,
    /// Per-frame probability of returning to the device.
    pub p_environment_to_device: f64,
    /// Head-to-face distance range, mm; drawn once per session.
    pub distance_range: [f64; 2],
    /// Share of the gaze direction the head turns toward.
    pub head_follow: f64,
    /// Per-frame smoothing of head motion toward its target, (0, 1].
    pub head_lag: f64,
    pub head_noise_deg: f64,
    pub roll_std_deg: f64,
    /// Share of environment episodes with the head turned beyond
    /// `extreme_range_deg`.
    pub extreme_head_share: f64,
    pub extreme_range_deg: [f64; 2],
    pub landmark_noise_px: f64,
    pub gaze_noise_deg: f64,
    /// Gaze noise once the normalized head pose exceeds 40 degrees.
    pub extreme_gaze_noise_deg: f64,
    pub feature_dim: usize,
    /// Distance between the class means in units of the noise std.
    pub feature_separation: f64,
    /// Std of a per-participant offset added to every feature vector.
    pub participant_shift: f64,
    /// Share of face frames whose detector confidence falls below 0.9.
    pub low_confidence_share: f64,
    pub no_face_share: f64,
    /// Assigned to sessions round-robin; empty for none.
    pub illumination: Vec<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            participants: 5,
            sessions_per_participant: 1,
            frames_per_session: 300,
            frame_interval: 0.2,
            image_width: 640,
            image_height: 480,
            device_target: PlaneTarget {
                mean: [0.0, 60.0],
                std: 15.0,
                weight: 1.0,
            },
            environment_targets: vec![
                PlaneTarget {
                    mean: [450.0, 300.0],
                    std: 50.0,
                    weight: 1.0,
                },
                PlaneTarget {
                    mean: [-500.0, 250.0],
                    std: 50.0,
                    weight: 1.0,
                },
            ],
            p_device_to_environment: 0.05,
            p_environment_to_device: 0.08,
            distance_range: [300.0, 500.0],
            head_follow: 0.6,
            head_lag: 0.5,
            head_noise_deg: 1.0,
            roll_std_deg: 5.0,
            extreme_head_share: 0.2,
            extreme_range_deg: [50.0, 70.0],
            landmark_noise_px: 0.5,
            gaze_noise_deg: 2.0,
            extreme_gaze_noise_deg: 20.0,
            feature_dim: 32,
            feature_separation: 6.0,
            participant_shift: 0.3,
            low_confidence_share: 0.05,
            no_face_share: 0.02,
            illumination: vec!["bright".into(), "dim".into()],
        }
    }
}

fn prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be in [0, 1], got {p}")))
    }
}

impl SynthConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.participants == 0 || self.sessions_per_participant == 0 {
            return Err(Error::Config("need at least one participant and session".into()));
        }
        if !(self.frame_interval > 0.0) {
            return Err(Error::Config("frame_interval must be positive".into()));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Config("image size must be non-zero".into()));
        }
        for (name, t) in std::iter::once(("device_target", &self.device_target))
            .chain(self.environment_targets.iter().map(|t| ("environment target", t)))
        {
            if !(t.std >= 0.0) || !t.mean.iter().all(|m| m.is_finite()) || !(t.weight > 0.0) {
                return Err(Error::Config(format!("{name}: invalid distribution")));
            }
        }
        if self.environment_targets.is_empty() {
            return Err(Error::Config("need at least one environment target".into()));
        }
        let dev = self.device_target.mean[0].hypot(self.device_target.mean[1]);
        for t in &self.environment_targets {
            let d = t.mean[0].hypot(t.mean[1]);
            if d <= dev {
                return Err(Error::Config(format!(
                    "environment target at ({}, {}) is not farther from the camera than the device",
                    t.mean[0], t.mean[1]
                )));
            }
        }
        prob("p_device_to_environment", self.p_device_to_environment)?;
        prob("p_environment_to_device", self.p_environment_to_device)?;
        prob("extreme_head_share", self.extreme_head_share)?;
        prob("low_confidence_share", self.low_confidence_share)?;
        prob("no_face_share", self.no_face_share)?;
        prob("head_follow", self.head_follow)?;
        if !(self.head_lag > 0.0 && self.head_lag <= 1.0) {
            return Err(Error::Config("head_lag must be in (0, 1]".into()));
        }
        let [lo, hi] = self.distance_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config("distance_range must be positive and ordered".into()));
        }
        let [lo, hi] = self.extreme_range_deg;
        if !(lo >= 0.0 && hi >= lo && hi < 90.0) {
            return Err(Error::Config("extreme_range_deg must be ordered within [0, 90)".into()));
        }
        for (name, v) in [
            ("landmark_noise_px", self.landmark_noise_px),
            ("gaze_noise_deg", self.gaze_noise_deg),
            ("extreme_gaze_noise_deg", self.extreme_gaze_noise_deg),
            ("head_noise_deg", self.head_noise_deg),
            ("roll_std_deg", self.roll_std_deg),
            ("feature_separation", self.feature_separation),
            ("participant_shift", self.participant_shift),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Hidden per-frame truth, aligned with the generated records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub session_id: String,
    pub t: f64,
    pub label: Label,
    /// Gaze target on the camera plane, mm.
    pub target: [f64; 2],
    /// Row-major model-to-camera rotation.
    pub head_rotation: [f64; 9],
    pub head_translation: [f64; 3],
    pub face_detected: bool,
}

pub struct SynthDataset {
    pub records: Vec<FrameRecord>,
    pub truth: Vec<TruthRecord>,
}

/// Rotation whose facing direction (model −z) points along the gaze-convention
/// angles, with an extra roll about the facing axis.
pub fn facing_rotation(pitch: f64, yaw: f64, roll: f64) -> Matrix3<f64> {
    let r = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), -pitch)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
    *r.matrix()
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std
}

fn sample_target(rng: &mut ChaCha8Rng, t: &PlaneTarget) -> Vector3<f64> {
    Vector3::new(t.mean[0] + gauss(rng, t.std), t.mean[1] + gauss(rng, t.std), 0.0)
}

fn project_landmarks(
    model: &FaceModel3D<f64>,
    pose: &HeadPose<f64>,
    k: &CameraIntrinsics<f64>,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Point2<f64>>> {
    model
        .points()
        .iter()
        .map(|p| {
            k.project(&pose.transform(p))
                .map(|q| Point2::new(q.x + gauss(rng, noise), q.y + gauss(rng, noise)))
        })
        .collect()
}

struct Shared {
    model: FaceModel3D<f64>,
    map: LandmarkIndexMap,
    k: CameraIntrinsics<f64>,
    norm: NormParams<f64>,
    /// Unit direction separating the two feature classes.
    feature_axis: Vec<f64>,
    participant_offsets: Vec<Vec<f64>>,
}

/// Generates every session of `config`. Output is a pure function of the
/// config, independent of thread count.
pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.feature_dim;
    let mut axis: Vec<f64> = (0..d).map(|_| gauss(&mut rng, 1.0)).collect();
    let n = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    axis.iter_mut().for_each(|v| *v /= n);
    let participant_offsets = (0..config.participants)
        .map(|_| (0..d).map(|_| gauss(&mut rng, config.participant_shift)).collect())
        .collect();
    let shared = Shared {
        model: FaceModel3D::canonical(),
        map: LandmarkIndexMap::default(),
        k: default_intrinsics(config.image_width, config.image_height)?,
        norm: NormParams::default(),
        feature_axis: axis,
        participant_offsets,
    };

    let jobs: Vec<(usize, usize)> = (0..config.participants)
        .flat_map(|p| (0..config.sessions_per_participant).map(move |s| (p, s)))
        .collect();
    let sessions: Vec<(Vec<FrameRecord>, Vec<TruthRecord>)> = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(p, s))| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(idx as u64 + 1);
            generate_session(config, &shared, p, s, idx, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut truth = Vec::new();
    for (r, t) in sessions {
        records.extend(r);
        truth.extend(t);
    }
    Ok(SynthDataset { records, truth })
}

fn generate_session(
    cfg: &SynthConfig,
    sh: &Shared,
    participant: usize,
    session: usize,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<FrameRecord>, Vec<TruthRecord>)> {
    let pid = format!("p{participant:02}");
    let sid = format!("{pid}-s{session:02}");
    let illumination = (!cfg.illumination.is_empty()).then(|| cfg.illumination[index % cfg.illumination.len()].clone());
    let deg = std::f64::consts::PI / 180.0;
    let env_total: f64 = cfg.environment_targets.iter().map(|t| t.weight).sum();

    let distance = rng.random_range(cfg.distance_range[0]..=cfg.distance_range[1]);
    let base_t = Vector3::new(gauss(rng, 20.0), gauss(rng, 20.0), distance);

    let mut on_device = true;
    let mut env_target = 0usize;
    let mut extreme: Option<(f64, f64)> = None;
    let mut head = (0.0f64, 0.0f64);
    let mut records = Vec::with_capacity(cfg.frames_per_session);
    let mut truth = Vec::with_capacity(cfg.frames_per_session);

    for f in 0..cfg.frames_per_session {
        let t = f as f64 * cfg.frame_interval;
        if f > 0 {
            let switch = if on_device { cfg.p_device_to_environment } else { cfg.p_environment_to_device };
            if rng.random::<f64>() < switch {
                on_device = !on_device;
                if !on_device {
                    let mut u = rng.random::<f64>() * env_total;
                    env_target = cfg.environment_targets.len() - 1;
                    for (i, tg) in cfg.environment_targets.iter().enumerate() {
                        if u < tg.weight {
                            env_target = i;
                            break;
                        }
                        u -= tg.weight;
                    }
                    extreme = (rng.random::<f64>() < cfg.extreme_head_share).then(|| {
                        let [lo, hi] = cfg.extreme_range_deg;
                        (0.3 * rng.random_range(lo..=hi) * deg, rng.random_range(lo..=hi) * deg)
                    });
                }
            }
        }
        let label = Label::from_positive(on_device);
        let target = if on_device {
            sample_target(rng, &cfg.device_target)
        } else {
            sample_target(rng, &cfg.environment_targets[env_target])
        };

        let translation = base_t + Vector3::new(gauss(rng, 3.0), gauss(rng, 3.0), gauss(rng, 5.0));
        let to_target = vector_to_angles(&(target - translation))?;
        let goal = match extreme {
            Some((ep, ey)) if !on_device => (
                ep.copysign(to_target.pitch),
                ey.copysign(if to_target.yaw == 0.0 { 1.0 } else { to_target.yaw }),
            ),
            _ => (cfg.head_follow * to_target.pitch, cfg.head_follow * to_target.yaw),
        };
        head.0 += cfg.head_lag * (goal.0 - head.0);
        head.1 += cfg.head_lag * (goal.1 - head.1);
        let roll = gauss(rng, cfg.roll_std_deg * deg);
        let rotation = facing_rotation(
            head.0 + gauss(rng, cfg.head_noise_deg * deg),
            head.1 + gauss(rng, cfg.head_noise_deg * deg),
            roll,
        );
        let pose = HeadPose::new(rotation, translation);

        let face = rng.random::<f64>() >= cfg.no_face_share;
        let landmarks = if face { project_landmarks(&sh.model, &pose, &sh.k, cfg.landmark_noise_px, rng) } else { None };
        let face = face && landmarks.is_some();
        let label = if face { label } else { Label::NoContact };

        let mut rec = FrameRecord::no_face(&sid, &pid, t, cfg.image_width, cfg.image_height);
        rec.label = Some(label);
        rec.illumination = illumination.clone();
        if face {
            let frame = head_frame(&pose, &sh.model, &sh.map)?;
            let origin = gaze_origin(&pose, &sh.model, &sh.map);
            let dir = target - origin;
            let nr = normalization_transform(&frame, &sh.k, &sh.norm, Some(&dir))?;
            let g = nr.gaze_n.expect("gaze direction supplied");
            let lim = 40.0 * deg;
            let noise = if nr.headpose_n.pitch.abs() > lim || nr.headpose_n.yaw.abs() > lim {
                cfg.extreme_gaze_noise_deg
            } else {
                cfg.gaze_noise_deg
            } * deg;
            let gaze = GazeAngles::new(
                (g.pitch + gauss(rng, noise)).clamp(-1.5, 1.5),
                g.yaw + gauss(rng, noise),
            );

            let sign = if on_device { 0.5 } else { -0.5 };
            let offset = &sh.participant_offsets[participant];
            let features = (0..cfg.feature_dim)
                .map(|i| sign * cfg.feature_separation * sh.feature_axis[i] + offset[i] + gauss(rng, 1.0))
                .collect();
            let confidence = if rng.random::<f64>() < cfg.low_confidence_share {
                rng.random_range(0.3..0.9)
            } else {
                rng.random_range(0.9..=1.0)
            };

            rec.face_detected = true;
            rec.face_confidence = Some(confidence);
            rec.landmarks = landmarks;
            rec.features = Some(features);
            rec.gaze = Some(gaze);
        }
        let r = pose.rotation;
        truth.push(TruthRecord {
            session_id: sid.clone(),
            t,
            label,
            target: [target.x, target.y],
            head_rotation: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            head_translation: [translation.x, translation.y, translation.z],
            face_detected: face,
        });
        records.push(rec);
    }
    Ok((records, truth))
}

/// Random poses of the bundled face model with their landmark projections.
pub struct PoseScene {
    pub model: FaceModel3D<f64>,
    pub intrinsics: CameraIntrinsics<f64>,
    pub poses: Vec<HeadPose<f64>>,
    pub landmarks: Vec<Vec<Point2<f64>>>,
}

/// `n` poses with pitch, yaw and roll uniform in ±60°, depth uniform in
/// [200, 800] mm and the face kept near the optical axis; landmarks carry
/// Gaussian noise of `noise_px`.
pub fn generate_pose_scene(n: usize, noise_px: f64, seed: u64) -> PoseScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = FaceModel3D::canonical();
    let k = default_intrinsics(640, 480).expect("non-zero size");
    let noise = Normal::new(0.0, noise_px.max(0.0)).expect("finite std");
    let mut poses = Vec::with_capacity(n);
    let mut landmarks = Vec::with_capacity(n);
    while poses.len() < n {
        let [p, y, r] = [0; 3].map(|_| rng.random_range(-60.0f64..=60.0).to_radians());
        let z = rng.random_range(200.0..=800.0);
        let t = Vector3::new(rng.random_range(-0.2..=0.2) * z, rng.random_range(-0.15..=0.15) * z, z);
        let pose = HeadPose::new(facing_rotation(p, y, r), t);
        let pts: Option<Vec<_>> = model
            .points()
            .iter()
            .map(|m| k.project(&pose.transform(m)).map(|q| Point2::new(q.x + noise.sample(&mut rng), q.y + noise.sample(&mut rng))))
            .collect();
        if let Some(pts) = pts {
            poses.push(pose);
            landmarks.push(pts);
        }
    }
    PoseScene {
        model,
        intrinsics: k,
        poses,
        landmarks,
    }
}

/// Gaze-convention angles of the head facing direction in camera space.
pub fn facing_angles(rotation: &Matrix3<f64>) -> GazeAngles<f64> {
    vector_to_angles(&(rotation * Vector3::new(0.0, 0.0, -1.0))).expect("unit vector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::angles_to_vector;
    use approx::assert_relative_eq;

    #[test]
    fn facing_rotation_matches_gaze_convention() {
        for (p, y) in [(0.0, 0.0), (0.3, -0.2), (-0.5, 0.9)] {
            let r = facing_rotation(p, y, 0.4);
            assert_relative_eq!(r * Vector3::new(0.0, 0.0, -1.0), angles_to_vector(&GazeAngles::new(p, y)), epsilon = 1e-12);
            let a = facing_angles(&r);
            assert_relative_eq!(a.pitch, p, epsilon = 1e-12);
            assert_relative_eq!(a.yaw, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn records_valid_and_truth_aligned() {
        let cfg = SynthConfig {
            participants: 2,
            frames_per_session: 120,
            ..Default::default()
        };
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.records.len(), 240);
        assert_eq!(ds.truth.len(), ds.records.len());
        for (r, t) in ds.records.iter().zip(&ds.truth) {
            r.validate().unwrap();
            assert_eq!(r.label, Some(t.label));
            assert_eq!((r.session_id.as_str(), r.t), (t.session_id.as_str(), t.t));
            assert_eq!(r.face_detected, t.face_detected);
        }
        assert!(ds.truth.iter().any(|t| t.label == Label::Contact));
        assert!(ds.truth.iter().any(|t| t.label == Label::NoContact));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig {
            frames_per_session: 50,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        let c = generate(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn all_no_face() {
        let ds = generate(&SynthConfig {
            no_face_share: 1.0,
            participants: 1,
            frames_per_session: 20,
            ..Default::default()
        })
        .unwrap();
        assert!(ds.records.iter().all(|r| !r.face_detected && r.label == Some(Label::NoContact)));
    }

    #[test]
    fn infeasible_configs() {
        let mut cfg = SynthConfig::default();
        cfg.environment_targets[0].mean = [0.0, 0.0];
        assert!(generate(&cfg).is_err());
        assert!(generate(&SynthConfig { feature_separation: -1.0, ..Default::default() }).is_err());
        assert!(SynthConfig::from_json(r#"{"participants": 2, "bogus": 1}"#).is_err());
    }

    #[test]
    fn pose_scene_projects() {
        let s = generate_pose_scene(5, 0.0, 3);
        assert_eq!(s.poses.len(), 5);
        for (pose, lm) in s.poses.iter().zip(&s.landmarks) {
            let back = s.intrinsics.project(&pose.transform(&s.model.point(30))).unwrap();
            assert_relative_eq!(back, lm[30], epsilon = 1e-9);
        }
    }
}
