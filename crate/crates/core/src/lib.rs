//! Unsupervised eye-contact detection for front-facing mobile cameras.
//!
//! The crate turns per-frame observations (68 facial landmarks, a detector
//! confidence, an appearance feature vector and an optional gaze estimate)
//! into an eye-contact classifier without manual labels:
//!
//! 1. [`headpose`] fits a generic 3D face model to the landmarks (EPnP,
//!    Levenberg-Marquardt refinement, constant-velocity Kalman smoothing).
//! 2. [`normalize`] builds the head coordinate frame and the rotation into a
//!    virtual camera looking straight at the face.
//! 3. [`gaze`] swaps the gaze estimate for the head direction at extreme head
//!    poses and intersects the result with the camera plane.
//! 4. [`labeling`] clusters the on-plane gaze points with OPTICS and marks the
//!    cluster nearest the camera as eye contact.
//! 5. [`classify`] reduces features with PCA and trains a class-weighted
//!    linear SVM on those labels.
//!
//! [`metrics`] holds the evaluation protocols and attention analytics,
//! [`synth`] a synthetic session generator with hidden ground truth, and
//! [`pipeline`] the stage wiring shared by the command-line tool.
//!
//! Geometry and learning code is generic over [`Real`] (`f32` or `f64`); the
//! aliases re-exported here fix the scalar to `f64`, which is what the data
//! files and the pipeline use.

// Validation uses `!(x > 0.0)` so that NaN is rejected along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod config;
pub mod error;
pub mod gaze;
pub mod headpose;
pub mod labeling;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod records;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub use config::PipelineConfig;
pub use records::{FrameRecord, Label, ModelArtifact, PoseAnnotation};

pub type CameraIntrinsics = headpose::CameraIntrinsics<f64>;
pub type FaceModel3D = headpose::FaceModel3D<f64>;
pub type HeadPose = headpose::HeadPose<f64>;
pub type KalmanState = headpose::KalmanState<f64>;
pub type KalmanParams = headpose::KalmanParams<f64>;
pub type HeadFrame = normalize::HeadFrame<f64>;
pub type NormParams = normalize::NormParams<f64>;
pub type NormalizationResult = normalize::NormalizationResult<f64>;
pub type GazeAngles = gaze::GazeAngles<f64>;
pub type GazePoint2D = gaze::GazePoint2D<f64>;
pub type ClusterAssignment = labeling::ClusterAssignment<f64>;
pub type PcaModel = classify::PcaModel<f64>;
pub type SvmModel = classify::SvmModel<f64>;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
