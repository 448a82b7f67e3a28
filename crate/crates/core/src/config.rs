//! Every tunable of the pipeline in one JSON-serializable struct.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::SvmParams;
use crate::gaze::IntersectionPlane;
use crate::headpose::{KalmanParams, LmParams};
use crate::labeling::OpticsParams;
use crate::normalize::NormParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Head-pose pitch limit in normalized space, degrees.
    pub threshold_pitch_deg: f64,
    /// Head-pose yaw limit in normalized space, degrees.
    pub threshold_yaw_deg: f64,
    /// Frames below this face-detector confidence are left out of training.
    pub confidence_threshold: f64,
    pub intersection_plane: IntersectionPlane,
    pub optics: OpticsParams,
    /// Fraction of variance the PCA subspace keeps.
    pub pca_retain: f64,
    pub svm: SvmParams,
    pub normalization: NormParams<f64>,
    pub lm: LmParams,
    pub use_kalman: bool,
    pub kalman: KalmanParams<f64>,
    /// Longest device block still counted as a glance, seconds.
    pub glance_max: f64,
    /// Longest time a single frame's prediction is held, seconds.
    pub max_frame_span: f64,
    /// Sampling gaps longer than this split a timeline, seconds.
    pub max_gap: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold_pitch_deg: 40.0,
            threshold_yaw_deg: 40.0,
            confidence_threshold: 0.9,
            intersection_plane: IntersectionPlane::Camera,
            optics: OpticsParams::default(),
            pca_retain: 0.95,
            svm: SvmParams::default(),
            normalization: NormParams::default(),
            lm: LmParams::default(),
            use_kalman: true,
            kalman: KalmanParams::default(),
            glance_max: 1.5,
            max_frame_span: 1.0,
            max_gap: 30.0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let angle_ok = |v: f64| v > 0.0 && v <= 180.0;
        if !angle_ok(self.threshold_pitch_deg) || !angle_ok(self.threshold_yaw_deg) {
            return Err(Error::Config("head-pose thresholds must be in (0, 180] degrees".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Config("confidence_threshold must be in [0, 1]".into()));
        }
        if !(self.pca_retain > 0.0 && self.pca_retain <= 1.0) {
            return Err(Error::Config("pca_retain must be in (0, 1]".into()));
        }
        if !(self.glance_max > 0.0 && self.max_frame_span > 0.0 && self.max_gap > 0.0) {
            return Err(Error::Config("timeline durations must be positive".into()));
        }
        if self.lm.max_iters == 0 || !(self.lm.tol > 0.0) || !(self.lm.lambda0 > 0.0) {
            return Err(Error::Config("lm parameters must be positive".into()));
        }
        self.optics.validate()?;
        self.svm.validate()?;
        self.normalization.validate()?;
        self.kalman.validate()?;
        Ok(())
    }

    pub fn threshold_pitch(&self) -> f64 {
        self.threshold_pitch_deg.to_radians()
    }

    pub fn threshold_yaw(&self) -> f64 {
        self.threshold_yaw_deg.to_radians()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_published_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.threshold_pitch_deg, 40.0);
        assert_eq!(c.threshold_yaw_deg, 40.0);
        assert_eq!(c.confidence_threshold, 0.9);
        assert_eq!(c.pca_retain, 0.95);
        assert_eq!(c.normalization.focal_norm, 960.0);
        assert_eq!(c.normalization.distance_norm, 300.0);
        assert_eq!((c.normalization.out_width, c.normalization.out_height), (448, 448));
        c.validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = PipelineConfig::from_json(r#"{"threshold_pitch_deg": 30, "svm": {"c": 2.0}}"#).unwrap();
        assert_eq!(c.threshold_pitch_deg, 30.0);
        assert_eq!(c.svm.c, 2.0);
        assert_eq!(c.svm.max_epochs, 1000);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_json(r#"{"threshold": 30}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"optics": {"eps": 3}}"#).is_err());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(PipelineConfig::from_json(r#"{"confidence_threshold": 1.5}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"pca_retain": 0}"#).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
