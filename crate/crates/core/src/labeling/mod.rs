//! Label generation without annotations: confidence filtering, OPTICS on
//! on-plane gaze points, and the device cluster nearest the camera.

mod optics;

pub use optics::{optics_cluster, ClusterAssignment};

use serde::{Deserialize, Serialize};

use crate::records::{FrameRecord, Label};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsParams {
    /// `None`: max(10, 1% of the point count).
    pub min_pts: Option<usize>,
    /// `None`: unbounded neighbourhood.
    pub max_eps: Option<f64>,
    pub xi: f64,
    /// Smallest extracted cluster as a fraction of the point count; never
    /// below `min_pts`.
    pub min_cluster_fraction: f64,
    /// Leave noise points out of training instead of labelling them negative.
    pub drop_noise: bool,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            min_pts: None,
            max_eps: None,
            xi: 0.25,
            min_cluster_fraction: 0.05,
            drop_noise: false,
        }
    }
}

impl OpticsParams {
    pub fn min_pts_for(&self, n: usize) -> usize {
        self.min_pts.unwrap_or_else(|| 10.max(n / 100))
    }

    pub fn min_cluster_size_for(&self, n: usize) -> usize {
        let frac = (self.min_cluster_fraction * n as f64).ceil() as usize;
        frac.max(self.min_pts_for(n))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::Config(format!("optics.xi must be in (0, 1), got {}", self.xi)));
        }
        if matches!(self.min_pts, Some(m) if m < 2) {
            return Err(Error::Config("optics.min_pts must be at least 2".into()));
        }
        if matches!(self.max_eps, Some(e) if !(e > 0.0)) {
            return Err(Error::Config("optics.max_eps must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.min_cluster_fraction) {
            return Err(Error::Config("optics.min_cluster_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// Runs OPTICS with the defaults resolved for `points.len()`.
    pub fn cluster<T: Real>(&self, points: &[crate::gaze::GazePoint2D<T>]) -> Result<ClusterAssignment<T>> {
        let n = points.len();
        optics_cluster(
            points,
            self.min_pts_for(n),
            T::lit(self.max_eps.unwrap_or(f64::INFINITY)),
            T::lit(self.xi),
            self.min_cluster_size_for(n),
        )
    }
}

/// Indices of records with a detected face and confidence ≥ `tau`.
pub fn filter_confidence(records: &[FrameRecord], tau: f64) -> Vec<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.face_detected && r.face_confidence.is_some_and(|c| c >= tau))
        .map(|(i, _)| i)
        .collect()
}

/// Cluster whose centroid is nearest the camera-plane origin. Ties go to
/// the larger cluster, then the lower id.
pub fn select_device_cluster<T: Real>(a: &ClusterAssignment<T>) -> Result<usize> {
    (0..a.num_clusters())
        .min_by(|&i, &j| {
            let (ni, nj) = (a.centroids[i].norm(), a.centroids[j].norm());
            ni.partial_cmp(&nj)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.sizes[j].cmp(&a.sizes[i]))
                .then(i.cmp(&j))
        })
        .ok_or(Error::NoDeviceCluster)
}

/// Contact for device-cluster members, no-contact for every other point
/// including noise.
pub fn assign_labels<T: Real>(a: &ClusterAssignment<T>, device_cluster: usize) -> Vec<Label> {
    a.labels
        .iter()
        .map(|l| Label::from_positive(*l == Some(device_cluster)))
        .collect()
}
