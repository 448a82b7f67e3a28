//! Gaze angle conventions, adaptive head-pose thresholding and the
//! intersection of gaze rays with the camera plane.
//!
//! Angles follow the (pitch, yaw) convention of appearance-based gaze
//! datasets: a gaze straight into the camera is (0, 0) and points along −z,
//! positive pitch looks up (−y in camera coordinates), positive yaw looks
//! toward −x.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::headpose::{FaceModel3D, HeadPose, LandmarkIndexMap};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazeAngles<T: Real> {
    pub pitch: T,
    pub yaw: T,
}

impl<T: Real> GazeAngles<T> {
    pub fn new(pitch: T, yaw: T) -> Self {
        Self { pitch, yaw }
    }

    pub fn from_degrees(pitch: T, yaw: T) -> Self {
        let d = T::pi() / T::lit(180.0);
        Self::new(pitch * d, yaw * d)
    }
}

/// Millimetres in the z = 0 plane of a camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GazePoint2D<T: Real> {
    pub x: T,
    pub y: T,
}

impl<T: Real> GazePoint2D<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn dist(&self, o: &Self) -> T {
        let (dx, dy) = (self.x - o.x, self.y - o.y);
        (dx * dx + dy * dy).sqrt()
    }
}

pub fn angles_to_vector<T: Real>(g: &GazeAngles<T>) -> Vector3<T> {
    let (sp, cp) = g.pitch.sin_cos();
    let (sy, cy) = g.yaw.sin_cos();
    Vector3::new(-cp * sy, -sp, -cp * cy)
}

pub fn vector_to_angles<T: Real>(v: &Vector3<T>) -> Result<GazeAngles<T>> {
    let n = v.norm();
    if !(n > T::zero()) || !n.finite() {
        return Err(Error::InvalidInput("gaze vector must be non-zero and finite".into()));
    }
    let u = v / n;
    let pitch = (-u.y).clamp(-T::one(), T::one()).asin();
    // Yaw is undefined straight up or down; report 0 there.
    let yaw = if u.x == T::zero() && u.z == T::zero() { T::zero() } else { (-u.x).atan2(-u.z) };
    Ok(GazeAngles::new(pitch, yaw))
}

/// Which signal the effective gaze direction came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeSource {
    Gaze,
    HeadPoseProxy,
}

/// Substitutes the head direction for the gaze estimate when the head pose
/// leaves the closed box |pitch| ≤ `max_pitch`, |yaw| ≤ `max_yaw`, or when no
/// gaze estimate exists. All angles in normalized camera space, radians.
pub fn apply_threshold<T: Real>(
    gaze_n: Option<GazeAngles<T>>,
    headpose_n: GazeAngles<T>,
    max_pitch: T,
    max_yaw: T,
) -> (GazeAngles<T>, GazeSource) {
    match gaze_n {
        Some(g) if headpose_n.pitch.abs() <= max_pitch && headpose_n.yaw.abs() <= max_yaw => {
            (g, GazeSource::Gaze)
        }
        _ => (headpose_n, GazeSource::HeadPoseProxy),
    }
}

/// Camera-space midpoint between the two eye midpoints.
pub fn gaze_origin<T: Real>(
    pose: &HeadPose<T>,
    model: &FaceModel3D<T>,
    map: &LandmarkIndexMap,
) -> Vector3<T> {
    let [re, le, _] = map.midpoints(model.points());
    pose.transform(&((re + le) * T::lit(0.5)))
}

/// Intersects the ray `origin + s·dir`, s > 0, with the plane z = 0.
pub fn intersect_plane<T: Real>(origin: &Vector3<T>, dir: &Vector3<T>) -> Result<GazePoint2D<T>> {
    if dir.z == T::zero() {
        return Err(Error::NoIntersection);
    }
    let s = -origin.z / dir.z;
    if !(s > T::zero()) || !s.finite() {
        return Err(Error::NoIntersection);
    }
    let p = origin + dir * s;
    Ok(GazePoint2D::new(p.x, p.y))
}

/// Which z = 0 plane the effective gaze is intersected with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionPlane {
    /// The real camera: the normalized-space direction is rotated back by rotᵀ.
    #[default]
    Camera,
    /// The normalized camera: origin rotated forward by rot.
    Normalized,
}

/// On-plane gaze location from a normalized-space direction, the
/// camera-space gaze origin and the normalization rotation.
pub fn on_plane_point<T: Real>(
    effective_n: &GazeAngles<T>,
    norm_rot: &Matrix3<T>,
    origin: &Vector3<T>,
    plane: IntersectionPlane,
) -> Result<GazePoint2D<T>> {
    let dir_n = angles_to_vector(effective_n);
    match plane {
        IntersectionPlane::Camera => intersect_plane(origin, &(norm_rot.transpose() * dir_n)),
        IntersectionPlane::Normalized => intersect_plane(&(norm_rot * origin), &dir_n),
    }
}
