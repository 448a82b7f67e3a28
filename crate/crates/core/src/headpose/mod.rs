//! Head pose from 68 landmarks: EPnP initialisation, Levenberg-Marquardt
//! refinement and constant-velocity Kalman smoothing.

mod epnp;
mod kalman;
mod model;
mod refine;

pub use epnp::solve_epnp;
pub use kalman::{kalman_step, KalmanParams, KalmanState};
pub use model::{FaceModel3D, LandmarkIndexMap, NUM_LANDMARKS};
pub use refine::{refine_lm, LmParams};

use nalgebra::{Matrix3, Point2, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self> {
        if !(fx > T::zero() && fy > T::zero()) || !(fx.finite() && fy.finite()) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn matrix(&self) -> Matrix3<T> {
        let (o, l) = (T::zero(), T::one());
        Matrix3::new(self.fx, o, self.cx, o, self.fy, self.cy, o, o, l)
    }

    pub fn inverse_matrix(&self) -> Matrix3<T> {
        let (o, l) = (T::zero(), T::one());
        Matrix3::new(
            l / self.fx,
            o,
            -self.cx / self.fx,
            o,
            l / self.fy,
            -self.cy / self.fy,
            o,
            o,
            l,
        )
    }

    /// Projects a camera-space point. `None` when the point is not in front
    /// of the camera.
    pub fn project(&self, p: &Vector3<T>) -> Option<Point2<T>> {
        if p.z <= T::zero() {
            return None;
        }
        Some(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Pixel to normalized image coordinates (z = 1 plane).
    pub fn unproject(&self, px: &Point2<T>) -> Vector2<T> {
        Vector2::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy)
    }
}

/// Stand-in intrinsics for an uncalibrated camera: focal length equal to the
/// image width, principal point at the pixel-grid centre.
pub fn default_intrinsics<T: Real>(width: u32, height: u32) -> Result<CameraIntrinsics<T>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "image size must be non-zero, got {width}x{height}"
        )));
    }
    let w = T::lit(width as f64);
    let h = T::lit(height as f64);
    let half = T::lit(0.5);
    CameraIntrinsics::new(w, w, (w - T::one()) * half, (h - T::one()) * half)
}

/// Rigid model-to-camera transform, translation in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
    pub reprojection_rmse: T,
}

impl<T: Real> HeadPose<T> {
    /// Pose with the reprojection error left at zero; see [`HeadPose::with_rmse`].
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
            reprojection_rmse: T::zero(),
        }
    }

    pub fn from_rotation_vector(rvec: Vector3<T>, translation: Vector3<T>) -> Self {
        Self::new(*Rotation3::from_scaled_axis(rvec).matrix(), translation)
    }

    pub fn rotation_vector(&self) -> Vector3<T> {
        Rotation3::from_matrix_unchecked(self.rotation).scaled_axis()
    }

    /// Model point to camera coordinates.
    pub fn transform(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    /// Recomputes `reprojection_rmse` against the given landmarks.
    pub fn with_rmse(
        mut self,
        model: &FaceModel3D<T>,
        landmarks: &[Point2<T>],
        k: &CameraIntrinsics<T>,
    ) -> Self {
        self.reprojection_rmse = reprojection_rmse(&self, model.points(), landmarks, k);
        self
    }

    /// Largest entry of |RᵀR − I|.
    pub fn orthonormality_error(&self) -> T {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }
}

/// Root-mean-square pixel distance between projected model points and
/// landmarks. Points behind the camera count as infinitely far.
pub fn reprojection_rmse<T: Real>(
    pose: &HeadPose<T>,
    model: &[Vector3<T>],
    landmarks: &[Point2<T>],
    k: &CameraIntrinsics<T>,
) -> T {
    if model.is_empty() {
        return T::zero();
    }
    let mut sum = T::zero();
    for (p, l) in model.iter().zip(landmarks) {
        match k.project(&pose.transform(p)) {
            Some(q) => sum += (q - l).norm_squared(),
            None => return T::lit(f64::INFINITY),
        }
    }
    (sum / T::from_count(model.len())).sqrt()
}

/// Geodesic angle between two rotations, radians.
pub fn rotation_angle_between<T: Real>(a: &Matrix3<T>, b: &Matrix3<T>) -> T {
    let rel = a.transpose() * b;
    let c = ((rel.trace() - T::one()) * T::lit(0.5)).clamp(-T::one(), T::one());
    c.acos()
}

/// Closest rotation matrix (polar decomposition via SVD) with det = +1.
pub fn orthonormalize<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut r = u * v_t;
    if r.determinant() < T::zero() {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -T::one();
        r = u * d * v_t;
    }
    r
}

/// Rotation from intrinsic pitch (about x), yaw (about y) and roll (about z),
/// applied as Rz·Ry·Rx. Degrees in, matrix out.
pub fn rotation_from_euler_deg<T: Real>(pitch: T, yaw: T, roll: T) -> Matrix3<T> {
    let d = T::pi() / T::lit(180.0);
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), roll * d)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), yaw * d)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch * d);
    *r.matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_intrinsics_values() {
        let k = default_intrinsics::<f64>(640, 480).unwrap();
        assert_eq!((k.fx, k.fy, k.cx, k.cy), (640.0, 640.0, 319.5, 239.5));
        let k = default_intrinsics::<f64>(1, 1).unwrap();
        assert_eq!((k.fx, k.cx, k.cy), (1.0, 0.0, 0.0));
        assert!(default_intrinsics::<f64>(0, 480).is_err());
        assert!(default_intrinsics::<f32>(640, 0).is_err());
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let k = default_intrinsics::<f64>(640, 480).unwrap();
        let p = k.project(&Vector3::new(0.0, 0.0, 300.0)).unwrap();
        assert_eq!((p.x, p.y), (319.5, 239.5));
        assert!(k.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn inverse_matrix_is_inverse() {
        let k = CameraIntrinsics::new(500.0, 520.0, 310.0, 250.0).unwrap();
        let prod = k.matrix() * k.inverse_matrix();
        assert_relative_eq!(prod, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn orthonormalize_fixes_drift() {
        let r = rotation_from_euler_deg::<f64>(10.0, -20.0, 5.0);
        let noisy = r + Matrix3::from_element(1e-4);
        let fixed = orthonormalize(&noisy);
        let p = HeadPose::new(fixed, Vector3::zeros());
        assert!(p.orthonormality_error() < 1e-12);
        assert!((fixed.determinant() - 1.0).abs() < 1e-12);
        assert!(rotation_angle_between(&r, &fixed) < 1e-3);
    }

    #[test]
    fn rotation_vector_roundtrip() {
        let r = rotation_from_euler_deg(30.0, 45.0, -10.0);
        let p = HeadPose::new(r, Vector3::new(1.0, 2.0, 3.0));
        let q = HeadPose::from_rotation_vector(p.rotation_vector(), p.translation);
        assert_relative_eq!(p.rotation, q.rotation, epsilon = 1e-12);
    }
}
