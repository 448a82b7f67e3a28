//! Head coordinate frame and the normalization into a virtual camera that
//! sits at a fixed distance, looks straight at the face centre and cancels
//! head roll.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::gaze::{vector_to_angles, GazeAngles};
use crate::headpose::{CameraIntrinsics, FaceModel3D, HeadPose, LandmarkIndexMap};
use crate::{Error, Real, Result};

/// Head frame in camera coordinates. The origin is the centroid of the two
/// eye midpoints and the mouth midpoint; x runs from the subject's right eye
/// to the left eye, y from the eyes toward the mouth, z = x × y points to the
/// back of the head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadFrame<T: Real> {
    pub origin: Vector3<T>,
    pub x_axis: Vector3<T>,
    pub y_axis: Vector3<T>,
    pub z_axis: Vector3<T>,
}

impl<T: Real> HeadFrame<T> {
    /// Facing direction (−z), i.e. the head's stand-in for gaze.
    pub fn facing(&self) -> Vector3<T> {
        -self.z_axis
    }
}

pub fn head_frame<T: Real>(
    pose: &HeadPose<T>,
    model: &FaceModel3D<T>,
    map: &LandmarkIndexMap,
) -> Result<HeadFrame<T>> {
    let [re, le, mo] = map.midpoints(model.points());
    head_frame_from_midpoints(&pose.transform(&re), &pose.transform(&le), &pose.transform(&mo))
}

/// Frame from camera-space right-eye, left-eye and mouth midpoints.
pub fn head_frame_from_midpoints<T: Real>(
    right_eye: &Vector3<T>,
    left_eye: &Vector3<T>,
    mouth: &Vector3<T>,
) -> Result<HeadFrame<T>> {
    let origin = (right_eye + left_eye + mouth) / T::lit(3.0);
    let across = left_eye - right_eye;
    let span = across.norm();
    if !(span > T::zero()) {
        return Err(Error::Degenerate("eye midpoints coincide".into()));
    }
    let x = across / span;
    let down = mouth - (right_eye + left_eye) * T::lit(0.5);
    let perp = down - x * down.dot(&x);
    // Collinear when the mouth offset has no component off the eye line.
    if !(perp.norm() > span * T::lit(1e-9)) {
        return Err(Error::Degenerate("eye and mouth midpoints are collinear".into()));
    }
    let y = perp.normalize();
    let z = x.cross(&y);
    Ok(HeadFrame {
        origin,
        x_axis: x,
        y_axis: y,
        z_axis: z,
    })
}

/// Virtual camera of the normalized space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormParams<T: Real> {
    /// px
    pub focal_norm: T,
    /// mm
    pub distance_norm: T,
    pub out_width: u32,
    pub out_height: u32,
}

impl<T: Real> Default for NormParams<T> {
    fn default() -> Self {
        Self {
            focal_norm: T::lit(960.0),
            distance_norm: T::lit(300.0),
            out_width: 448,
            out_height: 448,
        }
    }
}

impl<T: Real> NormParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_norm > T::zero() && self.distance_norm > T::zero())
            || self.out_width == 0
            || self.out_height == 0
        {
            return Err(Error::Config("normalization parameters must be positive".into()));
        }
        Ok(())
    }

    /// Intrinsics of the virtual camera, principal point at the image centre.
    pub fn camera(&self) -> CameraIntrinsics<T> {
        let half = T::lit(0.5);
        CameraIntrinsics {
            fx: self.focal_norm,
            fy: self.focal_norm,
            cx: T::lit(self.out_width as f64) * half - half,
            cy: T::lit(self.out_height as f64) * half - half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationResult<T: Real> {
    /// Real image pixels to normalized image pixels.
    pub warp: Matrix3<T>,
    /// Camera frame to normalized camera frame.
    pub rot: Matrix3<T>,
    pub scale: T,
    /// Angles of the head facing direction in normalized space.
    pub headpose_n: GazeAngles<T>,
    pub gaze_n: Option<GazeAngles<T>>,
}

/// Normalization of a head frame seen by `k_real`. `gaze`, when given, is a
/// camera-space gaze direction carried into normalized space by `rot`.
pub fn normalization_transform<T: Real>(
    frame: &HeadFrame<T>,
    k_real: &CameraIntrinsics<T>,
    p: &NormParams<T>,
    gaze: Option<&Vector3<T>>,
) -> Result<NormalizationResult<T>> {
    let c = frame.origin;
    let d = c.norm();
    if !(d > T::zero()) || !d.finite() {
        return Err(Error::Degenerate("face centre at the camera centre".into()));
    }
    if !(c.z > T::zero()) {
        return Err(Error::InvalidInput("face centre behind the camera".into()));
    }
    let z_r = c / d;
    let down = z_r.cross(&frame.x_axis);
    let dn = down.norm();
    if !(dn > T::lit(1e-12)) {
        return Err(Error::Degenerate("head x-axis parallel to viewing ray".into()));
    }
    let y_r = down / dn;
    let x_r = y_r.cross(&z_r);
    let rot = Matrix3::from_rows(&[x_r.transpose(), y_r.transpose(), z_r.transpose()]);
    let scale = p.distance_norm / d;

    let mut s = Matrix3::identity();
    s[(2, 2)] = scale;
    let warp = p.camera().matrix() * s * rot * k_real.inverse_matrix();

    let headpose_n = rotate_to_normalized(&rot, &frame.facing())?;
    let gaze_n = gaze.map(|g| rotate_to_normalized(&rot, g)).transpose()?;
    Ok(NormalizationResult {
        warp,
        rot,
        scale,
        headpose_n,
        gaze_n,
    })
}

pub fn rotate_to_normalized<T: Real>(rot: &Matrix3<T>, v: &Vector3<T>) -> Result<GazeAngles<T>> {
    vector_to_angles(&(rot * v))
}

/// Row-major 8-bit image with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if !(channels == 1 || channels == 3) {
            return Err(Error::InvalidInput(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn black(width: u32, height: u32, channels: u8) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![0; width as usize * height as usize * channels as usize],
        )
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }
}

/// Inverse-mapped bilinear warp. Output pixels whose source lies outside the
/// source pixel area (beyond half a pixel past the border samples) are black.
pub fn warp_image(image: &Image, warp: &Matrix3<f64>, out_width: u32, out_height: u32) -> Result<Image> {
    let inv = warp
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Degenerate("warp is singular".into()))?;
    let c = image.channels as usize;
    let (w, h) = (image.width as f64, image.height as f64);
    let mut out = Image::black(out_width, out_height, image.channels)?;
    if image.width == 0 || image.height == 0 {
        return Ok(out);
    }
    for oy in 0..out_height {
        for ox in 0..out_width {
            let s = inv * Vector3::new(ox as f64, oy as f64, 1.0);
            if !(s.z > 0.0) {
                continue;
            }
            let (sx, sy) = (s.x / s.z, s.y / s.z);
            if !(sx >= -0.5 && sx <= w - 0.5 && sy >= -0.5 && sy <= h - 0.5) {
                continue;
            }
            let sx = sx.clamp(0.0, w - 1.0);
            let sy = sy.clamp(0.0, h - 1.0);
            let x0 = sx.floor() as u32;
            let y0 = sy.floor() as u32;
            let x1 = (x0 + 1).min(image.width - 1);
            let y1 = (y0 + 1).min(image.height - 1);
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let o = (oy as usize * out_width as usize + ox as usize) * c;
            for ch in 0..c {
                let p = |x: u32, y: u32| image.pixel(x, y)[ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bot = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                let v = top * (1.0 - fy) + bot * fy;
                out.data[o + ch] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headpose::{default_intrinsics, rotation_from_euler_deg};
    use approx::assert_relative_eq;

    fn triangle_model() -> FaceModel3D<f64> {
        let mut pts = FaceModel3D::<f64>::canonical().points().to_vec();
        for i in [36, 39] {
            pts[i] = Vector3::new(-30.0, -20.0, 0.0);
        }
        for i in [42, 45] {
            pts[i] = Vector3::new(30.0, -20.0, 0.0);
        }
        for i in [48, 54] {
            pts[i] = Vector3::new(0.0, 40.0, 0.0);
        }
        FaceModel3D::new(pts).unwrap()
    }

    #[test]
    fn hand_computed_frame() {
        let pose = HeadPose::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 600.0));
        let f = head_frame(&pose, &triangle_model(), &LandmarkIndexMap::default()).unwrap();
        assert_relative_eq!(f.origin, Vector3::new(0.0, 0.0, 600.0), epsilon = 1e-12);
        assert_relative_eq!(f.x_axis, Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(f.y_axis, Vector3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(f.z_axis, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn collinear_midpoints_rejected() {
        let r = head_frame_from_midpoints(
            &Vector3::new(-30.0, 0.0, 500.0),
            &Vector3::new(30.0, 0.0, 500.0),
            &Vector3::new(60.0, 0.0, 500.0),
        );
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }

    #[test]
    fn frame_is_orthonormal_under_rotation() {
        let pose = HeadPose::<f64>::new(rotation_from_euler_deg(25.0, -40.0, 12.0), Vector3::new(30.0, -20.0, 420.0));
        let f = head_frame(&pose, &FaceModel3D::canonical(), &LandmarkIndexMap::default()).unwrap();
        assert!(f.x_axis.dot(&f.y_axis).abs() < 1e-9);
        assert!(f.y_axis.dot(&f.z_axis).abs() < 1e-9);
        assert!(f.x_axis.dot(&f.z_axis).abs() < 1e-9);
        assert!((f.x_axis.cross(&f.y_axis) - f.z_axis).norm() < 1e-9);
    }

    #[test]
    fn on_axis_face_gives_identity() {
        let frame = HeadFrame {
            origin: Vector3::new(0.0, 0.0, 600.0),
            x_axis: Vector3::x(),
            y_axis: Vector3::y(),
            z_axis: Vector3::z(),
        };
        let k = default_intrinsics(640, 480).unwrap();
        let n = normalization_transform(&frame, &k, &NormParams::default(), None).unwrap();
        assert_relative_eq!(n.rot, Matrix3::identity(), epsilon = 1e-15);
        assert_relative_eq!(n.scale, 0.5);
        assert_relative_eq!(n.headpose_n.pitch, 0.0);
        assert_relative_eq!(n.headpose_n.yaw, 0.0);
    }

    #[test]
    fn degenerate_normalization_inputs() {
        let k = default_intrinsics(640, 480).unwrap();
        let mut frame = HeadFrame {
            origin: Vector3::zeros(),
            x_axis: Vector3::x(),
            y_axis: Vector3::y(),
            z_axis: Vector3::z(),
        };
        assert!(normalization_transform(&frame, &k, &NormParams::default(), None).is_err());
        frame.origin = Vector3::new(0.0, 0.0, 400.0);
        frame.x_axis = Vector3::z();
        assert!(normalization_transform(&frame, &k, &NormParams::default(), None).is_err());
    }

    #[test]
    fn identity_warp_is_exact() {
        let data: Vec<u8> = (0..5 * 4 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = Image::new(5, 4, 3, data).unwrap();
        let out = warp_image(&img, &Matrix3::identity(), 5, 4).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn double_scale_keeps_corner_colours() {
        let img = Image::new(2, 2, 1, vec![0, 255, 255, 0]).unwrap();
        let mut s = Matrix3::identity();
        s[(0, 0)] = 2.0;
        s[(1, 1)] = 2.0;
        let out = warp_image(&img, &s, 4, 4).unwrap();
        assert_eq!(out.pixel(0, 0), [0]);
        assert_eq!(out.pixel(3, 0), [255]);
        assert_eq!(out.pixel(0, 3), [255]);
        assert_eq!(out.pixel(3, 3), [0]);
        // (1, 0) samples source (0.5, 0): halfway between 0 and 255.
        assert_eq!(out.pixel(1, 0), [128]);
    }

    #[test]
    fn everything_outside_is_black() {
        let img = Image::new(2, 2, 3, vec![200; 12]).unwrap();
        let mut t = Matrix3::identity();
        t[(0, 2)] = -1000.0;
        let out = warp_image(&img, &t, 3, 3).unwrap();
        assert!(out.data.iter().all(|&v| v == 0));
        assert!(warp_image(&img, &Matrix3::zeros(), 2, 2).is_err());
    }
}
