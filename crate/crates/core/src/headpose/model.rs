use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Real, Result};

pub const NUM_LANDMARKS: usize = 68;

const CANONICAL: &str = include_str!("../../data/face_model_68.txt");

/// Generic 3D face shape, one point per landmark, in millimetres.
///
/// Head frame: +x toward the subject's left eye, +y toward the chin, +z toward
/// the back of the head. A frontal face under the identity rotation therefore
/// faces the camera along −z.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceModel3D<T: Real> {
    points: Vec<Vector3<T>>,
}

impl<T: Real> FaceModel3D<T> {
    pub fn new(points: Vec<Vector3<T>>) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(Error::InvalidInput(format!(
                "face model needs {NUM_LANDMARKS} points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.iter().all(|v| v.finite())) {
            return Err(Error::NonFinite("face model coordinate".into()));
        }
        if centered_rank(&points) < 2 {
            return Err(Error::Degenerate("face model points are collinear".into()));
        }
        Ok(Self { points })
    }

    /// The bundled generic model.
    pub fn canonical() -> Self {
        Self::parse(CANONICAL).expect("bundled face model is valid")
    }

    /// Parses whitespace-separated `x y z` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut points = Vec::with_capacity(NUM_LANDMARKS);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Schema {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            if vals.len() != 3 {
                return Err(Error::Schema {
                    line: i + 1,
                    msg: format!("expected 3 coordinates, got {}", vals.len()),
                });
            }
            points.push(Vector3::new(T::lit(vals[0]), T::lit(vals[1]), T::lit(vals[2])));
        }
        Self::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        s
    }

    pub fn points(&self) -> &[Vector3<T>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vector3<T> {
        self.points[i]
    }

    pub fn cast<U: Real>(&self) -> FaceModel3D<U> {
        FaceModel3D {
            points: self
                .points
                .iter()
                .map(|p| p.map(|v| U::lit(v.as_f64())))
                .collect(),
        }
    }
}

/// Which landmarks define the eye and mouth midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkIndexMap {
    /// Corners of the subject's right eye (image left for a frontal face).
    pub right_eye: [usize; 2],
    /// Corners of the subject's left eye.
    pub left_eye: [usize; 2],
    pub mouth: [usize; 2],
}

impl Default for LandmarkIndexMap {
    fn default() -> Self {
        Self {
            right_eye: [36, 39],
            left_eye: [42, 45],
            mouth: [48, 54],
        }
    }
}

impl LandmarkIndexMap {
    fn mid<T: Real>(pts: &[Vector3<T>], idx: [usize; 2]) -> Vector3<T> {
        (pts[idx[0]] + pts[idx[1]]) * T::lit(0.5)
    }

    /// (right eye, left eye, mouth) midpoints of the given point set.
    pub fn midpoints<T: Real>(&self, pts: &[Vector3<T>]) -> [Vector3<T>; 3] {
        [
            Self::mid(pts, self.right_eye),
            Self::mid(pts, self.left_eye),
            Self::mid(pts, self.mouth),
        ]
    }
}

fn centered_rank<T: Real>(pts: &[Vector3<T>]) -> usize {
    let n = T::from_count(pts.len().max(1));
    let c: Vector3<T> = pts.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigenvalues();
    let max = eig.amax();
    if max <= T::zero() {
        return 0;
    }
    eig.iter().filter(|&&v| v > max * T::lit(1e-10)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_model_loads() {
        let m = FaceModel3D::<f64>::canonical();
        assert_eq!(m.points().len(), 68);
        // Nose tip sits in front of the eyes (toward the camera, −z).
        assert!(m.point(30).z < m.point(36).z);
        // Subject's left eye has larger x than the right one.
        assert!(m.point(45).x > m.point(36).x);
        // Mouth below the eyes.
        assert!(m.point(51).y > m.point(39).y);
    }

    #[test]
    fn text_roundtrip() {
        let m = FaceModel3D::<f64>::canonical();
        let back = FaceModel3D::<f64>::parse(&m.to_text()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_wrong_count_and_collinear() {
        let pts: Vec<Vector3<f64>> = (0..67).map(|i| Vector3::new(i as f64, 0.0, 1.0)).collect();
        assert!(FaceModel3D::new(pts).is_err());
        let pts: Vec<Vector3<f64>> = (0..68).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        assert!(matches!(FaceModel3D::new(pts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn parse_reports_line() {
        let err = FaceModel3D::<f64>::parse("1 2 3\n4 5\n").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 2, .. }));
    }
}
