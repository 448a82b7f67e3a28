//! Efficient Perspective-n-Point with four virtual control points.
//!
//! World points are expressed as barycentric combinations of the cloud
//! centroid and its three principal axes. The camera-frame control points lie
//! in the null space of a 2n×12 system; the null-space weights are recovered
//! from the inter-control-point distances (one-, two- and three-vector
//! approximations, each polished by Gauss-Newton) and the candidate with the
//! lowest reprojection error wins.

use nalgebra::{DMatrix, DVector, Matrix3, Point2, SMatrix, SVector, Vector3};

use super::{reprojection_rmse, CameraIntrinsics, FaceModel3D, HeadPose};
use crate::{Error, Real, Result};

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Initial head pose of `model` given its 2D landmarks.
pub fn solve_epnp<T: Real>(
    model: &FaceModel3D<T>,
    landmarks: &[Point2<T>],
    k: &CameraIntrinsics<T>,
) -> Result<HeadPose<T>> {
    epnp(model.points(), landmarks, k)
}

/// EPnP on arbitrary correspondences (n ≥ 4, non-planar or planar).
pub fn epnp<T: Real>(
    world: &[Vector3<T>],
    image: &[Point2<T>],
    k: &CameraIntrinsics<T>,
) -> Result<HeadPose<T>> {
    let n = world.len().min(image.len());
    if n < 4 {
        return Err(Error::InsufficientPoints { needed: 4, got: n });
    }
    if world.len() != image.len() {
        return Err(Error::DimensionMismatch {
            expected: world.len(),
            got: image.len(),
        });
    }
    if world.iter().any(|p| !p.iter().all(|v| v.finite()))
        || image.iter().any(|p| !(p.x.finite() && p.y.finite()))
    {
        return Err(Error::NonFinite("correspondence coordinate".into()));
    }

    let control_w = control_points(world)?;
    let alphas = barycentric(world, &control_w)?;
    let uv: Vec<_> = image.iter().map(|p| k.unproject(p)).collect();

    // MᵀM accumulated directly; M itself is never needed.
    let mut mtm = SMatrix::<T, 12, 12>::zeros();
    for (a, q) in alphas.iter().zip(&uv) {
        let mut r0 = SVector::<T, 12>::zeros();
        let mut r1 = SVector::<T, 12>::zeros();
        for j in 0..4 {
            r0[3 * j] = a[j];
            r0[3 * j + 2] = -q.x * a[j];
            r1[3 * j + 1] = a[j];
            r1[3 * j + 2] = -q.y * a[j];
        }
        mtm += r0 * r0.transpose() + r1 * r1.transpose();
    }
    let eig = mtm.symmetric_eigen();
    let mut order: Vec<usize> = (0..12).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let kernel: [SVector<T, 12>; 4] =
        std::array::from_fn(|i| eig.eigenvectors.column(order[i]).into_owned());

    let l = l_6x10(&kernel);
    let rho = SVector::<T, 6>::from_fn(|i, _| {
        let (a, b) = PAIRS[i];
        (control_w[a] - control_w[b]).norm_squared()
    });

    let mut best: Option<HeadPose<T>> = None;
    for approx in [approx_n1::<T>, approx_n2::<T>, approx_n3::<T>] {
        let Some(betas) = approx(&l, &rho) else {
            continue;
        };
        let betas = gauss_newton(&l, &rho, betas);
        let Some(pose) = pose_from_betas(&kernel, &betas, &alphas, world, image, k) else {
            continue;
        };
        if best
            .as_ref()
            .is_none_or(|b| pose.reprojection_rmse < b.reprojection_rmse)
        {
            best = Some(pose);
        }
    }
    best.ok_or_else(|| Error::Degenerate("EPnP produced no valid pose".into()))
}

fn control_points<T: Real>(world: &[Vector3<T>]) -> Result<[Vector3<T>; 4]> {
    let n = T::from_count(world.len());
    let c: Vector3<T> = world.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in world {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    if !(max > T::zero()) {
        return Err(Error::Degenerate("all world points coincide".into()));
    }
    let mut cw = [c; 4];
    for i in 0..3 {
        // Planar clouds get a small out-of-plane axis so the basis stays invertible.
        let s = eig.eigenvalues[i].max(max * T::lit(1e-6)).sqrt();
        cw[i + 1] = c + eig.eigenvectors.column(i) * s;
    }
    Ok(cw)
}

fn barycentric<T: Real>(world: &[Vector3<T>], cw: &[Vector3<T>; 4]) -> Result<Vec<[T; 4]>> {
    let basis = Matrix3::from_columns(&[cw[1] - cw[0], cw[2] - cw[0], cw[3] - cw[0]]);
    let inv = basis
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("control point basis is singular".into()))?;
    Ok(world
        .iter()
        .map(|p| {
            let a = inv * (p - cw[0]);
            [T::one() - a.x - a.y - a.z, a.x, a.y, a.z]
        })
        .collect())
}

fn ctrl<T: Real>(v: &SVector<T, 12>, j: usize) -> Vector3<T> {
    Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2])
}

/// Rows: control-point pairs. Columns: β products in the order
/// [11, 12, 22, 13, 23, 33, 14, 24, 34, 44].
fn l_6x10<T: Real>(kernel: &[SVector<T, 12>; 4]) -> SMatrix<T, 6, 10> {
    let two = T::lit(2.0);
    let mut l = SMatrix::<T, 6, 10>::zeros();
    for (row, &(a, b)) in PAIRS.iter().enumerate() {
        let d: [Vector3<T>; 4] = std::array::from_fn(|k| ctrl(&kernel[k], a) - ctrl(&kernel[k], b));
        let vals = [
            d[0].dot(&d[0]),
            two * d[0].dot(&d[1]),
            d[1].dot(&d[1]),
            two * d[0].dot(&d[2]),
            two * d[1].dot(&d[2]),
            d[2].dot(&d[2]),
            two * d[0].dot(&d[3]),
            two * d[1].dot(&d[3]),
            two * d[2].dot(&d[3]),
            d[3].dot(&d[3]),
        ];
        for (c, v) in vals.into_iter().enumerate() {
            l[(row, c)] = v;
        }
    }
    l
}

fn lstsq<T: Real>(l: &SMatrix<T, 6, 10>, cols: &[usize], rho: &SVector<T, 6>) -> Option<DVector<T>> {
    let a = DMatrix::from_fn(6, cols.len(), |r, c| l[(r, cols[c])]);
    let b = DVector::from_iterator(6, rho.iter().copied());
    a.svd(true, true).solve(&b, T::default_epsilon()).ok()
}

fn approx_n1<T: Real>(l: &SMatrix<T, 6, 10>, rho: &SVector<T, 6>) -> Option<[T; 4]> {
    let b = lstsq(l, &[0, 1, 3, 6], rho)?;
    if b[0] < T::zero() {
        let b0 = (-b[0]).sqrt();
        (b0 > T::zero()).then(|| [b0, -b[1] / b0, -b[2] / b0, -b[3] / b0])
    } else {
        let b0 = b[0].sqrt();
        (b0 > T::zero()).then(|| [b0, b[1] / b0, b[2] / b0, b[3] / b0])
    }
}

fn approx_n2<T: Real>(l: &SMatrix<T, 6, 10>, rho: &SVector<T, 6>) -> Option<[T; 4]> {
    let b = lstsq(l, &[0, 1, 2], rho)?;
    let (mut b0, b1);
    if b[0] < T::zero() {
        b0 = (-b[0]).sqrt();
        b1 = if b[2] < T::zero() { (-b[2]).sqrt() } else { T::zero() };
    } else {
        b0 = b[0].sqrt();
        b1 = if b[2] > T::zero() { b[2].sqrt() } else { T::zero() };
    }
    if b[1] < T::zero() {
        b0 = -b0;
    }
    Some([b0, b1, T::zero(), T::zero()])
}

fn approx_n3<T: Real>(l: &SMatrix<T, 6, 10>, rho: &SVector<T, 6>) -> Option<[T; 4]> {
    let b = lstsq(l, &[0, 1, 2, 3, 4], rho)?;
    let (mut b0, b1);
    if b[0] < T::zero() {
        b0 = (-b[0]).sqrt();
        b1 = if b[2] < T::zero() { (-b[2]).sqrt() } else { T::zero() };
    } else {
        b0 = b[0].sqrt();
        b1 = if b[2] > T::zero() { b[2].sqrt() } else { T::zero() };
    }
    if b[1] < T::zero() {
        b0 = -b0;
    }
    if b0 == T::zero() {
        return None;
    }
    Some([b0, b1, b[3] / b0, T::zero()])
}

fn gauss_newton<T: Real>(l: &SMatrix<T, 6, 10>, rho: &SVector<T, 6>, mut b: [T; 4]) -> [T; 4] {
    let two = T::lit(2.0);
    for _ in 0..5 {
        let mut a = DMatrix::<T>::zeros(6, 4);
        let mut r = DVector::<T>::zeros(6);
        for i in 0..6 {
            let row: [T; 10] = std::array::from_fn(|c| l[(i, c)]);
            a[(i, 0)] = two * row[0] * b[0] + row[1] * b[1] + row[3] * b[2] + row[6] * b[3];
            a[(i, 1)] = row[1] * b[0] + two * row[2] * b[1] + row[4] * b[2] + row[7] * b[3];
            a[(i, 2)] = row[3] * b[0] + row[4] * b[1] + two * row[5] * b[2] + row[8] * b[3];
            a[(i, 3)] = row[6] * b[0] + row[7] * b[1] + row[8] * b[2] + two * row[9] * b[3];
            let prod = [
                b[0] * b[0],
                b[0] * b[1],
                b[1] * b[1],
                b[0] * b[2],
                b[1] * b[2],
                b[2] * b[2],
                b[0] * b[3],
                b[1] * b[3],
                b[2] * b[3],
                b[3] * b[3],
            ];
            let est = row.iter().zip(prod).fold(T::zero(), |s, (x, y)| s + *x * y);
            r[i] = rho[i] - est;
        }
        let Ok(dx) = a.svd(true, true).solve(&r, T::default_epsilon()) else {
            break;
        };
        if !dx.iter().all(|v| v.finite()) {
            break;
        }
        for j in 0..4 {
            b[j] += dx[j];
        }
    }
    b
}

fn pose_from_betas<T: Real>(
    kernel: &[SVector<T, 12>; 4],
    betas: &[T; 4],
    alphas: &[[T; 4]],
    world: &[Vector3<T>],
    image: &[Point2<T>],
    k: &CameraIntrinsics<T>,
) -> Option<HeadPose<T>> {
    let mut x = SVector::<T, 12>::zeros();
    for (v, b) in kernel.iter().zip(betas) {
        x += v * *b;
    }
    let ccs: [Vector3<T>; 4] = std::array::from_fn(|j| ctrl(&x, j));
    let mut pcs: Vec<Vector3<T>> = alphas
        .iter()
        .map(|a| ccs.iter().zip(a).fold(Vector3::zeros(), |s, (c, w)| s + c * *w))
        .collect();
    let mean_z = pcs.iter().fold(T::zero(), |s, p| s + p.z);
    if mean_z < T::zero() {
        for p in &mut pcs {
            *p = -*p;
        }
    }
    let (r, t) = rigid_align(world, &pcs)?;
    let pose = HeadPose::new(r, t);
    let rmse = reprojection_rmse(&pose, world, image, k);
    rmse.finite().then_some(HeadPose {
        reprojection_rmse: rmse,
        ..pose
    })
}

/// Least-squares rotation and translation mapping `src` onto `dst`.
pub(crate) fn rigid_align<T: Real>(
    src: &[Vector3<T>],
    dst: &[Vector3<T>],
) -> Option<(Matrix3<T>, Vector3<T>)> {
    let n = T::from_count(src.len());
    let cs: Vector3<T> = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let cd: Vector3<T> = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    if !h.iter().all(|v| v.finite()) {
        return None;
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v = svd.v_t?.transpose();
    let mut r = v * u.transpose();
    if r.determinant() < T::zero() {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -T::one();
        r = v * d * u.transpose();
    }
    Some((r, cd - r * cs))
}
