use nalgebra::{Matrix3, Point2, Rotation3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{orthonormalize, CameraIntrinsics, FaceModel3D, HeadPose};
use crate::{Error, Real, Result};

/// Levenberg-Marquardt settings. λ is multiplied by 10 on a rejected step
/// and divided by 10 on an accepted one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmParams {
    pub max_iters: usize,
    pub tol: f64,
    pub lambda0: f64,
}

impl Default for LmParams {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-10,
            lambda0: 1e-3,
        }
    }
}

const LAMBDA_MAX: f64 = 1e16;

/// Minimises the squared reprojection error over rotation (left-multiplied
/// so(3) increment) and translation. Only strictly improving steps are
/// accepted, so the returned RMSE never exceeds the initial one.
pub fn refine_lm<T: Real>(
    initial: &HeadPose<T>,
    model: &FaceModel3D<T>,
    landmarks: &[Point2<T>],
    k: &CameraIntrinsics<T>,
    params: &LmParams,
) -> Result<HeadPose<T>> {
    refine_points(initial, model.points(), landmarks, k, params)
}

pub(crate) fn refine_points<T: Real>(
    initial: &HeadPose<T>,
    world: &[Vector3<T>],
    image: &[Point2<T>],
    k: &CameraIntrinsics<T>,
    params: &LmParams,
) -> Result<HeadPose<T>> {
    if world.len() != image.len() {
        return Err(Error::DimensionMismatch {
            expected: world.len(),
            got: image.len(),
        });
    }
    let n = world.len();
    let tol = T::lit(params.tol);
    let mut lambda = T::lit(params.lambda0);
    let lambda_max = T::lit(LAMBDA_MAX);

    let mut pose = *initial;
    let mut cost = sq_error(&pose, world, image, k);
    if !cost.finite() {
        return Err(Error::NonFinite("initial reprojection residual".into()));
    }

    let mut iters = 0;
    'outer: while iters < params.max_iters {
        let (jtj, jtr) = normal_equations(&pose, world, image, k)?;
        loop {
            iters += 1;
            let mut a = jtj;
            let dmax = (0..6).fold(T::zero(), |m, i| m.max(jtj[(i, i)]));
            for i in 0..6 {
                a[(i, i)] += lambda * jtj[(i, i)].max(dmax * T::lit(1e-12));
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                lambda *= T::lit(10.0);
                if lambda > lambda_max || iters >= params.max_iters {
                    break 'outer;
                }
                continue;
            };
            let candidate = apply_step(&pose, &step);
            let new_cost = sq_error(&candidate, world, image, k);
            if new_cost.finite() && new_cost < cost {
                pose = candidate;
                cost = new_cost;
                lambda /= T::lit(10.0);
                if step.norm() < tol {
                    break 'outer;
                }
                continue 'outer;
            }
            if step.norm() < tol {
                break 'outer;
            }
            lambda *= T::lit(10.0);
            if lambda > lambda_max || iters >= params.max_iters {
                break 'outer;
            }
        }
    }
    pose.reprojection_rmse = (cost / T::from_count(n.max(1))).sqrt();
    Ok(pose)
}

fn apply_step<T: Real>(pose: &HeadPose<T>, step: &SVector<T, 6>) -> HeadPose<T> {
    let dw = Vector3::new(step[0], step[1], step[2]);
    let dt = Vector3::new(step[3], step[4], step[5]);
    let r = *Rotation3::from_scaled_axis(dw).matrix() * pose.rotation;
    HeadPose::new(orthonormalize(&r), pose.translation + dt)
}

fn sq_error<T: Real>(
    pose: &HeadPose<T>,
    world: &[Vector3<T>],
    image: &[Point2<T>],
    k: &CameraIntrinsics<T>,
) -> T {
    let mut s = T::zero();
    for (p, l) in world.iter().zip(image) {
        match k.project(&pose.transform(p)) {
            Some(q) => s += (q - l).norm_squared(),
            None => return T::lit(f64::INFINITY),
        }
    }
    s
}

fn normal_equations<T: Real>(
    pose: &HeadPose<T>,
    world: &[Vector3<T>],
    image: &[Point2<T>],
    k: &CameraIntrinsics<T>,
) -> Result<(SMatrix<T, 6, 6>, SVector<T, 6>)> {
    let mut jtj = SMatrix::<T, 6, 6>::zeros();
    let mut jtr = SVector::<T, 6>::zeros();
    for (p, l) in world.iter().zip(image) {
        let rp = pose.rotation * p;
        let pc = rp + pose.translation;
        if pc.z <= T::zero() {
            return Err(Error::NonFinite("model point behind the camera".into()));
        }
        let iz = T::one() / pc.z;
        let u = k.fx * pc.x * iz + k.cx;
        let v = k.fy * pc.y * iz + k.cy;
        let r = [u - l.x, v - l.y];
        if !(r[0].finite() && r[1].finite()) {
            return Err(Error::NonFinite("reprojection residual".into()));
        }
        // d(pixel)/d(camera point)
        let dproj = SMatrix::<T, 2, 3>::new(
            k.fx * iz,
            T::zero(),
            -k.fx * pc.x * iz * iz,
            T::zero(),
            k.fy * iz,
            -k.fy * pc.y * iz * iz,
        );
        // d(camera point)/d(ω) = −[R p]×, d/d(t) = I
        let skew = Matrix3::new(
            T::zero(),
            -rp.z,
            rp.y,
            rp.z,
            T::zero(),
            -rp.x,
            -rp.y,
            rp.x,
            T::zero(),
        );
        let jw = dproj * (-skew);
        let mut j = SMatrix::<T, 2, 6>::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&jw);
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
        let rv = nalgebra::Vector2::new(r[0], r[1]);
        jtj += j.transpose() * j;
        jtr += j.transpose() * rv;
    }
    Ok((jtj, jtr))
}
