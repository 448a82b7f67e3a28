use nalgebra::{Rotation3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{orthonormalize, HeadPose};
use crate::{Error, Real, Result};

type Vec12<T> = SVector<T, 12>;
type Mat12<T> = SMatrix<T, 12, 12>;

/// Noise model of the constant-velocity filter. Process terms are white
/// acceleration densities, measurement terms are per-axis standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KalmanParams<T: Real> {
    /// rad/s²
    pub process_rot: T,
    /// mm/s²
    pub process_trans: T,
    /// rad
    pub meas_rot: T,
    /// mm
    pub meas_trans: T,
    /// Prior velocity std at initialisation, rad/s.
    pub init_vel_rot: T,
    /// Prior velocity std at initialisation, mm/s.
    pub init_vel_trans: T,
}

impl<T: Real> Default for KalmanParams<T> {
    fn default() -> Self {
        Self {
            process_rot: T::lit(3.0),
            process_trans: T::lit(300.0),
            meas_rot: T::lit(0.02),
            meas_trans: T::lit(5.0),
            init_vel_rot: T::lit(0.5),
            init_vel_trans: T::lit(100.0),
        }
    }
}

impl<T: Real> KalmanParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.process_rot,
            self.process_trans,
            self.meas_rot,
            self.meas_trans,
            self.init_vel_rot,
            self.init_vel_trans,
        ];
        if all.iter().any(|v| !(v.finite() && *v > T::zero())) {
            return Err(Error::Config("Kalman noise terms must be positive".into()));
        }
        Ok(())
    }
}

/// Filter state: [rotation vector, translation, angular rate, linear velocity].
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState<T: Real> {
    pub x: Vec12<T>,
    pub p: Mat12<T>,
    pub t: f64,
}

impl<T: Real> KalmanState<T> {
    fn init(m: &HeadPose<T>, t: f64, prm: &KalmanParams<T>) -> Self {
        let mut x = Vec12::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&m.rotation_vector());
        x.fixed_rows_mut::<3>(3).copy_from(&m.translation);
        let mut p = Mat12::zeros();
        for i in 0..3 {
            p[(i, i)] = prm.meas_rot * prm.meas_rot;
            p[(i + 3, i + 3)] = prm.meas_trans * prm.meas_trans;
            p[(i + 6, i + 6)] = prm.init_vel_rot * prm.init_vel_rot;
            p[(i + 9, i + 9)] = prm.init_vel_trans * prm.init_vel_trans;
        }
        Self { x, p, t }
    }

    pub fn pose(&self, reprojection_rmse: T) -> HeadPose<T> {
        let rv = Vector3::new(self.x[0], self.x[1], self.x[2]);
        let r = orthonormalize(Rotation3::from_scaled_axis(rv).matrix());
        HeadPose {
            rotation: r,
            translation: Vector3::new(self.x[3], self.x[4], self.x[5]),
            reprojection_rmse,
        }
    }
}

/// One predict/update cycle. With no prior state the filter starts at the
/// measurement, which is returned unchanged.
pub fn kalman_step<T: Real>(
    state: Option<&KalmanState<T>>,
    measurement: &HeadPose<T>,
    t: f64,
    params: &KalmanParams<T>,
) -> Result<(KalmanState<T>, HeadPose<T>)> {
    let Some(prev) = state else {
        return Ok((KalmanState::init(measurement, t, params), *measurement));
    };
    if !(t > prev.t) {
        return Err(Error::NonIncreasingTimestamp { t, prev: prev.t });
    }
    let dt = T::lit(t - prev.t);

    let mut f = Mat12::identity();
    for i in 0..6 {
        f[(i, i + 6)] = dt;
    }
    let dt2 = dt * dt;
    let q11 = dt2 * dt2 / T::lit(4.0);
    let q12 = dt2 * dt / T::lit(2.0);
    let mut q = Mat12::zeros();
    for i in 0..6 {
        let s = if i < 3 { params.process_rot } else { params.process_trans };
        let s2 = s * s;
        q[(i, i)] = q11 * s2;
        q[(i, i + 6)] = q12 * s2;
        q[(i + 6, i)] = q12 * s2;
        q[(i + 6, i + 6)] = dt2 * s2;
    }
    let x_pred = f * prev.x;
    let p_pred = f * prev.p * f.transpose() + q;

    let pred_rv = Vector3::new(x_pred[0], x_pred[1], x_pred[2]);
    let meas_rv = nearest_equivalent(measurement.rotation_vector(), &pred_rv);
    let mut z = SVector::<T, 6>::zeros();
    z.fixed_rows_mut::<3>(0).copy_from(&meas_rv);
    z.fixed_rows_mut::<3>(3).copy_from(&measurement.translation);

    let h = SMatrix::<T, 6, 12>::identity();
    let mut r = SMatrix::<T, 6, 6>::zeros();
    for i in 0..3 {
        r[(i, i)] = params.meas_rot * params.meas_rot;
        r[(i + 3, i + 3)] = params.meas_trans * params.meas_trans;
    }
    let s = h * p_pred * h.transpose() + r;
    let s_inv = s
        .cholesky()
        .ok_or_else(|| Error::Degenerate("innovation covariance not positive-definite".into()))?
        .inverse();
    let gain = p_pred * h.transpose() * s_inv;
    let innovation = z - h * x_pred;
    let x = x_pred + gain * innovation;
    // Joseph form keeps P symmetric positive semi-definite.
    let ikh = Mat12::identity() - gain * h;
    let p = ikh * p_pred * ikh.transpose() + gain * r * gain.transpose();
    let p = (p + p.transpose()) * T::lit(0.5);

    let next = KalmanState { x, p, t };
    let smoothed = next.pose(measurement.reprojection_rmse);
    Ok((next, smoothed))
}

/// Rotation vectors v and v − 2π·v̂ describe the same rotation; pick the one
/// closest to `reference` so the innovation never jumps by 2π.
fn nearest_equivalent<T: Real>(v: Vector3<T>, reference: &Vector3<T>) -> Vector3<T> {
    let angle = v.norm();
    if angle <= T::default_epsilon() {
        return v;
    }
    let axis = v / angle;
    let two_pi = T::two_pi();
    let mut best = v;
    for k in [-1i32, 1] {
        let cand = axis * (angle + two_pi * T::lit(k as f64));
        if (cand - reference).norm() < (best - reference).norm() {
            best = cand;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headpose::rotation_from_euler_deg;

    fn min_eig(p: &Mat12<f64>) -> f64 {
        p.symmetric_eigenvalues().min()
    }

    #[test]
    fn first_measurement_passes_through() {
        let m = HeadPose::new(rotation_from_euler_deg(10.0, 5.0, 0.0), Vector3::new(1.0, 2.0, 400.0));
        let (_, out) = kalman_step(None, &m, 0.0, &KalmanParams::default()).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn rejects_stale_timestamp() {
        let m = HeadPose::new(rotation_from_euler_deg(0.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 400.0));
        let prm = KalmanParams::default();
        let (s, _) = kalman_step(None, &m, 1.0, &prm).unwrap();
        assert!(matches!(
            kalman_step(Some(&s), &m, 1.0, &prm),
            Err(Error::NonIncreasingTimestamp { .. })
        ));
    }

    #[test]
    fn constant_measurements_fixed_point_and_psd() {
        let m = HeadPose::new(rotation_from_euler_deg(20.0, -10.0, 3.0), Vector3::new(5.0, 2.0, 380.0));
        let prm = KalmanParams::default();
        let mut st: Option<KalmanState<f64>> = None;
        let mut last = m;
        for i in 0..50 {
            let (s, out) = kalman_step(st.as_ref(), &m, i as f64 / 30.0, &prm).unwrap();
            assert!((s.p - s.p.transpose()).amax() < 1e-12);
            assert!(min_eig(&s.p) > -1e-12);
            st = Some(s);
            last = out;
        }
        assert!((last.rotation - m.rotation).amax() < 1e-3);
        assert!((last.translation - m.translation).amax() < 1e-3);
    }

    #[test]
    fn wraps_rotation_vector() {
        let v = Vector3::new(0.0, 0.0, std::f64::consts::PI - 0.01);
        let r = Vector3::new(0.0, 0.0, -(std::f64::consts::PI - 0.02));
        let e = nearest_equivalent(v, &r);
        assert!((e - r).norm() < 0.05);
    }
}
