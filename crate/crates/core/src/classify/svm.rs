//! Linear soft-margin SVM with per-class cost weights.
//!
//! Training solves the dual
//!   min ½ αᵀQα − Σα  s.t.  yᵀα = 0,  0 ≤ αᵢ ≤ C·w(yᵢ)
//! with SMO and second-order working-set selection. The bias is not
//! regularised; the primal objective is
//!   ½‖w‖² + Σ C·w(yᵢ)·max(0, 1 − yᵢ(w·xᵢ + b)).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// w_c = N / (2·N_c)
    Balanced,
    Custom { positive: f64, negative: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub c: f64,
    pub weighting: ClassWeighting,
    /// Iteration cap is `max_epochs · N` pair updates.
    pub max_epochs: usize,
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            weighting: ClassWeighting::Balanced,
            max_epochs: 1000,
            tol: 1e-3,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("SVM C must be positive, got {}", self.c)));
        }
        if let ClassWeighting::Custom { positive, negative } = self.weighting {
            if !(positive > 0.0 && negative > 0.0) {
                return Err(Error::Config("class weights must be positive".into()));
            }
        }
        if !(self.tol > 0.0) || self.max_epochs == 0 {
            return Err(Error::Config("SVM tol and max_epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T: Real> {
    pub weights: DVector<T>,
    pub bias: T,
    pub c: f64,
    /// (positive, negative) class weights used in training.
    pub class_weights: (f64, f64),
}

impl<T: Real> SvmModel<T> {
    pub fn decision(&self, x: &[T]) -> Result<T> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.weights.iter().zip(x).fold(self.bias, |s, (w, v)| s + *w * *v))
    }

    /// (label ±1, score). A zero score is labelled +1.
    pub fn predict(&self, x: &[T]) -> Result<(i8, T)> {
        let s = self.decision(x)?;
        Ok((if s >= T::zero() { 1 } else { -1 }, s))
    }

    /// Primal objective on the given training set.
    pub fn objective(&self, samples: &DMatrix<T>, labels: &[i8]) -> T {
        let half = T::lit(0.5);
        let mut obj = half * self.weights.norm_squared();
        let c = T::lit(self.c);
        let (wp, wn) = (T::lit(self.class_weights.0), T::lit(self.class_weights.1));
        for (i, &y) in labels.iter().enumerate() {
            let row = samples.row(i);
            let s = self.weights.iter().zip(row.iter()).fold(self.bias, |s, (w, v)| s + *w * *v);
            let yf = if y > 0 { T::one() } else { -T::one() };
            let loss = (T::one() - yf * s).max(T::zero());
            obj += c * if y > 0 { wp } else { wn } * loss;
        }
        obj
    }
}

fn class_weights(labels: &[i8], w: ClassWeighting) -> (f64, f64) {
    match w {
        ClassWeighting::Balanced => {
            let n = labels.len() as f64;
            let np = labels.iter().filter(|&&y| y > 0).count() as f64;
            (n / (2.0 * np), n / (2.0 * (n - np)))
        }
        ClassWeighting::Custom { positive, negative } => (positive, negative),
    }
}

const TAU: f64 = 1e-12;
/// Kernel matrices up to this many samples are cached in full.
const GRAM_CACHE_LIMIT: usize = 3000;

/// Trains on the rows of `samples` with labels ±1.
pub fn svm_train<T: Real>(samples: &DMatrix<T>, labels: &[i8], params: &SvmParams) -> Result<SvmModel<T>> {
    params.validate()?;
    let n = samples.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: n });
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::InvalidInput("labels must be +1 or -1".into()));
    }
    let npos = labels.iter().filter(|&&y| y > 0).count();
    if npos == 0 || npos == n {
        return Err(Error::SingleClass);
    }
    if samples.iter().any(|v| !v.finite()) {
        return Err(Error::NonFinite("SVM sample".into()));
    }

    let cw = class_weights(labels, params.weighting);
    let upper: Vec<T> = labels
        .iter()
        .map(|&y| T::lit(params.c * if y > 0 { cw.0 } else { cw.1 }))
        .collect();
    let y: Vec<T> = labels.iter().map(|&l| if l > 0 { T::one() } else { -T::one() }).collect();

    let kernel = Kernel::new(samples);
    let qd: Vec<T> = (0..n).map(|i| kernel.diag(i)).collect();
    let tau = T::lit(TAU);
    let eps = T::lit(params.tol);
    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let max_iter = params.max_epochs.saturating_mul(n);
    let mut iter = 0usize;
    let mut col_i = vec![T::zero(); n];
    let mut col_j = vec![T::zero(); n];

    loop {
        // i: maximal violator in I_up.
        let mut gmax = T::lit(f64::NEG_INFINITY);
        let mut sel_i = None;
        for t in 0..n {
            if y[t] > T::zero() {
                if alpha[t] < upper[t] && -grad[t] >= gmax {
                    gmax = -grad[t];
                    sel_i = Some(t);
                }
            } else if alpha[t] > T::zero() && grad[t] >= gmax {
                gmax = grad[t];
                sel_i = Some(t);
            }
        }
        let Some(i) = sel_i else { break };
        kernel.column(i, &mut col_i);

        // j: second-order choice in I_low.
        let mut gmax2 = T::lit(f64::NEG_INFINITY);
        let mut sel_j = None;
        let mut obj_min = T::lit(f64::INFINITY);
        for t in 0..n {
            let grad_diff;
            if y[t] > T::zero() {
                if !(alpha[t] > T::zero()) {
                    continue;
                }
                grad_diff = gmax + grad[t];
                gmax2 = gmax2.max(grad[t]);
            } else {
                if !(alpha[t] < upper[t]) {
                    continue;
                }
                grad_diff = gmax - grad[t];
                gmax2 = gmax2.max(-grad[t]);
            }
            if grad_diff > T::zero() {
                let quad = qd[i] + qd[t] - T::lit(2.0) * col_i[t];
                let quad = if quad > T::zero() { quad } else { tau };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    sel_j = Some(t);
                }
            }
        }
        let gap = gmax + gmax2;
        let Some(j) = sel_j else { break };
        if gap < eps {
            break;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::NotConverged { gap: gap.as_f64() });
        }
        kernel.column(j, &mut col_j);

        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        // Q_ij = y_i y_j K_ij
        let q_ij = y[i] * y[j] * col_i[j];
        if y[i] != y[j] {
            let quad = qd[i] + qd[j] + T::lit(2.0) * q_ij;
            let quad = if quad > T::zero() { quad } else { tau };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = qd[i] + qd[j] - T::lit(2.0) * q_ij;
            let quad = if quad > T::zero() { quad } else { tau };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * col_i[t] * di + y[j] * col_j[t] * dj);
        }
    }

    // Bias from the free support vectors, or the midpoint of the feasible interval.
    let mut ub = T::lit(f64::INFINITY);
    let mut lb = T::lit(f64::NEG_INFINITY);
    let mut sum_free = T::zero();
    let mut nr_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= upper[t];
        let at_lower = alpha[t] <= T::zero();
        if at_upper {
            if y[t] < T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > T::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    let rho = if nr_free > 0 {
        sum_free / T::from_count(nr_free)
    } else {
        (ub + lb) * T::lit(0.5)
    };

    let mut w = DVector::zeros(samples.ncols());
    for t in 0..n {
        if alpha[t] != T::zero() {
            w += samples.row(t).transpose() * (alpha[t] * y[t]);
        }
    }
    Ok(SvmModel {
        weights: w,
        bias: -rho,
        c: params.c,
        class_weights: cw,
    })
}

enum Kernel<'a, T: Real> {
    Cached(DMatrix<T>),
    Direct(&'a DMatrix<T>),
}

impl<'a, T: Real> Kernel<'a, T> {
    fn new(x: &'a DMatrix<T>) -> Self {
        if x.nrows() <= GRAM_CACHE_LIMIT {
            Kernel::Cached(x * x.transpose())
        } else {
            Kernel::Direct(x)
        }
    }

    fn diag(&self, i: usize) -> T {
        match self {
            Kernel::Cached(g) => g[(i, i)],
            Kernel::Direct(x) => x.row(i).norm_squared(),
        }
    }

    fn column(&self, i: usize, out: &mut [T]) {
        match self {
            Kernel::Cached(g) => out.copy_from_slice(g.column(i).as_slice()),
            Kernel::Direct(x) => {
                let xi = x.row(i);
                for (t, o) in out.iter_mut().enumerate() {
                    *o = x.row(t).dot(&xi);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_convention() {
        let m = SvmModel {
            weights: DVector::from_vec(vec![1.0, 0.0]),
            bias: 0.0,
            c: 1.0,
            class_weights: (1.0, 1.0),
        };
        assert_eq!(m.predict(&[2.0, 5.0]).unwrap(), (1, 2.0));
        assert_eq!(m.predict(&[0.0, 5.0]).unwrap(), (1, 0.0));
        assert_eq!(m.predict(&[-1.0, 5.0]).unwrap().0, -1);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let x = DMatrix::<f64>::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(svm_train(&x, &[1, 1, 1], &SvmParams::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn tiny_separable_problem() {
        let x = DMatrix::<f64>::from_row_slice(4, 1, &[-2.0, -1.0, 1.0, 2.0]);
        let m = svm_train(&x, &[-1, -1, 1, 1], &SvmParams { c: 100.0, ..Default::default() }).unwrap();
        // Hard-margin solution: w = 1, b = 0.
        assert!((m.weights[0] - 1.0).abs() < 1e-3, "{m:?}");
        assert!(m.bias.abs() < 1e-3);
    }

    #[test]
    fn balanced_weights() {
        assert_eq!(class_weights(&[1, -1, -1, -1], ClassWeighting::Balanced), (2.0, 4.0 / 6.0));
    }
}
