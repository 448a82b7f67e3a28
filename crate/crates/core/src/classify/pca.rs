use nalgebra::{DMatrix, DVector};

use crate::{Error, Real, Result};

/// Principal subspace fitted on a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T: Real> {
    pub mean: DVector<T>,
    /// k × D, orthonormal rows ordered by decreasing variance.
    pub components: DMatrix<T>,
    /// Sample variance (N − 1 denominator) along each component.
    pub explained_variance: DVector<T>,
    pub total_variance: T,
}

impl<T: Real> PcaModel<T> {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn explained_ratio(&self) -> T {
        if self.total_variance > T::zero() {
            self.explained_variance.sum() / self.total_variance
        } else {
            T::zero()
        }
    }

    /// components · (x − mean)
    pub fn project(&self, x: &[T]) -> Result<DVector<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let centered = DVector::from_column_slice(x) - &self.mean;
        Ok(&self.components * centered)
    }

    /// Projects every row of an N × D matrix.
    pub fn project_rows(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(centered * self.components.transpose())
    }

    /// mean + componentsᵀ · z
    pub fn reconstruct(&self, z: &DVector<T>) -> DVector<T> {
        &self.mean + self.components.transpose() * z
    }
}

/// Fits PCA on the rows of `features` and keeps the fewest components whose
/// cumulative variance reaches `retain` of the total.
pub fn pca_fit<T: Real>(features: &DMatrix<T>, retain: T) -> Result<PcaModel<T>> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: n });
    }
    if d == 0 {
        return Err(Error::InvalidInput("features have zero dimensions".into()));
    }
    if !(retain > T::zero() && retain <= T::one()) {
        return Err(Error::InvalidInput(format!("retain must be in (0, 1], got {retain}")));
    }
    if features.iter().any(|v| !v.finite()) {
        return Err(Error::NonFinite("feature value".into()));
    }

    let mean: DVector<T> = features.row_mean().transpose();
    let mut x = features.clone();
    for mut row in x.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = T::from_count(n - 1);
    let total = x.iter().fold(T::zero(), |s, v| s + *v * *v) / denom;
    if !(total > T::zero()) {
        return Err(Error::Degenerate("zero total variance".into()));
    }

    // Eigen-decompose whichever of the D×D covariance and N×N Gram matrix is smaller.
    let (values, vectors): (Vec<T>, Vec<DVector<T>>) = if d <= n {
        let cov = (x.transpose() * &x) / denom;
        let eig = cov.symmetric_eigen();
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        idx.iter()
            .map(|&i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .unzip()
    } else {
        let gram = (&x * x.transpose()) / denom;
        let eig = gram.symmetric_eigen();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let lmax = eig.eigenvalues.amax();
        idx.iter()
            .filter(|&&i| eig.eigenvalues[i] > lmax * T::lit(1e-14))
            .map(|&i| {
                let lam = eig.eigenvalues[i];
                let v = x.transpose() * eig.eigenvectors.column(i);
                let v = v.normalize();
                (lam, v)
            })
            .unzip()
    };

    let lmax = values.first().copied().unwrap_or_else(T::zero);
    let rank_floor = lmax * T::lit(1e-12) * T::from_count(d.max(n));
    let target = retain * total * (T::one() - T::lit(1e-12));
    let mut k = 0;
    let mut cum = T::zero();
    for &v in &values {
        if v <= rank_floor {
            break;
        }
        cum += v;
        k += 1;
        if cum >= target {
            break;
        }
    }
    if k == 0 {
        return Err(Error::Degenerate("no component with positive variance".into()));
    }

    let mut components = DMatrix::zeros(k, d);
    for (r, v) in vectors.iter().take(k).enumerate() {
        // Sign convention: largest-magnitude entry positive.
        let imax = v.iamax();
        let s = if v[imax] < T::zero() { -T::one() } else { T::one() };
        components.set_row(r, &(v * s).transpose());
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: DVector::from_iterator(k, values.into_iter().take(k)),
        total_variance: total,
    })
}
