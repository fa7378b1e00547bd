use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Floor applied to per-feature standard deviations.
pub const SCALE_FLOOR: f64 = 1e-9;

/// Standardize-then-project model.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
    /// `[k, d]`, orthonormal rows.
    pub components: Tensor<T>,
    /// Eigenvalues of the kept components, non-increasing.
    pub explained_variance: Vec<T>,
    /// Sum of all `d` eigenvalues.
    pub total_variance: T,
}

impl<T: Scalar> PcaModel<T> {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn explained_ratio(&self) -> Vec<T> {
        self.explained_variance
            .iter()
            .map(|&v| v / self.total_variance)
            .collect()
    }

    /// `components · ((x - mean) / scale)` row by row.
    pub fn transform(&self, data: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.input_dim();
        if data.rank() != 2 || data.cols() != d {
            return Err(Error::Shape(format!(
                "PCA expects [n, {d}], got {:?}",
                data.shape()
            )));
        }
        let k = self.output_dim();
        let mut out = Vec::with_capacity(data.rows() * k);
        let mut z = vec![T::zero(); d];
        for i in 0..data.rows() {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = (data.at2(i, j) - self.mean[j]) / self.scale[j];
            }
            for c in 0..k {
                let comp = self.components.row(c);
                out.push(
                    comp.iter()
                        .zip(&z)
                        .fold(T::zero(), |acc, (&a, &b)| acc + a * b),
                );
            }
        }
        Tensor::new(vec![data.rows(), k], out)
    }

    /// `(componentsᵀ · coords) · scale + mean` row by row.
    pub fn inverse(&self, coords: &Tensor<T>) -> Result<Tensor<T>> {
        let k = self.output_dim();
        if coords.rank() != 2 || coords.cols() != k {
            return Err(Error::Shape(format!(
                "PCA inverse expects [n, {k}], got {:?}",
                coords.shape()
            )));
        }
        let d = self.input_dim();
        let mut out = Vec::with_capacity(coords.rows() * d);
        for i in 0..coords.rows() {
            for j in 0..d {
                let mut z = T::zero();
                for c in 0..k {
                    z = z + self.components.at2(c, j) * coords.at2(i, c);
                }
                out.push(z * self.scale[j] + self.mean[j]);
            }
        }
        Tensor::new(vec![coords.rows(), d], out)
    }
}

/// Standardizes the columns of `data` (`[n, d]`), eigendecomposes their
/// covariance and keeps the fewest leading components whose cumulative
/// explained-variance ratio reaches `variance_target`.
///
/// Component signs are fixed so the largest-magnitude entry is positive.
pub fn pca_fit<T: Scalar>(data: &Tensor<T>, variance_target: T) -> Result<PcaModel<T>> {
    if !(variance_target > T::zero() && variance_target <= T::one()) {
        return Err(Error::Config(format!(
            "variance target {variance_target} outside (0, 1]"
        )));
    }
    if data.rank() != 2 {
        return Err(Error::Shape(format!(
            "PCA expects a matrix, got {:?}",
            data.shape()
        )));
    }
    let (n, d) = (data.rows(), data.cols());
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let nf = T::from_usize_lossy(n);
    let denom = T::from_usize_lossy(n - 1);

    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        for (j, m) in mean.iter_mut().enumerate() {
            *m = *m + data.at2(i, j);
        }
    }
    for m in &mut mean {
        *m = *m / nf;
    }
    let mut scale = vec![T::zero(); d];
    for i in 0..n {
        for (j, s) in scale.iter_mut().enumerate() {
            let c = data.at2(i, j) - mean[j];
            *s = *s + c * c;
        }
    }
    let floor = T::lit(SCALE_FLOOR);
    for s in &mut scale {
        *s = (*s / denom).sqrt().max(floor);
    }

    let mut cov = vec![T::zero(); d * d];
    let mut z = vec![T::zero(); d];
    for i in 0..n {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = (data.at2(i, j) - mean[j]) / scale[j];
        }
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] = cov[a * d + b] + z[a] * z[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }

    let (values, vectors) = symmetric_eigen(&cov, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eig: Vec<T> = order.iter().map(|&i| values[i].max(T::zero())).collect();
    let total = eig.iter().fold(T::zero(), |a, &b| a + b);

    let k = if total > T::zero() {
        let goal = variance_target - T::lit(1e-12);
        let mut cum = T::zero();
        let mut k = d;
        for (i, &v) in eig.iter().enumerate() {
            cum = cum + v;
            if cum / total >= goal {
                k = i + 1;
                break;
            }
        }
        k
    } else {
        1
    };

    let mut components = Vec::with_capacity(k * d);
    for &col in order.iter().take(k) {
        let mut v: Vec<T> = (0..d).map(|r| vectors[r * d + col]).collect();
        let norm = v.iter().fold(T::zero(), |a, &b| a + b * b).sqrt();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, T::zero()), |best, (i, &x)| {
                if x.abs() > best.1 {
                    (i, x.abs())
                } else {
                    best
                }
            })
            .0;
        let sign = if v[pivot] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        for x in &mut v {
            *x = *x * sign / norm;
        }
        components.extend(v);
    }

    Ok(PcaModel {
        mean,
        scale,
        components: Tensor::new(vec![k, d], components)?,
        explained_variance: eig[..k].to_vec(),
        total_variance: total,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric `d x d` matrix.
/// Returns eigenvalues and a row-major matrix whose columns are the
/// corresponding unit eigenvectors.
pub fn symmetric_eigen<T: Scalar>(matrix: &[T], d: usize) -> (Vec<T>, Vec<T>) {
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); d * d];
    for i in 0..d {
        v[i * d + i] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let tol = T::epsilon() * T::epsilon() * scale * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..d {
            for q in p + 1..d {
                off = off + a[p * d + q] * a[p * d + q];
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == T::zero() {
                    continue;
                }
                let (app, aqq) = (a[p * d + p], a[q * d + q]);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k * d + p], a[k * d + q]);
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p * d + k], a[q * d + k]);
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[i * d + i]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_eigen() {
        let (vals, vecs) = symmetric_eigen(&[3.0f64, 0.0, 0.0, 1.0], 2);
        assert_eq!(vals, vec![3.0, 1.0]);
        assert_eq!(vecs, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn mean_row_maps_to_zero() {
        let data = Tensor::from_rows(&[
            vec![1.0, 2.0],
            vec![3.0, 1.0],
            vec![0.0, 5.0],
            vec![2.0, 2.0],
        ])
        .unwrap();
        let m = pca_fit(&data, 1.0).unwrap();
        let mean = Tensor::new(vec![1, 2], m.mean.clone()).unwrap();
        let z = m.transform(&mean).unwrap();
        assert!(z.data().iter().all(|v: &f64| v.abs() <= 1e-10));
    }

    #[test]
    fn errors() {
        let one = Tensor::from_rows(&[vec![1.0f64, 2.0]]).unwrap();
        assert!(matches!(
            pca_fit(&one, 0.9),
            Err(Error::InsufficientData(_))
        ));
        let two = Tensor::from_rows(&[vec![1.0f64, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(pca_fit(&two, 0.0), Err(Error::Config(_))));
        let m = pca_fit(&two, 1.0).unwrap();
        assert!(m.transform(&Tensor::zeros(vec![1, 3])).is_err());
        assert!(m.inverse(&Tensor::zeros(vec![1, 5])).is_err());
    }
}
