use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Principal-component projection fitted on centered data.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// d × q, orthonormal columns.
    pub components: Matrix,
    /// Sample variance (n − 1 denominator) along each component,
    /// non-increasing.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let q = self.n_components();
        let mut z = vec![0.0; q];
        for (i, (&xi, &mi)) in x.iter().zip(&self.mean).enumerate() {
            let c = xi - mi;
            let row = self.components.row(i);
            for k in 0..q {
                z[k] += c * row[k];
            }
        }
        z
    }

    pub fn project_all(&self, x: &Matrix) -> Matrix {
        let rows: Vec<Vec<f64>> = x.iter_rows().map(|r| self.project(r)).collect();
        Matrix::from_vec(
            x.rows(),
            self.n_components(),
            rows.into_iter().flatten().collect(),
        )
        .expect("projection shape")
    }

    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                self.mean[i]
                    + self
                        .components
                        .row(i)
                        .iter()
                        .zip(z)
                        .map(|(c, zk)| c * zk)
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Fits a `q`-component PCA to the rows of `embeddings`.
///
/// Uses the d×d covariance when `d <= n` and the n×n Gram matrix otherwise;
/// both give the same leading subspace. Each component is sign-normalized so
/// its largest-magnitude coordinate is positive.
pub fn fit_pca(embeddings: &Matrix, q: usize) -> Result<PcaModel> {
    let (n, d) = (embeddings.rows(), embeddings.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs >= 2 rows, got {n}")));
    }
    if q == 0 || q > (n - 1).min(d) {
        return Err(Error::InvalidArgument(format!(
            "q = {q} out of range [1, {}]",
            (n - 1).min(d)
        )));
    }
    let mut mean = vec![0.0; d];
    for r in embeddings.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| embeddings.get(i, j) - mean[j]);
    let total: f64 = centered.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::Data("zero-variance input: all rows identical".into()));
    }
    let denom = (n - 1) as f64;

    let (values, vectors) = if d <= n {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        let vals: Vec<f64> = order[..q].iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs: Vec<Vec<f64>> = order[..q]
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        (vals, vecs)
    } else {
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        let mut vals = Vec::with_capacity(q);
        let mut vecs = Vec::with_capacity(q);
        let scale_floor = eig.eigenvalues.max().abs() * 1e-12;
        for &k in &order[..q] {
            let lambda = eig.eigenvalues[k];
            if lambda <= scale_floor {
                return Err(Error::InvalidArgument(format!(
                    "q = {q} exceeds the numerical rank of the data"
                )));
            }
            let u = eig.eigenvectors.column(k);
            let v = centered.transpose() * u;
            let norm = v.norm();
            vecs.push(v.iter().map(|x| x / norm).collect());
            vals.push(lambda);
        }
        (vals, vecs)
    };

    let mut components = Matrix::zeros(d, q);
    for (k, mut v) in vectors.into_iter().enumerate() {
        normalize_sign(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            components.set(i, k, x);
        }
    }
    let explained_variance = values.into_iter().map(|v| v.max(0.0)).collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
