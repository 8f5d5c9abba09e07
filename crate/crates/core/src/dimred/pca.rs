use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Above this dimension PCA goes through a thin SVD of the centred data
/// instead of materialising the covariance matrix.
const COVARIANCE_MAX_DIM: usize = 512;

/// Fitted principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// `n_components x dim`, orthonormal rows.
    pub components: Matrix,
    /// Sample variance (denominator `n - 1`) along each component, nonincreasing.
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
}

impl PcaModel {
    /// `(x - mean) · componentsᵀ`.
    pub fn transform(&self, x: &Matrix) -> Matrix {
        self.transform_range(x, 0..self.components.rows())
    }

    pub fn transform_range(&self, x: &Matrix, range: Range<usize>) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), range.len());
        let mut centred = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for ((c, v), m) in centred.iter_mut().zip(x.row(i)).zip(&self.mean) {
                *c = v - m;
            }
            for (k, comp) in range.clone().enumerate() {
                out.set(i, k, dot(&centred, self.components.row(comp)));
            }
        }
        out
    }
}

pub fn pca_fit(x: &Matrix, n_components: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::Degenerate("PCA needs at least 2 rows".into()));
    }
    if n_components > d {
        return Err(Error::config(format!(
            "n_components ({n_components}) exceeds dimension ({d})"
        )));
    }
    let mean = x.mean();
    let centred = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - mean[j]);

    let (mut axes, mut variances): (Vec<Vec<f64>>, Vec<f64>) = if d <= COVARIANCE_MAX_DIM {
        let cov = centred.transpose() * &centred / (n as f64 - 1.0);
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        order
            .into_iter()
            .map(|k| {
                let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
                (v, eig.eigenvalues[k].max(0.0))
            })
            .unzip()
    } else {
        let svd = centred.clone().svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .total_cmp(&svd.singular_values[a])
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .map(|k| {
                let s = svd.singular_values[k];
                (vt.row(k).iter().copied().collect(), s * s / (n as f64 - 1.0))
            })
            .unzip()
    };
    axes.truncate(n_components);
    variances.truncate(n_components);
    complete_orthonormal(&mut axes, d);
    variances.resize(n_components, 0.0);

    for v in axes.iter_mut() {
        // Deterministic sign: the largest-magnitude coordinate is positive.
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map_or(0, |p| p.0);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
    Ok(PcaModel {
        components: Matrix::from_rows(&axes)?,
        explained_variance: variances,
        mean,
    })
}

/// Extends `axes` with standard-basis directions (Gram–Schmidt) until it has
/// `target` orthonormal rows. Only needed when the data has fewer
/// usable directions than requested.
fn complete_orthonormal(axes: &mut Vec<Vec<f64>>, dim: usize) {
    let target = axes.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(target);
    let mut candidates = axes.drain(..).collect::<Vec<_>>().into_iter().chain((0..dim).map(|j| {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        e
    }));
    while basis.len() < target {
        let Some(mut v) = candidates.next() else { break };
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    *axes = basis;
}
