//! Gaussian mixture fitted by EM, initialised from k-means.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::check_k;
use super::{canonicalize, kmeans, Algorithm, ClusterAssignment, ClusterConfig, ModelDetail};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Ridge added to every covariance diagonal.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceType {
    Full,
    Diagonal,
}

struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

pub fn gmm(data: &Matrix, cfg: &ClusterConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    check_k(data, cfg.k)?;
    let n = data.rows();
    let k = cfg.k;
    let init = kmeans(
        data,
        &ClusterConfig {
            algorithm: Algorithm::Kmeans,
            ..cfg.clone()
        },
    )?;
    let mut resp = DMatrix::<f64>::zeros(n, k);
    for (i, &l) in init.labels.iter().enumerate() {
        resp[(i, l as usize)] = 1.0;
    }
    let rows: Vec<DVector<f64>> = data
        .iter_rows()
        .map(|r| DVector::from_column_slice(r))
        .collect();

    let mut params = m_step(&rows, &resp, cfg.covariance);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (r, ll) = e_step(&rows, &params)?;
        resp = r;
        if let Some(&prev) = trace.last() {
            if ll - prev < cfg.tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        params = m_step(&rows, &resp, cfg.covariance);
    }
    if !converged {
        // Score the final parameters so labels match the reported model.
        let (r, ll) = e_step(&rows, &params)?;
        resp = r;
        trace.push(ll);
    }

    let raw: Vec<i32> = (0..n)
        .map(|i| {
            let row = resp.row(i);
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best as i32
        })
        .collect();
    let (labels, mut order) = canonicalize(&raw);
    let n_clusters = order.len();
    // Components that own no rows keep their parameters, listed last.
    let unused: Vec<usize> = (0..k).filter(|c| !order.contains(c)).collect();
    order.extend(unused);
    let means: Vec<Vec<f64>> = order
        .iter()
        .map(|&c| params.means[c].iter().copied().collect())
        .collect();
    let mut a = ClusterAssignment {
        labels,
        n_clusters,
        centroids: Some(means[..n_clusters].to_vec()),
        model_detail: ModelDetail::Gmm {
            weights: order.iter().map(|&c| params.weights[c]).collect(),
            means,
            covariances: order
                .iter()
                .map(|&c| params.covs[c].transpose().iter().copied().collect())
                .collect(),
            log_likelihood_trace: trace,
            converged,
        },
        degenerate: None,
    };
    a.flag_degenerate();
    Ok(a)
}

fn m_step(rows: &[DVector<f64>], resp: &DMatrix<f64>, kind: CovarianceType) -> Params {
    let n = rows.len();
    let d = rows[0].len();
    let k = resp.ncols();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = resp.column(c).sum() + 10.0 * f64::EPSILON;
        let mut mean = DVector::zeros(d);
        for (i, x) in rows.iter().enumerate() {
            mean.axpy(resp[(i, c)], x, 1.0);
        }
        mean /= nk;
        let mut cov = DMatrix::zeros(d, d);
        for (i, x) in rows.iter().enumerate() {
            let r = resp[(i, c)];
            if r == 0.0 {
                continue;
            }
            let diff = x - &mean;
            match kind {
                CovarianceType::Full => cov.ger(r, &diff, &diff, 1.0),
                CovarianceType::Diagonal => {
                    for j in 0..d {
                        cov[(j, j)] += r * diff[j] * diff[j];
                    }
                }
            }
        }
        cov /= nk;
        for j in 0..d {
            cov[(j, j)] += COVARIANCE_RIDGE;
        }
        weights.push(nk / n as f64);
        means.push(mean);
        covs.push(cov);
    }
    Params {
        weights,
        means,
        covs,
    }
}

/// Responsibilities and the mean per-row log-likelihood.
fn e_step(rows: &[DVector<f64>], p: &Params) -> Result<(DMatrix<f64>, f64)> {
    let d = rows[0].len() as f64;
    let k = p.weights.len();
    let mut factors = Vec::with_capacity(k);
    for (c, cov) in p.covs.iter().enumerate() {
        let chol = Cholesky::new(cov.clone()).ok_or(Error::SingularCovariance { component: c })?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::SingularCovariance { component: c });
        }
        let norm = p.weights[c].ln() - 0.5 * (d * std::f64::consts::TAU.ln() + log_det);
        factors.push((chol, norm));
    }
    let per_row: Vec<(Vec<f64>, f64)> = rows
        .par_iter()
        .map(|x| {
            let logp: Vec<f64> = factors
                .iter()
                .zip(&p.means)
                .map(|((chol, norm), mean)| {
                    let z = chol
                        .l_dirty()
                        .solve_lower_triangular(&(x - mean))
                        .expect("Cholesky factor has a positive diagonal");
                    norm - 0.5 * z.norm_squared()
                })
                .collect();
            let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logp.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            (logp.iter().map(|v| (v - lse).exp()).collect(), lse)
        })
        .collect();
    let mut resp = DMatrix::zeros(rows.len(), k);
    let mut total = 0.0;
    for (i, (r, lse)) in per_row.into_iter().enumerate() {
        for c in 0..k {
            resp[(i, c)] = r[c];
        }
        total += lse;
    }
    Ok((resp, total / rows.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_component_recovers_sample_moments() {
        let data = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0], [1.0, 3.0], [4.0, 2.0], [3.0, 3.5]])
            .unwrap();
        let a = gmm(&data, &ClusterConfig::gmm(1, 0)).unwrap();
        let ModelDetail::Gmm {
            means, covariances, ..
        } = &a.model_detail
        else {
            panic!()
        };
        let mean = data.mean();
        assert!(means[0].iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-8));
        for r in 0..2 {
            for c in 0..2 {
                let s: f64 = data
                    .iter_rows()
                    .map(|x| (x[r] - mean[r]) * (x[c] - mean[c]))
                    .sum::<f64>()
                    / 5.0;
                let expect = s + if r == c { COVARIANCE_RIDGE } else { 0.0 };
                assert!((covariances[0][r * 2 + c] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn diagonal_model_has_zero_off_diagonals() {
        let data = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.1], [3.0, 2.9]]).unwrap();
        let mut cfg = ClusterConfig::gmm(1, 0);
        cfg.covariance = CovarianceType::Diagonal;
        let a = gmm(&data, &cfg).unwrap();
        let ModelDetail::Gmm { covariances, .. } = &a.model_detail else { panic!() };
        assert_eq!(covariances[0][1], 0.0);
        assert_eq!(covariances[0][2], 0.0);
    }
}
