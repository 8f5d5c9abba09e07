//! Silhouette and Davies-Bouldin on Euclidean distance. Noise rows are
//! ignored by both.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};
use crate::NOISE;

/// Non-noise row indices grouped by label; labels must be dense from 0.
fn groups(data: &Matrix, labels: &[i32]) -> Result<Vec<Vec<usize>>> {
    if labels.len() != data.rows() {
        return Err(Error::format(
            "labels",
            format!("{} labels for {} rows", labels.len(), data.rows()),
        ));
    }
    let k = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    let mut out = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        if l == NOISE {
            continue;
        }
        if l < 0 {
            return Err(Error::format("labels", format!("invalid cluster label {l}")));
        }
        out[l as usize].push(i);
    }
    out.retain(|g| !g.is_empty());
    if out.len() < 2 {
        return Err(Error::Degenerate(format!(
            "silhouette undefined: {} non-empty cluster(s), need at least 2",
            out.len()
        )));
    }
    Ok(out)
}

/// Mean silhouette over non-noise rows. Rows alone in their cluster score 0.
pub fn silhouette(data: &Matrix, labels: &[i32]) -> Result<f64> {
    let groups = groups(data, labels)?;
    let mut owner = vec![usize::MAX; data.rows()];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            owner[i] = g;
        }
    }
    let rows: Vec<usize> = groups.iter().flatten().copied().collect();
    let scores: Vec<f64> = rows
        .par_iter()
        .map(|&i| {
            let own = owner[i];
            if groups[own].len() == 1 {
                return 0.0;
            }
            let mut a = 0.0;
            let mut b = f64::INFINITY;
            for (g, members) in groups.iter().enumerate() {
                let sum: f64 = members.iter().map(|&j| euclidean(data.row(i), data.row(j))).sum();
                if g == own {
                    a = sum / (members.len() - 1) as f64;
                } else {
                    b = b.min(sum / members.len() as f64);
                }
            }
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Davies-Bouldin index. A pair of clusters with coincident centroids makes
/// the index `+inf`.
pub fn davies_bouldin(data: &Matrix, labels: &[i32]) -> Result<f64> {
    let groups = groups(data, labels)?;
    let centroids: Vec<Vec<f64>> = groups.iter().map(|g| data.select_rows(g).mean()).collect();
    let scatter: Vec<f64> = groups
        .iter()
        .zip(&centroids)
        .map(|(g, c)| g.iter().map(|&i| euclidean(data.row(i), c)).sum::<f64>() / g.len() as f64)
        .collect();
    let k = groups.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = euclidean(&centroids[i], &centroids[j]);
            let r = if d > 0.0 {
                (scatter[i] + scatter[j]) / d
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> (Matrix, Vec<i32>) {
        let m = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]]).unwrap();
        (m, vec![0, 0, 1, 1])
    }

    #[test]
    fn four_point_example() {
        let (m, l) = square();
        let b = (4.0 + 17f64.sqrt()) / 2.0;
        let expect = (b - 1.0) / b;
        assert!((silhouette(&m, &l).unwrap() - expect).abs() < 1e-12);
        assert!((davies_bouldin(&m, &l).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fewer_than_two_clusters_is_undefined() {
        let (m, _) = square();
        let err = silhouette(&m, &[0, 0, 0, -1]).unwrap_err();
        assert!(err.to_string().contains("silhouette undefined"));
        assert_eq!(err.kind(), crate::ErrorKind::Degenerate);
    }

    #[test]
    fn noise_rows_are_ignored() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0], [100.0, 100.0]])
            .unwrap();
        let (sq, l) = square();
        let with_noise = silhouette(&m, &[0, 0, 1, 1, NOISE]).unwrap();
        assert_eq!(with_noise, silhouette(&sq, &l).unwrap());
    }

    #[test]
    fn coincident_centroids_give_infinite_db() {
        let m = Matrix::from_rows(&[[0.0], [2.0], [1.0], [1.0]]).unwrap();
        assert_eq!(davies_bouldin(&m, &[0, 0, 1, 1]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn singletons_score_zero() {
        let m = Matrix::from_rows(&[[0.0], [0.1], [5.0]]).unwrap();
        let s = silhouette(&m, &[0, 0, 1]).unwrap();
        let s0 = (5.0 - 0.1) / 5.0;
        let s1 = (4.9 - 0.1) / 4.9;
        assert!((s - (s0 + s1) / 3.0).abs() < 1e-12);
    }
}
