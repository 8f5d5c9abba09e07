//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's own metric or solver code.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use voices::Matrix;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Gaussian blobs, `per` points each, in centre order.
pub fn blobs(centres: &[Vec<f64>], per: usize, spread: f64, seed: u64) -> (Matrix, Vec<i32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).unwrap();
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for (g, c) in centres.iter().enumerate() {
        for _ in 0..per {
            rows.push(c.iter().map(|v| v + noise.sample(&mut rng)).collect::<Vec<f64>>());
            truth.push(g as i32);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), truth)
}

pub fn uniform(rows: usize, cols: usize, seed: u64) -> Matrix {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, v).unwrap()
}

pub fn silhouette(x: &Matrix, labels: &[i32]) -> f64 {
    let n = x.rows();
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..n {
        if labels[i] < 0 {
            continue;
        }
        count += 1;
        let own = (0..n).filter(|&j| labels[j] == labels[i]).count();
        if own == 1 {
            continue;
        }
        let a = (0..n)
            .filter(|&j| j != i && labels[j] == labels[i])
            .map(|j| dist(x.row(i), x.row(j)))
            .sum::<f64>()
            / (own - 1) as f64;
        let mut others: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0 && l != labels[i]).collect();
        others.sort();
        others.dedup();
        let b = others
            .iter()
            .map(|&c| {
                let m: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                m.iter().map(|&j| dist(x.row(i), x.row(j))).sum::<f64>() / m.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / count as f64
}

pub fn davies_bouldin(x: &Matrix, labels: &[i32]) -> f64 {
    let mut ids: Vec<i32> = labels.iter().copied().filter(|&l| l >= 0).collect();
    ids.sort();
    ids.dedup();
    let d = x.cols();
    let mut centroids = Vec::new();
    let mut scatter = Vec::new();
    for &c in &ids {
        let m: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
        let centre: Vec<f64> = (0..d)
            .map(|j| m.iter().map(|&i| x.get(i, j)).sum::<f64>() / m.len() as f64)
            .collect();
        scatter.push(m.iter().map(|&i| dist(x.row(i), &centre)).sum::<f64>() / m.len() as f64);
        centroids.push(centre);
    }
    let k = ids.len();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (scatter[i] + scatter[j]) / dist(&centroids[i], &centroids[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

/// ARI from an explicit enumeration of all point pairs.
pub fn ari_by_pairs(a: &[i32], b: &[i32]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            pairs += 1.0;
            in_a += sa as u8 as f64;
            in_b += sb as u8 as f64;
            both += (sa && sb) as u8 as f64;
        }
    }
    let expected = in_a * in_b / pairs;
    let max = 0.5 * (in_a + in_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Cyclic Jacobi eigensolver for a symmetric matrix: eigenvalues descending
/// and matching eigenvectors.
pub fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a = m.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| v.iter().map(|row| row[i]).collect()).collect();
    (values, vectors)
}

/// Sample covariance (denominator n - 1).
pub fn covariance(x: &Matrix) -> Vec<Vec<f64>> {
    let (n, d) = (x.rows(), x.cols());
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    (0..n).map(|i| (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b])).sum::<f64>()
                        / (n - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// Mutual-reachability distances with core distance taken as the distance to
/// the `min_samples`-th nearest other point.
pub fn mutual_reachability(x: &Matrix, min_samples: usize) -> Vec<Vec<f64>> {
    let n = x.rows();
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(x.row(i), x.row(j))).collect();
            d.sort_by(f64::total_cmp);
            d[min_samples - 1]
        })
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        core[i].max(core[j]).max(dist(x.row(i), x.row(j)))
                    }
                })
                .collect()
        })
        .collect()
}

/// Minimum spanning tree weight by enumerating every labelled tree through
/// its Prüfer sequence. Exponential: keep `n` small.
pub fn mst_weight_exhaustive(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return w[0][1];
    }
    let mut seq = vec![0usize; n - 2];
    let mut best = f64::INFINITY;
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut total = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&i| degree[i] == 1).unwrap();
            total += w[leaf][s];
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
        total += w[rest[0]][rest[1]];
        best = best.min(total);

        let mut pos = 0;
        loop {
            if pos == seq.len() {
                return best;
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

/// Minimum spanning tree weight by Kruskal over all edges.
pub fn mst_weight_kruskal(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let mut edges: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (w[i][j], i, j))
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut total = 0.0;
    for (d, i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            total += d;
        }
    }
    total
}

/// Trustworthiness of a low-dimensional embedding with neighbourhood size k.
pub fn trustworthiness(high: &Matrix, low: &Matrix, k: usize) -> f64 {
    let n = high.rows();
    let ranked = |x: &Matrix, i: usize| {
        let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        idx.sort_by(|&a, &b| dist(x.row(i), x.row(a)).total_cmp(&dist(x.row(i), x.row(b))));
        idx
    };
    let mut penalty = 0.0;
    for i in 0..n {
        let hi = ranked(high, i);
        let lo = ranked(low, i);
        let mut rank = vec![0usize; n];
        for (r, &j) in hi.iter().enumerate() {
            rank[j] = r + 1;
        }
        for &j in &lo[..k] {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}
