mod common;

use voices::cluster::{
    cluster, core_distances, mutual_reachability_mst, ClusterConfig, ModelDetail,
};
use voices::corpus::{EmbeddingMatrix, RowKey};
use voices::dimred::umap::fuzzy::calibration_residual;
use voices::dimred::umap::umap_fit;
use voices::dimred::{pca_fit, reduce, ReductionConfig};
use voices::{Matrix, NOISE};

fn inertia(x: &Matrix, labels: &[i32]) -> f64 {
    let k = labels.iter().copied().max().unwrap() + 1;
    (0..k)
        .map(|c| {
            let m: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
            let centre: Vec<f64> = (0..x.cols())
                .map(|j| m.iter().map(|&i| x.get(i, j)).sum::<f64>() / m.len() as f64)
                .collect();
            m.iter().map(|&i| common::dist(x.row(i), &centre).powi(2)).sum::<f64>()
        })
        .sum()
}

/// Minimum inertia over every split of the rows into two non-empty groups.
fn best_two_partition(x: &Matrix) -> (f64, Vec<i32>) {
    let n = x.rows();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 1..(1u32 << (n - 1)) {
        let labels: Vec<i32> = (0..n).map(|i| ((mask >> i) & 1) as i32).collect();
        let v = inertia(x, &labels);
        if v < best.0 {
            best = (v, labels);
        }
    }
    best
}

#[test]
fn kmeans_finds_the_optimal_two_partition() {
    let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]]).unwrap();
    let a = cluster(&x, &ClusterConfig::kmeans(2, 0)).unwrap();
    let (opt, _) = best_two_partition(&x);
    let ModelDetail::Kmeans { inertia: got, .. } = a.model_detail else { panic!() };
    assert!((got - opt).abs() < 1e-12);
    assert_eq!(a.labels, vec![0, 0, 1, 1]);
    let c = a.centroids.unwrap();
    assert_eq!(c, vec![vec![0.0, 0.5], vec![4.0, 0.5]]);

    for seed in 0..10 {
        let x = common::uniform(10, 2, seed);
        let a = cluster(&x, &ClusterConfig::kmeans(2, seed)).unwrap();
        let (opt, _) = best_two_partition(&x);
        assert!(inertia(&x, &a.labels) >= opt - 1e-12);
    }
}

#[test]
fn kmeans_inertia_never_increases() {
    for seed in 0..20 {
        let x = common::uniform(300, 3, seed);
        let mut cfg = ClusterConfig::kmeans(2 + seed as usize % 8, seed);
        cfg.tol = 1e-12;
        let a = cluster(&x, &cfg).unwrap();
        let ModelDetail::Kmeans { inertia_trace, .. } = &a.model_detail else { panic!() };
        assert!(inertia_trace.len() > 1);
        for w in inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {w:?}");
        }
    }
}

#[test]
fn gmm_two_blobs() {
    let (x, truth) = common::blobs(&[vec![0.0], vec![10.0]], 50, 0.1, 3);
    let a = cluster(&x, &ClusterConfig::gmm(2, 0)).unwrap();
    let ModelDetail::Gmm { means, .. } = &a.model_detail else { panic!() };
    let mut m: Vec<f64> = means.iter().map(|v| v[0]).collect();
    m.sort_by(f64::total_cmp);
    assert!((m[0] - 0.0).abs() < 0.1 && (m[1] - 10.0).abs() < 0.1);
    for g in 0..2 {
        let own: Vec<f64> = (0..100).filter(|&i| truth[i] == g).map(|i| x.get(i, 0)).collect();
        let sample_mean = own.iter().sum::<f64>() / own.len() as f64;
        assert!(m.iter().any(|v| (v - sample_mean).abs() < 1e-6));
    }
    assert!((common::ari_by_pairs(&a.labels, &truth) - 1.0).abs() < 1e-12);
}

#[test]
fn gmm_log_likelihood_never_decreases() {
    for seed in 0..10 {
        let x = common::uniform(200, 2, 50 + seed);
        let mut cfg = ClusterConfig::gmm(3, seed);
        cfg.tol = 1e-10;
        let a = cluster(&x, &cfg).unwrap();
        let ModelDetail::Gmm { log_likelihood_trace, .. } = &a.model_detail else { panic!() };
        assert!(log_likelihood_trace.len() > 2);
        for w in log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {w:?}");
        }
    }
}

#[test]
fn core_distance_follows_the_self_excluded_rule() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
    assert_eq!(core_distances(&x, 2), vec![2.0, 1.0, 2.0, 9.0]);
    let mr = common::mutual_reachability(&x, 2);
    assert_eq!(mr[0][1], 2.0);
    let weights: Vec<f64> = mutual_reachability_mst(&x, 2).iter().map(|e| e.2).collect();
    assert_eq!(weights.iter().sum::<f64>(), 13.0);
}

#[test]
fn mst_matches_exhaustive_tree_enumeration() {
    for n in 3..=7 {
        for seed in 0..5 {
            let x = common::uniform(n, 2, 100 * n as u64 + seed);
            let mst = mutual_reachability_mst(&x, 2);
            assert_eq!(mst.len(), n - 1);
            let got: f64 = mst.iter().map(|e| e.2).sum();
            let w = common::mutual_reachability(&x, 2);
            assert!((got - common::mst_weight_exhaustive(&w)).abs() < 1e-12);
        }
    }
    for n in 8..=12 {
        for seed in 0..5 {
            let x = common::uniform(n, 3, 100 * n as u64 + seed);
            for ms in [2, 3] {
                let got: f64 = mutual_reachability_mst(&x, ms).iter().map(|e| e.2).sum();
                let w = common::mutual_reachability(&x, ms);
                assert!((got - common::mst_weight_kruskal(&w)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn hdbscan_two_blobs_and_outliers() {
    let (blobs, _) = common::blobs(&[vec![0.0, 0.0], vec![10.0, 10.0]], 20, 0.5, 9);
    let mut rows: Vec<Vec<f64>> = blobs.iter_rows().map(<[f64]>::to_vec).collect();
    rows.extend([vec![50.0, -40.0], vec![-45.0, 60.0], vec![80.0, 80.0]]);
    let x = Matrix::from_rows(&rows).unwrap();
    let a = cluster(&x, &ClusterConfig::hdbscan(5, 5)).unwrap();
    assert_eq!(a.n_clusters, 2);
    assert_eq!(a.noise_count(), 3);
    assert!(a.labels[40..].iter().all(|&l| l == NOISE));
    assert!(a.labels[..20].iter().all(|&l| l == a.labels[0]));
    assert!(a.labels[20..40].iter().all(|&l| l == a.labels[20]));
}

#[test]
fn hdbscan_single_tight_lattice() {
    let rows: Vec<[f64; 2]> = (0..16).map(|i| [(i % 4) as f64 * 0.01, (i / 4) as f64 * 0.01]).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let a = cluster(&x, &ClusterConfig::hdbscan(2, 2)).unwrap();
    assert_eq!(a.n_clusters, 1);
    assert_eq!(a.noise_count(), 0);

    let a = cluster(&x, &ClusterConfig::hdbscan(20, 2)).unwrap();
    assert_eq!(a.n_clusters, 0);
    assert_eq!(a.noise_count(), 16);
    assert!(a.is_degenerate());
}

#[test]
fn pca_matches_jacobi_oracle() {
    for seed in 0..10 {
        let x = common::uniform(5, 5, 300 + seed);
        let model = pca_fit(&x, 5).unwrap();
        let (values, vectors) = common::jacobi_eigen(&common::covariance(&x));
        for c in 0..5 {
            assert!((model.explained_variance[c] - values[c]).abs() < 1e-8);
            // The trailing eigenvalue is zero for five centred rows, so only
            // the leading four directions are unique up to sign.
            if c < 4 {
                let dot: f64 = model.components.row(c).iter().zip(&vectors[c]).map(|(a, b)| a * b).sum();
                assert!((dot.abs() - 1.0).abs() < 1e-8, "seed {seed} component {c}");
            }
        }
        for a in 0..5 {
            for b in 0..5 {
                let dot: f64 = model.components.row(a).iter().zip(model.components.row(b)).map(|(p, q)| p * q).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn pca_closed_form_and_translation_invariance() {
    let x = Matrix::from_rows(&[[2.0, 0.0], [-2.0, 0.0], [0.0, 2f64.sqrt()], [0.0, -(2f64.sqrt())]])
        .unwrap();
    let model = pca_fit(&x, 2).unwrap();
    assert!((model.explained_variance[0] / model.explained_variance[1] - 2.0).abs() < 1e-12);
    assert!((model.components.get(0, 0).abs() - 1.0).abs() < 1e-12);

    let y = common::uniform(50, 6, 4);
    let shifted: Vec<Vec<f64>> = y
        .iter_rows()
        .map(|r| r.iter().enumerate().map(|(j, v)| v + 3.0 * j as f64 - 7.0).collect())
        .collect();
    let shifted = Matrix::from_rows(&shifted).unwrap();
    let a = pca_fit(&y, 3).unwrap();
    let b = pca_fit(&shifted, 3).unwrap();
    let (pa, pb) = (a.transform(&y), b.transform(&shifted));
    for (u, v) in pa.as_slice().iter().zip(pb.as_slice()) {
        assert!((u - v).abs() < 1e-8);
    }
    for c in 0..3 {
        let col: Vec<f64> = (0..50).map(|i| pa.get(i, c)).collect();
        let var = col.iter().map(|v| v * v).sum::<f64>() / 49.0;
        assert!((var - a.explained_variance[c]).abs() < 1e-8);
    }

    let line = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
    let m = pca_fit(&line, 2).unwrap();
    assert!(m.explained_variance[1].abs() < 1e-12);
}

fn keyed(x: &Matrix) -> EmbeddingMatrix {
    let keys = (0..x.rows()).map(|i| RowKey::new(format!("a{i}"), "i")).collect();
    EmbeddingMatrix::new(x.clone(), keys).unwrap()
}

#[test]
fn umap_calibration_and_separation() {
    let (x, truth) = common::blobs(&[vec![0.0; 8], { let mut c = vec![0.0; 8]; c[0] = 20.0; c }], 100, 0.1, 5);
    let cfg = ReductionConfig {
        umap_neighbors: 15,
        umap_min_dist: 0.1,
        ..ReductionConfig::umap(1)
    };
    let fit = umap_fit(&x, &cfg).unwrap();
    for i in 0..x.rows() {
        assert!(calibration_residual(&fit.knn, &fit.calibration, i) < 1e-3);
    }
    let e = &fit.embedding;
    let group = |g: i32| -> Vec<usize> { (0..200).filter(|&i| truth[i] == g).collect() };
    let diameter = |m: &[usize]| {
        let mut d: f64 = 0.0;
        for &i in m {
            for &j in m {
                d = d.max(common::dist(e.row(i), e.row(j)));
            }
        }
        d
    };
    let centre = |m: &[usize]| -> Vec<f64> {
        (0..2).map(|c| m.iter().map(|&i| e.get(i, c)).sum::<f64>() / m.len() as f64).collect()
    };
    let (g0, g1) = (group(0), group(1));
    let sep = common::dist(&centre(&g0), &centre(&g1));
    assert!(sep > 5.0 * diameter(&g0).max(diameter(&g1)), "separation {sep}");
}

#[test]
fn umap_is_trustworthy_on_blobs() {
    let centres: Vec<Vec<f64>> = (0..4)
        .map(|g| (0..10).map(|j| if j == g { 10.0 } else { 0.0 }).collect())
        .collect();
    let (x, _) = common::blobs(&centres, 60, 1.0, 11);
    let cfg = ReductionConfig {
        umap_neighbors: 15,
        umap_min_dist: 0.1,
        ..ReductionConfig::umap(2)
    };
    let out = reduce(&keyed(&x), &cfg).unwrap();
    let t = common::trustworthiness(&x, &out.values, 10);
    assert!(t >= 0.95, "trustworthiness {t}");
}

#[test]
fn reduction_preserves_rows_and_is_deterministic() {
    let (x, _) = common::blobs(&[vec![0.0; 5], vec![3.0; 5]], 40, 1.0, 8);
    let emb = keyed(&x);
    for cfg in [
        ReductionConfig::none(),
        ReductionConfig::pca(2),
        ReductionConfig { umap_neighbors: 10, ..ReductionConfig::umap(4) },
    ] {
        let a = reduce(&emb, &cfg).unwrap();
        let b = reduce(&emb, &cfg).unwrap();
        assert_eq!(a.row_index, emb.row_index());
        assert_eq!(a.values.as_slice(), b.values.as_slice());
    }
    assert_eq!(reduce(&emb, &ReductionConfig::none()).unwrap().values, x);
}
