mod common;

use std::collections::BTreeMap;

use voices::corpus::AnnotationRecord;
use voices::validate::{
    adjusted_rand, apcs, average_purity, davies_bouldin, f1_macro, is_prototypical,
    prototypical_flags, purity_per_cluster, silhouette, PrototypicalRule,
};
use voices::Matrix;

fn four_points() -> (Matrix, Vec<i32>) {
    (
        Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [4.0, 0.0], [4.0, 1.0]]).unwrap(),
        vec![0, 0, 1, 1],
    )
}

#[test]
fn silhouette_of_two_pairs_matches_hand_value() {
    let (x, l) = four_points();
    let b = (4.0 + 17f64.sqrt()) / 2.0;
    let hand = 1.0 - 1.0 / b;
    assert!((silhouette(&x, &l).unwrap() - hand).abs() < 1e-12);
    assert!((hand - 0.7538).abs() < 1e-4);
}

#[test]
fn silhouette_matches_brute_force_on_random_partitions() {
    for seed in 0..10 {
        let x = common::uniform(40, 3, seed);
        let labels: Vec<i32> = (0..40).map(|i| ((i * 7 + seed as usize) % 4) as i32).collect();
        let got = silhouette(&x, &labels).unwrap();
        assert!((got - common::silhouette(&x, &labels)).abs() < 1e-12);
    }
}

#[test]
fn silhouette_singletons_score_zero() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [5.0]]).unwrap();
    let l = [0, 0, 1];
    assert!((silhouette(&x, &l).unwrap() - common::silhouette(&x, &l)).abs() < 1e-12);
}

#[test]
fn coincident_clusters_have_nonpositive_silhouette() {
    let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
    assert!(silhouette(&x, &[0, 0, 1, 1]).unwrap() <= 0.0);
}

#[test]
fn random_labels_give_small_silhouette() {
    use rand::{Rng, SeedableRng};
    let mut total = 0.0;
    for seed in 0..100 {
        let x = common::uniform(200, 2, 1000 + seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let l: Vec<i32> = (0..200).map(|_| rng.random_range(0..3)).collect();
        total += silhouette(&x, &l).unwrap();
    }
    assert!((total / 100.0).abs() < 0.1);
}

#[test]
fn one_cluster_silhouette_is_an_error() {
    let (x, _) = four_points();
    let e = silhouette(&x, &[0, 0, 0, 0]).unwrap_err();
    assert!(e.to_string().contains("silhouette undefined"));
}

#[test]
fn davies_bouldin_hand_values() {
    let (x, l) = four_points();
    assert!((davies_bouldin(&x, &l).unwrap() - 0.25).abs() < 1e-12);
    let z = Matrix::from_rows(&[[0.0], [0.0], [5.0], [5.0]]).unwrap();
    assert_eq!(davies_bouldin(&z, &[0, 0, 1, 1]).unwrap(), 0.0);
}

#[test]
fn davies_bouldin_matches_brute_force_and_ignores_duplication() {
    for seed in 0..10 {
        let x = common::uniform(30, 4, seed);
        let labels: Vec<i32> = (0..30).map(|i| (i % 3) as i32).collect();
        let got = davies_bouldin(&x, &labels).unwrap();
        assert!((got - common::davies_bouldin(&x, &labels)).abs() < 1e-12);

        let doubled: Vec<&[f64]> = x.iter_rows().chain(x.iter_rows()).collect();
        let xx = Matrix::from_rows(&doubled).unwrap();
        let ll: Vec<i32> = labels.iter().chain(&labels).copied().collect();
        assert!((davies_bouldin(&xx, &ll).unwrap() - got).abs() < 1e-9);
    }
}

#[test]
fn coincident_centroids_give_infinite_davies_bouldin() {
    let x = Matrix::from_rows(&[[-1.0], [1.0], [-2.0], [2.0]]).unwrap();
    assert!(davies_bouldin(&x, &[0, 0, 1, 1]).unwrap().is_infinite());
}

#[test]
fn purity_counts() {
    let pc = purity_per_cluster(&[0, 0, 0, 0], &["L", "L", "L", "R"]);
    assert_eq!(pc.len(), 1);
    assert_eq!(pc[0].purity, 0.75);
    assert_eq!(pc[0].distribution["L"], 0.75);
    assert_eq!(pc[0].distribution["R"], 0.25);

    let pc = purity_per_cluster(&[0, 0, 1, 1, -1], &["L", "L", "R", "R", "C"]);
    assert_eq!(average_purity(&pc, false), 1.0);
}

/// Nineteen clusters of 100 rows whose majority shares average 0.51.
#[test]
fn nineteen_cluster_purity_fixture() {
    let shares = [
        44, 47, 58, 51, 49, 55, 46, 52, 50, 53, 48, 57, 45, 54, 51, 50, 56, 47, 56,
    ];
    assert_eq!(shares.len(), 19);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (c, &s) in shares.iter().enumerate() {
        let rest = 100 - s;
        let second = rest / 2;
        for (v, n) in [("left", s), ("right", second), ("center", rest - second)] {
            for _ in 0..n {
                labels.push(c as i32);
                values.push(v);
            }
        }
    }
    let oracle = shares.iter().sum::<usize>() as f64 / 100.0 / 19.0;
    let pc = purity_per_cluster(&labels, &values);
    let avg = average_purity(&pc, false);
    assert!((avg - oracle).abs() < 1e-12);
    assert!((avg - 0.51).abs() < 0.005);
}

fn mbic_baseline() -> BTreeMap<String, f64> {
    [("left", 0.443), ("right", 0.267), ("center", 0.291)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

#[test]
fn prototypical_flags_against_baseline() {
    let base = mbic_baseline();
    let dist: BTreeMap<String, f64> = [("left".to_string(), 0.75), ("right".to_string(), 0.25)].into();
    assert!(is_prototypical(&dist, "left", &base, PrototypicalRule::MajorityShare, 0.10));
    assert!(!is_prototypical(&base, "left", &base, PrototypicalRule::MajorityShare, 0.10));

    let labels = [0, 0, 0, 0, 1, 1, 1, 1];
    let values = ["left", "left", "left", "right", "left", "right", "center", "center"];
    let mut pc = purity_per_cluster(&labels, &values);
    let pct = prototypical_flags(&mut pc, &base, PrototypicalRule::MajorityShare, 0.10);
    assert_eq!(pc[1].majority_value, "center");
    assert!(pc[0].prototypical && pc[1].prototypical);
    assert_eq!(pct, 1.0);
}

#[test]
fn apcs_hand_values() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [h, h]]).unwrap();
    let e = apcs(&x, 0).unwrap();
    assert!(e.exact);
    assert!((e.mean - 2f64.sqrt() / 3.0).abs() < 1e-12);
    assert!((e.mean - 0.4714).abs() < 1e-4);

    let same = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
    assert!((apcs(&same, 0).unwrap().mean - 1.0).abs() < 1e-12);
    let basis = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
    assert_eq!(apcs(&basis, 0).unwrap().mean, 0.0);
    let zero = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
    assert!(apcs(&zero, 0).unwrap_err().to_string().contains("row 1"));
}

fn records(gold: &[&str], pred: &[Option<&str>]) -> Vec<AnnotationRecord> {
    gold.iter()
        .zip(pred)
        .enumerate()
        .map(|(i, (g, p))| AnnotationRecord {
            annotator_id: format!("a{i}"),
            item_id: "i".into(),
            gold_label: g.to_string(),
            predicted_label: p.map(str::to_string),
        })
        .collect()
}

#[test]
fn f1_hand_values() {
    let r = records(&["A", "A", "B", "B"], &[Some("A"), Some("B"), Some("B"), Some("B")]);
    let hand = (2.0 / 3.0 + 0.8) / 2.0;
    assert!((f1_macro(&r).unwrap() - hand).abs() < 1e-12);
    assert!((hand - 0.7333).abs() < 1e-4);

    let r = records(&["A", "B"], &[Some("A"), Some("B")]);
    assert_eq!(f1_macro(&r).unwrap(), 1.0);
    let r = records(&["A", "B"], &[Some("B"), Some("A")]);
    assert_eq!(f1_macro(&r).unwrap(), 0.0);
    let r = records(&["A", "B", "A"], &[Some("A"), None, None]);
    assert!(f1_macro(&r).unwrap_err().to_string().starts_with("2 records"));
}

#[test]
fn ari_matches_pair_enumeration() {
    assert_eq!(adjusted_rand(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
    assert_eq!(adjusted_rand(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
    let a = [0, 0, 1, 1];
    let b = [0, 1, 0, 1];
    let got = adjusted_rand(&a, &b).unwrap();
    assert!(got < 0.0);
    assert!((got - common::ari_by_pairs(&a, &b)).abs() < 1e-12);
    assert!((got + 0.5).abs() < 1e-12);

    for seed in 0..20u64 {
        let a: Vec<i32> = (0..60).map(|i| (i * 13 + seed as i32) % 5).collect();
        let b: Vec<i32> = (0..60).map(|i| ((i * i + 3 * seed as i32) % 4) - 1).collect();
        let got = adjusted_rand(&a, &b).unwrap();
        assert!((got - common::ari_by_pairs(&a, &b)).abs() < 1e-12, "seed {seed}");
    }
}
