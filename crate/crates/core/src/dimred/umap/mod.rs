//! UMAP: kNN graph → per-point smoothing → fuzzy union → spectral layout →
//! SGD on the fuzzy cross-entropy.
//!
//! Disconnected graphs are embedded one component at a time and the
//! components are then laid out in disjoint regions. Results are
//! bit-reproducible for a fixed seed on one platform; the kNN distance pass
//! runs in parallel but every reduction it performs has a fixed order.

pub mod curve;
pub mod fuzzy;
pub mod knn;
pub mod layout;
pub mod spectral;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use self::fuzzy::{fuzzy_simplicial_set, smooth_knn_distances, Calibration, Graph};
use self::knn::KnnGraph;
use self::layout::Edge;
use super::{pca_fit, ReductionConfig};
use crate::error::Result;
use crate::matrix::{euclidean, Matrix};
use crate::rng::{stream, Domain};

const SPREAD: f64 = 1.0;
/// Minimum centre distance between two components, in units of the sum of
/// their radii.
const COMPONENT_GAP: f64 = 6.0;

/// A fitted embedding plus the intermediate quantities tests inspect.
#[derive(Debug, Clone)]
pub struct UmapFit {
    pub embedding: Matrix,
    pub knn: KnnGraph,
    pub calibration: Calibration,
    pub graph_components: usize,
    pub a: f64,
    pub b: f64,
}

pub fn umap_fit(x: &Matrix, cfg: &ReductionConfig) -> Result<UmapFit> {
    cfg.validate(x.rows(), x.cols())?;
    let n = x.rows();
    let dim = cfg.n_components;
    let knn = knn::knn(x, cfg.umap_neighbors, cfg.seed);
    let calibration = smooth_knn_distances(&knn);
    let mut graph = fuzzy_simplicial_set(&knn, &calibration);
    prune(&mut graph, cfg.umap_epochs);
    let (a, b) = curve::find_ab_params(SPREAD, cfg.umap_min_dist);

    let (n_comp, labels) = spectral::connected_components(&graph);
    if n_comp > 1 {
        log::warn!("kNN graph has {n_comp} connected components; embedding each separately");
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let mut local_of = vec![0usize; n];
    for m in &members {
        for (l, &g) in m.iter().enumerate() {
            local_of[g] = l;
        }
    }

    let mut layouts = Vec::with_capacity(n_comp);
    for (c, m) in members.iter().enumerate() {
        let mut triplets = Vec::new();
        for &g in m {
            let (idx, ws) = graph.row(g);
            for (&j, &w) in idx.iter().zip(ws) {
                triplets.push((local_of[g], local_of[j], w));
            }
        }
        let sub = Graph::from_triplets(m.len(), triplets);
        let mut rng = stream(cfg.seed, Domain::UmapInit, c as u64);
        let init = spectral::spectral_layout(&sub, dim, &mut rng);
        let mut emb = match init {
            Some(mut s) => {
                let max_abs = s.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let jitter = Normal::new(0.0, 1e-4).expect("valid normal");
                for i in 0..s.rows() {
                    for v in s.row_mut(i) {
                        *v = *v * 10.0 / max_abs + jitter.sample(&mut rng);
                    }
                }
                s
            }
            None => {
                if m.len() > dim + 1 {
                    log::warn!("spectral initialisation failed for component {c}; using random init");
                }
                let mut s = Matrix::zeros(m.len(), dim);
                for i in 0..m.len() {
                    for v in s.row_mut(i) {
                        *v = rng.random_range(-10.0..10.0);
                    }
                }
                s
            }
        };
        rescale_to_box(&mut emb, 10.0);
        let edges: Vec<Edge> = (0..sub.n)
            .flat_map(|i| {
                let (idx, ws) = sub.row(i);
                idx.iter().zip(ws).map(move |(&j, &w)| (i, j, w))
            })
            .collect();
        let mut rng = stream(cfg.seed, Domain::UmapLayout, c as u64);
        let mut flat = emb.as_slice().to_vec();
        layout::optimize_layout(&mut flat, dim, sub.n, &edges, cfg.umap_epochs, a, b, &mut rng);
        layouts.push(Matrix::from_vec(sub.n, dim, flat)?);
    }

    let embedding = if n_comp == 1 {
        layouts.pop().expect("one component")
    } else {
        place_components(x, &members, layouts, dim)?
    };
    Ok(UmapFit {
        embedding,
        knn,
        calibration,
        graph_components: n_comp,
        a,
        b,
    })
}

/// Drops edges too weak to be sampled even once in `n_epochs`.
fn prune(g: &mut Graph, n_epochs: usize) {
    let max_w = g.weights.iter().copied().fold(0.0, f64::max);
    let cutoff = max_w / n_epochs as f64;
    let mut triplets = Vec::with_capacity(g.nnz());
    for i in 0..g.n {
        let (idx, ws) = g.row(i);
        for (&j, &w) in idx.iter().zip(ws) {
            if w >= cutoff {
                triplets.push((i, j, w));
            }
        }
    }
    *g = Graph::from_triplets(g.n, triplets);
}

/// Affine map of each column onto `[0, extent]`.
fn rescale_to_box(m: &mut Matrix, extent: f64) {
    for c in 0..m.cols() {
        let (lo, hi) = (0..m.rows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            (lo.min(m.get(i, c)), hi.max(m.get(i, c)))
        });
        let span = hi - lo;
        for i in 0..m.rows() {
            let v = if span > 0.0 {
                extent * (m.get(i, c) - lo) / span
            } else {
                extent / 2.0
            };
            m.set(i, c, v);
        }
    }
}

/// Arranges per-component layouts so that component centres follow the
/// principal axes of the component centroids in input space, spaced so that
/// any two components are at least `COMPONENT_GAP` times the sum of their
/// radii apart.
fn place_components(
    x: &Matrix,
    members: &[Vec<usize>],
    layouts: Vec<Matrix>,
    dim: usize,
) -> Result<Matrix> {
    let k = members.len();
    let centroids: Vec<Vec<f64>> = members.iter().map(|m| x.select_rows(m).mean()).collect();
    let centroid_m = Matrix::from_rows(&centroids)?;
    let n_axes = dim.min(x.cols());
    let mut meta = Matrix::zeros(k, dim);
    if let Ok(model) = pca_fit(&centroid_m, n_axes) {
        let proj = model.transform(&centroid_m);
        for i in 0..k {
            for c in 0..n_axes {
                meta.set(i, c, proj.get(i, c));
            }
        }
    }
    let min_pair = min_pairwise(&meta);
    let max_pair = max_pairwise(&meta);
    if !(min_pair > 1e-9 * max_pair.max(1e-300)) {
        // Coincident projected centroids: fall back to a circle (or a line in 1-D).
        for i in 0..k {
            let t = std::f64::consts::TAU * i as f64 / k as f64;
            meta.set(i, 0, if dim == 1 { i as f64 } else { t.cos() });
            if dim > 1 {
                meta.set(i, 1, t.sin());
            }
            for c in 2..dim {
                meta.set(i, c, 0.0);
            }
        }
    }

    let centres: Vec<Vec<f64>> = layouts.iter().map(|l| l.mean()).collect();
    let radii: Vec<f64> = layouts
        .iter()
        .zip(&centres)
        .map(|(l, c)| l.iter_rows().map(|r| euclidean(r, c)).fold(0.0, f64::max).max(1.0))
        .collect();
    let mut scale: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let d = euclidean(meta.row(i), meta.row(j));
            scale = scale.max(COMPONENT_GAP * (radii[i] + radii[j]) / d);
        }
    }

    let n = x.rows();
    let mut out = Matrix::zeros(n, dim);
    for (c, m) in members.iter().enumerate() {
        for (l, &g) in m.iter().enumerate() {
            for d in 0..dim {
                out.set(
                    g,
                    d,
                    layouts[c].get(l, d) - centres[c][d] + scale * meta.get(c, d),
                );
            }
        }
    }
    Ok(out)
}

fn min_pairwise(m: &Matrix) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..m.rows() {
        for j in i + 1..m.rows() {
            best = best.min(euclidean(m.row(i), m.row(j)));
        }
    }
    best
}

fn max_pairwise(m: &Matrix) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..m.rows() {
        for j in i + 1..m.rows() {
            best = best.max(euclidean(m.row(i), m.row(j)));
        }
    }
    best
}
