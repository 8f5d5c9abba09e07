//! Fuzzy simplicial set construction from a kNN graph.

use super::knn::KnnGraph;

/// Bisection stops once the smoothed weights are this close to `log2(k)`.
pub const SMOOTH_TOLERANCE: f64 = 1e-5;
pub const SMOOTH_MAX_ITERS: usize = 64;

/// Per-point local connectivity: `rho` is the nearest positive neighbour
/// distance, `sigma` the bandwidth solved by bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub rhos: Vec<f64>,
    pub sigmas: Vec<f64>,
}

#[inline]
fn membership(d: f64, rho: f64, sigma: f64) -> f64 {
    let excess = d - rho;
    if excess <= 0.0 {
        1.0
    } else if sigma > 0.0 {
        (-excess / sigma).exp()
    } else {
        0.0
    }
}

pub fn smooth_knn_distances(knn: &KnnGraph) -> Calibration {
    let n = knn.rows();
    let target = (knn.k as f64).log2();
    let mut rhos = vec![0.0; n];
    let mut sigmas = vec![0.0; n];
    for i in 0..n {
        let (_, dists) = knn.neighbors(i);
        let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
        let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
        for _ in 0..SMOOTH_MAX_ITERS {
            let psum: f64 = dists.iter().map(|&d| membership(d, rho, mid)).sum();
            if (psum - target).abs() < SMOOTH_TOLERANCE {
                break;
            }
            if psum > target {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
            }
        }
        rhos[i] = rho;
        sigmas[i] = mid;
    }
    Calibration { rhos, sigmas }
}

/// `|Σ_j exp(-max(0, d_ij - rho_i) / sigma_i) - log2(k)|` for point `i`.
pub fn calibration_residual(knn: &KnnGraph, cal: &Calibration, i: usize) -> f64 {
    let (_, dists) = knn.neighbors(i);
    let psum: f64 = dists
        .iter()
        .map(|&d| membership(d, cal.rhos[i], cal.sigmas[i]))
        .sum();
    (psum - (knn.k as f64).log2()).abs()
}

/// Symmetric sparse weight matrix in CSR form; both directions are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Graph {
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Graph {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut weights = Vec::with_capacity(triplets.len());
        for (i, j, w) in triplets {
            indptr[i + 1] += 1;
            indices.push(j);
            weights.push(w);
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Graph {
            n,
            indptr,
            indices,
            weights,
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.weights[r])
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Directed memberships combined with the probabilistic t-conorm
/// `a + b - a·b`.
pub fn fuzzy_simplicial_set(knn: &KnnGraph, cal: &Calibration) -> Graph {
    let n = knn.rows();
    let mut directed: Vec<(usize, usize, f64)> = Vec::with_capacity(n * knn.k * 2);
    for i in 0..n {
        let (idx, dists) = knn.neighbors(i);
        for (&j, &d) in idx.iter().zip(dists) {
            let w = membership(d, cal.rhos[i], cal.sigmas[i]);
            directed.push((i, j, w));
            directed.push((j, i, -w));
        }
    }
    // Forward entries carry +w, transposed entries -w (-0.0 marks a zero
    // transposed weight); merging a key sees at most one of each.
    directed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(b.2.total_cmp(&a.2)));
    let mut triplets = Vec::with_capacity(directed.len());
    let mut p = 0;
    while p < directed.len() {
        let (i, j) = (directed[p].0, directed[p].1);
        let (mut fwd, mut bwd) = (0.0, 0.0);
        while p < directed.len() && directed[p].0 == i && directed[p].1 == j {
            let w = directed[p].2;
            if w.is_sign_negative() {
                bwd = -w;
            } else {
                fwd = w;
            }
            p += 1;
        }
        let w = fwd + bwd - fwd * bwd;
        if w > 0.0 {
            triplets.push((i, j, w));
        }
    }
    Graph::from_triplets(n, triplets)
}
