//! Spectral initialisation and connected components of the fuzzy graph.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::fuzzy::Graph;
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Component label per vertex (labels in first-visit order) and component count.
pub fn connected_components(g: &Graph) -> (usize, Vec<usize>) {
    let mut label = vec![usize::MAX; g.n];
    let mut count = 0;
    let mut stack = Vec::new();
    for s in 0..g.n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = count;
        stack.push(s);
        while let Some(v) = stack.pop() {
            for &u in g.row(v).0 {
                if label[u] == usize::MAX {
                    label[u] = count;
                    stack.push(u);
                }
            }
        }
        count += 1;
    }
    (count, label)
}

/// Leading non-trivial eigenvectors of `D^-1/2 W D^-1/2` (equivalently the
/// smallest of the normalised Laplacian) for a connected graph, found by
/// block subspace iteration with Rayleigh–Ritz extraction. Returns `None`
/// when the graph is too small or the iteration breaks down.
pub fn spectral_layout(g: &Graph, dim: usize, rng: &mut Rng) -> Option<Matrix> {
    const EXTRA: usize = 3;
    const MAX_ITERS: usize = 300;
    const CHECK_EVERY: usize = 10;
    // Ritz values converge with the square of the vector error.
    const TOL: f64 = 1e-12;
    let n = g.n;
    let p = dim + EXTRA;
    if n <= dim + 1 || n < p + 2 {
        return None;
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = g.row(i).1.iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    if inv_sqrt_deg.iter().any(|&v| v == 0.0) {
        return None;
    }
    // Known top eigenvector: sqrt(degree), normalised.
    let mut top: Vec<f64> = inv_sqrt_deg.iter().map(|v| 1.0 / v).collect();
    normalize(&mut top)?;

    // (I + M) / 2 has the same eigenvectors with spectrum in [0, 1].
    let apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let (idx, ws) = g.row(i);
            let mut acc = 0.0;
            for (&j, &w) in idx.iter().zip(ws) {
                acc += w * inv_sqrt_deg[j] * v[j];
            }
            out[i] = 0.5 * (v[i] + inv_sqrt_deg[i] * acc);
        }
    };

    let mut q: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    orthonormalize(&mut q, &top, rng)?;
    let mut scratch = vec![0.0; n];
    let mut prev_ritz: Option<Vec<f64>> = None;
    for it in 1..=MAX_ITERS {
        for v in q.iter_mut() {
            apply(v, &mut scratch);
            v.copy_from_slice(&scratch);
        }
        orthonormalize(&mut q, &top, rng)?;
        if it % CHECK_EVERY == 0 {
            let (vals, _) = rayleigh_ritz(&q, &apply, n)?;
            let lead = vals[..dim].to_vec();
            if let Some(prev) = &prev_ritz {
                if lead.iter().zip(prev).all(|(a, b)| (a - b).abs() < TOL) {
                    break;
                }
            }
            prev_ritz = Some(lead);
        }
    }
    let (_, vecs) = rayleigh_ritz(&q, &apply, n)?;
    let mut out = Matrix::zeros(n, dim);
    for c in 0..dim {
        for i in 0..n {
            let v: f64 = (0..p).map(|r| q[r][i] * vecs[(r, c)]).sum();
            out.set(i, c, v);
        }
    }
    if out.first_non_finite().is_some() {
        return None;
    }
    Some(out)
}

/// Ritz values (descending) and the matching coefficient columns.
fn rayleigh_ritz(
    q: &[Vec<f64>],
    apply: &impl Fn(&[f64], &mut [f64]),
    n: usize,
) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let p = q.len();
    let mut aq = vec![vec![0.0; n]; p];
    for (v, out) in q.iter().zip(aq.iter_mut()) {
        apply(v, out);
    }
    let t = DMatrix::from_fn(p, p, |r, c| {
        let a: f64 = q[r].iter().zip(&aq[c]).map(|(x, y)| x * y).sum();
        let b: f64 = q[c].iter().zip(&aq[r]).map(|(x, y)| x * y).sum();
        0.5 * (a + b)
    });
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    if order.iter().any(|&k| !eig.eigenvalues[k].is_finite()) {
        return None;
    }
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    Some((vals, vecs))
}

fn normalize(v: &mut [f64]) -> Option<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 1e-300) || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(())
}

/// Modified Gram–Schmidt against `top` and each other; collapsed vectors are
/// replaced by fresh random ones.
fn orthonormalize(q: &mut [Vec<f64>], top: &[f64], rng: &mut Rng) -> Option<()> {
    for r in 0..q.len() {
        for attempt in 0..3 {
            let (done, rest) = q.split_at_mut(r);
            let v = &mut rest[0];
            for _ in 0..2 {
                for b in std::iter::once(top).chain(done.iter().map(|d| d.as_slice())) {
                    let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 && norm.is_finite() {
                v.iter_mut().for_each(|x| *x /= norm);
                break;
            }
            if attempt == 2 {
                return None;
            }
            v.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
        }
    }
    Some(())
}
