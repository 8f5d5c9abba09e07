//! Stochastic gradient descent on the fuzzy cross-entropy.

use rand::Rng as _;

use crate::rng::Rng;

pub const NEGATIVE_SAMPLE_RATE: usize = 5;
const INITIAL_ALPHA: f64 = 1.0;
const GRAD_CLIP: f64 = 4.0;

/// Directed edge `(head, tail, weight)` over local vertex ids.
pub type Edge = (usize, usize, f64);

/// Optimises `embedding` (row-major, `n x dim`) in place. Edges are sampled in
/// proportion to their weight; every positive sample is followed by
/// `NEGATIVE_SAMPLE_RATE` negatives drawn uniformly from the `n` vertices. The
/// schedule is sequential, so results are bit-reproducible for a given `rng`.
pub fn optimize_layout(
    embedding: &mut [f64],
    dim: usize,
    n: usize,
    edges: &[Edge],
    n_epochs: usize,
    a: f64,
    b: f64,
    rng: &mut Rng,
) {
    if edges.is_empty() || n < 2 {
        return;
    }
    let max_w = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    let epochs_per_sample: Vec<f64> = edges.iter().map(|e| max_w / e.2).collect();
    let epochs_per_negative: Vec<f64> = epochs_per_sample
        .iter()
        .map(|e| e / NEGATIVE_SAMPLE_RATE as f64)
        .collect();
    let mut next_sample = epochs_per_sample.clone();
    let mut next_negative = epochs_per_negative.clone();
    let mut cur = vec![0.0; dim];
    let mut diff = vec![0.0; dim];

    for epoch in 0..n_epochs {
        let alpha = INITIAL_ALPHA * (1.0 - epoch as f64 / n_epochs as f64);
        let e = epoch as f64;
        for (k, &(head, tail, _)) in edges.iter().enumerate() {
            if next_sample[k] > e {
                continue;
            }
            cur.copy_from_slice(&embedding[head * dim..(head + 1) * dim]);
            let mut d2 = 0.0;
            for c in 0..dim {
                diff[c] = cur[c] - embedding[tail * dim + c];
                d2 += diff[c] * diff[c];
            }
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for c in 0..dim {
                let g = (coeff * diff[c]).clamp(-GRAD_CLIP, GRAD_CLIP) * alpha;
                cur[c] += g;
                embedding[tail * dim + c] -= g;
            }
            next_sample[k] += epochs_per_sample[k];

            let n_neg = ((e - next_negative[k]) / epochs_per_negative[k]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == head {
                    continue;
                }
                let mut d2 = 0.0;
                for c in 0..dim {
                    diff[c] = cur[c] - embedding[other * dim + c];
                    d2 += diff[c] * diff[c];
                }
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                for c in 0..dim {
                    let g = if coeff > 0.0 {
                        (coeff * diff[c]).clamp(-GRAD_CLIP, GRAD_CLIP)
                    } else {
                        GRAD_CLIP
                    };
                    cur[c] += g * alpha;
                }
            }
            next_negative[k] += n_neg as f64 * epochs_per_negative[k];
            embedding[head * dim..(head + 1) * dim].copy_from_slice(&cur);
        }
    }
}
