//! HDBSCAN over the mutual-reachability graph.
//!
//! Core distances and the minimum spanning tree are computed densely
//! (O(n²) memory-free Prim), which is adequate for the tens of thousands of
//! rows this crate targets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{canonicalize, ClusterAssignment, ClusterConfig, ModelDetail};
use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};
use crate::NOISE;

/// Node of the condensed cluster tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedCluster {
    pub id: usize,
    pub parent: Option<usize>,
    /// `1 / distance` at which the cluster splits off its parent.
    pub birth_lambda: f64,
    pub size: usize,
    pub stability: f64,
    pub selected: bool,
}

pub fn hdbscan(data: &Matrix, cfg: &ClusterConfig) -> Result<ClusterAssignment> {
    cfg.validate()?;
    let n = data.rows();
    if n <= cfg.hdbscan_min_samples {
        return Err(Error::config(format!(
            "hdbscan needs more rows ({n}) than min_samples ({})",
            cfg.hdbscan_min_samples
        )));
    }
    let core = core_distances(data, cfg.hdbscan_min_samples);
    let mst = prim(data, &core);
    let mst_weight = mst.iter().map(|e| e.2).sum();
    let tree = single_linkage(n, mst);
    let mut condensed = condense(&tree, n, cfg.hdbscan_min_cluster_size);
    // The root is a candidate only when it is itself large enough.
    let allow_single = cfg.hdbscan_allow_single_cluster && n >= cfg.hdbscan_min_cluster_size;
    let selected = select(&mut condensed, cfg.hdbscan_eps, allow_single);
    let raw = label_points(&condensed, &selected, n);
    let (labels, _) = canonicalize(&raw);
    let n_clusters = labels.iter().filter(|&&l| l != NOISE).max().map_or(0, |&m| m as usize + 1);
    let noise_count = labels.iter().filter(|&&l| l == NOISE).count();
    let centroids = super::cluster_means(data, &labels, n_clusters);
    let mut a = ClusterAssignment {
        labels,
        n_clusters,
        centroids: Some(centroids),
        model_detail: ModelDetail::Hdbscan {
            condensed: condensed.clusters,
            mst_weight,
            noise_count,
        },
        degenerate: None,
    };
    a.flag_degenerate();
    Ok(a)
}

/// Distance from each row to its `min_samples`-th nearest other row.
pub fn core_distances(data: &Matrix, min_samples: usize) -> Vec<f64> {
    let n = data.rows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(data.row(i), data.row(j)))
                .collect();
            let k = min_samples.min(d.len()) - 1;
            *d.select_nth_unstable_by(k, f64::total_cmp).1
        })
        .collect()
}

/// Minimum spanning tree of the mutual-reachability graph as `(a, b, weight)`
/// edges in the order Prim adds them.
pub fn mutual_reachability_mst(data: &Matrix, min_samples: usize) -> Vec<(usize, usize, f64)> {
    prim(data, &core_distances(data, min_samples))
}

fn prim(data: &Matrix, core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = data.rows();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = euclidean(data.row(current), data.row(j))
                .max(core[current])
                .max(core[j]);
            if d < best[j] {
                best[j] = d;
                from[j] = current;
            }
        }
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("a vertex remains");
        in_tree[next] = true;
        edges.push((from[next], next, best[next]));
        current = next;
    }
    edges
}

/// Merge `n + i` joins `left` and `right` at `distance`.
struct Merge {
    left: usize,
    right: usize,
    distance: f64,
    size: usize,
}

fn single_linkage(n: usize, mut mst: Vec<(usize, usize, f64)>) -> Vec<Merge> {
    mst.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (a, b, d) in mst {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        let node = n + merges.len();
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        merges.push(Merge {
            left: ra,
            right: rb,
            distance: d,
            size: size[node],
        });
    }
    merges
}

fn lambda(distance: f64) -> f64 {
    1.0 / distance.max(1e-300)
}

struct Condensed {
    clusters: Vec<CondensedCluster>,
    /// `(cluster, lambda)` at which each point leaves the tree.
    point_exit: Vec<(usize, f64)>,
}

/// Walks the hierarchy top-down. A split where both sides have at least
/// `min_cluster_size` points creates two child clusters; otherwise the
/// small side's points fall out of the current cluster at that lambda.
fn condense(merges: &[Merge], n: usize, min_cluster_size: usize) -> Condensed {
    let mut clusters = vec![CondensedCluster {
        id: 0,
        parent: None,
        birth_lambda: 0.0,
        size: n,
        stability: 0.0,
        selected: false,
    }];
    let mut point_exit = vec![(0usize, 0.0); n];
    if n == 1 {
        return Condensed {
            clusters,
            point_exit,
        };
    }
    let size_of = |node: usize| if node < n { 1 } else { merges[node - n].size };
    let mut queue = std::collections::VecDeque::from([(2 * n - 2, 0usize)]);
    while let Some((node, cid)) = queue.pop_front() {
        let m = &merges[node - n];
        let l = lambda(m.distance);
        let (ls, rs) = (size_of(m.left), size_of(m.right));
        if ls >= min_cluster_size && rs >= min_cluster_size {
            for child in [m.left, m.right] {
                let id = clusters.len();
                clusters.push(CondensedCluster {
                    id,
                    parent: Some(cid),
                    birth_lambda: l,
                    size: size_of(child),
                    stability: 0.0,
                    selected: false,
                });
                queue.push_back((child, id));
            }
        } else {
            for (child, s) in [(m.left, ls), (m.right, rs)] {
                if s >= min_cluster_size {
                    queue.push_back((child, cid));
                } else {
                    for p in leaves(merges, n, child) {
                        point_exit[p] = (cid, l);
                    }
                }
            }
        }
    }
    for &(c, l) in &point_exit {
        clusters[c].stability += l - clusters[c].birth_lambda;
    }
    for i in 1..clusters.len() {
        let (p, birth, size) = (
            clusters[i].parent.expect("non-root"),
            clusters[i].birth_lambda,
            clusters[i].size,
        );
        clusters[p].stability += (birth - clusters[p].birth_lambda) * size as f64;
    }
    Condensed {
        clusters,
        point_exit,
    }
}

fn leaves(merges: &[Merge], n: usize, node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            stack.push(merges[x - n].left);
            stack.push(merges[x - n].right);
        }
    }
    out
}

/// Excess-of-mass selection followed by the epsilon merge. Marks and returns
/// the selected cluster ids.
fn select(c: &mut Condensed, eps: f64, allow_single: bool) -> Vec<usize> {
    let clusters = &mut c.clusters;
    let m = clusters.len();
    let mut children = vec![Vec::new(); m];
    for cl in clusters.iter().skip(1) {
        children[cl.parent.expect("non-root")].push(cl.id);
    }
    let mut is_sel = vec![false; m];
    let mut subtree = vec![0.0; m];
    // Children always have larger ids than their parent.
    for id in (0..m).rev() {
        if id == 0 && !allow_single && m > 1 {
            break;
        }
        let child_sum: f64 = children[id].iter().map(|&ch| subtree[ch]).sum();
        if children[id].is_empty() || clusters[id].stability >= child_sum {
            is_sel[id] = true;
            subtree[id] = clusters[id].stability;
            let mut stack = children[id].clone();
            while let Some(x) = stack.pop() {
                is_sel[x] = false;
                stack.extend(children[x].iter().copied());
            }
        } else {
            subtree[id] = child_sum;
        }
    }
    if m == 1 && !allow_single {
        is_sel[0] = false;
    }

    let mut selected: Vec<usize> = (0..m).filter(|&i| is_sel[i]).collect();
    if eps > 0.0 {
        let mut merged = Vec::new();
        for &leaf in &selected {
            let mut cur = leaf;
            loop {
                let birth_distance = 1.0 / clusters[cur].birth_lambda;
                if birth_distance >= eps {
                    break;
                }
                match clusters[cur].parent {
                    Some(0) if !allow_single => break,
                    Some(p) => cur = p,
                    None => break,
                }
            }
            merged.push(cur);
        }
        // Drop anything that now sits under another selected cluster.
        merged.sort_unstable();
        merged.dedup();
        let ancestors_selected = |mut x: usize, set: &[usize]| {
            while let Some(p) = clusters[x].parent {
                if set.contains(&p) {
                    return true;
                }
                x = p;
            }
            false
        };
        selected = merged
            .iter()
            .copied()
            .filter(|&x| !ancestors_selected(x, &merged))
            .collect();
    }
    for cl in clusters.iter_mut() {
        cl.selected = selected.contains(&cl.id);
    }
    selected
}

/// Each point takes its nearest selected ancestor (or the cluster it left);
/// points whose chain reaches the root without one are noise.
fn label_points(c: &Condensed, selected: &[usize], n: usize) -> Vec<i32> {
    (0..n)
        .map(|p| {
            let mut x = Some(c.point_exit[p].0);
            while let Some(id) = x {
                if selected.contains(&id) {
                    return id as i32;
                }
                x = c.clusters[id].parent;
            }
            NOISE
        })
        .collect()
}
