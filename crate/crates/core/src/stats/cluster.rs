//! Spectral clustering on a nearest-neighbour graph of a distance matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DistanceMatrix;
use crate::error::{Error, Result};

pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster of each shape. Labels are numbered by first appearance.
    pub labels: Vec<usize>,
    /// Row-normalized spectral coordinates, one row per shape.
    pub embedding: Vec<Vec<f64>>,
    /// Neighbours of each node in the symmetric p-NN graph.
    pub graph: Vec<Vec<usize>>,
    pub components: usize,
    /// Set when the graph has more connected components than clusters.
    pub disconnected: bool,
}

/// Symmetric p-nearest-neighbour graph: `i ~ j` when either lists the other
/// among its `p` nearest. Ties are broken by index.
pub fn knn_graph(d: &DistanceMatrix, p: usize) -> Vec<Vec<usize>> {
    let n = d.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
        for &j in others.iter().take(p) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    adj.iter()
        .map(|row| (0..n).filter(|&j| row[j]).collect())
        .collect()
}

fn count_components(graph: &[Vec<usize>]) -> usize {
    let mut seen = vec![false; graph.len()];
    let mut count = 0;
    for start in 0..graph.len() {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &graph[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

/// `L = I − D^{-1/2} W D^{-1/2}` for binary weights.
pub fn normalized_laplacian(graph: &[Vec<usize>]) -> DMatrix<f64> {
    let n = graph.len();
    let scale: Vec<f64> = graph
        .iter()
        .map(|nb| if nb.is_empty() { 0.0 } else { 1.0 / (nb.len() as f64).sqrt() })
        .collect();
    let mut l = DMatrix::identity(n, n);
    for (i, nb) in graph.iter().enumerate() {
        for &j in nb {
            l[(i, j)] -= scale[i] * scale[j];
        }
    }
    l
}

/// Eigenvectors of the `k` smallest eigenvalues as columns, with rows
/// normalized to unit length.
fn spectral_embedding(l: &DMatrix<f64>, k: usize) -> Vec<Vec<f64>> {
    let eig = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..l.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    (0..l.nrows())
        .map(|r| {
            let row: Vec<f64> = order[..k].iter().map(|&c| eig.eigenvectors[(r, c)]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(c, x)| (c, sq_dist(p, x)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    while centers.len() < k {
        let w: Vec<f64> = points.iter().map(|p| nearest(p, &centers).1).collect();
        let total: f64 = w.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, wi) in w.iter().enumerate() {
                if r < *wi {
                    idx = i;
                    break;
                }
                r -= wi;
            }
            idx
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[pick].clone());
    }
    centers
}

/// Lloyd iterations from k-means++ seeds; returns labels and inertia.
fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let dim = points[0].len();
    let mut centers = kmeans_pp(points, k, rng);
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_ITERATIONS {
        let mut changed = false;
        for (p, l) in points.iter().zip(labels.iter_mut()) {
            let c = nearest(p, &centers).0;
            if *l != c {
                *l = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Re-seed an empty cluster at the point farthest from its centre.
                let far = points
                    .iter()
                    .zip(&labels)
                    .map(|(p, &l)| sq_dist(p, &centers[l]))
                    .enumerate()
                    .fold((0, -1.0), |b, cur| if cur.1 > b.1 { cur } else { b })
                    .0;
                centers[c] = points[far].clone();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    (labels, inertia)
}

/// k-means with k-means++ seeding and restarts; the run with the smallest
/// inertia wins. Points are processed in `order`, so a caller can make the
/// result independent of input order.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, order: &[usize]) -> Vec<usize> {
    let ordered: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(&ordered, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let ordered_labels = best.expect("at least one restart").0;
    let mut labels = vec![0; points.len()];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = ordered_labels[pos];
    }
    labels
}

/// Renumbers labels by first appearance.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// An ordering of the shapes that depends only on the distances themselves:
/// by sorted distance row, then by index.
fn intrinsic_order(d: &DistanceMatrix) -> Vec<usize> {
    let n = d.len();
    let keys: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = d.row(i).to_vec();
            r.sort_by(f64::total_cmp);
            r
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Spectral clustering into `k` groups using a `p`-nearest-neighbour graph.
pub fn spectral_cluster(d: &DistanceMatrix, p: usize, k: usize, seed: u64) -> Result<ClusterResult> {
    let n = d.len();
    if n == 0 || k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if p == 0 || p >= n {
        return Err(Error::invalid(format!("need 1 <= p < n, got p = {p}, n = {n}")));
    }
    let graph = knn_graph(d, p);
    let components = count_components(&graph);
    let disconnected = components > k;
    if disconnected {
        log::warn!("nearest-neighbour graph has {components} components for {k} clusters");
    }
    let embedding = spectral_embedding(&normalized_laplacian(&graph), k);
    let labels = if k == 1 {
        vec![0; n]
    } else {
        canonical_labels(&kmeans(&embedding, k, seed, &intrinsic_order(d)))
    };
    Ok(ClusterResult {
        labels,
        embedding,
        graph,
        components,
        disconnected,
    })
}

/// Fraction of points whose cluster's majority class matches their own.
pub fn purity(labels: &[usize], truth: &[usize]) -> f64 {
    let mut counts: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for (&l, &t) in labels.iter().zip(truth) {
        *counts.entry((l, t)).or_default() += 1;
    }
    let mut best: std::collections::BTreeMap<usize, usize> = Default::default();
    for (&(l, _), &c) in &counts {
        let b = best.entry(l).or_default();
        *b = (*b).max(c);
    }
    best.values().sum::<usize>() as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Points on a line; distances are absolute differences.
    fn line(xs: &[f64]) -> DistanceMatrix {
        let n = xs.len();
        DistanceMatrix::from_values(
            n,
            (0..n * n).map(|k| (xs[k / n] - xs[k % n]).abs()).collect(),
        )
        .unwrap()
    }

    fn two_groups() -> DistanceMatrix {
        let mut xs = vec![0.0; 10];
        xs.extend(vec![1000.0; 10]);
        line(&xs)
    }

    #[test]
    fn separated_groups_are_split() {
        let r = spectral_cluster(&two_groups(), 5, 2, 1).unwrap();
        assert!(r.labels[..10].iter().all(|&l| l == 0));
        assert!(r.labels[10..].iter().all(|&l| l == 1));
        assert_eq!(purity(&r.labels, &[vec![0; 10], vec![1; 10]].concat()), 1.0);
    }

    #[test]
    fn single_cluster() {
        let r = spectral_cluster(&two_groups(), 5, 1, 1).unwrap();
        assert!(r.labels.iter().all(|&l| l == 0));
        assert_eq!(r.embedding[0].len(), 1);
    }

    #[test]
    fn disconnected_graph_is_flagged() {
        let r = spectral_cluster(&line(&[0.0, 0.1, 5.0, 5.1, 9.0, 9.1]), 1, 2, 0).unwrap();
        assert_eq!(r.components, 3);
        assert!(r.disconnected);
    }

    #[test]
    fn graph_is_symmetric_with_binary_weights() {
        let d = line(&[0.0, 1.0, 3.0, 7.0, 15.0]);
        let g = knn_graph(&d, 1);
        for (i, nb) in g.iter().enumerate() {
            for &j in nb {
                assert!(g[j].contains(&i));
            }
        }
        assert_eq!(g[3], vec![2, 4]);
        let l = normalized_laplacian(&g);
        assert!((l.clone() - l.transpose()).norm() < 1e-15);
        let eig = SymmetricEigen::new(l);
        assert!(eig.eigenvalues.iter().all(|&e| e > -1e-12 && e < 2.0 + 1e-12));
    }

    #[test]
    fn partition_is_invariant_under_permutation() {
        let xs = [0.0, 0.3, 0.1, 5.0, 5.2, 5.1, 9.0, 9.3, 9.1, 0.2, 5.3, 9.2];
        let d = line(&xs);
        let r = spectral_cluster(&d, 3, 3, 7).unwrap();
        let perm = [5, 11, 0, 3, 8, 1, 10, 2, 7, 4, 9, 6];
        let rp = spectral_cluster(&d.permuted(&perm), 3, 3, 7).unwrap();
        for a in 0..xs.len() {
            for b in 0..xs.len() {
                let same = r.labels[perm[a]] == r.labels[perm[b]];
                assert_eq!(same, rp.labels[a] == rp.labels[b]);
            }
        }
    }

    #[test]
    fn argument_checks() {
        let d = two_groups();
        assert!(spectral_cluster(&d, 20, 2, 0).is_err());
        assert!(spectral_cluster(&d, 5, 21, 0).is_err());
        assert!(spectral_cluster(&d, 5, 0, 0).is_err());
    }

    #[test]
    fn purity_counts_majorities() {
        assert_eq!(purity(&[0, 0, 1, 1], &[0, 0, 1, 1]), 1.0);
        assert_eq!(purity(&[0, 0, 0, 0], &[0, 0, 1, 1]), 0.5);
        assert_eq!(purity(&[1, 0, 1, 0], &[0, 0, 1, 1]), 0.5);
    }
}
