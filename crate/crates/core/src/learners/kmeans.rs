//! Lloyd's k-means with deterministic farthest-point seeding.

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn distinct_count(vectors: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = vectors
        .iter()
        .map(|v| v.iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

impl KMeans {
    /// The first centroid is the vector at `seed mod n`; each further one is
    /// the vector farthest from those already chosen (lowest index on ties).
    /// Iterates until assignments stop changing or `max_iters` is reached.
    pub fn fit(vectors: &[Vec<f64>], k: usize, max_iters: usize, seed: u64) -> Result<Self> {
        if k == 0 || vectors.is_empty() {
            return Err(SimError::InvalidArgument("k-means needs k ≥ 1 and data".into()));
        }
        let dim = vectors[0].len();
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(SimError::InvalidArgument("vectors of unequal length".into()));
        }
        let distinct = distinct_count(vectors);
        if k > distinct {
            return Err(SimError::TooManyClusters { k, distinct });
        }

        let n = vectors.len();
        let mut centroids = vec![vectors[(seed % n as u64) as usize].clone()];
        let mut min_d: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &centroids[0])).collect();
        while centroids.len() < k {
            let mut far = 0;
            for i in 1..n {
                if min_d[i] > min_d[far] {
                    far = i;
                }
            }
            let c = vectors[far].clone();
            for (d, v) in min_d.iter_mut().zip(vectors) {
                *d = d.min(sq_dist(v, &c));
            }
            centroids.push(c);
        }

        let mut assignment = vec![usize::MAX; n];
        let mut history = Vec::new();
        let mut iterations = 0;
        while iterations < max_iters.max(1) {
            iterations += 1;
            let mut changed = false;
            let mut inertia = 0.0;
            for (a, v) in assignment.iter_mut().zip(vectors) {
                let (c, d) = nearest(&centroids, v);
                inertia += d;
                if *a != c {
                    *a = c;
                    changed = true;
                }
            }
            history.push(inertia);
            if !changed {
                break;
            }
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (a, v) in assignment.iter().zip(vectors) {
                counts[*a] += 1;
                for (s, x) in sums[*a].iter_mut().zip(v) {
                    *s += x;
                }
            }
            for ((c, s), &m) in centroids.iter_mut().zip(sums).zip(&counts) {
                // An empty cluster keeps its centroid.
                if m > 0 {
                    *c = s.into_iter().map(|x| x / m as f64).collect();
                }
            }
        }
        Ok(Self {
            centroids,
            inertia_history: history,
            iterations,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn predict(&self, v: &[f64]) -> usize {
        nearest(&self.centroids, v).0
    }
}

/// Per-column z-scoring fitted on a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(vectors: &[Vec<f64>]) -> Self {
        let dim = vectors.first().map_or(0, Vec::len);
        let n = vectors.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m) / n;
            }
        }
        let scale = var.into_iter().map(|s| if s > 1e-12 { s.sqrt() } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}
