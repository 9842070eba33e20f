//! Spherical k-means: Lloyd iterations with cosine assignment and
//! normalized-mean centroids, seeded by angular k-means++.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, clamp_cosine, GeometryError, UnitEmbedding, DEFAULT_EPS_CLAMP, ZERO_NORM};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("need at least k = {k} samples, got {n}")]
    TooFewSamples { n: usize, k: usize },
    #[error("cluster {0} has a degenerate mean and no sample is available to reseed it")]
    DegenerateMean(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 4,
            seed: 0,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<UnitEmbedding>,
    pub assignments: Vec<usize>,
    /// Mean angular distance to the assigned centroid, recorded after every
    /// assignment pass.
    pub objective_history: Vec<f64>,
    pub k: usize,
    pub seed: u64,
}

impl ClusterModel {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, |c| c.dim())
    }

    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

fn angle(a: &[f64], b: &[f64]) -> f64 {
    clamp_cosine(geometry::dot(a, b), DEFAULT_EPS_CLAMP).acos()
}

/// Smallest value `angle` can return.
fn angle_floor() -> f64 {
    (1.0 - DEFAULT_EPS_CLAMP).acos()
}

/// Unclamped angle, zero for identical points. Only used for seeding weights.
fn seed_angle(a: &[f64], b: &[f64]) -> f64 {
    geometry::dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Index of the centroid with maximal cosine similarity; lowest index wins
/// ties.
fn nearest(z: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_cos = f64::NEG_INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let s = geometry::dot(z, c);
        if s > best_cos {
            best = j;
            best_cos = s;
        }
    }
    (best, best_cos)
}

struct State<'a> {
    points: &'a [UnitEmbedding],
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
}

impl State<'_> {
    fn assign(&mut self) {
        let centroids = &self.centroids;
        self.assignments = self
            .points
            .par_iter()
            .map(|z| nearest(z.as_slice(), centroids).0)
            .collect();
    }

    fn distance(&self, i: usize) -> f64 {
        angle(self.points[i].as_slice(), &self.centroids[self.assignments[i]])
    }

    fn objective(&self) -> f64 {
        let total: f64 = (0..self.points.len()).map(|i| self.distance(i)).sum();
        total / self.points.len() as f64
    }

    fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        counts
    }

    /// Sample farthest from its centroid among clusters that would not be
    /// emptied by losing it.
    fn farthest_seizable(&self) -> Option<usize> {
        let counts = self.counts();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.points.len() {
            if counts[self.assignments[i]] < 2 {
                continue;
            }
            let d = self.distance(i);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    fn seize(&mut self, cluster: usize, sample: usize) {
        self.centroids[cluster] = self.points[sample].as_slice().to_vec();
        self.assignments[sample] = cluster;
    }

    /// Assignment pass followed by empty-cluster repair.
    fn assign_and_repair(&mut self) {
        self.assign();
        for _ in 0..=self.centroids.len() {
            let counts = self.counts();
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                return;
            };
            match self.farthest_seizable() {
                Some(i) if self.distance(i) > angle_floor() => self.seize(empty, i),
                _ => return,
            }
            self.assign();
        }
    }

    /// Moves each centroid to its members' normalized mean unless that would
    /// raise the cluster's angular cost.
    fn update(&mut self) -> Result<(), ClusterError> {
        let k = self.centroids.len();
        let d = self.centroids[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        for (z, &a) in self.points.iter().zip(&self.assignments) {
            for (s, x) in sums[a].iter_mut().zip(z.as_slice()) {
                *s += x;
            }
        }
        for (j, sum) in sums.into_iter().enumerate() {
            let members: Vec<usize> = (0..self.points.len())
                .filter(|&i| self.assignments[i] == j)
                .collect();
            if members.is_empty() {
                continue;
            }
            if geometry::l2_norm(&sum) <= ZERO_NORM {
                match self.farthest_seizable() {
                    Some(i) => self.seize(j, i),
                    None => return Err(ClusterError::DegenerateMean(j)),
                }
                continue;
            }
            let candidate = geometry::normalize(&sum)?.into_inner();
            let cost = |c: &[f64]| -> f64 {
                members
                    .iter()
                    .map(|&i| angle(self.points[i].as_slice(), c))
                    .sum()
            };
            if cost(&candidate) <= cost(&self.centroids[j]) {
                self.centroids[j] = candidate;
            }
        }
        Ok(())
    }
}

/// Angular k-means++ seeding with squared-angle weights.
fn seed_centroids(points: &[UnitEmbedding], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|z| seed_angle(z.as_slice(), points[chosen[0]].as_slice()).powi(2))
        .collect();
    min_d2[chosen[0]] = 0.0;
    while chosen.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total implies a positive weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, z) in points.iter().enumerate() {
            let d2 = seed_angle(z.as_slice(), points[next].as_slice()).powi(2);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
        min_d2[next] = 0.0;
    }
    chosen
        .into_iter()
        .map(|i| points[i].as_slice().to_vec())
        .collect()
}

pub fn fit(embeddings: &[UnitEmbedding], cfg: &ClusterConfig) -> Result<ClusterModel, ClusterError> {
    let k = cfg.k;
    if k == 0 {
        return Err(ClusterError::InvalidK);
    }
    let n = embeddings.len();
    if n < k {
        return Err(ClusterError::TooFewSamples { n, k });
    }
    let d = embeddings[0].dim();
    if let Some(bad) = embeddings.iter().find(|z| z.dim() != d) {
        return Err(GeometryError::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        }
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = State {
        points: embeddings,
        centroids: seed_centroids(embeddings, k, &mut rng),
        assignments: vec![0; n],
    };
    state.assign_and_repair();
    let mut history = vec![state.objective()];

    for _ in 0..cfg.max_iters {
        state.update()?;
        state.assign_and_repair();
        let obj = state.objective();
        let prev = *history.last().unwrap();
        history.push(obj);
        if prev - obj < cfg.tol {
            break;
        }
    }

    let centroids = state
        .centroids
        .into_iter()
        .map(UnitEmbedding::from_unit)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClusterModel {
        centroids,
        assignments: state.assignments,
        objective_history: history,
        k,
        seed: cfg.seed,
    })
}

/// Angle between `z` and every centroid, in centroid order.
pub fn angles_to_centroids(model: &ClusterModel, z: &UnitEmbedding) -> Result<Vec<f64>, ClusterError> {
    model
        .centroids
        .iter()
        .map(|c| geometry::spherical_distance(z, c).map_err(ClusterError::from))
        .collect()
}
