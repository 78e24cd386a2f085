use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    /// p × q.
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned center.
    pub cost: f64,
    /// Cost after the initial assignment and after every Lloyd iteration.
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansModel {
    pub fn n_clusters(&self) -> usize {
        self.centers.rows()
    }

    /// Index of the nearest center; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        nearest(&self.centers, x)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &Matrix, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter_rows().enumerate() {
        let d = sq_dist(x, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Sum over points of the squared distance to the assigned center.
pub fn kmeans_cost(points: &Matrix, centers: &Matrix, assignments: &[usize]) -> f64 {
    points
        .iter_rows()
        .zip(assignments)
        .map(|(x, &c)| sq_dist(x, centers.row(c)))
        .sum()
}

fn assign(points: &Matrix, centers: &Matrix) -> Vec<usize> {
    (0..points.rows())
        .into_par_iter()
        .map(|i| nearest(centers, points.row(i)))
        .collect()
}

fn plus_plus_init(points: &Matrix, p: usize, rng: &mut impl Rng) -> Matrix {
    let n = points.rows();
    let mut centers = Matrix::zeros(p, points.cols());
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points.iter_rows().map(|x| sq_dist(x, points.row(first))).collect();
    for c in 1..p {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    centers
}

/// Recomputes centers as cluster means. An empty cluster is re-seeded at the
/// point farthest from its currently assigned center, and that point moves
/// to the re-seeded cluster.
fn update_centers(points: &Matrix, assignments: &mut [usize], p: usize) -> Matrix {
    let q = points.cols();
    let mut centers = Matrix::zeros(p, q);
    let mut counts = vec![0usize; p];
    for (x, &c) in points.iter_rows().zip(assignments.iter()) {
        counts[c] += 1;
        for (acc, v) in centers.row_mut(c).iter_mut().zip(x) {
            *acc += v;
        }
    }
    for c in 0..p {
        if counts[c] > 0 {
            let k = counts[c] as f64;
            centers.row_mut(c).iter_mut().for_each(|v| *v /= k);
        }
    }
    let mut taken = vec![false; points.rows()];
    for c in 0..p {
        if counts[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for i in 0..points.rows() {
            let owner = assignments[i];
            if taken[i] || counts[owner] < 2 {
                continue;
            }
            let d = sq_dist(points.row(i), centers.row(owner));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        if let Some(i) = far {
            taken[i] = true;
            counts[assignments[i]] -= 1;
            assignments[i] = c;
            counts[c] = 1;
            let row = points.row(i).to_vec();
            centers.row_mut(c).copy_from_slice(&row);
        }
    }
    centers
}

/// Lloyd's algorithm from a k-means++ start.
///
/// Stops when an iteration leaves every assignment unchanged or after
/// `max_iter` iterations.
pub fn fit_kmeans(points: &Matrix, p: usize, seed: u64, max_iter: usize) -> Result<KMeansModel> {
    let n = points.rows();
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= n, got p = {p}, n = {n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut centers = plus_plus_init(points, p, &mut rng);
    let mut assignments = assign(points, &centers);
    let mut cost_trace = vec![kmeans_cost(points, &centers, &assignments)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut repaired = assignments.clone();
        centers = update_centers(points, &mut repaired, p);
        let next = assign(points, &centers);
        cost_trace.push(kmeans_cost(points, &centers, &next));
        let unchanged = next == assignments;
        assignments = next;
        if unchanged {
            converged = true;
            break;
        }
    }
    let cost = kmeans_cost(points, &centers, &assignments);
    Ok(KMeansModel {
        centers,
        assignments,
        cost,
        cost_trace,
        iterations,
        converged,
    })
}
