//! Lloyd's k-means with k-means++ seeding, restarts, and silhouette scoring.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{mix, seeded_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Nearest centroid by squared distance; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points.iter().map(|p| nearest(p, centroids)).collect()
}

fn inertia_of(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum()
}

/// k-means++ initialization: the first centroid is a uniform pick, each
/// further one is drawn with probability proportional to its squared
/// distance to the closest centroid chosen so far.
fn kmeanspp_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if u < cum {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining points coincide with a chosen centroid; take the
            // lowest index not yet chosen so duplicates stay deterministic.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, &points[next]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn lloyd(points: &[Vec<f64>], k: usize, mut centroids: Vec<Vec<f64>>) -> KMeansFit {
    let dim = points[0].len();
    let max_iter = 300;
    let mut labels = assign(points, &centroids);
    let mut prev_inertia = inertia_of(points, &centroids, &labels);
    for _ in 0..max_iter {
        // Means of each cluster; empty clusters are re-seated on the point
        // farthest from its current centroid.
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
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = std::mem::take(&mut sums[c]);
            }
        }
        let mut reseeded: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] == 0 {
                let far = points
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !reseeded.contains(i))
                    .max_by(|(i, p), (j, q)| {
                        let dp = sq_dist(p, &centroids[labels[*i]]);
                        let dq = sq_dist(q, &centroids[labels[*j]]);
                        dp.partial_cmp(&dq)
                            .unwrap()
                            .then(j.cmp(i)) // ties: lowest index wins the max
                    })
                    .map(|(i, _)| i)
                    .expect("nonempty points");
                centroids[c] = points[far].clone();
                reseeded.push(far);
            }
        }

        let new_labels = assign(points, &centroids);
        let inertia = inertia_of(points, &centroids, &new_labels);
        assert!(
            inertia <= prev_inertia + 1e-9 * (1.0 + prev_inertia.abs()),
            "inertia must not increase across iterations: {inertia} after {prev_inertia}"
        );
        prev_inertia = inertia;
        let converged = new_labels == labels;
        labels = new_labels;
        if converged {
            break;
        }
    }
    let inertia = inertia_of(points, &centroids, &labels);
    KMeansFit {
        labels,
        centroids,
        inertia,
    }
}

/// Best-of-restarts k-means. Each restart draws its own stream from
/// `(seed, restart)`; the lowest-inertia fit wins, first-found on ties.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, n_restarts: usize) -> Result<KMeansFit> {
    if points.is_empty() {
        return Err(Error::InvalidInput("k-means needs at least one point".into()));
    }
    if k == 0 || k > points.len() {
        return Err(Error::InvalidInput(format!(
            "k={k} must be in 1..={} (number of points)",
            points.len()
        )));
    }
    if n_restarts == 0 {
        return Err(Error::InvalidInput("need at least one restart".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidInput("points differ in dimension".into()));
    }
    let mut best: Option<KMeansFit> = None;
    for r in 0..n_restarts {
        let mut rng = seeded_rng("kmeans-restart", mix(seed, r as u64));
        let init = kmeanspp_init(points, k, &mut rng);
        let fit = lloyd(points, k, init);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart ran"))
}

/// Mean silhouette over all points (Euclidean distances). Points in
/// singleton clusters score 0, as does the 0/0 case of coincident points.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::InvalidInput(
            "labels must align with points".into(),
        ));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|s| **s > 0).count() < 2 {
        return Err(Error::InvalidInput(
            "silhouette needs at least two nonempty clusters".into(),
        ));
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] == 1 {
            continue; // singleton convention: s = 0
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        total += if denom == 0.0 { 0.0 } else { (b - a) / denom };
    }
    Ok(total / n as f64)
}

/// Sweep result of [`select_k`].
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub chosen_k: usize,
    /// `(k, mean silhouette)` for every swept k, in k order.
    pub sweep: Vec<(usize, f64)>,
    /// `(best score - median) / IQR` over the sweep; infinite when IQR is 0.
    pub iqr_multiple: f64,
    pub iqr_zero: bool,
    /// Whether the winner stands at least 1.5 IQR above the sweep median.
    pub is_iqr_outlier: bool,
    pub best_fit: KMeansFit,
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Fits every k in `k_min..=k_max` (20 restarts each, derived seeds), scores
/// each fit by mean silhouette, and picks the argmax (lowest k on ties).
pub fn select_k(points: &[Vec<f64>], k_min: usize, k_max: usize, seed: u64) -> Result<KSelection> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::InvalidInput(format!(
            "bad k range {k_min}..={k_max}"
        )));
    }
    if k_max > points.len() {
        return Err(Error::InvalidInput(format!(
            "k_max={k_max} exceeds the number of points ({})",
            points.len()
        )));
    }
    use rayon::prelude::*;
    let fits: Vec<Result<(usize, f64, KMeansFit)>> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let fit = kmeans(points, k, mix(seed, k as u64), 20)?;
            let score = silhouette(points, &fit.labels)?;
            Ok((k, score, fit))
        })
        .collect();

    let mut sweep = Vec::new();
    let mut best: Option<(usize, f64, KMeansFit)> = None;
    for r in fits {
        let (k, score, fit) = r?;
        sweep.push((k, score));
        if best.as_ref().map_or(true, |(_, s, _)| score > *s) {
            best = Some((k, score, fit));
        }
    }
    let (chosen_k, best_score, best_fit) = best.expect("sweep is nonempty");

    let mut scores: Vec<f64> = sweep.iter().map(|(_, s)| *s).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = quantile(&scores, 0.5);
    let iqr = quantile(&scores, 0.75) - quantile(&scores, 0.25);
    let iqr_zero = iqr == 0.0;
    let iqr_multiple = if iqr_zero {
        f64::INFINITY
    } else {
        (best_score - median) / iqr
    };
    Ok(KSelection {
        chosen_k,
        sweep,
        iqr_multiple,
        iqr_zero,
        is_iqr_outlier: iqr_multiple >= 1.5,
        best_fit,
    })
}
