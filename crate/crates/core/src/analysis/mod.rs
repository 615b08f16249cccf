//! From ablation deltas to clusters: feature matrix construction, per-trial
//! normalization, k selection, and per-cluster summaries.
//!
//! Each ablation group contributes one row: the per-image lateral and
//! rotational output changes, concatenated in probe order (the longitudinal
//! component is dropped as near-constant). Rows are standardized within each
//! trial so output-scale differences between independently trained networks
//! do not dominate the clustering.

mod kmeans;
mod pca;

pub use kmeans::{kmeans, select_k, silhouette, KMeansFit, KSelection};
pub use pca::{pca_2d, Pca2D};

use crate::ablation::AblationDelta;
use crate::error::{Error, Result};

/// Which delta component a feature column carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureComponent {
    Lateral,
    Rotational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMeta {
    pub trial_id: u32,
    pub group_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColMeta {
    pub image_id: usize,
    pub component: FeatureComponent,
}

/// Row-major matrix of ablation-delta features with row/column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n_trials: usize,
    /// Rows per trial (one per ablation group).
    pub n_groups: usize,
    pub n_images: usize,
    pub rows: Vec<RowMeta>,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        2 * self.n_images
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn columns(&self) -> Vec<ColMeta> {
        (0..self.n_images)
            .flat_map(|image_id| {
                [
                    ColMeta { image_id, component: FeatureComponent::Lateral },
                    ColMeta { image_id, component: FeatureComponent::Rotational },
                ]
            })
            .collect()
    }
}

/// Stacks per-trial delta lists into the feature matrix: row (trial, group),
/// columns (lateral, rotational) per image in probe order.
pub fn build_feature_matrix(deltas: &[Vec<AblationDelta>]) -> Result<FeatureMatrix> {
    if deltas.is_empty() || deltas[0].is_empty() {
        return Err(Error::InvalidInput("no deltas to analyze".into()));
    }
    let n_groups = deltas[0].len();
    let n_images = deltas[0][0].delta.len();
    for (t, trial) in deltas.iter().enumerate() {
        if trial.len() != n_groups {
            return Err(Error::InvalidInput(format!(
                "trial {t} has {} groups, expected {n_groups}",
                trial.len()
            )));
        }
        for d in trial {
            if d.delta.len() != n_images {
                return Err(Error::InvalidInput(format!(
                    "trial {t} group {} covers {} images, expected {n_images}",
                    d.group_id,
                    d.delta.len()
                )));
            }
        }
    }
    let mut rows = Vec::with_capacity(deltas.len() * n_groups);
    let mut data = Vec::with_capacity(deltas.len() * n_groups * n_images * 2);
    for trial in deltas {
        for d in trial {
            rows.push(RowMeta {
                trial_id: d.trial_id,
                group_id: d.group_id,
            });
            for img in &d.delta {
                data.push(img[1]); // lateral
                data.push(img[2]); // rotational
            }
        }
    }
    Ok(FeatureMatrix {
        n_trials: deltas.len(),
        n_groups,
        n_images,
        rows,
        data,
    })
}

/// Standardizes each column to mean 0 and sample standard deviation 1
/// within each trial's block of rows; columns with vanishing spread are set
/// to zero.
pub fn normalize_per_trial(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if m.n_groups < 2 {
        return Err(Error::InvalidInput(
            "per-trial normalization needs at least 2 rows per trial".into(),
        ));
    }
    let w = m.n_cols();
    let mut out = m.clone();
    for t in 0..m.n_trials {
        let block = t * m.n_groups;
        for col in 0..w {
            let vals: Vec<f64> = (0..m.n_groups)
                .map(|r| m.data[(block + r) * w + col])
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (vals.len() - 1) as f64;
            let std = var.sqrt();
            for r in 0..m.n_groups {
                let cell = &mut out.data[(block + r) * w + col];
                *cell = if std < 1e-12 { 0.0 } else { (*cell - mean) / std };
            }
        }
    }
    Ok(out)
}

/// Per-cluster aggregate of raw (un-normalized) deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStat {
    pub cluster: usize,
    pub n_members: usize,
    /// Distinct trials represented in this cluster.
    pub coverage: usize,
    /// Mean over members of the image-averaged delta, per action component.
    pub mean_delta: [f64; 3],
    /// Fraction of members whose image-averaged lateral delta agrees with
    /// the cluster's majority sign (exact zeros agree with either side).
    pub sign_consistency_lateral: f64,
}

/// Mean action change and trial coverage per cluster.
pub fn cluster_summary(labels: &[usize], deltas: &[Vec<AblationDelta>]) -> Result<Vec<ClusterStat>> {
    let flat: Vec<&AblationDelta> = deltas.iter().flatten().collect();
    if flat.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} delta rows",
            labels.len(),
            flat.len()
        )));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut stats = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<&AblationDelta> = flat
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(d, _)| *d)
            .collect();
        let mut mean_delta = [0.0; 3];
        let mut trials: Vec<u32> = Vec::new();
        let mut lateral_means = Vec::with_capacity(members.len());
        for d in &members {
            let n_img = d.delta.len() as f64;
            let mut img_avg = [0.0; 3];
            for img in &d.delta {
                for (acc, v) in img_avg.iter_mut().zip(img) {
                    *acc += v;
                }
            }
            for v in &mut img_avg {
                *v /= n_img;
            }
            for (acc, v) in mean_delta.iter_mut().zip(&img_avg) {
                *acc += v;
            }
            lateral_means.push(img_avg[1]);
            if !trials.contains(&d.trial_id) {
                trials.push(d.trial_id);
            }
        }
        if !members.is_empty() {
            for v in &mut mean_delta {
                *v /= members.len() as f64;
            }
        }
        let pos = lateral_means.iter().filter(|v| **v > 0.0).count();
        let neg = lateral_means.iter().filter(|v| **v < 0.0).count();
        let zero = lateral_means.len() - pos - neg;
        let sign_consistency_lateral = if members.is_empty() {
            0.0
        } else {
            (pos.max(neg) + zero) as f64 / members.len() as f64
        };
        stats.push(ClusterStat {
            cluster: c,
            n_members: members.len(),
            coverage: trials.len(),
            mean_delta,
            sign_consistency_lateral,
        });
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            k_min: 2,
            k_max: 12,
            seed: 1,
        }
    }
}

/// Everything the downstream report needs from one analysis run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub n_trials: usize,
    pub n_groups: usize,
    pub n_images: usize,
    pub rows: Vec<RowMeta>,
    /// `(k, mean silhouette)` sweep; empty when no structure was found.
    pub sweep: Vec<(usize, f64)>,
    pub chosen_k: usize,
    pub iqr_multiple: f64,
    pub iqr_zero: bool,
    pub is_iqr_outlier: bool,
    pub labels: Vec<usize>,
    /// Centroids in the normalized feature space.
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Mean silhouette of the chosen clustering on normalized features.
    pub silhouette_normalized: f64,
    /// Same labels scored on the raw (un-normalized) features.
    pub silhouette_raw: f64,
    pub pca: Pca2D,
    pub clusters: Vec<ClusterStat>,
    /// Set when the delta matrix carries no cross-group variation at all.
    pub no_structure: bool,
}

/// Runs the full analysis: feature matrix, per-trial normalization, k sweep
/// with silhouette selection, final clustering, PCA projection, and the
/// per-cluster summary. A degenerate (no-variation) matrix yields a report
/// with `no_structure` set instead of an error.
pub fn analyze(deltas: &[Vec<AblationDelta>], opts: &AnalysisOptions) -> Result<ClusterReport> {
    let raw = build_feature_matrix(deltas)?;
    let normalized = normalize_per_trial(&raw)?;
    let points = normalized.to_points();
    let raw_points = raw.to_points();

    let degenerate = points.iter().all(|p| p == &points[0]);
    if degenerate {
        let labels = vec![0usize; points.len()];
        let clusters = cluster_summary(&labels, deltas)?;
        return Ok(ClusterReport {
            n_trials: raw.n_trials,
            n_groups: raw.n_groups,
            n_images: raw.n_images,
            rows: raw.rows.clone(),
            sweep: Vec::new(),
            chosen_k: 1,
            iqr_multiple: f64::NAN,
            iqr_zero: true,
            is_iqr_outlier: false,
            labels,
            centroids: vec![points[0].clone()],
            inertia: 0.0,
            silhouette_normalized: 0.0,
            silhouette_raw: 0.0,
            pca: pca_2d(&points),
            clusters,
            no_structure: true,
        });
    }

    let sel = select_k(&points, opts.k_min, opts.k_max, opts.seed)?;
    let fit = sel.best_fit.clone();
    let silhouette_normalized = sel
        .sweep
        .iter()
        .find(|(k, _)| *k == sel.chosen_k)
        .map(|(_, s)| *s)
        .expect("chosen k is in the sweep");
    let silhouette_raw = silhouette(&raw_points, &fit.labels)?;
    let pca = pca_2d(&points);
    let clusters = cluster_summary(&fit.labels, deltas)?;
    Ok(ClusterReport {
        n_trials: raw.n_trials,
        n_groups: raw.n_groups,
        n_images: raw.n_images,
        rows: raw.rows.clone(),
        sweep: sel.sweep,
        chosen_k: sel.chosen_k,
        iqr_multiple: sel.iqr_multiple,
        iqr_zero: sel.iqr_zero,
        is_iqr_outlier: sel.is_iqr_outlier,
        labels: fit.labels,
        centroids: fit.centroids,
        inertia: fit.inertia,
        silhouette_normalized,
        silhouette_raw,
        pca,
        clusters,
        no_structure: false,
    })
}
