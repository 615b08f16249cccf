//! The four pipeline stages and their on-disk artifact layout.
//!
//! ```text
//! <out>/
//!   networks/trial_<i>.lnet    trained networks (text format)
//!   probe.lprobe               shared probe set
//!   manifest.tsv               seeds and final losses
//!   deltas.csv                 one row per (trial, group, image, component)
//!   report/sweep.csv           (k, mean silhouette)
//!   report/pca.csv             per-row projection with cluster label
//!   report/centroids.csv       projected + full-space centroids
//!   report/components.csv      principal directions and variance ratios
//!   report/cluster_means.csv   per-cluster mean deltas and coverage
//!   report/summary.json        machine-readable run summary
//!   figures/fig{2,3,4}_*.svg
//! ```
//!
//! Reruns with the same config overwrite every artifact with identical
//! bytes; nothing here depends on time, locale, or thread schedule.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use lesion_core::ablation::{
    compute_deltas, deltas_from_csv, deltas_to_csv, partition_layer, AblationDelta,
};
use lesion_core::analysis::{analyze, AnalysisOptions, ClusterReport};
use lesion_core::nn::{load_network, save_network};
use lesion_core::textfmt::g17;
use lesion_core::train::{manifest_to_string, run_trials};
use lesion_core::wire::{load_probe_set, save_probe_set};

use crate::config::RunConfig;
use crate::error::{from_core, io_err, CliError, ErrorKind};
use crate::figures;

pub struct Paths {
    pub out: PathBuf,
    pub networks: PathBuf,
    pub probe: PathBuf,
    pub manifest: PathBuf,
    pub deltas: PathBuf,
    pub report: PathBuf,
    pub figures: PathBuf,
}

impl Paths {
    pub fn new(out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
            networks: out.join("networks"),
            probe: out.join("probe.lprobe"),
            manifest: out.join("manifest.tsv"),
            deltas: out.join("deltas.csv"),
            report: out.join("report"),
            figures: out.join("figures"),
        }
    }

    pub fn network(&self, trial: usize) -> PathBuf {
        self.networks.join(format!("trial_{trial}.lnet"))
    }

    pub fn summary(&self) -> PathBuf {
        self.report.join("summary.json")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(e, &format!("writing '{}'", path.display())))
}

fn require(path: &Path, hint: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::new(
            ErrorKind::MissingArtifacts,
            format!("'{}' not found; run `{hint}` first", path.display()),
        ))
    }
}

/// Trains the configured trials and writes networks, probe, and manifest.
pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.out_dir);
    fs::create_dir_all(&paths.networks)
        .map_err(|e| io_err(e, &format!("creating '{}'", paths.networks.display())))?;

    let set = run_trials(&cfg.trial_config(), cfg.trials, cfg.seed)
        .map_err(|e| from_core(e, "training"))?;
    for (i, outcome) in set.trials.iter().enumerate() {
        save_network(&outcome.network, &paths.network(i))
            .map_err(|e| from_core(e, "saving network"))?;
    }
    save_probe_set(&set.probe, &paths.probe).map_err(|e| from_core(e, "saving probe set"))?;
    write_file(&paths.manifest, &manifest_to_string(&set))?;
    Ok(())
}

/// Ablates every group of every trained trial and writes the delta CSV.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.out_dir);
    require(&paths.probe, "train")?;
    let probe = load_probe_set(&paths.probe)
        .map_err(|e| from_core(e, &format!("loading '{}'", paths.probe.display())))?;

    let mut by_trial: Vec<Vec<AblationDelta>> = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let path = paths.network(t);
        require(&path, "train")?;
        let net = load_network(&path)
            .map_err(|e| from_core(e, &format!("loading '{}'", path.display())))?;
        let layer = net.last_dense_index().ok_or_else(|| {
            CliError::new(
                ErrorKind::BadArtifact,
                format!("'{}' has no dense layer to ablate", path.display()),
            )
        })?;
        let partition = partition_layer(&net, layer, cfg.groups)
            .map_err(|e| from_core(e, "partitioning"))?;
        let deltas =
            compute_deltas(&net, &probe, &partition).map_err(|e| from_core(e, "ablating"))?;
        by_trial.push(deltas);
    }
    write_file(&paths.deltas, &deltas_to_csv(&by_trial, &probe))?;
    Ok(())
}

#[derive(Serialize)]
struct SweepEntry {
    k: usize,
    mean_silhouette: f64,
}

/// The documented key set of `report/summary.json`.
#[derive(Serialize)]
struct Summary<'a> {
    schema: &'a str,
    n_trials: usize,
    n_groups: usize,
    n_images: usize,
    n_features: usize,
    k_min: usize,
    k_max: usize,
    chosen_k: usize,
    silhouette_normalized: f64,
    silhouette_raw: f64,
    sweep: Vec<SweepEntry>,
    /// `(best - median) / IQR` over the sweep; null when the IQR is zero.
    iqr_multiple: Option<f64>,
    iqr_zero: bool,
    is_iqr_outlier: bool,
    explained_variance_ratio: [f64; 2],
    inertia: f64,
    coverage: Vec<usize>,
    sign_consistency_lateral: Vec<f64>,
    mean_sign_consistency_lateral: f64,
    no_structure: bool,
}

fn write_report_bundle(paths: &Paths, cfg: &RunConfig, report: &ClusterReport) -> Result<(), CliError> {
    fs::create_dir_all(&paths.report)
        .map_err(|e| io_err(e, &format!("creating '{}'", paths.report.display())))?;

    let mut sweep = String::from("k,mean_silhouette\n");
    for (k, s) in &report.sweep {
        sweep.push_str(&format!("{k},{}\n", g17(*s)));
    }
    write_file(&paths.report.join("sweep.csv"), &sweep)?;

    let mut pca = String::from("row,trial,group,label,pc1,pc2\n");
    for (r, meta) in report.rows.iter().enumerate() {
        pca.push_str(&format!(
            "{r},{},{},{},{},{}\n",
            meta.trial_id,
            meta.group_id,
            report.labels[r],
            g17(report.pca.projections[r][0]),
            g17(report.pca.projections[r][1]),
        ));
    }
    write_file(&paths.report.join("pca.csv"), &pca)?;

    let n_feat = 2 * report.n_images;
    let mut centroids = String::from("cluster,pc1,pc2");
    for f in 0..n_feat {
        centroids.push_str(&format!(",f{f}"));
    }
    centroids.push('\n');
    // Centroids live in the normalized feature space, whose overall column
    // means are exactly zero (each trial block is standardized), so the PCA
    // projection of a centroid is a plain dot with the components.
    for (c, centroid) in report.centroids.iter().enumerate() {
        let p1: f64 = centroid.iter().zip(&report.pca.components[0]).map(|(a, b)| a * b).sum();
        let p2: f64 = centroid.iter().zip(&report.pca.components[1]).map(|(a, b)| a * b).sum();
        centroids.push_str(&format!("{c},{},{}", g17(p1), g17(p2)));
        for v in centroid {
            centroids.push_str(&format!(",{}", g17(*v)));
        }
        centroids.push('\n');
    }
    write_file(&paths.report.join("centroids.csv"), &centroids)?;

    let mut components = String::from("pc,eigenvalue,explained_variance_ratio");
    for f in 0..n_feat {
        components.push_str(&format!(",f{f}"));
    }
    components.push('\n');
    for c in 0..2 {
        components.push_str(&format!(
            "{},{},{}",
            c + 1,
            g17(report.pca.eigenvalues[c]),
            g17(report.pca.explained_variance_ratio[c])
        ));
        for v in &report.pca.components[c] {
            components.push_str(&format!(",{}", g17(*v)));
        }
        components.push('\n');
    }
    write_file(&paths.report.join("components.csv"), &components)?;

    let mut means = String::from(
        "cluster,n_members,coverage,mean_longitudinal,mean_lateral,mean_rotational,sign_consistency_lateral\n",
    );
    for c in &report.clusters {
        means.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.cluster,
            c.n_members,
            c.coverage,
            g17(c.mean_delta[0]),
            g17(c.mean_delta[1]),
            g17(c.mean_delta[2]),
            g17(c.sign_consistency_lateral),
        ));
    }
    write_file(&paths.report.join("cluster_means.csv"), &means)?;

    let mean_sign = if report.clusters.is_empty() {
        0.0
    } else {
        report
            .clusters
            .iter()
            .map(|c| c.sign_consistency_lateral)
            .sum::<f64>()
            / report.clusters.len() as f64
    };
    let summary = Summary {
        schema: "lesion-summary/v1",
        n_trials: report.n_trials,
        n_groups: report.n_groups,
        n_images: report.n_images,
        n_features: n_feat,
        k_min: cfg.k_min,
        k_max: cfg.k_max,
        chosen_k: report.chosen_k,
        silhouette_normalized: report.silhouette_normalized,
        silhouette_raw: report.silhouette_raw,
        sweep: report
            .sweep
            .iter()
            .map(|(k, s)| SweepEntry {
                k: *k,
                mean_silhouette: *s,
            })
            .collect(),
        iqr_multiple: (report.iqr_multiple.is_finite()).then_some(report.iqr_multiple),
        iqr_zero: report.iqr_zero,
        is_iqr_outlier: report.is_iqr_outlier,
        explained_variance_ratio: report.pca.explained_variance_ratio,
        inertia: report.inertia,
        coverage: report.clusters.iter().map(|c| c.coverage).collect(),
        sign_consistency_lateral: report
            .clusters
            .iter()
            .map(|c| c.sign_consistency_lateral)
            .collect(),
        mean_sign_consistency_lateral: mean_sign,
        no_structure: report.no_structure,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&paths.summary(), &format!("{json}\n"))?;
    Ok(())
}

/// Clusters the recorded deltas and writes the report bundle. A degenerate
/// all-alike delta matrix produces a `no_structure` report and a warning,
/// not an error.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.out_dir);
    require(&paths.deltas, "ablate")?;
    let text = fs::read_to_string(&paths.deltas)
        .map_err(|e| io_err(e, &format!("reading '{}'", paths.deltas.display())))?;
    let deltas = deltas_from_csv(&text)
        .map_err(|e| from_core(e, &format!("parsing '{}'", paths.deltas.display())))?;
    let opts = AnalysisOptions {
        k_min: cfg.k_min,
        k_max: cfg.k_max,
        seed: cfg.seed,
    };
    let report = analyze(&deltas, &opts).map_err(|e| from_core(e, "analysis"))?;
    write_report_bundle(&paths, cfg, &report)?;
    if report.no_structure {
        eprintln!("warning: delta matrix has no cross-group structure; report flagged no_structure");
    }
    Ok(())
}

fn parse_csv_rows(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| io_err(e, &format!("reading '{}'", path.display())))?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if !line.trim().is_empty() {
            rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    Ok(rows)
}

fn field_f64(row: &[String], idx: usize, path: &Path) -> Result<f64, CliError> {
    row.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            CliError::new(
                ErrorKind::BadArtifact,
                format!("bad numeric field {idx} in '{}'", path.display()),
            )
        })
}

fn field_usize(row: &[String], idx: usize, path: &Path) -> Result<usize, CliError> {
    row.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            CliError::new(
                ErrorKind::BadArtifact,
                format!("bad integer field {idx} in '{}'", path.display()),
            )
        })
}

/// Renders the configured SVG figures from the report bundle and the delta
/// CSV; analysis is never re-run here.
pub fn cmd_report(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let paths = Paths::new(&cfg.out_dir);
    require(&paths.summary(), "analyze")?;
    fs::create_dir_all(&paths.figures)
        .map_err(|e| io_err(e, &format!("creating '{}'", paths.figures.display())))?;

    if cfg.figures.fig2 {
        require(&paths.deltas, "ablate")?;
        let text = fs::read_to_string(&paths.deltas)
            .map_err(|e| io_err(e, &format!("reading '{}'", paths.deltas.display())))?;
        let deltas = deltas_from_csv(&text)
            .map_err(|e| from_core(e, &format!("parsing '{}'", paths.deltas.display())))?;
        let trial = deltas
            .iter()
            .flatten()
            .find(|d| d.trial_id == cfg.figures.fig2_trial_id)
            .ok_or_else(|| {
                CliError::new(
                    ErrorKind::Config,
                    format!("fig2 trial {} not present in deltas", cfg.figures.fig2_trial_id),
                )
            })?;
        if cfg.figures.fig2_image_id >= trial.delta.len() {
            return Err(CliError::new(
                ErrorKind::Config,
                format!(
                    "fig2 image {} out of range ({} probe images)",
                    cfg.figures.fig2_image_id,
                    trial.delta.len()
                ),
            ));
        }
        let per_group: Vec<[f64; 3]> = deltas
            .iter()
            .flatten()
            .filter(|d| d.trial_id == cfg.figures.fig2_trial_id)
            .map(|d| d.delta[cfg.figures.fig2_image_id])
            .collect();
        let svg = figures::fig2_group_deltas(
            cfg.figures.fig2_trial_id,
            cfg.figures.fig2_image_id,
            &per_group,
        );
        write_file(&paths.figures.join("fig2_group_deltas.svg"), &svg)?;
    }

    if cfg.figures.fig3 {
        let pca_path = paths.report.join("pca.csv");
        let cen_path = paths.report.join("centroids.csv");
        require(&pca_path, "analyze")?;
        require(&cen_path, "analyze")?;
        let mut points = Vec::new();
        for row in parse_csv_rows(&pca_path)? {
            points.push(figures::PcaPoint {
                trial: field_usize(&row, 1, &pca_path)? as u32,
                group: field_usize(&row, 2, &pca_path)?,
                label: field_usize(&row, 3, &pca_path)?,
                pc: [field_f64(&row, 4, &pca_path)?, field_f64(&row, 5, &pca_path)?],
            });
        }
        let mut centroids = Vec::new();
        for row in parse_csv_rows(&cen_path)? {
            centroids.push(figures::CentroidPoint {
                cluster: field_usize(&row, 0, &cen_path)?,
                pc: [field_f64(&row, 1, &cen_path)?, field_f64(&row, 2, &cen_path)?],
            });
        }
        let svg = figures::fig3_pca_scatter(&points, &centroids);
        write_file(&paths.figures.join("fig3_pca_clusters.svg"), &svg)?;
    }

    if cfg.figures.fig4 {
        let means_path = paths.report.join("cluster_means.csv");
        require(&means_path, "analyze")?;
        let mut means = Vec::new();
        for row in parse_csv_rows(&means_path)? {
            means.push(figures::ClusterMeans {
                cluster: field_usize(&row, 0, &means_path)?,
                n_members: field_usize(&row, 1, &means_path)?,
                coverage: field_usize(&row, 2, &means_path)?,
                mean: [
                    field_f64(&row, 3, &means_path)?,
                    field_f64(&row, 4, &means_path)?,
                    field_f64(&row, 5, &means_path)?,
                ],
            });
        }
        let svg = figures::fig4_cluster_means(&means);
        write_file(&paths.figures.join("fig4_cluster_means.svg"), &svg)?;
    }
    Ok(())
}

/// `train`, `ablate`, `analyze`, `report`, in order.
pub fn cmd_all(cfg: &RunConfig) -> Result<(), CliError> {
    cmd_train(cfg)?;
    cmd_ablate(cfg)?;
    cmd_analyze(cfg)?;
    cmd_report(cfg)?;
    Ok(())
}
