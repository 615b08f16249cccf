//! End-to-end CLI behavior on a deliberately tiny training configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lesion")
}

/// A config that trains in well under a second per trial.
fn tiny_config(out_dir: &Path, trials: usize) -> String {
    format!(
        r#"
seed = 11
trials = {trials}
groups = 10
k_min = 2
k_max = 12
out_dir = "{}"

[training]
train_set_size = 6
epochs = 2
learning_rate = 0.05
batch_size = 3
holdout_size = 3
"#,
        out_dir.display()
    )
}

fn write_config(dir: &Path, contents: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "expected success for {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn snapshot_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

/// Attribute-blind XML well-formedness check: declaration, balanced tags.
fn assert_well_formed_xml(text: &str) {
    assert!(text.starts_with("<?xml"), "missing declaration");
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        rest = &rest[start + 1..];
        let end = rest.find('>').expect("unterminated tag");
        let tag = &rest[..end];
        rest = &rest[end + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            let open = stack.pop().unwrap_or_else(|| panic!("stray closing tag {name}"));
            assert_eq!(open, name, "mismatched closing tag");
        } else if !tag.ends_with('/') {
            let name: String = tag.split_whitespace().next().unwrap().to_string();
            stack.push(name);
        }
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
}

#[test]
fn train_writes_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out, 2));
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);

    assert!(out.join("networks/trial_0.lnet").exists());
    assert!(out.join("networks/trial_1.lnet").exists());
    assert!(out.join("probe.lprobe").exists());
    assert!(out.join("manifest.tsv").exists());

    let first = snapshot_tree(&out);
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    let second = snapshot_tree(&out);
    assert_eq!(first, second, "rerun must overwrite with identical bytes");
}

#[test]
fn unwritable_output_dir_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    // a FILE where the output directory should go
    let blocker = dir.path().join("blocked");
    fs::write(&blocker, "not a directory").unwrap();
    let out_dir = blocker.join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out_dir, 2));
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "exactly one stderr line: {stderr}");
    assert!(stderr.starts_with("error: kind=io detail="), "{stderr}");
}

#[test]
fn ablate_emits_one_row_per_trial_group_image_component() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out, 2));
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    run_ok(&["ablate", "--config", cfg.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("deltas.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert_eq!(rows, 2 * 10 * 24 * 3, "trials x groups x images x components");
    assert!(csv.starts_with("trial,group,image_id,category,component,baseline,ablated,delta"));
}

#[test]
fn ablate_without_training_exits_missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out_dir, 2));
    let out = run(&["ablate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: kind=missing_artifacts"), "{stderr}");
}

#[test]
fn corrupted_network_file_exits_bad_artifact_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out, 2));
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    let victim = out.join("networks/trial_1.lnet");
    let text = fs::read_to_string(&victim).unwrap();
    fs::write(&victim, &text[..text.len() / 3]).unwrap();
    let result = run(&["ablate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(5));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("trial_1.lnet"), "error should name the file: {stderr}");
}

#[test]
fn bad_config_file_exits_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "not_a_known_field = true");
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: kind=config"), "{stderr}");
}

#[test]
fn analyze_writes_summary_with_full_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out, 2));
    run_ok(&["train", "--config", cfg.to_str().unwrap()]);
    run_ok(&["ablate", "--config", cfg.to_str().unwrap()]);
    run_ok(&["analyze", "--config", cfg.to_str().unwrap()]);

    let summary = fs::read_to_string(out.join("report/summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let sweep = parsed["sweep"].as_array().unwrap();
    assert_eq!(sweep.len(), 11, "k swept over 2..=12");
    let chosen = parsed["chosen_k"].as_u64().unwrap();
    assert!((2..=12).contains(&chosen));
    assert!(parsed["coverage"].as_array().unwrap().len() >= 1);
    assert!(parsed["sign_consistency_lateral"].as_array().is_some());
    assert_eq!(parsed["n_features"].as_u64(), Some(48));
    for path in ["sweep.csv", "pca.csv", "centroids.csv", "components.csv", "cluster_means.csv"] {
        assert!(out.join("report").join(path).exists(), "{path} missing");
    }
}

#[test]
fn zero_weight_networks_give_all_zero_deltas_and_no_structure_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out, 2));
    fs::create_dir_all(out.join("networks")).unwrap();
    // hand-write zero networks and a probe: ablation then changes nothing
    let probe = lesion_core::wire::build_probe_set(11);
    lesion_core::wire::save_probe_set(&probe, &out.join("probe.lprobe")).unwrap();
    for t in 0..2 {
        let net = lesion_core::nn::Network::reference_zero();
        // trial ids must match file indices
        let text = lesion_core::nn::network_to_string(&net)
            .replacen("trial 0", &format!("trial {t}"), 1);
        fs::write(out.join(format!("networks/trial_{t}.lnet")), text).unwrap();
    }
    run_ok(&["ablate", "--config", cfg.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("deltas.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let delta = line.rsplit(',').next().unwrap();
        let v: f64 = delta.parse().unwrap();
        assert_eq!(v, 0.0, "zero network must have zero deltas");
    }
    let result = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert!(result.status.success(), "no-structure analysis still exits 0");
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("no_structure"), "warning expected: {stderr}");
    let summary = fs::read_to_string(out.join("report/summary.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(parsed["no_structure"].as_bool(), Some(true));
}

#[test]
fn report_renders_three_well_formed_svgs_with_one_marker_shape_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out, 3));
    run_ok(&["all", "--config", cfg.to_str().unwrap()]);

    for fig in ["fig2_group_deltas.svg", "fig3_pca_clusters.svg", "fig4_cluster_means.svg"] {
        let text = fs::read_to_string(out.join("figures").join(fig)).unwrap();
        assert_well_formed_xml(&text);
    }
    let fig3 = fs::read_to_string(out.join("figures/fig3_pca_clusters.svg")).unwrap();
    let mut shapes: Vec<&str> = fig3
        .match_indices("class=\"marker trial-")
        .map(|(i, _)| {
            let rest = &fig3[i + "class=\"marker trial-".len()..];
            &rest[..rest.find('"').unwrap()]
        })
        .collect();
    shapes.sort();
    shapes.dedup();
    assert_eq!(shapes.len(), 3, "one marker shape per trial: {shapes:?}");
}

#[test]
fn single_cluster_bundle_renders_one_region_covering_the_canvas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let report = out.join("report");
    fs::create_dir_all(&report).unwrap();
    // hand-crafted single-cluster bundle; fig2 disabled (no deltas present)
    let mut config = tiny_config(&out, 2);
    config.push_str("\n[figures]\nfig2 = false\n");
    let cfg = write_config(dir.path(), &config);
    fs::write(report.join("summary.json"), "{}\n").unwrap();
    let mut pca = String::from("row,trial,group,label,pc1,pc2\n");
    for r in 0..6 {
        let trial = r % 2;
        pca.push_str(&format!("{r},{trial},{r},0,{r}.0,-{r}.5\n"));
    }
    fs::write(report.join("pca.csv"), pca).unwrap();
    fs::write(report.join("centroids.csv"), "cluster,pc1,pc2,f0\n0,1.0,2.0,0.0\n").unwrap();
    fs::write(
        report.join("cluster_means.csv"),
        "cluster,n_members,coverage,mean_longitudinal,mean_lateral,mean_rotational,sign_consistency_lateral\n0,6,2,0.0,0.1,-0.2,1.0\n",
    )
    .unwrap();
    run_ok(&["report", "--config", cfg.to_str().unwrap()]);

    let fig3 = fs::read_to_string(out.join("figures/fig3_pca_clusters.svg")).unwrap();
    assert_well_formed_xml(&fig3);
    let mut regions: Vec<&str> = fig3
        .match_indices("class=\"region cluster-")
        .map(|(i, _)| {
            let rest = &fig3[i + "class=\"region cluster-".len()..];
            &rest[..rest.find('"').unwrap()]
        })
        .collect();
    regions.sort();
    regions.dedup();
    assert_eq!(regions, vec!["0"], "one region class covering the whole grid");
}

#[test]
fn full_pipeline_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &tiny_config(&out, 2));
    run_ok(&["all", "--config", cfg.to_str().unwrap()]);
    let first = snapshot_tree(&out);
    run_ok(&["all", "--config", cfg.to_str().unwrap()]);
    let second = snapshot_tree(&out);
    assert_eq!(first, second);
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let cfg = write_config(dir.path(), &tiny_config(&out_a, 2));
    let out_b = dir.path().join("b");
    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--trials",
        "3",
    ]);
    assert!(!out_a.exists());
    assert!(out_b.join("networks/trial_2.lnet").exists());
}
