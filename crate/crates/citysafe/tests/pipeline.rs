//! End-to-end pipeline behavior on the bundled fixture city.

use citysafe::report::{run_pipeline, PipelineError};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

/// run_pipeline consults CITYSAFE_SEED, which is process-global state;
/// every test that runs the pipeline takes this lock.
static ENV_LOCK: Mutex<()> = Mutex::new(());

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .unwrap()
        .join("fixtures/city/config.json")
}

#[test]
fn fixture_city_end_to_end() {
    let _guard = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    std::env::remove_var("CITYSAFE_SEED");
    let out = tempfile::tempdir().unwrap();
    let manifest = run_pipeline(&fixture_config(), Some(out.path()), None).unwrap();

    assert_eq!(manifest.seed, 42);
    assert_eq!(
        manifest.stages_completed,
        ["ingest", "geocode", "features", "model", "cluster", "export"]
    );
    assert_eq!(manifest.inputs.len(), 8, "7 CSVs + the boundary file");

    // Hand-tallied from the fixture CSVs (26 crime rows minus 1 duplicate
    // minus 1 with nothing to geocode).
    let features = fs::read_to_string(out.path().join("features.csv")).unwrap();
    let row = |name: &str| -> Vec<String> {
        features
            .lines()
            .find(|l| l.starts_with(name))
            .unwrap_or_else(|| panic!("no row for {name}"))
            .split(',')
            .map(str::to_string)
            .collect()
    };
    let header: Vec<&str> = features.lines().next().unwrap().split(',').collect();
    let col = |row: &[String], name: &str| -> f64 {
        row[header.iter().position(|h| *h == name).unwrap()]
            .parse()
            .unwrap()
    };
    let riverbend = row("Riverbend");
    assert_eq!(col(&riverbend, "crime_total"), 13.0);
    assert_eq!(col(&riverbend, "crime_theft"), 7.0);
    assert_eq!(col(&riverbend, "crime_assault"), 4.0);
    assert_eq!(col(&riverbend, "crime_break_and_enter"), 2.0);
    assert_eq!(col(&riverbend, "streetlight_count"), 4.0);
    assert_eq!(col(&riverbend, "total_wattage"), 650.0);
    assert_eq!(col(&riverbend, "population"), 12400.0);
    assert_eq!(col(&row("Eastvale"), "crime_total"), 4.0);
    assert_eq!(col(&row("Northcliff"), "crime_total"), 7.0);

    // The three seeded hotspots must win the grid.
    let grid: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("cluster_grid.json")).unwrap())
            .unwrap();
    assert_eq!(grid["best"]["n_clusters"], 3);
    assert!(grid["best"]["silhouette"].as_f64().unwrap() > 0.9);

    let top = fs::read_to_string(out.path().join("top10_crime_total.csv")).unwrap();
    let ranked: Vec<&str> = top.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ranked, ["Riverbend", "Northcliff", "Eastvale"]);

    // Every digest in the manifest matches what is actually on disk.
    for (name, digest) in &manifest.artifacts {
        let bytes = fs::read(out.path().join(name)).unwrap();
        let fresh = {
            use sha2::{Digest, Sha256};
            let mut h = Sha256::new();
            h.update(&bytes);
            format!("{:x}", h.finalize())
        };
        assert_eq!(&fresh, digest, "stale digest for {name}");
    }
}

#[test]
fn seed_precedence_env_then_config() {
    let _guard = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let out = tempfile::tempdir().unwrap();

    std::env::set_var("CITYSAFE_SEED", "7");
    let via_env = run_pipeline(&fixture_config(), Some(out.path()), None).unwrap();
    assert_eq!(via_env.seed, 7);

    let explicit = run_pipeline(&fixture_config(), Some(out.path()), Some(9)).unwrap();
    assert_eq!(explicit.seed, 9, "an explicit seed outranks the environment");

    std::env::set_var("CITYSAFE_SEED", "not a number");
    let err = run_pipeline(&fixture_config(), Some(out.path()), None).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)));

    std::env::remove_var("CITYSAFE_SEED");
    let from_config = run_pipeline(&fixture_config(), Some(out.path()), None).unwrap();
    assert_eq!(from_config.seed, 42);
}

#[test]
fn failed_stage_is_named_and_manifest_still_written() {
    let _guard = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    std::env::remove_var("CITYSAFE_SEED");
    let dir = tempfile::tempdir().unwrap();
    let fixture_dir = fixture_config().parent().unwrap().to_path_buf();
    let mut config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture_config()).unwrap()).unwrap();
    config["datasets"][0]["path"] = "missing.csv".into();
    // Point the other paths back at the fixture directory; the config's
    // relative paths resolve against the config file's own location.
    let config_path = dir.path().join("config.json");
    for entry in config["datasets"].as_array_mut().unwrap().iter_mut().skip(1) {
        let rel = entry["path"].as_str().unwrap().to_string();
        entry["path"] = fixture_dir.join(rel).to_str().unwrap().into();
    }
    config["boundaries"] = fixture_dir.join("boundaries.geojson").to_str().unwrap().into();
    fs::write(&config_path, serde_json::to_string(&config).unwrap()).unwrap();

    let out = dir.path().join("out");
    let err = run_pipeline(&config_path, Some(&out), None).unwrap_err();
    match err {
        PipelineError::Stage { stage, .. } => assert_eq!(stage, "ingest"),
        other => panic!("expected a stage error, got {other}"),
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["stages_completed"].as_array().unwrap().len(), 0);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let _guard = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let mut config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture_config()).unwrap()).unwrap();
    config["bondaries"] = "typo.geojson".into();
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let err = run_pipeline(&path, None, None).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "got {err}");
}

#[test]
fn centroid_substituted_points_need_force() {
    let _guard = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    std::env::remove_var("CITYSAFE_SEED");
    let dir = tempfile::tempdir().unwrap();
    let fixture_dir = fixture_config().parent().unwrap().to_path_buf();

    // Name-only rows: geocoding substitutes each community's centroid, so
    // eight points collapse onto two distinct coordinates.
    let mut csv = String::from("latitude,longitude,community_name,category,date\n");
    for i in 0..8 {
        let name = if i % 2 == 0 { "Riverbend" } else { "Eastvale" };
        csv.push_str(&format!(",,{name},Theft,2023-04-0{}\n", i + 1));
    }
    fs::write(dir.path().join("named.csv"), &csv).unwrap();

    let make_config = |force: bool| {
        serde_json::json!({
            "seed": 1,
            "boundaries": fixture_dir.join("boundaries.geojson"),
            "datasets": [{
                "name": "named",
                "path": dir.path().join("named.csv"),
                "schema": {
                    "latitude": "real",
                    "longitude": "real",
                    "community_name": "text",
                    "category": "text",
                    "date": "date"
                },
                "role": {"role": "crime", "category_column": "category"}
            }],
            "cluster": {
                "dataset": "named",
                "force": force,
                "grid": [{"algorithm": "kmeans", "k": 2}]
            }
        })
    };

    let refused_path = dir.path().join("refused.json");
    fs::write(&refused_path, make_config(false).to_string()).unwrap();
    let err = run_pipeline(&refused_path, Some(&dir.path().join("out1")), None).unwrap_err();
    match err {
        PipelineError::Stage { stage, message } => {
            assert_eq!(stage, "cluster");
            assert!(message.contains("force"), "unhelpful message: {message}");
        }
        other => panic!("expected a cluster stage error, got {other}"),
    }

    let forced_path = dir.path().join("forced.json");
    fs::write(&forced_path, make_config(true).to_string()).unwrap();
    let manifest = run_pipeline(&forced_path, Some(&dir.path().join("out2")), None).unwrap();
    assert!(manifest.artifacts.contains_key("cluster_grid.json"));
}

#[test]
fn cli_exit_codes() {
    let _guard = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    std::env::remove_var("CITYSAFE_SEED");
    let bin = env!("CARGO_BIN_EXE_citysafe");

    let missing = Command::new(bin)
        .args(["run", "--config", "/definitely/not/there.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let fixture_dir = fixture_config().parent().unwrap().to_path_buf();
    let mut config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture_config()).unwrap()).unwrap();
    config["datasets"][0]["path"] = "missing.csv".into();
    for entry in config["datasets"].as_array_mut().unwrap().iter_mut().skip(1) {
        let rel = entry["path"].as_str().unwrap().to_string();
        entry["path"] = fixture_dir.join(rel).to_str().unwrap().into();
    }
    config["boundaries"] = fixture_dir.join("boundaries.geojson").to_str().unwrap().into();
    let config_path = dir.path().join("config.json");
    fs::write(&config_path, config.to_string()).unwrap();
    let broken = Command::new(bin)
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(broken.status.code(), Some(3));

    let ok = Command::new(bin)
        .args(["run", "--config"])
        .arg(fixture_config())
        .arg("--out")
        .arg(dir.path().join("ok"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
