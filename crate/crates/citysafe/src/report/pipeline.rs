//! End-to-end orchestration: one JSON config in, a directory of artifacts
//! and a manifest out.
//!
//! Stages run in a fixed order — ingest, geocode, features, model,
//! cluster, export — and any failure aborts with the stage name after
//! writing a partial manifest of whatever finished. With identical inputs,
//! config, and seeds, every numeric artifact is byte-identical between
//! runs; only the manifest timestamp moves.

use crate::cluster::{grid_search, ClusterParams, Metric, PointSet};
use crate::features::{
    aggregate_by_community, monthly_series, top_k, CommunityFeatureTable, DatasetRole,
};
use crate::geocode::{geocode_dataset, load_boundaries, BoundarySet, GeocodeColumns};
use crate::ingest::{
    drop_duplicates, impute_missing, map_incident_category, parse_table, CategoryRuleSet,
    CleaningPolicy, ColumnKind, Dataset, TableSchema, Value,
};
use crate::model::{
    chi_square_select, feature_importance_report, forest_report, ols_report, pearson_matrix,
    Design, ForestConfig, ModelReport,
};
use crate::report::{export_choropleth, export_cluster_map};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Unreadable or invalid configuration — the run never started.
    #[error("config error: {0}")]
    Config(String),
    /// A stage failed; a partial manifest was written where possible.
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    /// Default output directory; the CLI `--out` flag overrides it.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub boundaries: PathBuf,
    #[serde(default = "default_name_property")]
    pub boundary_name_property: String,
    #[serde(default = "default_community_column")]
    pub community_column: String,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub cluster: Option<ClusterStageConfig>,
    #[serde(default)]
    pub exports: ExportConfig,
}

fn default_name_property() -> String {
    "name".to_string()
}

fn default_community_column() -> String {
    "community_name".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub schema: TableSchema,
    /// How the dataset contributes community features; None = not
    /// aggregated (still cleaned, geocoded, and exportable).
    #[serde(default)]
    pub role: Option<DatasetRole>,
    #[serde(default = "default_true")]
    pub geocode: bool,
    #[serde(default)]
    pub geocode_columns: GeocodeColumns,
    #[serde(default)]
    pub policy: Option<CleaningPolicy>,
    /// Free-text description column to map into a `category` column.
    #[serde(default)]
    pub category_column: Option<String>,
    /// Keyword rules JSON; None = the built-in traffic rules.
    #[serde(default)]
    pub category_rules: Option<PathBuf>,
    /// Date column for the monthly trend artifact.
    #[serde(default)]
    pub date_column: Option<String>,
    #[serde(default)]
    pub series_category_column: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub targets: Vec<String>,
    /// None = every feature column except the targets.
    #[serde(default)]
    pub predictors: Option<Vec<String>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub forest: ForestConfig,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_bins() -> usize {
    4
}

fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterStageConfig {
    /// Which ingested dataset provides the points.
    pub dataset: String,
    pub grid: Vec<ClusterParams>,
    #[serde(default)]
    pub metric: Metric,
    /// Run even when the coordinates look centroid-substituted.
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    #[serde(default)]
    pub choropleth_metrics: Vec<String>,
    #[serde(default = "default_choropleth_bins")]
    pub choropleth_bins: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_choropleth_bins() -> usize {
    5
}

fn default_top_k() -> usize {
    10
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub created_utc: String,
    pub seed: u64,
    pub config_path: String,
    pub config_sha256: String,
    /// Input path → content digest.
    pub inputs: BTreeMap<String, String>,
    /// Artifact name (relative to the output directory) → content digest.
    pub artifacts: BTreeMap<String, String>,
    pub stages_completed: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

struct Emitter {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Emitter {
    fn emit(&mut self, stage: &'static str, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| PipelineError::Stage {
            stage,
            message: format!("writing {}: {e}", path.display()),
        })?;
        self.manifest
            .artifacts
            .insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn emit_json(
        &mut self,
        stage: &'static str,
        name: &str,
        value: &serde_json::Value,
    ) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(value).expect("json serialization");
        text.push('\n');
        self.emit(stage, name, text.as_bytes())
    }

    /// Best-effort partial manifest so a failed run still says what it made.
    fn write_manifest(&mut self) {
        let path = self.out_dir.join("manifest.json");
        if let Ok(mut text) = serde_json::to_string_pretty(&self.manifest) {
            text.push('\n');
            let _ = fs::write(path, text);
        }
    }
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// Reads numeric lat/lon columns into a point set; rows missing either
/// coordinate are skipped. Ids are the surviving row indices.
fn point_set_of(d: &Dataset, cols: &GeocodeColumns) -> Result<PointSet, String> {
    let lat_idx = d
        .column_index(&cols.latitude)
        .ok_or_else(|| format!("dataset `{}` has no column `{}`", d.name, cols.latitude))?;
    let lon_idx = d
        .column_index(&cols.longitude)
        .ok_or_else(|| format!("dataset `{}` has no column `{}`", d.name, cols.longitude))?;
    let mut ids = Vec::new();
    let mut points = Vec::new();
    for (i, row) in d.rows.iter().enumerate() {
        if let (Some(lat), Some(lon)) = (row[lat_idx].as_f64(), row[lon_idx].as_f64()) {
            ids.push(i.to_string());
            points.push([lat, lon]);
        }
    }
    PointSet::new(ids, points).map_err(|e| e.to_string())
}

fn series_csv(d: &Dataset, date_column: &str, category_column: Option<&str>) -> Result<String, String> {
    let ts = monthly_series(d, date_column, category_column).map_err(|e| e.to_string())?;
    let mut out = String::from("year,month,category,count\n");
    for e in &ts.entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.year,
            e.month,
            e.category.as_deref().unwrap_or(""),
            e.count
        ));
    }
    Ok(out)
}

/// Runs the whole pipeline described by the config file.
///
/// Input paths inside the config resolve relative to the config file's
/// directory. `out_override` (the CLI `--out`) wins over the config's
/// `out_dir`; `seed_override` and then the `CITYSAFE_SEED` environment
/// variable win over the config's seed.
pub fn run_pipeline(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<RunManifest, PipelineError> {
    let raw = fs::read(config_path)
        .map_err(|e| PipelineError::Config(format!("reading {}: {e}", config_path.display())))?;
    let cfg: PipelineConfig = serde_json::from_slice(&raw)
        .map_err(|e| PipelineError::Config(format!("parsing {}: {e}", config_path.display())))?;
    let mut seed = seed_override.unwrap_or(cfg.seed);
    if seed_override.is_none() {
        if let Ok(text) = std::env::var("CITYSAFE_SEED") {
            seed = text
                .trim()
                .parse()
                .map_err(|_| PipelineError::Config(format!("CITYSAFE_SEED is not a u64: {text:?}")))?;
        }
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let out_dir = out_override
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone().map(|p| resolve(&p)))
        .unwrap_or_else(|| base.join("out"));
    fs::create_dir_all(&out_dir)
        .map_err(|e| PipelineError::Config(format!("creating {}: {e}", out_dir.display())))?;

    let mut em = Emitter {
        out_dir,
        manifest: RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            seed,
            config_path: config_path.display().to_string(),
            config_sha256: sha256_hex(&raw),
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            stages_completed: Vec::new(),
        },
    };

    match run_stages(&cfg, seed, &resolve, &mut em) {
        Ok(()) => {
            em.write_manifest();
            Ok(em.manifest)
        }
        Err(e) => {
            em.write_manifest();
            Err(e)
        }
    }
}

fn run_stages(
    cfg: &PipelineConfig,
    seed: u64,
    resolve: &dyn Fn(&Path) -> PathBuf,
    em: &mut Emitter,
) -> Result<(), PipelineError> {
    // ---- ingest ---------------------------------------------------------
    let stage = "ingest";
    let mut datasets: BTreeMap<String, Dataset> = BTreeMap::new();
    for dc in &cfg.datasets {
        let path = resolve(&dc.path);
        let bytes = fs::read(&path).map_err(|e| PipelineError::Stage {
            stage,
            message: format!("reading {}: {e}", path.display()),
        })?;
        em.manifest
            .inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        let mut d = parse_table(bytes.as_slice(), &dc.name, &dc.schema).map_err(stage_err(stage))?;
        let policy = dc.policy.clone().unwrap_or_default();
        if policy.dedup {
            d = drop_duplicates(&d);
        }
        d = impute_missing(&d, &policy).map_err(stage_err(stage))?;
        if let Some(desc_col) = &dc.category_column {
            let rules = match &dc.category_rules {
                Some(p) => {
                    let rule_path = resolve(p);
                    let rule_bytes = fs::read(&rule_path).map_err(|e| PipelineError::Stage {
                        stage,
                        message: format!("reading {}: {e}", rule_path.display()),
                    })?;
                    em.manifest
                        .inputs
                        .insert(rule_path.display().to_string(), sha256_hex(&rule_bytes));
                    CategoryRuleSet::from_json(&rule_bytes).map_err(stage_err(stage))?
                }
                None => CategoryRuleSet::default_rules(),
            };
            let idx = d.column_index(desc_col).ok_or_else(|| PipelineError::Stage {
                stage,
                message: format!("dataset `{}` has no column `{desc_col}`", dc.name),
            })?;
            let categories: Vec<Value> = d
                .rows
                .iter()
                .map(|row| match row[idx].as_text() {
                    Some(text) => Value::Text(map_incident_category(text, &rules)),
                    None => Value::Null,
                })
                .collect();
            d.push_column("category", ColumnKind::Text, categories);
        }
        datasets.insert(dc.name.clone(), d);
    }
    em.manifest.stages_completed.push("ingest".into());

    // ---- geocode --------------------------------------------------------
    let stage = "geocode";
    let bpath = resolve(&cfg.boundaries);
    let bbytes = fs::read(&bpath).map_err(|e| PipelineError::Stage {
        stage,
        message: format!("reading {}: {e}", bpath.display()),
    })?;
    em.manifest
        .inputs
        .insert(bpath.display().to_string(), sha256_hex(&bbytes));
    let boundaries: BoundarySet =
        load_boundaries(&bbytes, &cfg.boundary_name_property).map_err(stage_err(stage))?;
    for dc in &cfg.datasets {
        if !dc.geocode {
            continue;
        }
        let d = datasets.get(&dc.name).expect("ingested dataset");
        let outcome = geocode_dataset(d, &boundaries, &dc.geocode_columns).map_err(stage_err(stage))?;
        if !outcome.flagged.is_empty() {
            log::warn!(
                "geocode: {} rows of `{}` could not be resolved to a community",
                outcome.flagged.len(),
                dc.name
            );
        }
        em.emit(
            stage,
            &format!("{}_geocoded.csv", dc.name),
            outcome.dataset.to_csv_string().as_bytes(),
        )?;
        datasets.insert(dc.name.clone(), outcome.dataset);
    }
    em.manifest.stages_completed.push("geocode".into());

    // ---- features -------------------------------------------------------
    let stage = "features";
    let role_pairs: Vec<(Dataset, DatasetRole)> = cfg
        .datasets
        .iter()
        .filter_map(|dc| {
            dc.role
                .clone()
                .map(|role| (datasets.get(&dc.name).expect("ingested dataset").clone(), role))
        })
        .collect();
    let table: CommunityFeatureTable =
        aggregate_by_community(&role_pairs, &boundaries, &cfg.community_column)
            .map_err(stage_err(stage))?;
    em.emit(stage, "features.csv", table.to_csv_string().as_bytes())?;
    em.emit_json(stage, "features.json", &table.to_json())?;
    for dc in &cfg.datasets {
        if let Some(date_col) = &dc.date_column {
            let d = datasets.get(&dc.name).expect("ingested dataset");
            let csv = series_csv(d, date_col, dc.series_category_column.as_deref())
                .map_err(|m| PipelineError::Stage { stage, message: m })?;
            em.emit(stage, &format!("{}_monthly.csv", dc.name), csv.as_bytes())?;
        }
    }
    em.manifest.stages_completed.push("features".into());

    // ---- model ----------------------------------------------------------
    let stage = "model";
    if let Some(mc) = &cfg.model {
        let all_predictors: Vec<String> = match &mc.predictors {
            Some(p) => p.clone(),
            None => table
                .columns
                .iter()
                .filter(|c| !mc.targets.contains(c))
                .cloned()
                .collect(),
        };
        let mut corr_columns = mc.targets.clone();
        corr_columns.extend(all_predictors.iter().cloned());
        corr_columns.dedup();
        let corr = pearson_matrix(&table, &corr_columns).map_err(stage_err(stage))?;
        em.emit(stage, "correlation.csv", corr.to_csv_string().as_bytes())?;
        em.emit_json(
            stage,
            "correlation.json",
            &serde_json::to_value(&corr).expect("correlation json"),
        )?;
        let mut reports: Vec<ModelReport> = Vec::new();
        for target in &mc.targets {
            let predictors: Vec<String> = all_predictors
                .iter()
                .filter(|p| *p != target)
                .cloned()
                .collect();
            let selection = chi_square_select(&table, target, &predictors, mc.alpha, mc.bins)
                .map_err(stage_err(stage))?;
            em.emit_json(
                stage,
                &format!("selection_{target}.json"),
                &serde_json::to_value(&selection).expect("selection json"),
            )?;
            let mut chosen = selection.selected_names();
            if chosen.is_empty() {
                // Small tables rarely clear the significance bar; fall back
                // to every candidate so the regressors still have inputs.
                log::warn!("model: no predictor passed selection for `{target}`; using all");
                chosen = predictors.clone();
            }
            let design = Design::from_table(&table, target, &chosen).map_err(stage_err(stage))?;
            let (ols, _) = ols_report(&design, mc.test_fraction, seed).map_err(stage_err(stage))?;
            em.emit_json(
                stage,
                &format!("model_ols_{target}.json"),
                &serde_json::to_value(&ols).expect("model json"),
            )?;
            let (rf, _) = forest_report(&design, &mc.forest, mc.test_fraction, seed)
                .map_err(stage_err(stage))?;
            em.emit_json(
                stage,
                &format!("model_forest_{target}.json"),
                &serde_json::to_value(&rf).expect("model json"),
            )?;
            reports.push(ols);
            reports.push(rf);
        }
        let tables = feature_importance_report(&reports);
        em.emit_json(
            stage,
            "importance.json",
            &serde_json::to_value(&tables).expect("importance json"),
        )?;
    }
    em.manifest.stages_completed.push("model".into());

    // ---- cluster --------------------------------------------------------
    let stage = "cluster";
    if let Some(cc) = &cfg.cluster {
        let dc = cfg
            .datasets
            .iter()
            .find(|d| d.name == cc.dataset)
            .ok_or_else(|| PipelineError::Stage {
                stage,
                message: format!("cluster dataset `{}` is not configured", cc.dataset),
            })?;
        let d = datasets.get(&cc.dataset).expect("ingested dataset");
        let ps = point_set_of(d, &dc.geocode_columns)
            .map_err(|m| PipelineError::Stage { stage, message: m })?;
        if !cc.force && ps.len() >= 2 && ps.n_distinct() < ps.len() / 2 {
            return Err(PipelineError::Stage {
                stage,
                message: format!(
                    "dataset `{}` looks centroid-geocoded ({} distinct coordinates across {} \
                     points); clustering those would find communities, not hotspots — set \
                     `force: true` (or pass --force) to run anyway",
                    cc.dataset,
                    ps.n_distinct(),
                    ps.len()
                ),
            });
        }
        let outcome = grid_search(&ps, &cc.grid, seed, cc.metric).map_err(stage_err(stage))?;
        let doc = serde_json::json!({
            "dataset": cc.dataset,
            "metric": cc.metric,
            "best_index": outcome.best_index,
            "best": {
                "params": outcome.best.params,
                "silhouette": outcome.best.silhouette,
                "n_clusters": outcome.best.n_clusters_found,
            },
            "rows": outcome.rows,
        });
        em.emit_json(stage, "cluster_grid.json", &doc)?;
        let map = export_cluster_map(&ps, &outcome.best).map_err(stage_err(stage))?;
        em.emit_json(stage, "cluster_map.geojson", &map)?;
    }
    em.manifest.stages_completed.push("cluster".into());

    // ---- export ---------------------------------------------------------
    let stage = "export";
    for metric in &cfg.exports.choropleth_metrics {
        let doc = export_choropleth(&table, metric, &boundaries, cfg.exports.choropleth_bins)
            .map_err(stage_err(stage))?;
        em.emit_json(stage, &format!("choropleth_{metric}.geojson"), &doc)?;
        let ranked = top_k(&table, metric, cfg.exports.top_k).map_err(stage_err(stage))?;
        let mut csv = String::from("community,value\n");
        for (name, v) in &ranked {
            csv.push_str(&format!("{name},{v}\n"));
        }
        em.emit(stage, &format!("top{}_{metric}.csv", cfg.exports.top_k), csv.as_bytes())?;
    }
    em.manifest.stages_completed.push("export".into());
    Ok(())
}
