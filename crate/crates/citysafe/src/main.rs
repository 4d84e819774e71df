//! Command-line front end: one subcommand per pipeline stage plus `run`
//! for the whole thing.

use anyhow::{bail, Context, Result};
use citysafe::cluster::{grid_search, ClusterParams, Metric, PointSet};
use citysafe::features::{aggregate_by_community, top_k, DatasetRole};
use citysafe::geocode::{geocode_dataset, load_boundaries, BoundarySet, GeocodeColumns};
use citysafe::ingest::{
    drop_duplicates, impute_missing, parse_table, CleaningPolicy, TableSchema,
};
use citysafe::model::{
    chi_square_select, feature_importance_report, forest_report, ols_report, pearson_matrix,
    Design, ForestConfig,
};
use citysafe::report::{
    export_choropleth, run_calgary_harness, run_pipeline, PipelineError, CALGARY_ENV,
};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "citysafe", version, about = "Community safety data mining pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides config and CITYSAFE_SEED).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse, deduplicate, and clean one CSV.
    Ingest {
        /// Input CSV path.
        input: PathBuf,
        /// Schema JSON: {"column": "text|integer|real|date|latlon-pair"}.
        #[arg(long)]
        schema: PathBuf,
        /// Cleaning policy JSON (zero_fill_columns, drop_null_columns, dedup).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assign coordinates and community names using boundary polygons.
    Geocode {
        /// Input CSV path.
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Community boundaries GeoJSON.
        #[arg(long)]
        boundaries: PathBuf,
        /// Feature property holding the community name.
        #[arg(long, default_value = "name")]
        name_property: String,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate one or more geocoded CSVs into a community feature table.
    Features {
        /// Dataset spec JSON: [{"path", "schema", "role", ...}, ...].
        #[arg(long)]
        datasets: PathBuf,
        #[arg(long)]
        boundaries: PathBuf,
        #[arg(long, default_value = "name")]
        name_property: String,
        #[arg(long, default_value = "community_name")]
        community_column: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search clustering over a point CSV.
    Cluster {
        /// Input CSV with latitude/longitude columns.
        input: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Grid JSON: [{"algorithm": "...", ...}, ...].
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
        metric: MetricArg,
        /// Cluster centroid-substituted coordinates anyway.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation, chi-square selection, and both regressors on a feature CSV.
    Model {
        /// Community feature table CSV (as written by `features`/`run`).
        input: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        bins: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choropleth GeoJSON for one metric of a feature CSV.
    Export {
        /// Community feature table CSV.
        input: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        boundaries: PathBuf,
        #[arg(long, default_value = "name")]
        name_property: String,
        #[arg(long, default_value_t = 5)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the analysis against a local Calgary open-data snapshot.
    Harness {
        /// Snapshot directory; defaults to $CITYSAFE_CALGARY_DIR.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long, default_value = "latitude")]
    latitude: String,
    #[arg(long, default_value = "longitude")]
    longitude: String,
    /// Optional "(lat, lon)" source column.
    #[arg(long)]
    point: Option<String>,
    #[arg(long, default_value = "community_name")]
    community: String,
}

impl ColumnArgs {
    fn to_columns(&self) -> GeocodeColumns {
        GeocodeColumns {
            latitude: self.latitude.clone(),
            longitude: self.longitude.clone(),
            point: self.point.clone(),
            community: self.community.clone(),
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MetricArg {
    Euclidean,
    Haversine,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Haversine => Metric::Haversine,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {what} {}", path.display()))
}

fn load_dataset(input: &Path, schema_path: &Path) -> Result<citysafe::Dataset> {
    let schema: TableSchema = read_json(schema_path, "schema")?;
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let name = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(parse_table(bytes.as_slice(), &name, &schema)?)
}

fn load_boundary_set(path: &Path, name_property: &str) -> Result<BoundarySet> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(load_boundaries(&bytes, name_property)?)
}

fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

/// Reads a feature-table CSV (community_name column plus numeric metrics)
/// back into memory.
fn read_feature_csv(path: &Path) -> Result<citysafe::features::CommunityFeatureTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .context("feature CSV has no header")?
        .iter()
        .map(str::to_string)
        .collect();
    let name_idx = header
        .iter()
        .position(|h| h == "community_name")
        .context("feature CSV needs a community_name column")?;
    let mut communities = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        communities.push(record.get(name_idx).unwrap_or("").to_string());
        for (i, cell) in record.iter().enumerate() {
            if i == name_idx {
                continue;
            }
            cells[i].push(cell.parse().ok());
        }
    }
    let mut table = citysafe::features::CommunityFeatureTable::new(communities);
    for (i, name) in header.iter().enumerate() {
        if i != name_idx {
            table.push_column(name.clone(), cells[i].clone());
        }
    }
    Ok(table)
}

fn point_set_of(d: &citysafe::Dataset, cols: &GeocodeColumns) -> Result<PointSet> {
    let lat = d
        .column_index(&cols.latitude)
        .with_context(|| format!("no column `{}`", cols.latitude))?;
    let lon = d
        .column_index(&cols.longitude)
        .with_context(|| format!("no column `{}`", cols.longitude))?;
    let mut ids = Vec::new();
    let mut points = Vec::new();
    for (i, row) in d.rows.iter().enumerate() {
        if let (Some(a), Some(b)) = (row[lat].as_f64(), row[lon].as_f64()) {
            ids.push(i.to_string());
            points.push([a, b]);
        }
    }
    Ok(PointSet::new(ids, points)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let manifest = run_pipeline(&config, out.as_deref(), seed)?;
            println!(
                "completed {} stages, {} artifacts (seed {})",
                manifest.stages_completed.len(),
                manifest.artifacts.len(),
                manifest.seed
            );
            for name in manifest.artifacts.keys() {
                println!("  {name}");
            }
        }
        Command::Ingest { input, schema, policy, out } => {
            let mut d = load_dataset(&input, &schema)?;
            let policy: CleaningPolicy = match policy {
                Some(p) => read_json(&p, "policy")?,
                None => CleaningPolicy::default(),
            };
            if policy.dedup {
                d = drop_duplicates(&d);
            }
            d = impute_missing(&d, &policy)?;
            write_output(out.as_deref(), &d.to_csv_string())?;
        }
        Command::Geocode {
            input,
            schema,
            boundaries,
            name_property,
            columns,
            out,
        } => {
            let d = load_dataset(&input, &schema)?;
            let b = load_boundary_set(&boundaries, &name_property)?;
            let outcome = geocode_dataset(&d, &b, &columns.to_columns())?;
            if !outcome.flagged.is_empty() {
                eprintln!("{} rows left unresolved", outcome.flagged.len());
            }
            write_output(out.as_deref(), &outcome.dataset.to_csv_string())?;
        }
        Command::Features {
            datasets,
            boundaries,
            name_property,
            community_column,
            out,
        } => {
            #[derive(serde::Deserialize)]
            struct Spec {
                path: PathBuf,
                schema: TableSchema,
                role: DatasetRole,
                #[serde(default)]
                geocode: Option<bool>,
                #[serde(default)]
                geocode_columns: Option<GeocodeColumns>,
            }
            let specs: Vec<Spec> = read_json(&datasets, "dataset spec")?;
            let b = load_boundary_set(&boundaries, &name_property)?;
            let mut pairs = Vec::new();
            for spec in specs {
                let name = spec
                    .path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into());
                let bytes = fs::read(&spec.path)
                    .with_context(|| format!("reading {}", spec.path.display()))?;
                let mut d = parse_table(bytes.as_slice(), &name, &spec.schema)?;
                if spec.geocode.unwrap_or(true) {
                    let cols = spec.geocode_columns.unwrap_or_default();
                    d = geocode_dataset(&d, &b, &cols)?.dataset;
                }
                pairs.push((d, spec.role));
            }
            let table = aggregate_by_community(&pairs, &b, &community_column)?;
            write_output(out.as_deref(), &table.to_csv_string())?;
        }
        Command::Cluster {
            input,
            schema,
            grid,
            seed,
            metric,
            force,
            columns,
            out,
        } => {
            let d = load_dataset(&input, &schema)?;
            let ps = point_set_of(&d, &columns.to_columns())?;
            if !force && ps.len() >= 2 && ps.n_distinct() < ps.len() / 2 {
                bail!(
                    "{} distinct coordinates across {} points — these look like community \
                     centroids, not incident locations, so clustering would just re-find the \
                     communities; pass --force to run anyway",
                    ps.n_distinct(),
                    ps.len()
                );
            }
            let grid: Vec<ClusterParams> = read_json(&grid, "grid")?;
            let outcome = grid_search(&ps, &grid, seed, metric.into())?;
            let doc = serde_json::json!({
                "best_index": outcome.best_index,
                "best": {
                    "params": outcome.best.params,
                    "silhouette": outcome.best.silhouette,
                    "n_clusters": outcome.best.n_clusters_found,
                },
                "rows": outcome.rows,
            });
            write_output(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        }
        Command::Model {
            input,
            target,
            alpha,
            bins,
            test_fraction,
            seed,
            out,
        } => {
            let table = read_feature_csv(&input)?;
            let predictors: Vec<String> = table
                .columns
                .iter()
                .filter(|c| **c != target)
                .cloned()
                .collect();
            let corr_cols: Vec<String> =
                std::iter::once(target.clone()).chain(predictors.iter().cloned()).collect();
            let corr = pearson_matrix(&table, &corr_cols)?;
            let selection = chi_square_select(&table, &target, &predictors, alpha, bins)?;
            let mut chosen = selection.selected_names();
            if chosen.is_empty() {
                eprintln!("no predictor passed selection; using all {}", predictors.len());
                chosen = predictors;
            }
            let design = Design::from_table(&table, &target, &chosen)?;
            let (ols, _) = ols_report(&design, test_fraction, seed)?;
            let (rf, _) = forest_report(&design, &ForestConfig::default(), test_fraction, seed)?;
            let tables = feature_importance_report(&[ols.clone(), rf.clone()]);
            let doc = serde_json::json!({
                "correlation": corr,
                "selection": selection,
                "ols": ols,
                "random_forest": rf,
                "importance": tables,
            });
            write_output(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        }
        Command::Export {
            input,
            metric,
            boundaries,
            name_property,
            bins,
            out,
        } => {
            let table = read_feature_csv(&input)?;
            let b = load_boundary_set(&boundaries, &name_property)?;
            let doc = export_choropleth(&table, &metric, &b, bins)?;
            let ranked = top_k(&table, &metric, 10)?;
            eprintln!("top communities by {metric}:");
            for (name, v) in ranked {
                eprintln!("  {name}: {v}");
            }
            write_output(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
        }
        Command::Harness { dir } => {
            let dir = dir
                .or_else(|| std::env::var_os(CALGARY_ENV).map(PathBuf::from))
                .with_context(|| format!("pass --dir or set {CALGARY_ENV}"))?;
            let report = run_calgary_harness(&dir)?;
            println!(
                "pipeline ok: {} artifacts under {}",
                report.manifest.artifacts.len(),
                dir.join("citysafe_out").display()
            );
            for check in &report.checks {
                println!("  check passed: {check}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<PipelineError>() {
                Some(PipelineError::Config(_)) => EXIT_CONFIG,
                Some(PipelineError::Stage { .. }) => EXIT_STAGE,
                None => 1,
            };
            ExitCode::from(code)
        }
    }
}
