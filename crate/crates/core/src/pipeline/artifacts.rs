//! On-disk run artifacts. Every JSON file carries `schema_version`; CSV files
//! have fixed headers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::data::NormStats;
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::forecast::HorizonForecast;
use crate::lstm::{Genome, ObjectiveVector};

pub const SCHEMA_VERSION: u32 = 1;

pub const PARETO_FRONT: &str = "pareto_front.json";
pub const ENSEMBLE_MODEL: &str = "ensemble_model.json";
pub const IMPORTANCE: &str = "importance.csv";
pub const HYPERVOLUME: &str = "hypervolume.csv";
pub const FRONT_COORDS: &str = "front_parallel_coords.csv";
pub const PREDICTIONS_TRAIN: &str = "predictions_train.csv";
pub const PREDICTIONS_TEST: &str = "predictions_test.csv";
pub const METRICS: &str = "metrics.json";
pub const MANIFEST: &str = "run_manifest.json";

/// Every file a completed run leaves behind.
pub const RUN_FILES: [&str; 9] = [
    PARETO_FRONT,
    ENSEMBLE_MODEL,
    IMPORTANCE,
    HYPERVOLUME,
    FRONT_COORDS,
    PREDICTIONS_TRAIN,
    PREDICTIONS_TEST,
    METRICS,
    MANIFEST,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFrontFile {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub hidden_units: usize,
    pub reference_point: Vec<f64>,
    pub members: Vec<FrontMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub schema_version: u32,
    /// Configuration of the run that trained the model.
    pub config: RunConfig,
    pub model: EnsembleModel,
    /// Scaling of the training rows, for mapping predictions back to raw units.
    pub train_norm: Option<NormStats>,
    pub test_norm: Option<NormStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub count: usize,
    pub rmse: f64,
    pub mae: f64,
}

/// Per-step errors plus the two horizon aggregations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub steps: Vec<StepMetrics>,
    /// Average of the per-step RMSE values.
    pub mean_step_rmse: f64,
    pub mean_step_mae: f64,
    /// RMSE over all steps' errors pooled.
    pub pooled_rmse: f64,
    pub pooled_mae: f64,
}

impl From<&HorizonForecast> for SplitMetrics {
    fn from(f: &HorizonForecast) -> Self {
        SplitMetrics {
            steps: f
                .steps
                .iter()
                .map(|s| StepMetrics {
                    step: s.step,
                    count: s.predictions.len(),
                    rmse: s.rmse,
                    mae: s.mae,
                })
                .collect(),
            mean_step_rmse: f.mean_step_rmse(),
            mean_step_mae: f.mean_step_mae(),
            pooled_rmse: f.pooled_rmse(),
            pooled_mae: f.pooled_mae(),
        }
    }
}

/// Training RMSE over test RMSE under each aggregation; `None` when the test
/// RMSE is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfittingRatio {
    pub mean_step: Option<f64>,
    pub pooled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseModelMetrics {
    pub index: usize,
    pub selected_features: usize,
    pub objectives: Vec<f64>,
    /// One-step RMSE of this model alone over the training rows.
    pub train_rmse: f64,
    pub test_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub seed: u64,
    pub horizon: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub features: usize,
    pub front_size: usize,
    pub final_hypervolume: f64,
    /// Mean number of selected features over the front members.
    pub mean_selected_features: f64,
    pub mean_selected_fraction: f64,
    pub train: SplitMetrics,
    pub test: SplitMetrics,
    pub overfitting_ratio: OverfittingRatio,
    pub base_models: Vec<BaseModelMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows: usize,
    pub columns: Vec<String>,
    pub windowed_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub partition_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub package: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub data: DataSummary,
    pub files: Vec<String>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_reader(std::io::BufReader::new(file))?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::data(format!(
                "{} has schema version {v}, expected {SCHEMA_VERSION}",
                path.display()
            )))
        }
        None => return Err(Error::data(format!("{} has no schema_version", path.display()))),
    }
    Ok(serde_json::from_value(value)?)
}

pub(crate) fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header.iter().map(AsRef::as_ref))?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const PREDICTION_HEADER: [&str; 4] = ["origin", "step", "prediction", "observation"];

pub(crate) fn write_predictions(path: &Path, forecast: &HorizonForecast) -> Result<()> {
    let rows = forecast.steps.iter().flat_map(|s| {
        s.predictions
            .iter()
            .zip(&s.observations)
            .enumerate()
            .map(move |(origin, (p, o))| vec![origin.to_string(), s.step.to_string(), p.to_string(), o.to_string()])
    });
    write_csv(path, &PREDICTION_HEADER, rows)
}

/// One `origin,step,prediction,observation` record.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct PredictionRecord {
    pub origin: usize,
    pub step: usize,
    pub prediction: f64,
    pub observation: f64,
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTION_HEADER {
        return Err(Error::data(format!("{} has header {header:?}", path.display())));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn check_header(path: &Path, expected: &[String]) -> Result<usize> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(Error::data(format!(
            "{} has header {header:?}, expected {expected:?}",
            path.display()
        )));
    }
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.len() != expected.len() {
            return Err(Error::data(format!("{} has a short row", path.display())));
        }
        rows += 1;
    }
    Ok(rows)
}

/// Parses every artifact of a run directory against its schema and checks
/// that the files agree with each other.
pub fn validate_run_dir(dir: &Path) -> Result<Manifest> {
    let path = |name: &str| -> PathBuf { dir.join(name) };
    let manifest: Manifest = read_json(&path(MANIFEST))?;
    let front: ParetoFrontFile = read_json(&path(PARETO_FRONT))?;
    let ensemble: EnsembleFile = read_json(&path(ENSEMBLE_MODEL))?;
    let metrics: Metrics = read_json(&path(METRICS))?;

    let fail = |msg: String| Err(Error::data(format!("{}: {msg}", dir.display())));
    if front.members.len() != metrics.front_size || ensemble.model.base_models().len() != metrics.front_size {
        return fail("front size differs between artifacts".into());
    }
    if front.feature_names != ensemble.model.feature_names() {
        return fail("feature names differ between front and ensemble".into());
    }
    let q = front.feature_names.len();

    let importance_rows = check_header(&path(IMPORTANCE), &["feature".into(), "importance".into(), "count".into()])?;
    if importance_rows != q {
        return fail(format!("importance.csv has {importance_rows} rows for {q} features"));
    }
    let hv_rows = check_header(&path(HYPERVOLUME), &["generation".into(), "hypervolume".into()])?;
    if hv_rows != manifest.config.generations {
        return fail(format!("hypervolume.csv has {hv_rows} rows for {} generations", manifest.config.generations));
    }
    let mut coords_header = vec!["member".to_string()];
    coords_header.extend((1..=manifest.config.partitions).map(|k| format!("f{k}")));
    if check_header(&path(FRONT_COORDS), &coords_header)? != metrics.front_size {
        return fail("front_parallel_coords.csv row count differs from the front".into());
    }
    let header: Vec<String> = PREDICTION_HEADER.iter().map(|s| s.to_string()).collect();
    for (file, rows) in [(PREDICTIONS_TRAIN, metrics.train_rows), (PREDICTIONS_TEST, metrics.test_rows)] {
        let h = metrics.horizon;
        let expected = h * rows - h * (h - 1) / 2;
        let got = check_header(&path(file), &header)?;
        if got != expected {
            return fail(format!("{file} has {got} rows, expected {expected}"));
        }
    }
    Ok(manifest)
}
