//! End-to-end runs: configuration, the staged pipeline, artifacts, run
//! comparison and multi-seed batches.
//!
//! A run reads the CSV, interpolates gaps, builds lagged rows, holds out the
//! final rows for testing, normalizes, splits the training rows into the
//! objective partitions, evolves the LSTM front, stacks it under the
//! meta-regressor and scores recursive forecasts on both sides of the split.

mod artifacts;
mod compare;
mod config;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use artifacts::{
    read_json, read_predictions, validate_run_dir, BaseModelMetrics, DataSummary, EnsembleFile, FrontMember,
    Manifest, Metrics, OverfittingRatio, ParetoFrontFile, PredictionRecord, SplitMetrics, StepMetrics,
    ENSEMBLE_MODEL, FRONT_COORDS, HYPERVOLUME, IMPORTANCE, MANIFEST, METRICS, PARETO_FRONT, PREDICTIONS_TEST,
    PREDICTIONS_TRAIN, RUN_FILES, SCHEMA_VERSION,
};
pub use compare::{compare_runs, CompareReport};
pub use config::{MetaKind, RunConfig};

use crate::data::{
    interpolate_missing, normalize, partition_training, read_csv, sliding_window, split_train_test, NormMode,
    NormStats, WindowedDataset,
};
use crate::ensemble::{build_stacking_dataset, feature_importance, EnsembleModel, StackingDataset};
use crate::error::{Error, Result};
use crate::forecast::{overfitting_ratio, recursive_forecast, rmse, HorizonForecast};
use crate::moea::{run_moea, ForecastProblem, MoeaOutcome};

/// Overrides the worker-thread count for parallel evaluation.
pub const THREADS_ENV: &str = "LSTM_MOEA_THREADS";

/// Reads [`THREADS_ENV`]; unset or empty means the rayon default.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers, or directly when
/// `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Outcome of a completed run; everything in it is also on disk.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: PathBuf,
    pub metrics: Metrics,
    pub hypervolume_trace: Vec<f64>,
    pub importance: Vec<f64>,
    pub feature_names: Vec<String>,
    pub test_forecast: HorizonForecast,
}

/// Removes the files a failed run wrote, and the directory if the run made it.
struct OutputGuard {
    dir: PathBuf,
    created: bool,
    written: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn open(dir: &Path) -> Result<Self> {
        let created = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created,
            written: Vec::new(),
            armed: true,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
        if self.created {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

/// The normalized datasets a run trains and scores on.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub raw_rows: usize,
    pub columns: Vec<String>,
    pub windowed_rows: usize,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
    /// Contiguous blocks of `train`, one per objective.
    pub partitions: Vec<WindowedDataset>,
}

/// Runs the data stages of a pipeline: read, interpolate, window, split,
/// normalize and partition.
pub fn load_datasets(config: &RunConfig) -> Result<Datasets> {
    let series = read_csv(&config.data, &config.target, &config.csv_options()).map_err(|e| e.in_stage("read"))?;
    log::info!("read {} rows, {} attributes", series.len(), series.columns.len());
    let series = interpolate_missing(&series).map_err(|e| e.in_stage("interpolate"))?;
    let windowed =
        sliding_window(&series, config.window, config.include_target_lags).map_err(|e| e.in_stage("window"))?;
    let (train, test) = split_train_test(&windowed, config.test_fraction).map_err(|e| e.in_stage("split"))?;

    let normalized = || -> Result<(WindowedDataset, WindowedDataset)> {
        match config.normalization {
            NormMode::PerSplit => Ok((normalize(&train, NormMode::PerSplit, None)?, normalize(&test, NormMode::PerSplit, None)?)),
            NormMode::TrainStats => {
                let stats = NormStats::fit(&train, NormMode::TrainStats);
                Ok((
                    normalize(&train, NormMode::TrainStats, Some(&stats))?,
                    normalize(&test, NormMode::TrainStats, Some(&stats))?,
                ))
            }
        }
    };
    let (train, test) = normalized().map_err(|e| e.in_stage("normalize"))?;
    let partitions = partition_training(&train, config.partitions)
        .map_err(|e| e.in_stage("partition"))?
        .partitions;
    log::info!(
        "{} lagged rows: {} train in {} partitions, {} test, {} features",
        windowed.len(),
        train.len(),
        partitions.len(),
        test.len(),
        train.feature_count()
    );
    Ok(Datasets {
        raw_rows: series.len(),
        columns: series.columns.iter().map(|c| c.name.clone()).collect(),
        windowed_rows: windowed.len(),
        train,
        test,
        partitions,
    })
}

fn column_rmse(stack: &StackingDataset, j: usize) -> Result<f64> {
    rmse(&stack.column(j), &stack.targets())
}

/// Executes every stage and writes the run directory.
///
/// Configuration is validated before any file is opened. An error carries the
/// name of the stage that raised it, and files written before the failure are
/// removed.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let prepared = load_datasets(config)?;
    let Datasets { train, test, partitions, .. } = &prepared;
    if config.horizon >= test.len() {
        return Err(Error::usage(format!(
            "horizon {} needs more than {} test rows",
            config.horizon,
            test.len()
        ))
        .in_stage("split"));
    }

    let problem = ForecastProblem::new(partitions, config.hidden_units).map_err(|e| e.in_stage("moea"))?;
    let MoeaOutcome {
        front,
        hypervolume_trace,
        reference,
    } = run_moea(&problem, &config.moea_config()).map_err(|e| e.in_stage("moea"))?;
    log::info!(
        "front of {} models, hypervolume {:.6}",
        front.len(),
        hypervolume_trace.last().copied().unwrap_or(0.0)
    );

    let genomes: Vec<_> = front.genomes().cloned().collect();
    let stage = "ensemble_training_dataset";
    let train_stack = build_stacking_dataset(&genomes, train).map_err(|e| e.in_stage(stage))?;
    let stage = "ensemble_learning";
    let mut model = EnsembleModel::untrained(genomes.clone(), train.feature_names.clone()).map_err(|e| e.in_stage(stage))?;
    model.train(&config.meta(), &train_stack).map_err(|e| e.in_stage(stage))?;
    let stage = "ensemble_test_dataset";
    let test_stack = build_stacking_dataset(&genomes, test).map_err(|e| e.in_stage(stage))?;

    let stage = "forecast";
    let train_forecast = recursive_forecast(&model, train, config.horizon).map_err(|e| e.in_stage(stage))?;
    let test_forecast = recursive_forecast(&model, test, config.horizon).map_err(|e| e.in_stage(stage))?;

    let q = train.feature_count();
    let importance = feature_importance(&front, q).map_err(|e| e.in_stage("importance"))?;
    let metrics = (|| -> Result<Metrics> {
        let train_m = SplitMetrics::from(&train_forecast);
        let test_m = SplitMetrics::from(&test_forecast);
        let ratio = |a: f64, b: f64| match overfitting_ratio(a, b) {
            Ok(r) => Ok(Some(r)),
            Err(Error::UndefinedRatio) => Ok(None),
            Err(e) => Err(e),
        };
        let base_models = genomes
            .iter()
            .zip(&front.members)
            .enumerate()
            .map(|(j, (g, (_, obj)))| {
                Ok(BaseModelMetrics {
                    index: j,
                    selected_features: g.selected_count(),
                    objectives: obj.0.clone(),
                    train_rmse: column_rmse(&train_stack, j)?,
                    test_rmse: column_rmse(&test_stack, j)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mean_selected = genomes.iter().map(|g| g.selected_count() as f64).sum::<f64>() / genomes.len() as f64;
        Ok(Metrics {
            schema_version: SCHEMA_VERSION,
            seed: config.seed,
            horizon: config.horizon,
            train_rows: train.len(),
            test_rows: test.len(),
            features: q,
            front_size: front.len(),
            final_hypervolume: hypervolume_trace.last().copied().unwrap_or(0.0),
            mean_selected_features: mean_selected,
            mean_selected_fraction: mean_selected / q as f64,
            overfitting_ratio: OverfittingRatio {
                mean_step: ratio(train_m.mean_step_rmse, test_m.mean_step_rmse)?,
                pooled: ratio(train_m.pooled_rmse, test_m.pooled_rmse)?,
            },
            train: train_m,
            test: test_m,
            base_models,
        })
    })()
    .map_err(|e| e.in_stage("metrics"))?;

    let write = || -> Result<()> {
        let mut out = OutputGuard::open(&config.output)?;
        let front_file = ParetoFrontFile {
            schema_version: SCHEMA_VERSION,
            feature_names: train.feature_names.clone(),
            hidden_units: config.hidden_units,
            reference_point: reference.clone(),
            members: front
                .members
                .iter()
                .map(|(g, o)| FrontMember {
                    genome: g.clone(),
                    objectives: o.clone(),
                })
                .collect(),
        };
        artifacts::write_json(&out.path(PARETO_FRONT), &front_file)?;
        let ensemble_file = EnsembleFile {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            model: model.clone(),
            train_norm: train.norm_stats.clone(),
            test_norm: test.norm_stats.clone(),
        };
        artifacts::write_json(&out.path(ENSEMBLE_MODEL), &ensemble_file)?;

        let m = front.len();
        let importance_rows = train.feature_names.iter().zip(&importance).map(|(name, &imp)| {
            let count = (imp * m as f64).round() as usize;
            vec![name.clone(), imp.to_string(), count.to_string()]
        });
        artifacts::write_csv(&out.path(IMPORTANCE), &["feature", "importance", "count"], importance_rows)?;
        let hv_rows = hypervolume_trace
            .iter()
            .enumerate()
            .map(|(g, v)| vec![(g + 1).to_string(), v.to_string()]);
        artifacts::write_csv(&out.path(HYPERVOLUME), &["generation", "hypervolume"], hv_rows)?;
        let mut coords_header = vec!["member".to_string()];
        coords_header.extend((1..=config.partitions).map(|k| format!("f{k}")));
        let coord_rows = front.members.iter().enumerate().map(|(j, (_, o))| {
            std::iter::once(j.to_string())
                .chain(o.0.iter().map(f64::to_string))
                .collect()
        });
        artifacts::write_csv(&out.path(FRONT_COORDS), &coords_header, coord_rows)?;
        artifacts::write_predictions(&out.path(PREDICTIONS_TRAIN), &train_forecast)?;
        artifacts::write_predictions(&out.path(PREDICTIONS_TEST), &test_forecast)?;
        artifacts::write_json(&out.path(METRICS), &metrics)?;

        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.clone(),
            data: DataSummary {
                rows: prepared.raw_rows,
                columns: prepared.columns.clone(),
                windowed_rows: prepared.windowed_rows,
                train_rows: train.len(),
                test_rows: test.len(),
                partition_sizes: partitions.iter().map(WindowedDataset::len).collect(),
            },
            files: RUN_FILES.iter().map(|s| s.to_string()).collect(),
        };
        artifacts::write_json(&out.path(MANIFEST), &manifest)?;
        validate_run_dir(&config.output)?;
        out.armed = false;
        Ok(())
    };
    write().map_err(|e| e.in_stage("write"))?;
    log::info!(
        "test RMSE {:.5} (mean over steps), {:.5} (pooled); outputs in {}",
        metrics.test.mean_step_rmse,
        metrics.test.pooled_rmse,
        config.output.display()
    );

    Ok(RunReport {
        output: config.output.clone(),
        metrics,
        hypervolume_trace,
        importance,
        feature_names: train.feature_names.clone(),
        test_forecast,
    })
}

/// Reloads the configuration a run directory was produced with.
pub fn config_from_manifest(path: &Path) -> Result<RunConfig> {
    let manifest: Manifest = read_json(path)?;
    Ok(manifest.config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Mean of the per-step test RMSE values.
    pub test_rmse: f64,
    pub train_rmse: f64,
    pub selected_features: f64,
    pub selected_percent: f64,
    /// Train over test mean-step RMSE of this run; `None` when undefined.
    pub overfitting_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub metric: String,
    pub average: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub schema_version: u32,
    pub features: usize,
    pub runs: Vec<SeedSummary>,
    pub aggregate: Vec<AggregateRow>,
}

pub const MULTI_SEED_JSON: &str = "multi_seed.json";
pub const MULTI_SEED_RUNS: &str = "multi_seed_runs.csv";
pub const MULTI_SEED_SUMMARY: &str = "multi_seed_summary.csv";

fn aggregate_row(metric: &str, values: impl Iterator<Item = f64> + Clone) -> AggregateRow {
    let n = values.clone().count() as f64;
    AggregateRow {
        metric: metric.to_string(),
        average: values.clone().sum::<f64>() / n,
        min: values.clone().fold(f64::INFINITY, f64::min),
        max: values.fold(f64::NEG_INFINITY, f64::max),
    }
}

fn write_seed_runs(path: &Path, runs: &[SeedSummary]) -> Result<()> {
    let rows = runs.iter().map(|r| {
        vec![
            r.seed.to_string(),
            r.test_rmse.to_string(),
            r.train_rmse.to_string(),
            r.selected_features.to_string(),
            r.selected_percent.to_string(),
            r.overfitting_ratio.map_or_else(String::new, |v| v.to_string()),
        ]
    });
    artifacts::write_csv(
        path,
        &["seed", "test_rmse", "train_rmse", "selected_features", "selected_percent", "overfitting_ratio"],
        rows,
    )
}

impl MultiSeedReport {
    pub fn render_table(&self) -> String {
        let mut out = format!("{:<18} {:>12} {:>12} {:>12}\n", "metric", "average", "min", "max");
        for r in &self.aggregate {
            out.push_str(&format!("{:<18} {:>12.6} {:>12.6} {:>12.6}\n", r.metric, r.average, r.min, r.max));
        }
        out
    }
}

/// Runs the pipeline once per seed under `config.output/seed_<s>` and
/// aggregates test RMSE, training RMSE and selected-feature counts.
///
/// A failing seed stops the batch; the completed runs are listed in
/// `multi_seed_runs.csv` and the error names them.
pub fn multi_seed(config: &RunConfig, seeds: &[u64]) -> Result<MultiSeedReport> {
    if seeds.is_empty() {
        return Err(Error::usage("multi-seed needs at least one seed"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::usage("seeds must be distinct"));
    }
    config.validate().map_err(|e| e.in_stage("config"))?;
    std::fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;

    let mut runs = Vec::with_capacity(seeds.len());
    let mut features = 0;
    for &seed in seeds {
        let mut c = config.clone();
        c.seed = seed;
        c.output = config.output.join(format!("seed_{seed}"));
        log::info!("seed {seed}");
        match run_pipeline(&c) {
            Ok(report) => {
                let m = &report.metrics;
                features = m.features;
                runs.push(SeedSummary {
                    seed,
                    test_rmse: m.test.mean_step_rmse,
                    train_rmse: m.train.mean_step_rmse,
                    selected_features: m.mean_selected_features,
                    selected_percent: 100.0 * m.mean_selected_fraction,
                    overfitting_ratio: m.overfitting_ratio.mean_step,
                });
            }
            Err(source) => {
                let partial = config.output.join(MULTI_SEED_RUNS);
                write_seed_runs(&partial, &runs)?;
                return Err(Error::SeedFailed {
                    seed,
                    completed: runs.iter().map(|r| r.seed).collect(),
                    partial,
                    source: Box::new(source),
                });
            }
        }
    }

    let mut aggregate = vec![
        aggregate_row("test_rmse", runs.iter().map(|r| r.test_rmse)),
        aggregate_row("train_rmse", runs.iter().map(|r| r.train_rmse)),
        aggregate_row("selected_features", runs.iter().map(|r| r.selected_features)),
        aggregate_row("selected_percent", runs.iter().map(|r| r.selected_percent)),
    ];
    // per-run ratios are averaged, not recomputed from the averaged RMSEs
    let ratios = runs.iter().filter_map(|r| r.overfitting_ratio);
    if ratios.clone().next().is_some() {
        aggregate.push(aggregate_row("overfitting_ratio", ratios));
    }
    let report = MultiSeedReport {
        schema_version: SCHEMA_VERSION,
        features,
        runs,
        aggregate,
    };
    write_seed_runs(&config.output.join(MULTI_SEED_RUNS), &report.runs)?;
    let rows = report.aggregate.iter().map(|r| {
        vec![r.metric.clone(), r.average.to_string(), r.min.to_string(), r.max.to_string()]
    });
    artifacts::write_csv(&config.output.join(MULTI_SEED_SUMMARY), &["metric", "average", "min", "max"], rows)?;
    artifacts::write_json(&config.output.join(MULTI_SEED_JSON), &report)?;
    Ok(report)
}
