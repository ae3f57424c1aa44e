use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use lstm_moea::pipeline::{
    self, compare_runs, config_from_manifest, multi_seed, run_pipeline, validate_run_dir, Manifest, Metrics,
    RunConfig, MANIFEST, METRICS,
};
use lstm_moea::Error;

#[derive(Parser)]
#[command(name = "lstm-moea", version, about = "Evolve, stack and evaluate LSTM forecasters")]
struct Cli {
    /// Worker threads for parallel evaluation (overrides LSTM_MOEA_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Start from the configuration recorded in a run manifest.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,

    #[arg(long)]
    data: Option<PathBuf>,

    #[arg(long)]
    target: Option<String>,

    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> lstm_moea::Result<RunConfig> {
        let mut config = match (&self.config, &self.manifest) {
            (Some(path), _) => RunConfig::from_file(path)?,
            (None, Some(path)) => config_from_manifest(path)?,
            (None, None) => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            config.data = d.clone();
        }
        if let Some(t) = &self.target {
            config.target = t.clone();
        }
        if let Some(o) = &self.output {
            config.output = o.clone();
        }
        for o in &self.overrides {
            config.apply_override(o)?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline once.
    Run {
        #[command(flatten)]
        config: ConfigArgs,

        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pairwise Diebold-Mariano tests and win-loss ranking of finished runs.
    Compare {
        #[arg(required = true, num_args = 2..)]
        runs: Vec<PathBuf>,

        #[arg(long, default_value_t = lstm_moea::forecast::DEFAULT_ALPHA)]
        alpha: f64,

        /// Directory for ranking.csv and pairwise_dm.csv.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run the pipeline once per seed and aggregate the results.
    MultiSeed {
        #[command(flatten)]
        config: ConfigArgs,

        /// Comma-separated seeds, or a range such as `1..=10`.
        #[arg(long, required = true)]
        seeds: String,
    },
    /// Pretty-print a run manifest (a run directory or its manifest file).
    Inspect { path: PathBuf },
}

fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..=") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty seed range `{spec}`");
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("invalid seed `{s}`")))
        .collect()
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let (dir, manifest_path) = if path.is_dir() {
        (Some(path), path.join(MANIFEST))
    } else {
        (path.parent(), path.to_path_buf())
    };
    let manifest: Manifest = pipeline::read_json(&manifest_path)?;
    println!("{} {}  seed {}", manifest.package, manifest.version, manifest.seed);
    println!();
    println!("[data]");
    println!("rows            {}", manifest.data.rows);
    println!("columns         {}", manifest.data.columns.join(", "));
    println!("lagged rows     {}", manifest.data.windowed_rows);
    println!("train / test    {} / {}", manifest.data.train_rows, manifest.data.test_rows);
    println!("partitions      {:?}", manifest.data.partition_sizes);
    println!();
    println!("[config]");
    print!("{}", manifest.config.to_conf_string());
    if let Some(dir) = dir {
        let metrics_path = dir.join(METRICS);
        if metrics_path.exists() {
            let m: Metrics = pipeline::read_json(&metrics_path)?;
            println!();
            println!("[metrics]");
            println!("front size      {}", m.front_size);
            println!("hypervolume     {:.6}", m.final_hypervolume);
            println!(
                "selected        {:.2} of {} ({:.2}%)",
                m.mean_selected_features,
                m.features,
                100.0 * m.mean_selected_fraction
            );
            for (name, s) in [("train", &m.train), ("test", &m.test)] {
                let steps: Vec<String> = s.steps.iter().map(|s| format!("{:.5}", s.rmse)).collect();
                println!(
                    "{name:<5} RMSE      steps [{}]  mean {:.5}  pooled {:.5}",
                    steps.join(", "),
                    s.mean_step_rmse,
                    s.pooled_rmse
                );
            }
            match m.overfitting_ratio.mean_step {
                Some(r) => println!("overfitting     {r:.5}"),
                None => println!("overfitting     undefined"),
            }
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let threads = match cli.threads {
        Some(0) => bail!(Error::Usage("--threads must be positive".into())),
        Some(n) => Some(n),
        None => pipeline::threads_from_env()?,
    };
    match cli.command {
        Command::Run { config, seed } => {
            let mut config = config.resolve()?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let report = pipeline::with_threads(threads, || run_pipeline(&config))??;
            validate_run_dir(&report.output)?;
            let m = &report.metrics;
            println!(
                "front {} models, test RMSE {:.5} (mean over steps) / {:.5} (pooled), outputs in {}",
                m.front_size,
                m.test.mean_step_rmse,
                m.test.pooled_rmse,
                report.output.display()
            );
        }
        Command::Compare { runs, alpha, out_dir } => {
            let report = pipeline::with_threads(threads, || compare_runs(&runs, alpha))??;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            report.write_ranking_csv(&out_dir.join("ranking.csv"))?;
            report.write_pairwise_csv(&out_dir.join("pairwise_dm.csv"))?;
            println!("{} pairwise tests at alpha {}", report.pairwise.len(), report.alpha);
            print!("{}", report.render_table());
        }
        Command::MultiSeed { config, seeds } => {
            let config = config.resolve()?;
            let seeds = parse_seeds(&seeds).map_err(|e| Error::Usage(e.to_string()))?;
            let report = pipeline::with_threads(threads, || multi_seed(&config, &seeds))??;
            println!("{} runs, {} features", report.runs.len(), report.features);
            print!("{}", report.render_table());
        }
        Command::Inspect { path } => inspect(&path)?,
    }
    Ok(())
}

fn is_usage(err: &anyhow::Error) -> bool {
    let mut e = err.downcast_ref::<Error>();
    while let Some(inner) = e {
        match inner {
            Error::Usage(_) => return true,
            Error::Stage { source, .. } => e = Some(source),
            _ => return false,
        }
    }
    false
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
