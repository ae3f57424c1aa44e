use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{CsvOptions, NormMode};
use crate::ensemble::{ForestParams, MetaLearner};
use crate::error::{Error, Result};
use crate::moea::MoeaConfig;

/// Which regressor combines the base models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaKind {
    #[default]
    RandomForest,
    LeastSquares,
}

impl FromStr for MetaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_forest" => Ok(MetaKind::RandomForest),
            "least_squares" => Ok(MetaKind::LeastSquares),
            other => Err(Error::usage(format!(
                "unknown meta learner `{other}` (expected random_forest or least_squares)"
            ))),
        }
    }
}

impl MetaKind {
    fn as_str(self) -> &'static str {
        match self {
            MetaKind::RandomForest => "random_forest",
            MetaKind::LeastSquares => "least_squares",
        }
    }
}

/// Everything a run needs. Paths are taken relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub target: String,
    pub timestamp_column: Option<String>,
    pub delimiter: char,
    pub missing_sentinel: Option<f64>,
    pub window: usize,
    pub include_target_lags: bool,
    pub test_fraction: f64,
    pub partitions: usize,
    pub hidden_units: usize,
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub seed: u64,
    pub sbx_eta: f64,
    pub pm_eta: f64,
    pub weight_min: f64,
    pub weight_max: f64,
    pub meta_learner: MetaKind,
    pub forest_trees: usize,
    pub forest_mtry: Option<usize>,
    pub forest_min_leaf: usize,
    pub horizon: usize,
    pub normalization: NormMode,
    pub log_interval: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let moea = MoeaConfig::default();
        let forest = ForestParams::default();
        let csv = CsvOptions::default();
        Self {
            data: PathBuf::new(),
            target: String::new(),
            timestamp_column: None,
            delimiter: csv.delimiter as char,
            missing_sentinel: csv.missing_sentinel,
            window: 3,
            include_target_lags: true,
            test_fraction: 0.2,
            partitions: 5,
            hidden_units: 2,
            population_size: moea.population_size,
            generations: moea.generations,
            crossover_prob: moea.crossover_prob,
            mutation_prob: moea.mutation_prob,
            seed: moea.seed,
            sbx_eta: moea.sbx_eta,
            pm_eta: moea.pm_eta,
            weight_min: moea.real_bounds.0,
            weight_max: moea.real_bounds.1,
            meta_learner: MetaKind::default(),
            forest_trees: forest.trees,
            forest_mtry: forest.mtry,
            forest_min_leaf: forest.min_leaf,
            horizon: 3,
            normalization: NormMode::default(),
            log_interval: moea.log_interval,
            output: PathBuf::from("run"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::usage(format!("invalid value `{value}` for `{key}`")))
}

fn parse_optional<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>> {
    if value == none {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    /// Reads a flat `key = value` file; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text).map_err(|e| match e {
            Error::Usage(msg) => Error::Usage(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::usage(format!("line {}: `{key}` set twice", n + 1)));
            }
            config
                .set(key, value.trim())
                .map_err(|e| Error::usage(format!("line {}: {e}", n + 1)))?;
            seen.push(key.to_string());
        }
        Ok(config)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.data = PathBuf::from(value),
            "target" => self.target = value.to_string(),
            "timestamp_column" => self.timestamp_column = parse_optional(key, value, "first")?,
            "delimiter" => {
                let mut chars = value.chars();
                self.delimiter = match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii() => c,
                    _ if value == "tab" => '\t',
                    _ => return Err(Error::usage(format!("delimiter must be one ASCII character, got `{value}`"))),
                };
            }
            "missing_sentinel" => self.missing_sentinel = parse_optional(key, value, "none")?,
            "window" => self.window = parse(key, value)?,
            "include_target_lags" => self.include_target_lags = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "partitions" => self.partitions = parse(key, value)?,
            "hidden_units" => self.hidden_units = parse(key, value)?,
            "population_size" => self.population_size = parse(key, value)?,
            "generations" => self.generations = parse(key, value)?,
            "crossover_prob" => self.crossover_prob = parse(key, value)?,
            "mutation_prob" => self.mutation_prob = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "sbx_eta" => self.sbx_eta = parse(key, value)?,
            "pm_eta" => self.pm_eta = parse(key, value)?,
            "weight_min" => self.weight_min = parse(key, value)?,
            "weight_max" => self.weight_max = parse(key, value)?,
            "meta_learner" => self.meta_learner = value.parse()?,
            "forest_trees" => self.forest_trees = parse(key, value)?,
            "forest_mtry" => self.forest_mtry = parse_optional(key, value, "auto")?,
            "forest_min_leaf" => self.forest_min_leaf = parse(key, value)?,
            "horizon" => self.horizon = parse(key, value)?,
            "normalization" => self.normalization = value.parse()?,
            "log_interval" => self.log_interval = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            other => return Err(Error::usage(format!("unknown setting `{other}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("override `{assignment}` is not `key=value`")))?;
        self.set(key.trim(), value.trim())
    }

    /// Renders the configuration in the format [`RunConfig::parse_str`] reads.
    pub fn to_conf_string(&self) -> String {
        let mut s = String::new();
        let opt = |v: &Option<String>, none: &str| v.clone().unwrap_or_else(|| none.to_string());
        let delimiter = if self.delimiter == '\t' { "tab".to_string() } else { self.delimiter.to_string() };
        let entries: Vec<(&str, String)> = vec![
            ("data", self.data.display().to_string()),
            ("target", self.target.clone()),
            ("timestamp_column", opt(&self.timestamp_column, "first")),
            ("delimiter", delimiter),
            ("missing_sentinel", self.missing_sentinel.map_or("none".into(), |v| v.to_string())),
            ("window", self.window.to_string()),
            ("include_target_lags", self.include_target_lags.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("partitions", self.partitions.to_string()),
            ("hidden_units", self.hidden_units.to_string()),
            ("population_size", self.population_size.to_string()),
            ("generations", self.generations.to_string()),
            ("crossover_prob", self.crossover_prob.to_string()),
            ("mutation_prob", self.mutation_prob.to_string()),
            ("seed", self.seed.to_string()),
            ("sbx_eta", self.sbx_eta.to_string()),
            ("pm_eta", self.pm_eta.to_string()),
            ("weight_min", self.weight_min.to_string()),
            ("weight_max", self.weight_max.to_string()),
            ("meta_learner", self.meta_learner.as_str().to_string()),
            ("forest_trees", self.forest_trees.to_string()),
            ("forest_mtry", self.forest_mtry.map_or("auto".into(), |v| v.to_string())),
            ("forest_min_leaf", self.forest_min_leaf.to_string()),
            ("horizon", self.horizon.to_string()),
            ("normalization", self.normalization.to_string()),
            ("log_interval", self.log_interval.to_string()),
            ("output", self.output.display().to_string()),
        ];
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn moea_config(&self) -> MoeaConfig {
        MoeaConfig {
            population_size: self.population_size,
            generations: self.generations,
            crossover_prob: self.crossover_prob,
            mutation_prob: self.mutation_prob,
            n_objectives: self.partitions,
            seed: self.seed,
            sbx_eta: self.sbx_eta,
            pm_eta: self.pm_eta,
            real_bounds: (self.weight_min, self.weight_max),
            log_interval: self.log_interval,
        }
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            trees: self.forest_trees,
            mtry: self.forest_mtry,
            min_leaf: self.forest_min_leaf,
            seed: self.seed,
        }
    }

    pub fn meta(&self) -> MetaLearner {
        match self.meta_learner {
            MetaKind::RandomForest => MetaLearner::RandomForest(self.forest_params()),
            MetaKind::LeastSquares => MetaLearner::LeastSquares,
        }
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            delimiter: self.delimiter as u8,
            timestamp_column: self.timestamp_column.clone(),
            missing_sentinel: self.missing_sentinel,
        }
    }

    /// Checks every numeric constraint without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.data.as_os_str().is_empty() {
            return Err(Error::usage("no data file given"));
        }
        if self.target.is_empty() {
            return Err(Error::usage("no target column given"));
        }
        if self.output.as_os_str().is_empty() {
            return Err(Error::usage("no output directory given"));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::usage("delimiter must be ASCII"));
        }
        if self.window == 0 {
            return Err(Error::usage("window must be positive"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::usage(format!(
                "test_fraction must lie strictly between 0 and 1, got {}",
                self.test_fraction
            )));
        }
        if self.partitions < 2 {
            return Err(Error::usage(format!("need at least two partitions, got {}", self.partitions)));
        }
        if self.hidden_units == 0 {
            return Err(Error::usage("hidden_units must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::usage("horizon must be at least 1"));
        }
        self.moea_config().validate()?;
        if self.meta_learner == MetaKind::RandomForest {
            self.forest_params().validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_once_paths_are_set() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_err());
        c.data = "x.csv".into();
        c.target = "y".into();
        c.validate().unwrap();
        assert_eq!((c.window, c.partitions, c.horizon, c.test_fraction), (3, 5, 3, 0.2));
    }

    #[test]
    fn conf_round_trip() {
        let mut c = RunConfig::default();
        c.data = "data/a b.csv".into();
        c.target = "NO2".into();
        c.forest_mtry = Some(2);
        c.missing_sentinel = None;
        c.delimiter = '\t';
        c.normalization = NormMode::TrainStats;
        let back = RunConfig::parse_str(&c.to_conf_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = RunConfig::parse_str("window = 3\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(RunConfig::parse_str("window = three").is_err());
        assert!(RunConfig::parse_str("window = 3\nwindow = 4").is_err());
        assert!(RunConfig::parse_str("window 3").is_err());
    }

    #[test]
    fn comments_and_overrides() {
        let mut c = RunConfig::parse_str("# settings\nseed = 7 # trailing\n\n").unwrap();
        assert_eq!(c.seed, 7);
        c.apply_override("seed=9").unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.apply_override("seed").is_err());
    }

    #[test]
    fn rejects_bad_numbers() {
        let base = RunConfig {
            data: "x.csv".into(),
            target: "y".into(),
            ..RunConfig::default()
        };
        let cases: Vec<fn(&mut RunConfig)> = vec![
            |c| c.population_size = 3,
            |c| c.partitions = 1,
            |c| c.test_fraction = 1.0,
            |c| c.window = 0,
            |c| c.horizon = 0,
            |c| c.crossover_prob = 1.5,
            |c| c.weight_min = 6.0,
            |c| c.forest_trees = 0,
            |c| c.hidden_units = 0,
        ];
        for f in cases {
            let mut c = base.clone();
            f(&mut c);
            assert!(matches!(c.validate(), Err(Error::Usage(_))), "{c:?}");
        }
    }
}
