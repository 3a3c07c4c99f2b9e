use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use cbci::clustering::parse_means_file;
use cbci::{FillStrategy, InitStrategy, Method, PipelineConfigF64};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cbci",
    version,
    about = "Cluster-guided imputation of missing tabular values"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill missing cells and write a completed copy of the dataset
    Impute(RunArgs),
    /// Print every intermediate quantity behind an imputation run
    Trace(RunArgs),
    /// Predict class labels for unlabeled records without changing any cells
    Classify(RunArgs),
    /// Mask known cells, re-impute them, and score the recovery
    Evaluate(EvalArgs),
}

/// Arguments shared by the impute, trace, and classify subcommands.
#[derive(Debug, Parser)]
pub struct RunArgs {
    /// Input CSV file (header row required)
    pub input: PathBuf,

    /// Schema sidecar describing the class column and categorical attributes
    #[arg(long)]
    pub schema: PathBuf,

    /// Where to write the completed CSV (required by impute and classify)
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Where to write the run report (defaults to stdout)
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Config file with key=value lines; command-line options take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Number of clusters (defaults to the number of distinct class labels)
    #[arg(long)]
    pub k: Option<usize>,

    /// Mean initialization: class-seeded, farthest-first, farthest-first:ID, or fixed:PATH
    #[arg(long)]
    pub init: Option<String>,

    /// Iteration cap for clustering
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,

    /// Nearest neighbors per record in the mapping step (defaults to the cluster count)
    #[arg(long)]
    pub neighbors: Option<usize>,

    /// Fill strategy: copy, top-k:N, or class-mean
    #[arg(long)]
    pub fill: Option<String>,

    /// Donor pool size for class prediction votes
    #[arg(long = "top-k")]
    pub top_k: Option<usize>,

    /// Also predict a class label for records that lack one
    #[arg(long)]
    pub predict: bool,

    /// Min-max scale numeric columns before measuring distances
    #[arg(long)]
    pub scale: bool,

    /// Stamp the report with the generation time
    #[arg(long)]
    pub timestamp: bool,
}

/// Arguments for the evaluate subcommand.
#[derive(Debug, Parser)]
pub struct EvalArgs {
    /// Input CSV file (header row required)
    pub input: PathBuf,

    /// Schema sidecar describing the class column and categorical attributes
    #[arg(long)]
    pub schema: PathBuf,

    /// Where to write the evaluation report (defaults to stdout)
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Config file with key=value lines; command-line options take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Share of observed feature cells to mask, strictly between 0 and 1
    #[arg(long)]
    pub fraction: Option<f64>,

    /// Seed for the masking shuffle (defaults to 0)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Comma-separated feature columns eligible for masking (defaults to all)
    #[arg(long)]
    pub columns: Option<String>,

    /// Cap on masked cells per record
    #[arg(long = "max-per-record")]
    pub max_per_record: Option<usize>,

    /// Comma-separated methods to score: cbci, global-mean-mode, raw-knn:K
    #[arg(long)]
    pub methods: Option<String>,

    /// Number of clusters (defaults to the number of distinct class labels)
    #[arg(long)]
    pub k: Option<usize>,

    /// Mean initialization: class-seeded, farthest-first, farthest-first:ID, or fixed:PATH
    #[arg(long)]
    pub init: Option<String>,

    /// Iteration cap for clustering
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,

    /// Nearest neighbors per record in the mapping step (defaults to the cluster count)
    #[arg(long)]
    pub neighbors: Option<usize>,

    /// Fill strategy: copy, top-k:N, or class-mean
    #[arg(long)]
    pub fill: Option<String>,

    /// Donor pool size for class prediction votes
    #[arg(long = "top-k")]
    pub top_k: Option<usize>,

    /// Min-max scale numeric columns before measuring distances
    #[arg(long)]
    pub scale: bool,

    /// Stamp the report with the generation time
    #[arg(long)]
    pub timestamp: bool,
}

impl RunArgs {
    /// Folds the config file (if any) into unset options. Command-line values
    /// win; boolean flags can only be switched on, never off.
    pub fn merge_config(&mut self) -> Result<()> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (key, value) in parse_config_text(&text)? {
            match key.as_str() {
                "k" => fill_parsed(&mut self.k, &key, &value)?,
                "init" => fill_text(&mut self.init, &value),
                "max-iter" => fill_parsed(&mut self.max_iter, &key, &value)?,
                "neighbors" => fill_parsed(&mut self.neighbors, &key, &value)?,
                "fill" => fill_text(&mut self.fill, &value),
                "top-k" => fill_parsed(&mut self.top_k, &key, &value)?,
                "predict" => self.predict |= parse_flag(&key, &value)?,
                "scale" => self.scale |= parse_flag(&key, &value)?,
                _ => bail!("config file {}: unknown key {key:?}", path.display()),
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineConfigF64> {
        build_pipeline(
            self.k,
            self.init.as_deref(),
            self.max_iter,
            self.neighbors,
            self.fill.as_deref(),
            self.top_k,
            self.predict,
        )
    }
}

impl EvalArgs {
    pub fn merge_config(&mut self) -> Result<()> {
        let Some(path) = self.config.clone() else {
            return Ok(());
        };
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (key, value) in parse_config_text(&text)? {
            match key.as_str() {
                "fraction" => fill_parsed(&mut self.fraction, &key, &value)?,
                "seed" => fill_parsed(&mut self.seed, &key, &value)?,
                "columns" => fill_text(&mut self.columns, &value),
                "max-per-record" => fill_parsed(&mut self.max_per_record, &key, &value)?,
                "methods" => fill_text(&mut self.methods, &value),
                "k" => fill_parsed(&mut self.k, &key, &value)?,
                "init" => fill_text(&mut self.init, &value),
                "max-iter" => fill_parsed(&mut self.max_iter, &key, &value)?,
                "neighbors" => fill_parsed(&mut self.neighbors, &key, &value)?,
                "fill" => fill_text(&mut self.fill, &value),
                "top-k" => fill_parsed(&mut self.top_k, &key, &value)?,
                "scale" => self.scale |= parse_flag(&key, &value)?,
                _ => bail!("config file {}: unknown key {key:?}", path.display()),
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineConfigF64> {
        build_pipeline(
            self.k,
            self.init.as_deref(),
            self.max_iter,
            self.neighbors,
            self.fill.as_deref(),
            self.top_k,
            false,
        )
    }
}

fn build_pipeline(
    k: Option<usize>,
    init: Option<&str>,
    max_iter: Option<usize>,
    neighbors: Option<usize>,
    fill: Option<&str>,
    top_k: Option<usize>,
    predict: bool,
) -> Result<PipelineConfigF64> {
    let defaults = PipelineConfigF64::default();
    Ok(PipelineConfigF64 {
        k,
        init: init.map(parse_init).transpose()?.unwrap_or(defaults.init),
        max_iter: max_iter.unwrap_or(defaults.max_iter),
        neighbor_count: neighbors,
        fill: fill.map(parse_fill).transpose()?.unwrap_or(defaults.fill),
        top_k: top_k.unwrap_or(defaults.top_k),
        predict,
    })
}

pub fn parse_init(text: &str) -> Result<InitStrategy<f64>> {
    match text {
        "class-seeded" => return Ok(InitStrategy::ClassSeeded),
        "farthest-first" => return Ok(InitStrategy::FarthestFirst { start: None }),
        _ => {}
    }
    if let Some(id) = text.strip_prefix("farthest-first:") {
        let id = id
            .parse()
            .map_err(|_| anyhow!("init farthest-first: bad record id {id:?}"))?;
        return Ok(InitStrategy::FarthestFirst { start: Some(id) });
    }
    if let Some(path) = text.strip_prefix("fixed:") {
        let body =
            fs::read_to_string(path).with_context(|| format!("cannot read means file {path}"))?;
        return Ok(InitStrategy::Fixed(parse_means_file(&body)?));
    }
    bail!("unknown init {text:?}; expected class-seeded, farthest-first, farthest-first:ID, or fixed:PATH")
}

pub fn parse_fill(text: &str) -> Result<FillStrategy> {
    match text {
        "copy" => return Ok(FillStrategy::CopyDonor),
        "class-mean" => return Ok(FillStrategy::ClassMean),
        _ => {}
    }
    if let Some(count) = text.strip_prefix("top-k:") {
        let count = count
            .parse()
            .map_err(|_| anyhow!("fill top-k: bad donor count {count:?}"))?;
        return Ok(FillStrategy::TopK(count));
    }
    bail!("unknown fill strategy {text:?}; expected copy, top-k:N, or class-mean")
}

pub fn parse_methods(text: Option<&str>) -> Result<Vec<Method>> {
    let Some(text) = text else {
        return Ok(vec![Method::Cbci, Method::GlobalMeanMode, Method::RawKnn(1)]);
    };
    let mut methods = Vec::new();
    for item in text.split(',') {
        let item = item.trim();
        match item {
            "cbci" => methods.push(Method::Cbci),
            "global-mean-mode" => methods.push(Method::GlobalMeanMode),
            _ => {
                if let Some(k) = item.strip_prefix("raw-knn:") {
                    let k = k
                        .parse()
                        .map_err(|_| anyhow!("method raw-knn: bad neighbor count {k:?}"))?;
                    methods.push(Method::RawKnn(k));
                } else {
                    bail!("unknown method {item:?}; expected cbci, global-mean-mode, or raw-knn:K");
                }
            }
        }
    }
    if methods.is_empty() {
        bail!("the method list is empty");
    }
    Ok(methods)
}

pub fn parse_columns(text: &str) -> Vec<String> {
    text.split(',')
        .map(|item| item.trim().to_string())
        .filter(|item| !item.is_empty())
        .collect()
}

/// Splits a config file into trimmed key/value pairs. `#` starts a comment
/// line; underscores in keys are folded to hyphens so both spellings work.
fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key=value, got {line:?}", idx + 1);
        };
        pairs.push((key.trim().replace('_', "-"), value.trim().to_string()));
    }
    Ok(pairs)
}

fn fill_parsed<T: std::str::FromStr>(slot: &mut Option<T>, key: &str, value: &str) -> Result<()> {
    if slot.is_none() {
        let parsed = value
            .parse()
            .map_err(|_| anyhow!("config key {key}: cannot parse {value:?}"))?;
        *slot = Some(parsed);
    }
    Ok(())
}

fn fill_text(slot: &mut Option<String>, value: &str) {
    if slot.is_none() {
        *slot = Some(value.to_string());
    }
}

fn parse_flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("config key {key}: expected true or false, got {value:?}"),
    }
}
