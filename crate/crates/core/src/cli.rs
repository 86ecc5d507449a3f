//! Command-line front end: `label`, `evaluate`, `sweep`, `annotate` and
//! `export`.
//!
//! Settings resolve as flags over environment over config file over
//! defaults. The config file is TOML with flat keys named like the long
//! flags (`pattern = "topic"`, `descriptors = true`, ...). The resolved
//! settings are echoed in every report.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 when
//! the scoring backend fails.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::annotate::{annotate_pool, export_training_set, read_silver, AnnotateOptions, Split};
use crate::dataset::{load_corpus, Corpus, CorpusFormat, GlossRecord};
use crate::engine::dump::{load_predictions, write_predictions, PredictionRecord};
use crate::engine::{BatchOptions, Classifier, EngineConfig, EngineFormulation, OnError};
use crate::eval::{
    comparison_csv, confusion_csv, evaluate, run_comparison, sweep_csv, threshold_grid, topk_csv,
    ComparisonRun, REPORT_KS,
};
use crate::labelspace::{babeldomains, load_labelspace, LabelSpace};
use crate::patterns::{PatternRegistry, DEFAULT_MLM_PATTERN};
use crate::scorer::{
    MockScorer, RemoteConfig, RemoteScorer, Scorer, ENV_BACKEND_TIMEOUT_MS, ENV_BACKEND_URL,
};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 13;
pub const DEFAULT_REMOTE_MODEL: &str = "roberta-large-mnli";
const BUNDLED_LABELS: &str = "babeldomains (bundled)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Remote,
    Mock,
}

#[derive(Debug, Parser)]
#[command(name = "glossdom", version, about = "Zero-shot domain labelling of dictionary glosses")]
pub struct Cli {
    /// Scoring backend.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendChoice>,
    /// TOML settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (training splits).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Label space JSON; defaults to the bundled BabelDomains labels.
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// Extra patterns (JSON list) added to the built-in registry.
    #[arg(long, global = true)]
    pub pattern_file: Option<PathBuf>,
    /// Model name sent to the remote backend.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Base URL of the scoring server (also GLOSSDOM_BACKEND_URL).
    #[arg(long, global = true)]
    pub backend_url: Option<String>,
    /// Per-request timeout (also GLOSSDOM_BACKEND_TIMEOUT_MS).
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    /// Glosses scored concurrently (capped by the backend).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EngineArgs {
    /// Pattern id from the registry.
    #[arg(long)]
    pub pattern: Option<String>,
    /// nli, nsp or mlm-constrained.
    #[arg(long)]
    pub formulation: Option<String>,
    /// Query each label through its descriptors.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub descriptors: Option<bool>,
    /// Abstain when the top probability is below this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Softmax temperature; lower values sharpen the distribution.
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank the labels of one gloss, or of every gloss in a corpus file.
    #[command(group = clap::ArgGroup::new("source").required(true))]
    Label {
        #[command(flatten)]
        engine: EngineArgs,
        /// A single gloss.
        #[arg(long, group = "source")]
        text: Option<String>,
        /// Corpus file (.tsv or .jsonl); predictions are written as JSONL.
        #[arg(long, group = "source")]
        input: Option<PathBuf>,
        /// Print only the best N labels.
        #[arg(long)]
        top: Option<usize>,
        /// Print the prediction record as JSON.
        #[arg(long)]
        json: bool,
        /// Write JSONL predictions here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a gold corpus (or read a prediction dump) and report metrics.
    Evaluate {
        #[command(flatten)]
        engine: EngineArgs,
        /// Gold corpus (.tsv or .jsonl).
        #[arg(long)]
        corpus: PathBuf,
        /// Evaluate this prediction dump instead of classifying.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Accuracy cut-offs, e.g. 1,3,5.
        #[arg(long, value_delimiter = ',')]
        topk: Option<Vec<usize>>,
        /// Created if missing; files already there are overwritten.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare patterns and sweep abstention thresholds.
    Sweep {
        #[command(flatten)]
        engine: EngineArgs,
        /// Gold corpus (.tsv or .jsonl).
        #[arg(long)]
        corpus: PathBuf,
        /// `all` (every pattern of the formulation) or comma-separated ids.
        #[arg(long, default_value = "all")]
        patterns: String,
        /// Abstention thresholds to sweep, e.g. 0,0.05,0.1 [default: 0 to 0.95 by 0.05].
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Created if missing; files already there are overwritten.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Label an unlabelled pool into silver JSONL, resumably.
    Annotate {
        #[command(flatten)]
        engine: EngineArgs,
        /// Unlabelled corpus (.tsv or .jsonl).
        #[arg(long)]
        pool: PathBuf,
        /// Silver JSONL; progress is kept in `<out>.done`.
        #[arg(long)]
        out: PathBuf,
        /// Continue from the checkpoint next to `--out`.
        #[arg(long)]
        resume: bool,
        /// Stop after this many glosses.
        #[arg(long)]
        limit: Option<usize>,
        /// Glosses committed to disk per step.
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Split silver data into train/dev files for a student classifier.
    Export {
        /// Silver JSONL written by `annotate`.
        #[arg(long)]
        silver: PathBuf,
        /// Train and dev fractions, e.g. 0.8,0.2.
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.1])]
        split: Vec<f64>,
        /// Created if missing; files already there are overwritten.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Settings accepted in the config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendChoice>,
    pub model: Option<String>,
    pub backend_url: Option<String>,
    pub timeout_ms: Option<u64>,
    pub labels: Option<PathBuf>,
    pub pattern_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub batch_size: Option<usize>,
    pub pattern: Option<String>,
    pub formulation: Option<String>,
    pub descriptors: Option<bool>,
    pub threshold: Option<f64>,
    pub temperature: Option<f64>,
}

pub fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        context: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Fully merged settings, echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub backend: BackendChoice,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend_url: Option<String>,
    pub timeout_ms: u64,
    pub labels: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern_file: Option<String>,
    pub seed: u64,
    pub workers: usize,
    pub batch_size: usize,
    pub engine: EngineConfig,
    #[serde(skip)]
    labels_path: Option<PathBuf>,
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

impl ResolvedConfig {
    pub fn resolve(cli: &Cli, engine: &EngineArgs) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => load_file_config(path)?,
            None => FileConfig::default(),
        };
        let env_timeout = env_var(ENV_BACKEND_TIMEOUT_MS)
            .map(|v| {
                v.trim().parse::<u64>().map_err(|_| {
                    Error::Config(format!("{ENV_BACKEND_TIMEOUT_MS}: not an integer: {v}"))
                })
            })
            .transpose()?;

        let backend = cli.backend.or(file.backend).unwrap_or(BackendChoice::Remote);
        let model = match backend {
            BackendChoice::Mock => MockScorer::new().descriptor().model_name,
            BackendChoice::Remote => cli
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| DEFAULT_REMOTE_MODEL.to_string()),
        };
        let backend_url = match backend {
            BackendChoice::Mock => None,
            BackendChoice::Remote => cli
                .backend_url
                .clone()
                .or_else(|| env_var(ENV_BACKEND_URL))
                .or(file.backend_url),
        };
        let labels_path = cli.labels.clone().or(file.labels);
        let pattern_file = cli.pattern_file.clone().or(file.pattern_file);

        let formulation: EngineFormulation = engine
            .formulation
            .clone()
            .or(file.formulation)
            .map(|f| f.parse())
            .transpose()?
            .unwrap_or(EngineFormulation::Nli);
        let default_pattern = match formulation {
            EngineFormulation::Nli => EngineConfig::default().pattern_id,
            EngineFormulation::Nsp => "nsp-domain-or-topic".to_string(),
            EngineFormulation::MlmConstrained => DEFAULT_MLM_PATTERN.to_string(),
        };
        let engine_cfg = EngineConfig {
            formulation,
            pattern_id: engine.pattern.clone().or(file.pattern).unwrap_or(default_pattern),
            use_descriptors: engine.descriptors.or(file.descriptors).unwrap_or(false),
            threshold: engine.threshold.or(file.threshold),
            softmax_temperature: engine.temperature.or(file.temperature).unwrap_or(1.0),
        };
        engine_cfg.validate()?;

        let workers = cli.workers.or(file.workers).unwrap_or(4);
        let batch_size = file.batch_size.unwrap_or(16);
        if workers == 0 || batch_size == 0 {
            return Err(Error::Config("workers and batch_size must be at least 1".into()));
        }
        Ok(Self {
            backend,
            model,
            backend_url,
            timeout_ms: cli.timeout_ms.or(env_timeout).or(file.timeout_ms).unwrap_or(30_000),
            labels: labels_path
                .as_ref()
                .map_or_else(|| BUNDLED_LABELS.to_string(), |p| p.display().to_string()),
            pattern_file: pattern_file.as_ref().map(|p| p.display().to_string()),
            seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            workers,
            batch_size,
            engine: engine_cfg,
            labels_path,
        })
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        Ok(match &self.labels_path {
            Some(p) => load_labelspace(p)?,
            None => babeldomains(),
        })
    }

    pub fn registry(&self) -> Result<PatternRegistry> {
        let mut registry = PatternRegistry::builtin();
        if let Some(p) = &self.pattern_file {
            registry.extend_from_file(p)?;
        }
        Ok(registry)
    }

    pub fn backend(&self) -> Result<Box<dyn Scorer>> {
        Ok(match self.backend {
            BackendChoice::Mock => Box::new(MockScorer::new()),
            BackendChoice::Remote => {
                let url = self.backend_url.clone().ok_or_else(|| {
                    Error::Config(format!(
                        "the remote backend needs --backend-url or {ENV_BACKEND_URL}"
                    ))
                })?;
                let mut config = RemoteConfig::new(url, &self.model);
                config.timeout = Duration::from_millis(self.timeout_ms);
                Box::new(RemoteScorer::new(config)?)
            }
        })
    }

    fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            on_error: OnError::FailFast,
            workers: self.workers,
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        context: path.display().to_string(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        context: path.display().to_string(),
        source,
    })
}

fn stdout_err(source: io::Error) -> Error {
    Error::Io {
        context: "stdout".into(),
        source,
    }
}

fn load_any_corpus(path: &Path) -> Result<Corpus> {
    Ok(load_corpus(path, CorpusFormat::from_path(path))?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Runs a parsed command, writing its console output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let no_engine = EngineArgs::default();
    let engine_args = match &cli.command {
        Command::Label { engine, .. }
        | Command::Evaluate { engine, .. }
        | Command::Sweep { engine, .. }
        | Command::Annotate { engine, .. } => engine,
        Command::Export { .. } => &no_engine,
    };
    let cfg = ResolvedConfig::resolve(cli, engine_args)?;
    let labels = cfg.label_space()?;

    match &cli.command {
        Command::Label {
            text,
            input,
            top,
            json,
            out: out_path,
            ..
        } => {
            let registry = cfg.registry()?;
            let classifier = Classifier::with_registry(&labels, cfg.engine.clone(), &registry)?;
            let backend = cfg.backend()?;
            let echo = serde_json::to_value(&cfg).expect("config serializes");
            if let Some(text) = text {
                let scored = classifier.classify(&GlossRecord::new("text", text.as_str()), &*backend)?;
                if *json {
                    let record = PredictionRecord::from_scored(&scored, echo);
                    writeln!(out, "{}", serde_json::to_string(&record).expect("serializes"))
                        .map_err(stdout_err)?;
                    return Ok(());
                }
                let shown = top.unwrap_or(scored.entries.len());
                for e in scored.entries.iter().take(shown) {
                    writeln!(out, "{} {:.2}", e.label, e.p).map_err(stdout_err)?;
                }
                if scored.abstained {
                    writeln!(out, "(abstained)").map_err(stdout_err)?;
                }
                return Ok(());
            }
            let input = input.as_ref().expect("clap requires --text or --input");
            let corpus = load_any_corpus(input)?;
            let predictions = classifier
                .classify_records(&corpus.records, &*backend, cfg.batch_options())?
                .predictions;
            match out_path {
                Some(p) => {
                    let mut buf = Vec::new();
                    write_predictions(&mut buf, &predictions, &echo).map_err(stdout_err)?;
                    write_file(p, buf)?;
                }
                None => write_predictions(&mut *out, &predictions, &echo).map_err(stdout_err)?,
            }
        }

        Command::Evaluate {
            corpus,
            predictions,
            topk,
            out_dir,
            ..
        } => {
            let golds = load_any_corpus(corpus)?;
            let classified = match predictions {
                Some(path) => {
                    let loaded = load_predictions(path)?;
                    match cfg.engine.threshold {
                        Some(t) => loaded.iter().map(|p| p.regated(Some(t))).collect(),
                        None => loaded,
                    }
                }
                None => {
                    let registry = cfg.registry()?;
                    let classifier =
                        Classifier::with_registry(&labels, cfg.engine.clone(), &registry)?;
                    let backend = cfg.backend()?;
                    classifier
                        .classify_records(&golds.records, &*backend, cfg.batch_options())?
                        .predictions
                }
            };
            let ks: Vec<usize> = match topk {
                Some(ks) => ks.clone(),
                None => REPORT_KS.iter().copied().filter(|&k| k <= labels.len()).collect(),
            };
            let report = evaluate(&classified, &golds, &labels)?.with_ks(&ks)?;

            create_dir(out_dir)?;
            let config_line = serde_json::to_string(&cfg).expect("config serializes");
            let text = format!("config {config_line}\n{}", report.to_text());
            write_file(&out_dir.join("report.txt"), &text)?;
            write_file(
                &out_dir.join("report.json"),
                to_json(&serde_json::json!({ "config": cfg, "report": report })),
            )?;
            write_file(&out_dir.join("topk.csv"), topk_csv(&report.top_k_curve))?;
            write_file(&out_dir.join("confusion.csv"), confusion_csv(&report.confusion))?;
            if predictions.is_none() {
                let mut buf = Vec::new();
                write_predictions(&mut buf, &classified, &cfg).map_err(stdout_err)?;
                write_file(&out_dir.join("predictions.jsonl"), buf)?;
            }
            out.write_all(report.to_text().as_bytes()).map_err(stdout_err)?;
        }

        Command::Sweep {
            corpus,
            patterns,
            thresholds,
            out_dir,
            ..
        } => {
            let golds = load_any_corpus(corpus)?;
            let registry = cfg.registry()?;
            let ids: Vec<String> = if patterns == "all" {
                registry
                    .by_formulation(cfg.engine.formulation.pattern_formulation())
                    .map(|p| p.id.clone())
                    .collect()
            } else {
                patterns.split(',').map(|s| s.trim().to_string()).collect()
            };
            for id in &ids {
                registry.get(id)?;
            }
            let thresholds = thresholds.clone().unwrap_or_else(|| threshold_grid(0.05, 0.95));
            let backend = cfg.backend()?;
            let runs: Vec<ComparisonRun<'_>> = ids
                .iter()
                .map(|id| ComparisonRun {
                    name: id.clone(),
                    config: cfg.engine.clone().with_pattern(id.as_str()),
                    backend: &*backend,
                })
                .collect();
            let rows = run_comparison(
                &golds,
                &labels,
                &runs,
                &registry,
                cfg.batch_options(),
                &thresholds,
            );

            create_dir(out_dir)?;
            write_file(&out_dir.join("comparison.csv"), comparison_csv(&rows))?;
            write_file(
                &out_dir.join("comparison.json"),
                to_json(&serde_json::json!({ "config": cfg, "thresholds": thresholds, "rows": rows })),
            )?;
            let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(7).max(7);
            writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}", "pattern", "top1", "top3", "top5", "f1")
                .map_err(stdout_err)?;
            for row in &rows {
                match &row.metrics {
                    Some(m) => {
                        write_file(&out_dir.join(format!("sweep-{}.csv", row.name)), sweep_csv(&row.sweep))?;
                        let k = |k: usize| m.top_k.get(&k).map_or("-".to_string(), |v| format!("{v:.4}"));
                        writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6.4}", row.name, k(1), k(3), k(5), m.f1)
                            .map_err(stdout_err)?;
                    }
                    None => {
                        let err = row.error.as_deref().unwrap_or("failed");
                        log::warn!("pattern `{}` failed: {err}", row.name);
                        writeln!(out, "{:<width$}  failed: {err}", row.name).map_err(stdout_err)?;
                    }
                }
            }
            if !rows.is_empty() && rows.iter().all(|r| r.metrics.is_none()) {
                return Err(Error::RunsFailed {
                    backend: rows.iter().any(|r| r.backend_failure),
                });
            }
        }

        Command::Annotate {
            pool,
            out: silver,
            resume,
            limit,
            batch_size,
            ..
        } => {
            let batch_size = batch_size.unwrap_or(cfg.batch_size);
            if batch_size == 0 {
                return Err(Error::Config("--batch-size must be at least 1".into()));
            }
            let pool = load_any_corpus(pool)?;
            let backend = cfg.backend()?;
            let summary = annotate_pool(
                &pool,
                &labels,
                &cfg.engine,
                &*backend,
                silver,
                AnnotateOptions {
                    resume: *resume,
                    limit: *limit,
                    batch_size,
                    workers: cfg.workers,
                },
            )?;
            out.write_all(to_json(&summary).as_bytes()).map_err(stdout_err)?;
        }

        Command::Export {
            silver,
            split,
            out_dir,
        } => {
            let [train, dev] = split[..] else {
                return Err(Error::Config(format!(
                    "--split takes two fractions (train,dev), got {}",
                    split.len()
                )));
            };
            let records = read_silver(silver)?;
            let split = Split::new(train, dev)?;
            let summary = export_training_set(&records, &labels, split, cfg.seed, out_dir)?;
            out.write_all(to_json(&summary).as_bytes()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("glossdom").chain(args.iter().copied())).unwrap()
    }

    fn run_capture(args: &[&str]) -> Result<String> {
        let mut buf = Vec::new();
        run(&parse(args), &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn label_text_layout() {
        let out = run_capture(&[
            "--backend", "mock", "label", "--text",
            "a health facility where patients receive treatment", "--top", "2",
        ])
        .unwrap();
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("Health and medicine 0."), "{out}");
    }

    #[test]
    fn empty_gloss_is_config_error() {
        let err = run_capture(&["--backend", "mock", "label", "--text", ""]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("empty gloss"));
    }

    #[test]
    fn unknown_pattern_lists_registry() {
        let err = run_capture(&["--backend", "mock", "label", "--text", "x", "--pattern", "nope"])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("domain-of-sentence"));
    }

    #[test]
    fn remote_without_url_is_config_error() {
        if std::env::var(ENV_BACKEND_URL).is_ok() {
            return;
        }
        let err = run_capture(&["label", "--text", "x"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn precedence_flag_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("glossdom.toml");
        fs::write(&file, "backend = \"mock\"\npattern = \"topic\"\ndescriptors = true\nthreshold = 0.2\nseed = 5\n").unwrap();
        let cfg_path = file.to_str().unwrap();
        let cli = parse(&["--config", cfg_path, "label", "--text", "x", "--pattern", "theme", "--descriptors", "false"]);
        let Command::Label { engine, .. } = &cli.command else { unreachable!() };
        let cfg = ResolvedConfig::resolve(&cli, engine).unwrap();
        assert_eq!(cfg.backend, BackendChoice::Mock);
        assert_eq!(cfg.engine.pattern_id, "theme");
        assert!(!cfg.engine.use_descriptors);
        assert_eq!(cfg.engine.threshold, Some(0.2));
        assert_eq!(cfg.seed, 5);

        let cli = parse(&["--config", cfg_path, "label", "--text", "x", "--descriptors"]);
        let Command::Label { engine, .. } = &cli.command else { unreachable!() };
        assert!(ResolvedConfig::resolve(&cli, engine).unwrap().engine.use_descriptors);

        fs::write(&file, "colour = 1\n").unwrap();
        let err = ResolvedConfig::resolve(&cli, engine).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn formulation_default_patterns() {
        let cli = parse(&["--backend", "mock", "label", "--text", "x", "--formulation", "nsp"]);
        let Command::Label { engine, .. } = &cli.command else { unreachable!() };
        let cfg = ResolvedConfig::resolve(&cli, engine).unwrap();
        assert_eq!(cfg.engine.pattern_id, "nsp-domain-or-topic");
        let cli = parse(&["--backend", "mock", "label", "--text", "x", "--formulation", "bogus"]);
        let Command::Label { engine, .. } = &cli.command else { unreachable!() };
        assert!(ResolvedConfig::resolve(&cli, engine).is_err());
    }

    #[test]
    fn seed_defaults_to_13() {
        let cli = parse(&["--backend", "mock", "export", "--silver", "s", "--out-dir", "o"]);
        let cfg = ResolvedConfig::resolve(&cli, &EngineArgs::default()).unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }
}
