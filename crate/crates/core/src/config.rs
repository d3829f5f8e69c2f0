//! Pipeline configuration: a flat, documented key-value text file.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are rejected
//! so typos fail loudly. Command-line flags are applied as overrides on top
//! of the file through the same key namespace.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::condenser::CondenseConfig;
use crate::evopro::EvoConfig;
use crate::llm::{LlmBackend, LlmError, MockConfig, RemoteConfig};
use crate::recmodel::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {msg}")]
    BadValue { key: String, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("llm error: {0}")]
    Llm(#[from] LlmError),
}

/// Which LLM gateway a run uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone)]
pub struct LlmSettings {
    pub kind: BackendKind,
    pub mock: MockConfig,
    pub remote: RemoteConfig,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub items_path: PathBuf,
    pub behaviors_path: PathBuf,
    pub split: (f64, f64, f64),
    pub seed: u64,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
    pub condense: CondenseConfig,
    pub evo: EvoConfig,
    pub llm: LlmSettings,
    pub k_list: Vec<usize>,
    /// Baseline sampling ratios; derived from the condensed artifacts when
    /// absent.
    pub baseline_user_ratio: Option<f64>,
    pub baseline_token_ratio: Option<f64>,
    /// Condensation prompt template file; the built-in default when absent.
    pub prompt_file: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seed = 0;
        Self {
            items_path: PathBuf::from("items.tsv"),
            behaviors_path: PathBuf::from("behaviors.tsv"),
            split: (0.8, 0.1, 0.1),
            seed,
            output_dir: PathBuf::from("out"),
            train: TrainConfig { seed, ..TrainConfig::default() },
            condense: CondenseConfig { seed, ..CondenseConfig::default() },
            evo: EvoConfig { seed, ..EvoConfig::default() },
            llm: LlmSettings {
                kind: BackendKind::Mock,
                mock: MockConfig { seed, ..MockConfig::default() },
                remote: RemoteConfig::default(),
            },
            k_list: vec![1, 5],
            baseline_user_ratio: None,
            baseline_token_ratio: None,
            prompt_file: None,
        }
    }
}

impl PipelineConfig {
    /// Parses file text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let mut explicit_seeds = ExplicitSeeds::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
                line: idx + 1,
                msg: format!("expected key = value, found {raw:?}"),
            })?;
            config.apply(key.trim(), value.trim(), &mut explicit_seeds)?;
        }
        config.finish_seeds(&explicit_seeds);
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies `key=value` overrides (command-line flags) after the file.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<(), ConfigError> {
        let mut explicit = ExplicitSeeds::default();
        for (key, value) in overrides {
            self.apply(key, value, &mut explicit)?;
        }
        self.finish_seeds(&explicit);
        Ok(())
    }

    fn apply(
        &mut self,
        key: &str,
        value: &str,
        explicit: &mut ExplicitSeeds,
    ) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::BadValue { key: key.to_string(), msg };
        macro_rules! parse {
            ($ty:ty) => {
                value.parse::<$ty>().map_err(|e| bad(e.to_string()))?
            };
        }
        match key {
            "data.items" => self.items_path = PathBuf::from(value),
            "data.behaviors" => self.behaviors_path = PathBuf::from(value),
            "split.train" => self.split.0 = parse!(f64),
            "split.val" => self.split.1 = parse!(f64),
            "split.test" => self.split.2 = parse!(f64),
            "seed" => self.seed = parse!(u64),
            "output.dir" => self.output_dir = PathBuf::from(value),
            "train.learning_rate" => self.train.learning_rate = parse!(f64),
            "train.negative_ratio" => self.train.negative_ratio = parse!(usize),
            "train.epochs" => self.train.epochs = parse!(usize),
            "train.batch_size" => self.train.batch_size = parse!(usize),
            "train.vocab_buckets" => self.train.vocab_buckets = parse!(usize),
            "train.content_dim" => self.train.content_dim = parse!(usize),
            "train.user_dim" => self.train.user_dim = parse!(usize),
            "train.seed" => {
                self.train.seed = parse!(u64);
                explicit.train = true;
            }
            "condense.k" => self.condense.k = parse!(usize),
            "condense.m" => self.condense.m = parse!(usize),
            "condense.alpha" => self.condense.alpha = parse!(f64),
            "condense.kmeans_max_iters" => self.condense.kmeans.max_iters = parse!(usize),
            "condense.kmeans_tolerance" => self.condense.kmeans.tolerance = parse!(f64),
            "condense.kmeans_restarts" => self.condense.kmeans.restarts = parse!(usize),
            "condense.seed" => {
                self.condense.seed = parse!(u64);
                explicit.condense = true;
            }
            "evo.generations" => self.evo.generations = parse!(usize),
            "evo.children" => self.evo.children = parse!(usize),
            "evo.scoring_sample" => {
                self.evo.scoring_sample =
                    if value.is_empty() || value == "all" { None } else { Some(parse!(usize)) }
            }
            "evo.seed" => {
                self.evo.seed = parse!(u64);
                explicit.evo = true;
            }
            "llm.backend" => {
                self.llm.kind = match value {
                    "mock" => BackendKind::Mock,
                    "remote" => BackendKind::Remote,
                    other => return Err(bad(format!("expected mock or remote, got {other:?}"))),
                }
            }
            "llm.mock_budget" => self.llm.mock.summary_budget = parse!(usize),
            "llm.mock_interests" => self.llm.mock.interest_count = parse!(usize),
            "llm.mock_echo" => self.llm.mock.echo = parse!(bool),
            "llm.mock_seed" => {
                self.llm.mock.seed = parse!(u64);
                explicit.mock = true;
            }
            "llm.base_url" => self.llm.remote.base_url = value.to_string(),
            "llm.model" => self.llm.remote.model = value.to_string(),
            "llm.token_env" => self.llm.remote.token_env = value.to_string(),
            "llm.timeout_secs" => self.llm.remote.timeout_secs = parse!(u64),
            "llm.max_retries" => self.llm.remote.max_retries = parse!(u32),
            "llm.concurrency" => self.llm.remote.concurrency = parse!(usize),
            "llm.backoff_ms" => self.llm.remote.backoff_ms = parse!(u64),
            "eval.k_list" => {
                let ks: Result<Vec<usize>, _> =
                    value.split(',').map(|v| v.trim().parse::<usize>()).collect();
                self.k_list = ks.map_err(|e| bad(e.to_string()))?;
                if self.k_list.is_empty() {
                    return Err(bad("k list must not be empty".into()));
                }
            }
            "baseline.user_ratio" => self.baseline_user_ratio = Some(parse!(f64)),
            "baseline.token_ratio" => self.baseline_token_ratio = Some(parse!(f64)),
            "prompt.file" => self.prompt_file = Some(PathBuf::from(value)),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Sub-seeds default to the global seed unless set explicitly.
    fn finish_seeds(&mut self, explicit: &ExplicitSeeds) {
        if !explicit.train {
            self.train.seed = self.seed;
        }
        if !explicit.condense {
            self.condense.seed = self.seed;
        }
        if !explicit.evo {
            self.evo.seed = self.seed;
        }
        if !explicit.mock {
            self.llm.mock.seed = self.seed;
        }
    }

    /// Builds the configured backend.
    pub fn backend(&self) -> Result<LlmBackend, ConfigError> {
        Ok(match self.llm.kind {
            BackendKind::Mock => LlmBackend::mock(self.llm.mock.clone()),
            BackendKind::Remote => LlmBackend::remote(self.llm.remote.clone())?,
        })
    }

    /// Canonical resolved rendering, embedded into run manifests.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "data.items = {}", self.items_path.display());
        let _ = writeln!(s, "data.behaviors = {}", self.behaviors_path.display());
        let _ = writeln!(s, "split.train = {}", self.split.0);
        let _ = writeln!(s, "split.val = {}", self.split.1);
        let _ = writeln!(s, "split.test = {}", self.split.2);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        let _ = writeln!(s, "train.learning_rate = {}", self.train.learning_rate);
        let _ = writeln!(s, "train.negative_ratio = {}", self.train.negative_ratio);
        let _ = writeln!(s, "train.epochs = {}", self.train.epochs);
        let _ = writeln!(s, "train.batch_size = {}", self.train.batch_size);
        let _ = writeln!(s, "train.vocab_buckets = {}", self.train.vocab_buckets);
        let _ = writeln!(s, "train.content_dim = {}", self.train.content_dim);
        let _ = writeln!(s, "train.user_dim = {}", self.train.user_dim);
        let _ = writeln!(s, "train.seed = {}", self.train.seed);
        let _ = writeln!(s, "condense.k = {}", self.condense.k);
        let _ = writeln!(s, "condense.m = {}", self.condense.m);
        let _ = writeln!(s, "condense.alpha = {}", self.condense.alpha);
        let _ = writeln!(s, "condense.kmeans_max_iters = {}", self.condense.kmeans.max_iters);
        let _ = writeln!(s, "condense.kmeans_tolerance = {}", self.condense.kmeans.tolerance);
        let _ = writeln!(s, "condense.kmeans_restarts = {}", self.condense.kmeans.restarts);
        let _ = writeln!(s, "condense.seed = {}", self.condense.seed);
        let _ = writeln!(s, "evo.generations = {}", self.evo.generations);
        let _ = writeln!(s, "evo.children = {}", self.evo.children);
        if let Some(n) = self.evo.scoring_sample {
            let _ = writeln!(s, "evo.scoring_sample = {n}");
        }
        let _ = writeln!(s, "evo.seed = {}", self.evo.seed);
        let kind = match self.llm.kind {
            BackendKind::Mock => "mock",
            BackendKind::Remote => "remote",
        };
        let _ = writeln!(s, "llm.backend = {kind}");
        let _ = writeln!(s, "llm.mock_budget = {}", self.llm.mock.summary_budget);
        let _ = writeln!(s, "llm.mock_interests = {}", self.llm.mock.interest_count);
        let _ = writeln!(s, "llm.mock_echo = {}", self.llm.mock.echo);
        let _ = writeln!(s, "llm.mock_seed = {}", self.llm.mock.seed);
        if self.llm.kind == BackendKind::Remote {
            let _ = writeln!(s, "llm.base_url = {}", self.llm.remote.base_url);
            let _ = writeln!(s, "llm.model = {}", self.llm.remote.model);
            let _ = writeln!(s, "llm.token_env = {}", self.llm.remote.token_env);
            let _ = writeln!(s, "llm.timeout_secs = {}", self.llm.remote.timeout_secs);
            let _ = writeln!(s, "llm.max_retries = {}", self.llm.remote.max_retries);
            let _ = writeln!(s, "llm.concurrency = {}", self.llm.remote.concurrency);
            let _ = writeln!(s, "llm.backoff_ms = {}", self.llm.remote.backoff_ms);
        }
        let ks: Vec<String> = self.k_list.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "eval.k_list = {}", ks.join(","));
        if let Some(r) = self.baseline_user_ratio {
            let _ = writeln!(s, "baseline.user_ratio = {r}");
        }
        if let Some(r) = self.baseline_token_ratio {
            let _ = writeln!(s, "baseline.token_ratio = {r}");
        }
        if let Some(p) = &self.prompt_file {
            let _ = writeln!(s, "prompt.file = {}", p.display());
        }
        s
    }
}

#[derive(Default)]
struct ExplicitSeeds {
    train: bool,
    condense: bool,
    evo: bool,
    mock: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let text = "\
# comment
data.items = data/items.tsv
seed = 42
condense.k = 12
llm.backend = mock
eval.k_list = 5, 10
";
        let config = PipelineConfig::parse(text).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.condense.k, 12);
        assert_eq!(config.k_list, vec![5, 10]);
        // Sub-seeds follow the global seed.
        assert_eq!(config.train.seed, 42);
        assert_eq!(config.condense.seed, 42);

        let back = PipelineConfig::parse(&config.to_text()).unwrap();
        assert_eq!(back.to_text(), config.to_text());
    }

    #[test]
    fn explicit_sub_seed_survives() {
        let config = PipelineConfig::parse("seed = 7\ntrain.seed = 9\n").unwrap();
        assert_eq!(config.train.seed, 9);
        assert_eq!(config.condense.seed, 7);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            PipelineConfig::parse("no.such.key = 1\n"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            PipelineConfig::parse("train.epochs = chicken\n"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("just a line\n"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn overrides_apply_after_file() {
        let mut config = PipelineConfig::parse("seed = 1\ncondense.k = 4\n").unwrap();
        config
            .apply_overrides(&[("condense.k".into(), "9".into()), ("seed".into(), "3".into())])
            .unwrap();
        assert_eq!(config.condense.k, 9);
        assert_eq!(config.seed, 3);
        assert_eq!(config.train.seed, 3);
    }
}
