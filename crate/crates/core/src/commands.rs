//! Command implementations behind the CLI.
//!
//! Every command reads its inputs, writes all artifacts under the configured
//! output directory together with a run manifest, and returns a structured
//! summary for the binary to print. Inputs are never mutated.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::condenser::{self, CondenseError};
use crate::config::{ConfigError, PipelineConfig};
use crate::datamodel::{
    self, DataError, Dataset, DatasetStats, SizeReport,
};
use crate::eval::{self, EvalError, MetricsReport, SweepRow};
use crate::evopro::{self, EvoError};
use crate::llm::{LlmError, PromptTemplate};
use crate::manifest::Manifest;
use crate::recmodel::{self, TrainError};
use crate::synth::{self, SynthError, SyntheticBenchmarkSpec};
use crate::textenc::{TextEncoder, Tokenizer};

/// Command failure, split by exit code: input validation failures exit 2,
/// runtime failures exit 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) | ConfigError::Llm(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) | TrainError::NoPositives => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<CondenseError> for CliError {
    fn from(e: CondenseError) -> Self {
        match e {
            CondenseError::InvalidConfig(_) | CondenseError::EmptyInput(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Invalid(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EvoError> for CliError {
    fn from(e: EvoError) -> Self {
        match e {
            EvoError::InvalidConfig(_) | EvoError::NoContents => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Invalid(_) => CliError::Validation(e.to_string()),
            SynthError::Data(d) => d.into(),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Which training set an evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalVariant {
    Original,
    Condensed,
    Random,
    Majority,
}

impl EvalVariant {
    pub fn name(self) -> &'static str {
        match self {
            EvalVariant::Original => "original",
            EvalVariant::Condensed => "condensed",
            EvalVariant::Random => "random",
            EvalVariant::Majority => "majority",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "original" => Ok(Self::Original),
            "condensed" => Ok(Self::Condensed),
            "random" => Ok(Self::Random),
            "majority" => Ok(Self::Majority),
            other => Err(CliError::Validation(format!(
                "unknown eval variant {other:?}; expected original|condensed|random|majority"
            ))),
        }
    }
}

fn ensure_out_dir(config: &PipelineConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.output_dir)?;
    Ok(())
}

fn load_and_split(
    config: &PipelineConfig,
) -> Result<(Dataset, Dataset, Dataset, Dataset), CliError> {
    let full = datamodel::load_dataset(&config.items_path, &config.behaviors_path)?;
    let (train, val, test) = datamodel::split_dataset(&full, config.split, config.seed)?;
    Ok((full, train, val, test))
}

fn condense_prompt(config: &PipelineConfig) -> Result<PromptTemplate, CliError> {
    match &config.prompt_file {
        Some(path) => Ok(PromptTemplate::load(path)?),
        None => Ok(PromptTemplate::default_condense()),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("json encoding failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn condensed_items_path(config: &PipelineConfig) -> PathBuf {
    config.output_dir.join("items_condensed.tsv")
}

pub fn condensed_behaviors_path(config: &PipelineConfig) -> PathBuf {
    config.output_dir.join("behaviors_condensed.tsv")
}

/// Validates and summarizes a dataset.
pub fn cmd_ingest(items: &Path, behaviors: &Path) -> Result<DatasetStats, CliError> {
    let dataset = datamodel::load_dataset(items, behaviors)?;
    Ok(datamodel::dataset_stats(&dataset, &Tokenizer::default()))
}

/// Generates the synthetic benchmark files into the output directory.
pub fn cmd_gen_synthetic(
    spec: &SyntheticBenchmarkSpec,
    config: &PipelineConfig,
) -> Result<DatasetStats, CliError> {
    ensure_out_dir(config)?;
    let dataset = synth::generate(spec)?;
    let items_path = config.output_dir.join("items.tsv");
    let behaviors_path = config.output_dir.join("behaviors.tsv");
    datamodel::save_dataset(&dataset, &items_path, &behaviors_path)?;

    let spec_text = format!(
        "groups = {}\nusers_per_group = {}\nitems_per_topic = {}\nvocab_per_topic = {}\n\
         history_len = {}..{}\nimpressions_per_user = {}\nnoise_rate = {}\nseed = {}\n",
        spec.groups,
        spec.users_per_group,
        spec.items_per_topic,
        spec.vocab_per_topic,
        spec.history_len.0,
        spec.history_len.1,
        spec.impressions_per_user,
        spec.noise_rate,
        spec.seed
    );
    let mut manifest = Manifest::new("gen-synthetic", &spec_text);
    manifest.add_output(&items_path)?;
    manifest.add_output(&behaviors_path)?;
    manifest.write(&config.output_dir)?;
    Ok(datamodel::dataset_stats(&dataset, &Tokenizer::default()))
}

pub struct TrainSummary {
    pub params_path: PathBuf,
    pub epoch_losses: Vec<f64>,
}

/// Trains the recommender on the train split and saves the parameters.
pub fn cmd_train(config: &PipelineConfig) -> Result<TrainSummary, CliError> {
    ensure_out_dir(config)?;
    let (_, train, _, _) = load_and_split(config)?;
    let model = recmodel::train(&train, &config.train)?;
    let params_path = config.output_dir.join("model_full.bin");
    model.params.save(&params_path)?;
    let meta_path = config.output_dir.join("model_full.meta");
    let losses: Vec<String> = model.epoch_losses.iter().map(|l| l.to_string()).collect();
    std::fs::write(
        &meta_path,
        format!(
            "epoch_losses = {}\nfinal_loss = {}\n--- config ---\n{}",
            losses.join(","),
            model.epoch_losses.last().unwrap(),
            config.to_text()
        ),
    )?;

    let mut manifest = Manifest::new("train", &config.to_text());
    manifest.add_input(&config.items_path)?;
    manifest.add_input(&config.behaviors_path)?;
    manifest.add_output(&params_path)?;
    manifest.add_output(&meta_path)?;
    manifest.write(&config.output_dir)?;
    Ok(TrainSummary { params_path, epoch_losses: model.epoch_losses })
}

pub struct EvolveSummary {
    pub winner_paths: Vec<PathBuf>,
    pub final_prompt_path: PathBuf,
    pub trace_path: PathBuf,
    pub final_score: f64,
}

/// Evolves the condensation prompt on the dataset's item contents.
pub fn cmd_evolve(config: &PipelineConfig) -> Result<EvolveSummary, CliError> {
    ensure_out_dir(config)?;
    let dataset = datamodel::load_dataset(&config.items_path, &config.behaviors_path)?;
    let contents: Vec<_> = dataset.items().values().cloned().collect();
    let backend = config.backend()?;
    let encoder = TextEncoder::default();
    let initial = condense_prompt(config)?;
    let outcome = evopro::evolve(&initial, &contents, &config.evo, &backend, &encoder)?;

    let prompts_dir = config.output_dir.join("prompts");
    std::fs::create_dir_all(&prompts_dir)?;
    let trace_path = config.output_dir.join("evo_trace.tsv");
    std::fs::write(&trace_path, outcome.trace.to_text())?;
    let mut winner_paths = Vec::new();
    for (i, winner) in outcome.winners.iter().enumerate() {
        let path = prompts_dir.join(format!("gen-{}.prompt", i + 1));
        winner.save(&path)?;
        winner_paths.push(path);
    }

    let mut manifest = Manifest::new("evolve", &config.to_text());
    manifest.add_input(&config.items_path)?;
    manifest.add_input(&config.behaviors_path)?;
    manifest.add_output(&trace_path)?;
    for path in &winner_paths {
        manifest.add_output(path)?;
    }

    if let Some(diagnostic) = outcome.aborted {
        manifest.write(&config.output_dir)?;
        return Err(CliError::Runtime(format!(
            "evolution aborted ({diagnostic}); {} completed generations were saved",
            outcome.winners.len()
        )));
    }
    let final_path = prompts_dir.join("final.prompt");
    outcome.final_prompt().expect("completed run has winners").save(&final_path)?;
    manifest.add_output(&final_path)?;
    manifest.write(&config.output_dir)?;

    let final_score = outcome
        .trace
        .generations
        .last()
        .map(|g| g.candidates[g.selected].score)
        .unwrap_or(f64::NAN);
    Ok(EvolveSummary { winner_paths, final_prompt_path: final_path, trace_path, final_score })
}

pub struct CondenseSummary {
    pub synthetic_users: usize,
    pub condensed_items: usize,
    pub content_failures: usize,
    pub size_report: SizeReport,
}

/// Trains the user encoder, condenses the train split, and writes the
/// condensed dataset, provenance, and size report.
pub fn cmd_condense(config: &PipelineConfig, json: bool) -> Result<CondenseSummary, CliError> {
    ensure_out_dir(config)?;
    let (_, train, _, _) = load_and_split(config)?;
    let model = recmodel::train(&train, &config.train)?;
    let params_path = config.output_dir.join("model_full.bin");
    model.params.save(&params_path)?;

    let prompt = condense_prompt(config)?;
    let backend = config.backend()?;
    let condensed =
        condenser::condense_dataset(&train, &config.condense, &prompt, &backend, &model.params)?;

    let items_path = condensed_items_path(config);
    let behaviors_path = condensed_behaviors_path(config);
    datamodel::save_dataset(&condensed.dataset, &items_path, &behaviors_path)?;
    let provenance_path = config.output_dir.join("provenance.tsv");
    std::fs::write(&provenance_path, condensed.provenance.to_text())?;

    let size = datamodel::size_report(&condensed.dataset, &train)?;
    let size_path = config.output_dir.join("size_report.tsv");
    std::fs::write(
        &size_path,
        format!(
            "item_bytes\tuser_bytes\toverall_bytes\titem_ratio\tuser_ratio\toverall_ratio\n{}\t{}\t{}\t{}\t{}\t{}\n",
            size.item_bytes,
            size.user_bytes,
            size.overall_bytes,
            size.item_ratio,
            size.user_ratio,
            size.overall_ratio
        ),
    )?;
    if json {
        write_json(&config.output_dir.join("size_report.json"), &size)?;
    }

    let mut manifest = Manifest::new("condense", &config.to_text());
    manifest.add_input(&config.items_path)?;
    manifest.add_input(&config.behaviors_path)?;
    for path in [&params_path, &items_path, &behaviors_path, &provenance_path, &size_path] {
        manifest.add_output(path)?;
    }
    manifest.write(&config.output_dir)?;

    Ok(CondenseSummary {
        synthetic_users: condensed.dataset.n_users(),
        condensed_items: condensed.dataset.n_items(),
        content_failures: condensed.provenance.content_failures.len(),
        size_report: size,
    })
}

/// Reads the condensed overall byte count from the size report written by
/// `condense`.
fn condensed_overall_bytes(config: &PipelineConfig) -> Option<usize> {
    let text = std::fs::read_to_string(config.output_dir.join("size_report.tsv")).ok()?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next()?.split('\t').collect();
    let values: Vec<&str> = lines.next()?.split('\t').collect();
    let idx = header.iter().position(|h| *h == "overall_bytes")?;
    values.get(idx)?.parse::<usize>().ok()
}

/// Builds a baseline dataset at a size matched to the condensed artifacts:
/// the user count matches the synthetic user count K, and the token ratio
/// is solved so the overall serialized bytes approximate the condensed
/// dataset's. Explicit config ratios override the matching.
fn matched_baseline(
    config: &PipelineConfig,
    train: &Dataset,
    build: impl Fn(f64, f64) -> Result<Dataset, EvalError>,
) -> Result<Dataset, CliError> {
    let user_ratio = match config.baseline_user_ratio {
        Some(r) => r,
        None => (config.condense.k as f64 / train.n_users().max(1) as f64).min(1.0),
    };
    if let Some(token_ratio) = config.baseline_token_ratio {
        return Ok(build(user_ratio, token_ratio)?);
    }
    let token_ratio = match condensed_overall_bytes(config) {
        Some(target) => {
            // Solve for the token ratio that lands the baseline on the same
            // overall byte budget. Item bytes scale roughly linearly in the
            // token ratio.
            let probe = build(user_ratio, 1.0)?;
            let (items_text, behaviors_text) = datamodel::serialize_dataset(&probe)?;
            let spare = target.saturating_sub(behaviors_text.len()) as f64;
            (spare / items_text.len() as f64).clamp(0.05, 1.0)
        }
        None => {
            // No condensed artifacts yet: approximate the condensation
            // budget from the mock summary length.
            let stats = datamodel::dataset_stats(train, &Tokenizer::default());
            let budget = config.llm.mock.summary_budget as f64;
            (budget / stats.avg_tokens_per_item.max(1.0)).clamp(0.05, 1.0)
        }
    };
    Ok(build(user_ratio, token_ratio)?)
}

/// Trains on the chosen variant of the train split and evaluates on the
/// test split, writing `eval_<variant>.tsv`.
pub fn cmd_eval(
    config: &PipelineConfig,
    variant: EvalVariant,
    json: bool,
) -> Result<MetricsReport, CliError> {
    ensure_out_dir(config)?;
    let (_, train, _, test) = load_and_split(config)?;
    let train_data = match variant {
        EvalVariant::Original => train,
        EvalVariant::Condensed => {
            let items = condensed_items_path(config);
            let behaviors = condensed_behaviors_path(config);
            if !items.exists() || !behaviors.exists() {
                return Err(CliError::Runtime(format!(
                    "condensed dataset not found under {}; run `condense` first",
                    config.output_dir.display()
                )));
            }
            datamodel::load_dataset(&items, &behaviors)?
        }
        EvalVariant::Random => matched_baseline(config, &train, |u, t| {
            eval::baseline_random(&train, u, t, config.seed)
        })?,
        EvalVariant::Majority => matched_baseline(config, &train, |u, t| {
            eval::baseline_majority(&train, u, t, config.seed)
        })?,
    };
    let model = recmodel::train(&train_data, &config.train)?;
    let report = eval::evaluate(&model.params, &test, &config.k_list)?;

    let report_path = config.output_dir.join(format!("eval_{}.tsv", variant.name()));
    std::fs::write(&report_path, report.to_tsv())?;
    if json {
        write_json(&config.output_dir.join(format!("eval_{}.json", variant.name())), &report)?;
    }
    let mut manifest = Manifest::new(&format!("eval-{}", variant.name()), &config.to_text());
    manifest.add_input(&config.items_path)?;
    manifest.add_input(&config.behaviors_path)?;
    manifest.add_output(&report_path)?;
    manifest.write(&config.output_dir)?;
    Ok(report)
}

/// Aggregates the per-variant reports into one table with Quality.
pub fn cmd_compare(
    config: &PipelineConfig,
    json: bool,
) -> Result<Vec<(String, MetricsReport)>, CliError> {
    let original_path = config.output_dir.join("eval_original.tsv");
    if !original_path.exists() {
        return Err(CliError::Runtime(format!(
            "{} not found; run `eval --variant original` first",
            original_path.display()
        )));
    }
    let original = MetricsReport::parse_tsv(&std::fs::read_to_string(&original_path)?)?;
    let mut rows = Vec::new();
    for variant in
        [EvalVariant::Original, EvalVariant::Condensed, EvalVariant::Random, EvalVariant::Majority]
    {
        let path = config.output_dir.join(format!("eval_{}.tsv", variant.name()));
        if !path.exists() {
            continue;
        }
        let mut report = MetricsReport::parse_tsv(&std::fs::read_to_string(&path)?)?;
        report.quality_pct = Some(eval::quality(&report, &original)?);
        rows.push((variant.name().to_string(), report));
    }

    let mut table = String::new();
    let metric_names: Vec<String> = {
        let r = &rows[0].1;
        r.ndcg
            .keys()
            .map(|k| format!("ndcg@{k}"))
            .chain(r.recall.keys().map(|k| format!("recall@{k}")))
            .collect()
    };
    table.push_str(&format!("variant\t{}\tquality_pct\n", metric_names.join("\t")));
    for (name, report) in &rows {
        let values: Vec<String> = report
            .ndcg
            .values()
            .chain(report.recall.values())
            .map(|v| v.to_string())
            .collect();
        table.push_str(&format!(
            "{name}\t{}\t{:.2}\n",
            values.join("\t"),
            report.quality_pct.unwrap()
        ));
    }
    let table_path = config.output_dir.join("compare.tsv");
    std::fs::write(&table_path, &table)?;
    if json {
        let map: std::collections::BTreeMap<&str, &MetricsReport> =
            rows.iter().map(|(n, r)| (n.as_str(), r)).collect();
        write_json(&config.output_dir.join("compare.json"), &map)?;
    }
    let mut manifest = Manifest::new("compare", &config.to_text());
    manifest.add_output(&table_path)?;
    manifest.write(&config.output_dir)?;
    Ok(rows)
}

fn sweep_context<'a>(
    config: &'a PipelineConfig,
    train: &'a Dataset,
    test: &'a Dataset,
    prompt: &'a PromptTemplate,
    backend: &'a crate::llm::LlmBackend,
) -> eval::SweepContext<'a> {
    eval::SweepContext {
        train,
        test,
        train_config: &config.train,
        condense_config: &config.condense,
        prompt,
        backend,
        k_list: &config.k_list,
    }
}

/// Runs the pipeline once per alpha and writes the quality table.
pub fn cmd_sweep_alpha(
    config: &PipelineConfig,
    alphas: &[f64],
    json: bool,
) -> Result<Vec<SweepRow>, CliError> {
    if alphas.is_empty() {
        return Err(CliError::Validation("no alpha values given".into()));
    }
    ensure_out_dir(config)?;
    let (_, train, _, test) = load_and_split(config)?;
    let prompt = condense_prompt(config)?;
    let backend = config.backend()?;
    let ctx = sweep_context(config, &train, &test, &prompt, &backend);
    let rows = eval::sweep_alpha(&ctx, alphas)?;
    let path = config.output_dir.join("sweep_alpha.tsv");
    std::fs::write(&path, eval::sweep_table("alpha", &rows))?;
    if json {
        write_json(&config.output_dir.join("sweep_alpha.json"), &rows)?;
    }
    let mut manifest = Manifest::new("sweep-alpha", &config.to_text());
    manifest.add_input(&config.items_path)?;
    manifest.add_input(&config.behaviors_path)?;
    manifest.add_output(&path)?;
    manifest.write(&config.output_dir)?;
    Ok(rows)
}

/// Runs the pipeline once per cluster count and writes the quality table.
pub fn cmd_sweep_k(
    config: &PipelineConfig,
    ks: &[usize],
    json: bool,
) -> Result<Vec<SweepRow>, CliError> {
    if ks.is_empty() {
        return Err(CliError::Validation("no K values given".into()));
    }
    ensure_out_dir(config)?;
    let (_, train, _, test) = load_and_split(config)?;
    let prompt = condense_prompt(config)?;
    let backend = config.backend()?;
    let ctx = sweep_context(config, &train, &test, &prompt, &backend);
    let rows = eval::sweep_k(&ctx, ks)?;
    let path = config.output_dir.join("sweep_k.tsv");
    std::fs::write(&path, eval::sweep_table("k", &rows))?;
    if json {
        write_json(&config.output_dir.join("sweep_k.json"), &rows)?;
    }
    let mut manifest = Manifest::new("sweep-k", &config.to_text());
    manifest.add_input(&config.items_path)?;
    manifest.add_input(&config.behaviors_path)?;
    manifest.add_output(&path)?;
    manifest.write(&config.output_dir)?;
    Ok(rows)
}
