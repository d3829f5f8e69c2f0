//! Ranking metrics, the Quality aggregate, baseline condensers, and
//! hyperparameter sweeps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::condenser::{self, CondenseConfig, CondenseError};
use crate::datamodel::{ClickHistory, DataError, Dataset, Item};
use crate::llm::{LlmBackend, PromptTemplate};
use crate::recmodel::{self, RecModelParams, TrainConfig, TrainError};
use crate::textenc::Tokenizer;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("no evaluation group has a positive impression")]
    NoEligibleGroups,
    #[error("reports cover different metrics: {0}")]
    MetricMismatch(String),
    #[error("original metric {0} is zero; quality undefined")]
    ZeroOriginalMetric(String),
    #[error("model error: {0}")]
    Model(#[from] TrainError),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("condensation error: {0}")]
    Condense(#[from] CondenseError),
}

/// NDCG@k over labels already ranked by model score: binary gains with a
/// `1/log2(rank+1)` discount, normalized by the ideal ranking. Zero when the
/// sequence has no positives.
pub fn ndcg_at_k(ranked_labels: &[u8], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let dcg: f64 = ranked_labels
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &l)| f64::from(l) / ((i + 2) as f64).log2())
        .sum();
    let mut ideal: Vec<u8> = ranked_labels.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &l)| f64::from(l) / ((i + 2) as f64).log2())
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Fraction of all positives that appear in the top k.
pub fn recall_at_k(ranked_labels: &[u8], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let total: u32 = ranked_labels.iter().map(|&l| u32::from(l)).sum();
    if total == 0 {
        return 0.0;
    }
    let hit: u32 = ranked_labels.iter().take(k).map(|&l| u32::from(l)).sum();
    f64::from(hit) / f64::from(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// NDCG@k per configured k.
    pub ndcg: BTreeMap<usize, f64>,
    /// Recall@k per configured k.
    pub recall: BTreeMap<usize, f64>,
    /// Groups that entered the averages.
    pub n_groups: usize,
    /// Groups skipped for having no positive (metrics undefined there).
    pub skipped_groups: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_pct: Option<f64>,
}

impl MetricsReport {
    pub fn from_values(ndcg: BTreeMap<usize, f64>, recall: BTreeMap<usize, f64>) -> Self {
        Self { ndcg, recall, n_groups: 0, skipped_groups: 0, quality_pct: None }
    }

    fn metric_columns(&self) -> Vec<(String, f64)> {
        let mut cols = Vec::new();
        for (k, v) in &self.ndcg {
            cols.push((format!("ndcg@{k}"), *v));
        }
        for (k, v) in &self.recall {
            cols.push((format!("recall@{k}"), *v));
        }
        cols
    }

    /// Tab-separated text with a header row.
    pub fn to_tsv(&self) -> String {
        let cols = self.metric_columns();
        let mut header: Vec<String> = cols.iter().map(|(n, _)| n.clone()).collect();
        let mut values: Vec<String> = cols.iter().map(|(_, v)| v.to_string()).collect();
        header.push("n_groups".into());
        values.push(self.n_groups.to_string());
        header.push("skipped_groups".into());
        values.push(self.skipped_groups.to_string());
        if let Some(q) = self.quality_pct {
            header.push("quality_pct".into());
            values.push(q.to_string());
        }
        format!("{}\n{}\n", header.join("\t"), values.join("\t"))
    }

    pub fn parse_tsv(text: &str) -> Result<Self, EvalError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| EvalError::Invalid("empty report".into()))?;
        let values = lines.next().ok_or_else(|| EvalError::Invalid("missing value row".into()))?;
        let mut report = Self::from_values(BTreeMap::new(), BTreeMap::new());
        for (name, value) in header.split('\t').zip(values.split('\t')) {
            let parse = |v: &str| {
                v.parse::<f64>().map_err(|e| EvalError::Invalid(format!("bad value {v:?}: {e}")))
            };
            if let Some(k) = name.strip_prefix("ndcg@") {
                let k = k.parse::<usize>().map_err(|e| EvalError::Invalid(e.to_string()))?;
                report.ndcg.insert(k, parse(value)?);
            } else if let Some(k) = name.strip_prefix("recall@") {
                let k = k.parse::<usize>().map_err(|e| EvalError::Invalid(e.to_string()))?;
                report.recall.insert(k, parse(value)?);
            } else if name == "n_groups" {
                report.n_groups = parse(value)? as usize;
            } else if name == "skipped_groups" {
                report.skipped_groups = parse(value)? as usize;
            } else if name == "quality_pct" {
                report.quality_pct = Some(parse(value)?);
            }
        }
        Ok(report)
    }
}

/// Scores every impression group of `test` with the trained model and
/// averages per-group NDCG@k / Recall@k. Candidates tie-break by id so the
/// evaluation is deterministic across platforms.
pub fn evaluate(
    params: &RecModelParams,
    test: &Dataset,
    k_list: &[usize],
) -> Result<MetricsReport, EvalError> {
    if k_list.is_empty() {
        return Err(EvalError::Invalid("k list must not be empty".into()));
    }
    let mut ndcg_sums: BTreeMap<usize, f64> = k_list.iter().map(|&k| (k, 0.0)).collect();
    let mut recall_sums: BTreeMap<usize, f64> = k_list.iter().map(|&k| (k, 0.0)).collect();
    let mut n_groups = 0usize;
    let mut skipped = 0usize;

    for (uid, imps) in test.grouped_impressions() {
        let history = &test.users()[uid];
        if imps.iter().all(|i| !i.is_positive()) || history.is_empty() {
            skipped += 1;
            continue;
        }
        let candidates: Vec<&Item> =
            imps.iter().map(|i| &test.items()[&i.candidate_item_id]).collect();
        let scores = recmodel::score_candidates(params, history, &candidates, test.items())?;
        let mut order: Vec<usize> = (0..imps.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap()
                .then_with(|| imps[a].candidate_item_id.cmp(&imps[b].candidate_item_id))
        });
        let ranked: Vec<u8> = order.iter().map(|&i| imps[i].label).collect();
        for &k in k_list {
            *ndcg_sums.get_mut(&k).unwrap() += ndcg_at_k(&ranked, k);
            *recall_sums.get_mut(&k).unwrap() += recall_at_k(&ranked, k);
        }
        n_groups += 1;
    }
    if n_groups == 0 {
        return Err(EvalError::NoEligibleGroups);
    }
    let n = n_groups as f64;
    Ok(MetricsReport {
        ndcg: ndcg_sums.into_iter().map(|(k, v)| (k, v / n)).collect(),
        recall: recall_sums.into_iter().map(|(k, v)| (k, v / n)).collect(),
        n_groups,
        skipped_groups: skipped,
        quality_pct: None,
    })
}

/// Quality percentage: the mean of the per-metric ratios condensed/original,
/// times 100. Both reports must cover the same metrics and every original
/// metric must be nonzero.
pub fn quality(condensed: &MetricsReport, original: &MetricsReport) -> Result<f64, EvalError> {
    if condensed.ndcg.keys().ne(original.ndcg.keys())
        || condensed.recall.keys().ne(original.recall.keys())
    {
        return Err(EvalError::MetricMismatch(format!(
            "condensed covers ndcg@{:?}/recall@{:?}, original ndcg@{:?}/recall@{:?}",
            condensed.ndcg.keys().collect::<Vec<_>>(),
            condensed.recall.keys().collect::<Vec<_>>(),
            original.ndcg.keys().collect::<Vec<_>>(),
            original.recall.keys().collect::<Vec<_>>(),
        )));
    }
    let mut ratios = Vec::new();
    for (name, c, o) in condensed
        .ndcg
        .iter()
        .map(|(k, v)| (format!("ndcg@{k}"), *v, original.ndcg[k]))
        .chain(
            condensed
                .recall
                .iter()
                .map(|(k, v)| (format!("recall@{k}"), *v, original.recall[k])),
        )
    {
        if o == 0.0 {
            return Err(EvalError::ZeroOriginalMetric(name));
        }
        ratios.push(c / o);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64 * 100.0)
}

fn check_ratio(name: &str, value: f64) -> Result<(), EvalError> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(EvalError::Invalid(format!("{name} must be in (0, 1], got {value}")));
    }
    Ok(())
}

/// Order-preserving uniform sample of the content tokens becomes the item's
/// new title. Untokenizable items keep their original title.
fn sample_tokens(item: &Item, token_ratio: f64, rng: &mut ChaCha8Rng) -> Item {
    let tokens = Tokenizer::surface().tokens(&item.content_text());
    if tokens.is_empty() {
        return Item::new(item.id.clone(), item.title.clone(), "", "");
    }
    let keep = ((token_ratio * tokens.len() as f64).ceil() as usize).clamp(1, tokens.len());
    let mut indices: Vec<usize> = (0..tokens.len()).collect();
    indices.shuffle(rng);
    indices.truncate(keep);
    indices.sort_unstable();
    let title = indices.into_iter().map(|i| tokens[i].as_str()).collect::<Vec<_>>().join(" ");
    Item::new(item.id.clone(), title, "", "")
}

fn rebuild_with_users(train: &Dataset, kept: Vec<String>, token_ratio: f64, seed: u64) -> Result<Dataset, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let items: BTreeMap<String, Item> = train
        .items()
        .values()
        .map(|item| {
            let sampled = sample_tokens(item, token_ratio, &mut rng);
            (sampled.id.clone(), sampled)
        })
        .collect();
    let users: BTreeMap<String, ClickHistory> =
        kept.iter().map(|uid| (uid.clone(), train.users()[uid].clone())).collect();
    let impressions = train
        .impressions()
        .iter()
        .filter(|i| users.contains_key(&i.user_id))
        .cloned()
        .collect();
    Ok(Dataset::new(items, users, impressions)?)
}

/// Random baseline: a uniform user sample plus per-item uniform token
/// sampling.
pub fn baseline_random(
    train: &Dataset,
    user_ratio: f64,
    token_ratio: f64,
    seed: u64,
) -> Result<Dataset, EvalError> {
    check_ratio("user_ratio", user_ratio)?;
    check_ratio("token_ratio", token_ratio)?;
    if train.n_users() == 0 {
        return Err(EvalError::Invalid("cannot sample users from an empty dataset".into()));
    }
    let keep = ((user_ratio * train.n_users() as f64).ceil() as usize).clamp(1, train.n_users());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<String> = train.users().keys().cloned().collect();
    ids.shuffle(&mut rng);
    ids.truncate(keep);
    ids.sort_unstable();
    rebuild_with_users(train, ids, token_ratio, seed)
}

/// Majority baseline: keeps the users with the longest histories.
pub fn baseline_majority(
    train: &Dataset,
    user_ratio: f64,
    token_ratio: f64,
    seed: u64,
) -> Result<Dataset, EvalError> {
    check_ratio("user_ratio", user_ratio)?;
    check_ratio("token_ratio", token_ratio)?;
    if train.n_users() == 0 {
        return Err(EvalError::Invalid("cannot sample users from an empty dataset".into()));
    }
    let keep = ((user_ratio * train.n_users() as f64).ceil() as usize).clamp(1, train.n_users());
    let mut ids: Vec<&String> = train.users().keys().collect();
    ids.sort_by(|a, b| {
        train.users()[*b]
            .len()
            .cmp(&train.users()[*a].len())
            .then_with(|| a.cmp(b))
    });
    let kept: Vec<String> = ids.into_iter().take(keep).cloned().collect();
    rebuild_with_users(train, kept, token_ratio, seed)
}

/// Everything a sweep needs: the split, the shared model/condensation
/// settings, and the condensation prompt/backend.
pub struct SweepContext<'a> {
    pub train: &'a Dataset,
    pub test: &'a Dataset,
    pub train_config: &'a TrainConfig,
    pub condense_config: &'a CondenseConfig,
    pub prompt: &'a PromptTemplate,
    pub backend: &'a LlmBackend,
    pub k_list: &'a [usize],
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// The swept value (alpha or K).
    pub value: f64,
    pub condensed_users: usize,
    pub metrics: MetricsReport,
    pub quality_pct: f64,
}

/// Renders sweep rows as a tab-separated table. `value_name` labels the
/// swept column.
pub fn sweep_table(value_name: &str, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    if rows.is_empty() {
        return out;
    }
    let metric_names: Vec<String> =
        rows[0].metrics.metric_columns().iter().map(|(n, _)| n.clone()).collect();
    let _ = writeln!(out, "{value_name}\tcondensed_users\t{}\tquality_pct", metric_names.join("\t"));
    for row in rows {
        let values: Vec<String> =
            row.metrics.metric_columns().iter().map(|(_, v)| v.to_string()).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            row.value,
            row.condensed_users,
            values.join("\t"),
            row.quality_pct
        );
    }
    out
}

fn run_pipeline_once(
    ctx: &SweepContext,
    config: &CondenseConfig,
    full_params: &RecModelParams,
    original: &MetricsReport,
) -> Result<SweepRow, EvalError> {
    let condensed =
        condenser::condense_dataset(ctx.train, config, ctx.prompt, ctx.backend, full_params)?;
    let model = recmodel::train(&condensed.dataset, ctx.train_config)?;
    let mut metrics = evaluate(&model.params, ctx.test, ctx.k_list)?;
    let quality_pct = quality(&metrics, original)?;
    metrics.quality_pct = Some(quality_pct);
    Ok(SweepRow {
        value: 0.0,
        condensed_users: condensed.dataset.n_users(),
        metrics,
        quality_pct,
    })
}

/// Runs the pipeline once per alpha, sharing the trained user encoder and
/// the training seed so rows differ only in the condensation hyperparameter.
pub fn sweep_alpha(ctx: &SweepContext, alphas: &[f64]) -> Result<Vec<SweepRow>, EvalError> {
    let full = recmodel::train(ctx.train, ctx.train_config)?;
    let original = evaluate(&full.params, ctx.test, ctx.k_list)?;
    alphas
        .iter()
        .map(|&alpha| {
            let config = CondenseConfig { alpha, ..ctx.condense_config.clone() };
            let mut row = run_pipeline_once(ctx, &config, &full.params, &original)?;
            row.value = alpha;
            Ok(row)
        })
        .collect()
}

/// Runs the pipeline once per cluster count K.
pub fn sweep_k(ctx: &SweepContext, ks: &[usize]) -> Result<Vec<SweepRow>, EvalError> {
    let full = recmodel::train(ctx.train, ctx.train_config)?;
    let original = evaluate(&full.params, ctx.test, ctx.k_list)?;
    ks.iter()
        .map(|&k| {
            let config = CondenseConfig { k, ..ctx.condense_config.clone() };
            let mut row = run_pipeline_once(ctx, &config, &full.params, &original)?;
            row.value = k as f64;
            Ok(row)
        })
        .collect()
}
