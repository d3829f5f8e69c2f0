//! The dataset condensation pipeline.
//!
//! Content-level condensation rewrites every referenced item into a short
//! title via the LLM gateway. User-level condensation clusters trained user
//! embeddings, scores cluster members by their distance to the embedding
//! and interest centroids, and merges the histories and impressions of the
//! closest members into one synthetic user per cluster.

mod kmeans;

pub use kmeans::{kmeans, KmeansConfig, KmeansOutcome};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::datamodel::{ClickHistory, DataError, Dataset, Impression, Item};
use crate::llm::{self, LlmBackend, LlmError, PromptTemplate};
use crate::recmodel::{self, RecModelParams, TrainError};
use crate::textenc::{self, EmbeddingVector, TextEncoder, VectorError};

#[derive(Debug, Error)]
pub enum CondenseError {
    #[error("invalid condensation config: {0}")]
    InvalidConfig(String),
    #[error("llm error: {0}")]
    Llm(#[from] LlmError),
    #[error("model error: {0}")]
    Model(#[from] TrainError),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("vector error: {0}")]
    Vector(#[from] VectorError),
    #[error("no embedding available for user {0:?}")]
    MissingEmbedding(String),
    #[error("cluster model has no interest centroids attached")]
    MissingInterestCentroids,
    #[error("{0}")]
    EmptyInput(String),
}

/// Settings of the user-level condensation.
#[derive(Debug, Clone, PartialEq)]
pub struct CondenseConfig {
    /// Number of synthetic users (clusters).
    pub k: usize,
    /// How many closest members of each cluster merge into its synthetic user.
    pub m: usize,
    /// Weight of the interest distance in the selection score.
    pub alpha: f64,
    pub kmeans: KmeansConfig,
    pub seed: u64,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        Self { k: 8, m: 5, alpha: 0.2, kmeans: KmeansConfig::default(), seed: 0 }
    }
}

/// Result of clustering user embeddings.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<EmbeddingVector>,
    pub assignments: BTreeMap<String, usize>,
    pub interest_centroids: Option<Vec<EmbeddingVector>>,
    pub inertia: f64,
    pub inertia_trace: Vec<f64>,
}

/// Per-user selection score: distance to the own cluster centroid plus
/// alpha times the distance of the pooled interests to the interest
/// centroid. Smaller means more central.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScore {
    pub user_id: String,
    pub d_emb: f64,
    pub d_int: f64,
    pub d_u: f64,
}

/// Maps each synthetic user to the real members merged into it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceEntry {
    pub synthetic_id: String,
    pub members: Vec<String>,
    pub d_values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProvenanceReport {
    pub entries: Vec<ProvenanceEntry>,
    /// Cluster index of every user that entered clustering.
    pub assignments: BTreeMap<String, usize>,
    /// Items whose condensation failed and kept their original title.
    pub content_failures: Vec<String>,
}

impl ProvenanceReport {
    /// Line-delimited text form: `syn-<k><TAB>members<TAB>d_u values`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let ds = e.d_values.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
            let _ = writeln!(out, "{}\t{}\t{}", e.synthetic_id, e.members.join(","), ds);
        }
        out
    }
}

/// Replaces every item with one whose title is the condensed content and
/// whose abstract/category are empty. Items that fail condensation keep
/// their original title and are listed in the returned report.
pub fn condense_contents(
    items: &BTreeMap<String, Item>,
    prompt: &PromptTemplate,
    backend: &LlmBackend,
) -> Result<(BTreeMap<String, Item>, Vec<String>), CondenseError> {
    if items.is_empty() {
        return Err(CondenseError::EmptyInput("no items to condense".into()));
    }
    let originals: Vec<&Item> = items.values().collect();
    let condensed = llm::bounded_parallel_map(&originals, backend.concurrency(), |_, item| {
        llm::condense_item(backend, prompt, item)
    });
    let mut out = BTreeMap::new();
    let mut failures = Vec::new();
    for (item, result) in originals.iter().zip(condensed) {
        let title = match result {
            Ok(title) => title,
            Err(err) => {
                log::warn!("condensation of item {:?} failed: {err}", item.id);
                failures.push(item.id.clone());
                item.title.clone()
            }
        };
        out.insert(item.id.clone(), Item::new(item.id.clone(), title, "", ""));
    }
    Ok((out, failures))
}

/// K-means over user embeddings; one cluster per future synthetic user.
pub fn cluster_users(
    user_embeddings: &BTreeMap<String, EmbeddingVector>,
    k: usize,
    config: &KmeansConfig,
    seed: u64,
) -> Result<ClusterModel, CondenseError> {
    let ids: Vec<&String> = user_embeddings.keys().collect();
    let points: Vec<Vec<f64>> =
        user_embeddings.values().map(|v| v.as_slice().to_vec()).collect();
    let outcome = kmeans(&points, k, config, seed)?;
    let assignments =
        ids.iter().zip(&outcome.assignments).map(|(id, &a)| ((*id).clone(), a)).collect();
    Ok(ClusterModel {
        k,
        centroids: outcome.centroids.into_iter().map(EmbeddingVector::new).collect(),
        assignments,
        interest_centroids: None,
        inertia: outcome.inertia,
        inertia_trace: outcome.inertia_trace,
    })
}

/// Mean interest embedding of each cluster's members (no re-clustering).
pub fn interest_centroids(
    model: &ClusterModel,
    interest_embeddings: &BTreeMap<String, EmbeddingVector>,
) -> Result<Vec<EmbeddingVector>, CondenseError> {
    let mut groups: Vec<Vec<&EmbeddingVector>> = vec![Vec::new(); model.k];
    for (uid, &cluster) in &model.assignments {
        let e = interest_embeddings
            .get(uid)
            .ok_or_else(|| CondenseError::MissingEmbedding(uid.clone()))?;
        groups[cluster].push(e);
    }
    groups
        .into_iter()
        .map(|members| {
            let dim = members.first().map_or(0, |e| e.dim());
            let mut mean = vec![0.0; dim];
            let n = members.len() as f64;
            for e in &members {
                for (m, x) in mean.iter_mut().zip(e.as_slice()) {
                    *m += x / n;
                }
            }
            Ok(EmbeddingVector::new(mean))
        })
        .collect()
}

/// Selection score of every clustered user: `d_u = d_emb + alpha * d_int`.
pub fn selection_scores(
    model: &ClusterModel,
    user_embeddings: &BTreeMap<String, EmbeddingVector>,
    interest_embeddings: &BTreeMap<String, EmbeddingVector>,
    alpha: f64,
) -> Result<BTreeMap<String, SelectionScore>, CondenseError> {
    if alpha < 0.0 {
        return Err(CondenseError::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
    }
    let interest_cs =
        model.interest_centroids.as_ref().ok_or(CondenseError::MissingInterestCentroids)?;
    let mut out = BTreeMap::new();
    for (uid, &cluster) in &model.assignments {
        let z = user_embeddings
            .get(uid)
            .ok_or_else(|| CondenseError::MissingEmbedding(uid.clone()))?;
        let e = interest_embeddings
            .get(uid)
            .ok_or_else(|| CondenseError::MissingEmbedding(uid.clone()))?;
        let d_emb = textenc::distance(z, &model.centroids[cluster])?;
        let d_int = textenc::distance(e, &interest_cs[cluster])?;
        let d_u = d_emb + alpha * d_int;
        out.insert(uid.clone(), SelectionScore { user_id: uid.clone(), d_emb, d_int, d_u });
    }
    Ok(out)
}

/// Members of each cluster ordered by ascending selection score, ties by
/// user id.
fn ordered_members(
    model: &ClusterModel,
    scores: &BTreeMap<String, SelectionScore>,
) -> Vec<Vec<(String, f64)>> {
    let mut clusters: Vec<Vec<(String, f64)>> = vec![Vec::new(); model.k];
    for (uid, &cluster) in &model.assignments {
        clusters[cluster].push((uid.clone(), scores[uid].d_u));
    }
    for members in &mut clusters {
        members.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    }
    clusters
}

/// One synthetic user per cluster, its history the first-seen-order union
/// of the histories of the `m` most central members.
pub fn synthesize_users(
    model: &ClusterModel,
    scores: &BTreeMap<String, SelectionScore>,
    histories: &BTreeMap<String, ClickHistory>,
    m: usize,
) -> Result<BTreeMap<String, ClickHistory>, CondenseError> {
    if m == 0 {
        return Err(CondenseError::InvalidConfig("merge count m must be at least 1".into()));
    }
    let mut out = BTreeMap::new();
    for (cluster, members) in ordered_members(model, scores).into_iter().enumerate() {
        let synthetic_id = format!("syn-{cluster}");
        let mut merged: Vec<String> = Vec::new();
        for (uid, _) in members.iter().take(m) {
            merged.extend(histories[uid].item_ids().iter().cloned());
        }
        out.insert(synthetic_id.clone(), ClickHistory::new(synthetic_id, merged));
    }
    Ok(out)
}

/// Output of the full pipeline.
pub struct CondensedDataset {
    pub dataset: Dataset,
    pub provenance: ProvenanceReport,
}

/// Runs the full condensation pipeline on a training split.
///
/// `rec_params` must come from a model trained on `train`: the user encoder
/// supplies the embeddings that clustering groups. Steps: extract interests
/// per user, embed users and interests, cluster into `config.k` groups,
/// score members, merge the top-`config.m` members per cluster into a
/// synthetic user (histories and impressions), then condense the contents
/// of every item the synthetic data still references.
pub fn condense_dataset(
    train: &Dataset,
    config: &CondenseConfig,
    prompt: &PromptTemplate,
    backend: &LlmBackend,
    rec_params: &RecModelParams,
) -> Result<CondensedDataset, CondenseError> {
    if config.m == 0 {
        return Err(CondenseError::InvalidConfig("merge count m must be at least 1".into()));
    }
    let interest_prompt = PromptTemplate::default_interests();
    let encoder = TextEncoder::default();

    // Users with empty histories carry no preference signal; they are left
    // out of clustering.
    let active: Vec<(&String, &ClickHistory)> =
        train.users().iter().filter(|(_, h)| !h.is_empty()).collect();
    if active.is_empty() {
        return Err(CondenseError::EmptyInput("no users with nonempty histories".into()));
    }

    // Interest extraction, then user/interest embeddings.
    let interest_lists = llm::bounded_parallel_map(&active, backend.concurrency(), |_, (_, h)| {
        llm::extract_interests(backend, &interest_prompt, h, train.items())
    });
    let mut user_embeddings = BTreeMap::new();
    let mut interest_embeddings = BTreeMap::new();
    for ((uid, history), interests) in active.iter().zip(interest_lists) {
        let interests = interests?;
        let vectors: Vec<EmbeddingVector> =
            interests.iter().map(|p| encoder.encode(p)).collect();
        interest_embeddings.insert((*uid).clone(), textenc::pool(&vectors)?);
        let z = recmodel::user_embedding(rec_params, history, train.items())?;
        user_embeddings.insert((*uid).clone(), z);
    }

    // Cluster, attach interest centroids, score, synthesize.
    let mut model = cluster_users(&user_embeddings, config.k, &config.kmeans, config.seed)?;
    model.interest_centroids = Some(interest_centroids(&model, &interest_embeddings)?);
    let scores = selection_scores(&model, &user_embeddings, &interest_embeddings, config.alpha)?;
    let clusters = ordered_members(&model, &scores);

    let mut synthetic_users = BTreeMap::new();
    let mut synthetic_impressions: Vec<Impression> = Vec::new();
    let mut entries = Vec::new();
    let grouped = train.grouped_impressions();
    for (cluster, members) in clusters.iter().enumerate() {
        let synthetic_id = format!("syn-{cluster}");
        let selected: Vec<&(String, f64)> = members.iter().take(config.m).collect();
        let mut merged_history: Vec<String> = Vec::new();
        let mut seen_candidates: BTreeSet<String> = BTreeSet::new();
        for (uid, _) in &selected {
            merged_history.extend(histories_of(train, uid));
            for imp in grouped.get(uid.as_str()).into_iter().flatten() {
                // Deduplicate candidates per synthetic user, first label kept.
                if seen_candidates.insert(imp.candidate_item_id.clone()) {
                    synthetic_impressions.push(Impression::new(
                        synthetic_id.clone(),
                        imp.candidate_item_id.clone(),
                        imp.label,
                    ));
                }
            }
        }
        synthetic_users
            .insert(synthetic_id.clone(), ClickHistory::new(synthetic_id.clone(), merged_history));
        entries.push(ProvenanceEntry {
            synthetic_id,
            members: selected.iter().map(|(uid, _)| uid.clone()).collect(),
            d_values: selected.iter().map(|(_, d)| *d).collect(),
        });
    }

    // Only items still referenced by a synthetic history or impression stay.
    let mut referenced: BTreeSet<&str> = BTreeSet::new();
    for history in synthetic_users.values() {
        referenced.extend(history.item_ids().iter().map(String::as_str));
    }
    referenced.extend(synthetic_impressions.iter().map(|i| i.candidate_item_id.as_str()));
    let kept: BTreeMap<String, Item> = train
        .items()
        .iter()
        .filter(|(id, _)| referenced.contains(id.as_str()))
        .map(|(id, item)| (id.clone(), item.clone()))
        .collect();

    let (condensed_items, content_failures) = condense_contents(&kept, prompt, backend)?;
    let dataset = Dataset::new(condensed_items, synthetic_users, synthetic_impressions)?;
    Ok(CondensedDataset {
        dataset,
        provenance: ProvenanceReport {
            entries,
            assignments: model.assignments.clone(),
            content_failures,
        },
    })
}

fn histories_of<'a>(train: &'a Dataset, uid: &str) -> impl Iterator<Item = String> + 'a {
    train.users()[uid].item_ids().iter().cloned()
}
