//! A compact trainable content-based recommender.
//!
//! The architecture is a two-level additive-attention model: a content
//! encoder (attention-weighted sum of hashed token embeddings over the
//! concatenated title/abstract/category sequence) and a user encoder
//! (attention over projected history item vectors). Scoring is the dot
//! product of the user embedding and the projected candidate embedding.
//! Training minimizes sampled-softmax cross-entropy over groups of one
//! positive and `negative_ratio` sampled negatives, with Adam updates.
//! Everything is f64 and single-threaded: a fixed seed reproduces the
//! trained parameters bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::datamodel::{ClickHistory, Dataset, Item};
use crate::textenc::{hash64, EmbeddingVector, Tokenizer, HASH_SEED};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset has no trainable positive impressions")]
    NoPositives,
    #[error("loss became non-finite in epoch {epoch}; aborting")]
    NaNLoss { epoch: usize },
    #[error("history is empty")]
    EmptyHistory,
    #[error("unknown item {0:?}")]
    MissingItem(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad params file: {0}")]
    BadParamsFile(String),
}

/// Trainable parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RecModelParams {
    pub vocab_buckets: usize,
    /// Content (item) embedding width.
    pub d_c: usize,
    /// User embedding width.
    pub d_u: usize,
    /// `vocab_buckets x d_c`, row-major by bucket.
    pub token_embedding: Vec<f64>,
    /// `d_c` additive-attention vector over tokens.
    pub content_attention: Vec<f64>,
    /// `d_u` additive-attention vector over history items.
    pub user_attention: Vec<f64>,
    /// `d_c x d_u` content-to-user projection, row-major.
    pub projection: Vec<f64>,
}

impl RecModelParams {
    pub fn zeros(vocab_buckets: usize, d_c: usize, d_u: usize) -> Self {
        Self {
            vocab_buckets,
            d_c,
            d_u,
            token_embedding: vec![0.0; vocab_buckets * d_c],
            content_attention: vec![0.0; d_c],
            user_attention: vec![0.0; d_u],
            projection: vec![0.0; d_c * d_u],
        }
    }

    pub fn random(vocab_buckets: usize, d_c: usize, d_u: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(vocab_buckets, d_c, d_u);
        for block in [
            &mut p.token_embedding,
            &mut p.content_attention,
            &mut p.user_attention,
            &mut p.projection,
        ] {
            for v in block.iter_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        p
    }

    pub fn n_params(&self) -> usize {
        self.token_embedding.len()
            + self.content_attention.len()
            + self.user_attention.len()
            + self.projection.len()
    }

    pub fn all_finite(&self) -> bool {
        self.token_embedding.iter().all(|v| v.is_finite())
            && self.content_attention.iter().all(|v| v.is_finite())
            && self.user_attention.iter().all(|v| v.is_finite())
            && self.projection.iter().all(|v| v.is_finite())
    }

    /// Hashed token buckets of a text, in token order.
    pub fn buckets_of(&self, text: &str) -> Vec<usize> {
        token_buckets(text, self.vocab_buckets)
    }

    /// Mutable view over all blocks in a fixed order; used by the optimizer
    /// and by finite-difference checks.
    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.token_embedding,
            &mut self.content_attention,
            &mut self.user_attention,
            &mut self.projection,
        ]
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(b"CRPM")?;
        for dim in [1u32, self.vocab_buckets as u32, self.d_c as u32, self.d_u as u32] {
            w.write_all(&dim.to_le_bytes())?;
        }
        for block in [
            &self.token_embedding,
            &self.content_attention,
            &self.user_attention,
            &self.projection,
        ] {
            for v in block {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CRPM" {
            return Err(TrainError::BadParamsFile("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32, TrainError> {
            r.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(TrainError::BadParamsFile(format!("unsupported version {version}")));
        }
        let vocab_buckets = read_u32(&mut r)? as usize;
        let d_c = read_u32(&mut r)? as usize;
        let d_u = read_u32(&mut r)? as usize;
        let mut p = Self::zeros(vocab_buckets, d_c, d_u);
        let mut f64buf = [0u8; 8];
        for block in p.blocks_mut() {
            for v in block.iter_mut() {
                r.read_exact(&mut f64buf)?;
                *v = f64::from_le_bytes(f64buf);
            }
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(TrainError::BadParamsFile("trailing bytes".into()));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub negative_ratio: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub vocab_buckets: usize,
    pub content_dim: usize,
    pub user_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            negative_ratio: 4,
            epochs: 5,
            batch_size: 32,
            seed: 0,
            vocab_buckets: 8192,
            content_dim: 256,
            user_dim: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig("learning rate must be positive".into()));
        }
        if self.negative_ratio < 1 {
            return Err(TrainError::InvalidConfig("negative ratio must be at least 1".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(TrainError::InvalidConfig("epochs and batch size must be positive".into()));
        }
        if self.vocab_buckets < 1 || self.content_dim < 1 || self.user_dim < 1 {
            return Err(TrainError::InvalidConfig("model dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Hashes the tokens of `text` into vocabulary buckets, preserving order.
pub fn token_buckets(text: &str, vocab_buckets: usize) -> Vec<usize> {
    Tokenizer::default()
        .tokens(text)
        .iter()
        .map(|t| (hash64(HASH_SEED, t.as_bytes()) % vocab_buckets as u64) as usize)
        .collect()
}

fn softmax_in_place(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Intermediate state of one content encode, kept for backprop.
struct ContentForward {
    buckets: Vec<usize>,
    attn: Vec<f64>,
    vec: Vec<f64>,
}

fn content_forward(params: &RecModelParams, buckets: &[usize]) -> ContentForward {
    let d_c = params.d_c;
    let mut attn: Vec<f64> = buckets
        .iter()
        .map(|&b| {
            let row = &params.token_embedding[b * d_c..(b + 1) * d_c];
            params.content_attention.iter().zip(row).map(|(a, e)| a * e).sum()
        })
        .collect();
    softmax_in_place(&mut attn);
    let mut vec = vec![0.0; d_c];
    for (&b, &w) in buckets.iter().zip(&attn) {
        let row = &params.token_embedding[b * d_c..(b + 1) * d_c];
        for (v, e) in vec.iter_mut().zip(row) {
            *v += w * e;
        }
    }
    ContentForward { buckets: buckets.to_vec(), attn, vec }
}

/// `u = P^T v` (content space to user space).
fn project(params: &RecModelParams, v: &[f64]) -> Vec<f64> {
    let (d_c, d_u) = (params.d_c, params.d_u);
    let mut u = vec![0.0; d_u];
    for a in 0..d_c {
        let va = v[a];
        if va == 0.0 {
            continue;
        }
        let row = &params.projection[a * d_u..(a + 1) * d_u];
        for (ub, p) in u.iter_mut().zip(row) {
            *ub += p * va;
        }
    }
    u
}

struct UserForward {
    contents: Vec<ContentForward>,
    projected: Vec<Vec<f64>>,
    beta: Vec<f64>,
    z: Vec<f64>,
}

fn user_forward(params: &RecModelParams, history_buckets: &[Vec<usize>]) -> UserForward {
    let contents: Vec<ContentForward> =
        history_buckets.iter().map(|b| content_forward(params, b)).collect();
    let projected: Vec<Vec<f64>> = contents.iter().map(|c| project(params, &c.vec)).collect();
    let mut beta: Vec<f64> = projected
        .iter()
        .map(|u| params.user_attention.iter().zip(u).map(|(a, x)| a * x).sum())
        .collect();
    softmax_in_place(&mut beta);
    let mut z = vec![0.0; params.d_u];
    for (u, &w) in projected.iter().zip(&beta) {
        for (zb, ub) in z.iter_mut().zip(u) {
            *zb += w * ub;
        }
    }
    UserForward { contents, projected, beta, z }
}

/// Encodes one item's content. Empty content yields the zero vector.
pub fn encode_item(params: &RecModelParams, item: &Item) -> EmbeddingVector {
    let buckets = params.buckets_of(&item.content_text());
    EmbeddingVector::new(content_forward(params, &buckets).vec)
}

fn resolve_history<'a>(
    history: &ClickHistory,
    items: &'a BTreeMap<String, Item>,
) -> Result<Vec<&'a Item>, TrainError> {
    if history.is_empty() {
        return Err(TrainError::EmptyHistory);
    }
    history
        .item_ids()
        .iter()
        .map(|id| items.get(id).ok_or_else(|| TrainError::MissingItem(id.clone())))
        .collect()
}

/// Encodes a user from their click history (attention-pooled projections of
/// the encoded history items).
pub fn user_embedding(
    params: &RecModelParams,
    history: &ClickHistory,
    items: &BTreeMap<String, Item>,
) -> Result<EmbeddingVector, TrainError> {
    let resolved = resolve_history(history, items)?;
    let buckets: Vec<Vec<usize>> =
        resolved.iter().map(|i| params.buckets_of(&i.content_text())).collect();
    Ok(EmbeddingVector::new(user_forward(params, &buckets).z))
}

/// Scores several candidates for one user, encoding the user only once.
pub fn score_candidates(
    params: &RecModelParams,
    history: &ClickHistory,
    candidates: &[&Item],
    items: &BTreeMap<String, Item>,
) -> Result<Vec<f64>, TrainError> {
    let z = user_embedding(params, history, items)?;
    Ok(candidates
        .iter()
        .map(|c| {
            let enc = encode_item(params, c);
            let p = project(params, enc.as_slice());
            z.as_slice().iter().zip(&p).map(|(a, b)| a * b).sum()
        })
        .collect())
}

/// Preference score of one user for one candidate item.
pub fn score(
    params: &RecModelParams,
    history: &ClickHistory,
    candidate: &Item,
    items: &BTreeMap<String, Item>,
) -> Result<f64, TrainError> {
    Ok(score_candidates(params, history, &[candidate], items)?[0])
}

/// One sampled-softmax training example: token buckets of the history items
/// and of the candidate slate. Candidate 0 is the positive.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub history: Vec<Vec<usize>>,
    pub candidates: Vec<Vec<usize>>,
}

/// Gradients with the same shapes as [`RecModelParams`].
pub struct Gradients {
    pub token_embedding: Vec<f64>,
    pub content_attention: Vec<f64>,
    pub user_attention: Vec<f64>,
    pub projection: Vec<f64>,
}

impl Gradients {
    fn zeros(params: &RecModelParams) -> Self {
        Self {
            token_embedding: vec![0.0; params.token_embedding.len()],
            content_attention: vec![0.0; params.content_attention.len()],
            user_attention: vec![0.0; params.user_attention.len()],
            projection: vec![0.0; params.projection.len()],
        }
    }

    fn reset(&mut self) {
        for block in [
            &mut self.token_embedding,
            &mut self.content_attention,
            &mut self.user_attention,
            &mut self.projection,
        ] {
            block.fill(0.0);
        }
    }

    fn scale(&mut self, s: f64) {
        for block in [
            &mut self.token_embedding,
            &mut self.content_attention,
            &mut self.user_attention,
            &mut self.projection,
        ] {
            for v in block.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn blocks(&self) -> [&Vec<f64>; 4] {
        [&self.token_embedding, &self.content_attention, &self.user_attention, &self.projection]
    }
}

fn content_backward(
    params: &RecModelParams,
    fwd: &ContentForward,
    dvec: &[f64],
    grads: &mut Gradients,
) {
    if fwd.buckets.is_empty() {
        return;
    }
    let d_c = params.d_c;
    // dL/dw_t and softmax backward to dL/ds_t.
    let dw: Vec<f64> = fwd
        .buckets
        .iter()
        .map(|&b| {
            let row = &params.token_embedding[b * d_c..(b + 1) * d_c];
            dvec.iter().zip(row).map(|(d, e)| d * e).sum()
        })
        .collect();
    let wdot: f64 = fwd.attn.iter().zip(&dw).map(|(w, d)| w * d).sum();
    for ((&b, &w), &dwt) in fwd.buckets.iter().zip(&fwd.attn).zip(&dw) {
        let ds = w * (dwt - wdot);
        let row = &params.token_embedding[b * d_c..(b + 1) * d_c];
        let grow = &mut grads.token_embedding[b * d_c..(b + 1) * d_c];
        for a in 0..d_c {
            grow[a] += w * dvec[a] + ds * params.content_attention[a];
            grads.content_attention[a] += ds * row[a];
        }
    }
}

/// Accumulates `dL/dP` and returns `dL/dv` for `u = P^T v`.
fn project_backward(
    params: &RecModelParams,
    v: &[f64],
    du: &[f64],
    grads: &mut Gradients,
) -> Vec<f64> {
    let (d_c, d_u) = (params.d_c, params.d_u);
    let mut dv = vec![0.0; d_c];
    for a in 0..d_c {
        let prow = &params.projection[a * d_u..(a + 1) * d_u];
        let grow = &mut grads.projection[a * d_u..(a + 1) * d_u];
        let va = v[a];
        let mut acc = 0.0;
        for b in 0..d_u {
            grow[b] += va * du[b];
            acc += prow[b] * du[b];
        }
        dv[a] = acc;
    }
    dv
}

/// Sampled-softmax cross-entropy of one example.
fn example_forward(params: &RecModelParams, ex: &TrainExample) -> (f64, UserForward, Vec<ContentForward>, Vec<Vec<f64>>, Vec<f64>) {
    let user = user_forward(params, &ex.history);
    let cand_fwds: Vec<ContentForward> =
        ex.candidates.iter().map(|b| content_forward(params, b)).collect();
    let cand_proj: Vec<Vec<f64>> = cand_fwds.iter().map(|c| project(params, &c.vec)).collect();
    let logits: Vec<f64> = cand_proj
        .iter()
        .map(|p| user.z.iter().zip(p).map(|(a, b)| a * b).sum())
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let logsum = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let loss = logsum - logits[0];
    (loss, user, cand_fwds, cand_proj, logits)
}

/// Mean loss over `examples` (pure function of the parameters; this is what
/// the finite-difference oracle probes).
pub fn loss_on_examples(params: &RecModelParams, examples: &[TrainExample]) -> f64 {
    let total: f64 = examples.iter().map(|ex| example_forward(params, ex).0).sum();
    total / examples.len() as f64
}

/// Mean loss and its analytic gradient over `examples`.
pub fn gradients_on_examples(
    params: &RecModelParams,
    examples: &[TrainExample],
) -> (f64, Gradients) {
    let mut grads = Gradients::zeros(params);
    let mut total = 0.0;
    for ex in examples {
        total += backward_into(params, ex, &mut grads);
    }
    grads.scale(1.0 / examples.len() as f64);
    (total / examples.len() as f64, grads)
}

/// Backprop of one example; returns its loss.
fn backward_into(params: &RecModelParams, ex: &TrainExample, grads: &mut Gradients) -> f64 {
    let (loss, user, cand_fwds, cand_proj, logits) = example_forward(params, ex);
    let d_u = params.d_u;

    // dL/dlogit_k = q_k - [k == 0]
    let mut q = logits.clone();
    softmax_in_place(&mut q);
    q[0] -= 1.0;

    // Candidate side and dL/dz.
    let mut dz = vec![0.0; d_u];
    for (k, (fwd, proj)) in cand_fwds.iter().zip(&cand_proj).enumerate() {
        let gk = q[k];
        for b in 0..d_u {
            dz[b] += gk * proj[b];
        }
        let du: Vec<f64> = user.z.iter().map(|zb| gk * zb).collect();
        let dv = project_backward(params, &fwd.vec, &du, grads);
        content_backward(params, fwd, &dv, grads);
    }

    // User attention backward.
    let dbeta: Vec<f64> = user
        .projected
        .iter()
        .map(|u| dz.iter().zip(u).map(|(d, x)| d * x).sum())
        .collect();
    let bdot: f64 = user.beta.iter().zip(&dbeta).map(|(b, d)| b * d).sum();
    for ((fwd, proj), (&beta, &db)) in user
        .contents
        .iter()
        .zip(&user.projected)
        .zip(user.beta.iter().zip(&dbeta))
    {
        let dq = beta * (db - bdot);
        let mut du = vec![0.0; d_u];
        for b in 0..d_u {
            du[b] = beta * dz[b] + dq * params.user_attention[b];
            grads.user_attention[b] += dq * proj[b];
        }
        let dv = project_backward(params, &fwd.vec, &du, grads);
        content_backward(params, fwd, &dv, grads);
    }
    loss
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &RecModelParams, lr: f64) -> Self {
        Self { m: Gradients::zeros(params), v: Gradients::zeros(params), t: 0, lr }
    }

    fn step(&mut self, params: &mut RecModelParams, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        let mut mblocks = [
            &mut self.m.token_embedding,
            &mut self.m.content_attention,
            &mut self.m.user_attention,
            &mut self.m.projection,
        ];
        let mut vblocks = [
            &mut self.v.token_embedding,
            &mut self.v.content_attention,
            &mut self.v.user_attention,
            &mut self.v.projection,
        ];
        let gblocks = grads.blocks();
        for (i, pblock) in params.blocks_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut mblocks[i], &mut vblocks[i], gblocks[i]);
            for j in 0..pblock.len() {
                m[j] = Self::BETA1 * m[j] + (1.0 - Self::BETA1) * g[j];
                v[j] = Self::BETA2 * v[j] + (1.0 - Self::BETA2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                pblock[j] -= self.lr * mhat / (vhat.sqrt() + Self::EPS);
            }
        }
    }
}

/// A trained model plus the mean loss recorded per epoch.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: RecModelParams,
    pub epoch_losses: Vec<f64>,
}

struct TrainGroup {
    user_idx: usize,
    pos_item: usize,
}

/// Trains the recommender on `dataset`.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel, TrainError> {
    config.validate()?;

    // Resolve items and users into dense indices with pre-hashed tokens.
    let item_ids: Vec<&String> = dataset.items().keys().collect();
    let item_index: BTreeMap<&str, usize> =
        item_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let item_buckets: Vec<Vec<usize>> = dataset
        .items()
        .values()
        .map(|item| token_buckets(&item.content_text(), config.vocab_buckets))
        .collect();

    let mut user_histories: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut user_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (uid, history) in dataset.users() {
        let buckets: Vec<Vec<usize>> = history
            .item_ids()
            .iter()
            .map(|id| item_buckets[item_index[id.as_str()]].clone())
            .collect();
        user_index.insert(uid.as_str(), user_histories.len());
        user_histories.push(buckets);
    }

    // Build one group per positive impression; negatives come from the same
    // user's non-clicked candidates, falling back to uniform items when a
    // user has none.
    let mut groups: Vec<TrainGroup> = Vec::new();
    let mut neg_pools: Vec<Vec<usize>> = vec![Vec::new(); user_histories.len()];
    for imp in dataset.impressions() {
        let user_idx = user_index[imp.user_id.as_str()];
        let item_idx = item_index[imp.candidate_item_id.as_str()];
        if imp.is_positive() {
            if !user_histories[user_idx].is_empty() {
                groups.push(TrainGroup { user_idx, pos_item: item_idx });
            }
        } else {
            neg_pools[user_idx].push(item_idx);
        }
    }
    if groups.is_empty() {
        return Err(TrainError::NoPositives);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params =
        RecModelParams::random(config.vocab_buckets, config.content_dim, config.user_dim, &mut rng);
    let mut adam = Adam::new(&params, config.learning_rate);
    let mut grads = Gradients::zeros(&params);
    let n_items = item_buckets.len();

    let mut order: Vec<usize> = (0..groups.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.reset();
            let mut batch_loss = 0.0;
            for &gi in batch {
                let group = &groups[gi];
                let mut candidates = Vec::with_capacity(1 + config.negative_ratio);
                candidates.push(item_buckets[group.pos_item].clone());
                let pool = &neg_pools[group.user_idx];
                for _ in 0..config.negative_ratio {
                    let neg = if pool.is_empty() {
                        // Uniform item other than the positive.
                        loop {
                            let i = rng.gen_range(0..n_items);
                            if i != group.pos_item || n_items == 1 {
                                break i;
                            }
                        }
                    } else {
                        pool[rng.gen_range(0..pool.len())]
                    };
                    candidates.push(item_buckets[neg].clone());
                }
                let ex =
                    TrainExample { history: user_histories[group.user_idx].clone(), candidates };
                batch_loss += backward_into(&params, &ex, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut params, &grads);
            epoch_loss += batch_loss;
        }
        let mean = epoch_loss / groups.len() as f64;
        if !mean.is_finite() || !params.all_finite() {
            return Err(TrainError::NaNLoss { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainedModel { params, epoch_losses })
}
