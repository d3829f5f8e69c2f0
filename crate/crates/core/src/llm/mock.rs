//! Deterministic mock backend.
//!
//! Responses are pure functions of (config, request) and are rendered in the
//! documented output formats, so every call flows through the same parsers
//! as a remote response would.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LlmRequest, CHILD_DIVIDER};
use crate::datamodel::Item;
use crate::textenc::{hash64, Tokenizer, HASH_SEED};

/// Configuration of the mock backend.
#[derive(Debug, Clone)]
pub struct MockConfig {
    /// Token budget of a condensed title.
    pub summary_budget: usize,
    /// Number of interest phrases to extract per user.
    pub interest_count: usize,
    /// When set, condensation echoes the full concatenated content instead
    /// of summarizing (useful as an identity condenser).
    pub echo: bool,
    /// Seed for the child-prompt rewrites.
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self { summary_budget: 16, interest_count: 5, echo: false, seed: 0 }
    }
}

pub(super) fn respond(cfg: &MockConfig, req: &LlmRequest) -> String {
    match req {
        LlmRequest::Condense { item, .. } => {
            format!("[new_title]{{{}}}", condense(cfg, item))
        }
        LlmRequest::Interests { titles, .. } => {
            let interests = interests(cfg, titles);
            format!(
                "[interests] {}",
                interests.iter().map(|p| format!("-{p}")).collect::<Vec<_>>().join(", ")
            )
        }
        LlmRequest::Children { parent, n } => children(cfg, parent, *n)
            .iter()
            .map(|c| c.to_file_text())
            .collect::<Vec<_>>()
            .join(&format!("{CHILD_DIVIDER}\n")),
    }
}

/// Counts lowercased token frequencies, remembering first-occurrence order.
fn ranked_tokens(texts: &[&str]) -> Vec<(String, usize)> {
    let tok = Tokenizer::default();
    let mut counts: Vec<(String, usize)> = Vec::new();
    for text in texts {
        for t in tok.tokens(text) {
            match counts.iter_mut().find(|(w, _)| *w == t) {
                Some((_, c)) => *c += 1,
                None => counts.push((t, 1)),
            }
        }
    }
    // Frequency descending, first occurrence breaking ties.
    let mut indexed: Vec<(usize, (String, usize))> = counts.into_iter().enumerate().collect();
    indexed.sort_by(|(ia, (_, ca)), (ib, (_, cb))| cb.cmp(ca).then(ia.cmp(ib)));
    indexed.into_iter().map(|(_, wc)| wc).collect()
}

/// Extractive summary: the title's tokens in order, then the highest-TF
/// abstract/category tokens not already present, truncated to the budget.
fn condense(cfg: &MockConfig, item: &Item) -> String {
    if cfg.echo {
        return item.content_text();
    }
    let surface = Tokenizer::surface();
    let lower = Tokenizer::default();

    let mut picked: Vec<String> = Vec::new();
    let mut picked_lower: Vec<String> = Vec::new();
    for t in surface.tokens(&item.title) {
        let l = lower.tokens(&t).pop().unwrap_or_default();
        picked.push(t);
        picked_lower.push(l);
    }

    let rest = format!("{} {}", item.abstract_text, item.category);
    let rest_surface = surface.tokens(&rest);
    for (token, _) in ranked_tokens(&[rest.as_str()]) {
        if picked.len() >= cfg.summary_budget {
            break;
        }
        if picked_lower.contains(&token) {
            continue;
        }
        // Keep the surface form of the token's first occurrence.
        let surface_form = rest_surface
            .iter()
            .find(|s| lower.tokens(s).pop().unwrap_or_default() == token)
            .cloned()
            .unwrap_or_else(|| token.clone());
        picked.push(surface_form);
        picked_lower.push(token);
    }
    picked.truncate(cfg.summary_budget.max(1));
    if picked.is_empty() {
        // Nothing tokenizable (punctuation-only content): echo the title.
        return item.title.clone();
    }
    picked.join(" ")
}

/// Top-k TF-weighted content tokens across the user's history items.
fn interests(cfg: &MockConfig, titles: &[&str]) -> Vec<String> {
    ranked_tokens(titles)
        .into_iter()
        .take(cfg.interest_count.max(1))
        .map(|(w, _)| w)
        .collect()
}

const SYNONYMS: &[(&str, &[&str])] = &[
    ("condense", &["compress", "distill", "shorten"]),
    ("succinct", &["concise", "compact"]),
    ("informative", &["meaningful", "expressive"]),
    ("important", &["essential", "key"]),
    ("short", &["brief", "compact"]),
    ("keeps", &["retains", "preserves"]),
];

const EMPHASIS: &[&str] = &[
    "Respond with the output format only.",
    "Do not add explanations.",
    "Prefer the most informative words.",
    "Keep named entities intact.",
    "Use at most one short sentence.",
    "Avoid filler words.",
    "Keep numbers and names.",
    "Write in plain language.",
];

fn rewrite_body(body: &str, rng: &mut ChaCha8Rng) -> String {
    body.split(' ')
        .map(|word| {
            let bare = word.trim_matches(|c: char| !c.is_alphanumeric());
            for (from, to) in SYNONYMS {
                if bare.eq_ignore_ascii_case(from) && rng.gen_bool(0.5) {
                    return word.replacen(bare, to[rng.gen_range(0..to.len())], 1);
                }
            }
            word.to_string()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Derives `n` deterministic rewrites of `parent`. Each child appends a
/// distinct emphasis sentence, so children are pairwise distinct for
/// `n <= EMPHASIS.len()`.
pub(super) fn children(
    cfg: &MockConfig,
    parent: &super::PromptTemplate,
    n: usize,
) -> Vec<super::PromptTemplate> {
    let parent_hash = hash64(HASH_SEED, format!("{}\n{}", parent.id, parent.body).as_bytes());
    let start = (parent_hash % EMPHASIS.len() as u64) as usize;
    (0..n)
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed ^ parent_hash ^ (i as u64).wrapping_mul(0x9e37));
            let rewritten = rewrite_body(&parent.body, &mut rng);
            let emphasis = EMPHASIS[(start + i) % EMPHASIS.len()];
            super::PromptTemplate {
                id: format!("{}.{}", parent.id, i + 1),
                body: format!("{rewritten} {emphasis}"),
                input_hint: parent.input_hint.clone(),
                output_instruction: parent.output_instruction.clone(),
            }
        })
        .collect()
}
