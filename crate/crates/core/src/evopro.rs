//! Prompt evolution.
//!
//! Each generation derives N child prompts from the previous winner, scores
//! every child by how much content its condensations preserve (summed cosine
//! similarity between the embeddings of original and condensed content), and
//! keeps the best. The last generation's winner is the designated final
//! prompt; all generation winners are returned for callers that want the
//! full lineage.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::datamodel::Item;
use crate::llm::{self, LlmBackend, LlmError, PromptTemplate};
use crate::textenc::{self, TextEncoder};

#[derive(Debug, Error)]
pub enum EvoError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("child generation failed in generation {generation}: {source}")]
    ChildGeneration { generation: usize, source: LlmError },
    #[error("no items available for scoring")]
    NoContents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvoConfig {
    /// Number of generations E.
    pub generations: usize,
    /// Children per generation N.
    pub children: usize,
    /// Number of items scored per generation; all items when absent. The
    /// sample is drawn once per run so generations compete on equal ground.
    pub scoring_sample: Option<usize>,
    pub seed: u64,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self { generations: 2, children: 4, scoring_sample: None, seed: 0 }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<(), EvoError> {
        if self.generations < 1 {
            return Err(EvoError::InvalidConfig("generations E must be at least 1".into()));
        }
        if self.children < 1 {
            return Err(EvoError::InvalidConfig("children per generation N must be at least 1".into()));
        }
        if self.scoring_sample == Some(0) {
            return Err(EvoError::InvalidConfig("scoring sample must be positive".into()));
        }
        Ok(())
    }
}

/// One scored candidate in a generation.
#[derive(Debug, Clone)]
pub struct TraceCandidate {
    pub prompt: PromptTemplate,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct GenerationTrace {
    pub candidates: Vec<TraceCandidate>,
    /// Index of the selected candidate: the argmax score, ties broken by the
    /// lowest index.
    pub selected: usize,
}

#[derive(Debug, Clone, Default)]
pub struct EvoTrace {
    pub generations: Vec<GenerationTrace>,
}

impl EvoTrace {
    /// Line-delimited log: `generation<TAB>candidate<TAB>score<TAB>selected`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("generation\tcandidate\tscore\tselected\n");
        for (g, generation) in self.generations.iter().enumerate() {
            for (i, c) in generation.candidates.iter().enumerate() {
                let selected = u8::from(i == generation.selected);
                let _ = writeln!(out, "{}\t{}\t{}\t{}", g + 1, i, c.score, selected);
            }
        }
        out
    }
}

/// Outcome of an evolution run. `aborted` carries the diagnostic when a
/// generation failed; winners collected so far are still present.
#[derive(Debug, Clone)]
pub struct EvoOutcome {
    /// The winner of each completed generation, in order.
    pub winners: Vec<PromptTemplate>,
    pub trace: EvoTrace,
    pub aborted: Option<String>,
}

impl EvoOutcome {
    /// The designated final prompt: best of the latest generation.
    pub fn final_prompt(&self) -> Option<&PromptTemplate> {
        self.winners.last()
    }
}

/// Scores a prompt: for every item, condense it, embed the original
/// concatenated content and the condensed title, and accumulate their
/// cosine similarity. An item that fails permanently contributes the
/// minimum similarity (-1) so failure-prone prompts rank last.
pub fn cal_score(
    prompt: &PromptTemplate,
    contents: &[Item],
    backend: &LlmBackend,
    encoder: &TextEncoder,
) -> Result<f64, EvoError> {
    if contents.is_empty() {
        return Err(EvoError::NoContents);
    }
    let sims = llm::bounded_parallel_map(contents, backend.concurrency(), |_, item| {
        match llm::condense_item(backend, prompt, item) {
            Ok(condensed) => {
                let original = encoder.encode(&item.content_text());
                let summary = encoder.encode(&condensed);
                textenc::cosine_similarity(&original, &summary).expect("equal dims")
            }
            Err(err) => {
                log::warn!("scoring: condensation of item {:?} failed: {err}", item.id);
                -1.0
            }
        }
    });
    // Accumulation in item order keeps the sum deterministic.
    Ok(sims.iter().sum())
}

/// Runs E generations of prompt evolution from `initial`.
pub fn evolve(
    initial: &PromptTemplate,
    contents: &[Item],
    config: &EvoConfig,
    backend: &LlmBackend,
    encoder: &TextEncoder,
) -> Result<EvoOutcome, EvoError> {
    config.validate()?;
    if contents.is_empty() {
        return Err(EvoError::NoContents);
    }

    // Fixed scoring sample for the whole run.
    let sampled: Vec<Item> = match config.scoring_sample {
        Some(n) if n < contents.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut indices: Vec<usize> = (0..contents.len()).collect();
            indices.shuffle(&mut rng);
            indices.truncate(n);
            indices.sort_unstable();
            indices.into_iter().map(|i| contents[i].clone()).collect()
        }
        _ => contents.to_vec(),
    };

    let mut outcome = EvoOutcome { winners: Vec::new(), trace: EvoTrace::default(), aborted: None };
    let mut parent = initial.clone();
    for generation in 1..=config.generations {
        let children = match llm::generate_child_prompts(backend, &parent, config.children) {
            Ok(children) => children,
            Err(err) => {
                outcome.aborted =
                    Some(format!("child generation failed in generation {generation}: {err}"));
                return Ok(outcome);
            }
        };
        let mut candidates = Vec::with_capacity(children.len());
        for child in children {
            let score = cal_score(&child, &sampled, backend, encoder)?;
            candidates.push(TraceCandidate { prompt: child, score });
        }
        let selected = candidates
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.score.partial_cmp(&b.score).unwrap().then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap();
        parent = candidates[selected].prompt.clone();
        outcome.winners.push(parent.clone());
        outcome.trace.generations.push(GenerationTrace { candidates, selected });
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockConfig;

    fn items(n: usize) -> Vec<Item> {
        (0..n)
            .map(|i| {
                Item::new(
                    format!("i{i}"),
                    format!("headline number {i}"),
                    format!("body text {i} with several extra words to trim"),
                    "news",
                )
            })
            .collect()
    }

    #[test]
    fn identity_condenser_scores_item_count() {
        let backend = LlmBackend::mock(MockConfig { echo: true, ..MockConfig::default() });
        let contents = items(7);
        let s = cal_score(
            &PromptTemplate::default_condense(),
            &contents,
            &backend,
            &TextEncoder::default(),
        )
        .unwrap();
        assert!((s - 7.0).abs() < 1e-6, "identity score {s}");
    }

    #[test]
    fn untokenizable_content_scores_zero() {
        let backend = LlmBackend::mock(MockConfig::default());
        let contents: Vec<Item> =
            (0..3).map(|i| Item::new(format!("i{i}"), "?!", "...", "")).collect();
        let s = cal_score(
            &PromptTemplate::default_condense(),
            &contents,
            &backend,
            &TextEncoder::default(),
        )
        .unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn cal_score_matches_scripted_loop() {
        let backend = LlmBackend::mock(MockConfig::default());
        let encoder = TextEncoder::default();
        let prompt = PromptTemplate::default_condense();
        let contents = items(10);
        let got = cal_score(&prompt, &contents, &backend, &encoder).unwrap();
        // Independent loop over the same public pieces.
        let mut want = 0.0;
        for item in &contents {
            let condensed = llm::condense_item(&backend, &prompt, item).unwrap();
            let a = encoder.encode(&item.content_text());
            let b = encoder.encode(&condensed);
            want += textenc::cosine_similarity(&a, &b).unwrap();
        }
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn single_generation_single_child() {
        let backend = LlmBackend::mock(MockConfig::default());
        let out = evolve(
            &PromptTemplate::default_condense(),
            &items(3),
            &EvoConfig { generations: 1, children: 1, ..EvoConfig::default() },
            &backend,
            &TextEncoder::default(),
        )
        .unwrap();
        assert_eq!(out.winners.len(), 1);
        assert!(out.aborted.is_none());
        assert_ne!(out.winners[0].body, PromptTemplate::default_condense().body);
        assert_eq!(out.final_prompt().unwrap(), &out.winners[0]);
    }

    #[test]
    fn winner_is_argmax_every_generation() {
        let backend = LlmBackend::mock(MockConfig::default());
        let out = evolve(
            &PromptTemplate::default_condense(),
            &items(6),
            &EvoConfig { generations: 3, children: 4, ..EvoConfig::default() },
            &backend,
            &TextEncoder::default(),
        )
        .unwrap();
        assert_eq!(out.trace.generations.len(), 3);
        for generation in &out.trace.generations {
            let best = generation.candidates[generation.selected].score;
            for c in &generation.candidates {
                assert!(best >= c.score);
            }
            // Tie-break: no earlier candidate holds the same best score.
            for c in &generation.candidates[..generation.selected] {
                assert!(c.score < best);
            }
        }
    }

    #[test]
    fn evolve_is_deterministic() {
        let backend = LlmBackend::mock(MockConfig::default());
        let config = EvoConfig { generations: 2, children: 3, ..EvoConfig::default() };
        let run = || {
            evolve(
                &PromptTemplate::default_condense(),
                &items(5),
                &config,
                &backend,
                &TextEncoder::default(),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.winners, b.winners);
        assert_eq!(a.trace.to_text(), b.trace.to_text());
    }

    #[test]
    fn scoring_sample_is_fixed_per_run() {
        let backend = LlmBackend::mock(MockConfig::default());
        let config =
            EvoConfig { generations: 2, children: 2, scoring_sample: Some(3), seed: 5 };
        let a = evolve(
            &PromptTemplate::default_condense(),
            &items(10),
            &config,
            &backend,
            &TextEncoder::default(),
        )
        .unwrap();
        let b = evolve(
            &PromptTemplate::default_condense(),
            &items(10),
            &config,
            &backend,
            &TextEncoder::default(),
        )
        .unwrap();
        assert_eq!(a.trace.to_text(), b.trace.to_text());
    }
}
