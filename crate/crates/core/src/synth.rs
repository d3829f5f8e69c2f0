//! Synthetic benchmark generator.
//!
//! Produces a desk-scale dataset with planted structure: G interest groups,
//! each with its own vocabulary and items, and users whose histories and
//! positive impressions stay inside their group up to a controlled noise
//! rate. The planted group of every user and item is recoverable from its
//! id, which is what the clustering oracles check against.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::datamodel::{ClickHistory, Dataset, Impression, Item};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid benchmark spec: {0}")]
    Invalid(String),
    #[error("data error: {0}")]
    Data(#[from] crate::datamodel::DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmarkSpec {
    /// Number of planted interest groups G.
    pub groups: usize,
    pub users_per_group: usize,
    pub items_per_topic: usize,
    /// Distinct topic-specific vocabulary tokens.
    pub vocab_per_topic: usize,
    /// Inclusive history length range.
    pub history_len: (usize, usize),
    pub impressions_per_user: usize,
    /// Fraction of a history allowed to come from other topics.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticBenchmarkSpec {
    fn default() -> Self {
        Self {
            groups: 8,
            users_per_group: 50,
            items_per_topic: 40,
            vocab_per_topic: 30,
            history_len: (8, 16),
            impressions_per_user: 30,
            noise_rate: 0.1,
            seed: 0,
        }
    }
}

const TOPIC_WORDS: &[&str] = &[
    "sports", "politics", "technology", "music", "movies", "travel", "food", "science", "health",
    "finance", "fashion", "gaming",
];

const FILLER_WORDS: &[&str] =
    &["daily", "report", "update", "coverage", "today", "latest", "weekly", "briefing"];

impl SyntheticBenchmarkSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.groups < 2 {
            return Err(SynthError::Invalid("need at least 2 groups".into()));
        }
        if self.users_per_group < 1 || self.items_per_topic < 1 || self.vocab_per_topic < 1 {
            return Err(SynthError::Invalid("counts must be positive".into()));
        }
        let (lo, hi) = self.history_len;
        if lo < 1 || lo > hi {
            return Err(SynthError::Invalid(format!("bad history length range ({lo}, {hi})")));
        }
        if hi > self.items_per_topic {
            return Err(SynthError::Invalid(
                "history length may not exceed items per topic".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(SynthError::Invalid("noise rate must be in [0, 1)".into()));
        }
        let n_pos = positives_per_user(self.impressions_per_user);
        if n_pos < 1 || n_pos > self.items_per_topic {
            return Err(SynthError::Invalid("impressions per user out of range".into()));
        }
        if self.impressions_per_user - n_pos > (self.groups - 1) * self.items_per_topic {
            return Err(SynthError::Invalid("not enough off-topic items for negatives".into()));
        }
        Ok(())
    }

    /// Topic word of group `g`.
    pub fn topic_name(g: usize) -> String {
        let base = TOPIC_WORDS[g % TOPIC_WORDS.len()];
        if g < TOPIC_WORDS.len() {
            base.to_string()
        } else {
            format!("{base}{}", g / TOPIC_WORDS.len())
        }
    }
}

/// 30% of a user's impressions are positives.
fn positives_per_user(impressions: usize) -> usize {
    ((impressions as f64) * 0.3).round() as usize
}

fn item_id(group: usize, idx: usize) -> String {
    format!("ig{group}n{idx:03}")
}

fn user_id(group: usize, idx: usize) -> String {
    format!("ug{group}u{idx:03}")
}

/// Planted group index of a generated user or item id.
pub fn planted_group(id: &str) -> Option<usize> {
    let rest = id.strip_prefix("ug").or_else(|| id.strip_prefix("ig"))?;
    let end = rest.find(|c: char| !c.is_ascii_digit())?;
    rest[..end].parse().ok()
}

/// Generates the benchmark dataset. Deterministic given the spec.
pub fn generate(spec: &SyntheticBenchmarkSpec) -> Result<Dataset, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let vocab: Vec<Vec<String>> = (0..spec.groups)
        .map(|g| {
            let topic = SyntheticBenchmarkSpec::topic_name(g);
            (0..spec.vocab_per_topic).map(|j| format!("{topic}{j:02}")).collect()
        })
        .collect();

    let mut items = BTreeMap::new();
    for g in 0..spec.groups {
        let topic = SyntheticBenchmarkSpec::topic_name(g);
        for i in 0..spec.items_per_topic {
            let pick = |rng: &mut ChaCha8Rng| vocab[g][rng.gen_range(0..vocab[g].len())].clone();
            let title = format!("{topic} {} {}", pick(&mut rng), pick(&mut rng));
            let n_abs = rng.gen_range(14..=26);
            let abstract_text = (0..n_abs)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        pick(&mut rng)
                    } else {
                        FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())].to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ");
            let item = Item::new(item_id(g, i), title, abstract_text, topic.clone());
            items.insert(item.id.clone(), item);
        }
    }

    let mut users = BTreeMap::new();
    let mut impressions = Vec::new();
    for g in 0..spec.groups {
        for u in 0..spec.users_per_group {
            let uid = user_id(g, u);
            let len = rng.gen_range(spec.history_len.0..=spec.history_len.1);
            // Enforce the noise bound exactly: floor(noise * len) off-topic draws.
            let n_off = (spec.noise_rate * len as f64).floor() as usize;
            let n_on = len - n_off;

            let mut own: Vec<usize> = (0..spec.items_per_topic).collect();
            own.shuffle(&mut rng);
            let mut history: Vec<String> =
                own.iter().take(n_on).map(|&i| item_id(g, i)).collect();
            for _ in 0..n_off {
                let other = loop {
                    let o = rng.gen_range(0..spec.groups);
                    if o != g {
                        break o;
                    }
                };
                history.push(item_id(other, rng.gen_range(0..spec.items_per_topic)));
            }
            history.shuffle(&mut rng);
            users.insert(uid.clone(), ClickHistory::new(uid.clone(), history));

            // Impressions: own-topic candidates are clicks, off-topic are not.
            let n_pos = positives_per_user(spec.impressions_per_user);
            let n_neg = spec.impressions_per_user - n_pos;
            let mut own_pool: Vec<usize> = (0..spec.items_per_topic).collect();
            own_pool.shuffle(&mut rng);
            let mut slate: Vec<(String, u8)> =
                own_pool.iter().take(n_pos).map(|&i| (item_id(g, i), 1)).collect();
            let mut off_pool: Vec<(usize, usize)> = (0..spec.groups)
                .filter(|&o| o != g)
                .flat_map(|o| (0..spec.items_per_topic).map(move |i| (o, i)))
                .collect();
            off_pool.shuffle(&mut rng);
            slate.extend(off_pool.iter().take(n_neg).map(|&(o, i)| (item_id(o, i), 0)));
            slate.shuffle(&mut rng);
            for (iid, label) in slate {
                impressions.push(Impression::new(uid.clone(), iid, label));
            }
        }
    }
    Ok(Dataset::new(items, users, impressions)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_spec() {
        let spec = SyntheticBenchmarkSpec {
            groups: 8,
            users_per_group: 50,
            ..SyntheticBenchmarkSpec::default()
        };
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.n_users(), 400);
        assert_eq!(ds.n_items(), 8 * spec.items_per_topic);
        assert_eq!(ds.impressions().len(), 400 * spec.impressions_per_user);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SyntheticBenchmarkSpec {
            groups: 3,
            users_per_group: 5,
            ..SyntheticBenchmarkSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SyntheticBenchmarkSpec { seed: 1, ..spec };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn histories_respect_noise_bound() {
        let spec = SyntheticBenchmarkSpec {
            groups: 4,
            users_per_group: 20,
            noise_rate: 0.25,
            ..SyntheticBenchmarkSpec::default()
        };
        let ds = generate(&spec).unwrap();
        for (uid, history) in ds.users() {
            let own = planted_group(uid).unwrap();
            let on_topic =
                history.item_ids().iter().filter(|i| planted_group(i) == Some(own)).count();
            let frac = on_topic as f64 / history.len() as f64;
            assert!(frac >= 1.0 - spec.noise_rate, "user {uid} on-topic fraction {frac}");
        }
    }

    #[test]
    fn titles_carry_topic_token_and_positives_stay_on_topic() {
        let ds = generate(&SyntheticBenchmarkSpec::default()).unwrap();
        for item in ds.items().values() {
            let topic = SyntheticBenchmarkSpec::topic_name(planted_group(&item.id).unwrap());
            assert!(item.title.starts_with(&topic));
        }
        for imp in ds.impressions() {
            if imp.is_positive() {
                assert_eq!(
                    planted_group(&imp.user_id),
                    planted_group(&imp.candidate_item_id)
                );
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = SyntheticBenchmarkSpec { groups: 1, ..SyntheticBenchmarkSpec::default() };
        assert!(generate(&spec).is_err());
        spec = SyntheticBenchmarkSpec { noise_rate: 1.0, ..SyntheticBenchmarkSpec::default() };
        assert!(generate(&spec).is_err());
        spec = SyntheticBenchmarkSpec { history_len: (20, 10), ..SyntheticBenchmarkSpec::default() };
        assert!(generate(&spec).is_err());
    }
}
