//! Canonical in-memory and on-disk representation of recommendation datasets.
//!
//! On disk a dataset is two tab-separated text files: an items file
//! (`item_id<TAB>category<TAB>title<TAB>abstract`) and a behaviors file
//! (`user_id<TAB>h1 h2 ...<TAB>cand1-1 cand2-0 ...`), each with a single
//! header line. Datasets are immutable after construction; every mutating
//! operation builds a new dataset and re-validates referential integrity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::textenc::Tokenizer;

pub const ITEMS_HEADER: &str = "item_id\tcategory\ttitle\tabstract";
pub const BEHAVIORS_HEADER: &str = "user_id\thistory\timpressions";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("dangling reference to unknown item or user {id:?} ({context})")]
    DanglingRef { id: String, context: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

/// A content item: id plus textual fields. Title is never empty; abstract
/// and category may be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub id: String,
    pub title: String,
    pub abstract_text: String,
    pub category: String,
}

impl Item {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
        category: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            category: category.into(),
        }
    }

    /// Concatenated textual content, the single sequence fed to encoders.
    pub fn content_text(&self) -> String {
        let mut s = String::with_capacity(
            self.title.len() + self.abstract_text.len() + self.category.len() + 2,
        );
        s.push_str(&self.title);
        for part in [&self.abstract_text, &self.category] {
            if !part.is_empty() {
                s.push(' ');
                s.push_str(part);
            }
        }
        s
    }
}

/// A user's ordered click history. Duplicate item ids are dropped on
/// construction, first occurrence kept, so histories behave as ordered sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickHistory {
    pub user_id: String,
    item_ids: Vec<String>,
}

impl ClickHistory {
    pub fn new(user_id: impl Into<String>, item_ids: impl IntoIterator<Item = String>) -> Self {
        let mut seen = BTreeSet::new();
        let deduped = item_ids.into_iter().filter(|id| seen.insert(id.clone())).collect();
        Self { user_id: user_id.into(), item_ids: deduped }
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }
}

/// One labeled exposure of a candidate item to a user. `label` is 1 for a
/// click and 0 otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Impression {
    pub user_id: String,
    pub candidate_item_id: String,
    pub label: u8,
}

impl Impression {
    pub fn new(user_id: impl Into<String>, candidate_item_id: impl Into<String>, label: u8) -> Self {
        debug_assert!(label <= 1);
        Self { user_id: user_id.into(), candidate_item_id: candidate_item_id.into(), label }
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// A referentially-intact dataset. Impressions are held in canonical order:
/// grouped per user in user-id order, preserving each user's relative order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: BTreeMap<String, Item>,
    users: BTreeMap<String, ClickHistory>,
    impressions: Vec<Impression>,
}

impl Dataset {
    pub fn new(
        items: BTreeMap<String, Item>,
        users: BTreeMap<String, ClickHistory>,
        impressions: Vec<Impression>,
    ) -> Result<Self, DataError> {
        let ds = Self::assemble(items, users, impressions);
        ds.validate()?;
        Ok(ds)
    }

    /// Builds the canonical form without validating; used by tests that need
    /// to fabricate invalid datasets.
    fn assemble(
        items: BTreeMap<String, Item>,
        users: BTreeMap<String, ClickHistory>,
        mut impressions: Vec<Impression>,
    ) -> Self {
        // Group impressions per user in user-id order, keeping each user's
        // relative order (sort_by_key is stable).
        impressions.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        Self { items, users, impressions }
    }

    fn validate(&self) -> Result<(), DataError> {
        for (id, item) in &self.items {
            if id.is_empty() || item.id.is_empty() {
                return Err(DataError::Invalid("item with empty id".into()));
            }
            if id != &item.id {
                return Err(DataError::Invalid(format!("item map key {id:?} != item id {:?}", item.id)));
            }
            if item.title.is_empty() {
                return Err(DataError::Invalid(format!("item {id:?} has an empty title")));
            }
        }
        for (uid, history) in &self.users {
            if uid.is_empty() {
                return Err(DataError::Invalid("user with empty id".into()));
            }
            if uid != &history.user_id {
                return Err(DataError::Invalid(format!(
                    "user map key {uid:?} != history user id {:?}",
                    history.user_id
                )));
            }
            for item_id in history.item_ids() {
                if !self.items.contains_key(item_id) {
                    return Err(DataError::DanglingRef {
                        id: item_id.clone(),
                        context: format!("history of user {uid:?}"),
                    });
                }
            }
        }
        for imp in &self.impressions {
            if !self.users.contains_key(&imp.user_id) {
                return Err(DataError::DanglingRef {
                    id: imp.user_id.clone(),
                    context: "impression user".into(),
                });
            }
            if !self.items.contains_key(&imp.candidate_item_id) {
                return Err(DataError::DanglingRef {
                    id: imp.candidate_item_id.clone(),
                    context: format!("impression candidate of user {:?}", imp.user_id),
                });
            }
            if imp.label > 1 {
                return Err(DataError::Invalid(format!(
                    "impression label {} out of range",
                    imp.label
                )));
            }
        }
        Ok(())
    }

    pub fn items(&self) -> &BTreeMap<String, Item> {
        &self.items
    }

    pub fn users(&self) -> &BTreeMap<String, ClickHistory> {
        &self.users
    }

    pub fn impressions(&self) -> &[Impression] {
        &self.impressions
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Impressions of each user, in canonical order.
    pub fn grouped_impressions(&self) -> BTreeMap<&str, Vec<&Impression>> {
        let mut out: BTreeMap<&str, Vec<&Impression>> = BTreeMap::new();
        for imp in &self.impressions {
            out.entry(imp.user_id.as_str()).or_default().push(imp);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub n_items: usize,
    pub n_users: usize,
    pub avg_tokens_per_item: f64,
    pub avg_history_len: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Distinct positive (user, item) pairs over n_users * n_items, so the
    /// value stays in [0, 1] even when the same exposure repeats; 0 for
    /// empty datasets.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeReport {
    pub item_bytes: usize,
    pub user_bytes: usize,
    pub overall_bytes: usize,
    pub item_ratio: f64,
    pub user_ratio: f64,
    pub overall_ratio: f64,
}

fn check_field(path_label: &str, value: &str) -> Result<(), DataError> {
    if value.contains('\t') || value.contains('\n') || value.contains('\r') {
        return Err(DataError::Invalid(format!(
            "{path_label} contains a literal TAB or newline: {value:?}"
        )));
    }
    Ok(())
}

fn render_items(dataset: &Dataset) -> Result<String, DataError> {
    let mut out = String::new();
    out.push_str(ITEMS_HEADER);
    out.push('\n');
    for item in dataset.items.values() {
        for (label, field) in [
            ("item id", &item.id),
            ("category", &item.category),
            ("title", &item.title),
            ("abstract", &item.abstract_text),
        ] {
            check_field(label, field)?;
        }
        let _ = writeln!(out, "{}\t{}\t{}\t{}", item.id, item.category, item.title, item.abstract_text);
    }
    Ok(out)
}

fn render_behaviors(dataset: &Dataset) -> Result<String, DataError> {
    let grouped = dataset.grouped_impressions();
    let mut out = String::new();
    out.push_str(BEHAVIORS_HEADER);
    out.push('\n');
    for (uid, history) in &dataset.users {
        check_field("user id", uid)?;
        for id in history.item_ids() {
            check_field("history item id", id)?;
        }
        let hist = history.item_ids().join(" ");
        let imps = grouped
            .get(uid.as_str())
            .map(|imps| {
                imps.iter()
                    .map(|i| format!("{}-{}", i.candidate_item_id, i.label))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        let _ = writeln!(out, "{uid}\t{hist}\t{imps}");
    }
    Ok(out)
}

/// Serializes a dataset to its two on-disk file images without touching disk.
pub fn serialize_dataset(dataset: &Dataset) -> Result<(String, String), DataError> {
    dataset.validate()?;
    Ok((render_items(dataset)?, render_behaviors(dataset)?))
}

/// Writes the items and behaviors files. Refuses datasets that violate
/// invariants or contain TAB/newline inside fields before any write happens.
pub fn save_dataset(
    dataset: &Dataset,
    items_path: &Path,
    behaviors_path: &Path,
) -> Result<(), DataError> {
    let (items, behaviors) = serialize_dataset(dataset)?;
    std::fs::write(items_path, items)?;
    std::fs::write(behaviors_path, behaviors)?;
    Ok(())
}

fn parse_items(path_label: &str, text: &str) -> Result<BTreeMap<String, Item>, DataError> {
    let mut items = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == ITEMS_HEADER => {}
        Some((_, other)) => {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: 1,
                msg: format!("expected items header {ITEMS_HEADER:?}, found {other:?}"),
            })
        }
        None => {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: 1,
                msg: "missing items header".into(),
            })
        }
    }
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let item = Item::new(fields[0], fields[2], fields[3], fields[1]);
        if item.id.is_empty() {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: "empty item id".into(),
            });
        }
        if item.title.is_empty() {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: format!("item {:?} has an empty title", item.id),
            });
        }
        if items.insert(item.id.clone(), item).is_some() {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: format!("duplicate item id {:?}", fields[0]),
            });
        }
    }
    Ok(items)
}

fn parse_behaviors(
    path_label: &str,
    text: &str,
) -> Result<(BTreeMap<String, ClickHistory>, Vec<Impression>), DataError> {
    let mut users = BTreeMap::new();
    let mut impressions = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == BEHAVIORS_HEADER => {}
        Some((_, other)) => {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: 1,
                msg: format!("expected behaviors header {BEHAVIORS_HEADER:?}, found {other:?}"),
            })
        }
        None => {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: 1,
                msg: "missing behaviors header".into(),
            })
        }
    }
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let uid = fields[0];
        if uid.is_empty() {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: "empty user id".into(),
            });
        }
        let history_ids: Vec<String> =
            fields[1].split_whitespace().map(str::to_string).collect();
        let history = ClickHistory::new(uid, history_ids);
        if users.insert(uid.to_string(), history).is_some() {
            return Err(DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: format!("duplicate user id {uid:?}"),
            });
        }
        for pair in fields[2].split_whitespace() {
            let (item_id, label) = pair.rsplit_once('-').ok_or_else(|| DataError::Parse {
                path: path_label.into(),
                line: lineno,
                msg: format!("impression {pair:?} is not in itemid-label form"),
            })?;
            let label: u8 = match label {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(DataError::Parse {
                        path: path_label.into(),
                        line: lineno,
                        msg: format!("impression label {other:?} is not 0 or 1"),
                    })
                }
            };
            if item_id.is_empty() {
                return Err(DataError::Parse {
                    path: path_label.into(),
                    line: lineno,
                    msg: format!("impression {pair:?} has an empty item id"),
                });
            }
            impressions.push(Impression::new(uid, item_id, label));
        }
    }
    Ok((users, impressions))
}

/// Parses a dataset from in-memory file images (the inverse of
/// [`serialize_dataset`]).
pub fn parse_dataset(
    items_label: &str,
    items_text: &str,
    behaviors_label: &str,
    behaviors_text: &str,
) -> Result<Dataset, DataError> {
    let items = parse_items(items_label, items_text)?;
    let (users, impressions) = parse_behaviors(behaviors_label, behaviors_text)?;
    Dataset::new(items, users, impressions)
}

/// Loads a dataset from its two files, rejecting dangling references.
pub fn load_dataset(items_path: &Path, behaviors_path: &Path) -> Result<Dataset, DataError> {
    let items_text = std::fs::read_to_string(items_path)?;
    let behaviors_text = std::fs::read_to_string(behaviors_path)?;
    parse_dataset(
        &items_path.display().to_string(),
        &items_text,
        &behaviors_path.display().to_string(),
        &behaviors_text,
    )
}

/// Splits each part count by the largest-remainder method so the counts sum
/// to `n` exactly.
fn part_counts(n: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let rs = [ratios.0, ratios.1, ratios.2];
    let mut counts = [0usize; 3];
    let mut fracs = [(0.0f64, 0usize); 3];
    let mut assigned = 0;
    for i in 0..3 {
        let exact = n as f64 * rs[i];
        counts[i] = exact.floor() as usize;
        assigned += counts[i];
        fracs[i] = (exact - exact.floor(), i);
    }
    fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, i) in fracs.iter().take(n - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Partitions the impressions of each user into train/val/test parts.
///
/// Items and user histories are shared by all three parts; only impressions
/// are divided. Which impressions land in which part is a seeded random
/// choice per user, but each part preserves the user's original impression
/// order. The three parts always form an exact partition of the input.
pub fn split_dataset(
    dataset: &Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), DataError> {
    let (a, b, c) = ratios;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 {
        return Err(DataError::Invalid(format!("split ratios must be positive, got {ratios:?}")));
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(DataError::Invalid(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<Impression>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (_, imps) in dataset.grouped_impressions() {
        let n = imps.len();
        let counts = part_counts(n, ratios);
        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        let mut cursor = 0;
        for (part, &count) in parts.iter_mut().zip(&counts) {
            let mut chosen: Vec<usize> = indices[cursor..cursor + count].to_vec();
            cursor += count;
            chosen.sort_unstable();
            part.extend(chosen.into_iter().map(|i| imps[i].clone()));
        }
    }
    if parts.iter().any(|p| p.is_empty()) {
        return Err(DataError::Invalid(
            "degenerate split: a part received no impressions".into(),
        ));
    }
    let [train, val, test] = parts;
    Ok((
        Dataset::new(dataset.items.clone(), dataset.users.clone(), train)?,
        Dataset::new(dataset.items.clone(), dataset.users.clone(), val)?,
        Dataset::new(dataset.items.clone(), dataset.users.clone(), test)?,
    ))
}

/// Computes dataset statistics. Token counts use the same tokenizer as the
/// text encoder so reported averages agree with encoder inputs.
pub fn dataset_stats(dataset: &Dataset, tokenizer: &Tokenizer) -> DatasetStats {
    let n_items = dataset.n_items();
    let n_users = dataset.n_users();
    let total_tokens: usize = dataset
        .items
        .values()
        .map(|item| tokenizer.count(&item.content_text()))
        .sum();
    let total_history: usize = dataset.users.values().map(ClickHistory::len).sum();
    let n_pos = dataset.impressions.iter().filter(|i| i.is_positive()).count();
    let n_neg = dataset.impressions.len() - n_pos;
    let density = if n_users == 0 || n_items == 0 {
        0.0
    } else {
        n_pos as f64 / (n_users as f64 * n_items as f64)
    };
    DatasetStats {
        n_items,
        n_users,
        avg_tokens_per_item: if n_items == 0 { 0.0 } else { total_tokens as f64 / n_items as f64 },
        avg_history_len: if n_users == 0 { 0.0 } else { total_history as f64 / n_users as f64 },
        n_pos,
        n_neg,
        density,
    }
}

/// Serialized byte sizes of `candidate` against `reference`.
pub fn size_report(candidate: &Dataset, reference: &Dataset) -> Result<SizeReport, DataError> {
    let (c_items, c_behaviors) = serialize_dataset(candidate)?;
    let (r_items, r_behaviors) = serialize_dataset(reference)?;
    let ratio = |c: usize, r: usize| {
        if r == 0 {
            if c == 0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            c as f64 / r as f64
        }
    };
    let item_bytes = c_items.len();
    let user_bytes = c_behaviors.len();
    Ok(SizeReport {
        item_bytes,
        user_bytes,
        overall_bytes: item_bytes + user_bytes,
        item_ratio: ratio(c_items.len(), r_items.len()),
        user_ratio: ratio(c_behaviors.len(), r_behaviors.len()),
        overall_ratio: ratio(c_items.len() + c_behaviors.len(), r_items.len() + r_behaviors.len()),
    })
}
