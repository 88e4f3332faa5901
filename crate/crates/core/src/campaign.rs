//! On-disk annotation campaign: blind items, the secret mapping, and an
//! append-only verdict log replayed on open.
//!
//! Layout of a campaign directory:
//!
//! ```text
//! campaign.json        annotators, tokens, order seed
//! items.json           public blind items
//! secret/mapping.json  gold side per item, never served
//! verdicts.jsonl       one verdict per line, latest record per (item, annotator) wins
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjudication::{
    full_report, AbChoice, AdjudicationError, AdjudicationReport, BlindItem, SecretMapping,
    Verdict,
};

pub const CONFIG_FILE: &str = "campaign.json";
pub const ITEMS_FILE: &str = "items.json";
pub const MAPPING_FILE: &str = "secret/mapping.json";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path} line {line}: corrupt verdict record")]
    CorruptLog { path: PathBuf, line: usize },
    #[error("invalid campaign: {0}")]
    Config(String),
    #[error("campaign already exists in {0}")]
    AlreadyExists(PathBuf),
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("bad token for annotator {0:?}")]
    Unauthorized(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("item {item_id:?} has not been served to {annotator:?}")]
    NotServed { annotator: String, item_id: String },
    #[error("campaign incomplete: {missing} verdicts outstanding")]
    Incomplete { missing: usize },
    #[error(transparent)]
    Adjudication(#[from] AdjudicationError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CampaignError + '_ {
    move |source| CampaignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotator {
    pub id: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub annotators: Vec<Annotator>,
    pub order_seed: u64,
    #[serde(default)]
    pub per_annotator_shuffle: bool,
}

impl CampaignConfig {
    fn check(&self) -> Result<(), CampaignError> {
        if self.annotators.len() != 2 {
            return Err(CampaignError::Config(format!(
                "exactly two annotators are required, got {}",
                self.annotators.len()
            )));
        }
        let ids: HashSet<&str> = self.annotators.iter().map(|a| a.id.as_str()).collect();
        if ids.len() != self.annotators.len() {
            return Err(CampaignError::Config("duplicate annotator id".into()));
        }
        if self.annotators.iter().any(|a| a.id.is_empty() || a.token.is_empty()) {
            return Err(CampaignError::Config("annotator ids and tokens must be non-empty".into()));
        }
        Ok(())
    }
}

/// Response to a next-item request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextItem {
    Item(BlindItem),
    Done(DoneMarker),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoneMarker {
    pub done: bool,
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAck {
    pub item_id: String,
    pub answered: usize,
    pub total: usize,
    pub superseded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorProgress {
    pub annotator_id: String,
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total_items: usize,
    pub annotators: Vec<AnnotatorProgress>,
    pub complete: bool,
}

#[derive(Debug)]
pub struct Campaign {
    dir: PathBuf,
    config: CampaignConfig,
    items: Vec<BlindItem>,
    mapping: SecretMapping,
    item_index: HashMap<String, usize>,
    orders: HashMap<String, Vec<usize>>,
    latest: HashMap<String, BTreeMap<usize, Verdict>>,
    log: File,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CampaignError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CampaignError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("campaign types serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

impl Campaign {
    /// Write a new campaign to `dir` and open it.
    pub fn create(
        dir: &Path,
        config: CampaignConfig,
        items: Vec<BlindItem>,
        mapping: SecretMapping,
    ) -> Result<Campaign, CampaignError> {
        config.check()?;
        if items.is_empty() {
            return Err(CampaignError::Config("no items".into()));
        }
        let public: Vec<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
        let secret: Vec<&str> = mapping.items.iter().map(|i| i.item_id.as_str()).collect();
        if public != secret {
            return Err(CampaignError::Config("items and mapping disagree".into()));
        }
        if dir.join(CONFIG_FILE).exists() {
            return Err(CampaignError::AlreadyExists(dir.to_path_buf()));
        }
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_json(&dir.join(ITEMS_FILE), &items)?;
        write_json(&dir.join(MAPPING_FILE), &mapping)?;
        let log = dir.join(VERDICTS_FILE);
        File::create(&log).map_err(io_err(&log))?;
        write_json(&dir.join(CONFIG_FILE), &config)?;
        Self::open(dir)
    }

    /// Load a campaign and replay its verdict log. A torn final line (from a
    /// crash mid-write) is dropped; any other unreadable line is an error.
    pub fn open(dir: &Path) -> Result<Campaign, CampaignError> {
        let config: CampaignConfig = read_json(&dir.join(CONFIG_FILE))?;
        config.check()?;
        let items: Vec<BlindItem> = read_json(&dir.join(ITEMS_FILE))?;
        let mapping: SecretMapping = read_json(&dir.join(MAPPING_FILE))?;
        let item_index: HashMap<String, usize> = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.item_id.clone(), i))
            .collect();
        if item_index.len() != items.len() || mapping.items.len() != items.len() {
            return Err(CampaignError::Config("items and mapping disagree".into()));
        }

        let orders = Self::orders(&config, items.len());
        let log_path = dir.join(VERDICTS_FILE);
        let text = match fs::read_to_string(&log_path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&log_path)(e)),
        };

        let mut latest: HashMap<String, BTreeMap<usize, Verdict>> = config
            .annotators
            .iter()
            .map(|a| (a.id.clone(), BTreeMap::new()))
            .collect();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        for (n, raw) in lines.iter().enumerate() {
            offset += raw.len();
            let line = raw.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                good_len = offset;
                continue;
            }
            let parsed: Option<Verdict> = serde_json::from_str(line).ok();
            let slot = parsed.as_ref().and_then(|v| {
                Some((latest.contains_key(&v.annotator_id), *item_index.get(&v.item_id)?))
            });
            match (parsed, slot) {
                (Some(v), Some((true, idx))) => {
                    latest.get_mut(&v.annotator_id).expect("checked").insert(idx, v);
                    good_len = offset;
                }
                _ if n + 1 == lines.len() && !raw.ends_with('\n') => {
                    tracing::warn!(path = %log_path.display(), "dropping torn final verdict record");
                }
                _ => {
                    return Err(CampaignError::CorruptLog {
                        path: log_path,
                        line: n + 1,
                    })
                }
            }
        }

        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        if good_len < text.len() {
            log.set_len(good_len as u64).map_err(io_err(&log_path))?;
        }

        Ok(Campaign {
            dir: dir.to_path_buf(),
            config,
            items,
            mapping,
            item_index,
            orders,
            latest,
            log,
        })
    }

    fn orders(config: &CampaignConfig, n: usize) -> HashMap<String, Vec<usize>> {
        let shuffled = |seed: u64| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            order
        };
        let shared = shuffled(config.order_seed);
        config
            .annotators
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let order = if config.per_annotator_shuffle {
                    shuffled(config.order_seed.wrapping_add(i as u64 + 1))
                } else {
                    shared.clone()
                };
                (a.id.clone(), order)
            })
            .collect()
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn items(&self) -> &[BlindItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn authenticate(&self, annotator: &str, token: &str) -> Result<(), CampaignError> {
        let a = self
            .config
            .annotators
            .iter()
            .find(|a| a.id == annotator)
            .ok_or_else(|| CampaignError::UnknownAnnotator(annotator.to_string()))?;
        if a.token == token {
            Ok(())
        } else {
            Err(CampaignError::Unauthorized(annotator.to_string()))
        }
    }

    fn answers(&self, annotator: &str) -> Result<&BTreeMap<usize, Verdict>, CampaignError> {
        self.latest
            .get(annotator)
            .ok_or_else(|| CampaignError::UnknownAnnotator(annotator.to_string()))
    }

    /// Position in the annotator's order of the first unanswered item.
    fn cursor(&self, annotator: &str) -> Result<Option<usize>, CampaignError> {
        let answers = self.answers(annotator)?;
        Ok(self.orders[annotator].iter().position(|i| !answers.contains_key(i)))
    }

    pub fn next_item(&self, annotator: &str) -> Result<NextItem, CampaignError> {
        let answered = self.answers(annotator)?.len();
        Ok(match self.cursor(annotator)? {
            Some(pos) => NextItem::Item(self.items[self.orders[annotator][pos]].clone()),
            None => NextItem::Done(DoneMarker {
                done: true,
                answered,
                total: self.items.len(),
            }),
        })
    }

    /// Record a verdict. The item must be the annotator's current item or one
    /// they already answered; the record is on disk before this returns.
    pub fn submit(
        &mut self,
        annotator: &str,
        item_id: &str,
        choice: AbChoice,
    ) -> Result<SubmitAck, CampaignError> {
        let idx = *self
            .item_index
            .get(item_id)
            .ok_or_else(|| CampaignError::UnknownItem(item_id.to_string()))?;
        let superseded = self.answers(annotator)?.contains_key(&idx);
        if !superseded {
            let cursor = self.cursor(annotator)?;
            let current = cursor.map(|pos| self.orders[annotator][pos]);
            if current != Some(idx) {
                return Err(CampaignError::NotServed {
                    annotator: annotator.to_string(),
                    item_id: item_id.to_string(),
                });
            }
        }
        let gold_side = self.mapping.items[idx].gold_side;
        let verdict = Verdict {
            item_id: item_id.to_string(),
            annotator_id: annotator.to_string(),
            choice: choice.resolve(gold_side),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        };
        let mut line = serde_json::to_string(&verdict).expect("verdict serializes");
        line.push('\n');
        let path = self.dir.join(VERDICTS_FILE);
        self.log.write_all(line.as_bytes()).map_err(io_err(&path))?;
        self.log.flush().map_err(io_err(&path))?;
        self.log.sync_data().map_err(io_err(&path))?;

        let answers = self.latest.get_mut(annotator).expect("known annotator");
        answers.insert(idx, verdict);
        Ok(SubmitAck {
            item_id: item_id.to_string(),
            answered: answers.len(),
            total: self.items.len(),
            superseded,
        })
    }

    /// Latest verdict per item for one annotator, in item order.
    pub fn verdicts(&self, annotator: &str) -> Result<Vec<Verdict>, CampaignError> {
        Ok(self.answers(annotator)?.values().cloned().collect())
    }

    pub fn progress(&self) -> Progress {
        let annotators: Vec<AnnotatorProgress> = self
            .config
            .annotators
            .iter()
            .map(|a| AnnotatorProgress {
                annotator_id: a.id.clone(),
                answered: self.latest[&a.id].len(),
                total: self.items.len(),
            })
            .collect();
        let complete = annotators.iter().all(|p| p.answered == p.total);
        Progress {
            total_items: self.items.len(),
            annotators,
            complete,
        }
    }

    /// Full statistics. Without `partial`, every annotator must have answered
    /// every item; with it, only items answered by both are used.
    pub fn report(&self, partial: bool) -> Result<AdjudicationReport, CampaignError> {
        let ids: Vec<&str> = self.config.annotators.iter().map(|a| a.id.as_str()).collect();
        let (a1, a2) = (&self.latest[ids[0]], &self.latest[ids[1]]);
        if !partial {
            let missing = 2 * self.items.len() - a1.len() - a2.len();
            if missing > 0 {
                return Err(CampaignError::Incomplete { missing });
            }
        }
        let shared: Vec<usize> = a1.keys().filter(|k| a2.contains_key(k)).copied().collect();
        let v1: Vec<Verdict> = shared.iter().map(|k| a1[k].clone()).collect();
        let v2: Vec<Verdict> = shared.iter().map(|k| a2[k].clone()).collect();
        Ok(full_report((ids[0], &v1), (ids[1], &v2), &self.mapping)?)
    }
}
