use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{Genre, Sentence, Treebank};

use super::{AdjudicationError, Divergence, ItemGroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindRow {
    pub id: usize,
    pub form: String,
    pub head: usize,
    pub deprel: String,
    pub divergent: bool,
}

/// Public item: nothing in it tells which option is the reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindItem {
    pub item_id: String,
    pub text: String,
    pub rows_a: Vec<BlindRow>,
    pub rows_b: Vec<BlindRow>,
}

/// Server-side record for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSecret {
    pub item_id: String,
    pub sent_id: String,
    pub gold_side: Side,
    pub genre: Option<Genre>,
    pub divergences: Vec<Divergence>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretMapping {
    pub items: Vec<ItemSecret>,
}

impl SecretMapping {
    pub fn get(&self, item_id: &str) -> Option<&ItemSecret> {
        self.items.iter().find(|i| i.item_id == item_id)
    }
}

fn rows(sentence: &Sentence, divergent: &BTreeSet<usize>) -> Vec<BlindRow> {
    sentence
        .tokens
        .iter()
        .map(|t| BlindRow {
            id: t.id,
            form: t.form.clone(),
            head: t.head,
            deprel: t.deprel.clone(),
            divergent: divergent.contains(&t.id),
        })
        .collect()
}

pub fn item_id(ordinal: usize) -> String {
    format!("item-{ordinal:04}")
}

/// Build the public items and the secret gold-side mapping. Each item's
/// gold side is an independent fair coin from a generator seeded with `seed`.
pub fn make_blind_items(
    groups: &[ItemGroup],
    gold: &Treebank,
    system: &Treebank,
    seed: u64,
) -> Result<(Vec<BlindItem>, SecretMapping), AdjudicationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sides: Vec<Side> = groups
        .iter()
        .map(|_| if rng.random_bool(0.5) { Side::A } else { Side::B })
        .collect();
    assemble(groups, gold, system, &sides)
}

fn lookup<'a>(map: &HashMap<&str, &'a Sentence>, id: &str) -> Result<&'a Sentence, AdjudicationError> {
    map.get(id)
        .copied()
        .ok_or_else(|| AdjudicationError::MissingSentence(id.to_string()))
}

fn assemble(
    groups: &[ItemGroup],
    gold: &Treebank,
    system: &Treebank,
    sides: &[Side],
) -> Result<(Vec<BlindItem>, SecretMapping), AdjudicationError> {
    let gold_by_id: HashMap<&str, &Sentence> =
        gold.sentences.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    let system_by_id: HashMap<&str, &Sentence> =
        system.sentences.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    let mut items = Vec::with_capacity(groups.len());
    let mut mapping = SecretMapping::default();

    for (i, (group, &gold_side)) in groups.iter().zip(sides).enumerate() {
        let g = lookup(&gold_by_id, &group.sent_id)?;
        let s = lookup(&system_by_id, &group.sent_id)?;
        let divergent: BTreeSet<usize> = group.divergences.iter().map(|d| d.token_id).collect();
        let gold_rows = rows(g, &divergent);
        let system_rows = rows(s, &divergent);
        let (rows_a, rows_b) = match gold_side {
            Side::A => (gold_rows, system_rows),
            Side::B => (system_rows, gold_rows),
        };
        let id = item_id(i + 1);
        items.push(BlindItem {
            item_id: id.clone(),
            text: g.display_text(),
            rows_a,
            rows_b,
        });
        mapping.items.push(ItemSecret {
            item_id: id,
            sent_id: group.sent_id.clone(),
            gold_side,
            genre: g.genre,
            divergences: group.divergences.clone(),
        });
    }
    Ok((items, mapping))
}
