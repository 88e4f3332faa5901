use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{strip_subtype, Genre, Treebank};
use crate::evaluation::align;

use super::{AdjudicationError, Source};

/// One token whose HEAD or DEPREL differs between gold and system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub sent_id: String,
    pub token_id: usize,
    pub form: String,
    pub gold_head: usize,
    pub gold_deprel: String,
    pub system_head: usize,
    pub system_deprel: String,
    pub genre: Option<Genre>,
}

impl Divergence {
    fn side(&self, source: Source) -> (usize, &str) {
        match source {
            Source::Gold => (self.gold_head, &self.gold_deprel),
            Source::System => (self.system_head, &self.system_deprel),
        }
    }
}

pub fn extract_divergences(
    gold: &Treebank,
    system: &Treebank,
) -> Result<Vec<Divergence>, AdjudicationError> {
    let mut out = Vec::new();
    for (g, s) in align(gold, system)? {
        for (gt, st) in g.tokens.iter().zip(&s.tokens) {
            if gt.head != st.head || gt.deprel != st.deprel {
                out.push(Divergence {
                    sent_id: g.sent_id.clone(),
                    token_id: gt.id,
                    form: gt.form.clone(),
                    gold_head: gt.head,
                    gold_deprel: gt.deprel.clone(),
                    system_head: st.head,
                    system_deprel: st.deprel.clone(),
                    genre: g.genre,
                });
            }
        }
    }
    Ok(out)
}

/// All divergences of one sentence: the unit shown to annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemGroup {
    pub sent_id: String,
    pub divergences: Vec<Divergence>,
}

/// Pick `n` divergent sentences with a seeded shuffle. The result keeps
/// document order.
pub fn sample_items(
    divergences: &[Divergence],
    n: usize,
    seed: u64,
) -> Result<Vec<ItemGroup>, AdjudicationError> {
    let mut groups: Vec<ItemGroup> = Vec::new();
    for d in divergences {
        match groups.last_mut() {
            Some(g) if g.sent_id == d.sent_id => g.divergences.push(d.clone()),
            _ => groups.push(ItemGroup {
                sent_id: d.sent_id.clone(),
                divergences: vec![d.clone()],
            }),
        }
    }
    if n > groups.len() {
        return Err(AdjudicationError::SampleTooLarge {
            requested: n,
            available: groups.len(),
        });
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut picked = order[..n].to_vec();
    picked.sort_unstable();
    let mut slots: Vec<Option<ItemGroup>> = groups.into_iter().map(Some).collect();
    Ok(picked
        .into_iter()
        .map(|i| slots[i].take().expect("indices are distinct"))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaxonomyCategory {
    WrongHeadAndRelation,
    SubtypeConfusion,
    WrongHeadOnly,
    WrongRelationOnly,
    HeadAndSubtype,
}

impl TaxonomyCategory {
    pub const ALL: [TaxonomyCategory; 5] = [
        TaxonomyCategory::WrongHeadAndRelation,
        TaxonomyCategory::SubtypeConfusion,
        TaxonomyCategory::WrongHeadOnly,
        TaxonomyCategory::WrongRelationOnly,
        TaxonomyCategory::HeadAndSubtype,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TaxonomyCategory::WrongHeadAndRelation => "Wrong head + relation",
            TaxonomyCategory::SubtypeConfusion => "Subtype confusion",
            TaxonomyCategory::WrongHeadOnly => "Wrong head only",
            TaxonomyCategory::WrongRelationOnly => "Wrong relation only",
            TaxonomyCategory::HeadAndSubtype => "Head + subtype",
        }
    }
}

/// Classify the losing side's analysis against the winning side's.
pub fn classify_error(d: &Divergence, loser: Source) -> Result<TaxonomyCategory, AdjudicationError> {
    let winner = match loser {
        Source::Gold => Source::System,
        Source::System => Source::Gold,
    };
    let (lost_head, lost_rel) = d.side(loser);
    let (won_head, won_rel) = d.side(winner);
    let head_differs = lost_head != won_head;
    let base_differs = strip_subtype(lost_rel) != strip_subtype(won_rel);
    let full_differs = lost_rel != won_rel;
    use TaxonomyCategory::*;
    Ok(match (head_differs, base_differs, full_differs) {
        (false, false, false) => {
            return Err(AdjudicationError::NotDivergent {
                sent_id: d.sent_id.clone(),
                token_id: d.token_id,
            })
        }
        (true, true, _) => WrongHeadAndRelation,
        (true, false, false) => WrongHeadOnly,
        (true, false, true) => HeadAndSubtype,
        (false, true, _) => WrongRelationOnly,
        (false, false, true) => SubtypeConfusion,
    })
}
