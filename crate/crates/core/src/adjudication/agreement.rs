use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AdjudicationError, Choice, Verdict};

/// Rows are annotator 1, columns annotator 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<Choice>,
    pub cells: Vec<Vec<usize>>,
    pub row_totals: Vec<usize>,
    pub col_totals: Vec<usize>,
    pub n: usize,
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: &[(Choice, Choice)], categories: &[Choice]) -> Self {
        let k = categories.len();
        let pos = |c: Choice| categories.iter().position(|&x| x == c);
        let mut cells = vec![vec![0; k]; k];
        for &(a, b) in pairs {
            if let (Some(i), Some(j)) = (pos(a), pos(b)) {
                cells[i][j] += 1;
            }
        }
        Self::from_cells(categories.to_vec(), cells)
    }

    pub fn from_cells(categories: Vec<Choice>, cells: Vec<Vec<usize>>) -> Self {
        let k = categories.len();
        let row_totals: Vec<usize> = cells.iter().map(|r| r.iter().sum()).collect();
        let col_totals: Vec<usize> = (0..k).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
        let n = row_totals.iter().sum();
        Self {
            categories,
            cells,
            row_totals,
            col_totals,
            n,
        }
    }

    pub fn transpose(&self) -> Self {
        let k = self.categories.len();
        let cells = (0..k)
            .map(|i| (0..k).map(|j| self.cells[j][i]).collect())
            .collect();
        Self::from_cells(self.categories.clone(), cells)
    }

    pub fn diagonal(&self) -> usize {
        (0..self.categories.len()).map(|i| self.cells[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub n: usize,
    pub p_o: f64,
    pub p_e: f64,
    /// `None` when undefined (no items, or expected agreement of 1).
    pub kappa: Option<f64>,
    pub matrix: ConfusionMatrix,
}

impl AgreementStats {
    /// Unweighted Cohen's kappa: `(p_o - p_e) / (1 - p_e)` with `p_e` the sum
    /// of marginal products.
    pub fn from_matrix(matrix: ConfusionMatrix) -> Self {
        if matrix.n == 0 {
            return Self {
                n: 0,
                p_o: 0.0,
                p_e: 0.0,
                kappa: None,
                matrix,
            };
        }
        let n = matrix.n as f64;
        let p_o = matrix.diagonal() as f64 / n;
        let p_e: f64 = matrix
            .row_totals
            .iter()
            .zip(&matrix.col_totals)
            .map(|(&r, &c)| (r as f64 / n) * (c as f64 / n))
            .sum();
        let kappa = if (1.0 - p_e).abs() < 1e-12 {
            None
        } else {
            Some((p_o - p_e) / (1.0 - p_e))
        };
        Self {
            n: matrix.n,
            p_o,
            p_e,
            kappa,
            matrix,
        }
    }
}

/// Agreement over `pairs`, keeping only pairs whose two choices both fall in
/// `categories`.
pub fn agreement(pairs: &[(Choice, Choice)], categories: &[Choice]) -> AgreementStats {
    let kept: Vec<(Choice, Choice)> = pairs
        .iter()
        .copied()
        .filter(|(a, b)| categories.contains(a) && categories.contains(b))
        .collect();
    AgreementStats::from_matrix(ConfusionMatrix::from_pairs(&kept, categories))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// All five categories.
    pub all: AgreementStats,
    /// Only items where both annotators chose gold-better or system-better.
    pub restricted: AgreementStats,
}

pub(crate) fn by_item(verdicts: &[Verdict]) -> Result<BTreeMap<&str, Choice>, AdjudicationError> {
    let mut map = BTreeMap::new();
    for v in verdicts {
        if map.insert(v.item_id.as_str(), v.choice).is_some() {
            return Err(AdjudicationError::DuplicateVerdict {
                annotator: v.annotator_id.clone(),
                item_id: v.item_id.clone(),
            });
        }
    }
    Ok(map)
}

/// Pair two annotators' verdicts by item, in item-id order.
pub(crate) fn paired(
    v1: &[Verdict],
    v2: &[Verdict],
) -> Result<Vec<(String, Choice, Choice)>, AdjudicationError> {
    let a = by_item(v1)?;
    let b = by_item(v2)?;
    let ka: BTreeSet<&str> = a.keys().copied().collect();
    let kb: BTreeSet<&str> = b.keys().copied().collect();
    if ka != kb {
        let only: Vec<&str> = ka.symmetric_difference(&kb).take(5).copied().collect();
        return Err(AdjudicationError::MismatchedItems(format!(
            "e.g. {}",
            only.join(", ")
        )));
    }
    Ok(a.iter().map(|(id, &c1)| (id.to_string(), c1, b[id])).collect())
}

pub fn cohen_kappa(v1: &[Verdict], v2: &[Verdict]) -> Result<AgreementReport, AdjudicationError> {
    let pairs: Vec<(Choice, Choice)> = paired(v1, v2)?.into_iter().map(|(_, a, b)| (a, b)).collect();
    Ok(AgreementReport {
        all: agreement(&pairs, &Choice::ALL),
        restricted: agreement(&pairs, &[Choice::GoldBetter, Choice::SystemBetter]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdicts(annotator: &str, choices: &[Choice]) -> Vec<Verdict> {
        choices
            .iter()
            .enumerate()
            .map(|(i, &c)| Verdict::new(format!("i{i}"), annotator, c))
            .collect()
    }

    #[test]
    fn perfect_agreement_is_one() {
        let c = [Choice::GoldBetter, Choice::SystemBetter, Choice::GoldBetter, Choice::DontKnow];
        let r = cohen_kappa(&verdicts("a", &c), &verdicts("b", &c)).unwrap();
        assert_eq!(r.all.p_o, 1.0);
        assert!((r.all.kappa.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.restricted.n, 3);
    }

    #[test]
    fn single_category_kappa_is_undefined() {
        let c = [Choice::GoldBetter; 4];
        let r = cohen_kappa(&verdicts("a", &c), &verdicts("b", &c)).unwrap();
        assert_eq!(r.all.p_e, 1.0);
        assert_eq!(r.all.kappa, None);
    }

    #[test]
    fn small_hand_example() {
        // 2x2: [[2,1],[0,1]] -> p_o = 3/4, p_e = (3*2 + 1*2)/16 = 1/2, kappa = 1/2
        let a = [Choice::GoldBetter, Choice::GoldBetter, Choice::GoldBetter, Choice::SystemBetter];
        let b = [Choice::GoldBetter, Choice::GoldBetter, Choice::SystemBetter, Choice::SystemBetter];
        let r = cohen_kappa(&verdicts("a", &a), &verdicts("b", &b)).unwrap();
        assert_eq!(r.all.p_o, 0.75);
        assert_eq!(r.all.p_e, 0.5);
        assert_eq!(r.all.kappa, Some(0.5));
    }

    #[test]
    fn mismatched_and_duplicate_items() {
        let a = verdicts("a", &[Choice::GoldBetter, Choice::GoldBetter]);
        let b = verdicts("b", &[Choice::GoldBetter]);
        assert!(matches!(cohen_kappa(&a, &b), Err(AdjudicationError::MismatchedItems(_))));
        let mut dup = a.clone();
        dup.push(Verdict::new("i0", "a", Choice::DontKnow));
        assert!(matches!(
            cohen_kappa(&dup, &a),
            Err(AdjudicationError::DuplicateVerdict { .. })
        ));
    }

    #[test]
    fn empty_restricted_set() {
        let c = [Choice::DontKnow, Choice::BothWrong];
        let r = cohen_kappa(&verdicts("a", &c), &verdicts("b", &c)).unwrap();
        assert_eq!(r.restricted.n, 0);
        assert_eq!(r.restricted.kappa, None);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn choice() -> impl Strategy<Value = Choice> {
            prop::sample::select(Choice::ALL.to_vec())
        }

        proptest! {
            #[test]
            fn kappa_is_symmetric_and_bounded(pairs in prop::collection::vec((choice(), choice()), 1..80)) {
                let forward = agreement(&pairs, &Choice::ALL);
                let swapped: Vec<_> = pairs.iter().map(|&(a, b)| (b, a)).collect();
                let backward = agreement(&swapped, &Choice::ALL);
                prop_assert_eq!(&forward.matrix.transpose(), &backward.matrix);
                prop_assert!((0.0..=1.0).contains(&forward.p_o));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&forward.p_e));
                prop_assert_eq!(forward.matrix.n, pairs.len());
                match (forward.kappa, backward.kappa) {
                    (Some(a), Some(b)) => {
                        prop_assert!((a - b).abs() < 1e-12);
                        prop_assert!(a <= 1.0 + 1e-12);
                    }
                    (None, None) => {}
                    other => prop_assert!(false, "asymmetric definedness {:?}", other),
                }
            }
        }
    }
}
