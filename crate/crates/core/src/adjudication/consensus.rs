use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conllu::Genre;

use super::agreement::{paired, AgreementReport};
use super::{
    classify_error, cohen_kappa, AdjudicationError, Choice, SecretMapping, Source,
    TaxonomyCategory, Verdict,
};

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyRow {
    pub category: TaxonomyCategory,
    pub label: String,
    pub gold_errors: usize,
    pub gold_pct: f64,
    pub system_errors: usize,
    pub system_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelConfusion {
    pub wrong: String,
    pub correct: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenreBreakdown {
    pub genre: String,
    pub gold_better: usize,
    pub system_better: usize,
    pub total: usize,
    pub system_pct: f64,
}

impl GenreBreakdown {
    fn new(genre: String, gold_better: usize, system_better: usize) -> Self {
        let total = gold_better + system_better;
        Self {
            genre,
            gold_better,
            system_better,
            total,
            system_pct: pct(system_better, total),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub n_items: usize,
    pub unanimous: usize,
    pub unanimous_pct: f64,
    pub decided: usize,
    pub system_better: usize,
    pub system_better_pct: f64,
    pub gold_better: usize,
    pub gold_better_pct: f64,
    pub both_wrong: usize,
    pub undecidable: usize,
    pub dont_know: usize,
    pub disagreements: usize,
    pub taxonomy: Vec<TaxonomyRow>,
    /// Errors in the gold annotation (system judged better).
    pub gold_confusions: Vec<LabelConfusion>,
    /// Errors in the system annotation (gold judged better).
    pub system_confusions: Vec<LabelConfusion>,
    pub genres: Vec<GenreBreakdown>,
}

fn sorted_confusions(counts: BTreeMap<(String, String), usize>) -> Vec<LabelConfusion> {
    let mut out: Vec<LabelConfusion> = counts
        .into_iter()
        .map(|((wrong, correct), count)| LabelConfusion {
            wrong,
            correct,
            count,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| (&a.wrong, &a.correct).cmp(&(&b.wrong, &b.correct))));
    out
}

pub fn consensus_report(
    v1: &[Verdict],
    v2: &[Verdict],
    mapping: &SecretMapping,
) -> Result<ConsensusReport, AdjudicationError> {
    let pairs = paired(v1, v2)?;
    let n_items = pairs.len();
    let mut unanimous_counts: BTreeMap<Choice, usize> = BTreeMap::new();
    let mut disagreements = 0;
    let mut taxonomy: BTreeMap<(TaxonomyCategory, Source), usize> = BTreeMap::new();
    let mut confusions: BTreeMap<Source, BTreeMap<(String, String), usize>> = BTreeMap::new();
    let mut by_genre: BTreeMap<Option<Genre>, (usize, usize)> = BTreeMap::new();

    for (item_id, c1, c2) in &pairs {
        if c1 != c2 {
            disagreements += 1;
            continue;
        }
        *unanimous_counts.entry(*c1).or_default() += 1;
        let loser = match c1 {
            Choice::GoldBetter => Source::System,
            Choice::SystemBetter => Source::Gold,
            _ => continue,
        };
        let secret = mapping
            .get(item_id)
            .ok_or_else(|| AdjudicationError::UnknownItem(item_id.clone()))?;
        let genre = by_genre.entry(secret.genre).or_default();
        match loser {
            Source::System => genre.0 += 1,
            Source::Gold => genre.1 += 1,
        }
        for d in &secret.divergences {
            let category = classify_error(d, loser)?;
            *taxonomy.entry((category, loser)).or_default() += 1;
            if d.gold_deprel != d.system_deprel {
                let (wrong, correct) = match loser {
                    Source::Gold => (&d.gold_deprel, &d.system_deprel),
                    Source::System => (&d.system_deprel, &d.gold_deprel),
                };
                *confusions
                    .entry(loser)
                    .or_default()
                    .entry((wrong.clone(), correct.clone()))
                    .or_default() += 1;
            }
        }
    }

    let count = |c: Choice| unanimous_counts.get(&c).copied().unwrap_or(0);
    let unanimous: usize = unanimous_counts.values().sum();
    let gold_better = count(Choice::GoldBetter);
    let system_better = count(Choice::SystemBetter);
    let decided = gold_better + system_better;

    let tax = |c, s| taxonomy.get(&(c, s)).copied().unwrap_or(0);
    let gold_total: usize = TaxonomyCategory::ALL.iter().map(|&c| tax(c, Source::Gold)).sum();
    let system_total: usize = TaxonomyCategory::ALL.iter().map(|&c| tax(c, Source::System)).sum();
    let taxonomy_rows = if decided == 0 {
        Vec::new()
    } else {
        TaxonomyCategory::ALL
            .iter()
            .map(|&category| {
                let g = tax(category, Source::Gold);
                let s = tax(category, Source::System);
                TaxonomyRow {
                    category,
                    label: category.label().to_string(),
                    gold_errors: g,
                    gold_pct: pct(g, gold_total),
                    system_errors: s,
                    system_pct: pct(s, system_total),
                }
            })
            .collect()
    };

    let mut genres: Vec<GenreBreakdown> = by_genre
        .iter()
        .map(|(genre, &(g, s))| {
            let label = genre.map_or_else(|| "unlabeled".to_string(), |g| g.to_string());
            GenreBreakdown::new(label, g, s)
        })
        .collect();
    if decided > 0 {
        genres.push(GenreBreakdown::new("all".into(), gold_better, system_better));
    }

    Ok(ConsensusReport {
        n_items,
        unanimous,
        unanimous_pct: pct(unanimous, n_items),
        decided,
        system_better,
        system_better_pct: pct(system_better, decided),
        gold_better,
        gold_better_pct: pct(gold_better, decided),
        both_wrong: count(Choice::BothWrong),
        undecidable: count(Choice::Undecidable),
        dont_know: count(Choice::DontKnow),
        disagreements,
        taxonomy: taxonomy_rows,
        gold_confusions: sorted_confusions(confusions.remove(&Source::Gold).unwrap_or_default()),
        system_confusions: sorted_confusions(confusions.remove(&Source::System).unwrap_or_default()),
        genres,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorMarginals {
    pub annotator_id: String,
    pub total: usize,
    /// In `Choice::ALL` order.
    pub counts: Vec<(Choice, usize, f64)>,
}

impl AnnotatorMarginals {
    pub fn count(&self, choice: Choice) -> usize {
        self.counts
            .iter()
            .find(|(c, _, _)| *c == choice)
            .map_or(0, |(_, n, _)| *n)
    }
}

pub fn marginals(annotator_id: &str, verdicts: &[Verdict]) -> AnnotatorMarginals {
    let total = verdicts.len();
    let counts = Choice::ALL
        .iter()
        .map(|&c| {
            let n = verdicts.iter().filter(|v| v.choice == c).count();
            (c, n, pct(n, total))
        })
        .collect();
    AnnotatorMarginals {
        annotator_id: annotator_id.to_string(),
        total,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationReport {
    pub agreement: AgreementReport,
    pub consensus: ConsensusReport,
    pub marginals: Vec<AnnotatorMarginals>,
}

pub fn full_report(
    (id1, v1): (&str, &[Verdict]),
    (id2, v2): (&str, &[Verdict]),
    mapping: &SecretMapping,
) -> Result<AdjudicationReport, AdjudicationError> {
    Ok(AdjudicationReport {
        agreement: cohen_kappa(v1, v2)?,
        consensus: consensus_report(v1, v2, mapping)?,
        marginals: vec![marginals(id1, v1), marginals(id2, v2)],
    })
}

fn kappa_str(k: Option<f64>) -> String {
    k.map_or_else(|| "undefined".to_string(), |k| format!("{k:.3}"))
}

impl AdjudicationReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let c = &self.consensus;

        out.push_str("Verdicts per annotator\n");
        let _ = write!(out, "{:<16}", "");
        for m in &self.marginals {
            let _ = write!(out, "{:>16}", m.annotator_id);
        }
        out.push('\n');
        for choice in Choice::ALL {
            let _ = write!(out, "{:<16}", choice.label());
            for m in &self.marginals {
                let (_, n, p) = m.counts.iter().find(|(x, _, _)| *x == choice).copied().unwrap_or((choice, 0, 0.0));
                let _ = write!(out, "{:>9} {:>5.1}%", n, p);
            }
            out.push('\n');
        }

        let _ = writeln!(
            out,
            "\nConsensus: {}/{} unanimous ({:.1}%)",
            c.unanimous, c.n_items, c.unanimous_pct
        );
        let _ = writeln!(out, "  System better  {:>4} {:>5.1}%", c.system_better, c.system_better_pct);
        let _ = writeln!(out, "  Gold better    {:>4} {:>5.1}%", c.gold_better, c.gold_better_pct);
        let _ = writeln!(out, "  Decided        {:>4}", c.decided);
        let _ = writeln!(out, "  Both wrong     {:>4}", c.both_wrong);
        let _ = writeln!(out, "  Undecidable    {:>4}", c.undecidable);
        let _ = writeln!(out, "  Don't know     {:>4}", c.dont_know);
        let _ = writeln!(out, "  Disagreements  {:>4}", c.disagreements);

        if !c.taxonomy.is_empty() {
            out.push_str("\nError taxonomy      gold err.       system err.\n");
            for row in &c.taxonomy {
                let _ = writeln!(
                    out,
                    "  {:<22}{:>4} {:>5.1}%   {:>4} {:>5.1}%",
                    row.label, row.gold_errors, row.gold_pct, row.system_errors, row.system_pct
                );
            }
        }

        for (title, list) in [
            ("Gold errors (system correct)", &c.gold_confusions),
            ("System errors (gold correct)", &c.system_confusions),
        ] {
            if list.is_empty() {
                continue;
            }
            let _ = writeln!(out, "\n{title}");
            for lc in list.iter().take(10) {
                let _ = writeln!(out, "  {:<14} -> {:<14} {:>4}", lc.wrong, lc.correct, lc.count);
            }
        }

        if !c.genres.is_empty() {
            out.push_str("\nGenre          gold  system  total  system%\n");
            for g in &c.genres {
                let _ = writeln!(
                    out,
                    "  {:<12}{:>5}   {:>5}  {:>5}   {:>5.1}",
                    g.genre, g.gold_better, g.system_better, g.total, g.system_pct
                );
            }
        }

        out.push_str("\nAgreement       all categories   gold/system only\n");
        let (a, r) = (&self.agreement.all, &self.agreement.restricted);
        let _ = writeln!(out, "  items         {:>10}       {:>10}", a.n, r.n);
        let _ = writeln!(out, "  p_o           {:>10.3}       {:>10.3}", a.p_o, r.p_o);
        let _ = writeln!(out, "  p_e           {:>10.3}       {:>10.3}", a.p_e, r.p_e);
        let _ = writeln!(out, "  kappa         {:>10}       {:>10}", kappa_str(a.kappa), kappa_str(r.kappa));

        out.push_str("\nConfusion matrix (rows: first annotator)\n");
        let m = &a.matrix;
        let _ = write!(out, "{:<14}", "");
        for cat in &m.categories {
            let _ = write!(out, "{:>14}", cat.label());
        }
        let _ = writeln!(out, "{:>8}", "Total");
        for (i, cat) in m.categories.iter().enumerate() {
            let _ = write!(out, "{:<14}", cat.label());
            for cell in &m.cells[i] {
                let _ = write!(out, "{:>14}", cell);
            }
            let _ = writeln!(out, "{:>8}", m.row_totals[i]);
        }
        let _ = write!(out, "{:<14}", "Total");
        for t in &m.col_totals {
            let _ = write!(out, "{:>14}", t);
        }
        let _ = writeln!(out, "{:>8}", m.n);
        out
    }
}
