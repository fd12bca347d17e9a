//! Relation pruning by normalized information gain (NIG).
//!
//! A relation's NIG is its average row specificity:
//!
//! ```text
//! nig = 1 - mean_u H(p_u) / ln(N_d)
//! ```
//!
//! where `p_u` is row `u`'s count distribution over destinations, `H` is
//! Shannon entropy and `N_d` the size of the destination universe. Rows
//! concentrated on one destination score 1, rows spread evenly over every
//! destination score 0. Empty rows are skipped.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::relation::RelationMatrix;

pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct NigScore {
    pub label: String,
    pub value: f64,
    /// Destination universe smaller than 2; the score is fixed at 0.
    pub degenerate: bool,
}

pub fn nig(r: &RelationMatrix) -> Result<NigScore> {
    if r.is_empty() {
        return Err(Error::EmptyRelation(r.label().to_string()));
    }
    let n_dst = r.dst_vocab.len();
    if n_dst < 2 {
        return Ok(NigScore {
            label: r.label().to_string(),
            value: 0.0,
            degenerate: true,
        });
    }
    let log_n = (n_dst as f64).ln();
    let mut sum = 0.0;
    for (_, row) in r.rows() {
        let total: f64 = row.iter().map(|(_, c)| c).sum();
        let h: f64 = row
            .iter()
            .map(|&(_, c)| {
                let p = c / total;
                -p * p.ln()
            })
            .sum();
        sum += h / log_n;
    }
    let value = (1.0 - sum / r.rows().len() as f64).clamp(0.0, 1.0);
    Ok(NigScore {
        label: r.label().to_string(),
        value,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PruningPolicy {
    /// Keep relations scoring at least `tau`.
    Threshold(f64),
    /// Keep the `m` highest-scoring relations.
    KeepTop(usize),
}

impl Default for PruningPolicy {
    fn default() -> Self {
        PruningPolicy::Threshold(DEFAULT_THRESHOLD)
    }
}

impl PruningPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PruningPolicy::Threshold(t) if !(0.0..=1.0).contains(&t) => {
                Err(Error::InvalidParameter(format!("threshold {t} outside [0, 1]")))
            }
            PruningPolicy::KeepTop(0) => Err(Error::InvalidParameter("keep-top m must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneDecision {
    pub label: String,
    pub score: f64,
    pub kept: bool,
    pub target: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PruningReport {
    pub decisions: Vec<PruneDecision>,
}

impl PruningReport {
    /// `label<TAB>score<TAB>kept|pruned` per relation.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for d in &self.decisions {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{}",
                d.label,
                d.score,
                if d.kept { "kept" } else { "pruned" }
            );
        }
        out
    }

    pub fn pruned(&self) -> impl Iterator<Item = &str> {
        self.decisions.iter().filter(|d| !d.kept).map(|d| d.label.as_str())
    }
}

/// Scores every relation and drops the uninformative ones. The relation
/// labelled `target` is always kept. Retained relations and the report are
/// ordered by label, so the outcome does not depend on input order.
pub fn prune_relations(
    rels: Vec<RelationMatrix>,
    policy: PruningPolicy,
    target: Option<&str>,
) -> Result<(Vec<RelationMatrix>, PruningReport)> {
    policy.validate()?;
    if rels.is_empty() {
        return Err(Error::InvalidParameter("no relations to prune".into()));
    }
    let mut scored: Vec<(f64, RelationMatrix)> = rels
        .into_iter()
        .map(|r| {
            let s = match nig(&r) {
                Ok(s) => s.value,
                Err(Error::EmptyRelation(_)) => 0.0,
                Err(e) => return Err(e),
            };
            Ok((s, r))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.1.label().cmp(b.1.label()));

    let is_target = |r: &RelationMatrix| Some(r.label()) == target;
    let keep: Vec<bool> = match policy {
        PruningPolicy::Threshold(tau) => scored.iter().map(|(s, r)| is_target(r) || *s >= tau).collect(),
        PruningPolicy::KeepTop(m) => {
            let mut order: Vec<usize> = (0..scored.len()).filter(|&i| !is_target(&scored[i].1)).collect();
            order.sort_by(|&a, &b| {
                scored[b]
                    .0
                    .total_cmp(&scored[a].0)
                    .then_with(|| scored[a].1.label().cmp(scored[b].1.label()))
            });
            let mut keep: Vec<bool> = scored.iter().map(|(_, r)| is_target(r)).collect();
            for &i in order.iter().take(m) {
                keep[i] = true;
            }
            keep
        }
    };

    let mut report = PruningReport::default();
    let mut retained = Vec::new();
    for ((score, r), kept) in scored.into_iter().zip(keep) {
        report.decisions.push(PruneDecision {
            label: r.label().to_string(),
            score,
            kept,
            target: is_target(&r),
        });
        if kept {
            retained.push(r);
        }
    }
    Ok((retained, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::{GenerationMethod, Provenance};
    use crate::schema::NodeTypeId;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn vocab(n: usize) -> Arc<Vec<String>> {
        Arc::new((0..n).map(|i| format!("n{i}")).collect())
    }

    fn relation(label: &str, n_dst: usize, rows: Vec<(u32, Vec<(u32, f64)>)>) -> RelationMatrix {
        RelationMatrix::from_rows(
            NodeTypeId::new("user").unwrap(),
            NodeTypeId::new("item").unwrap(),
            vocab(rows.len().max(1) + 10),
            vocab(n_dst),
            rows,
            Provenance {
                label: label.into(),
                metapath: String::new(),
                method: GenerationMethod::Full,
                walks_per_start: None,
                seed: None,
                failures: 0,
                source: "test".into(),
            },
        )
    }

    #[test]
    fn single_destination_rows_score_one() {
        let r = relation("x", 5, vec![(0, vec![(1, 3.0)]), (1, vec![(4, 1.0)])]);
        assert_eq!(nig(&r).unwrap().value, 1.0);
    }

    #[test]
    fn uniform_rows_score_zero() {
        let full: Vec<(u32, f64)> = (0..4).map(|d| (d, 2.0)).collect();
        let r = relation("x", 4, vec![(0, full.clone()), (3, full)]);
        assert!(nig(&r).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn half_spread_row() {
        // one row uniform over 2 of 4 destinations: 1 - ln2/ln4
        let r = relation("x", 4, vec![(0, vec![(0, 1.0), (2, 1.0)])]);
        assert!((nig(&r).unwrap().value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_and_degenerate() {
        let r = relation("x", 4, vec![]);
        assert!(matches!(nig(&r), Err(Error::EmptyRelation(_))));
        let r = relation("x", 1, vec![(0, vec![(0, 1.0)])]);
        let s = nig(&r).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.value, 0.0);
    }

    fn scored(label: &str, value_rows: usize) -> RelationMatrix {
        // `value_rows` destinations per row out of 16 gives a known score
        let row: Vec<(u32, f64)> = (0..value_rows as u32).map(|d| (d, 1.0)).collect();
        relation(label, 16, vec![(0, row)])
    }

    #[test]
    fn threshold_prunes_low_scores() {
        // scores 1 - ln(k)/ln(16): k=1 -> 1.0, k=16 -> 0.0, k=2 -> 0.75
        let rels = vec![scored("a", 1), scored("b", 16), scored("c", 2)];
        let (kept, report) = prune_relations(rels, PruningPolicy::Threshold(0.1), None).unwrap();
        let labels: Vec<_> = kept.iter().map(|r| r.label().to_string()).collect();
        assert_eq!(labels, ["a", "c"]);
        assert_eq!(report.pruned().collect::<Vec<_>>(), ["b"]);
        assert!(report.to_tsv().contains("b\t0.000000\tpruned"));
    }

    #[test]
    fn nothing_pruned_when_all_above() {
        let rels = vec![scored("a", 1), scored("c", 2)];
        let (kept, _) = prune_relations(rels, PruningPolicy::Threshold(0.1), None).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn target_is_never_pruned() {
        let rels = vec![scored("target", 16), scored("a", 1)];
        let (kept, _) = prune_relations(rels.clone(), PruningPolicy::Threshold(0.5), Some("target")).unwrap();
        assert_eq!(kept.len(), 2);
        let (kept, _) = prune_relations(rels, PruningPolicy::KeepTop(1), Some("target")).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn keep_top_breaks_ties_by_label() {
        let rels = vec![scored("z", 2), scored("y", 2), scored("x", 16)];
        let (kept, _) = prune_relations(rels, PruningPolicy::KeepTop(1), None).unwrap();
        assert_eq!(kept[0].label(), "y");
    }

    #[test]
    fn invalid_policies() {
        assert!(prune_relations(vec![scored("a", 1)], PruningPolicy::Threshold(1.5), None).is_err());
        assert!(prune_relations(vec![scored("a", 1)], PruningPolicy::KeepTop(0), None).is_err());
        assert!(prune_relations(vec![], PruningPolicy::default(), None).is_err());
    }

    #[test]
    fn genre_like_scores_below_actor_like() {
        // 20 users; genre-like: 10 genres, each user touches all of them
        // almost evenly. actor-like: 500 actors, each user touches 12.
        let genre_rows = (0..20u32)
            .map(|u| (u, (0..10u32).map(|k| ((u + k) % 10, 1.0 + (k % 2) as f64)).collect()))
            .collect();
        let actor_rows = (0..20u32)
            .map(|u| (u, (0..12u32).map(|k| ((u * 25 + k) % 500, 1.0)).collect()))
            .collect();
        let genre = relation("umg", 10, genre_rows);
        let actor = relation("uma", 500, actor_rows);
        let g = nig(&genre).unwrap().value;
        let a = nig(&actor).unwrap().value;
        assert!(g < a, "{g} vs {a}");
        let (_, report) = prune_relations(vec![actor, genre], PruningPolicy::Threshold(DEFAULT_THRESHOLD), None).unwrap();
        assert_eq!(report.pruned().collect::<Vec<_>>(), ["umg"]);
    }

    fn arb_rows() -> impl Strategy<Value = Vec<(u32, Vec<(u32, f64)>)>> {
        prop::collection::vec(
            (0u32..30, prop::collection::vec((0u32..12, 0.5f64..20.0), 1..10)),
            1..15,
        )
    }

    proptest! {
        #[test]
        fn in_unit_interval(rows in arb_rows()) {
            let s = nig(&relation("p", 12, rows)).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn destination_relabeling_is_invariant(rows in arb_rows(), shift in 1u32..12) {
            let moved = rows
                .iter()
                .map(|(s, r)| (*s, r.iter().map(|&(d, c)| ((d + shift) % 12, c)).collect()))
                .collect();
            let a = nig(&relation("p", 12, rows)).unwrap().value;
            let b = nig(&relation("p", 12, moved)).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn spreading_never_increases(k in 1u32..11, mass in 1.0f64..50.0) {
            let row = |n: u32| vec![(0u32, (0..n).map(|d| (d, mass / n as f64)).collect::<Vec<_>>())];
            let a = nig(&relation("p", 12, row(k))).unwrap().value;
            let b = nig(&relation("p", 12, row(k + 1))).unwrap().value;
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn order_independent(perm in Just(()).prop_perturb(|_, mut rng| {
            let mut v = vec![0usize, 1, 2, 3];
            for i in (1..v.len()).rev() {
                let j = (rng.next_u32() as usize) % (i + 1);
                v.swap(i, j);
            }
            v
        })) {
            let base = vec![scored("a", 1), scored("b", 16), scored("c", 2), scored("d", 2)];
            let shuffled: Vec<_> = perm.iter().map(|&i| base[i].clone()).collect();
            let (k1, r1) = prune_relations(base, PruningPolicy::KeepTop(2), None).unwrap();
            let (k2, r2) = prune_relations(shuffled, PruningPolicy::KeepTop(2), None).unwrap();
            prop_assert_eq!(k1, k2);
            prop_assert_eq!(r1, r2);
        }
    }
}
