//! Train/test partitions of the rating edges.
//!
//! Only edges of the rating type are split; every other edge type stays in
//! the training graph. The training graph shares node vocabularies with the
//! input, so node indices mean the same thing on both sides.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::rng::named_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatingEdge {
    pub user: u32,
    pub item: u32,
    pub weight: Option<f64>,
}

#[derive(Debug)]
pub struct Split {
    pub fold: usize,
    pub rating_type: usize,
    pub train: HeteroGraph,
    pub test: Vec<RatingEdge>,
}

impl Split {
    /// Test items per user. With a threshold, only ratings strictly above it
    /// count as relevant.
    pub fn relevant(&self, threshold: Option<f64>) -> BTreeMap<u32, HashSet<u32>> {
        let mut out: BTreeMap<u32, HashSet<u32>> = BTreeMap::new();
        for e in &self.test {
            let keep = match (threshold, e.weight) {
                (Some(t), Some(w)) => w > t,
                (Some(_), None) => false,
                (None, _) => true,
            };
            if keep {
                out.entry(e.user).or_default().insert(e.item);
            }
        }
        out
    }

    /// Training items per user, used to exclude already seen items.
    pub fn seen(&self) -> BTreeMap<u32, HashSet<u32>> {
        let mut out: BTreeMap<u32, HashSet<u32>> = BTreeMap::new();
        let adj = self.train.adjacency(self.rating_type, crate::graph::Direction::Forward);
        for u in 0..adj.node_count() as u32 {
            let n = adj.neighbors(u);
            if !n.is_empty() {
                out.insert(u, n.iter().copied().collect());
            }
        }
        out
    }

    /// Hex SHA-256 of the sorted test `(user, item)` ids.
    pub fn fingerprint(&self) -> String {
        let (ut, it) = self.train.step_types(self.rating_type, crate::graph::Direction::Forward);
        let (uv, iv) = (self.train.vocab(ut), self.train.vocab(it));
        let mut pairs: Vec<(&str, &str)> = self
            .test
            .iter()
            .map(|e| (uv[e.user as usize].as_str(), iv[e.item as usize].as_str()))
            .collect();
        pairs.sort_unstable();
        let mut h = Sha256::new();
        for (u, i) in pairs {
            h.update(u.as_bytes());
            h.update([0x1f]);
            h.update(i.as_bytes());
            h.update([0x1e]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn shuffled(graph: &HeteroGraph, rating_type: &str, seed: u64) -> Result<(usize, Vec<usize>)> {
    let et = graph.schema().edge_type_index(rating_type)?;
    let n = graph.edge_count(rating_type)?;
    if n == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut named_rng(seed, "split"));
    Ok((et, order))
}

fn make_split(graph: &HeteroGraph, et: usize, fold: usize, test_idx: &[usize]) -> Split {
    let mut is_test = vec![false; graph.edge_table(et).len()];
    for &i in test_idx {
        is_test[i] = true;
    }
    let mut sorted = test_idx.to_vec();
    sorted.sort_unstable();
    let test = sorted
        .into_iter()
        .map(|i| {
            let (user, item, weight) = graph.edge_at(et, i);
            RatingEdge { user, item, weight }
        })
        .collect();
    let train = graph.filter_edges(|t, i| t != et || !is_test[i]);
    Split {
        fold,
        rating_type: et,
        train,
        test,
    }
}

/// Seeded random holdout: `round(train_frac * n)` rating edges train, the
/// rest test.
pub fn holdout(graph: &HeteroGraph, rating_type: &str, train_frac: f64, seed: u64) -> Result<Split> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(Error::InvalidParameter(format!("train fraction {train_frac} outside [0, 1]")));
    }
    let (et, order) = shuffled(graph, rating_type, seed)?;
    let n_train = (train_frac * order.len() as f64).round() as usize;
    Ok(make_split(graph, et, 0, &order[n_train..]))
}

/// Seeded k-fold cross-validation. After one shuffle the rating edges are cut
/// into `k` contiguous chunks; fold `i` tests on chunk `i`.
pub fn kfold(graph: &HeteroGraph, rating_type: &str, k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k-fold needs k >= 2, got {k}")));
    }
    let (et, order) = shuffled(graph, rating_type, seed)?;
    let n = order.len();
    if k > n {
        return Err(Error::InvalidParameter(format!("{k} folds for {n} rating edges")));
    }
    Ok((0..k)
        .map(|f| make_split(graph, et, f, &order[f * n / k..(f + 1) * n / k]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, DuplicatePolicy, EdgeRecord};
    use crate::schema::NetworkSchema;
    use proptest::prelude::*;

    fn graph(n_users: usize, n_items: usize) -> HeteroGraph {
        let s = NetworkSchema::parse("[nodes]\nuser\nmovie\ngenre\n[edges]\num user movie weighted(1,5)\nmg movie genre\n").unwrap();
        let mut recs: Vec<EdgeRecord> = Vec::new();
        for u in 0..n_users {
            for m in 0..n_items {
                if (u * 7 + m * 3) % 4 != 0 {
                    recs.push(("um".into(), format!("u{u}"), format!("m{m}"), Some(((u + m) % 5 + 1) as f64)));
                }
            }
        }
        for m in 0..n_items {
            recs.push(("mg".into(), format!("m{m}"), "g0".into(), None));
        }
        load_graph(s, recs, DuplicatePolicy::Reject).unwrap()
    }

    #[test]
    fn holdout_sizes_and_other_types_kept() {
        let g = graph(6, 5);
        let n = g.edge_count("um").unwrap();
        let s = holdout(&g, "um", 0.8, 3).unwrap();
        assert_eq!(s.train.edge_count("um").unwrap(), (0.8 * n as f64).round() as usize);
        assert_eq!(s.test.len() + s.train.edge_count("um").unwrap(), n);
        assert_eq!(s.train.edge_count("mg").unwrap(), 5);
        assert!(holdout(&g, "um", 1.5, 3).is_err());
    }

    #[test]
    fn threshold_is_strict() {
        let g = graph(6, 5);
        let s = holdout(&g, "um", 0.0, 1).unwrap();
        let all: usize = s.relevant(None).values().map(HashSet::len).sum();
        let above: usize = s.relevant(Some(3.0)).values().map(HashSet::len).sum();
        let expected = s.test.iter().filter(|e| e.weight.unwrap() > 3.0).count();
        assert_eq!(all, s.test.len());
        assert_eq!(above, expected);
    }

    #[test]
    fn fingerprints_replay() {
        let g = graph(5, 5);
        let a: Vec<String> = kfold(&g, "um", 5, 11).unwrap().iter().map(Split::fingerprint).collect();
        let b: Vec<String> = kfold(&g, "um", 5, 11).unwrap().iter().map(Split::fingerprint).collect();
        let c: Vec<String> = kfold(&g, "um", 5, 12).unwrap().iter().map(Split::fingerprint).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn five_folds_partition_exactly(users in 2usize..9, items in 3usize..9, seed in any::<u64>()) {
            let g = graph(users, items);
            let n = g.edge_count("um").unwrap();
            prop_assume!(n >= 5);
            let folds = kfold(&g, "um", 5, seed).unwrap();
            let mut seen = vec![0usize; n];
            let et = g.schema().edge_type_index("um").unwrap();
            let lookup: std::collections::HashMap<(u32, u32), usize> =
                (0..n).map(|i| { let (u, m, _) = g.edge_at(et, i); ((u, m), i) }).collect();
            for f in &folds {
                prop_assert!(f.test.len() == n / 5 || f.test.len() == n / 5 + 1);
                prop_assert_eq!(f.train.edge_count("um").unwrap() + f.test.len(), n);
                for e in &f.test {
                    seen[lookup[&(e.user, e.item)]] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
