//! Top-k ranking metrics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_K: usize = 10;

/// Produces a score for every item for a given user index.
pub trait Recommender: Sync {
    fn score_items(&self, user: u32) -> Vec<f64>;
}

impl<F: Fn(u32) -> Vec<f64> + Sync> Recommender for F {
    fn score_items(&self, user: u32) -> Vec<f64> {
        self(user)
    }
}

/// The `k` best `(index, score)` pairs, highest score first; equal scores
/// rank by ascending index. Indices for which `exclude` holds are skipped.
pub fn top_k(scores: &[f64], k: usize, exclude: impl Fn(u32) -> bool) -> Vec<(u32, f64)> {
    let mut cand: Vec<(u32, f64)> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (i as u32, s))
        .filter(|&(i, _)| !exclude(i))
        .collect();
    let order = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, order);
        cand.truncate(k);
    }
    cand.sort_unstable_by(order);
    cand
}

fn hits(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> usize {
    ranked.iter().take(k).filter(|i| relevant.contains(i)).count()
}

/// Hits among the first `k` ranked items divided by `k`.
pub fn precision_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Ok(hits(ranked, relevant, k) as f64 / k as f64)
}

/// Hits among the first `k` ranked items divided by the number of relevant
/// items. Undefined when nothing is relevant.
pub fn recall_at_k(ranked: &[u32], relevant: &HashSet<u32>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if relevant.is_empty() {
        return Err(Error::InvalidParameter("recall needs at least one relevant item".into()));
    }
    Ok(hits(ranked, relevant, k) as f64 / relevant.len() as f64)
}

/// Mean precision and recall at `k = 1..=max_k`, averaged over users.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub users: usize,
}

impl MetricCurve {
    pub fn max_k(&self) -> usize {
        self.precision.len()
    }

    pub fn recall_at(&self, k: usize) -> f64 {
        self.recall[k - 1]
    }

    pub fn precision_at(&self, k: usize) -> f64 {
        self.precision[k - 1]
    }
}

/// Ranks the items of every user in `relevant` (users with no relevant item
/// are skipped), excluding that user's `seen` items, and averages the
/// metrics. Per-user work runs on the rayon pool; the reduction is ordered.
pub fn evaluate(
    rec: &dyn Recommender,
    relevant: &BTreeMap<u32, HashSet<u32>>,
    seen: &BTreeMap<u32, HashSet<u32>>,
    max_k: usize,
) -> Result<MetricCurve> {
    if max_k == 0 {
        return Err(Error::InvalidParameter("max_k must be at least 1".into()));
    }
    let users: Vec<(&u32, &HashSet<u32>)> = relevant.iter().filter(|(_, r)| !r.is_empty()).collect();
    let empty = HashSet::new();
    let per_user: Vec<(Vec<f64>, Vec<f64>)> = users
        .par_iter()
        .map(|(&u, rel)| {
            let scores = rec.score_items(u);
            let s = seen.get(&u).unwrap_or(&empty);
            let ranked: Vec<u32> = top_k(&scores, max_k, |i| s.contains(&i)).into_iter().map(|(i, _)| i).collect();
            let mut p = Vec::with_capacity(max_k);
            let mut r = Vec::with_capacity(max_k);
            for k in 1..=max_k {
                let h = hits(&ranked, rel, k) as f64;
                p.push(h / k as f64);
                r.push(h / rel.len() as f64);
            }
            (p, r)
        })
        .collect();
    let n = per_user.len();
    let mut precision = vec![0.0; max_k];
    let mut recall = vec![0.0; max_k];
    for (p, r) in &per_user {
        for k in 0..max_k {
            precision[k] += p[k];
            recall[k] += r[k];
        }
    }
    if n > 0 {
        for k in 0..max_k {
            precision[k] /= n as f64;
            recall[k] /= n as f64;
        }
    }
    Ok(MetricCurve {
        precision,
        recall,
        users: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub algo: String,
    pub fold: usize,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Per-fold metric rows plus a per-algorithm mean over folds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn push_curve(&mut self, algo: &str, fold: usize, curve: &MetricCurve) {
        for k in 1..=curve.max_k() {
            self.rows.push(EvalRow {
                algo: algo.to_string(),
                fold,
                k,
                precision: curve.precision_at(k),
                recall: curve.recall_at(k),
            });
        }
    }

    /// Mean over folds per `(algo, k)`, algorithms in first-seen order.
    pub fn summary(&self) -> Vec<EvalRow> {
        let mut order: Vec<&str> = Vec::new();
        let mut acc: BTreeMap<(&str, usize), (f64, f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            if !order.contains(&r.algo.as_str()) {
                order.push(&r.algo);
            }
            let e = acc.entry((&r.algo, r.k)).or_default();
            e.0 += r.precision;
            e.1 += r.recall;
            e.2 += 1;
        }
        let mut out = Vec::new();
        for algo in order {
            for (&(a, k), &(p, r, n)) in acc.range((algo, 0)..=(algo, usize::MAX)) {
                out.push(EvalRow {
                    algo: a.to_string(),
                    fold: 0,
                    k,
                    precision: p / n as f64,
                    recall: r / n as f64,
                });
            }
        }
        out
    }

    /// CSV with columns `algo,fold,k,precision,recall`; summary rows carry
    /// `mean` in the fold column. `stamp` lines are written first as
    /// `# ` comments.
    pub fn to_csv(&self, stamp: &[String]) -> String {
        let mut out = String::new();
        for s in stamp {
            let _ = writeln!(out, "# {s}");
        }
        out.push_str("algo,fold,k,precision,recall\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{:.6},{:.6}", r.algo, r.fold, r.k, r.precision, r.recall);
        }
        for r in self.summary() {
            let _ = writeln!(out, "{},mean,{},{:.6},{:.6}", r.algo, r.k, r.precision, r.recall);
        }
        out
    }
}
