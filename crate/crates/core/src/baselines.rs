//! Random-walk and diffusion rankers on the binary user-item graph.
//!
//! All three rankers score user `u` as `c_u * sum_{j in N(u)} M[j][i]` for an
//! item-item matrix `M` built from two hops through the users:
//!
//! * P3-alpha: `c_u = k_u^-a`, `M[j][i] = k_j^-a * sum_v k_v^-a a_vj a_vi`,
//!   i.e. three transition probabilities each raised to `a`.
//! * RP3-beta: the P3-alpha matrix divided by `k_i^b`.
//! * HeatS/ProbS hybrid: `c_u = 1`,
//!   `M[j][i] = sum_v a_vi a_vj / k_v / (k_i^(1-l) k_j^l)`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{evaluate, Recommender};
use crate::graph::{Direction, HeteroGraph, Vocab};

/// Training positives as an unweighted bipartite graph. Only users and items
/// with at least one edge are kept; positions are compact and map back to
/// graph indices.
#[derive(Clone, Debug)]
pub struct BipartiteRatings {
    pub users: Vec<u32>,
    pub items: Vec<u32>,
    user_items: Vec<Vec<u32>>,
    item_users: Vec<Vec<u32>>,
    user_pos: Vec<Option<u32>>,
    item_pos: Vec<Option<u32>>,
    pub user_vocab: Option<Vocab>,
    pub item_vocab: Option<Vocab>,
}

impl BipartiteRatings {
    /// Builds from `(user, item)` index pairs over universes of the given
    /// sizes. Repeated pairs count once.
    pub fn from_pairs(n_users: usize, n_items: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n_users];
        for (u, i) in pairs {
            if u as usize >= n_users || i as usize >= n_items {
                return Err(Error::InvalidParameter(format!("pair ({u}, {i}) outside {n_users}x{n_items}")));
            }
            adj[u as usize].push(i);
        }
        let mut item_pos = vec![None; n_items];
        let mut items = Vec::new();
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let mut seen = vec![false; n_items];
        for list in &adj {
            for &i in list {
                seen[i as usize] = true;
            }
        }
        for (i, &s) in seen.iter().enumerate() {
            if s {
                item_pos[i] = Some(items.len() as u32);
                items.push(i as u32);
            }
        }
        let mut user_pos = vec![None; n_users];
        let mut users = Vec::new();
        let mut user_items = Vec::new();
        let mut item_users = vec![Vec::new(); items.len()];
        for (u, list) in adj.into_iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let pu = users.len() as u32;
            user_pos[u] = Some(pu);
            users.push(u as u32);
            let compact: Vec<u32> = list.iter().map(|&i| item_pos[i as usize].unwrap()).collect();
            for &ci in &compact {
                item_users[ci as usize].push(pu);
            }
            user_items.push(compact);
        }
        if users.is_empty() {
            return Err(Error::EmptyEdgeSet);
        }
        Ok(BipartiteRatings {
            users,
            items,
            user_items,
            item_users,
            user_pos,
            item_pos,
            user_vocab: None,
            item_vocab: None,
        })
    }

    /// All edges of `rating_type` in `graph`, weights ignored.
    pub fn from_graph(graph: &HeteroGraph, rating_type: &str) -> Result<Self> {
        let et = graph.schema().edge_type_index(rating_type)?;
        let (ut, it) = graph.step_types(et, Direction::Forward);
        let adj = graph.adjacency(et, Direction::Forward);
        let pairs = (0..adj.node_count() as u32).flat_map(|u| adj.neighbors(u).iter().map(move |&i| (u, i)));
        let mut b = BipartiteRatings::from_pairs(graph.vocab(ut).len(), graph.vocab(it).len(), pairs)?;
        b.user_vocab = Some(graph.vocab(ut).clone());
        b.item_vocab = Some(graph.vocab(it).clone());
        Ok(b)
    }

    pub fn n_graph_users(&self) -> usize {
        self.user_pos.len()
    }

    pub fn n_graph_items(&self) -> usize {
        self.item_pos.len()
    }

    /// Degree of a graph user index (0 when absent).
    pub fn user_degree(&self, user: u32) -> usize {
        self.user_pos
            .get(user as usize)
            .copied()
            .flatten()
            .map_or(0, |p| self.user_items[p as usize].len())
    }

    pub fn item_degree(&self, item: u32) -> usize {
        self.item_pos
            .get(item as usize)
            .copied()
            .flatten()
            .map_or(0, |p| self.item_users[p as usize].len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algorithm {
    P3 { alpha: f64 },
    Rp3 { alpha: f64, beta: f64 },
    Hybrid { lambda: f64 },
}

impl Algorithm {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            Algorithm::P3 { alpha } | Algorithm::Rp3 { alpha, .. } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad(format!("alpha must be positive, got {alpha}"))
            }
            Algorithm::Rp3 { beta, .. } if !(beta >= 0.0 && beta.is_finite()) => {
                bad(format!("beta must be non-negative, got {beta}"))
            }
            Algorithm::Hybrid { lambda } if !(0.0..=1.0).contains(&lambda) => {
                bad(format!("lambda must lie in [0, 1], got {lambda}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::P3 { .. } => "p3",
            Algorithm::Rp3 { .. } => "rp3",
            Algorithm::Hybrid { .. } => "hl",
        }
    }

    /// Parameters in tie-break order.
    fn key(&self) -> (f64, f64) {
        match *self {
            Algorithm::P3 { alpha } => (alpha, 0.0),
            Algorithm::Rp3 { alpha, beta } => (alpha, beta),
            Algorithm::Hybrid { lambda } => (lambda, 0.0),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::P3 { alpha } => write!(f, "p3(alpha={alpha})"),
            Algorithm::Rp3 { alpha, beta } => write!(f, "rp3(alpha={alpha},beta={beta})"),
            Algorithm::Hybrid { lambda } => write!(f, "hl(lambda={lambda})"),
        }
    }
}

/// A fitted ranker: the item-item matrix plus per-user scale factors.
#[derive(Clone, Debug)]
pub struct GraphRanker {
    pub algorithm: Algorithm,
    data: BipartiteRatings,
    /// Row-major over compact item positions.
    matrix: Vec<f64>,
    user_scale: Vec<f64>,
}

impl GraphRanker {
    pub fn fit(data: &BipartiteRatings, algorithm: Algorithm) -> Result<Self> {
        algorithm.validate()?;
        let n = data.items.len();
        let ku = |p: usize| data.user_items[p].len() as f64;
        let ki = |p: usize| data.item_users[p].len() as f64;
        let (via_user, row_exp, col_exp, user_exp) = match algorithm {
            Algorithm::P3 { alpha } => (alpha, alpha, 0.0, alpha),
            Algorithm::Rp3 { alpha, beta } => (alpha, alpha, beta, alpha),
            Algorithm::Hybrid { lambda } => (1.0, lambda, 1.0 - lambda, 0.0),
        };
        let user_w: Vec<f64> = (0..data.users.len()).map(|p| ku(p).powf(-via_user)).collect();
        let col_w: Vec<f64> = (0..n).map(|i| ki(i).powf(-col_exp)).collect();
        let mut matrix = vec![0.0; n * n];
        matrix.par_chunks_mut(n.max(1)).enumerate().for_each(|(j, row)| {
            for &v in &data.item_users[j] {
                let w = user_w[v as usize];
                for &i in &data.user_items[v as usize] {
                    row[i as usize] += w;
                }
            }
            let rw = ki(j).powf(-row_exp);
            for (i, x) in row.iter_mut().enumerate() {
                if *x != 0.0 {
                    *x *= rw * col_w[i];
                }
            }
        });
        let user_scale = (0..data.users.len()).map(|p| ku(p).powf(-user_exp)).collect();
        Ok(GraphRanker {
            algorithm,
            data: data.clone(),
            matrix,
            user_scale,
        })
    }

    /// Scores over all graph items; users without training edges score 0
    /// everywhere.
    pub fn scores(&self, user: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.data.n_graph_items()];
        let Some(p) = self.data.user_pos.get(user as usize).copied().flatten() else {
            return out;
        };
        let n = self.data.items.len();
        let mut acc = vec![0.0; n];
        for &j in &self.data.user_items[p as usize] {
            let row = &self.matrix[j as usize * n..(j as usize + 1) * n];
            for (a, m) in acc.iter_mut().zip(row) {
                *a += m;
            }
        }
        let c = self.user_scale[p as usize];
        for (ci, a) in acc.into_iter().enumerate() {
            out[self.data.items[ci] as usize] = c * a;
        }
        out
    }

    /// Diffusion matrix entry between two graph item indices.
    pub fn item_weight(&self, from: u32, to: u32) -> f64 {
        match (self.data.item_pos[from as usize], self.data.item_pos[to as usize]) {
            (Some(j), Some(i)) => self.matrix[j as usize * self.data.items.len() + i as usize],
            _ => 0.0,
        }
    }

    pub fn score_table(&self) -> ScoreTable {
        let users = self.data.users.clone();
        let scores = users.par_iter().map(|&u| self.scores(u)).collect();
        ScoreTable {
            algorithm: self.algorithm,
            users,
            scores,
        }
    }
}

impl Recommender for GraphRanker {
    fn score_items(&self, user: u32) -> Vec<f64> {
        self.scores(user)
    }
}

/// Dense scores for every user with training edges, over all graph items.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub algorithm: Algorithm,
    pub users: Vec<u32>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn get(&self, user: u32, item: u32) -> Option<f64> {
        let p = self.users.binary_search(&user).ok()?;
        self.scores[p].get(item as usize).copied()
    }
}

pub fn p3_alpha_scores(b: &BipartiteRatings, alpha: f64) -> Result<ScoreTable> {
    Ok(GraphRanker::fit(b, Algorithm::P3 { alpha })?.score_table())
}

pub fn rp3_beta_scores(b: &BipartiteRatings, alpha: f64, beta: f64) -> Result<ScoreTable> {
    Ok(GraphRanker::fit(b, Algorithm::Rp3 { alpha, beta })?.score_table())
}

pub fn hl_scores(b: &BipartiteRatings, lambda: f64) -> Result<ScoreTable> {
    Ok(GraphRanker::fit(b, Algorithm::Hybrid { lambda })?.score_table())
}

/// Ranks items by training degree, the same list for every user.
#[derive(Clone, Debug)]
pub struct Popularity {
    scores: Vec<f64>,
}

impl Popularity {
    pub fn fit(b: &BipartiteRatings) -> Self {
        Popularity {
            scores: (0..b.n_graph_items() as u32).map(|i| b.item_degree(i) as f64).collect(),
        }
    }
}

impl Recommender for Popularity {
    fn score_items(&self, _user: u32) -> Vec<f64> {
        self.scores.clone()
    }
}

pub fn default_grid(name: &str) -> Result<Vec<Algorithm>> {
    let steps = |n: usize, step: f64, start: f64| -> Vec<f64> {
        (0..n).map(|k| ((start + k as f64 * step) * 10.0).round() / 10.0).collect()
    };
    let ab = steps(10, 0.2, 0.2);
    Ok(match name {
        "p3" => ab.iter().map(|&alpha| Algorithm::P3 { alpha }).collect(),
        "rp3" => ab
            .iter()
            .flat_map(|&alpha| ab.iter().map(move |&beta| Algorithm::Rp3 { alpha, beta }))
            .collect(),
        "hl" => steps(11, 0.1, 0.0).into_iter().map(|lambda| Algorithm::Hybrid { lambda }).collect(),
        other => return Err(Error::InvalidParameter(format!("unknown baseline `{other}`"))),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub best: Algorithm,
    /// Validation recall@k per grid point, in ascending parameter order.
    pub report: Vec<(Algorithm, f64)>,
}

impl TuneResult {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("params\trecall\n");
        for (a, r) in &self.report {
            out.push_str(&format!("{a}\t{r:.6}\n"));
        }
        out
    }
}

/// Evaluates recall@`k` on `validation` for each grid point and returns the
/// best; ties go to the smallest parameters.
pub fn grid_tune(
    train: &BipartiteRatings,
    grid: &[Algorithm],
    validation: &BTreeMap<u32, HashSet<u32>>,
    seen: &BTreeMap<u32, HashSet<u32>>,
    k: usize,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    if validation.values().all(HashSet::is_empty) {
        return Err(Error::InvalidParameter("empty validation set".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap());
    let report = grid
        .par_iter()
        .map(|&a| {
            let ranker = GraphRanker::fit(train, a)?;
            Ok((a, evaluate(&ranker, validation, seen, k)?.recall_at(k)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = report[0];
    for &(a, r) in &report[1..] {
        if r > best.1 {
            best = (a, r);
        }
    }
    Ok(TuneResult { best: best.0, report })
}
