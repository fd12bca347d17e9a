//! Meta-path guided random walks and sampled relation generation.
//!
//! A walk starts at a node of the meta-path's source type and takes one edge
//! per step. Steps over a weighted edge type pick an edge with probability
//! proportional to `exp(weight)`; all other steps pick uniformly. A walk that
//! reaches a node without edges of the next type is a dead end and is
//! discarded whole.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeRef};
use crate::metapath::{MetaPath, ResolvedPath};
use crate::relation::{GenerationMethod, Provenance, RelationMatrix};
use crate::rng::stream_rng;
use crate::sampling::draw_from_cdf;
use crate::Execution;

pub const DEFAULT_WALKS_PER_START: usize = 100;
pub const DEFAULT_MAX_RETRIES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleBudget {
    pub walks_per_start: usize,
    pub max_retries_per_walk: usize,
}

impl SampleBudget {
    pub fn new(walks_per_start: usize, max_retries_per_walk: usize) -> Result<Self> {
        if walks_per_start == 0 {
            return Err(Error::InvalidParameter("walks_per_start must be at least 1".into()));
        }
        Ok(SampleBudget {
            walks_per_start,
            max_retries_per_walk,
        })
    }
}

impl Default for SampleBudget {
    fn default() -> Self {
        SampleBudget {
            walks_per_start: DEFAULT_WALKS_PER_START,
            max_retries_per_walk: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Walk {
    pub nodes: Vec<NodeRef>,
    pub metapath: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WalkOutcome {
    Complete(Walk),
    /// No edge of the required type at the node reached before step `step`
    /// (1-based).
    DeadEnd { step: usize },
}

/// Meta-path resolved against a graph, with the per-step sampling rule.
pub(crate) struct WalkPlan<'g> {
    graph: &'g HeteroGraph,
    pub(crate) path: ResolvedPath,
    weighted: Vec<bool>,
}

impl<'g> WalkPlan<'g> {
    pub(crate) fn new(graph: &'g HeteroGraph, mp: &MetaPath) -> Result<Self> {
        let path = mp.resolve(graph.schema())?;
        let weighted = path
            .steps
            .iter()
            .map(|&(et, _)| graph.schema().edge_types()[et].weighted())
            .collect();
        Ok(WalkPlan {
            graph,
            path,
            weighted,
        })
    }

    /// Runs one walk from `start`, writing visited node indices into `buf`.
    /// Returns the 1-based step that dead-ended, if any.
    #[inline]
    pub(crate) fn walk_into<R: Rng + ?Sized>(&self, start: u32, rng: &mut R, buf: &mut Vec<u32>) -> Option<usize> {
        buf.clear();
        buf.push(start);
        let mut node = start;
        for (i, &(et, dir)) in self.path.steps.iter().enumerate() {
            let adj = self.graph.adjacency(et, dir);
            let nbrs = adj.neighbors(node);
            if nbrs.is_empty() {
                return Some(i + 1);
            }
            let pick = if self.weighted[i] {
                draw_from_cdf(adj.cdf(node).expect("weighted adjacency has a cdf"), rng)
            } else {
                rng.random_range(0..nbrs.len())
            };
            node = nbrs[pick];
            buf.push(node);
        }
        None
    }

    /// Terminal node of one walk, or `None` on a dead end.
    #[inline]
    fn walk_terminal<R: Rng + ?Sized>(&self, start: u32, rng: &mut R) -> Option<u32> {
        let mut node = start;
        for (i, &(et, dir)) in self.path.steps.iter().enumerate() {
            let adj = self.graph.adjacency(et, dir);
            let nbrs = adj.neighbors(node);
            if nbrs.is_empty() {
                return None;
            }
            let pick = if self.weighted[i] {
                draw_from_cdf(adj.cdf(node).expect("weighted adjacency has a cdf"), rng)
            } else {
                rng.random_range(0..nbrs.len())
            };
            node = nbrs[pick];
        }
        Some(node)
    }
}

/// One random walk along `mp` from `start`.
pub fn sample_walk<R: Rng + ?Sized>(
    graph: &HeteroGraph,
    mp: &MetaPath,
    start: &NodeRef,
    rng: &mut R,
) -> Result<WalkOutcome> {
    let plan = WalkPlan::new(graph, mp)?;
    let (t, idx) = graph.resolve(start)?;
    if t != plan.path.src_type() {
        return Err(Error::TypeMismatch {
            step: 0,
            expected: graph.schema().node_types()[plan.path.src_type()].to_string(),
            found: start.node_type.to_string(),
        });
    }
    let mut buf = Vec::with_capacity(mp.len() + 1);
    if let Some(step) = plan.walk_into(idx, rng, &mut buf) {
        return Ok(WalkOutcome::DeadEnd { step });
    }
    let nodes = buf
        .iter()
        .zip(&plan.path.node_types)
        .map(|(&n, &t)| NodeRef {
            node_type: graph.schema().node_types()[t].clone(),
            id: graph.vocab(t)[n as usize].clone(),
        })
        .collect();
    Ok(WalkOutcome::Complete(Walk {
        nodes,
        metapath: mp.label().to_string(),
    }))
}

/// All node indices of the meta-path's source type.
pub fn all_starts(graph: &HeteroGraph, mp: &MetaPath) -> Result<Vec<u32>> {
    let path = mp.resolve(graph.schema())?;
    Ok((0..graph.vocab(path.src_type()).len() as u32).collect())
}

pub(crate) fn check_starts(graph: &HeteroGraph, path: &ResolvedPath, starts: &[u32]) -> Result<()> {
    let n = graph.vocab(path.src_type()).len() as u32;
    match starts.iter().find(|&&s| s >= n) {
        Some(s) => Err(Error::InvalidParameter(format!(
            "start index {s} out of range for node type `{}`",
            graph.schema().node_types()[path.src_type()]
        ))),
        None => Ok(()),
    }
}

/// Estimates the meta-path relation by `budget.walks_per_start` walks from
/// every start. Start `s` draws from stream `s` of `seed`, so the result does
/// not depend on execution order or on which other starts are present.
pub fn sample_relation(
    graph: &HeteroGraph,
    mp: &MetaPath,
    starts: &[u32],
    budget: SampleBudget,
    seed: u64,
    exec: Execution,
) -> Result<RelationMatrix> {
    let plan = WalkPlan::new(graph, mp)?;
    check_starts(graph, &plan.path, starts)?;
    let row_for = |&start: &u32| -> (u32, Vec<(u32, f64)>, u64) {
        let mut rng = stream_rng(seed, start as u64);
        let mut terminals = Vec::with_capacity(budget.walks_per_start);
        let mut failed = 0u64;
        for _ in 0..budget.walks_per_start {
            let hit = (0..=budget.max_retries_per_walk).find_map(|_| plan.walk_terminal(start, &mut rng));
            match hit {
                Some(t) => terminals.push(t),
                None => failed += 1,
            }
        }
        terminals.sort_unstable();
        let mut row: Vec<(u32, f64)> = Vec::new();
        for t in terminals {
            match row.last_mut() {
                Some((d, c)) if *d == t => *c += 1.0,
                _ => row.push((t, 1.0)),
            }
        }
        (start, row, failed)
    };
    let results: Vec<(u32, Vec<(u32, f64)>, u64)> = match exec {
        Execution::Sequential => starts.iter().map(row_for).collect(),
        Execution::Parallel => starts.par_iter().map(row_for).collect(),
    };
    let failures = results.iter().map(|r| r.2).sum();
    let mut rows: Vec<(u32, Vec<(u32, f64)>)> = results
        .into_iter()
        .filter(|(_, r, _)| !r.is_empty())
        .map(|(s, r, _)| (s, r))
        .collect();
    rows.sort_unstable_by_key(|(s, _)| *s);
    let duplicate_starts = rows.windows(2).any(|w| w[0].0 == w[1].0);
    let schema = graph.schema();
    let (st, dt) = (plan.path.src_type(), plan.path.dst_type());
    let provenance = Provenance {
        label: mp.label().to_string(),
        metapath: mp.literal(),
        method: GenerationMethod::Sampled,
        walks_per_start: Some(budget.walks_per_start),
        seed: Some(seed),
        failures,
        source: "graph".into(),
    };
    let args = (
        schema.node_types()[st].clone(),
        schema.node_types()[dt].clone(),
        graph.vocab(st).clone(),
        graph.vocab(dt).clone(),
    );
    Ok(if duplicate_starts {
        RelationMatrix::from_rows(args.0, args.1, args.2, args.3, rows, provenance)
    } else {
        RelationMatrix::from_sorted_rows(args.0, args.1, args.2, args.3, rows, provenance)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, DuplicatePolicy, EdgeRecord};
    use crate::schema::NetworkSchema;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn schema() -> NetworkSchema {
        NetworkSchema::parse("[nodes]\nuser\nmovie\ngenre\n[edges]\num user movie weighted(1,5)\nmg movie genre\n").unwrap()
    }

    fn rec(et: &str, s: &str, d: &str, w: Option<f64>) -> EdgeRecord {
        (et.into(), s.into(), d.into(), w)
    }

    /// The three-movie user of the worked example: weights 5, 1, 3, each
    /// movie in its own genre plus a shared one.
    fn worked_example() -> HeteroGraph {
        load_graph(
            schema(),
            vec![
                rec("um", "u", "e1", Some(5.0)),
                rec("um", "u", "e2", Some(1.0)),
                rec("um", "u", "e3", Some(3.0)),
                rec("mg", "e1", "drama", None),
                rec("mg", "e2", "drama", None),
                rec("mg", "e3", "comedy", None),
                rec("mg", "e1", "comedy", None),
                rec("um", "v", "x", Some(2.0)),
            ],
            DuplicatePolicy::Reject,
        )
        .unwrap()
    }

    #[test]
    fn first_step_follows_softmax_later_steps_uniform() {
        let g = worked_example();
        let mp = MetaPath::parse("um,>mg,<mg", g.schema()).unwrap();
        let u = NodeRef::new("user", "u").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut first = std::collections::HashMap::new();
        let mut second_from_e1 = std::collections::HashMap::new();
        for _ in 0..n {
            match sample_walk(&g, &mp, &u, &mut rng).unwrap() {
                WalkOutcome::Complete(w) => {
                    assert_eq!(w.nodes.len(), 4);
                    *first.entry(w.nodes[1].id.clone()).or_insert(0usize) += 1;
                    if w.nodes[1].id == "e1" {
                        *second_from_e1.entry(w.nodes[2].id.clone()).or_insert(0usize) += 1;
                    }
                }
                WalkOutcome::DeadEnd { .. } => panic!("no dead ends in this graph"),
            }
        }
        let z = 5f64.exp() + 1f64.exp() + 3f64.exp();
        for (m, w) in [("e1", 5.0f64), ("e2", 1.0), ("e3", 3.0)] {
            let f = first[m] as f64 / n as f64;
            assert!((f - w.exp() / z).abs() < 0.01, "{m}: {f}");
        }
        let e1_total: usize = second_from_e1.values().sum();
        for g in ["drama", "comedy"] {
            let f = second_from_e1[g] as f64 / e1_total as f64;
            assert!((f - 0.5).abs() < 0.02, "{g}: {f}");
        }
    }

    #[test]
    fn single_edge_walk_is_forced() {
        let g = worked_example();
        let mp = MetaPath::parse("um", g.schema()).unwrap();
        let v = NodeRef::new("user", "v").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let WalkOutcome::Complete(w) = sample_walk(&g, &mp, &v, &mut rng).unwrap() else {
                panic!()
            };
            assert_eq!(w.nodes[1].id, "x");
        }
    }

    #[test]
    fn dead_end_emits_no_walk() {
        let g = worked_example();
        let mp = MetaPath::parse("um,>mg", g.schema()).unwrap();
        let v = NodeRef::new("user", "v").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            sample_walk(&g, &mp, &v, &mut rng).unwrap(),
            WalkOutcome::DeadEnd { step: 2 }
        );
    }

    #[test]
    fn start_errors() {
        let g = worked_example();
        let mp = MetaPath::parse("um", g.schema()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let absent = NodeRef::new("user", "nobody").unwrap();
        assert!(matches!(sample_walk(&g, &mp, &absent, &mut rng), Err(Error::UnknownNode { .. })));
        let wrong = NodeRef::new("movie", "e1").unwrap();
        assert!(matches!(sample_walk(&g, &mp, &wrong, &mut rng), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn failed_starts_have_empty_rows_and_are_counted() {
        let g = worked_example();
        let mp = MetaPath::parse("um,>mg", g.schema()).unwrap();
        let starts = all_starts(&g, &mp).unwrap();
        let budget = SampleBudget::new(10, 2).unwrap();
        let r = sample_relation(&g, &mp, &starts, budget, 1, Execution::Sequential).unwrap();
        let v = g.node_index(0, "v").unwrap();
        assert!(r.row(v).is_empty());
        assert_eq!(r.provenance.failures, 10);
        let u = g.node_index(0, "u").unwrap();
        assert_eq!(r.row(u).iter().map(|(_, c)| c).sum::<f64>(), 10.0);
    }

    #[test]
    fn single_completion_rows_hold_the_full_budget() {
        let g = load_graph(
            schema(),
            vec![
                rec("um", "a", "m1", Some(1.0)),
                rec("um", "b", "m2", Some(4.0)),
                rec("mg", "m1", "g1", None),
                rec("mg", "m2", "g2", None),
            ],
            DuplicatePolicy::Reject,
        )
        .unwrap();
        let mp = MetaPath::parse("um,>mg", g.schema()).unwrap();
        let starts = all_starts(&g, &mp).unwrap();
        let r = sample_relation(&g, &mp, &starts, SampleBudget::new(37, 0).unwrap(), 3, Execution::Sequential).unwrap();
        for (_, row) in r.rows() {
            assert_eq!(row.len(), 1);
            assert_eq!(row[0].1, 37.0);
        }
    }

    #[test]
    fn rejects_out_of_range_start() {
        let g = worked_example();
        let mp = MetaPath::parse("um", g.schema()).unwrap();
        assert!(sample_relation(&g, &mp, &[99], SampleBudget::default(), 0, Execution::Sequential).is_err());
        assert!(SampleBudget::new(0, 1).is_err());
    }
}
