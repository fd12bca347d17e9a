//! Full breadth-first meta-path expansion.
//!
//! Every path conforming to the meta-path is followed: the frontier holds one
//! entry per path prefix, so the work done is proportional to the number of
//! paths. Entry `(s, d)` of the result is the number of paths from `s` that
//! end at `d`. Edge weights are ignored.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::metapath::MetaPath;
use crate::relation::{GenerationMethod, Provenance, RelationMatrix};
use crate::walk::check_starts;
use crate::Execution;

pub const DEFAULT_MAX_ENTRIES: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpandOptions {
    /// Abort once the relation would hold more than this many entries.
    pub max_entries: u64,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            max_entries: DEFAULT_MAX_ENTRIES,
        }
    }
}

/// Exact path-count relation of `mp` from `starts`. The total number of
/// paths enumerated equals the relation's total count.
pub fn expand_full(
    graph: &HeteroGraph,
    mp: &MetaPath,
    starts: &[u32],
    opts: ExpandOptions,
    exec: Execution,
) -> Result<RelationMatrix> {
    let path = mp.resolve(graph.schema())?;
    check_starts(graph, &path, starts)?;
    let n_dst = graph.vocab(path.dst_type()).len();
    let entries = AtomicU64::new(0);
    let rows_done = AtomicUsize::new(0);
    let total_rows = starts.len().max(1) as u64;

    let expand_row = |counts: &mut Vec<u32>, start: u32| -> Result<(u32, Vec<(u32, f64)>)> {
        let mut frontier = vec![start];
        let mut next = Vec::new();
        for &(et, dir) in &path.steps {
            let adj = graph.adjacency(et, dir);
            next.clear();
            for &n in &frontier {
                next.extend_from_slice(adj.neighbors(n));
            }
            std::mem::swap(&mut frontier, &mut next);
            if frontier.is_empty() {
                break;
            }
        }
        let mut touched = Vec::new();
        for &d in &frontier {
            let c = &mut counts[d as usize];
            if *c == 0 {
                touched.push(d);
            }
            *c += 1;
        }
        touched.sort_unstable();
        let row: Vec<(u32, f64)> = touched
            .into_iter()
            .map(|d| {
                let c = std::mem::take(&mut counts[d as usize]);
                (d, c as f64)
            })
            .collect();
        let so_far = entries.fetch_add(row.len() as u64, Ordering::Relaxed) + row.len() as u64;
        let done = rows_done.fetch_add(1, Ordering::Relaxed) as u64 + 1;
        if so_far > opts.max_entries {
            return Err(Error::ExpansionTooLarge {
                label: mp.label().to_string(),
                projected: so_far.saturating_mul(total_rows) / done,
                cap: opts.max_entries,
            });
        }
        Ok((start, row))
    };

    let mut rows: Vec<(u32, Vec<(u32, f64)>)> = match exec {
        Execution::Sequential => {
            let mut counts = vec![0u32; n_dst];
            starts
                .iter()
                .map(|&s| expand_row(&mut counts, s))
                .collect::<Result<_>>()?
        }
        Execution::Parallel => starts
            .par_iter()
            .map_init(|| vec![0u32; n_dst], |counts, &s| expand_row(counts, s))
            .collect::<Result<_>>()?,
    };
    rows.retain(|(_, r)| !r.is_empty());
    rows.sort_unstable_by_key(|(s, _)| *s);
    let duplicate_starts = rows.windows(2).any(|w| w[0].0 == w[1].0);

    let schema = graph.schema();
    let (st, dt) = (path.src_type(), path.dst_type());
    let provenance = Provenance {
        label: mp.label().to_string(),
        metapath: mp.literal(),
        method: GenerationMethod::Full,
        walks_per_start: None,
        seed: None,
        failures: 0,
        source: "graph".into(),
    };
    let (a, b, c, d) = (
        schema.node_types()[st].clone(),
        schema.node_types()[dt].clone(),
        graph.vocab(st).clone(),
        graph.vocab(dt).clone(),
    );
    Ok(if duplicate_starts {
        RelationMatrix::from_rows(a, b, c, d, rows, provenance)
    } else {
        RelationMatrix::from_sorted_rows(a, b, c, d, rows, provenance)
    })
}
