//! P-core filtering on one (rating) edge type.
//!
//! Nodes at either end of the edge type with fewer than `k` edges of that
//! type are removed, together with all their incident edges of every type,
//! until no such node remains. The fixpoint is the maximal subgraph where
//! every endpoint has degree at least `k`, so it does not depend on removal
//! order. When both ends share a node type, a node must have `k` outgoing
//! and `k` incoming edges.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{DuplicatePolicy, GraphBuilder, HeteroGraph};

pub fn k_core_filter(graph: &HeteroGraph, edge_type: &str, k: usize) -> Result<HeteroGraph> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let schema = graph.schema();
    let et = schema.edge_type_index(edge_type)?;
    let table = graph.edge_table(et);
    let def = &schema.edge_types()[et];
    let st = schema.node_type_index(def.src.as_str())?;
    let dt = schema.node_type_index(def.dst.as_str())?;

    let mut alive: Vec<Vec<bool>> = (0..schema.node_types().len())
        .map(|t| vec![true; graph.vocab(t).len()])
        .collect();
    let mut out_deg = vec![0usize; graph.vocab(st).len()];
    let mut in_deg = vec![0usize; graph.vocab(dt).len()];
    for i in 0..table.len() {
        out_deg[table.src[i] as usize] += 1;
        in_deg[table.dst[i] as usize] += 1;
    }

    // (node type, node index)
    let mut queue = VecDeque::new();
    let mut queued: Vec<Vec<bool>> = alive.iter().map(|v| vec![false; v.len()]).collect();
    for (n, &d) in out_deg.iter().enumerate() {
        if d < k && !queued[st][n] {
            queued[st][n] = true;
            queue.push_back((st, n as u32));
        }
    }
    for (n, &d) in in_deg.iter().enumerate() {
        if d < k && !queued[dt][n] {
            queued[dt][n] = true;
            queue.push_back((dt, n as u32));
        }
    }

    let fwd = graph.adjacency(et, crate::graph::Direction::Forward);
    let rev = graph.adjacency(et, crate::graph::Direction::Reverse);
    while let Some((t, n)) = queue.pop_front() {
        alive[t][n as usize] = false;
        if t == st {
            for &d in fwd.neighbors(n) {
                if alive[dt][d as usize] {
                    in_deg[d as usize] -= 1;
                    if in_deg[d as usize] < k && !queued[dt][d as usize] {
                        queued[dt][d as usize] = true;
                        queue.push_back((dt, d));
                    }
                }
            }
        }
        if t == dt {
            for &s in rev.neighbors(n) {
                if alive[st][s as usize] {
                    out_deg[s as usize] -= 1;
                    if out_deg[s as usize] < k && !queued[st][s as usize] {
                        queued[st][s as usize] = true;
                        queue.push_back((st, s));
                    }
                }
            }
        }
    }

    let mut b = GraphBuilder::new(schema.clone(), DuplicatePolicy::Reject);
    for (e, edef) in schema.edge_types().iter().enumerate() {
        let es = schema.node_type_index(edef.src.as_str())?;
        let ed = schema.node_type_index(edef.dst.as_str())?;
        let (sv, dv) = (graph.vocab(es), graph.vocab(ed));
        for i in 0..graph.edge_table(e).len() {
            let (s, d, w) = graph.edge_at(e, i);
            if alive[es][s as usize] && alive[ed][d as usize] {
                b.add_edge(&edef.name, &sv[s as usize], &dv[d as usize], w)?;
            }
        }
    }
    Ok(b.build())
}
