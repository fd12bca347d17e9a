//! Typed heterogeneous multigraph storage.
//!
//! Nodes are opaque string ids scoped by node type and mapped to dense
//! per-type `u32` indices in first-seen order. Edges are kept per edge type in
//! insertion order, with forward (by source) and reverse (by destination)
//! compressed adjacency built once when the graph is frozen.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::sampling::softmax_cdf_into;
use crate::schema::{NetworkSchema, NodeTypeId};

/// External ids of every node of one type, indexed by dense node index.
pub type Vocab = Arc<Vec<String>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => ">",
            Direction::Reverse => "<",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub node_type: NodeTypeId,
    pub id: String,
}

impl NodeRef {
    pub fn new(node_type: &str, id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidParameter("empty node id".into()));
        }
        Ok(NodeRef {
            node_type: NodeTypeId::new(node_type)?,
            id,
        })
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node_type, self.id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub edge_type: String,
    pub src: NodeRef,
    pub dst: NodeRef,
    pub weight: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DuplicatePolicy {
    /// A second record with the same (type, src, dst) is an error.
    #[default]
    Reject,
    /// The later record's weight replaces the earlier one; position is kept.
    KeepLast,
}

#[derive(Debug, Default)]
struct NodeTable {
    ids: Vocab,
    index: HashMap<String, u32>,
}

impl NodeTable {
    fn intern(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len() as u32;
        Arc::make_mut(&mut self.ids).push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct EdgeTable {
    pub(crate) src: Vec<u32>,
    pub(crate) dst: Vec<u32>,
    pub(crate) weight: Option<Vec<f64>>,
}

impl EdgeTable {
    pub(crate) fn len(&self) -> usize {
        self.src.len()
    }
}

/// Compressed adjacency of one edge type in one direction.
#[derive(Debug, Default)]
pub struct Adjacency {
    offsets: Vec<usize>,
    edge_ids: Vec<u32>,
    neighbors: Vec<u32>,
    /// Per-node cumulative softmax(weight) tables, aligned with `neighbors`.
    cdf: Option<Vec<f64>>,
}

impl Adjacency {
    fn build(n_nodes: usize, from: &[u32], to: &[u32], weight: Option<&[f64]>) -> Self {
        let mut offsets = vec![0usize; n_nodes + 1];
        for &f in from {
            offsets[f as usize + 1] += 1;
        }
        for i in 0..n_nodes {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut edge_ids = vec![0u32; from.len()];
        let mut neighbors = vec![0u32; from.len()];
        for (e, (&f, &t)) in from.iter().zip(to).enumerate() {
            let slot = &mut cursor[f as usize];
            edge_ids[*slot] = e as u32;
            neighbors[*slot] = t;
            *slot += 1;
        }
        let cdf = weight.map(|w| {
            let mut cdf = vec![0.0; from.len()];
            let mut buf = Vec::new();
            for n in 0..n_nodes {
                let (lo, hi) = (offsets[n], offsets[n + 1]);
                if lo == hi {
                    continue;
                }
                buf.clear();
                buf.extend(edge_ids[lo..hi].iter().map(|&e| w[e as usize]));
                softmax_cdf_into(&buf, &mut cdf[lo..hi]);
            }
            cdf
        });
        Adjacency {
            offsets,
            edge_ids,
            neighbors,
            cdf,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn degree(&self, node: u32) -> usize {
        let n = node as usize;
        self.offsets[n + 1] - self.offsets[n]
    }

    #[inline]
    pub fn neighbors(&self, node: u32) -> &[u32] {
        let n = node as usize;
        &self.neighbors[self.offsets[n]..self.offsets[n + 1]]
    }

    #[inline]
    pub fn edge_ids(&self, node: u32) -> &[u32] {
        let n = node as usize;
        &self.edge_ids[self.offsets[n]..self.offsets[n + 1]]
    }

    /// Cumulative softmax table for `node`, if the edge type is weighted.
    #[inline]
    pub fn cdf(&self, node: u32) -> Option<&[f64]> {
        let n = node as usize;
        self.cdf
            .as_ref()
            .map(|c| &c[self.offsets[n]..self.offsets[n + 1]])
    }
}

/// Frozen heterogeneous graph. There is no mutation API; derived graphs are
/// built through [`HeteroGraph::filter_edges`] or a new [`GraphBuilder`].
#[derive(Debug)]
pub struct HeteroGraph {
    schema: NetworkSchema,
    nodes: Vec<Arc<NodeTable>>,
    edges: Vec<EdgeTable>,
    forward: Vec<Adjacency>,
    reverse: Vec<Adjacency>,
}

impl HeteroGraph {
    pub fn schema(&self) -> &NetworkSchema {
        &self.schema
    }

    pub fn node_count(&self, node_type: &str) -> Result<usize> {
        Ok(self.nodes[self.schema.node_type_index(node_type)?].ids.len())
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().map(|t| t.ids.len()).sum()
    }

    pub fn vocab(&self, node_type: usize) -> &Vocab {
        &self.nodes[node_type].ids
    }

    pub fn vocab_by_name(&self, node_type: &str) -> Result<&Vocab> {
        Ok(self.vocab(self.schema.node_type_index(node_type)?))
    }

    pub fn node_index(&self, node_type: usize, id: &str) -> Option<u32> {
        self.nodes[node_type].index.get(id).copied()
    }

    /// Resolves a node reference to `(node type index, node index)`.
    pub fn resolve(&self, node: &NodeRef) -> Result<(usize, u32)> {
        let t = self.schema.node_type_index(node.node_type.as_str())?;
        let i = self.node_index(t, &node.id).ok_or_else(|| Error::UnknownNode {
            node_type: node.node_type.to_string(),
            id: node.id.clone(),
        })?;
        Ok((t, i))
    }

    pub fn edge_count(&self, edge_type: &str) -> Result<usize> {
        Ok(self.edges[self.schema.edge_type_index(edge_type)?].len())
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(EdgeTable::len).sum()
    }

    pub(crate) fn edge_table(&self, et: usize) -> &EdgeTable {
        &self.edges[et]
    }

    pub fn adjacency(&self, et: usize, dir: Direction) -> &Adjacency {
        match dir {
            Direction::Forward => &self.forward[et],
            Direction::Reverse => &self.reverse[et],
        }
    }

    /// Node types at the (from, to) ends of a traversal of `et` in `dir`.
    pub fn step_types(&self, et: usize, dir: Direction) -> (usize, usize) {
        let def = &self.schema.edge_types()[et];
        let s = self.schema.node_type_index(def.src.as_str()).unwrap();
        let d = self.schema.node_type_index(def.dst.as_str()).unwrap();
        match dir {
            Direction::Forward => (s, d),
            Direction::Reverse => (d, s),
        }
    }

    /// The `i`-th edge of type `et` as `(src index, dst index, weight)`.
    pub fn edge_at(&self, et: usize, i: usize) -> (u32, u32, Option<f64>) {
        let t = &self.edges[et];
        (t.src[i], t.dst[i], t.weight.as_ref().map(|w| w[i]))
    }

    /// Every edge of type `edge_type` incident to `node` in `dir`, in
    /// insertion order.
    pub fn get_edges(&self, node: &NodeRef, edge_type: &str, dir: Direction) -> Result<Vec<Edge>> {
        let et = self.schema.edge_type_index(edge_type)?;
        let (t, idx) = self.resolve(node)?;
        let (from_type, _) = self.step_types(et, dir);
        if from_type != t {
            return Ok(Vec::new());
        }
        let adj = self.adjacency(et, dir);
        let mut ids: Vec<u32> = adj.edge_ids(idx).to_vec();
        ids.sort_unstable();
        Ok(ids
            .into_iter()
            .map(|e| self.edge_view(et, e as usize))
            .collect())
    }

    pub fn degree(&self, node: &NodeRef, edge_type: &str, dir: Direction) -> Result<usize> {
        let et = self.schema.edge_type_index(edge_type)?;
        let (t, idx) = self.resolve(node)?;
        let (from_type, _) = self.step_types(et, dir);
        if from_type != t {
            return Ok(0);
        }
        Ok(self.adjacency(et, dir).degree(idx))
    }

    fn edge_view(&self, et: usize, i: usize) -> Edge {
        let def = &self.schema.edge_types()[et];
        let (s, d, w) = self.edge_at(et, i);
        let (st, dt) = self.step_types(et, Direction::Forward);
        Edge {
            edge_type: def.name.clone(),
            src: NodeRef {
                node_type: def.src.clone(),
                id: self.nodes[st].ids[s as usize].clone(),
            },
            dst: NodeRef {
                node_type: def.dst.clone(),
                id: self.nodes[dt].ids[d as usize].clone(),
            },
            weight: w,
        }
    }

    /// All edges in canonical order: edge types in schema order, edges in
    /// insertion order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.edges.len()).flat_map(move |et| {
            (0..self.edges[et].len()).map(move |i| self.edge_view(et, i))
        })
    }

    /// New graph keeping the edges for which `keep(edge type, edge index)`
    /// holds. Node vocabularies (and so node indices) are shared unchanged.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> HeteroGraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(et, t)| {
                let mut out = EdgeTable {
                    weight: t.weight.as_ref().map(|_| Vec::new()),
                    ..EdgeTable::default()
                };
                for i in 0..t.len() {
                    if keep(et, i) {
                        out.src.push(t.src[i]);
                        out.dst.push(t.dst[i]);
                        if let (Some(o), Some(w)) = (out.weight.as_mut(), t.weight.as_ref()) {
                            o.push(w[i]);
                        }
                    }
                }
                out
            })
            .collect();
        HeteroGraph::freeze(self.schema.clone(), self.nodes.clone(), edges)
    }

    fn freeze(schema: NetworkSchema, nodes: Vec<Arc<NodeTable>>, edges: Vec<EdgeTable>) -> Self {
        let mut forward = Vec::with_capacity(edges.len());
        let mut reverse = Vec::with_capacity(edges.len());
        for (et, table) in edges.iter().enumerate() {
            let def = &schema.edge_types()[et];
            let s = schema.node_type_index(def.src.as_str()).unwrap();
            let d = schema.node_type_index(def.dst.as_str()).unwrap();
            let w = table.weight.as_deref();
            forward.push(Adjacency::build(nodes[s].ids.len(), &table.src, &table.dst, w));
            reverse.push(Adjacency::build(nodes[d].ids.len(), &table.dst, &table.src, w));
        }
        HeteroGraph {
            schema,
            nodes,
            edges,
            forward,
            reverse,
        }
    }
}

/// Accumulates edges and interns node ids; [`GraphBuilder::build`] freezes
/// the result.
pub struct GraphBuilder {
    schema: NetworkSchema,
    policy: DuplicatePolicy,
    nodes: Vec<NodeTable>,
    edges: Vec<EdgeTable>,
    seen: Vec<HashMap<(u32, u32), u32>>,
    merged: usize,
}

impl GraphBuilder {
    pub fn new(schema: NetworkSchema, policy: DuplicatePolicy) -> Self {
        let nodes = schema.node_types().iter().map(|_| NodeTable::default()).collect();
        let edges = schema
            .edge_types()
            .iter()
            .map(|def| EdgeTable {
                weight: def.weighted().then(Vec::new),
                ..EdgeTable::default()
            })
            .collect();
        let seen = schema.edge_types().iter().map(|_| HashMap::new()).collect();
        GraphBuilder {
            schema,
            policy,
            nodes,
            edges,
            seen,
            merged: 0,
        }
    }

    /// Pre-registers a node so it exists even without incident edges.
    pub fn add_node(&mut self, node_type: &str, id: &str) -> Result<u32> {
        if id.is_empty() {
            return Err(Error::InvalidParameter("empty node id".into()));
        }
        let t = self.schema.node_type_index(node_type)?;
        Ok(self.nodes[t].intern(id))
    }

    pub fn add_edge(&mut self, edge_type: &str, src: &str, dst: &str, weight: Option<f64>) -> Result<()> {
        let et = self.schema.edge_type_index(edge_type)?;
        let def = &self.schema.edge_types()[et];
        match (def.weight_range, weight) {
            (Some(_), None) => {
                return Err(Error::MissingWeight {
                    edge_type: edge_type.to_string(),
                })
            }
            (None, Some(_)) => {
                return Err(Error::UnexpectedWeight {
                    edge_type: edge_type.to_string(),
                })
            }
            (Some(r), Some(w)) if !r.contains(w) => {
                return Err(Error::WeightOutOfRange {
                    edge_type: edge_type.to_string(),
                    weight: w,
                    min: r.min,
                    max: r.max,
                })
            }
            _ => {}
        }
        if src.is_empty() || dst.is_empty() {
            return Err(Error::InvalidParameter("empty node id".into()));
        }
        let s_type = self.schema.node_type_index(def.src.as_str())?;
        let d_type = self.schema.node_type_index(def.dst.as_str())?;
        let s = self.nodes[s_type].intern(src);
        let d = self.nodes[d_type].intern(dst);
        let table = &mut self.edges[et];
        if let Some(&prev) = self.seen[et].get(&(s, d)) {
            match self.policy {
                DuplicatePolicy::Reject => {
                    return Err(Error::DuplicateEdge {
                        edge_type: edge_type.to_string(),
                        src: src.to_string(),
                        dst: dst.to_string(),
                    })
                }
                DuplicatePolicy::KeepLast => {
                    if let (Some(ws), Some(w)) = (table.weight.as_mut(), weight) {
                        ws[prev as usize] = w;
                    }
                    self.merged += 1;
                    return Ok(());
                }
            }
        }
        self.seen[et].insert((s, d), table.src.len() as u32);
        table.src.push(s);
        table.dst.push(d);
        if let (Some(ws), Some(w)) = (table.weight.as_mut(), weight) {
            ws.push(w);
        }
        Ok(())
    }

    pub fn build(self) -> HeteroGraph {
        if self.merged > 0 {
            warn!("merged {} duplicate edge records (keep-last)", self.merged);
        }
        let nodes = self.nodes.into_iter().map(Arc::new).collect();
        HeteroGraph::freeze(self.schema, nodes, self.edges)
    }
}

/// One input edge record: `(edge type, src id, dst id, weight)`.
pub type EdgeRecord = (String, String, String, Option<f64>);

/// Builds a graph containing exactly `records`. Errors carry the 1-based
/// record position as the line number.
pub fn load_graph(
    schema: NetworkSchema,
    records: impl IntoIterator<Item = EdgeRecord>,
    policy: DuplicatePolicy,
) -> Result<HeteroGraph> {
    let mut b = GraphBuilder::new(schema, policy);
    for (i, (et, s, d, w)) in records.into_iter().enumerate() {
        b.add_edge(&et, &s, &d, w).map_err(|e| e.at_line(i + 1))?;
    }
    Ok(b.build())
}
