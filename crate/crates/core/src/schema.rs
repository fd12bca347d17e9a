//! Network schemas: node types and typed, directed, optionally weighted edge
//! types.
//!
//! The text form has a `[nodes]` section with one node type per line and an
//! `[edges]` section with one edge type per line:
//!
//! ```text
//! [nodes]
//! user
//! movie
//! genre
//!
//! [edges]
//! um user movie weighted(1,5)
//! mg movie genre
//! ```

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Label of a node type, e.g. `user` or `movie`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeTypeId(String);

impl NodeTypeId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Schema(format!("invalid node type name `{name}`")));
        }
        Ok(NodeTypeId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeTypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Closed interval of admissible edge weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightRange {
    pub min: f64,
    pub max: f64,
}

impl WeightRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(Error::Schema(format!("invalid weight range [{min}, {max}]")));
        }
        Ok(WeightRange { min, max })
    }

    pub fn contains(&self, w: f64) -> bool {
        w >= self.min && w <= self.max
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTypeDef {
    pub name: String,
    pub src: NodeTypeId,
    pub dst: NodeTypeId,
    /// Present iff the edge type is weighted.
    pub weight_range: Option<WeightRange>,
}

impl EdgeTypeDef {
    pub fn new(
        name: impl Into<String>,
        src: &str,
        dst: &str,
        weight_range: Option<WeightRange>,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(Error::Schema(format!("invalid edge type name `{name}`")));
        }
        Ok(EdgeTypeDef {
            name,
            src: NodeTypeId::new(src)?,
            dst: NodeTypeId::new(dst)?,
            weight_range,
        })
    }

    pub fn weighted(&self) -> bool {
        self.weight_range.is_some()
    }
}

/// Validated set of node and edge types. Declaration order is kept and
/// defines the dense indices used throughout the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSchema {
    node_types: Vec<NodeTypeId>,
    edge_types: Vec<EdgeTypeDef>,
}

impl NetworkSchema {
    pub fn new(node_types: Vec<NodeTypeId>, edge_types: Vec<EdgeTypeDef>) -> Result<Self> {
        let mut seen = HashSet::new();
        for nt in &node_types {
            if !seen.insert(nt.as_str()) {
                return Err(Error::Schema(format!("duplicate node type `{nt}`")));
            }
        }
        let mut seen_edges = HashSet::new();
        for et in &edge_types {
            if !seen_edges.insert(et.name.as_str()) {
                return Err(Error::Schema(format!("duplicate edge type `{}`", et.name)));
            }
            for end in [&et.src, &et.dst] {
                if !seen.contains(end.as_str()) {
                    return Err(Error::Schema(format!(
                        "edge type `{}` references undeclared node type `{end}`",
                        et.name
                    )));
                }
            }
        }
        Ok(NetworkSchema {
            node_types,
            edge_types,
        })
    }

    pub fn node_types(&self) -> &[NodeTypeId] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[EdgeTypeDef] {
        &self.edge_types
    }

    pub fn node_type_index(&self, name: &str) -> Result<usize> {
        self.node_types
            .iter()
            .position(|t| t.as_str() == name)
            .ok_or_else(|| Error::UnknownNodeType(name.to_string()))
    }

    pub fn edge_type_index(&self, name: &str) -> Result<usize> {
        self.edge_types
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::UnknownEdgeType(name.to_string()))
    }

    pub fn edge_type(&self, name: &str) -> Result<&EdgeTypeDef> {
        self.edge_type_index(name).map(|i| &self.edge_types[i])
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Nodes,
            Edges,
        }
        let mut section = Section::None;
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[nodes]" => section = Section::Nodes,
                "[edges]" => section = Section::Edges,
                _ => match section {
                    Section::None => {
                        return Err(Error::parse(line_no, "entry outside of a section"))
                    }
                    Section::Nodes => {
                        nodes.push(NodeTypeId::new(line).map_err(|e| e.at_line(line_no))?)
                    }
                    Section::Edges => {
                        edges.push(parse_edge_line(line).map_err(|e| e.at_line(line_no))?)
                    }
                },
            }
        }
        NetworkSchema::new(nodes, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[nodes]\n");
        for nt in &self.node_types {
            out.push_str(nt.as_str());
            out.push('\n');
        }
        out.push_str("\n[edges]\n");
        for et in &self.edge_types {
            out.push_str(&format!("{} {} {}", et.name, et.src, et.dst));
            if let Some(r) = et.weight_range {
                out.push_str(&format!(" weighted({},{})", r.min, r.max));
            }
            out.push('\n');
        }
        out
    }
}

impl FromStr for NetworkSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NetworkSchema::parse(s)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_edge_line(line: &str) -> Result<EdgeTypeDef> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    match fields.as_slice() {
        [name, src, dst] => EdgeTypeDef::new(*name, src, dst, None),
        [name, src, dst, w] => {
            let inner = w
                .strip_prefix("weighted(")
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| Error::Schema(format!("expected weighted(min,max), got `{w}`")))?;
            let (lo, hi) = inner
                .split_once(',')
                .ok_or_else(|| Error::Schema(format!("expected weighted(min,max), got `{w}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Schema(format!("bad weight bound `{s}`")))
            };
            let range = WeightRange::new(parse(lo)?, parse(hi)?)?;
            EdgeTypeDef::new(*name, src, dst, Some(range))
        }
        _ => Err(Error::Schema(format!(
            "expected `name src dst [weighted(min,max)]`, got `{line}`"
        ))),
    }
}
