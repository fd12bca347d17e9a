//! Meta-paths: typed sequences of edge-type traversals.
//!
//! Literal syntax is a comma-separated list of edge type names, each with an
//! optional `>` (forward, the default) or `<` (reverse) prefix. For the
//! MovieLens schema `um,>mg,<mg` walks user -> movie -> genre -> movie and is
//! labelled `umgm`.

use std::fmt;

use crate::error::{Error, Result};
use crate::graph::Direction;
use crate::schema::NetworkSchema;

pub const DEFAULT_MAX_STEPS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Step {
    pub edge_type: String,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MetaPath {
    steps: Vec<Step>,
    label: String,
}

/// A meta-path bound to schema indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedPath {
    pub steps: Vec<(usize, Direction)>,
    /// Node type index at each position, `steps.len() + 1` entries.
    pub node_types: Vec<usize>,
}

impl ResolvedPath {
    pub fn src_type(&self) -> usize {
        self.node_types[0]
    }

    pub fn dst_type(&self) -> usize {
        *self.node_types.last().unwrap()
    }
}

impl MetaPath {
    /// Builds and validates a meta-path. An empty `label` is replaced by one
    /// derived from the schema.
    pub fn new(steps: Vec<Step>, label: Option<String>, schema: &NetworkSchema) -> Result<Self> {
        let mut mp = MetaPath {
            steps,
            label: String::new(),
        };
        validate_metapath(&mp, schema, usize::MAX)?;
        mp.label = match label {
            Some(l) if !l.is_empty() => l,
            _ => derive_label(&mp.steps, schema),
        };
        Ok(mp)
    }

    /// Parses the literal syntax and validates it against `schema`.
    pub fn parse(literal: &str, schema: &NetworkSchema) -> Result<Self> {
        MetaPath::new(parse_steps(literal)?, None, schema)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The literal form, e.g. `um,>mg,<mg`.
    pub fn literal(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| match (i, s.direction) {
                (0, Direction::Forward) => s.edge_type.clone(),
                (_, d) => format!("{d}{}", s.edge_type),
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn resolve(&self, schema: &NetworkSchema) -> Result<ResolvedPath> {
        let mut steps = Vec::with_capacity(self.steps.len());
        let mut node_types: Vec<usize> = Vec::with_capacity(self.steps.len() + 1);
        for (i, step) in self.steps.iter().enumerate() {
            let et = schema.edge_type_index(&step.edge_type)?;
            let def = &schema.edge_types()[et];
            let (from, to) = match step.direction {
                Direction::Forward => (&def.src, &def.dst),
                Direction::Reverse => (&def.dst, &def.src),
            };
            let from_idx = schema.node_type_index(from.as_str())?;
            if let Some(&prev) = node_types.last() {
                if prev != from_idx {
                    return Err(Error::TypeMismatch {
                        step: i + 1,
                        expected: schema.node_types()[prev].to_string(),
                        found: from.to_string(),
                    });
                }
            } else {
                node_types.push(from_idx);
            }
            node_types.push(schema.node_type_index(to.as_str())?);
            steps.push((et, step.direction));
        }
        Ok(ResolvedPath { steps, node_types })
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.label, self.literal())
    }
}

pub fn parse_steps(literal: &str) -> Result<Vec<Step>> {
    let steps = literal
        .split(',')
        .map(str::trim)
        .map(|tok| {
            let (direction, name) = if let Some(rest) = tok.strip_prefix('>') {
                (Direction::Forward, rest)
            } else if let Some(rest) = tok.strip_prefix('<') {
                (Direction::Reverse, rest)
            } else {
                (Direction::Forward, tok)
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::MetaPath(format!("empty step in `{literal}`")));
            }
            Ok(Step {
                edge_type: name.to_string(),
                direction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(steps)
}

/// Checks that `mp` is non-empty, at most `max_steps` long and that
/// consecutive steps meet at the same node type.
pub fn validate_metapath(mp: &MetaPath, schema: &NetworkSchema, max_steps: usize) -> Result<()> {
    if mp.steps.is_empty() {
        return Err(Error::MetaPath("meta-path has no steps".into()));
    }
    if mp.steps.len() > max_steps {
        return Err(Error::MetaPath(format!(
            "{} steps exceeds the maximum of {max_steps}",
            mp.steps.len()
        )));
    }
    mp.resolve(schema).map(|_| ())
}

fn oriented_name(step: &Step) -> String {
    match step.direction {
        Direction::Forward => step.edge_type.clone(),
        Direction::Reverse => step.edge_type.chars().rev().collect(),
    }
}

/// `umgm`-style labels when every edge name is a two-letter abbreviation of
/// its endpoints, otherwise node type names joined by `-`.
fn derive_label(steps: &[Step], schema: &NetworkSchema) -> String {
    let names: Vec<String> = steps.iter().map(oriented_name).collect();
    let compact = names.iter().all(|n| n.chars().count() == 2)
        && names
            .windows(2)
            .all(|w| w[0].chars().nth(1) == w[1].chars().next());
    if compact {
        let mut label = names[0].clone();
        for n in &names[1..] {
            label.push(n.chars().nth(1).unwrap());
        }
        return label;
    }
    let mp = MetaPath {
        steps: steps.to_vec(),
        label: String::new(),
    };
    let resolved = mp.resolve(schema).expect("validated");
    resolved
        .node_types
        .iter()
        .map(|&t| schema.node_types()[t].as_str())
        .collect::<Vec<_>>()
        .join("-")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> NetworkSchema {
        NetworkSchema::parse(
            "[nodes]\nuser\nmovie\ngenre\ndirector\nactor\n[edges]\num user movie weighted(1,5)\nmg movie genre\nmd movie director\nma movie actor\n",
        )
        .unwrap()
    }

    #[test]
    fn umgm_is_valid() {
        let mp = MetaPath::parse("um,>mg,<mg", &schema()).unwrap();
        assert_eq!(mp.label(), "umgm");
        assert_eq!(mp.literal(), "um,>mg,<mg");
        let r = mp.resolve(&schema()).unwrap();
        assert_eq!(r.node_types, vec![0, 1, 2, 1]);
    }

    #[test]
    fn unknown_edge_type() {
        let err = MetaPath::parse("um,bc", &schema()).unwrap_err();
        assert!(matches!(err, Error::UnknownEdgeType(ref n) if n == "bc"));
    }

    #[test]
    fn type_mismatch_reports_step_and_types() {
        let err = MetaPath::parse("um,um", &schema()).unwrap_err();
        match err {
            Error::TypeMismatch { step, expected, found } => {
                assert_eq!(step, 2);
                assert_eq!(expected, "movie");
                assert_eq!(found, "user");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn max_length_enforced() {
        let mp = MetaPath::parse("um,>mg,<mg,>ma", &schema()).unwrap();
        assert!(validate_metapath(&mp, &schema(), DEFAULT_MAX_STEPS).is_err());
        assert!(validate_metapath(&mp, &schema(), 4).is_ok());
    }

    #[test]
    fn empty_step_rejected() {
        assert!(parse_steps("um,,mg").is_err());
    }

    #[test]
    fn long_names_fall_back_to_type_chain() {
        let s = NetworkSchema::parse("[nodes]\nuser\nbook\n[edges]\nrates user book weighted(1,10)\n").unwrap();
        let mp = MetaPath::parse("rates,<rates", &s).unwrap();
        assert_eq!(mp.label(), "user-book-user");
    }
}
