//! Sparse relations between two entity types, as produced by meta-path
//! expansion or sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, Vocab};
use crate::schema::NodeTypeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GenerationMethod {
    Full,
    Sampled,
}

impl fmt::Display for GenerationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenerationMethod::Full => "full",
            GenerationMethod::Sampled => "sampled",
        })
    }
}

impl FromStr for GenerationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(GenerationMethod::Full),
            "sampled" => Ok(GenerationMethod::Sampled),
            _ => Err(Error::InvalidParameter(format!("unknown generation method `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub label: String,
    /// Meta-path literal the relation was generated from.
    pub metapath: String,
    pub method: GenerationMethod,
    pub walks_per_start: Option<usize>,
    pub seed: Option<u64>,
    /// Walks that hit a dead end on every retry.
    pub failures: u64,
    /// Free-form tag naming the graph the relation came from, e.g. `train`.
    pub source: String,
}

/// Sparse `(src, dst) -> count` map. Rows are sorted by source index and each
/// row by destination index; stored counts are strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationMatrix {
    pub src_type: NodeTypeId,
    pub dst_type: NodeTypeId,
    pub src_vocab: Vocab,
    pub dst_vocab: Vocab,
    rows: Vec<(u32, Vec<(u32, f64)>)>,
    pub provenance: Provenance,
}

impl RelationMatrix {
    /// Assembles a relation from per-source rows in any order. Zero and
    /// empty entries are dropped; duplicate destinations within a row are
    /// summed.
    pub fn from_rows(
        src_type: NodeTypeId,
        dst_type: NodeTypeId,
        src_vocab: Vocab,
        dst_vocab: Vocab,
        rows: impl IntoIterator<Item = (u32, Vec<(u32, f64)>)>,
        provenance: Provenance,
    ) -> Self {
        let mut merged: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();
        for (src, row) in rows {
            let entry = merged.entry(src).or_default();
            for (dst, c) in row {
                *entry.entry(dst).or_insert(0.0) += c;
            }
        }
        let rows = merged
            .into_iter()
            .map(|(s, r)| (s, r.into_iter().filter(|&(_, c)| c > 0.0).collect::<Vec<_>>()))
            .filter(|(_, r)| !r.is_empty())
            .collect();
        RelationMatrix {
            src_type,
            dst_type,
            src_vocab,
            dst_vocab,
            rows,
            provenance,
        }
    }

    /// Rows that are already sorted, deduplicated and positive.
    pub(crate) fn from_sorted_rows(
        src_type: NodeTypeId,
        dst_type: NodeTypeId,
        src_vocab: Vocab,
        dst_vocab: Vocab,
        rows: Vec<(u32, Vec<(u32, f64)>)>,
        provenance: Provenance,
    ) -> Self {
        debug_assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(rows.iter().all(|(_, r)| !r.is_empty()
            && r.windows(2).all(|w| w[0].0 < w[1].0)
            && r.iter().all(|&(_, c)| c > 0.0)));
        RelationMatrix {
            src_type,
            dst_type,
            src_vocab,
            dst_vocab,
            rows,
            provenance,
        }
    }

    pub fn label(&self) -> &str {
        &self.provenance.label
    }

    pub fn rows(&self) -> &[(u32, Vec<(u32, f64)>)] {
        &self.rows
    }

    pub fn row(&self, src: u32) -> &[(u32, f64)] {
        match self.rows.binary_search_by_key(&src, |(s, _)| *s) {
            Ok(i) => &self.rows[i].1,
            Err(_) => &[],
        }
    }

    pub fn get(&self, src: u32, dst: u32) -> f64 {
        let row = self.row(src);
        match row.binary_search_by_key(&dst, |(d, _)| *d) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.rows
            .iter()
            .flat_map(|(s, r)| r.iter().map(move |&(d, c)| (*s, d, c)))
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|(_, r)| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_count(&self) -> f64 {
        self.entries().map(|(_, _, c)| c).sum()
    }

    /// Divides every row by its sum.
    pub fn row_normalized(&self) -> RelationMatrix {
        let mut out = self.clone();
        for (_, row) in &mut out.rows {
            let total: f64 = row.iter().map(|(_, c)| c).sum();
            for (_, c) in row.iter_mut() {
                *c /= total;
            }
        }
        out
    }

    /// Divides every count by the per-start walk budget, when there is one.
    pub fn per_walk_frequencies(&self) -> RelationMatrix {
        let mut out = self.clone();
        if let Some(s) = self.provenance.walks_per_start {
            for (_, row) in &mut out.rows {
                for (_, c) in row.iter_mut() {
                    *c /= s as f64;
                }
            }
        }
        out
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.provenance;
        writeln!(w, "# label={}", p.label)?;
        writeln!(w, "# metapath={}", p.metapath)?;
        writeln!(w, "# src_type={}", self.src_type)?;
        writeln!(w, "# dst_type={}", self.dst_type)?;
        writeln!(w, "# method={}", p.method)?;
        if let Some(s) = p.walks_per_start {
            writeln!(w, "# walks_per_start={s}")?;
        }
        if let Some(s) = p.seed {
            writeln!(w, "# seed={s}")?;
        }
        writeln!(w, "# failures={}", p.failures)?;
        writeln!(w, "# source={}", p.source)?;
        for (s, d, c) in self.entries() {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.src_vocab[s as usize], self.dst_vocab[d as usize], c
            )?;
        }
        Ok(())
    }

    /// Reads the TSV form, resolving ids against `graph`'s node vocabularies.
    pub fn read_tsv<R: BufRead>(r: R, graph: &HeteroGraph) -> Result<RelationMatrix> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut entries = Vec::new();
        let mut types: Option<(usize, usize)> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if let Some(h) = line.strip_prefix('#') {
                if let Some((k, v)) = h.trim().split_once('=') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (st, dt) = match types {
                Some(t) => t,
                None => {
                    let get = |k: &str| {
                        header
                            .get(k)
                            .ok_or_else(|| Error::parse(line_no, format!("missing `{k}` header")))
                    };
                    let st = graph.schema().node_type_index(get("src_type")?)?;
                    let dt = graph.schema().node_type_index(get("dst_type")?)?;
                    types = Some((st, dt));
                    (st, dt)
                }
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(line_no, "expected `src<TAB>dst<TAB>count`"));
            }
            let s = graph
                .node_index(st, fields[0])
                .ok_or_else(|| Error::parse(line_no, format!("unknown source id `{}`", fields[0])))?;
            let d = graph
                .node_index(dt, fields[1])
                .ok_or_else(|| Error::parse(line_no, format!("unknown destination id `{}`", fields[1])))?;
            let c: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad count `{}`", fields[2])))?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::parse(line_no, "counts must be positive and finite"));
            }
            entries.push((s, vec![(d, c)]));
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| Error::parse(0, format!("missing `{k}` header")))
        };
        let (st, dt) = match types {
            Some(t) => t,
            None => (
                graph.schema().node_type_index(&get("src_type")?)?,
                graph.schema().node_type_index(&get("dst_type")?)?,
            ),
        };
        let parse_opt = |k: &str| -> Result<Option<u64>> {
            header
                .get(k)
                .map(|v| v.parse::<u64>().map_err(|_| Error::parse(0, format!("bad `{k}` header"))))
                .transpose()
        };
        let provenance = Provenance {
            label: get("label")?,
            metapath: header.get("metapath").cloned().unwrap_or_default(),
            method: get("method")?.parse()?,
            walks_per_start: parse_opt("walks_per_start")?.map(|v| v as usize),
            seed: parse_opt("seed")?,
            failures: parse_opt("failures")?.unwrap_or(0),
            source: header.get("source").cloned().unwrap_or_default(),
        };
        let schema = graph.schema();
        Ok(RelationMatrix::from_rows(
            schema.node_types()[st].clone(),
            schema.node_types()[dt].clone(),
            graph.vocab(st).clone(),
            graph.vocab(dt).clone(),
            entries,
            provenance,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{load_graph, DuplicatePolicy};
    use crate::schema::NetworkSchema;

    fn graph() -> HeteroGraph {
        let s = NetworkSchema::parse("[nodes]\nuser\nmovie\n[edges]\num user movie weighted(1,5)\n").unwrap();
        load_graph(
            s,
            vec![
                ("um".into(), "u1".into(), "m1".into(), Some(1.0)),
                ("um".into(), "u2".into(), "m2".into(), Some(2.0)),
                ("um".into(), "u1".into(), "m2".into(), Some(2.0)),
            ],
            DuplicatePolicy::Reject,
        )
        .unwrap()
    }

    fn prov() -> Provenance {
        Provenance {
            label: "um".into(),
            metapath: "um".into(),
            method: GenerationMethod::Sampled,
            walks_per_start: Some(10),
            seed: Some(4),
            failures: 2,
            source: "train".into(),
        }
    }

    fn rel(g: &HeteroGraph) -> RelationMatrix {
        RelationMatrix::from_rows(
            NodeTypeId::new("user").unwrap(),
            NodeTypeId::new("movie").unwrap(),
            g.vocab(0).clone(),
            g.vocab(1).clone(),
            vec![(1, vec![(1, 0.1)]), (0, vec![(1, 3.0), (0, 7.0)]), (1, vec![(1, 0.2)])],
            prov(),
        )
    }

    #[test]
    fn rows_are_sorted_and_merged() {
        let g = graph();
        let r = rel(&g);
        assert_eq!(r.rows()[0], (0, vec![(0, 7.0), (1, 3.0)]));
        assert!((r.get(1, 1) - 0.30000000000000004).abs() < 1e-15);
        assert_eq!(r.get(1, 0), 0.0);
        assert_eq!(r.nnz(), 3);
    }

    #[test]
    fn tsv_round_trip() {
        let g = graph();
        let r = rel(&g);
        let mut buf = Vec::new();
        r.write_tsv(&mut buf).unwrap();
        let back = RelationMatrix::read_tsv(&buf[..], &g).unwrap();
        assert_eq!(back, r);
        let mut again = Vec::new();
        back.write_tsv(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn normalizations() {
        let g = graph();
        let r = rel(&g);
        let n = r.row_normalized();
        assert!((n.get(0, 0) - 0.7).abs() < 1e-12);
        let f = r.per_walk_frequencies();
        assert!((f.get(0, 0) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn unknown_id_is_a_parse_error() {
        let g = graph();
        let text = "# label=x\n# src_type=user\n# dst_type=movie\n# method=full\nu9\tm1\t1\n";
        let err = RelationMatrix::read_tsv(text.as_bytes(), &g).unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
    }
}
