//! Edge-list files: UTF-8, one edge per line as `src<TAB>dst[<TAB>weight]`,
//! `#` comment lines and blank lines ignored. One file per edge type.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{DuplicatePolicy, GraphBuilder, HeteroGraph};
use crate::schema::NetworkSchema;

/// `(line number, src, dst, weight)`.
pub type EdgeLine = (usize, String, String, Option<f64>);

pub fn read_edge_list<R: BufRead>(r: R) -> Result<Vec<EdgeLine>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        let (src, dst, weight) = match fields.as_slice() {
            [s, d] => (*s, *d, None),
            [s, d, w] => {
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad weight `{w}`")))?;
                (*s, *d, Some(w))
            }
            _ => {
                return Err(Error::parse(
                    line_no,
                    "expected `src<TAB>dst` or `src<TAB>dst<TAB>weight`",
                ))
            }
        };
        if src.is_empty() || dst.is_empty() {
            return Err(Error::parse(line_no, "empty node id"));
        }
        out.push((line_no, src.to_string(), dst.to_string(), weight));
    }
    Ok(out)
}

/// Writes every edge of `edge_type` in insertion order. Weights use the
/// shortest representation that parses back to the same value.
pub fn write_edge_list<W: Write>(graph: &HeteroGraph, edge_type: &str, mut w: W) -> Result<()> {
    let et = graph.schema().edge_type_index(edge_type)?;
    let def = &graph.schema().edge_types()[et];
    let sv = graph.vocab_by_name(def.src.as_str())?;
    let dv = graph.vocab_by_name(def.dst.as_str())?;
    let n = graph.edge_count(edge_type)?;
    for i in 0..n {
        let (s, d, weight) = graph.edge_at(et, i);
        match weight {
            Some(x) => writeln!(w, "{}\t{}\t{}", sv[s as usize], dv[d as usize], x)?,
            None => writeln!(w, "{}\t{}", sv[s as usize], dv[d as usize])?,
        }
    }
    Ok(())
}

pub fn read_schema(path: &Path) -> Result<NetworkSchema> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    NetworkSchema::parse(&text).map_err(|e| e.in_file(path))
}

/// Loads one edge-list file per edge type. Edge types without a file are
/// left empty.
pub fn load_graph_files(
    schema: NetworkSchema,
    edge_files: &[(String, PathBuf)],
    policy: DuplicatePolicy,
) -> Result<HeteroGraph> {
    let mut b = GraphBuilder::new(schema, policy);
    for (et, path) in edge_files {
        let f = fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        let lines = read_edge_list(BufReader::new(f)).map_err(|e| e.in_file(path))?;
        for (line, s, d, w) in lines {
            b.add_edge(et, &s, &d, w)
                .map_err(|e| e.at_line(line).in_file(path))?;
        }
    }
    Ok(b.build())
}

/// Writes `schema.txt` and `<edge type>.tsv` for every edge type into `dir`.
/// Returns the edge file paths in schema order.
pub fn write_graph(graph: &HeteroGraph, dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("schema.txt"), graph.schema().to_text())?;
    let mut files = Vec::new();
    for def in graph.schema().edge_types() {
        let path = dir.join(format!("{}.tsv", def.name));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        write_edge_list(graph, &def.name, &mut w)?;
        w.flush()?;
        files.push((def.name.clone(), path));
    }
    Ok(files)
}
