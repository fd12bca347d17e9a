//! Synthetic heterogeneous rating data of a requested shape.
//!
//! Node `i` of type `t` gets the id `<t><i>` and belongs to block
//! `i % blocks`. Every source node of an edge type picks `branching`
//! distinct destinations. With planted blocks, rating edges stay inside the
//! user's block with probability `in_block_prob` and in-block ratings are
//! raised by `rating_shift`; edges of an `aligned` type only connect nodes of
//! the same block.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DuplicatePolicy, GraphBuilder, HeteroGraph};
use crate::rng::named_rng;
use crate::schema::{EdgeTypeDef, NetworkSchema, NodeTypeId, WeightRange};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default)]
    pub seed: u64,
    pub nodes: Vec<SynthNodes>,
    pub edges: Vec<SynthEdges>,
    #[serde(default)]
    pub ratings: RatingDistribution,
    #[serde(default)]
    pub planted: Option<Planted>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthNodes {
    pub name: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthEdges {
    pub name: String,
    pub src: String,
    pub dst: String,
    /// Destinations per source node.
    pub branching: usize,
    /// Weighted by the rating distribution and subject to planted blocks.
    #[serde(default)]
    pub rating: bool,
    #[serde(default)]
    pub aligned: bool,
}

/// Integer ratings `min..=max`. `weights`, when given, holds one relative
/// probability per value; otherwise values are uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatingDistribution {
    pub min: i32,
    pub max: i32,
    pub weights: Option<Vec<f64>>,
}

impl Default for RatingDistribution {
    fn default() -> Self {
        RatingDistribution {
            min: 1,
            max: 5,
            weights: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Planted {
    pub blocks: usize,
    pub in_block_prob: f64,
    #[serde(default)]
    pub rating_shift: f64,
}

fn infeasible(msg: String) -> Error {
    Error::InvalidParameter(format!("infeasible synthetic spec: {msg}"))
}

impl SyntheticSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn schema(&self) -> Result<NetworkSchema> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeTypeId::new(n.name.clone()))
            .collect::<Result<Vec<_>>>()?;
        let range = WeightRange::new(self.ratings.min as f64, self.ratings.max as f64)?;
        let edges = self
            .edges
            .iter()
            .map(|e| {
                EdgeTypeDef::new(
                    e.name.clone(),
                    &e.src,
                    &e.dst,
                    e.rating.then_some(range),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkSchema::new(nodes, edges)
    }

    fn count(&self, name: &str) -> usize {
        self.nodes.iter().find(|n| n.name == name).map_or(0, |n| n.count)
    }

    pub fn validate(&self) -> Result<NetworkSchema> {
        let schema = self.schema()?;
        for n in &self.nodes {
            if n.count == 0 {
                return Err(infeasible(format!("node type `{}` has no nodes", n.name)));
            }
        }
        let r = &self.ratings;
        if r.min > r.max {
            return Err(infeasible("rating min exceeds max".into()));
        }
        if let Some(w) = &r.weights {
            if w.len() != (r.max - r.min + 1) as usize || w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(infeasible("rating weights need one non-negative value per rating".into()));
            }
        }
        let blocks = self.planted.as_ref().map_or(1, |p| p.blocks);
        if let Some(p) = &self.planted {
            if p.blocks == 0 || !(0.0..=1.0).contains(&p.in_block_prob) {
                return Err(infeasible("planted blocks need blocks >= 1 and in_block_prob in [0, 1]".into()));
            }
        }
        for e in &self.edges {
            if e.branching == 0 {
                return Err(infeasible(format!("edge type `{}` has branching 0", e.name)));
            }
            let universe = self.count(&e.dst);
            // the smallest block bounds what a block-restricted pick can reach
            let reach = if e.aligned { universe / blocks } else { universe };
            if e.branching > reach {
                return Err(infeasible(format!(
                    "edge type `{}` needs {} destinations but only {reach} are reachable",
                    e.name, e.branching
                )));
            }
            if e.rating && self.planted.is_some() {
                let in_block = universe / blocks;
                if e.branching > in_block && self.planted.as_ref().unwrap().in_block_prob == 1.0 {
                    return Err(infeasible(format!("edge type `{}` cannot stay inside blocks", e.name)));
                }
            }
        }
        Ok(schema)
    }

    pub fn generate(&self) -> Result<HeteroGraph> {
        let schema = self.validate()?;
        let mut b = GraphBuilder::new(schema, DuplicatePolicy::Reject);
        for n in &self.nodes {
            for i in 0..n.count {
                b.add_node(&n.name, &format!("{}{i}", n.name))?;
            }
        }
        let blocks = self.planted.as_ref().map_or(1, |p| p.blocks);
        let dist = &self.ratings;
        let values: Vec<i32> = (dist.min..=dist.max).collect();
        let picker = dist
            .weights
            .as_ref()
            .map(|w| rand::distr::weighted::WeightedIndex::new(w).expect("validated"));
        for e in &self.edges {
            let mut rng = named_rng(self.seed, &format!("synth/{}", e.name));
            let n_dst = self.count(&e.dst);
            let block_members = |blk: usize| -> Vec<usize> { (blk..n_dst).step_by(blocks).collect() };
            for s in 0..self.count(&e.src) {
                let blk = s % blocks;
                let dsts: Vec<(usize, bool)> = if e.aligned {
                    let members = block_members(blk);
                    sample(&mut rng, members.len(), e.branching)
                        .into_iter()
                        .map(|k| (members[k], true))
                        .collect()
                } else if let (true, Some(p)) = (e.rating, &self.planted) {
                    planted_pick(&mut rng, n_dst, blocks, blk, e.branching, p.in_block_prob)
                } else {
                    sample(&mut rng, n_dst, e.branching)
                        .into_iter()
                        .map(|d| (d, d % blocks == blk))
                        .collect()
                };
                let mut dsts = dsts;
                dsts.sort_unstable();
                for (d, same_block) in dsts {
                    let w = if e.rating {
                        let base = match &picker {
                            Some(p) => values[rng.sample(p)],
                            None => values[rng.random_range(0..values.len())],
                        } as f64;
                        let shift = match &self.planted {
                            Some(p) if same_block => p.rating_shift,
                            _ => 0.0,
                        };
                        Some((base + shift).clamp(dist.min as f64, dist.max as f64))
                    } else {
                        None
                    };
                    b.add_edge(&e.name, &format!("{}{s}", e.src), &format!("{}{d}", e.dst), w)?;
                }
            }
        }
        Ok(b.build())
    }

    /// Generates the graph and writes `schema.txt` plus one edge file per
    /// type into `dir`.
    pub fn write(&self, dir: &Path) -> Result<HeteroGraph> {
        let g = self.generate()?;
        fs::create_dir_all(dir)?;
        crate::io::write_graph(&g, dir)?;
        Ok(g)
    }
}

/// `k` distinct destinations; each draw stays in block `blk` with
/// probability `p_in` while both pools last.
fn planted_pick<R: Rng>(rng: &mut R, n: usize, blocks: usize, blk: usize, k: usize, p_in: f64) -> Vec<(usize, bool)> {
    let mut inside: Vec<usize> = (0..n).filter(|d| d % blocks == blk).collect();
    let mut outside: Vec<usize> = (0..n).filter(|d| d % blocks != blk).collect();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let take_in = if inside.is_empty() {
            false
        } else if outside.is_empty() {
            true
        } else {
            rng.random_bool(p_in)
        };
        let pool = if take_in { &mut inside } else { &mut outside };
        let i = rng.random_range(0..pool.len());
        out.push((pool.swap_remove(i), take_in));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Direction;

    fn spec(branching: usize) -> SyntheticSpec {
        SyntheticSpec::from_toml(&format!(
            r#"
seed = 3
nodes = [{{ name = "user", count = 10 }}, {{ name = "item", count = 10 }}, {{ name = "tag", count = 6 }}]
edges = [
  {{ name = "ui", src = "user", dst = "item", branching = 4, rating = true }},
  {{ name = "it", src = "item", dst = "tag", branching = {branching} }},
]
"#
        ))
        .unwrap()
    }

    #[test]
    fn branching_one_gives_one_edge_per_source() {
        let g = spec(1).generate().unwrap();
        assert_eq!(g.edge_count("it").unwrap(), 10);
        assert_eq!(g.edge_count("ui").unwrap(), 40);
    }

    #[test]
    fn point_mass_ratings() {
        let mut s = spec(2);
        s.ratings = RatingDistribution { min: 1, max: 5, weights: Some(vec![0.0, 0.0, 0.0, 0.0, 1.0]) };
        let g = s.generate().unwrap();
        assert!(g.edges().filter(|e| e.edge_type == "ui").all(|e| e.weight == Some(5.0)));
    }

    #[test]
    fn infeasible_branching() {
        assert!(spec(7).generate().is_err());
        let mut s = spec(1);
        s.edges[1].branching = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn planted_blocks_raise_in_block_ratings() {
        let mut s = spec(1);
        s.nodes[0].count = 40;
        s.nodes[1].count = 40;
        s.edges[0].branching = 10;
        s.ratings = RatingDistribution { min: 1, max: 5, weights: Some(vec![0.0, 1.0, 1.0, 1.0, 0.0]) };
        s.planted = Some(Planted { blocks: 2, in_block_prob: 0.7, rating_shift: 1.0 });
        let g = s.generate().unwrap();
        let et = g.schema().edge_type_index("ui").unwrap();
        let (mut sum_in, mut n_in, mut sum_out, mut n_out) = (0.0, 0, 0.0, 0);
        for i in 0..g.edge_count("ui").unwrap() {
            let (u, m, w) = g.edge_at(et, i);
            let (uid, mid) = (&g.vocab(0)[u as usize], &g.vocab(1)[m as usize]);
            let ub: usize = uid[4..].parse::<usize>().unwrap() % 2;
            let mb: usize = mid[4..].parse::<usize>().unwrap() % 2;
            if ub == mb {
                sum_in += w.unwrap();
                n_in += 1;
            } else {
                sum_out += w.unwrap();
                n_out += 1;
            }
        }
        assert!(n_in > n_out);
        // base mean is 3 on both sides, so the gap is the shift exactly
        assert!((sum_in / n_in as f64 - sum_out / n_out as f64 - 1.0).abs() < 0.35);
        assert!(g.adjacency(et, Direction::Forward).degree(0) == 10);
    }

    #[test]
    fn aligned_edges_stay_in_block() {
        let mut s = spec(2);
        s.planted = Some(Planted { blocks: 2, in_block_prob: 1.0, rating_shift: 0.0 });
        s.edges[1].aligned = true;
        let g = s.generate().unwrap();
        let et = g.schema().edge_type_index("it").unwrap();
        for i in 0..g.edge_count("it").unwrap() {
            let (m, t, _) = g.edge_at(et, i);
            let mid: usize = g.vocab(1)[m as usize][4..].parse().unwrap();
            let tid: usize = g.vocab(2)[t as usize][3..].parse().unwrap();
            assert_eq!(mid % 2, tid % 2);
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let a: Vec<_> = spec(2).generate().unwrap().edges().collect();
        let b: Vec<_> = spec(2).generate().unwrap().edges().collect();
        assert_eq!(a, b);
    }
}
