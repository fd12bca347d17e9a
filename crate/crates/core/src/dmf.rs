//! Multi-relational matrix factorization trained with Bayesian Personalized
//! Ranking.
//!
//! Every entity type owns one latent factor matrix that is shared by all
//! relations touching the type. One target relation is the prediction task;
//! auxiliary relations contribute ranking triples that shape the same
//! factors. Relation counts are binarized: any stored entry is a positive.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::eval::top_k;
use crate::graph::Vocab;
use crate::relation::RelationMatrix;
use crate::rng::named_rng;

const MAX_NEGATIVE_REJECTIONS: usize = 100;
const MAX_SOURCE_RESAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub dim: usize,
    pub lr: f64,
    pub reg: f64,
    pub epochs: usize,
    pub neg_samples: usize,
    /// Per-relation weight; relations not listed use `default_weight`.
    pub relation_weights: BTreeMap<String, f64>,
    pub default_weight: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 32,
            lr: 0.05,
            reg: 0.01,
            epochs: 30,
            neg_samples: 1,
            relation_weights: BTreeMap::new(),
            default_weight: 1.0,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn weight(&self, label: &str) -> f64 {
        self.relation_weights
            .get(label)
            .copied()
            .unwrap_or(self.default_weight)
    }

    pub fn validate(&self, target: &str) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return bad(format!("regularization {} must be non-negative", self.reg));
        }
        if self.neg_samples == 0 {
            return bad("neg_samples must be at least 1".into());
        }
        if self.default_weight < 0.0 || self.relation_weights.values().any(|&w| !(w >= 0.0)) {
            return bad("relation weights must be non-negative".into());
        }
        if !(self.weight(target) > 0.0) {
            return bad(format!("target relation `{target}` needs a positive weight"));
        }
        Ok(())
    }
}

/// Latent factors of one entity type, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Factors {
    pub vocab: Vocab,
    dim: usize,
    data: Vec<f64>,
}

impl Factors {
    pub fn rows(&self) -> usize {
        self.vocab.len()
    }

    #[inline]
    pub fn row(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: u32) -> &mut [f64] {
        let i = i as usize;
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.vocab.iter().position(|v| v == id).map(|i| i as u32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    pub dim: usize,
    pub factors: BTreeMap<String, Factors>,
    pub hyperparams: Hyperparams,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingTriple {
    pub relation: String,
    pub src_type: String,
    pub dst_type: String,
    pub src: u32,
    pub pos: u32,
    pub neg: u32,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(x)`, computed without overflow.
#[inline]
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

impl FactorModel {
    pub fn factors(&self, node_type: &str) -> Result<&Factors> {
        self.factors
            .get(node_type)
            .ok_or_else(|| Error::UnknownNodeType(node_type.to_string()))
    }

    pub fn score(&self, src_type: &str, src: u32, dst_type: &str, dst: u32) -> Result<f64> {
        let s = self.factors(src_type)?;
        let d = self.factors(dst_type)?;
        if src as usize >= s.rows() || dst as usize >= d.rows() {
            return Err(Error::InvalidParameter("entity index out of range".into()));
        }
        Ok(dot(s.row(src), d.row(dst)))
    }

    /// Scores of `src` against every entity of `dst_type`.
    pub fn score_all(&self, src_type: &str, src: u32, dst_type: &str) -> Result<Vec<f64>> {
        let s = self.factors(src_type)?;
        let d = self.factors(dst_type)?;
        if src as usize >= s.rows() {
            return Err(Error::InvalidParameter(format!("unknown {src_type} index {src}")));
        }
        let f = s.row(src);
        Ok((0..d.rows() as u32).map(|j| dot(f, d.row(j))).collect())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let hp = &self.hyperparams;
        writeln!(w, "# metawalk factor model")?;
        writeln!(w, "# dim={}", self.dim)?;
        writeln!(
            w,
            "# lr={} reg={} epochs={} neg_samples={} default_weight={} seed={}",
            hp.lr, hp.reg, hp.epochs, hp.neg_samples, hp.default_weight, hp.seed
        )?;
        for (label, a) in &hp.relation_weights {
            writeln!(w, "# weight {label}={a}")?;
        }
        for (t, f) in &self.factors {
            writeln!(w, "[{} {}]", t, f.rows())?;
            for i in 0..f.rows() as u32 {
                let mut line = f.vocab[i as usize].clone();
                for x in f.row(i) {
                    let _ = write!(line, "\t{x}");
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<FactorModel> {
        let mut hp = Hyperparams::default();
        let mut dim = None;
        let mut factors = BTreeMap::new();
        let mut current: Option<(String, Vec<String>, Vec<f64>)> = None;
        let finish = |cur: Option<(String, Vec<String>, Vec<f64>)>, factors: &mut BTreeMap<String, Factors>, dim: usize| {
            if let Some((t, ids, data)) = cur {
                factors.insert(
                    t,
                    Factors {
                        vocab: Vocab::new(ids),
                        dim,
                        data,
                    },
                );
            }
        };
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if let Some(h) = line.strip_prefix('#') {
                let h = h.trim();
                if let Some(rest) = h.strip_prefix("weight ") {
                    let (k, v) = rest.split_once('=').ok_or_else(|| Error::parse(line_no, "bad weight"))?;
                    let v = v.parse().map_err(|_| Error::parse(line_no, "bad weight"))?;
                    hp.relation_weights.insert(k.to_string(), v);
                    continue;
                }
                for kv in h.split_whitespace() {
                    let Some((k, v)) = kv.split_once('=') else { continue };
                    let bad = || Error::parse(line_no, format!("bad header value `{kv}`"));
                    match k {
                        "dim" => dim = Some(v.parse().map_err(|_| bad())?),
                        "lr" => hp.lr = v.parse().map_err(|_| bad())?,
                        "reg" => hp.reg = v.parse().map_err(|_| bad())?,
                        "epochs" => hp.epochs = v.parse().map_err(|_| bad())?,
                        "neg_samples" => hp.neg_samples = v.parse().map_err(|_| bad())?,
                        "default_weight" => hp.default_weight = v.parse().map_err(|_| bad())?,
                        "seed" => hp.seed = v.parse().map_err(|_| bad())?,
                        _ => {}
                    }
                }
                continue;
            }
            let d = dim.ok_or_else(|| Error::parse(line_no, "missing dim header"))?;
            if let Some(block) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                finish(current.take(), &mut factors, d);
                let t = block.split_whitespace().next().ok_or_else(|| Error::parse(line_no, "empty block"))?;
                current = Some((t.to_string(), Vec::new(), Vec::new()));
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (_, ids, data) = current.as_mut().ok_or_else(|| Error::parse(line_no, "row before block"))?;
            let mut fields = line.split('\t');
            ids.push(fields.next().unwrap_or_default().to_string());
            let before = data.len();
            for f in fields {
                data.push(f.parse().map_err(|_| Error::parse(line_no, format!("bad factor `{f}`")))?);
            }
            if data.len() - before != d {
                return Err(Error::parse(line_no, format!("expected {d} factors")));
            }
        }
        let dim = dim.ok_or_else(|| Error::parse(0, "missing dim header"))?;
        finish(current, &mut factors, dim);
        hp.dim = dim;
        Ok(FactorModel {
            dim,
            factors,
            hyperparams: hp,
        })
    }
}

/// One factor matrix per entity type seen in `relations`, drawn from a
/// zero-mean normal with standard deviation `0.1 / sqrt(dim)`.
pub fn init_model(relations: &[&RelationMatrix], hp: &Hyperparams) -> Result<FactorModel> {
    if hp.dim == 0 {
        return Err(Error::InvalidParameter("dim must be at least 1".into()));
    }
    let mut vocabs: BTreeMap<String, Vocab> = BTreeMap::new();
    for r in relations {
        for (t, v) in [(&r.src_type, &r.src_vocab), (&r.dst_type, &r.dst_vocab)] {
            match vocabs.get(t.as_str()) {
                Some(existing) if !(std::sync::Arc::ptr_eq(existing, v) || existing == v) => {
                    return Err(Error::TypeCollision(t.to_string()))
                }
                Some(_) => {}
                None => {
                    vocabs.insert(t.to_string(), v.clone());
                }
            }
        }
    }
    let normal = Normal::new(0.0, 0.1 / (hp.dim as f64).sqrt()).expect("valid std");
    let factors = vocabs
        .into_iter()
        .map(|(t, vocab)| {
            let mut rng = named_rng(hp.seed, &format!("init/{t}"));
            let data = (0..vocab.len() * hp.dim).map(|_| normal.sample(&mut rng)).collect();
            (
                t,
                Factors {
                    vocab,
                    dim: hp.dim,
                    data,
                },
            )
        })
        .collect();
    Ok(FactorModel {
        dim: hp.dim,
        factors,
        hyperparams: hp.clone(),
    })
}

/// One stochastic gradient ascent step on
/// `alpha * ln sigmoid(x) - reg/2 * (|f_a|^2 + |f_pos|^2 + |f_neg|^2)` with
/// `x = <f_a, f_pos> - <f_a, f_neg>`. All three gradients use the pre-update
/// factors. Returns the triple's loss `-ln sigmoid(x)` before the update.
pub fn bpr_step(model: &mut FactorModel, t: &TrainingTriple, alpha: f64, lr: f64, reg: f64) -> Result<f64> {
    let dim = model.dim;
    let fetch = |model: &FactorModel, ty: &str, i: u32| -> Result<Vec<f64>> {
        let f = model.factors(ty)?;
        if i as usize >= f.rows() {
            return Err(Error::InvalidParameter(format!("unknown {ty} index {i}")));
        }
        Ok(f.row(i).to_vec())
    };
    let fa = fetch(model, &t.src_type, t.src)?;
    let fp = fetch(model, &t.dst_type, t.pos)?;
    let fneg = fetch(model, &t.dst_type, t.neg)?;
    let x = dot(&fa, &fp) - dot(&fa, &fneg);
    let g = alpha * sigmoid(-x);

    {
        let a = model.factors.get_mut(&t.src_type).unwrap().row_mut(t.src);
        for k in 0..dim {
            a[k] += lr * (g * (fp[k] - fneg[k]) - reg * fa[k]);
        }
    }
    let d = model.factors.get_mut(&t.dst_type).unwrap();
    {
        let p = d.row_mut(t.pos);
        for k in 0..dim {
            p[k] += lr * (g * fa[k] - reg * fp[k]);
        }
    }
    {
        let n = d.row_mut(t.neg);
        for k in 0..dim {
            n[k] += lr * (-g * fa[k] - reg * fneg[k]);
        }
    }
    Ok(neg_log_sigmoid(x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub model: FactorModel,
    /// Mean triple loss per epoch.
    pub loss_trace: Vec<f64>,
}

impl TrainedModel {
    /// `epoch,mean_loss` CSV, epochs numbered from 1.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss\n");
        for (e, l) in self.loss_trace.iter().enumerate() {
            let _ = writeln!(out, "{},{}", e + 1, l);
        }
        out
    }
}

struct Positives<'a> {
    rel: &'a RelationMatrix,
    pairs: Vec<(u32, u32)>,
    alpha: f64,
}

/// Trains on `target` plus `aux`. Each epoch draws as many positives as
/// there are positive entries overall; a draw picks a relation with
/// probability proportional to `alpha_r * |positives_r|`, then a uniform
/// positive, then `neg_samples` negatives uniformly from the destination
/// universe, rejecting known positives. Auxiliary relations are processed
/// in label order.
pub fn train_dmf(target: &RelationMatrix, aux: &[RelationMatrix], hp: &Hyperparams) -> Result<TrainedModel> {
    hp.validate(target.label())?;
    let mut labels = HashSet::new();
    for r in std::iter::once(target).chain(aux) {
        if r.is_empty() {
            return Err(Error::EmptyRelation(r.label().to_string()));
        }
        if !labels.insert(r.label()) {
            return Err(Error::InvalidParameter(format!("duplicate relation label `{}`", r.label())));
        }
    }
    // Sorting makes the result independent of the order `aux` was given in.
    let mut sorted_aux: Vec<&RelationMatrix> = aux.iter().collect();
    sorted_aux.sort_by(|a, b| a.label().cmp(b.label()));
    let all: Vec<&RelationMatrix> = std::iter::once(target).chain(sorted_aux).collect();
    let mut model = init_model(&all, hp)?;
    let rels: Vec<Positives> = all
        .iter()
        .map(|r| Positives {
            rel: r,
            pairs: r.entries().map(|(s, d, _)| (s, d)).collect(),
            alpha: hp.weight(r.label()),
        })
        .collect();
    let total: usize = rels.iter().map(|r| r.pairs.len()).sum();
    let picker = WeightedIndex::new(rels.iter().map(|r| r.alpha * r.pairs.len() as f64))
        .map_err(|e| Error::InvalidParameter(format!("relation weights: {e}")))?;
    let mut rng = named_rng(hp.seed, "negatives");
    let mut loss_trace = Vec::with_capacity(hp.epochs);
    let mut skipped = 0usize;

    for epoch in 0..hp.epochs {
        let mut loss_sum = 0.0;
        let mut n = 0usize;
        for _ in 0..total {
            let r = &rels[picker.sample(&mut rng)];
            let n_dst = r.rel.dst_vocab.len() as u32;
            let mut drawn = None;
            'source: for _ in 0..MAX_SOURCE_RESAMPLES {
                let (s, p) = r.pairs[rng.random_range(0..r.pairs.len())];
                for _ in 0..MAX_NEGATIVE_REJECTIONS {
                    let cand = rng.random_range(0..n_dst);
                    if r.rel.get(s, cand) == 0.0 {
                        drawn = Some((s, p, cand));
                        break 'source;
                    }
                }
            }
            let Some((s, p, first_neg)) = drawn else {
                skipped += 1;
                continue;
            };
            for j in 0..hp.neg_samples {
                let neg = if j == 0 {
                    first_neg
                } else {
                    match (0..MAX_NEGATIVE_REJECTIONS)
                        .map(|_| rng.random_range(0..n_dst))
                        .find(|&c| r.rel.get(s, c) == 0.0)
                    {
                        Some(c) => c,
                        None => continue,
                    }
                };
                let triple = TrainingTriple {
                    relation: r.rel.label().to_string(),
                    src_type: r.rel.src_type.to_string(),
                    dst_type: r.rel.dst_type.to_string(),
                    src: s,
                    pos: p,
                    neg,
                };
                loss_sum += bpr_step(&mut model, &triple, r.alpha, hp.lr, hp.reg)?;
                n += 1;
            }
        }
        let mean = if n > 0 { loss_sum / n as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(Error::Diverged(epoch + 1));
        }
        loss_trace.push(mean);
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} draws with no admissible negative");
    }
    Ok(TrainedModel { model, loss_trace })
}

/// Top-`k` entities of `item_type` for `user` by factor dot product, with
/// `exclusions` removed and ties broken by ascending index.
pub fn recommend_topk(
    model: &FactorModel,
    user_type: &str,
    user: &str,
    item_type: &str,
    k: usize,
    exclusions: &HashSet<u32>,
) -> Result<Vec<(u32, f64)>> {
    let uf = model.factors(user_type)?;
    let u = uf.index_of(user).ok_or_else(|| Error::UnknownNode {
        node_type: user_type.to_string(),
        id: user.to_string(),
    })?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let scores = model.score_all(user_type, u, item_type)?;
    Ok(top_k(&scores, k, |i| exclusions.contains(&i)))
}
