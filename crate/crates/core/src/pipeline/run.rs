//! The end-to-end experiment: ingest, k-core, split, generate relations,
//! prune, train, evaluate, and optionally benchmark.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baselines::{default_grid, grid_tune, Algorithm, BipartiteRatings, GraphRanker, TuneResult};
use crate::dmf::{train_dmf, TrainedModel};
use crate::error::{Error, Result};
use crate::eval::{bench_generation, evaluate, holdout, kfold, BenchSettings, EvalReport, MetricCurve, Recommender, Split};
use crate::expand::{expand_full, ExpandOptions};
use crate::graph::{Direction, DuplicatePolicy, HeteroGraph};
use crate::kcore::k_core_filter;
use crate::metapath::{MetaPath, Step};
use crate::pipeline::config::{ExperimentConfig, SplitMode};
use crate::pruning::{prune_relations, PruningReport};
use crate::relation::{GenerationMethod, RelationMatrix};
use crate::rng::derive_seed;
use crate::walk::{all_starts, sample_relation};
use crate::Execution;

/// Provenance source tag of every relation generated inside a fold.
pub const TRAIN_SOURCE: &str = "train";

/// Reads the schema and edge files named by `cfg` and applies the p-core
/// filter when one is configured.
pub fn load_data(cfg: &ExperimentConfig) -> Result<HeteroGraph> {
    let schema = cfg.validate()?;
    let g = crate::io::load_graph_files(schema, &cfg.edge_files(), DuplicatePolicy::Reject)
        .map_err(|e| e.in_stage("ingest"))?;
    if cfg.data.kcore > 0 {
        let before = g.edge_count(&cfg.data.rating)?;
        let f = k_core_filter(&g, &cfg.data.rating, cfg.data.kcore).map_err(|e| e.in_stage("pcore"))?;
        log::info!(
            "p-core {}: {} of {before} rating edges kept",
            cfg.data.kcore,
            f.edge_count(&cfg.data.rating)?
        );
        return Ok(f);
    }
    Ok(g)
}

pub fn make_splits(cfg: &ExperimentConfig, graph: &HeteroGraph) -> Result<Vec<Split>> {
    let s = &cfg.split;
    let r = match s.mode {
        SplitMode::Holdout => holdout(graph, &cfg.data.rating, s.train_fraction, cfg.seed).map(|x| vec![x]),
        SplitMode::Kfold => kfold(graph, &cfg.data.rating, s.folds, cfg.seed),
    };
    let splits = r.map_err(|e| e.in_stage("split"))?;
    for sp in &splits {
        if sp.test.is_empty() {
            log::warn!("fold {} has no test ratings", sp.fold);
        }
    }
    Ok(splits)
}

/// The relations of one fold, all generated from its training graph.
#[derive(Clone, Debug)]
pub struct FoldRelations {
    /// Binary training ratings.
    pub target: RelationMatrix,
    /// Non-rating edge types and one-step meta-paths.
    pub direct: Vec<RelationMatrix>,
    pub two_step: Vec<RelationMatrix>,
    pub three_step: Vec<RelationMatrix>,
}

impl FoldRelations {
    pub fn all(&self) -> impl Iterator<Item = &RelationMatrix> {
        std::iter::once(&self.target)
            .chain(&self.direct)
            .chain(&self.two_step)
            .chain(&self.three_step)
    }

    /// Writes `<label>.tsv` for every relation into `dir`, each starting
    /// with the `# stamp` line.
    pub fn write(&self, dir: &Path, stamp: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for r in self.all() {
            let p = dir.join(format!("{}.tsv", r.label()));
            let mut w = BufWriter::new(fs::File::create(&p)?);
            writeln!(w, "# {stamp}")?;
            r.write_tsv(&mut w)?;
            w.flush()?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// Which relations the DMF variants need.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RelationNeeds {
    pub two_step: bool,
    pub three_step: bool,
}

impl RelationNeeds {
    pub fn for_algos(algos: &[String]) -> Self {
        let has = |a: &str| algos.iter().any(|x| x == a);
        RelationNeeds {
            two_step: has("dmf2") || has("dmf3") || has("dmf-ig"),
            three_step: has("dmf3") || has("dmf-ig"),
        }
    }

    pub fn everything() -> Self {
        RelationNeeds {
            two_step: true,
            three_step: true,
        }
    }
}

fn one_step(graph: &HeteroGraph, edge_type: &str) -> Result<MetaPath> {
    Ok(MetaPath::new(
        vec![Step {
            edge_type: edge_type.to_string(),
            direction: Direction::Forward,
        }],
        Some(edge_type.to_string()),
        graph.schema(),
    )?)
}

fn full(graph: &HeteroGraph, mp: &MetaPath, cap: u64) -> Result<RelationMatrix> {
    let starts = all_starts(graph, mp)?;
    let mut r = expand_full(graph, mp, &starts, ExpandOptions { max_entries: cap }, Execution::Parallel)?;
    r.provenance.source = TRAIN_SOURCE.into();
    Ok(r)
}

/// Seed of the walks for meta-path `label`; fixed per label so that a
/// standalone `sample` run reproduces the pipeline's relations.
pub fn walk_seed(seed: u64, label: &str) -> u64 {
    derive_seed(seed, &format!("walks/{label}"))
}

/// Generates the target, direct and meta-path relations from `train`.
pub fn generate_relations(
    cfg: &ExperimentConfig,
    train: &HeteroGraph,
    method: GenerationMethod,
    needs: RelationNeeds,
) -> Result<FoldRelations> {
    let schema = train.schema();
    let cap = cfg.generation.max_entries;
    let target = full(train, &one_step(train, &cfg.data.rating)?, cap)?;
    let mut direct = Vec::new();
    if cfg.metapaths.include_direct {
        for def in schema.edge_types() {
            if def.name != cfg.data.rating {
                let r = full(train, &one_step(train, &def.name)?, cap)?;
                if r.is_empty() {
                    log::warn!("direct relation `{}` is empty in the training graph; skipped", def.name);
                } else {
                    direct.push(r);
                }
            }
        }
    }
    let (mut two_step, mut three_step) = (Vec::new(), Vec::new());
    for mp in cfg.metapaths(schema)? {
        let wanted = match mp.len() {
            1 => true,
            2 => needs.two_step,
            _ => needs.three_step,
        };
        if !wanted || direct.iter().any(|r: &RelationMatrix| r.label() == mp.label()) {
            continue;
        }
        let r = match method {
            GenerationMethod::Full => full(train, &mp, cap)?,
            GenerationMethod::Sampled => {
                let starts = all_starts(train, &mp)?;
                let mut r = sample_relation(
                    train,
                    &mp,
                    &starts,
                    cfg.generation.budget()?,
                    walk_seed(cfg.seed, mp.label()),
                    Execution::Parallel,
                )?;
                r.provenance.source = TRAIN_SOURCE.into();
                r
            }
        };
        if r.is_empty() {
            log::warn!("meta-path relation `{}` is empty; skipped", mp.label());
            continue;
        }
        match mp.len() {
            1 => direct.push(r),
            2 => two_step.push(r),
            _ => three_step.push(r),
        }
    }
    Ok(FoldRelations {
        target,
        direct,
        two_step,
        three_step,
    })
}

/// Auxiliary relations for a DMF variant. `dmf-ig` prunes the meta-path
/// relations only; direct relations are always kept.
pub fn aux_relations(
    cfg: &ExperimentConfig,
    algo: &str,
    rels: &FoldRelations,
) -> Result<(Vec<RelationMatrix>, Option<PruningReport>)> {
    let mut aux = rels.direct.clone();
    match algo {
        "dmf" => {}
        "dmf2" => aux.extend(rels.two_step.iter().cloned()),
        "dmf3" => aux.extend(rels.two_step.iter().chain(&rels.three_step).cloned()),
        "dmf-ig" => {
            let candidates: Vec<RelationMatrix> = rels.two_step.iter().chain(&rels.three_step).cloned().collect();
            if candidates.is_empty() {
                return Ok((aux, None));
            }
            let (kept, report) = prune_relations(candidates, cfg.pruning.policy()?, None)?;
            aux.extend(kept);
            return Ok((aux, Some(report)));
        }
        other => return Err(Error::Config(format!("`{other}` is not a factorization model"))),
    }
    Ok((aux, None))
}

/// Wraps a factor model as a recommender over graph indices.
pub struct DmfRecommender<'a> {
    pub model: &'a crate::dmf::FactorModel,
    pub user_type: String,
    pub item_type: String,
}

impl Recommender for DmfRecommender<'_> {
    fn score_items(&self, user: u32) -> Vec<f64> {
        self.model
            .score_all(&self.user_type, user, &self.item_type)
            .expect("user index from the same vocabulary")
    }
}

pub fn train_variant(cfg: &ExperimentConfig, algo: &str, rels: &FoldRelations) -> Result<(TrainedModel, Option<PruningReport>)> {
    let (aux, report) = aux_relations(cfg, algo, rels).map_err(|e| e.in_stage("prune"))?;
    let labels: Vec<&str> = aux.iter().map(RelationMatrix::label).collect();
    log::info!("{algo}: training on {} with auxiliary {:?}", rels.target.label(), labels);
    let trained = train_dmf(&rels.target, &aux, &cfg.hyperparams()).map_err(|e| e.in_stage("train"))?;
    Ok((trained, report))
}

/// Fixed or tuned parameters for a baseline on one fold.
pub fn fit_baseline(cfg: &ExperimentConfig, algo: &str, split: &Split) -> Result<(GraphRanker, Option<TuneResult>)> {
    let b = &cfg.baseline;
    let data = BipartiteRatings::from_graph(&split.train, &cfg.data.rating)?;
    let (chosen, tuning) = if b.tune {
        let inner = holdout(
            &split.train,
            &cfg.data.rating,
            b.validation_train_fraction,
            derive_seed(cfg.seed, &format!("tune/fold{}", split.fold)),
        )?;
        let inner_data = BipartiteRatings::from_graph(&inner.train, &cfg.data.rating)?;
        let res = grid_tune(
            &inner_data,
            &default_grid(algo)?,
            &inner.relevant(None),
            &inner.seen(),
            cfg.eval.max_k,
        )?;
        (res.best, Some(res))
    } else {
        let a = match algo {
            "p3" => Algorithm::P3 { alpha: b.alpha },
            "rp3" => Algorithm::Rp3 { alpha: b.alpha, beta: b.beta },
            "hl" => Algorithm::Hybrid { lambda: b.lambda },
            other => return Err(Error::Config(format!("`{other}` is not a graph baseline"))),
        };
        (a, None)
    };
    log::info!("{algo} fold {}: using {chosen}", split.fold);
    Ok((GraphRanker::fit(&data, chosen)?, tuning))
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub reports: BTreeMap<String, EvalReport>,
    pub us_reports: BTreeMap<String, EvalReport>,
    pub fold_fingerprints: Vec<String>,
    pub files: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    stamp: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn text(&mut self, rel: &str, body: &str) -> Result<()> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&p, format!("# {}\n{body}", self.stamp))?;
        self.files.push(p);
        Ok(())
    }
}

pub fn read_relations_dir(dir: &Path, graph: &HeteroGraph) -> Result<Vec<RelationMatrix>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "tsv"));
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let f = fs::File::open(p)?;
            RelationMatrix::read_tsv(BufReader::new(f), graph).map_err(|e| e.in_file(p))
        })
        .collect()
}

fn curve_for(rec: &dyn Recommender, split: &Split, threshold: Option<f64>, max_k: usize) -> Result<MetricCurve> {
    let relevant = split.relevant(threshold);
    let c = evaluate(rec, &relevant, &split.seen(), max_k)?;
    let skipped = split.relevant(None).len() - c.users.min(split.relevant(None).len());
    if threshold.is_none() && skipped > 0 {
        log::info!("fold {}: {skipped} users without test items excluded", split.fold);
    }
    Ok(c)
}

/// Runs every configured algorithm on every fold and writes all artifacts
/// to `out_dir`. Stage failures name the stage; files written before the
/// failure are left in place.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    fs::create_dir_all(out_dir)?;
    let graph = load_data(cfg)?;
    let splits = make_splits(cfg, &graph)?;
    let method = cfg.generation.method()?;
    let needs = RelationNeeds::for_algos(&cfg.model.algos);
    let any_dmf = cfg.model.algos.iter().any(|a| a.starts_with("dmf"));
    let rating = graph.schema().edge_type(&cfg.data.rating)?.clone();
    let max_k = cfg.eval.max_k;

    let mut w = Writer {
        dir: out_dir.to_path_buf(),
        stamp: cfg.stamp(),
        files: Vec::new(),
    };
    let mut out = RunOutput {
        out_dir: out_dir.to_path_buf(),
        ..RunOutput::default()
    };
    w.text("config.toml", &cfg.canonical())?;

    let mut folds_tsv = String::from("fold\ttest_ratings\tfingerprint\n");
    for sp in &splits {
        let fp = sp.fingerprint();
        folds_tsv.push_str(&format!("{}\t{}\t{fp}\n", sp.fold, sp.test.len()));
        out.fold_fingerprints.push(fp);
    }
    w.text("folds.tsv", &folds_tsv)?;

    for sp in &splits {
        let f = sp.fold;
        let rels = if any_dmf {
            let r = generate_relations(cfg, &sp.train, method, needs).map_err(|e| e.in_stage("generate"))?;
            let paths = r.write(&out_dir.join(format!("relations/fold{f}")), &cfg.stamp())?;
            w.files.extend(paths);
            Some(r)
        } else {
            None
        };
        for algo in &cfg.model.algos {
            let curves = |rec: &dyn Recommender| -> Result<(MetricCurve, Option<MetricCurve>)> {
                let plain = curve_for(rec, sp, None, max_k)?;
                let us = cfg.eval.threshold.map(|t| curve_for(rec, sp, Some(t), max_k)).transpose()?;
                Ok((plain, us))
            };
            let (plain, us) = if algo.starts_with("dmf") {
                let rels = rels.as_ref().expect("generated for dmf");
                let (trained, report) = train_variant(cfg, algo, rels)?;
                let mut buf = Vec::new();
                trained.model.write(&mut buf)?;
                w.text(&format!("models/{algo}_fold{f}.model"), std::str::from_utf8(&buf).unwrap())?;
                w.text(&format!("loss/{algo}_fold{f}.csv"), &trained.loss_csv())?;
                if let Some(rep) = report {
                    w.text(&format!("nig/fold{f}.tsv"), &rep.to_tsv())?;
                }
                let rec = DmfRecommender {
                    model: &trained.model,
                    user_type: rating.src.to_string(),
                    item_type: rating.dst.to_string(),
                };
                curves(&rec).map_err(|e| e.in_stage("evaluate"))?
            } else {
                let (ranker, tuning) = fit_baseline(cfg, algo, sp).map_err(|e| e.in_stage("baseline"))?;
                if let Some(t) = tuning {
                    w.text(&format!("tuning/{algo}_fold{f}.tsv"), &t.to_tsv())?;
                }
                curves(&ranker).map_err(|e| e.in_stage("evaluate"))?
            };
            out.reports.entry(algo.clone()).or_default().push_curve(algo, f, &plain);
            if let Some(u) = us {
                out.us_reports.entry(algo.clone()).or_default().push_curve(algo, f, &u);
            }
        }
    }

    let stamp_lines = [cfg.stamp()];
    let mut summary = EvalReport::default();
    for algo in &cfg.model.algos {
        let rep = &out.reports[algo];
        write_report(&mut w, &format!("report_{algo}.csv"), rep, &stamp_lines)?;
        summary.rows.extend(rep.rows.iter().cloned());
        if let Some(us) = out.us_reports.get(algo) {
            write_report(&mut w, &format!("us_report_{algo}.csv"), us, &stamp_lines)?;
        }
    }
    write_report(&mut w, "summary.csv", &summary, &stamp_lines)?;

    if cfg.run.bench {
        let mps = cfg.metapaths(graph.schema())?;
        let settings = BenchSettings {
            budget: cfg.generation.budget()?,
            seed: cfg.seed,
            reps: cfg.run.bench_reps,
            expand: ExpandOptions {
                max_entries: cfg.generation.max_entries,
            },
            exec: Execution::Sequential,
        };
        let rep = bench_generation(&graph, &mps, &settings).map_err(|e| e.in_stage("bench"))?;
        let p = out_dir.join("bench.csv");
        fs::write(&p, rep.to_csv(&stamp_lines))?;
        w.files.push(p);
    }
    out.files = w.files;
    Ok(out)
}

fn write_report(w: &mut Writer, name: &str, rep: &EvalReport, stamp: &[String]) -> Result<()> {
    let p = w.dir.join(name);
    fs::write(&p, rep.to_csv(stamp))?;
    w.files.push(p);
    Ok(())
}
