use std::collections::HashSet;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metawalk::baselines::{BipartiteRatings, GraphRanker};
use metawalk::dmf::{train_dmf, FactorModel};
use metawalk::eval::{bench_generation, top_k, BenchSettings, EvalReport, Split};
use metawalk::pipeline::{self, ExperimentConfig, RelationNeeds, SyntheticSpec};
use metawalk::pruning::prune_relations;
use metawalk::relation::GenerationMethod;
use metawalk::{Error, ExpandOptions, Execution, MetaPath, Result};

/// Environment variable that overrides the output directory when `--out` is
/// not given.
const OUT_ENV: &str = "METAWALK_OUT_DIR";

#[derive(Parser)]
#[command(name = "metawalk", version, about = "Meta-path relations, sampling and factorization recommenders")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the configured graph; with --out, write it back in
    /// canonical form.
    Ingest,
    /// Apply p-core filtering to the rating edges.
    Pcore {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Generate relations by full expansion from a fold's training graph.
    Expand(GenArgs),
    /// Generate relations by weighted random walks from a fold's training graph.
    Sample(GenArgs),
    /// Score the relations in a directory by normalized information gain.
    Nig {
        #[arg(long)]
        relations: PathBuf,
    },
    /// Train a factorization model on the relations in a directory.
    Train {
        #[arg(long)]
        relations: PathBuf,
        /// Target relation label; defaults to the rating edge type.
        #[arg(long)]
        target: Option<String>,
    },
    /// Run a graph baseline on one fold and write top-k lists.
    Baseline {
        #[arg(long, value_parser = ["p3", "rp3", "hl"])]
        algo: String,
        /// alpha for p3, beta for rp3, lambda for hl.
        #[arg(long, conflicts_with = "tune")]
        param: Option<f64>,
        #[arg(long)]
        tune: bool,
        #[arg(long, default_value_t = 0)]
        fold: usize,
    },
    /// Evaluate a saved factorization model on one fold's test ratings.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long, default_value = "dmf")]
        name: String,
    },
    /// Time full expansion against sampling for the configured meta-paths.
    Bench {
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Generate a synthetic dataset from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run the whole configured experiment.
    Run,
}

#[derive(Args)]
struct GenArgs {
    /// Only this meta-path literal; by default every configured relation.
    #[arg(long)]
    metapath: Option<String>,
    #[arg(long, default_value_t = 0)]
    fold: usize,
    /// Walks per start node (sample only).
    #[arg(long)]
    walks: Option<usize>,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this subcommand".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(g: &Global, cfg: Option<&ExperimentConfig>, default: &str) -> PathBuf {
    g.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.out_dir.as_ref().map(|p| c.resolve(p))))
        .unwrap_or_else(|| PathBuf::from(default))
}

fn required_out(g: &Global) -> Result<PathBuf> {
    g.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::Config("--out is required for this subcommand".into()))
}

fn fold_split(cfg: &ExperimentConfig, fold: usize) -> Result<Split> {
    let graph = pipeline::load_data(cfg)?;
    let mut splits = pipeline::make_splits(cfg, &graph)?;
    if fold >= splits.len() {
        return Err(Error::Config(format!("fold {fold} requested but the split has {}", splits.len())));
    }
    Ok(splits.swap_remove(fold))
}

fn write_stamped(path: &Path, stamp: &str, body: &[u8]) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {stamp}")?;
    w.write_all(body)?;
    w.flush()?;
    Ok(())
}

fn generate(g: &Global, args: &GenArgs, method: GenerationMethod) -> Result<()> {
    let mut cfg = load_config(g)?;
    if let Some(s) = args.walks {
        cfg.generation.walks_per_start = s;
        cfg.generation.budget()?;
    }
    let dir = required_out(g)?;
    let split = fold_split(&cfg, args.fold)?;
    if let Some(lit) = &args.metapath {
        cfg.metapaths.paths = vec![lit.clone()];
        cfg.metapaths.include_direct = false;
        MetaPath::parse(lit, split.train.schema()).map_err(|e| Error::Config(e.to_string()))?;
    }
    let rels = pipeline::generate_relations(&cfg, &split.train, method, RelationNeeds::everything())
        .map_err(|e| e.in_stage(&method.to_string()))?;
    for p in rels.write(&dir, &cfg.stamp())? {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest => {
            let mut cfg = load_config(g)?;
            cfg.data.kcore = 0;
            let graph = pipeline::load_data(&cfg)?;
            for t in graph.schema().node_types() {
                println!("nodes\t{t}\t{}", graph.node_count(t.as_str())?);
            }
            for e in graph.schema().edge_types() {
                println!("edges\t{}\t{}", e.name, graph.edge_count(&e.name)?);
            }
            if let Some(dir) = g.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
                metawalk::io::write_graph(&graph, &dir)?;
            }
        }
        Command::Pcore { k } => {
            let mut cfg = load_config(g)?;
            if let Some(k) = k {
                cfg.data.kcore = *k;
            }
            if cfg.data.kcore == 0 {
                return Err(Error::Config("no p-core threshold: pass --k or set data.kcore".into()));
            }
            let graph = pipeline::load_data(&cfg)?;
            let dir = required_out(g)?;
            metawalk::io::write_graph(&graph, &dir).map_err(|e| e.in_stage("pcore"))?;
            println!("{} rating edges kept", graph.edge_count(&cfg.data.rating)?);
        }
        Command::Expand(args) => generate(g, args, GenerationMethod::Full)?,
        Command::Sample(args) => generate(g, args, GenerationMethod::Sampled)?,
        Command::Nig { relations } => {
            let cfg = load_config(g)?;
            let graph = pipeline::load_data(&cfg)?;
            let rels = pipeline::read_relations_dir(relations, &graph).map_err(|e| e.in_stage("nig"))?;
            let target = cfg.data.rating.clone();
            let (_, report) =
                prune_relations(rels, cfg.pruning.policy()?, Some(&target)).map_err(|e| e.in_stage("nig"))?;
            let body = report.to_tsv();
            match g.out.as_ref() {
                Some(p) => write_stamped(p, &cfg.stamp(), body.as_bytes())?,
                None => print!("{body}"),
            }
        }
        Command::Train { relations, target } => {
            let cfg = load_config(g)?;
            let graph = pipeline::load_data(&cfg)?;
            let target = target.clone().unwrap_or_else(|| cfg.data.rating.clone());
            let mut rels = pipeline::read_relations_dir(relations, &graph).map_err(|e| e.in_stage("train"))?;
            let pos = rels
                .iter()
                .position(|r| r.label() == target)
                .ok_or_else(|| Error::Config(format!("no relation labelled `{target}` in {}", relations.display())))?;
            let t = rels.remove(pos);
            let trained = train_dmf(&t, &rels, &cfg.hyperparams()).map_err(|e| e.in_stage("train"))?;
            let out = required_out(g)?;
            let mut buf = Vec::new();
            trained.model.write(&mut buf)?;
            write_stamped(&out, &cfg.stamp(), &buf)?;
            let loss = out.with_extension("loss.csv");
            write_stamped(&loss, &cfg.stamp(), trained.loss_csv().as_bytes())?;
            println!("{}", out.display());
        }
        Command::Baseline { algo, param, tune, fold } => {
            let mut cfg = load_config(g)?;
            cfg.baseline.tune = *tune;
            if let Some(p) = param {
                match algo.as_str() {
                    "p3" => cfg.baseline.alpha = *p,
                    "rp3" => cfg.baseline.beta = *p,
                    _ => cfg.baseline.lambda = *p,
                }
            } else if !tune {
                return Err(Error::Config("pass --param <value> or --tune".into()));
            }
            let split = fold_split(&cfg, *fold)?;
            let (ranker, tuning) = pipeline::fit_baseline(&cfg, algo, &split).map_err(|e| e.in_stage("baseline"))?;
            let dir = out_path(g, Some(&cfg), "out");
            if let Some(t) = tuning {
                write_stamped(&dir.join(format!("{algo}_grid.tsv")), &cfg.stamp(), t.to_tsv().as_bytes())?;
            }
            let body = topk_lists(&ranker, &split, cfg.eval.max_k)?;
            write_stamped(&dir.join(format!("{algo}_topk.tsv")), &cfg.stamp(), body.as_bytes())?;
            println!("{}: {}", algo, ranker.algorithm);
        }
        Command::Eval { model, fold, name } => {
            let cfg = load_config(g)?;
            let split = fold_split(&cfg, *fold)?;
            let f = fs::File::open(model).map_err(|e| Error::from(e).in_stage("eval"))?;
            let m = FactorModel::read(BufReader::new(f)).map_err(|e| e.in_stage("eval"))?;
            let def = split.train.schema().edge_type(&cfg.data.rating)?.clone();
            let rec = pipeline::DmfRecommender {
                model: &m,
                user_type: def.src.to_string(),
                item_type: def.dst.to_string(),
            };
            let curve = metawalk::eval::evaluate(&rec, &split.relevant(None), &split.seen(), cfg.eval.max_k)
                .map_err(|e| e.in_stage("eval"))?;
            let mut rep = EvalReport::default();
            rep.push_curve(name, *fold, &curve);
            let csv = rep.to_csv(&[cfg.stamp()]);
            match g.out.as_ref() {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Bench { reps } => {
            let cfg = load_config(g)?;
            let graph = pipeline::load_data(&cfg)?;
            let mps = cfg.metapaths(graph.schema())?;
            let settings = BenchSettings {
                budget: cfg.generation.budget()?,
                seed: cfg.seed,
                reps: reps.unwrap_or(cfg.run.bench_reps),
                expand: ExpandOptions {
                    max_entries: cfg.generation.max_entries,
                },
                exec: Execution::Sequential,
            };
            let rep = bench_generation(&graph, &mps, &settings).map_err(|e| e.in_stage("bench"))?;
            let csv = rep.to_csv(&[cfg.stamp()]);
            match g.out.as_ref() {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Synth { spec } => {
            let text = fs::read_to_string(spec).map_err(|e| Error::Config(format!("{}: {e}", spec.display())))?;
            let mut s = SyntheticSpec::from_toml(&text)?;
            if let Some(seed) = g.seed {
                s.seed = seed;
            }
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
            let dir = required_out(g)?;
            let graph = s.write(&dir).map_err(|e| e.in_stage("synth"))?;
            println!("{} nodes, {} edges written to {}", graph.total_nodes(), graph.total_edges(), dir.display());
        }
        Command::Run => {
            let cfg = load_config(g)?;
            let dir = out_path(g, Some(&cfg), "out");
            let out = pipeline::run_experiment(&cfg, &dir)?;
            for (algo, rep) in &out.reports {
                if let Some(r) = rep.summary().iter().find(|r| r.k == cfg.eval.max_k) {
                    println!("{algo}\trecall@{}={:.4}\tprecision@{}={:.4}", r.k, r.recall, r.k, r.precision);
                }
            }
        }
    }
    Ok(())
}

/// `user<TAB>rank<TAB>item<TAB>score` for every user with training ratings.
fn topk_lists(ranker: &GraphRanker, split: &Split, k: usize) -> Result<String> {
    let data = BipartiteRatings::from_graph(&split.train, &ranker_rating(split))?;
    let seen = split.seen();
    let empty = HashSet::new();
    let uv = data.user_vocab.clone().expect("built from graph");
    let iv = data.item_vocab.clone().expect("built from graph");
    let mut out = String::from("user\trank\titem\tscore\n");
    for &u in &data.users {
        let s = seen.get(&u).unwrap_or(&empty);
        for (r, (i, score)) in top_k(&ranker.scores(u), k, |i| s.contains(&i)).into_iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\t{score}\n", uv[u as usize], r + 1, iv[i as usize]));
        }
    }
    Ok(out)
}

fn ranker_rating(split: &Split) -> String {
    split.train.schema().edge_types()[split.rating_type].name.clone()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.global.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.global.workers).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
