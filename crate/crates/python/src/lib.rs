//! Python bindings for the `metawalk` library.
//!
//! Nodes are addressed by their string ids; relation entries, walks and
//! recommendations come back as plain Python tuples and lists.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use metawalk::baselines::{Algorithm, BipartiteRatings, GraphRanker};
use metawalk::dmf::{recommend_topk, train_dmf, FactorModel, Hyperparams, TrainedModel};
use metawalk::eval::{kfold, holdout, precision_at_k, recall_at_k, top_k, Split};
use metawalk::graph::Vocab;
use metawalk::pipeline::{run_experiment as run_pipeline, ExperimentConfig, SyntheticSpec};
use metawalk::pruning::{nig, prune_relations, PruningPolicy};
use metawalk::rng::stream_rng;
use metawalk::sampling;
use metawalk::{
    expand_full, k_core_filter, sample_relation, sample_walk, Direction, DuplicatePolicy, Execution, ExpandOptions,
    HeteroGraph, MetaPath, NodeRef, RelationMatrix, SampleBudget, WalkOutcome,
};

fn py_err(e: metawalk::Error) -> PyErr {
    match e {
        metawalk::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for metawalk::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn direction(reverse: bool) -> Direction {
    if reverse {
        Direction::Reverse
    } else {
        Direction::Forward
    }
}

/// A typed heterogeneous graph.
#[pyclass(name = "Graph", module = "metawalk_py", frozen)]
struct PyGraph {
    inner: Arc<HeteroGraph>,
}

impl PyGraph {
    fn wrap(g: HeteroGraph) -> Self {
        PyGraph { inner: Arc::new(g) }
    }

    fn metapath(&self, literal: &str) -> PyResult<MetaPath> {
        MetaPath::parse(literal, self.inner.schema()).py()
    }
}

#[pymethods]
impl PyGraph {
    /// Loads a schema file and one edge-list file per edge type.
    #[staticmethod]
    fn load(schema: PathBuf, edges: BTreeMap<String, PathBuf>) -> PyResult<Self> {
        let schema = metawalk::io::read_schema(&schema).py()?;
        let files: Vec<(String, PathBuf)> = edges.into_iter().collect();
        let g = metawalk::io::load_graph_files(schema, &files, DuplicatePolicy::Reject).py()?;
        Ok(PyGraph::wrap(g))
    }

    /// Generates a graph from a synthetic dataset spec given as TOML text.
    #[staticmethod]
    #[pyo3(signature = (spec, seed=None))]
    fn synthetic(spec: &str, seed: Option<u64>) -> PyResult<Self> {
        let mut s = SyntheticSpec::from_toml(spec).py()?;
        if let Some(seed) = seed {
            s.seed = seed;
        }
        Ok(PyGraph::wrap(s.generate().py()?))
    }

    fn node_types(&self) -> Vec<String> {
        self.inner.schema().node_types().iter().map(|t| t.to_string()).collect()
    }

    fn edge_types(&self) -> Vec<String> {
        self.inner.schema().edge_types().iter().map(|e| e.name.clone()).collect()
    }

    fn node_count(&self, node_type: &str) -> PyResult<usize> {
        self.inner.node_count(node_type).py()
    }

    fn node_ids(&self, node_type: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.vocab_by_name(node_type).py()?.to_vec())
    }

    fn edge_count(&self, edge_type: &str) -> PyResult<usize> {
        self.inner.edge_count(edge_type).py()
    }

    /// `(src id, dst id, weight)` for the edges of `edge_type` at a node.
    #[pyo3(signature = (node_type, node_id, edge_type, reverse=false))]
    fn edges(&self, node_type: &str, node_id: &str, edge_type: &str, reverse: bool) -> PyResult<Vec<(String, String, Option<f64>)>> {
        let node = NodeRef::new(node_type, node_id).py()?;
        let edges = self.inner.get_edges(&node, edge_type, direction(reverse)).py()?;
        Ok(edges
            .into_iter()
            .map(|e| (e.src.id.to_string(), e.dst.id.to_string(), e.weight))
            .collect())
    }

    /// Writes `schema.txt` and one edge file per edge type into `dir`.
    fn write(&self, dir: PathBuf) -> PyResult<()> {
        metawalk::io::write_graph(&self.inner, &dir).py()?;
        Ok(())
    }

    fn k_core(&self, edge_type: &str, k: usize) -> PyResult<Self> {
        Ok(PyGraph::wrap(k_core_filter(&self.inner, edge_type, k).py()?))
    }

    /// Exact path counts of a meta-path literal such as `"um,>mg,<mg"`.
    #[pyo3(signature = (metapath, max_entries=None))]
    fn expand(&self, metapath: &str, max_entries: Option<u64>) -> PyResult<PyRelation> {
        let mp = self.metapath(metapath)?;
        let starts = metawalk::walk::all_starts(&self.inner, &mp).py()?;
        let mut opts = ExpandOptions::default();
        if let Some(m) = max_entries {
            opts.max_entries = m;
        }
        let r = expand_full(&self.inner, &mp, &starts, opts, Execution::Parallel).py()?;
        Ok(PyRelation { inner: r })
    }

    /// Walk-count estimate of a meta-path relation.
    #[pyo3(signature = (metapath, walks=100, seed=0, max_retries=5))]
    fn sample(&self, metapath: &str, walks: usize, seed: u64, max_retries: usize) -> PyResult<PyRelation> {
        let mp = self.metapath(metapath)?;
        let starts = metawalk::walk::all_starts(&self.inner, &mp).py()?;
        let budget = SampleBudget::new(walks, max_retries).py()?;
        let r = sample_relation(&self.inner, &mp, &starts, budget, seed, Execution::Parallel).py()?;
        Ok(PyRelation { inner: r })
    }

    /// Node ids of one random walk, or `None` if it reached a dead end.
    #[pyo3(signature = (metapath, start_id, seed=0))]
    fn walk(&self, metapath: &str, start_id: &str, seed: u64) -> PyResult<Option<Vec<String>>> {
        let mp = self.metapath(metapath)?;
        let src = self.inner.schema().node_types()[mp.resolve(self.inner.schema()).py()?.src_type()].clone();
        let start = NodeRef::new(src.as_str(), start_id).py()?;
        let mut rng = stream_rng(seed, 0);
        Ok(match sample_walk(&self.inner, &mp, &start, &mut rng).py()? {
            WalkOutcome::Complete(w) => Some(w.nodes.into_iter().map(|n| n.id.to_string()).collect()),
            WalkOutcome::DeadEnd { .. } => None,
        })
    }

    /// Contiguous k-fold split of the rating edges after one shuffle.
    #[pyo3(signature = (rating, k=5, seed=0))]
    fn kfold(&self, py: Python<'_>, rating: &str, k: usize, seed: u64) -> PyResult<Vec<PySplit>> {
        kfold(&self.inner, rating, k, seed).py()?.into_iter().map(|s| PySplit::wrap(py, s)).collect()
    }

    #[pyo3(signature = (rating, train_fraction=0.8, seed=0))]
    fn holdout(&self, py: Python<'_>, rating: &str, train_fraction: f64, seed: u64) -> PyResult<PySplit> {
        PySplit::wrap(py, holdout(&self.inner, rating, train_fraction, seed).py()?)
    }

    fn __repr__(&self) -> String {
        format!("Graph(nodes={}, edges={})", self.inner.total_nodes(), self.inner.total_edges())
    }
}

/// One train/test partition of the rating edges.
#[pyclass(name = "Split", module = "metawalk_py", frozen)]
struct PySplit {
    fold: usize,
    fingerprint: String,
    test: Vec<(String, String, Option<f64>)>,
    train: Py<PyGraph>,
}

impl PySplit {
    fn wrap(py: Python<'_>, s: Split) -> PyResult<Self> {
        let def = &s.train.schema().edge_types()[s.rating_type];
        let uv = s.train.vocab_by_name(def.src.as_str()).py()?.clone();
        let iv = s.train.vocab_by_name(def.dst.as_str()).py()?.clone();
        let test = s
            .test
            .iter()
            .map(|r| (uv[r.user as usize].clone(), iv[r.item as usize].clone(), r.weight))
            .collect();
        Ok(PySplit {
            fold: s.fold,
            fingerprint: s.fingerprint(),
            test,
            train: Py::new(py, PyGraph::wrap(s.train))?,
        })
    }
}

#[pymethods]
impl PySplit {
    #[getter]
    fn fold(&self) -> usize {
        self.fold
    }

    #[getter]
    fn train(&self, py: Python<'_>) -> Py<PyGraph> {
        self.train.clone_ref(py)
    }

    /// `(user id, item id, rating)` held out for testing.
    #[getter]
    fn test(&self) -> Vec<(String, String, Option<f64>)> {
        self.test.clone()
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}

/// A sparse relation between two node types.
#[pyclass(name = "Relation", module = "metawalk_py", frozen)]
struct PyRelation {
    inner: RelationMatrix,
}

#[pymethods]
impl PyRelation {
    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn metapath(&self) -> String {
        self.inner.provenance.metapath.clone()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.provenance.method.to_string()
    }

    #[getter]
    fn src_type(&self) -> String {
        self.inner.src_type.to_string()
    }

    #[getter]
    fn dst_type(&self) -> String {
        self.inner.dst_type.to_string()
    }

    /// Walks that dead-ended on every retry.
    #[getter]
    fn failures(&self) -> u64 {
        self.inner.provenance.failures
    }

    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn total_count(&self) -> f64 {
        self.inner.total_count()
    }

    fn entries(&self) -> Vec<(String, String, f64)> {
        let r = &self.inner;
        r.entries()
            .map(|(s, d, c)| (r.src_vocab[s as usize].clone(), r.dst_vocab[d as usize].clone(), c))
            .collect()
    }

    fn row(&self, src_id: &str) -> HashMap<String, f64> {
        let r = &self.inner;
        match r.src_vocab.iter().position(|v| v == src_id) {
            Some(s) => r.row(s as u32).iter().map(|&(d, c)| (r.dst_vocab[d as usize].clone(), c)).collect(),
            None => HashMap::new(),
        }
    }

    /// Normalized information gain in `[0, 1]`.
    fn nig(&self) -> PyResult<f64> {
        Ok(nig(&self.inner).py()?.value)
    }

    fn to_tsv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_tsv(&mut buf).py()?;
        Ok(String::from_utf8(buf).expect("utf-8 ids"))
    }

    fn __len__(&self) -> usize {
        self.inner.nnz()
    }

    fn __repr__(&self) -> String {
        format!(
            "Relation(label={:?}, {}->{}, nnz={})",
            self.inner.label(),
            self.inner.src_type,
            self.inner.dst_type,
            self.inner.nnz()
        )
    }
}

/// A trained factorization model with one factor table per node type.
#[pyclass(name = "Model", module = "metawalk_py", frozen)]
struct PyModel {
    inner: TrainedModel,
}

impl PyModel {
    fn id_index(&self, node_type: &str, id: &str) -> PyResult<u32> {
        self.inner.model.factors(node_type).py()?.index_of(id).ok_or_else(|| {
            PyValueError::new_err(format!("unknown {node_type} id `{id}`"))
        })
    }
}

#[pymethods]
impl PyModel {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.model.dim
    }

    #[getter]
    fn loss_trace(&self) -> Vec<f64> {
        self.inner.loss_trace.clone()
    }

    fn score(&self, src_type: &str, src_id: &str, dst_type: &str, dst_id: &str) -> PyResult<f64> {
        let s = self.id_index(src_type, src_id)?;
        let d = self.id_index(dst_type, dst_id)?;
        self.inner.model.score(src_type, s, dst_type, d).py()
    }

    /// Top `k` `(item id, score)` pairs for a user, skipping `exclude`.
    #[pyo3(signature = (user_type, user_id, item_type, k=10, exclude=Vec::new()))]
    fn recommend(&self, user_type: &str, user_id: &str, item_type: &str, k: usize, exclude: Vec<String>) -> PyResult<Vec<(String, f64)>> {
        let items = self.inner.model.factors(item_type).py()?;
        let skip: HashSet<u32> = exclude.iter().filter_map(|id| items.index_of(id)).collect();
        let top = recommend_topk(&self.inner.model, user_type, user_id, item_type, k, &skip).py()?;
        Ok(top.into_iter().map(|(i, s)| (items.vocab[i as usize].clone(), s)).collect())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let mut buf = Vec::new();
        self.inner.model.write(&mut buf).py()?;
        fs::write(path, buf).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = fs::File::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        let model = FactorModel::read(BufReader::new(f)).py()?;
        Ok(PyModel {
            inner: TrainedModel {
                model,
                loss_trace: Vec::new(),
            },
        })
    }
}

/// Trains a multi-relational BPR model on `target` plus auxiliary relations.
#[pyfunction]
#[pyo3(signature = (target, aux=Vec::new(), dim=32, lr=0.05, reg=0.01, epochs=30, neg_samples=1, weights=BTreeMap::new(), default_weight=1.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn train(
    target: PyRef<'_, PyRelation>,
    aux: Vec<PyRef<'_, PyRelation>>,
    dim: usize,
    lr: f64,
    reg: f64,
    epochs: usize,
    neg_samples: usize,
    weights: BTreeMap<String, f64>,
    default_weight: f64,
    seed: u64,
) -> PyResult<PyModel> {
    let hp = Hyperparams {
        dim,
        lr,
        reg,
        epochs,
        neg_samples,
        relation_weights: weights,
        default_weight,
        seed,
    };
    let aux: Vec<RelationMatrix> = aux.iter().map(|r| r.inner.clone()).collect();
    Ok(PyModel {
        inner: train_dmf(&target.inner, &aux, &hp).py()?,
    })
}

/// A graph-based ranking baseline fitted on one rating edge type.
#[pyclass(name = "Baseline", module = "metawalk_py", frozen)]
struct PyBaseline {
    ranker: GraphRanker,
    users: Vocab,
    items: Vocab,
    seen: HashMap<u32, HashSet<u32>>,
}

#[pymethods]
impl PyBaseline {
    /// `algo` is `p3`, `rp3` or `hl`; `lam` is the hybrid's lambda.
    #[new]
    #[pyo3(signature = (graph, rating, algo, alpha=1.0, beta=0.5, lam=0.5))]
    fn new(graph: PyRef<'_, PyGraph>, rating: &str, algo: &str, alpha: f64, beta: f64, lam: f64) -> PyResult<Self> {
        let algorithm = match algo {
            "p3" => Algorithm::P3 { alpha },
            "rp3" => Algorithm::Rp3 { alpha, beta },
            "hl" => Algorithm::Hybrid { lambda: lam },
            other => return Err(PyValueError::new_err(format!("unknown baseline `{other}`"))),
        };
        let data = BipartiteRatings::from_graph(&graph.inner, rating).py()?;
        let (users, items) = (data.user_vocab.clone().expect("from graph"), data.item_vocab.clone().expect("from graph"));
        let mut seen: HashMap<u32, HashSet<u32>> = HashMap::new();
        let et = graph.inner.schema().edge_type_index(rating).py()?;
        for i in 0..graph.inner.edge_count(rating).py()? {
            let (u, it, _) = graph.inner.edge_at(et, i);
            seen.entry(u).or_default().insert(it);
        }
        let ranker = GraphRanker::fit(&data, algorithm).py()?;
        Ok(PyBaseline { ranker, users, items, seen })
    }

    #[getter]
    fn algorithm(&self) -> String {
        self.ranker.algorithm.to_string()
    }

    /// Score of every item for a user, in item id order of the graph.
    fn scores(&self, user_id: &str) -> PyResult<Vec<f64>> {
        let u = self.user(user_id)?;
        Ok(self.ranker.scores(u))
    }

    /// Top `k` `(item id, score)` pairs, skipping items the user rated.
    #[pyo3(signature = (user_id, k=10))]
    fn recommend(&self, user_id: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        let u = self.user(user_id)?;
        let empty = HashSet::new();
        let seen = self.seen.get(&u).unwrap_or(&empty);
        Ok(top_k(&self.ranker.scores(u), k, |i| seen.contains(&i))
            .into_iter()
            .map(|(i, s)| (self.items[i as usize].clone(), s))
            .collect())
    }
}

impl PyBaseline {
    fn user(&self, id: &str) -> PyResult<u32> {
        self.users
            .iter()
            .position(|u| u == id)
            .map(|p| p as u32)
            .ok_or_else(|| PyValueError::new_err(format!("unknown user `{id}`")))
    }
}

/// `exp(w_i) / sum_j exp(w_j)`.
#[pyfunction]
fn softmax(weights: Vec<f64>) -> Vec<f64> {
    sampling::softmax(&weights)
}

/// How often each index is drawn in `draws` exponentially weighted draws.
#[pyfunction]
#[pyo3(signature = (weights, draws, seed=0))]
fn wsample_counts(weights: Vec<f64>, draws: usize, seed: u64) -> PyResult<Vec<usize>> {
    let mut rng = stream_rng(seed, 0);
    let mut counts = vec![0; weights.len()];
    for _ in 0..draws {
        counts[sampling::wsample_index(&weights, &mut rng).py()?] += 1;
    }
    Ok(counts)
}

/// Prunes relations by information gain. Returns the kept relations and
/// `(label, score, kept)` for every candidate.
#[pyfunction]
#[pyo3(signature = (relations, threshold=None, keep_top=None))]
fn prune(
    relations: Vec<PyRef<'_, PyRelation>>,
    threshold: Option<f64>,
    keep_top: Option<usize>,
) -> PyResult<(Vec<PyRelation>, Vec<(String, f64, bool)>)> {
    let policy = match (threshold, keep_top) {
        (Some(_), Some(_)) => return Err(PyValueError::new_err("pass threshold or keep_top, not both")),
        (_, Some(m)) => PruningPolicy::KeepTop(m),
        (t, None) => PruningPolicy::Threshold(t.unwrap_or(metawalk::pruning::DEFAULT_THRESHOLD)),
    };
    let rels: Vec<RelationMatrix> = relations.iter().map(|r| r.inner.clone()).collect();
    let (kept, report) = prune_relations(rels, policy, None).py()?;
    Ok((
        kept.into_iter().map(|inner| PyRelation { inner }).collect(),
        report.decisions.into_iter().map(|d| (d.label, d.score, d.kept)).collect(),
    ))
}

fn ranked_indices(ranked: &[String], relevant: &[String]) -> (Vec<u32>, HashSet<u32>) {
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut id = |s: &str| {
        let n = ids.len() as u32;
        *ids.entry(s.to_string()).or_insert(n)
    };
    let r: Vec<u32> = ranked.iter().map(|s| id(s)).collect();
    let rel: HashSet<u32> = relevant.iter().map(|s| id(s)).collect();
    (r, rel)
}

#[pyfunction]
fn precision_at(ranked: Vec<String>, relevant: Vec<String>, k: usize) -> PyResult<f64> {
    let (r, rel) = ranked_indices(&ranked, &relevant);
    precision_at_k(&r, &rel, k).py()
}

#[pyfunction]
fn recall_at(ranked: Vec<String>, relevant: Vec<String>, k: usize) -> PyResult<f64> {
    let (r, rel) = ranked_indices(&ranked, &relevant);
    recall_at_k(&r, &rel, k).py()
}

/// Runs a configured experiment and returns, per algorithm, the mean
/// `(k, precision, recall)` rows over folds.
#[pyfunction]
fn run_experiment(config: PathBuf, out_dir: PathBuf) -> PyResult<BTreeMap<String, Vec<(usize, f64, f64)>>> {
    let cfg = ExperimentConfig::load(&config).py()?;
    cfg.validate().py()?;
    let out = run_pipeline(&cfg, &out_dir).py()?;
    Ok(out
        .reports
        .iter()
        .map(|(algo, rep)| (algo.clone(), rep.summary().into_iter().map(|r| (r.k, r.precision, r.recall)).collect()))
        .collect())
}

#[pymodule]
fn metawalk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyRelation>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyBaseline>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(wsample_counts, m)?)?;
    m.add_function(wrap_pyfunction!(prune, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
