//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use metawalk::pipeline::SyntheticSpec;

pub fn small_movielens_spec(seed: u64, users: usize) -> String {
    format!(
        r#"
seed = {seed}
nodes = [
  {{ name = "user", count = {users} }},
  {{ name = "movie", count = 80 }},
  {{ name = "genre", count = 6 }},
  {{ name = "director", count = 60 }},
  {{ name = "actor", count = 160 }},
]
edges = [
  {{ name = "um", src = "user", dst = "movie", branching = 12, rating = true }},
  {{ name = "mg", src = "movie", dst = "genre", branching = 3 }},
  {{ name = "md", src = "movie", dst = "director", branching = 1, aligned = true }},
  {{ name = "ma", src = "movie", dst = "actor", branching = 3, aligned = true }},
]
[ratings]
min = 1
max = 5
[planted]
blocks = 4
in_block_prob = 0.7
rating_shift = 1.0
"#
    )
}

pub fn experiment_toml(extra: &str) -> String {
    format!(
        r#"
seed = 11
[data]
schema = "data/schema.txt"
rating = "um"
kcore = 3
edges = {{ um = "data/um.tsv", mg = "data/mg.tsv", md = "data/md.tsv", ma = "data/ma.tsv" }}
[split]
mode = "kfold"
folds = 5
[metapaths]
paths = ["um,>mg", "um,>ma", "um,>mg,<mg", "um,>md,<md", "um,>ma,<ma"]
[generation]
method = "sampled"
walks_per_start = 100
[model]
dim = 8
epochs = 6
[eval]
threshold = 3.0
{extra}
"#
    )
}

/// Writes a small synthetic dataset and an experiment config into `dir`.
pub fn write_experiment(dir: &Path, users: usize, extra: &str) -> PathBuf {
    let spec = SyntheticSpec::from_toml(&small_movielens_spec(5, users)).unwrap();
    spec.write(&dir.join("data")).unwrap();
    let cfg = dir.join("experiment.toml");
    std::fs::write(&cfg, experiment_toml(extra)).unwrap();
    cfg
}

/// Runs the command-line binary quietly and returns its output.
pub fn metawalk<I, S>(args: I) -> std::process::Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    std::process::Command::new(env!("CARGO_BIN_EXE_metawalk"))
        .args(args)
        .env("RUST_LOG", "error")
        .env_remove("METAWALK_OUT_DIR")
        .output()
        .expect("binary runs")
}

/// Everything after the first line of a stamped artifact.
pub fn body(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(text.starts_with("# config_hash="), "{} is not stamped", path.display());
    text.split_once('\n').map(|x| x.1.to_string()).unwrap_or_default()
}

/// Restricts the config at `path` to the given algorithms.
pub fn set_algos(path: &Path, algos: &[&str]) {
    let list: Vec<String> = algos.iter().map(|a| format!("\"{a}\"")).collect();
    let text = std::fs::read_to_string(path).unwrap();
    let text = text.replace("[model]\n", &format!("[model]\nalgos = [{}]\n", list.join(", ")));
    std::fs::write(path, text).unwrap();
}
