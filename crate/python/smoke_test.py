"""Smoke test for the metawalk_py extension module.

Build and install the module first:

    pip install --no-build-isolation ./crates/python

then run `python python/smoke_test.py` (or `pytest python/smoke_test.py`).
"""

import math
import pathlib
import tempfile

import metawalk_py as mw

SPEC = """
seed = 3
nodes = [
  { name = "user", count = 60 },
  { name = "movie", count = 40 },
  { name = "genre", count = 5 },
  { name = "actor", count = 80 },
]
edges = [
  { name = "um", src = "user", dst = "movie", branching = 8, rating = true },
  { name = "mg", src = "movie", dst = "genre", branching = 2 },
  { name = "ma", src = "movie", dst = "actor", branching = 3, aligned = true },
]
[planted]
blocks = 2
in_block_prob = 0.8
rating_shift = 1.0
"""

CONFIG = """
seed = 5
[data]
schema = "data/schema.txt"
rating = "um"
edges = { um = "data/um.tsv", mg = "data/mg.tsv", ma = "data/ma.tsv" }
[split]
folds = 3
[metapaths]
paths = ["um,>mg", "um,>ma,<ma"]
[model]
algos = ["dmf2", "p3"]
dim = 8
epochs = 5
"""


def test_sampling_weights():
    probs = mw.softmax([5.0, 1.0, 3.0])
    expected = [math.exp(w) for w in (5.0, 1.0, 3.0)]
    total = sum(expected)
    for p, e in zip(probs, expected):
        assert abs(p - e / total) < 1e-12
    counts = mw.wsample_counts([5.0, 1.0, 3.0], 20000, seed=1)
    assert sum(counts) == 20000
    assert abs(counts[0] / 20000 - probs[0]) < 0.02


def test_graph_relations_and_models():
    g = mw.Graph.synthetic(SPEC)
    assert g.node_count("user") == 60
    assert g.edge_count("um") == 480
    assert len(g.edges("user", "user0", "um")) == 8

    full = g.expand("um,>ma,<ma")
    sampled = g.sample("um,>ma,<ma", walks=50, seed=2)
    assert full.method == "full" and sampled.method == "sampled"
    assert sampled.src_type == "user" and sampled.dst_type == "movie"
    exact = {(s, d) for s, d, _ in full.entries()}
    assert all((s, d) in exact for s, d, _ in sampled.entries())
    assert sampled.total_count() == 60 * 50

    walk = g.walk("um,>mg,<mg", "user3", seed=9)
    assert walk is None or (len(walk) == 4 and walk[0] == "user3")

    genre = g.sample("um,>mg", seed=1)
    actor = g.sample("um,>ma", seed=1)
    assert 0.0 <= genre.nig() < actor.nig() <= 1.0
    kept, report = mw.prune([genre, actor], keep_top=1)
    assert [r.label for r in kept] == ["uma"]
    assert {label for label, _, _ in report} == {"umg", "uma"}

    folds = g.kfold("um", k=4, seed=0)
    assert len(folds) == 4
    assert sum(len(f.test) for f in folds) == 480
    split = folds[0]
    train = split.train
    assert train.edge_count("um") == 480 - len(split.test)

    target = train.expand("um")
    model = mw.train(target, [train.expand("ma")], dim=8, epochs=10, seed=4)
    assert len(model.loss_trace) == 10
    assert model.loss_trace[-1] < model.loss_trace[0]
    seen = [d for _, d, _ in train.edges("user", "user0", "um")]
    recs = model.recommend("user", "user0", "movie", k=5, exclude=seen)
    assert len(recs) == 5 and not set(seen) & {m for m, _ in recs}
    assert recs[0][1] >= recs[-1][1]
    assert abs(model.score("user", "user0", "movie", recs[0][0]) - recs[0][1]) < 1e-12

    with tempfile.TemporaryDirectory() as tmp:
        path = pathlib.Path(tmp) / "m.model"
        model.save(path)
        again = mw.Model.load(path)
        assert again.recommend("user", "user0", "movie", k=5, exclude=seen) == recs

    p3 = mw.Baseline(train, "um", "p3", alpha=1.0)
    assert abs(sum(p3.scores("user0")) - 1.0) < 1e-9
    top = p3.recommend("user0", k=3)
    assert len(top) == 3 and not set(seen) & {m for m, _ in top}


def test_metrics():
    ranked = ["a", "b", "c", "d"]
    assert mw.precision_at(ranked, ["b", "d", "z"], 2) == 0.5
    assert mw.recall_at(ranked, ["b", "d", "z"], 4) == 2 / 3


def test_pipeline_round_trip():
    with tempfile.TemporaryDirectory() as tmp:
        root = pathlib.Path(tmp)
        mw.Graph.synthetic(SPEC).write(root / "data")
        (root / "experiment.toml").write_text(CONFIG)
        first = mw.run_experiment(root / "experiment.toml", root / "a")
        second = mw.run_experiment(root / "experiment.toml", root / "b")
        assert first == second
        assert set(first) == {"dmf2", "p3"}
        k, precision, recall = first["p3"][-1]
        assert k == 10 and 0.0 <= precision <= 1.0 and 0.0 < recall <= 1.0
        assert (root / "a" / "summary.csv").read_bytes() == (root / "b" / "summary.csv").read_bytes()


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok  {name}")
