"""Smoke test for the framestudy extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/framestudy-*.whl
    python python/smoke_test.py
"""

from pathlib import Path

import framestudy as fs

ROOT = Path(__file__).resolve().parent.parent


def check_stats():
    lo, hi = fs.wilson_interval(5, 10)
    assert abs(lo - 0.2365930905125646) < 1e-12 and abs(hi - 0.7634069094874354) < 1e-12

    ci = fs.newcombe_diff_ci(56, 70, 48, 80)
    assert round(ci["lower"], 4) == 0.0524 and round(ci["upper"], 4) == 0.3339
    assert ci["significant"]

    r = fs.t_test([1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0, 6.0])
    assert r["t"] < 0 and 0 < r["p"] < 1

    assert fs.percentile([1.0, 2.0, 3.0, 4.0], 100) == 4.0
    assert fs.seed_consensus([True] * 16 + [False] * 4)
    assert not fs.seed_consensus([True] * 15 + [False] * 5)


def check_text():
    assert fs.normalize_name("Communications Workers of America Local 7250") == "CWA"
    assert fs.normalize_name("Nobody In Particular") is None
    labels = fs.classify_text("Join us on the picket line")
    assert labels["motivational"] and not labels["diagnostic"]


def check_synthetic():
    study = fs.Study.synthetic(
        seed=7,
        n_orgs=20,
        cases_per_org=40,
        effects=[("win", "diagnostic", -7, -3, 0.2)],
    )
    assert study.n_instances == 800, study
    cmp = study.compare_pre(seed=1)
    diag = next(f for f in cmp["frames"] if f["frame"] == "diagnostic")
    assert diag["stars"] == 3, diag

    table = study.patterns(seed=1)
    assert len(table["cells"]) == 15

    rob = study.robustness(mode="multi_seed_balance", n_seeds=5, base_seed=3)
    assert len(rob["summaries"]) == 5 and len(rob["cells"]) == 15

    dev = study.deviation_matrix()
    assert len(dev["dendrogram"]["leaf_order"]) == 20


def check_sample():
    sample = ROOT / "data" / "sample"
    study = fs.Study.from_files(
        str(sample / "elections.csv"),
        str(sample / "posts.jsonl"),
        start="2019-01-01",
        end="2020-12-31",
    )
    assert study.n_instances > 0 and len(study.orgs) == 8
    again = fs.Study.from_files(
        str(sample / "elections.csv"),
        str(sample / "posts.jsonl"),
        start="2019-01-01",
        end="2020-12-31",
    )
    assert study.instances() == again.instances()
    base = study.baseline_distribution(n_seeds=5, seed=1)
    assert all(0.0 <= p <= 1.0 for p in base["median"])


if __name__ == "__main__":
    for check in (check_stats, check_text, check_synthetic, check_sample):
        check()
        print(f"ok  {check.__name__}")
    print(f"framestudy {fs.__version__}: all smoke checks passed")
