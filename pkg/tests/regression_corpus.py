"""Frozen end-to-end corpus: 20 seeded instances, ratios against branch and bound.

Run ``python3 tests/regression_corpus.py`` once to write the fixture; the
acceptance suite only reads it.
"""
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from helpers import bnb_fl  # noqa: E402
from udgfl.pipeline import RunConfig, generate_instance, run_pipeline  # noqa: E402

FIXTURE = Path(__file__).parent / "fixtures" / "regression_ratios.json"
FAMILIES = ("uniform", "clustered", "corridor", "uniform")


def corpus_configs():
    out = []
    for k in range(20):
        fam = FAMILIES[k % 4]
        box = 6.0 if fam == "corridor" else 3.0
        out.append(RunConfig(family=fam, n=36, box=box, n_facilities=10, seed=100 + k, eps=0.5))
    return out


def measure():
    rows = []
    for cfg in corpus_configs():
        inst = generate_instance(cfg)
        opt = bnb_fl(inst.graph.points, inst.clients, inst.costs)
        row = {"seed": cfg.seed, "family": cfg.family, "n": inst.graph.n, "facilities": len(inst.costs),
               "opt": opt}
        for solver in ("boxptas", "qptas"):
            rep = run_pipeline(RunConfig(**{**cfg.__dict__, "solver": solver}), inst, audit=False)
            row[solver] = rep.cost / opt
        rows.append(row)
    return rows


if __name__ == "__main__":
    if FIXTURE.exists() and "--force" not in sys.argv:
        sys.exit(f"{FIXTURE} already frozen; pass --force to overwrite")
    rows = measure()
    FIXTURE.write_text(json.dumps({"eps": 0.5, "rows": rows}, indent=1) + "\n")
    for r in rows:
        print(r["seed"], r["family"], f"{r['boxptas']:.4f}", f"{r['qptas']:.4f}")
