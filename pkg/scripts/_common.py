"""Shared helpers for the experiment scripts."""
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from argem.datasets import load_dataset, synthetic_citation_graph

# Cora's shape: 2708 nodes, 7 classes, 1433 binary words
SYNTHETIC = dict(n=2708, k=7, m=1433, avg_degree=3.9, words_per_node=18, seed=0)


def get_graph(name, data_dir=None):
    if name == "synthetic":
        return synthetic_citation_graph(**SYNTHETIC)
    return load_dataset(name, data_dir)


def add_common_args(p):
    p.add_argument("--dataset", default="cora", help="cora | citeseer | pubmed | synthetic | path prefix")
    p.add_argument("--data-dir")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", help="write all rows and summaries here")


def parallel_map(fn, items, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def summarise(rows, keys):
    out = {}
    for k in keys:
        v = np.array([r[k] for r in rows])
        out[k] = (float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0)
    return out


def print_table(title, summaries, keys):
    print(title)
    print("model".ljust(22) + "".join(k.rjust(18) for k in keys))
    for name, s in summaries.items():
        print(name.ljust(22) + "".join(f"{s[k][0]:.4f} ± {s[k][1]:.4f}".rjust(18) for k in keys))
    sys.stdout.flush()


def dump(path, payload):
    if path:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0
