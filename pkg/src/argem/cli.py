"""Command line: ``argem train | eval | export``.

Settings resolve as command-line flag > ``--config`` JSON file > built-in default.
Reports go to stdout as ``key=value`` lines; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cluster import cluster_embedding
from .datasets import DatasetNotFound, load_dataset
from .graph import DatasetParseError, Graph, SplitSizeError, split_edges
from .linkpred import link_prediction_scores
from .models import VARIANTS
from .train import TrainConfig, TrainedModel, load_checkpoint, save_checkpoint, train

log = logging.getLogger("argem")

MODEL_CHOICES = ["arga", "arvga", "arga_gd", "arvga_gd", "arga_ax", "arvga_ax"]
# flag name -> TrainConfig field
TRAIN_FLAGS = {
    "model": "variant",
    "prior": "prior",
    "epochs": "epochs",
    "lr": "lr",
    "disc_lr": "disc_lr",
    "hidden": "hidden",
    "embed": "embed",
    "disc_steps": "disc_steps",
    "adv_weight": "adv_weight",
    "seed": "seed",
    "batch": "batch",
    "kl_scale": "kl_scale",
}
RUN_DEFAULTS = {"val_frac": 0.05, "test_frac": 0.10, "dataset": "cora", "repeat": 1, "jobs": 1,
                "kmeans_restarts": 10}


class UsageError(Exception):
    pass


@dataclass
class RunRecord:
    config: dict
    seed: int
    metrics: dict = field(default_factory=dict)
    losses: list = field(default_factory=list)
    duration_s: float = 0.0

    def to_json(self) -> dict:
        return {"config": self.config, "seed": self.seed, "metrics": self.metrics,
                "losses": self.losses, "duration_s": self.duration_s}


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON file with defaults for any flag below")
    p.add_argument("--dataset", help="cora | citeseer | pubmed | CONTENT,CITES | path prefix")
    p.add_argument("--data-dir", help="dataset root (default: $ARGEM_DATA_DIR)")
    p.add_argument("--model", choices=sorted(VARIANTS), type=str.lower)
    p.add_argument("--prior", choices=["gaussian", "uniform"], type=str.lower)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--disc-lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--embed", type=int)
    p.add_argument("--disc-steps", type=int)
    p.add_argument("--batch", type=int, help="prior/embedding rows per discriminator step")
    p.add_argument("--adv-weight", type=float)
    p.add_argument("--kl-scale", choices=["elbo", "per_node"],
                   help="weight of the KL term: kl/n (elbo, default) or kl as is (per_node)")
    p.add_argument("--seed", type=int)
    p.add_argument("--val-frac", type=float)
    p.add_argument("--test-frac", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="argem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and write checkpoint, embedding, run record")
    _add_train_flags(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("eval", help="link-prediction or clustering metrics")
    _add_train_flags(p)
    p.add_argument("--task", choices=["link", "cluster"], required=True)
    p.add_argument("--checkpoint", type=Path, help="evaluate a saved model instead of training")
    p.add_argument("--embedding", type=Path, help="evaluate an exported embedding TSV (cluster task)")
    p.add_argument("--repeat", type=int, help="train+eval R times with seeds seed..seed+R-1")
    p.add_argument("--jobs", type=int, help="parallel worker processes for --repeat")
    p.add_argument("--kmeans-restarts", type=int)
    p.add_argument("--nmi-average", choices=["arithmetic", "geometric"], default="arithmetic")
    p.add_argument("--report-json", type=Path, help="also write the report as JSON")
    p.add_argument("--out", type=Path, help="directory for per-run records")

    p = sub.add_parser("export", help="write the embedding of a checkpoint as TSV")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    return parser


def resolve_settings(args: argparse.Namespace) -> tuple[dict, dict]:
    """Merge defaults, config file and flags; returns ``(train_config_kwargs, run_options)``."""
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from None
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
        if "variant" in file_cfg:
            file_cfg.setdefault("model", file_cfg.pop("variant"))
        unknown = set(file_cfg) - set(TRAIN_FLAGS) - set(RUN_DEFAULTS) - {"data_dir"}
        if unknown:
            raise UsageError(f"unknown keys in config file: {sorted(unknown)}")

    def pick(name, default=None):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in file_cfg:
            return file_cfg[name]
        return default

    run = {k: pick(k, v) for k, v in RUN_DEFAULTS.items()}
    run["data_dir"] = pick("data_dir")
    cfg = {TRAIN_FLAGS[k]: pick(k) for k in TRAIN_FLAGS if pick(k) is not None}
    if str(run["dataset"]).lower() == "pubmed":
        cfg = {**TrainConfig.for_dataset("pubmed").to_dict(), **cfg}
    return cfg, run


def _make_config(cfg: dict, **overrides) -> TrainConfig:
    try:
        return TrainConfig(**{**cfg, **overrides})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _emit(report: dict, stream=None) -> None:
    stream = stream or sys.stdout
    for k, v in report.items():
        stream.write(f"{k}={_fmt(v)}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_embedding(path, z: np.ndarray, node_ids=None) -> Path:
    """``node_id<TAB>v_1 ... v_d`` per row; floats written with round-trip precision."""
    path = Path(path)
    ids = node_ids if node_ids is not None else [str(i) for i in range(z.shape[0])]
    with open(path, "w") as fh:
        for nid, row in zip(ids, z):
            fh.write(nid + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")
    return path


def read_embedding(path) -> tuple[list, np.ndarray]:
    ids, rows = [], []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\r\n").split("\t")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    return ids, np.array(rows, dtype=np.float64)


def run_once(g: Graph, cfg: TrainConfig, val_frac: float, test_frac: float, task: str | None = None,
             kmeans_restarts: int = 10, nmi_average: str = "arithmetic", allow_unsplit: bool = False):
    """Split (seeded by ``cfg.seed``), train, evaluate; returns ``(model, split, RunRecord)``.

    With ``allow_unsplit`` a graph too small to hold out edges trains on all of
    them and ``split`` is ``None``.
    """
    start = time.perf_counter()
    try:
        split = split_edges(g, val_frac, test_frac, seed=cfg.seed)
    except SplitSizeError as exc:
        if not allow_unsplit or task == "link":
            raise
        log.warning("%s; training on all edges without a held-out split", exc)
        split = None
    model = train(g, split, cfg)
    metrics = {}
    if task == "link":
        metrics = link_prediction_scores(model.embedding, split.test_pos, split.test_neg)
    elif task == "cluster":
        metrics = cluster_embedding(model.embedding, g.labels, seed=cfg.seed, restarts=kmeans_restarts,
                                    nmi_average=nmi_average)
    losses = [dict(epoch=i, **{k: v[i] for k, v in model.history.items()}) for i in range(cfg.epochs)]
    record = RunRecord(cfg.to_dict(), cfg.seed, metrics, losses, time.perf_counter() - start)
    return model, split, record


def _load_graph(run: dict) -> Graph:
    try:
        return load_dataset(str(run["dataset"]), run.get("data_dir"))
    except DatasetNotFound as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    cfg_kw, run = resolve_settings(args)
    cfg = _make_config(cfg_kw)
    g = _load_graph(run)
    model, split, record = run_once(g, cfg, run["val_frac"], run["test_frac"], allow_unsplit=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels = None if g.labels is None else g.labels.tolist()
    save_checkpoint(out / "checkpoint.npz", model, split, node_ids=g.node_ids,
                    extra={"dataset": str(run["dataset"]), "labels": labels})
    write_embedding(out / "embedding.tsv", model.embedding, g.node_ids)
    (out / "run.json").write_text(json.dumps(record.to_json(), indent=1))
    last = record.losses[-1]
    _emit({"model": cfg.variant, "dataset": run["dataset"], "n": g.n, "d": cfg.embed, "epochs": cfg.epochs,
           "seed": cfg.seed, "final_loss": last["loss"], "final_recon": last["recon"],
           "duration_s": round(record.duration_s, 3), "checkpoint": str(out / "checkpoint.npz")})
    return 0


def _labels_for(ids, run) -> np.ndarray:
    """Ground-truth labels of ``--dataset`` reordered to match ``ids``."""
    g = _load_graph(run)
    if g.labels is None:
        raise UsageError("cluster task needs ground-truth labels")
    pos = {nid: i for i, nid in enumerate(g.node_ids)}
    try:
        return g.labels[[pos[i] for i in ids]]
    except KeyError as exc:
        raise UsageError(f"node {exc.args[0]!r} of the embedding is not in dataset {run['dataset']!r}") from None


def _eval_saved(args, run, cfg_kw) -> dict:
    if args.embedding is not None:
        if args.task == "link":
            raise UsageError("link evaluation needs a checkpoint (the held-out split is stored there)")
        ids, z = read_embedding(args.embedding)
        return cluster_embedding(z, _labels_for(ids, run), seed=cfg_kw.get("seed", 0),
                                 restarts=run["kmeans_restarts"], nmi_average=args.nmi_average)
    ck = load_checkpoint(args.checkpoint)
    z = ck.model.embedding
    if args.task == "link":
        if ck.split is None:
            raise UsageError("checkpoint has no stored edge split; cannot run link evaluation")
        return link_prediction_scores(z, ck.split.test_pos, ck.split.test_neg)
    labels = ck.meta.get("extra", {}).get("labels")
    if labels is None:
        if ck.node_ids is None:
            raise UsageError("cluster task needs ground-truth labels, and the checkpoint has none")
        labels = _labels_for(ck.node_ids, run)
    return cluster_embedding(z, np.asarray(labels), seed=ck.model.config.seed,
                             restarts=run["kmeans_restarts"], nmi_average=args.nmi_average)


def _repeat_worker(payload):
    g, cfg, run, task, nmi_average = payload
    _, _, record = run_once(g, cfg, run["val_frac"], run["test_frac"], task, run["kmeans_restarts"], nmi_average)
    return record


def aggregate(rows: list[dict]) -> dict:
    """Mean and standard error (sample std / sqrt(R)) of every metric."""
    out = {}
    for key in rows[0]:
        vals = np.array([r[key] for r in rows], dtype=np.float64)
        out[f"{key}_mean"] = float(vals.mean())
        out[f"{key}_stderr"] = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return out


def cmd_eval(args) -> int:
    cfg_kw, run = resolve_settings(args)
    if args.checkpoint is not None or args.embedding is not None:
        report = _eval_saved(args, run, cfg_kw)
        _emit(report)
        if args.report_json:
            Path(args.report_json).write_text(json.dumps(report, indent=1))
        return 0

    repeat = int(run["repeat"])
    if repeat < 1:
        raise UsageError("--repeat must be >= 1")
    g = _load_graph(run)
    if args.task == "cluster" and g.labels is None:
        raise UsageError("cluster task needs ground-truth labels")
    base = _make_config(cfg_kw)
    payloads = [(g, _make_config(cfg_kw, seed=base.seed + r), run, args.task, args.nmi_average)
                for r in range(repeat)]
    jobs = int(run["jobs"])
    if jobs > 1 and repeat > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_repeat_worker, payloads))
    else:
        records = [_repeat_worker(p) for p in payloads]

    rows = [r.metrics for r in records]
    if repeat == 1:
        _emit(rows[0])
    else:
        for i, rec in enumerate(records):
            sys.stdout.write(" ".join([f"run={i}", f"seed={rec.seed}"] +
                                      [f"{k}={_fmt(v)}" for k, v in rec.metrics.items()]) + "\n")
        sys.stdout.write(" ".join(["aggregate", f"runs={repeat}"] +
                                  [f"{k}={_fmt(v)}" for k, v in aggregate(rows).items()]) + "\n")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, rec in enumerate(records):
            (out / f"run_{i:03d}.json").write_text(json.dumps(rec.to_json(), indent=1))
    if args.report_json:
        payload = {"runs": rows, "aggregate": aggregate(rows) if repeat > 1 else rows[0],
                   "config": base.to_dict(), "task": args.task}
        Path(args.report_json).write_text(json.dumps(payload, indent=1))
    return 0


def cmd_export(args) -> int:
    ck = load_checkpoint(args.checkpoint)
    write_embedding(args.out, ck.model.embedding, ck.node_ids)
    _emit({"rows": ck.model.embedding.shape[0], "dim": ck.model.embedding.shape[1], "out": str(args.out)})
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"train": cmd_train, "eval": cmd_eval, "export": cmd_export}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except (DatasetParseError, SplitSizeError, OSError, ValueError) as exc:
        sys.stderr.write(f"argem: error: {exc}\n")
        return 1
    except FloatingPointError as exc:
        sys.stderr.write(f"argem: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
