"""Node clustering (K-means on the embedding, k = number of classes) over several seeds.

Models train on the full graph; ``--adv-weight 0`` gives the plain autoencoder.

    python scripts/run_clustering.py --dataset cora --models arga arvga_ax --seeds 10
"""
import argparse

from _common import Timer, add_common_args, dump, get_graph, parallel_map, print_table, summarise

from argem.cluster import cluster_embedding
from argem.train import TrainConfig, train

KEYS = ["acc", "nmi", "f1", "precision", "ari"]
_GRAPH = None


def one(job):
    dataset, variant, seed, overrides = job
    cfg = TrainConfig.for_dataset(dataset, variant=variant, seed=seed, **overrides)
    with Timer() as t:
        z = train(_GRAPH, None, cfg).embedding
    tag = variant if overrides.get("adv_weight", 1.0) else f"{variant}(adv=0)"
    return {"model": tag, "seed": seed, "seconds": t.seconds, **cluster_embedding(z, _GRAPH.labels, seed=seed)}


def main():
    global _GRAPH
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_common_args(p)
    p.add_argument("--models", nargs="+", default=["arga", "arvga"])
    p.add_argument("--prior", default="gaussian")
    p.add_argument("--ablation", action="store_true", help="also run every model with adv_weight 0")
    args = p.parse_args()
    _GRAPH = get_graph(args.dataset, args.data_dir)
    base = {"prior": args.prior}
    if args.epochs:
        base["epochs"] = args.epochs
    weights = [1.0, 0.0] if args.ablation else [1.0]
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    jobs = [(args.dataset, m, s, {**base, "adv_weight": w}) for m in args.models for w in weights for s in seeds]
    rows = parallel_map(one, jobs, args.jobs)
    for r in rows:
        print(f"{r['model']:>16} seed={r['seed']} " + " ".join(f"{k}={r[k]:.4f}" for k in KEYS))
    tags = list(dict.fromkeys(r["model"] for r in rows))
    summaries = {t: summarise([r for r in rows if r["model"] == t], KEYS) for t in tags}
    print_table(f"\nclustering on {args.dataset} ({args.seeds} seeds)", summaries, KEYS)
    dump(args.json, {"rows": rows, "summary": summaries, "args": vars(args)})


if __name__ == "__main__":
    main()
