"""Link prediction over several seeds for a set of model variants (mean ± standard error of AUC and AP).

    python scripts/run_linkpred.py --dataset cora --models arga arvga arga_gd arga_ax --seeds 10
"""
import argparse

from _common import Timer, add_common_args, dump, get_graph, parallel_map, print_table, summarise

from argem.graph import split_edges
from argem.linkpred import link_prediction_scores
from argem.train import TrainConfig, train

_GRAPH = None


def one(job):
    dataset, variant, seed, overrides = job
    split = split_edges(_GRAPH, 0.05, 0.10, seed=seed)
    cfg = TrainConfig.for_dataset(dataset, variant=variant, seed=seed, **overrides)
    with Timer() as t:
        z = train(_GRAPH, split, cfg).embedding
    return {"model": variant, "seed": seed, "seconds": t.seconds,
            **link_prediction_scores(z, split.test_pos, split.test_neg)}


def main():
    global _GRAPH
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_common_args(p)
    p.add_argument("--models", nargs="+", default=["arga", "arvga"])
    p.add_argument("--prior", default="gaussian")
    p.add_argument("--adv-weight", type=float, default=1.0)
    args = p.parse_args()
    _GRAPH = get_graph(args.dataset, args.data_dir)
    overrides = {"prior": args.prior, "adv_weight": args.adv_weight}
    if args.epochs:
        overrides["epochs"] = args.epochs
    jobs = [(args.dataset, m, s, overrides) for m in args.models
            for s in range(args.first_seed, args.first_seed + args.seeds)]
    rows = parallel_map(one, jobs, args.jobs)
    for r in rows:
        print(f"{r['model']:>10} seed={r['seed']} auc={r['auc']:.4f} ap={r['ap']:.4f} ({r['seconds']:.1f}s)")
    summaries = {m: summarise([r for r in rows if r["model"] == m], ["auc", "ap"]) for m in args.models}
    print_table(f"\nlink prediction on {args.dataset} ({args.seeds} seeds)", summaries, ["auc", "ap"])
    dump(args.json, {"rows": rows, "summary": summaries, "args": vars(args)})


if __name__ == "__main__":
    main()
