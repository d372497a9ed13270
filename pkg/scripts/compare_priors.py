"""Gaussian versus uniform prior for ARGA/ARVGA on link prediction and clustering.

    python scripts/compare_priors.py --dataset cora --seeds 10
"""
import argparse

from _common import add_common_args, dump, get_graph, print_table, summarise

from argem.cluster import cluster_embedding
from argem.graph import split_edges
from argem.linkpred import link_prediction_scores
from argem.train import TrainConfig, train


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    add_common_args(p)
    p.add_argument("--models", nargs="+", default=["arga", "arvga"])
    args = p.parse_args()
    g = get_graph(args.dataset, args.data_dir)
    rows = []
    for model in args.models:
        for prior in ("gaussian", "uniform"):
            for seed in range(args.first_seed, args.first_seed + args.seeds):
                kw = {"epochs": args.epochs} if args.epochs else {}
                cfg = TrainConfig.for_dataset(args.dataset, variant=model, prior=prior, seed=seed, **kw)
                split = split_edges(g, 0.05, 0.10, seed=seed)
                link = link_prediction_scores(train(g, split, cfg).embedding, split.test_pos, split.test_neg)
                clus = cluster_embedding(train(g, None, cfg).embedding, g.labels, seed=seed)
                rows.append({"model": f"{model}/{prior}", "seed": seed, **link, **clus})
                print(f"{model}/{prior} seed={seed} auc={link['auc']:.4f} nmi={clus['nmi']:.4f}", flush=True)
    keys = ["auc", "ap", "acc", "nmi"]
    tags = list(dict.fromkeys(r["model"] for r in rows))
    summaries = {t: summarise([r for r in rows if r["model"] == t], keys) for t in tags}
    print_table(f"\nprior comparison on {args.dataset}", summaries, keys)
    dump(args.json, {"rows": rows, "summary": summaries, "args": vars(args)})


if __name__ == "__main__":
    main()
