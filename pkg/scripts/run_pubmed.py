"""PubMed link prediction with its own schedule (2000 epochs, discriminator lr 0.008).

Slow on a laptop CPU; each seed trains a 19717-node model for 2000 epochs.

    python scripts/run_pubmed.py --seeds 10
"""
import argparse

from _common import Timer, dump, get_graph, print_table, summarise

from argem.graph import split_edges
from argem.linkpred import link_prediction_scores
from argem.train import TrainConfig, train


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--data-dir")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--model", default="arga")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--json")
    args = p.parse_args()
    g = get_graph("pubmed", args.data_dir)
    rows = []
    for seed in range(args.seeds):
        split = split_edges(g, 0.05, 0.10, seed=seed)
        cfg = TrainConfig.for_dataset("pubmed", variant=args.model, seed=seed, epochs=args.epochs)
        with Timer() as t:
            z = train(g, split, cfg).embedding
        r = {"seed": seed, "seconds": t.seconds, **link_prediction_scores(z, split.test_pos, split.test_neg)}
        rows.append(r)
        print(f"seed={seed} auc={r['auc']:.4f} ap={r['ap']:.4f} ({t.seconds:.0f}s)", flush=True)
    summary = {args.model: summarise(rows, ["auc", "ap"])}
    print_table("\nPubMed link prediction", summary, ["auc", "ap"])
    dump(args.json, {"rows": rows, "summary": summary})


if __name__ == "__main__":
    main()
