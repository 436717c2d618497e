"""Rare-class experiment: mutual-information kinds vs baselines.

Replays the imbalanced layout (3/22 labeled per class, 150/3000
unlabeled at rho=20 by default) across seeds and prints per-round rare
selection counts and rare-class accuracy, plus a penalty matrix over
the rare-accuracy traces.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from submodal.harness import RunConfig, penalty_matrix, run_al


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--methods", default="flqmi,logdetmi,gcmi,div_gcmi,random,entropy,margin")
    ap.add_argument("--rho", type=float, default=20.0)
    ap.add_argument("--rounds", type=int, default=3)
    ap.add_argument("--budget", type=int, default=125)
    ap.add_argument("--num-seeds", type=int, default=3)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--out", default="runs/rare")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traces = {}
    for method in args.methods.split(","):
        rows = []
        for seed in range(args.num_seeds):
            cfg = RunConfig.from_dict(
                {
                    "scenario": "rare",
                    "scenario_params": {"rho": args.rho, "dim": args.dim},
                    "method": method,
                    "rounds": args.rounds,
                    "budget": args.budget,
                    "seed": seed,
                }
            )
            res = run_al(cfg)
            rows.append([r.rare_accuracy for r in res.records])
            rare = [r.rare_selected for r in res.records]
            print(f"{method:10s} seed={seed} rare_selected={rare} "
                  f"rare_acc={[round(a, 3) for a in rows[-1]]}")
        traces[method] = np.array(rows)
    pm = penalty_matrix(traces)
    pm.to_csv(out / "penalty_rare_accuracy.csv")
    summary = {m: {"rare_acc_mean": traces[m][:, -1].mean()} for m in traces}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"\npenalty matrix -> {out / 'penalty_rare_accuracy.csv'}")
    for name, row in zip(pm.methods, pm.matrix):
        print(f"  {name:12s} row_sum={row.sum():.3f} col_sum={pm.matrix[:, pm.methods.index(name)].sum():.3f}")


if __name__ == "__main__":
    main()
