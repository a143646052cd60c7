"""SHD against the number of hidden units on SF2, d=20, additive-GP data.

    python3 scripts/hidden_units.py --hidden 0 1 2 5 10 20 --n 1000 200 --seeds 10
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from daglearn.pipeline import Cell, run_cell


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, nargs="+", default=[0, 1, 2, 5, 10, 20])
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 200])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="results/hidden_units.csv")
    args = ap.parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "hidden", "seed", "shd", "nnz", "tpr", "fdr"])
        for n in args.n:
            lam = 0.01 if n >= 1000 else 0.03
            for m in args.hidden:
                cell = Cell(graph="sf2", d=20, n=n, sem="additive-gp", model="mlp", lam=lam,
                            hidden=(m,) if m else ())
                shd = []
                for seed in range(args.seeds):
                    r = run_cell(cell, seed)
                    shd.append(r["shd"])
                    w.writerow([n, m, seed, r["shd"], r["nnz"], r["tpr"], r["fdr"]])
                    fh.flush()
                print(f"n={n} hidden={m}: SHD {np.mean(shd):.1f} +- {np.std(shd):.1f}",
                      flush=True)


if __name__ == "__main__":
    main()
