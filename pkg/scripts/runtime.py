"""Wall-clock time of the ER2, n=1000, MLP-SEM / MLP-model cell for several d.

    python3 scripts/runtime.py --d 10 20 --seeds 3
"""

import argparse

import numpy as np

from daglearn.pipeline import Cell, run_cell


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, nargs="+", default=[10, 20])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    for d in args.d:
        cell = Cell(graph="er2", d=d, n=args.n, sem="mlp", model="mlp")
        times = []
        for seed in range(args.seeds):
            row = run_cell(cell, seed)
            times.append(row["learn_time"])
            print(f"d={d} seed {seed}: {row['learn_time']:.1f}s shd {row['shd']}", flush=True)
        t = np.array(times)
        print(f"d={d}: {t.mean():.1f} +- {t.std():.1f} s over {len(t)} seeds")


if __name__ == "__main__":
    main()
