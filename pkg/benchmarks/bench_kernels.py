"""Compare the compiled and pure-Python kernels on synthetic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rows 4000]
"""

from __future__ import annotations

import argparse
import random
import timeit

import numpy as np

from vulguard import _pure, kernels
from vulguard.models import trees


def source_lines(n: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    pieces = ["int x = 1;", "/* block", "still */", 'char *s = "// no";', "y++; // tail", "  return x;", "# note"]
    return [" ".join(rng.choice(pieces) for _ in range(rng.randint(1, 4))) for _ in range(n)]


def split_problem(rows: int, features: int, seed: int):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 50, size=(rows, features)).astype(np.float64)
    y = (X[:, 0] + rng.normal(0, 10, size=rows) > 25).astype(np.float64)
    return X, y, np.arange(rows, dtype=np.int64), np.arange(features, dtype=np.int64)


def fit_tree_with(module, X: np.ndarray, y: np.ndarray):
    # trees look the kernel up on ``kernels`` at call time
    saved = kernels.best_split
    kernels.best_split = module.best_split
    try:
        return trees.DecisionTree.fit(X, y).to_json()
    finally:
        kernels.best_split = saved


def best_of(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--rows", type=int, default=4000)
    parser.add_argument("--lines", type=int, default=20000)
    args = parser.parse_args()

    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled backend not built; showing the pure-Python timings only")

    lines = source_lines(args.lines, 1)
    X, y, rows, feats = split_problem(args.rows, 14, 2)
    Xs, ys, rows_s, _ = split_problem(24, 14, 3)
    rng = np.random.default_rng(4)
    Xt = np.round(rng.normal(size=(args.rows, 14)), 1)
    yt = (rng.random(args.rows) < 0.3).astype(np.float64)
    cases = {
        f"strip_comments ({args.lines} lines)": lambda m: m.strip_comments(lines, kernels.STYLE_C),
        f"best_split ({args.rows} x 14)": lambda m: m.best_split(X, y, rows, feats),
        "best_split (24 x 14, leaf-sized)": lambda m: m.best_split(Xs, ys, rows_s, feats),
        f"tree fit ({args.rows} x 14, noisy)": lambda m: fit_tree_with(m, Xt, yt),
    }
    print(f"{'kernel':32} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for label, call in cases.items():
        t_pure = best_of(lambda: call(_pure), args.repeat)
        if "compiled" in impls:
            compiled = impls["compiled"]
            assert call(compiled) == call(_pure), label
            t_fast = best_of(lambda: call(compiled), args.repeat)
            print(f"{label:32} {t_pure * 1e3:8.2f}ms {t_fast * 1e3:8.2f}ms {t_pure / t_fast:7.1f}x")
        else:
            print(f"{label:32} {t_pure * 1e3:8.2f}ms {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
