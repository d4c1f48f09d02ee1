"""Compare the compiled and pure-Python simulation kernels.

Runs the same ensembles with each backend, checks that the statistics are
bit-identical and prints wall-clock time per realization.

    python benchmarks/bench_kernels.py --n 500
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cmereduce import _backend
from cmereduce import fixtures as F
from cmereduce.ssa import OnTheFlyChain, PrecomputedChain, ensemble
from cmereduce.reduction import reduce_network


def _cases(small_init):
    enzyme = F.enzyme()
    pfk = F.pfk()
    yield "enzyme exact", enzyme, "exact", lambda: None
    yield "pfk exact", pfk, "exact", lambda: None
    small = F.enzyme(init=small_init)
    red = reduce_network(small)
    yield "enzyme(small) slow", small, "slow", lambda: PrecomputedChain(red)
    chain = OnTheFlyChain(pfk)
    yield "pfk slow on-the-fly", pfk, "slow", lambda: chain


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=500, help="realizations per case")
    parser.add_argument("--t-end", type=float, default=50.0)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args(argv)

    if _backend.BACKEND != "compiled":
        print("compiled kernels are not available; only the Python backend will run")
    backends = ["compiled", "python"] if _backend.BACKEND == "compiled" else ["python"]
    grid = np.linspace(0.0, args.t_end, 20)
    print(f"{'case':24s} " + " ".join(f"{b + ' ms/path':>18s}" for b in backends) + f" {'speedup':>9s} identical")
    for label, net, method, make_chain in _cases((3, 30, 0, 3, 0, 0)):
        chain = make_chain()
        if chain is not None:
            # populate lazily built columns so both backends time the same work
            ensemble(net, args.n, grid, base_seed=args.seed, method=method, chain=chain)
        times, stats = [], []
        for b in backends:
            t0 = time.perf_counter()
            s = ensemble(net, args.n, grid, base_seed=args.seed, method=method, chain=chain, backend=b)
            times.append((time.perf_counter() - t0) / args.n * 1e3)
            stats.append(s)
        same = all(np.array_equal(stats[0].mean, s.mean) and np.array_equal(stats[0].std, s.std) for s in stats)
        speed = times[-1] / times[0] if len(times) > 1 else 1.0
        print(f"{label:24s} " + " ".join(f"{t:18.4f}" for t in times) + f" {speed:9.1f} {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
