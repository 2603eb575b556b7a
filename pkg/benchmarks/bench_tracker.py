"""Tracker tick throughput: numba kernel against the numpy fallback.

    python3 benchmarks/bench_tracker.py [--ticks 20000] [--nodes 22]

Also checks the two backends end in the same state.
"""
import argparse
import time

import numpy as np

from delayfrost import DelayModel, TrackerEngine, build_graph, build_weights
from delayfrost._accel import HAVE_NUMBA


def run(backend, weights, delays, b0, ticks, repeat):
    best = np.inf
    eng = None
    for _ in range(repeat):
        eng = TrackerEngine(weights, delays, b0, 0.01, backend=backend)
        t0 = time.perf_counter()
        eng.advance(ticks)
        best = min(best, time.perf_counter() - t0)
    return best, eng


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ticks", type=int, default=20000)
    ap.add_argument("--nodes", type=int, default=22)
    ap.add_argument("--tau-max", type=int, default=157)
    ap.add_argument("--coupling", default="per_edge", choices=["per_edge", "shared"])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    g = build_graph(args.nodes, "random_strongly_connected", seed=7)
    w = build_weights(g)
    d = DelayModel.uniform(0, args.tau_max, seed=1, coupling=args.coupling)
    b0 = 2.0 * np.arange(1, args.nodes + 1)
    n_edges = int(np.count_nonzero(w.entries))
    print(f"{args.nodes} nodes, {n_edges} edges (self-loops included), tau_max={args.tau_max}, {args.ticks} ticks")

    t_np, e_np = run("numpy", w, d, b0, args.ticks, args.repeat)
    print(f"numpy : {t_np:8.3f} s  ({1e6 * t_np / args.ticks:7.2f} us/tick)")
    if not HAVE_NUMBA:
        print("numba not installed; skipping JIT backend")
        return
    run("numba", w, d, b0, 10, 1)  # compile
    t_nb, e_nb = run("numba", w, d, b0, args.ticks, args.repeat)
    print(f"numba : {t_nb:8.3f} s  ({1e6 * t_nb / args.ticks:7.2f} us/tick)")
    print(f"speedup {t_np / t_nb:.1f}x, max state gap {np.max(np.abs(e_np.r - e_nb.r)):.2e}")


if __name__ == "__main__":
    main()
