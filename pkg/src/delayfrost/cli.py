"""Command line entry point: ``delayfrost run|compare|report|plot``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .analysis import theorem1_coefficient_trace


def _print_run(res: ex.RunOutput) -> None:
    r = res.summary["results"]
    print(f"scenario {res.summary['scenario']} -> {res.out_dir}")
    if "max_final_error" in r:
        print(f"  max final error {r['max_final_error']}  x* = {r['x_star']}")
    if "tracker_ticks_to_tol" in r:
        print(f"  tracker within {r['tracker_rel_tol']:.0%} from tick {r['tracker_ticks_to_tol']}; "
              f"naive flood worst case {r['naive_adversarial_worst']} (bound {r['naive_bound']}, "
              f"sampled {r['naive_sampled_worst']})")
    for c in res.checks:
        print("  " + c.line())


def cmd_run(args) -> int:
    try:
        cfg = ex.load_config(args.config)
        if args.set:
            data = cfg.to_dict()
            for item in args.set:
                key, _, value = item.partition("=")
                data[key] = ex.yaml.safe_load(value)
            cfg = ex.ExperimentConfig.from_dict(data)
        res = ex.run_scenario(cfg, args.out, backend=args.backend)
    except (ex.ConfigError, FileNotFoundError) as exc:
        print(exc, file=sys.stderr)
        return 2
    _print_run(res)
    if args.plot:
        for p in ex.emit_plots(res.out_dir):
            print(f"  wrote {p}")
    return 0 if res.passed else 1


def _trace_x(out: Path):
    header, data = ex.read_csv(out / "trace.csv")
    xcols = [k for k, h in enumerate(header) if h.startswith("x")]
    return header[0], data[:, 0], data[:, xcols]


def cmd_compare(args) -> int:
    outs = []
    root = Path(args.out) if args.out else ex.output_root() / "compare"
    for tag, ref in (("a", args.config_a), ("b", args.config_b)):
        try:
            cfg = ex.load_config(ref)
            res = ex.run_scenario(cfg, root / tag, backend=args.backend)
        except (ex.ConfigError, FileNotFoundError) as exc:
            print(exc, file=sys.stderr)
            return 2
        _print_run(res)
        outs.append(res)
    ok = all(r.passed for r in outs)
    try:
        (ia, ta, xa), (ib, tb, xb) = _trace_x(outs[0].out_dir), _trace_x(outs[1].out_dir)
    except FileNotFoundError:
        print("no comparable optimisation traces")
        return 0 if ok else 1
    m = min(len(xa), len(xb))
    diff = float(np.max(np.abs(xa[:m] - xb[:m]))) if m else 0.0
    print(f"max |x_a - x_b| over {m} common rows (by {ia}/{ib}): {diff:.3e}")
    if args.tol is not None:
        ok = ok and diff <= args.tol
        print(f"{'PASS' if diff <= args.tol else 'FAIL'} trace agreement within {args.tol:g}")
    return 0 if ok else 1


class _TraceRun:
    """Columns of an async trace exposed the way theorem1_coefficient_trace reads them."""

    def __init__(self, header, data, doc):
        n = int(data[:, header.index("agent")].max()) + 1
        rows = data.reshape(-1, n, data.shape[1])
        self.a1 = rows[:, 0, header.index("a1")]
        self.alpha = rows[:, 0, header.index("alpha")]
        self.e_diag = rows[:, :, header.index("e_ii")]
        self.u = np.asarray(doc["results"]["u"])
        cfg = ex.ExperimentConfig.from_dict(doc["config"])
        objs = cfg.build_objectives()
        x_star = np.atleast_1d(np.asarray(doc["results"]["x_star"], dtype=float))
        self.local_grad_at_opt = np.stack([f.grad(x_star) for f in objs])


def cmd_report(args) -> int:
    d = Path(args.trace_dir)
    path = d / "summary.json"
    if not path.exists():
        print(f"no summary.json in {d}", file=sys.stderr)
        return 2
    doc = json.loads(path.read_text())
    print(f"scenario {doc['scenario']} ({doc['experiment']}, {doc['algorithm']})")
    for c in doc["checks"]:
        print(f"  {'PASS' if c['passed'] else 'FAIL'} {c['name']}: measured={c['measured']} bound={c['bound']}")
    ok = doc["passed"]
    if doc["experiment"] == "optimization" and doc["algorithm"] == "async_frost":
        header, data = ex.read_csv(d / "trace.csv")
        rep = theorem1_coefficient_trace(_TraceRun(header, data, doc))
        print(rep.to_text())
        (d / "report.json").write_text(rep.to_json() + "\n")
        if args.strict:
            ok = ok and rep.passed
    return 0 if ok else 1


def cmd_plot(args) -> int:
    try:
        paths = ex.emit_plots(args.trace_dir)
    except (FileNotFoundError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return 2
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="delayfrost", description=__doc__)
    ap.add_argument("--list", action="store_true", help="list bundled scenarios and exit")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("run", help="run one scenario (path or bundled name)")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default $DELAYFROST_OUTPUT_ROOT/<scenario>)")
    p.add_argument("--backend", choices=["numba", "numpy"])
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.add_argument("--set", action="append", metavar="KEY=YAML", help="override a top-level config key")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run two scenarios and diff their traces")
    p.add_argument("config_a")
    p.add_argument("config_b")
    p.add_argument("--out")
    p.add_argument("--backend", choices=["numba", "numpy"])
    p.add_argument("--tol", type=float, help="fail unless traces agree to this tolerance")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="summarise a finished run and its theory checks")
    p.add_argument("trace_dir")
    p.add_argument("--strict", action="store_true", help="exit nonzero if a theory check fails")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="write SVG plots for a finished run")
    p.add_argument("trace_dir")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.list:
        print("\n".join(ex.builtin_scenarios()))
        return 0
    if args.command is None:
        ap.print_help()
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
