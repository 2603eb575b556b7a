"""Config-driven scenario runner.

A scenario is a YAML document (see ``scenarios/``). ``run_scenario`` builds the
graph, objectives and delay model, runs the requested algorithm and writes

* ``trace.csv``: one row per (time index, agent); floats as shortest repr, so
  reruns with the same seeds are byte-identical,
* ``summary.json``: resolved config, final errors, configured checks.

Scenarios of kind ``tracker_vs_naive`` write ``tracker.csv``, ``naive.csv`` and
``completion.csv`` instead of ``trace.csv``.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .async_frost import EpochSchedule, StepPolicy, _initial_rows, normalized_gradients, run_async_frost
from .delay import DelayModel
from .graph import (COLUMN, DOUBLY, ROW, WEIGHT_CLASSES, GraphError, build_graph, build_weights,
                    is_strongly_connected)
from .naive import flood_completion, naive_estimates, worst_case_bound
from .objectives import GlobalProblem, Quadratic, check_assumption5, local_gradients, integer_shift_quadratics
from .sync import STEPPERS, diminishing, run_sync
from .tracker import TrackerEngine

ALGORITHMS = ("dgd", "gradient_tracking", "addopt", "frost", "async_frost", "naive_averaging")
EXPERIMENTS = ("optimization", "tracker_vs_naive")
DEFAULT_WEIGHTS = {"dgd": DOUBLY, "gradient_tracking": DOUBLY, "addopt": COLUMN,
                   "frost": ROW, "async_frost": ROW, "naive_averaging": ROW}
OUTPUT_ROOT_ENV = "DELAYFROST_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Invalid scenario; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid config:\n  - " + "\n  - ".join(self.violations))


@dataclass
class ExperimentConfig:
    scenario: str
    algorithm: str = "async_frost"
    experiment: str = "optimization"
    graph: dict = field(default_factory=lambda: {"nodes": 22, "topology": "random_strongly_connected", "seed": 0})
    objective: dict = field(default_factory=lambda: {"kind": "integer_shifts"})
    delay: dict = field(default_factory=lambda: {"distribution": "constant", "value": 0})
    kappa: float = 0.01
    period: int | str = "auto"
    alpha: float | str | dict = "theorem2"
    epochs: int = 40
    ticks: int = 2000
    x0: float | list = 0.0
    initial_average: str = "exact"
    early_stop: float | None = None
    trace_every: int = 1
    checks: dict = field(default_factory=dict)
    output: str | None = None

    # ---------------------------------------------------------------- io
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(["config must be a mapping"])
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([f"unknown key {k!r}" for k in unknown])
        if "scenario" not in data:
            raise ConfigError(["missing required key 'scenario'"])
        return cls(**data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(yaml.safe_load(text))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_yaml(Path(path).read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_yaml())

    # ---------------------------------------------------------- builders
    def build_graph(self):
        gspec = dict(self.graph)
        kw = {}
        if "edges" in gspec:
            kw["edges"] = [tuple(e) for e in gspec["edges"]]
        if "edge_prob" in gspec:
            kw["edge_prob"] = gspec["edge_prob"]
        return build_graph(int(gspec.get("nodes", 0)), gspec.get("topology", "random_strongly_connected"),
                           seed=int(gspec.get("seed", 0)), **kw)

    def weight_kind(self) -> str:
        return self.graph.get("weights", DEFAULT_WEIGHTS.get(self.algorithm, ROW))

    def build_weights(self, g=None):
        g = self.build_graph() if g is None else g
        return build_weights(g, self.weight_kind(), self.graph.get("rule", "uniform_in_degree"))

    def build_objectives(self) -> list:
        spec = dict(self.objective)
        kind = spec.get("kind", "integer_shifts")
        n = int(self.graph.get("nodes", 0))
        if kind == "integer_shifts":
            return integer_shift_quadratics(n, outlier=spec.get("outlier"))
        if kind == "quadratics":
            shifts = np.asarray(spec["shifts"], dtype=float)
            curv = np.broadcast_to(np.asarray(spec.get("curvature", 1.0), dtype=float), (len(shifts),))
            return [Quadratic(np.atleast_1d(c), float(a)) for c, a in zip(shifts, curv)]
        if kind == "random_quadratics":
            rng = np.random.default_rng(int(spec.get("seed", 0)))
            dim = int(spec.get("dim", 1))
            lo, hi = spec.get("curvature_range", [0.5, 1.5])
            return [Quadratic(rng.uniform(-10, 10, dim), float(rng.uniform(lo, hi))) for _ in range(n)]
        raise ConfigError([f"unknown objective kind {kind!r}"])

    def build_delays(self) -> DelayModel:
        return DelayModel.from_dict(self.delay)

    def resolved_period(self, delays: DelayModel | None = None) -> int:
        if self.period != "auto":
            return int(self.period)
        delays = self.build_delays() if delays is None else delays
        return EpochSchedule.auto(delays.tau_max, self.kappa, self.epochs).period

    def resolved(self) -> "ExperimentConfig":
        out = ExperimentConfig.from_dict(json.loads(json.dumps(self.to_dict())))
        if self.algorithm == "async_frost" or self.experiment == "tracker_vs_naive":
            out.period = self.resolved_period()
        return out

    # -------------------------------------------------------- validation
    def violations(self) -> list[str]:
        bad = []
        if self.experiment not in EXPERIMENTS:
            bad.append(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.algorithm not in ALGORITHMS:
            bad.append(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.weight_kind() not in WEIGHT_CLASSES:
            bad.append(f"graph.weights must be one of {WEIGHT_CLASSES}")
        if not self.kappa > 0:
            bad.append("kappa must be positive")
        if self.epochs < 0 or self.ticks < 0:
            bad.append("epochs and ticks must be nonnegative")
        if self.trace_every < 1:
            bad.append("trace_every must be >= 1")
        if self.initial_average not in ("exact", "tracked"):
            bad.append("initial_average must be 'exact' or 'tracked'")
        g = None
        try:
            g = self.build_graph()
            if not is_strongly_connected(g):
                bad.append("graph is not strongly connected")
        except (GraphError, ValueError, TypeError, KeyError) as exc:
            bad.append(f"graph: {exc}")
        if g is not None:
            try:
                self.build_weights(g)
            except (GraphError, ValueError) as exc:
                bad.append(f"weights: {exc}")
        objs = None
        try:
            objs = self.build_objectives()
            if g is not None and len(objs) != g.node_count:
                bad.append(f"objective count {len(objs)} != node count {g.node_count}")
        except ConfigError as exc:
            bad.extend(exc.violations)
        except (KeyError, ValueError, TypeError) as exc:
            bad.append(f"objective: {exc}")
        delays = None
        try:
            delays = self.build_delays()
        except (ValueError, TypeError, KeyError) as exc:
            bad.append(f"delay: {exc}")
        if delays is not None and self.algorithm in ("dgd", "gradient_tracking", "addopt", "frost") \
                and self.experiment == "optimization" and delays.tau_max > 0:
            bad.append(f"{self.algorithm} is delay-free; set delay to constant 0")
        if self.algorithm in STEPPERS and self.alpha == "theorem2":
            bad.append(f"alpha 'theorem2' applies to async_frost/naive_averaging, not {self.algorithm}")
        if self.alpha == "theorem2" and objs is not None and self.experiment == "optimization":
            ok, ratio = check_assumption5([f.smoothness for f in objs])
            if not ok:
                bad.append(f"theorem2 step size needs smoothness ratio > 3/4, got {ratio:.6g}")
        elif isinstance(self.alpha, dict):
            if set(self.alpha) != {"diminishing"}:
                bad.append(f"alpha schedule must be {{diminishing: a0}}, got {self.alpha!r}")
        elif not isinstance(self.alpha, (int, float)) and self.alpha != "theorem2":
            bad.append(f"alpha must be 'theorem2', a number or {{diminishing: a0}}, got {self.alpha!r}")
        if self.period != "auto":
            if not isinstance(self.period, int) or self.period <= 0 or self.period % 2:
                bad.append("period must be 'auto' or a positive even integer")
            elif delays is not None and self.period // 2 <= delays.tau_max:
                bad.append(f"half period {self.period // 2} must exceed tau_max={delays.tau_max}")
        return bad

    def validate(self) -> "ExperimentConfig":
        bad = self.violations()
        if bad:
            raise ConfigError(bad)
        return self


# -------------------------------------------------------------- scenarios

def builtin_scenarios() -> list[str]:
    root = resources.files("delayfrost") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_config(ref: str | Path) -> ExperimentConfig:
    """Load a config from a path, or by name from the bundled scenarios."""
    path = Path(ref)
    if path.exists():
        return ExperimentConfig.load(path)
    name = str(ref)
    if name in builtin_scenarios():
        text = (resources.files("delayfrost") / "scenarios" / f"{name}.yaml").read_text()
        return ExperimentConfig.from_yaml(text)
    raise FileNotFoundError(f"no config file or bundled scenario named {ref!r}")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    bound: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: measured={self.measured:.6g} bound={self.bound:.6g}"


@dataclass
class RunOutput:
    out_dir: Path
    summary: dict
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _consensus(x: np.ndarray, u: np.ndarray) -> float:
    return float(np.linalg.norm(x - u @ x))


def _epochs_to_tolerance(dist: np.ndarray, tol: float) -> int | None:
    """First index after which every agent stays within ``tol``."""
    ok = np.all(dist < tol, axis=1)
    if not ok[-1]:
        return None
    bad = np.nonzero(~ok)[0]
    return 0 if len(bad) == 0 else int(bad[-1] + 1)


def _final_checks(cfg: ExperimentConfig, final: np.ndarray, x_star: np.ndarray) -> list[Check]:
    checks = []
    c = cfg.checks
    if "optimum_tol" in c:
        err = float(np.max(np.abs(final - x_star)))
        checks.append(Check("final_error_vs_optimum", err < c["optimum_tol"], err, c["optimum_tol"]))
    if "target" in c:
        tol = c.get("target_tol", c.get("optimum_tol", 1e-2))
        err = float(np.max(np.abs(final - np.asarray(c["target"], dtype=float))))
        checks.append(Check("final_error_vs_target", err < tol, err, tol))
    return checks


# ------------------------------------------------------------------ runners

def _run_async(cfg: ExperimentConfig, out: Path, backend=None):
    g = cfg.build_graph()
    w = cfg.build_weights(g)
    problem = GlobalProblem(cfg.build_objectives())
    delays = cfg.build_delays()
    sched = EpochSchedule(half=cfg.resolved_period(delays) // 2, epochs=cfg.epochs)
    res = run_async_frost(problem, w, delays, kappa=cfg.kappa, schedule=sched, alpha=cfg.alpha,
                          x0=cfg.x0, initial_average=cfg.initial_average, backend=backend,
                          early_stop=cfg.early_stop)
    n, dim = problem.n_agents, problem.dim
    u = res.u
    cons = res.consensus_error()
    dist = res.distance_to_optimum()
    header = (["epoch", "tick", "agent"] + [f"x{c}" for c in range(dim)] + [f"p{c}" for c in range(dim)]
              + ["e_ii", "e_err", "dist", "consensus_err", "tracking_err", "a1", "alpha", "settled"])

    def rows():
        for k in range(res.x.shape[0]):
            for i in range(n):
                yield ([k, int(res.ticks[k]), i, *res.x[k, i], *res.p[k, i], res.e_diag[k, i], res.e_err[k],
                        dist[k, i], cons[k], res.tracking_err[k], res.a1[k], res.alpha[k], bool(res.settled[k])])

    write_csv(out / "trace.csv", header, rows())
    from .analysis import theorem1_coefficient_trace
    theory = theorem1_coefficient_trace(res) if res.epochs >= 4 else None
    summary = {
        "u": u, "x_star": res.x_star, "final_x": res.final[:, 0] if dim == 1 else res.final,
        "final_error": dist[-1], "max_final_error": float(dist[-1].max()),
        "epochs_run": res.epochs, "ticks_run": (res.epochs + 1) * sched.half - 1,
        "half_period": sched.half, "unsettled_epochs": [int(k) for k in np.nonzero(~res.settled)[0]],
        "epochs_to_tolerance": _epochs_to_tolerance(dist, cfg.checks.get("optimum_tol", 1e-2)),
        "theory": None if theory is None else theory.to_dict(),
    }
    return summary, res.final, res.x_star


def _run_sync(cfg: ExperimentConfig, out: Path):
    g = cfg.build_graph()
    w = cfg.build_weights(g)
    objs = cfg.build_objectives()
    problem = GlobalProblem(objs)
    alpha = cfg.alpha
    if isinstance(alpha, dict):
        alpha = diminishing(float(alpha["diminishing"]))
    states = run_sync(cfg.algorithm, w, objs, _initial_rows(cfg.x0, problem.n_agents, problem.dim),
                      cfg.ticks, alpha)
    x_star = problem.optimum
    u = w.fle
    dim = problem.dim
    header = ["tick", "agent"] + [f"x{c}" for c in range(dim)] + ["dist", "consensus_err"]
    xs = np.array([s.x for s in states])
    dist = np.linalg.norm(xs - x_star, axis=2)

    def rows():
        for t in range(0, len(states), cfg.trace_every):
            ce = _consensus(xs[t], u)
            for i in range(problem.n_agents):
                yield [t, i, *xs[t, i], dist[t, i], ce]

    write_csv(out / "trace.csv", header, rows())
    summary = {
        "u": u, "x_star": x_star, "final_x": xs[-1][:, 0] if dim == 1 else xs[-1],
        "final_error": dist[-1], "max_final_error": float(dist[-1].max()), "ticks_run": cfg.ticks,
        "epochs_to_tolerance": _epochs_to_tolerance(dist, cfg.checks.get("optimum_tol", 1e-2)),
    }
    return summary, xs[-1], x_star


def run_naive_descent(cfg: ExperimentConfig, out: Path):
    """Epoch recursion driven by flooded raw gradients: each epoch lasts until
    every node holds every normalised gradient."""
    g = cfg.build_graph()
    w = cfg.build_weights(g)
    objs = cfg.build_objectives()
    problem = GlobalProblem(objs)
    delays = cfg.build_delays()
    n, dim = problem.n_agents, problem.dim
    u = w.fle
    policy = StepPolicy(cfg.alpha, problem.smoothness, u)
    x = _initial_rows(cfg.x0, n, dim)
    e = np.eye(n)
    tick = 0
    xs, ticks, alphas = [x.copy()], [0], [math.nan]
    for k in range(1, cfg.epochs + 1):
        flood = flood_completion(g, delays, start=tick)
        tick = flood.worst_case
        direction = u @ normalized_gradients(objs, x, e)
        alpha_k, _ = policy(k, np.diag(e))
        x = w.entries @ x - alpha_k * direction
        e = w.entries @ e
        xs.append(x.copy())
        ticks.append(tick)
        alphas.append(alpha_k)
    xs = np.array(xs)
    x_star = problem.optimum
    dist = np.linalg.norm(xs - x_star, axis=2)
    header = ["epoch", "tick", "agent"] + [f"x{c}" for c in range(dim)] + ["dist", "consensus_err", "alpha"]

    def rows():
        for k in range(len(xs)):
            ce = _consensus(xs[k], u)
            for i in range(n):
                yield [k, ticks[k], i, *xs[k, i], dist[k, i], ce, alphas[k]]

    write_csv(out / "trace.csv", header, rows())
    summary = {
        "u": u, "x_star": x_star, "final_x": xs[-1][:, 0] if dim == 1 else xs[-1],
        "final_error": dist[-1], "max_final_error": float(dist[-1].max()), "ticks_run": ticks[-1],
        "epochs_to_tolerance": _epochs_to_tolerance(dist, cfg.checks.get("optimum_tol", 1e-2)),
    }
    return summary, xs[-1], x_star


def run_tracker_vs_naive(cfg: ExperimentConfig, out: Path, backend=None):
    """Track the u-weighted average of the initial normalised gradients with the
    delayed r/s tracker and with the naive flood; record when each gets there."""
    g = cfg.build_graph()
    w = cfg.build_weights(g)
    objs = cfg.build_objectives()
    delays = cfg.build_delays()
    n = g.node_count
    x0 = _initial_rows(cfg.x0, n, objs[0].dim)
    b = local_gradients(objs, x0)            # e(0) = I so the normalisation is 1
    u = w.fle
    truth = u @ b
    rel_tol = float(cfg.checks.get("tracker_rel_tol", 0.05))

    engine = TrackerEngine(w, delays, b, cfg.kappa, backend=backend)
    est_rows, errs = [], []
    for t, r, s in engine.trace(cfg.ticks, every=1):
        est = r / s[:, None]
        err = float(np.max(np.linalg.norm(est - truth, axis=1)) / np.linalg.norm(truth))
        errs.append(err)
        if t % cfg.trace_every == 0:
            for i in range(n):
                est_rows.append([t, i, *r[i], s[i], *est[i], err])
    errs = np.array(errs)
    dim = b.shape[1]
    write_csv(out / "tracker.csv", ["tick", "agent"] + [f"r{c}" for c in range(dim)] + ["s"]
              + [f"est{c}" for c in range(dim)] + ["rel_err"], est_rows)
    within = np.nonzero(errs >= rel_tol)[0]
    t_track = 0 if len(within) == 0 else int(within[-1] + 1)
    if t_track > cfg.ticks:
        t_track = None

    flood = flood_completion(g, delays)
    ticks = np.arange(0, cfg.ticks + 1, cfg.trace_every)
    est, complete = naive_estimates(flood, b, u, ticks)
    write_csv(out / "naive.csv", ["tick", "agent"] + [f"est{c}" for c in range(dim)] + ["complete"],
              ([t, i, *est[k, i], bool(complete[k, i])] for k, t in enumerate(ticks) for i in range(n)))
    write_csv(out / "completion.csv", ["node", "completion"], enumerate(flood.completion))

    # adversarial instance: directed cycle, every hop at the delay bound
    cycle = build_graph(n, "cycle")
    adversarial = flood_completion(cycle, DelayModel.constant(delays.tau_max)).worst_case
    summary = {
        "u": u, "true_average": truth, "tracker_rel_tol": rel_tol, "tracker_ticks_to_tol": t_track,
        "tracker_final_rel_err": float(errs[-1]), "naive_sampled_worst": flood.worst_case,
        "naive_adversarial_worst": adversarial, "naive_bound": worst_case_bound(delays.tau_max, n),
        "ticks_run": cfg.ticks,
    }
    checks = []
    c = cfg.checks
    if "tracker_before" in c:
        m = math.inf if t_track is None else t_track
        checks.append(Check("tracker_within_tol_before", m < c["tracker_before"], m, c["tracker_before"]))
    if "naive_worst_case" in c:
        exp = int(c["naive_worst_case"])
        ok = adversarial == exp and summary["naive_bound"] == exp
        checks.append(Check("naive_worst_case", ok, adversarial, exp))
    return summary, checks


def run_scenario(cfg: ExperimentConfig, out_dir: str | Path | None = None, backend=None) -> RunOutput:
    """Validate, run and write outputs. Raises ``ConfigError`` on a bad config."""
    cfg.validate()
    resolved = cfg.resolved()
    out = Path(out_dir) if out_dir is not None else output_root() / (cfg.output or cfg.scenario)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "tracker_vs_naive":
        summary, checks = run_tracker_vs_naive(resolved, out, backend)
    else:
        if cfg.algorithm == "async_frost":
            summary, final, x_star = _run_async(resolved, out, backend)
        elif cfg.algorithm == "naive_averaging":
            summary, final, x_star = run_naive_descent(resolved, out)
        else:
            summary, final, x_star = _run_sync(resolved, out)
        checks = _final_checks(resolved, final, x_star)
        if cfg.checks.get("theory") and summary.get("theory") is not None:
            checks.append(Check("theory_report", summary["theory"]["passed"], 0.0, 0.0))
    doc = {"scenario": cfg.scenario, "experiment": cfg.experiment, "algorithm": cfg.algorithm,
           "config": resolved.to_dict(), "results": summary,
           "checks": [asdict(c) for c in checks], "passed": all(c.passed for c in checks)}
    (out / "summary.json").write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n")
    return RunOutput(out, _json_safe(doc), checks)


# ------------------------------------------------------------------- plots

def emit_plots(trace_dir: str | Path) -> list[Path]:
    """Write SVG line plots next to the traces; CSV stays the ground truth."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    d = Path(trace_dir)
    summary_path = d / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"no summary.json in {d}")
    doc = json.loads(summary_path.read_text())
    written = []
    plt.rcParams["svg.hashsalt"] = "delayfrost"
    if doc["experiment"] == "tracker_vs_naive":
        for name in ("tracker.csv", "naive.csv"):
            if not (d / name).exists():
                raise FileNotFoundError(f"missing trace {d / name}")
        th, tr = read_csv(d / "tracker.csv")
        nh, nv = read_csv(d / "naive.csv")
        if len(tr) == 0:
            raise ValueError("empty tracker trace")
        truth = np.atleast_1d(doc["results"]["true_average"])[0]
        sel = tr[:, 1] == 0
        nsel = nv[:, 1] == 0
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(tr[sel, 0], tr[sel, th.index("est0")], label="delay-robust tracker (agent 0)")
        ax.plot(nv[nsel, 0], nv[nsel, nh.index("est0")], label="naive flood (agent 0)")
        ax.axhline(truth, color="k", ls=":", lw=1, label="weighted average")
        ax.set_xlabel("tick")
        ax.set_ylabel("estimate")
        ax.legend()
        path = d / "tracker_vs_naive.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        return [path]

    if not (d / "trace.csv").exists():
        raise FileNotFoundError(f"missing trace {d / 'trace.csv'}")
    header, data = read_csv(d / "trace.csv")
    idx = header[0]
    if len(data) == 0 or data[:, 0].max() == 0:
        raise ValueError(f"trace in {d} has no {idx}s past the initial state")
    agents = np.unique(data[:, header.index("agent")]).astype(int)
    x_star = np.atleast_1d(doc["results"]["x_star"])[0]

    fig, ax = plt.subplots(figsize=(7, 4))
    for i in agents:
        sel = data[:, header.index("agent")] == i
        ax.plot(data[sel, 0], data[sel, header.index("x0")], lw=1.5 if i == 0 else 0.6,
                color="C0" if i == 0 else "0.7", zorder=3 if i == 0 else 1)
    ax.axhline(x_star, color="k", ls=":", lw=1)
    ax.set_xlabel(idx)
    ax.set_ylabel("estimate x_i")
    ax.set_title(f"{doc['scenario']}: agent estimates (agent 0 highlighted)")
    path = d / "estimates.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for i in agents:
        sel = data[:, header.index("agent")] == i
        ax.semilogy(data[sel, 0], np.maximum(data[sel, header.index("dist")], 1e-16), lw=0.8)
    ax.set_xlabel(idx)
    ax.set_ylabel("|x_i - x*|")
    path = d / "error.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    written.append(path)
    return written
