"""Bounded, time-varying communication delays with sampled-state reads.

A receiver ``i`` reading sender ``j`` at tick ``t`` sees the value ``j``
published at tick ``t - tau``. Delays are pure functions of
``(seed, edge, tick)``, so replays are bit-identical and any delay can be
recomputed on demand.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels

DISTRIBUTIONS = ("constant", "uniform", "schedule")
COUPLINGS = ("per_edge", "shared")


class DelayContractError(ValueError):
    """A read asked for a delay the channel cannot serve."""


def edge_key(j: int, i: int) -> int:
    return (int(j) << 32) | int(i)


@dataclass(frozen=True)
class DelayModel:
    """Integer delays in ``[0, tau_max]``.

    distribution:
        ``constant``: every delay equals ``value``.
        ``uniform``: i.i.d. uniform integers on ``[lo, hi]`` per tick (and per
        edge unless ``coupling='shared'``).
        ``schedule``: table lookup ``schedule[tick % T, column(edge)]``; a
        one-column table is shared by every edge.
    """

    distribution: str = "constant"
    value: int = 0
    lo: int = 0
    hi: int = 0
    seed: int = 0
    coupling: str = "per_edge"
    schedule: np.ndarray | None = field(default=None, repr=False)
    schedule_edges: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown delay distribution {self.distribution!r}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"unknown delay coupling {self.coupling!r}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.distribution == "constant" and self.value < 0:
            raise ValueError("constant delay must be nonnegative")
        if self.distribution == "uniform" and not 0 <= self.lo <= self.hi:
            raise ValueError(f"uniform delay needs 0 <= lo <= hi, got [{self.lo}, {self.hi}]")
        if self.distribution == "schedule":
            if self.schedule is None:
                raise ValueError("schedule distribution requires a schedule table")
            table = np.array(self.schedule, dtype=np.int64)
            if table.ndim == 1:
                table = table[:, None]
            if table.size == 0 or np.any(table < 0):
                raise ValueError("schedule must be a nonempty table of nonnegative delays")
            if self.schedule_edges is not None and len(self.schedule_edges) != table.shape[1]:
                raise ValueError("schedule_edges must name one edge per schedule column")
            if self.schedule_edges is None and table.shape[1] != 1:
                raise ValueError("a multi-column schedule needs schedule_edges")
            table.setflags(write=False)
            object.__setattr__(self, "schedule", table)

    # convenience constructors
    @classmethod
    def constant(cls, value: int = 0) -> "DelayModel":
        return cls("constant", value=int(value))

    @classmethod
    def uniform(cls, lo: int, hi: int, seed: int = 0, coupling: str = "per_edge") -> "DelayModel":
        return cls("uniform", lo=int(lo), hi=int(hi), seed=int(seed), coupling=coupling)

    @classmethod
    def from_sequence(cls, taus: Sequence[int]) -> "DelayModel":
        """Shared cyclic schedule ``tau(t) = taus[t % len(taus)]``."""
        return cls("schedule", schedule=np.asarray(taus, dtype=np.int64)[:, None], coupling="shared")

    @property
    def tau_max(self) -> int:
        if self.distribution == "constant":
            return self.value
        if self.distribution == "uniform":
            return self.hi
        return int(self.schedule.max())

    @property
    def mean_tau(self) -> float:
        if self.distribution == "constant":
            return float(self.value)
        if self.distribution == "uniform":
            return 0.5 * (self.lo + self.hi)
        return float(self.schedule.mean())

    def _column(self, j: int, i: int) -> int:
        if self.schedule_edges is None:
            return 0
        try:
            return self.schedule_edges.index((int(j), int(i)))
        except ValueError:
            raise DelayContractError(f"schedule has no entry for edge ({j}, {i})") from None

    def kernel_args(self, src: np.ndarray, dst: np.ndarray):
        """Arguments for ``kernels.run_tracker_ticks`` on the given edge arrays."""
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if self.coupling == "shared":
            keys = np.zeros(len(src), dtype=np.uint64)
        else:
            keys = np.array([edge_key(j, i) for j, i in zip(src, dst)], dtype=np.uint64)
        if self.distribution == "schedule":
            cols = np.array([self._column(j, i) for j, i in zip(src, dst)], dtype=np.int64)
            sched = np.ascontiguousarray(self.schedule, dtype=np.int64)
            return kernels.SCHEDULE, keys, cols, 0, 0, self.seed, sched
        cols = np.zeros(len(src), dtype=np.int64)
        sched = np.zeros((1, 1), dtype=np.int64)
        if self.distribution == "constant":
            return kernels.CONSTANT, keys, cols, self.value, self.value, self.seed, sched
        return kernels.UNIFORM, keys, cols, self.lo, self.hi, self.seed, sched

    def to_dict(self) -> dict:
        out = {"distribution": self.distribution, "coupling": self.coupling, "seed": self.seed}
        if self.distribution == "constant":
            out["value"] = self.value
        elif self.distribution == "uniform":
            out.update(lo=self.lo, hi=self.hi)
        else:
            out["schedule"] = self.schedule.tolist()
            if self.schedule_edges is not None:
                out["schedule_edges"] = [list(e) for e in self.schedule_edges]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DelayModel":
        data = dict(data)
        dist = data.get("distribution", "constant")
        edges = data.pop("schedule_edges", None)
        if edges is not None:
            data["schedule_edges"] = tuple((int(j), int(i)) for j, i in edges)
        if dist == "schedule":
            data["schedule"] = np.asarray(data["schedule"], dtype=np.int64)
        allowed = {"distribution", "value", "lo", "hi", "seed", "coupling", "schedule", "schedule_edges"}
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown delay fields: {sorted(unknown)}")
        return cls(**data)


def sample_delay(m: DelayModel, edge: tuple[int, int], tick: int) -> int:
    """Delay on edge ``(j, i)`` at ``tick``; deterministic in (seed, edge, tick)."""
    j, i = edge
    if m.distribution == "constant":
        return m.value
    if m.distribution == "uniform":
        key = 0 if m.coupling == "shared" else edge_key(j, i)
        return int(kernels.hash_delay_np(m.seed, [key], [tick], m.lo, m.hi)[0])
    col = m._column(j, i)
    return int(m.schedule[int(tick) % m.schedule.shape[0], col])


class HistoryBuffer:
    """Ring buffer of the last ``tau_max + 1`` published states per node.

    Ticks before zero read ``prehistory``. Publishing must proceed one tick at
    a time; republishing the current tick overwrites it.
    """

    def __init__(self, tau_max: int, prehistory: np.ndarray):
        if tau_max < 0:
            raise ValueError("tau_max must be nonnegative")
        self.tau_max = int(tau_max)
        self.prehistory = np.array(prehistory, dtype=float)
        self._ring = np.zeros((self.tau_max + 1,) + self.prehistory.shape)
        self.latest = -1

    def publish(self, tick: int, values: np.ndarray) -> None:
        if tick not in (self.latest, self.latest + 1):
            raise DelayContractError(f"publish out of order: tick {tick} after {self.latest}")
        self._ring[tick % (self.tau_max + 1)] = values
        self.latest = tick

    def read(self, tick: int) -> np.ndarray:
        """All-node state as published at ``tick``."""
        if tick < 0:
            return self.prehistory.copy()
        if tick > self.latest or tick < self.latest - self.tau_max:
            raise DelayContractError(
                f"tick {tick} outside retained window [{self.latest - self.tau_max}, {self.latest}]"
            )
        return self._ring[tick % (self.tau_max + 1)].copy()

    def copy(self) -> "HistoryBuffer":
        other = HistoryBuffer(self.tau_max, self.prehistory)
        other._ring = self._ring.copy()
        other.latest = self.latest
        return other


def stale_read(buf: HistoryBuffer, tick: int, delay: int, node: int | None = None) -> np.ndarray:
    """Value published at ``tick - delay`` (pre-history before tick 0)."""
    if delay < 0 or delay > buf.tau_max:
        raise DelayContractError(f"delay {delay} outside [0, {buf.tau_max}]")
    values = buf.read(tick - delay)
    return values if node is None else values[node]


# ----------------------------------------------------------- schedule CSV

def dump_schedule(m: DelayModel, edges: Iterable[tuple[int, int]], ticks: int | range,
                  path: str | Path) -> None:
    """Write realised delays as ``tick,from,to,tau`` rows."""
    ticks = range(ticks) if isinstance(ticks, int) else ticks
    edges = sorted((int(j), int(i)) for j, i in edges)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tick", "from", "to", "tau"])
        for t in ticks:
            for j, i in edges:
                writer.writerow([t, j, i, sample_delay(m, (j, i), t)])


def load_schedule(path: str | Path) -> DelayModel:
    """Rebuild a per-edge schedule model from ``dump_schedule`` output.

    Ticks must start at 0 and be contiguous; the table then repeats cyclically.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"tick", "from", "to", "tau"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"schedule CSV lacks columns {sorted(missing)}")
        for row in reader:
            rows.append((int(row["tick"]), int(row["from"]), int(row["to"]), int(row["tau"])))
    if not rows:
        raise ValueError("empty schedule")
    edges = tuple(sorted({(j, i) for _, j, i, _ in rows}))
    ticks = sorted({t for t, _, _, _ in rows})
    if ticks != list(range(len(ticks))):
        raise ValueError("schedule ticks must be contiguous from 0")
    col = {e: c for c, e in enumerate(edges)}
    table = np.full((len(ticks), len(edges)), -1, dtype=np.int64)
    for t, j, i, tau in rows:
        table[t, col[(j, i)]] = tau
    if np.any(table < 0):
        raise ValueError("schedule is missing some (tick, edge) entries")
    return DelayModel("schedule", schedule=table, schedule_edges=edges)
