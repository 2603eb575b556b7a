"""Hot loops: counter-based delay sampling and the delayed r/s tracker.

Each kernel exists twice: a scalar loop compiled with numba and a vectorised
numpy version. ``DELAYFROST_BACKEND`` picks the default (see ``_accel``).
Both produce the same delays bit-for-bit; tracker states agree to rounding.
"""
from __future__ import annotations

import numpy as np

from ._accel import njit, resolve_backend

# delay distribution codes understood by the kernels
CONSTANT, UNIFORM, SCHEDULE = 0, 1, 2

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K1 = np.uint64(0xD1B54A32D192ED03)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)


# ------------------------------------------------------------------ hashing

@njit
def _fmix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def hash_delay(seed, key, tick, lo, hi):
    """Uniform integer in [lo, hi], a pure function of (seed, key, tick)."""
    z = _fmix(np.uint64(seed) * _GOLDEN + _GOLDEN)
    z = _fmix(z ^ (np.uint64(key) * _K1))
    z = _fmix(z ^ (np.uint64(tick) + _GOLDEN))
    span = np.uint64(hi - lo + 1)
    return lo + np.int64(z % span)


def _fmix_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash_delay_np(seed, keys, ticks, lo, hi):
    """Vectorised ``hash_delay``; ``keys`` and ``ticks`` broadcast."""
    with np.errstate(over="ignore"):
        seed_a = np.asarray([seed], dtype=np.uint64)
        k = np.asarray(keys, dtype=np.uint64)
        t = np.asarray(ticks, dtype=np.int64).astype(np.uint64)
        z = _fmix_np(seed_a * _GOLDEN + _GOLDEN)
        z = _fmix_np(z ^ (k * _K1))
        z = _fmix_np(z ^ (t + _GOLDEN))
        span = np.uint64(hi - lo + 1)
        return lo + (z % span).astype(np.int64)


@njit
def _delay_at(kind, e, t, keys, cols, lo, hi, seed, sched):
    if kind == 0:
        return lo
    if kind == 1:
        return hash_delay(seed, keys[e], t, lo, hi)
    return sched[t % sched.shape[0], cols[e]]


def delay_block(kind, t0, t1, keys, cols, lo, hi, seed, sched):
    """Delays for ticks [t0, t1) on every kernel edge, shape (t1 - t0, E)."""
    ticks = np.arange(t0, t1, dtype=np.int64)
    n_e = len(keys)
    if kind == CONSTANT:
        return np.full((len(ticks), n_e), lo, dtype=np.int64)
    if kind == UNIFORM:
        return hash_delay_np(seed, np.asarray(keys)[None, :], ticks[:, None], lo, hi)
    return np.asarray(sched)[ticks[:, None] % sched.shape[0], np.asarray(cols)[None, :]]


@njit
def _clock_delta(t, half):
    """g(t+1) - g(t) for the square wave high on [2mH, (2m+1)H)."""
    if half <= 0:
        return 0.0
    nxt = t + 1
    if nxt % half != 0:
        return 0.0
    if (nxt // half) % 2 == 1:
        return -1.0
    return 1.0


def clock_delta_np(ticks, half):
    ticks = np.asarray(ticks, dtype=np.int64)
    if half <= 0:
        return np.zeros(ticks.shape)
    nxt = ticks + 1
    edge = (nxt % half) == 0
    sign = np.where((nxt // half) % 2 == 1, -1.0, 1.0)
    return np.where(edge, sign, 0.0)


# ------------------------------------------------------------------ tracker

@njit
def _tracker_loop(r, s, rbuf, sbuf, pre_r, pre_s, t0, t1, inc_r, inc_s, kappa,
                  src, dst, w, rowsum, keys, cols, kind, lo, hi, seed, sched,
                  half, window):
    n_nodes, dim = r.shape
    depth = rbuf.shape[0]
    n_e = src.shape[0]
    acc_r = np.zeros((n_nodes, dim))
    acc_s = np.zeros(n_nodes)
    snap_r = r.copy()
    snap_s = s.copy()
    for t in range(t0, t1):
        if t == t1 - window:
            snap_r[:, :] = r
            snap_s[:] = s
        slot = t % depth
        rbuf[slot] = r
        sbuf[slot] = s
        acc_r[:, :] = 0.0
        acc_s[:] = 0.0
        for e in range(n_e):
            j = src[e]
            i = dst[e]
            tau = _delay_at(kind, e, t, keys, cols, lo, hi, seed, sched)
            back = t - tau
            if back < 0:
                for c in range(dim):
                    acc_r[i, c] += w[e] * pre_r[j, c]
                acc_s[i] += w[e] * pre_s[j]
            else:
                b = back % depth
                for c in range(dim):
                    acc_r[i, c] += w[e] * rbuf[b, j, c]
                acc_s[i] += w[e] * sbuf[b, j]
        dg = _clock_delta(t, half)
        # kappa' sum_j a_ij (r_i - r_j) with kappa' = kappa / d_ii
        for i in range(n_nodes):
            for c in range(dim):
                step = r[i, c] - acc_r[i, c] / rowsum[i]
                if t == t0:
                    r[i, c] = r[i, c] + inc_r[i, c] - kappa * step
                else:
                    r[i, c] = r[i, c] - kappa * step
            ds = dg
            if t == t0:
                ds += inc_s[i]
            s[i] = s[i] + ds - kappa * (s[i] - acc_s[i] / rowsum[i])
    dr = 0.0
    dsmax = 0.0
    if t1 - t0 >= window:
        dr = np.max(np.abs(r - snap_r))
        dsmax = np.max(np.abs(s - snap_s))
    return dr, dsmax


def _tracker_numpy(r, s, rbuf, sbuf, pre_r, pre_s, t0, t1, inc_r, inc_s, kappa,
                   src, dst, w, rowsum, keys, cols, kind, lo, hi, seed, sched,
                   half, window, chunk=2048):
    n_nodes, dim = r.shape
    depth = rbuf.shape[0]
    snap_r, snap_s = r.copy(), s.copy()
    wcol = w[:, None]
    for c0 in range(t0, t1, chunk):
        c1 = min(t1, c0 + chunk)
        taus = delay_block(kind, c0, c1, keys, cols, lo, hi, seed, sched)
        dgs = clock_delta_np(np.arange(c0, c1), half)
        for t in range(c0, c1):
            if t == t1 - window:
                snap_r, snap_s = r.copy(), s.copy()
            slot = t % depth
            rbuf[slot] = r
            sbuf[slot] = s
            back = t - taus[t - c0]
            past = back >= 0
            bslot = np.where(past, back, 0) % depth
            vr = np.where(past[:, None], rbuf[bslot, src], pre_r[src])
            vs = np.where(past, sbuf[bslot, src], pre_s[src])
            acc_r = np.zeros((n_nodes, dim))
            acc_s = np.zeros(n_nodes)
            np.add.at(acc_r, dst, wcol * vr)
            np.add.at(acc_s, dst, w * vs)
            ds = dgs[t - c0]
            if t == t0:
                r[:] = r + inc_r - kappa * (r - acc_r / rowsum[:, None])
                s[:] = s + (ds + inc_s) - kappa * (s - acc_s / rowsum)
            else:
                r[:] = r - kappa * (r - acc_r / rowsum[:, None])
                s[:] = s + ds - kappa * (s - acc_s / rowsum)
    if t1 - t0 >= window:
        return float(np.max(np.abs(r - snap_r))), float(np.max(np.abs(s - snap_s)))
    return 0.0, 0.0


def run_tracker_ticks(r, s, rbuf, sbuf, pre_r, pre_s, t0, t1, inc_r, inc_s, kappa,
                      edges, delays, half=0, window=10, backend=None):
    """Advance the r/s tracker in place over ticks [t0, t1).

    ``edges`` is ``(src, dst, w, rowsum)`` from ``kernel_edges``; ``delays`` is
    ``(kind, keys, cols, lo, hi, seed, sched)`` from ``DelayModel.kernel_args``.
    ``inc_r``/``inc_s`` are input increments applied at tick ``t0`` only; the
    square wave (half period ``half``) adds its own increments. Returns the
    max-norm change of r and s over the last ``window`` ticks.
    """
    src, dst, w, rowsum = edges
    kind, keys, cols, lo, hi, seed, sched = delays
    args = (r, s, rbuf, sbuf, pre_r, pre_s, int(t0), int(t1), inc_r, inc_s, float(kappa),
            src, dst, w, rowsum, keys, cols, int(kind), int(lo), int(hi), int(seed), sched,
            int(half), int(window))
    if resolve_backend(backend) == "numba":
        dr, ds = _tracker_loop(*args)
        return float(dr), float(ds)
    return _tracker_numpy(*args)


def kernel_edges(a: np.ndarray):
    """Edge arrays (self-loops included) sorted by receiver then sender."""
    a = np.asarray(a, dtype=float)
    dst, src = np.nonzero(a > 0)
    order = np.lexsort((src, dst))
    src, dst = src[order].astype(np.int64), dst[order].astype(np.int64)
    w = a[dst, src].astype(float)
    rowsum = a.sum(axis=1)
    return src, dst, w, rowsum
