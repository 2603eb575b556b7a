import numpy as np
import pytest

from delayfrost import DelayModel, build_graph, build_weights
from delayfrost._accel import HAVE_NUMBA, resolve_backend
from delayfrost.delay import sample_delay
from delayfrost.kernels import clock_delta_np, delay_block, kernel_edges
from delayfrost.tracker import SquareWaveClock, TrackerEngine, init_tracker, tracker_step

MODELS = [
    DelayModel.constant(4),
    DelayModel.uniform(0, 9, seed=3),
    DelayModel.uniform(0, 9, seed=3, coupling="shared"),
    DelayModel.from_sequence([0, 3, 1, 7, 2]),
]


@pytest.mark.parametrize("model", MODELS, ids=["constant", "per_edge", "shared", "schedule"])
def test_delay_block_matches_sample_delay(model):
    w = build_weights(build_graph(5, "random_strongly_connected", seed=1))
    src, dst, _, _ = kernel_edges(w.entries)
    args = model.kernel_args(src, dst)
    block = delay_block(args[0], 10, 30, *args[1:])
    for t in range(10, 30):
        for e, (j, i) in enumerate(zip(src, dst)):
            assert block[t - 10, e] == sample_delay(model, (int(j), int(i)), t)


def test_clock_delta_matches_square_wave():
    clock = SquareWaveClock(8)
    ticks = np.arange(0, 40)
    np.testing.assert_array_equal(clock_delta_np(ticks, 4), [clock.delta(t) for t in ticks])
    assert [clock.value(t) for t in range(9)] == [1, 1, 1, 1, 0, 0, 0, 0, 1]


@pytest.mark.parametrize("model", MODELS, ids=["constant", "per_edge", "shared", "schedule"])
def test_engine_matches_reference_step(model, backend):
    """Kernel tracker against the direct stale-read reference, including
    input injections and square-wave edges."""
    w = build_weights(build_graph(4, "random_strongly_connected", seed=5))
    rng = np.random.default_rng(0)
    b0 = rng.normal(size=(4, 2))
    clock = SquareWaveClock(12)
    kappa = 0.2
    ref = init_tracker(b0, kappa, model.tau_max)
    eng = TrackerEngine(w, model, b0, kappa, clock=clock, backend=backend)
    for chunk in range(6):
        db = rng.normal(size=(4, 2))
        eng.advance(7, db=db)
        for k in range(7):
            ref = tracker_step(ref, w, model, clock, db=db if k == 0 else None)
        np.testing.assert_allclose(eng.r, ref.r, atol=1e-12)
        np.testing.assert_allclose(eng.s, ref.s, atol=1e-12)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_numba_and_numpy_agree_long_run():
    w = build_weights(build_graph(10, "random_strongly_connected", seed=2))
    d = DelayModel.uniform(0, 40, seed=9)
    b0 = np.arange(10.0)
    out = {}
    for be in ("numpy", "numba"):
        eng = TrackerEngine(w, d, b0, 0.02, clock=SquareWaveClock(200), backend=be)
        dr = eng.advance(3000)
        out[be] = (eng.r.copy(), eng.s.copy(), dr)
    np.testing.assert_allclose(out["numpy"][0], out["numba"][0], atol=1e-12)
    np.testing.assert_allclose(out["numpy"][1], out["numba"][1], atol=1e-12)


def test_resolve_backend():
    assert resolve_backend("numpy") == "numpy"
    with pytest.raises(ValueError):
        resolve_backend("cuda")
