import numpy as np
import pytest

from stftvae import optim as O
from stftvae.errors import ConfigError, ShapeError


def test_lr_examples():
    sched = O.CyclicalSchedule(total_iters=60000)
    assert O.lr_at(0, sched) == 1e-4
    # ceiling 1e-3 - 9e-4 * 2000/60000, hand evaluated
    assert O.lr_at(2000, sched) == pytest.approx(9.7e-4, rel=1e-12)
    assert O.lr_at(4000, sched) == 1e-4


def test_lr_triangular_policy():
    sched = O.CyclicalSchedule(total_iters=60000, policy="triangular")
    assert O.lr_at(2000, sched) == pytest.approx(1e-3)
    assert O.lr_at(58000, sched) == pytest.approx(1e-3)
    assert O.lr_at(1000, sched) == pytest.approx(5.5e-4)


def test_lr_bounds_and_continuity():
    sched = O.CyclicalSchedule(step_size=50, total_iters=1000)
    lrs = np.array([O.lr_at(t, sched) for t in range(1000)])
    assert lrs.min() >= sched.min_lr and lrs.max() <= sched.max_lr
    slope = (sched.max_lr - sched.min_lr) / sched.step_size + (sched.max_lr - sched.min_lr) / sched.total_iters
    assert np.abs(np.diff(lrs)).max() <= slope + 1e-15


def test_lr_peaks_decay():
    sched = O.CyclicalSchedule(step_size=10, total_iters=200)
    peaks = [O.lr_at(t, sched) for t in range(10, 200, 20)]
    assert all(a > b for a, b in zip(peaks, peaks[1:]))


@pytest.mark.parametrize("t", [-1, 60000])
def test_lr_out_of_range(t):
    with pytest.raises(ConfigError):
        O.lr_at(t)


def test_schedule_validation():
    with pytest.raises(ConfigError):
        O.CyclicalSchedule(min_lr=1e-3, max_lr=1e-4)
    with pytest.raises(ConfigError):
        O.CyclicalSchedule(policy="cosine")


def test_adam_first_step():
    p = {"w": np.zeros((2, 3))}
    new, state = O.adam_step(p, {"w": np.ones((2, 3))}, O.AdamState(), 0.01)
    np.testing.assert_allclose(new["w"], -0.01 / (1 + 1e-8), rtol=1e-12)
    assert state.t == 1 and state.m["w"].shape == (2, 3)
    assert not p["w"].any()  # inputs untouched


def test_adam_zero_gradient():
    p = {"w": np.arange(3.0)}
    new, _ = O.adam_step(p, {"w": np.zeros(3)}, O.AdamState(), 0.1)
    np.testing.assert_array_equal(new["w"], p["w"])


def test_adam_converges_on_quadratic():
    p, state = {"x": np.array(1.0)}, O.AdamState()
    for _ in range(100):
        p, state = O.adam_step(p, {"x": 2 * p["x"]}, state, 0.1)
    assert abs(p["x"]) < 0.1
    assert state.t == 100


def test_adam_deterministic(rng):
    p = {"a": rng.standard_normal(4)}
    g = {"a": rng.standard_normal(4)}
    x1, s1 = O.adam_step(p, g, O.AdamState(), 0.01)
    x2, s2 = O.adam_step(p, g, O.AdamState(), 0.01)
    np.testing.assert_array_equal(x1["a"], x2["a"])
    np.testing.assert_array_equal(s1.v["a"], s2.v["a"])


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        O.adam_step({"a": np.zeros(3)}, {"a": np.zeros(4)}, O.AdamState(), 0.1)
    with pytest.raises(ShapeError):
        O.adam_step({"a": np.zeros(3)}, {"b": np.zeros(3)}, O.AdamState(), 0.1)
