import numpy as np
import pytest

from ganaug.core.optim import AdamState, adam_step
from ganaug.errors import DimensionError, NonFiniteError


def _scalar(value: float) -> dict[str, np.ndarray]:
    return {"w": np.array([value])}


class TestAdamStep:
    def test_zero_gradient_first_step(self):
        params = _scalar(1.5)
        new, state = adam_step(params, _scalar(0.0), AdamState.zeros_like(params))
        np.testing.assert_array_equal(new["w"], params["w"])
        assert state.t == 1

    @pytest.mark.parametrize("t", [0, 1, 37, 1000])
    def test_zero_gradient_with_zero_moments_is_noop(self, t):
        params = {"a": np.arange(6.0).reshape(2, 3), "b": np.ones(4)}
        state = AdamState.zeros_like(params)
        state.t = t
        new, new_state = adam_step(params, {k: np.zeros_like(v) for k, v in params.items()}, state)
        for name in params:
            np.testing.assert_array_equal(new[name], params[name])
        assert new_state.t == t + 1

    @pytest.mark.parametrize("g", [1e-3, 0.7, -2.5, 1e4])
    def test_first_step_moves_by_lr(self, g):
        params = _scalar(0.0)
        new, _ = adam_step(params, _scalar(g), AdamState.zeros_like(params), lr=2e-4)
        assert new["w"][0] == pytest.approx(-2e-4 * np.sign(g), abs=1e-6)

    def test_quadratic_descent(self):
        params = _scalar(1.0)
        state = AdamState.zeros_like(params)
        history = []
        for _ in range(100):
            params, state = adam_step(params, {"w": 2.0 * params["w"]}, state, lr=0.05)
            history.append(abs(params["w"][0]))
        assert all(b < a for a, b in zip(history[4:], history[5:]))
        assert history[-1] < 0.5

    def test_second_moment_non_negative(self, rng):
        params = {"w": rng.standard_normal(10)}
        state = AdamState.zeros_like(params)
        for _ in range(5):
            params, state = adam_step(params, {"w": rng.standard_normal(10)}, state)
        assert np.all(state.v["w"] >= 0.0)

    def test_inputs_untouched(self, rng):
        params = {"w": rng.standard_normal(3)}
        state = AdamState.zeros_like(params)
        before = params["w"].copy()
        adam_step(params, {"w": np.ones(3)}, state)
        np.testing.assert_array_equal(params["w"], before)
        assert state.t == 0
        assert not state.m["w"].any()

    def test_non_finite_gradient_names_parameter(self):
        params = {"block1.conv.weight": np.ones(2)}
        with pytest.raises(NonFiniteError, match="block1.conv.weight"):
            adam_step(params, {"block1.conv.weight": np.array([1.0, np.inf])},
                      AdamState.zeros_like(params))

    def test_name_mismatch(self):
        with pytest.raises(DimensionError):
            adam_step(_scalar(1.0), {"v": np.ones(1)}, AdamState())

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            adam_step({"w": np.ones(3)}, {"w": np.ones(2)}, AdamState())
