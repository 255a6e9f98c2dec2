import numpy as np
import pytest

from splicegan.errors import OptimizerError
from splicegan.optim import OptimizerState, rmsprop_step


def test_zero_gradient_is_identity_on_parameters():
    p = {"w": np.array([1.5, -2.25], dtype=np.float32)}
    before = p["w"].copy()
    st = OptimizerState()
    rmsprop_step(p, {"w": np.zeros(2, dtype=np.float32)}, st)
    assert np.array_equal(p["w"], before)


def test_first_step_hand_value():
    # acc = 0.1; delta = -0.1 * 1 / sqrt(0.1)
    p = {"w": np.array([0.0])}
    st = OptimizerState(learning_rate=0.1, decay=0.9, epsilon=0.0)
    rmsprop_step(p, {"w": np.array([1.0])}, st)
    assert abs(p["w"][0] - (-0.1 / np.sqrt(0.1))) < 1e-12


def test_default_learning_rate():
    assert OptimizerState().learning_rate == 5e-5


def test_missing_gradient_leaves_parameter_and_decays_accumulator():
    p = {"w": np.array([1.0], dtype=np.float32)}
    st = OptimizerState()
    rmsprop_step(p, {"w": np.array([1.0], dtype=np.float32)}, st)
    acc_after_first = st.acc["w"].copy()
    before = p["w"].copy()
    rmsprop_step(p, {}, st)
    assert np.array_equal(p["w"], before)
    assert st.acc["w"][0] == pytest.approx(0.9 * acc_after_first[0], rel=1e-6)


def test_non_finite_gradient_names_parameter():
    p = {"enc.w0": np.zeros(2, dtype=np.float32)}
    with pytest.raises(OptimizerError, match="enc.w0"):
        rmsprop_step(p, {"enc.w0": np.array([np.nan, 0.0], dtype=np.float32)},
                     OptimizerState())


def test_accumulators_stay_non_negative(rng):
    p = {"w": rng.normal(size=50).astype(np.float32)}
    st = OptimizerState(learning_rate=1e-3)
    for _ in range(25):
        g = rng.normal(size=50).astype(np.float32)
        rmsprop_step(p, {"w": g}, st)
        assert (st.acc["w"] >= 0).all()


def test_shape_mismatch_rejected():
    p = {"w": np.zeros(3, dtype=np.float32)}
    with pytest.raises(OptimizerError, match="w"):
        rmsprop_step(p, {"w": np.zeros(2, dtype=np.float32)}, OptimizerState())
