import numpy as np
import pytest

from pim import AdamState, NumericalError, PartitionModel, adam_step, fit
from pim.objective import AblationFlags


def test_zero_grad_no_decay_is_fixed_point():
    w = np.array([[1.0, -2.0], [0.5, 3.0]])
    state = AdamState.for_shape(w.shape, weight_decay=0.0)
    model, state = adam_step(state, PartitionModel(w), np.zeros_like(w))
    assert model.prototypes.tobytes() == w.tobytes()
    assert state.step_count == 1


def test_first_step_closed_form():
    # bias correction makes the first update -lr * g / (|g| + eps)
    w = np.zeros((2, 2))
    g = np.ones((2, 2))
    state = AdamState.for_shape(w.shape, lr=1e-3, weight_decay=0.0)
    model, _ = adam_step(state, PartitionModel(w), g)
    np.testing.assert_allclose(model.prototypes, -1e-3, atol=1e-6)


def test_weight_decay_acts_through_gradient():
    w = np.ones((2, 2))
    state = AdamState.for_shape(w.shape, lr=1e-3, weight_decay=0.01)
    model, _ = adam_step(state, PartitionModel(w), np.zeros_like(w))
    # effective gradient is wd * w = 0.01, so the first step is about -lr
    assert np.all(model.prototypes < 1.0)
    np.testing.assert_allclose(model.prototypes, 1.0 - 1e-3, atol=1e-6)


def test_decoupled_decay_variant():
    w = np.ones((2, 2))
    state = AdamState.for_shape(w.shape, lr=1e-3, weight_decay=0.01, decoupled_wd=True)
    model, _ = adam_step(state, PartitionModel(w), np.zeros_like(w))
    np.testing.assert_allclose(model.prototypes, 1.0 - 1e-3 * 0.01, atol=1e-12)


def test_non_finite_gradient_aborts():
    w = np.zeros((2, 2))
    state = AdamState.for_shape(w.shape)
    bad = np.array([[np.nan, 0.0], [0.0, 0.0]])
    with pytest.raises(NumericalError, match="non-finite"):
        adam_step(state, PartitionModel(w), bad)


def test_step_count_increments(tiny_fs):
    w = np.zeros((3, 3))
    state = AdamState.for_shape(w.shape)
    model = PartitionModel(w)
    for expected in (1, 2, 3):
        model, state = adam_step(state, model, np.full(w.shape, 0.1))
        assert state.step_count == expected


class TestFit:
    def test_epoch_validation(self, tiny_fs):
        with pytest.raises(ValueError, match="epochs"):
            fit(tiny_fs, np.zeros((3, 4)), 1.0, epochs=0)

    def test_objective_validation(self, tiny_fs):
        with pytest.raises(ValueError, match="objective"):
            fit(tiny_fs, np.zeros((3, 4)), 1.0, epochs=1, objective="H")

    def test_trace_shape_and_finiteness(self, tiny_fs):
        _, trace = fit(tiny_fs, np.zeros((3, 4)), 0.5, epochs=20)
        assert trace.shape == (21,)
        assert np.all(np.isfinite(trace))

    def test_bit_identical_reruns(self, blob_fs):
        fs, _ = blob_fs
        rng = np.random.default_rng(0)
        init = rng.standard_normal((4, fs.dim))
        a, ta = fit(fs, init, 0.7, epochs=50)
        b, tb = fit(fs, init, 0.7, epochs=50)
        assert a.prototypes.tobytes() == b.prototypes.tobytes()
        assert ta.tobytes() == tb.tobytes()

    def test_endpoint_descent_on_separable_instance(self, blob_fs):
        fs, _ = blob_fs
        rng = np.random.default_rng(1)
        init = 0.1 * rng.standard_normal((4, fs.dim))
        for objective in ("F", "G"):
            _, trace = fit(fs, init, 1.0, epochs=300, objective=objective)
            assert trace[-1] <= trace[0]

    def test_flags_change_the_objective(self, blob_fs):
        fs, _ = blob_fs
        init = np.random.default_rng(2).standard_normal((4, fs.dim))
        _, full = fit(fs, init, 1.0, epochs=5)
        _, ablated = fit(fs, init, 1.0, flags=AblationFlags("off", "off"), epochs=5)
        assert full[0] != pytest.approx(ablated[0], abs=1e-9)
