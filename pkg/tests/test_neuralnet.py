from pathlib import Path

import numpy as np
import pytest

from slotshare import neuralnet
from slotshare.exceptions import ShapeError
from slotshare.neuralnet import (
    AdamState,
    BranchingDuelingNet,
    LstmState,
    adam_update,
    dueling_combine,
    load_snapshot,
    save_snapshot,
)


def _random_case(rng, batch=3):
    n_rbs = int(rng.integers(1, 4))
    k_max = int(rng.integers(1, 4))
    input_size = int(rng.integers(2, 7))
    net = BranchingDuelingNet(input_size, n_rbs, k_max, lstm_hidden=4, value_hidden=3, seed=rng)
    x = rng.normal(size=(batch, input_size))
    state = LstmState(rng.normal(scale=0.5, size=(batch, 4)), rng.normal(scale=0.5, size=(batch, 4)))
    target = rng.normal(size=(batch, n_rbs + 1, k_max))
    mask = (rng.random(size=target.shape) < 0.5).astype(float)
    mask[:, 0, 0] = 1.0
    return net, x, state, target, mask


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    eps = 1e-6
    for _ in range(100):
        net, x, state, target, mask = _random_case(rng)
        _, grads = net.loss_and_gradients(x, state, target, mask)
        for name, param in net.parameters().items():
            numeric = np.zeros_like(param)
            for idx in np.ndindex(param.shape):
                saved = param[idx]
                param[idx] = saved + eps
                up, _ = net.loss_and_gradients(x, state, target, mask)
                param[idx] = saved - eps
                down, _ = net.loss_and_gradients(x, state, target, mask)
                param[idx] = saved
                numeric[idx] = (up - down) / (2 * eps)
            scale = np.linalg.norm(numeric) + np.linalg.norm(grads[name])
            assert np.linalg.norm(numeric - grads[name]) <= 1e-4 * scale + 1e-7, name


def test_advantages_are_centered_per_branch():
    rng = np.random.default_rng(1)
    for _ in range(50):
        adv = rng.normal(size=(4, 3))
        q = dueling_combine(2.5, adv)
        assert q.shape == (3, 4)
        assert np.abs((q - 2.5).sum(axis=0)).max() <= 1e-9
    batch_adv = rng.normal(size=(2, 4, 3))
    q = dueling_combine(np.array([1.0, -1.0]), batch_adv)
    assert q.shape == (2, 3, 4)
    assert np.abs((q - np.array([1.0, -1.0])[:, None, None]).sum(axis=1)).max() <= 1e-9


def test_network_output_is_centered_around_value():
    net = BranchingDuelingNet(6, 2, 3, lstm_hidden=5, value_hidden=4, seed=2)
    q, _, (_, head_cache) = net.forward_batch(np.ones((1, 6)), net.initial_state(1))
    h = head_cache[0]
    z1 = np.maximum(h @ net.head.value_hidden.params["W"].T + net.head.value_hidden.params["b"], 0.0)
    value = z1 @ net.head.value_out.params["W"].T + net.head.value_out.params["b"]
    assert np.abs(q[0].mean(axis=0) - value[0, 0]).max() <= 1e-9


def test_adam_first_step_closed_form():
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.3, -0.1, 2.0])}
    state = AdamState()
    adam_update(params, grads, state, lr=0.01)
    expected = np.array([1.0, -2.0, 0.5]) - 0.01 * grads["w"] / (np.abs(grads["w"]) + 1e-8)
    assert np.abs(params["w"] - expected).max() <= 1e-9
    assert state.step == 1


def test_adam_rejects_mismatched_gradient():
    with pytest.raises(ShapeError):
        adam_update({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState(), lr=0.1)


def test_forward_advances_carried_state():
    net = BranchingDuelingNet(5, 2, 3, lstm_hidden=6, value_hidden=4, seed=3)
    state = net.initial_state()
    q, new_state = neuralnet.forward(net, np.ones(5), state)
    assert q.shape == net.q_shape == (3, 3)
    assert np.all(np.isfinite(q))
    assert not np.allclose(new_state.h, state.h)
    with pytest.raises(ShapeError):
        neuralnet.forward(net, np.ones(4), state)


def test_backward_single_sample_matches_batch():
    rng = np.random.default_rng(4)
    net, x, state, target, mask = _random_case(rng, batch=1)
    loss_batch, grads_batch = net.loss_and_gradients(x, state, target, mask)
    single = LstmState(state.h[0], state.c[0])
    loss, grads = neuralnet.backward(net, x[0], single, target[0], mask[0])
    assert loss == pytest.approx(loss_batch)
    for name, grad in grads.items():
        assert np.allclose(grad, grads_batch[name])


def test_loss_is_zero_on_own_predictions():
    net = BranchingDuelingNet(4, 2, 2, lstm_hidden=3, value_hidden=2, seed=5)
    x = np.ones((2, 4))
    state = net.initial_state(2)
    q, _, _ = net.forward_batch(x, state)
    loss, grads = net.loss_and_gradients(x, state, q.copy(), np.ones_like(q))
    assert loss == 0.0
    assert all(np.abs(g).max() == 0.0 for g in grads.values())


def test_snapshot_round_trip(tmp_path: Path):
    net = BranchingDuelingNet(5, 2, 3, lstm_hidden=4, value_hidden=3, seed=6)
    path = tmp_path / "net.npz"
    save_snapshot(net, path)
    restored = load_snapshot(path)
    state = net.initial_state()
    q1, _ = neuralnet.forward(net, np.arange(5.0), state)
    q2, _ = neuralnet.forward(restored, np.arange(5.0), state)
    assert np.array_equal(q1, q2)


def test_copy_from_rejects_other_architecture():
    a = BranchingDuelingNet(5, 2, 3, lstm_hidden=4, value_hidden=3, seed=0)
    b = BranchingDuelingNet(5, 2, 3, lstm_hidden=5, value_hidden=3, seed=0)
    with pytest.raises(ShapeError):
        a.copy_from(b)


def test_lstm_step_returns_hidden_output():
    net = BranchingDuelingNet(3, 1, 1, lstm_hidden=4, value_hidden=2, seed=7)
    h, state = neuralnet.lstm_step(net.lstm, np.array([1.0, -1.0, 0.5]), net.initial_state())
    assert h.shape == (4,)
    assert np.array_equal(h, state.h)
    assert np.all(np.abs(h) < 1.0)


def test_lstm_step_with_zero_weights_gives_zero_output():
    net = BranchingDuelingNet(3, 1, 1, lstm_hidden=4, value_hidden=2, seed=8)
    for param in net.lstm.params.values():
        param[...] = 0.0
    h, state = neuralnet.lstm_step(net.lstm, np.array([2.0, -3.0, 0.7]), net.initial_state())
    assert np.array_equal(h, np.zeros(4))
    assert np.array_equal(state.c, np.zeros(4))


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.array([1.0, -2.0]), "b": np.array([0.5])}
    before = {k: v.copy() for k, v in params.items()}
    state = AdamState()
    for _ in range(3):
        adam_update(params, {k: np.zeros_like(v) for k, v in params.items()}, state, lr=0.1)
    assert state.step == 3
    for name, value in params.items():
        assert np.array_equal(value, before[name])


def test_adam_descends_quadratic_bowl():
    optimum = np.array([3.0, -3.0, 3.0])
    params = {"w": np.zeros(3)}
    state = AdamState()
    losses = []
    for _ in range(100):
        diff = params["w"] - optimum
        losses.append(float(diff @ diff))
        adam_update(params, {"w": 2.0 * diff}, state, lr=0.02)
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < 0.5 * losses[0]
