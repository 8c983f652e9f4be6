"""Recurrent classifier: forward math, loss, training, gradient checks, and
the checkpoint format."""

import math

import numpy as np
import pytest

from newssignal import rnn
from newssignal.baselines import nbc_score, nbc_train
from newssignal.errors import (
    BadMagic,
    ConfigError,
    DegenerateTraining,
    ShapeError,
)
from newssignal.rnn import RnnConfig, RnnModel, gradient_check, init_model, load_model, save_model


def tiny_config(cell="lstm", **overrides):
    defaults = dict(
        cell_kind=cell,
        layer_widths=(6, 4),
        dropout=0.0,
        seed=1,
        learning_rate=0.1,
        batch_size=4,
        max_epochs=5,
    )
    defaults.update(overrides)
    return RnnConfig(**defaults)


def random_batch(rng, n=4, steps=3, dim=5):
    return [(rng.normal(size=(steps, dim)), int(rng.integers(0, 2))) for _ in range(n)]


def zero_model(config, input_dim):
    model = init_model(config, input_dim)
    for layer in model.layers:
        for name in layer:
            layer[name][...] = 0.0
    for name in model.head:
        model.head[name][...] = 0.0
    return model


# ---------------------------------------------------------------------------
# config validation


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        RnnConfig(cell_kind="transformer")
    with pytest.raises(ConfigError):
        RnnConfig(layer_widths=())
    with pytest.raises(ConfigError):
        RnnConfig(layer_widths=(8, 16))  # must be non-increasing
    with pytest.raises(ConfigError):
        RnnConfig(dropout=1.0)
    with pytest.raises(ConfigError):
        RnnConfig(batch_size=0)


# ---------------------------------------------------------------------------
# forward


def test_zero_parameters_give_half_probability():
    for cell in rnn.CELL_KINDS:
        model = zero_model(tiny_config(cell), 5)
        value = rnn.forward(model, np.random.default_rng(0).normal(size=(4, 5)))
        assert value == pytest.approx(0.5, abs=1e-15)


def test_forward_deterministic_without_training_mode():
    model = init_model(tiny_config(dropout=0.5), 5)
    x = np.random.default_rng(2).normal(size=(3, 5))
    assert rnn.forward(model, x, training_mode=False) == rnn.forward(model, x, training_mode=False)


def test_inference_invariant_to_dropout_rate():
    base = tiny_config(dropout=0.0, layer_widths=(6, 4))
    heavy = tiny_config(dropout=0.9, layer_widths=(6, 4))
    x = np.random.default_rng(3).normal(size=(3, 5))
    a = init_model(base, 5)
    b = init_model(heavy, 5)  # same seed, same parameters
    assert rnn.forward(a, x) == rnn.forward(b, x)


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(4)
    for cell in rnn.CELL_KINDS:
        model = init_model(tiny_config(cell), 5)
        for _ in range(5):
            x = rng.normal(size=(int(rng.integers(1, 6)), 5))
            probs, _ = rnn._net_forward(model.layers, model.head, model.config, x[None])
            assert abs(probs[0].sum() - 1.0) < 1e-12


def test_hand_computed_single_lstm_step():
    # 1-wide single LSTM layer, 1-step sequence, every parameter pinned
    config = RnnConfig(cell_kind="lstm", layer_widths=(1,), dropout=0.0, seed=0)
    model = init_model(config, 1)
    wx = np.array([[0.5, -0.3, 0.8, 0.2]])  # gate order: input, forget, cell, output
    wh = np.array([[0.1, 0.4, -0.2, 0.3]])
    b = np.array([0.05, -0.05, 0.1, 0.0])
    w_out = np.array([[1.5, -0.7]])
    b_out = np.array([0.11, -0.02])
    model.layers[0]["Wx"][...] = wx
    model.layers[0]["Wh"][...] = wh
    model.layers[0]["b"][...] = b
    model.head["W"][...] = w_out
    model.head["b"][...] = b_out

    x = 0.9

    def sigmoid(v):
        return 1.0 / (1.0 + math.exp(-v))

    gate_i = sigmoid(wx[0, 0] * x + b[0])
    gate_f = sigmoid(wx[0, 1] * x + b[1])
    gate_g = math.tanh(wx[0, 2] * x + b[2])
    gate_o = sigmoid(wx[0, 3] * x + b[3])
    c = gate_i * gate_g  # previous cell state is zero
    h = gate_o * math.tanh(c)
    logits = (h * w_out[0, 0] + b_out[0], h * w_out[0, 1] + b_out[1])
    expected = math.exp(logits[1]) / (math.exp(logits[0]) + math.exp(logits[1]))

    assert rnn.forward(model, np.array([[x]])) == pytest.approx(expected, abs=1e-14)


def test_dimension_mismatch_raises():
    model = init_model(tiny_config(), 5)
    with pytest.raises(ShapeError):
        rnn.forward(model, np.ones((3, 7)))


# ---------------------------------------------------------------------------
# loss


def test_loss_maximum_entropy():
    model = zero_model(tiny_config(), 5)
    batch = random_batch(np.random.default_rng(5))
    assert rnn.loss(model, batch) == pytest.approx(math.log(2), abs=1e-12)


def test_loss_single_item_hand_value():
    # force P+ = 0.25 via the output bias on an otherwise zero network
    model = zero_model(tiny_config(), 5)
    model.head["b"][...] = [math.log(3.0), 0.0]  # softmax -> (0.75, 0.25)
    batch = [(np.zeros((2, 5)), 1)]
    assert rnn.loss(model, batch) == pytest.approx(-math.log(0.25), abs=1e-12)


def test_loss_clamp_keeps_confident_predictions_finite():
    model = zero_model(tiny_config(), 5)
    model.head["b"][...] = [0.0, 60.0]  # saturates P+ to 1.0 in float
    batch = [(np.zeros((2, 5)), 1)]
    value = rnn.loss(model, batch)
    assert 0.0 <= value <= -math.log(1.0 - 1e-12) + 1e-15


# ---------------------------------------------------------------------------
# gradient check


@pytest.mark.parametrize("cell", rnn.CELL_KINDS)
def test_gradient_check_small_net(cell):
    config = tiny_config(cell)
    model = init_model(config, 5)
    assert model.parameter_count() <= 1000
    batch = random_batch(np.random.default_rng(6))
    assert gradient_check(model, batch, 1e-4) < 1e-4


def test_gradient_check_mixed_lengths():
    model = init_model(tiny_config("gru"), 4)
    rng = np.random.default_rng(7)
    batch = [
        (rng.normal(size=(2, 4)), 0),
        (rng.normal(size=(5, 4)), 1),
        (rng.normal(size=(2, 4)), 1),
    ]
    assert gradient_check(model, batch, 1e-4) < 1e-4


def test_symmetric_batch_zero_bias_gradient():
    model = zero_model(tiny_config(), 5)
    x = np.ones((3, 5))
    batch = [(x, 0), (x, 1)]
    _, layer_grads, head_grads = rnn._batch_pass(
        model.layers, model.head, model.config, batch, want_grads=True
    )
    assert np.allclose(head_grads["b"], 0.0)


# ---------------------------------------------------------------------------
# training


def separable_set(rng, n=10, steps=4, dim=6):
    """Signal token e0 -> label 1, e1 -> label 0, rest small noise."""
    out = []
    for i in range(n):
        label = i % 2
        seq = 0.1 * rng.normal(size=(steps, dim))
        seq[rng.integers(0, steps)] = np.eye(dim)[0 if label else 1]
        out.append((seq, label))
    return out


def test_train_linearly_separable_to_perfect_accuracy():
    rng = np.random.default_rng(8)
    data = separable_set(rng)
    # cross-check separability with an independent frequency classifier:
    # treat the argmax dimension of each row as a token
    docs = [
        (tuple(f"d{np.argmax(np.abs(row))}" for row in seq), label) for seq, label in data
    ]
    oracle = nbc_train(docs, alpha=0.1)
    oracle_acc = np.mean([(nbc_score(oracle, doc) > 0.5) == label for doc, label in docs])
    assert oracle_acc == 1.0

    config = tiny_config("lstm", layer_widths=(8,), learning_rate=0.3, batch_size=5, max_epochs=50)
    model = rnn.train(config, data, data)
    predictions = rnn.predict_batch(model, [seq for seq, _ in data])
    assert np.mean((predictions > 0.5) == np.array([y for _, y in data])) == 1.0


def test_zero_learning_rate_keeps_parameters():
    rng = np.random.default_rng(9)
    data = random_batch(rng, n=8)
    config = tiny_config(learning_rate=0.0, max_epochs=3)
    model = rnn.train(config, data, data)
    fresh = init_model(config, 5)
    for trained, init in zip(model.layers, fresh.layers):
        for name in trained:
            assert np.array_equal(trained[name], init[name])
    for name in model.head:
        assert np.array_equal(model.head[name], fresh.head[name])


def test_training_is_bitwise_deterministic():
    rng = np.random.default_rng(10)
    data = random_batch(rng, n=12)
    config = tiny_config("gru", dropout=0.4, max_epochs=4)
    a = rnn.train(config, data, data[:4])
    b = rnn.train(config, data, data[:4])
    for la, lb in zip(a.layers, b.layers):
        for name in la:
            assert np.array_equal(la[name], lb[name])
    for name in a.head:
        assert np.array_equal(a.head[name], b.head[name])


def test_single_class_training_is_degenerate():
    data = [(np.ones((2, 5)), 1), (np.zeros((2, 5)), 1)]
    with pytest.raises(DegenerateTraining):
        rnn.train(tiny_config(), data, data)


@pytest.mark.parametrize("cell", rnn.CELL_KINDS)
def test_small_step_does_not_increase_batch_loss(cell):
    rng = np.random.default_rng(11)
    batch = random_batch(rng, n=6)
    config = tiny_config(cell, learning_rate=1e-5)
    model = init_model(config, 5)
    before = rnn.loss(model, batch)
    _, layer_grads, head_grads = rnn._batch_pass(
        model.layers, model.head, model.config, batch, want_grads=True
    )
    for params, grads in zip(model.layers, layer_grads):
        for name in params:
            params[name] -= config.learning_rate * grads[name]
    for name in model.head:
        model.head[name] -= config.learning_rate * head_grads[name]
    assert rnn.loss(model, batch) <= before + 1e-12


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    data = random_batch(rng, n=8)
    model = rnn.train(tiny_config("gru", max_epochs=2), data, data)
    path = tmp_path / "model.bin"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == model.config
    assert loaded.input_dim == model.input_dim
    x = rng.normal(size=(3, 5))
    # parameters go through float32 on disk; scores agree to that precision
    assert rnn.forward(loaded, x) == pytest.approx(rnn.forward(model, x), abs=1e-6)


def test_checkpoint_digest_is_deterministic(tmp_path):
    rng = np.random.default_rng(13)
    data = random_batch(rng, n=8)
    a_path, b_path = tmp_path / "a.bin", tmp_path / "b.bin"
    save_model(rnn.train(tiny_config(max_epochs=2), data, data), a_path)
    save_model(rnn.train(tiny_config(max_epochs=2), data, data), b_path)
    assert a_path.read_bytes() == b_path.read_bytes()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "model.bin"
    save_model(init_model(tiny_config(), 5), path)
    data = bytearray(path.read_bytes())
    data[0] = ord("X")
    path.write_bytes(bytes(data))
    with pytest.raises(BadMagic):
        load_model(path)
