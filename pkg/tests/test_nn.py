import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradcheck import max_relative_error
from scneugm import embedding, hashing, predictors
from scneugm.nn import (DenseSpec, LayoutMismatch, LstmSpec, ParamVector, Tensor, dense_forward,
                        gaussian_sample, init_dense, init_lstm, lstm_forward, no_grad, sgd_step)
from scneugm.nn import autograd as ag
from scneugm.nn.checkpoint import load_checkpoint, save_checkpoint

TOL = 1e-4


def nested(flat: dict) -> dict:
    out = {}
    for key, t in flat.items():
        net, block = key.split("/")
        out.setdefault(net, {})[block] = t
    return out


def flat_blocks(nets: dict) -> dict:
    return {f"{n}/{b}": v.copy() for n, pv in nets.items() for b, v in pv.unflatten().items()}


@pytest.mark.parametrize("hidden,out", [("gelu", "none"), ("relu", "sigmoid"),
                                        ("gelu", "tanh"), ("relu", "gelu")])
def test_dense_gradients(hidden, out):
    rng = np.random.default_rng(0)
    spec = DenseSpec((4, 7, 6, 3), hidden, out)
    blocks = init_dense(spec, rng).unflatten()
    x = rng.standard_normal((5, 4))
    target = rng.standard_normal((5, 3))

    def loss(p):
        return ag.sum(ag.square(ag.sub(dense_forward(spec, p, x), target)))

    assert max_relative_error(loss, blocks, rng) < TOL


def test_lstm_gradients_with_ragged_lengths():
    rng = np.random.default_rng(1)
    spec = LstmSpec(3, 4, 2)
    blocks = init_lstm(spec, rng).unflatten()
    x = rng.standard_normal((3, 5, 3))
    lengths = np.array([5, 2, 4])

    def loss(p):
        hs, h = lstm_forward(spec, p, x, lengths)
        return ag.add(ag.sum(ag.square(h)), ag.sum(hs[1]))

    assert max_relative_error(loss, blocks, rng) < TOL


def test_lstm_ragged_final_state_matches_truncated_run():
    rng = np.random.default_rng(2)
    spec = LstmSpec(3, 4, 2)
    params = init_lstm(spec, rng)
    x = rng.standard_normal((2, 6, 3))
    _, h = lstm_forward(spec, params, x, np.array([6, 3]))
    _, h_short = lstm_forward(spec, params, x[1:, :3])
    np.testing.assert_allclose(h.value[1], h_short.value[0], atol=1e-12)


def test_reconstruction_loss_gradients():
    rng = np.random.default_rng(3)
    params = embedding.init_senn(rng)
    seqs = rng.uniform(0.0, 1.0, (3, 4, 3))
    lengths = np.array([4, 2, 3])
    seqs[1, 2:] = 0.0
    seqs[2, 3:] = 0.0

    def loss(p):
        return embedding.reconstruction_loss(nested(p), seqs, lengths)

    assert max_relative_error(loss, flat_blocks(params.nets), rng, per_block=8) < TOL


def test_reconstruction_loss_ignores_padding():
    rng = np.random.default_rng(4)
    params = embedding.init_senn(rng)
    seqs = rng.uniform(0.0, 1.0, (2, 4, 3))
    lengths = np.array([4, 2])
    a = embedding.reconstruction_loss(params.nets, seqs, lengths).value
    seqs[1, 2:] = 99.0
    # padding feeds neither the encoder (masked state) nor the error sum
    assert embedding.reconstruction_loss(params.nets, seqs, lengths).value == pytest.approx(a)


def test_bce_bits_gradient_and_value():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((30, 1)) * 3
    y = rng.integers(0, 2, (30, 1))

    def loss(p):
        return predictors.bce_bits(p["z"], y)

    assert max_relative_error(loss, {"z": z}, rng) < TOL
    p = 1 / (1 + np.exp(-z))
    direct = -np.mean(y * np.log2(p) + (1 - y) * np.log2(1 - p))
    assert predictors.bce_bits(Tensor(z), y).value == pytest.approx(direct, rel=1e-12)


def test_bce_bits_stable_for_large_logits():
    val = predictors.bce_bits(Tensor(np.array([[800.0], [-800.0]])), np.array([[1], [0]])).value
    assert np.isfinite(val) and val == pytest.approx(0.0, abs=1e-12)


def test_head_loss_gradients():
    rng = np.random.default_rng(6)
    spec = predictors.SPECS["PCNN"]
    blocks = init_dense(spec, rng).unflatten()
    emb = rng.standard_normal((6, 5))
    labels = rng.random((6, 6)) < 0.4
    rows, cols = np.nonzero(~np.eye(6, dtype=bool))

    def loss(p):
        return predictors.head_loss(spec, p, emb, rows, cols, labels)

    # 3000 ReLU activations: a small step keeps the stencil off their kinks
    assert max_relative_error(loss, blocks, rng, h=1e-6) < TOL


def test_similarity_and_correlation_gradients():
    rng = np.random.default_rng(7)
    codes = np.tanh(rng.standard_normal((8, 6)))
    labels = (rng.random((8, 8)) < 0.3).astype(int) * 2

    assert max_relative_error(lambda p: hashing.similarity_loss(p["c"], labels),
                              {"c": codes}, rng) < TOL
    assert max_relative_error(lambda p: hashing.correlation_loss(p["c"]),
                              {"c": codes}, rng) < TOL


def test_similarity_and_correlation_values_by_loops():
    rng = np.random.default_rng(8)
    codes = np.tanh(rng.standard_normal((5, 4)))
    labels = rng.integers(0, 3, (5, 5))
    k, bits = codes.shape
    sim = 0.0
    for i in range(k):
        for j in range(k):
            if i != j:
                agree = (codes[i] @ codes[j] + bits) / (2 * bits)
                sim += (agree - min(labels[i, j], 1)) ** 2
    assert hashing.similarity_loss(codes, labels).value == pytest.approx(sim / (k * (k - 1)))
    corr = sum((codes[:, a] @ codes[:, b] - (a == b)) ** 2
               for a in range(bits) for b in range(bits)) / k ** 2
    assert hashing.correlation_loss(codes).value == pytest.approx(corr)


def test_dhf_loss_gradients():
    rng = np.random.default_rng(9)
    blocks = hashing.init_dhf(rng).unflatten()
    emb = rng.standard_normal((6, 5))
    labels = rng.random((6, 6)) < 0.3

    def loss(p):
        return hashing.dhf_loss(p, emb, labels, 0.5)[0]

    assert max_relative_error(loss, blocks, rng, per_block=10) < TOL


def test_no_grad_records_nothing():
    w = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        out = ag.sum(ag.mul(w, 2.0))
    assert not out._parents


def test_gradient_accumulates_over_shared_use():
    w = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    ag.sum(ag.add(ag.mul(w, w), w)).backward()
    np.testing.assert_allclose(w.grad, 2 * w.value + 1)


def test_param_vector_round_trip_and_layout_checks():
    spec = DenseSpec((3, 4, 2))
    pv = init_dense(spec, np.random.default_rng(0))
    again = ParamVector.flatten(pv.unflatten(), spec.layout)
    np.testing.assert_array_equal(again.values, pv.values)
    with pytest.raises(LayoutMismatch):
        ParamVector(np.zeros(3), spec.layout)
    other = init_dense(DenseSpec((3, 5, 2)), np.random.default_rng(0))
    with pytest.raises(LayoutMismatch):
        sgd_step(pv, other, 0.1)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.integers(0, 10_000))
def test_gaussian_sample_moments_follow_log_variance(log_var, seed):
    layout = DenseSpec((20, 50)).layout
    mean = ParamVector.zeros(layout)
    draw = gaussian_sample(mean, mean.like(np.full(len(mean), log_var)),
                           np.random.default_rng(seed))
    # 1050 draws: the sample std lies within 15% of exp(log_var / 2)
    assert np.std(draw.values) == pytest.approx(np.exp(log_var / 2), rel=0.15)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    nets = {"DHF": (hashing.SPEC, hashing.init_dhf(rng)),
            "LSTM-enc": (LstmSpec(15, 15, 2), init_lstm(LstmSpec(15, 15, 2), rng))}
    path = tmp_path / "m.ckpt.json"
    save_checkpoint(path, nets, {"note": 1})
    loaded, meta = load_checkpoint(path)
    assert meta == {"note": 1}
    for name, (spec, pv) in nets.items():
        assert loaded[name][0] == spec
        np.testing.assert_array_equal(loaded[name][1].values, pv.values)
