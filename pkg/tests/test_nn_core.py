import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from batchuni.nn_core import (
    AeModel,
    LayerSpec,
    backward,
    fcn_ae_specs,
    forward,
    glorot_init,
    load_model,
    mlp_specs,
    model_from_bytes,
    model_to_bytes,
    save_model,
)
from helpers import assert_grads_close, numeric_grad, random_small_model

VERIFY_SPECS, VERIFY_NENC = mlp_specs([2, 20, 10, 20, 2], "sigmoid")


def identity_model(d=2):
    spec = [LayerSpec(d, d, "identity")]
    return AeModel(spec, [np.eye(d)], [np.zeros(d)], 1)


def sq_loss(model, x):
    r, _ = forward(model, x)
    return float(np.sum((r - x) ** 2))


class TestGlorotInit:
    def test_bounds(self):
        model = glorot_init(VERIFY_SPECS, seed=7, n_encoder=VERIFY_NENC)
        bound = np.sqrt(6 / 22)
        assert abs(bound - 0.522) < 1e-3
        assert np.all(np.abs(model.weights[0]) <= bound)
        for w, s in zip(model.weights, model.specs):
            assert np.all(np.abs(w) <= np.sqrt(6 / (s.in_dim + s.out_dim)))

    def test_biases_zero(self):
        model = glorot_init(VERIFY_SPECS, seed=3, n_encoder=VERIFY_NENC)
        assert all(np.all(b == 0) for b in model.biases)

    def test_deterministic(self):
        a = glorot_init(VERIFY_SPECS, seed=11, n_encoder=VERIFY_NENC)
        b = glorot_init(VERIFY_SPECS, seed=11, n_encoder=VERIFY_NENC)
        assert model_to_bytes(a) == model_to_bytes(b)
        x = np.random.default_rng(0).normal(size=(5, 2))
        assert np.array_equal(forward(a, x)[0], forward(b, x)[0])

    def test_chain_mismatch(self):
        with pytest.raises(ValueError, match="chain"):
            glorot_init([LayerSpec(2, 3), LayerSpec(4, 2)], seed=0, n_encoder=1)

    def test_layout(self):
        model = glorot_init(VERIFY_SPECS, 0, VERIFY_NENC)
        assert model.latent_dim == 10
        assert [s.activation for s in model.specs] == ["sigmoid"] * 3 + ["identity"]
        assert model.input_dim == 2

    def test_fcn_layout(self):
        specs, n_enc = fcn_ae_specs(440, n_hidden=2, units=128, latent=40)
        dims = [s.in_dim for s in specs] + [specs[-1].out_dim]
        assert dims == [440, 128, 128, 128, 40, 128, 128, 128, 440]
        assert n_enc == 4
        assert [s.activation for s in specs[:-1]] == ["relu"] * 7
        assert specs[-1].activation == "identity"


class TestForward:
    def test_identity(self):
        r, _ = forward(identity_model(), np.array([1.0, 2.0]))
        np.testing.assert_array_equal(r, [1.0, 2.0])

    def test_constant_network(self):
        specs, n = mlp_specs([3, 4, 3], "sigmoid")
        model = AeModel(specs, [np.zeros((4, 3)), np.zeros((3, 4))], [np.zeros(4), np.zeros(3)], n)
        model.weights[1][:] = 1.0
        out = forward(model, np.random.default_rng(1).normal(size=(6, 3)))[0]
        # every hidden unit is sigmoid(0) = 0.5, four of them summed
        np.testing.assert_allclose(out, 2.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_finite(self, seed):
        rng = np.random.default_rng(seed)
        model = glorot_init(VERIFY_SPECS, seed, VERIFY_NENC)
        x = rng.normal(size=(20, 2))
        x *= 10 * rng.random((20, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
        assert np.all(np.isfinite(forward(model, x)[0]))

    def test_batch_matches_samplewise(self):
        model = glorot_init(VERIFY_SPECS, 2, VERIFY_NENC)
        x = np.random.default_rng(2).normal(size=(7, 2))
        batched = forward(model, x)[0]
        single = np.stack([forward(model, xi)[0] for xi in x])
        np.testing.assert_allclose(batched, single, rtol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(identity_model(2), np.ones(3))
        with pytest.raises(ValueError):
            forward(identity_model(2), np.ones((4, 3)))


class TestBackward:
    def test_zero_upstream(self):
        model = glorot_init(VERIFY_SPECS, 0, VERIFY_NENC)
        _, cache = forward(model, np.ones((3, 2)))
        g = backward(model, cache, np.zeros((3, 2)))
        assert all(np.all(a == 0) for a in g.arrays())

    def test_linear_closed_form(self):
        rng = np.random.default_rng(5)
        w, b = rng.normal(size=(3, 3)), rng.normal(size=3)
        model = AeModel([LayerSpec(3, 3)], [w.copy()], [b.copy()], 1)
        x = rng.normal(size=3)
        r, cache = forward(model, x)
        g = backward(model, cache, 2 * (r - x))
        resid = w @ x + b - x
        np.testing.assert_allclose(g.weights[0], 2 * np.outer(resid, x), rtol=1e-12)
        np.testing.assert_allclose(g.biases[0], 2 * resid, rtol=1e-12)

    @pytest.mark.parametrize("activation", ["sigmoid", "identity"])
    def test_finite_differences(self, activation):
        rng = np.random.default_rng(42)
        for _ in range(25):
            model = random_small_model(rng, activation)
            x = rng.normal(size=(3, model.input_dim))
            r, cache = forward(model, x)
            g = backward(model, cache, 2 * (r - x))
            assert_grads_close(g.arrays(), numeric_grad(lambda m: sq_loss(m, x), model))

    def test_relu_away_from_kinks(self):
        rng = np.random.default_rng(9)
        checked = 0
        while checked < 10:
            model = random_small_model(rng, "relu")
            x = rng.normal(size=(2, model.input_dim))
            r, cache = forward(model, x)
            # finite differences are invalid within one step of a kink
            if any(np.min(np.abs(z)) < 1e-3 for z in cache.pre[:-1]):
                continue
            g = backward(model, cache, 2 * (r - x))
            assert_grads_close(g.arrays(), numeric_grad(lambda m: sq_loss(m, x), model))
            checked += 1

    def test_cache_mismatch(self):
        a = glorot_init(VERIFY_SPECS, 0, VERIFY_NENC)
        _, cache = forward(identity_model(2), np.ones(2))
        with pytest.raises(ValueError):
            backward(a, cache, np.ones(2))


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        model = glorot_init(*fcn_ae_specs(12, 1, 6, 3)[:1], seed=4, n_encoder=3)
        save_model(model, tmp_path / "m.bin")
        back = load_model(tmp_path / "m.bin")
        assert back.specs == model.specs and back.n_encoder == model.n_encoder
        for p, q in zip(model.params(), back.params()):
            assert np.array_equal(p, q)

    def test_header_layout(self):
        data = model_to_bytes(identity_model(2))
        assert data[:4] == b"BUAE"
        # header 16 + one layer spec 12 + 2x2 weights + 2 biases
        assert len(data) == 16 + 12 + 8 * 6

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            model_from_bytes(b"XXXX" + bytes(12))
        good = model_to_bytes(identity_model(2))
        with pytest.raises(ValueError):
            model_from_bytes(good + b"\0")
