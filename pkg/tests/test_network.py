"""Cells, layers, model construction, and BPTT gradient correctness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covert_decode.network import (
    LayerSpec,
    build_model,
    classifier_specs,
    cross_entropy,
    cross_entropy_mean,
    dense_softmax_forward,
    dropout_apply,
    gru_step,
    lstm_step,
    softmax,
    validate_chain,
)
from covert_decode.rng import substream


def lstm_reference(x, h, c, wx, wh, b):
    """Scalar-formula oracle for one LSTM step (gate order i, f, o, g)."""
    z = x @ wx + h @ wh + b
    hs = h.shape[-1]
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    i = sig(z[..., :hs])
    f = sig(z[..., hs : 2 * hs])
    o = sig(z[..., 2 * hs : 3 * hs])
    g = np.tanh(z[..., 3 * hs :])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def gru_reference(x, h, wx, wh, b):
    """Scalar-formula oracle for one GRU step (gate order z, r, candidate)."""
    hs = h.shape[-1]
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    zx = x @ wx + b
    z = sig(zx[..., :hs] + h @ wh[:, :hs])
    r = sig(zx[..., hs : 2 * hs] + h @ wh[:, hs : 2 * hs])
    n = np.tanh(zx[..., 2 * hs :] + (r * h) @ wh[:, 2 * hs :])
    return (1.0 - z) * h + z * n


def random_lstm_params(rng, d, h):
    return {
        "wx": rng.standard_normal((d, 4 * h)),
        "wh": rng.standard_normal((h, 4 * h)),
        "b": rng.standard_normal(4 * h),
    }


def random_gru_params(rng, d, h):
    return {
        "wx": rng.standard_normal((d, 3 * h)),
        "wh": rng.standard_normal((h, 3 * h)),
        "b": rng.standard_normal(3 * h),
    }


class TestLstmStep:
    def test_zero_parameters_zero_output(self):
        params = {"wx": np.zeros((3, 8)), "wh": np.zeros((2, 8)), "b": np.zeros(8)}
        h, c = lstm_step(np.ones(3), np.ones(2), np.zeros(2), params)
        np.testing.assert_allclose(h, 0.0, atol=1e-15)  # o=0.5, tanh(c)=0
        np.testing.assert_allclose(c, 0.0, atol=1e-15)
        # nonzero cell state halves: f = 0.5, candidate contributes nothing
        _, c2 = lstm_step(np.ones(3), np.ones(2), np.ones(2), params)
        np.testing.assert_allclose(c2, 0.5, atol=1e-15)

    def test_matches_formula_oracle(self):
        rng = np.random.default_rng(0)
        params = random_lstm_params(rng, 2, 2)
        x, h, c = rng.standard_normal(2), rng.standard_normal(2), rng.standard_normal(2)
        h_new, c_new = lstm_step(x, h, c, params)
        h_ref, c_ref = lstm_reference(x, h, c, params["wx"], params["wh"], params["b"])
        np.testing.assert_allclose(h_new, h_ref, atol=1e-12)
        np.testing.assert_allclose(c_new, c_ref, atol=1e-12)

    def test_large_forget_bias_preserves_cell(self):
        params = {"wx": np.zeros((2, 8)), "wh": np.zeros((2, 8)), "b": np.zeros(8)}
        params["b"][2:4] = 10.0  # forget gate block
        c_prev = np.array([0.7, -1.2])
        _, c = lstm_step(np.ones(2), np.zeros(2), c_prev, params)
        np.testing.assert_allclose(c, c_prev, atol=1e-4)

    def test_batched_matches_rowwise(self):
        rng = np.random.default_rng(1)
        params = random_lstm_params(rng, 3, 4)
        xb = rng.standard_normal((5, 3))
        hb = rng.standard_normal((5, 4))
        cb = rng.standard_normal((5, 4))
        h_all, c_all = lstm_step(xb, hb, cb, params)
        for i in range(5):
            h_i, c_i = lstm_step(xb[i], hb[i], cb[i], params)
            np.testing.assert_allclose(h_all[i], h_i, atol=1e-12)
            np.testing.assert_allclose(c_all[i], c_i, atol=1e-12)


class TestGruStep:
    def test_zero_parameters_halve_state(self):
        params = {"wx": np.zeros((3, 6)), "wh": np.zeros((2, 6)), "b": np.zeros(6)}
        h_prev = np.array([0.8, -0.4])
        h = gru_step(np.ones(3), h_prev, params)
        np.testing.assert_allclose(h, 0.5 * h_prev, atol=1e-15)

    def test_matches_formula_oracle(self):
        rng = np.random.default_rng(2)
        params = random_gru_params(rng, 2, 2)
        x, h = rng.standard_normal(2), rng.standard_normal(2)
        np.testing.assert_allclose(
            gru_step(x, h, params),
            gru_reference(x, h, params["wx"], params["wh"], params["b"]),
            atol=1e-12,
        )

    def test_update_gate_off_keeps_state(self):
        params = {"wx": np.zeros((2, 6)), "wh": np.zeros((2, 6)), "b": np.zeros(6)}
        params["b"][:2] = -10.0  # update gate z ~ 0
        h_prev = np.array([1.3, -0.2])
        np.testing.assert_allclose(gru_step(np.ones(2), h_prev, params), h_prev, atol=1e-4)


class TestSoftmaxHead:
    def test_uniform_for_zero_logits(self):
        probs = dense_softmax_forward(np.zeros(4), np.zeros((4, 5)), np.zeros(5))
        np.testing.assert_allclose(probs, 0.2, atol=1e-12)

    def test_shift_invariance(self):
        logits = np.array([0.3, -1.2, 2.2])
        np.testing.assert_allclose(softmax(logits), softmax(logits + 57.0), atol=1e-12)

    def test_matches_direct_evaluation(self):
        logits = np.array([1.0, 2.0, 3.0])
        expected = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(softmax(logits), expected, atol=1e-12)

    def test_sums_to_one(self):
        rng = np.random.default_rng(3)
        probs = softmax(rng.standard_normal((20, 7)) * 30)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(probs >= 0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=-100, max_value=100))
    def test_shift_invariance_property(self, shift):
        logits = np.array([0.1, 0.5, -2.0, 3.0])
        np.testing.assert_allclose(softmax(logits + shift), softmax(logits), atol=1e-10)


class TestCrossEntropy:
    def test_certain_prediction_zero_loss(self):
        assert cross_entropy(np.array([0.0, 1.0, 0.0]), 1) == 0.0

    def test_uniform_five_way(self):
        assert cross_entropy(np.full(5, 0.2), 3) == pytest.approx(np.log(5), abs=1e-12)

    def test_batch_mean_matches_per_sample(self):
        rng = np.random.default_rng(4)
        probs = softmax(rng.standard_normal((10, 5)))
        labels = rng.integers(0, 5, 10)
        per_sample = np.mean([cross_entropy(probs[i], labels[i]) for i in range(10)])
        assert cross_entropy_mean(probs, labels) == pytest.approx(per_sample, abs=1e-12)

    def test_clamped_at_zero_probability(self):
        loss = cross_entropy(np.array([1.0, 0.0]), 1)
        assert loss == pytest.approx(-np.log(1e-12))


class TestDropout:
    def test_rate_zero_identity(self):
        x = np.random.default_rng(5).standard_normal(100)
        np.testing.assert_array_equal(dropout_apply(x, 0.0, "train", substream(0, "d")), x)

    def test_eval_identity(self):
        x = np.random.default_rng(6).standard_normal(100)
        np.testing.assert_array_equal(dropout_apply(x, 0.3, "eval"), x)

    def test_mean_preserved(self):
        x = np.ones(1_000_000)
        out = dropout_apply(x, 0.3, "train", substream(1, "drop"))
        assert out.mean() == pytest.approx(1.0, abs=0.01)

    def test_survivors_scaled(self):
        x = np.ones(1000)
        out = dropout_apply(x, 0.25, "train", substream(2, "drop"))
        nonzero = out[out != 0]
        np.testing.assert_allclose(nonzero, 1.0 / 0.75, atol=1e-12)

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            dropout_apply(np.ones(3), 0.3, "predict")


class TestLayerSpecs:
    def test_concat_doubles_width(self):
        spec = LayerSpec("bilstm", 10, 8)
        assert spec.output_size == 16
        assert LayerSpec("bilstm", 10, 8, merge_mode="sum").output_size == 8

    def test_chain_mismatch_detected(self):
        specs = [LayerSpec("bilstm", 10, 8), LayerSpec("dense", 10, 5)]
        with pytest.raises(ValueError, match="expects input"):
            validate_chain(specs)

    def test_build_rejects_mismatch(self):
        with pytest.raises(ValueError):
            build_model([LayerSpec("lstm", 4, 4), LayerSpec("dense", 3, 2)], seed=0)

    def test_classifier_spec_shapes(self):
        specs = classifier_specs("bilstm", 128, hidden=(512, 256), dropout=(0.3, 0.2))
        assert [s.kind for s in specs] == ["bilstm", "bilstm", "dense", "softmax"]
        assert specs[1].input_size == 1024  # concat of 2 x 512
        assert specs[2].input_size == 512  # concat of 2 x 256
        assert specs[0].return_sequences and not specs[1].return_sequences


class TestBuildModel:
    def test_paper_scale_parameter_arithmetic(self):
        specs = classifier_specs("bilstm", 128, hidden=(512, 256), dropout=(0.3, 0.2))
        model = build_model(specs, seed=0)
        # shape arithmetic oracle, per direction: 4*D*H + 4*H*H + 4*H
        layer1 = 2 * (4 * 128 * 512 + 4 * 512 * 512 + 4 * 512)
        layer2 = 2 * (4 * 1024 * 256 + 4 * 256 * 256 + 4 * 256)
        dense = 512 * 5 + 5
        assert model.parameter_count() == layer1 + layer2 + dense

    def test_same_seed_bit_identical(self):
        specs = classifier_specs("bigru", 6, hidden=(5, 4), dropout=(0.1, 0.1), n_classes=3)
        a = build_model(specs, seed=42)
        b = build_model(specs, seed=42)
        for (ka, pa), (kb, pb) in zip(a.param_blocks(), b.param_blocks()):
            assert ka == kb
            np.testing.assert_array_equal(pa, pb)

    def test_different_seed_differs(self):
        specs = classifier_specs("lstm", 6, hidden=(5,), dropout=(0.0,), n_classes=3)
        a = build_model(specs, seed=1)
        b = build_model(specs, seed=2)
        assert any(
            not np.array_equal(pa, pb)
            for (_, pa), (_, pb) in zip(a.param_blocks(), b.param_blocks())
        )

    def test_forget_bias_and_orthogonal_recurrent(self):
        specs = classifier_specs("bilstm", 6, hidden=(8,), dropout=(0.0,), n_classes=3)
        model = build_model(specs, seed=3, dtype=np.float64)
        layer = model.layers[0]
        b = layer.params["fw_b"]
        np.testing.assert_array_equal(b[8:16], 1.0)  # forget block
        np.testing.assert_array_equal(np.delete(b, np.s_[8:16]), 0.0)
        wh = layer.params["fw_wh"]
        for gate in range(4):
            block = wh[:, 8 * gate : 8 * (gate + 1)]
            np.testing.assert_allclose(block.T @ block, np.eye(8), atol=1e-10)


class TestBidirectional:
    def test_palindrome_with_tied_weights(self):
        specs = [LayerSpec("bilstm", 3, 4, return_sequences=True)]
        model = build_model(specs, seed=5, dtype=np.float64)
        layer = model.layers[0]
        for name in ("wx", "wh", "b"):
            layer.params[f"bw_{name}"] = layer.params[f"fw_{name}"].copy()
        rng = np.random.default_rng(6)
        half = rng.standard_normal((1, 4, 3))
        x = np.concatenate([half, half[:, ::-1]], axis=1)  # palindrome, T=8
        out = layer.forward(x)
        fw, bw = out[0, :, :4], out[0, :, 4:]
        np.testing.assert_allclose(fw, bw[::-1], atol=1e-12)

    def test_single_timestep_equals_cell_steps(self):
        specs = [LayerSpec("bilstm", 3, 4, return_sequences=False)]
        model = build_model(specs, seed=7, dtype=np.float64)
        layer = model.layers[0]
        x = np.random.default_rng(8).standard_normal((2, 1, 3))
        out = layer.forward(x)
        for d, direction in enumerate(("fw", "bw")):
            params = {
                "wx": layer.params[f"{direction}_wx"],
                "wh": layer.params[f"{direction}_wh"],
                "b": layer.params[f"{direction}_b"],
            }
            h, _ = lstm_step(x[:, 0], np.zeros((2, 4)), np.zeros((2, 4)), params)
            np.testing.assert_allclose(out[:, 4 * d : 4 * (d + 1)], h, atol=1e-12)

    def test_matches_explicit_cell_composition(self):
        t_len, h_size = 5, 3
        specs = [LayerSpec("bilstm", 2, h_size, return_sequences=True)]
        model = build_model(specs, seed=9, dtype=np.float64)
        layer = model.layers[0]
        x = np.random.default_rng(10).standard_normal((1, t_len, 2))
        out = layer.forward(x)[0]

        def run_direction(direction, seq):
            params = {
                "wx": layer.params[f"{direction}_wx"],
                "wh": layer.params[f"{direction}_wh"],
                "b": layer.params[f"{direction}_b"],
            }
            h = np.zeros(h_size)
            c = np.zeros(h_size)
            states = []
            for t in range(t_len):
                h, c = lstm_step(seq[t], h, c, params)
                states.append(h)
            return np.stack(states)

        fw = run_direction("fw", x[0])
        bw = run_direction("bw", x[0, ::-1])[::-1]
        np.testing.assert_allclose(out[:, :h_size], fw, atol=1e-12)
        np.testing.assert_allclose(out[:, h_size:], bw, atol=1e-12)

    def test_final_state_readout(self):
        specs = [LayerSpec("bigru", 3, 4, return_sequences=False)]
        model = build_model(specs, seed=11, dtype=np.float64)
        layer = model.layers[0]
        x = np.random.default_rng(12).standard_normal((1, 6, 3))
        final = layer.forward(x)
        seq_specs = [LayerSpec("bigru", 3, 4, return_sequences=True)]
        seq_model = build_model(seq_specs, seed=11, dtype=np.float64)
        seq_out = seq_model.layers[0].forward(x)[0]
        np.testing.assert_allclose(final[0, :4], seq_out[-1, :4], atol=1e-12)  # fw at T
        np.testing.assert_allclose(final[0, 4:], seq_out[0, 4:], atol=1e-12)  # bw at t=0


def sampled_gradcheck(model, x, y, n_per_tensor=8, step=1e-5, rng_seed=1):
    """Compare analytic BPTT gradients with central finite differences."""
    probs = model.forward(x, training=True, rng=substream(0, "gc"))
    dlogits = probs.copy()
    dlogits[np.arange(len(y)), y] -= 1.0
    dlogits /= len(y)
    model.backward(dlogits)
    grads = model.collect_grads()
    params = model.trainable_params()
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    count = 0
    for key in sorted(params):
        flat = params[key].reshape(-1)
        gflat = np.asarray(grads[key]).reshape(-1)
        idx = rng.choice(flat.size, size=min(n_per_tensor, flat.size), replace=False)
        for i in idx:
            original = flat[i]
            flat[i] = original + step
            up = cross_entropy_mean(model.forward(x), y)
            flat[i] = original - step
            down = cross_entropy_mean(model.forward(x), y)
            flat[i] = original
            fd = (up - down) / (2 * step)
            rel = abs(fd - gflat[i]) / max(abs(fd) + abs(gflat[i]), 1e-8)
            worst = max(worst, rel)
            count += 1
    return worst, count


class TestBackward:
    @pytest.mark.parametrize("kind", ["lstm", "gru", "bilstm", "bigru"])
    def test_gradients_match_finite_differences(self, kind):
        specs = classifier_specs(kind, 5, hidden=(4, 3), dropout=(0.0, 0.0), n_classes=3)
        model = build_model(specs, seed=13, dtype=np.float64)
        rng = np.random.default_rng(14)
        x = rng.standard_normal((3, 6, 5))
        y = np.array([0, 2, 1])
        worst, _ = sampled_gradcheck(model, x, y)
        assert worst < 1e-4

    def test_sum_merge_gradients(self):
        specs = [
            LayerSpec("bilstm", 4, 3, merge_mode="sum", return_sequences=True),
            LayerSpec("bigru", 3, 3, merge_mode="sum", return_sequences=False),
            LayerSpec("dense", 3, 3),
            LayerSpec("softmax", 3, 3),
        ]
        model = build_model(specs, seed=15, dtype=np.float64)
        rng = np.random.default_rng(16)
        x = rng.standard_normal((2, 5, 4))
        y = np.array([1, 2])
        worst, _ = sampled_gradcheck(model, x, y)
        assert worst < 1e-4

    def test_saturated_correct_prediction_zero_gradient(self):
        specs = classifier_specs("lstm", 3, hidden=(4,), dropout=(0.0,), n_classes=2)
        model = build_model(specs, seed=17, dtype=np.float64)
        dense = model.layers[1]
        dense.params["b"][...] = np.array([50.0, -50.0])
        dense.params["w"][...] = 0.0
        x = np.random.default_rng(18).standard_normal((2, 4, 3))
        y = np.array([0, 0])
        probs = model.forward(x, training=True, rng=substream(0, "gc"))
        dlogits = probs.copy()
        dlogits[np.arange(2), y] -= 1.0
        dlogits /= 2
        model.backward(dlogits)
        norms = [np.linalg.norm(g) for g in model.collect_grads().values()]
        assert max(norms) < 1e-8

    def test_duplicated_sample_same_mean_gradient(self):
        specs = classifier_specs("gru", 3, hidden=(4,), dropout=(0.0,), n_classes=3)
        model = build_model(specs, seed=19, dtype=np.float64)
        x = np.random.default_rng(20).standard_normal((1, 5, 3))
        y = np.array([2])

        def grads_for(xb, yb):
            probs = model.forward(xb, training=True, rng=substream(0, "gc"))
            d = probs.copy()
            d[np.arange(len(yb)), yb] -= 1.0
            d /= len(yb)
            model.backward(d)
            out = {k: v.copy() for k, v in model.collect_grads().items()}
            model.zero_grads()
            return out

        single = grads_for(x, y)
        doubled = grads_for(np.concatenate([x, x]), np.concatenate([y, y]))
        for key in single:
            np.testing.assert_allclose(doubled[key], single[key], atol=1e-12)

    def test_frozen_layer_receives_no_gradient(self):
        specs = classifier_specs("lstm", 3, hidden=(4, 3), dropout=(0.0, 0.0), n_classes=2)
        model = build_model(specs, seed=21, dtype=np.float64)
        model.set_frozen(0, True)
        x = np.random.default_rng(22).standard_normal((2, 5, 3))
        y = np.array([0, 1])
        probs = model.forward(x, training=True, rng=substream(0, "gc"))
        d = probs.copy()
        d[np.arange(2), y] -= 1.0
        model.backward(d)
        grads = model.collect_grads()
        assert not any(key.startswith("layer0.") for key in grads)
        assert any(key.startswith("layer1.") for key in grads)


class TestForwardDeterminism:
    def test_eval_independent_of_batch_composition(self):
        specs = classifier_specs("bilstm", 4, hidden=(5, 4), dropout=(0.3, 0.2), n_classes=3)
        model = build_model(specs, seed=23, dtype=np.float64)
        x = np.random.default_rng(24).standard_normal((6, 7, 4))
        full = model.forward(x, training=False)
        for i in range(6):
            single = model.forward(x[i : i + 1], training=False)
            np.testing.assert_allclose(full[i], single[0], atol=1e-12)

    def test_eval_deterministic(self):
        specs = classifier_specs("gru", 4, hidden=(5,), dropout=(0.5,), n_classes=3)
        model = build_model(specs, seed=25)
        x = np.random.default_rng(26).standard_normal((3, 8, 4)).astype(np.float32)
        np.testing.assert_array_equal(
            model.forward(x, training=False), model.forward(x, training=False)
        )
