import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artgraph.classifier import (
    AdamState,
    LabeledInstance,
    ModelConfig,
    adam_step,
    backward,
    cross_entropy,
    encoder_forward,
    forward,
    init_adam,
    init_params,
    load_checkpoint,
    mse_loss,
    predict,
    save_checkpoint,
    softmax,
    total_loss,
    train,
)
from artgraph.errors import FormatError, ValidationError

from oracles import finite_difference_grads, max_relative_error

TOY = dict(num_artists=3, num_styles=3, num_genres=3, visual_dim=8,
           context_dim=4, encoder_hidden=6)


def toy_config(**kwargs) -> ModelConfig:
    merged = {**TOY, **kwargs}
    return ModelConfig(**merged)


def toy_batch(rng: np.random.Generator, n=4, with_context=True):
    return [
        LabeledInstance(
            artwork=i,
            visual=rng.normal(size=8),
            labels=tuple(int(rng.integers(3)) for _ in range(3)),
            context=rng.uniform(-0.9, 0.9, size=4) if with_context else None,
        )
        for i in range(n)
    ]


class TestEncoderForward:
    def test_zero_params_give_zero_output(self):
        cfg = toy_config()
        params = init_params(cfg)
        for tensor in (params.encoder.W1, params.encoder.b1,
                       params.encoder.W2, params.encoder.b2):
            tensor[...] = 0.0
        out = encoder_forward(np.ones(8), params)
        assert np.array_equal(out, np.zeros(4))

    def test_output_strictly_inside_unit_interval(self):
        cfg = toy_config()
        params = init_params(cfg)
        rng = np.random.default_rng(0)
        for _ in range(50):
            out = encoder_forward(rng.normal(scale=100.0, size=8), params)
            assert np.all(np.abs(out) < 1.0)

    def test_hand_computed_two_by_two(self):
        cfg = ModelConfig(num_artists=2, num_styles=2, num_genres=2,
                          visual_dim=2, context_dim=2, encoder_hidden=2)
        params = init_params(cfg)
        params.encoder.W1[...] = [[0.5, -0.25], [1.0, 0.75]]
        params.encoder.b1[...] = [0.1, -0.2]
        params.encoder.W2[...] = [[0.3, 0.6], [-0.4, 0.2]]
        params.encoder.b2[...] = [0.05, 0.0]
        x = np.array([0.8, -0.5])
        h1 = math.tanh(0.5 * 0.8 + (-0.25) * (-0.5) + 0.1)
        h2 = math.tanh(1.0 * 0.8 + 0.75 * (-0.5) - 0.2)
        expected = [
            math.tanh(0.3 * h1 + 0.6 * h2 + 0.05),
            math.tanh(-0.4 * h1 + 0.2 * h2),
        ]
        got = encoder_forward(x, params)
        assert np.allclose(got, expected, atol=1e-12)

    def test_dimension_mismatch(self):
        params = init_params(toy_config())
        with pytest.raises(ValidationError):
            encoder_forward(np.zeros(7), params)

    def test_no_encoder_in_visual_only(self):
        params = init_params(toy_config(mode="visual_only"))
        assert params.encoder is None
        with pytest.raises(ValidationError):
            encoder_forward(np.zeros(8), params)


class TestLosses:
    def test_mse_identical_zero(self):
        v = np.random.default_rng(1).normal(size=128)
        assert mse_loss(v, v) == 0.0

    def test_mse_definition(self):
        assert mse_loss([1.0, 0.0], [0.0, 1.0]) == 2.0

    def test_mse_against_extended_precision(self):
        rng = np.random.default_rng(5)
        p = rng.normal(size=128)
        u = rng.normal(size=128)
        with mpmath.workdps(50):
            expected = float(mpmath.fsum((mpmath.mpf(a) - mpmath.mpf(b)) ** 2
                                         for a, b in zip(p, u)))
        got = mse_loss(p, u)
        assert abs(got - expected) <= 1e-10 * abs(expected)

    def test_mse_shape_mismatch(self):
        with pytest.raises(ValidationError):
            mse_loss([1.0], [1.0, 2.0])

    def test_cross_entropy_uniform_logits(self):
        for cls in range(4):
            assert cross_entropy(np.zeros(4), cls) == pytest.approx(math.log(4), abs=1e-9)

    def test_cross_entropy_against_extended_precision(self):
        z = np.array([10.0, 0.0, 0.0])
        with mpmath.workdps(50):
            expected = float(-mpmath.log(mpmath.exp(10) / (mpmath.exp(10) + 2)))
        assert cross_entropy(z, 0) == pytest.approx(expected, rel=1e-10)

    def test_cross_entropy_huge_logits_stable(self):
        loss = cross_entropy(np.array([1000.0, 0.0]), 0)
        assert math.isfinite(loss)
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert math.isfinite(cross_entropy(np.array([1000.0, 0.0]), 1))

    def test_cross_entropy_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy(np.zeros(3), 3)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-50, 50), min_size=2, max_size=10),
        st.floats(-100, 100),
    )
    def test_cross_entropy_shift_invariance(self, logits, shift):
        z = np.array(logits)
        loss_a = cross_entropy(z, 0)
        loss_b = cross_entropy(z + shift, 0)
        assert loss_a == pytest.approx(loss_b, rel=1e-9, abs=1e-9)
        assert loss_a >= 0.0


class TestTotalLoss:
    def test_weighted_substitution(self):
        # classification term 1.0 and mean mse 0.5 combine to 0.8 at gamma 0.4
        cls_term, mse_term, gamma = 1.0, 0.5, 0.4
        assert (1 - gamma) * cls_term + gamma * mse_term == pytest.approx(0.8)

    def test_gamma_zero_ignores_context(self):
        rng = np.random.default_rng(2)
        cfg = toy_config(gamma=0.0)
        params = init_params(cfg)
        batch = toy_batch(rng)
        trace = forward(batch, params, cfg)
        base = total_loss(batch, trace, cfg)
        for inst in batch:
            inst.context = inst.context + 5.0
        assert total_loss(batch, trace, cfg) == base

    def test_decomposition_identities(self):
        rng = np.random.default_rng(3)
        batch = toy_batch(rng)
        params = init_params(toy_config())
        for mode in ("multimodal", "regularization_only"):
            cfg0 = toy_config(gamma=0.0, mode=mode)
            cfg1 = toy_config(gamma=1.0, mode=mode)
            trace = forward(batch, params if mode == "multimodal" else init_params(cfg0), cfg0)
            cls_term = sum(
                cfg0.task_weight(task)
                * np.mean([cross_entropy(trace.logits[task][j], batch[j].labels[t])
                           for j in range(len(batch))])
                for t, task in enumerate(("artist", "style", "genre"))
            )
            mse_term = np.mean(
                [mse_loss(trace.predicted_context[j], batch[j].context)
                 for j in range(len(batch))]
            )
            assert total_loss(batch, trace, cfg0) == pytest.approx(cls_term, rel=1e-12)
            assert total_loss(batch, trace, cfg1) == pytest.approx(mse_term, rel=1e-12)

    def test_oracle_on_toy_batch(self):
        rng = np.random.default_rng(4)
        cfg = toy_config(gamma=0.4)
        params = init_params(cfg)
        batch = toy_batch(rng)
        trace = forward(batch, params, cfg)
        cls = 0.0
        for t, task in enumerate(("artist", "style", "genre")):
            per = [cross_entropy(trace.logits[task][j], batch[j].labels[t])
                   for j in range(4)]
            cls += cfg.task_weight(task) * sum(per) / 4
        mse = sum(mse_loss(trace.predicted_context[j], batch[j].context)
                  for j in range(4)) / 4
        expected = 0.6 * cls + 0.4 * mse
        assert total_loss(batch, trace, cfg) == pytest.approx(expected, rel=1e-10)

    def test_missing_context_rejected(self):
        rng = np.random.default_rng(5)
        cfg = toy_config()
        params = init_params(cfg)
        batch = toy_batch(rng, with_context=False)
        trace = forward(batch, params, cfg)
        with pytest.raises(ValidationError):
            total_loss(batch, trace, cfg)


class TestForward:
    def test_multimodal_head_input_width(self):
        cfg = ModelConfig(num_artists=2, num_styles=2, num_genres=2)
        assert cfg.head_input_dim == 2048 + 128
        params = init_params(cfg)
        assert params.heads["artist"].W.shape[1] == 2176

    def test_visual_only_ignores_context_table(self):
        rng = np.random.default_rng(6)
        cfg = toy_config(mode="visual_only")
        params = init_params(cfg)
        batch = toy_batch(rng)
        trace_a = forward(batch, params, cfg)
        for inst in batch:
            inst.context = None
        trace_b = forward(batch, params, cfg)
        for task in trace_a.logits:
            assert np.array_equal(trace_a.logits[task], trace_b.logits[task])

    def test_pure_function(self):
        rng = np.random.default_rng(7)
        cfg = toy_config()
        params = init_params(cfg)
        batch = toy_batch(rng, n=1)
        t1 = forward(batch, params, cfg)
        t2 = forward(batch, params, cfg)
        assert np.array_equal(t1.predicted_context, t2.predicted_context)
        for task in t1.logits:
            assert np.array_equal(t1.logits[task], t2.logits[task])

    def test_regularization_only_heads_on_visual(self):
        cfg = toy_config(mode="regularization_only")
        params = init_params(cfg)
        assert params.heads["artist"].W.shape[1] == 8
        assert params.encoder is not None


class TestBackward:
    @pytest.mark.parametrize("mode", ["multimodal", "regularization_only", "visual_only"])
    def test_matches_finite_differences(self, mode):
        for seed in (0, 1, 2):
            rng = np.random.default_rng(seed)
            cfg = toy_config(mode=mode, seed=seed)
            params = init_params(cfg)
            batch = toy_batch(rng)
            trace = forward(batch, params, cfg)
            grads = backward(batch, trace, params, cfg)
            fd = finite_difference_grads(batch, params, cfg)
            assert max_relative_error(grads, fd) <= 1e-4

    def test_gamma_one_regularization_only_head_grads_zero(self):
        rng = np.random.default_rng(8)
        cfg = toy_config(mode="regularization_only", gamma=1.0)
        params = init_params(cfg)
        batch = toy_batch(rng)
        trace = forward(batch, params, cfg)
        grads = backward(batch, trace, params, cfg)
        for task in ("artist", "style", "genre"):
            assert np.allclose(grads[f"head.{task}.W"], 0.0)
            assert np.allclose(grads[f"head.{task}.b"], 0.0)

    def test_gamma_zero_regularization_only_encoder_grads_zero(self):
        rng = np.random.default_rng(9)
        cfg = toy_config(mode="regularization_only", gamma=0.0)
        params = init_params(cfg)
        batch = toy_batch(rng)
        trace = forward(batch, params, cfg)
        grads = backward(batch, trace, params, cfg)
        for name in ("encoder.W1", "encoder.b1", "encoder.W2", "encoder.b2"):
            assert np.allclose(grads[name], 0.0)


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        cfg = toy_config()
        params = init_params(cfg)
        state = init_adam(params)
        before = {name: tensor.copy() for name, tensor in params.items()}
        zero = {name: np.zeros_like(tensor) for name, tensor in params.items()}
        adam_step(params, zero, state, cfg)
        assert state.t == 1
        for name, tensor in params.items():
            assert np.array_equal(tensor, before[name])

    def test_first_step_closed_form(self):
        # scalar parameter, constant gradient 1: bias-corrected update is
        # lr * 1 / (1 + eps)
        cfg = toy_config(learning_rate=0.01)
        params = init_params(cfg)
        state = init_adam(params)
        target = params.encoder.b1
        target[...] = 0.0
        grads = {name: np.zeros_like(t) for name, t in params.items()}
        grads["encoder.b1"] = np.ones_like(target)
        adam_step(params, grads, state, cfg)
        expected = -0.01 * 1.0 / (1.0 + cfg.epsilon)
        assert np.allclose(target, expected, rtol=1e-12)

    def test_two_runs_identical(self):
        rng = np.random.default_rng(10)
        batch = toy_batch(rng)
        cfg = toy_config(epochs=3, batch_size=2, seed=5)
        p1, _ = train(batch, cfg)
        p2, _ = train(batch, cfg)
        for (n1, t1), (n2, t2) in zip(p1.items(), p2.items()):
            assert n1 == n2
            assert np.array_equal(t1, t2)


class TestTrain:
    def test_loss_decreases_on_plantable_data(self):
        rng = np.random.default_rng(11)
        protos = rng.normal(size=(3, 8))
        batch = []
        for i in range(60):
            cls = i % 3
            batch.append(
                LabeledInstance(
                    i,
                    protos[cls] + 0.3 * rng.normal(size=8),
                    (cls, cls, cls),
                    rng.uniform(-0.5, 0.5, size=4),
                )
            )
        cfg = toy_config(epochs=8, learning_rate=1e-2, seed=0)
        _, log = train(batch, cfg)
        assert all(math.isfinite(entry.loss) for entry in log)
        assert log[-1].loss < log[0].loss

    def test_zero_epochs_returns_initialization(self):
        rng = np.random.default_rng(12)
        batch = toy_batch(rng)
        cfg = toy_config(epochs=0, seed=31)
        params, log = train(batch, cfg)
        fresh = init_params(cfg)
        assert log == []
        for (_, a), (_, b) in zip(params.items(), fresh.items()):
            assert np.array_equal(a, b)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError):
            train([], toy_config())

    def test_validation_accuracy_logged(self):
        rng = np.random.default_rng(13)
        batch = toy_batch(rng, n=8)
        cfg = toy_config(epochs=2, batch_size=4)
        _, log = train(batch, cfg, val_set=batch)
        assert all(set(e.val_accuracy) == {"artist", "style", "genre"} for e in log)


class TestPredict:
    def test_argmax(self):
        rng = np.random.default_rng(14)
        cfg = toy_config()
        params = init_params(cfg)
        inst = toy_batch(rng, n=1)[0]
        trace = forward([inst], params, cfg)
        expected = tuple(int(np.argmax(trace.logits[t][0])) for t in ("artist", "style", "genre"))
        assert predict(inst, params, cfg) == expected

    def test_tie_breaks_to_lowest_index(self):
        assert int(np.argmax(np.array([5.0, 5.0]))) == 0
        probs = softmax(np.array([3.0, 1.0, 2.0]))
        assert int(np.argmax(probs)) == 0

    def test_shift_invariance(self):
        rng = np.random.default_rng(15)
        cfg = toy_config()
        params = init_params(cfg)
        inst = toy_batch(rng, n=1)[0]
        base = predict(inst, params, cfg)
        for task in ("artist", "style", "genre"):
            params.heads[task].b += 100.0
        assert predict(inst, params, cfg) == base


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(16)
        batch = toy_batch(rng)
        cfg = toy_config(epochs=2, batch_size=2, seed=3)
        params, _ = train(batch, cfg)
        state = init_adam(params)
        state.t = 7
        vocab = {"artist": ["a", "b", "c"], "style": ["x", "y", "z"], "genre": ["g", "h", "i"]}
        path = tmp_path / "model.agck"
        save_checkpoint(path, params, cfg, state, vocab)
        bundle = load_checkpoint(path)
        assert bundle.config.to_dict() == cfg.to_dict()
        assert bundle.label_vocab == vocab
        assert bundle.adam_state.t == 7
        for (n1, t1), (n2, t2) in zip(params.items(), bundle.params.items()):
            assert n1 == n2 and np.array_equal(t1, t2)
        for name, _ in params.items():
            assert np.array_equal(bundle.adam_state.m[name], state.m[name])
            assert np.array_equal(bundle.adam_state.v[name], state.v[name])

    def test_corrupted_magic(self, tmp_path):
        path = tmp_path / "model.agck"
        cfg = toy_config()
        save_checkpoint(path, init_params(cfg), cfg)
        data = bytearray(path.read_bytes())
        data[0] = 0
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_config_mismatch_on_resume(self, tmp_path):
        path = tmp_path / "model.agck"
        cfg = toy_config(seed=1)
        save_checkpoint(path, init_params(cfg), cfg)
        other = toy_config(seed=2)
        with pytest.raises(ValidationError):
            load_checkpoint(path, expect_config=other)

    def test_truncated_tensor(self, tmp_path):
        path = tmp_path / "model.agck"
        cfg = toy_config()
        save_checkpoint(path, init_params(cfg), cfg)
        data = path.read_bytes()
        path.write_bytes(data[:-11])
        with pytest.raises(FormatError):
            load_checkpoint(path)


class TestModelConfigValidation:
    def test_bad_values(self):
        for kwargs in (
            {"gamma": 1.5},
            {"gamma": -0.1},
            {"lambda_style": -1.0},
            {"mode": "bogus"},
            {"visual_dim": 0},
            {"num_artists": 0},
        ):
            with pytest.raises(ValidationError):
                toy_config(**kwargs).validate()
