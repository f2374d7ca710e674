import itertools

import numpy as np
import pytest

from lineagekg.paths import PathSample
from lineagekg.siamese import (
    ModelConfig,
    ModelError,
    Parameters,
    backward,
    bce_loss,
    forward,
    init_parameters,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)


def tiny_config(seed=0, **overrides):
    base = dict(vocab_size=8, num_relations=4, embed_dim=4, hidden_dim=4,
                layers=1, fusion_dim=6, seed=seed)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_sample(relation=2, label=1):
    return PathSample(paths=((2, 3, 4, 0, 0), (5, 2, 0, 0, 0), (1, 0, 0, 0, 0)),
                      relation=relation, label=label)


def numeric_grads(params, sample, label, eps=1e-4):
    """Oracle: central finite differences over every parameter coordinate."""
    out = {}
    for name, arr in params.arrays.items():
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        grad_flat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            loss_plus = bce_loss(forward(params, sample)[0], label)
            flat[i] = orig - eps
            loss_minus = bce_loss(forward(params, sample)[0], label)
            flat[i] = orig
            grad_flat[i] = (loss_plus - loss_minus) / (2 * eps)
        out[name] = grad
    return out


def max_relative_error(analytic, numeric):
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        diff = np.abs(a - n)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        rel = diff / denom
        rel[diff < 1e-9] = 0.0
        worst = max(worst, float(rel.max()))
    return worst


class TestForward:
    def test_output_in_open_unit_interval(self):
        params = init_parameters(tiny_config())
        prob, _ = forward(params, tiny_sample())
        assert 0.0 < prob < 1.0

    def test_identical_paths_permutation_invariant(self):
        params = init_parameters(tiny_config())
        path = (2, 3, 0, 0)
        sample = PathSample(paths=(path, path, path), relation=1, label=1)
        base, _ = forward(params, sample)
        for perm in itertools.permutations((path, path, path)):
            prob, _ = forward(params, PathSample(paths=perm, relation=1, label=1))
            assert prob == base

    def test_zero_fusion_scores_exactly_half(self):
        params = init_parameters(tiny_config())
        params.arrays["fusion_W"][:] = 0.0
        params.arrays["fusion_b"][:] = 0.0
        prob, cache = forward(params, tiny_sample())
        assert prob == 0.5
        assert cache.p_norm == 0.0

    def test_zero_relation_embedding_scores_exactly_half(self):
        params = init_parameters(tiny_config())
        params.arrays["rel_emb"][2][:] = 0.0
        prob, _ = forward(params, tiny_sample(relation=2))
        assert prob == 0.5

    def test_token_out_of_range(self):
        params = init_parameters(tiny_config())
        bad = PathSample(paths=((99, 0), (1, 0), (1, 0)), relation=0, label=1)
        with pytest.raises(ModelError, match="token id"):
            forward(params, bad)

    def test_relation_out_of_range(self):
        params = init_parameters(tiny_config())
        with pytest.raises(ModelError, match="relation id"):
            forward(params, tiny_sample(relation=17))

    def test_extra_padding_never_changes_score(self):
        params = init_parameters(tiny_config(layers=2))
        short = PathSample(paths=((2, 3), (5,), (1,)), relation=1, label=1)
        long = PathSample(
            paths=((2, 3, 0, 0, 0, 0, 0), (5, 0, 0, 0, 0, 0, 0),
                   (1, 0, 0, 0, 0, 0, 0)),
            relation=1, label=1)
        a, _ = forward(params, short)
        b, _ = forward(params, long)
        assert a == pytest.approx(b, abs=0, rel=0)

    def test_weight_sharing_single_tensor_set(self):
        cfg = tiny_config(layers=2)
        params = init_parameters(cfg)
        lstm_names = [n for n in params.arrays if n.startswith("lstm")]
        # one W/U/b per layer and direction; nothing per-branch
        assert len(lstm_names) == cfg.layers * 2 * 3


class TestBackward:
    def test_unused_vocab_rows_zero_grad(self):
        params = init_parameters(tiny_config())
        sample = tiny_sample()
        _, cache = forward(params, sample)
        grads = backward(params, cache, 1)
        used = {t for path in sample.paths for t in path}
        for row in range(params.cfg.vocab_size):
            if row not in used:
                assert np.all(grads["token_emb"][row] == 0.0)

    def test_pad_embedding_zero_grad(self):
        params = init_parameters(tiny_config())
        _, cache = forward(params, tiny_sample())
        grads = backward(params, cache, 1)
        assert np.all(grads["token_emb"][0] == 0.0)

    def test_unused_relation_rows_zero_grad(self):
        params = init_parameters(tiny_config())
        _, cache = forward(params, tiny_sample(relation=2))
        grads = backward(params, cache, 0)
        for row in range(params.cfg.num_relations):
            if row != 2:
                assert np.all(grads["rel_emb"][row] == 0.0)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_matches_finite_differences(self, seed):
        params = init_parameters(tiny_config(seed=seed))
        sample = tiny_sample(relation=seed % 4, label=seed % 2)
        _, cache = forward(params, sample)
        analytic = backward(params, cache, sample.label)
        numeric = numeric_grads(params, sample, sample.label)
        assert max_relative_error(analytic, numeric) <= 1e-3

    def test_two_layer_gradients(self):
        params = init_parameters(tiny_config(seed=9, layers=2))
        sample = tiny_sample()
        _, cache = forward(params, sample)
        analytic = backward(params, cache, 1)
        numeric = numeric_grads(params, sample, 1)
        assert max_relative_error(analytic, numeric) <= 1e-3


class TestTrain:
    def test_overfit_single_sample_loss_decreases(self):
        cfg = tiny_config(epochs=1, seed=1)
        params = init_parameters(cfg)
        stream = [tiny_sample()] * (32 * 12)
        result = train(params, stream, cfg)
        first_ten = result.step_losses[:10]
        assert all(b < a for a, b in zip(first_ten, first_ten[1:]))

    def test_zero_learning_rate_keeps_params(self):
        cfg = tiny_config(learning_rate=0.0, epochs=1)
        params = init_parameters(cfg)
        before = {k: v.copy() for k, v in params.arrays.items()}
        result = train(params, [tiny_sample()] * 40, cfg)
        for name, array in params.arrays.items():
            assert np.array_equal(array, before[name])
        assert len(set(round(x, 12) for x in result.step_losses)) == 1

    def test_training_deterministic(self):
        samples = [tiny_sample(relation=i % 4, label=i % 2) for i in range(64)]
        finals = []
        for _ in range(2):
            cfg = tiny_config(epochs=2, seed=5)
            params = init_parameters(cfg)
            train(params, samples, cfg)
            finals.append({k: v.copy() for k, v in params.arrays.items()})
        for name in finals[0]:
            assert np.array_equal(finals[0][name], finals[1][name])

    def test_params_stay_finite(self):
        cfg = tiny_config(epochs=2, seed=2)
        params = init_parameters(cfg)
        samples = [tiny_sample(relation=i % 4, label=i % 2) for i in range(96)]
        train(params, samples, cfg)
        assert params.all_finite()

    def test_empty_stream_rejected(self):
        cfg = tiny_config()
        with pytest.raises(ModelError):
            train(init_parameters(cfg), [], cfg)


class TestPredict:
    def test_empty_list(self):
        params = init_parameters(tiny_config())
        assert predict(params, []) == []

    def test_reproducible(self):
        params = init_parameters(tiny_config())
        samples = [tiny_sample(relation=i % 4) for i in range(10)]
        assert predict(params, samples) == predict(params, samples)

    def test_order_preserved(self):
        params = init_parameters(tiny_config())
        samples = [tiny_sample(relation=i % 4) for i in range(6)]
        scores = predict(params, samples)
        for i, sample in enumerate(samples):
            assert scores[i] == forward(params, sample)[0]


class TestCheckpoint:
    def test_bitwise_round_trip(self, tmp_path):
        params = init_parameters(tiny_config(seed=8, layers=2))
        path = tmp_path / "model.bin"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.cfg == params.cfg
        for name in params.arrays:
            assert loaded.arrays[name].dtype == np.float64
            assert np.array_equal(loaded.arrays[name], params.arrays[name])
        # byte-for-byte stable re-save
        path2 = tmp_path / "model2.bin"
        save_checkpoint(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a checkpoint\n")
        with pytest.raises(ModelError, match="magic"):
            load_checkpoint(path)
