import json
import math

import numpy as np
import pytest

from conftest import central_difference, relative_gradient_error
from symbolic_mlp.mlp import (
    Activation,
    MlpArchitecture,
    activation_apply,
    architecture_from_dict,
    architecture_to_dict,
    backward,
    count_weights,
    forward,
    model_from_dict,
    model_to_dict,
    outputs,
    single_hidden,
)
from symbolic_mlp.recoding import BlockKind, OutputBlockSpec
from symbolic_mlp.symbolic import SchemaError

LINEAR = OutputBlockSpec("y", 0, 1, BlockKind.LINEAR_QUADRATIC)


def scalar_net(n, h):
    return single_hidden(n, h, (LINEAR,))


class TestActivations:
    def test_softmax_symmetry(self):
        np.testing.assert_allclose(
            activation_apply(Activation.SOFTMAX, np.zeros(3)), np.full(3, 1 / 3)
        )

    def test_softmax_known_value(self):
        np.testing.assert_allclose(
            activation_apply(Activation.SOFTMAX, np.array([math.log(2), 0.0])),
            [2 / 3, 1 / 3],
        )

    def test_logistic_midpoint(self):
        assert activation_apply(Activation.LOGISTIC, np.array([0.0]))[0] == 0.5

    def test_softmax_components_and_sum(self, rng):
        u = rng.normal(scale=5.0, size=(40, 7))
        t = activation_apply(Activation.SOFTMAX, u)
        assert np.all(t > 0) and np.all(t < 1)
        np.testing.assert_allclose(t.sum(axis=1), 1.0, atol=1e-12)

    def test_softmax_shift_invariance(self, rng):
        u = rng.normal(size=9)
        np.testing.assert_allclose(
            activation_apply(Activation.SOFTMAX, u),
            activation_apply(Activation.SOFTMAX, u + 123.456),
            atol=1e-12,
        )

    def test_softmax_overflow_safe(self):
        t = activation_apply(Activation.SOFTMAX, np.array([1000.0, 0.0]))
        assert np.isfinite(t).all() and t[0] > 0.999

    def test_exponential_cap_warns(self):
        with pytest.warns(RuntimeWarning, match="capped"):
            out = activation_apply(Activation.EXPONENTIAL, np.array([100.0]))
        assert out[0] == math.exp(30.0)


class TestArchitecture:
    def test_count_weights_single_hidden_pairs(self):
        # (input_dim, hidden sizes of the two per-coordinate nets) -> total
        table = {
            (24, (3, 30)): 860,
            (2, (30, 17)): 190,
            (4, (20, 25)): 272,
            (4, (25, 40)): 392,
        }
        for (n, sizes), expected in table.items():
            total = sum(count_weights(scalar_net(n, h)) for h in sizes)
            assert total == expected

    def test_count_matches_allocated_length(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 8))
            hidden = tuple(
                (int(rng.integers(1, 6)), Activation.TANH)
                for _ in range(rng.integers(1, 3))
            )
            p = int(rng.integers(1, 4))
            arch = MlpArchitecture(
                n, hidden, (OutputBlockSpec("y", 0, p, BlockKind.LINEAR_QUADRATIC),)
            )
            assert count_weights(arch) == arch.init_weights(rng).size

    def test_flat_index_covers_all_positions(self):
        arch = scalar_net(3, 2)
        seen = set()
        for layer, (fan_out, fan_in) in enumerate(arch.layer_shapes()):
            for neuron in range(fan_out):
                seen.add(arch.flat_index(layer, neuron, None))
                for j in range(fan_in):
                    seen.add(arch.flat_index(layer, neuron, j))
        assert seen == set(range(arch.n_weights))

    def test_blocks_must_tile(self):
        with pytest.raises(SchemaError):
            MlpArchitecture(
                2,
                ((2, Activation.TANH),),
                (OutputBlockSpec("y", 1, 2, BlockKind.LINEAR_QUADRATIC),),
            )

    def test_bias_mask_counts(self):
        arch = scalar_net(4, 3)
        assert arch.bias_mask().sum() == 3 + 1  # one bias per neuron


class TestForward:
    def test_zero_weights_identity_output(self):
        arch = scalar_net(3, 2)
        w = np.zeros(arch.n_weights)
        assert outputs(arch, w, np.array([1.0, -2.0, 0.5]))[0] == 0.0

    def test_single_logistic_neuron_zero_weights(self):
        arch = MlpArchitecture(
            2,
            (),
            (OutputBlockSpec("y", 0, 1, BlockKind.LOGISTIC_INDEPENDENT),),
        )
        w = np.zeros(arch.n_weights)
        assert outputs(arch, w, np.array([3.0, -5.0]))[0] == 0.5

    def test_two_layer_hand_computation(self):
        # 2-1-1 net, tanh hidden, identity output, evaluated against the
        # written-out composition.
        arch = scalar_net(2, 1)
        w = np.zeros(arch.n_weights)
        w[arch.flat_index(0, 0, 0)] = 0.2
        w[arch.flat_index(0, 0, 1)] = -0.3
        w[arch.flat_index(0, 0, None)] = 0.1
        w[arch.flat_index(1, 0, 0)] = 0.4
        w[arch.flat_index(1, 0, None)] = 0.05
        x = np.array([1.0, 2.0])
        expected = 0.05 + 0.4 * math.tanh(0.1 + 0.2 * 1.0 - 0.3 * 2.0)
        assert outputs(arch, w, x)[0] == pytest.approx(expected, abs=1e-15)

    def test_batch_matches_single(self, rng):
        arch = scalar_net(3, 4)
        w = arch.init_weights(rng)
        X = rng.normal(size=(5, 3))
        batch = outputs(arch, w, X)
        singles = np.array([outputs(arch, w, x) for x in X])
        # batch matmul may reorder the reduction, so allow rounding slack
        np.testing.assert_allclose(batch, singles, rtol=0, atol=1e-14)

    def test_dimension_mismatch(self):
        arch = scalar_net(3, 2)
        with pytest.raises(SchemaError, match="expected 3 inputs"):
            forward(arch, np.zeros(arch.n_weights), np.zeros(4))

    def test_forward_is_pure(self, rng):
        arch = scalar_net(2, 2)
        w = arch.init_weights(rng)
        x = rng.normal(size=2)
        first = outputs(arch, w, x)
        np.testing.assert_array_equal(first, outputs(arch, w, x))


def random_mixed_arch(rng):
    blocks = (
        OutputBlockSpec("q", 0, 1, BlockKind.LINEAR_QUADRATIC),
        OutputBlockSpec("iv", 1, 3, BlockKind.INTERVAL_MEAN_LENGTH),
        OutputBlockSpec("il", 3, 5, BlockKind.INTERVAL_MEAN_LOG_LENGTH),
        OutputBlockSpec("c", 5, 8, BlockKind.SOFTMAX_CROSS_ENTROPY),
        OutputBlockSpec("s", 8, 10, BlockKind.LOGISTIC_INDEPENDENT),
        OutputBlockSpec("m", 10, 12, BlockKind.MODAL_SOFTMAX),
    )
    hidden_activation = (Activation.TANH, Activation.LOGISTIC)[rng.integers(2)]
    return MlpArchitecture(
        int(rng.integers(2, 5)),
        ((int(rng.integers(2, 5)), hidden_activation),),
        blocks,
    )


class TestBackward:
    def test_zero_output_gradient(self, rng):
        arch = random_mixed_arch(rng)
        w = arch.init_weights(rng)
        trace = forward(arch, w, rng.normal(size=arch.input_dim))
        grad = backward(arch, w, trace, np.zeros(arch.output_dim))
        np.testing.assert_array_equal(grad, np.zeros(arch.n_weights))

    def test_single_linear_neuron_quadratic(self):
        # loss (w*x + b - y)^2 at x=1, y=0, b=0, w=1: d/db = d/dw = 2
        arch = MlpArchitecture(
            1, (), (OutputBlockSpec("y", 0, 1, BlockKind.LINEAR_QUADRATIC),)
        )
        w = np.array([1.0, 0.0])  # weight, bias
        trace = forward(arch, w, np.array([1.0]))
        grad = backward(arch, w, trace, np.array([2.0 * trace.outputs[0]]))
        np.testing.assert_array_equal(grad, [2.0, 2.0])

    def test_matches_finite_differences_mixed_blocks(self, rng):
        for _ in range(10):
            arch = random_mixed_arch(rng)
            w = arch.init_weights(rng)
            x = rng.normal(size=arch.input_dim)
            y = rng.normal(size=arch.output_dim)

            def loss(weights):
                t = outputs(arch, weights, x)
                return float(np.sum((t - y) ** 2))

            trace = forward(arch, w, x)
            analytic = backward(arch, w, trace, 2.0 * (trace.outputs - y))
            numeric = central_difference(loss, w)
            assert relative_gradient_error(analytic, numeric) < 1e-5

    def test_batch_gradient_is_sum_of_singles(self, rng):
        arch = random_mixed_arch(rng)
        w = arch.init_weights(rng)
        X = rng.normal(size=(4, arch.input_dim))
        G = rng.normal(size=(4, arch.output_dim))
        batch = backward(arch, w, forward(arch, w, X), G)
        summed = sum(
            backward(arch, w, forward(arch, w, x), g) for x, g in zip(X, G)
        )
        np.testing.assert_allclose(batch, summed, atol=1e-12)

    def test_shape_mismatch(self, rng):
        arch = scalar_net(2, 2)
        w = arch.init_weights(rng)
        trace = forward(arch, w, np.zeros(2))
        with pytest.raises(SchemaError):
            backward(arch, w, trace, np.zeros(3))


class TestSerialization:
    def test_architecture_roundtrip(self, rng):
        arch = random_mixed_arch(rng)
        assert architecture_from_dict(architecture_to_dict(arch)) == arch

    def test_weights_bit_exact_through_json(self, rng):
        arch = scalar_net(3, 4)
        w = arch.init_weights(rng) * 1e-7 + np.pi  # awkward magnitudes
        payload = json.dumps(model_to_dict(arch, w))
        _, back = model_from_dict(json.loads(payload))
        assert np.array_equal(back, w)  # bit-exact, not merely close
