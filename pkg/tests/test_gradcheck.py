import numpy as np
import pytest

from wearnet import functional as F
from wearnet.blocks import BottleneckUnit, ClassificationHead, build_attention_input
from wearnet.gradcheck import finite_diff_check, relative_error
from wearnet.layers import BatchNorm2d, Conv2d, Dense
from wearnet.models import ModelConfig
from wearnet.network import assemble_backbone
from wearnet.tensor import Tensor, checking_mode
from wearnet.utils import NonDeterministicError, ShapeError

TOLERANCE = 1e-4
# a smaller step keeps perturbations from crossing relu kinks
KINK_EPS = 1e-6


def weighted_sum(rng, shape):
    """Loss `sum(w * out)` with fixed random weights, so every output element matters."""
    weights = Tensor(rng.normal(size=shape))
    return lambda out: F.sum(F.mul(out, weights))


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([0.0]))[0] == 0.0
    assert relative_error(np.array([1.0]), np.array([1.0]))[0] == 0.0
    assert relative_error(np.array([1.0]), np.array([3.0]))[0] == pytest.approx(0.5)


def test_dense_gradients():
    rng = np.random.default_rng(0)
    with checking_mode():
        x = Tensor(rng.normal(size=(4, 5)))
        layer = Dense(5, 3, rng)
        loss = weighted_sum(rng, (4, 3))
        error = finite_diff_check(lambda x, *params: loss(layer(x)), [x, *layer.parameters()])
    assert error <= TOLERANCE


def test_conv_gradients():
    rng = np.random.default_rng(1)
    with checking_mode():
        x = Tensor(rng.normal(size=(2, 3, 6, 5)))
        conv = Conv2d(3, 4, 3, rng, stride=2, padding=1)
        conv.bias.assign(rng.normal(size=4))
        loss = weighted_sum(rng, (2, 4, 3, 3))
        error = finite_diff_check(lambda x, *params: loss(conv(x)), [x, *conv.parameters()])
    assert error <= TOLERANCE


def test_conv_relu_pool_chain_gradients():
    rng = np.random.default_rng(2)
    with checking_mode():
        x = Tensor(rng.normal(size=(2, 2, 5, 5)))
        conv = Conv2d(2, 3, 3, rng, padding=1)
        loss = weighted_sum(rng, (2, 3))
        error = finite_diff_check(
            lambda x, *params: loss(F.global_avg_pool(F.relu(conv(x)))),
            [x, *conv.parameters()],
            eps=KINK_EPS,
        )
    assert error <= TOLERANCE


@pytest.mark.parametrize("training", [True, False])
def test_norm_gradients(training):
    rng = np.random.default_rng(3)
    with checking_mode():
        x = Tensor(rng.normal(1.0, 2.0, size=(3, 2, 3, 3)))
        norm = BatchNorm2d(2).train(training)
        norm.gamma.assign(rng.uniform(0.5, 1.5, size=2))
        loss = weighted_sum(rng, (3, 2, 3, 3))
        error = finite_diff_check(lambda x, *params: loss(norm(x)), [x, *norm.parameters()])
    assert error <= TOLERANCE


def test_head_gradients():
    rng = np.random.default_rng(4)
    with checking_mode():
        features = Tensor(rng.normal(size=(3, 6)))
        head = ClassificationHead(6, [5], 0.5, rng).eval()
        labels = np.array([1, 0, 1])
        error = finite_diff_check(
            lambda features, *params: F.bce_loss(head(features), labels),
            [features, *head.parameters()],
            eps=KINK_EPS,
        )
    assert error <= TOLERANCE


def test_plain_bottleneck_gradients():
    rng = np.random.default_rng(5)
    with checking_mode():
        x = Tensor(rng.normal(size=(2, 4, 4, 4)))
        unit = BottleneckUnit(4, 2, 2, stride=2, input_hw=(4, 4), rng=rng)
        assert unit.shortcut is not None and unit.attention is None
        loss = weighted_sum(rng, (2, 4, 2, 2))
        error = finite_diff_check(lambda x, *params: loss(unit(x)), [x, *unit.parameters()], eps=KINK_EPS)
    assert error <= TOLERANCE


def test_attention_bottleneck_gradients():
    rng = np.random.default_rng(6)
    s_mask = np.zeros((2, 8, 8), dtype=bool)
    o_mask = np.zeros((2, 8, 8), dtype=bool)
    s_mask[:, 1:7, 2:6] = True
    o_mask[:, 2:5, 2:6] = True
    o_mask[1, 6:8, 0:3] = True
    with checking_mode():
        att = build_attention_input(s_mask, o_mask)
        x = Tensor(rng.normal(size=(2, 4, 4, 4)))
        # eval mode: a train-mode norm after the injection would cancel the attention bias
        unit = BottleneckUnit(4, 2, 2, stride=1, input_hw=(4, 4), rng=rng, attach_attention=True).eval()
        unit.attention.conv.bias.assign(rng.normal(size=2))
        params = unit.parameters()
        assert unit.attention.conv.kernel in params
        loss = weighted_sum(rng, (2, 4, 4, 4))
        error = finite_diff_check(lambda x, *params: loss(unit(x, att)), [x, *params], eps=KINK_EPS)
    assert error <= TOLERANCE


def test_mini_backbone_gradients():
    rng = np.random.default_rng(9)
    config = ModelConfig(layout=[1, 1], base_width=2, expansion=2, stem_channels=4, input_size=8, head_widths=[4])
    s_mask = np.zeros((2, 8, 8), dtype=bool)
    o_mask = np.zeros((2, 8, 8), dtype=bool)
    s_mask[:, 1:8, 2:6] = True
    o_mask[0, 2:5, 2:6] = True
    o_mask[1, 0:3, 5:8] = True
    with checking_mode():
        att = build_attention_input(s_mask, o_mask)
        backbone = assemble_backbone(config, seed=3).eval()
        assert backbone.attention_unit_count == 2
        # nonzero shifts move relu inputs off zero, where finite differences straddle the kink
        for module in backbone.modules():
            if isinstance(module, BatchNorm2d):
                module.gamma.assign(rng.uniform(0.5, 1.5, size=module.gamma.shape))
                module.beta.assign(rng.normal(size=module.beta.shape))
            elif isinstance(module, Conv2d) and module.bias is not None:
                module.bias.assign(rng.normal(size=module.bias.shape))
        params = backbone.parameters()
        names = [name for name, _ in backbone.named_parameters()]
        assert sum("attention" in name for name in names) >= 2
        x = Tensor(rng.normal(size=(2, 3, 8, 8)))
        loss = weighted_sum(rng, (2, backbone.out_channels, *backbone.output_hw))
        error = finite_diff_check(lambda x, *params: loss(backbone(x, att)), [x, *params], eps=KINK_EPS)
    assert error <= TOLERANCE


def test_values_are_restored_after_check():
    rng = np.random.default_rng(7)
    with checking_mode():
        x = Tensor(rng.normal(size=(3, 2)))
        before = x.numpy()
        finite_diff_check(lambda x: F.sum(F.mul(x, x)), x)
    np.testing.assert_array_equal(x.data, before)
    assert not x.requires_grad


def test_nondeterministic_function_is_rejected():
    rng = np.random.default_rng(8)
    with checking_mode():
        x = Tensor(rng.normal(size=(2, 3)))
        noisy = lambda x: F.sum(F.dropout(x, 0.5, training=True, rng=rng))
        with pytest.raises(NonDeterministicError):
            finite_diff_check(noisy, x)


def test_32_bit_points_are_rejected():
    with pytest.raises(ShapeError, match="64-bit"):
        finite_diff_check(lambda x: F.sum(x), Tensor([1.0, 2.0]))
