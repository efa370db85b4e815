import numpy as np
import pytest

from wearnet.layers import BatchNorm2d, Conv2d, Dense, Module, named_arrays
from wearnet.tensor import Tensor


class Pair(Module):
    def __init__(self, rng):
        self.conv = Conv2d(3, 4, 3, rng, padding=1)
        self.norms = [BatchNorm2d(4), BatchNorm2d(4)]
        self.dense = Dense(4, 2, rng)
        self.scale = 2.0


@pytest.fixture
def pair():
    return Pair(np.random.default_rng(0))


def test_named_parameters_follow_attribute_order(pair):
    names = [name for name, _ in pair.named_parameters()]
    assert names == [
        "conv.kernel",
        "conv.bias",
        "norms.0.gamma",
        "norms.0.beta",
        "norms.1.gamma",
        "norms.1.beta",
        "dense.weights",
        "dense.bias",
    ]
    assert all(p.requires_grad for p in pair.parameters())


def test_named_buffers_and_set_buffer(pair):
    assert [name for name, _ in pair.named_buffers()] == [
        "norms.0.running_mean",
        "norms.0.running_var",
        "norms.1.running_mean",
        "norms.1.running_var",
    ]
    pair.set_buffer("norms.1.running_var", np.full(4, 3.0))
    np.testing.assert_array_equal(pair.norms[1].state.running_var, np.full(4, 3.0))
    assert pair.norms[1].state.running_var.dtype == np.float32
    with pytest.raises(KeyError):
        pair.norms[0].set_buffer("momentum", np.zeros(4))


def test_named_arrays_holds_parameters_then_buffers(pair):
    names = list(named_arrays(pair))
    assert names[:8] == [name for name, _ in pair.named_parameters()]
    assert names[8:] == [name for name, _ in pair.named_buffers()]


def test_train_and_eval_reach_every_module(pair):
    pair.eval()
    assert not any(module.training for module in pair.modules())
    pair.train()
    assert all(module.training for module in pair.modules())
    assert len(list(pair.modules())) == 5


def test_conv2d_layer():
    rng = np.random.default_rng(1)
    conv = Conv2d(3, 8, 3, rng, stride=2, padding=1, bias=False)
    assert conv.bias is None
    assert conv.out_channels == 8
    assert conv.output_size(224, 224) == (112, 112)
    assert conv(Tensor(np.zeros((1, 3, 9, 9)))).shape == (1, 8, 5, 5)
    zero = Conv2d(3, 2, 3, rng, zero_init=True)
    assert not zero.kernel.data.any()


def test_he_initialisation_scale():
    conv = Conv2d(64, 64, 3, np.random.default_rng(2))
    assert conv.kernel.data.std() == pytest.approx(np.sqrt(2.0 / (64 * 9)), rel=0.05)
    dense = Dense(10, 3, np.random.default_rng(3), std=0.01)
    assert dense.weights.data.std() < 0.05
    assert not dense.bias.data.any()
