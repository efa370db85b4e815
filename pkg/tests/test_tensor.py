import numpy as np
import pytest

from wearnet import functional as F
from wearnet.tensor import Tape, Tensor, checking_mode, default_dtype, no_grad, reverse_pass
from wearnet.utils import ShapeError, TapeError


def test_default_precision_and_checking_mode():
    assert Tensor([1.0, 2.0]).dtype == np.float32
    with checking_mode():
        assert default_dtype() is np.float64
        assert Tensor([1.0]).dtype == np.float64
    assert default_dtype() is np.float32


def test_tensor_values_are_read_only():
    t = Tensor(np.ones((2, 2)))
    with pytest.raises(ValueError):
        t.data[0, 0] = 5.0


def test_source_array_is_copied():
    source = np.zeros(3)
    t = Tensor(source)
    source[0] = 1.0
    assert t.data[0] == 0.0


def test_zero_extent_is_rejected():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((0, 3)))


def test_assign_replaces_values_with_same_shape():
    t = Tensor(np.zeros((2, 3)), requires_grad=True, name="w")
    t.assign(np.ones((2, 3)))
    assert t.data.sum() == 6
    assert t.dtype == np.float32
    with pytest.raises(ShapeError, match="w"):
        t.assign(np.ones((3, 2)))


def test_item_needs_single_element():
    assert Tensor([[2.5]]).item() == 2.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()


def test_reverse_pass_product_rule():
    with checking_mode():
        a = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        b = Tensor([4.0, 5.0, 6.0], requires_grad=True)
        with Tape() as tape:
            loss = F.sum(F.mul(a, b))
        grads = reverse_pass(tape, loss)
    np.testing.assert_array_equal(grads[a], [4.0, 5.0, 6.0])
    np.testing.assert_array_equal(grads[b], [1.0, 2.0, 3.0])


def test_reused_tensor_accumulates_gradient():
    a = Tensor([1.0, -2.0], requires_grad=True)
    with Tape() as tape:
        loss = F.sum(F.add(F.mul(a, a), a))
    grads = reverse_pass(tape, loss)
    np.testing.assert_allclose(grads[a], [3.0, -3.0])


def test_operator_sugar_records_on_tape():
    a = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        loss = (a * 3.0).sum()
    grads = reverse_pass(tape, loss)
    np.testing.assert_array_equal(grads[a], [3.0, 3.0])
    assert [node.op for node in tape] == ["scale", "sum"]


def test_leaf_outside_loss_gets_zero_gradient():
    a = Tensor([1.0, 2.0], requires_grad=True)
    c = Tensor([3.0, 4.0], requires_grad=True)
    with Tape() as tape:
        loss = F.sum(a)
        F.relu(c)
    grads = reverse_pass(tape, loss)
    np.testing.assert_array_equal(grads[c], np.zeros(2))


def test_multiplying_by_zero_cuts_the_gradient():
    a = Tensor([1.0, -2.0, 5.0], requires_grad=True)
    b = Tensor([0.5, 0.5, 0.5], requires_grad=True)
    with Tape() as tape:
        loss = F.sum(F.add(F.mul(a, 0.0), b))
    grads = reverse_pass(tape, loss)
    np.testing.assert_array_equal(grads[a], np.zeros(3))
    np.testing.assert_array_equal(grads[b], np.ones(3))


def test_sigmoid_gradient_at_zero():
    x = Tensor([0.0], requires_grad=True)
    with Tape() as tape:
        loss = F.sum(F.sigmoid(x))
    assert loss.item() == 0.5
    assert reverse_pass(tape, loss)[x][0] == pytest.approx(0.25)


def test_constant_inputs_are_not_recorded():
    with Tape() as tape:
        F.relu(Tensor([1.0, -1.0]))
    assert len(tape) == 0


def test_loss_must_be_recorded_on_the_tape():
    a = Tensor([1.0], requires_grad=True)
    with Tape() as tape:
        pass
    loss = F.sum(a)
    with pytest.raises(TapeError):
        reverse_pass(tape, loss)


def test_loss_must_be_scalar():
    a = Tensor([1.0, -1.0], requires_grad=True)
    with Tape() as tape:
        out = F.relu(a)
    with pytest.raises(TapeError, match="scalar"):
        reverse_pass(tape, out)


def test_no_grad_records_nothing():
    a = Tensor([1.0], requires_grad=True)
    with Tape() as tape, no_grad():
        out = F.relu(a)
    assert len(tape) == 0
    assert not out.requires_grad


def test_tape_leaves_are_unrecorded_inputs():
    a = Tensor([1.0, 2.0], requires_grad=True)
    b = Tensor([1.0, 1.0], requires_grad=True)
    with Tape() as tape:
        hidden = F.add(a, b)
        F.sum(F.relu(hidden))
    assert tape.leaves() == [a, b]
    assert tape.index_of(hidden) == 0
