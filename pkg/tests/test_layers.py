#!/usr/bin/env python3
"""
Test Script for layers.py - Tests network specs, presets, forward passes and persistence

Usage: python3 tests/test_layers.py
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

# Add parent directory to import modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from activations import CombinedActivation, ConstraintError, HullKind  # noqa: E402
from autodiff import ShapeError  # noqa: E402
from layers import (  # noqa: E402
    LabelError,
    Network,
    NetworkError,
    NetworkSpec,
    NetworkSpecError,
    build,
    conv2d,
    dense,
    dropout,
    flatten,
    forward_train,
    loss_softmax_xent,
    maxpool,
    preset,
)


def small_spec(activation="aff{id,relu,tanh}"):
    return NetworkSpec(
        input_shape=(1, 6, 6),
        layers=[
            conv2d(2, 3, activation),
            maxpool(2),
            flatten(),
            dense(5, activation),
            dense(3, "softmax"),
        ],
        num_classes=3,
    )


def test_preset_shapes():
    """Test LeNet and KerasNet-mini layer shapes on 28x28 inputs"""
    print("=== Testing Preset Shapes ===")

    lenet = preset("lenet", "relu")
    shapes = lenet.output_shapes()
    assert shapes[0] == (20, 24, 24)
    assert shapes[2] == (50, 8, 8)
    assert shapes[4] == (800,)
    assert shapes[-1] == (10,)
    print("✅ lenet: 20c5 -> pool -> 50c5 -> pool -> 500 -> 10")

    keras = preset("kerasnet-mini", "conv{id,relu}")
    assert keras.output_shapes()[-1] == (10,)
    assert len(keras.hidden_activations()) == 5
    print("✅ kerasnet-mini: five hidden activations")

    tiny = preset("tiny", "tanh", input_shape=(1, 8, 8), num_classes=3)
    assert tiny.output_shapes()[-1] == (3,)
    print("✅ tiny adapts to 8x8 inputs and 3 classes")


def test_preset_activation_lists():
    """Test per-layer activation lists and bad preset names"""
    print("\n=== Testing Preset Activation Lists ===")

    spec = preset("lenet", ["relu", "aff{id,relu}", "tanh"])
    assert spec.hidden_activations() == ["relu", "aff{id,relu}", "tanh"]
    print("✅ One activation per hidden layer")

    for name, activation in (("lenet", ["relu", "tanh"]), ("resnet", "relu")):
        try:
            preset(name, activation)
            assert False, f"{name} / {activation} accepted"
        except ValueError:
            pass
    print("✅ Wrong list length and unknown preset rejected")


def test_spec_validation():
    """Test that misfit layers are reported with their index"""
    print("\n=== Testing Spec Validation ===")

    cases = [
        ([conv2d(2, 7, "relu"), flatten(), dense(3, "softmax")], 0),
        ([flatten(), dense(4, "sigmoid"), dense(3, "softmax")], 1),
        ([conv2d(2, 3, "relu"), dense(3, "softmax")], 1),
        ([flatten(), dense(4, "relu")], 1),
        ([flatten(), dense(4, "softmax")], 1),
    ]
    for layers, index in cases:
        spec = NetworkSpec((1, 6, 6), layers, num_classes=3)
        try:
            spec.validate()
            assert False, f"invalid spec accepted: {layers}"
        except NetworkSpecError as e:
            assert e.layer_index == index, f"expected layer {index}, got {e.layer_index}"
    print("✅ Kernel too large, bad activation, missing flatten and bad head rejected")


def test_build_is_deterministic():
    """Test seeded initialization and coefficient sharing"""
    print("\n=== Testing Build ===")

    a = build(small_spec(), seed=7)
    b = build(small_spec(), seed=7)
    c = build(small_spec(), seed=8)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])
    assert not np.array_equal(a.params["layer0.weight"], c.params["layer0.weight"])
    print("✅ Same seed, same parameters")

    np.testing.assert_array_equal(a.params["layer0.bias"], np.zeros(2))
    act = a.combined_activations()[0]
    assert a.params["layer0.coefficients"] is act.coefficients
    assert a.coefficient_hulls() == {
        "layer0.coefficients": HullKind.AFFINE,
        "layer3.coefficients": HullKind.AFFINE,
    }
    assert sorted(a.weight_names()) == ["layer0.weight", "layer3.weight", "layer4.weight"]
    print("✅ Zero biases and coefficient arrays shared with activations")


def test_forward_and_loss():
    """Test logits shape, predictions and loss gradients"""
    print("\n=== Testing Forward and Loss ===")

    net = build(small_spec(), seed=0)
    images = np.random.default_rng(0).random((4, 1, 6, 6))
    labels = np.array([0, 1, 2, 0])

    logits = net.forward(images)
    assert logits.shape == (4, 3)
    assert net.predict(images).shape == (4,)
    print("✅ Logits are (batch, classes)")

    loss, grads, graph = net.loss_and_grads(images, labels)
    direct, _ = loss_softmax_xent(logits, labels)
    assert abs(loss - direct) < 1e-12
    assert set(grads) == set(net.params)
    assert graph.node("layer3.activation") is not None
    print("✅ Loss matches softmax cross-entropy on the logits")

    try:
        net.forward(np.zeros((2, 1, 5, 5)))
        assert False, "wrong image shape accepted"
    except ShapeError:
        print("✅ Wrong image shape rejected")

    try:
        net.loss_and_grads(images, [0, 1, 2, 3])
        assert False, "out of range label accepted"
    except LabelError:
        print("✅ Out-of-range label rejected")


def test_forward_train_dropout():
    """Test training-mode logits depend on the rng only through dropout"""
    print("\n=== Testing forward_train ===")

    images = np.random.default_rng(1).random((4, 1, 6, 6))

    net = build(small_spec(), seed=0)
    np.testing.assert_array_equal(
        forward_train(net, images, np.random.default_rng(5)), net.forward(images)
    )
    print("✅ Without dropout, training and evaluation logits agree")

    spec = NetworkSpec(
        input_shape=(1, 6, 6),
        layers=[flatten(), dense(8, "relu"), dropout(0.5), dense(3, "softmax")],
        num_classes=3,
    )
    net = build(spec, seed=0)
    first = forward_train(net, images, np.random.default_rng(5))
    again = forward_train(net, images, np.random.default_rng(5))
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, net.forward(images))
    print("✅ Dropout masks follow the rng; evaluation skips dropout")


def test_constraint_check_before_forward():
    """Test that off-hull coefficients stop the forward pass"""
    print("\n=== Testing Constraint Check ===")

    net = build(small_spec("conv{id,relu}"), seed=0)
    net.combined_activations()[0].coefficients[...] = [1.5, -0.5]
    try:
        net.forward(np.zeros((1, 1, 6, 6)))
        assert False, "off-hull coefficients accepted"
    except ConstraintError:
        print("✅ ConstraintError raised before computing")


def test_save_and_load():
    """Test npz persistence keeps spec, weights and coefficients"""
    print("\n=== Testing Save / Load ===")

    net = build(small_spec(), seed=3)
    net.combined_activations()[3].coefficients[...] = [2.0, -0.5, -0.5]
    images = np.random.default_rng(1).random((2, 1, 6, 6))

    with tempfile.TemporaryDirectory() as temp_dir:
        path = Path(temp_dir) / "model.npz"
        net.save(path)
        loaded = Network.load(path)

        assert loaded.spec.to_dict() == net.spec.to_dict()
        np.testing.assert_array_equal(loaded.forward(images), net.forward(images))
        act = loaded.combined_activations()[3]
        assert isinstance(act, CombinedActivation)
        assert loaded.params["layer3.coefficients"] is act.coefficients
        np.testing.assert_array_equal(act.coefficients, [2.0, -0.5, -0.5])
        print("✅ Round trip preserves outputs and coefficients")

        broken = Path(temp_dir) / "broken.npz"
        broken.write_bytes(b"not a model")
        try:
            Network.load(broken)
            assert False, "garbage model accepted"
        except NetworkError:
            print("✅ Unreadable model raises NetworkError")


def main():
    """Run all tests"""
    print("🚀 Testing Layers")
    print("=" * 50)

    tests = [
        ("Preset Shapes", test_preset_shapes),
        ("Activation Lists", test_preset_activation_lists),
        ("Spec Validation", test_spec_validation),
        ("Build", test_build_is_deterministic),
        ("Forward and Loss", test_forward_and_loss),
        ("forward_train", test_forward_train_dropout),
        ("Constraint Check", test_constraint_check_before_forward),
        ("Save / Load", test_save_and_load),
    ]

    passed = 0
    total = len(tests)

    for test_name, test_func in tests:
        print(f"\n{'=' * 20} {test_name} {'=' * 20}")
        try:
            test_func()
            print(f"✅ {test_name} PASSED")
            passed += 1
        except Exception as e:
            print(f"❌ {test_name} CRASHED: {e}")
            import traceback

            traceback.print_exc()

    print(f"\n{'=' * 50}")
    print(f"🏁 Results: {passed}/{total} tests passed")
    print(f"{'=' * 50}")

    return passed == total


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
