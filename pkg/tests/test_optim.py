#!/usr/bin/env python3
"""
Test Script for optim.py - Tests RMSProp/SGD updates, schedules and projected steps

Usage: python3 tests/test_optim.py
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to import modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from activations import HullKind, satisfies_hull  # noqa: E402
from optim import (  # noqa: E402
    Optimizer,
    OptimizerConfig,
    OptimizerConfigError,
    OptimizerState,
    StateShapeError,
    effective_learning_rate,
    step,
    step_constrained,
)


def test_config_validation():
    """Test hyperparameter ranges and dict round trip"""
    print("=== Testing Config Validation ===")

    OptimizerConfig().validate()
    bad_configs = [
        {"kind": "adam"},
        {"learning_rate": 0.0},
        {"momentum": 1.0},
        {"decay": -1.0},
        {"schedule": "cosine"},
        {"step_factor": 0.0},
    ]
    for overrides in bad_configs:
        try:
            OptimizerConfig(**overrides).validate()
            assert False, f"{overrides} accepted"
        except OptimizerConfigError:
            pass
    print("✅ Out-of-range hyperparameters rejected")

    config = OptimizerConfig(kind="sgd", momentum=0.9, schedule="step")
    assert OptimizerConfig.from_dict(config.to_dict()) == config
    try:
        OptimizerConfig.from_dict({"lr": 0.1})
        assert False, "unknown key accepted"
    except OptimizerConfigError:
        print("✅ Unknown keys rejected")


def test_learning_rate_schedules():
    """Test inverse-time decay per update and step decay per epoch"""
    print("\n=== Testing Learning Rate Schedules ===")

    config = OptimizerConfig(learning_rate=1e-4, decay=1e-6)
    assert effective_learning_rate(config, OptimizerState()) == 1e-4
    lr = effective_learning_rate(config, OptimizerState(updates=1000))
    assert abs(lr - 1e-4 / (1 + 1e-3)) < 1e-18
    lr = effective_learning_rate(config, OptimizerState(updates=1_000_000))
    assert abs(lr - 0.5e-4) < 1e-18
    print("✅ lr / (1 + decay * updates)")

    config = OptimizerConfig(kind="sgd", learning_rate=0.1, decay=0.0, schedule="step", step_epochs=2)
    rates = [effective_learning_rate(config, OptimizerState(epoch=e)) for e in range(5)]
    np.testing.assert_allclose(rates, [0.1, 0.1, 0.01, 0.01, 0.001])
    print("✅ x0.1 every step_epochs epochs")


def test_rmsprop_update():
    """Test one RMSProp step against the closed form"""
    print("\n=== Testing RMSProp ===")

    config = OptimizerConfig(learning_rate=0.01, decay=0.0)
    p = np.array([1.0, -2.0])
    g = np.array([0.5, -1.0])
    state = step({"w.weight": p}, {"w.weight": g}, OptimizerState(), config)

    s = 0.1 * g * g
    expected = np.array([1.0, -2.0]) - 0.01 * g / (np.sqrt(s) + 1e-8)
    np.testing.assert_allclose(p, expected)
    assert state.updates == 1
    print("✅ s = rho s + (1 - rho) g^2; p -= lr g / (sqrt(s) + eps)")


def test_sgd_momentum_and_weight_decay():
    """Test SGD velocity and that weight decay skips biases"""
    print("\n=== Testing SGD ===")

    config = OptimizerConfig(kind="sgd", learning_rate=0.1, decay=0.0, momentum=0.5, weight_decay=0.1)
    params = {"l.weight": np.array([1.0]), "l.bias": np.array([1.0])}
    grads = {"l.weight": np.array([1.0]), "l.bias": np.array([1.0])}
    state = OptimizerState()

    step(params, grads, state, config)
    np.testing.assert_allclose(params["l.weight"], [1.0 - 0.1 * 1.1])
    np.testing.assert_allclose(params["l.bias"], [0.9])
    print("✅ Weight decay applied to weights only")

    step(params, grads, state, config)
    np.testing.assert_allclose(params["l.bias"], [0.9 + 0.5 * -0.1 - 0.1])
    print("✅ Momentum carries the previous velocity")


def test_shape_mismatch():
    """Test that gradient and state shapes must match parameters"""
    print("\n=== Testing Shape Mismatch ===")

    config = OptimizerConfig()
    try:
        step({"w": np.zeros(3)}, {"w": np.zeros(2)}, OptimizerState(), config)
        assert False, "mismatched gradient accepted"
    except StateShapeError as e:
        assert e.name == "w"
        print("✅ Gradient shape mismatch rejected")

    state = OptimizerState(slots={"w": np.zeros(2)})
    try:
        step({"w": np.zeros(3)}, {"w": np.zeros(3)}, state, config)
        assert False, "mismatched state accepted"
    except StateShapeError:
        print("✅ State shape mismatch rejected")


def test_constrained_step_stays_on_hull():
    """Test projected steps keep coefficients feasible under random gradients"""
    print("\n=== Testing Constrained Steps ===")

    rng = np.random.default_rng(0)
    for hull in HullKind:
        config = OptimizerConfig(learning_rate=0.5, decay=0.0)
        coefficients = {"layer0.coefficients": np.full(3, 1 / 3)}
        ref = coefficients["layer0.coefficients"]
        state = OptimizerState()
        for _ in range(500):
            grads = {"layer0.coefficients": rng.normal(scale=10.0, size=3)}
            step_constrained(coefficients, grads, state, config, {"layer0.coefficients": hull})
            assert satisfies_hull(ref, hull), f"{hull}: {ref}"
        assert coefficients["layer0.coefficients"] is ref
        print(f"✅ {hull.value}: 500 steps, always on the hull, updated in place")


def test_constrained_step_examples():
    """Test single SGD steps with lr=1 against hand-computed projections"""
    print("\n=== Testing Constrained Step Examples ===")

    config = OptimizerConfig(kind="sgd", learning_rate=1.0, decay=0.0)
    cases = [
        (HullKind.AFFINE, [0.5, 0.5], [0.1, -0.1], [0.4, 0.6]),
        (HullKind.CONVEX, [0.6, 0.4], [-0.4, 0.4], [1.0, 0.0]),
        (HullKind.CONVEX, [1.0, 0.0], [0.0, 0.5], [1.0, 0.0]),
        (HullKind.CONVEX, [1.0, 0.0], [0.2, 0.7], [1.0, 0.0]),
    ]
    for hull, start, grad, expected in cases:
        coefficients = {"c": np.array(start)}
        step_constrained(coefficients, {"c": np.array(grad)}, OptimizerState(), config, {"c": hull})
        np.testing.assert_allclose(coefficients["c"], expected, atol=1e-12)
        print(f"✅ {hull.value} {start} - {grad} -> {expected}")

    coefficients = {"c": np.array([1.0, 0.0])}
    grads = {"c": np.array([0.0, 0.5])}
    step_constrained(coefficients, grads, OptimizerState(), config, {"c": HullKind.CONVEX})
    assert coefficients["c"][1] == 0.0
    print("✅ Pushing c2 negative clamps it at exactly zero")

    for hull in HullKind:
        start = np.array([0.2, 0.8]) if hull is HullKind.CONVEX else np.array([1.5, -0.5])
        coefficients = {"c": start.copy()}
        step_constrained(coefficients, {"c": np.zeros(2)}, OptimizerState(), config, {"c": hull})
        np.testing.assert_allclose(coefficients["c"], start, atol=1e-12)
    print("✅ Zero gradients leave feasible coefficients unchanged")


def test_optimizer_apply():
    """Test that apply shares one update count across weights and coefficients"""
    print("\n=== Testing Optimizer.apply ===")

    config = OptimizerConfig(learning_rate=0.1, decay=0.5)
    optimizer = Optimizer(config, {"layer0.coefficients": HullKind.CONVEX})
    params = {
        "layer0.weight": np.array([1.0]),
        "layer0.coefficients": np.array([0.5, 0.5]),
    }
    grads = {
        "layer0.weight": np.array([1.0]),
        "layer0.coefficients": np.array([1.0, -1.0]),
    }

    optimizer.apply(params, grads)
    assert optimizer.state.updates == 1
    assert abs(optimizer.learning_rate - 0.1 / 1.5) < 1e-15
    assert satisfies_hull(params["layer0.coefficients"], HullKind.CONVEX)
    assert params["layer0.coefficients"][1] > params["layer0.coefficients"][0]
    print("✅ One update counted, coefficients projected")

    optimizer.end_epoch()
    assert optimizer.state.epoch == 1
    print("✅ end_epoch advances the epoch counter")


def main():
    """Run all tests"""
    print("🚀 Testing Optimizers")
    print("=" * 50)

    tests = [
        ("Config Validation", test_config_validation),
        ("Schedules", test_learning_rate_schedules),
        ("RMSProp", test_rmsprop_update),
        ("SGD", test_sgd_momentum_and_weight_decay),
        ("Shape Mismatch", test_shape_mismatch),
        ("Constrained Steps", test_constrained_step_stays_on_hull),
        ("Constrained Step Examples", test_constrained_step_examples),
        ("Optimizer.apply", test_optimizer_apply),
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
