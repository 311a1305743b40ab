#!/usr/bin/env python3
"""
Test Script for verify.py - Tests the oracles and the property suite runner

Usage: python3 tests/test_verify.py
"""

import sys
from pathlib import Path

import numpy as np

# Add parent directory to import modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from activations import (  # noqa: E402
    IDENTITY,
    RELU,
    TANH,
    CombinedActivation,
    HullKind,
    eval_combined,
    project_affine,
    project_convex,
)
from autodiff import Graph  # noqa: E402
from verify import (  # noqa: E402
    PROPERTIES,
    NonFiniteError,
    brute_force_affine_2,
    brute_force_simplex_2,
    check_identity_approx,
    check_monotone,
    finite_diff_grad,
    kink_margin,
    lrelu_max_deviation,
    pipeline_reference,
    relative_error,
    run_property,
    run_property_suite,
    simplex_kkt_residual,
)


def test_finite_differences():
    """Test central differences on a quadratic and the step guard"""
    print("=== Testing Finite Differences ===")

    p = np.array([[1.0, -2.0], [0.5, 3.0]])
    grad = finite_diff_grad(lambda x: float(np.sum(x**2)), p)
    np.testing.assert_allclose(grad, 2 * p, atol=1e-8)
    np.testing.assert_array_equal(p, [[1.0, -2.0], [0.5, 3.0]])
    print("✅ d/dx sum(x^2) = 2x, input untouched")

    try:
        finite_diff_grad(lambda x: 0.0, p, step=0.0)
        assert False, "zero step accepted"
    except ValueError:
        print("✅ Non-positive step rejected")

    try:
        finite_diff_grad(lambda x: float("inf"), p)
        assert False, "infinite value accepted"
    except NonFiniteError:
        print("✅ Non-finite function values rejected")

    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error([1.0, 0.0], [1.0, 0.0]) == 0.0
    assert abs(relative_error([1.0], [0.0]) - 1.0) < 1e-12
    print("✅ Relative error with a floor for zero gradients")


def test_kink_margin():
    """Test the distance to relu kinks and max-pool ties"""
    print("\n=== Testing Kink Margin ===")

    graph = Graph()
    x = graph.input("x")
    graph.activate(x, RELU)
    graph.forward({"x": np.array([[0.5, -0.002, 3.0]])})
    assert abs(kink_margin(graph) - 0.002) < 1e-15
    print("✅ Relu input closest to zero")

    graph = Graph()
    x = graph.input("x")
    graph.activate(x, TANH)
    graph.forward({"x": np.zeros((1, 3))})
    assert kink_margin(graph) == np.inf
    print("✅ Smooth graphs have no kinks")

    graph = Graph()
    x = graph.input("x")
    graph.maxpool2d(x, (2, 2))
    graph.forward({"x": np.array([[[[1.0, 1.0], [0.0, 0.5]]]])})
    assert kink_margin(graph) == 0.0
    print("✅ Tied max-pool window detected")


def test_pipeline_reference():
    """Test the two-stage pipeline against the direct combination"""
    print("\n=== Testing Pipeline Reference ===")

    rng = np.random.default_rng(0)
    w = rng.normal(size=(4, 3))
    b = rng.normal(size=3)
    x = rng.normal(size=(5, 4))
    bases = [IDENTITY, RELU, TANH]
    for hull, c in ((HullKind.CONVEX, [0.2, 0.5, 0.3]), (HullKind.AFFINE, [1.4, -0.6, 0.2])):
        act = CombinedActivation(hull, bases, c)
        reference = pipeline_reference(w, b, bases, c, x)
        assert reference.shape == (5, 3)
        assert np.abs(reference - eval_combined(act, x @ w + b)).max() <= 1e-10
    print("✅ conv1d over N shared-weight copies equals sum c_i f_i(Wx + b)")

    try:
        pipeline_reference(w, b, bases, [0.5, 0.5], x)
        assert False, "coefficient count mismatch accepted"
    except ValueError:
        print("✅ Coefficient count must match the bases")


def test_identity_and_monotone_checks():
    """Test identity approximation and monotonicity on known cases"""
    print("\n=== Testing Identity / Monotone Checks ===")

    affine = CombinedActivation(HullKind.AFFINE, [IDENTITY, TANH], [-1.0, 2.0])
    assert check_identity_approx(affine)
    off = CombinedActivation(HullKind.AFFINE, [IDENTITY, TANH], [-1.0, 2.5])
    assert not check_identity_approx(off)
    print("✅ Sum c = 1 approximates the identity, sum c = 1.5 does not")

    try:
        check_identity_approx(affine, eps=0.1)
        assert False, "large eps accepted"
    except ValueError:
        print("✅ eps outside (0, 1e-3] rejected")

    grid = np.linspace(-5.0, 5.0, 1001)
    convex = CombinedActivation(HullKind.CONVEX, [IDENTITY, RELU, TANH], [0.2, 0.3, 0.5])
    assert check_monotone(convex, grid)
    assert not check_monotone(affine, grid)
    print("✅ Convex combination monotone, -x + 2 tanh(x) is not")

    try:
        check_monotone(convex, grid[::-1])
        assert False, "descending grid accepted"
    except ValueError:
        print("✅ Unsorted grid rejected")


def test_projection_oracles():
    """Test brute force and KKT oracles agree with the sort-based projections"""
    print("\n=== Testing Projection Oracles ===")

    for v in ([0.3, 0.9], [2.0, -1.0], [-0.4, -0.1], [0.5, 0.5]):
        assert np.abs(project_convex(v) - brute_force_simplex_2(v)).max() <= 1e-6
        assert np.abs(project_affine(v) - brute_force_affine_2(v)).max() <= 1e-6
    print("✅ Grid search matches both projections in 2-D")

    v = np.array([0.9, -0.3, 0.6, 0.1])
    assert simplex_kkt_residual(v, project_convex(v)) <= 1e-12
    assert simplex_kkt_residual(v, np.array([0.25, 0.25, 0.25, 0.25])) > 0.1
    print("✅ KKT residual vanishes only at the projection")


def test_lrelu_deviation():
    """Test conv{id,relu} with c = [a, 1 - a] reproduces lrelu(a)"""
    print("\n=== Testing LReLU Equivalence ===")

    for alpha in (0.0, 0.01, 0.25, 1.0):
        assert lrelu_max_deviation(alpha) <= 1e-12
    print("✅ Max deviation <= 1e-12")


def test_run_property_reports_failures():
    """Test that a raising check becomes a failed result, not a crash"""
    print("\n=== Testing run_property ===")

    def failing(rng, trials):
        raise RuntimeError("boom")

    result = run_property("always fails", failing, 1)
    assert not result.passed
    assert "RuntimeError: boom" in result.detail
    print("✅ Failure captured with its message")

    result = run_property("always passes", lambda rng, trials: f"{trials} ok", 3)
    assert result.passed and result.detail == "3 ok" and result.seconds >= 0.0
    print("✅ Passing check returns its detail")


def test_quick_suite_passes():
    """Test the reduced property suite end to end"""
    print("\n=== Testing Quick Property Suite ===")

    seen = []
    results = run_property_suite(quick=True, seed=0, on_result=seen.append)
    assert len(results) == len(PROPERTIES) == len(seen)
    failed = [f"{r.name}: {r.detail}" for r in results if not r.passed]
    assert not failed, failed
    for result in results:
        print(f"✅ {result.name}: {result.detail}")


def main():
    """Run all tests"""
    print("🚀 Testing Verify")
    print("=" * 50)

    tests = [
        ("Finite Differences", test_finite_differences),
        ("Kink Margin", test_kink_margin),
        ("Pipeline Reference", test_pipeline_reference),
        ("Identity / Monotone", test_identity_and_monotone_checks),
        ("Projection Oracles", test_projection_oracles),
        ("LReLU Equivalence", test_lrelu_deviation),
        ("run_property", test_run_property_reports_failures),
        ("Quick Suite", test_quick_suite_passes),
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
