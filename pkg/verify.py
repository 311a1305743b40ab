#!/usr/bin/env python3
"""
Verify - Independent oracles and the property suite behind `hullact verify`

Oracles here never reuse the code path they check: gradients are compared
against central differences, projections against grid search or KKT
conditions, and combined activations against a stacked two-stage pipeline.
"""

import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import data
from activations import (
    BASE_SET_PRESETS,
    IDENTITY,
    RELU,
    TANH,
    BaseActivation,
    CombinedActivation,
    HullKind,
    base_set,
    eval_combined,
    init_coefficients,
    is_in_cone,
    lrelu,
    project,
    project_affine,
    project_convex,
    satisfies_hull,
)
from autodiff import Graph, Node, OpKind, Tensor, as_tensor
from layers import Network, NetworkSpec, build, dense, dropout, flatten, preset
from optim import Optimizer, OptimizerConfig, OptimizerState, step_constrained

DEFAULT_STEP = 1e-6
GRAD_TOLERANCE = 1e-5
GRAD_FLOOR = 1e-8
KINK_MARGIN = 1e-3
MAX_RESAMPLES = 100
PROJECTION_TOLERANCE = 1e-6
PIPELINE_TOLERANCE = 1e-10
LRELU_TOLERANCE = 1e-12
IDENTITY_SLOPE_TOLERANCE = 1e-3
MONOTONE_TOLERANCE = 1e-12


class VerifyError(Exception):
    """A property did not hold"""


class NonFiniteError(VerifyError):
    """Function under test returned NaN or infinity"""


# -- finite differences ----------------------------------------------------


def finite_diff_grad(
    fn: Callable[[Tensor], float], p: Any, step: float = DEFAULT_STEP
) -> Tensor:
    """Central differences (fn(p + h e_i) - fn(p - h e_i)) / 2h, one entry at a time"""
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step}")
    point = as_tensor(p).copy()
    grad = np.zeros_like(point)
    for index in np.ndindex(point.shape):
        original = point[index]
        point[index] = original + step
        upper = float(fn(point))
        point[index] = original - step
        lower = float(fn(point))
        point[index] = original
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NonFiniteError(f"Non-finite value at index {index}: {upper}, {lower}")
        grad[index] = (upper - lower) / (2.0 * step)
    return grad


def relative_error(analytic: Any, numeric: Any) -> float:
    a = as_tensor(analytic)
    n = as_tensor(numeric)
    scale = max(float(np.linalg.norm(a) + np.linalg.norm(n)), GRAD_FLOOR)
    return float(np.linalg.norm(a - n)) / scale


def _pool_blocks(x: Tensor, pool: Tuple[int, int]) -> Tensor:
    ph, pw = pool
    n, c, h, w = x.shape
    oh, ow = h // ph, w // pw
    return (
        x[:, :, : oh * ph, : ow * pw]
        .reshape(n, c, oh, ph, ow, pw)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh, ow, ph * pw)
    )


def kink_margin(graph: Graph) -> float:
    """Distance of the evaluated graph from any non-differentiable point

    Covers inputs to kinked activations (distance from 0) and max-pool
    windows (gap between the two largest entries).
    """
    margin = np.inf
    for node in graph.nodes:
        if node.op is OpKind.ACTIVATE:
            kinked = getattr(node.attrs["fn"], "kinked", False)
        elif node.op is OpKind.COMBINE:
            kinked = any(getattr(fn, "kinked", False) for fn in node.attrs["bases"])
        elif node.op is OpKind.MAXPOOL2D:
            ph, pw = node.attrs["pool"]
            if ph * pw > 1:
                blocks = np.sort(_pool_blocks(node.inputs[0].value, (ph, pw)), axis=-1)
                margin = min(margin, float((blocks[..., -1] - blocks[..., -2]).min()))
            continue
        else:
            continue
        if kinked:
            margin = min(margin, float(np.abs(node.inputs[0].value).min()))
    return float(margin)


def graph_gradient_errors(
    params: Dict[str, Tensor],
    build_fn: Callable[[Graph, Dict[str, Node]], Node],
    inputs: Optional[Dict[str, Any]] = None,
    dropout_seed: Optional[int] = None,
    step: float = DEFAULT_STEP,
) -> Tuple[Dict[str, float], float]:
    """Relative error per parameter of sum(out * out), plus the kink margin"""
    feed = inputs or {}
    graph = Graph()
    nodes = {name: graph.param(name, array) for name, array in params.items()}
    out = build_fn(graph, nodes)
    loss = graph.sum(graph.mul(out, out), name="check_loss")

    def run() -> float:
        rng = None if dropout_seed is None else np.random.default_rng(dropout_seed)
        values = graph.forward(feed, rng=rng, training=dropout_seed is not None)
        return float(values["check_loss"])

    run()
    margin = kink_margin(graph)
    analytic = {name: grad.copy() for name, grad in graph.backward(loss).items()}

    errors = {}
    for name, param in params.items():
        original = param.copy()

        def fn(values: Tensor) -> float:
            param[...] = values
            return run()

        try:
            numeric = finite_diff_grad(fn, original, step)
        finally:
            param[...] = original
        errors[name] = relative_error(analytic[name], numeric)
    return errors, margin


def network_kink_margin(net: Network, images: Tensor) -> float:
    graph, _ = net.build_graph(check_constraints=False)
    graph.forward({"images": images})
    return kink_margin(graph)


def network_gradient_errors(
    net: Network, images: Tensor, labels: Any, step: float = DEFAULT_STEP
) -> Dict[str, float]:
    """Relative error of every network parameter gradient, eval mode"""
    graph, loss = net.build_graph(with_loss=True, check_constraints=False)
    feed = {"images": images, "labels": np.asarray(labels)}
    graph.forward(feed)
    analytic = {name: grad.copy() for name, grad in graph.backward(loss).items()}

    errors = {}
    for name, param in net.params.items():
        original = param.copy()

        def fn(values: Tensor) -> float:
            param[...] = values
            return float(graph.forward(feed)["loss"])

        try:
            numeric = finite_diff_grad(fn, original, step)
        finally:
            param[...] = original
        errors[name] = relative_error(analytic[name], numeric)
    return errors


# -- activation oracles ----------------------------------------------------


def _combination(a: CombinedActivation, x: Tensor) -> Tensor:
    return sum(c * f.value(x) for c, f in zip(a.coefficients, a.bases))  # type: ignore


def pipeline_reference(
    weights: Any,
    bias: Any,
    bases: Sequence[BaseActivation],
    c: Any,
    x: Any,
) -> Tensor:
    """Two-stage form: N shared-weight dense copies, then a width-1 conv1d over copies"""
    coefficients = as_tensor(c)
    if len(bases) != coefficients.size:
        raise ValueError(f"{len(bases)} bases but {coefficients.size} coefficients")
    w = as_tensor(weights)
    b = as_tensor(bias)
    inputs = as_tensor(x)
    copies = np.stack([f.value(inputs @ w + b) for f in bases], axis=1)
    # kernel (out_channels=1, in_channels=N, width=1)
    kernel = coefficients.reshape(1, -1, 1)
    mixed = np.einsum("oi,bij->boj", kernel[:, :, 0], copies)
    return mixed[:, 0, :]


def check_identity_approx(a: CombinedActivation, eps: float = 1e-6) -> bool:
    """f(0) == 0 and the right-sided slope at 0 is 1"""
    if not 0.0 < eps <= 1e-3:
        raise ValueError(f"eps must be in (0, 1e-3], got {eps}")
    at_zero = float(_combination(a, np.zeros(1))[0])
    at_eps = float(_combination(a, np.array([eps]))[0])
    return abs(at_zero) <= 1e-12 and abs(at_eps / eps - 1.0) <= IDENTITY_SLOPE_TOLERANCE


def check_monotone(a: CombinedActivation, grid: Any) -> bool:
    points = as_tensor(grid)
    if np.any(np.diff(points) < 0):
        raise ValueError("grid must be sorted ascending")
    return bool(np.all(np.diff(_combination(a, points)) >= -MONOTONE_TOLERANCE))


def brute_force_simplex_2(c: Any, resolution: int = 10001) -> Tensor:
    """Closest point to c on the 1-simplex by a grid search refined once"""
    target = as_tensor(c)
    lo, hi = 0.0, 1.0
    for _ in range(3):
        t = np.linspace(lo, hi, resolution)
        dist = (t - target[0]) ** 2 + (1.0 - t - target[1]) ** 2
        best = t[int(dist.argmin())]
        width = (hi - lo) / (resolution - 1)
        lo, hi = max(0.0, best - width), min(1.0, best + width)
    return np.array([best, 1.0 - best])


def brute_force_affine_2(c: Any, resolution: int = 10001) -> Tensor:
    target = as_tensor(c)
    center = target[0]
    lo, hi = center - 10.0, center + 10.0
    for _ in range(4):
        t = np.linspace(lo, hi, resolution)
        dist = (t - target[0]) ** 2 + (1.0 - t - target[1]) ** 2
        best = t[int(dist.argmin())]
        width = (hi - lo) / (resolution - 1)
        lo, hi = best - width, best + width
    return np.array([best, 1.0 - best])


def simplex_kkt_residual(v: Any, p: Any) -> float:
    """Violation of p_i = max(v_i - theta, 0) for a shared theta"""
    v = as_tensor(v)
    p = as_tensor(p)
    active = p > 1e-12
    if not np.any(active):
        return np.inf
    gaps = v[active] - p[active]
    theta = float(gaps.mean())
    residual = float(np.abs(gaps - theta).max())
    if np.any(~active):
        residual = max(residual, float(np.max(v[~active] - theta, initial=0.0)))
    return max(residual, abs(float(p.sum()) - 1.0), float(np.max(-p, initial=0.0)))


# -- property suite --------------------------------------------------------


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str
    seconds: float


@dataclass
class _OpCase:
    name: str
    params: Dict[str, Tensor]
    build: Callable[[Graph, Dict[str, Node]], Node]
    inputs: Dict[str, Any] = field(default_factory=dict)
    dropout_seed: Optional[int] = None


def _op_cases(rng: np.random.Generator) -> List[_OpCase]:
    n = rng.normal
    aff = CombinedActivation(HullKind.AFFINE, [IDENTITY, RELU, TANH])
    conv = CombinedActivation(HullKind.CONVEX, [RELU, TANH])
    return [
        _OpCase("add", {"a": n(size=(3, 4)), "b": n(size=4)},
                lambda g, p: g.add(p["a"], p["b"])),
        _OpCase("mul", {"a": n(size=(3, 4)), "b": n(size=(3, 1))},
                lambda g, p: g.mul(p["a"], p["b"])),
        _OpCase("matmul", {"a": n(size=(3, 5)), "b": n(size=(5, 2))},
                lambda g, p: g.matmul(p["a"], p["b"])),
        _OpCase("bias_add", {"x": n(size=(2, 3, 4, 4)), "b": n(size=3)},
                lambda g, p: g.bias_add(p["x"], p["b"])),
        _OpCase("conv2d_valid", {"x": n(size=(2, 2, 6, 6)), "w": n(size=(3, 2, 3, 3))},
                lambda g, p: g.conv2d(p["x"], p["w"], padding="valid")),
        _OpCase("conv2d_same", {"x": n(size=(2, 2, 5, 5)), "w": n(size=(3, 2, 3, 2))},
                lambda g, p: g.conv2d(p["x"], p["w"], padding="same")),
        _OpCase("maxpool2d", {"x": n(size=(2, 2, 5, 5))},
                lambda g, p: g.maxpool2d(p["x"], (2, 2))),
        _OpCase("dropout", {"x": n(size=(3, 6))},
                lambda g, p: g.dropout(p["x"], 0.4),
                dropout_seed=int(rng.integers(2**31))),
        _OpCase("flatten", {"x": n(size=(2, 3, 2, 2)), "w": n(size=(12, 3))},
                lambda g, p: g.matmul(g.flatten(p["x"]), p["w"])),
        _OpCase("tanh", {"x": n(size=(3, 4))},
                lambda g, p: g.activate(p["x"], TANH)),
        _OpCase("relu", {"x": n(size=(3, 4))},
                lambda g, p: g.activate(p["x"], RELU)),
        _OpCase("lrelu", {"x": n(size=(3, 4))},
                lambda g, p: g.activate(p["x"], lrelu(0.1))),
        _OpCase("combine_affine",
                {"x": n(size=(3, 4)), "c": project_affine(n(size=3))},
                lambda g, p: g.combine(p["x"], p["c"], aff.bases)),
        _OpCase("combine_convex",
                {"x": n(size=(3, 4)), "c": rng.dirichlet(np.ones(2))},
                lambda g, p: g.combine(p["x"], p["c"], conv.bases)),
        _OpCase("softmax_xent", {"z": n(size=(4, 5))},
                lambda g, p: g.softmax_xent(p["z"], g.input("labels")),
                inputs={"labels": rng.integers(0, 5, size=4)}),
    ]


def _check_op_gradients(rng: np.random.Generator, trials: int) -> str:
    worst: Dict[str, float] = {}
    case_count = len(_op_cases(rng))
    for index in range(case_count):
        for _ in range(trials):
            for _ in range(MAX_RESAMPLES):
                case = _op_cases(rng)[index]
                errors, margin = graph_gradient_errors(
                    case.params, case.build, case.inputs, case.dropout_seed
                )
                if margin >= KINK_MARGIN:
                    break
            else:
                raise VerifyError(f"{case.name}: could not sample away from kinks")
            worst[case.name] = max(worst.get(case.name, 0.0), max(errors.values()))
    failing = {name: err for name, err in worst.items() if err > GRAD_TOLERANCE}
    if failing:
        raise VerifyError(f"gradient mismatch: {failing}")
    return f"{len(worst)} ops x {trials} trials, worst rel err {max(worst.values()):.1e}"


def _random_hull_coefficients(
    rng: np.random.Generator, n: int, hull: HullKind
) -> Tensor:
    if hull is HullKind.CONVEX:
        return rng.dirichlet(np.ones(n))
    return project_affine(rng.normal(0.0, 1.5, size=n))


def _randomize_coefficients(net: Network, rng: np.random.Generator) -> None:
    for act in net.combined_activations().values():
        act.coefficients[...] = _random_hull_coefficients(rng, len(act.bases), act.hull)


def _check_network(
    rng: np.random.Generator, trials: int, spec: NetworkSpec, batch: int
) -> str:
    worst = 0.0
    for _ in range(trials):
        for _ in range(MAX_RESAMPLES):
            net = build(spec, seed=int(rng.integers(2**31)))
            _randomize_coefficients(net, rng)
            images = rng.uniform(0.0, 1.0, size=(batch,) + tuple(spec.input_shape))
            if network_kink_margin(net, images) >= KINK_MARGIN:
                break
        else:
            raise VerifyError("could not sample a network away from kinks")
        labels = rng.integers(0, spec.num_classes, size=batch)
        errors = network_gradient_errors(net, images, labels)
        failing = {k: v for k, v in errors.items() if v > GRAD_TOLERANCE}
        if failing:
            raise VerifyError(f"gradient mismatch: {failing}")
        coefficient_names = [k for k in errors if k.endswith(".coefficients")]
        if not coefficient_names:
            raise VerifyError("network has no coefficient gradients to check")
        worst = max(worst, max(errors.values()))
    return f"{len(net.params)} tensors x {trials} trials, worst rel err {worst:.1e}"


def mlp_spec(num_classes: int = 3) -> NetworkSpec:
    return NetworkSpec(
        (1, 4, 4),
        [
            flatten(),
            dense(8, "aff{id,relu,tanh}"),
            dense(6, "conv{relu,tanh}"),
            dense(num_classes, "softmax"),
        ],
        num_classes,
    )


def tiny_spec(num_classes: int = 3) -> NetworkSpec:
    return preset(
        "tiny", ["aff{id,relu,tanh}", "conv{id,relu}"], (1, 8, 8), num_classes
    )


def _check_mlp_gradients(rng: np.random.Generator, trials: int) -> str:
    return _check_network(rng, trials, mlp_spec(), batch=3)


def _check_tiny_cnn_gradients(rng: np.random.Generator, trials: int) -> str:
    return _check_network(rng, trials, tiny_spec(), batch=2)


def _check_gradient_accumulation(rng: np.random.Generator, trials: int) -> str:
    # x feeds both operands of mul and the add: grad = 2x + 1
    for _ in range(trials):
        x = rng.normal(size=(3, 2))
        graph = Graph()
        node = graph.param("x", x)
        y = graph.add(graph.mul(node, node), node)
        loss = graph.sum(y)
        graph.forward({})
        grad = graph.backward(loss)["x"]
        if not np.allclose(grad, 2.0 * x + 1.0, rtol=0, atol=1e-12):
            raise VerifyError(f"fan-out accumulation wrong: {grad} vs {2 * x + 1}")
    return f"{trials} fan-out graphs"


def _check_projections(rng: np.random.Generator, trials: int) -> str:
    worst = 0.0
    for _ in range(trials):
        v2 = rng.normal(0.0, 2.0, size=2)
        worst = max(
            worst,
            float(np.abs(project_convex(v2) - brute_force_simplex_2(v2)).max()),
            float(np.abs(project_affine(v2) - brute_force_affine_2(v2)).max()),
        )
        for n in (3, 4):
            v = rng.normal(0.0, 2.0, size=n)
            p = project_convex(v)
            worst = max(worst, simplex_kkt_residual(v, p))
            q = project_affine(v)
            shift = v - q
            worst = max(worst, float(np.ptp(shift)), abs(float(q.sum()) - 1.0))
            for hull in HullKind:
                once = project(v, hull)
                worst = max(worst, float(np.abs(project(once, hull) - once).max()))
                perm = rng.permutation(n)
                worst = max(worst, float(np.abs(project(v[perm], hull) - once[perm]).max()))
    if worst > PROJECTION_TOLERANCE:
        raise VerifyError(f"projection error {worst:.2e}")
    return f"{trials} vectors per size, max deviation {worst:.1e}"


def _check_conv_is_cone_and_aff(rng: np.random.Generator, trials: int) -> str:
    mismatches = 0
    inside = 0
    for i in range(trials * 100):
        v = rng.normal(size=int(rng.integers(2, 5)))
        kind = i % 3
        if kind == 1:
            v = v / v.sum()
        elif kind == 2:
            v = np.abs(v) / np.abs(v).sum()
        convex = satisfies_hull(v, HullKind.CONVEX)
        affine = satisfies_hull(v, HullKind.AFFINE)
        if convex != (is_in_cone(v) and affine) or (convex and not affine):
            mismatches += 1
        inside += convex
    if mismatches:
        raise VerifyError(f"{mismatches} vectors disagree with conv = cone & aff")
    return f"{trials * 100} vectors, {inside} in conv, 0 mismatches"


def _check_identity_approximation(rng: np.random.Generator, trials: int) -> str:
    for _ in range(trials):
        for name in BASE_SET_PRESETS:
            bases = base_set(name)
            affine = CombinedActivation(
                HullKind.AFFINE, bases, _random_hull_coefficients(rng, len(bases), HullKind.AFFINE)
            )
            if not check_identity_approx(affine):
                raise VerifyError(f"affine {affine} does not approximate the identity")
            scale = rng.choice([rng.uniform(0.3, 0.9), rng.uniform(1.1, 2.0)])
            off = affine.coefficients * scale
            scaled = CombinedActivation(HullKind.AFFINE, bases, off)
            if check_identity_approx(scaled):
                raise VerifyError(f"{scaled} (sum {off.sum():.3f}) passed the identity check")
    return f"{trials} draws x {len(BASE_SET_PRESETS)} base sets, both directions"


def _check_convex_monotone(rng: np.random.Generator, trials: int) -> str:
    grid = np.sort(rng.uniform(-5.0, 5.0, size=1000))
    for _ in range(trials):
        for name in BASE_SET_PRESETS:
            bases = base_set(name)
            a = CombinedActivation(HullKind.CONVEX, bases, rng.dirichlet(np.ones(len(bases))))
            if not check_monotone(a, grid):
                raise VerifyError(f"convex {a} is not monotone")
    return f"{trials} draws x {len(BASE_SET_PRESETS)} base sets on 1000 points"


def _find_affine_witness(rng: np.random.Generator, trials: int) -> str:
    grid = np.linspace(-5.0, 5.0, 1001)
    bases = base_set("id-relu-tanh")
    for attempt in range(1, trials * 10 + 1):
        a = CombinedActivation(HullKind.AFFINE, bases, project_affine(rng.normal(0.0, 2.0, 3)))
        if not check_monotone(a, grid):
            values = _combination(a, grid)
            i = int(np.argmin(np.diff(values)))
            return (
                f"{a.name} c={np.round(a.coefficients, 3).tolist()} drops between "
                f"x={grid[i]:.2f} and x={grid[i + 1]:.2f} (draw {attempt})"
            )
    raise VerifyError("no non-monotone affine combination found")


def lrelu_max_deviation(alpha: float, grid: Optional[Tensor] = None) -> float:
    points = np.linspace(-10.0, 10.0, 1000) if grid is None else as_tensor(grid)
    a = CombinedActivation(HullKind.CONVEX, [IDENTITY, RELU], [alpha, 1.0 - alpha])
    return float(np.abs(eval_combined(a, points) - lrelu(alpha).value(points)).max())


def _check_lrelu_equivalence(rng: np.random.Generator, trials: int) -> str:
    alphas = [0.01, 0.1, 0.3] + list(rng.uniform(0.0, 1.0, size=trials))
    worst = max(lrelu_max_deviation(alpha) for alpha in alphas)
    if worst > LRELU_TOLERANCE:
        raise VerifyError(f"combined {{id,relu}} differs from lrelu by {worst:.2e}")
    return f"{len(alphas)} leakages, max deviation {worst:.1e}"


def _check_lrelu_network(rng: np.random.Generator, trials: int) -> str:
    worst = 0.0
    for _ in range(trials):
        alpha = float(rng.uniform(0.0, 0.5))
        seed = int(rng.integers(2**31))
        combined = build(preset("tiny", "conv{id,relu}", (1, 8, 8), 3), seed)
        for act in combined.combined_activations().values():
            act.coefficients[...] = (alpha, 1.0 - alpha)
        leaky = build(preset("tiny", f"lrelu({alpha!r})", (1, 8, 8), 3), seed)
        for name, array in leaky.params.items():
            array[...] = combined.params[name]
        images = rng.uniform(0.0, 1.0, size=(4, 1, 8, 8))
        worst = max(
            worst, float(np.abs(combined.forward(images) - leaky.forward(images)).max())
        )
    if worst > LRELU_TOLERANCE:
        raise VerifyError(f"network logits differ by {worst:.2e}")
    return f"{trials} networks, max logit deviation {worst:.1e}"


def _check_pipeline(rng: np.random.Generator, trials: int) -> str:
    worst = 0.0
    for name in BASE_SET_PRESETS:
        bases = base_set(name)
        for hull in HullKind:
            for _ in range(trials):
                w = rng.normal(size=(5, 4))
                b = rng.normal(size=4)
                x = rng.normal(size=(3, 5))
                a = CombinedActivation(
                    hull, bases, _random_hull_coefficients(rng, len(bases), hull)
                )
                reference = pipeline_reference(w, b, bases, a.coefficients, x)
                direct = eval_combined(a, x @ w + b)

                graph = Graph()
                z = graph.bias_add(
                    graph.matmul(graph.input("x"), graph.param("w", w)), graph.param("b", b)
                )
                out = graph.combine(z, graph.param("c", a.coefficients), bases)
                graph.forward({"x": x})
                assert out.value is not None
                worst = max(
                    worst,
                    float(np.abs(reference - direct).max()),
                    float(np.abs(reference - out.value).max()),
                )
    if worst > PIPELINE_TOLERANCE:
        raise VerifyError(f"two-stage pipeline differs by {worst:.2e}")
    return f"{len(BASE_SET_PRESETS)} base sets x 2 hulls x {trials}, max deviation {worst:.1e}"


def _dropout_spec() -> NetworkSpec:
    return NetworkSpec(
        (1, 4, 4),
        [flatten(), dense(16, "aff{id,relu,tanh}"), dropout(0.5), dense(3, "softmax")],
        3,
    )


def _train_steps(seed: int, images: Tensor, labels: Any, steps: int) -> Network:
    net = build(_dropout_spec(), seed)
    optimizer = Optimizer(
        OptimizerConfig(kind="sgd", learning_rate=0.05, momentum=0.9, weight_decay=5e-4),
        net.coefficient_hulls(),
    )
    rng = np.random.default_rng(seed)
    for _ in range(steps):
        _, grads, _ = net.loss_and_grads(images, labels, rng=rng)
        optimizer.apply(net.params, grads)
    return net


def _check_determinism(rng: np.random.Generator, trials: int) -> str:
    for _ in range(trials):
        seed = int(rng.integers(2**31))
        images = rng.uniform(0.0, 1.0, size=(6, 1, 4, 4))
        labels = rng.integers(0, 3, size=6)
        first = _train_steps(seed, images, labels, 5)
        second = _train_steps(seed, images, labels, 5)
        for name, array in first.params.items():
            if not np.array_equal(array, second.params[name]):
                raise VerifyError(f"'{name}' differs between identical runs")
    return f"{trials} seeded 5-step runs bit-identical"


def _check_constrained_steps(rng: np.random.Generator, trials: int) -> str:
    total = 0
    configs = [
        OptimizerConfig(kind="sgd", learning_rate=0.1, momentum=0.9, decay=0.0),
        OptimizerConfig(kind="rmsprop", learning_rate=0.05, decay=1e-6),
    ]
    for hull in HullKind:
        for config in configs:
            n = int(rng.integers(2, 5))
            coefficients = {"c": init_coefficients(n, hull)}
            state = OptimizerState()
            for _ in range(trials * 25):
                grads = {"c": rng.normal(0.0, 10.0, size=n)}
                step_constrained(coefficients, grads, state, config, {"c": hull})
                if not satisfies_hull(coefficients["c"], hull):
                    raise VerifyError(f"{hull.value} coefficients left the hull: {coefficients['c']}")
                total += 1
            before = coefficients["c"].copy()
            still = OptimizerState()
            step_constrained(coefficients, {"c": np.zeros(n)}, still, config, {"c": hull})
            if not np.allclose(coefficients["c"], before, rtol=0, atol=1e-9):
                raise VerifyError("zero-gradient constrained step moved the coefficients")
    return f"{total} random steps stayed in their hulls"


def _check_idx_round_trip(rng: np.random.Generator, trials: int) -> str:
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        for i in range(max(1, trials // 10)):
            count = int(rng.integers(1, 20))
            pixels = rng.integers(0, 256, size=(count, 6, 5), dtype=np.uint8)
            labels = rng.integers(0, 10, size=count)
            images_path = root / f"images-{i}"
            labels_path = root / f"labels-{i}"
            data.save_idx_images(images_path, pixels[:, None] / 255.0)
            data.save_idx_labels(labels_path, labels)
            ds = data.load_idx(images_path, labels_path)
            data.save_idx_images(root / "again-images", ds.images)
            data.save_idx_labels(root / "again-labels", ds.labels)
            for original, again in (
                (images_path, root / "again-images"),
                (labels_path, root / "again-labels"),
            ):
                if original.read_bytes() != again.read_bytes():
                    raise VerifyError(f"{original.name} changed after a load/save cycle")
    return f"{max(1, trials // 10)} synthetic IDX pairs byte-identical"


PropertyCheck = Callable[[np.random.Generator, int], str]

# (name, check, full trials, quick trials)
PROPERTIES: List[Tuple[str, PropertyCheck, int, int]] = [
    ("gradients: per-op", _check_op_gradients, 100, 10),
    ("gradients: mlp", _check_mlp_gradients, 5, 2),
    ("gradients: tiny cnn", _check_tiny_cnn_gradients, 3, 1),
    ("gradients: fan-out accumulation", _check_gradient_accumulation, 100, 10),
    ("projection oracles", _check_projections, 1000, 100),
    ("conv = cone & aff", _check_conv_is_cone_and_aff, 100, 10),
    ("identity approximation", _check_identity_approximation, 100, 20),
    ("convex monotonicity", _check_convex_monotone, 100, 20),
    ("affine non-monotone witness", _find_affine_witness, 100, 100),
    ("lrelu equivalence", _check_lrelu_equivalence, 20, 5),
    ("lrelu network equivalence", _check_lrelu_network, 5, 2),
    ("two-stage pipeline", _check_pipeline, 100, 20),
    ("determinism", _check_determinism, 3, 1),
    ("constrained steps", _check_constrained_steps, 400, 40),
    ("idx round trip", _check_idx_round_trip, 50, 10),
]


def run_property(
    name: str, check: PropertyCheck, trials: int, seed: int = 0
) -> PropertyResult:
    rng = np.random.default_rng([seed, sum(map(ord, name))])
    start = time.perf_counter()
    try:
        detail = check(rng, trials)
        passed = True
    except Exception as e:  # report every failure, keep running the rest
        detail = f"{type(e).__name__}: {e}"
        passed = False
    return PropertyResult(name, passed, detail, time.perf_counter() - start)


def run_property_suite(
    quick: bool = False,
    seed: int = 0,
    on_result: Optional[Callable[[PropertyResult], None]] = None,
) -> List[PropertyResult]:
    results = []
    for name, check, full, reduced in PROPERTIES:
        result = run_property(name, check, reduced if quick else full, seed)
        results.append(result)
        if on_result is not None:
            on_result(result)
    return results
