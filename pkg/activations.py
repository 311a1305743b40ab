#!/usr/bin/env python3
"""
Activations - Base activation functions and learnable hull-constrained combinations

A CombinedActivation is sum_i c_i * f_i(x) over an ordered base set. Its
coefficient vector lives either in the convex hull (c >= 0, sum c = 1) or the
affine hull (sum c = 1) of the base set and is projected back after every
optimizer update.
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from autodiff import Tensor, as_tensor

SUM_TOLERANCE = 1e-6
NEGATIVE_TOLERANCE = 1e-9
DEFAULT_LEAKAGE = 0.01


class ActivationError(Exception):
    """Base exception for activation functions"""


class ActivationSpecError(ActivationError):
    """Activation spec string could not be parsed"""

    def __init__(self, spec: str, reason: str):
        super().__init__(
            f"Invalid activation spec '{spec}': {reason}. "
            f"Valid names: {', '.join(VALID_SPEC_FORMS)}"
        )
        self.spec = spec
        self.valid_names = VALID_SPEC_FORMS


class ConstraintError(ActivationError):
    """Coefficient vector left its hull"""

    def __init__(self, hull: "HullKind", coefficients: Tensor):
        super().__init__(
            f"Coefficients {np.array2string(coefficients, precision=6)} violate the "
            f"{hull.value} hull constraint"
        )
        self.hull = hull
        self.coefficients = coefficients


class ProjectionError(ActivationError):
    """Projection input is empty or non-finite"""


@dataclass(frozen=True)
class BaseActivation:
    name: str
    value_fn: Callable[[Tensor], Tensor]
    derivative_fn: Callable[[Tensor], Tensor]
    is_monotone: bool
    approximates_identity: bool
    kinked: bool = False

    @property
    def token(self) -> str:
        """Short form used inside spec strings"""
        return "id" if self.name == "identity" else self.name

    def value(self, x: Tensor) -> Tensor:
        return self.value_fn(as_tensor(x))

    def derivative(self, x: Tensor) -> Tensor:
        return self.derivative_fn(as_tensor(x))


def _tanh_derivative(x: Tensor) -> Tensor:
    return 1.0 - np.tanh(x) ** 2


IDENTITY = BaseActivation(
    name="identity",
    value_fn=lambda x: x.copy(),
    derivative_fn=np.ones_like,
    is_monotone=True,
    approximates_identity=True,
)

# derivative at 0 is right-sided: relu'(0) = 1
RELU = BaseActivation(
    name="relu",
    value_fn=lambda x: np.maximum(x, 0.0),
    derivative_fn=lambda x: (x >= 0.0).astype(np.float64),
    is_monotone=True,
    approximates_identity=True,
    kinked=True,
)

TANH = BaseActivation(
    name="tanh",
    value_fn=np.tanh,
    derivative_fn=_tanh_derivative,
    is_monotone=True,
    approximates_identity=True,
)


def lrelu(alpha: float = DEFAULT_LEAKAGE) -> BaseActivation:
    """Leaky ReLU: x for x >= 0, alpha * x otherwise"""
    if not np.isfinite(alpha):
        raise ValueError(f"Leakage must be finite, got {alpha}")
    return BaseActivation(
        name=f"lrelu({float(alpha)!r})",
        value_fn=lambda x: np.where(x >= 0.0, x, alpha * x),
        derivative_fn=lambda x: np.where(x >= 0.0, 1.0, alpha),
        is_monotone=alpha >= 0.0,
        approximates_identity=True,
        kinked=True,
    )


BASE_ACTIVATIONS: Dict[str, BaseActivation] = {
    "identity": IDENTITY,
    "id": IDENTITY,
    "relu": RELU,
    "tanh": TANH,
}

VALID_SPEC_FORMS = (
    "id",
    "identity",
    "relu",
    "tanh",
    "lrelu",
    "lrelu(<alpha>)",
    "conv{<base>,<base>,...}",
    "aff{<base>,<base>,...}",
)


class HullKind(Enum):
    CONVEX = "convex"
    AFFINE = "affine"

    @property
    def prefix(self) -> str:
        return "conv" if self is HullKind.CONVEX else "aff"


BASE_SET_PRESETS: Dict[str, Tuple[str, ...]] = {
    "id-relu": ("identity", "relu"),
    "id-tanh": ("identity", "tanh"),
    "relu-tanh": ("relu", "tanh"),
    "id-relu-tanh": ("identity", "relu", "tanh"),
}


def base_set(preset: str) -> Tuple[BaseActivation, ...]:
    if preset not in BASE_SET_PRESETS:
        raise ValueError(
            f"Unknown base set '{preset}'. Choose from: {', '.join(BASE_SET_PRESETS)}"
        )
    return tuple(BASE_ACTIVATIONS[name] for name in BASE_SET_PRESETS[preset])


def init_coefficients(n: int, hull: HullKind) -> Tensor:
    """Barycenter of the simplex, which lies in both hulls"""
    if n < 2:
        raise ValueError(f"A learnable combination needs at least 2 bases, got {n}")
    return np.full(n, 1.0 / n)


def is_in_cone(c: Sequence[float]) -> bool:
    return bool(np.all(as_tensor(c) >= 0.0))


def satisfies_hull(c: Sequence[float], hull: HullKind) -> bool:
    coefficients = as_tensor(c)
    if coefficients.size == 0 or not np.all(np.isfinite(coefficients)):
        return False
    if abs(coefficients.sum() - 1.0) > SUM_TOLERANCE:
        return False
    if hull is HullKind.CONVEX:
        return bool(coefficients.min() >= -NEGATIVE_TOLERANCE)
    return True


def _checked_vector(c: Sequence[float]) -> Tensor:
    v = as_tensor(c)
    if v.ndim != 1 or v.size == 0:
        raise ProjectionError(f"Projection needs a non-empty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ProjectionError(f"Projection input must be finite: {v}")
    return v


def project_convex(c: Sequence[float]) -> Tensor:
    """Euclidean projection onto the probability simplex (sort-based)"""
    v = _checked_vector(c)
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u)
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(u * ranks > (cssv - 1.0))[0][-1]
    theta = (cssv[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def project_affine(c: Sequence[float]) -> Tensor:
    """Euclidean projection onto the hyperplane sum(c) = 1"""
    v = _checked_vector(c)
    return v + (1.0 - v.sum()) / v.size


def project(c: Sequence[float], hull: HullKind) -> Tensor:
    return project_convex(c) if hull is HullKind.CONVEX else project_affine(c)


class CombinedActivation:
    """Learnable sum_i c_i f_i(x), one coefficient vector per layer"""

    def __init__(
        self,
        hull: HullKind,
        bases: Sequence[BaseActivation],
        coefficients: Optional[Sequence[float]] = None,
    ):
        if len(bases) < 2:
            raise ValueError(f"A combined activation needs at least 2 bases, got {len(bases)}")
        names = [base.name for base in bases]
        if len(set(names)) != len(names):
            raise ValueError(f"Base activations must be distinct: {names}")
        self.hull = hull
        self.bases: Tuple[BaseActivation, ...] = tuple(bases)
        if coefficients is None:
            self.coefficients = init_coefficients(len(bases), hull)
        else:
            self.coefficients = as_tensor(coefficients).copy()
            if self.coefficients.shape != (len(bases),):
                raise ValueError(
                    f"Expected {len(bases)} coefficients, got shape {self.coefficients.shape}"
                )

    @property
    def name(self) -> str:
        return f"{self.hull.prefix}{{{','.join(b.token for b in self.bases)}}}"

    @property
    def kinked(self) -> bool:
        return any(base.kinked for base in self.bases)

    def satisfies_constraints(self) -> bool:
        return satisfies_hull(self.coefficients, self.hull)

    def check_constraints(self) -> None:
        if not self.satisfies_constraints():
            raise ConstraintError(self.hull, self.coefficients)

    def project(self) -> None:
        """Project in place so graph parameter references stay valid"""
        self.coefficients[...] = project(self.coefficients, self.hull)

    def __call__(self, x: Tensor) -> Tensor:
        return eval_combined(self, x)

    def __repr__(self) -> str:
        return f"CombinedActivation({self.name}, c={self.coefficients.tolist()})"


Activation = Union[BaseActivation, CombinedActivation]


def eval_base(f: BaseActivation, x: Tensor) -> Tensor:
    return f.value(x)


def eval_combined(a: CombinedActivation, x: Tensor) -> Tensor:
    a.check_constraints()
    x = as_tensor(x)
    total = a.coefficients[0] * a.bases[0].value(x)
    for c, base in zip(a.coefficients[1:], a.bases[1:]):
        total = total + c * base.value(x)
    return total


def combined_slope(a: CombinedActivation, x: Tensor) -> Tensor:
    """d/dx of the combination, right-sided at kinks"""
    x = as_tensor(x)
    slope = a.coefficients[0] * a.bases[0].derivative(x)
    for c, base in zip(a.coefficients[1:], a.bases[1:]):
        slope = slope + c * base.derivative(x)
    return slope


_COMBINED_PATTERN = re.compile(r"^(conv|aff)\{(.*)\}$")
_LRELU_PATTERN = re.compile(r"^lrelu(?:\((.*)\))?$")


def _parse_base(token: str, spec: str) -> BaseActivation:
    if token in BASE_ACTIVATIONS:
        return BASE_ACTIVATIONS[token]
    match = _LRELU_PATTERN.match(token)
    if match:
        if match.group(1) is None:
            return lrelu()
        try:
            return lrelu(float(match.group(1)))
        except ValueError:
            raise ActivationSpecError(spec, f"bad leakage '{match.group(1)}'")
    raise ActivationSpecError(spec, f"unknown activation '{token}'")


def parse_activation(spec: str) -> Activation:
    """Parse 'relu', 'lrelu(0.01)', 'conv{id,relu,tanh}', 'aff{id,relu}', ..."""
    if not isinstance(spec, str) or not spec.strip():
        raise ActivationSpecError(str(spec), "empty spec")
    compact = re.sub(r"\s+", "", spec).lower()
    match = _COMBINED_PATTERN.match(compact)
    if match:
        hull = HullKind.CONVEX if match.group(1) == "conv" else HullKind.AFFINE
        tokens = match.group(2).split(",")
        if not all(tokens):
            raise ActivationSpecError(spec, "empty base activation")
        bases = [_parse_base(token, spec) for token in tokens]
        try:
            return CombinedActivation(hull, bases)
        except ValueError as e:
            raise ActivationSpecError(spec, str(e))
    return _parse_base(compact, spec)
