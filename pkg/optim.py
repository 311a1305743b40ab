#!/usr/bin/env python3
"""
Optim - RMSProp and SGD steps with a projection hook for activation coefficients
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, Mapping, Optional

import numpy as np

from activations import HullKind, project
from autodiff import Tensor

RMSPROP = "rmsprop"
SGD = "sgd"
INVERSE = "inverse"
STEP = "step"


class OptimizerError(Exception):
    """Base exception for optimizers"""


class OptimizerConfigError(OptimizerError):
    """Hyperparameter outside its valid range"""


class StateShapeError(OptimizerError):
    """Parameter, gradient and state shapes disagree"""

    def __init__(self, name: str, expected: Any, actual: Any):
        super().__init__(f"'{name}': expected shape {expected}, got {actual}")
        self.name = name


@dataclass
class OptimizerConfig:
    kind: str = RMSPROP
    learning_rate: float = 1e-4
    decay: float = 1e-6
    momentum: float = 0.0
    weight_decay: float = 0.0
    rho: float = 0.9
    epsilon: float = 1e-8
    schedule: str = INVERSE
    step_epochs: int = 30
    step_factor: float = 0.1

    def validate(self) -> None:
        if self.kind not in (RMSPROP, SGD):
            raise OptimizerConfigError(f"Unknown optimizer '{self.kind}' (use rmsprop or sgd)")
        if not self.learning_rate > 0:
            raise OptimizerConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise OptimizerConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.decay < 0:
            raise OptimizerConfigError(f"decay must be >= 0, got {self.decay}")
        if self.weight_decay < 0:
            raise OptimizerConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not 0.0 <= self.rho < 1.0:
            raise OptimizerConfigError(f"rho must be in [0, 1), got {self.rho}")
        if not self.epsilon > 0:
            raise OptimizerConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if self.schedule not in (INVERSE, STEP):
            raise OptimizerConfigError(f"Unknown schedule '{self.schedule}' (use inverse or step)")
        if self.step_epochs < 1:
            raise OptimizerConfigError(f"step_epochs must be >= 1, got {self.step_epochs}")
        if not 0.0 < self.step_factor <= 1.0:
            raise OptimizerConfigError(f"step_factor must be in (0, 1], got {self.step_factor}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "OptimizerConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise OptimizerConfigError(f"Unknown optimizer keys: {', '.join(sorted(unknown))}")
        config = cls(**dict(data))
        config.validate()
        return config


@dataclass
class OptimizerState:
    updates: int = 0
    epoch: int = 0
    slots: Dict[str, Tensor] = field(default_factory=dict)


def effective_learning_rate(config: OptimizerConfig, state: OptimizerState) -> float:
    lr = config.learning_rate
    if config.schedule == STEP:
        lr *= config.step_factor ** (state.epoch // config.step_epochs)
    return lr / (1.0 + config.decay * state.updates)


def _slot(state: OptimizerState, name: str, like: Tensor) -> Tensor:
    slot = state.slots.get(name)
    if slot is None:
        slot = np.zeros_like(like)
        state.slots[name] = slot
    elif slot.shape != like.shape:
        raise StateShapeError(name, like.shape, slot.shape)
    return slot


def _update_one(
    name: str,
    p: Tensor,
    g: Tensor,
    state: OptimizerState,
    config: OptimizerConfig,
    lr: float,
    decay_weight: bool,
) -> None:
    if g.shape != p.shape:
        raise StateShapeError(name, p.shape, g.shape)
    if config.kind == RMSPROP:
        if decay_weight and config.weight_decay:
            g = g + config.weight_decay * p
        s = _slot(state, name, p)
        s *= config.rho
        s += (1.0 - config.rho) * g * g
        p -= lr * g / (np.sqrt(s) + config.epsilon)
    else:
        wd = config.weight_decay if decay_weight else 0.0
        v = _slot(state, name, p)
        v *= config.momentum
        v -= lr * (g + wd * p)
        p += v


def step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Tensor],
    state: OptimizerState,
    config: OptimizerConfig,
    weight_decay_names: Optional[Iterable[str]] = None,
) -> OptimizerState:
    """Update params in place and count one batch update

    Weight decay only touches names in weight_decay_names (defaults to
    every '*.weight' parameter).
    """
    if weight_decay_names is None:
        decayed = {name for name in params if name.endswith(".weight")}
    else:
        decayed = set(weight_decay_names)
    lr = effective_learning_rate(config, state)
    for name, p in params.items():
        if name not in grads:
            continue
        _update_one(name, p, grads[name], state, config, lr, name in decayed)
    state.updates += 1
    return state


def step_constrained(
    coefficients: Mapping[str, Tensor],
    grads: Mapping[str, Tensor],
    state: OptimizerState,
    config: OptimizerConfig,
    hulls: Mapping[str, HullKind],
) -> OptimizerState:
    """Step the coefficient vectors, then project each back onto its hull"""
    step(coefficients, grads, state, config, weight_decay_names=())
    for name, c in coefficients.items():
        c[...] = project(c, hulls[name])
    return state


class Optimizer:
    """Owns the state for one network's parameters across a run"""

    def __init__(self, config: OptimizerConfig, hulls: Mapping[str, HullKind]):
        config.validate()
        self.config = config
        self.hulls = dict(hulls)
        self.state = OptimizerState()

    @property
    def learning_rate(self) -> float:
        return effective_learning_rate(self.config, self.state)

    def apply(self, params: Mapping[str, Tensor], grads: Mapping[str, Tensor]) -> None:
        """One batch update: weights and biases, then projected coefficients"""
        plain = {n: p for n, p in params.items() if n not in self.hulls}
        constrained = {n: p for n, p in params.items() if n in self.hulls}
        updates = self.state.updates
        step(plain, grads, self.state, self.config)
        if constrained:
            # same batch, same learning rate
            self.state.updates = updates
            step_constrained(constrained, grads, self.state, self.config, self.hulls)

    def end_epoch(self) -> None:
        self.state.epoch += 1
