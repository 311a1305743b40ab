#!/usr/bin/env python3
"""
Layers - Declarative network specs, presets and the parameterized Network

A NetworkSpec lists layers in order; build() turns it into a Network whose
parameters are plain float64 arrays. Each forward pass builds a fresh
autodiff Graph over those arrays, so optimizer updates are in place.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import autodiff
from activations import (
    Activation,
    ActivationError,
    CombinedActivation,
    HullKind,
    parse_activation,
)
from autodiff import Graph, Node, ShapeError, Tensor, as_tensor

SOFTMAX = "softmax"
SPEC_KEY = "__spec__"


class NetworkError(Exception):
    """Base exception for network construction and use"""


class NetworkSpecError(NetworkError):
    """A layer does not fit the shape produced by the layers before it"""

    def __init__(self, layer_index: int, message: str):
        super().__init__(f"Layer {layer_index}: {message}")
        self.layer_index = layer_index


class LabelError(NetworkError, autodiff.LabelError):
    """Class label outside [0, num_classes)"""


class LayerKind(Enum):
    DENSE = "dense"
    CONV2D = "conv2d"
    MAXPOOL = "maxpool"
    DROPOUT = "dropout"
    FLATTEN = "flatten"


@dataclass
class LayerSpec:
    kind: LayerKind
    units: int = 0
    filters: int = 0
    kernel: Tuple[int, int] = (0, 0)
    pool: Tuple[int, int] = (2, 2)
    rate: float = 0.0
    padding: str = "valid"
    activation: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind is LayerKind.DENSE:
            data["units"] = self.units
        elif self.kind is LayerKind.CONV2D:
            data.update(
                filters=self.filters, kernel=list(self.kernel), padding=self.padding
            )
        elif self.kind is LayerKind.MAXPOOL:
            data["pool"] = list(self.pool)
        elif self.kind is LayerKind.DROPOUT:
            data["rate"] = self.rate
        if self.activation is not None:
            data["activation"] = self.activation
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LayerSpec":
        return cls(
            kind=LayerKind(data["kind"]),
            units=int(data.get("units", 0)),
            filters=int(data.get("filters", 0)),
            kernel=tuple(data.get("kernel", (0, 0))),  # type: ignore[arg-type]
            pool=tuple(data.get("pool", (2, 2))),  # type: ignore[arg-type]
            rate=float(data.get("rate", 0.0)),
            padding=data.get("padding", "valid"),
            activation=data.get("activation"),
        )


def dense(units: int, activation: Optional[str] = None) -> LayerSpec:
    return LayerSpec(LayerKind.DENSE, units=units, activation=activation)


def conv2d(
    filters: int, kernel: int, activation: Optional[str] = None, padding: str = "valid"
) -> LayerSpec:
    return LayerSpec(
        LayerKind.CONV2D,
        filters=filters,
        kernel=(kernel, kernel),
        padding=padding,
        activation=activation,
    )


def maxpool(size: int = 2) -> LayerSpec:
    return LayerSpec(LayerKind.MAXPOOL, pool=(size, size))


def dropout(rate: float) -> LayerSpec:
    return LayerSpec(LayerKind.DROPOUT, rate=rate)


def flatten() -> LayerSpec:
    return LayerSpec(LayerKind.FLATTEN)


@dataclass
class NetworkSpec:
    input_shape: Tuple[int, int, int]
    layers: List[LayerSpec] = field(default_factory=list)
    num_classes: int = 10

    def output_shapes(self) -> List[Tuple[int, ...]]:
        """Per-sample output shape of every layer; raises on the first misfit"""
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise NetworkSpecError(0, f"input shape must be (C, H, W), got {self.input_shape}")
        if not self.layers:
            raise NetworkSpecError(0, "network has no layers")

        shape: Tuple[int, ...] = tuple(self.input_shape)
        shapes = []
        for index, layer in enumerate(self.layers):
            shape = _layer_output_shape(index, layer, shape)
            if layer.activation is not None and layer.activation != SOFTMAX:
                try:
                    parse_activation(layer.activation)
                except ActivationError as e:
                    raise NetworkSpecError(index, str(e))
            shapes.append(shape)

        last = self.layers[-1]
        if last.kind is not LayerKind.DENSE or last.activation != SOFTMAX:
            raise NetworkSpecError(
                len(self.layers) - 1, "final layer must be dense with softmax activation"
            )
        if last.units != self.num_classes:
            raise NetworkSpecError(
                len(self.layers) - 1,
                f"classifier has {last.units} units for {self.num_classes} classes",
            )
        for index, layer in enumerate(self.layers[:-1]):
            if layer.activation == SOFTMAX:
                raise NetworkSpecError(index, "softmax is only allowed on the final layer")
        return shapes

    def validate(self) -> None:
        self.output_shapes()

    def hidden_activations(self) -> List[str]:
        return [
            layer.activation
            for layer in self.layers
            if layer.activation is not None and layer.activation != SOFTMAX
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkSpec":
        return cls(
            input_shape=tuple(data["input_shape"]),  # type: ignore[arg-type]
            layers=[LayerSpec.from_dict(layer) for layer in data["layers"]],
            num_classes=int(data["num_classes"]),
        )


def _layer_output_shape(
    index: int, layer: LayerSpec, shape: Tuple[int, ...]
) -> Tuple[int, ...]:
    kind = layer.kind
    if kind is LayerKind.DENSE:
        if len(shape) != 1:
            raise NetworkSpecError(index, f"dense needs a flat input, got {shape}; add flatten")
        if layer.units < 1:
            raise NetworkSpecError(index, f"units must be positive, got {layer.units}")
        return (layer.units,)

    if kind is LayerKind.CONV2D:
        if len(shape) != 3:
            raise NetworkSpecError(index, f"conv2d needs (C, H, W) input, got {shape}")
        kh, kw = layer.kernel
        if layer.filters < 1 or kh < 1 or kw < 1:
            raise NetworkSpecError(index, "filters and kernel dims must be positive")
        if layer.padding not in ("valid", "same"):
            raise NetworkSpecError(index, f"unknown padding '{layer.padding}'")
        _, h, w = shape
        if layer.padding == "same":
            return (layer.filters, h, w)
        if h < kh or w < kw:
            raise NetworkSpecError(index, f"kernel {layer.kernel} larger than input {shape}")
        return (layer.filters, h - kh + 1, w - kw + 1)

    if kind is LayerKind.MAXPOOL:
        if len(shape) != 3:
            raise NetworkSpecError(index, f"maxpool needs (C, H, W) input, got {shape}")
        ph, pw = layer.pool
        if ph < 1 or pw < 1 or shape[1] < ph or shape[2] < pw:
            raise NetworkSpecError(index, f"pool {layer.pool} does not fit input {shape}")
        return (shape[0], shape[1] // ph, shape[2] // pw)

    if kind is LayerKind.DROPOUT:
        if not 0.0 <= layer.rate < 1.0:
            raise NetworkSpecError(index, f"drop rate must be in [0, 1), got {layer.rate}")
        return shape

    return (int(np.prod(shape)),)


# -- presets ---------------------------------------------------------------

PRESETS = ("lenet", "kerasnet-mini", "tiny")

ActivationChoice = Union[str, Sequence[str]]


def _activation_for(choice: ActivationChoice, slot: int, total: int) -> str:
    if isinstance(choice, str):
        return choice
    if len(choice) != total:
        raise ValueError(
            f"Activation list has {len(choice)} entries but the network has "
            f"{total} hidden activations"
        )
    return choice[slot]


def preset(
    name: str,
    activation: ActivationChoice,
    input_shape: Tuple[int, int, int] = (1, 28, 28),
    num_classes: int = 10,
) -> NetworkSpec:
    """Build a named architecture with the given hidden activation(s)"""
    if name == "lenet":
        hidden = 3
        layers = [
            conv2d(20, 5, "a0"),
            maxpool(2),
            conv2d(50, 5, "a1"),
            maxpool(2),
            flatten(),
            dense(500, "a2"),
            dense(num_classes, SOFTMAX),
        ]
    elif name == "kerasnet-mini":
        # KerasNet with filter and unit counts halved
        hidden = 5
        layers = [
            conv2d(16, 3, "a0", padding="same"),
            conv2d(16, 3, "a1", padding="same"),
            maxpool(2),
            dropout(0.25),
            conv2d(32, 3, "a2", padding="same"),
            conv2d(32, 3, "a3", padding="same"),
            maxpool(2),
            dropout(0.25),
            flatten(),
            dense(256, "a4"),
            dropout(0.5),
            dense(num_classes, SOFTMAX),
        ]
    elif name == "tiny":
        hidden = 2
        layers = [
            conv2d(4, 3, "a0"),
            conv2d(4, 3, "a1"),
            maxpool(2),
            flatten(),
            dense(num_classes, SOFTMAX),
        ]
    else:
        raise ValueError(f"Unknown architecture '{name}'. Choose from: {', '.join(PRESETS)}")

    slot = 0
    for layer in layers:
        if layer.activation is not None and layer.activation != SOFTMAX:
            layer.activation = _activation_for(activation, slot, hidden)
            slot += 1

    spec = NetworkSpec(tuple(input_shape), layers, num_classes)  # type: ignore[arg-type]
    spec.validate()
    return spec


# -- network ---------------------------------------------------------------


def _glorot_uniform(
    rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int
) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Network:
    """Parameters plus per-layer activations for one NetworkSpec"""

    def __init__(
        self,
        spec: NetworkSpec,
        params: Dict[str, Tensor],
        activations: Dict[int, Activation],
    ):
        self.spec = spec
        self.params = params
        self.activations = activations

    def combined_activations(self) -> Dict[int, CombinedActivation]:
        return {
            index: act
            for index, act in self.activations.items()
            if isinstance(act, CombinedActivation)
        }

    def coefficient_hulls(self) -> Dict[str, HullKind]:
        """Parameter name -> hull for every learnable coefficient vector"""
        return {
            f"layer{index}.coefficients": act.hull
            for index, act in self.combined_activations().items()
        }

    def weight_names(self) -> List[str]:
        return [name for name in self.params if name.endswith(".weight")]

    def coefficients(self) -> Dict[str, List[float]]:
        return {
            f"layer{index}": act.coefficients.tolist()
            for index, act in self.combined_activations().items()
        }

    def check_constraints(self) -> None:
        for act in self.combined_activations().values():
            act.check_constraints()

    def build_graph(
        self, with_loss: bool = False, check_constraints: bool = True
    ) -> Tuple[Graph, Node]:
        """Graph over the live parameter arrays; returns (graph, logits or loss)"""
        if check_constraints:
            self.check_constraints()
        graph = Graph()
        x = graph.input("images")
        for index, layer in enumerate(self.spec.layers):
            prefix = f"layer{index}"
            kind = layer.kind
            if kind is LayerKind.CONV2D:
                w = graph.param(f"{prefix}.weight", self.params[f"{prefix}.weight"])
                b = graph.param(f"{prefix}.bias", self.params[f"{prefix}.bias"])
                x = graph.conv2d(x, w, padding=layer.padding, name=f"{prefix}.conv")
                x = graph.bias_add(x, b, name=f"{prefix}.linear")
            elif kind is LayerKind.DENSE:
                w = graph.param(f"{prefix}.weight", self.params[f"{prefix}.weight"])
                b = graph.param(f"{prefix}.bias", self.params[f"{prefix}.bias"])
                x = graph.matmul(x, w, name=f"{prefix}.matmul")
                x = graph.bias_add(x, b, name=f"{prefix}.linear")
            elif kind is LayerKind.MAXPOOL:
                x = graph.maxpool2d(x, layer.pool, name=f"{prefix}.pool")
            elif kind is LayerKind.DROPOUT:
                x = graph.dropout(x, layer.rate, name=f"{prefix}.dropout")
            else:
                x = graph.flatten(x, name=f"{prefix}.flatten")

            act = self.activations.get(index)
            if isinstance(act, CombinedActivation):
                c = graph.param(f"{prefix}.coefficients", act.coefficients)
                x = graph.combine(x, c, act.bases, name=f"{prefix}.activation")
            elif act is not None:
                x = graph.activate(x, act, name=f"{prefix}.activation")

        if not with_loss:
            return graph, x
        labels = graph.input("labels")
        return graph, graph.softmax_xent(x, labels, name="loss")

    def _check_batch(self, images: Any) -> Tensor:
        batch = as_tensor(images)
        expected = tuple(self.spec.input_shape)
        if batch.ndim != 4 or batch.shape[1:] != expected or batch.shape[0] == 0:
            raise ShapeError("images", ("N",) + expected, batch.shape)
        return batch

    def forward(
        self,
        images: Any,
        rng: Optional[np.random.Generator] = None,
        training: bool = False,
    ) -> Tensor:
        """Logits (pre-softmax) for a batch"""
        batch = self._check_batch(images)
        graph, logits = self.build_graph()
        graph.forward({"images": batch}, rng=rng, training=training)
        assert logits.value is not None
        return logits.value

    def loss_and_grads(
        self,
        images: Any,
        labels: Any,
        rng: Optional[np.random.Generator] = None,
        training: bool = True,
        check_constraints: bool = True,
    ) -> Tuple[float, Dict[str, Tensor], Graph]:
        batch = self._check_batch(images)
        graph, loss = self.build_graph(with_loss=True, check_constraints=check_constraints)
        try:
            graph.forward(
                {"images": batch, "labels": np.asarray(labels)}, rng=rng, training=training
            )
        except autodiff.LabelError as e:
            raise LabelError(str(e)) from e
        grads = graph.backward(loss)
        assert loss.value is not None
        return float(loss.value), grads, graph

    def predict(self, images: Any) -> np.ndarray:
        return self.forward(images).argmax(axis=1)

    def save(self, path: Union[str, Path]) -> None:
        """Write parameters and the JSON spec into one .npz file"""
        payload = {name: array for name, array in self.params.items()}
        payload[SPEC_KEY] = np.array(json.dumps(self.spec.to_dict()))
        with open(path, "wb") as f:
            np.savez(f, **payload)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Network":
        try:
            with np.load(path, allow_pickle=False) as data:
                if SPEC_KEY not in data.files:
                    raise NetworkError(f"{path} has no embedded network spec")
                spec = NetworkSpec.from_dict(json.loads(str(data[SPEC_KEY])))
                net = build(spec, seed=0)
                for name, array in net.params.items():
                    if name not in data.files:
                        raise NetworkError(f"{path} is missing parameter '{name}'")
                    stored = data[name]
                    if stored.shape != array.shape:
                        raise NetworkError(
                            f"Parameter '{name}' has shape {stored.shape}, "
                            f"expected {array.shape}"
                        )
                    array[...] = stored
        except (OSError, ValueError, KeyError) as e:
            raise NetworkError(f"Could not load model from {path}: {e}") from e
        return net


def build(spec: NetworkSpec, seed: int) -> Network:
    """Initialize parameters deterministically from seed"""
    shapes = spec.output_shapes()
    rng = np.random.default_rng(seed)
    params: Dict[str, Tensor] = {}
    activations: Dict[int, Activation] = {}
    in_shape: Tuple[int, ...] = tuple(spec.input_shape)

    for index, layer in enumerate(spec.layers):
        prefix = f"layer{index}"
        if layer.kind is LayerKind.CONV2D:
            kh, kw = layer.kernel
            channels = in_shape[0]
            params[f"{prefix}.weight"] = _glorot_uniform(
                rng,
                (layer.filters, channels, kh, kw),
                channels * kh * kw,
                layer.filters * kh * kw,
            )
            params[f"{prefix}.bias"] = np.zeros(layer.filters)
        elif layer.kind is LayerKind.DENSE:
            fan_in = in_shape[0]
            params[f"{prefix}.weight"] = _glorot_uniform(
                rng, (fan_in, layer.units), fan_in, layer.units
            )
            params[f"{prefix}.bias"] = np.zeros(layer.units)

        if layer.activation is not None and layer.activation != SOFTMAX:
            act = parse_activation(layer.activation)
            activations[index] = act
            if isinstance(act, CombinedActivation):
                params[f"{prefix}.coefficients"] = act.coefficients
        in_shape = shapes[index]

    return Network(spec, params, activations)


def forward_train(
    net: Network, batch: Any, rng: np.random.Generator
) -> Tensor:
    """Training-mode logits: dropout active and driven by rng"""
    return net.forward(batch, rng=rng, training=True)


def loss_softmax_xent(logits: Any, labels: Any) -> Tuple[float, Tensor]:
    """Mean cross-entropy and its gradient (softmax - onehot) / batch"""
    try:
        return autodiff.softmax_cross_entropy(logits, labels)
    except autodiff.LabelError as e:
        raise LabelError(str(e)) from e
