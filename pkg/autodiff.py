#!/usr/bin/env python3
"""
Autodiff - Dense float64 tensors and a static reverse-mode computation graph

A Graph is rebuilt for every batch. Nodes are appended in construction order,
which is also a valid topological order, so forward walks the node list once
and backward walks it in reverse.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

Tensor = npt.NDArray[np.float64]


class AutodiffError(Exception):
    """Base exception for graph construction and execution"""


class ShapeError(AutodiffError):
    """An op received operands whose shapes do not fit its signature"""

    def __init__(self, node: str, expected: Any, actual: Any, detail: str = ""):
        message = f"Shape mismatch at node '{node}': expected {expected}, got {actual}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.node = node
        self.expected = expected
        self.actual = actual


class GraphError(AutodiffError):
    """Graph is malformed or used out of order"""


class LabelError(AutodiffError):
    """Class label outside [0, num_classes)"""


class ScalarFunction(Protocol):
    """Elementwise function with a (right-sided at kinks) derivative"""

    name: str

    def value(self, x: Tensor) -> Tensor: ...

    def derivative(self, x: Tensor) -> Tensor: ...


class OpKind(Enum):
    INPUT = "input"
    PARAM = "param"
    ADD = "add"
    MUL = "mul"
    MATMUL = "matmul"
    BIAS_ADD = "bias_add"
    SUM = "sum"
    CONV2D = "conv2d"
    MAXPOOL2D = "maxpool2d"
    DROPOUT = "dropout"
    FLATTEN = "flatten"
    ACTIVATE = "activate"
    COMBINE = "combine"
    SOFTMAX_XENT = "softmax_xent"


def as_tensor(value: Any) -> Tensor:
    """Convert array-like input to a float64 ndarray"""
    return np.asarray(value, dtype=np.float64)


@dataclass(eq=False)
class Node:
    name: str
    op: OpKind
    inputs: List["Node"]
    attrs: Dict[str, Any] = field(default_factory=dict)
    value: Optional[Tensor] = None
    gradient: Optional[Tensor] = None
    cache: Dict[str, Any] = field(default_factory=dict)

    @property
    def shape(self) -> Tuple[int, ...]:
        if self.value is None:
            raise GraphError(f"Node '{self.name}' has not been evaluated")
        return tuple(self.value.shape)


def softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: Any) -> Tuple[float, Tensor]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits"""
    logits = as_tensor(logits)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise ShapeError("softmax_xent", "(batch, classes)", logits.shape)
    classes = _as_labels(labels, logits.shape[0], logits.shape[1])
    batch = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = float(np.mean(log_norm - shifted[rows, classes]))
    grad = softmax(logits)
    grad[rows, classes] -= 1.0
    return loss, grad / batch


def _as_labels(labels: Any, batch: int, num_classes: int) -> npt.NDArray[np.int64]:
    raw = np.asarray(labels)
    if raw.shape != (batch,):
        raise ShapeError("labels", (batch,), raw.shape)
    if not np.all(np.equal(np.mod(raw, 1), 0)):
        raise LabelError("Labels must be integral class indices")
    classes = raw.astype(np.int64)
    if classes.size and (classes.min() < 0 or classes.max() >= num_classes):
        raise LabelError(
            f"Label out of range [0, {num_classes}): "
            f"min {classes.min()}, max {classes.max()}"
        )
    return classes


def _unbroadcast(grad: Tensor, shape: Tuple[int, ...]) -> Tensor:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _same_padding(kernel: int) -> Tuple[int, int]:
    return (kernel - 1) // 2, kernel // 2


class Graph:
    """Static computation graph with reverse-mode gradients"""

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self._by_name: Dict[str, Node] = {}

    # -- construction -----------------------------------------------------

    def _add(
        self,
        op: OpKind,
        inputs: Sequence[Node],
        name: Optional[str] = None,
        **attrs: Any,
    ) -> Node:
        for node in inputs:
            if self._by_name.get(node.name) is not node:
                raise GraphError(f"Node '{node.name}' belongs to another graph")
        node_name = name or f"{op.value}_{len(self.nodes)}"
        if node_name in self._by_name:
            raise GraphError(f"Duplicate node name: {node_name}")
        node = Node(node_name, op, list(inputs), dict(attrs))
        self.nodes.append(node)
        self._by_name[node_name] = node
        return node

    def input(self, name: str) -> Node:
        return self._add(OpKind.INPUT, [], name)

    def param(self, name: str, array: Tensor) -> Node:
        """Bind a parameter array by reference; optimizers update it in place"""
        return self._add(OpKind.PARAM, [], name, array=as_tensor(array))

    def add(self, a: Node, b: Node, name: Optional[str] = None) -> Node:
        return self._add(OpKind.ADD, [a, b], name)

    def mul(self, a: Node, b: Node, name: Optional[str] = None) -> Node:
        return self._add(OpKind.MUL, [a, b], name)

    def matmul(self, a: Node, b: Node, name: Optional[str] = None) -> Node:
        return self._add(OpKind.MATMUL, [a, b], name)

    def bias_add(self, x: Node, bias: Node, name: Optional[str] = None) -> Node:
        """Add a per-channel bias along axis 1 (dense features or conv filters)"""
        return self._add(OpKind.BIAS_ADD, [x, bias], name)

    def sum(self, x: Node, name: Optional[str] = None) -> Node:
        return self._add(OpKind.SUM, [x], name)

    def conv2d(
        self, x: Node, weight: Node, padding: str = "valid", name: Optional[str] = None
    ) -> Node:
        if padding not in ("valid", "same"):
            raise GraphError(f"Unknown padding '{padding}' (use valid or same)")
        return self._add(OpKind.CONV2D, [x, weight], name, padding=padding)

    def maxpool2d(
        self, x: Node, pool: Tuple[int, int], name: Optional[str] = None
    ) -> Node:
        return self._add(OpKind.MAXPOOL2D, [x], name, pool=tuple(pool))

    def dropout(self, x: Node, rate: float, name: Optional[str] = None) -> Node:
        if not 0.0 <= rate < 1.0:
            raise GraphError(f"Dropout rate must be in [0, 1), got {rate}")
        return self._add(OpKind.DROPOUT, [x], name, rate=rate)

    def flatten(self, x: Node, name: Optional[str] = None) -> Node:
        return self._add(OpKind.FLATTEN, [x], name)

    def activate(
        self, x: Node, fn: ScalarFunction, name: Optional[str] = None
    ) -> Node:
        return self._add(OpKind.ACTIVATE, [x], name, fn=fn)

    def combine(
        self,
        x: Node,
        coefficients: Node,
        bases: Sequence[ScalarFunction],
        name: Optional[str] = None,
    ) -> Node:
        """Sum_i c_i * f_i(x) with c a learnable vector"""
        return self._add(OpKind.COMBINE, [x, coefficients], name, bases=tuple(bases))

    def softmax_xent(
        self, logits: Node, labels: Node, name: Optional[str] = None
    ) -> Node:
        return self._add(OpKind.SOFTMAX_XENT, [logits, labels], name)

    def node(self, name: str) -> Node:
        try:
            return self._by_name[name]
        except KeyError:
            raise GraphError(f"No node named '{name}'")

    def parameters(self) -> Dict[str, Node]:
        return {n.name: n for n in self.nodes if n.op is OpKind.PARAM}

    # -- execution --------------------------------------------------------

    def forward(
        self,
        inputs: Dict[str, Any],
        rng: Optional[np.random.Generator] = None,
        training: bool = False,
    ) -> Dict[str, Tensor]:
        """Evaluate every node once, in construction order"""
        for node in self.nodes:
            node.cache = {}
            node.gradient = None
            if node.op is OpKind.INPUT:
                if node.name not in inputs:
                    raise GraphError(f"Input '{node.name}' is not bound")
                value = as_tensor(inputs[node.name])
                if value.size == 0:
                    raise ShapeError(node.name, "non-empty tensor", value.shape)
                node.value = value
            elif node.op is OpKind.PARAM:
                node.value = node.attrs["array"]
            else:
                node.value = self._forward_op(node, rng, training)
        return {node.name: node.value for node in self.nodes if node.value is not None}

    def backward(self, loss: Node) -> Dict[str, Tensor]:
        """Reverse-mode accumulation from a scalar loss to every parameter"""
        if loss.value is None:
            raise GraphError("forward must run before backward")
        if loss.value.size != 1:
            raise GraphError(
                f"Loss node '{loss.name}' must be scalar, got shape {loss.value.shape}"
            )
        for node in self.nodes:
            if node.value is not None:
                node.gradient = np.zeros_like(node.value)
        assert loss.gradient is not None
        loss.gradient[...] = 1.0

        stop = self.nodes.index(loss)
        for node in reversed(self.nodes[: stop + 1]):
            if not node.inputs:
                continue
            for parent, grad in zip(node.inputs, self._backward_op(node)):
                if grad is not None and parent.gradient is not None:
                    parent.gradient += grad

        return {
            name: node.gradient
            for name, node in self.parameters().items()
            if node.gradient is not None
        }

    # -- op kernels -------------------------------------------------------

    def _forward_op(
        self, node: Node, rng: Optional[np.random.Generator], training: bool
    ) -> Tensor:
        values = [parent.value for parent in node.inputs]
        op = node.op

        if op in (OpKind.ADD, OpKind.MUL):
            a, b = values
            try:
                np.broadcast_shapes(a.shape, b.shape)
            except ValueError:
                raise ShapeError(node.name, a.shape, b.shape, "not broadcastable")
            return a + b if op is OpKind.ADD else a * b

        if op is OpKind.MATMUL:
            a, b = values
            if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
                raise ShapeError(
                    node.name, f"(m, {a.shape[-1]}) @ ({a.shape[-1]}, n)",
                    (a.shape, b.shape),
                )
            return a @ b

        if op is OpKind.BIAS_ADD:
            x, bias = values
            if x.ndim < 2 or bias.shape != (x.shape[1],):
                raise ShapeError(
                    node.name, "(channels,) bias on (N, channels, ...)",
                    (x.shape, bias.shape),
                )
            return x + bias.reshape((1, -1) + (1,) * (x.ndim - 2))

        if op is OpKind.SUM:
            return np.asarray(values[0].sum(), dtype=np.float64)

        if op is OpKind.CONV2D:
            return self._conv2d_forward(node, values[0], values[1])

        if op is OpKind.MAXPOOL2D:
            return self._maxpool_forward(node, values[0])

        if op is OpKind.DROPOUT:
            x = values[0]
            rate = node.attrs["rate"]
            if not training or rate == 0.0:
                node.cache["mask"] = None
                return x
            if rng is None:
                raise GraphError(f"Dropout node '{node.name}' needs an rng in training")
            mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
            node.cache["mask"] = mask
            return x * mask

        if op is OpKind.FLATTEN:
            x = values[0]
            if x.ndim < 2:
                raise ShapeError(node.name, "(batch, ...)", x.shape)
            return x.reshape(x.shape[0], -1)

        if op is OpKind.ACTIVATE:
            return node.attrs["fn"].value(values[0])

        if op is OpKind.COMBINE:
            x, coefficients = values
            bases = node.attrs["bases"]
            if coefficients.shape != (len(bases),):
                raise ShapeError(node.name, (len(bases),), coefficients.shape)
            outputs = [fn.value(x) for fn in bases]
            node.cache["outputs"] = outputs
            total = coefficients[0] * outputs[0]
            for c, out in zip(coefficients[1:], outputs[1:]):
                total = total + c * out
            return total

        if op is OpKind.SOFTMAX_XENT:
            loss, grad = softmax_cross_entropy(values[0], values[1])
            node.cache["grad"] = grad
            return np.asarray(loss, dtype=np.float64)

        raise GraphError(f"Unsupported op {op}")

    def _backward_op(self, node: Node) -> List[Optional[Tensor]]:
        g = node.gradient
        assert g is not None
        values = [parent.value for parent in node.inputs]
        op = node.op

        if op is OpKind.ADD:
            a, b = values
            return [_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)]

        if op is OpKind.MUL:
            a, b = values
            return [_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)]

        if op is OpKind.MATMUL:
            a, b = values
            return [g @ b.T, a.T @ g]

        if op is OpKind.BIAS_ADD:
            axes = (0,) + tuple(range(2, g.ndim))
            return [g, g.sum(axis=axes)]

        if op is OpKind.SUM:
            return [np.broadcast_to(g, values[0].shape).copy()]

        if op is OpKind.CONV2D:
            return self._conv2d_backward(node, g, values[1])

        if op is OpKind.MAXPOOL2D:
            return [self._maxpool_backward(node, g, values[0])]

        if op is OpKind.DROPOUT:
            mask = node.cache.get("mask")
            return [g if mask is None else g * mask]

        if op is OpKind.FLATTEN:
            return [g.reshape(values[0].shape)]

        if op is OpKind.ACTIVATE:
            return [g * node.attrs["fn"].derivative(values[0])]

        if op is OpKind.COMBINE:
            x, coefficients = values
            bases = node.attrs["bases"]
            slope = coefficients[0] * bases[0].derivative(x)
            for c, fn in zip(coefficients[1:], bases[1:]):
                slope = slope + c * fn.derivative(x)
            grad_c = np.array([np.sum(g * out) for out in node.cache["outputs"]])
            return [g * slope, grad_c]

        if op is OpKind.SOFTMAX_XENT:
            return [g * node.cache["grad"], None]

        raise GraphError(f"Unsupported op {op}")

    def _conv2d_forward(self, node: Node, x: Tensor, w: Tensor) -> Tensor:
        if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
            raise ShapeError(
                node.name, "x (N, C, H, W) with weight (F, C, kh, kw)", (x.shape, w.shape)
            )
        kh, kw = w.shape[2], w.shape[3]
        if node.attrs["padding"] == "same":
            pads = ((0, 0), (0, 0), _same_padding(kh), _same_padding(kw))
            x = np.pad(x, pads)
        if x.shape[2] < kh or x.shape[3] < kw:
            raise ShapeError(node.name, f"spatial size >= {(kh, kw)}", x.shape[2:])
        windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
        node.cache["windows"] = windows
        node.cache["padded_shape"] = x.shape
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def _conv2d_backward(self, node: Node, g: Tensor, w: Tensor) -> List[Optional[Tensor]]:
        windows = node.cache["windows"]
        grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        kh, kw = w.shape[2], w.shape[3]
        out_h, out_w = g.shape[2], g.shape[3]
        grad_x = np.zeros(node.cache["padded_shape"])
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(g, w[:, :, i, j], axes=([1], [0]))
                grad_x[:, :, i : i + out_h, j : j + out_w] += contrib.transpose(0, 3, 1, 2)
        if node.attrs["padding"] == "same":
            top, _ = _same_padding(kh)
            left, _ = _same_padding(kw)
            height, width = node.inputs[0].shape[2:]
            grad_x = grad_x[:, :, top : top + height, left : left + width]
        return [grad_x, grad_w]

    def _maxpool_forward(self, node: Node, x: Tensor) -> Tensor:
        ph, pw = node.attrs["pool"]
        if x.ndim != 4 or x.shape[2] < ph or x.shape[3] < pw:
            raise ShapeError(node.name, f"(N, C, >={ph}, >={pw})", x.shape)
        n, c, h, w = x.shape
        out_h, out_w = h // ph, w // pw
        blocks = (
            x[:, :, : out_h * ph, : out_w * pw]
            .reshape(n, c, out_h, ph, out_w, pw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, out_h, out_w, ph * pw)
        )
        argmax = blocks.argmax(axis=-1)
        node.cache["argmax"] = argmax
        node.cache["blocks_shape"] = blocks.shape
        return np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]

    def _maxpool_backward(self, node: Node, g: Tensor, x: Tensor) -> Tensor:
        ph, pw = node.attrs["pool"]
        n, c, out_h, out_w, _ = node.cache["blocks_shape"]
        grad_blocks = np.zeros(node.cache["blocks_shape"])
        np.put_along_axis(grad_blocks, node.cache["argmax"][..., None], g[..., None], axis=-1)
        grad_crop = (
            grad_blocks.reshape(n, c, out_h, out_w, ph, pw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, out_h * ph, out_w * pw)
        )
        grad_x = np.zeros_like(x)
        grad_x[:, :, : out_h * ph, : out_w * pw] = grad_crop
        return grad_x


def forward(
    graph: Graph,
    inputs: Dict[str, Any],
    rng: Optional[np.random.Generator] = None,
    training: bool = False,
) -> Dict[str, Tensor]:
    return graph.forward(inputs, rng=rng, training=training)


def backward(graph: Graph, loss: Node) -> Dict[str, Tensor]:
    return graph.backward(loss)
