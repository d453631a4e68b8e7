"""Feed-forward ReLU networks and an injective map that is not bi-Lipschitz.

The map ``f : R -> R^2`` below is injective, yet ``||f(x) - f(-x)|| = 2`` for
every ``|x| > 1`` while ``|x - (-x)|`` grows without bound, so no positive
lower Lipschitz constant exists.  It is realised exactly by a two-layer ReLU
network.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DimensionMismatch


def relu(x):
    return np.maximum(x, 0.0)


@dataclass(frozen=True, eq=False)
class ReluNet:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        W = tuple(np.atleast_2d(np.asarray(w, dtype=float)) for w in self.weights)
        b = tuple(np.asarray(v, dtype=float).reshape(-1) for v in self.biases)
        if not W or len(W) != len(b):
            raise DimensionMismatch("need one bias per weight matrix and at least one layer")
        for k, (w, v) in enumerate(zip(W, b)):
            if w.shape[0] != v.shape[0]:
                raise DimensionMismatch(f"layer {k + 1}: weight has {w.shape[0]} rows, bias {v.shape[0]}")
            if k and w.shape[1] != W[k - 1].shape[0]:
                raise DimensionMismatch(
                    f"layer {k + 1} expects width {w.shape[1]}, previous layer has {W[k - 1].shape[0]}"
                )
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)


def relu_forward(net: ReluNet, x) -> np.ndarray:
    """Evaluate the network; the last layer is affine (no activation).

    Accepts a single input vector or a batch of shape ``(n, l_0)``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    h = np.atleast_2d(x.reshape(1, -1) if single else x)
    if h.shape[1] != net.widths[0]:
        raise DimensionMismatch(f"input has width {h.shape[1]}, network expects {net.widths[0]}")
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ W.T + b
        if k < net.depth - 1:
            h = relu(h)
    return h[0] if single else h


def paper_counterexample_net() -> ReluNet:
    """The two-layer network with widths (1, 3, 2) that computes :func:`f_piecewise`."""
    return ReluNet(
        weights=(np.array([[1.0], [1.0], [-1.0]]), np.array([[1.0, -1.0, 0.0], [0.0, 1.0, 1.0]])),
        biases=(np.array([1.0, -1.0, -1.0]), np.array([-1.0, 0.0])),
    )


def f_piecewise(x):
    """``-(1, x+1)`` for ``x < -1``, ``(x, 0)`` on ``[-1, 1]``, ``(1, x-1)`` for ``x > 1``.

    Vectorised: scalar input gives shape (2,), an array of shape (n,) gives (n, 2).
    """
    x = np.asarray(x, dtype=float)
    first = np.where(x < -1, -1.0, np.where(x > 1, 1.0, x))
    second = np.where(x < -1, -(x + 1), np.where(x > 1, x - 1, 0.0))
    return np.stack([first, second], axis=-1)


def extend_fd(x) -> np.ndarray:
    """``(f(x_1), x_2, ..., x_d)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size < 1:
        raise DimensionMismatch("need d >= 1")
    return np.concatenate([f_piecewise(x[0]), x[1:]])


def antipodal_ratio(x: float) -> float:
    """``||f(x) - f(-x)|| / |2x|``, which equals ``1/|x|`` once ``|x| > 1``."""
    return float(np.linalg.norm(f_piecewise(x) - f_piecewise(-x)) / abs(2 * x))


def parse_net(text: str) -> ReluNet:
    """Read a network from text.

    First non-comment line: the widths ``l_0 ... l_L``.  Then, for every layer,
    ``l_k`` rows of ``W_k`` (row-major), and finally one line per bias ``b_k``.
    """
    rows = [ln.split("#", 1)[0].replace(",", " ").split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    try:
        widths = [int(t) for t in rows[0]]
        nums = [[float(t) for t in r] for r in rows[1:]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed network file: {exc}") from None
    if len(widths) < 2:
        raise ConfigError("network needs at least input and output widths")
    weights, pos = [], 0
    for k in range(1, len(widths)):
        block = nums[pos:pos + widths[k]]
        pos += widths[k]
        if len(block) != widths[k] or any(len(r) != widths[k - 1] for r in block):
            raise ConfigError(f"weight matrix {k} does not have shape {widths[k]}x{widths[k - 1]}")
        weights.append(np.array(block))
    biases = nums[pos:]
    if len(biases) != len(weights) or any(len(b) != widths[k + 1] for k, b in enumerate(biases)):
        raise ConfigError("expected one bias line per layer with matching widths")
    return ReluNet(tuple(weights), tuple(np.array(b) for b in biases))


def load_net(path) -> ReluNet:
    return parse_net(Path(path).read_text())


def format_net(net: ReluNet) -> str:
    lines = [" ".join(str(w) for w in net.widths)]
    for W in net.weights:
        lines += [" ".join(repr(float(v)) for v in row) for row in W]
    lines += [" ".join(repr(float(v)) for v in b) for b in net.biases]
    return "\n".join(lines) + "\n"


def random_net(widths: Sequence[int], rng: np.random.Generator) -> ReluNet:
    """Random network with the given widths (handy for shape tests)."""
    W = tuple(rng.standard_normal((widths[k + 1], widths[k])) for k in range(len(widths) - 1))
    b = tuple(rng.standard_normal(widths[k + 1]) for k in range(len(widths) - 1))
    return ReluNet(W, b)
