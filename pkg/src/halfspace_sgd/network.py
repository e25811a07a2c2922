"""One-hidden-layer leaky-ReLU networks, losses, and exact gradients.

The model is f(x) = sum_j a_j * sigma(<w_j, x> + b_j) with
sigma(z) = max(alpha * z, z).  The outer weights a_j all share one
magnitude and are fixed unless explicitly marked trainable.  An optional
stack of square hidden-to-hidden matrices extends the model to a deeper
fully-connected variant with the same activation.

Parameter values are treated as immutable snapshots: every update
produces a new :class:`NetworkParams`.  All arithmetic is float64.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

LEAKY_RELU = "leaky_relu"
TANH = "tanh"
_ACTIVATIONS = (LEAKY_RELU, TANH)

_SERIAL_MAGIC = b"HSNW"
_SERIAL_VERSION = 1


class DimensionError(ValueError):
    """Shapes of an input do not match the network."""


class InvalidParamsError(ValueError):
    """Parameter values violate a structural invariant."""


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class LossSpec:
    """A convex, decreasing, 1-Lipschitz loss with -loss'(0) > 0.

    Only the binary cross-entropy loss log(1 + exp(-z)) is shipped; the
    constructor re-checks the required analytic conditions on a grid so
    that any future extension has to satisfy them too.
    """

    kind: str = "cross_entropy"

    def __post_init__(self):
        if self.kind != "cross_entropy":
            raise InvalidParamsError(f"unsupported loss kind: {self.kind!r}")
        self._validate_conditions()

    def loss(self, z):
        """loss(z); stable for large |z|."""
        z = np.asarray(z, dtype=np.float64)
        return np.where(z > 0, np.log1p(np.exp(-np.abs(z))),
                        -np.minimum(z, 0.0) + np.log1p(np.exp(-np.abs(z))))

    def dloss(self, z):
        """loss'(z) = -1 / (1 + exp(z))."""
        return -self.surrogate(z)

    def surrogate(self, z):
        """-loss'(z) = 1 / (1 + exp(z)), itself usable as a loss."""
        z = np.asarray(z, dtype=np.float64)
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = np.exp(-z[pos]) / (1.0 + np.exp(-z[pos]))
        out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
        return out if out.ndim else float(out)

    @property
    def surrogate_at_zero(self) -> float:
        return 0.5

    def _validate_conditions(self):
        grid = np.linspace(-30.0, 30.0, 601)
        d = np.asarray([self.dloss(z) for z in grid])
        if np.any(np.diff(d) < -1e-12):
            raise InvalidParamsError("loss derivative must be nondecreasing (convexity)")
        if np.any(d > 1e-12) or np.any(np.abs(d) > 1.0 + 1e-12):
            raise InvalidParamsError("loss must be decreasing and 1-Lipschitz")
        if -float(self.dloss(0.0)) <= 0.0:
            raise InvalidParamsError("-loss'(0) must be positive")
        tail = np.linspace(1.0, 100.0, 100)
        if np.any(np.asarray([-self.dloss(z) for z in tail]) > 1.0 / tail + 1e-12):
            raise InvalidParamsError("-loss'(z) must be at most 1/z for z >= 1")


# ---------------------------------------------------------------------------
# activations


def activation(z, kind: str, alpha: float):
    if kind == LEAKY_RELU:
        z = np.asarray(z, dtype=np.float64)
        return np.where(z >= 0, z, alpha * z)
    return np.tanh(z)


def activation_deriv(z, kind: str, alpha: float):
    """sigma'(z); at the leaky-ReLU kink the right derivative 1 is used."""
    if kind == LEAKY_RELU:
        z = np.asarray(z, dtype=np.float64)
        return np.where(z >= 0, 1.0, alpha)
    t = np.tanh(z)
    return 1.0 - t * t


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class NetworkParams:
    """Immutable snapshot of all network weights.

    Attributes:
        hidden_weights: (m, d) first-layer weights, rows w_j.
        outer_weights: (m,) outer weights, entries +-a for a common a > 0
            unless ``outer_trainable``.
        leaky_slope: alpha in (0, 1]; ignored for tanh.
        hidden_biases: optional (m,) biases on the first hidden layer.
        outer_trainable: whether the outer layer receives gradient.
        depth_extension: optional tuple of (m, m) matrices applied between
            the first hidden layer and the outer product.
        activation_kind: "leaky_relu" or "tanh".
    """

    hidden_weights: np.ndarray
    outer_weights: np.ndarray
    leaky_slope: float = 0.1
    hidden_biases: np.ndarray | None = None
    outer_trainable: bool = False
    depth_extension: tuple[np.ndarray, ...] | None = None
    activation_kind: str = LEAKY_RELU

    def __post_init__(self):
        W = np.asarray(self.hidden_weights, dtype=np.float64)
        a = np.asarray(self.outer_weights, dtype=np.float64)
        object.__setattr__(self, "hidden_weights", W)
        object.__setattr__(self, "outer_weights", a)
        if W.ndim != 2:
            raise DimensionError("hidden_weights must be an (m, d) matrix")
        m = W.shape[0]
        if a.shape != (m,):
            raise DimensionError("outer_weights must have length m")
        if not (0.0 < self.leaky_slope <= 1.0):
            raise InvalidParamsError(f"leaky_slope must lie in (0, 1], got {self.leaky_slope}")
        if self.activation_kind not in _ACTIVATIONS:
            raise InvalidParamsError(f"unknown activation {self.activation_kind!r}")
        if not np.isfinite(W).all() or not np.isfinite(a).all():
            raise InvalidParamsError("non-finite entries in weights")
        if self.hidden_biases is not None:
            b = np.asarray(self.hidden_biases, dtype=np.float64)
            object.__setattr__(self, "hidden_biases", b)
            if b.shape != (m,):
                raise DimensionError("hidden_biases must have length m")
            if not np.isfinite(b).all():
                raise InvalidParamsError("non-finite entries in biases")
        if self.depth_extension is not None:
            mats = tuple(np.asarray(M, dtype=np.float64) for M in self.depth_extension)
            object.__setattr__(self, "depth_extension", mats)
            for M in mats:
                if M.shape != (m, m):
                    raise DimensionError("depth_extension matrices must be (m, m)")
                if not np.isfinite(M).all():
                    raise InvalidParamsError("non-finite entries in depth_extension")

    @property
    def m(self) -> int:
        return self.hidden_weights.shape[0]

    @property
    def d(self) -> int:
        return self.hidden_weights.shape[1]

    @property
    def outer_magnitude(self) -> float:
        """Common |a_j|; raises if magnitudes are not uniform."""
        mags = np.abs(self.outer_weights)
        a = float(mags[0])
        if np.max(np.abs(mags - a)) > 1e-12 * max(a, 1.0):
            raise InvalidParamsError("outer weights do not share a common magnitude")
        return a


def balanced_outer_weights(m: int, magnitude: float | None = None,
                           rng: np.random.Generator | None = None) -> np.ndarray:
    """Outer weights +-a with ceil(m/2) positive entries first.

    Passing ``rng`` applies a seeded permutation to the sign pattern; the
    sign placement is immaterial for the analysis, balance just avoids
    degenerate one-sign draws at small m.
    """
    a = 1.0 / math.sqrt(m) if magnitude is None else float(magnitude)
    if a <= 0:
        raise InvalidParamsError("outer magnitude must be positive")
    out = np.full(m, -a)
    out[: (m + 1) // 2] = a
    if rng is not None:
        out = rng.permutation(out)
    return out


def init_params(m: int, d: int, rng: np.random.Generator, *,
                leaky_slope: float = 0.1, activation_kind: str = LEAKY_RELU,
                init_variance: float | None = None, outer_magnitude: float | None = None,
                use_biases: bool = False, outer_trainable: bool = False,
                depth: int = 1, shuffle_outer_signs: bool = False) -> NetworkParams:
    """Random initialization: hidden weights i.i.d. N(0, variance).

    ``init_variance`` defaults to 1/m.  ``depth`` counts hidden layers;
    depth > 1 adds (depth - 1) square hidden matrices, each initialized
    with variance 1/m.
    """
    var = (1.0 / m) if init_variance is None else float(init_variance)
    if var <= 0:
        raise InvalidParamsError("init_variance must be positive")
    sd = math.sqrt(var)
    W = rng.normal(0.0, sd, size=(m, d))
    outer = balanced_outer_weights(m, outer_magnitude,
                                   rng if shuffle_outer_signs else None)
    biases = np.zeros(m) if use_biases else None
    deep = None
    if depth > 1:
        deep = tuple(rng.normal(0.0, math.sqrt(1.0 / m), size=(m, m))
                     for _ in range(depth - 1))
    return NetworkParams(W, outer, leaky_slope=leaky_slope, hidden_biases=biases,
                         outer_trainable=outer_trainable, depth_extension=deep,
                         activation_kind=activation_kind)


# ---------------------------------------------------------------------------
# forward / gradients


def _hidden_states(params: NetworkParams, X: np.ndarray):
    """Pre- and post-activations per layer for a batch X of shape (n, d)."""
    Z = X @ params.hidden_weights.T
    if params.hidden_biases is not None:
        Z = Z + params.hidden_biases
    zs = [Z]
    hs = [activation(Z, params.activation_kind, params.leaky_slope)]
    if params.depth_extension is not None:
        for M in params.depth_extension:
            Z = hs[-1] @ M.T
            zs.append(Z)
            hs.append(activation(Z, params.activation_kind, params.leaky_slope))
    return zs, hs


def forward_batch(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Network outputs for a batch X of shape (n, d)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.d:
        raise DimensionError(f"expected inputs of shape (n, {params.d}), got {X.shape}")
    _, hs = _hidden_states(params, X)
    return hs[-1] @ params.outer_weights


def forward(params: NetworkParams, x: np.ndarray) -> float:
    """Network output for a single input of length d."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.d,):
        raise DimensionError(f"expected input of shape ({params.d},), got {x.shape}")
    if not np.isfinite(x).all():
        raise InvalidParamsError("non-finite input")
    return float(forward_batch(params, x[None, :])[0])


def surrogate_losses(params: NetworkParams, x: np.ndarray, y: int,
                     loss: LossSpec) -> tuple[float, float]:
    """(loss, -loss') at the margin y * f(x)."""
    if y not in (-1, 1):
        raise InvalidParamsError(f"label must be +-1, got {y}")
    z = y * forward(params, x)
    return float(loss.loss(z)), float(loss.surrogate(z))


@dataclass(frozen=True)
class Gradients:
    """Gradient of the sample loss per trainable block.

    ``hidden`` is always present; the optional blocks are populated only
    when the corresponding parameters are trainable.
    """

    hidden: np.ndarray
    biases: np.ndarray | None = None
    outer: np.ndarray | None = None
    deep: tuple[np.ndarray, ...] | None = None

    def is_finite(self) -> bool:
        blocks = [self.hidden]
        if self.biases is not None:
            blocks.append(self.biases)
        if self.outer is not None:
            blocks.append(self.outer)
        if self.deep is not None:
            blocks.extend(self.deep)
        return all(np.isfinite(b).all() for b in blocks)


def _network_gradients(params: NetworkParams, x: np.ndarray):
    """Gradient of f itself w.r.t. each block (no loss factor)."""
    zs, hs = _hidden_states(params, x[None, :])
    kind, alpha = params.activation_kind, params.leaky_slope
    delta = params.outer_weights * activation_deriv(zs[-1][0], kind, alpha)
    deep_grads = None
    if params.depth_extension is not None:
        deep_grads = [None] * len(params.depth_extension)
        for l in range(len(params.depth_extension) - 1, -1, -1):
            deep_grads[l] = np.outer(delta, hs[l][0])
            delta = (params.depth_extension[l].T @ delta) * activation_deriv(zs[l][0], kind, alpha)
        deep_grads = tuple(deep_grads)
    grad_hidden = np.outer(delta, x)
    grad_biases = delta.copy() if params.hidden_biases is not None else None
    grad_outer = hs[-1][0].copy() if params.outer_trainable else None
    return grad_hidden, grad_biases, grad_outer, deep_grads


def loss_gradient(params: NetworkParams, x: np.ndarray, y: int,
                  loss: LossSpec) -> Gradients:
    """Gradient of loss(y * f(x)) over all trainable blocks."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.d,):
        raise DimensionError(f"expected input of shape ({params.d},), got {x.shape}")
    if y not in (-1, 1):
        raise InvalidParamsError(f"label must be +-1, got {y}")
    gh, gb, go, gd = _network_gradients(params, x)
    scale = float(loss.dloss(y * forward(params, x))) * y
    return Gradients(
        hidden=scale * gh,
        biases=None if gb is None else scale * gb,
        outer=None if go is None else scale * go,
        deep=None if gd is None else tuple(scale * g for g in gd),
    )


def network_gradient_correlation(params: NetworkParams, x: np.ndarray, y: int,
                                 V: np.ndarray) -> float:
    """y * <grad_W f(x), V>, gradient taken w.r.t. hidden weights only.

    V must have unit Frobenius norm (tolerance 1e-10).
    """
    V = np.asarray(V, dtype=np.float64)
    if V.shape != params.hidden_weights.shape:
        raise DimensionError("comparator matrix must match hidden weights shape")
    nf = float(np.linalg.norm(V))
    if abs(nf - 1.0) > 1e-10:
        raise InvalidParamsError(f"comparator must have unit Frobenius norm, got {nf}")
    x = np.asarray(x, dtype=np.float64)
    gh, _, _, _ = _network_gradients(params, x)
    return float(y * np.sum(gh * V))


# ---------------------------------------------------------------------------
# serialization

def params_to_dict(params: NetworkParams) -> dict:
    """JSON-ready layout: header fields, then row-major weight blocks.

    Floats survive the trip exactly because Python's JSON emitter writes
    shortest round-trip representations.
    """
    out = {
        "format": "halfspace-sgd-network",
        "version": _SERIAL_VERSION,
        "m": params.m,
        "d": params.d,
        "leaky_slope": params.leaky_slope,
        "activation": params.activation_kind,
        "outer_trainable": params.outer_trainable,
        "hidden_weights": params.hidden_weights.ravel().tolist(),
        "outer_weights": params.outer_weights.tolist(),
        "hidden_biases": None if params.hidden_biases is None else params.hidden_biases.tolist(),
        "depth_extension": None if params.depth_extension is None
        else [M.ravel().tolist() for M in params.depth_extension],
    }
    return out


def params_from_dict(data: dict) -> NetworkParams:
    if data.get("format") != "halfspace-sgd-network":
        raise InvalidParamsError("not a network snapshot")
    m, d = int(data["m"]), int(data["d"])
    deep = data.get("depth_extension")
    return NetworkParams(
        hidden_weights=np.asarray(data["hidden_weights"], dtype=np.float64).reshape(m, d),
        outer_weights=np.asarray(data["outer_weights"], dtype=np.float64),
        leaky_slope=float(data["leaky_slope"]),
        hidden_biases=None if data.get("hidden_biases") is None
        else np.asarray(data["hidden_biases"], dtype=np.float64),
        outer_trainable=bool(data.get("outer_trainable", False)),
        depth_extension=None if deep is None
        else tuple(np.asarray(M, dtype=np.float64).reshape(m, m) for M in deep),
        activation_kind=data.get("activation", LEAKY_RELU),
    )


def params_to_json(params: NetworkParams) -> str:
    return json.dumps(params_to_dict(params), sort_keys=True)


def params_from_json(text: str) -> NetworkParams:
    return params_from_dict(json.loads(text))


def params_to_bytes(params: NetworkParams) -> bytes:
    """Binary layout: magic, version, header, little-endian float64 blocks."""
    buf = io.BytesIO()
    flags = (1 if params.hidden_biases is not None else 0) \
        | (2 if params.outer_trainable else 0) \
        | (4 if params.activation_kind == TANH else 0)
    n_deep = 0 if params.depth_extension is None else len(params.depth_extension)
    buf.write(_SERIAL_MAGIC)
    buf.write(struct.pack("<HHqqd", _SERIAL_VERSION, flags, params.m, params.d,
                          params.leaky_slope))
    buf.write(struct.pack("<q", n_deep))
    buf.write(params.hidden_weights.astype("<f8").tobytes())
    buf.write(params.outer_weights.astype("<f8").tobytes())
    if params.hidden_biases is not None:
        buf.write(params.hidden_biases.astype("<f8").tobytes())
    if params.depth_extension is not None:
        for M in params.depth_extension:
            buf.write(M.astype("<f8").tobytes())
    return buf.getvalue()


def params_from_bytes(raw: bytes) -> NetworkParams:
    buf = io.BytesIO(raw)
    if buf.read(4) != _SERIAL_MAGIC:
        raise InvalidParamsError("bad magic in binary snapshot")
    version, flags, m, d, alpha = struct.unpack("<HHqqd", buf.read(28))
    if version != _SERIAL_VERSION:
        raise InvalidParamsError(f"unsupported snapshot version {version}")
    (n_deep,) = struct.unpack("<q", buf.read(8))

    def block(count):
        return np.frombuffer(buf.read(8 * count), dtype="<f8").astype(np.float64)

    W = block(m * d).reshape(m, d)
    outer = block(m)
    biases = block(m) if flags & 1 else None
    deep = tuple(block(m * m).reshape(m, m) for _ in range(n_deep)) if n_deep else None
    return NetworkParams(W, outer, leaky_slope=alpha, hidden_biases=biases,
                         outer_trainable=bool(flags & 2), depth_extension=deep,
                         activation_kind=TANH if flags & 4 else LEAKY_RELU)


def with_updates(params: NetworkParams, **arrays) -> NetworkParams:
    """New snapshot with some weight blocks replaced."""
    return replace(params, **arrays)
