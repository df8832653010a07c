"""Two-layer network ``U(x) = W2 . sigma(W1^T x + b1) + b2`` with exact derivatives.

Everything is batched over points: ``x`` has shape ``(n, p)`` (a single
point of shape ``(p,)`` is promoted). Preactivations ``z`` are ``(n, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


# ---------------------------------------------------------------------------
# activations


@dataclass(frozen=True)
class Activation:
    kind: str

    def __post_init__(self):
        if self.kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.kind!r}; expected one of {sorted(ACTIVATIONS)}")

    def __call__(self, s):
        return ACTIVATIONS[self.kind][0](s)

    def d1(self, s):
        return ACTIVATIONS[self.kind][1](s)

    def d2(self, s):
        return ACTIVATIONS[self.kind][2](s)

    def all(self, s):
        """Value, first and second derivative in one pass."""
        if self.kind == "relu2":
            pos = np.maximum(s, 0.0)
            return pos * pos, 2.0 * pos, 2.0 * (s > 0)
        if self.kind == "sigmoid":
            g = _sigmoid(s)
            g1 = g * (1.0 - g)
            return g, g1, g1 * (1.0 - 2.0 * g)
        t = np.tanh(s)
        g1 = 1.0 - t * t
        return t, g1, -2.0 * t * g1


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def _relu2(s):
    return np.maximum(s, 0.0) ** 2


def _relu2_d1(s):
    return 2.0 * np.maximum(s, 0.0)


def _relu2_d2(s):
    return 2.0 * (np.asarray(s) > 0)


def _sigmoid_d1(s):
    g = _sigmoid(s)
    return g * (1.0 - g)


def _sigmoid_d2(s):
    g = _sigmoid(s)
    return g * (1.0 - g) * (1.0 - 2.0 * g)


def _tanh_d1(s):
    return 1.0 - np.tanh(s) ** 2


def _tanh_d2(s):
    t = np.tanh(s)
    return -2.0 * t * (1.0 - t * t)


ACTIVATIONS = {
    "relu2": (_relu2, _relu2_d1, _relu2_d2),
    "sigmoid": (_sigmoid, _sigmoid_d1, _sigmoid_d2),
    "tanh": (np.tanh, _tanh_d1, _tanh_d2),
}


# ---------------------------------------------------------------------------
# parameters


@dataclass
class NetworkParams:
    """Parameters ``W1 (p, N)``, ``b1 (N,)``, ``W2 (N,)``, ``b2`` (scalar).

    The same container is used for gradient bundles, where fields may carry
    extra leading (batch) or trailing (spatial) axes.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def p(self) -> int:
        return self.W1.shape[0]

    @property
    def N(self) -> int:
        return self.W1.shape[1]

    @property
    def size(self) -> int:
        return self.p * self.N + 2 * self.N + 1

    def validate(self) -> None:
        p, N = self.W1.shape
        if N < 1:
            raise ValueError("need at least one neuron")
        if self.b1.shape != (N,) or self.W2.shape != (N,) or np.shape(self.b2) != ():
            raise ValueError("inconsistent parameter shapes")
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("non-finite parameter entries")

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2, [float(self.b2)]])

    @classmethod
    def from_vector(cls, vec, p: int, N: int) -> "NetworkParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (p * N + 2 * N + 1,):
            raise ValueError(f"vector of length {vec.shape} does not match p={p}, N={N}")
        i = p * N
        return cls(
            W1=vec[:i].reshape(p, N).copy(),
            b1=vec[i:i + N].copy(),
            W2=vec[i + N:i + 2 * N].copy(),
            b2=np.float64(vec[-1]),
        )

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.W1.copy(), self.b1.copy(), self.W2.copy(), np.float64(self.b2))

    def to_dict(self) -> dict:
        return {"W1": self.W1.tolist(), "b1": self.b1.tolist(), "W2": self.W2.tolist(), "b2": float(self.b2)}

    @classmethod
    def from_dict(cls, d) -> "NetworkParams":
        W1 = np.array(d["W1"], dtype=float)
        return cls(W1, np.array(d["b1"], dtype=float), np.array(d["W2"], dtype=float), np.float64(d["b2"]))


def init_params(p: int, N: int, seed: int, scale: float = 1.0) -> NetworkParams:
    """I.i.d. uniform entries on ``[-scale, scale]`` drawn from a seeded PCG64 stream."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(seed)
    vec = rng.uniform(-1.0, 1.0, size=p * N + 2 * N + 1) * scale
    return NetworkParams.from_vector(vec, p, N)


# ---------------------------------------------------------------------------
# evaluation


def _points(x, p):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = x.reshape(1, -1) if single else x
    if x.shape[1] != p:
        raise ValueError(f"points have dimension {x.shape[1]}, network expects {p}")
    return x, single


def _squeeze(arr, single):
    return arr[0] if single else arr


def preactivation(params: NetworkParams, x) -> np.ndarray:
    x, _ = _points(x, params.p)
    return x @ params.W1 + params.b1


def forward(params: NetworkParams, act: Activation, x):
    x, single = _points(x, params.p)
    out = act(x @ params.W1 + params.b1) @ params.W2 + params.b2
    return float(out[0]) if single else out


def grad_x(params: NetworkParams, act: Activation, x):
    """Spatial gradient ``W1 diag(sigma'(z)) W2``, shape ``(n, p)``."""
    x, single = _points(x, params.p)
    s1 = act.d1(x @ params.W1 + params.b1)
    return _squeeze((s1 * params.W2) @ params.W1.T, single)


def grad_theta(params: NetworkParams, act: Activation, x) -> NetworkParams:
    """Per-point parameter gradient of ``U``; fields gain a leading batch axis."""
    x, single = _points(x, params.p)
    z = x @ params.W1 + params.b1
    s0, s1 = act(z), act.d1(z)
    gb1 = s1 * params.W2
    out = NetworkParams(
        W1=x[:, :, None] * gb1[:, None, :],
        b1=gb1,
        W2=s0,
        b2=np.ones(x.shape[0]),
    )
    if single:
        out = NetworkParams(out.W1[0], out.b1[0], out.W2[0], np.float64(1.0))
    return out


def grad_theta_of_grad_x(params: NetworkParams, act: Activation, x) -> NetworkParams:
    """Per-point parameter derivatives of ``grad_x``; fields gain a trailing axis of size p.

    ``out.W1[i, m, j, k] = d(dU/dx_k)/dW1[m, j]`` at point ``i``.
    """
    x, single = _points(x, params.p)
    n, p = x.shape
    z = x @ params.W1 + params.b1
    s1, s2 = act.d1(z), act.d2(z)
    W1, W2 = params.W1, params.W2
    # d(grad_k)/dW2_j = W1[k, j] s1_j
    dW2 = s1[:, :, None] * W1.T[None, :, :]
    # d(grad_k)/db1_j = W1[k, j] W2_j s2_j
    db1 = (W2 * s2)[:, :, None] * W1.T[None, :, :]
    # d(grad_k)/dW1[m, j] = delta_km W2_j s1_j + W1[k, j] W2_j s2_j x_m
    dW1 = x[:, :, None, None] * db1[:, None, :, :]
    eye = np.eye(p)
    dW1 = dW1 + (W2 * s1)[:, None, :, None] * eye[None, :, None, :]
    out = NetworkParams(W1=dW1, b1=db1, W2=dW2, b2=np.zeros((n, p)))
    if single:
        out = NetworkParams(out.W1[0], out.b1[0], out.W2[0], out.b2[0])
    return out


def evaluate(params: NetworkParams, act: Activation, x):
    """``U`` and ``grad_x U`` at a batch of points, sharing the preactivation."""
    x, _ = _points(x, params.p)
    return _kernels.evaluate(np.ascontiguousarray(x), params.W1, params.b1, params.W2,
                             float(params.b2), _kernels.CODES[act.kind])


def _evaluate_numpy(params: NetworkParams, act: Activation, x):
    x, _ = _points(x, params.p)
    s0, s1, _ = act.all(x @ params.W1 + params.b1)
    return s0 @ params.W2 + params.b2, (s1 * params.W2) @ params.W1.T


def pullback(params: NetworkParams, act: Activation, x, value_coef, grad_coef) -> NetworkParams:
    """Contract parameter derivatives against per-point weights.

    Returns ``sum_i value_coef[i] * dU(x_i)/dtheta
    + sum_i grad_coef[i] . d(grad_x U)(x_i)/dtheta`` without forming the
    per-point bundles.
    """
    x, _ = _points(x, params.p)
    c = np.ascontiguousarray(value_coef, dtype=float)
    a = np.ascontiguousarray(np.asarray(grad_coef, dtype=float).reshape(x.shape))
    gW1, gb1, gW2, gb2 = _kernels.pullback(np.ascontiguousarray(x), params.W1, params.b1, params.W2,
                                           _kernels.CODES[act.kind], c, a)
    return NetworkParams(W1=gW1, b1=gb1, W2=gW2, b2=np.float64(gb2))


def _pullback_numpy(params: NetworkParams, act: Activation, x, value_coef, grad_coef) -> NetworkParams:
    x, _ = _points(x, params.p)
    z = x @ params.W1 + params.b1
    s0, s1, s2 = act.all(z)
    W1, W2 = params.W1, params.W2
    c = np.asarray(value_coef, dtype=float)
    a = np.asarray(grad_coef, dtype=float).reshape(x.shape)
    A = a @ W1                       # (n, N): a_i . W1[:, j]
    gW2 = c @ s0 + np.sum(A * s1, axis=0)
    t1 = c[:, None] * s1 + A * s2    # coefficient multiplying x_m W2_j
    gb1 = W2 * np.sum(t1, axis=0)
    gW1 = (x.T @ t1) * W2 + (a.T @ s1) * W2
    return NetworkParams(W1=gW1, b1=gb1, W2=gW2, b2=np.float64(np.sum(c)))
