"""Hamiltonian models on phase space.

Defines the phase-space point and Hamiltonian-evaluator types together
with the built-in integrable models (free motion, constant field, and
the harmonic trap) and a generic polynomial model for exercising the
non-quadratic code paths.

The mass convention throughout is ``H = |p|^2 + V(q)`` (no 1/2 factor);
all closed-form flows, actions, and variational frames below depend on
it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError

__all__ = ["PhasePoint", "HamiltonianModel", "builtin_model", "polynomial_model"]

BUILTIN_KINDS = ("free", "linear", "harmonic")


@dataclass(frozen=True)
class PhasePoint:
    """A point ``X = (q, p)`` of 2d-dimensional phase space.

    Parameters
    ----------
    q, p : array_like
        Position and momentum coordinates of equal length ``d >= 1``.
        Scalars are promoted to length-1 vectors.
    """

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.ndim != 1 or p.ndim != 1 or q.size != p.size or q.size < 1:
            raise ConfigurationError(
                "PhasePoint requires q and p of equal length d >= 1, got "
                f"shapes {q.shape} and {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ConfigurationError("PhasePoint coordinates must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def d(self) -> int:
        return self.q.size

    def as_vector(self) -> np.ndarray:
        """Return the concatenated coordinate vector ``(q, p)``."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, v) -> "PhasePoint":
        v = np.asarray(v, dtype=float)
        d = v.size // 2
        return cls(v[:d], v[d:])


@dataclass(frozen=True)
class HamiltonianModel:
    """Evaluator bundle for a smooth Hamiltonian ``H(q, p)``.

    Fields
    ------
    dim : int
        Number of position dimensions ``d``.
    value, gradient, hessian : callables of a :class:`PhasePoint`
        ``H``, ``(dH/dq, dH/dp)`` as a 2d-vector, and the symmetric
        2d x 2d second-derivative matrix in ``(q, p)`` block order.
    exact_flow : callable ``(X, t) -> PhasePoint``, optional
        Closed-form Hamiltonian flow, attached for the built-ins.
    kind : str, optional
        Built-in kind tag (``free``/``linear``/``harmonic``) or
        ``polynomial``.

    The remaining private hooks carry closed-form trajectory data for
    the quadratic built-ins (batched flow/action over coordinate
    arrays, base-point-independent variational frames, and the inverse
    flow); the flow module uses them for its ``exact`` method.
    """

    dim: int
    value: Callable[[PhasePoint], float]
    gradient: Callable[[PhasePoint], np.ndarray]
    hessian: Callable[[PhasePoint], np.ndarray]
    exact_flow: Callable[[PhasePoint, float], PhasePoint] | None = None
    kind: str | None = None
    # closed-form hooks (present only when exact_flow is); not part of
    # the public surface
    bulk_flow: Callable | None = field(default=None, repr=False)
    bulk_action: Callable | None = field(default=None, repr=False)
    frame_at: Callable | None = field(default=None, repr=False)
    inverse_flow: Callable | None = field(default=None, repr=False)

    def action(self, X: PhasePoint, t: float) -> float:
        """Closed-form phase-space action, when available."""
        if self.bulk_action is None:
            raise ConfigurationError(
                f"model kind={self.kind!r} carries no closed-form action")
        return float(self.bulk_action(X.q, X.p, t).sum())


def _free_pieces(d):
    def value(X):
        return float(np.dot(X.p, X.p))

    def gradient(X):
        return np.concatenate([np.zeros(d), 2.0 * X.p])

    def hessian(X):
        H = np.zeros((2 * d, 2 * d))
        H[d:, d:] = 2.0 * np.eye(d)
        return H

    def flow(X, t):
        return PhasePoint(X.q + 2.0 * t * X.p, X.p)

    def bulk_flow(q, p, t):
        return q + 2.0 * t * p, p + 0.0 * q

    def bulk_action(q, p, t):
        return p ** 2 * t

    def frame_at(t):
        A = 1.0 + 2.0j * t
        return (A * np.eye(d), 1.0j * np.eye(d),
                d * np.log(A), d * np.log(A + 1.0))  # A - iB = 2 + 2it

    def inverse_flow(X, t):
        return PhasePoint(X.q - 2.0 * t * X.p, X.p)

    return value, gradient, hessian, flow, bulk_flow, bulk_action, frame_at, inverse_flow


def _linear_pieces(d):
    def value(X):
        return float(np.dot(X.p, X.p) + np.sum(X.q))

    def gradient(X):
        return np.concatenate([np.ones(d), 2.0 * X.p])

    def hessian(X):
        H = np.zeros((2 * d, 2 * d))
        H[d:, d:] = 2.0 * np.eye(d)
        return H

    def flow(X, t):
        return PhasePoint(X.q + 2.0 * t * X.p - t ** 2, X.p - t)

    def bulk_flow(q, p, t):
        return q + 2.0 * t * p - t ** 2, p - t

    def bulk_action(q, p, t):
        return (p ** 2 - q) * t - 2.0 * p * t ** 2 + 2.0 * t ** 3 / 3.0

    def frame_at(t):
        A = 1.0 + 2.0j * t
        return (A * np.eye(d), 1.0j * np.eye(d),
                d * np.log(A), d * np.log(A + 1.0))

    def inverse_flow(X, t):
        return PhasePoint(X.q - 2.0 * t * X.p - t ** 2, X.p + t)

    return value, gradient, hessian, flow, bulk_flow, bulk_action, frame_at, inverse_flow


def _harmonic_pieces(d):
    def value(X):
        return float(np.dot(X.p, X.p) + np.dot(X.q, X.q))

    def gradient(X):
        return np.concatenate([2.0 * X.q, 2.0 * X.p])

    def hessian(X):
        return 2.0 * np.eye(2 * d)

    def flow(X, t):
        c, s = np.cos(2.0 * t), np.sin(2.0 * t)
        return PhasePoint(c * X.q + s * X.p, c * X.p - s * X.q)

    def bulk_flow(q, p, t):
        c, s = np.cos(2.0 * t), np.sin(2.0 * t)
        return c * q + s * p, c * p - s * q

    def bulk_action(q, p, t):
        return (0.25 * (p ** 2 - q ** 2) * np.sin(4.0 * t)
                + 0.5 * p * q * (np.cos(4.0 * t) - 1.0))

    def frame_at(t):
        # A = e^{2it} I, B = i e^{2it} I; both logs continued from 0
        w = np.exp(2.0j * t)
        return (w * np.eye(d), 1.0j * w * np.eye(d),
                d * 2.0j * t, d * (np.log(2.0) + 2.0j * t))

    def inverse_flow(X, t):
        return flow(X, -t)

    return value, gradient, hessian, flow, bulk_flow, bulk_action, frame_at, inverse_flow


def builtin_model(kind: str, d: int = 1) -> HamiltonianModel:
    """Return one of the built-in integrable models.

    Parameters
    ----------
    kind : {"free", "linear", "harmonic"}
        ``free``: H = |p|^2, flow (q + 2tp, p).
        ``linear``: H = |p|^2 + sum(q), flow (q + 2tp - t^2, p - t).
        ``harmonic``: H = |p|^2 + |q|^2, flow = rotation with entries
        cos 2t, sin 2t.
    d : int
        Dimension; built-ins are coordinate-wise sums, so any d >= 1.

    All three carry exact flows, actions, base-point-independent
    variational frames (their Hessians are constant), and inverse
    flows.
    """
    if kind not in BUILTIN_KINDS:
        raise ConfigurationError(
            f"model.kind: unknown kind {kind!r}; expected one of {BUILTIN_KINDS}")
    if d < 1:
        raise ConfigurationError(f"model dimension must be >= 1, got {d}")
    pieces = {"free": _free_pieces, "linear": _linear_pieces,
              "harmonic": _harmonic_pieces}[kind](d)
    value, gradient, hessian, flow, bulk_flow, bulk_action, frame_at, inv = pieces
    return HamiltonianModel(dim=d, value=value, gradient=gradient,
                            hessian=hessian, exact_flow=flow, kind=kind,
                            bulk_flow=bulk_flow, bulk_action=bulk_action,
                            frame_at=frame_at, inverse_flow=inv)


def polynomial_model(coeffs: Mapping[tuple[int, int], float],
                     d: int = 1) -> HamiltonianModel:
    """Hamiltonian from polynomial coefficients, ``d = 1`` only.

    Parameters
    ----------
    coeffs : mapping ``(i, j) -> c``
        Term ``c * q**i * p**j``; total degree ``i + j`` at most 4
        (keeps the derivative stacks bounded).

    Derivatives are computed exactly from the coefficients.  No exact
    flow is attached; the flow module integrates these numerically.
    """
    if d != 1:
        raise ConfigurationError("polynomial_model is implemented for d=1")
    terms = []
    for (i, j), c in coeffs.items():
        i, j, c = int(i), int(j), float(c)
        if i < 0 or j < 0:
            raise ConfigurationError(f"model.coeffs: negative exponent ({i},{j})")
        if i + j > 4:
            raise ConfigurationError(
                f"model.coeffs: total degree {i + j} of term ({i},{j}) exceeds 4")
        if not np.isfinite(c):
            raise ConfigurationError(f"model.coeffs: non-finite coefficient at ({i},{j})")
        if c != 0.0:
            terms.append((i, j, c))

    def value(X):
        q, p = X.q[0], X.p[0]
        return float(sum(c * q ** i * p ** j for i, j, c in terms))

    def gradient(X):
        q, p = X.q[0], X.p[0]
        gq = sum(c * i * q ** (i - 1) * p ** j for i, j, c in terms if i > 0)
        gp = sum(c * j * q ** i * p ** (j - 1) for i, j, c in terms if j > 0)
        return np.array([gq, gp], dtype=float)

    def hessian(X):
        q, p = X.q[0], X.p[0]
        hqq = sum(c * i * (i - 1) * q ** (i - 2) * p ** j for i, j, c in terms if i > 1)
        hpp = sum(c * j * (j - 1) * q ** i * p ** (j - 2) for i, j, c in terms if j > 1)
        hqp = sum(c * i * j * q ** (i - 1) * p ** (j - 1)
                  for i, j, c in terms if i > 0 and j > 0)
        return np.array([[hqq, hqp], [hqp, hpp]], dtype=float)

    return HamiltonianModel(dim=1, value=value, gradient=gradient,
                            hessian=hessian, kind="polynomial")
